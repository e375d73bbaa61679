//! Per-mode measurement ensembles, multi-way sampling
//! `Y = X x1 U_1 ... xd U_d`, the equivalent Kronecker operator, and
//! the measurement-count bounds.

use crate::error::{Error, Result};
use crate::tensor::{kronecker, mode_n_product, DenseTensor, ModeIndex};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as SampleDist, StandardNormal};
use serde::{Deserialize, Serialize};

/// Entry distribution for measurement matrices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Gaussian,
    Bernoulli,
}

/// One measurement matrix per mode, regenerable bit-exactly from
/// `(distribution, seed, dims)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEnsemble {
    pub matrices: Vec<DMatrix<f64>>,
    pub distribution: Distribution,
    pub seed: u64,
    /// Signal dims `N_i`.
    pub signal_dims: Vec<usize>,
    /// Measurement dims `m_i`.
    pub measure_dims: Vec<usize>,
}

impl MeasurementEnsemble {
    pub fn order(&self) -> usize {
        self.matrices.len()
    }
}

/// Draws the per-mode matrices; mode `i` uses its own generator stream
/// so any one matrix is independent of the others' shapes. Gaussian
/// entries are `N(0, 1/m_i)`, Bernoulli entries `+-1/sqrt(m_i)`, giving
/// unit expected column norm. Entries fill column by column.
pub fn generate_ensemble(
    dims: &[usize],
    measures: &[usize],
    distribution: Distribution,
    seed: u64,
) -> Result<MeasurementEnsemble> {
    if dims.is_empty() || dims.len() != measures.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} signal dims vs {} measurement dims",
            dims.len(),
            measures.len()
        )));
    }
    for (i, (&n, &m)) in dims.iter().zip(measures).enumerate() {
        if n == 0 || m == 0 || m > n {
            return Err(Error::ShapeMismatch(format!(
                "mode {}: need 1 <= m <= N, got m={m}, N={n}",
                i + 1
            )));
        }
    }
    let mut matrices = Vec::with_capacity(dims.len());
    for (i, (&n, &m)) in dims.iter().zip(measures).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let scale = 1.0 / (m as f64).sqrt();
        let mut mat = DMatrix::zeros(m, n);
        for c in 0..n {
            for r in 0..m {
                mat[(r, c)] = match distribution {
                    Distribution::Gaussian => {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g * scale
                    }
                    Distribution::Bernoulli => {
                        if rng.gen::<bool>() {
                            scale
                        } else {
                            -scale
                        }
                    }
                };
            }
        }
        matrices.push(mat);
    }
    Ok(MeasurementEnsemble {
        matrices,
        distribution,
        seed,
        signal_dims: dims.to_vec(),
        measure_dims: measures.to_vec(),
    })
}

/// Multi-way sampling `Y = X x1 U_1 x2 U_2 ... xd U_d`.
pub fn sample(x: &DenseTensor, e: &MeasurementEnsemble) -> Result<DenseTensor> {
    if x.shape() != e.signal_dims.as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "tensor shape {:?} vs ensemble signal dims {:?}",
            x.shape(),
            e.signal_dims
        )));
    }
    let mut y = x.clone();
    for (i, u) in e.matrices.iter().enumerate() {
        y = mode_n_product(&y, u, ModeIndex::new(i + 1)?)?;
    }
    Ok(y)
}

/// Default cap on materialized Kronecker operator elements.
pub const KCS_ELEMENT_CAP: u128 = 1 << 31;

/// The dense `(prod m_i) x (prod N_i)` operator `U_d kron ... kron U_1`
/// satisfying `vectorize(sample(X, E)) = kcs_operator(E) * vectorize(X)`.
pub fn kcs_operator(e: &MeasurementEnsemble) -> Result<DMatrix<f64>> {
    kcs_operator_capped(e, KCS_ELEMENT_CAP)
}

pub fn kcs_operator_capped(e: &MeasurementEnsemble, cap: u128) -> Result<DMatrix<f64>> {
    let rows: u128 = e.measure_dims.iter().map(|&m| m as u128).product();
    let cols: u128 = e.signal_dims.iter().map(|&n| n as u128).product();
    let elements = rows * cols;
    if elements > cap {
        return Err(Error::SizeOverflow { elements, cap });
    }
    let mut a = e.matrices[0].clone();
    for u in &e.matrices[1..] {
        a = kronecker(u, &a);
    }
    Ok(a)
}

/// Constant and sparsity for the measurement-count bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundParams {
    pub c: f64,
    pub s: usize,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams { c: 1.0, s: 1 }
    }
}

impl BoundParams {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::Config("bound constant c must be positive".into()));
        }
        if self.s == 0 {
            return Err(Error::Config("sparsity s must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_compressible(n: usize, s: usize) -> Result<()> {
    if n <= s {
        return Err(Error::Config(format!(
            "bound vacuous: N={n} must exceed s={s}"
        )));
    }
    Ok(())
}

fn per_mode_raw(n: usize, p: &BoundParams) -> f64 {
    2.0 * p.c * p.s as f64 * ((n as f64) / (p.s as f64)).ln()
}

/// Per-mode count `ceil(2 c s ln(N/s))`.
pub fn bound_per_mode(n: usize, p: &BoundParams) -> Result<u64> {
    p.validate()?;
    check_compressible(n, p.s)?;
    Ok(per_mode_raw(n, p).ceil() as u64)
}

/// Vectorized count `ceil(2 c s (-ln s + sum ln N_i))` for recovery
/// through the single Kronecker operator.
pub fn bound_kcs(dims: &[usize], p: &BoundParams) -> Result<u64> {
    p.validate()?;
    if dims.is_empty() {
        return Err(Error::ShapeMismatch("empty dims".into()));
    }
    let mut log_sum = -(p.s as f64).ln();
    for &n in dims {
        check_compressible(n, p.s)?;
        log_sum += (n as f64).ln();
    }
    Ok((2.0 * p.c * p.s as f64 * log_sum).ceil() as u64)
}

/// Total mode-wise count `ceil((2 c s)^d prod ln(N_i/s))`, the product
/// of the per-mode bounds before rounding.
pub fn bound_gtcs_total(dims: &[usize], p: &BoundParams) -> Result<u64> {
    p.validate()?;
    if dims.is_empty() {
        return Err(Error::ShapeMismatch("empty dims".into()));
    }
    let mut product = 1.0;
    for &n in dims {
        check_compressible(n, p.s)?;
        product *= per_mode_raw(n, p);
    }
    Ok(product.ceil() as u64)
}
