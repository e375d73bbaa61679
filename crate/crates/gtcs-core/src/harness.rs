//! Experiment harness: phantom and compressible data generation, the
//! PSNR metric, and deterministic parameter sweeps over measurement
//! count and MWCS rank with CSV and JSON emission.

use crate::error::{Error, Result};
use crate::io;
use crate::recovery::{
    gtcs_p, gtcs_s, kcs_recover, mwcs_recover, DecompositionKind, Method, RecoveryReport,
};
use crate::sensing::{generate_ensemble, sample, Distribution, MeasurementEnsemble};
use crate::solver::SolverConfig;
use crate::tensor::DenseTensor;
use crate::transform::SparsifyingBasis;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::PathBuf;

/// PSNR ceiling standing in for +infinity when the MSE vanishes.
pub const PSNR_CAP_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    SparseImage,
    CompressibleImage,
    SparseVideo,
    CompressibleVideo,
    File,
}

impl Dataset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Dataset::SparseImage => "sparse_image",
            Dataset::CompressibleImage => "compressible_image",
            Dataset::SparseVideo => "sparse_video",
            Dataset::CompressibleVideo => "compressible_video",
            Dataset::File => "file",
        }
    }
}

/// Placement plan for sparse phantoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportSpec {
    /// Exactly `nonzeros` binary cells scattered over a centered
    /// square block of a matrix, with per-column and per-row sparsity
    /// caps. The block side is one cell past the tightest square that
    /// can hold the cells under the caps, clamped by the larger cap
    /// and the dims, so the occupied extent and the fiber sparsities
    /// stay close to the caps, as in a block-letter image.
    CappedMatrix {
        nonzeros: usize,
        col_cap: usize,
        row_cap: usize,
    },
    /// Centered block of seeded positive values.
    CenteredBlock { block: Vec<usize> },
    /// Empty support.
    Zero,
}

/// Builds a sparse phantom with a constructive, seeded placement.
pub fn gen_sparse_phantom(dims: &[usize], spec: &SupportSpec, seed: u64) -> Result<DenseTensor> {
    let mut x = DenseTensor::zeros(dims.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec {
        SupportSpec::Zero => {}
        SupportSpec::CenteredBlock { block } => {
            if block.len() != dims.len() {
                return Err(Error::InfeasibleSupportSpec(format!(
                    "block order {} vs tensor order {}",
                    block.len(),
                    dims.len()
                )));
            }
            for (b, n) in block.iter().zip(dims) {
                if b > n {
                    return Err(Error::InfeasibleSupportSpec(format!(
                        "block {block:?} exceeds dims {dims:?}"
                    )));
                }
            }
            let start: Vec<usize> = dims.iter().zip(block).map(|(n, b)| (n - b) / 2).collect();
            let mut idx = vec![0usize; dims.len()];
            let cells: usize = block.iter().product();
            for flat in 0..cells {
                let mut rem = flat;
                for (j, b) in block.iter().enumerate() {
                    idx[j] = start[j] + rem % b;
                    rem /= b;
                }
                x.set(&idx, rng.gen_range(0.5..1.5));
            }
        }
        SupportSpec::CappedMatrix {
            nonzeros,
            col_cap,
            row_cap,
        } => {
            if dims.len() != 2 {
                return Err(Error::InfeasibleSupportSpec(format!(
                    "capped placement needs a matrix, got order {}",
                    dims.len()
                )));
            }
            let nz = *nonzeros;
            if nz == 0 {
                return Ok(x);
            }
            let side_limit = (*col_cap).max(*row_cap).min(dims[0]).min(dims[1]);
            let fits = |s: usize| nz <= s * (*col_cap).min(s) && nz <= s * (*row_cap).min(s);
            let Some(tightest) = (1..=side_limit).find(|&s| fits(s)) else {
                return Err(Error::InfeasibleSupportSpec(format!(
                    "{nz} nonzeros do not fit {dims:?} under col cap {col_cap}, row cap {row_cap}"
                )));
            };
            // One spare cell of extent keeps the placement from
            // saturating every fiber; a saturated square is a grid,
            // not a glyph.
            let side = (tightest + 1).min(side_limit);
            let col_budget = (*col_cap).min(side);
            let row_budget = (*row_cap).min(side);
            let r0 = (dims[0] - side) / 2;
            let c0 = (dims[1] - side) / 2;
            let mut cells: Vec<(usize, usize)> =
                (0..side * side).map(|f| (f % side, f / side)).collect();
            cells.shuffle(&mut rng);
            // One budget always equals the side, so the scan below
            // never dead-ends before `nz` cells are placed.
            let mut col_fill = vec![0usize; side];
            let mut row_fill = vec![0usize; side];
            let mut placed = 0usize;
            for (r, c) in cells {
                if placed == nz {
                    break;
                }
                if col_fill[c] < col_budget && row_fill[r] < row_budget {
                    col_fill[c] += 1;
                    row_fill[r] += 1;
                    x.set(&[r0 + r, c0 + c], 1.0);
                    placed += 1;
                }
            }
            debug_assert_eq!(placed, nz);
        }
    }
    Ok(x)
}

/// Compressible data: transform-domain coefficients with power-law
/// magnitudes `(1+r)^-decay` ordered low frequency first (seeded tie
/// break and signs), synthesized through the per-mode DCT.
pub fn gen_compressible(dims: &[usize], decay: f64, seed: u64) -> Result<DenseTensor> {
    if !(decay > 0.0) {
        return Err(Error::Config(format!("decay must be positive, got {decay}")));
    }
    let len: usize = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(f64, usize)> = (0..len)
        .map(|flat| {
            let mut rem = flat;
            let mut key = 0.0;
            for &n in dims {
                key += (rem % n) as f64 / n as f64;
                rem /= n;
            }
            (key + rng.gen::<f64>() * 1e-9, flat)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut coeffs = vec![0.0; len];
    for (rank, &(_, flat)) in keyed.iter().enumerate() {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        coeffs[flat] = sign * (1.0 + rank as f64).powf(-decay);
    }
    let g = DenseTensor::new(dims.to_vec(), coeffs)?;
    SparsifyingBasis::Dct2.from_transform_domain(&g)
}

/// Peak signal-to-noise ratio in dB; `peak` defaults to the largest
/// magnitude of the reference. Zero MSE reports the 300 dB cap.
pub fn psnr(reference: &DenseTensor, estimate: &DenseTensor, peak: Option<f64>) -> Result<f64> {
    if reference.shape() != estimate.shape() {
        return Err(Error::ShapeMismatch(format!(
            "psnr shapes {:?} vs {:?}",
            reference.shape(),
            estimate.shape()
        )));
    }
    if reference.len() == 0 {
        return Err(Error::Config("psnr of an empty tensor".into()));
    }
    let peak = match peak {
        Some(p) => p,
        None => reference.data().iter().fold(0.0f64, |a, &v| a.max(v.abs())),
    };
    if !(peak > 0.0) {
        return Err(Error::Config(format!("psnr peak must be positive, got {peak}")));
    }
    let mut mse = 0.0;
    for (a, b) in reference.data().iter().zip(estimate.data()) {
        mse += (a - b) * (a - b);
    }
    mse /= reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn default_decay() -> f64 {
    1.5
}

/// One sweep definition; serializable as a JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: Dataset,
    pub dims: Vec<usize>,
    /// Sparse phantom plan; defaults per dataset when omitted.
    #[serde(default)]
    pub support: Option<SupportSpec>,
    /// Power-law exponent for compressible datasets.
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// GTCS1 input for `dataset = "file"`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    pub methods: Vec<Method>,
    /// Per-mode measurement counts to sweep.
    pub m_values: Vec<usize>,
    /// MWCS ranks to sweep; ignored by the other methods.
    #[serde(default)]
    pub ranks: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub distribution: Distribution,
    #[serde(default)]
    pub basis: SparsifyingBasis,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub csv_out: Option<PathBuf>,
    #[serde(default)]
    pub reports_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!("invalid dims {:?}", self.dims)));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods list is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds list is empty".into()));
        }
        let min_dim = *self.dims.iter().min().unwrap();
        for &m in &self.m_values {
            if m == 0 || m > min_dim {
                return Err(Error::Config(format!(
                    "m = {m} outside [1, {min_dim}] for dims {:?}",
                    self.dims
                )));
            }
        }
        if self.methods.contains(&Method::Mwcs)
            && (self.ranks.is_empty() || self.ranks.contains(&0))
        {
            return Err(Error::Config(
                "MWCS sweeps need a nonempty ranks list of positive ranks".into(),
            ));
        }
        if self.dataset == Dataset::File && self.input.is_none() {
            return Err(Error::Config("file dataset needs an input path".into()));
        }
        if !(self.decay > 0.0) {
            return Err(Error::Config(format!(
                "decay must be positive, got {}",
                self.decay
            )));
        }
        self.solver.validate()
    }

    /// Effective support: the explicit plan when given, otherwise the
    /// per-dataset default.
    pub fn support_plan(&self) -> SupportSpec {
        match (&self.support, self.dataset) {
            (Some(s), _) => s.clone(),
            (None, Dataset::SparseImage) => SupportSpec::CappedMatrix {
                nonzeros: 178,
                col_cap: 14,
                row_cap: 18,
            },
            (None, _) => SupportSpec::CenteredBlock {
                block: self.dims.iter().map(|&n| (n / 4).max(1)).collect(),
            },
        }
    }
}

/// One sweep cell. Timing columns are wall-clock and excluded from
/// determinism comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub dataset: String,
    pub method: String,
    pub d: usize,
    pub dims: String,
    pub m: usize,
    #[serde(rename = "R")]
    pub r: Option<usize>,
    pub seed: u64,
    pub normalized_samples: f64,
    pub psnr_db: Option<f64>,
    pub residual: Option<f64>,
    pub decomposition_s: f64,
    pub solve_s: f64,
    pub total_s: f64,
    pub solver_calls: usize,
    pub status: String,
}

impl SweepRow {
    /// Copy with timing columns zeroed, for determinism checks.
    pub fn timing_free(&self) -> SweepRow {
        SweepRow {
            decomposition_s: 0.0,
            solve_s: 0.0,
            total_s: 0.0,
            ..self.clone()
        }
    }
}

pub fn rows_equal_excluding_timing(a: &[SweepRow], b: &[SweepRow]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.timing_free() == y.timing_free())
}

const PHANTOM_TAG: u64 = 0x7068616e746f6d;
const ENSEMBLE_TAG: u64 = 0x656e73656d626c65;
const MWCS_TAG: u64 = 0x6d776373;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream derivation for one sweep cell; cell order can never change
/// the draw.
fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn status_tag(e: &Error) -> String {
    match e {
        Error::RecoveryAt { mode, index, source } => {
            format!("recovery_at_mode{}_idx{}:{}", mode, index, status_tag(source))
        }
        Error::InfeasibleSystem { .. } => "infeasible_system".into(),
        Error::NonConvergence { .. } => "non_convergence".into(),
        Error::SizeOverflow { .. } => "size_overflow".into(),
        Error::RankDeficientUpdate { .. } => "rank_deficient_update".into(),
        Error::ShapeMismatch(_) => "shape_mismatch".into(),
        _ => "error".into(),
    }
}

fn dims_label(dims: &[usize]) -> String {
    dims.iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

fn recovery_ensemble(e: &MeasurementEnsemble, basis: SparsifyingBasis) -> MeasurementEnsemble {
    if basis == SparsifyingBasis::Identity {
        return e.clone();
    }
    let mut out = e.clone();
    for (u, &n) in out.matrices.iter_mut().zip(&e.signal_dims) {
        *u = &*u * basis.matrix(n);
    }
    out
}

/// Everything produced for one cell; the JSON report is written when
/// `reports_dir` is set.
#[derive(Serialize)]
struct CellReport<'a> {
    row: &'a SweepRow,
    report: Option<&'a RecoveryReport>,
}

/// Runs the full grid in (m, method, seed) order, emitting rows
/// incrementally when `csv_out` is set. Per-cell failures become
/// status-tagged rows; only setup errors abort the sweep.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut csv_writer = match &spec.csv_out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            Some(csv::Writer::from_path(path)?)
        }
        None => None,
    };
    if let Some(dir) = &spec.reports_dir {
        std::fs::create_dir_all(dir)?;
    }

    let file_tensor = match (spec.dataset, &spec.input) {
        (Dataset::File, Some(path)) => {
            let t = io::load(path)?;
            if t.shape() != spec.dims.as_slice() {
                return Err(Error::Config(format!(
                    "input tensor shape {:?} vs spec dims {:?}",
                    t.shape(),
                    spec.dims
                )));
            }
            Some(t)
        }
        _ => None,
    };
    let support = spec.support_plan();
    let mut phantoms: HashMap<u64, DenseTensor> = HashMap::new();
    let mut rows = Vec::new();

    for &m in &spec.m_values {
        for &method in &spec.methods {
            let rank_grid: Vec<Option<usize>> = if method == Method::Mwcs {
                spec.ranks.iter().map(|&r| Some(r)).collect()
            } else {
                vec![None]
            };
            for r in rank_grid {
                for &seed in &spec.seeds {
                    let x = match &file_tensor {
                        Some(t) => t.clone(),
                        None => {
                            let key = mix_seed(&[seed, PHANTOM_TAG]);
                            match phantoms.get(&key) {
                                Some(t) => t.clone(),
                                None => {
                                    let t = match spec.dataset {
                                        Dataset::CompressibleImage
                                        | Dataset::CompressibleVideo => {
                                            gen_compressible(&spec.dims, spec.decay, key)?
                                        }
                                        _ => gen_sparse_phantom(&spec.dims, &support, key)?,
                                    };
                                    phantoms.insert(key, t.clone());
                                    t
                                }
                            }
                        }
                    };
                    let row = run_cell(spec, &x, m, method, r, seed, &mut csv_writer)?;
                    rows.push(row);
                }
            }
        }
    }
    if let Some(w) = csv_writer.as_mut() {
        w.flush()?;
    }
    Ok(rows)
}

fn run_cell(
    spec: &ExperimentSpec,
    x: &DenseTensor,
    m: usize,
    method: Method,
    r: Option<usize>,
    seed: u64,
    csv_writer: &mut Option<csv::Writer<std::fs::File>>,
) -> Result<SweepRow> {
    let d = spec.dims.len();
    let ens_seed = mix_seed(&[seed, ENSEMBLE_TAG, m as u64]);
    let measures = vec![m; d];
    let e = generate_ensemble(&spec.dims, &measures, spec.distribution, ens_seed)?;
    let y = sample(x, &e)?;
    let re = recovery_ensemble(&e, spec.basis);
    let normalized = measures.iter().product::<usize>() as f64
        / spec.dims.iter().product::<usize>() as f64;

    let outcome = match method {
        Method::GtcsS => gtcs_s(&y, &re, &spec.solver),
        Method::GtcsPCt => gtcs_p(&y, &re, &spec.solver, DecompositionKind::Ct, None),
        Method::GtcsPHosvd => gtcs_p(&y, &re, &spec.solver, DecompositionKind::Hosvd, None),
        Method::Kcs => kcs_recover(&y, &re, &spec.solver),
        Method::Mwcs => {
            let rank = r.expect("rank grid populated for MWCS");
            let cp_seed = mix_seed(&[seed, MWCS_TAG, m as u64]);
            mwcs_recover(&y, &re, &spec.solver, rank, cp_seed)
        }
    };

    let row = match &outcome {
        Ok(report) => {
            let estimate = spec.basis.from_transform_domain(&report.recovered)?;
            let psnr_db = psnr(x, &estimate, None)?;
            SweepRow {
                dataset: spec.dataset.as_str().into(),
                method: method.as_str().into(),
                d,
                dims: dims_label(&spec.dims),
                m,
                r,
                seed,
                normalized_samples: normalized,
                psnr_db: Some(psnr_db),
                residual: Some(report.residual),
                decomposition_s: report.wall_times.decomposition_s,
                solve_s: report.wall_times.solves_s,
                total_s: report.wall_times.total_s,
                solver_calls: report.solver_calls,
                status: "ok".into(),
            }
        }
        Err(err) => SweepRow {
            dataset: spec.dataset.as_str().into(),
            method: method.as_str().into(),
            d,
            dims: dims_label(&spec.dims),
            m,
            r,
            seed,
            normalized_samples: normalized,
            psnr_db: None,
            residual: None,
            decomposition_s: 0.0,
            solve_s: 0.0,
            total_s: 0.0,
            solver_calls: 0,
            status: status_tag(err),
        },
    };
    if let Some(w) = csv_writer.as_mut() {
        w.serialize(&row)?;
        w.flush()?;
    }
    if let Some(dir) = &spec.reports_dir {
        let suffix = r.map(|r| format!("_r{r}")).unwrap_or_default();
        let name = format!("{}_m{}{}_seed{}.json", method.as_str(), m, suffix, seed);
        let cell = CellReport {
            row: &row,
            report: outcome.as_ref().ok(),
        };
        let file = std::fs::File::create(dir.join(name))?;
        serde_json::to_writer_pretty(file, &cell)?;
    }
    Ok(row)
}

/// Sorted transform-domain magnitudes of `x`, for compressibility
/// reporting.
pub fn sorted_dct_magnitudes(x: &DenseTensor) -> Result<Vec<f64>> {
    let g = SparsifyingBasis::Dct2.to_transform_domain(x)?;
    let mut mags: Vec<f64> = g.data().iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(mags)
}

/// Least-squares slope of `log magnitude` against `log rank` over the
/// nonzero prefix; negative for compressible data.
pub fn loglog_decay_slope(sorted_magnitudes: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = sorted_magnitudes
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| ((1.0 + i as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (sxx, sxy): (f64, f64) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x * x, b + x * y));
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}
