//! Rank-one decompositions of measured tensors: SVD rank
//! decomposition for matrices, weak core-Tucker by successive
//! unfolding, HOSVD, and CP by alternating least squares; plus
//! reconstruction from rank-one terms.

use crate::error::{Error, Result};
use crate::tensor::{mode_n_product, mode_n_unfold, outer_product, DenseTensor, ModeIndex};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Sum of K weighted rank-one terms `sum_i w_i b_i^(1) o ... o b_i^(d)`.
#[derive(Debug, Clone)]
pub struct RankOneSum {
    /// K tuples of d vectors; tuple i's j-th vector has length shape[j].
    pub terms: Vec<Vec<DVector<f64>>>,
    pub weights: Vec<f64>,
    pub shape: Vec<usize>,
}

impl RankOneSum {
    pub fn empty(shape: Vec<usize>) -> Self {
        RankOneSum {
            terms: Vec::new(),
            weights: Vec::new(),
            shape,
        }
    }

    /// Number of terms K.
    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.len() != self.weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} terms vs {} weights",
                self.terms.len(),
                self.weights.len()
            )));
        }
        for (i, term) in self.terms.iter().enumerate() {
            if term.len() != self.shape.len() {
                return Err(Error::ShapeMismatch(format!(
                    "term {i} has {} vectors for order {}",
                    term.len(),
                    self.shape.len()
                )));
            }
            for (j, v) in term.iter().enumerate() {
                if v.len() != self.shape[j] {
                    return Err(Error::ShapeMismatch(format!(
                        "term {i} mode {} vector length {} vs dim {}",
                        j + 1,
                        v.len(),
                        self.shape[j]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Orthogonal Tucker form `X = S x1 U_1 ... xd U_d`.
#[derive(Debug, Clone)]
pub struct TuckerFactors {
    pub core: DenseTensor,
    pub factors: Vec<DMatrix<f64>>,
}

/// Singular-value decomposition truncated at `tol * sigma_max`; terms
/// are weighted unit vector pairs ordered by descending singular value.
pub fn svd_rank_decomposition(y: &DMatrix<f64>, tol: f64) -> Result<RankOneSum> {
    if !(tol >= 0.0) {
        return Err(Error::Config("tolerance must be nonnegative".into()));
    }
    let shape = vec![y.nrows(), y.ncols()];
    let svd = y.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left vectors requested");
    let vt = svd.v_t.as_ref().expect("right vectors requested");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &v| m.max(v));
    if smax == 0.0 {
        return Ok(RankOneSum::empty(shape));
    }
    let mut order: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol * smax && svd.singular_values[i] > 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut out = RankOneSum::empty(shape);
    for i in order {
        out.terms
            .push(vec![u.column(i).into_owned(), vt.row(i).transpose()]);
        out.weights.push(svd.singular_values[i]);
    }
    Ok(out)
}

/// Constructive weak decomposition by successive unfolding: split the
/// mode-1 unfolding into weighted column/row pairs, refold each row
/// over the remaining modes, and recurse. Every mode-j vector lies in
/// the mode-j column space of the input, and for s-sparse inputs the
/// term count is at most `s^(d-1)`.
pub fn weak_tucker_decomposition(y: &DenseTensor, tol: f64) -> Result<RankOneSum> {
    if y.order() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "weak decomposition needs order >= 2, got {}",
            y.order()
        )));
    }
    if !(tol >= 0.0) {
        return Err(Error::Config("tolerance must be nonnegative".into()));
    }
    if y.order() == 2 {
        return svd_rank_decomposition(&y.to_matrix()?, tol);
    }
    let unfolded = mode_n_unfold(y, ModeIndex::new(1)?)?;
    let split = svd_rank_decomposition(&unfolded, tol)?;
    let rest: Vec<usize> = y.shape()[1..].to_vec();
    let mut out = RankOneSum::empty(y.shape().to_vec());
    for (pair, w) in split.terms.iter().zip(&split.weights) {
        let scaled = &pair[1] * *w;
        let sub = DenseTensor::new(rest.clone(), scaled.as_slice().to_vec())?;
        let inner = weak_tucker_decomposition(&sub, tol)?;
        for (sub_term, sub_w) in inner.terms.into_iter().zip(inner.weights) {
            let mut vectors = Vec::with_capacity(y.order());
            vectors.push(pair[0].clone());
            vectors.extend(sub_term);
            out.terms.push(vectors);
            out.weights.push(sub_w);
        }
    }
    Ok(out)
}

/// Higher-order SVD: factors are the left singular bases of the mode
/// unfoldings, the core is `X x1 U_1^T ... xd U_d^T`.
pub fn hosvd(x: &DenseTensor) -> Result<TuckerFactors> {
    let mut factors = Vec::with_capacity(x.order());
    for i in 1..=x.order() {
        let unfolded = mode_n_unfold(x, ModeIndex::new(i)?)?;
        let svd = unfolded.svd(true, false);
        factors.push(svd.u.expect("left vectors requested"));
    }
    let mut core = x.clone();
    for (i, u) in factors.iter().enumerate() {
        let ut = u.transpose();
        core = mode_n_product(&core, &ut, ModeIndex::new(i + 1)?)?;
    }
    Ok(TuckerFactors { core, factors })
}

/// Expands a Tucker form into rank-one terms, one per core entry with
/// magnitude above `tol * max|core|`; weights are the core entries and
/// vectors the corresponding factor columns.
pub fn hosvd_rank_one_terms(t: &TuckerFactors, tol: f64) -> Result<RankOneSum> {
    if !(tol >= 0.0) {
        return Err(Error::Config("tolerance must be nonnegative".into()));
    }
    let shape: Vec<usize> = t.factors.iter().map(|u| u.nrows()).collect();
    if t.core.order() != t.factors.len() {
        return Err(Error::ShapeMismatch(format!(
            "core order {} vs {} factors",
            t.core.order(),
            t.factors.len()
        )));
    }
    let cmax = t.core.data().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mut out = RankOneSum::empty(shape);
    if cmax == 0.0 {
        return Ok(out);
    }
    let core_shape = t.core.shape().to_vec();
    for (linear, &entry) in t.core.data().iter().enumerate() {
        if entry.abs() <= tol * cmax || entry == 0.0 {
            continue;
        }
        let mut rem = linear;
        let mut vectors = Vec::with_capacity(core_shape.len());
        for (k, &r) in core_shape.iter().enumerate() {
            let idx = rem % r;
            rem /= r;
            vectors.push(t.factors[k].column(idx).into_owned());
        }
        out.terms.push(vectors);
        out.weights.push(entry);
    }
    Ok(out)
}

/// Khatri-Rao column: the Kronecker product of one column per factor,
/// skipping `skip`, with mode 1 varying fastest.
fn khatri_rao_column(factors: &[DMatrix<f64>], skip: usize, r: usize) -> DVector<f64> {
    let mut v = DVector::from_element(1, 1.0);
    for (j, f) in factors.iter().enumerate() {
        if j == skip {
            continue;
        }
        let col = f.column(r);
        let mut next = DVector::zeros(v.len() * col.len());
        for (ci, cv) in col.iter().enumerate() {
            for (vi, vv) in v.iter().enumerate() {
                next[ci * v.len() + vi] = cv * vv;
            }
        }
        v = next;
    }
    v
}

fn factors_to_sum(shape: &[usize], factors: &[DMatrix<f64>]) -> RankOneSum {
    let rank = factors[0].ncols();
    let mut out = RankOneSum::empty(shape.to_vec());
    for r in 0..rank {
        let mut vectors = Vec::with_capacity(factors.len());
        let mut weight = 1.0;
        for f in factors {
            let col = f.column(r).into_owned();
            let norm = col.norm();
            if norm > 0.0 {
                vectors.push(col / norm);
                weight *= norm;
            } else {
                vectors.push(col);
                weight = 0.0;
            }
        }
        out.terms.push(vectors);
        out.weights.push(weight);
    }
    out
}

/// CP decomposition with K = R terms by alternating least squares.
///
/// Ranks are fitted greedily: each level appends one seeded random
/// column to every factor and runs `iters` sweeps, so the rank-R fit
/// starts from the completed rank-(R-1) fit and its residual can never
/// be worse. Within a sweep each mode update is an exact least-squares
/// minimization, so the residual is non-increasing sweep over sweep.
pub fn cp_als(x: &DenseTensor, r: usize, iters: usize, seed: u64) -> Result<RankOneSum> {
    if r == 0 {
        return Err(Error::Config("CP rank must be at least 1".into()));
    }
    let d = x.order();
    let shape = x.shape().to_vec();
    let unfoldings: Vec<DMatrix<f64>> = (1..=d)
        .map(|i| mode_n_unfold(x, ModeIndex::new(i).expect("mode >= 1")))
        .collect::<Result<_>>()?;
    let mut factors: Vec<DMatrix<f64>> = shape.iter().map(|&n| DMatrix::zeros(n, 0)).collect();

    for level in 1..=r {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(level as u64);
        for f in factors.iter_mut() {
            let col = DVector::from_fn(f.nrows(), |_, _| StandardNormal.sample(&mut rng));
            *f = f.clone().insert_column(f.ncols(), 0.0);
            let last = f.ncols() - 1;
            f.set_column(last, &col);
        }
        for _ in 0..iters {
            sweep(&unfoldings, &mut factors, level)?;
        }
    }
    let out = factors_to_sum(&shape, &factors);
    out.validate()?;
    Ok(out)
}

/// One ALS sweep over all modes at the given rank.
fn sweep(unfoldings: &[DMatrix<f64>], factors: &mut [DMatrix<f64>], rank: usize) -> Result<()> {
    let d = factors.len();
    for i in 0..d {
        // Gram of the Khatri-Rao product via the Hadamard identity
        let mut w = DMatrix::from_element(rank, rank, 1.0);
        for (j, f) in factors.iter().enumerate() {
            if j == i {
                continue;
            }
            let g = f.transpose() * f;
            for a in 0..rank {
                for b in 0..rank {
                    w[(a, b)] *= g[(a, b)];
                }
            }
        }
        let rest_len: usize = factors
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, f)| f.nrows())
            .product();
        let mut z = DMatrix::zeros(rest_len, rank);
        for c in 0..rank {
            z.set_column(c, &khatri_rao_column(factors, i, c));
        }
        let rhs = &unfoldings[i] * z;
        let chol = match nalgebra::Cholesky::new(w.clone()) {
            Some(c) => c,
            None => {
                let eig = nalgebra::SymmetricEigen::new(w);
                let found = eig
                    .eigenvalues
                    .iter()
                    .filter(|&&v| {
                        v > 1e-12 * eig.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e))
                    })
                    .count();
                return Err(Error::RankDeficientUpdate { rank: found });
            }
        };
        let updated = chol.solve(&rhs.transpose()).transpose();
        factors[i] = updated;
    }
    Ok(())
}

/// Evaluates a rank-one sum as a dense tensor.
pub fn reconstruct(s: &RankOneSum) -> Result<DenseTensor> {
    s.validate()?;
    let mut out = DenseTensor::zeros(s.shape.clone())?;
    for (term, &w) in s.terms.iter().zip(&s.weights) {
        let t = outer_product(term)?;
        for (o, v) in out.data_mut().iter_mut().zip(t.data()) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Reconstructs a Tucker form `S x1 U_1 ... xd U_d`.
pub fn tucker_reconstruct(t: &TuckerFactors) -> Result<DenseTensor> {
    let mut x = t.core.clone();
    for (i, u) in t.factors.iter().enumerate() {
        x = mode_n_product(&x, u, ModeIndex::new(i + 1)?)?;
    }
    Ok(x)
}
