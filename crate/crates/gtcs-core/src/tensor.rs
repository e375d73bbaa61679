//! Dense tensor storage and the multilinear primitives every other
//! module builds on.
//!
//! Layout is the column-major generalization: the first index varies
//! fastest in `data`. Under this convention
//! `vectorize(X x1 U1 ... xd Ud) == (Ud kron ... kron U1) * vectorize(X)`
//! holds with the Kronecker factors in descending mode order, and the
//! mode-i unfolding satisfies
//! `Y_(i) = Ui * X_(i) * (Ud kron ... kron U_{i+1} kron U_{i-1} kron ... kron U1)^T`.
//!
//! Worked 2x2x2 example for the unfolding convention: with 1-based
//! entries `X[i,j,k] = 4(i-1) + 2(j-1) + k`, the mode-1 unfolding is
//! `[[1,3,2,4],[5,7,6,8]]` — column c enumerates the remaining indices
//! (j,k) with j varying fastest.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// 1-based mode index, matching the paper's `i in [d]` convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModeIndex(usize);

impl ModeIndex {
    /// A mode index must be at least 1; validity against a tensor's
    /// order is checked by the operation receiving it.
    pub fn new(i: usize) -> Result<Self> {
        if i == 0 {
            return Err(Error::InvalidMode { mode: 0, order: 0 });
        }
        Ok(ModeIndex(i))
    }

    pub fn get(self) -> usize {
        self.0
    }

    fn checked(self, order: usize) -> Result<usize> {
        if self.0 > order {
            return Err(Error::InvalidMode {
                mode: self.0,
                order,
            });
        }
        Ok(self.0 - 1)
    }
}

/// d-dimensional real array with explicit shape; houses both signals
/// and their mode-wise measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Builds a tensor, validating shape consistency and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&n| n == 0) {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} must be nonempty with positive dims"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} implies {len} entries, got {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Entry at a 0-based multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let i = self.linear_index(idx);
        self.data[i] = value;
    }

    fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.shape[k]);
            off += i * stride;
            stride *= self.shape[k];
        }
        off
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// View an order-2 tensor as a matrix (shared layout, both column-major).
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.order() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected order 2, got order {}",
                self.order()
            )));
        }
        Ok(DMatrix::from_column_slice(
            self.shape[0],
            self.shape[1],
            &self.data,
        ))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        DenseTensor {
            shape: vec![m.nrows(), m.ncols()],
            data: m.as_slice().to_vec(),
        }
    }
}

/// Kronecker product of `A` (IxJ) and `B` (KxL): the (IK)x(JL) matrix
/// whose (p,q) block is `a[p][q] * B`.
pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (i, j) = (a.nrows(), a.ncols());
    let (k, l) = (b.nrows(), b.ncols());
    let mut out = DMatrix::zeros(i * k, j * l);
    for p in 0..i {
        for q in 0..j {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let mut block = out.view_mut((p * k, q * l), (k, l));
            for r in 0..k {
                for c in 0..l {
                    block[(r, c)] = apq * b[(r, c)];
                }
            }
        }
    }
    out
}

/// Outer product of d vectors: entry (i1,...,id) equals the product of
/// the per-mode coordinates.
pub fn outer_product(vectors: &[DVector<f64>]) -> Result<DenseTensor> {
    if vectors.is_empty() || vectors.iter().any(|v| v.is_empty()) {
        return Err(Error::ShapeMismatch(
            "outer product needs at least one nonempty vector per mode".into(),
        ));
    }
    let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    let mut data = vec![1.0];
    for v in vectors {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &a in v.iter() {
            next.extend(data.iter().map(|&c| c * a));
        }
        data = next;
    }
    DenseTensor::new(shape, data)
}

fn layout_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for k in 1..shape.len() {
        strides[k] = strides[k - 1] * shape[k - 1];
    }
    strides
}

/// Mode-n unfolding: the N_n x (prod of remaining dims) matrix whose
/// columns are the mode-n fibers; column c enumerates the remaining
/// indices with the first (lowest-numbered) varying fastest.
pub fn mode_n_unfold(x: &DenseTensor, n: ModeIndex) -> Result<DMatrix<f64>> {
    let axis = n.checked(x.order())?;
    let nn = x.shape[axis];
    let ncols = x.len() / nn;
    let mut out = DMatrix::zeros(nn, ncols);

    let strides = layout_strides(&x.shape);
    let rest: Vec<usize> = (0..x.order()).filter(|&k| k != axis).collect();
    for col in 0..ncols {
        let mut base = 0;
        let mut rem = col;
        for &k in &rest {
            base += (rem % x.shape[k]) * strides[k];
            rem /= x.shape[k];
        }
        for r in 0..nn {
            out[(r, col)] = x.data[base + r * strides[axis]];
        }
    }
    Ok(out)
}

/// Inverse of `mode_n_unfold` for the given target shape.
pub fn mode_n_fold(m: &DMatrix<f64>, n: ModeIndex, shape: &[usize]) -> Result<DenseTensor> {
    let axis = n.checked(shape.len())?;
    let nn = shape[axis];
    let total: usize = shape.iter().product();
    if m.nrows() != nn || m.ncols() != total / nn.max(1) {
        return Err(Error::ShapeMismatch(format!(
            "matrix {}x{} does not fold into {shape:?} at mode {}",
            m.nrows(),
            m.ncols(),
            n.get()
        )));
    }
    let mut data = vec![0.0; total];
    let strides = layout_strides(shape);
    let rest: Vec<usize> = (0..shape.len()).filter(|&k| k != axis).collect();
    for col in 0..m.ncols() {
        let mut base = 0;
        let mut rem = col;
        for &k in &rest {
            base += (rem % shape[k]) * strides[k];
            rem /= shape[k];
        }
        for r in 0..nn {
            data[base + r * strides[axis]] = m[(r, col)];
        }
    }
    DenseTensor::new(shape.to_vec(), data)
}

/// Mode-n product: multiplies every mode-n fiber by `U` (J x N_n),
/// replacing N_n by J in the shape.
pub fn mode_n_product(x: &DenseTensor, u: &DMatrix<f64>, n: ModeIndex) -> Result<DenseTensor> {
    let axis = n.checked(x.order())?;
    if u.ncols() != x.shape[axis] {
        return Err(Error::ShapeMismatch(format!(
            "mode-{} product: matrix has {} columns, mode dim is {}",
            n.get(),
            u.ncols(),
            x.shape[axis]
        )));
    }
    let unfolded = mode_n_unfold(x, n)?;
    let product = u * unfolded;
    let mut shape = x.shape.clone();
    shape[axis] = u.nrows();
    mode_n_fold(&product, n, &shape)
}

/// Column-major vectorization; satisfies
/// `vectorize(X x1 U1 ... xd Ud) == (Ud kron ... kron U1) vectorize(X)`.
pub fn vectorize(x: &DenseTensor) -> DVector<f64> {
    DVector::from_column_slice(&x.data)
}

/// Number of entries with magnitude strictly above `tol`.
pub fn sparsity(x: &DenseTensor, tol: f64) -> usize {
    x.data.iter().filter(|v| v.abs() > tol).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor_222() -> DenseTensor {
        // X[i,j,k] = 4(i-1) + 2(j-1) + k with 1-based indices
        let mut x = DenseTensor::zeros(vec![2, 2, 2]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    x.set(&[i, j, k], (4 * i + 2 * j + k + 1) as f64);
                }
            }
        }
        x
    }

    #[test]
    fn kronecker_identity_blocks() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(kronecker(&i2, &i2), DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn kronecker_worked_example() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 2.0, //
                1.0, 0.0, 2.0, 0.0, //
                0.0, 3.0, 0.0, 4.0, //
                3.0, 0.0, 4.0, 0.0,
            ],
        );
        assert_eq!(kronecker(&a, &b), expect);
    }

    #[test]
    fn kronecker_of_column_and_row_is_outer_product() {
        let u = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let vt = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let kron = kronecker(&u, &vt);
        let outer = outer_product(&[
            DVector::from_column_slice(&[1.0, 2.0]),
            DVector::from_column_slice(&[3.0, 4.0]),
        ])
        .unwrap();
        assert_eq!(kron, outer.to_matrix().unwrap());
    }

    #[test]
    fn outer_product_basis_vectors() {
        let t = outer_product(&[
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[0.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(t.to_matrix().unwrap(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn outer_product_order_3_slices() {
        let t = outer_product(&[
            DVector::from_column_slice(&[1.0, 2.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
        ])
        .unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert_eq!(t.get(&[0, j, k]), 1.0);
                assert_eq!(t.get(&[1, j, k]), 2.0);
            }
        }
    }

    #[test]
    fn outer_product_single_vector_is_identity() {
        let t = outer_product(&[DVector::from_column_slice(&[3.0, 5.0])]).unwrap();
        assert_eq!(t.shape(), &[2]);
        assert_eq!(t.data(), &[3.0, 5.0]);
    }

    #[test]
    fn unfold_matrix_mode_1_is_identity() {
        let x = DenseTensor::new(vec![2, 2], vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        let m = mode_n_unfold(&x, ModeIndex::new(1).unwrap()).unwrap();
        assert_eq!(m, x.to_matrix().unwrap());
    }

    #[test]
    fn unfold_222_worked_example() {
        let x = tensor_222();
        let m = mode_n_unfold(&x, ModeIndex::new(1).unwrap()).unwrap();
        let expect = DMatrix::from_row_slice(2, 4, &[1.0, 3.0, 2.0, 4.0, 5.0, 7.0, 6.0, 8.0]);
        assert_eq!(m, expect);
    }

    #[test]
    fn fold_inverts_unfold_all_modes() {
        let shape = vec![3, 4, 5];
        let data: Vec<f64> = (0..60).map(|v| v as f64 * 0.5 - 7.0).collect();
        let x = DenseTensor::new(shape.clone(), data).unwrap();
        for mode in 1..=3 {
            let n = ModeIndex::new(mode).unwrap();
            let m = mode_n_unfold(&x, n).unwrap();
            let back = mode_n_fold(&m, n, &shape).unwrap();
            assert_eq!(back, x);
        }
    }

    #[test]
    fn fold_of_worked_example_reproduces_tensor() {
        let expect = tensor_222();
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 3.0, 2.0, 4.0, 5.0, 7.0, 6.0, 8.0]);
        let x = mode_n_fold(&m, ModeIndex::new(1).unwrap(), &[2, 2, 2]).unwrap();
        assert_eq!(x, expect);
    }

    #[test]
    fn fold_scalar_shape() {
        let m = DMatrix::from_element(1, 1, 2.5);
        let t = mode_n_fold(&m, ModeIndex::new(1).unwrap(), &[1, 1]).unwrap();
        assert_eq!(t.data(), &[2.5]);
    }

    #[test]
    fn mode_product_identity_is_noop() {
        let x = tensor_222();
        for mode in 1..=3 {
            let n = ModeIndex::new(mode).unwrap();
            let y = mode_n_product(&x, &DMatrix::identity(2, 2), n).unwrap();
            assert_eq!(y, x);
        }
    }

    #[test]
    fn mode_product_order_2_matches_sandwich() {
        let x = DenseTensor::new(vec![4, 5], (0..20).map(|v| (v as f64).sin()).collect()).unwrap();
        let u1 = DMatrix::from_fn(2, 4, |r, c| ((r * 7 + c) as f64).cos());
        let u2 = DMatrix::from_fn(3, 5, |r, c| ((r * 3 + 2 * c) as f64).sin());
        let y = mode_n_product(
            &mode_n_product(&x, &u1, ModeIndex::new(1).unwrap()).unwrap(),
            &u2,
            ModeIndex::new(2).unwrap(),
        )
        .unwrap();
        let direct = &u1 * x.to_matrix().unwrap() * u2.transpose();
        assert!((y.to_matrix().unwrap() - direct).norm() < 1e-12);
    }

    #[test]
    fn mode_product_row_vector_sums_mode_3() {
        let ones = DenseTensor::new(vec![2, 2, 2], vec![1.0; 8]).unwrap();
        let u = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let y = mode_n_product(&ones, &u, ModeIndex::new(3).unwrap()).unwrap();
        assert_eq!(y.shape(), &[2, 2, 1]);
        assert!(y.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn vectorize_column_major() {
        let x = DenseTensor::new(vec![2, 2], vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(vectorize(&x).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn vectorize_kronecker_identity_order_3() {
        let shape = vec![3, 4, 2];
        let data: Vec<f64> = (0..24).map(|v| ((v * v) as f64).sin()).collect();
        let x = DenseTensor::new(shape, data).unwrap();
        let us: Vec<DMatrix<f64>> = vec![
            DMatrix::from_fn(2, 3, |r, c| ((r + 2 * c) as f64).cos()),
            DMatrix::from_fn(3, 4, |r, c| ((2 * r + c) as f64).sin()),
            DMatrix::from_fn(2, 2, |r, c| (r * c) as f64 + 0.5),
        ];
        let mut y = x.clone();
        for (k, u) in us.iter().enumerate() {
            y = mode_n_product(&y, u, ModeIndex::new(k + 1).unwrap()).unwrap();
        }
        let big = kronecker(&kronecker(&us[2], &us[1]), &us[0]);
        let rhs = big * vectorize(&x);
        assert!((vectorize(&y) - rhs).norm() < 1e-12);
    }

    #[test]
    fn vectorize_outer_product_is_reversed_kronecker() {
        let v1 = DVector::from_column_slice(&[1.0, -2.0, 3.0]);
        let v2 = DVector::from_column_slice(&[0.5, 4.0]);
        let v3 = DVector::from_column_slice(&[2.0, -1.0]);
        let t = outer_product(&[v1.clone(), v2.clone(), v3.clone()]).unwrap();
        let m1 = DMatrix::from_column_slice(3, 1, v1.as_slice());
        let m2 = DMatrix::from_column_slice(2, 1, v2.as_slice());
        let m3 = DMatrix::from_column_slice(2, 1, v3.as_slice());
        let kron = kronecker(&kronecker(&m3, &m2), &m1);
        assert_eq!(vectorize(&t).as_slice(), kron.as_slice());
    }

    #[test]
    fn sparsity_zero_tensor() {
        let x = DenseTensor::zeros(vec![4, 4]).unwrap();
        assert_eq!(sparsity(&x, 0.0), 0);
    }

    #[test]
    fn sparsity_counts_above_tol() {
        let x = DenseTensor::new(vec![4], vec![0.0, 1e-12, -0.5, 2.0]).unwrap();
        assert_eq!(sparsity(&x, 0.0), 3);
        assert_eq!(sparsity(&x, 1e-9), 2);
    }

    #[test]
    fn def4_identity_orders_2_to_4() {
        let shapes: Vec<Vec<usize>> = vec![vec![3, 4], vec![2, 3, 4], vec![2, 3, 2, 3]];
        for shape in shapes {
            let d = shape.len();
            let data: Vec<f64> = (0..shape.iter().product::<usize>())
                .map(|v| ((v * 13 + 7) as f64).sin())
                .collect();
            let x = DenseTensor::new(shape.clone(), data).unwrap();
            let us: Vec<DMatrix<f64>> = shape
                .iter()
                .enumerate()
                .map(|(k, &n)| DMatrix::from_fn(2, n, |r, c| ((r * 31 + c * 17 + k) as f64).cos()))
                .collect();
            let mut y = x.clone();
            for (k, u) in us.iter().enumerate() {
                y = mode_n_product(&y, u, ModeIndex::new(k + 1).unwrap()).unwrap();
            }
            for i in 0..d {
                let n = ModeIndex::new(i + 1).unwrap();
                let lhs = mode_n_unfold(&y, n).unwrap();
                let xi = mode_n_unfold(&x, n).unwrap();
                // Ud kron ... kron U_{i+1} kron U_{i-1} kron ... kron U1
                let mut others: Vec<&DMatrix<f64>> = Vec::new();
                for k in (0..d).rev() {
                    if k != i {
                        others.push(&us[k]);
                    }
                }
                let mut kron = others[0].clone();
                for u in &others[1..] {
                    kron = kronecker(&kron, u);
                }
                let rhs = &us[i] * xi * kron.transpose();
                assert!(
                    (lhs.clone() - rhs.clone()).norm() <= 1e-10 * rhs.norm().max(1.0),
                    "Def-4 identity failed for shape {shape:?} mode {}",
                    i + 1
                );
            }
        }
    }

    #[test]
    fn mode_products_commute_across_modes() {
        let x = tensor_222();
        let u1 = DMatrix::from_fn(3, 2, |r, c| (r + c) as f64 + 0.25);
        let u2 = DMatrix::from_fn(2, 2, |r, c| (r as f64 - c as f64) * 1.5 + 0.1);
        let a = mode_n_product(
            &mode_n_product(&x, &u1, ModeIndex::new(1).unwrap()).unwrap(),
            &u2,
            ModeIndex::new(2).unwrap(),
        )
        .unwrap();
        let b = mode_n_product(
            &mode_n_product(&x, &u2, ModeIndex::new(2).unwrap()).unwrap(),
            &u1,
            ModeIndex::new(1).unwrap(),
        )
        .unwrap();
        assert!(a
            .data()
            .iter()
            .zip(b.data())
            .all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn kronecker_mixed_product_property() {
        let a = DMatrix::from_fn(2, 2, |r, c| (r * 2 + c) as f64 + 1.0);
        let b = DMatrix::from_fn(3, 3, |r, c| ((r * 3 + c) as f64).sin());
        let c = DMatrix::from_fn(2, 2, |r, c| (r as f64) * 0.5 - c as f64);
        let d = DMatrix::from_fn(3, 3, |r, c| ((r + 2 * c) as f64).cos());
        let lhs = kronecker(&a, &b) * kronecker(&c, &d);
        let rhs = kronecker(&(&a * &c), &(&b * &d));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn invalid_mode_rejected() {
        let x = tensor_222();
        assert!(ModeIndex::new(0).is_err());
        let n4 = ModeIndex::new(4).unwrap();
        assert!(matches!(
            mode_n_unfold(&x, n4),
            Err(Error::InvalidMode { mode: 4, order: 3 })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            DenseTensor::new(vec![2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
    }
}
