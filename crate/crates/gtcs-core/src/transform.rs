//! Sparsifying transforms applied separably per mode. Compressible
//! data is handled by measuring the raw tensor and recovering its
//! transform-domain coefficients, so the per-mode sensing matrices
//! become `U_i Phi_i` with orthonormal `Phi_i`.

use crate::error::{Error, Result};
use crate::tensor::{mode_n_product, DenseTensor, ModeIndex};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Orthonormal DCT-II basis; column `k` holds the frequency-`k` atom
/// `phi_k[n] = a_k cos(pi (2n+1) k / (2N))` with `a_0 = sqrt(1/N)`
/// and `a_k = sqrt(2/N)` otherwise.
pub fn dct_basis(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |row, k| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        scale * (std::f64::consts::PI * (2.0 * row as f64 + 1.0) * k as f64 / (2.0 * nf)).cos()
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsifyingBasis {
    #[default]
    Identity,
    Dct2,
}

impl SparsifyingBasis {
    /// The mode-`n` basis matrix `Phi`.
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        match self {
            SparsifyingBasis::Identity => DMatrix::identity(n, n),
            SparsifyingBasis::Dct2 => dct_basis(n),
        }
    }

    /// Coefficients `G = X x_1 Phi_1^T ... x_d Phi_d^T`.
    pub fn to_transform_domain(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.apply(x, true)
    }

    /// Signal `X = G x_1 Phi_1 ... x_d Phi_d`.
    pub fn from_transform_domain(&self, g: &DenseTensor) -> Result<DenseTensor> {
        self.apply(g, false)
    }

    fn apply(&self, x: &DenseTensor, transpose: bool) -> Result<DenseTensor> {
        if matches!(self, SparsifyingBasis::Identity) {
            return Ok(x.clone());
        }
        let mut out = x.clone();
        for mode in 1..=x.order() {
            let phi = self.matrix(out.shape()[mode - 1]);
            let m = if transpose { phi.transpose() } else { phi };
            out = mode_n_product(&out, &m, ModeIndex::new(mode)?)?;
        }
        Ok(out)
    }
}

/// Rejects bases whose Gram deviates from the identity by more than
/// `1e-10` in any entry.
pub fn check_orthonormal(phi: &DMatrix<f64>) -> Result<()> {
    let gram = phi.transpose() * phi;
    let mut deviation = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            deviation = deviation.max((gram[(i, j)] - target).abs());
        }
    }
    if deviation > 1e-10 {
        return Err(Error::NonOrthonormalBasis { deviation });
    }
    Ok(())
}
