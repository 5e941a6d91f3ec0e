use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Result, SimcoError};
use crate::numerics::{stiefel_sample_uniform, DenseMatrix, RngState};
use crate::sparse_coding::{SparseCoeffs, SparsityPattern};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub m: usize,
    pub d: usize,
    pub n: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    /// `m = 16, d = 32, S = 4`.
    pub fn standard(n: usize, seed: u64) -> Self {
        Self { m: 16, d: 32, n, s: 4, snr_db: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.s && self.s <= self.m && self.m <= self.d) {
            return Err(SimcoError::Precondition(format!(
                "synthetic spec needs 1 <= S <= m <= d, got S={}, m={}, d={}",
                self.s, self.m, self.d
            )));
        }
        if self.snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(SimcoError::Precondition("snr_db must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub spec: SyntheticSpec,
    /// Training data (noisy when `snr_db` is set).
    pub y: DenseMatrix,
    /// `D_true X_true`.
    pub clean: DenseMatrix,
    pub d_true: Dictionary,
    pub x_true: SparseCoeffs,
}

/// `Y = D_true X_true (+ N)`: Stiefel-uniform codewords, uniformly random
/// `S`-subsets with standard normal values, and white Gaussian noise scaled
/// to the exact requested SNR.
pub fn gen_synthetic(spec: &SyntheticSpec, rng: &mut RngState) -> Result<SyntheticInstance> {
    spec.validate()?;
    let cols: Vec<Vec<f64>> = (0..spec.d).map(|_| stiefel_sample_uniform(spec.m, rng)).collect();
    let d_true = Dictionary::from_columns_normalized(spec.m, &cols)?;
    let mut support = Vec::with_capacity(spec.n);
    let mut values = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        support.push(rng.subset(spec.d, spec.s));
        values.push(rng.normal_vec(spec.s));
    }
    let x_true = SparseCoeffs::new(SparsityPattern::new(spec.d, support)?, values)?;
    let clean = x_true.reconstruct(&d_true);
    let y = match spec.snr_db {
        None => clean.clone(),
        Some(snr) => {
            let noise = rng.normal_vec(spec.m * spec.n);
            let noise_sq: f64 = noise.iter().map(|v| v * v).sum();
            let target = clean.frobenius_norm_sq() / 10f64.powf(snr / 10.0);
            let scale = (target / noise_sq).sqrt();
            let data = clean.data().iter().zip(&noise).map(|(c, n)| c + scale * n).collect();
            DenseMatrix::new(spec.m, spec.n, data)?
        }
    };
    Ok(SyntheticInstance { spec: *spec, y, clean, d_true, x_true })
}

/// `10·log10(‖clean‖² / ‖noisy − clean‖²)`
pub fn measured_snr_db(clean: &DenseMatrix, noisy: &DenseMatrix) -> Result<f64> {
    let noise = noisy.sub(clean)?;
    Ok(10.0 * (clean.frobenius_norm_sq() / noise.frobenius_norm_sq()).log10())
}
