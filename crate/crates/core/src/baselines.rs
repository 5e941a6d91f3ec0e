//! MOD and K-SVD dictionary updates.

use crate::dictionary::Dictionary;
use crate::error::{mismatch, Result};
use crate::numerics::{axpy, dot, norm, rank_one_svd_col_major, DenseMatrix, PivotedQr, RankOneSvd};
use crate::par;
use crate::sparse_coding::SparseCoeffs;

fn check_shapes(dict: &Dictionary, y: &DenseMatrix, x: &SparseCoeffs) -> Result<()> {
    if y.rows() != dict.m() || y.cols() != x.n() || x.d() != dict.d() {
        return Err(mismatch(
            "dictionary update shapes",
            format!("Y {}x{}, X {}x{}", dict.m(), x.n(), dict.d(), x.n()),
            format!("Y {}x{}, X {}x{}", y.rows(), y.cols(), x.d(), x.n()),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ModOutcome {
    pub dict: Dictionary,
    pub coeffs: SparseCoeffs,
    /// `D_raw = Y Xᵀ (X Xᵀ)⁺` before normalization (`m x d`).
    pub raw: DenseMatrix,
    /// `X Xᵀ` was singular and the minimum-norm solution was used.
    pub singular: bool,
    /// Codewords whose raw column vanished; they keep their previous value
    /// and their coefficient row is zeroed.
    pub kept_atoms: Vec<usize>,
}

/// `D_raw = Y Xᵀ(XXᵀ)⁻¹` (minimum norm when singular), then unit columns with
/// the coefficient rows rescaled so that `D′X′ = D_raw X`.
pub fn mod_update(dict: &Dictionary, y: &DenseMatrix, x: &SparseCoeffs) -> Result<ModOutcome> {
    check_shapes(dict, y, x)?;
    let (m, d, n) = (dict.m(), dict.d(), x.n());
    // Xᵀ column-major: column i is row i of X.
    let mut xt = vec![0.0; n * d];
    for j in 0..n {
        for (&i, &v) in x.pattern().column(j).iter().zip(x.column_values(j)) {
            xt[i * n + j] = v;
        }
    }
    let qr = PivotedQr::new(n, d, &xt);
    // Each row of D_raw solves min ‖Y_{r,:}ᵀ − Xᵀ D_{r,:}ᵀ‖.
    let rows = par::map_indexed(m, |r| qr.solve(y.row(r)));
    let raw = DenseMatrix::from_rows(&rows)?;

    let mut atoms = Vec::with_capacity(m * d);
    let mut scales = vec![0.0; d];
    let mut kept_atoms = Vec::new();
    for i in 0..d {
        let col = raw.column(i);
        let nrm = norm(&col);
        if nrm > 0.0 && nrm.is_finite() {
            atoms.extend(col.iter().map(|v| v / nrm));
            scales[i] = nrm;
        } else {
            atoms.extend_from_slice(dict.atom(i));
            kept_atoms.push(i);
        }
    }
    let mut coeffs = x.clone();
    for j in 0..n {
        let idx = x.pattern().column(j).to_vec();
        for (v, i) in coeffs.column_values_mut(j).iter_mut().zip(idx) {
            *v *= scales[i];
        }
    }
    Ok(ModOutcome {
        dict: Dictionary::from_col_major(m, d, atoms)?,
        coeffs,
        raw,
        singular: !qr.is_full_rank(),
        kept_atoms,
    })
}

#[derive(Debug, Clone)]
pub struct KsvdOutcome {
    pub dict: Dictionary,
    pub coeffs: SparseCoeffs,
    /// Codewords with an empty row, left untouched.
    pub skipped: Vec<usize>,
    /// Codewords whose restricted error matrix was zero; coefficients zeroed.
    pub zero_error: Vec<usize>,
    /// `‖Y − DX‖_F²` before the sweep and after each codeword step.
    pub step_objectives: Vec<f64>,
}

/// One K-SVD sweep over the codewords in ascending order. Each step replaces
/// `D_{:,i}` and `X_{i,Ω(i,:)}` by the best rank-one approximation of the
/// restricted error matrix `E_i`.
pub fn ksvd_update(dict: &Dictionary, y: &DenseMatrix, x: &SparseCoeffs) -> Result<KsvdOutcome> {
    check_shapes(dict, y, x)?;
    let (m, d, n) = (dict.m(), dict.d(), x.n());
    let mut atoms = dict.atoms().to_vec();
    let mut coeffs = x.clone();
    let mut residual: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut r = y.column(j);
            for (&i, &v) in x.pattern().column(j).iter().zip(x.column_values(j)) {
                axpy(-v, dict.atom(i), &mut r);
            }
            r
        })
        .collect();
    let energy = |res: &[Vec<f64>]| res.iter().map(|r| dot(r, r)).sum::<f64>();
    let mut step_objectives = vec![energy(&residual)];
    let mut skipped = Vec::new();
    let mut zero_error = Vec::new();

    for i in 0..d {
        let cols = x.pattern().row(i).to_vec();
        if cols.is_empty() {
            skipped.push(i);
            step_objectives.push(*step_objectives.last().expect("nonempty"));
            continue;
        }
        let atom = atoms[i * m..(i + 1) * m].to_vec();
        let mut e = Vec::with_capacity(m * cols.len());
        for &j in &cols {
            let mut col = residual[j].clone();
            axpy(coeffs.get(i, j), &atom, &mut col);
            e.extend_from_slice(&col);
        }
        match rank_one_svd_col_major(m, cols.len(), &e) {
            RankOneSvd::ZeroMatrix => {
                zero_error.push(i);
                for (k, &j) in cols.iter().enumerate() {
                    coeffs.set(i, j, 0.0)?;
                    residual[j].copy_from_slice(&e[k * m..(k + 1) * m]);
                }
            }
            RankOneSvd::Pair(t) => {
                atoms[i * m..(i + 1) * m].copy_from_slice(&t.u);
                for (k, &j) in cols.iter().enumerate() {
                    let xv = t.value * t.v[k];
                    coeffs.set(i, j, xv)?;
                    let mut col = e[k * m..(k + 1) * m].to_vec();
                    axpy(-xv, &t.u, &mut col);
                    residual[j] = col;
                }
            }
        }
        step_objectives.push(energy(&residual));
    }
    Ok(KsvdOutcome {
        dict: Dictionary::from_unit_atoms(m, d, atoms),
        coeffs,
        skipped,
        zero_error,
        step_objectives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{singular_values, stiefel_sample_uniform, RngState};
    use crate::sparse_coding::{residual_energy, SparsityPattern};

    #[test]
    fn single_atom_mod_takes_mean_direction() {
        let dict = Dictionary::from_columns_normalized(2, &[vec![1.0, 0.0]]).unwrap();
        let y = DenseMatrix::from_columns(2, &[vec![3.0, 4.0], vec![3.0, 4.0]]).unwrap();
        let x = SparseCoeffs::new(SparsityPattern::new(1, vec![vec![0], vec![0]]).unwrap(), vec![vec![1.0], vec![1.0]])
            .unwrap();
        let out = mod_update(&dict, &y, &x).unwrap();
        assert!((out.dict.atom(0)[0] - 0.6).abs() < 1e-12 && (out.dict.atom(0)[1] - 0.8).abs() < 1e-12);
        assert!(residual_energy(&out.dict, &y, &out.coeffs).unwrap() < 1e-20);
    }

    #[test]
    fn single_atom_ksvd_is_rank_one_approximation() {
        let mut rng = RngState::new(8);
        let y = DenseMatrix::new(4, 6, rng.normal_vec(24)).unwrap();
        let dict = Dictionary::from_columns_normalized(4, &[stiefel_sample_uniform(4, &mut rng)]).unwrap();
        let x = SparseCoeffs::zeros(SparsityPattern::new(1, vec![vec![0]; 6]).unwrap());
        let out = ksvd_update(&dict, &y, &x).unwrap();
        let sv = singular_values(&y);
        let tail: f64 = sv[1..].iter().map(|s| s * s).sum();
        let f = residual_energy(&out.dict, &y, &out.coeffs).unwrap();
        assert!((f - tail).abs() < 1e-9 * y.frobenius_norm_sq());
    }

    #[test]
    fn empty_rows_are_skipped_and_mod_keeps_atom() {
        let dict = Dictionary::from_columns_normalized(2, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = DenseMatrix::from_columns(2, &[vec![1.0, 2.0]]).unwrap();
        let x = SparseCoeffs::new(SparsityPattern::new(2, vec![vec![0]]).unwrap(), vec![vec![1.0]]).unwrap();
        let k = ksvd_update(&dict, &y, &x).unwrap();
        assert_eq!(k.skipped, vec![1]);
        assert_eq!(k.dict.atom(1), dict.atom(1));
        let m = mod_update(&dict, &y, &x).unwrap();
        assert!(m.singular);
        assert_eq!(m.kept_atoms, vec![1]);
        assert_eq!(m.dict.atom(1), dict.atom(1));
    }

    #[test]
    fn zero_error_is_flagged() {
        let dict = Dictionary::from_columns_normalized(2, &[vec![1.0, 0.0]]).unwrap();
        let y = DenseMatrix::zeros(2, 1);
        let x = SparseCoeffs::new(SparsityPattern::new(1, vec![vec![0]]).unwrap(), vec![vec![0.0]]).unwrap();
        let k = ksvd_update(&dict, &y, &x).unwrap();
        assert_eq!(k.zero_error, vec![0]);
        assert_eq!(k.coeffs.get(0, 0), 0.0);
    }
}
