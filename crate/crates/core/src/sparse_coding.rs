//! Sparse coefficient storage and orthogonal matching pursuit.

use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{mismatch, Result, SimcoError};
use crate::numerics::{axpy, dot, solve_col_major, DenseMatrix, LsBackend};
use crate::par;

/// The index set Ω of admissible nonzeros, stored per training column with a
/// derived per-codeword (row) view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    d: usize,
    columns: Vec<Vec<usize>>,
    rows: Vec<Vec<usize>>,
}

impl SparsityPattern {
    /// `columns[j]` lists the codewords allowed in column `j`; each list must
    /// be strictly increasing with entries below `d`.
    pub fn new(d: usize, columns: Vec<Vec<usize>>) -> Result<Self> {
        for (j, col) in columns.iter().enumerate() {
            if col.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SimcoError::Precondition(format!(
                    "pattern column {j} is not strictly increasing"
                )));
            }
            if let Some(&bad) = col.iter().find(|&&i| i >= d) {
                return Err(SimcoError::Precondition(format!(
                    "pattern column {j} references codeword {bad} >= {d}"
                )));
            }
        }
        let mut rows = vec![Vec::new(); d];
        for (j, col) in columns.iter().enumerate() {
            for &i in col {
                rows[i].push(j);
            }
        }
        Ok(Self { d, columns, rows })
    }

    pub fn empty(d: usize, n: usize) -> Self {
        Self {
            d,
            columns: vec![Vec::new(); n],
            rows: vec![Vec::new(); d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    /// Ω(:, j)
    pub fn column(&self, j: usize) -> &[usize] {
        &self.columns[j]
    }

    /// Ω(i, :)
    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.columns[j].binary_search(&i).is_ok()
    }
}

/// Coefficients `X ∈ X(Ω)`: values stored aligned with the pattern, so
/// entries outside Ω are zero by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoeffs {
    pattern: SparsityPattern,
    values: Vec<Vec<f64>>,
}

impl SparseCoeffs {
    pub fn new(pattern: SparsityPattern, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != pattern.n() {
            return Err(mismatch("SparseCoeffs::new columns", pattern.n(), values.len()));
        }
        for (j, v) in values.iter().enumerate() {
            if v.len() != pattern.column(j).len() {
                return Err(mismatch("SparseCoeffs::new column length", pattern.column(j).len(), v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(SimcoError::Precondition(format!("non-finite coefficient in column {j}")));
            }
        }
        Ok(Self { pattern, values })
    }

    pub fn zeros(pattern: SparsityPattern) -> Self {
        let values = (0..pattern.n()).map(|j| vec![0.0; pattern.column(j).len()]).collect();
        Self { pattern, values }
    }

    /// Keeps the entries of `dense` (a `d x n` matrix) that lie in `pattern`.
    pub fn from_dense(dense: &DenseMatrix, pattern: SparsityPattern) -> Result<Self> {
        if dense.shape() != (pattern.d(), pattern.n()) {
            return Err(mismatch(
                "SparseCoeffs::from_dense",
                format!("{}x{}", pattern.d(), pattern.n()),
                format!("{}x{}", dense.rows(), dense.cols()),
            ));
        }
        let values = (0..pattern.n())
            .map(|j| pattern.column(j).iter().map(|&i| dense.get(i, j)).collect())
            .collect();
        Self::new(pattern, values)
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn d(&self) -> usize {
        self.pattern.d()
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    /// Values of column `j`, aligned with `pattern().column(j)`.
    pub fn column_values(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub(crate) fn column_values_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.pattern.column(j).binary_search(&i) {
            Ok(k) => self.values[j][k],
            Err(_) => 0.0,
        }
    }

    /// Sets `X_{i,j}`; fails if `(i, j) ∉ Ω`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        match self.pattern.column(j).binary_search(&i) {
            Ok(k) => {
                self.values[j][k] = v;
                Ok(())
            }
            Err(_) => Err(SimcoError::Precondition(format!("({i}, {j}) is outside the pattern"))),
        }
    }

    /// Entries of row `i` as `(j, X_{i,j})` over `j ∈ Ω(i,:)`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pattern.row(i).iter().map(move |&j| (j, self.get(i, j)))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.d(), self.n());
        for j in 0..self.n() {
            for (&i, &v) in self.pattern.column(j).iter().zip(&self.values[j]) {
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().flatten().map(|v| v * v).sum()
    }

    /// `‖X_{I,:}‖_F²` for a sorted index set `I`.
    pub fn rows_norm_sq(&self, rows: &[usize]) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.n() {
            for (&i, &v) in self.pattern.column(j).iter().zip(&self.values[j]) {
                if rows.binary_search(&i).is_ok() {
                    acc += v * v;
                }
            }
        }
        acc
    }

    /// Column `j` of `D X`.
    pub fn reconstruct_column(&self, dict: &Dictionary, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; dict.m()];
        for (&i, &v) in self.pattern.column(j).iter().zip(&self.values[j]) {
            axpy(v, dict.atom(i), &mut out);
        }
        out
    }

    /// The product `D X` as an `m x n` matrix.
    pub fn reconstruct(&self, dict: &Dictionary) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = (0..self.n()).map(|j| self.reconstruct_column(dict, j)).collect();
        DenseMatrix::from_columns(dict.m(), &cols).expect("finite product")
    }
}

/// OMP stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OmpStop {
    /// Exactly `S` atoms per column.
    Sparsity { s: usize },
    /// Add atoms until `‖r‖₂ ≤ epsilon` or `max_atoms` are selected.
    ResidualThreshold { epsilon: f64, max_atoms: usize },
}

impl OmpStop {
    fn max_atoms(&self) -> usize {
        match *self {
            Self::Sparsity { s } => s,
            Self::ResidualThreshold { max_atoms, .. } => max_atoms,
        }
    }
}

/// Result of encoding one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpColumn {
    /// Selected atoms, sorted ascending.
    pub support: Vec<usize>,
    /// Coefficients aligned with `support`.
    pub coeffs: Vec<f64>,
    /// Atoms in the order they were selected.
    pub selection_order: Vec<usize>,
    /// `‖r‖₂` before the first selection and after each one.
    pub residual_norms: Vec<f64>,
}

/// Greedy OMP on a single signal. Ties in `|⟨d_i, r⟩|` go to the smaller index.
pub fn omp_column(dict: &Dictionary, y: &[f64], stop: OmpStop) -> OmpColumn {
    let m = dict.m();
    let d = dict.d();
    let max_atoms = stop.max_atoms().min(d);
    let eps_sq = match stop {
        OmpStop::ResidualThreshold { epsilon, .. } => epsilon * epsilon,
        OmpStop::Sparsity { .. } => -1.0,
    };
    let mut selected: Vec<usize> = Vec::with_capacity(max_atoms);
    let mut in_support = vec![false; d];
    let mut residual = y.to_vec();
    let mut residual_norms = vec![dot(&residual, &residual).sqrt()];
    let mut coeffs: Vec<f64> = Vec::new();

    while selected.len() < max_atoms && dot(&residual, &residual) > eps_sq {
        let mut best = usize::MAX;
        let mut best_abs = -1.0;
        for i in 0..d {
            if in_support[i] {
                continue;
            }
            let c = dot(dict.atom(i), &residual).abs();
            if c > best_abs {
                best_abs = c;
                best = i;
            }
        }
        selected.push(best);
        in_support[best] = true;
        let sub = dict.gather(&selected);
        coeffs = solve_col_major(m, selected.len(), &sub, y, 0.0, LsBackend::Qr);
        residual.copy_from_slice(y);
        for (&i, &c) in selected.iter().zip(&coeffs) {
            axpy(-c, dict.atom(i), &mut residual);
        }
        residual_norms.push(dot(&residual, &residual).sqrt());
    }

    let mut pairs: Vec<(usize, f64)> = selected.iter().copied().zip(coeffs).collect();
    pairs.sort_by_key(|p| p.0);
    OmpColumn {
        support: pairs.iter().map(|p| p.0).collect(),
        coeffs: pairs.iter().map(|p| p.1).collect(),
        selection_order: selected,
        residual_norms,
    }
}

/// Encodes every column of `Y` with exactly `s` atoms.
pub fn omp_encode(dict: &Dictionary, y: &DenseMatrix, s: usize) -> Result<SparseCoeffs> {
    if s == 0 || s > dict.m().min(dict.d()) {
        return Err(SimcoError::Precondition(format!(
            "sparsity {s} must lie in 1..={}",
            dict.m().min(dict.d())
        )));
    }
    omp_encode_with(dict, y, OmpStop::Sparsity { s })
}

/// Encodes every column of `Y` under the given stopping rule. Columns are
/// independent and processed in parallel.
pub fn omp_encode_with(dict: &Dictionary, y: &DenseMatrix, stop: OmpStop) -> Result<SparseCoeffs> {
    if y.rows() != dict.m() {
        return Err(mismatch("omp_encode signal length", dict.m(), y.rows()));
    }
    let cols = y.columns();
    let encoded = par::map_slice(&cols, |col| omp_column(dict, col, stop));
    let (support, values): (Vec<_>, Vec<_>) = encoded.into_iter().map(|c| (c.support, c.coeffs)).unzip();
    SparseCoeffs::new(SparsityPattern::new(dict.d(), support)?, values)
}

/// `‖Y − DX‖_F²`.
pub fn residual_energy(dict: &Dictionary, y: &DenseMatrix, x: &SparseCoeffs) -> Result<f64> {
    if y.rows() != dict.m() || y.cols() != x.n() || x.d() != dict.d() {
        return Err(mismatch(
            "residual_energy",
            format!("Y {}x{}, X {}x{}", dict.m(), x.n(), dict.d(), x.n()),
            format!("Y {}x{}, X {}x{}", y.rows(), y.cols(), x.d(), x.n()),
        ));
    }
    let mut total = 0.0;
    for j in 0..x.n() {
        let rec = x.reconstruct_column(dict, j);
        for (i, r) in rec.iter().enumerate() {
            let e = y.get(i, j) - r;
            total += e * e;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{stiefel_sample_uniform, RngState};

    fn random_dict(m: usize, d: usize, seed: u64) -> Dictionary {
        let mut rng = RngState::new(seed);
        let cols: Vec<Vec<f64>> = (0..d).map(|_| stiefel_sample_uniform(m, &mut rng)).collect();
        Dictionary::from_columns_normalized(m, &cols).unwrap()
    }

    #[test]
    fn pattern_rejects_bad_lists() {
        assert!(SparsityPattern::new(4, vec![vec![1, 1]]).is_err());
        assert!(SparsityPattern::new(4, vec![vec![2, 1]]).is_err());
        assert!(SparsityPattern::new(4, vec![vec![0, 4]]).is_err());
        let p = SparsityPattern::new(4, vec![vec![0, 2], vec![2, 3]]).unwrap();
        assert_eq!(p.row(2), &[0, 1]);
        assert_eq!(p.row(1), &[] as &[usize]);
    }

    #[test]
    fn atom_itself_is_recovered() {
        let dict = random_dict(8, 12, 3);
        let y = DenseMatrix::from_columns(8, &[dict.atom(5).to_vec()]).unwrap();
        let x = omp_encode(&dict, &y, 1).unwrap();
        assert_eq!(x.pattern().column(0), &[5]);
        assert!((x.column_values(0)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_uses_tie_break() {
        let dict = random_dict(6, 9, 4);
        let y = DenseMatrix::zeros(6, 1);
        let x = omp_encode(&dict, &y, 3).unwrap();
        assert_eq!(x.pattern().column(0), &[0, 1, 2]);
        assert!(x.column_values(0).iter().all(|&v| v == 0.0));
        assert_eq!(residual_energy(&dict, &y, &x).unwrap(), 0.0);
    }

    #[test]
    fn threshold_mode_can_select_nothing() {
        let dict = random_dict(6, 9, 4);
        let col = omp_column(&dict, &[0.01; 6], OmpStop::ResidualThreshold { epsilon: 1.0, max_atoms: 4 });
        assert!(col.support.is_empty());
    }

    #[test]
    fn sparsity_bounds_are_checked() {
        let dict = random_dict(4, 6, 1);
        let y = DenseMatrix::zeros(4, 2);
        assert!(omp_encode(&dict, &y, 0).is_err());
        assert!(omp_encode(&dict, &y, 5).is_err());
        assert!(omp_encode(&dict, &DenseMatrix::zeros(3, 2), 1).is_err());
    }

    #[test]
    fn zero_coefficients_give_full_energy() {
        let dict = random_dict(5, 7, 9);
        let mut rng = RngState::new(10);
        let y = DenseMatrix::new(5, 3, rng.normal_vec(15)).unwrap();
        let x = SparseCoeffs::zeros(SparsityPattern::empty(7, 3));
        let e = residual_energy(&dict, &y, &x).unwrap();
        assert!((e - y.frobenius_norm_sq()).abs() < 1e-12);
    }

    #[test]
    fn set_outside_pattern_fails() {
        let p = SparsityPattern::new(3, vec![vec![1]]).unwrap();
        let mut x = SparseCoeffs::zeros(p);
        assert!(x.set(0, 0, 1.0).is_err());
        x.set(1, 0, 2.0).unwrap();
        assert_eq!(x.get(1, 0), 2.0);
        assert_eq!(x.to_dense().get(1, 0), 2.0);
    }
}
