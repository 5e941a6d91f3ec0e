use crate::error::{mismatch, Result, SimcoError};
use crate::numerics::{norm, DenseMatrix};

/// Tolerance on the unit-column invariant of the feasible set.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// An `m x d` dictionary whose columns (codewords) all have unit ℓ2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    m: usize,
    d: usize,
    /// Column-major copy of the atoms.
    atoms: Vec<f64>,
}

impl Dictionary {
    /// Wraps a matrix, rejecting it unless every column has norm `1 ± 1e-10`.
    pub fn new(matrix: &DenseMatrix) -> Result<Self> {
        let (m, d) = matrix.shape();
        Self::from_col_major(m, d, matrix.to_col_major())
    }

    pub fn from_col_major(m: usize, d: usize, atoms: Vec<f64>) -> Result<Self> {
        if atoms.len() != m * d {
            return Err(mismatch("Dictionary::from_col_major", m * d, atoms.len()));
        }
        if m == 0 || d == 0 {
            return Err(SimcoError::Precondition("dictionary must be non-empty".into()));
        }
        if let Some(index) = atoms.iter().position(|v| !v.is_finite()) {
            return Err(SimcoError::NonFinite { index });
        }
        for i in 0..d {
            let n = norm(&atoms[i * m..(i + 1) * m]);
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(SimcoError::Precondition(format!(
                    "codeword {i} has norm {n}, expected 1"
                )));
            }
        }
        Ok(Self { m, d, atoms })
    }

    /// Normalizes each given column. Zero columns are rejected.
    pub fn from_columns_normalized(m: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut atoms = Vec::with_capacity(m * columns.len());
        for (i, c) in columns.iter().enumerate() {
            if c.len() != m {
                return Err(mismatch("Dictionary::from_columns_normalized", m, c.len()));
            }
            let n = norm(c);
            if !(n > 0.0) {
                return Err(SimcoError::Precondition(format!("column {i} is zero")));
            }
            atoms.extend(c.iter().map(|v| v / n));
        }
        Self::from_col_major(m, columns.len(), atoms)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.m..(i + 1) * self.m]
    }

    /// All atoms, column-major.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn matrix(&self) -> DenseMatrix {
        DenseMatrix::from_col_major(self.m, self.d, &self.atoms).expect("finite atoms")
    }

    /// Column-major copy of the selected atoms.
    pub fn gather(&self, idx: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(idx.len() * self.m);
        for &i in idx {
            out.extend_from_slice(self.atom(i));
        }
        out
    }

    /// Same dictionary with codeword `i` negated.
    pub fn flip_sign(&self, i: usize) -> Self {
        let mut atoms = self.atoms.clone();
        atoms[i * self.m..(i + 1) * self.m]
            .iter_mut()
            .for_each(|v| *v = -*v);
        Self { atoms, ..*self }
    }

    /// Replaces one codeword (normalizing it).
    pub fn with_atom(&self, i: usize, atom: &[f64]) -> Result<Self> {
        let n = norm(atom);
        if atom.len() != self.m || !(n > 0.0) {
            return Err(SimcoError::Precondition(format!("invalid replacement for codeword {i}")));
        }
        let mut atoms = self.atoms.clone();
        for (dst, v) in atoms[i * self.m..(i + 1) * self.m].iter_mut().zip(atom) {
            *dst = v / n;
        }
        Ok(Self { atoms, ..*self })
    }

    /// Maximum deviation of any column norm from one.
    pub fn max_norm_deviation(&self) -> f64 {
        (0..self.d)
            .map(|i| (norm(self.atom(i)) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Writes raw columns produced by a norm-preserving map (geodesic steps,
    /// rank-one updates); checked only in debug builds.
    pub(crate) fn from_unit_atoms(m: usize, d: usize, atoms: Vec<f64>) -> Self {
        debug_assert!((0..d).all(|i| (norm(&atoms[i * m..(i + 1) * m]) - 1.0).abs() <= 1e-9));
        Self { m, d, atoms }
    }
}
