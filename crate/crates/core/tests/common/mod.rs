#![allow(dead_code)]

pub mod oracle;

use oracle::Mat;
use simco::numerics::{stiefel_sample_uniform, DenseMatrix, RngState};
use simco::{Dictionary, SparseCoeffs, SparsityPattern};

pub fn to_mat(a: &DenseMatrix) -> Mat {
    (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
}

pub fn dict_mat(d: &Dictionary) -> Mat {
    to_mat(&d.matrix())
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut RngState) -> DenseMatrix {
    DenseMatrix::new(rows, cols, rng.normal_vec(rows * cols)).unwrap()
}

pub fn random_dictionary(m: usize, d: usize, rng: &mut RngState) -> Dictionary {
    let cols: Vec<Vec<f64>> = (0..d).map(|_| stiefel_sample_uniform(m, rng)).collect();
    Dictionary::from_columns_normalized(m, &cols).unwrap()
}

pub fn random_pattern(d: usize, n: usize, s: usize, rng: &mut RngState) -> SparsityPattern {
    let cols = (0..n)
        .map(|_| {
            let mut c = rng.subset(d, s);
            c.sort_unstable();
            c
        })
        .collect();
    SparsityPattern::new(d, cols).unwrap()
}

pub fn random_coeffs(pattern: SparsityPattern, rng: &mut RngState) -> SparseCoeffs {
    let values = (0..pattern.n()).map(|j| rng.normal_vec(pattern.column(j).len())).collect();
    SparseCoeffs::new(pattern, values).unwrap()
}

/// Noisy sparse instance `(D, Y, X)` with `Y ≈ DX` and `X` supported on a random pattern.
pub fn random_instance(
    m: usize,
    d: usize,
    n: usize,
    s: usize,
    noise: f64,
    rng: &mut RngState,
) -> (Dictionary, DenseMatrix, SparseCoeffs) {
    let dict = random_dictionary(m, d, rng);
    let x = random_coeffs(random_pattern(d, n, s, rng), rng);
    let clean = x.reconstruct(&dict);
    let data: Vec<f64> = clean.data().iter().map(|v| v + noise * rng.normal()).collect();
    (dict, DenseMatrix::new(m, n, data).unwrap(), x)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

pub fn vnorm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}
