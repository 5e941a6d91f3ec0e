//! Singular value decompositions for the small dense matrices that appear in
//! dictionary updates: one-sided (Hestenes) Jacobi for the full spectrum and
//! power iteration for the leading singular triplet.

use super::matrix::{dot, norm, DenseMatrix};

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 10_000;

/// Thin SVD `A = U diag(σ) Vᵀ` of an `m x n` matrix with `k = min(m, n)`.
///
/// `left` is `m x k` and `right` is `n x k`. When `m <= n` the left factor is
/// a complete orthonormal basis of `Rᵐ`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub singular_values: Vec<f64>,
    pub left: DenseMatrix,
    pub right: DenseMatrix,
}

impl SvdResult {
    pub fn left_vector(&self, i: usize) -> Vec<f64> {
        self.left.column(i)
    }

    pub fn right_vector(&self, i: usize) -> Vec<f64> {
        self.right.column(i)
    }
}

/// Hestenes one-sided Jacobi on a column-major `m x s` matrix (`m >= s`).
/// Rotates the columns of `w` until they are mutually orthogonal and returns
/// the accumulated right rotation `V` (column-major `s x s`) if requested.
fn hestenes(m: usize, s: usize, w: &mut [f64], want_v: bool) -> Option<Vec<f64>> {
    let mut v = want_v.then(|| {
        let mut v = vec![0.0; s * s];
        for i in 0..s {
            v[i * s + i] = 1.0;
        }
        v
    });
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..s {
            for q in p + 1..s {
                let (alpha, beta, gamma) = {
                    let wp = &w[p * m..(p + 1) * m];
                    let wq = &w[q * m..(q + 1) * m];
                    (dot(wp, wp), dot(wq, wq), dot(wp, wq))
                };
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate(w, m, p, q, c, sn);
                if let Some(v) = v.as_mut() {
                    rotate(v, s, p, q, c, sn);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

fn rotate(a: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..len {
        let x = a[p * len + i];
        let y = a[q * len + i];
        a[p * len + i] = c * x - s * y;
        a[q * len + i] = s * x + c * y;
    }
}

/// Full thin SVD via one-sided Jacobi. Singular values are sorted
/// nonincreasing; each left vector's first significant entry is positive.
pub fn svd(a: &DenseMatrix) -> SvdResult {
    let (m, n) = a.shape();
    if m >= n {
        let (sv, u, v) = svd_tall(m, n, a.to_col_major());
        SvdResult {
            singular_values: sv,
            left: DenseMatrix::from_col_major(m, n, &u).expect("finite"),
            right: DenseMatrix::from_col_major(n, n, &v).expect("finite"),
        }
    } else {
        // Aᵀ = U' Σ V'ᵀ, so A = V' Σ U'ᵀ.
        let (sv, u, v) = svd_tall(n, m, a.transpose().to_col_major());
        let mut res = SvdResult {
            singular_values: sv,
            left: DenseMatrix::from_col_major(m, m, &v).expect("finite"),
            right: DenseMatrix::from_col_major(n, m, &u).expect("finite"),
        };
        normalize_signs(&mut res);
        res
    }
}

/// Returns (σ, U col-major m x s, V col-major s x s), sorted nonincreasing.
fn svd_tall(m: usize, s: usize, mut w: Vec<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let v = hestenes(m, s, &mut w, true).expect("requested V");
    let sigma: Vec<f64> = (0..s).map(|j| norm(&w[j * m..(j + 1) * m])).collect();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));

    let smax = order.first().map_or(0.0, |&i| sigma[i]);
    let cutoff = smax * f64::EPSILON * (m as f64);
    let mut sv = Vec::with_capacity(s);
    let mut u = vec![0.0; m * s];
    let mut vv = vec![0.0; s * s];
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        sv.push(sigma[j]);
        vv[k * s..(k + 1) * s].copy_from_slice(&v[j * s..(j + 1) * s]);
        if sigma[j] > cutoff && sigma[j] > 0.0 {
            for i in 0..m {
                u[k * m + i] = w[j * m + i] / sigma[j];
            }
        } else {
            missing.push(k);
        }
    }
    complete_basis(m, &mut u, &missing);
    for k in 0..s {
        let col = &u[k * m..(k + 1) * m];
        let first = col.iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(1.0);
        if first < 0.0 {
            u[k * m..(k + 1) * m].iter_mut().for_each(|x| *x = -*x);
            vv[k * s..(k + 1) * s].iter_mut().for_each(|x| *x = -*x);
        }
    }
    (sv, u, vv)
}

/// Fills the listed columns with unit vectors orthogonal to all other columns
/// (Gram–Schmidt over the standard basis, twice for stability).
fn complete_basis(m: usize, u: &mut [f64], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let cols = u.len() / m;
    let mut filled: Vec<bool> = (0..cols).map(|k| !missing.contains(&k)).collect();
    let mut e = 0;
    for &k in missing {
        loop {
            assert!(e < m, "cannot complete orthonormal basis");
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for j in 0..cols {
                    if filled[j] {
                        let col = &u[j * m..(j + 1) * m];
                        let proj = dot(col, &cand);
                        cand.iter_mut().zip(col).for_each(|(c, x)| *c -= proj * x);
                    }
                }
            }
            let nrm = norm(&cand);
            if nrm > 1e-8 {
                cand.iter_mut().for_each(|c| *c /= nrm);
                u[k * m..(k + 1) * m].copy_from_slice(&cand);
                filled[k] = true;
                break;
            }
        }
    }
}

fn normalize_signs(res: &mut SvdResult) {
    let k = res.singular_values.len();
    for j in 0..k {
        let col = res.left.column(j);
        let first = col.iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(1.0);
        if first < 0.0 {
            let neg: Vec<f64> = col.iter().map(|x| -x).collect();
            res.left.set_column(j, &neg);
            let r: Vec<f64> = res.right.column(j).iter().map(|x| -x).collect();
            res.right.set_column(j, &r);
        }
    }
}

/// All `min(m, s)` singular values of `A`, sorted nonincreasing.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let (m, n) = a.shape();
    let (rows, cols, mut w) = if m >= n {
        (m, n, a.to_col_major())
    } else {
        (n, m, a.transpose().to_col_major())
    };
    hestenes(rows, cols, &mut w, false);
    let mut sv: Vec<f64> = (0..cols).map(|j| norm(&w[j * rows..(j + 1) * rows])).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Singular values of a column-major `m x s` block (used on dictionary
/// submatrices without building a `DenseMatrix`).
pub(crate) fn singular_values_col_major(m: usize, s: usize, a: &[f64]) -> Vec<f64> {
    if m >= s {
        let mut w = a.to_vec();
        hestenes(m, s, &mut w, false);
        let mut sv: Vec<f64> = (0..s).map(|j| norm(&w[j * m..(j + 1) * m])).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    } else {
        let dm = DenseMatrix::from_col_major(m, s, a).expect("finite");
        singular_values(&dm)
    }
}

/// Leading singular triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub value: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RankOneSvd {
    Pair(SingularTriplet),
    /// The input was the zero matrix; λ1 = 0 and no direction is defined.
    ZeroMatrix,
}

impl RankOneSvd {
    pub fn value(&self) -> f64 {
        match self {
            Self::Pair(t) => t.value,
            Self::ZeroMatrix => 0.0,
        }
    }

    pub fn triplet(&self) -> Option<&SingularTriplet> {
        match self {
            Self::Pair(t) => Some(t),
            Self::ZeroMatrix => None,
        }
    }
}

/// Largest singular value and its singular vectors via power iteration on
/// `AᵀA`, started from the normalized row sums of `AᵀA` so the result does
/// not depend on any random state.
pub fn rank_one_svd(a: &DenseMatrix) -> RankOneSvd {
    let (m, n) = a.shape();
    rank_one_svd_col_major(m, n, &a.to_col_major())
}

pub(crate) fn rank_one_svd_col_major(m: usize, n: usize, a: &[f64]) -> RankOneSvd {
    let av = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                super::matrix::axpy(vj, &a[j * m..(j + 1) * m], &mut out);
            }
        }
        out
    };
    let atu = |u: &[f64]| -> Vec<f64> { (0..n).map(|j| dot(&a[j * m..(j + 1) * m], u)).collect() };

    if a.iter().all(|&x| x == 0.0) || m == 0 || n == 0 {
        return RankOneSvd::ZeroMatrix;
    }
    let mut v = atu(&av(&vec![1.0; n]));
    if norm(&v) == 0.0 {
        // Row sums cancel; start from the heaviest column instead.
        let k = (0..n)
            .max_by(|&i, &j| {
                let ni = norm(&a[i * m..(i + 1) * m]);
                let nj = norm(&a[j * m..(j + 1) * m]);
                ni.total_cmp(&nj).then(j.cmp(&i))
            })
            .expect("n >= 1");
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        v = atu(&av(&e));
    }
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut rho_prev = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < POWER_MAX_ITERS {
        iterations += 1;
        let w = av(&v);
        let lambda = norm(&w);
        if lambda == 0.0 {
            break;
        }
        let u: Vec<f64> = w.iter().map(|x| x / lambda).collect();
        let z = atu(&u);
        let rho = norm(&z);
        let resid = z
            .iter()
            .zip(&v)
            .map(|(zi, vi)| (zi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        v = z.iter().map(|x| x / rho).collect();
        if (rho - rho_prev).abs() <= POWER_TOL * rho && resid <= 1e-11 * lambda {
            converged = true;
            break;
        }
        rho_prev = rho;
    }

    let w = av(&v);
    let value = norm(&w);
    if value == 0.0 {
        return RankOneSvd::ZeroMatrix;
    }
    let mut u: Vec<f64> = w.iter().map(|x| x / value).collect();
    let thresh = 1e-14;
    if u.iter().copied().find(|x| x.abs() > thresh).unwrap_or(1.0) < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
        v.iter_mut().for_each(|x| *x = -*x);
    }
    RankOneSvd::Pair(SingularTriplet {
        value,
        u,
        v,
        iterations,
        converged,
    })
}

/// Ratio `λ_max / λ_min` of a column-major `m x s` block; `+inf` when the
/// block is numerically rank deficient.
pub(crate) fn condition_col_major(m: usize, s: usize, a: &[f64]) -> f64 {
    let sv = singular_values_col_major(m, s, a);
    let (Some(&max), Some(&min)) = (sv.first(), sv.last()) else {
        return 1.0;
    };
    if sv.len() < s || min <= max * f64::EPSILON * (m.max(s) as f64) {
        f64::INFINITY
    } else {
        max / min
    }
}
