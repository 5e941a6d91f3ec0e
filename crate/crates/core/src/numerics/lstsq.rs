//! Dense least-squares solvers.
//!
//! The primary backend is Householder QR with column pivoting. When the
//! pivoted factor reveals rank deficiency, the trapezoidal factor is reduced
//! once more (a complete orthogonal decomposition) so the returned solution is
//! the minimum-norm minimizer, i.e. `A⁺y`.
//!
//! Ridge problems `min ‖y − Ax‖² + μ‖x‖²` are solved by stacking `√μ·I`
//! under `A` and zeros under `y`, which always has full column rank for μ > 0.

use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, DenseMatrix};
use crate::error::{mismatch, Result, SimcoError};

/// Which solver backs the per-column least-squares subproblems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LsBackend {
    #[default]
    #[serde(rename = "QR")]
    Qr,
    /// Conjugate gradients on the (damped) normal equations (CGLS).
    #[serde(rename = "CG")]
    Cg,
}

/// Householder QR with column pivoting of a column-major `m x s` matrix.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    m: usize,
    s: usize,
    /// Householder vectors below the diagonal, R on and above it.
    qr: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
    /// QR of the transposed trapezoid `[R11 R12]ᵀ` (s x rank), only when rank < s.
    cod: Option<(Vec<f64>, Vec<f64>)>,
}

impl PivotedQr {
    /// Factors a column-major `m x s` matrix.
    pub fn new(m: usize, s: usize, col_major: &[f64]) -> Self {
        assert_eq!(col_major.len(), m * s, "PivotedQr::new storage length");
        let mut qr = col_major.to_vec();
        let kmax = m.min(s);
        let mut tau = vec![0.0; kmax];
        let mut perm: Vec<usize> = (0..s).collect();
        let mut norms: Vec<f64> = (0..s)
            .map(|j| qr[j * m..(j + 1) * m].iter().map(|v| v * v).sum())
            .collect();

        for k in 0..kmax {
            // Pivot: remaining column with the largest trailing norm.
            let mut p = k;
            for j in k + 1..s {
                if norms[j] > norms[p] {
                    p = j;
                }
            }
            if p != k {
                for i in 0..m {
                    qr.swap(k * m + i, p * m + i);
                }
                perm.swap(k, p);
                norms.swap(k, p);
            }
            let (t, beta) = householder(&mut qr[k * m + k..(k + 1) * m]);
            tau[k] = t;
            for j in k + 1..s {
                let (head, tail) = qr.split_at_mut(j * m);
                let v = &head[k * m + k..(k + 1) * m];
                apply_reflector(t, v, &mut tail[k..m]);
            }
            qr[k * m + k] = beta;
            // Downdating is unstable near cancellation; recompute exactly.
            for j in k + 1..s {
                norms[j] = qr[j * m + k + 1..(j + 1) * m].iter().map(|v| v * v).sum();
            }
        }

        let r00 = if kmax > 0 { qr[0].abs() } else { 0.0 };
        let tol = r00 * f64::EPSILON * (m.max(s) as f64);
        let rank = (0..kmax)
            .take_while(|&k| qr[k * m + k].abs() > tol && r00 > 0.0)
            .count();

        let cod = (rank < s && rank > 0).then(|| {
            // Tᵀ = [R11 R12]ᵀ, s x rank, column-major.
            let mut tt = vec![0.0; s * rank];
            for i in 0..rank {
                for j in i..s {
                    tt[i * s + j] = qr[j * m + i];
                }
            }
            let mut tau2 = vec![0.0; rank];
            for k in 0..rank {
                let (t, beta) = householder(&mut tt[k * s + k..(k + 1) * s]);
                tau2[k] = t;
                for j in k + 1..rank {
                    let (head, tail) = tt.split_at_mut(j * s);
                    let v = &head[k * s + k..(k + 1) * s];
                    apply_reflector(t, v, &mut tail[k..s]);
                }
                tt[k * s + k] = beta;
            }
            (tt, tau2)
        });

        Self {
            m,
            s,
            qr,
            tau,
            perm,
            rank,
            cod,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.s
    }

    /// Minimum-norm least-squares solution for one right-hand side.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let (m, s) = (self.m, self.s);
        assert_eq!(y.len(), m, "PivotedQr::solve rhs length");
        let mut c = y.to_vec();
        for k in 0..self.tau.len() {
            let mut v = self.qr[k * m + k..(k + 1) * m].to_vec();
            v[0] = 1.0;
            apply_reflector(self.tau[k], &v, &mut c[k..m]);
        }
        let r = self.rank;
        let mut z = vec![0.0; s];
        match &self.cod {
            None => {
                // Full column rank (or rank zero): back substitution on R11.
                for i in (0..r).rev() {
                    let mut acc = c[i];
                    for j in i + 1..r {
                        acc -= self.qr[j * m + i] * z[j];
                    }
                    z[i] = acc / self.qr[i * m + i];
                }
            }
            Some((tt, tau2)) => {
                // T z = c[..r] with T = R2ᵀ Q2ᵀ: forward-solve R2ᵀ w = c, z = Q2 [w; 0].
                let mut w = vec![0.0; s];
                for i in 0..r {
                    let mut acc = c[i];
                    for j in 0..i {
                        acc -= tt[i * s + j] * w[j];
                    }
                    w[i] = acc / tt[i * s + i];
                }
                for k in (0..r).rev() {
                    let mut v = tt[k * s + k..(k + 1) * s].to_vec();
                    v[0] = 1.0;
                    apply_reflector(tau2[k], &v, &mut w[k..s]);
                }
                z = w;
            }
        }
        let mut x = vec![0.0; s];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }
}

/// Computes a Householder reflector for `x` in place. On return `x[1..]` holds
/// the essential part of `v` (with implicit `v[0] = 1`); returns `(tau, beta)`
/// such that `(I − tau v vᵀ) x = beta e₁`.
fn householder(x: &mut [f64]) -> (f64, f64) {
    let alpha = x[0];
    let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
    if tail_sq == 0.0 {
        return (0.0, alpha);
    }
    let norm = (alpha * alpha + tail_sq).sqrt();
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let scale = 1.0 / (alpha - beta);
    for v in &mut x[1..] {
        *v *= scale;
    }
    ((beta - alpha) / beta, beta)
}

/// Applies `I − tau v vᵀ` to `target`, treating `v[0]` as 1.
fn apply_reflector(tau: f64, v: &[f64], target: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let mut w = target[0];
    for (vi, ti) in v[1..].iter().zip(&target[1..]) {
        w += vi * ti;
    }
    w *= tau;
    target[0] -= w;
    for (vi, ti) in v[1..].iter().zip(&mut target[1..]) {
        *ti -= w * vi;
    }
}

/// Damped CGLS for `min ‖y − Ax‖² + μ‖x‖²` on a column-major `m x s` matrix.
/// Started from zero, the iterates stay in range(Aᵀ), so for μ = 0 the limit is
/// the minimum-norm solution.
pub fn cgls(m: usize, s: usize, a: &[f64], y: &[f64], mu: f64) -> Vec<f64> {
    let mut x = vec![0.0; s];
    let mut r = y.to_vec();
    let tr = |r: &[f64]| -> Vec<f64> { (0..s).map(|j| dot(&a[j * m..(j + 1) * m], r)).collect() };
    let mut g = tr(&r);
    let mut p = g.clone();
    let mut gamma = dot(&g, &g);
    let gamma0 = gamma;
    if gamma0 == 0.0 {
        return x;
    }
    let max_iter = 4 * s + 20;
    for _ in 0..max_iter {
        let mut q = vec![0.0; m];
        for (j, &pj) in p.iter().enumerate() {
            axpy(pj, &a[j * m..(j + 1) * m], &mut q);
        }
        let delta = dot(&q, &q) + mu * dot(&p, &p);
        if delta <= 0.0 {
            break;
        }
        let alpha = gamma / delta;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        g = tr(&r);
        axpy(-mu, &x, &mut g);
        let gamma_new = dot(&g, &g);
        if gamma_new <= 1e-30 * gamma0 {
            break;
        }
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi = gi + beta * *pi;
        }
    }
    x
}

/// Solves `min ‖y − Ax‖² + μ‖x‖²` for a column-major `m x s` matrix. μ = 0
/// gives the plain (minimum-norm) least-squares solution.
pub fn solve_col_major(
    m: usize,
    s: usize,
    a: &[f64],
    y: &[f64],
    mu: f64,
    backend: LsBackend,
) -> Vec<f64> {
    if s == 0 {
        return Vec::new();
    }
    match backend {
        LsBackend::Cg => cgls(m, s, a, y, mu),
        LsBackend::Qr if mu == 0.0 => PivotedQr::new(m, s, a).solve(y),
        LsBackend::Qr => {
            let rows = m + s;
            let sq = mu.sqrt();
            let mut aug = vec![0.0; rows * s];
            for j in 0..s {
                aug[j * rows..j * rows + m].copy_from_slice(&a[j * m..(j + 1) * m]);
                aug[j * rows + m + j] = sq;
            }
            let mut rhs = vec![0.0; rows];
            rhs[..m].copy_from_slice(y);
            PivotedQr::new(rows, s, &aug).solve(&rhs)
        }
    }
}

/// Returns `x*` minimizing `‖y − Ax‖₂²`; the minimum-norm minimizer when `A`
/// is rank deficient.
pub fn solve_least_squares(a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    check_dims(a, y)?;
    Ok(solve_col_major(a.rows(), a.cols(), &a.to_col_major(), y, 0.0, LsBackend::Qr))
}

/// Ridge solution of `min ‖y − Ax‖² + μ‖x‖²`, μ > 0.
pub fn solve_ridge(a: &DenseMatrix, y: &[f64], mu: f64) -> Result<Vec<f64>> {
    check_dims(a, y)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(SimcoError::Precondition(format!("ridge weight must be > 0, got {mu}")));
    }
    Ok(solve_col_major(a.rows(), a.cols(), &a.to_col_major(), y, mu, LsBackend::Qr))
}

fn check_dims(a: &DenseMatrix, y: &[f64]) -> Result<()> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(SimcoError::Precondition("least squares needs m, s >= 1".into()));
    }
    if y.len() != a.rows() {
        return Err(mismatch("solve_least_squares rhs", a.rows(), y.len()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[Vec<f64>]) -> (usize, usize, Vec<f64>) {
        let a = DenseMatrix::from_rows(rows).unwrap();
        (a.rows(), a.cols(), a.to_col_major())
    }

    #[test]
    fn identity_system() {
        let x = solve_least_squares(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        for (a, b) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_vector_projection() {
        let a = DenseMatrix::new(2, 1, vec![0.6, 0.8]).unwrap();
        let x = solve_least_squares(&a, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        // Two identical columns: the min-norm split is even.
        let (m, s, a) = cm(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        let x = solve_col_major(m, s, &a, &[2.0, 0.0], 0.0, LsBackend::Qr);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14, "{x:?}");
        let x = solve_col_major(m, s, &a, &[2.0, 0.0], 0.0, LsBackend::Cg);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12, "{x:?}");
    }

    #[test]
    fn zero_matrix_solves_to_zero() {
        let x = solve_col_major(3, 2, &[0.0; 6], &[1.0, 2.0, 3.0], 0.0, LsBackend::Qr);
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn ridge_scalar() {
        let a = DenseMatrix::new(2, 1, vec![0.6, 0.8]).unwrap();
        let x = solve_ridge(&a, &[0.6, 0.8], 0.25).unwrap();
        assert!((x[0] - 1.0 / 1.25).abs() < 1e-15);
        assert!(solve_ridge(&a, &[0.6, 0.8], 0.0).is_err());
    }

    #[test]
    fn errors_on_mismatch() {
        assert!(solve_least_squares(&DenseMatrix::identity(2), &[1.0]).is_err());
    }

    #[test]
    fn underdetermined_min_norm() {
        // x1 + x2 + x3 = 3 → min-norm (1, 1, 1).
        let (m, s, a) = cm(&[vec![1.0, 1.0, 1.0]]);
        let x = solve_col_major(m, s, &a, &[3.0], 0.0, LsBackend::Qr);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
