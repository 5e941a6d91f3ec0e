//! Rank-one approximation on the unit sphere: `f(u) = min_w ‖A − u wᵀ‖_F²`,
//! its Riemannian gradient, small-step geodesic descent, and numerical checks
//! of the angle to the leading left singular vector.

use crate::error::{mismatch, Result, SimcoError};
use crate::numerics::{axpy, dot, norm, svd, stiefel_sample_uniform, DenseMatrix, RngState, SvdResult};

/// Distance from π/2 below which a start is treated as lying in the bad set
/// `B = {u : ⟨u, u_{A,1}⟩ = 0}`.
pub const BAD_START_TOL: f64 = 1e-9;

/// A matrix together with its SVD.
#[derive(Debug, Clone)]
pub struct RankOneProblem {
    a: DenseMatrix,
    svd: SvdResult,
    gap_ok: bool,
}

impl RankOneProblem {
    pub fn new(a: DenseMatrix) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(SimcoError::Precondition("matrix must be non-empty".into()));
        }
        let svd = svd(&a);
        let sv = &svd.singular_values;
        let l1 = sv[0];
        let l2 = sv.get(1).copied().unwrap_or(0.0);
        let gap_ok = l1 - l2 > 1e-12 * l1;
        Ok(Self { a, svd, gap_ok })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn svd(&self) -> &SvdResult {
        &self.svd
    }

    pub fn gap_ok(&self) -> bool {
        self.gap_ok
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// `λ_i`, zero past the stored spectrum.
    pub fn lambda(&self, i: usize) -> f64 {
        self.svd.singular_values.get(i).copied().unwrap_or(0.0)
    }

    pub fn u1(&self) -> Vec<f64> {
        self.svd.left_vector(0)
    }

    /// `Σ_{i≥2} λ_i²`, the global minimum of `f`.
    pub fn optimum(&self) -> f64 {
        self.svd.singular_values.iter().skip(1).map(|l| l * l).sum()
    }

    /// `θ = cos⁻¹|⟨u, u_{A,1}⟩|`, computed with `atan2` for accuracy near 0.
    pub fn theta(&self, u: &[f64]) -> f64 {
        theta_between(u, &self.u1())
    }
}

fn theta_between(u: &[f64], u1: &[f64]) -> f64 {
    let c = dot(u, u1);
    let mut perp = u.to_vec();
    axpy(-c, u1, &mut perp);
    norm(&perp).atan2(c.abs())
}

fn check_unit(u: &[f64], a: &DenseMatrix) -> Result<()> {
    if u.len() != a.rows() {
        return Err(mismatch("rank-one vector length", a.rows(), u.len()));
    }
    let n = norm(u);
    if (n - 1.0).abs() > 1e-10 {
        return Err(SimcoError::Precondition(format!("u must be a unit vector, |u| = {n}")));
    }
    Ok(())
}

fn at_u(a: &DenseMatrix, u: &[f64]) -> Vec<f64> {
    a.tr_matvec(u).expect("checked length")
}

/// `‖A‖_F² − ‖uᵀA‖₂²`
pub fn f_rank1(u: &[f64], a: &DenseMatrix) -> Result<f64> {
    check_unit(u, a)?;
    let w = at_u(a, u);
    Ok(a.frobenius_norm_sq() - dot(&w, &w))
}

/// `‖A − u w_uᵀ‖_F²` with `w_u = Aᵀu`, summed entrywise.
pub fn f_rank1_explicit(u: &[f64], a: &DenseMatrix) -> Result<f64> {
    check_unit(u, a)?;
    let w = at_u(a, u);
    let mut total = 0.0;
    for i in 0..a.rows() {
        for (j, wj) in w.iter().enumerate() {
            let e = a.get(i, j) - u[i] * wj;
            total += e * e;
        }
    }
    Ok(total)
}

fn grad_unchecked(u: &[f64], a: &DenseMatrix) -> Vec<f64> {
    let w = at_u(a, u);
    let aatu = a.matvec(&w).expect("checked length");
    let rho = dot(u, &aatu);
    let mut g: Vec<f64> = aatu.iter().map(|v| -2.0 * v).collect();
    axpy(2.0 * rho, u, &mut g);
    // Remove the rounding-level normal component.
    let c = dot(&g, u);
    axpy(-c, u, &mut g);
    g
}

/// `−2(AAᵀu − u·uᵀAAᵀu)`, the gradient on the sphere.
pub fn grad_rank1(u: &[f64], a: &DenseMatrix) -> Result<Vec<f64>> {
    check_unit(u, a)?;
    Ok(grad_unchecked(u, a))
}

fn geodesic(u: &[f64], h: &[f64], t: f64) -> Vec<f64> {
    let (s, c) = t.sin_cos();
    u.iter().zip(h).map(|(ui, hi)| ui * c + hi * s).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    /// Arc length of each geodesic step.
    pub step_eps: f64,
    pub max_steps: usize,
    /// Stop once the gradient norm falls to this value.
    pub grad_tol: f64,
    /// Give up backing off below this arc length.
    pub min_step: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self { step_eps: 1e-3, max_steps: 100_000, grad_tol: 1e-10, min_step: 1e-15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub theta: f64,
    pub f: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    /// No step of length ≥ `min_step` decreases `f` any further.
    Stalled,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub u_final: Vec<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub bad_start: bool,
    pub stop: StopReason,
}

impl DescentResult {
    pub fn steps(&self) -> usize {
        self.trajectory.len() - 1
    }

    pub fn final_point(&self) -> &TrajectoryPoint {
        self.trajectory.last().expect("trajectory starts with u0")
    }

    /// CSV with header `step,theta,f,grad_norm`.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("step,theta,f,grad_norm\n");
        for p in &self.trajectory {
            out.push_str(&format!("{},{},{},{}\n", p.step, p.theta, p.f, p.grad_norm));
        }
        out
    }
}

/// Gradient descent on the sphere with fixed geodesic arc steps along the
/// negative gradient, halving a step whenever it would not decrease `f`.
/// Starts in the bad set are flagged but still descended.
pub fn descend_rank1(problem: &RankOneProblem, u0: &[f64], cfg: &DescentConfig) -> Result<DescentResult> {
    let a = problem.matrix();
    check_unit(u0, a)?;
    if !problem.gap_ok() {
        return Err(SimcoError::Precondition("descent requires lambda1 > lambda2".into()));
    }
    if !(cfg.step_eps > 0.0) {
        return Err(SimcoError::Precondition("step_eps must be > 0".into()));
    }
    let u1 = problem.u1();
    let fro = a.frobenius_norm_sq();
    let value = |u: &[f64]| {
        let w = at_u(a, u);
        fro - dot(&w, &w)
    };

    let mut u = u0.to_vec();
    let mut f = value(&u);
    let mut g = grad_unchecked(&u, a);
    let mut gn = norm(&g);
    let theta0 = theta_between(&u, &u1);
    let bad_start = (std::f64::consts::FRAC_PI_2 - theta0).abs() <= BAD_START_TOL;
    let mut trajectory = vec![TrajectoryPoint { step: 0, theta: theta0, f, grad_norm: gn }];

    let stop = loop {
        if gn <= cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if trajectory.len() > cfg.max_steps {
            break StopReason::MaxSteps;
        }
        let h: Vec<f64> = g.iter().map(|x| -x / gn).collect();
        let mut eta = cfg.step_eps;
        let accepted = loop {
            let cand = geodesic(&u, &h, eta);
            // f(u) − f(cand) = ⟨Aᵀ(cand − u), Aᵀ(cand + u)⟩, evaluated without
            // cancelling two nearly equal energies.
            let (s, half) = (eta.sin(), (0.5 * eta).sin());
            let step: Vec<f64> = u.iter().zip(&h).map(|(ui, hi)| hi * s - 2.0 * half * half * ui).collect();
            let sum: Vec<f64> = u.iter().zip(&cand).map(|(p, q)| p + q).collect();
            if dot(&at_u(a, &step), &at_u(a, &sum)) > 0.0 {
                let fc = value(&cand);
                break Some((cand, fc));
            }
            eta *= 0.5;
            if eta < cfg.min_step {
                break None;
            }
        };
        let Some((cand, fc)) = accepted else {
            break StopReason::Stalled;
        };
        u = cand;
        f = fc;
        g = grad_unchecked(&u, a);
        gn = norm(&g);
        trajectory.push(TrajectoryPoint {
            step: trajectory.len(),
            theta: theta_between(&u, &u1),
            f,
            grad_norm: gn,
        });
    };
    Ok(DescentResult { u_final: u, trajectory, bad_start, stop })
}

/// Quantities around `u` used to establish that θ decreases along the
/// negative gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalCheck {
    pub theta: f64,
    /// `h_θ = (s·u_{A,1} − u cosθ)/sinθ`
    pub h_theta: Vec<f64>,
    /// `u_⊥ = (u − s·u_{A,1} cosθ)/sinθ`
    pub u_perp: Vec<f64>,
    /// Central-difference derivative of `g(u) = ‖uᵀA‖²` along the geodesic in direction `h_θ`.
    pub dg_numeric: f64,
    /// `sin2θ(λ1² − u_Rᵀ diag(λ_2², …) u_R)`
    pub dg_closed_form: f64,
    /// `sin2θ(λ1 − u_Rᵀ diag(λ_2², …) u_R)`, the expression with λ1 unsquared.
    pub dg_unsquared_form: f64,
    /// Central-difference derivative of θ along the unit direction `−∇f/‖∇f‖`.
    pub dtheta_along_descent: f64,
    /// `−dg_numeric`, the derivative of `f` along `h_θ`.
    pub df_along_h_theta: f64,
    pub angle_decrease_holds: bool,
}

impl DirectionalCheck {
    /// `|⟨h_θ, u⟩|` and `|‖h_θ‖ − 1|`.
    pub fn h_theta_defects(&self, u: &[f64]) -> (f64, f64) {
        (dot(&self.h_theta, u).abs(), (norm(&self.h_theta) - 1.0).abs())
    }

    pub fn matches_closed_form(&self, rel_tol: f64) -> bool {
        (self.dg_numeric - self.dg_closed_form).abs() <= rel_tol * self.dg_closed_form.abs().max(1e-300)
    }

    pub fn matches_unsquared_form(&self, rel_tol: f64) -> bool {
        (self.dg_numeric - self.dg_unsquared_form).abs() <= rel_tol * self.dg_unsquared_form.abs().max(1e-300)
    }
}

/// Differentiation step used by [`directional_derivative_check`].
pub const FD_STEP: f64 = 1e-6;

pub fn directional_derivative_check(problem: &RankOneProblem, u: &[f64]) -> Result<DirectionalCheck> {
    let a = problem.matrix();
    check_unit(u, a)?;
    let u1 = problem.u1();
    let theta = theta_between(u, &u1);
    if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
        return Err(SimcoError::Precondition(format!("theta = {theta} is outside (0, pi/2)")));
    }
    let s = if dot(u, &u1) >= 0.0 { 1.0 } else { -1.0 };
    let (st, ct) = theta.sin_cos();
    let h_theta: Vec<f64> = u1.iter().zip(u).map(|(a1, ui)| (s * a1 - ui * ct) / st).collect();
    let u_perp: Vec<f64> = u.iter().zip(&u1).map(|(ui, a1)| (ui - s * a1 * ct) / st).collect();

    let g_of = |v: &[f64]| {
        let w = at_u(a, v);
        dot(&w, &w)
    };
    let hstep = FD_STEP;
    let dg_numeric =
        (g_of(&geodesic(u, &h_theta, hstep)) - g_of(&geodesic(u, &h_theta, -hstep))) / (2.0 * hstep);

    let l1 = problem.lambda(0);
    let k = problem.svd().left.cols();
    let mut q = 0.0;
    for i in 1..k {
        let c = dot(&u_perp, &problem.svd().left_vector(i));
        q += problem.lambda(i).powi(2) * c * c;
    }
    let s2t = (2.0 * theta).sin();

    let grad = grad_unchecked(u, a);
    let gn = norm(&grad);
    let dtheta_along_descent = if gn > 0.0 {
        let hf: Vec<f64> = grad.iter().map(|x| -x / gn).collect();
        (theta_between(&geodesic(u, &hf, hstep), &u1) - theta_between(&geodesic(u, &hf, -hstep), &u1))
            / (2.0 * hstep)
    } else {
        0.0
    };
    let df_along_h_theta = -dg_numeric;
    Ok(DirectionalCheck {
        theta,
        h_theta,
        u_perp,
        dg_numeric,
        dg_closed_form: s2t * (l1 * l1 - q),
        dg_unsquared_form: s2t * (l1 - q),
        dtheta_along_descent,
        df_along_h_theta,
        angle_decrease_holds: df_along_h_theta < 0.0 && dtheta_along_descent < 0.0,
    })
}

/// Gaussian `m x n` matrix, redrawn until `λ1/λ2 ≥ min_ratio`.
pub fn random_gapped_matrix(m: usize, n: usize, min_ratio: f64, rng: &mut RngState) -> DenseMatrix {
    loop {
        let a = DenseMatrix::new(m, n, rng.normal_vec(m * n)).expect("finite draws");
        let sv = crate::numerics::singular_values(&a);
        let l2 = sv.get(1).copied().unwrap_or(0.0);
        if sv[0] >= min_ratio * l2 && sv[0] > 0.0 {
            return a;
        }
    }
}

/// Uniform start on the sphere.
pub fn random_start(m: usize, rng: &mut RngState) -> Vec<f64> {
    stiefel_sample_uniform(m, rng)
}
