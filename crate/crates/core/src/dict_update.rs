//! Simultaneous codeword optimization: objective and gradient on the product
//! of Grassmann manifolds, geodesic search paths and the golden-section line
//! search.

use serde::{Deserialize, Serialize};

pub use crate::dictionary::Dictionary;
use crate::error::{mismatch, Result, SimcoError};
use crate::numerics::{axpy, dot, solve_col_major, DenseMatrix, LsBackend};
use crate::par;
use crate::sparse_coding::{SparseCoeffs, SparsityPattern};

/// `(√5 − 1)/2`
pub const GOLDEN_C: f64 = 0.618_033_988_749_894_9;

/// The codewords `I` being updated, with the partial residual
/// `Y_r = Y − D_{:,Iᶜ} X_{Iᶜ,:}` frozen at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateSelection {
    index_set: Vec<usize>,
    pattern: SparsityPattern,
    /// Columns of `Y_r`.
    residual: Vec<Vec<f64>>,
    /// `I ∩ Ω(:, j)` per column.
    active: Vec<Vec<usize>>,
    y_norm_sq: f64,
}

impl UpdateSelection {
    /// `I = [d]`, so `Y_r = Y`.
    pub fn all(y: &DenseMatrix, pattern: &SparsityPattern) -> Result<Self> {
        if y.cols() != pattern.n() {
            return Err(mismatch("UpdateSelection::all columns", pattern.n(), y.cols()));
        }
        let index_set = (0..pattern.d()).collect();
        let active = (0..pattern.n()).map(|j| pattern.column(j).to_vec()).collect();
        Ok(Self {
            index_set,
            pattern: pattern.clone(),
            residual: y.columns(),
            active,
            y_norm_sq: y.frobenius_norm_sq(),
        })
    }

    /// Arbitrary sorted `I`; coefficients of codewords outside `I` are taken from `x`.
    pub fn new(index_set: Vec<usize>, dict: &Dictionary, y: &DenseMatrix, x: &SparseCoeffs) -> Result<Self> {
        if index_set.windows(2).any(|w| w[0] >= w[1]) || index_set.iter().any(|&i| i >= dict.d()) {
            return Err(SimcoError::Precondition(
                "index set must be strictly increasing and within the dictionary".into(),
            ));
        }
        if y.rows() != dict.m() || y.cols() != x.n() || x.d() != dict.d() {
            return Err(mismatch(
                "UpdateSelection::new",
                format!("Y {}x{}, X {}x{}", dict.m(), x.n(), dict.d(), x.n()),
                format!("Y {}x{}, X {}x{}", y.rows(), y.cols(), x.d(), x.n()),
            ));
        }
        let pattern = x.pattern().clone();
        let in_set = |i: usize| index_set.binary_search(&i).is_ok();
        let mut residual = y.columns();
        let mut active = Vec::with_capacity(x.n());
        for (j, col) in residual.iter_mut().enumerate() {
            for (&i, &v) in pattern.column(j).iter().zip(x.column_values(j)) {
                if !in_set(i) {
                    axpy(-v, dict.atom(i), col);
                }
            }
            active.push(pattern.column(j).iter().copied().filter(|&i| in_set(i)).collect());
        }
        Ok(Self {
            index_set,
            pattern,
            residual,
            active,
            y_norm_sq: y.frobenius_norm_sq(),
        })
    }

    pub fn index_set(&self) -> &[usize] {
        &self.index_set
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    /// `Y_r` as an `m x n` matrix.
    pub fn residual(&self) -> DenseMatrix {
        let m = self.residual.first().map_or(0, Vec::len);
        DenseMatrix::from_columns(m, &self.residual).expect("finite residual")
    }

    pub fn residual_column(&self, j: usize) -> &[f64] {
        &self.residual[j]
    }

    /// `I ∩ Ω(:, j)`
    pub fn active(&self, j: usize) -> &[usize] {
        &self.active[j]
    }

    pub fn n(&self) -> usize {
        self.residual.len()
    }

    /// `‖Y‖_F²` of the full training matrix (the scale in the early-exit test).
    pub fn y_norm_sq(&self) -> f64 {
        self.y_norm_sq
    }
}

/// Tuning knobs of the line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpdateConfig {
    pub mu: f64,
    pub t4_init: f64,
    pub g_min: f64,
    pub golden_c: f64,
    pub part_a_max_iters: usize,
    pub part_b_min_width: f64,
    pub part_b_max_iters: usize,
    pub ls_backend: LsBackend,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            mu: 0.0,
            t4_init: 0.1,
            g_min: 1e-5,
            golden_c: GOLDEN_C,
            part_a_max_iters: 50,
            part_b_min_width: 1e-4,
            part_b_max_iters: 40,
            ls_backend: LsBackend::Qr,
        }
    }
}

impl UpdateConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SimcoError::Precondition(format!("invalid update config: {what}")));
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return bad("mu must be finite and >= 0");
        }
        if !(self.t4_init > 0.0 && self.t4_init.is_finite()) {
            return bad("t4_init must be > 0");
        }
        if !(self.g_min > 0.0) {
            return bad("g_min must be > 0");
        }
        if (self.golden_c - GOLDEN_C).abs() > 1e-15 {
            return bad("golden_c is fixed to (sqrt(5)-1)/2");
        }
        if !(self.part_b_min_width > 0.0) {
            return bad("part_b_min_width must be > 0");
        }
        Ok(())
    }
}

/// Value of the (possibly regularized) objective together with its minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    /// `‖Y_r − D X*‖_F² + μ‖X*_{I,:}‖_F²`
    pub f: f64,
    /// The data-fit term alone.
    pub fit: f64,
    /// Minimizer with pattern `I ∩ Ω`.
    pub x_star: SparseCoeffs,
}

struct ColumnSolve {
    x: Vec<f64>,
    residual: Vec<f64>,
}

fn solve_column(dict: &Dictionary, sel: &UpdateSelection, j: usize, mu: f64, backend: LsBackend) -> ColumnSolve {
    let idx = sel.active(j);
    let y = sel.residual_column(j);
    if idx.is_empty() {
        return ColumnSolve { x: Vec::new(), residual: y.to_vec() };
    }
    let sub = dict.gather(idx);
    let x = solve_col_major(dict.m(), idx.len(), &sub, y, mu, backend);
    let mut residual = y.to_vec();
    for (&i, &c) in idx.iter().zip(&x) {
        axpy(-c, dict.atom(i), &mut residual);
    }
    ColumnSolve { x, residual }
}

fn check(dict: &Dictionary, sel: &UpdateSelection) -> Result<()> {
    if sel.pattern().d() != dict.d() {
        return Err(mismatch("selection pattern d", dict.d(), sel.pattern().d()));
    }
    if sel.n() > 0 && sel.residual_column(0).len() != dict.m() {
        return Err(mismatch("selection residual rows", dict.m(), sel.residual_column(0).len()));
    }
    Ok(())
}

fn solve_all(dict: &Dictionary, sel: &UpdateSelection, mu: f64, backend: LsBackend) -> Vec<ColumnSolve> {
    par::map_indexed(sel.n(), |j| solve_column(dict, sel, j, mu, backend))
}

fn restricted_coeffs(sel: &UpdateSelection, cols: &[ColumnSolve]) -> SparseCoeffs {
    let pattern = SparsityPattern::new(sel.pattern().d(), sel.active.clone()).expect("subset of a valid pattern");
    SparseCoeffs::new(pattern, cols.iter().map(|c| c.x.clone()).collect()).expect("finite solution")
}

/// `X*_{I∩Ω(:,j),j} = D†_{:,I∩Ω(:,j)} (Y_r)_{:,j}` for every column.
pub fn coeff_solve_primitive(dict: &Dictionary, sel: &UpdateSelection) -> Result<SparseCoeffs> {
    check(dict, sel)?;
    Ok(restricted_coeffs(sel, &solve_all(dict, sel, 0.0, LsBackend::Qr)))
}

/// Ridge version of [`coeff_solve_primitive`], μ > 0.
pub fn coeff_solve_regularized(dict: &Dictionary, sel: &UpdateSelection, mu: f64) -> Result<SparseCoeffs> {
    check(dict, sel)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(SimcoError::Precondition(format!("mu must be > 0, got {mu}")));
    }
    Ok(restricted_coeffs(sel, &solve_all(dict, sel, mu, LsBackend::Qr)))
}

fn objective_from(cols: &[ColumnSolve], mu: f64) -> (f64, f64) {
    let mut fit = 0.0;
    let mut reg = 0.0;
    for c in cols {
        fit += dot(&c.residual, &c.residual);
        reg += dot(&c.x, &c.x);
    }
    (fit + mu * reg, fit)
}

/// `f_I(D)` at weight μ (μ = 0 is the primitive objective).
pub fn objective(dict: &Dictionary, sel: &UpdateSelection, mu: f64) -> Result<Objective> {
    objective_with(dict, sel, mu, LsBackend::Qr)
}

pub fn objective_with(dict: &Dictionary, sel: &UpdateSelection, mu: f64, backend: LsBackend) -> Result<Objective> {
    check(dict, sel)?;
    let cols = solve_all(dict, sel, mu, backend);
    let (f, fit) = objective_from(&cols, mu);
    Ok(Objective { f, fit, x_star: restricted_coeffs(sel, &cols) })
}

fn objective_value(dict: &Dictionary, sel: &UpdateSelection, mu: f64, backend: LsBackend) -> f64 {
    objective_from(&solve_all(dict, sel, mu, backend), mu).0
}

/// Raw and tangent-projected gradients for each codeword in `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub index_set: Vec<usize>,
    pub raw: Vec<Vec<f64>>,
    pub projected: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
}

impl GradientBundle {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }

    /// Frobenius norm of the stacked projected gradient.
    pub fn total_norm(&self) -> f64 {
        self.norms.iter().map(|n| n * n).sum::<f64>().sqrt()
    }
}

fn gradient_from(dict: &Dictionary, sel: &UpdateSelection, cols: &[ColumnSolve]) -> GradientBundle {
    let m = dict.m();
    let d = dict.d();
    let mut slot = vec![usize::MAX; d];
    for (k, &i) in sel.index_set().iter().enumerate() {
        slot[i] = k;
    }
    let mut raw = vec![vec![0.0; m]; sel.index_set().len()];
    for (j, c) in cols.iter().enumerate() {
        for (&i, &x) in sel.active(j).iter().zip(&c.x) {
            axpy(-2.0 * x, &c.residual, &mut raw[slot[i]]);
        }
    }
    let mut projected = Vec::with_capacity(raw.len());
    let mut norms = Vec::with_capacity(raw.len());
    for (g, &i) in raw.iter().zip(sel.index_set()) {
        let atom = dict.atom(i);
        let mut p = g.clone();
        axpy(-dot(atom, g), atom, &mut p);
        norms.push(dot(&p, &p).sqrt());
        projected.push(p);
    }
    GradientBundle { index_set: sel.index_set().to_vec(), raw, projected, norms }
}

/// `g_i = −2(Y_r − DX*) X*_{i,:}ᵀ` and `ḡ_i = g_i − D_{:,i}D_{:,i}ᵀ g_i`,
/// evaluated at the minimizer `X*` for the given μ.
pub fn gradient(dict: &Dictionary, sel: &UpdateSelection, mu: f64) -> Result<GradientBundle> {
    check(dict, sel)?;
    Ok(gradient_from(dict, sel, &solve_all(dict, sel, mu, LsBackend::Qr)))
}

/// Objective and gradient from a single set of column solves.
pub fn objective_and_gradient(
    dict: &Dictionary,
    sel: &UpdateSelection,
    mu: f64,
    backend: LsBackend,
) -> Result<(Objective, GradientBundle)> {
    check(dict, sel)?;
    let cols = solve_all(dict, sel, mu, backend);
    let (f, fit) = objective_from(&cols, mu);
    let bundle = gradient_from(dict, sel, &cols);
    Ok((Objective { f, fit, x_star: restricted_coeffs(sel, &cols) }, bundle))
}

/// Moves each codeword in the bundle along its geodesic:
/// `D_i(t) = D_i cos(‖ḡ_i‖t) − (ḡ_i/‖ḡ_i‖) sin(‖ḡ_i‖t)`.
pub fn geodesic_step(dict: &Dictionary, bundle: &GradientBundle, t: f64) -> Dictionary {
    let m = dict.m();
    let mut atoms = dict.atoms().to_vec();
    for ((&i, g), &n) in bundle.index_set.iter().zip(&bundle.projected).zip(&bundle.norms) {
        if n == 0.0 || t == 0.0 {
            continue;
        }
        let (s, c) = (n * t).sin_cos();
        for (a, gk) in atoms[i * m..(i + 1) * m].iter_mut().zip(g) {
            *a = *a * c - gk / n * s;
        }
    }
    Dictionary::from_unit_atoms(m, dict.d(), atoms)
}

/// Record of one golden-section search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineSearchRecord {
    pub t_star: f64,
    pub f_star: f64,
    pub part_a_steps: usize,
    pub part_a_capped: bool,
    pub part_b_steps: usize,
    /// `(t₁, t₂, t₃, t₄)` after each Part B step.
    pub brackets: Vec<[f64; 4]>,
    pub evaluations: usize,
}

/// Part A / Part B bracketing and golden-section shrinking of a scalar
/// function on `t ≥ 0`, with `f0 = f(0)` already known.
pub fn golden_section_search<F: FnMut(f64) -> f64>(mut f: F, f0: f64, cfg: &UpdateConfig) -> LineSearchRecord {
    let c = cfg.golden_c;
    let mut rec = LineSearchRecord::default();
    let mut eval = |t: f64, rec: &mut LineSearchRecord| {
        rec.evaluations += 1;
        f(t)
    };
    let mut t = [0.0, (1.0 - c) * cfg.t4_init, c * cfg.t4_init, cfg.t4_init];
    let mut fv = [f0, eval(t[1], &mut rec), eval(t[2], &mut rec), eval(t[3], &mut rec)];

    // Part A
    loop {
        if rec.part_a_steps == cfg.part_a_max_iters {
            rec.part_a_capped = true;
            break;
        }
        if fv[0] <= fv[1] {
            t[3] = t[1];
            t[2] = c * t[3];
            t[1] = (1.0 - c) * t[3];
            fv[3] = fv[1];
            fv[2] = eval(t[2], &mut rec);
            fv[1] = eval(t[1], &mut rec);
        } else if fv[1] <= fv[2] {
            t[3] = t[2];
            t[2] = t[1];
            t[1] = (1.0 - c) * t[3];
            fv[3] = fv[2];
            fv[2] = fv[1];
            fv[1] = eval(t[1], &mut rec);
        } else if fv[2] > fv[3] {
            t[1] = t[2];
            t[2] = t[3];
            t[3] = t[2] / c;
            fv[1] = fv[2];
            fv[2] = fv[3];
            fv[3] = eval(t[3], &mut rec);
        } else {
            break;
        }
        rec.part_a_steps += 1;
    }

    // Part B
    if !rec.part_a_capped {
        let width_floor = cfg.part_b_min_width * t[3].max(cfg.t4_init);
        while t[3] - t[0] > width_floor && rec.part_b_steps < cfg.part_b_max_iters {
            if fv[0] > fv[1] && fv[1] > fv[2] {
                t[0] = t[1];
                t[1] = t[2];
                t[2] = t[0] + c * (t[3] - t[0]);
                fv[0] = fv[1];
                fv[1] = fv[2];
                fv[2] = eval(t[2], &mut rec);
            } else {
                t[3] = t[2];
                t[2] = t[1];
                t[1] = t[0] + (1.0 - c) * (t[3] - t[0]);
                fv[3] = fv[2];
                fv[2] = fv[1];
                fv[1] = eval(t[1], &mut rec);
            }
            rec.part_b_steps += 1;
            rec.brackets.push(t);
        }
    }

    // Argmin, smallest t among ties.
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]));
    let mut best = order[0];
    for &k in &order[1..] {
        if fv[k] < fv[best] {
            best = k;
        }
    }
    rec.t_star = t[best];
    rec.f_star = fv[best];
    rec
}

/// Summary of one line-search iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateTrace {
    pub f_before: f64,
    pub f_after: f64,
    pub grad_max: f64,
    pub early_exit: bool,
    pub search: Option<LineSearchRecord>,
}

impl UpdateTrace {
    pub fn part_a_capped(&self) -> bool {
        self.search.as_ref().is_some_and(|s| s.part_a_capped)
    }
}

/// Result of one line-search iteration.
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub dict: Dictionary,
    /// Full coefficients: rows in `I` re-solved at the new dictionary, other rows unchanged.
    pub coeffs: SparseCoeffs,
    pub trace: UpdateTrace,
}

/// Overwrites the entries of `x` covered by `sub` (whose pattern is a subset of `x`'s).
pub fn merge_rows(x: &SparseCoeffs, sub: &SparseCoeffs) -> SparseCoeffs {
    let mut out = x.clone();
    for j in 0..sub.n() {
        let pat = x.pattern().column(j);
        let vals = out.column_values_mut(j);
        let mut k = 0;
        for (&i, &v) in sub.pattern().column(j).iter().zip(sub.column_values(j)) {
            while pat[k] != i {
                k += 1;
            }
            vals[k] = v;
        }
    }
    out
}

/// One iteration of the line search for the dictionary update of codewords
/// `I` (given by `sel`). `x` holds the current coefficients on Ω and is
/// returned untouched on early exit.
pub fn line_search_iteration(
    dict: &Dictionary,
    x: &SparseCoeffs,
    sel: &UpdateSelection,
    cfg: &UpdateConfig,
) -> Result<UpdateOutcome> {
    cfg.validate()?;
    if x.pattern() != sel.pattern() {
        return Err(SimcoError::Precondition("coefficients and selection use different patterns".into()));
    }
    let (obj, bundle) = objective_and_gradient(dict, sel, cfg.mu, cfg.ls_backend)?;
    let grad_max = bundle.max_norm();
    let threshold = cfg.g_min * sel.y_norm_sq();
    if bundle.norms.iter().all(|&n| n <= threshold) {
        return Ok(UpdateOutcome {
            dict: dict.clone(),
            coeffs: x.clone(),
            trace: UpdateTrace { f_before: obj.f, f_after: obj.f, grad_max, early_exit: true, search: None },
        });
    }
    let record = golden_section_search(
        |t| objective_value(&geodesic_step(dict, &bundle, t), sel, cfg.mu, cfg.ls_backend),
        obj.f,
        cfg,
    );
    let new_dict = geodesic_step(dict, &bundle, record.t_star);
    let new_obj = objective_with(&new_dict, sel, cfg.mu, cfg.ls_backend)?;
    Ok(UpdateOutcome {
        coeffs: merge_rows(x, &new_obj.x_star),
        dict: new_dict,
        trace: UpdateTrace {
            f_before: obj.f,
            f_after: new_obj.f,
            grad_max,
            early_exit: false,
            search: Some(record),
        },
    })
}
