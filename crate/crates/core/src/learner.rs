//! The outer dictionary-learning loop: sparse coding alternated with a
//! dictionary update, μ schedules, convergence traces and the condition
//! number of the active sub-dictionaries.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{ksvd_update, mod_update};
use crate::dict_update::{line_search_iteration, objective_and_gradient, UpdateConfig, UpdateSelection};
use crate::dictionary::Dictionary;
use crate::error::{mismatch, Result, SimcoError};
use crate::numerics::{condition_col_major, norm, stiefel_sample_uniform, DenseMatrix, RngState};
use crate::par;
use crate::sparse_coding::{omp_encode_with, OmpStop, SparseCoeffs, SparsityPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MOD")]
    Mod,
    #[serde(rename = "KSVD")]
    Ksvd,
    #[serde(rename = "SimCO-primitive")]
    SimcoPrimitive,
    #[serde(rename = "SimCO-regularized")]
    SimcoRegularized,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mod, Method::Ksvd, Method::SimcoPrimitive, Method::SimcoRegularized];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mod => "MOD",
            Method::Ksvd => "KSVD",
            Method::SimcoPrimitive => "SimCO-primitive",
            Method::SimcoRegularized => "SimCO-regularized",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UpdateSelectionMode {
    /// `I = [d]`: all codewords at once.
    #[default]
    #[serde(rename = "all")]
    All,
    /// `I = {i}` for `i = 0..d`, one line search each.
    #[serde(rename = "single-sweep")]
    SingleSweep,
}

/// One entry of a μ schedule: from outer iteration `start_iter` (0-based) on, use `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuStage {
    pub start_iter: usize,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub method: Method,
    pub outer_iters: usize,
    #[serde(default = "one")]
    pub inner_iters: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(default)]
    pub mu_schedule: Vec<MuStage>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub update_selection: UpdateSelectionMode,
    /// Line-search settings; its `mu` is overridden by the schedule.
    #[serde(default)]
    pub update: UpdateConfig,
    /// OMP stopping rule; exactly `S` atoms when absent.
    #[serde(default)]
    pub omp_stop: Option<OmpStop>,
    #[serde(default = "yes")]
    pub track_kappa: bool,
    /// Stop early once the relative decrease of `f` falls below this.
    #[serde(default)]
    pub rel_tol: Option<f64>,
    /// Re-seed codewords with an empty row from the worst-fit training column.
    #[serde(default)]
    pub replace_unused: bool,
    /// Record wall-clock milliseconds (zeros otherwise, for byte-stable traces).
    #[serde(default = "yes")]
    pub timing: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl LearnConfig {
    pub fn new(method: Method, outer_iters: usize, s: usize) -> Self {
        Self {
            method,
            outer_iters,
            inner_iters: 1,
            s,
            mu_schedule: Vec::new(),
            seed: 0,
            update_selection: UpdateSelectionMode::All,
            update: UpdateConfig::default(),
            omp_stop: None,
            track_kappa: true,
            rel_tol: None,
            replace_unused: false,
            timing: true,
        }
    }

    /// Constant μ from iteration 0.
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu_schedule = vec![MuStage { start_iter: 0, mu }];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimcoError::Precondition(msg));
        if self.s == 0 {
            return bad("S must be >= 1".into());
        }
        if self.mu_schedule.windows(2).any(|w| w[0].start_iter >= w[1].start_iter) {
            return bad("mu_schedule start_iter values must be strictly increasing".into());
        }
        if let Some(st) = self.mu_schedule.iter().find(|st| !(st.mu >= 0.0 && st.mu.is_finite())) {
            return bad(format!("mu_schedule entry at {} has invalid mu {}", st.start_iter, st.mu));
        }
        self.update.validate()
    }

    /// μ in effect at 0-based outer iteration `iter`. Primitive SimCO, MOD and
    /// K-SVD always use 0.
    pub fn mu_at(&self, iter: usize) -> f64 {
        if self.method != Method::SimcoRegularized {
            return 0.0;
        }
        self.mu_schedule
            .iter()
            .take_while(|st| st.start_iter <= iter)
            .last()
            .map_or(0.0, |st| st.mu)
    }
}

/// Sparse-coding stage of the outer loop.
#[derive(Debug, Clone, PartialEq)]
pub enum SparseCoder {
    Omp(OmpStop),
    /// A fixed, known pattern; coefficients are the least-squares fit on it.
    Fixed(SparsityPattern),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    /// `min_{X∈X(Ω)} ‖Y − DX‖_F²` at the current dictionary and pattern.
    pub f: f64,
    /// The method's own objective at the current μ (equal to `f` when μ = 0).
    pub f_reg: f64,
    /// Largest projected-gradient norm of that objective.
    pub grad_max: f64,
    pub kappa: Option<f64>,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
    /// `(iter, flag)` events raised by update stages.
    pub flags: Vec<(usize, String)>,
}

pub const TRACE_HEADER: &str = "iter,f,f_reg,grad_max,kappa,ms";

impl ConvergenceTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let kappa = r.kappa.map_or(String::new(), |k| k.to_string());
            let _ = writeln!(out, "{},{},{},{},{},{}", r.iter, r.f, r.f_reg, r.grad_max, kappa, r.ms);
        }
        out
    }

    pub fn has_flag(&self, name: &str) -> bool {
        self.flags.iter().any(|(_, f)| f == name)
    }
}

/// `max_j λ_max(D_{:,Ω(:,j)}) / λ_min(D_{:,Ω(:,j)})` over training columns
/// with a nonempty pattern; `+inf` when any block is rank deficient and 1
/// when every column is empty.
pub fn condition_number(dict: &Dictionary, pattern: &SparsityPattern) -> f64 {
    let ks = par::map_indexed(pattern.n(), |j| {
        let idx = pattern.column(j);
        if idx.is_empty() {
            1.0
        } else {
            condition_col_major(dict.m(), idx.len(), &dict.gather(idx))
        }
    });
    ks.into_iter().fold(1.0, f64::max)
}

/// `d` distinct nonzero training columns (normalized) in random order,
/// padded with uniform random unit vectors when there are too few.
pub fn initial_dictionary(y: &DenseMatrix, d: usize, rng: &mut RngState) -> Result<Dictionary> {
    let m = y.rows();
    let candidates: Vec<usize> = (0..y.cols()).filter(|&j| norm(&y.column(j)) > 0.0).collect();
    let take = d.min(candidates.len());
    let mut cols: Vec<Vec<f64>> = rng.subset(candidates.len(), take).into_iter().map(|k| y.column(candidates[k])).collect();
    while cols.len() < d {
        cols.push(stiefel_sample_uniform(m, rng));
    }
    Dictionary::from_columns_normalized(m, &cols)
}

fn code(dict: &Dictionary, y: &DenseMatrix, coder: &SparseCoder) -> Result<SparseCoeffs> {
    match coder {
        SparseCoder::Omp(stop) => omp_encode_with(dict, y, *stop),
        SparseCoder::Fixed(pattern) => {
            let sel = UpdateSelection::all(y, pattern)?;
            crate::dict_update::coeff_solve_primitive(dict, &sel)
        }
    }
}

fn replace_unused_atoms(dict: &Dictionary, y: &DenseMatrix, x: &SparseCoeffs) -> Result<Option<Dictionary>> {
    let unused: Vec<usize> = (0..dict.d()).filter(|&i| x.pattern().row(i).is_empty()).collect();
    if unused.is_empty() {
        return Ok(None);
    }
    let mut errs: Vec<(usize, f64)> = (0..x.n())
        .map(|j| {
            let r = x.reconstruct_column(dict, j);
            let e: f64 = y.column(j).iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum();
            (j, e)
        })
        .collect();
    errs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out = dict.clone();
    for (&i, &(j, e)) in unused.iter().zip(&errs) {
        if e > 0.0 {
            out = out.with_atom(i, &y.column(j))?;
        }
    }
    Ok(Some(out))
}

struct Evaluation {
    f: f64,
    f_reg: f64,
    grad_max: f64,
}

fn evaluate(dict: &Dictionary, y: &DenseMatrix, pattern: &SparsityPattern, mu: f64, cfg: &UpdateConfig) -> Result<Evaluation> {
    let sel = UpdateSelection::all(y, pattern)?;
    let (obj, bundle) = objective_and_gradient(dict, &sel, mu, cfg.ls_backend)?;
    let f = if mu == 0.0 {
        obj.f
    } else {
        crate::dict_update::objective_with(dict, &sel, 0.0, cfg.ls_backend)?.f
    };
    Ok(Evaluation { f, f_reg: obj.f, grad_max: bundle.max_norm() })
}

/// Result of a learning run.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub dict: Dictionary,
    pub coeffs: SparseCoeffs,
    pub trace: ConvergenceTrace,
}

/// Alternates OMP sparse coding and the configured dictionary update.
pub fn learn(y: &DenseMatrix, d: usize, cfg: &LearnConfig, d0: Option<&Dictionary>) -> Result<LearnOutcome> {
    let stop = cfg.omp_stop.unwrap_or(OmpStop::Sparsity { s: cfg.s });
    learn_with(y, d, cfg, d0, &SparseCoder::Omp(stop))
}

/// [`learn`] with an explicit sparse-coding stage.
pub fn learn_with(
    y: &DenseMatrix,
    d: usize,
    cfg: &LearnConfig,
    d0: Option<&Dictionary>,
    coder: &SparseCoder,
) -> Result<LearnOutcome> {
    cfg.validate()?;
    if d == 0 {
        return Err(SimcoError::Precondition("d must be >= 1".into()));
    }
    if let SparseCoder::Omp(OmpStop::Sparsity { s }) = coder {
        if *s > y.rows().min(d) {
            return Err(SimcoError::Precondition(format!("S = {s} exceeds min(m, d) = {}", y.rows().min(d))));
        }
    }
    if let SparseCoder::Fixed(p) = coder {
        if p.d() != d || p.n() != y.cols() {
            return Err(mismatch("fixed pattern shape", format!("{d}x{}", y.cols()), format!("{}x{}", p.d(), p.n())));
        }
    }
    let mut dict = match d0 {
        Some(dict) => {
            if dict.m() != y.rows() || dict.d() != d {
                return Err(mismatch("initial dictionary", format!("{}x{d}", y.rows()), format!("{}x{}", dict.m(), dict.d())));
            }
            dict.clone()
        }
        None => initial_dictionary(y, d, &mut RngState::new(cfg.seed))?,
    };

    let start = Instant::now();
    let elapsed = |start: &Instant| if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let mut trace = ConvergenceTrace::default();
    let mut x = code(&dict, y, coder)?;
    let record = |iter: usize, dict: &Dictionary, pattern: &SparsityPattern, mu: f64, ms: f64| -> Result<TraceRecord> {
        let e = evaluate(dict, y, pattern, mu, &cfg.update)?;
        Ok(TraceRecord {
            iter,
            f: e.f,
            f_reg: e.f_reg,
            grad_max: e.grad_max,
            kappa: cfg.track_kappa.then(|| condition_number(dict, pattern)),
            ms,
        })
    };
    trace.records.push(record(0, &dict, x.pattern(), cfg.mu_at(0), elapsed(&start))?);

    for it in 0..cfg.outer_iters {
        let mu = cfg.mu_at(it);
        if it > 0 {
            x = code(&dict, y, coder)?;
        }
        for _ in 0..cfg.inner_iters {
            (dict, x) = update_stage(&dict, y, &x, cfg, mu, it + 1, &mut trace)?;
        }
        if cfg.replace_unused {
            if let Some(nd) = replace_unused_atoms(&dict, y, &x)? {
                dict = nd;
                trace.flags.push((it + 1, "replaced_unused_atoms".into()));
            }
        }
        let rec = record(it + 1, &dict, x.pattern(), mu, elapsed(&start))?;
        let prev = trace.records.last().map(|r| r.f).unwrap_or(rec.f);
        trace.records.push(rec);
        if let Some(tol) = cfg.rel_tol {
            if prev > 0.0 && (prev - rec.f) / prev < tol {
                trace.flags.push((it + 1, "rel_tol_stop".into()));
                break;
            }
        }
    }
    Ok(LearnOutcome { dict, coeffs: x, trace })
}

/// One dictionary-update pass with the configured method.
fn update_stage(
    dict: &Dictionary,
    y: &DenseMatrix,
    x: &SparseCoeffs,
    cfg: &LearnConfig,
    mu: f64,
    iter: usize,
    trace: &mut ConvergenceTrace,
) -> Result<(Dictionary, SparseCoeffs)> {
    match cfg.method {
        Method::Mod => {
            let out = mod_update(dict, y, x)?;
            if out.singular {
                trace.flags.push((iter, "mod_singular".into()));
            }
            if !out.kept_atoms.is_empty() {
                trace.flags.push((iter, "mod_kept_atoms".into()));
            }
            Ok((out.dict, out.coeffs))
        }
        Method::Ksvd => {
            let out = ksvd_update(dict, y, x)?;
            if !out.zero_error.is_empty() {
                trace.flags.push((iter, "ksvd_zero_error".into()));
            }
            Ok((out.dict, out.coeffs))
        }
        Method::SimcoPrimitive | Method::SimcoRegularized => {
            let ucfg = UpdateConfig { mu, ..cfg.update };
            let mut dict = dict.clone();
            let mut x = x.clone();
            let sets: Vec<Vec<usize>> = match cfg.update_selection {
                UpdateSelectionMode::All => vec![(0..dict.d()).collect()],
                UpdateSelectionMode::SingleSweep => (0..dict.d()).map(|i| vec![i]).collect(),
            };
            for set in sets {
                let sel = if set.len() == dict.d() {
                    UpdateSelection::all(y, x.pattern())?
                } else {
                    UpdateSelection::new(set, &dict, y, &x)?
                };
                let out = line_search_iteration(&dict, &x, &sel, &ucfg)?;
                if out.trace.part_a_capped() {
                    trace.flags.push((iter, "part_a_capped".into()));
                }
                dict = out.dict;
                x = out.coeffs;
            }
            Ok((dict, x))
        }
    }
}

/// Regularized SimCO for the first `split` outer iterations, then primitive
/// SimCO from the resulting dictionary. The phase-2 trace is appended with
/// iteration numbers and times offset.
pub fn refine_two_step(
    y: &DenseMatrix,
    d: usize,
    cfg: &LearnConfig,
    split: usize,
    d0: Option<&Dictionary>,
    coder: &SparseCoder,
) -> Result<LearnOutcome> {
    if split > cfg.outer_iters {
        return Err(SimcoError::Precondition(format!("split {split} exceeds outer_iters {}", cfg.outer_iters)));
    }
    let phase1 = LearnConfig { method: Method::SimcoRegularized, outer_iters: split, ..cfg.clone() };
    let first = learn_with(y, d, &phase1, d0, coder)?;
    let phase2 = LearnConfig { method: Method::SimcoPrimitive, outer_iters: cfg.outer_iters - split, ..cfg.clone() };
    let second = learn_with(y, d, &phase2, Some(&first.dict), coder)?;
    let mut trace = first.trace;
    let offset_ms = trace.last().map_or(0.0, |r| r.ms);
    for r in second.trace.records.iter().skip(1) {
        trace.records.push(TraceRecord { iter: r.iter + split, ms: r.ms + offset_ms, ..*r });
    }
    trace.flags.extend(second.trace.flags.into_iter().map(|(i, f)| (i + split, f)));
    Ok(LearnOutcome { dict: second.dict, coeffs: second.coeffs, trace })
}
