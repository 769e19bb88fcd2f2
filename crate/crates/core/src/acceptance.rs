//! The acceptance suite run by `metareg verify` and by the `acceptance` test target.
//!
//! Each check builds its own problems from fixed seeds, measures one quantity and
//! compares it against a pinned tolerance.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{adagrad_step, wngrad_step, Baseline, BaselineState};
use crate::divergence::{Builtin, Divergence};
use crate::error::Result;
use crate::metrics::{
    bound_log_curve, bound_log_lambda_curve, bound_thm5_curve, lambda_floor_with_ratio, least_squares_slope, loglog_slope, regret_curve,
    steps_to_eps, RunRecord, ScRule, Thm5Rule,
};
use crate::optimizer::{project_rate_box, step, OptimizerConfig, OptimizerState, RuleVariant};
use crate::problems::{make_logistic, make_quadratic, Minibatch, Objective, ProblemInstance, Quadratic};
use crate::runner::{run_method, Method};
use crate::solver::solve_exact_rate;

pub const EQUIVALENCE_TOL: f64 = 1e-10;
pub const MONOTONE_TOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const BISECTION_TOL: f64 = 1e-9;
pub const SLOPE_LIMIT: f64 = 0.6;
pub const LOG_RATIO_LIMIT: f64 = 2.0;
pub const ROBUSTNESS_GAP: f64 = 0.10;
pub const RUNTIME_SLOPE_LIMIT: f64 = 1.2;
pub const BB_GRAD_TOL: f64 = 1e-10;
pub const FD_TOL: f64 = 1e-6;

/// Feature standard deviation of the synthetic logistic problem used for the
/// robustness check.
pub const LOGISTIC_FEATURE_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    /// Measured value against its limit, human readable.
    pub measured: String,
    pub elapsed: Duration,
    /// Runtime budget, if the check has one. Exceeding it fails the check.
    pub budget: Option<Duration>,
    pub notes: Vec<String>,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>4} {:<40} {} ({:.2?})",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.elapsed
        )
    }
}

/// Suite-wide overrides.
#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Replaces the growth-clip factor of the clip diagnostics check.
    pub clip_factor: Option<f64>,
}

pub struct Check {
    pub id: &'static str,
    pub name: &'static str,
    pub budget: Option<Duration>,
    run: fn(&SuiteOptions) -> Result<Measurement>,
}

impl Check {
    pub fn run(&self, opts: &SuiteOptions) -> CheckOutcome {
        let start = Instant::now();
        let result = (self.run)(opts);
        let elapsed = start.elapsed();
        let (mut passed, measured, mut notes) = match result {
            Ok(m) => (m.passed, m.measured, m.notes),
            Err(e) => (false, format!("error: {e}"), Vec::new()),
        };
        if let Some(budget) = self.budget {
            if elapsed > budget {
                passed = false;
                notes.push(format!("runtime {elapsed:.2?} exceeds budget {budget:.0?}"));
            }
        }
        CheckOutcome {
            id: self.id,
            name: self.name,
            passed,
            measured,
            elapsed,
            budget: self.budget,
            notes,
        }
    }
}

pub struct Measurement {
    pub passed: bool,
    pub measured: String,
    pub notes: Vec<String>,
}

impl Measurement {
    fn le(value: f64, limit: f64, what: &str) -> Self {
        Measurement {
            passed: value <= limit,
            measured: format!("{what} = {value:.3e} (limit {limit:.1e})"),
            notes: Vec::new(),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

pub fn checks() -> Vec<Check> {
    let secs = |s| Some(Duration::from_secs(s));
    vec![
        Check { id: "1", name: "AdaGrad equivalence", budget: secs(1), run: adagrad_equivalence },
        Check { id: "2", name: "WNGrad equivalence (alternating rule)", budget: None, run: wngrad_equivalence_alternating },
        Check { id: "2b", name: "WNGrad equivalence (exact rule)", budget: None, run: wngrad_equivalence_exact },
        Check { id: "3", name: "rate monotonicity", budget: secs(10), run: monotonicity },
        Check { id: "4", name: "solver residuals", budget: None, run: solver_residuals },
        Check { id: "5", name: "box projection", budget: None, run: box_projection },
        Check { id: "6", name: "convex regret bound", budget: secs(30), run: regret_bound_domination },
        Check { id: "7", name: "sublinear regret", budget: None, run: sublinear_regret },
        Check { id: "8", name: "logarithmic regret", budget: None, run: logarithmic_regret },
        Check { id: "8b", name: "logarithmic regret (lambda-scaled bound)", budget: None, run: logarithmic_regret_scaled },
        Check { id: "9", name: "full-batch robustness to alpha0", budget: secs(120), run: alpha0_robustness },
        Check { id: "10", name: "scalar-rule runtime", budget: None, run: scalar_runtime },
        Check { id: "11", name: "BB sanity", budget: None, run: bb_sanity },
        Check { id: "12", name: "gradient oracles", budget: None, run: gradient_oracles },
        Check { id: "clip", name: "out-of-domain clip diagnostics", budget: None, run: clip_diagnostics },
    ]
}

/// Runs the checks whose ids are in `only` (all when empty), in suite order.
pub fn run_suite(only: &[String], opts: &SuiteOptions) -> Vec<CheckOutcome> {
    checks()
        .into_iter()
        .filter(|c| only.is_empty() || only.iter().any(|o| o == c.id))
        .map(|c| c.run(opts))
        .collect()
}

pub fn run_check(id: &str, opts: &SuiteOptions) -> Option<CheckOutcome> {
    checks().into_iter().find(|c| c.id == id).map(|c| c.run(opts))
}

fn uniform_stream(rng: &mut ChaCha8Rng, steps: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..steps)
        .map(|_| (0..d).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let den = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

type Recurrence = fn(&BaselineState, &[f64], f64) -> Result<BaselineState>;

/// Largest relative deviation of iterates and rates between the meta-regularized
/// rule and a direct recurrence fed the same gradients.
fn trajectory_deviation(config: &OptimizerConfig, recurrence: Recurrence, grads: &[Vec<f64>]) -> Result<(f64, usize)> {
    let d = grads[0].len();
    let mut s = OptimizerState::new(vec![0.0; d], config);
    let mut b = BaselineState::new(vec![0.0; d]);
    let mut worst = 0.0f64;
    let mut safeguarded = 0;
    for g in grads {
        s = step(&s, g, config)?;
        b = recurrence(&b, g, config.alpha0)?;
        safeguarded += s.diagnostics.clipped + s.diagnostics.out_of_domain;
        worst = worst.max(rel_dev(&s.x, &b.x)).max(rel_dev(&s.alpha, &b.alpha));
    }
    Ok((worst, safeguarded))
}

fn adagrad_equivalence(_: &SuiteOptions) -> Result<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grads = uniform_stream(&mut rng, 1000, 10, 1.0);
    let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Adagrad), RuleVariant::Exact, 1.0);
    let (dev, clipped) = trajectory_deviation(&cfg, adagrad_step, &grads)?;
    Ok(Measurement::le(dev, EQUIVALENCE_TOL, "max rel deviation").note(format!("safeguard activations: {clipped}")))
}

fn wngrad_grads() -> Vec<Vec<f64>> {
    // with α₀ = 1 and η_t = α_t ≤ 1, |g| ≤ 1/2 keeps η²g² ≤ 1/4
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    uniform_stream(&mut rng, 1000, 10, 0.5)
}

fn wngrad_equivalence_alternating(_: &SuiteOptions) -> Result<Measurement> {
    let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Wngrad), RuleVariant::Alternating, 1.0);
    let (dev, clipped) = trajectory_deviation(&cfg, wngrad_step, &wngrad_grads())?;
    Ok(Measurement::le(dev, EQUIVALENCE_TOL, "max rel deviation")
        .note(format!("safeguard activations: {clipped}"))
        .note("the alternating rule solves (r-1)/r^2 = eta^2 g^2 while WNGrad needs r = 1 + eta^2 g^2; see check 2b"))
}

fn wngrad_equivalence_exact(_: &SuiteOptions) -> Result<Measurement> {
    let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Wngrad), RuleVariant::Exact, 1.0);
    let (dev, clipped) = trajectory_deviation(&cfg, wngrad_step, &wngrad_grads())?;
    Ok(Measurement::le(dev, EQUIVALENCE_TOL, "max rel deviation").note(format!("safeguard activations: {clipped}")))
}

fn monotonicity(_: &SuiteOptions) -> Result<Measurement> {
    let rules = [RuleVariant::Exact, RuleVariant::Alternating, RuleVariant::ScExact, RuleVariant::ScAlternating];
    let cells: Vec<(Builtin, RuleVariant, u64)> = Builtin::ALL
        .iter()
        .flat_map(|&b| rules.iter().flat_map(move |&r| (0..10u64).map(move |s| (b, r, s))))
        .collect();
    let worst = cells
        .par_iter()
        .map(|&(b, r, seed)| -> Result<f64> {
            let cfg = OptimizerConfig::new(Divergence::builtin(b), r, 1.0).with_lambda(1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let scale = rng.random_range(0.1..3.0);
            let mut s = OptimizerState::new(vec![0.0; 5], &cfg);
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..500 {
                let g: Vec<f64> = (0..5).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
                let next = step(&s, &g, &cfg)?;
                for (a, b) in next.alpha.iter().zip(&s.alpha) {
                    worst = worst.max(a - b);
                }
                s = next;
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Measurement {
        passed: worst <= MONOTONE_TOL,
        measured: format!("max increase = {worst:.3e} over {} runs (limit {MONOTONE_TOL:.0e})", cells.len()),
        notes: Vec::new(),
    })
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Plain bisection on `α ∈ (0, η]` for `φ'(η/α) = α²g²`, using only the sign of
/// `r²φ'(r) − η²g²` with `r = η/α`.
pub fn bisection_rate(spec: &Divergence, eta: f64, g_sq: f64) -> f64 {
    let y = eta * eta * g_sq;
    let sign = |alpha: f64| {
        let r = eta / alpha;
        r * r * spec.phi_prime(r) - y
    };
    let mut hi = eta;
    let mut lo = eta / 2.0;
    while sign(lo) < 0.0 {
        hi = lo;
        lo /= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sign(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn solver_residuals(_: &SuiteOptions) -> Result<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_res = 0.0f64;
    let mut worst_rel = 0.0f64;
    for _ in 0..10_000 {
        let b = Builtin::ALL[rng.random_range(0..Builtin::ALL.len())];
        let spec = Divergence::builtin(b);
        let eta = log_uniform(&mut rng, 1e-2, 10.0);
        let g_sq = log_uniform(&mut rng, 1e-4, 1e2);
        let alpha = solve_exact_rate(&spec, eta, g_sq)?;
        let res = (spec.phi_prime(eta / alpha) - alpha * alpha * g_sq).abs() / g_sq.max(1.0);
        let oracle = bisection_rate(&spec, eta, g_sq);
        worst_res = worst_res.max(res);
        worst_rel = worst_rel.max((alpha - oracle).abs() / oracle);
    }
    Ok(Measurement {
        passed: worst_res <= RESIDUAL_TOL && worst_rel <= BISECTION_TOL,
        measured: format!(
            "max scaled residual = {worst_res:.3e} (limit {RESIDUAL_TOL:.0e}), max rel gap to bisection = {worst_rel:.3e} (limit {BISECTION_TOL:.0e})"
        ),
        notes: Vec::new(),
    })
}

/// `min_x Ψ_t(x, α)` for one coordinate: `−½(α g² + φ(η/α)/η)`.
fn dual_objective(spec: &Divergence, alpha: f64, eta: f64, g_sq: f64) -> f64 {
    -0.5 * (alpha * g_sq + spec.phi(eta / alpha) / eta)
}

fn box_projection(_: &SuiteOptions) -> Result<Measurement> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_cells = 0.0f64;
    for _ in 0..1000 {
        let b = Builtin::ALL[rng.random_range(0..Builtin::ALL.len())];
        let spec = Divergence::builtin(b);
        let eta = log_uniform(&mut rng, 1e-2, 10.0);
        let g_sq = log_uniform(&mut rng, 1e-3, 1e2);
        let star = solve_exact_rate(&spec, eta, g_sq)?;
        let lo = star * rng.random_range(-1.5f64..1.0).exp();
        let hi = lo * rng.random_range(0.05f64..2.0).exp();
        let clamp = project_rate_box(&[star], &[lo], &[hi])?[0];
        let n = 1000;
        let cell = (hi - lo) / (n - 1) as f64;
        let best = (0..n)
            .map(|k| lo + cell * k as f64)
            .map(|a| (a, dual_objective(&spec, a, eta, g_sq)))
            .fold((lo, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc })
            .0;
        worst_cells = worst_cells.max((best - clamp).abs() / cell);
    }
    Ok(Measurement::le(worst_cells, 1.0, "max |grid argmax - clamp| in cells"))
}

/// Online quadratic stream: shared curvature with spectrum in `[0.1, 1]` and
/// noisy per-sample linear terms.
fn online_quadratic(seed: u64) -> Result<ProblemInstance> {
    let q = make_quadratic(5, 0.1, 1.0, seed)?.with_sample_noise(100, 1.0, seed + 1)?;
    ProblemInstance::online(Objective::Quadratic(q), 1)
}

const REGRET_HORIZON: usize = 10_000;

fn convex_runs() -> Result<Vec<(String, Thm5Rule, RunRecord)>> {
    let p = online_quadratic(6)?;
    let x0 = vec![0.0; 5];
    let cells: Vec<(Builtin, RuleVariant)> = [Builtin::Chi2, Builtin::Adagrad]
        .iter()
        .flat_map(|&b| [RuleVariant::Exact, RuleVariant::Alternating].map(|r| (b, r)))
        .collect();
    cells
        .par_iter()
        .map(|&(b, r)| {
            let cfg = OptimizerConfig::new(Divergence::builtin(b), r, 0.5);
            let rec = run_method(&Method::MetaReg(cfg), &p, &x0, REGRET_HORIZON, 7)?;
            let rule = Thm5Rule::from_variant(r).expect("diagonal rule");
            Ok((format!("{b}/{r}"), rule, rec))
        })
        .collect()
}

fn regret_bound_domination(_: &SuiteOptions) -> Result<Measurement> {
    let mut passed = true;
    let mut parts = Vec::new();
    let mut notes = Vec::new();
    for (label, rule, rec) in convex_runs()? {
        let regret = regret_curve(&rec);
        let bound = bound_thm5_curve(&rec, rule)?;
        let violations = regret.iter().zip(&bound).filter(|(r, b)| r > b).count();
        let worst = regret.iter().zip(&bound).map(|(r, b)| r / b).fold(f64::NEG_INFINITY, f64::max);
        passed &= violations == 0 && rec.aborted.is_none();
        parts.push(format!("{label}: max R/B = {worst:.3e}"));
        notes.push(format!(
            "{label}: {violations} violations, R(T) = {:.3}, bound = {:.3}, clipped {}",
            regret[regret.len() - 1],
            bound[bound.len() - 1],
            rec.diagnostics.clipped
        ));
    }
    Ok(Measurement {
        passed,
        measured: parts.join("; "),
        notes,
    })
}

fn sublinear_regret(_: &SuiteOptions) -> Result<Measurement> {
    let mut worst = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for (label, _, rec) in convex_runs()? {
        let regret = regret_curve(&rec);
        let slope = loglog_slope(&regret, regret.len() / 2)?;
        worst = worst.max(slope);
        parts.push(format!("{label}: {slope:.3}"));
    }
    Ok(Measurement {
        passed: worst <= SLOPE_LIMIT,
        measured: format!("max trailing log-log slope = {worst:.3} (limit {SLOPE_LIMIT}); {}", parts.join(", ")),
        notes: Vec::new(),
    })
}

/// Strongly convex run with `λ = 2·lambda_floor(G)`. `G` depends on the run, so
/// `λ` is refined from pilot runs until it sits in `[floor, 2·floor]`.
fn strongly_convex_run() -> Result<(RunRecord, Vec<String>)> {
    let p = online_quadratic(8)?;
    let x0 = vec![0.0; 5];
    let spec = Divergence::builtin(Builtin::Chi2);
    let base = OptimizerConfig::new(spec.clone(), RuleVariant::ScExact, 1.0);
    let ratio_bound = base.ratio_bound();
    let mut lambda = 1.0;
    let mut notes = Vec::new();
    for round in 0..8 {
        let cfg = base.clone().with_lambda(lambda);
        let r = run_method(&Method::MetaReg(cfg), &p, &x0, REGRET_HORIZON, 9)?;
        let g = r.steps.grad_inf.iter().copied().fold(0.0f64, f64::max);
        let floor = lambda_floor_with_ratio(&p, &spec, g, ratio_bound)?;
        notes.push(format!("round {round}: lambda = {lambda:.4}, G = {g:.4}, floor = {floor:.4}"));
        if lambda >= floor && lambda <= 2.0 * floor * (1.0 + 1e-9) {
            return Ok((r, notes));
        }
        lambda = 2.0 * floor;
    }
    Err(crate::error::Error::NoConvergence {
        iterations: 8,
        best: lambda,
    })
}

fn log_regret_against(bound_of: fn(&RunRecord, ScRule) -> Result<Vec<f64>>) -> Result<Measurement> {
    let (rec, mut notes) = strongly_convex_run()?;
    let regret = regret_curve(&rec);
    let bound = bound_of(&rec, ScRule::Exact)?;
    let violations = regret.iter().zip(&bound).filter(|(r, b)| r > b).count();
    let at = |t: usize| regret[t - 1] / (t as f64).ln();
    let (r3, r4) = (at(1_000), at(10_000));
    let ratio = (r4 / r3).max(r3 / r4);
    notes.push(format!(
        "R(T) = {:.3}, bound = {:.3}, R(1e3)/ln 1e3 = {r3:.4}, R(1e4)/ln 1e4 = {r4:.4}, clipped {}",
        regret[regret.len() - 1],
        bound[bound.len() - 1],
        rec.diagnostics.clipped
    ));
    Ok(Measurement {
        passed: violations == 0 && r3 > 0.0 && r4 > 0.0 && ratio <= LOG_RATIO_LIMIT,
        measured: format!(
            "bound violations = {violations}/{}, R(T)/ln T ratio 1e4 vs 1e3 = {ratio:.3} (limit {LOG_RATIO_LIMIT})",
            regret.len()
        ),
        notes,
    })
}

fn logarithmic_regret(_: &SuiteOptions) -> Result<Measurement> {
    log_regret_against(bound_log_curve)
}

fn logarithmic_regret_scaled(_: &SuiteOptions) -> Result<Measurement> {
    log_regret_against(bound_log_lambda_curve)
}

fn alpha0_robustness(_: &SuiteOptions) -> Result<Measurement> {
    let l = make_logistic(2000, 20, 1e-2, LOGISTIC_FEATURE_SCALE, 0)?;
    let p = ProblemInstance::full_batch(Objective::Logistic(l));
    let x0 = vec![0.0; 20];
    let f0 = p.loss(&x0)?;
    let mut cells = Vec::new();
    for rule in [RuleVariant::ScalarAlternating, RuleVariant::Alternating] {
        for b in Builtin::EXPERIMENT {
            for a0 in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
                cells.push((rule, b, a0));
            }
        }
    }
    let losses = cells
        .par_iter()
        .map(|&(rule, b, a0)| {
            let cfg = OptimizerConfig::new(Divergence::builtin(b), rule, a0);
            let rec = run_method(&Method::MetaReg(cfg), &p, &x0, 500, 0)?;
            Ok(if rec.aborted.is_some() { f64::INFINITY } else { rec.final_loss().unwrap_or(f64::INFINITY) })
        })
        .collect::<Result<Vec<f64>>>()?;
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let (worst_i, worst) = losses
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let gap = worst / best - 1.0;
    let gd = run_method(&Method::Baseline(Baseline::Gd { alpha: 10.0 }), &p, &x0, 500, 0)?;
    let gd_final = gd.final_loss().unwrap_or(f64::NAN);
    let gd_diverged = gd.aborted.is_some() || !gd_final.is_finite() || gd_final >= f0;
    let (r, b, a) = cells[worst_i];
    Ok(Measurement {
        passed: gap <= ROBUSTNESS_GAP && gd_diverged,
        measured: format!(
            "worst cell gap = {:.2}% (limit {:.0}%), GD(alpha=10) final loss = {gd_final:.4} vs F(x0) = {f0:.4}",
            100.0 * gap,
            100.0 * ROBUSTNESS_GAP
        ),
        notes: vec![format!("best = {best:.6}, worst = {worst:.6} at {r}/{b}/alpha0={a}")],
    })
}

fn scalar_runtime(_: &SuiteOptions) -> Result<Measurement> {
    let q = make_quadratic(10, 0.1, 1.0, 10)?;
    let p = ProblemInstance::full_batch(Objective::Quadratic(q));
    let x0 = vec![0.0; 10];
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut worst = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for rule in [RuleVariant::ScalarExact, RuleVariant::ScalarAlternating] {
        for b in Builtin::EXPERIMENT {
            let cfg = OptimizerConfig::new(Divergence::builtin(b), rule, 1.0);
            let rec = run_method(&Method::MetaReg(cfg), &p, &x0, 100_000, 0)?;
            let mut pts = Vec::new();
            for &e in &eps {
                let Some(t) = steps_to_eps(&rec, e) else {
                    return Ok(Measurement {
                        passed: false,
                        measured: format!("{b}/{rule} never reached eps = {e:e}"),
                        notes: Vec::new(),
                    });
                };
                pts.push(((1.0 / e).ln(), (t as f64).ln()));
            }
            let slope = least_squares_slope(&pts);
            worst = worst.max(slope);
            parts.push(format!("{b}/{rule}: {slope:.3}"));
        }
    }
    Ok(Measurement {
        passed: worst <= RUNTIME_SLOPE_LIMIT,
        measured: format!("max slope of ln T(eps) vs ln(1/eps) = {worst:.3} (limit {RUNTIME_SLOPE_LIMIT})"),
        notes: parts,
    })
}

fn bb_sanity(_: &SuiteOptions) -> Result<Measurement> {
    let a = nalgebra::DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
    let b = nalgebra::DVector::from_column_slice(&[1.0, -1.0]);
    let p = ProblemInstance::full_batch(Objective::Quadratic(Quadratic::new(a, b)?));
    let bb = Baseline::from_id("bb1", 0.1, 0.0)?;
    let rec = run_method(&Method::Baseline(bb), &p, &[5.0, 5.0], 50, 0)?;
    let best = rec.steps.grad_sq_norm.iter().copied().fold(f64::INFINITY, f64::min).sqrt();
    let reached = rec.steps.grad_sq_norm.iter().position(|&g| g.sqrt() <= BB_GRAD_TOL);
    Ok(Measurement::le(best, BB_GRAD_TOL, "min grad norm in 50 steps")
        .note(format!("first step below tolerance: {reached:?}")))
}

fn central_difference(f: &dyn Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<Vec<f64>> {
    (0..x.len())
        .map(|j| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[j] += h;
            m[j] -= h;
            Ok((f(&p)? - f(&m)?) / (2.0 * h))
        })
        .collect()
}

fn gradient_oracles(_: &SuiteOptions) -> Result<Measurement> {
    let quad = Objective::Quadratic(make_quadratic(8, 0.1, 5.0, 12)?.with_sample_noise(30, 1.0, 13)?);
    let logi = Objective::Logistic(make_logistic(200, 8, 1e-2, 1.0, 14)?);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for obj in [&quad, &logi] {
        for _ in 0..50 {
            let x: Vec<f64> = (0..obj.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let batch = Minibatch {
                indices: (0..5).map(|_| rng.random_range(0..obj.n_samples())).collect(),
            };
            let pairs = [
                (obj.gradient(&x)?, central_difference(&|z| obj.loss(z), &x, 1e-5)?),
                (obj.batch_gradient(&batch, &x)?, central_difference(&|z| obj.batch_loss(&batch, z), &x, 1e-5)?),
            ];
            for (g, fd) in pairs {
                for (a, b) in g.iter().zip(&fd) {
                    worst = worst.max((a - b).abs() / a.abs().max(1.0));
                }
            }
        }
    }
    Ok(Measurement::le(worst, FD_TOL, "max scaled FD gap"))
}

fn clip_diagnostics(opts: &SuiteOptions) -> Result<Measurement> {
    let clip = opts.clip_factor.unwrap_or(1.0);
    let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Rkl), RuleVariant::Alternating, 1.0)
        .with_clip_factor(Some(clip));
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let grads = uniform_stream(&mut rng, 200, 4, 50.0);
    let mut s = OptimizerState::new(vec![0.0; 4], &cfg);
    let mut out_of_domain = 0;
    let mut clipped = 0;
    for g in &grads {
        s = step(&s, g, &cfg)?;
        out_of_domain += s.diagnostics.out_of_domain;
        clipped += s.diagnostics.clipped;
    }
    let healthy = s.alpha.iter().all(|a| a.is_finite() && *a > 0.0) && s.x.iter().all(|x| x.is_finite());
    Ok(Measurement {
        passed: out_of_domain > 0 && clipped >= out_of_domain && healthy,
        measured: format!("clip_factor = {clip}: {out_of_domain} out-of-domain steps, {clipped} clipped, rates finite: {healthy}"),
        notes: Vec::new(),
    })
}
