//! Drives an optimizer or baseline over a problem and logs a [`RunRecord`].

use crate::baselines::{Baseline, BaselineState};
use crate::error::{check_len, Error, Result};
use crate::metrics::{Comparator, DiagnosticTotals, RecordConfig, RunRecord, StepColumns};
use crate::optimizer::{step, OptimizerConfig, OptimizerState};
use crate::problems::{Oracle, ProblemInstance};

#[derive(Debug, Clone)]
pub enum Method {
    MetaReg(OptimizerConfig),
    Baseline(Baseline),
}

impl Method {
    pub fn id(&self) -> &str {
        match self {
            Method::MetaReg(_) => "metareg",
            Method::Baseline(b) => b.id(),
        }
    }

    pub fn alpha0(&self) -> f64 {
        match self {
            Method::MetaReg(c) => c.alpha0,
            Method::Baseline(b) => b.initial_rate(),
        }
    }
}

enum State {
    MetaReg(OptimizerState),
    Baseline(BaselineState),
}

impl State {
    fn x(&self) -> &[f64] {
        match self {
            State::MetaReg(s) => &s.x,
            State::Baseline(s) => &s.x,
        }
    }

    fn rate_range(&self) -> (f64, f64) {
        let alpha = match self {
            State::MetaReg(s) => &s.alpha,
            State::Baseline(s) => &s.alpha,
        };
        let lo = alpha.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// The comparator `x*` and the per-step comparator losses for the given oracles.
fn comparator_losses(problem: &ProblemInstance, oracles: &[Oracle], x_star: &[f64], f_star: f64) -> Result<Vec<f64>> {
    oracles
        .iter()
        .map(|o| match o {
            Oracle::Full => Ok(f_star),
            Oracle::Batch(_) => problem.oracle_loss(o, x_star),
        })
        .collect()
}

/// Runs `method` for `horizon` steps from `x0`.
///
/// A non-finite loss or gradient stops the run early; the returned record is
/// truncated and carries the reason in `aborted`.
pub fn run_method(method: &Method, problem: &ProblemInstance, x0: &[f64], horizon: usize, seed: u64) -> Result<RunRecord> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    check_len(problem.dim(), x0.len())?;
    match method {
        Method::MetaReg(c) => c.validate()?,
        Method::Baseline(b) => {
            if problem.batch_size().is_some() && !b.supports_online() {
                return Err(Error::Config(format!("baseline {} requires a full-batch problem", b.id())));
            }
        }
    }

    let (x_star, f_star) = problem.optimum()?;
    let oracles = problem.oracles(seed, horizon);
    let comparator_loss = comparator_losses(problem, &oracles, &x_star, f_star)?;

    let mut state = match method {
        Method::MetaReg(c) => State::MetaReg(OptimizerState::new(x0.to_vec(), c)),
        Method::Baseline(_) => State::Baseline(BaselineState::new(x0.to_vec())),
    };
    let mut cols = StepColumns::default();
    let mut totals = DiagnosticTotals {
        max_ratio: 1.0,
        ..DiagnosticTotals::default()
    };
    let mut aborted = None;

    for (t, oracle) in oracles.iter().enumerate() {
        let x = state.x();
        let (loss, grad) = problem.oracle_loss_and_gradient(oracle, x)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            aborted = Some(format!("non-finite loss or gradient at step {t}"));
            break;
        }
        cols.loss.push(loss);
        cols.comparator_loss.push(comparator_loss[t]);
        let grad_sq: Vec<f64> = grad.iter().map(|g| g * g).collect();
        cols.grad_sq_norm.push(grad_sq.iter().sum());
        cols.grad_sq.push(grad_sq);
        cols.grad_inf.push(grad.iter().fold(0.0f64, |m, g| m.max(g.abs())));
        cols.dist_inf
            .push(x.iter().zip(&x_star).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));

        state = match (&state, method) {
            (State::MetaReg(s), Method::MetaReg(c)) => {
                let next = step(s, &grad, c)?;
                let d = next.diagnostics;
                totals.out_of_domain += d.out_of_domain;
                totals.clipped += d.clipped;
                totals.boxed += d.boxed;
                totals.floored += d.floored;
                totals.max_ratio = totals.max_ratio.max(d.max_ratio);
                State::MetaReg(next)
            }
            (State::Baseline(s), Method::Baseline(b)) => State::Baseline(b.step(s, &grad)?),
            _ => unreachable!("state always matches its method"),
        };
        let (lo, hi) = state.rate_range();
        cols.alpha_min.push(lo);
        cols.alpha_max.push(hi);
    }

    let initial_dist_sq = x0.iter().zip(&x_star).map(|(a, b)| (a - b) * (a - b)).sum();
    let config = match method {
        Method::MetaReg(c) => {
            let ratio_bound = c.clip_factor.map_or(totals.max_ratio, |cf| 1.0 / cf);
            RecordConfig {
                method: method.id().to_string(),
                divergence: Some(c.divergence.name().to_string()),
                rule: Some(c.rule),
                alpha0: c.alpha0,
                lambda: c.lambda,
                clip_factor: c.clip_factor,
                problem: problem.kind(),
                batch_size: problem.batch_size(),
                horizon,
                seed,
                gamma: Some(c.divergence.gamma(ratio_bound)),
                smoothness: Some(c.divergence.smoothness()),
                ratio_bound: Some(ratio_bound),
            }
        }
        Method::Baseline(b) => RecordConfig {
            method: b.id().to_string(),
            divergence: None,
            rule: None,
            alpha0: b.initial_rate(),
            lambda: None,
            clip_factor: None,
            problem: problem.kind(),
            batch_size: problem.batch_size(),
            horizon,
            seed,
            gamma: None,
            smoothness: None,
            ratio_bound: None,
        },
    };
    Ok(RunRecord {
        config,
        comparator: Comparator {
            x0: x0.to_vec(),
            x_star,
            initial_dist_sq,
        },
        steps: cols,
        diagnostics: totals,
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{Builtin, Divergence};
    use crate::metrics::regret_curve;
    use crate::optimizer::{run, RuleVariant};
    use crate::problems::{make_quadratic, Objective, Quadratic};
    use nalgebra::{DMatrix, DVector};

    fn half_square() -> ProblemInstance {
        let q = Quadratic::new(DMatrix::from_element(1, 1, 1.0), DVector::zeros(1)).unwrap();
        ProblemInstance::full_batch(Objective::Quadratic(q))
    }

    #[test]
    fn chi2_alternating_contracts() {
        let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Chi2), RuleVariant::Alternating, 0.9);
        let rec = run_method(&Method::MetaReg(cfg), &half_square(), &[1.0], 100, 0).unwrap();
        assert_eq!(rec.len(), 100);
        let x_final = (2.0 * rec.final_loss().unwrap()).sqrt();
        assert!(x_final < 1e-3);
        assert!(rec.steps.alpha_max.iter().all(|&a| a > 0.0 && a <= 0.9));
    }

    #[test]
    fn horizon_one_and_zero() {
        let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Kl), RuleVariant::Exact, 0.5);
        let rec = run(&cfg, &half_square(), 1, 0).unwrap();
        assert_eq!(rec.len(), 1);
        assert!(run(&cfg, &half_square(), 0, 0).is_err());
    }

    #[test]
    fn regret_matches_resummation() {
        let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Chi2), RuleVariant::Alternating, 0.7);
        let rec = run_method(&Method::MetaReg(cfg), &half_square(), &[2.0], 50, 0).unwrap();
        let curve = regret_curve(&rec);
        for t in [0, 10, 49] {
            let brute: f64 = (0..=t).map(|s| rec.steps.loss[s]).sum::<f64>()
                - (0..=t).map(|s| rec.steps.comparator_loss[s]).sum::<f64>();
            assert!((curve[t] - brute).abs() <= 1e-12 * brute.abs().max(1.0));
        }
    }

    #[test]
    fn adagrad_rule_matches_baseline() {
        let q = make_quadratic(4, 0.2, 2.0, 11).unwrap().with_sample_noise(20, 1.0, 3).unwrap();
        let p = ProblemInstance::online(Objective::Quadratic(q), 1).unwrap();
        let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Adagrad), RuleVariant::Exact, 0.8)
            .with_clip_factor(None);
        let x0 = [0.5, -0.5, 1.0, 0.0];
        let a = run_method(&Method::MetaReg(cfg), &p, &x0, 300, 7).unwrap();
        let b = run_method(&Method::Baseline(Baseline::Adagrad { alpha0: 0.8 }), &p, &x0, 300, 7).unwrap();
        for (la, lb) in a.steps.loss.iter().zip(&b.steps.loss) {
            assert!((la - lb).abs() <= 1e-10 * la.abs().max(1.0));
        }
    }

    #[test]
    fn divergence_is_reported_not_raised() {
        let q = Quadratic::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0)).unwrap();
        let p = ProblemInstance::full_batch(Objective::Quadratic(q));
        let rec = run_method(&Method::Baseline(Baseline::Gd { alpha: 3.0 }), &p, &[0.0], 5000, 0).unwrap();
        assert!(rec.aborted.is_some());
        assert!(rec.len() < 5000);
    }

    #[test]
    fn bb_rejected_on_streams() {
        let q = make_quadratic(2, 1.0, 2.0, 0).unwrap().with_sample_noise(4, 1.0, 0).unwrap();
        let p = ProblemInstance::online(Objective::Quadratic(q), 2).unwrap();
        let bb = Baseline::from_id("bb1", 0.1, 0.0).unwrap();
        assert!(matches!(run_method(&Method::Baseline(bb), &p, &[0.0, 0.0], 5, 0), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_in_seed() {
        let q = make_quadratic(3, 0.1, 1.0, 2).unwrap().with_sample_noise(10, 1.0, 4).unwrap();
        let p = ProblemInstance::online(Objective::Quadratic(q), 3).unwrap();
        let cfg = OptimizerConfig::new(Divergence::builtin(Builtin::Hellinger), RuleVariant::Alternating, 0.3);
        let a = run(&cfg, &p, 200, 5).unwrap();
        let b = run(&cfg, &p, 200, 5).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = run(&cfg, &p, 200, 6).unwrap();
        assert_ne!(a.steps.loss, c.steps.loss);
    }
}
