//! Meta-regularized learning-rate update rules.
//!
//! Each step computes new rates from the current gradient, applies growth
//! clipping and the optional rate box (in that order), then moves the iterate by
//! `x' = x − α ∘ g`. Diagonal rules keep one rate per coordinate; scalar rules keep
//! a single rate shared by all coordinates and use the squared Euclidean norm of
//! the gradient in place of `g_j²`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::error::{check_len, Error, Result};
use crate::metrics::RunRecord;
use crate::problems::ProblemInstance;
use crate::runner::{run_method, Method};
use crate::solver::{solve_exact_rate, solve_sc_exact_rate, G_SQ_ZERO};

/// Rates are never allowed below this value.
pub const RATE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleVariant {
    Exact,
    Alternating,
    ScExact,
    ScAlternating,
    ScalarExact,
    ScalarAlternating,
}

impl RuleVariant {
    pub const ALL: [RuleVariant; 6] = [
        RuleVariant::Exact,
        RuleVariant::Alternating,
        RuleVariant::ScExact,
        RuleVariant::ScAlternating,
        RuleVariant::ScalarExact,
        RuleVariant::ScalarAlternating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleVariant::Exact => "exact",
            RuleVariant::Alternating => "alternating",
            RuleVariant::ScExact => "sc_exact",
            RuleVariant::ScAlternating => "sc_alternating",
            RuleVariant::ScalarExact => "scalar_exact",
            RuleVariant::ScalarAlternating => "scalar_alternating",
        }
    }

    pub fn is_sc(self) -> bool {
        matches!(self, RuleVariant::ScExact | RuleVariant::ScAlternating)
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, RuleVariant::ScalarExact | RuleVariant::ScalarAlternating)
    }

    pub fn is_exact(self) -> bool {
        matches!(self, RuleVariant::Exact | RuleVariant::ScExact | RuleVariant::ScalarExact)
    }
}

impl fmt::Display for RuleVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('-', "_");
        RuleVariant::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(&s))
            .ok_or_else(|| Error::Config(format!("unknown rule `{s}`")))
    }
}

/// Source of the auxiliary rate `η_t` that the meta-regularizer pulls towards.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum EtaSchedule {
    /// `η_t = α_t`.
    #[default]
    PreviousRate,
    /// A precomputed positive sequence; the last value is reused past its end.
    Fixed(Vec<f64>),
}

/// Per-coordinate bounds `lo ≤ α ≤ hi`. Length-one bounds apply to every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl RateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_len(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::Config("rate box must not be empty".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(*l > 0.0 && l <= h) {
                return Err(Error::Config(format!("rate box needs 0 < lo <= hi, got [{l}, {h}]")));
            }
        }
        Ok(RateBox { lo, hi })
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        if self.lo.len() == 1 {
            (self.lo[0], self.hi[0])
        } else {
            (self.lo[j], self.hi[j])
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub divergence: Divergence,
    pub rule: RuleVariant,
    pub alpha0: f64,
    /// Required by the strongly convex rules, ignored otherwise.
    pub lambda: Option<f64>,
    /// Lower bound on the one-step rate shrink factor; `None` disables clipping.
    pub clip_factor: Option<f64>,
    pub rate_box: Option<RateBox>,
    pub eta_schedule: EtaSchedule,
}

impl OptimizerConfig {
    pub fn new(divergence: Divergence, rule: RuleVariant, alpha0: f64) -> Self {
        OptimizerConfig {
            divergence,
            rule,
            alpha0,
            lambda: None,
            clip_factor: Some(0.5),
            rate_box: None,
            eta_schedule: EtaSchedule::PreviousRate,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_clip_factor(mut self, clip_factor: Option<f64>) -> Self {
        self.clip_factor = clip_factor;
        self
    }

    pub fn with_rate_box(mut self, rate_box: RateBox) -> Self {
        self.rate_box = Some(rate_box);
        self
    }

    pub fn with_eta_schedule(mut self, schedule: EtaSchedule) -> Self {
        self.eta_schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::Config(format!("alpha0 must be positive, got {}", self.alpha0)));
        }
        if self.rule.is_sc() {
            match self.lambda {
                Some(l) if l > 0.0 && l.is_finite() => {}
                Some(l) => return Err(Error::Config(format!("lambda must be positive, got {l}"))),
                None => return Err(Error::Config(format!("rule {} requires lambda", self.rule))),
            }
        }
        if let Some(c) = self.clip_factor {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::Config(format!("clip_factor must lie in (0, 1], got {c}")));
            }
        }
        if let EtaSchedule::Fixed(seq) = &self.eta_schedule {
            if seq.is_empty() || seq.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
                return Err(Error::Config("eta schedule must be a nonempty positive sequence".into()));
            }
        }
        Ok(())
    }

    /// Ratio bound `Z` such that every realized `α_t/α_{t+1}` lies in `[1, Z]`.
    pub fn ratio_bound(&self) -> f64 {
        self.clip_factor.map_or(f64::INFINITY, |c| 1.0 / c)
    }

    fn eta(&self, t: usize, alpha_t: f64) -> f64 {
        match &self.eta_schedule {
            EtaSchedule::PreviousRate => alpha_t,
            EtaSchedule::Fixed(seq) => seq[t.min(seq.len() - 1)],
        }
    }
}

/// Safeguard events of the most recent step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Coordinates whose inverse-derivative argument had no preimage.
    pub out_of_domain: usize,
    /// Coordinates raised to the growth-clip floor.
    pub clipped: usize,
    /// Coordinates changed by the rate box.
    pub boxed: usize,
    /// Coordinates raised to [`RATE_FLOOR`].
    pub floored: usize,
    /// Largest realized shrink ratio `α_t / α_{t+1}`.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    /// One rate per coordinate, or a single shared rate for the scalar rules.
    pub alpha: Vec<f64>,
    pub t: usize,
    pub last_grad: Option<Vec<f64>>,
    pub diagnostics: StepDiagnostics,
}

impl OptimizerState {
    pub fn new(x0: Vec<f64>, config: &OptimizerConfig) -> Self {
        let n_rates = if config.rule.is_scalar() { 1 } else { x0.len() };
        OptimizerState {
            alpha: vec![config.alpha0; n_rates],
            x: x0,
            t: 0,
            last_grad: None,
            diagnostics: StepDiagnostics::default(),
        }
    }

    pub fn rate(&self, j: usize) -> f64 {
        if self.alpha.len() == 1 {
            self.alpha[0]
        } else {
            self.alpha[j]
        }
    }
}

/// Unsafeguarded rule output: `None` means the inverse-derivative argument was out of range.
fn raw_rate(config: &OptimizerConfig, rule_rate: f64, eta: f64, g_sq: f64) -> Result<Option<f64>> {
    let spec = &config.divergence;
    let alternating = |base: f64, y: f64| -> Result<Option<f64>> {
        match spec.phi_prime_inverse(y) {
            Ok(ratio) if ratio.is_finite() => Ok(Some(base / ratio)),
            Ok(_) | Err(Error::OutOfRange { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    match config.rule {
        RuleVariant::Exact | RuleVariant::ScalarExact => solve_exact_rate(spec, eta, g_sq).map(Some),
        RuleVariant::Alternating | RuleVariant::ScalarAlternating => {
            if g_sq < G_SQ_ZERO {
                return Ok(Some(eta));
            }
            alternating(eta, eta * eta * g_sq)
        }
        RuleVariant::ScExact => {
            let lambda = config.lambda.unwrap_or(f64::NAN);
            solve_sc_exact_rate(spec, rule_rate, g_sq, lambda).map(Some)
        }
        RuleVariant::ScAlternating => {
            if g_sq < G_SQ_ZERO {
                return Ok(Some(rule_rate));
            }
            let lambda = config.lambda.unwrap_or(f64::NAN);
            alternating(rule_rate, rule_rate * g_sq / lambda)
        }
    }
}

/// One optimizer transition.
pub fn step(state: &OptimizerState, grad: &[f64], config: &OptimizerConfig) -> Result<OptimizerState> {
    check_len(state.x.len(), grad.len())?;
    if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient entry {bad} at step {}", state.t)));
    }
    let mut diag = StepDiagnostics {
        max_ratio: 1.0,
        ..StepDiagnostics::default()
    };

    let scalar = config.rule.is_scalar();
    let mut alpha = Vec::with_capacity(state.alpha.len());
    for (j, &prev) in state.alpha.iter().enumerate() {
        let g_sq = if scalar {
            grad.iter().map(|g| g * g).sum()
        } else {
            grad[j] * grad[j]
        };
        let eta = config.eta(state.t, prev);
        let mut rate = match raw_rate(config, prev, eta, g_sq)? {
            Some(r) => r,
            None => {
                diag.out_of_domain += 1;
                0.0
            }
        };
        if let Some(c) = config.clip_factor {
            let floor = c * prev;
            if rate < floor {
                rate = floor;
                diag.clipped += 1;
            }
        }
        if let Some(rate_box) = &config.rate_box {
            let (lo, hi) = rate_box.bounds(j);
            let projected = rate.clamp(lo, hi);
            if projected != rate {
                diag.boxed += 1;
                rate = projected;
            }
        }
        if !(rate >= RATE_FLOOR) {
            rate = RATE_FLOOR;
            diag.floored += 1;
        }
        diag.max_ratio = diag.max_ratio.max(prev / rate);
        alpha.push(rate);
    }

    let x = state
        .x
        .iter()
        .zip(grad)
        .enumerate()
        .map(|(j, (x, g))| x - alpha[if scalar { 0 } else { j }] * g)
        .collect();
    Ok(OptimizerState {
        x,
        alpha,
        t: state.t + 1,
        last_grad: Some(grad.to_vec()),
        diagnostics: diag,
    })
}

/// Coordinate-wise `max(α_new, c · α_prev)`.
pub fn apply_growth_clip(alpha_new: &[f64], alpha_prev: &[f64], clip_factor: f64) -> Vec<f64> {
    alpha_new
        .iter()
        .zip(alpha_prev)
        .map(|(&a, &p)| a.max(clip_factor * p))
        .collect()
}

/// Coordinate-wise `min(max(α*, lo), hi)`, which solves the box-constrained
/// max-min problem because the dual objective is unimodal in each rate.
pub fn project_rate_box(alpha_star: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    check_len(alpha_star.len(), lo.len())?;
    check_len(alpha_star.len(), hi.len())?;
    alpha_star
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(&a, (&l, &h))| {
            if l > h {
                Err(Error::Config(format!("rate box lower bound {l} exceeds upper bound {h}")))
            } else {
                Ok(a.max(l).min(h))
            }
        })
        .collect()
}

/// Runs the configured rule against `problem` for `horizon` steps from the origin.
pub fn run(config: &OptimizerConfig, problem: &ProblemInstance, horizon: usize, seed: u64) -> Result<RunRecord> {
    let x0 = vec![0.0; problem.dim()];
    run_method(&Method::MetaReg(config.clone()), problem, &x0, horizon, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::Builtin;
    use proptest::prelude::*;

    fn cfg(kind: Builtin, rule: RuleVariant, alpha0: f64) -> OptimizerConfig {
        OptimizerConfig::new(Divergence::builtin(kind), rule, alpha0)
    }

    fn state(x: &[f64], alpha: &[f64]) -> OptimizerState {
        OptimizerState {
            x: x.to_vec(),
            alpha: alpha.to_vec(),
            t: 0,
            last_grad: None,
            diagnostics: StepDiagnostics::default(),
        }
    }

    #[test]
    fn exact_adagrad_example() {
        let c = cfg(Builtin::Adagrad, RuleVariant::Exact, 1.0);
        let s = step(&state(&[0.0, 0.0], &[1.0, 1.0]), &[1.0, 0.0], &c).unwrap();
        assert!((s.alpha[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert_eq!(s.alpha[1], 1.0);
        assert!((s.x[0] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
        assert_eq!(s.x[1], 0.0);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn alternating_chi2_example() {
        let c = cfg(Builtin::Chi2, RuleVariant::Alternating, 0.5);
        let s = step(&state(&[0.0], &[0.5]), &[2.0], &c).unwrap();
        assert!((s.alpha[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.diagnostics.clipped, 0);
    }

    #[test]
    fn alternating_kl_example_is_clipped() {
        let c = cfg(Builtin::Kl, RuleVariant::Alternating, 1.0);
        let s = step(&state(&[0.0], &[1.0]), &[1.0], &c).unwrap();
        assert_eq!(s.alpha[0], 0.5);
        assert_eq!(s.diagnostics.clipped, 1);

        let unclipped = c.clone().with_clip_factor(None);
        let s = step(&state(&[0.0], &[1.0]), &[1.0], &unclipped).unwrap();
        assert!((s.alpha[0] - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_state_unchanged() {
        for kind in Builtin::ALL {
            for rule in RuleVariant::ALL {
                let c = cfg(kind, rule, 0.3).with_lambda(1.0);
                let s0 = OptimizerState::new(vec![1.0, -2.0], &c);
                let s1 = step(&s0, &[0.0, 0.0], &c).unwrap();
                assert_eq!(s1.x, s0.x, "{kind} {rule}");
                assert_eq!(s1.alpha, s0.alpha, "{kind} {rule}");
            }
        }
    }

    #[test]
    fn out_of_domain_resolves_to_clip_floor() {
        let c = cfg(Builtin::Rkl, RuleVariant::Alternating, 1.0);
        let s = step(&state(&[0.0], &[1.0]), &[3.0], &c).unwrap();
        assert_eq!(s.alpha[0], 0.5);
        assert_eq!(s.diagnostics.out_of_domain, 1);
        assert_eq!(s.diagnostics.clipped, 1);

        let c = c.with_clip_factor(None);
        let s = step(&state(&[0.0], &[1.0]), &[3.0], &c).unwrap();
        assert_eq!(s.alpha[0], RATE_FLOOR);
        assert_eq!(s.diagnostics.floored, 1);
    }

    #[test]
    fn wngrad_alternating_branch_edge() {
        // η²g² = 1/4 is the last argument with a preimage on [1, 2]
        let c = cfg(Builtin::Wngrad, RuleVariant::Alternating, 1.0).with_clip_factor(None);
        let s = step(&state(&[0.0], &[1.0]), &[0.5], &c).unwrap();
        assert!((s.alpha[0] - 0.5).abs() < 1e-15);
        let s = step(&state(&[0.0], &[1.0]), &[0.6], &c).unwrap();
        assert_eq!(s.diagnostics.out_of_domain, 1);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let c = cfg(Builtin::Chi2, RuleVariant::Exact, 1.0);
        let r = step(&state(&[0.0], &[1.0]), &[f64::NAN], &c);
        assert!(matches!(r, Err(Error::Numeric(_))));
        let r = step(&state(&[0.0], &[1.0]), &[1.0, 2.0], &c);
        assert!(matches!(r, Err(Error::Shape { .. })));
    }

    #[test]
    fn sc_rules_follow_their_equations() {
        let c = cfg(Builtin::Chi2, RuleVariant::ScAlternating, 1.0).with_lambda(2.0);
        // α_{t+1} = α_t / (φ')⁻¹(α_t g² / λ) = 1 / (1 + 0.5 · 1·1/2)
        let s = step(&state(&[0.0], &[1.0]), &[1.0], &c).unwrap();
        assert!((s.alpha[0] - 1.0 / 1.25).abs() < 1e-15);

        let c = cfg(Builtin::Chi2, RuleVariant::ScExact, 1.0).with_lambda(1.0);
        let s = step(&state(&[0.0], &[1.0]), &[2f64.sqrt()], &c).unwrap();
        assert!((s.alpha[0] - 0.682_327_803_828_019_3).abs() < 1e-12);
    }

    #[test]
    fn scalar_rules_share_one_rate() {
        let c = cfg(Builtin::Chi2, RuleVariant::ScalarAlternating, 0.5);
        let s0 = OptimizerState::new(vec![0.0, 0.0], &c);
        assert_eq!(s0.alpha.len(), 1);
        // y = α² ‖g‖² = 0.25 · 4 = 1, ratio 1.5
        let s = step(&s0, &[2f64.sqrt(), 2f64.sqrt()], &c).unwrap();
        assert!((s.alpha[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.x[0] + 2f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((s.x[1] + 2f64.sqrt() / 3.0).abs() < 1e-15);

        let c = cfg(Builtin::Adagrad, RuleVariant::ScalarExact, 1.0);
        let s = step(&OptimizerState::new(vec![0.0, 0.0], &c), &[1.0, 1.0], &c).unwrap();
        assert!((s.alpha[0] - 1.0 / 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn growth_clip_examples() {
        assert_eq!(apply_growth_clip(&[0.1], &[1.0], 0.5), vec![0.5]);
        assert_eq!(apply_growth_clip(&[0.8], &[1.0], 0.5), vec![0.8]);
        assert_eq!(apply_growth_clip(&[1.0, 1e-9], &[1.0, 1.0], 0.5), vec![1.0, 0.5]);
    }

    #[test]
    fn rate_box_examples() {
        assert_eq!(project_rate_box(&[0.3], &[0.5], &[2.0]).unwrap(), vec![0.5]);
        assert_eq!(project_rate_box(&[1.0], &[0.5], &[2.0]).unwrap(), vec![1.0]);
        assert_eq!(project_rate_box(&[3.0], &[0.5], &[2.0]).unwrap(), vec![2.0]);
        assert!(matches!(project_rate_box(&[1.0], &[2.0], &[0.5]), Err(Error::Config(_))));
        assert!(RateBox::new(vec![2.0], vec![1.0]).is_err());
    }

    #[test]
    fn box_wins_over_clip() {
        let c = cfg(Builtin::Kl, RuleVariant::Alternating, 1.0)
            .with_rate_box(RateBox::new(vec![0.1], vec![0.4]).unwrap());
        let s = step(&state(&[0.0, 0.0], &[1.0, 1.0]), &[1.0, 0.0], &c).unwrap();
        assert_eq!(s.alpha, vec![0.4, 0.4]);
        assert_eq!(s.diagnostics.boxed, 2);
    }

    #[test]
    fn fixed_eta_schedule() {
        let c = cfg(Builtin::Chi2, RuleVariant::Alternating, 1.0)
            .with_clip_factor(None)
            .with_eta_schedule(EtaSchedule::Fixed(vec![0.5]));
        let s = step(&state(&[0.0], &[1.0]), &[2.0], &c).unwrap();
        assert!((s.alpha[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(Builtin::Kl, RuleVariant::ScExact, 1.0).validate().is_err());
        assert!(cfg(Builtin::Kl, RuleVariant::ScExact, 1.0).with_lambda(1.0).validate().is_ok());
        assert!(cfg(Builtin::Kl, RuleVariant::Exact, 0.0).validate().is_err());
        assert!(cfg(Builtin::Kl, RuleVariant::Exact, 1.0).with_clip_factor(Some(1.5)).validate().is_err());
        assert!(cfg(Builtin::Kl, RuleVariant::Exact, 1.0)
            .with_eta_schedule(EtaSchedule::Fixed(vec![]))
            .validate()
            .is_err());
        assert_eq!("sc-exact".parse::<RuleVariant>().unwrap(), RuleVariant::ScExact);
        assert!("newton".parse::<RuleVariant>().is_err());
    }

    #[test]
    fn exact_and_alternating_agree_to_second_order() {
        // |α_exact − α_alt| = O(g⁴): the ratio ‖diff‖/g⁴ stays bounded as g shrinks
        for kind in Builtin::ALL {
            let mut ratios = Vec::new();
            for k in 1..=6 {
                let g = 0.5f64.powi(k);
                let a = |rule| {
                    let c = cfg(kind, rule, 1.0).with_clip_factor(None);
                    step(&state(&[0.0], &[1.0]), &[g], &c).unwrap().alpha[0]
                };
                let diff = (a(RuleVariant::Exact) - a(RuleVariant::Alternating)).abs();
                ratios.push(diff / g.powi(4));
            }
            let first = ratios[0].max(1e-300);
            for r in &ratios {
                assert!(*r <= 4.0 * first + 1e-6, "{kind}: {ratios:?}");
            }
        }
    }

    fn random_walk_grads(seed: u64, d: usize, steps: usize, scale: f64) -> Vec<Vec<f64>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..steps)
            .map(|_| (0..d).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn clip_inactive_when_ratio_small() {
        // unclipped and clipped runs coincide if every realized ratio stays below 1/c
        let grads = random_walk_grads(7, 3, 200, 0.5);
        let base = cfg(Builtin::Chi2, RuleVariant::Alternating, 1.0);
        let mut a = OptimizerState::new(vec![0.0; 3], &base);
        let unclipped = base.clone().with_clip_factor(None);
        let mut b = OptimizerState::new(vec![0.0; 3], &unclipped);
        for g in &grads {
            a = step(&a, g, &base).unwrap();
            b = step(&b, g, &unclipped).unwrap();
            assert!(b.diagnostics.max_ratio <= 2.0);
            assert_eq!(a.alpha, b.alpha);
        }
    }

    #[test]
    fn adagrad_and_wngrad_special_cases() {
        let grads = random_walk_grads(11, 4, 1000, 1.0);
        for (kind, recurrence) in [
            (Builtin::Adagrad, (|a: f64, g: f64| 1.0 / (1.0 / (a * a) + g * g).sqrt()) as fn(f64, f64) -> f64),
            (Builtin::Wngrad, |a: f64, g: f64| 1.0 / (1.0 / a + a * g * g)),
        ] {
            let c = cfg(kind, RuleVariant::Exact, 1.0).with_clip_factor(None);
            let mut s = OptimizerState::new(vec![0.0; 4], &c);
            let mut alpha = [1.0; 4];
            for g in &grads {
                s = step(&s, g, &c).unwrap();
                for j in 0..4 {
                    alpha[j] = recurrence(alpha[j], g[j]);
                    assert!((s.alpha[j] - alpha[j]).abs() <= 1e-10 * alpha[j], "{kind}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rates_are_monotone(
            seed in 0u64..1000,
            kind_idx in 0usize..6,
            rule_idx in 0usize..6,
            scale in 0.01f64..20.0,
            alpha0 in 0.001f64..10.0,
        ) {
            let c = cfg(Builtin::ALL[kind_idx], RuleVariant::ALL[rule_idx], alpha0).with_lambda(1.0);
            let mut s = OptimizerState::new(vec![0.0; 3], &c);
            for g in random_walk_grads(seed, 3, 50, scale) {
                let next = step(&s, &g, &c).unwrap();
                for (new, old) in next.alpha.iter().zip(&s.alpha) {
                    prop_assert!(*new <= old + 1e-12);
                    prop_assert!(*new > 0.0);
                }
                s = next;
            }
        }

        #[test]
        fn scalar_beta_is_nondecreasing(seed in 0u64..1000, kind_idx in 0usize..6, alt in any::<bool>()) {
            let rule = if alt { RuleVariant::ScalarAlternating } else { RuleVariant::ScalarExact };
            let c = cfg(Builtin::ALL[kind_idx], rule, 2.0);
            let mut s = OptimizerState::new(vec![0.0; 2], &c);
            for g in random_walk_grads(seed, 2, 50, 3.0) {
                let next = step(&s, &g, &c).unwrap();
                prop_assert!(1.0 / next.alpha[0] >= 1.0 / s.alpha[0]);
                s = next;
            }
        }
    }
}
