//! Run records, regret accounting and the regret-bound evaluators.
//!
//! Bounds are evaluated with the empirical constants of the realized run:
//! `G` is the running maximum of `‖g_t‖∞` and `D∞` the running maximum of
//! `‖x_t − x*‖∞`, both over the prefix being bounded.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::optimizer::RuleVariant;
use crate::problems::{ProblemInstance, ProblemKind};

/// Everything needed to interpret a record's columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordConfig {
    /// `metareg` or a baseline identifier.
    pub method: String,
    pub divergence: Option<String>,
    pub rule: Option<RuleVariant>,
    pub alpha0: f64,
    pub lambda: Option<f64>,
    pub clip_factor: Option<f64>,
    pub problem: ProblemKind,
    pub batch_size: Option<usize>,
    pub horizon: usize,
    pub seed: u64,
    /// Strong-convexity constant of `φ` over the ratio range `[1, ratio_bound]`.
    pub gamma: Option<f64>,
    /// Smoothness constant `l` of `φ`.
    pub smoothness: Option<f64>,
    /// `1/clip_factor`, or the largest realized ratio when clipping is off.
    pub ratio_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    pub x0: Vec<f64>,
    pub x_star: Vec<f64>,
    /// `‖x₀ − x*‖₂²`.
    pub initial_dist_sq: f64,
}

/// Per-step columns; entry `t` describes the iterate `x_t` and gradient `g_t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepColumns {
    /// `f_t(x_t)`.
    pub loss: Vec<f64>,
    /// `f_t(x*)`.
    pub comparator_loss: Vec<f64>,
    pub grad_sq_norm: Vec<f64>,
    /// `g_{t,j}²` for every coordinate.
    pub grad_sq: Vec<Vec<f64>>,
    pub grad_inf: Vec<f64>,
    /// `‖x_t − x*‖∞`.
    pub dist_inf: Vec<f64>,
    /// Rates used to take the step from `x_t`.
    pub alpha_min: Vec<f64>,
    pub alpha_max: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticTotals {
    pub out_of_domain: usize,
    pub clipped: usize,
    pub boxed: usize,
    pub floored: usize,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RecordConfig,
    pub comparator: Comparator,
    pub steps: StepColumns,
    pub diagnostics: DiagnosticTotals,
    /// Set when the run stopped early on a non-finite loss or gradient.
    pub aborted: Option<String>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.steps.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.loss.is_empty()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.steps.loss.last().copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Per-step CSV. Bound columns are left empty when the bound does not apply
    /// to the record's method.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let regret = regret_curve(self);
        let thm5 = self
            .config
            .rule
            .and_then(Thm5Rule::from_variant)
            .and_then(|r| bound_thm5_curve(self, r).ok());
        let log = self
            .config
            .rule
            .and_then(ScRule::from_variant)
            .and_then(|r| bound_log_curve(self, r).ok());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "loss", "grad_sq_norm", "alpha_min", "alpha_max", "regret", "bound_thm5", "bound_log"])?;
        let opt = |c: &Option<Vec<f64>>, t: usize| c.as_ref().map_or_else(String::new, |v| v[t].to_string());
        for t in 0..self.len() {
            w.write_record([
                t.to_string(),
                self.steps.loss[t].to_string(),
                self.steps.grad_sq_norm[t].to_string(),
                self.steps.alpha_min[t].to_string(),
                self.steps.alpha_max[t].to_string(),
                regret[t].to_string(),
                opt(&thm5, t),
                opt(&log, t),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `R(T)` for every prefix length `T = 1, …, len`; entry `T − 1` holds `R(T)`.
pub fn regret_curve(record: &RunRecord) -> Vec<f64> {
    let mut acc = 0.0;
    let mut comp = 0.0;
    record
        .steps
        .loss
        .iter()
        .zip(&record.steps.comparator_loss)
        .map(|(f, c)| {
            acc += f;
            comp += c;
            acc - comp
        })
        .collect()
}

/// `min_{t<T} ‖g_t‖₂²`.
pub fn min_grad_norm(record: &RunRecord, horizon: usize) -> Result<f64> {
    if horizon == 0 || horizon > record.len() {
        return Err(Error::Config(format!("prefix length {horizon} outside 1..={}", record.len())));
    }
    Ok(record.steps.grad_sq_norm[..horizon].iter().copied().fold(f64::INFINITY, f64::min))
}

/// First prefix length `T` with `min_{t<T} ‖g_t‖₂² ≤ eps`.
pub fn steps_to_eps(record: &RunRecord, eps: f64) -> Option<usize> {
    record.steps.grad_sq_norm.iter().position(|&g| g <= eps).map(|t| t + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thm5Rule {
    Exact,
    Alternating,
}

impl Thm5Rule {
    pub fn from_variant(rule: RuleVariant) -> Option<Self> {
        match rule {
            RuleVariant::Exact => Some(Thm5Rule::Exact),
            RuleVariant::Alternating => Some(Thm5Rule::Alternating),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScRule {
    Exact,
    Alternating,
}

impl ScRule {
    pub fn from_variant(rule: RuleVariant) -> Option<Self> {
        match rule {
            RuleVariant::ScExact => Some(ScRule::Exact),
            RuleVariant::ScAlternating => Some(ScRule::Alternating),
            _ => None,
        }
    }
}

fn constants(record: &RunRecord) -> Result<(f64, f64)> {
    match (record.config.gamma, record.config.smoothness) {
        (Some(g), Some(l)) => Ok((g, l)),
        _ => Err(Error::Config("record carries no divergence constants".into())),
    }
}

fn dims(record: &RunRecord) -> usize {
    record.comparator.x_star.len()
}

/// Halved right-hand side of the convex regret bound at every prefix length.
pub fn bound_thm5_curve(record: &RunRecord, rule: Thm5Rule) -> Result<Vec<f64>> {
    let (gamma, l) = constants(record)?;
    let a0 = record.config.alpha0;
    let tail = record.comparator.initial_dist_sq / a0;
    let mut sums = vec![0.0; dims(record)];
    let mut g_max: f64 = 0.0;
    let mut d_max: f64 = 0.0;
    let mut out = Vec::with_capacity(record.len());
    for t in 0..record.len() {
        for (s, g) in sums.iter_mut().zip(&record.steps.grad_sq[t]) {
            *s += g;
        }
        g_max = g_max.max(record.steps.grad_inf[t]);
        d_max = d_max.max(record.steps.dist_inf[t]);
        let k = match rule {
            Thm5Rule::Exact => (2.0 * l + 4.0 * a0 * a0 * g_max * g_max).sqrt(),
            Thm5Rule::Alternating => (2.0 * l).sqrt().max(2.0 * a0 * g_max),
        };
        let col_norms: f64 = sums.iter().map(|s| s.sqrt()).sum();
        let lead = if col_norms == 0.0 {
            0.0
        } else {
            (1.0 + d_max * d_max / gamma) * k * col_norms
        };
        out.push(0.5 * (lead + tail));
    }
    Ok(out)
}

pub fn bound_thm5(record: &RunRecord, rule: Thm5Rule) -> Result<f64> {
    last(bound_thm5_curve(record, rule)?)
}

/// Halved right-hand side of the logarithmic regret bound at every prefix length,
/// as stated for the strongly convex rules. The norm inside the logarithm is the
/// per-coordinate sum of squared gradients.
pub fn bound_log_curve(record: &RunRecord, rule: ScRule) -> Result<Vec<f64>> {
    log_bound(record, rule, false)
}

/// [`bound_log_curve`] with the gradient term multiplied by `λ`.
///
/// The rate recursion of the strongly convex rules is the plain one with `g²`
/// replaced by `g²/λ`, so the sum `Σ_t g_t²/β_{t+1}` is `λ` times the stated
/// logarithmic term. Without that factor the stated bound vanishes as `λ → ∞`
/// while the rates stay at `α₀`.
pub fn bound_log_lambda_curve(record: &RunRecord, rule: ScRule) -> Result<Vec<f64>> {
    log_bound(record, rule, true)
}

fn log_bound(record: &RunRecord, rule: ScRule, lambda_factor: bool) -> Result<Vec<f64>> {
    let (_, l) = constants(record)?;
    let lambda = record
        .config
        .lambda
        .ok_or_else(|| Error::Config("record has no lambda".into()))?;
    let a0 = record.config.alpha0;
    let tail = record.comparator.initial_dist_sq / a0;
    let lead_scale = if lambda_factor { lambda * l } else { l };
    let mut sums = vec![0.0; dims(record)];
    let mut g_max: f64 = 0.0;
    let mut out = Vec::with_capacity(record.len());
    for t in 0..record.len() {
        for (s, g) in sums.iter_mut().zip(&record.steps.grad_sq[t]) {
            *s += g;
        }
        g_max = g_max.max(record.steps.grad_inf[t]);
        let scale = a0 / (lambda * l);
        let logs: f64 = sums.iter().map(|s| (scale * s).ln_1p()).sum();
        let factor = match rule {
            ScRule::Exact => (1.0 + scale * g_max * g_max).powi(2),
            ScRule::Alternating => 1.0,
        };
        out.push(0.5 * (lead_scale * factor * logs + tail));
    }
    Ok(out)
}

pub fn bound_log(record: &RunRecord, rule: ScRule) -> Result<f64> {
    last(bound_log_curve(record, rule)?)
}

fn last(curve: Vec<f64>) -> Result<f64> {
    curve
        .last()
        .copied()
        .ok_or_else(|| Error::Config("empty record".into()))
}

/// Least-squares slope of `ln R(T)` against `ln T` over the last `window`
/// entries, where entry `i` of `curve` is `R(i + 1)`.
pub fn loglog_slope(curve: &[f64], window: usize) -> Result<f64> {
    if window < 2 || window > curve.len() {
        return Err(Error::Config(format!(
            "window {window} must lie in 2..={}",
            curve.len()
        )));
    }
    let start = curve.len() - window;
    let mut pts = Vec::with_capacity(window);
    for (i, &r) in curve.iter().enumerate().skip(start) {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("curve value {r} at T={} is not positive", i + 1)));
        }
        pts.push((((i + 1) as f64).ln(), r.ln()));
    }
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Ratio bound assumed when none is given: the default growth clip of one half.
pub const DEFAULT_RATIO_BOUND: f64 = 2.0;

/// `G² / (γ · min_j μ_j)`, the smallest λ for which the logarithmic bound holds.
/// `γ` is taken over ratios in `[1, 2]`.
pub fn lambda_floor(problem: &ProblemInstance, divergence: &Divergence, g_max: f64) -> Result<f64> {
    lambda_floor_with_ratio(problem, divergence, g_max, DEFAULT_RATIO_BOUND)
}

pub fn lambda_floor_with_ratio(
    problem: &ProblemInstance,
    divergence: &Divergence,
    g_max: f64,
    ratio_bound: f64,
) -> Result<f64> {
    let mu = problem
        .objective()
        .mu_min()
        .ok_or_else(|| Error::Config("problem is not strongly convex".into()))?;
    let gamma = divergence.gamma(ratio_bound);
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "{} has no positive strong-convexity constant on [1, {ratio_bound}]",
            divergence.name()
        )));
    }
    Ok(lambda_floor_formula(g_max, gamma, mu))
}

pub fn lambda_floor_formula(g_max: f64, gamma: f64, mu_min: f64) -> f64 {
    g_max * g_max / (gamma * mu_min)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn record(grads: &[Vec<f64>], xs: &[Vec<f64>], x_star: &[f64], losses: &[f64], comp: &[f64]) -> RunRecord {
        let x0 = xs[0].clone();
        let initial_dist_sq = x0.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum();
        let steps = StepColumns {
            loss: losses.to_vec(),
            comparator_loss: comp.to_vec(),
            grad_sq_norm: grads.iter().map(|g| g.iter().map(|v| v * v).sum()).collect(),
            grad_sq: grads.iter().map(|g| g.iter().map(|v| v * v).collect()).collect(),
            grad_inf: grads.iter().map(|g| g.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect(),
            dist_inf: xs
                .iter()
                .map(|x| x.iter().zip(x_star).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
                .collect(),
            alpha_min: vec![1.0; grads.len()],
            alpha_max: vec![1.0; grads.len()],
        };
        RunRecord {
            config: RecordConfig {
                method: "metareg".into(),
                divergence: Some("chi2".into()),
                rule: Some(RuleVariant::Exact),
                alpha0: 1.0,
                lambda: Some(1.0),
                clip_factor: Some(0.5),
                problem: ProblemKind::Quadratic,
                batch_size: None,
                horizon: grads.len(),
                seed: 0,
                gamma: Some(2.0),
                smoothness: Some(2.0),
                ratio_bound: Some(2.0),
            },
            comparator: Comparator {
                x0,
                x_star: x_star.to_vec(),
                initial_dist_sq,
            },
            steps,
            diagnostics: DiagnosticTotals::default(),
            aborted: None,
        }
    }

    #[test]
    fn regret_examples() {
        let r = record(&[vec![0.0]], &[vec![1.0]], &[1.0], &[3.0], &[3.0]);
        assert_eq!(regret_curve(&r), vec![0.0]);
        // f(x) = x², x₀ = 1, x* = 0
        let r = record(&[vec![2.0]], &[vec![1.0]], &[0.0], &[1.0], &[0.0]);
        assert_eq!(regret_curve(&r), vec![1.0]);
    }

    #[test]
    fn min_grad_norm_examples() {
        let grads: Vec<Vec<f64>> = [3.0, 2.0, 1.0].iter().map(|&g| vec![g]).collect();
        let xs = vec![vec![0.0]; 3];
        let r = record(&grads, &xs, &[0.0], &[0.0; 3], &[0.0; 3]);
        assert_eq!(min_grad_norm(&r, 3).unwrap(), 1.0);
        assert_eq!(min_grad_norm(&r, 1).unwrap(), 9.0);
        assert!(min_grad_norm(&r, 0).is_err());
        assert!(min_grad_norm(&r, 4).is_err());
        assert_eq!(steps_to_eps(&r, 4.0), Some(2));
        assert_eq!(steps_to_eps(&r, 0.5), None);
    }

    #[test]
    fn thm5_zero_gradients() {
        let r = record(&vec![vec![0.0, 0.0]; 3], &vec![vec![1.0, 2.0]; 3], &[0.0, 0.0], &[0.0; 3], &[0.0; 3]);
        for rule in [Thm5Rule::Exact, Thm5Rule::Alternating] {
            assert_eq!(bound_thm5(&r, rule).unwrap(), 5.0 / 2.0);
        }
        assert_eq!(bound_log(&r, ScRule::Exact).unwrap(), 2.5);
    }

    #[test]
    fn thm5_hand_evaluation() {
        // two steps in one dimension: g = (1, 2), x = (1, 0.5), x* = 0, γ = l = 2, α₀ = 1
        let r = record(&[vec![1.0], vec![2.0]], &[vec![1.0], vec![0.5]], &[0.0], &[0.0; 2], &[0.0; 2]);
        let g = 2.0f64;
        let d = 1.0f64;
        let col = 5.0f64.sqrt();
        let exact = 0.5 * ((1.0 + d * d / 2.0) * (4.0 + 4.0 * g * g).sqrt() * col + 1.0);
        let alt = 0.5 * ((1.0 + d * d / 2.0) * 2.0f64.max(2.0 * g) * col + 1.0);
        assert!((bound_thm5(&r, Thm5Rule::Exact).unwrap() - exact).abs() < 1e-14);
        assert!((bound_thm5(&r, Thm5Rule::Alternating).unwrap() - alt).abs() < 1e-14);
        let curve = bound_thm5_curve(&r, Thm5Rule::Exact).unwrap();
        let first = 0.5 * (1.5 * (4.0f64 + 4.0).sqrt() * 1.0 + 1.0);
        assert!((curve[0] - first).abs() < 1e-14);
    }

    #[test]
    fn log_bound_hand_evaluation() {
        // S = 1 + 4 = 5, G = 2, λ = 1, l = 2, α₀ = 1
        let mut r = record(&[vec![1.0], vec![2.0]], &[vec![1.0], vec![0.5]], &[0.0], &[0.0; 2], &[0.0; 2]);
        let expected = 0.5 * (2.0 * (1.0 + 4.0 / 2.0f64).powi(2) * (1.0 + 5.0 / 2.0f64).ln() + 1.0);
        assert!((bound_log(&r, ScRule::Exact).unwrap() - expected).abs() < 1e-14);
        let expected_alt = 0.5 * (2.0 * (1.0 + 5.0 / 2.0f64).ln() + 1.0);
        assert!((bound_log(&r, ScRule::Alternating).unwrap() - expected_alt).abs() < 1e-14);

        let scaled = bound_log_lambda_curve(&r, ScRule::Exact).unwrap();
        assert!((scaled[1] - (expected - 0.5) - 0.5).abs() < 1e-14);
        r.config.lambda = Some(3.0);
        let stated = bound_log(&r, ScRule::Exact).unwrap() - 0.5;
        let scaled = bound_log_lambda_curve(&r, ScRule::Exact).unwrap()[1] - 0.5;
        assert!((scaled - 3.0 * stated).abs() < 1e-13);
        r.config.lambda = Some(1.0);

        let before = bound_log(&r, ScRule::Alternating).unwrap();
        r.config.lambda = Some(2.0);
        assert!(bound_log(&r, ScRule::Alternating).unwrap() < before);
    }

    #[test]
    fn thm5_decreases_with_gamma() {
        let mut r = record(&[vec![1.0], vec![2.0]], &[vec![1.0], vec![0.5]], &[0.0], &[0.0; 2], &[0.0; 2]);
        let mut prev = f64::INFINITY;
        for gamma in [0.1, 1.0, 10.0, 1e3, 1e6] {
            r.config.gamma = Some(gamma);
            let b = bound_thm5(&r, Thm5Rule::Exact).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn slopes() {
        let sqrt: Vec<f64> = (1..=1000).map(|t| (t as f64).sqrt()).collect();
        assert!((loglog_slope(&sqrt, 500).unwrap() - 0.5).abs() < 1e-3);
        let lin: Vec<f64> = (1..=1000).map(|t| t as f64).collect();
        assert!((loglog_slope(&lin, 500).unwrap() - 1.0).abs() < 1e-12);
        let log: Vec<f64> = (1..=100_000).map(|t| (t as f64 + 1.0).ln()).collect();
        let a = loglog_slope(&log, 1_000).unwrap();
        let b = loglog_slope(&log, 99_000).unwrap();
        assert!(a < 0.12 && a > 0.0);
        assert!(b < 0.2 && b > 0.0);
        assert!(loglog_slope(&[0.0, 1.0, 2.0], 3).is_err());
        assert!(loglog_slope(&lin, 1).is_err());
    }

    #[test]
    fn lambda_floor_examples() {
        assert_eq!(lambda_floor_formula(1.0, 2.0, 1.0), 0.5);
        assert_eq!(lambda_floor_formula(0.0, 2.0, 1.0), 0.0);
        assert_eq!(lambda_floor_formula(2.0, 2.0, 1.0), 4.0 * lambda_floor_formula(1.0, 2.0, 1.0));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let r = record(&[vec![1.0], vec![2.0]], &[vec![1.0], vec![0.5]], &[0.0], &[1.0, 0.5], &[0.0; 2]);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,loss,grad_sq_norm,alpha_min,alpha_max,regret,bound_thm5,bound_log"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 8);
        assert_eq!(row[7], "");
        let back = RunRecord::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(regret_curve(&back), regret_curve(&r));
    }

    proptest! {
        #[test]
        fn min_grad_norm_matches_scan(gs in proptest::collection::vec(0.0f64..10.0, 1..40), cut in 1usize..40) {
            let grads: Vec<Vec<f64>> = gs.iter().map(|&g| vec![g]).collect();
            let n = grads.len();
            let r = record(&grads, &vec![vec![0.0]; n], &[0.0], &vec![0.0; n], &vec![0.0; n]);
            let t = cut.min(n);
            let mut best = f64::INFINITY;
            for g in &gs[..t] {
                if g * g < best {
                    best = g * g;
                }
            }
            prop_assert_eq!(min_grad_norm(&r, t).unwrap(), best);
        }
    }
}
