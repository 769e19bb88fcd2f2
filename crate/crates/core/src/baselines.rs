//! Reference optimizers: fixed-step gradient descent, AdaGrad, WNGrad,
//! Barzilai–Borwein and hypergradient descent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Hypergradient rates never drop below this value.
pub const HYPERGRAD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BbVariant {
    Bb1,
    Bb2,
}

/// A baseline method and its hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Baseline {
    Gd { alpha: f64 },
    Adagrad { alpha0: f64 },
    Wngrad { alpha0: f64 },
    Bb { variant: BbVariant, fallback_alpha: f64 },
    Hypergrad { alpha0: f64, beta: f64 },
}

impl Baseline {
    pub const IDS: [&'static str; 6] = ["gd", "adagrad", "wngrad", "bb1", "bb2", "hypergrad"];

    /// Builds a baseline from its CLI identifier. `alpha` is the (initial) step size,
    /// `beta` the hypergradient learning rate.
    pub fn from_id(id: &str, alpha: f64, beta: f64) -> Result<Self> {
        Ok(match id.trim().to_ascii_lowercase().as_str() {
            "gd" => Baseline::Gd { alpha },
            "adagrad" => Baseline::Adagrad { alpha0: alpha },
            "wngrad" => Baseline::Wngrad { alpha0: alpha },
            "bb1" => Baseline::Bb {
                variant: BbVariant::Bb1,
                fallback_alpha: alpha,
            },
            "bb2" => Baseline::Bb {
                variant: BbVariant::Bb2,
                fallback_alpha: alpha,
            },
            "hypergrad" => Baseline::Hypergrad { alpha0: alpha, beta },
            other => return Err(Error::Config(format!("unknown baseline `{other}`"))),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Baseline::Gd { .. } => "gd",
            Baseline::Adagrad { .. } => "adagrad",
            Baseline::Wngrad { .. } => "wngrad",
            Baseline::Bb {
                variant: BbVariant::Bb1,
                ..
            } => "bb1",
            Baseline::Bb {
                variant: BbVariant::Bb2,
                ..
            } => "bb2",
            Baseline::Hypergrad { .. } => "hypergrad",
        }
    }

    pub fn initial_rate(&self) -> f64 {
        match *self {
            Baseline::Gd { alpha } => alpha,
            Baseline::Adagrad { alpha0 } | Baseline::Wngrad { alpha0 } | Baseline::Hypergrad { alpha0, .. } => alpha0,
            Baseline::Bb { fallback_alpha, .. } => fallback_alpha,
        }
    }

    pub fn step(&self, state: &BaselineState, grad: &[f64]) -> Result<BaselineState> {
        match *self {
            Baseline::Gd { alpha } => gd_fixed_step(state, grad, alpha),
            Baseline::Adagrad { alpha0 } => adagrad_step(state, grad, alpha0),
            Baseline::Wngrad { alpha0 } => wngrad_step(state, grad, alpha0),
            Baseline::Bb { variant, fallback_alpha } => bb_step(state, grad, variant, fallback_alpha),
            Baseline::Hypergrad { alpha0, beta } => hypergradient_step(state, grad, beta, alpha0),
        }
    }

    /// BB needs secant pairs from exact gradients and is restricted to full-batch problems.
    pub fn supports_online(&self) -> bool {
        !matches!(self, Baseline::Bb { .. })
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for BbVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bb1" => Ok(BbVariant::Bb1),
            "bb2" => Ok(BbVariant::Bb2),
            _ => Err(Error::Config(format!("unknown BB variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaselineState {
    pub x: Vec<f64>,
    pub t: usize,
    /// Current rates: per coordinate for AdaGrad/WNGrad, a single value otherwise.
    /// Empty until the first step.
    pub alpha: Vec<f64>,
    /// AdaGrad: `1/α₀² + Σ g²`; WNGrad: `b_t = 1/α_t`.
    pub accum: Vec<f64>,
    pub prev_x: Option<Vec<f64>>,
    pub prev_grad: Option<Vec<f64>>,
}

impl BaselineState {
    pub fn new(x0: Vec<f64>) -> Self {
        BaselineState {
            x: x0,
            ..BaselineState::default()
        }
    }
}

fn check(state: &BaselineState, grad: &[f64]) -> Result<()> {
    check_len(state.x.len(), grad.len())?;
    if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient entry {bad}")));
    }
    Ok(())
}

fn advance(state: &BaselineState, grad: &[f64], alpha: Vec<f64>, accum: Vec<f64>) -> BaselineState {
    let x = state
        .x
        .iter()
        .zip(grad)
        .enumerate()
        .map(|(j, (x, g))| x - alpha[if alpha.len() == 1 { 0 } else { j }] * g)
        .collect();
    BaselineState {
        x,
        t: state.t + 1,
        alpha,
        accum,
        prev_x: Some(state.x.clone()),
        prev_grad: Some(grad.to_vec()),
    }
}

pub fn gd_fixed_step(state: &BaselineState, grad: &[f64], alpha: f64) -> Result<BaselineState> {
    check(state, grad)?;
    Ok(advance(state, grad, vec![alpha], Vec::new()))
}

/// `1/α²_{t+1} = 1/α²_t + g²_t` per coordinate, starting from `1/α₀²`.
pub fn adagrad_step(state: &BaselineState, grad: &[f64], alpha0: f64) -> Result<BaselineState> {
    check(state, grad)?;
    let accum: Vec<f64> = if state.accum.is_empty() {
        grad.iter().map(|g| 1.0 / (alpha0 * alpha0) + g * g).collect()
    } else {
        state.accum.iter().zip(grad).map(|(a, g)| a + g * g).collect()
    };
    let alpha = accum.iter().map(|a| 1.0 / a.sqrt()).collect();
    Ok(advance(state, grad, alpha, accum))
}

/// `1/α_{t+1} = 1/α_t + α_t g²_t` per coordinate.
pub fn wngrad_step(state: &BaselineState, grad: &[f64], alpha0: f64) -> Result<BaselineState> {
    check(state, grad)?;
    let prev: Vec<f64> = if state.accum.is_empty() {
        vec![1.0 / alpha0; grad.len()]
    } else {
        state.accum.clone()
    };
    let accum: Vec<f64> = prev.iter().zip(grad).map(|(b, g)| b + g * g / b).collect();
    let alpha = accum.iter().map(|b| 1.0 / b).collect();
    Ok(advance(state, grad, alpha, accum))
}

/// Barzilai–Borwein step with `s = x_t − x_{t−1}`, `y = g_t − g_{t−1}`.
pub fn bb_step(state: &BaselineState, grad: &[f64], variant: BbVariant, fallback_alpha: f64) -> Result<BaselineState> {
    check(state, grad)?;
    let alpha = match (&state.prev_x, &state.prev_grad) {
        (Some(px), Some(pg)) => {
            let (mut ss, mut sy, mut yy) = (0.0, 0.0, 0.0);
            for j in 0..grad.len() {
                let s = state.x[j] - px[j];
                let y = grad[j] - pg[j];
                ss += s * s;
                sy += s * y;
                yy += y * y;
            }
            let a = match variant {
                BbVariant::Bb1 => ss / sy,
                BbVariant::Bb2 => sy / yy,
            };
            if a > 0.0 && a.is_finite() {
                a
            } else {
                fallback_alpha
            }
        }
        _ => fallback_alpha,
    };
    Ok(advance(state, grad, vec![alpha], Vec::new()))
}

/// `α_{t+1} = α_t + β ⟨g_t, g_{t−1}⟩` with a global scalar rate.
pub fn hypergradient_step(state: &BaselineState, grad: &[f64], beta: f64, alpha0: f64) -> Result<BaselineState> {
    check(state, grad)?;
    if !(beta > 0.0) {
        return Err(Error::Config(format!("hypergradient beta must be positive, got {beta}")));
    }
    let prev_alpha = state.alpha.first().copied().unwrap_or(alpha0);
    let inner: f64 = state
        .prev_grad
        .as_ref()
        .map_or(0.0, |pg| pg.iter().zip(grad).map(|(a, b)| a * b).sum());
    let alpha = (prev_alpha + beta * inner).max(HYPERGRAD_FLOOR);
    Ok(advance(state, grad, vec![alpha], Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s0(x: &[f64]) -> BaselineState {
        BaselineState::new(x.to_vec())
    }

    #[test]
    fn adagrad_examples() {
        let s = adagrad_step(&s0(&[0.0]), &[1.0], 1.0).unwrap();
        assert!((s.alpha[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let s = adagrad_step(&s, &[1.0], 1.0).unwrap();
        assert!((s.alpha[0] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let before = s.alpha.clone();
        let s = adagrad_step(&s, &[0.0], 1.0).unwrap();
        assert_eq!(s.alpha, before);
    }

    #[test]
    fn wngrad_examples() {
        let s = wngrad_step(&s0(&[0.0]), &[1.0], 1.0).unwrap();
        assert!((s.alpha[0] - 0.5).abs() < 1e-15);
        let s = wngrad_step(&s0(&[0.0]), &[1.0], 2.0).unwrap();
        assert!((s.alpha[0] - 0.4).abs() < 1e-15);
        let before = s.alpha.clone();
        let s = wngrad_step(&s, &[0.0], 2.0).unwrap();
        assert_eq!(s.alpha, before);
    }

    #[test]
    fn bb_first_step_and_degenerate_fallback() {
        let s = bb_step(&s0(&[1.0]), &[1.0], BbVariant::Bb1, 0.1).unwrap();
        assert_eq!(s.alpha, vec![0.1]);
        // same gradient twice: ⟨s, y⟩ = 0
        let s = bb_step(&s, &[1.0], BbVariant::Bb1, 0.1).unwrap();
        assert_eq!(s.alpha, vec![0.1]);
        let s = bb_step(&s, &[1.0], BbVariant::Bb2, 0.1).unwrap();
        assert_eq!(s.alpha, vec![0.1]);
    }

    #[test]
    fn bb_on_identity_hessian_takes_newton_step() {
        // f(x) = x²/2: y = s, so both variants give α = 1 and land on 0
        for variant in [BbVariant::Bb1, BbVariant::Bb2] {
            let mut s = s0(&[3.0]);
            s = bb_step(&s, &s.x.clone(), variant, 0.25).unwrap();
            let g = s.x.clone();
            s = bb_step(&s, &g, variant, 0.25).unwrap();
            assert!((s.alpha[0] - 1.0).abs() < 1e-15);
            assert!(s.x[0].abs() < 1e-15);
        }
    }

    #[test]
    fn hypergradient_examples() {
        let s = hypergradient_step(&s0(&[0.0]), &[1.0], 0.1, 0.5).unwrap();
        assert_eq!(s.alpha, vec![0.5]);
        let s = hypergradient_step(&s, &[1.0], 0.1, 0.5).unwrap();
        assert!((s.alpha[0] - 0.6).abs() < 1e-15);
        let s2 = hypergradient_step(&s0(&[0.0, 0.0]), &[1.0, 0.0], 0.1, 0.5).unwrap();
        let s2 = hypergradient_step(&s2, &[0.0, 1.0], 0.1, 0.5).unwrap();
        assert_eq!(s2.alpha, vec![0.5]);
        // floored when the inner products are strongly negative
        let s3 = hypergradient_step(&s, &[-100.0], 0.1, 0.5).unwrap();
        assert_eq!(s3.alpha, vec![HYPERGRAD_FLOOR]);
    }

    #[test]
    fn gd_examples() {
        let s = gd_fixed_step(&s0(&[2.0]), &[2.0], 0.0).unwrap();
        assert_eq!(s.x, vec![2.0]);
        let s = gd_fixed_step(&s0(&[2.0]), &[2.0], 1.0).unwrap();
        assert_eq!(s.x, vec![0.0]);
        let mut s = s0(&[1.0]);
        for _ in 0..20 {
            let g = s.x.clone();
            s = gd_fixed_step(&s, &g, 2.5).unwrap();
        }
        assert!(s.x[0].abs() > 1e3);
    }

    #[test]
    fn ids_round_trip() {
        for id in Baseline::IDS {
            assert_eq!(Baseline::from_id(id, 0.1, 0.01).unwrap().id(), id);
        }
        assert!(Baseline::from_id("adam", 0.1, 0.01).is_err());
    }

    #[test]
    fn accumulators_are_monotone() {
        let mut a = s0(&[0.0, 0.0]);
        let mut w = s0(&[0.0, 0.0]);
        for k in 0..50 {
            let g = [(k as f64).sin(), (k as f64 * 0.3).cos()];
            let na = adagrad_step(&a, &g, 0.7).unwrap();
            let nw = wngrad_step(&w, &g, 0.7).unwrap();
            if k > 0 {
                for j in 0..2 {
                    assert!(na.accum[j] >= a.accum[j]);
                    assert!(nw.accum[j] >= w.accum[j] && nw.accum[j] > 0.0);
                }
            }
            a = na;
            w = nw;
        }
    }
}
