//! Safeguarded scalar root finding for the monotone rate equations.
//!
//! Every exact rate equation is rewritten in the ratio `r = β/β_t = α_t/α ≥ 1`
//! (with `β = 1/α`), where it takes the common form `r² φ'(r) = y` with a
//! left-hand side that is strictly increasing on `[1, ∞)` and vanishes at `r = 1`.

use crate::divergence::Divergence;
use crate::error::{Error, Result};

/// Gradients with `g² < G_SQ_ZERO` leave the rate untouched.
pub const G_SQ_ZERO: f64 = 1e-300;

const MAX_DOUBLINGS: usize = 64;

/// A continuous nondecreasing residual on a positive bracket.
pub struct RootProblem<'a> {
    pub residual: &'a dyn Fn(f64) -> f64,
    /// Derivative of the residual; Newton steps fall back to secant steps without it.
    pub derivative: Option<&'a dyn Fn(f64) -> f64>,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iter: usize,
}

impl<'a> RootProblem<'a> {
    pub fn new(residual: &'a dyn Fn(f64) -> f64, bracket_lo: f64, bracket_hi: f64) -> Self {
        RootProblem {
            residual,
            derivative: None,
            bracket_lo,
            bracket_hi,
            tol_abs: 1e-12,
            tol_rel: 1e-12,
            max_iter: 200,
        }
    }

    pub fn with_derivative(mut self, derivative: &'a dyn Fn(f64) -> f64) -> Self {
        self.derivative = Some(derivative);
        self
    }
}

fn eval(f: &dyn Fn(f64) -> f64, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_nan() {
        return Err(Error::Numeric(format!("residual is NaN at {x}")));
    }
    Ok(v)
}

/// Root of a nondecreasing residual by bisection with Newton (or secant)
/// acceleration, always kept inside the current sign-change bracket.
///
/// The bracket is first widened: the upper end doubles while the residual is
/// negative there, the lower end halves while the residual is positive there.
pub fn solve_monotone(problem: &RootProblem<'_>) -> Result<f64> {
    let f = problem.residual;
    let (mut lo, mut hi) = (problem.bracket_lo, problem.bracket_hi);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    let mut f_lo = eval(f, lo)?;
    let mut f_hi = eval(f, hi)?;

    let mut doublings = 0;
    while f_hi < 0.0 {
        if doublings == MAX_DOUBLINGS {
            return Err(Error::NoRoot { lo, hi });
        }
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = eval(f, hi)?;
        doublings += 1;
    }
    let mut halvings = 0;
    while f_lo > 0.0 {
        if halvings == MAX_DOUBLINGS {
            return Err(Error::NoRoot { lo, hi });
        }
        hi = lo;
        f_hi = f_lo;
        lo *= 0.5;
        f_lo = eval(f, lo)?;
        halvings += 1;
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }

    let mut x = 0.5 * (lo + hi);
    let mut best = (x, f64::INFINITY);
    let mut width_before_last = f64::INFINITY;
    for _ in 0..problem.max_iter {
        let fx = eval(f, x)?;
        if fx.abs() < best.1 {
            best = (x, fx.abs());
        }
        if fx.abs() <= problem.tol_abs {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
        let width = hi - lo;
        if width <= problem.tol_rel * x.abs() {
            return Ok(x);
        }

        let candidate = match problem.derivative {
            Some(df) => {
                let d = df(x);
                if d > 0.0 && d.is_finite() {
                    x - fx / d
                } else {
                    f64::NAN
                }
            }
            None => lo - f_lo * (hi - lo) / (f_hi - f_lo),
        };
        // interpolation is accepted while it lands strictly inside the bracket
        // and the bracket keeps at least halving every other step
        let stalled = width > 0.5 * width_before_last;
        width_before_last = width;
        if candidate > lo && candidate < hi && !stalled {
            if (candidate - x).abs() <= problem.tol_rel * candidate.abs() {
                return Ok(candidate);
            }
            x = candidate;
        } else {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi });
            }
            x = mid;
            width_before_last = f64::INFINITY;
        }
    }
    Err(Error::NoConvergence {
        iterations: problem.max_iter,
        best: best.0,
    })
}

/// Solves `r² φ'(r) = y` for the ratio `r ≥ 1`.
pub fn solve_ratio(spec: &Divergence, y: f64) -> Result<f64> {
    if !(y >= 0.0) || y.is_infinite() {
        return Err(Error::Numeric(format!("rate equation right-hand side {y} is not finite and nonnegative")));
    }
    if y == 0.0 {
        return Ok(1.0);
    }
    let residual = |r: f64| r * r * spec.phi_prime(r) - y;
    let tol_abs = 1e-15 * y.max(1.0);
    let newton;
    let mut problem = RootProblem::new(&residual, 1.0, 2.0);
    if spec.phi_second(1.0).is_some() {
        newton = |r: f64| 2.0 * r * spec.phi_prime(r) + r * r * spec.phi_second(r).unwrap_or(f64::NAN);
        problem = problem.with_derivative(&newton);
    }
    problem.tol_abs = tol_abs;
    problem.tol_rel = 1e-15;
    problem.max_iter = 400;
    solve_monotone(&problem)
}

/// Exact per-coordinate rate: the unique `α ∈ (0, η]` with `φ'(η/α) = α² g²`.
pub fn solve_exact_rate(spec: &Divergence, eta: f64, g_sq: f64) -> Result<f64> {
    check_rate_args(eta, g_sq)?;
    if g_sq < G_SQ_ZERO {
        return Ok(eta);
    }
    let r = solve_ratio(spec, eta * eta * g_sq)?;
    Ok(eta / r)
}

/// Exact strongly convex rate: the unique `α ∈ (0, α_t]` with
/// `λ (α_t/α²) φ'(α_t/α) = g²`.
pub fn solve_sc_exact_rate(spec: &Divergence, alpha_t: f64, g_sq: f64, lambda: f64) -> Result<f64> {
    check_rate_args(alpha_t, g_sq)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if g_sq < G_SQ_ZERO {
        return Ok(alpha_t);
    }
    let r = solve_ratio(spec, alpha_t * g_sq / lambda)?;
    Ok(alpha_t / r)
}

fn check_rate_args(rate: f64, g_sq: f64) -> Result<()> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Domain(format!("rate must be positive and finite, got {rate}")));
    }
    if !(g_sq >= 0.0 && g_sq.is_finite()) {
        return Err(Error::Numeric(format!("squared gradient must be finite and nonnegative, got {g_sq}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{Builtin, Divergence};

    fn solve(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        solve_monotone(&RootProblem::new(f, lo, hi)).unwrap()
    }

    /// Real root of `a x³ + c x + e = 0` with `a, c > 0` (single real root), by Cardano.
    fn depressed_cubic_root(a: f64, c: f64, e: f64) -> f64 {
        let p = c / a;
        let q = e / a;
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        let s = disc.sqrt();
        (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()
    }

    #[test]
    fn monotone_examples() {
        assert!((solve(&|x| x - 3.0, 1.0, 10.0) - 3.0).abs() < 1e-12);
        assert!((solve(&|x| x * x - 2.0, 1e-3, 2.0) - 2f64.sqrt()).abs() < 1e-11);
        assert!((solve(&|x: f64| x.ln(), 0.1, 10.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_expands_both_ways() {
        assert!((solve(&|x| x - 1000.0, 1.0, 2.0) - 1000.0).abs() < 1e-9);
        assert!((solve(&|x| x - 1e-3, 1.0, 2.0) - 1e-3).abs() < 1e-14);
    }

    #[test]
    fn newton_and_secant_agree() {
        let f = |x: f64| x.powi(3) + x - 5.0;
        let df = |x: f64| 3.0 * x * x + 1.0;
        let p = RootProblem::new(&f, 1.0, 2.0).with_derivative(&df);
        let a = solve_monotone(&p).unwrap();
        let b = solve(&f, 1.0, 2.0);
        assert!((a - b).abs() < 1e-11);
        assert!(f(a).abs() < 1e-10);
    }

    #[test]
    fn no_root_after_64_doublings() {
        let r = solve_monotone(&RootProblem::new(&|_x| -1.0, 1.0, 2.0));
        assert!(matches!(r, Err(Error::NoRoot { .. })));
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let f = |x: f64| x.powi(5) - 10.0;
        let mut p = RootProblem::new(&f, 1.0, 4.0);
        p.max_iter = 3;
        p.tol_abs = 0.0;
        p.tol_rel = 0.0;
        match solve_monotone(&p) {
            Err(Error::NoConvergence { iterations, best }) => {
                assert_eq!(iterations, 3);
                assert!((1.0..=4.0).contains(&best));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_bracket() {
        assert!(matches!(
            solve_monotone(&RootProblem::new(&|x| x, -1.0, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_gradient_returns_eta() {
        for kind in Builtin::ALL {
            let d = Divergence::builtin(kind);
            assert_eq!(solve_exact_rate(&d, 0.7, 0.0).unwrap(), 0.7);
            assert_eq!(solve_exact_rate(&d, 0.7, 1e-301).unwrap(), 0.7);
            assert_eq!(solve_sc_exact_rate(&d, 1.0, 0.0, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn adagrad_exact_rate() {
        let d = Divergence::builtin(Builtin::Adagrad);
        let a = solve_exact_rate(&d, 1.0, 1.0).unwrap();
        assert!((a - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn chi2_exact_rate_matches_cubic_oracle() {
        // 2(1/α - 1) = α²  <=>  α³ + 2α - 2 = 0
        let oracle = depressed_cubic_root(1.0, 2.0, -2.0);
        assert!((oracle.powi(3) + 2.0 * oracle - 2.0).abs() < 1e-13);
        assert!((oracle - 0.770_916_997_059_248_2).abs() < 1e-12);
        let d = Divergence::builtin(Builtin::Chi2);
        let a = solve_exact_rate(&d, 1.0, 1.0).unwrap();
        assert!((a - oracle).abs() < 1e-13, "{a} vs {oracle}");
    }

    #[test]
    fn chi2_sc_rate_matches_cubic_oracle() {
        let d = Divergence::builtin(Builtin::Chi2);
        // λ = 1, g² = 2:  (1 - α)/α³ = 1  <=>  α³ + α - 1 = 0
        let oracle = depressed_cubic_root(1.0, 1.0, -1.0);
        assert!((oracle - 0.682_327_803_828_019_3).abs() < 1e-12);
        let a = solve_sc_exact_rate(&d, 1.0, 2.0, 1.0).unwrap();
        assert!((a - oracle).abs() < 1e-13, "{a} vs {oracle}");
        // λ = 2, g² = 2:  (1 - α)/α³ = 1/2  <=>  α³ + 2α - 2 = 0
        let oracle = depressed_cubic_root(1.0, 2.0, -2.0);
        let a = solve_sc_exact_rate(&d, 1.0, 2.0, 2.0).unwrap();
        assert!((a - oracle).abs() < 1e-13, "{a} vs {oracle}");
    }

    #[test]
    fn wngrad_exact_rate_is_linear_in_beta() {
        // φ'(η/α) = α² g²  <=>  1/α = 1/η + η g²
        let d = Divergence::builtin(Builtin::Wngrad);
        for &(eta, g_sq) in &[(1.0, 1.0), (2.0, 1.0), (0.1, 400.0), (5.0, 3.0)] {
            let a = solve_exact_rate(&d, eta, g_sq).unwrap();
            let expected = 1.0 / (1.0 / eta + eta * g_sq);
            assert!((a - expected).abs() < 1e-14 * expected.max(1e-300) * 10.0, "{a} vs {expected}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let d = Divergence::builtin(Builtin::Kl);
        assert!(solve_exact_rate(&d, 0.0, 1.0).is_err());
        assert!(solve_exact_rate(&d, 1.0, f64::NAN).is_err());
        assert!(solve_exact_rate(&d, 1.0, -1.0).is_err());
        assert!(solve_sc_exact_rate(&d, 1.0, 1.0, 0.0).is_err());
    }
}
