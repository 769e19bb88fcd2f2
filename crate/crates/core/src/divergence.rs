//! φ-divergence generators.
//!
//! A generator is a convex `φ: (0, ∞) → ℝ` with `φ(1) = φ'(1) = 0`. It induces
//! the divergence `D_φ(u, v) = Σ_j φ(v_j / u_j) / v_j` on positive vectors and the
//! unweighted distance `Σ_j φ(v_j / u_j)` used by the strongly convex variants.
//!
//! The update rules only ever evaluate `φ'` on ratios `z ≥ 1` (learning rates are
//! nonincreasing), so the inverse derivative is defined on the branch `[1, ∞)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::solver::{solve_monotone, RootProblem};

/// Built-in generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    Kl,
    Rkl,
    Hellinger,
    Chi2,
    Adagrad,
    Wngrad,
}

impl Builtin {
    pub const ALL: [Builtin; 6] = [
        Builtin::Kl,
        Builtin::Rkl,
        Builtin::Hellinger,
        Builtin::Chi2,
        Builtin::Adagrad,
        Builtin::Wngrad,
    ];

    /// The four generators used in the benchmark experiments.
    pub const EXPERIMENT: [Builtin; 4] = [Builtin::Kl, Builtin::Rkl, Builtin::Hellinger, Builtin::Chi2];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Kl => "kl",
            Builtin::Rkl => "rkl",
            Builtin::Hellinger => "hellinger",
            Builtin::Chi2 => "chi2",
            Builtin::Adagrad => "adagrad",
            Builtin::Wngrad => "wngrad",
        }
    }

    fn phi(self, t: f64) -> f64 {
        match self {
            Builtin::Kl => t * t.ln() - t + 1.0,
            Builtin::Rkl => -t.ln() + t - 1.0,
            Builtin::Hellinger => {
                let s = t.sqrt() - 1.0;
                s * s
            }
            Builtin::Chi2 => (t - 1.0) * (t - 1.0),
            Builtin::Adagrad => t + 1.0 / t - 2.0,
            Builtin::Wngrad => 1.0 / t + t.ln() - 1.0,
        }
    }

    fn phi_prime(self, t: f64) -> f64 {
        match self {
            Builtin::Kl => t.ln(),
            Builtin::Rkl => 1.0 - 1.0 / t,
            Builtin::Hellinger => 1.0 - 1.0 / t.sqrt(),
            Builtin::Chi2 => 2.0 * (t - 1.0),
            Builtin::Adagrad => 1.0 - 1.0 / (t * t),
            Builtin::Wngrad => (t - 1.0) / (t * t),
        }
    }

    fn phi_second(self, t: f64) -> f64 {
        match self {
            Builtin::Kl => 1.0 / t,
            Builtin::Rkl => 1.0 / (t * t),
            Builtin::Hellinger => 0.5 * t.powf(-1.5),
            Builtin::Chi2 => 2.0,
            Builtin::Adagrad => 2.0 / (t * t * t),
            Builtin::Wngrad => (2.0 - t) / (t * t * t),
        }
    }

    /// Supremum of `φ'` over the inverse branch.
    fn range_sup(self) -> f64 {
        match self {
            Builtin::Kl | Builtin::Chi2 => f64::INFINITY,
            Builtin::Rkl | Builtin::Hellinger | Builtin::Adagrad => 1.0,
            Builtin::Wngrad => 0.25,
        }
    }

    /// Largest ratio on which `φ'` is inverted.
    fn branch_max(self) -> f64 {
        match self {
            Builtin::Wngrad => 2.0,
            _ => f64::INFINITY,
        }
    }

    fn phi_prime_inverse(self, y: f64) -> f64 {
        match self {
            Builtin::Kl => y.exp(),
            Builtin::Rkl => 1.0 / (1.0 - y),
            Builtin::Hellinger => {
                let s = 1.0 - y;
                1.0 / (s * s)
            }
            Builtin::Chi2 => 0.5 * y + 1.0,
            Builtin::Adagrad => 1.0 / (1.0 - y).sqrt(),
            // smaller root of y t^2 - t + 1 = 0, written without cancellation
            Builtin::Wngrad => 2.0 / (1.0 + (1.0 - 4.0 * y).max(0.0).sqrt()),
        }
    }

    /// `inf φ''` over `[1, z_max]`.
    fn gamma_on(self, z_max: f64) -> f64 {
        let z = z_max.max(1.0);
        match self {
            Builtin::Chi2 => 2.0,
            Builtin::Wngrad => {
                if z >= 2.0 {
                    0.0
                } else {
                    (2.0 - z) / (z * z * z)
                }
            }
            _ => self.phi_second(z),
        }
    }

    /// `sup φ''` over `[1, ∞)` (the wngrad value is taken on its branch `[1, 2]`).
    fn smoothness(self) -> f64 {
        match self {
            Builtin::Kl | Builtin::Rkl | Builtin::Wngrad => 1.0,
            Builtin::Hellinger => 0.5,
            Builtin::Chi2 | Builtin::Adagrad => 2.0,
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown divergence `{s}`")))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
struct Custom {
    phi: ScalarFn,
    phi_prime: ScalarFn,
    phi_second: Option<ScalarFn>,
    phi_prime_inverse: Option<ScalarFn>,
    gamma: f64,
    smoothness: f64,
}

#[derive(Clone)]
enum Generator {
    Builtin(Builtin),
    Custom(Custom),
}

/// A φ-divergence generator with its derivative, inverse derivative and the
/// curvature constants used by the regret bounds.
#[derive(Clone)]
pub struct Divergence {
    name: String,
    generator: Generator,
}

impl fmt::Debug for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Divergence").field("name", &self.name).finish()
    }
}

impl Divergence {
    pub fn builtin(kind: Builtin) -> Self {
        Divergence {
            name: kind.name().to_string(),
            generator: Generator::Builtin(kind),
        }
    }

    /// Look up a built-in generator by identifier.
    pub fn make_builtin(name: &str) -> Result<Self> {
        name.parse::<Builtin>().map(Divergence::builtin)
    }

    /// Start building a user-supplied generator from `φ` and `φ'`.
    pub fn custom<F, G>(name: impl Into<String>, phi: F, phi_prime: G) -> CustomBuilder
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        CustomBuilder {
            name: name.into(),
            custom: Custom {
                phi: Arc::new(phi),
                phi_prime: Arc::new(phi_prime),
                phi_second: None,
                phi_prime_inverse: None,
                gamma: f64::NAN,
                smoothness: f64::NAN,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn as_builtin(&self) -> Option<Builtin> {
        match &self.generator {
            Generator::Builtin(b) => Some(*b),
            Generator::Custom(_) => None,
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        match &self.generator {
            Generator::Builtin(b) => b.phi(t),
            Generator::Custom(c) => (c.phi)(t),
        }
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        match &self.generator {
            Generator::Builtin(b) => b.phi_prime(t),
            Generator::Custom(c) => (c.phi_prime)(t),
        }
    }

    /// Analytic `φ''` when available.
    pub fn phi_second(&self, t: f64) -> Option<f64> {
        match &self.generator {
            Generator::Builtin(b) => Some(b.phi_second(t)),
            Generator::Custom(c) => c.phi_second.as_ref().map(|f| f(t)),
        }
    }

    /// Supremum of `φ'` over the inverse branch; arguments at or above it have no preimage.
    pub fn range_sup(&self) -> f64 {
        match &self.generator {
            Generator::Builtin(b) => b.range_sup(),
            Generator::Custom(_) => f64::INFINITY,
        }
    }

    /// Upper end of the ratio interval on which `φ'` is inverted (2 for wngrad).
    pub fn branch_max(&self) -> f64 {
        match &self.generator {
            Generator::Builtin(b) => b.branch_max(),
            Generator::Custom(_) => f64::INFINITY,
        }
    }

    /// `(φ')⁻¹(y)` restricted to ratios `z ≥ 1`.
    pub fn phi_prime_inverse(&self, y: f64) -> Result<f64> {
        let sup = self.range_sup();
        // the wngrad branch attains its supremum at z = 2
        let attained = self.branch_max().is_finite();
        let in_range = y >= 0.0 && (y < sup || (attained && y <= sup));
        if !in_range {
            return Err(Error::OutOfRange {
                divergence: self.name.clone(),
                arg: y,
                sup,
            });
        }
        match &self.generator {
            Generator::Builtin(b) => Ok(b.phi_prime_inverse(y)),
            Generator::Custom(c) => match &c.phi_prime_inverse {
                Some(inv) => Ok(inv(y)),
                None => {
                    if y == 0.0 {
                        return Ok(1.0);
                    }
                    let phi_prime = c.phi_prime.clone();
                    let residual = move |z: f64| phi_prime(z) - y;
                    let mut problem = RootProblem::new(&residual, 1.0, 2.0);
                    problem.tol_rel = 1e-15;
                    solve_monotone(&problem)
                }
            },
        }
    }

    /// Strong-convexity constant of `φ` on `[1, z_max]`.
    ///
    /// For kl, rkl, hellinger, adagrad and wngrad the curvature decays, so the value
    /// depends on the ratio bound; growth clipping with factor `c` gives `z_max = 1/c`.
    pub fn gamma(&self, z_max: f64) -> f64 {
        match &self.generator {
            Generator::Builtin(b) => b.gamma_on(z_max),
            Generator::Custom(c) => c.gamma,
        }
    }

    /// Lipschitz constant of `φ'` on `[1, ∞)`.
    pub fn smoothness(&self) -> f64 {
        match &self.generator {
            Generator::Builtin(b) => b.smoothness(),
            Generator::Custom(c) => c.smoothness,
        }
    }

    /// `D_φ(u, v) = Σ_j φ(v_j / u_j) / v_j`.
    pub fn d_phi(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_positive_pair(u, v)?;
        Ok(u.iter().zip(v).map(|(&a, &b)| self.phi(b / a) / b).sum())
    }

    /// `Σ_j φ(v_j / u_j)`, the distance used by the strongly convex rules.
    pub fn sc_distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_positive_pair(u, v)?;
        Ok(u.iter().zip(v).map(|(&a, &b)| self.phi(b / a)).sum())
    }
}

fn check_positive_pair(u: &[f64], v: &[f64]) -> Result<()> {
    check_len(u.len(), v.len())?;
    if let Some(bad) = u.iter().chain(v).find(|&&z| !(z > 0.0 && z.is_finite())) {
        return Err(Error::Domain(format!("entries must be positive and finite, got {bad}")));
    }
    Ok(())
}

pub struct CustomBuilder {
    name: String,
    custom: Custom,
}

impl CustomBuilder {
    pub fn phi_second<F>(mut self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.custom.phi_second = Some(Arc::new(f));
        self
    }

    pub fn phi_prime_inverse<F>(mut self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.custom.phi_prime_inverse = Some(Arc::new(f));
        self
    }

    pub fn constants(mut self, gamma: f64, smoothness: f64) -> Self {
        self.custom.gamma = gamma;
        self.custom.smoothness = smoothness;
        self
    }

    /// Validates the generator at a few sample points and returns it.
    pub fn build(self) -> Result<Divergence> {
        let c = &self.custom;
        let at_one = ((c.phi)(1.0), (c.phi_prime)(1.0));
        if at_one.0.abs() > 1e-12 || at_one.1.abs() > 1e-12 {
            return Err(Error::Config(format!(
                "divergence `{}` must satisfy phi(1) = phi'(1) = 0, got ({}, {})",
                self.name, at_one.0, at_one.1
            )));
        }
        let (g, l) = (c.gamma, c.smoothness);
        if (!g.is_nan() || !l.is_nan()) && !(g > 0.0 && l >= g) {
            return Err(Error::Config(format!(
                "divergence `{}` needs 0 < gamma <= l, got gamma={g}, l={l}",
                self.name
            )));
        }
        Ok(Divergence {
            name: self.name,
            generator: Generator::Custom(self.custom),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(name: &str) -> Divergence {
        Divergence::make_builtin(name).unwrap()
    }

    #[test]
    fn builtin_examples() {
        assert_eq!(b("chi2").phi(1.0), 0.0);
        assert!((b("kl").phi_prime(2.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((b("adagrad").phi_prime_inverse(0.75).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(
            b("rkl").phi_prime_inverse(1.2),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(Divergence::make_builtin("tsallis"), Err(Error::Config(_))));
    }

    #[test]
    fn generators_vanish_at_one() {
        for kind in Builtin::ALL {
            let d = Divergence::builtin(kind);
            assert_eq!(d.phi(1.0), 0.0, "{kind}");
            assert_eq!(d.phi_prime(1.0), 0.0, "{kind}");
            assert_eq!(d.phi_prime_inverse(0.0).unwrap(), 1.0, "{kind}");
        }
    }

    #[test]
    fn d_phi_examples() {
        assert_eq!(b("chi2").d_phi(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!((b("chi2").d_phi(&[0.5], &[1.0]).unwrap() - 1.0).abs() < 1e-15);
        let expected = 0.5 * (2.0 * std::f64::consts::LN_2 - 1.0);
        assert!((b("kl").d_phi(&[1.0], &[2.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn sc_distance_examples() {
        assert_eq!(b("chi2").sc_distance(&[3.0, 3.0], &[3.0, 3.0]).unwrap(), 0.0);
        assert!((b("chi2").sc_distance(&[1.0], &[2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((b("hellinger").sc_distance(&[1.0], &[4.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_errors() {
        assert!(matches!(b("kl").d_phi(&[1.0], &[1.0, 2.0]), Err(Error::Shape { .. })));
        assert!(matches!(b("kl").d_phi(&[0.0], &[1.0]), Err(Error::Domain(_))));
        assert!(matches!(b("kl").sc_distance(&[1.0], &[-2.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_rejects_negative_and_range_edges() {
        assert!(b("kl").phi_prime_inverse(-1e-3).is_err());
        assert!(b("hellinger").phi_prime_inverse(1.0).is_err());
        assert!(b("adagrad").phi_prime_inverse(1.0).is_err());
        assert!((b("wngrad").phi_prime_inverse(0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!(b("wngrad").phi_prime_inverse(0.2500001).is_err());
    }

    #[test]
    fn gamma_matches_decaying_curvature() {
        assert_eq!(b("kl").gamma(4.0), 0.25);
        assert_eq!(b("rkl").gamma(2.0), 0.25);
        assert!((b("hellinger").gamma(4.0) - 0.5 / 8.0).abs() < 1e-15);
        assert_eq!(b("chi2").gamma(1e9), 2.0);
        assert_eq!(b("wngrad").gamma(2.0), 0.0);
        for kind in Builtin::ALL {
            let d = Divergence::builtin(kind);
            assert!(d.smoothness() >= d.gamma(1.0), "{kind}");
        }
    }

    #[test]
    fn custom_inverse_defaults_to_root_solver() {
        // chi2 re-entered without an inverse
        let d = Divergence::custom("mychi2", |t| (t - 1.0) * (t - 1.0), |t| 2.0 * (t - 1.0))
            .constants(2.0, 2.0)
            .build()
            .unwrap();
        for y in [0.0, 0.3, 1.0, 7.5, 100.0] {
            let z = d.phi_prime_inverse(y).unwrap();
            assert!((z - (0.5 * y + 1.0)).abs() < 1e-12 * z, "y={y} z={z}");
        }
        assert_eq!(d.gamma(10.0), 2.0);
    }

    #[test]
    fn custom_rejects_bad_normalisation() {
        let r = Divergence::custom("shifted", |t| t * t, |t| 2.0 * t).build();
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn adagrad_update_equation_is_the_accumulator_recurrence() {
        // phi'(eta/alpha) = alpha^2 g^2  <=>  1/alpha^2 = 1/eta^2 + g^2
        let d = b("adagrad");
        for &(eta, g) in &[(1.0, 1.0), (0.3, 2.5), (4.0, 0.1), (0.05, 30.0)] {
            let alpha: f64 = 1.0 / (1.0f64 / (eta * eta) + g * g).sqrt();
            let lhs = d.phi_prime(eta / alpha);
            let rhs = alpha * alpha * g * g;
            assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0), "eta={eta} g={g}");
        }
    }
}
