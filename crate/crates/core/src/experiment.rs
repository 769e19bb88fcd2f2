//! Experiment configuration, single runs and grids for the `metareg` CLI.
//!
//! A configuration is a plain `key = value` file; command-line flags use the same
//! keys and override the file. List-valued keys take comma-separated values and
//! `alpha0` also accepts a log-spaced sweep `lo:hi:count`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::Baseline;
use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::metrics::{
    bound_log_curve, bound_thm5_curve, min_grad_norm, regret_curve, steps_to_eps, RunRecord, ScRule, Thm5Rule,
};
use crate::optimizer::{OptimizerConfig, RuleVariant};
use crate::problems::{load_csv_dataset, make_logistic, make_quadratic, Logistic, Objective, ProblemInstance};
use crate::runner::{run_method, Method};
use crate::svg::{render, Panel, Series};

pub const DEFAULT_EPS: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic {
        d: usize,
        mu_min: f64,
        mu_max: f64,
        samples: usize,
        noise: f64,
        seed: u64,
    },
    Logistic {
        n: usize,
        d: usize,
        c: f64,
        scale: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        c: f64,
    },
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::Quadratic {
            d: 2,
            mu_min: 0.1,
            mu_max: 1.0,
            samples: 1,
            noise: 0.0,
            seed: 0,
        }
    }
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("invalid value for `{field}`: {msg}"))
}

fn wrap(field: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => field_err(field, m),
        other => field_err(field, other),
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| field_err(field, format!("`{v}` ({e})")))
}

impl ProblemSpec {
    /// `quadratic[:d=5,mu_min=0.1,mu_max=1,samples=100,noise=1,seed=0]`,
    /// `logistic[:n=2000,d=20,c=0.01,scale=10,seed=0]` or `csv:PATH[,c=0.01]`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut spec = match kind {
            "quadratic" => ProblemSpec::default(),
            "logistic" => ProblemSpec::Logistic {
                n: 2000,
                d: 20,
                c: 1e-2,
                scale: 1.0,
                seed: 0,
            },
            "csv" => ProblemSpec::Csv {
                path: PathBuf::new(),
                c: 1e-2,
            },
            other => return Err(field_err("problem", format!("unknown kind `{other}`"))),
        };
        for item in rest.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let Some((k, v)) = item.split_once('=') else {
                if let ProblemSpec::Csv { path, .. } = &mut spec {
                    *path = PathBuf::from(item);
                    continue;
                }
                return Err(field_err("problem", format!("expected key=value, got `{item}`")));
            };
            let field = format!("problem.{}", k.trim());
            match (&mut spec, k.trim()) {
                (ProblemSpec::Quadratic { d, .. }, "d") | (ProblemSpec::Logistic { d, .. }, "d") => *d = parse_num(&field, v)?,
                (ProblemSpec::Quadratic { mu_min, .. }, "mu_min") => *mu_min = parse_num(&field, v)?,
                (ProblemSpec::Quadratic { mu_max, .. }, "mu_max") => *mu_max = parse_num(&field, v)?,
                (ProblemSpec::Quadratic { samples, .. }, "samples") => *samples = parse_num(&field, v)?,
                (ProblemSpec::Quadratic { noise, .. }, "noise") => *noise = parse_num(&field, v)?,
                (ProblemSpec::Quadratic { seed, .. }, "seed") | (ProblemSpec::Logistic { seed, .. }, "seed") => {
                    *seed = parse_num(&field, v)?
                }
                (ProblemSpec::Logistic { n, .. }, "n") => *n = parse_num(&field, v)?,
                (ProblemSpec::Logistic { c, .. }, "c") | (ProblemSpec::Csv { c, .. }, "c") => *c = parse_num(&field, v)?,
                (ProblemSpec::Logistic { scale, .. }, "scale") => *scale = parse_num(&field, v)?,
                (ProblemSpec::Csv { path, .. }, "path") => *path = PathBuf::from(v.trim()),
                _ => return Err(field_err("problem", format!("unknown key `{}` for {kind}", k.trim()))),
            }
        }
        if let ProblemSpec::Csv { path, .. } = &spec {
            if path.as_os_str().is_empty() {
                return Err(field_err("problem", "csv needs a path"));
            }
        }
        Ok(spec)
    }

    pub fn build(&self, batch_size: Option<usize>) -> Result<ProblemInstance> {
        let objective = match self {
            ProblemSpec::Quadratic {
                d,
                mu_min,
                mu_max,
                samples,
                noise,
                seed,
            } => {
                let q = make_quadratic(*d, *mu_min, *mu_max, *seed)?;
                let q = if *samples > 1 { q.with_sample_noise(*samples, *noise, seed + 1)? } else { q };
                Objective::Quadratic(q)
            }
            ProblemSpec::Logistic { n, d, c, scale, seed } => Objective::Logistic(make_logistic(*n, *d, *c, *scale, *seed)?),
            ProblemSpec::Csv { path, c } => {
                let (x, y) = load_csv_dataset(path)?;
                Objective::Logistic(Logistic::new(x, y, *c)?)
            }
        };
        match batch_size {
            None => Ok(ProblemInstance::full_batch(objective)),
            Some(b) => ProblemInstance::online(objective, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `metareg` or one of the baseline identifiers.
    pub methods: Vec<String>,
    pub divergences: Vec<String>,
    pub rules: Vec<RuleVariant>,
    pub alpha0: Vec<f64>,
    pub lambda: Option<f64>,
    pub clip_factor: Option<f64>,
    /// Hypergradient learning rate.
    pub beta: f64,
    pub problem: ProblemSpec,
    pub batch_size: Option<usize>,
    pub epochs: usize,
    /// Number of steps; overrides `epochs` when set.
    pub horizon: Option<usize>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec!["metareg".into()],
            divergences: vec!["chi2".into()],
            rules: vec![RuleVariant::Alternating],
            alpha0: vec![0.5],
            lambda: None,
            clip_factor: Some(0.5),
            beta: 1e-3,
            problem: ProblemSpec::default(),
            batch_size: None,
            epochs: 100,
            horizon: None,
            seeds: vec![0],
            out: PathBuf::from("out"),
            eps: DEFAULT_EPS,
        }
    }
}

fn list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// `lo:hi:count` log-spaced values, or a comma-separated list.
pub fn parse_sweep(field: &str, v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    let values = if parts.len() == 3 {
        let lo: f64 = parse_num(field, parts[0])?;
        let hi: f64 = parse_num(field, parts[1])?;
        let n: usize = parse_num(field, parts[2])?;
        if !(lo > 0.0 && hi >= lo) {
            return Err(field_err(field, "sweep needs 0 < lo <= hi"));
        }
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n)
                .map(|k| match k {
                    0 => lo,
                    _ if k == n - 1 => hi,
                    _ => lo * (hi / lo).powf(k as f64 / (n - 1) as f64),
                })
                .collect(),
        }
    } else {
        list(v).into_iter().map(|s| parse_num(field, s)).collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(field_err(field, "sweep is empty"));
    }
    Ok(values)
}

fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for item in list(v) {
        if let Some((a, b)) = item.split_once("..") {
            let a: u64 = parse_num("seed", a)?;
            let b: u64 = parse_num("seed", b)?;
            seeds.extend(a..b);
        } else {
            seeds.push(parse_num("seed", item)?);
        }
    }
    Ok(seeds)
}

impl ExperimentConfig {
    /// Sets one key. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "method" | "methods" => self.methods = list(v).into_iter().map(str::to_ascii_lowercase).collect(),
            "divergence" | "divergences" => self.divergences = list(v).into_iter().map(str::to_ascii_lowercase).collect(),
            "rule" | "rules" => {
                self.rules = list(v)
                    .into_iter()
                    .map(|r| r.parse().map_err(|e| wrap("rule", e)))
                    .collect::<Result<_>>()?
            }
            "alpha0" => self.alpha0 = parse_sweep("alpha0", v)?,
            "lambda" => {
                self.lambda = match v {
                    "" | "none" => None,
                    _ => Some(parse_num("lambda", v)?),
                }
            }
            "clip_factor" => {
                self.clip_factor = match v {
                    "none" | "off" => None,
                    _ => Some(parse_num("clip_factor", v)?),
                }
            }
            "beta" => self.beta = parse_num("beta", v)?,
            "problem" => self.problem = ProblemSpec::parse(v)?,
            "batch_size" => {
                self.batch_size = match v {
                    "" | "full" | "none" => None,
                    _ => Some(parse_num("batch_size", v)?),
                }
            }
            "epochs" => self.epochs = parse_num("epochs", v)?,
            "horizon" => self.horizon = Some(parse_num("horizon", v)?),
            "seed" | "seeds" => self.seeds = parse_seeds(v)?,
            "out" => self.out = PathBuf::from(v),
            "eps" => self.eps = parse_num("eps", v)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(field_err("method", "no method given"));
        }
        for m in &self.methods {
            if m != "metareg" && !Baseline::IDS.contains(&m.as_str()) {
                return Err(field_err("method", format!("unknown method `{m}`")));
            }
        }
        if self.methods.iter().any(|m| m == "metareg") {
            if self.divergences.is_empty() {
                return Err(field_err("divergence", "no divergence given"));
            }
            for d in &self.divergences {
                Divergence::make_builtin(d).map_err(|e| wrap("divergence", e))?;
            }
            if self.rules.is_empty() {
                return Err(field_err("rule", "no rule given"));
            }
            if self.rules.iter().any(|r| r.is_sc()) && self.lambda.is_none() {
                return Err(field_err("lambda", "strongly convex rules need lambda"));
            }
        }
        if self.alpha0.is_empty() || self.alpha0.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(field_err("alpha0", "values must be positive"));
        }
        if let Some(c) = self.clip_factor {
            if !(c > 0.0 && c <= 1.0) {
                return Err(field_err("clip_factor", format!("{c} is outside (0, 1]")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(field_err("lambda", format!("{l} must be positive")));
            }
        }
        if self.seeds.is_empty() {
            return Err(field_err("seed", "no seed given"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(field_err("seed", "seeds must be distinct"));
        }
        if self.batch_size == Some(0) {
            return Err(field_err("batch_size", "must be at least 1"));
        }
        if self.horizon == Some(0) || (self.horizon.is_none() && self.epochs == 0) {
            return Err(field_err("horizon", "must be at least 1"));
        }
        Ok(())
    }

    /// Steps to run on `problem`: `horizon`, or `epochs` passes over the data.
    pub fn steps(&self, problem: &ProblemInstance) -> usize {
        if let Some(h) = self.horizon {
            return h;
        }
        match problem.batch_size() {
            None => self.epochs,
            Some(b) => self.epochs * problem.objective().n_samples().div_ceil(b),
        }
    }

    /// Every (method, divergence, rule, α₀, seed) combination.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for m in &self.methods {
            let variants: Vec<(Option<String>, Option<RuleVariant>)> = if m == "metareg" {
                self.divergences
                    .iter()
                    .flat_map(|d| self.rules.iter().map(move |r| (Some(d.clone()), Some(*r))))
                    .collect()
            } else {
                vec![(None, None)]
            };
            for (d, r) in variants {
                for &a in &self.alpha0 {
                    for &s in &self.seeds {
                        cells.push(Cell {
                            method: m.clone(),
                            divergence: d.clone(),
                            rule: r,
                            alpha0: a,
                            seed: s,
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn method_for(&self, cell: &Cell) -> Result<Method> {
        if cell.method == "metareg" {
            let d = Divergence::make_builtin(cell.divergence.as_deref().unwrap_or("chi2"))
                .map_err(|e| wrap("divergence", e))?;
            let rule = cell.rule.unwrap_or(RuleVariant::Alternating);
            let mut cfg = OptimizerConfig::new(d, rule, cell.alpha0).with_clip_factor(self.clip_factor);
            if let Some(l) = self.lambda {
                cfg = cfg.with_lambda(l);
            }
            cfg.validate()?;
            Ok(Method::MetaReg(cfg))
        } else {
            Ok(Method::Baseline(Baseline::from_id(&cell.method, cell.alpha0, self.beta)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub method: String,
    pub divergence: Option<String>,
    pub rule: Option<RuleVariant>,
    pub alpha0: f64,
    pub seed: u64,
}

impl Cell {
    pub fn label(&self) -> String {
        match (&self.divergence, self.rule) {
            (Some(d), Some(r)) => format!("{}/{d}/{r}", self.method),
            _ => self.method.clone(),
        }
    }
}

fn single<'a, T>(field: &str, v: &'a [T]) -> Result<&'a T> {
    match v {
        [x] => Ok(x),
        _ => Err(field_err(field, format!("`run` takes exactly one value, got {}; use `grid` for sweeps", v.len()))),
    }
}

/// Runs one configuration and writes `record.json`, `steps.csv` and `curves.svg`
/// into the output directory.
pub fn run_single(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let cell = Cell {
        method: single("method", &config.methods)?.clone(),
        divergence: Some(single("divergence", &config.divergences)?.clone()),
        rule: Some(*single("rule", &config.rules)?),
        alpha0: *single("alpha0", &config.alpha0)?,
        seed: *single("seed", &config.seeds)?,
    };
    let problem = config.problem.build(config.batch_size)?;
    let method = config.method_for(&cell)?;
    let x0 = vec![0.0; problem.dim()];
    let record = run_method(&method, &problem, &x0, config.steps(&problem), cell.seed)?;

    fs::create_dir_all(&config.out)?;
    fs::write(config.out.join("record.json"), record.to_json()?)?;
    record.write_csv(fs::File::create(config.out.join("steps.csv"))?)?;
    fs::write(config.out.join("curves.svg"), curves_svg(&record, &cell.label()))?;
    Ok(record)
}

fn indexed(v: &[f64]) -> Vec<(f64, f64)> {
    v.iter().enumerate().map(|(t, &y)| ((t + 1) as f64, y)).collect()
}

pub fn curves_svg(record: &RunRecord, label: &str) -> String {
    let mut regret = vec![Series {
        name: "regret".into(),
        points: indexed(&regret_curve(record)),
    }];
    if let Some(rule) = record.config.rule.and_then(Thm5Rule::from_variant) {
        if let Ok(b) = bound_thm5_curve(record, rule) {
            regret.push(Series {
                name: "convex bound".into(),
                points: indexed(&b),
            });
        }
    }
    if let Some(rule) = record.config.rule.and_then(ScRule::from_variant) {
        if let Ok(b) = bound_log_curve(record, rule) {
            regret.push(Series {
                name: "log bound".into(),
                points: indexed(&b),
            });
        }
    }
    render(&[
        Panel {
            title: format!("loss, {label}"),
            x_label: "step".into(),
            log_x: false,
            log_y: true,
            series: vec![Series {
                name: "f_t(x_t)".into(),
                points: indexed(&record.steps.loss),
            }],
        },
        Panel {
            title: "cumulative regret".into(),
            x_label: "step".into(),
            log_x: false,
            log_y: false,
            series: regret,
        },
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub divergence: String,
    pub alpha0: f64,
    pub seed: u64,
    pub final_loss: f64,
    pub final_regret: f64,
    pub min_grad_sq: f64,
    pub steps_to_eps: usize,
}

fn summarize(cell: &Cell, record: &RunRecord, eps: f64, horizon: usize) -> Result<SummaryRow> {
    let method = match cell.rule {
        Some(r) => format!("{}-{r}", cell.method),
        None => cell.method.clone(),
    };
    let (final_loss, final_regret, min_grad_sq) = if record.aborted.is_some() || record.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (
            record.final_loss().unwrap_or(f64::NAN),
            regret_curve(record).last().copied().unwrap_or(f64::NAN),
            min_grad_norm(record, record.len())?,
        )
    };
    Ok(SummaryRow {
        method,
        divergence: cell.divergence.clone().unwrap_or_default(),
        alpha0: cell.alpha0,
        seed: cell.seed,
        final_loss,
        final_regret,
        min_grad_sq,
        steps_to_eps: steps_to_eps(record, eps).unwrap_or(horizon),
    })
}

/// Runs every cell, concurrently when `parallel`, and returns rows in cell order.
pub fn grid_rows(config: &ExperimentConfig, parallel: bool) -> Result<Vec<SummaryRow>> {
    config.validate()?;
    let problem = config.problem.build(config.batch_size)?;
    let horizon = config.steps(&problem);
    let x0 = vec![0.0; problem.dim()];
    let cells = config.cells();
    let one = |cell: &Cell| -> Result<SummaryRow> {
        let method = config.method_for(cell)?;
        let record = run_method(&method, &problem, &x0, horizon, cell.seed)?;
        summarize(cell, &record, config.eps, horizon)
    };
    if parallel {
        cells.par_iter().map(one).collect()
    } else {
        cells.iter().map(one).collect()
    }
}

/// Runs the grid and writes `summary.csv` and `alpha0.svg` (mean final loss
/// against α₀ per method).
pub fn run_grid(config: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    let rows = grid_rows(config, true)?;
    fs::create_dir_all(&config.out)?;
    let mut w = csv::Writer::from_path(config.out.join("summary.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    fs::write(config.out.join("alpha0.svg"), alpha0_svg(&rows))?;
    Ok(rows)
}

fn alpha0_svg(rows: &[SummaryRow]) -> String {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        let name = if r.divergence.is_empty() {
            r.method.clone()
        } else {
            format!("{} {}", r.method, r.divergence)
        };
        let idx = match series.iter().position(|s| s.name == name) {
            Some(i) => i,
            None => {
                series.push(Series { name, points: Vec::new() });
                series.len() - 1
            }
        };
        let pts = &mut series[idx].points;
        match pts.iter_mut().find(|p| p.0 == r.alpha0) {
            // worst seed per alpha0
            Some(p) => p.1 = p.1.max(r.final_loss),
            None => pts.push((r.alpha0, r.final_loss)),
        }
    }
    render(&[Panel {
        title: "final loss vs initial learning rate".into(),
        x_label: "alpha0".into(),
        log_x: true,
        log_y: true,
        series,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let v = parse_sweep("alpha0", "1e-3:10:5").unwrap();
        assert_eq!(v.len(), 5);
        for (a, b) in v.iter().zip([1e-3, 1e-2, 1e-1, 1.0, 10.0]) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
        assert_eq!(parse_sweep("alpha0", "0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_sweep("alpha0", "1:2:0").is_err());
        assert!(parse_sweep("alpha0", "").is_err());
    }

    #[test]
    fn config_text() {
        let cfg = ExperimentConfig::from_text(
            "# demo\ndivergence = kl, chi2\nrule = exact\nalpha0 = 0.1:1:3\nclip-factor = none\nseed = 0..3\nproblem = logistic:n=50,d=3,c=0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.divergences, vec!["kl", "chi2"]);
        assert_eq!(cfg.rules, vec![RuleVariant::Exact]);
        assert_eq!(cfg.alpha0.len(), 3);
        assert_eq!(cfg.clip_factor, None);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert!(matches!(cfg.problem, ProblemSpec::Logistic { n: 50, d: 3, .. }));
        assert_eq!(cfg.cells().len(), 2 * 3 * 3);
    }

    #[test]
    fn errors_name_the_field() {
        let cfg = ExperimentConfig {
            divergences: vec!["nope".into()],
            ..ExperimentConfig::default()
        };
        let e = cfg.validate().unwrap_err().to_string();
        assert!(e.contains("divergence"), "{e}");
        let e = ExperimentConfig::from_text("alpha0 = x").unwrap_err().to_string();
        assert!(e.contains("alpha0"), "{e}");
        let e = ExperimentConfig::from_text("colour = red").unwrap_err().to_string();
        assert!(e.contains("colour"), "{e}");
        let e = ExperimentConfig::from_text("seed = 1,1").and_then(|c| c.validate()).unwrap_err().to_string();
        assert!(e.contains("seed"), "{e}");
        let e = ExperimentConfig::from_text("rule = sc_exact").and_then(|c| c.validate()).unwrap_err().to_string();
        assert!(e.contains("lambda"), "{e}");
        assert!(ProblemSpec::parse("cubic").is_err());
        assert!(ProblemSpec::parse("quadratic:q=1").is_err());
    }

    #[test]
    fn steps_from_epochs() {
        let mut cfg = ExperimentConfig::from_text("problem = quadratic:d=2,samples=10,noise=1\nbatch_size = 3\nepochs = 2").unwrap();
        let p = cfg.problem.build(cfg.batch_size).unwrap();
        assert_eq!(cfg.steps(&p), 8);
        cfg.horizon = Some(5);
        assert_eq!(cfg.steps(&p), 5);
    }

    #[test]
    fn concurrent_grid_matches_sequential() {
        let cfg = ExperimentConfig::from_text(
            "method = metareg, adagrad\ndivergence = kl, rkl\nalpha0 = 0.1:1:3\nseed = 1, 2\nproblem = quadratic:d=3,samples=20,noise=1\nbatch_size = 2\nhorizon = 50",
        )
        .unwrap();
        let par = grid_rows(&cfg, true).unwrap();
        let seq = grid_rows(&cfg, false).unwrap();
        assert_eq!(par.len(), (2 + 1) * 3 * 2);
        for (a, b) in par.iter().zip(&seq) {
            assert_eq!(a.method, b.method);
            assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
            assert_eq!(a.final_regret.to_bits(), b.final_regret.to_bits());
        }
    }
}
