//! Loss and gradient oracles.
//!
//! Two objectives are provided, both finite sums over samples:
//!
//! * quadratic: `f_i(x) = ½ xᵀAx − b_iᵀx`, with `F` the sample average. Every
//!   sample shares the curvature `A`, so each `f_i` is as strongly convex as `F`.
//! * logistic regression: `f_i(x) = ln(1 + exp(−y_i ⟨a_i, x⟩)) + (c/2)‖x‖²`.
//!
//! A [`ProblemInstance`] is either full batch (`f_t = F`) or an online stream of
//! epoch-wise shuffled minibatches.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DMatrix<f64>,
    b: DVector<f64>,
    b_samples: Vec<DVector<f64>>,
    eigenvalues: DVector<f64>,
}

impl Quadratic {
    /// `F(x) = ½ xᵀAx − bᵀx` with a single sample.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::with_samples(a, vec![b])
    }

    /// Finite sum with per-sample linear terms; `F` uses their mean.
    pub fn with_samples(a: DMatrix<f64>, b_samples: Vec<DVector<f64>>) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d {
            return Err(Error::Config(format!("A must be square and nonempty, got {}x{}", a.nrows(), a.ncols())));
        }
        if b_samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for b in &b_samples {
            check_len(d, b.len())?;
        }
        let asym = (&a - a.transpose()).amax();
        if asym > 1e-12 * a.amax().max(1.0) {
            return Err(Error::Config(format!("A is not symmetric (max asymmetry {asym:e})")));
        }
        let eigenvalues = SymmetricEigen::new(a.clone()).eigenvalues;
        let min_eig = eigenvalues.min();
        if min_eig < -1e-10 * eigenvalues.amax().max(1.0) {
            return Err(Error::Config(format!("A is not positive semidefinite (eigenvalue {min_eig})")));
        }
        let mut b = DVector::zeros(d);
        for s in &b_samples {
            b += s;
        }
        b /= b_samples.len() as f64;
        Ok(Quadratic {
            a,
            b,
            b_samples,
            eigenvalues,
        })
    }

    /// Replaces the linear term by `n` noisy copies `b + σ ε_i`, recentred so their
    /// mean is exactly the original `b`.
    pub fn with_sample_noise(self, n: usize, sigma: f64, seed: u64) -> Result<Self> {
        let d = self.b.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0005_eed0_f5a3_b1e5);
        let mut noise: Vec<DVector<f64>> = (0..n.max(1))
            .map(|_| DVector::from_fn(d, |_, _| sigma * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let mut mean = DVector::zeros(d);
        for e in &noise {
            mean += e;
        }
        mean /= noise.len() as f64;
        for e in &mut noise {
            *e += &self.b - &mean;
        }
        Quadratic::with_samples(self.a, noise)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Smallest eigenvalue; every `f_i` is strongly convex with this modulus in each coordinate.
    pub fn mu_min(&self) -> f64 {
        self.eigenvalues.min().max(0.0)
    }

    pub fn smoothness(&self) -> f64 {
        self.eigenvalues.max()
    }

    fn mean_b(&self, idx: &[usize]) -> DVector<f64> {
        let mut b = DVector::zeros(self.b.len());
        for &i in idx {
            b += &self.b_samples[i];
        }
        b / idx.len() as f64
    }

    fn loss_with(&self, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) - b.dot(x)
    }

    fn grad_with(&self, b: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - b
    }

    fn optimum(&self) -> Result<DVector<f64>> {
        if let Some(chol) = self.a.clone().cholesky() {
            return Ok(chol.solve(&self.b));
        }
        let svd = self.a.clone().svd(true, true);
        let tol = 1e-12 * self.eigenvalues.amax().max(1.0);
        let x = svd
            .solve(&self.b, tol)
            .map_err(|e| Error::Numeric(format!("pseudo-inverse failed: {e}")))?;
        let residual = (&self.a * &x - &self.b).norm();
        if residual > 1e-9 * self.b.norm().max(1.0) {
            return Err(Error::Unbounded(format!(
                "A is singular and b is not in its range (residual {residual:e})"
            )));
        }
        Ok(x)
    }
}

#[derive(Debug, Clone)]
pub struct Logistic {
    features: DMatrix<f64>,
    labels: Vec<f64>,
    reg: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    /// `features` is `n × d`; labels must be ±1; `reg ≥ 0`.
    pub fn new(features: DMatrix<f64>, labels: Vec<f64>, reg: f64) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        check_len(features.nrows(), labels.len())?;
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::Config(format!("labels must be -1 or +1, got {bad}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("features must be finite".into()));
        }
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::Config(format!("regularization must be nonnegative, got {reg}")));
        }
        Ok(Logistic { features, labels, reg })
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn margin(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.labels[i] * self.features.row(i).transpose().dot(x)
    }

    fn loss_on<I: Iterator<Item = usize>>(&self, rows: I, count: usize, x: &DVector<f64>) -> f64 {
        let data: f64 = rows.map(|i| softplus(-self.margin(i, x))).sum();
        data / count as f64 + 0.5 * self.reg * x.norm_squared()
    }

    fn grad_on<I: Iterator<Item = usize>>(&self, rows: I, count: usize, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for i in rows {
            let w = -self.labels[i] * sigmoid(-self.margin(i, x));
            g.axpy(w, &self.features.row(i).transpose(), 1.0);
        }
        g / count as f64 + self.reg * x
    }

    fn full_loss_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let n = self.features.nrows() as f64;
        let m = &self.features * x;
        let mut loss = 0.0;
        let w = DVector::from_fn(m.len(), |i, _| {
            let yi = self.labels[i];
            loss += softplus(-yi * m[i]);
            -yi * sigmoid(-yi * m[i]) / n
        });
        let g = self.features.tr_mul(&w) + self.reg * x;
        (loss / n + 0.5 * self.reg * x.norm_squared(), g)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.features.nrows();
        let d = x.len();
        let mut h = DMatrix::identity(d, d) * self.reg;
        for i in 0..n {
            let s = sigmoid(self.margin(i, x));
            let row = self.features.row(i).transpose();
            h.ger(s * (1.0 - s) / n as f64, &row, &row, 1.0);
        }
        h
    }

    /// Damped Newton with backtracking. Near the optimum the loss stops resolving
    /// decreases, so a step is also accepted when it shrinks the gradient norm.
    fn optimum(&self) -> Result<DVector<f64>> {
        let d = self.features.ncols();
        let mut x = DVector::zeros(d);
        let (mut f, mut g) = self.full_loss_grad(&x);
        let max_iter = 200;
        for _ in 0..max_iter {
            let gn = g.norm();
            if gn <= 1e-12 {
                break;
            }
            let dir = match self.hessian(&x).cholesky() {
                Some(chol) => chol.solve(&g),
                None => g.clone(),
            };
            let slope = g.dot(&dir);
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-20 {
                let cand = &x - t * &dir;
                let (fc, gc) = self.full_loss_grad(&cand);
                if fc <= f - 1e-4 * t * slope || (fc <= f + 1e-14 * f.abs().max(1.0) && gc.norm() < gn) {
                    x = cand;
                    f = fc;
                    g = gc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved || x.norm() > 1e12 {
                break;
            }
        }
        if self.reg == 0.0 && (0..self.features.nrows()).all(|i| self.margin(i, &x) > 0.0) {
            return Err(Error::Unbounded(
                "unregularized logistic loss on separable data has no minimizer".into(),
            ));
        }
        let gn = g.norm();
        if gn <= 1e-10 {
            return Ok(x);
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            best: gn,
        })
    }
}

#[derive(Debug, Clone)]
pub enum Objective {
    Quadratic(Quadratic),
    Logistic(Logistic),
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic(q) => q.a.nrows(),
            Objective::Logistic(l) => l.features.ncols(),
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            Objective::Quadratic(q) => q.b_samples.len(),
            Objective::Logistic(l) => l.features.nrows(),
        }
    }

    fn vec(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_len(self.dim(), x.len())?;
        Ok(DVector::from_column_slice(x))
    }

    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        let x = self.vec(x)?;
        Ok(match self {
            Objective::Quadratic(q) => q.loss_with(&q.b, &x),
            Objective::Logistic(l) => l.full_loss_grad(&x).0,
        })
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = self.vec(x)?;
        let g = match self {
            Objective::Quadratic(q) => q.grad_with(&q.b, &x),
            Objective::Logistic(l) => l.full_loss_grad(&x).1,
        };
        Ok(g.as_slice().to_vec())
    }

    /// `(F(x), ∇F(x))` in one pass.
    pub fn loss_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let x = self.vec(x)?;
        let (f, g) = match self {
            Objective::Quadratic(q) => (q.loss_with(&q.b, &x), q.grad_with(&q.b, &x)),
            Objective::Logistic(l) => l.full_loss_grad(&x),
        };
        Ok((f, g.as_slice().to_vec()))
    }

    pub fn batch_loss(&self, batch: &Minibatch, x: &[f64]) -> Result<f64> {
        let idx = self.checked(batch)?;
        let x = self.vec(x)?;
        Ok(match self {
            Objective::Quadratic(q) => q.loss_with(&q.mean_b(idx), &x),
            Objective::Logistic(l) => l.loss_on(idx.iter().copied(), idx.len(), &x),
        })
    }

    pub fn batch_gradient(&self, batch: &Minibatch, x: &[f64]) -> Result<Vec<f64>> {
        let idx = self.checked(batch)?;
        let x = self.vec(x)?;
        let g = match self {
            Objective::Quadratic(q) => q.grad_with(&q.mean_b(idx), &x),
            Objective::Logistic(l) => l.grad_on(idx.iter().copied(), idx.len(), &x),
        };
        Ok(g.as_slice().to_vec())
    }

    fn checked<'b>(&self, batch: &'b Minibatch) -> Result<&'b [usize]> {
        let n = self.n_samples();
        if batch.indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(&i) = batch.indices.iter().find(|&&i| i >= n) {
            return Err(Error::Domain(format!("sample index {i} out of range for {n} samples")));
        }
        Ok(&batch.indices)
    }

    /// Minimizer of the full objective and its value.
    pub fn optimum(&self) -> Result<(Vec<f64>, f64)> {
        let x = match self {
            Objective::Quadratic(q) => q.optimum()?,
            Objective::Logistic(l) => l.optimum()?,
        };
        let x = x.as_slice().to_vec();
        let f = self.loss(&x)?;
        Ok((x, f))
    }

    /// Per-coordinate strong-convexity modulus shared by every sample loss, if positive.
    pub fn mu_min(&self) -> Option<f64> {
        let mu = match self {
            Objective::Quadratic(q) => q.mu_min(),
            Objective::Logistic(l) => l.reg,
        };
        (mu > 0.0).then_some(mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    Logistic,
    OnlineStream,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    objective: Objective,
    batch_size: Option<usize>,
}

impl ProblemInstance {
    pub fn full_batch(objective: Objective) -> Self {
        ProblemInstance {
            objective,
            batch_size: None,
        }
    }

    pub fn online(objective: Objective, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(ProblemInstance {
            objective,
            batch_size: Some(batch_size),
        })
    }

    pub fn kind(&self) -> ProblemKind {
        match (&self.objective, self.batch_size) {
            (_, Some(_)) => ProblemKind::OnlineStream,
            (Objective::Quadratic(_), None) => ProblemKind::Quadratic,
            (Objective::Logistic(_), None) => ProblemKind::Logistic,
        }
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn batch_size(&self) -> Option<usize> {
        self.batch_size
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        self.objective.loss(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.objective.gradient(x)
    }

    pub fn optimum(&self) -> Result<(Vec<f64>, f64)> {
        self.objective.optimum()
    }

    /// The per-step oracles `f_0, …, f_{horizon−1}`.
    pub fn oracles(&self, seed: u64, horizon: usize) -> Vec<Oracle> {
        match self.batch_size {
            None => vec![Oracle::Full; horizon],
            Some(b) => online_stream(&self.objective, b, seed, horizon)
                .map(Oracle::Batch)
                .collect(),
        }
    }

    pub fn oracle_loss(&self, oracle: &Oracle, x: &[f64]) -> Result<f64> {
        match oracle {
            Oracle::Full => self.objective.loss(x),
            Oracle::Batch(b) => self.objective.batch_loss(b, x),
        }
    }

    pub fn oracle_loss_and_gradient(&self, oracle: &Oracle, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        match oracle {
            Oracle::Full => self.objective.loss_and_gradient(x),
            Oracle::Batch(b) => Ok((self.objective.batch_loss(b, x)?, self.objective.batch_gradient(b, x)?)),
        }
    }

    pub fn oracle_gradient(&self, oracle: &Oracle, x: &[f64]) -> Result<Vec<f64>> {
        match oracle {
            Oracle::Full => self.objective.gradient(x),
            Oracle::Batch(b) => self.objective.batch_gradient(b, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minibatch {
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Oracle {
    Full,
    Batch(Minibatch),
}

/// Epoch-wise shuffled minibatches, deterministic in the seed. The last batch of
/// an epoch is shorter when the batch size does not divide the sample count.
pub struct OnlineStream {
    n: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
    remaining: usize,
}

impl Iterator for OnlineStream {
    type Item = Minibatch;

    fn next(&mut self) -> Option<Minibatch> {
        if self.remaining == 0 || self.n == 0 {
            return None;
        }
        if self.pos >= self.n {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch_size).min(self.n);
        let indices = self.order[self.pos..end].to_vec();
        self.pos = end;
        self.remaining -= 1;
        Some(Minibatch { indices })
    }
}

pub fn online_stream(objective: &Objective, batch_size: usize, seed: u64, horizon: usize) -> OnlineStream {
    let n = objective.n_samples();
    OnlineStream {
        n,
        batch_size: batch_size.clamp(1, n.max(1)),
        rng: ChaCha8Rng::seed_from_u64(seed),
        order: (0..n).collect(),
        pos: n,
        remaining: horizon,
    }
}

/// Random rotation of a spectrum linearly spaced in `[mu_min, mu_max]`, with a
/// standard normal linear term.
pub fn make_quadratic(d: usize, mu_min: f64, mu_max: f64, seed: u64) -> Result<Quadratic> {
    if d == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    if !(mu_min >= 0.0 && mu_max >= mu_min && mu_max.is_finite()) {
        return Err(Error::Config(format!("need 0 <= mu_min <= mu_max, got [{mu_min}, {mu_max}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let spectrum = DVector::from_fn(d, |i, _| {
        if d == 1 {
            mu_min
        } else {
            mu_min + (mu_max - mu_min) * i as f64 / (d - 1) as f64
        }
    });
    let mut a = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
    a = 0.5 * (&a + a.transpose());
    let b = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    Quadratic::new(a, b)
}

/// Synthetic binary logistic regression data: Gaussian features with standard
/// deviation `feature_scale`, labels drawn from a logistic model with a random
/// unit-norm weight vector scaled by `signal / feature_scale`.
pub fn make_logistic(n: usize, d: usize, reg: f64, feature_scale: f64, seed: u64) -> Result<Logistic> {
    if n == 0 || d == 0 {
        return Err(Error::Config("n and d must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = w.normalize() * (3.0 / feature_scale);
    let features = DMatrix::from_fn(n, d, |_, _| feature_scale * rng.sample::<f64, _>(StandardNormal));
    let labels = (0..n)
        .map(|i| {
            let p = sigmoid(features.row(i).transpose().dot(&w));
            if rng.random::<f64>() < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Logistic::new(features, labels, reg)
}

/// Reads a dense CSV dataset: numeric feature columns followed by a label column
/// in `{-1, 1}` or `{0, 1}` (0 maps to −1). A first line with no numeric cell is
/// treated as a header. Rows and columns in errors are 1-based file positions.
pub fn load_csv_dataset(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let row = k + 1;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if k == 0 && record.iter().all(|c| c.parse::<f64>().is_err()) {
            continue;
        }
        if record.len() < 2 {
            return Err(Error::Parse {
                row,
                col: record.len(),
                msg: "need at least one feature and a label".into(),
            });
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    row,
                    col: record.len().min(w) + 1,
                    msg: format!("expected {w} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        let mut values = Vec::with_capacity(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                col: c + 1,
                msg: format!("not a number: `{cell}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: c + 1,
                    msg: format!("non-finite value `{cell}`"),
                });
            }
            values.push(v);
        }
        let label = values.pop().unwrap_or_default();
        let label = match label {
            1.0 => 1.0,
            l if l == 0.0 || l == -1.0 => -1.0,
            other => {
                return Err(Error::Parse {
                    row,
                    col: values.len() + 1,
                    msg: format!("label must be -1, 0 or 1, got {other}"),
                })
            }
        };
        rows.push(values);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    Ok((x, labels))
}
