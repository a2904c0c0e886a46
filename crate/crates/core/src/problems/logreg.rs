use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{gram_top_eigenvalue, reference_solve, sigmoid, softplus, ClientFunction, GeneratorParams, Oracle, ProblemInstance};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::rng;

const MAX_SPLIT_ATTEMPTS: usize = 100;

/// f_i(x) = scale · Σ_j log(1 + exp(-y_j <a_j, x>)) + (reg/2)|x|²
#[derive(Debug, Clone)]
pub struct LogisticClient {
    d: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    scale: f64,
    reg: f64,
    smoothness: f64,
}

impl LogisticClient {
    pub fn new(d: usize, features: Vec<f64>, labels: Vec<f64>, scale: f64, reg: f64) -> Result<Self> {
        if d == 0 || features.len() % d != 0 {
            return Err(Error::param("features must form an m × d array"));
        }
        check_dim(features.len() / d, labels.len())?;
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::param("labels must be ±1"));
        }
        if !(scale > 0.0) || !(reg >= 0.0) {
            return Err(Error::param("scale must be positive and reg non-negative"));
        }
        let smoothness = 0.25 * scale * gram_top_eigenvalue(&features, d) + reg;
        Ok(LogisticClient { d, features, labels, scale, reg, smoothness })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.d..(j + 1) * self.d]
    }

    fn margin(&self, j: usize, x: &[f64]) -> f64 {
        self.labels[j] * linalg::dot(self.row(j), x)
    }

    fn accumulate_grad(&self, x: &[f64], items: impl Iterator<Item = usize>, weight: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for j in items {
            let coef = -self.labels[j] * sigmoid(-self.margin(j, x));
            linalg::axpy(weight * coef, self.row(j), &mut g);
        }
        linalg::axpy(self.reg, x, &mut g);
        g
    }
}

impl Oracle for LogisticClient {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        let loss: f64 = (0..self.labels.len()).map(|j| softplus(-self.margin(j, x))).sum();
        self.scale * loss + 0.5 * self.reg * linalg::norm_sq(x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.accumulate_grad(x, 0..self.labels.len(), self.scale)
    }

    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for j in 0..self.labels.len() {
            let s = sigmoid(self.margin(j, x));
            let a = self.row(j);
            linalg::axpy(self.scale * s * (1.0 - s) * linalg::dot(a, v), a, &mut out);
        }
        linalg::axpy(self.reg, v, &mut out);
        out
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn convexity(&self) -> f64 {
        self.reg
    }

    fn data_size(&self) -> usize {
        self.labels.len()
    }

    fn batch_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64> {
        let weight = self.scale * self.labels.len() as f64 / batch.len() as f64;
        self.accumulate_grad(x, batch.iter().copied(), weight)
    }
}

/// Synthetic two-class logistic regression with `total` points split across
/// `n` clients by per-class Dirichlet(`dirichlet_alpha`) proportions.
///
/// Features are standard normal scaled by 1/√d; labels follow a random
/// linear teacher with label noise `label_noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    pub n: usize,
    pub total: usize,
    pub d: usize,
    pub dirichlet_alpha: f64,
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_label_noise() -> f64 {
    0.5
}

fn default_reference_tol() -> f64 {
    1e-10
}

impl LogregParams {
    pub fn new(n: usize, total: usize, d: usize, dirichlet_alpha: f64, seed: u64) -> Self {
        LogregParams {
            n,
            total,
            d,
            dirichlet_alpha,
            label_noise: default_label_noise(),
            reference_tol: default_reference_tol(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::param("logreg generator needs n, d >= 1"));
        }
        if self.total < self.n {
            return Err(Error::param("total data size M must be at least n"));
        }
        if !(self.dirichlet_alpha > 0.0) {
            return Err(Error::param("dirichlet_alpha must be positive"));
        }
        if !(self.reference_tol > 0.0) {
            return Err(Error::param("reference_tol must be positive"));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<ProblemInstance> {
        let mut p = self.generate_unsolved()?;
        reference_solve(&mut p, self.reference_tol)?;
        Ok(p)
    }

    /// Instance without the reference solve.
    pub fn generate_unsolved(&self) -> Result<ProblemInstance> {
        self.validate()?;
        let (n, total, d) = (self.n, self.total, self.d);
        let mut rng = rng::stream(self.seed, 0, 0);
        let teacher: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        let mut features = Vec::with_capacity(total * d);
        let mut labels = Vec::with_capacity(total);
        for _ in 0..total {
            let a: Vec<f64> = (0..d).map(|_| inv_sqrt_d * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            let noise: f64 = StandardNormal.sample(&mut rng);
            labels.push(if linalg::dot(&a, &teacher) + self.label_noise * noise >= 0.0 { 1.0 } else { -1.0 });
            features.extend(a);
        }
        let shards = self.dirichlet_split(&labels)?;
        let scale = n as f64 / total as f64;
        let reg = 1.0 / total as f64;
        let clients = shards
            .into_iter()
            .map(|idx| {
                let f: Vec<f64> = idx.iter().flat_map(|&j| features[j * d..(j + 1) * d].iter().copied()).collect();
                let y: Vec<f64> = idx.iter().map(|&j| labels[j]).collect();
                LogisticClient::new(d, f, y, scale, reg).map(ClientFunction::Logistic)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = ProblemInstance::from_clients(clients)?;
        p.seed = self.seed;
        p.provenance = Some(GeneratorParams::Logreg(self.clone()));
        Ok(p)
    }

    /// Per-class Dirichlet proportions; resampled while any shard is empty.
    fn dirichlet_split(&self, labels: &[f64]) -> Result<Vec<Vec<usize>>> {
        let n = self.n;
        let gamma = Gamma::new(self.dirichlet_alpha, 1.0).map_err(|e| Error::param(e.to_string()))?;
        for attempt in 0..MAX_SPLIT_ATTEMPTS {
            let mut rng = rng::stream(self.seed, 1 + attempt as u64, 0);
            let mut shards = vec![Vec::new(); n];
            let mut ok = true;
            for class in [1.0, -1.0] {
                let mut members: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == class).collect();
                if members.is_empty() {
                    continue;
                }
                members.shuffle(&mut rng);
                let weights: Vec<f64> = (0..n).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = weights.iter().sum();
                if !(total > 0.0) || !total.is_finite() {
                    ok = false;
                    break;
                }
                let count = members.len();
                let mut cum = 0.0;
                let mut start = 0;
                for (i, w) in weights.iter().enumerate() {
                    cum += w / total;
                    let end = if i + 1 == n { count } else { ((cum * count as f64).round() as usize).min(count) };
                    let end = end.max(start);
                    shards[i].extend_from_slice(&members[start..end]);
                    start = end;
                }
            }
            if ok && shards.iter().all(|s| !s.is_empty()) {
                shards.iter_mut().for_each(|s| s.sort_unstable());
                return Ok(shards);
            }
        }
        Err(Error::Regenerate { attempts: MAX_SPLIT_ATTEMPTS, reason: "Dirichlet split left a client empty".into() })
    }
}

/// Synthetic logistic regression; the reference solution is computed and cached.
pub fn gen_logreg(n: usize, total: usize, d: usize, dirichlet_alpha: f64, seed: u64) -> Result<ProblemInstance> {
    LogregParams::new(n, total, d, dirichlet_alpha, seed).generate()
}
