use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{gram_top_eigenvalue, ClientFunction, GeneratorParams, Oracle, ProblemInstance};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::rng;

const MAX_ATTEMPTS: usize = 20;

/// f_i(x) = scale · Σ_j [<a_ij, x> - b_ij]_+²
#[derive(Debug, Clone)]
pub struct PolyhedronClient {
    d: usize,
    rows: Vec<f64>,
    b: Vec<f64>,
    scale: f64,
    smoothness: f64,
}

impl PolyhedronClient {
    pub fn new(d: usize, rows: Vec<f64>, b: Vec<f64>, scale: f64) -> Result<Self> {
        if d == 0 || rows.len() % d != 0 {
            return Err(Error::param("constraint rows must form an m × d array"));
        }
        check_dim(rows.len() / d, b.len())?;
        if !(scale > 0.0) {
            return Err(Error::param("scale must be positive"));
        }
        let smoothness = 2.0 * scale * gram_top_eigenvalue(&rows, d);
        Ok(PolyhedronClient { d, rows, b, scale, smoothness })
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn residual(&self, j: usize, x: &[f64]) -> f64 {
        linalg::dot(&self.rows[j * self.d..(j + 1) * self.d], x) - self.b[j]
    }
}

impl Oracle for PolyhedronClient {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = (0..self.b.len()).map(|j| self.residual(j, x).max(0.0).powi(2)).sum();
        self.scale * s
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        for j in 0..self.b.len() {
            let r = self.residual(j, x);
            if r > 0.0 {
                linalg::axpy(2.0 * self.scale * r, &self.rows[j * self.d..(j + 1) * self.d], &mut g);
            }
        }
        g
    }

    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for j in 0..self.b.len() {
            if self.residual(j, x) > 0.0 {
                let a = &self.rows[j * self.d..(j + 1) * self.d];
                linalg::axpy(2.0 * self.scale * linalg::dot(a, v), a, &mut out);
            }
        }
        out
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn convexity(&self) -> f64 {
        0.0
    }

    fn data_size(&self) -> usize {
        self.b.len()
    }

    fn batch_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        let weight = 2.0 * self.scale * self.b.len() as f64 / batch.len() as f64;
        for &j in batch {
            let r = self.residual(j, x);
            if r > 0.0 {
                linalg::axpy(weight * r, &self.rows[j * self.d..(j + 1) * self.d], &mut g);
            }
        }
        g
    }
}

/// Polyhedron feasibility: `m_total` random halfspaces split across `n`
/// clients, all containing a point drawn uniformly on the sphere of the given
/// radius with margin `slack` (default `1e-3 · radius`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedronParams {
    pub n: usize,
    pub m_total: usize,
    pub d: usize,
    pub radius: f64,
    #[serde(default)]
    pub slack: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl PolyhedronParams {
    pub fn new(n: usize, m_total: usize, d: usize, radius: f64, seed: u64) -> Self {
        PolyhedronParams { n, m_total, d, radius, slack: None, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::param("polyhedron generator needs n, d >= 1"));
        }
        if self.m_total < self.n {
            return Err(Error::param("m_total must be at least n"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::param("radius must be positive"));
        }
        if let Some(s) = self.slack {
            if !(s > 0.0) {
                return Err(Error::param("slack must be positive"));
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<ProblemInstance> {
        self.validate()?;
        let (n, d) = (self.n, self.d);
        let slack = self.slack.unwrap_or(1e-3 * self.radius);
        let scale = n as f64 / self.m_total as f64;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = rng::stream(self.seed, attempt as u64, 0);
            let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let nd = linalg::norm(&dir);
            if nd == 0.0 {
                continue;
            }
            let x_star: Vec<f64> = dir.iter().map(|v| self.radius * v / nd).collect();
            let mut clients = Vec::with_capacity(n);
            for i in 0..n {
                let m_i = self.m_total / n + usize::from(i < self.m_total % n);
                let rows: Vec<f64> = (0..m_i * d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let b: Vec<f64> = rows.chunks_exact(d).map(|a| linalg::dot(a, &x_star) + slack).collect();
                clients.push(ClientFunction::Polyhedron(PolyhedronClient::new(d, rows, b, scale)?));
            }
            let mut p = ProblemInstance::from_clients(clients)?;
            if !(p.value(&vec![0.0; d]) > 0.0) {
                continue;
            }
            p.seed = self.seed;
            p.provenance = Some(GeneratorParams::Polyhedron(self.clone()));
            p.f_star = Some(0.0);
            p.x_star = Some(x_star);
            return Ok(p);
        }
        Err(Error::Regenerate { attempts: MAX_ATTEMPTS, reason: "the origin stayed feasible".into() })
    }
}

pub fn gen_polyhedron(n: usize, m_total: usize, d: usize, radius: f64, seed: u64) -> Result<ProblemInstance> {
    PolyhedronParams::new(n, m_total, d, radius, seed).generate()
}
