//! Synthetic problem families, per-client oracles and reference solutions.

mod dissimilarity;
mod io;
mod logreg;
mod polyhedron;
mod quadratic;
mod reference;

pub use dissimilarity::{
    dissimilarity_report, estimate_bgv, estimate_delta_max, estimate_ed, estimate_ed_with, estimate_sod,
    estimate_sod_with, BgvEstimate, DissimilarityReport, Estimate, EstimateMode, EstimateOptions,
    SUBSET_ENUMERATION_CAP, SUBSET_SAMPLES,
};
pub use io::{ClientData, ProblemDocument, PROBLEM_EXTENSION};
pub use logreg::{gen_logreg, LogisticClient, LogregParams};
pub use polyhedron::{gen_polyhedron, PolyhedronClient, PolyhedronParams};
pub use quadratic::{gen_quadratic, QuadraticClient, QuadraticParams};
pub use reference::{reference_solve, REFERENCE_ITERATION_CAP};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::rng::SimRng;

/// First-order oracle of a differentiable convex function on R^d.
pub trait Oracle: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// Hessian-vector product (generalized Hessian at kinks).
    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
    fn smoothness(&self) -> f64;
    fn convexity(&self) -> f64;
    /// Number of data points (m_i); stochastic batches index into `0..data_size`.
    fn data_size(&self) -> usize;
    /// Unbiased gradient estimate from the data points in `batch`.
    fn batch_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64>;

    /// Mini-batch stochastic gradient. A batch covering the whole shard
    /// returns the exact gradient.
    fn stoch_grad(&self, x: &[f64], batch_size: usize, rng: &mut SimRng) -> Vec<f64> {
        let m = self.data_size();
        if batch_size >= m {
            return self.grad(x);
        }
        let mut batch = index::sample(rng, m, batch_size.max(1)).into_vec();
        batch.sort_unstable();
        self.batch_grad(x, &batch)
    }

    /// Exact minimizer of `self(x) + <shift, x> + (lambda/2)|x - center|^2`
    /// when available in closed form.
    fn prox_solve(&self, _shift: &[f64], _center: &[f64], _lambda: f64) -> Option<Vec<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Quadratic,
    Polyhedron,
    Logreg,
}

/// One client's local objective f_i.
#[derive(Debug, Clone)]
pub enum ClientFunction {
    Quadratic(QuadraticClient),
    Polyhedron(PolyhedronClient),
    Logistic(LogisticClient),
}

impl ClientFunction {
    pub fn family(&self) -> Family {
        match self {
            ClientFunction::Quadratic(_) => Family::Quadratic,
            ClientFunction::Polyhedron(_) => Family::Polyhedron,
            ClientFunction::Logistic(_) => Family::Logreg,
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticClient> {
        match self {
            ClientFunction::Quadratic(q) => Some(q),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn Oracle {
        match self {
            ClientFunction::Quadratic(c) => c,
            ClientFunction::Polyhedron(c) => c,
            ClientFunction::Logistic(c) => c,
        }
    }
}

impl Oracle for ClientFunction {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner().value(x)
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.inner().grad(x)
    }
    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.inner().hess_vec(x, v)
    }
    fn smoothness(&self) -> f64 {
        self.inner().smoothness()
    }
    fn convexity(&self) -> f64 {
        self.inner().convexity()
    }
    fn data_size(&self) -> usize {
        self.inner().data_size()
    }
    fn batch_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64> {
        self.inner().batch_grad(x, batch)
    }
    fn prox_solve(&self, shift: &[f64], center: &[f64], lambda: f64) -> Option<Vec<f64>> {
        self.inner().prox_solve(shift, center, lambda)
    }
}

/// Generator settings for any family; doubles as the problem section of
/// experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorParams {
    Quadratic(QuadraticParams),
    Polyhedron(PolyhedronParams),
    Logreg(LogregParams),
}

impl GeneratorParams {
    pub fn generate(&self) -> Result<ProblemInstance> {
        match self {
            GeneratorParams::Quadratic(p) => p.generate(),
            GeneratorParams::Polyhedron(p) => p.generate(),
            GeneratorParams::Logreg(p) => p.generate(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            GeneratorParams::Quadratic(p) => p.seed,
            GeneratorParams::Polyhedron(p) => p.seed,
            GeneratorParams::Logreg(p) => p.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            GeneratorParams::Quadratic(p) => p.seed = seed,
            GeneratorParams::Polyhedron(p) => p.seed = seed,
            GeneratorParams::Logreg(p) => p.seed = seed,
        }
    }
}

/// A population of clients sharing dimension `d`, with optional reference
/// solution `(x_star, f_star)` of the average objective.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub family: Family,
    pub d: usize,
    pub seed: u64,
    /// `None` for hand-built instances.
    pub provenance: Option<GeneratorParams>,
    pub clients: Vec<ClientFunction>,
    pub x_star: Option<Vec<f64>>,
    pub f_star: Option<f64>,
}

impl ProblemInstance {
    /// Hand-built instance; all clients must share family and dimension.
    pub fn from_clients(clients: Vec<ClientFunction>) -> Result<Self> {
        let first = clients.first().ok_or_else(|| Error::param("a problem needs at least one client"))?;
        let family = first.family();
        let d = first.dim();
        for c in &clients {
            check_dim(d, c.dim())?;
            if c.family() != family {
                return Err(Error::param("clients of mixed families"));
            }
        }
        Ok(ProblemInstance { family, d, seed: 0, provenance: None, clients, x_star: None, f_star: None })
    }

    pub fn n(&self) -> usize {
        self.clients.len()
    }

    pub fn objective(&self) -> GlobalObjective<'_> {
        GlobalObjective { problem: self }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective().value(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.objective().grad(x)
    }

    /// Per-client gradients at `x`, ascending client id.
    pub fn client_grads(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.clients.iter().map(|c| c.grad(x)).collect()
    }

    pub fn max_smoothness(&self) -> f64 {
        self.clients.iter().map(|c| c.smoothness()).fold(0.0, f64::max)
    }

    /// Largest μ with every f_i μ-convex.
    pub fn min_convexity(&self) -> f64 {
        self.clients.iter().map(|c| c.convexity()).fold(f64::INFINITY, f64::min)
    }

    pub fn all_quadratic(&self) -> bool {
        self.clients.iter().all(|c| c.as_quadratic().is_some())
    }

    /// Diagonal Hessians `h_i` of quadratic clients.
    pub fn quadratic_hessians(&self) -> Option<Vec<&[f64]>> {
        self.clients.iter().map(|c| c.as_quadratic().map(|q| q.hessian_diag())).collect()
    }

    /// Suboptimality `f(x) - f_star`. Quadratics use the exact identity
    /// `½ (x - x*)ᵀ H (x - x*)`, which avoids cancellation near the optimum.
    pub fn gap(&self, x: &[f64]) -> Option<f64> {
        let x_star = self.x_star.as_ref()?;
        let f_star = self.f_star?;
        if let Some(hs) = self.quadratic_hessians() {
            let n = hs.len() as f64;
            let mut acc = 0.0;
            for k in 0..self.d {
                let mut h = 0.0;
                for hi in &hs {
                    h += hi[k];
                }
                let e = x[k] - x_star[k];
                acc += 0.5 * (h / n) * e * e;
            }
            return Some(acc);
        }
        Some(self.value(x) - f_star)
    }

    /// `|x0 - x_star|` for the default start `x0 = 0`.
    pub fn initial_distance(&self) -> Option<f64> {
        self.x_star.as_ref().map(|x| linalg::norm(x))
    }
}

/// The average objective f = (1/n) Σ f_i.
#[derive(Clone, Copy)]
pub struct GlobalObjective<'a> {
    pub problem: &'a ProblemInstance,
}

impl Oracle for GlobalObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = self.problem.n() as f64;
        self.problem.clients.iter().map(|c| c.value(x)).sum::<f64>() / n
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let grads = self.problem.client_grads(x);
        linalg::mean(&grads, self.problem.d)
    }

    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let hv: Vec<Vec<f64>> = self.problem.clients.iter().map(|c| c.hess_vec(x, v)).collect();
        linalg::mean(&hv, self.problem.d)
    }

    fn smoothness(&self) -> f64 {
        let p = self.problem;
        p.clients.iter().map(|c| c.smoothness()).sum::<f64>() / p.n() as f64
    }

    fn convexity(&self) -> f64 {
        let p = self.problem;
        p.clients.iter().map(|c| c.convexity()).sum::<f64>() / p.n() as f64
    }

    fn data_size(&self) -> usize {
        self.problem.clients.iter().map(|c| c.data_size()).sum()
    }

    /// The global objective has no stochastic oracle; batches are ignored.
    fn batch_grad(&self, x: &[f64], _batch: &[usize]) -> Vec<f64> {
        self.grad(x)
    }

    fn stoch_grad(&self, x: &[f64], _batch_size: usize, _rng: &mut SimRng) -> Vec<f64> {
        self.grad(x)
    }

    fn prox_solve(&self, shift: &[f64], center: &[f64], lambda: f64) -> Option<Vec<f64>> {
        let hs = self.problem.quadratic_hessians()?;
        let n = hs.len() as f64;
        let d = self.problem.d;
        let mut out = vec![0.0; d];
        for (k, o) in out.iter_mut().enumerate() {
            let mut h = 0.0;
            let mut hb = 0.0;
            for c in &self.problem.clients {
                let q = c.as_quadratic()?;
                h += q.hessian_diag()[k];
                hb += q.linear_term()[k];
            }
            *o = (hb / n - shift[k] + lambda * center[k]) / (h / n + lambda);
        }
        Some(out)
    }
}

pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Largest eigenvalue of Σ_j a_j a_jᵀ for row-major `rows` (m × d), padded by
/// a relative margin of 1e-3 to keep step sizes on the safe side.
pub(crate) fn gram_top_eigenvalue(rows: &[f64], d: usize) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let rho = linalg::power_iteration(
        d,
        |v| {
            let mut out = vec![0.0; d];
            for a in rows.chunks_exact(d) {
                let t = linalg::dot(a, v);
                linalg::axpy(t, a, &mut out);
            }
            out
        },
        2000,
        1e-12,
    );
    rho * (1.0 + 1e-3)
}
