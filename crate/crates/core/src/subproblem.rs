//! Drift-corrected regularized local objectives and their inexactness rules.
//!
//! Client i solves
//!
//! ```text
//! F(x) = f_i(x) + <shift, x> + (λ/2) |x - c|²
//! ```
//!
//! where `c` is the prox center and `shift = ∇f_S(c) - ∇f_i(c)` corrects the
//! client drift (zero for FedProx-style subproblems).

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::problems::Oracle;
use crate::rng::SimRng;

pub const DEFAULT_MAX_ORACLE_CALLS: u64 = 100_000;

const GRADIENT_NOISE_FACTOR: f64 = 16.0;

pub struct ProxSubproblem<'a> {
    base: &'a dyn Oracle,
    shift: Vec<f64>,
    prox_center: Vec<f64>,
    lambda: f64,
    grad_calls: AtomicU64,
    stoch_calls: AtomicU64,
}

impl<'a> ProxSubproblem<'a> {
    pub fn new(base: &'a dyn Oracle, shift: Vec<f64>, prox_center: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::param(format!("lambda must be positive and finite, got {lambda}")));
        }
        check_dim(base.dim(), shift.len())?;
        check_dim(base.dim(), prox_center.len())?;
        Ok(ProxSubproblem { base, shift, prox_center, lambda, grad_calls: AtomicU64::new(0), stoch_calls: AtomicU64::new(0) })
    }

    pub fn base(&self) -> &'a dyn Oracle {
        self.base
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn prox_center(&self) -> &[f64] {
        &self.prox_center
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Deterministic gradient evaluations so far.
    pub fn oracle_calls(&self) -> u64 {
        self.grad_calls.load(Ordering::Relaxed)
    }

    pub fn stochastic_oracle_calls(&self) -> u64 {
        self.stoch_calls.load(Ordering::Relaxed)
    }

    /// `∇F` assembled from a (possibly stochastic) gradient of the base.
    pub fn complete(&self, x: &[f64], base_grad: &[f64]) -> Vec<f64> {
        let mut g = base_grad.to_vec();
        for k in 0..g.len() {
            g[k] += self.shift[k] + self.lambda * (x[k] - self.prox_center[k]);
        }
        g
    }

    /// One counted oracle call: `(∇f_i(x), ∇F(x))`.
    pub fn eval(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.grad_calls.fetch_add(1, Ordering::Relaxed);
        let b = self.base.grad(x);
        let g = self.complete(x, &b);
        (b, g)
    }

    /// One counted stochastic call on the base; the regularizer and shift
    /// are exact.
    pub fn stoch_grad_full(&self, x: &[f64], batch: usize, rng: &mut SimRng) -> Vec<f64> {
        self.stoch_calls.fetch_add(1, Ordering::Relaxed);
        let b = self.base.stoch_grad(x, batch, rng);
        self.complete(x, &b)
    }

    /// Rounding-error scale of `∇F(x)` given `∇f_i(x)`. A gradient below it
    /// is numerically zero.
    pub fn gradient_noise(&self, x: &[f64], base_grad: &[f64]) -> f64 {
        let terms = linalg::norm(base_grad)
            + linalg::norm(&self.shift)
            + self.smoothness() * linalg::norm(x)
            + self.lambda * linalg::norm(&self.prox_center);
        GRADIENT_NOISE_FACTOR * f64::EPSILON * terms
    }

    /// `rule` on an evaluated point. Points whose gradient is at rounding
    /// level are accepted too: no solver can certify more there.
    pub fn accepts(&self, rule: &StoppingRule, x: &[f64], base_grad: &[f64], grad_f: &[f64], round: usize) -> bool {
        rule.accepts(grad_f, x, &self.prox_center, self.lambda, round)
            || linalg::norm(grad_f) <= self.gradient_noise(x, base_grad)
    }

    /// Closed-form minimizer when the base supports it.
    pub fn exact_minimizer(&self) -> Option<Vec<f64>> {
        self.base.prox_solve(&self.shift, &self.prox_center, self.lambda)
    }
}

impl Oracle for ProxSubproblem<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) + linalg::dot(&self.shift, x) + 0.5 * self.lambda * linalg::dist_sq(x, &self.prox_center)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.eval(x).1
    }

    fn hess_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = self.base.hess_vec(x, v);
        linalg::axpy(self.lambda, v, &mut out);
        out
    }

    fn smoothness(&self) -> f64 {
        self.base.smoothness() + self.lambda
    }

    fn convexity(&self) -> f64 {
        self.base.convexity() + self.lambda
    }

    fn data_size(&self) -> usize {
        self.base.data_size()
    }

    fn batch_grad(&self, x: &[f64], batch: &[usize]) -> Vec<f64> {
        self.stoch_calls.fetch_add(1, Ordering::Relaxed);
        let b = self.base.batch_grad(x, batch);
        self.complete(x, &b)
    }
}

/// Builds client i's subproblem. With `drift`, the shift is
/// `participants_mean_grad - own_grad`, otherwise zero.
pub fn build_subproblem<'a>(
    client: &'a dyn Oracle,
    participants_mean_grad: &[f64],
    own_grad: &[f64],
    prox_center: Vec<f64>,
    lambda: f64,
    drift: bool,
) -> Result<ProxSubproblem<'a>> {
    let d = client.dim();
    check_dim(d, participants_mean_grad.len())?;
    check_dim(d, own_grad.len())?;
    let shift = if drift { linalg::sub(participants_mean_grad, own_grad) } else { vec![0.0; d] };
    ProxSubproblem::new(client, shift, prox_center, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopKind {
    /// |∇F(x)| ≤ θ λ |x - c|
    RelativeGrad,
    /// |∇F(x)| ≤ θ λ / (r + 1) · |x - c|, with c = x^r
    DaneDecaying,
    /// |∇F(x)|² ≤ θ² λ² |x - c|² + slack
    StochasticSlack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub kind: StopKind,
    pub theta: f64,
    #[serde(default)]
    pub slack: f64,
    #[serde(default = "default_cap")]
    pub max_oracle_calls: u64,
}

fn default_cap() -> u64 {
    DEFAULT_MAX_ORACLE_CALLS
}

impl StoppingRule {
    pub fn relative_grad(theta: f64) -> Self {
        StoppingRule { kind: StopKind::RelativeGrad, theta, slack: 0.0, max_oracle_calls: DEFAULT_MAX_ORACLE_CALLS }
    }

    pub fn dane_decaying(theta: f64) -> Self {
        StoppingRule { kind: StopKind::DaneDecaying, theta, slack: 0.0, max_oracle_calls: DEFAULT_MAX_ORACLE_CALLS }
    }

    pub fn stochastic_slack(theta: f64, slack: f64) -> Self {
        StoppingRule { kind: StopKind::StochasticSlack, theta, slack, max_oracle_calls: DEFAULT_MAX_ORACLE_CALLS }
    }

    pub fn with_cap(mut self, max_oracle_calls: u64) -> Self {
        self.max_oracle_calls = max_oracle_calls;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) || !(self.slack >= 0.0) || self.max_oracle_calls == 0 {
            return Err(Error::param("stopping rule needs theta > 0, slack >= 0 and a positive call cap"));
        }
        Ok(())
    }

    /// Rule evaluated on an already computed `∇F(x)`.
    pub fn accepts(&self, grad_f: &[f64], x: &[f64], prox_center: &[f64], lambda: f64, round: usize) -> bool {
        let dist = linalg::dist(x, prox_center);
        match self.kind {
            StopKind::RelativeGrad => linalg::norm(grad_f) <= self.theta * lambda * dist,
            StopKind::DaneDecaying => linalg::norm(grad_f) <= self.theta * lambda / (round as f64 + 1.0) * dist,
            StopKind::StochasticSlack => {
                let tl = self.theta * lambda;
                linalg::norm_sq(grad_f) <= tl * tl * dist * dist + self.slack
            }
        }
    }
}

/// Evaluates the rule at `x`; consumes one counted oracle call.
pub fn check_stop(rule: &StoppingRule, sub: &ProxSubproblem<'_>, x: &[f64], round: usize) -> bool {
    let (b, g) = sub.eval(x);
    sub.accepts(rule, x, &b, &g, round)
}
