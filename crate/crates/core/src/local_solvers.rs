//! Inner solvers for a [`ProxSubproblem`].
//!
//! Every solver evaluates its stopping rule on a gradient it already holds,
//! so `oracle_calls` counts exactly the deterministic gradient evaluations
//! performed, and the returned gradients are reused by the server.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problems::Oracle;
use crate::rng::SimRng;
use crate::subproblem::{ProxSubproblem, StoppingRule};

pub const DEFAULT_CHECK_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Rule,
    Cap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolveResult {
    pub x_out: Vec<f64>,
    /// ∇F(x_out).
    pub grad_at_x_out: Vec<f64>,
    /// ∇f_i(x_out), the base gradient sent to the server.
    pub base_grad_at_x_out: Vec<f64>,
    pub oracle_calls: u64,
    pub stochastic_oracle_calls: u64,
    pub stopped_by: StopReason,
}

/// Solver choice; defaults are derived from the subproblem constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalSolver {
    /// Gradient descent; `step` defaults to 1/(L+λ).
    Gd {
        #[serde(default)]
        step: Option<f64>,
    },
    Fgd,
    /// Mini-batch SGD with the weighted-average output. `h` defaults to
    /// 2(L+λ); `k_cap` bounds the number of stochastic steps.
    Sgd {
        #[serde(default)]
        h: Option<f64>,
        batch: usize,
        #[serde(default = "default_check_every")]
        check_every: usize,
        k_cap: usize,
    },
    /// Closed-form solve when available, otherwise a tightly converged FGD.
    Exact,
}

fn default_check_every() -> usize {
    DEFAULT_CHECK_EVERY
}

impl LocalSolver {
    pub fn solve(
        &self,
        sub: &ProxSubproblem<'_>,
        x0: &[f64],
        rule: &StoppingRule,
        round: usize,
        rng: &mut SimRng,
    ) -> Result<LocalSolveResult> {
        match *self {
            LocalSolver::Gd { step } => {
                let step = step.unwrap_or_else(|| 1.0 / sub.smoothness());
                solve_gd(sub, x0, step, rule, round)
            }
            LocalSolver::Fgd => Ok(solve_fgd(sub, x0, rule, round)),
            LocalSolver::Sgd { h, batch, check_every, k_cap } => {
                let h = h.unwrap_or_else(|| 2.0 * sub.smoothness());
                solve_sgd(sub, x0, h, batch, check_every, k_cap, rule, round, rng)
            }
            LocalSolver::Exact => Ok(solve_exact(sub, x0)),
        }
    }
}

fn finish(x: Vec<f64>, base: Vec<f64>, grad: Vec<f64>, calls: u64, stoch: u64, by: StopReason) -> LocalSolveResult {
    LocalSolveResult {
        x_out: x,
        grad_at_x_out: grad,
        base_grad_at_x_out: base,
        oracle_calls: calls,
        stochastic_oracle_calls: stoch,
        stopped_by: by,
    }
}

/// x_{k+1} = x_k - step ∇F(x_k); returns the first iterate passing `rule`.
pub fn solve_gd(sub: &ProxSubproblem<'_>, x0: &[f64], step: f64, rule: &StoppingRule, round: usize) -> Result<LocalSolveResult> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::param(format!("gradient step must be positive, got {step}")));
    }
    let monotone = step <= 1.0 / sub.smoothness();
    let mut x = x0.to_vec();
    let mut calls = 0;
    let mut prev_norm = f64::INFINITY;
    let mut noise_floor = 0.0;
    loop {
        let (b, g) = sub.eval(&x);
        calls += 1;
        if cfg!(debug_assertions) && monotone {
            // Gradient norms are non-increasing on convex smooth F, up to
            // the rounding error of evaluating ∇F at x.
            let gn = linalg::norm(&g);
            if calls == 1 {
                noise_floor = 1e-12 * gn;
            }
            let rounding = 64.0 * sub.gradient_noise(&x, &b);
            debug_assert!(gn <= prev_norm + noise_floor + rounding, "gradient norm increased: {prev_norm} -> {gn}");
            prev_norm = gn;
        }
        if sub.accepts(rule, &x, &b, &g, round) {
            return Ok(finish(x, b, g, calls, 0, StopReason::Rule));
        }
        if calls >= rule.max_oracle_calls {
            return Ok(finish(x, b, g, calls, 0, StopReason::Cap));
        }
        linalg::axpy(-step, &g, &mut x);
    }
}

/// Nesterov's constant-momentum method for the (μ+λ)-convex, (L+λ)-smooth
/// subproblem; momentum starts fresh on every call.
pub fn solve_fgd(sub: &ProxSubproblem<'_>, x0: &[f64], rule: &StoppingRule, round: usize) -> LocalSolveResult {
    fgd_until(sub, x0, rule.max_oracle_calls, |b, g, y| sub.accepts(rule, y, b, g, round))
}

fn fgd_until(
    sub: &ProxSubproblem<'_>,
    x0: &[f64],
    cap: u64,
    mut stop: impl FnMut(&[f64], &[f64], &[f64]) -> bool,
) -> LocalSolveResult {
    let l = sub.smoothness();
    let mu = sub.convexity();
    let q = (l / mu).sqrt();
    let beta = (q - 1.0) / (q + 1.0);
    let mut x_prev = x0.to_vec();
    let mut y = x0.to_vec();
    let mut calls = 0;
    loop {
        let (b, g) = sub.eval(&y);
        calls += 1;
        if stop(&b, &g, &y) {
            return finish(y, b, g, calls, 0, StopReason::Rule);
        }
        if calls >= cap {
            return finish(y, b, g, calls, 0, StopReason::Cap);
        }
        let mut x = y.clone();
        linalg::axpy(-1.0 / l, &g, &mut x);
        y = x.clone();
        linalg::axpy(beta, &linalg::sub(&x, &x_prev), &mut y);
        x_prev = x;
    }
}

const EXACT_FALLBACK_CAP: u64 = 1_000_000;

/// Exact subproblem solve: closed form when the base supports it (one
/// counted call for the returned gradient), otherwise FGD until the
/// gradient is at rounding level.
pub fn solve_exact(sub: &ProxSubproblem<'_>, x0: &[f64]) -> LocalSolveResult {
    if let Some(x) = sub.exact_minimizer() {
        let (b, g) = sub.eval(&x);
        return finish(x, b, g, 1, 0, StopReason::Rule);
    }
    let (_, g0) = sub.eval(x0);
    let tol = 1e-13 * linalg::norm(&g0).max(1e-300);
    let mut r = fgd_until(sub, x0, EXACT_FALLBACK_CAP, |b, g, y| {
        let gn = linalg::norm(g);
        gn <= tol || gn <= sub.gradient_noise(y, b)
    });
    r.oracle_calls += 1;
    r
}

/// Shifted mini-batch SGD with constant step 1/H, returning the weighted
/// average x̄_K = Σ q^{-k} z_k / Σ q^{-k}, q = (H - μ - λ)/H.
///
/// The rule is checked on x̄ every `check_every` steps with one exact
/// gradient each; `k_cap` bounds the stochastic steps.
#[allow(clippy::too_many_arguments)]
pub fn solve_sgd(
    sub: &ProxSubproblem<'_>,
    x0: &[f64],
    h: f64,
    batch: usize,
    check_every: usize,
    k_cap: usize,
    rule: &StoppingRule,
    round: usize,
    rng: &mut SimRng,
) -> Result<LocalSolveResult> {
    if batch == 0 {
        return Err(Error::param("SGD batch size must be positive"));
    }
    averaged_descent(sub, x0, h, check_every, k_cap, rule, round, |z| sub.stoch_grad_full(z, batch, rng))
}

/// The deterministic counterpart of [`solve_sgd`]: the same damped iteration
/// and averaging driven by exact gradients.
pub fn solve_damped_gd(
    sub: &ProxSubproblem<'_>,
    x0: &[f64],
    h: f64,
    check_every: usize,
    k_cap: usize,
    rule: &StoppingRule,
    round: usize,
) -> Result<LocalSolveResult> {
    averaged_descent(sub, x0, h, check_every, k_cap, rule, round, |z| sub.eval(z).1)
}

#[allow(clippy::too_many_arguments)]
fn averaged_descent(
    sub: &ProxSubproblem<'_>,
    x0: &[f64],
    h: f64,
    check_every: usize,
    k_cap: usize,
    rule: &StoppingRule,
    round: usize,
    mut step_grad: impl FnMut(&[f64]) -> Vec<f64>,
) -> Result<LocalSolveResult> {
    let l = sub.smoothness();
    if !(h > l) || !h.is_finite() {
        return Err(Error::param(format!("SGD needs H > L + λ = {l}, got {h}")));
    }
    let q = (h - sub.convexity()) / h;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param(format!("SGD averaging ratio q = {q} must lie in (0, 1)")));
    }
    if check_every == 0 || k_cap == 0 {
        return Err(Error::param("check_every and k_cap must be positive"));
    }
    let calls_before = sub.oracle_calls();
    let stoch_before = sub.stochastic_oracle_calls();
    let mut z = x0.to_vec();
    let mut avg = x0.to_vec();
    let mut weight_sum = 0.0;
    for k in 1..=k_cap {
        let g = step_grad(&z);
        linalg::axpy(-1.0 / h, &g, &mut z);
        // S_k = 1 + q S_{k-1} gives the weight of z_k in the running average.
        weight_sum = 1.0 + q * weight_sum;
        let w = 1.0 / weight_sum;
        for (a, zk) in avg.iter_mut().zip(&z) {
            *a += w * (zk - *a);
        }
        if k % check_every == 0 || k == k_cap {
            let (b, g) = sub.eval(&avg);
            let by = if sub.accepts(rule, &avg, &b, &g, round) {
                Some(StopReason::Rule)
            } else if k == k_cap {
                Some(StopReason::Cap)
            } else {
                None
            };
            if let Some(by) = by {
                let calls = sub.oracle_calls() - calls_before;
                let stoch = sub.stochastic_oracle_calls() - stoch_before;
                return Ok(finish(avg, b, g, calls, stoch, by));
            }
        }
    }
    unreachable!("the loop returns at k = k_cap")
}
