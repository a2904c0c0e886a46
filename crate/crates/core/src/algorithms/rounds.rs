use rayon::prelude::*;

use super::{
    acc_coefficients, acc_prox_center, dl_prox_center, sdane_prox_center, vectors_per_client, Algorithm, DlOption,
    RoundOutput, ServerState,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::local_solvers::{LocalSolveResult, LocalSolver, StopReason};
use crate::problems::{Oracle, ProblemInstance};
use crate::rng;
use crate::subproblem::{build_subproblem, StoppingRule};

/// Everything a round needs besides the server state and the sample.
#[derive(Clone, Copy)]
pub struct RoundContext<'a> {
    pub problem: &'a ProblemInstance,
    pub solver: &'a LocalSolver,
    pub rule: &'a StoppingRule,
    /// Master seed; client i in round r draws from stream (r, 1 + i).
    pub seed: u64,
}

struct ClientPhase {
    results: Vec<LocalSolveResult>,
    x_mean: Vec<f64>,
    g_mean: Vec<f64>,
    center_calls: u64,
}

fn validate_sample(problem: &ProblemInstance, sample: &[usize]) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::param("a round needs at least one participant"));
    }
    if sample.windows(2).any(|w| w[0] >= w[1]) || sample.iter().any(|&i| i >= problem.n()) {
        return Err(Error::param("sample ids must be sorted, distinct and below n"));
    }
    Ok(())
}

/// Parallel local solves around `center`; replies are reduced in sample
/// order.
fn client_phase(
    ctx: &RoundContext<'_>,
    sample: &[usize],
    center: &[f64],
    lambda: f64,
    drift: bool,
    round: usize,
) -> Result<ClientPhase> {
    validate_sample(ctx.problem, sample)?;
    let d = ctx.problem.d;
    let clients = &ctx.problem.clients;
    let (own, mean, center_calls) = if drift {
        let own: Vec<Vec<f64>> = sample.par_iter().map(|&i| clients[i].grad(center)).collect();
        let mean = linalg::mean(&own, d);
        (own, mean, 1)
    } else {
        (Vec::new(), vec![0.0; d], 0)
    };
    let results = sample
        .par_iter()
        .enumerate()
        .map(|(slot, &i)| {
            let zero;
            let own_grad = if drift {
                &own[slot]
            } else {
                zero = vec![0.0; d];
                &zero
            };
            let sub = build_subproblem(&clients[i], &mean, own_grad, center.to_vec(), lambda, drift)?;
            let mut r = rng::stream(ctx.seed, round as u64, rng::client_lane(i));
            ctx.solver.solve(&sub, center, ctx.rule, round, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    let x_mean = linalg::mean(results.iter().map(|r| &r.x_out), d);
    let g_mean = linalg::mean(results.iter().map(|r| &r.base_grad_at_x_out), d);
    Ok(ClientPhase { results, x_mean, g_mean, center_calls })
}

fn output(state: ServerState, sample: &[usize], phase: ClientPhase, alg: Algorithm, dl: DlOption) -> RoundOutput {
    let (down, up) = vectors_per_client(alg, dl);
    let s = sample.len() as u64;
    let per: Vec<u64> =
        phase.results.iter().map(|r| r.oracle_calls + r.stochastic_oracle_calls + phase.center_calls).collect();
    let capped = sample
        .iter()
        .zip(&phase.results)
        .filter(|(_, r)| r.stopped_by == StopReason::Cap)
        .map(|(&i, _)| i)
        .collect();
    RoundOutput {
        new_state: state,
        sample: sample.to_vec(),
        per_client: phase.results,
        comm_vectors_up: up * s,
        comm_vectors_down: down * s,
        oracle_total: per.iter().sum(),
        oracle_parallel: per.iter().copied().max().unwrap_or(0),
        capped,
    }
}

/// One S-DANE round: drift-corrected subproblems centered at v^r, then
/// x^{r+1} = mean of local solutions and the closed-form v^{r+1}.
pub fn sdane_round(state: &ServerState, ctx: &RoundContext<'_>, sample: &[usize]) -> Result<RoundOutput> {
    let phase = client_phase(ctx, sample, &state.v, state.lambda, true, state.round)?;
    let v_next = sdane_prox_center(&state.v, &phase.x_mean, &phase.g_mean, state.lambda, state.mu);
    let mut next = state.clone();
    next.advance(phase.x_mean.clone(), v_next);
    Ok(output(next, sample, phase, Algorithm::Sdane, DlOption::DriftCorrected))
}

/// One Acc-S-DANE round: coefficient step, extrapolation
/// y^r = (A_r x^r + a v^r)/A_{r+1}, subproblems centered at y^r.
pub fn acc_sdane_round(state: &ServerState, ctx: &RoundContext<'_>, sample: &[usize]) -> Result<RoundOutput> {
    let step = acc_coefficients(state.a_sum, state.b_coef, state.lambda, state.mu);
    let wx = state.a_sum / step.a_sum_next;
    let wv = step.a_next / step.a_sum_next;
    let y: Vec<f64> = state.x.iter().zip(&state.v).map(|(x, v)| wx * x + wv * v).collect();
    let phase = client_phase(ctx, sample, &y, state.lambda, true, state.round)?;
    let v_next = acc_prox_center(&state.v, &phase.x_mean, &phase.g_mean, step.a_next, state.b_coef, state.mu);
    let mut next = state.clone();
    next.a_sum = step.a_sum_next;
    next.b_coef = step.b_next;
    next.y = Some(y);
    next.advance(phase.x_mean.clone(), v_next);
    Ok(output(next, sample, phase, Algorithm::AccSdane, DlOption::DriftCorrected))
}

/// One DANE round: every client, drift-corrected subproblems centered at
/// x^r. v tracks x.
pub fn dane_round(state: &ServerState, ctx: &RoundContext<'_>) -> Result<RoundOutput> {
    let sample: Vec<usize> = (0..ctx.problem.n()).collect();
    let phase = client_phase(ctx, &sample, &state.x, state.lambda, true, state.round)?;
    let mut next = state.clone();
    next.advance(phase.x_mean.clone(), phase.x_mean.clone());
    Ok(output(next, &sample, phase, Algorithm::Dane, DlOption::DriftCorrected))
}

/// One FedProx round: plain proximal subproblems centered at x^r.
pub fn fedprox_round(state: &ServerState, ctx: &RoundContext<'_>, sample: &[usize]) -> Result<RoundOutput> {
    let phase = client_phase(ctx, sample, &state.x, state.lambda, false, state.round)?;
    let mut next = state.clone();
    next.advance(phase.x_mean.clone(), phase.x_mean.clone());
    Ok(output(next, sample, phase, Algorithm::Fedprox, DlOption::Plain))
}

/// One S-DANE-DL round: subproblems centered at v^r (drift-corrected or
/// plain), then v^{r+1} = γ x^{r+1} + (1-γ) v^r - η ḡ.
pub fn sdane_dl_round(
    state: &ServerState,
    ctx: &RoundContext<'_>,
    sample: &[usize],
    option: DlOption,
    gamma: f64,
    eta: f64,
) -> Result<RoundOutput> {
    if !(0.0..=1.0).contains(&gamma) || !(eta > 0.0) {
        return Err(Error::param("S-DANE-DL needs gamma in [0, 1] and eta > 0"));
    }
    let drift = option == DlOption::DriftCorrected;
    let phase = client_phase(ctx, sample, &state.v, state.lambda, drift, state.round)?;
    let v_next = dl_prox_center(&state.v, &phase.x_mean, &phase.g_mean, gamma, eta);
    let mut next = state.clone();
    next.advance(phase.x_mean.clone(), v_next);
    Ok(output(next, sample, phase, Algorithm::SdaneDl, option))
}

/// Single-machine stabilized proximal point step:
/// x_{k+1} ≈ argmin f(x) + (λ/2)|x - v_k|², then
/// v_{k+1} = (μ x_{k+1} + λ v_k - ∇f(x_{k+1}))/(μ + λ).
///
/// Client-stream randomness uses lane 0's client stream, matching a
/// one-client S-DANE round.
#[allow(clippy::too_many_arguments)]
pub fn stabilized_ppm_step(
    v: &[f64],
    f: &dyn Oracle,
    lambda: f64,
    mu: f64,
    solver: &LocalSolver,
    rule: &StoppingRule,
    round: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>, LocalSolveResult)> {
    let d = f.dim();
    let sub = build_subproblem(f, &vec![0.0; d], &vec![0.0; d], v.to_vec(), lambda, false)?;
    let mut r = rng::stream(seed, round as u64, rng::client_lane(0));
    let res = solver.solve(&sub, v, rule, round, &mut r)?;
    let v_next = sdane_prox_center(v, &res.x_out, &res.base_grad_at_x_out, lambda, mu);
    Ok((res.x_out.clone(), v_next, res))
}
