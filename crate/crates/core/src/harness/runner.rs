use rayon::prelude::*;

use super::config::{CapPolicy, ExperimentConfig, LambdaMode, MuMode, OutputPoint};
use super::trace::TraceRecord;
use crate::algorithms::{
    acc_sdane_round, adaptive_lambda, dane_round, fedprox_round, sdane_dl_round, sdane_round, stabilized_ppm_step,
    Algorithm, RoundContext, RoundOutput, ServerState,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::local_solvers::StopReason;
use crate::problems::{
    estimate_bgv, estimate_ed_with, estimate_sod_with, reference_solve, EstimateMode, EstimateOptions, Oracle,
    ProblemInstance,
};
use crate::rng;
use crate::sampling::sample_subset;

/// Probe count for the ζ estimate behind the partial-participation λ.
pub const LAMBDA_PROBES: usize = 64;

/// A finished run: the trace plus the raw iterates behind it.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub records: Vec<TraceRecord>,
    /// x^0, ..., x^R.
    pub x_history: Vec<Vec<f64>>,
    /// v^0, ..., v^R.
    pub v_history: Vec<Vec<f64>>,
    /// A_0, ..., A_R (zeros for non-accelerated methods).
    pub a_history: Vec<f64>,
    pub b_history: Vec<f64>,
    /// λ used in rounds 1..=R, with the initial λ first.
    pub lambda_history: Vec<f64>,
    pub mu: f64,
    /// Rounds in which some client hit its call cap, with the client ids.
    pub capped: Vec<(usize, Vec<usize>)>,
    pub final_state: ServerState,
    pub reached_eps: bool,
}

fn default_mode(p: &ProblemInstance) -> EstimateMode {
    if p.all_quadratic() {
        EstimateMode::ExactQuadratic
    } else {
        EstimateMode::PowerIteration
    }
}

/// λ for the configured mode. `s` is the participation level.
pub fn resolve_lambda(cfg: &ExperimentConfig, p: &ProblemInstance, s: usize) -> Result<f64> {
    let mode = cfg.estimate.unwrap_or_else(|| default_mode(p));
    let opts = EstimateOptions { seed: p.seed, ..Default::default() };
    let base = || -> Result<f64> {
        let delta = estimate_sod_with(p, s, mode, &opts)?.value;
        let ext = estimate_ed_with(p, s, mode, &opts)?.value;
        Ok(2.0 * (delta + ext))
    };
    let sampling_term = |budget: f64| -> Result<f64> {
        let n = p.n() as f64;
        let sf = s as f64;
        let eps = cfg.target_eps.ok_or_else(|| Error::Config("lambda mode needs target_eps".into()))?;
        let bgv = estimate_bgv(p, LAMBDA_PROBES)?;
        let zeta = bgv.ball_bound.unwrap_or(bgv.zeta);
        Ok(4.0 * (n - sf) * budget / (sf * (n - 1.0)) * zeta * zeta / eps)
    };
    let lambda = match cfg.lambda {
        LambdaMode::Fixed { value } => value,
        LambdaMode::TwoDelta => base()?,
        LambdaMode::Adaptive { floor, initial } => initial.unwrap_or(floor),
        LambdaMode::Sampling => base()? + if s < p.n() { sampling_term(1.0)? } else { 0.0 },
        LambdaMode::Budgeted { budget } => {
            let r = budget.unwrap_or(cfg.rounds) as f64;
            base()? + if s < p.n() { sampling_term(r)? } else { 0.0 }
        }
    };
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!(
            "resolved lambda {lambda} is not positive; the clients may be identical, use a fixed lambda"
        )));
    }
    Ok(lambda)
}

fn resolve_mu(cfg: &ExperimentConfig, p: &ProblemInstance) -> f64 {
    match cfg.mu_mode {
        MuMode::Exact => p.min_convexity().max(0.0),
        MuMode::Zero => 0.0,
        MuMode::Override { value } => value,
    }
}

/// Loads or generates the problem, solves for x* if needed, then runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut p = cfg.load_problem()?;
    run_on_problem(cfg, &mut p)
}

/// Gradients of h_i^S = f_S - f_i at `x` over `sample`, in sample order.
fn h_grads(p: &ProblemInstance, sample: &[usize], x: &[f64]) -> Vec<Vec<f64>> {
    let own: Vec<Vec<f64>> = sample.par_iter().map(|&i| p.clients[i].grad(x)).collect();
    let mean = linalg::mean(&own, p.d);
    own.iter().map(|g| linalg::sub(&mean, g)).collect()
}

struct Tracker<'a> {
    p: &'a ProblemInstance,
    x_star: &'a [f64],
    alg: Algorithm,
    comm_rounds: u64,
    vectors: u64,
    oracle_total: u64,
    oracle_parallel: u64,
}

impl Tracker<'_> {
    fn gap(&self, x: &[f64]) -> f64 {
        self.p.gap(x).expect("reference solution present")
    }

    fn record(&self, state: &ServerState, lambda_used: f64, s_used: usize) -> TraceRecord {
        let f_gap_last = self.gap(&state.x);
        let dist_sq_v = linalg::dist_sq(&state.v, self.x_star);
        let potential_sdane = match self.alg {
            Algorithm::Sdane | Algorithm::SdaneDl | Algorithm::Sppm => Some(0.5 * dist_sq_v),
            _ => None,
        };
        let potential_acc = match self.alg {
            Algorithm::AccSdane => Some(state.a_sum * f_gap_last + 0.5 * state.b_coef * dist_sq_v),
            _ => None,
        };
        TraceRecord {
            round: state.round,
            f_gap_last,
            f_gap_avg: self.gap(state.averaged_output()),
            dist_sq_v,
            dist_sq_x: linalg::dist_sq(&state.x, self.x_star),
            lambda_used,
            s_used,
            cum_comm_rounds: self.comm_rounds,
            cum_vectors: self.vectors,
            cum_oracle_total: self.oracle_total,
            cum_oracle_parallel: self.oracle_parallel,
            potential_sdane,
            potential_acc,
        }
    }

    fn reached(&self, cfg: &ExperimentConfig, state: &ServerState, eps: f64) -> bool {
        let (point, gap) = match cfg.output_metric_point {
            OutputPoint::LastX => (&state.x[..], self.gap(&state.x)),
            OutputPoint::WeightedAvg => (state.averaged_output(), self.gap(state.averaged_output())),
        };
        gap <= eps && (state.mu <= 0.0 || 0.5 * state.mu * linalg::dist_sq(point, self.x_star) <= eps)
    }
}

/// Runs `cfg` on an already loaded problem. x* is computed in place when
/// the problem lacks it.
pub fn run_on_problem(cfg: &ExperimentConfig, p: &mut ProblemInstance) -> Result<RunReport> {
    cfg.validate()?;
    let s = cfg.validate_for(p)?;
    if p.x_star.is_none() || p.f_star.is_none() {
        reference_solve(p, cfg.reference_tol)?;
    }
    let p: &ProblemInstance = p;
    let x_star = p.x_star.as_deref().expect("reference solution present");
    let lambda0 = resolve_lambda(cfg, p, s)?;
    let mu = resolve_mu(cfg, p);
    let rule = cfg.effective_rule();
    let n = p.n();

    let mut state = ServerState::new(vec![0.0; p.d], lambda0, mu);
    let mut tr = Tracker {
        p,
        x_star,
        alg: cfg.algorithm,
        comm_rounds: 0,
        vectors: 0,
        oracle_total: 0,
        oracle_parallel: 0,
    };
    let mut report = RunReport {
        records: vec![tr.record(&state, lambda0, 0)],
        x_history: vec![state.x.clone()],
        v_history: vec![state.v.clone()],
        a_history: vec![state.a_sum],
        b_history: vec![state.b_coef],
        lambda_history: vec![lambda0],
        mu,
        capped: Vec::new(),
        final_state: state.clone(),
        reached_eps: false,
    };
    let mut reached = cfg.target_eps.is_some_and(|e| tr.reached(cfg, &state, e));

    // Adaptive λ: h-gradients at the previous center, keyed by sample.
    let mut h_cache: Option<(Vec<usize>, Vec<Vec<f64>>)> = None;
    let mut v_prev: Option<Vec<f64>> = None;

    for r in 0..cfg.rounds {
        if reached {
            break;
        }
        let sample: Vec<usize> = if s == n {
            (0..n).collect()
        } else {
            sample_subset(n, s, &mut rng::stream(cfg.seed, r as u64, rng::SAMPLING_LANE))?.ids
        };

        let mut extra_total = 0u64;
        let mut extra_parallel = 0u64;
        if let LambdaMode::Adaptive { floor, .. } = cfg.lambda {
            if cfg.algorithm != Algorithm::Sppm {
                let curr = h_grads(p, &sample, &state.v);
                extra_total += sample.len() as u64;
                extra_parallel += 1;
                if let Some(vp) = &v_prev {
                    let prev = match h_cache.take() {
                        Some((ids, g)) if ids == sample => g,
                        _ => {
                            extra_total += sample.len() as u64;
                            extra_parallel += 1;
                            h_grads(p, &sample, vp)
                        }
                    };
                    state.lambda = adaptive_lambda(&state.v, vp, &curr, &prev, state.lambda, floor);
                }
                h_cache = Some((sample.clone(), curr));
                v_prev = Some(state.v.clone());
            }
        }

        let ctx = RoundContext { problem: p, solver: &cfg.solver, rule: &rule, seed: cfg.seed };
        let lambda_used = state.lambda;
        let out: RoundOutput = match cfg.algorithm {
            Algorithm::Sdane => sdane_round(&state, &ctx, &sample)?,
            Algorithm::AccSdane => acc_sdane_round(&state, &ctx, &sample)?,
            Algorithm::Dane => dane_round(&state, &ctx)?,
            Algorithm::Fedprox => fedprox_round(&state, &ctx, &sample)?,
            Algorithm::SdaneDl => {
                let dl = cfg.dl.ok_or_else(|| Error::Config("sdane_dl needs dl parameters".into()))?;
                sdane_dl_round(&state, &ctx, &sample, dl.option, dl.gamma, dl.eta)?
            }
            Algorithm::Sppm => {
                let f = p.objective();
                let (x, v, res) =
                    stabilized_ppm_step(&state.v, &f as &dyn Oracle, state.lambda, mu, &cfg.solver, &rule, r, cfg.seed)?;
                let calls = res.oracle_calls + res.stochastic_oracle_calls;
                let capped = if res.stopped_by == StopReason::Cap { vec![0] } else { Vec::new() };
                let mut next = state.clone();
                next.advance(x, v);
                RoundOutput {
                    new_state: next,
                    sample: vec![0],
                    per_client: vec![res],
                    comm_vectors_up: 0,
                    comm_vectors_down: 0,
                    oracle_total: calls,
                    oracle_parallel: calls,
                    capped,
                }
            }
        };
        if !out.capped.is_empty() {
            if cfg.on_cap == CapPolicy::Fail {
                return Err(Error::SolverCap { client: out.capped[0], round: r });
            }
            report.capped.push((r, out.capped.clone()));
        }

        tr.comm_rounds += 1;
        tr.vectors += out.comm_vectors_up + out.comm_vectors_down;
        tr.oracle_total += out.oracle_total + extra_total;
        tr.oracle_parallel += out.oracle_parallel + extra_parallel;
        state = out.new_state;

        report.records.push(tr.record(&state, lambda_used, out.sample.len()));
        report.x_history.push(state.x.clone());
        report.v_history.push(state.v.clone());
        report.a_history.push(state.a_sum);
        report.b_history.push(state.b_coef);
        report.lambda_history.push(lambda_used);
        reached = cfg.target_eps.is_some_and(|e| tr.reached(cfg, &state, e));
    }
    report.reached_eps = reached;
    report.final_state = state;
    Ok(report)
}
