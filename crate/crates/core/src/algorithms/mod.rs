//! Server-side round engines and their scalar schedules.
//!
//! A round broadcasts a center, lets every sampled client solve its
//! subproblem in parallel, then reduces the replies in ascending client
//! order so results do not depend on thread scheduling.

mod coefficients;
mod rounds;

pub use coefficients::{acc_coefficients, acc_prox_center, adaptive_lambda, dl_prox_center, sdane_prox_center, AccStep};
pub use rounds::{
    acc_sdane_round, dane_round, fedprox_round, sdane_dl_round, sdane_round, stabilized_ppm_step, RoundContext,
};

use serde::{Deserialize, Serialize};

use crate::local_solvers::LocalSolveResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sdane,
    AccSdane,
    Dane,
    Fedprox,
    SdaneDl,
    Sppm,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sdane => "sdane",
            Algorithm::AccSdane => "acc_sdane",
            Algorithm::Dane => "dane",
            Algorithm::Fedprox => "fedprox",
            Algorithm::SdaneDl => "sdane_dl",
            Algorithm::Sppm => "sppm",
        }
    }
}

/// Subproblem variant of S-DANE-DL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DlOption {
    /// Drift-corrected subproblem.
    #[serde(alias = "1")]
    DriftCorrected,
    /// Plain proximal subproblem.
    #[serde(alias = "2")]
    Plain,
}

/// Vectors exchanged per participating client per round, split as
/// (server to client, client to server).
pub fn vectors_per_client(alg: Algorithm, dl: DlOption) -> (u64, u64) {
    match alg {
        // Down: center, mean gradient. Up: gradient at center, x_i, ∇f_i(x_i).
        Algorithm::Sdane | Algorithm::AccSdane => (2, 3),
        // Down: x^r, ∇f(x^r). Up: gradient at x^r, x_i.
        Algorithm::Dane => (2, 2),
        Algorithm::Fedprox => (1, 1),
        Algorithm::SdaneDl => match dl {
            DlOption::DriftCorrected => (2, 3),
            // Down: v. Up: x_i, ∇f_i(x_i).
            DlOption::Plain => (1, 2),
        },
        Algorithm::Sppm => (0, 0),
    }
}

/// Running value of Σ p_r x^r / Σ p_r-style weighted averages where each
/// new point's weight is the previous one's times `p`.
///
/// Stored as the current average plus the ratio of the total weight to the
/// newest weight, which stays bounded by p/(p-1) and never overflows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightedAverage {
    point: Option<Vec<f64>>,
    ratio: f64,
}

impl WeightedAverage {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: &[f64], p: f64) {
        match &mut self.point {
            None => {
                self.point = Some(x.to_vec());
                self.ratio = 1.0;
            }
            Some(avg) => {
                self.ratio = 1.0 + self.ratio / p;
                let w = 1.0 / self.ratio;
                for (a, xi) in avg.iter_mut().zip(x) {
                    *a += w * (xi - *a);
                }
            }
        }
    }

    pub fn get(&self) -> Option<&[f64]> {
        self.point.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Extrapolation point of the accelerated method.
    pub y: Option<Vec<f64>>,
    pub a_sum: f64,
    pub b_coef: f64,
    pub round: usize,
    pub lambda: f64,
    pub mu: f64,
    /// Weighted average of x^1, ..., x^r with weights (1 + μ/λ)^r.
    pub x_avg: WeightedAverage,
}

impl ServerState {
    /// x^0 = v^0 = `x0`, A_0 = 0, B_0 = 1.
    pub fn new(x0: Vec<f64>, lambda: f64, mu: f64) -> Self {
        ServerState {
            v: x0.clone(),
            x: x0,
            y: None,
            a_sum: 0.0,
            b_coef: 1.0,
            round: 0,
            lambda,
            mu,
            x_avg: WeightedAverage::new(),
        }
    }

    /// The averaged output x̄^r, or x^0 before the first round.
    pub fn averaged_output(&self) -> &[f64] {
        self.x_avg.get().unwrap_or(&self.x)
    }

    pub(crate) fn advance(&mut self, x: Vec<f64>, v: Vec<f64>) {
        let p = 1.0 + self.mu / self.lambda;
        self.x_avg.push(&x, p);
        self.x = x;
        self.v = v;
        self.round += 1;
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub new_state: ServerState,
    /// Sorted participant ids.
    pub sample: Vec<usize>,
    pub per_client: Vec<LocalSolveResult>,
    pub comm_vectors_up: u64,
    pub comm_vectors_down: u64,
    /// Gradient evaluations this round, including gradients at the center.
    pub oracle_total: u64,
    /// Largest per-client evaluation count this round.
    pub oracle_parallel: u64,
    /// Clients whose solver stopped at its cap.
    pub capped: Vec<usize>,
}
