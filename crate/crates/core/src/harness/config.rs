use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, DlOption};
use crate::error::{Error, Result};
use crate::local_solvers::LocalSolver;
use crate::problems::{EstimateMode, GeneratorParams, ProblemInstance};
use crate::subproblem::StoppingRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSource {
    Generate(GeneratorParams),
    /// A `.problem.json` file; relative paths resolve against the config file.
    Path(PathBuf),
}

/// How λ is chosen. δ_s and Δ_s are estimated for the configured s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaMode {
    Fixed {
        value: f64,
    },
    /// 2(δ_s + Δ_s), which is 2δ under full participation.
    TwoDelta,
    /// Local dissimilarity ratio between consecutive prox centers.
    Adaptive {
        #[serde(default = "default_lambda_floor")]
        floor: f64,
        #[serde(default)]
        initial: Option<f64>,
    },
    /// Partial participation, linear rate: 2(δ_s + Δ_s) + 4(n-s)/(s(n-1)) · ζ²/ε.
    Sampling,
    /// Partial participation for a fixed round budget R:
    /// 2(δ_s + Δ_s) + 4(n-s)R/(s(n-1)) · ζ²/ε. R defaults to `rounds`.
    Budgeted {
        #[serde(default)]
        budget: Option<usize>,
    },
}

fn default_lambda_floor() -> f64 {
    1e-2
}

impl Default for LambdaMode {
    fn default() -> Self {
        LambdaMode::TwoDelta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MuMode {
    /// Smallest client convexity constant.
    #[default]
    Exact,
    Zero,
    Override {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputPoint {
    #[default]
    LastX,
    WeightedAvg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPolicy {
    #[default]
    Fail,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlParams {
    pub option: DlOption,
    pub gamma: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub lambda: LambdaMode,
    #[serde(default)]
    pub mu_mode: MuMode,
    #[serde(default = "default_solver")]
    pub solver: LocalSolver,
    /// Defaults to relative_grad(1/2), or dane_decaying(1) for DANE.
    #[serde(default)]
    pub rule: Option<StoppingRule>,
    /// Participants per round; defaults to n.
    #[serde(default)]
    pub s: Option<usize>,
    pub rounds: usize,
    /// Stop once the output point is ε-accurate.
    #[serde(default)]
    pub target_eps: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_metric_point: OutputPoint,
    #[serde(default)]
    pub dl: Option<DlParams>,
    #[serde(default)]
    pub on_cap: CapPolicy,
    /// Dissimilarity estimator for λ; exact for quadratics by default.
    #[serde(default)]
    pub estimate: Option<EstimateMode>,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
}

fn default_solver() -> LocalSolver {
    LocalSolver::Gd { step: None }
}

fn default_reference_tol() -> f64 {
    1e-10
}

impl ExperimentConfig {
    /// Config with defaults for everything but the essentials.
    pub fn new(problem: ProblemSource, algorithm: Algorithm, rounds: usize) -> Self {
        ExperimentConfig {
            problem,
            algorithm,
            lambda: LambdaMode::default(),
            mu_mode: MuMode::default(),
            solver: default_solver(),
            rule: None,
            s: None,
            rounds,
            target_eps: None,
            seed: 0,
            output_metric_point: OutputPoint::default(),
            dl: None,
            on_cap: CapPolicy::default(),
            estimate: None,
            reference_tol: default_reference_tol(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config; relative problem paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let ProblemSource::Path(p) = &mut cfg.problem {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn effective_rule(&self) -> StoppingRule {
        self.rule.unwrap_or(match self.algorithm {
            Algorithm::Dane => StoppingRule::dane_decaying(1.0),
            _ => StoppingRule::relative_grad(0.5),
        })
    }

    /// Field checks that need no problem instance.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        self.effective_rule().validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(eps) = self.target_eps {
            if !(eps > 0.0) {
                return bad("target_eps must be positive");
            }
        }
        if self.s == Some(0) {
            return bad("s must be at least 1");
        }
        match self.lambda {
            LambdaMode::Fixed { value } if !(value > 0.0) || !value.is_finite() => return bad("fixed lambda must be positive"),
            LambdaMode::Adaptive { floor, initial } => {
                if !(floor > 0.0) || initial.is_some_and(|l| !(l > 0.0)) {
                    return bad("adaptive lambda needs a positive floor and initial value");
                }
            }
            LambdaMode::Sampling | LambdaMode::Budgeted { .. } if self.target_eps.is_none() => {
                return bad("sampling and budgeted lambda need target_eps");
            }
            LambdaMode::Budgeted { budget: None } if self.rounds == 0 => {
                return bad("budgeted lambda needs a round budget");
            }
            _ => {}
        }
        if let MuMode::Override { value } = self.mu_mode {
            if !(value >= 0.0) {
                return bad("mu override must be non-negative");
            }
        }
        match self.algorithm {
            Algorithm::SdaneDl => match self.dl {
                None => return bad("sdane_dl needs dl parameters (option, gamma, eta)"),
                Some(dl) if !(0.0..=1.0).contains(&dl.gamma) || !(dl.eta > 0.0) => {
                    return bad("dl.gamma must lie in [0, 1] and dl.eta must be positive");
                }
                _ => {}
            },
            Algorithm::Sppm if self.s.is_some_and(|s| s != 1) => {
                return bad("sppm is single-machine; leave s unset");
            }
            _ => {}
        }
        if !(self.reference_tol > 0.0) {
            return bad("reference_tol must be positive");
        }
        Ok(())
    }

    /// Cross-field checks against the loaded problem.
    pub fn validate_for(&self, problem: &ProblemInstance) -> Result<usize> {
        let n = problem.n();
        let s = self.s.unwrap_or(n);
        if self.algorithm == Algorithm::Sppm {
            return Ok(1);
        }
        if s > n {
            return Err(Error::Config(format!("s={s} exceeds n={n}")));
        }
        if self.algorithm == Algorithm::Dane && s != n {
            return Err(Error::Config("dane requires full participation (s = n)".into()));
        }
        if matches!(self.lambda, LambdaMode::Sampling | LambdaMode::Budgeted { .. }) && n < 2 {
            return Err(Error::Config("partial-participation lambda needs n >= 2".into()));
        }
        Ok(s)
    }

    pub fn load_problem(&self) -> Result<ProblemInstance> {
        match &self.problem {
            ProblemSource::Generate(g) => g.generate(),
            ProblemSource::Path(p) => ProblemInstance::load(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticParams;

    fn base() -> ExperimentConfig {
        ExperimentConfig::new(ProblemSource::Generate(GeneratorParams::Quadratic(QuadraticParams::default())), Algorithm::Sdane, 10)
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let json = r#"{
            "problem": {"generate": {"family": "quadratic", "n": 4, "m": 2, "d": 3, "l_max": 10.0, "seed": 1}},
            "algorithm": "acc_sdane",
            "lambda": {"mode": "fixed", "value": 2.0},
            "rounds": 5
        }"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::AccSdane);
        assert_eq!(cfg.solver, LocalSolver::Gd { step: None });
        assert_eq!(cfg.effective_rule(), StoppingRule::relative_grad(0.5));
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn dane_defaults_to_the_decaying_rule() {
        let mut cfg = base();
        cfg.algorithm = Algorithm::Dane;
        assert_eq!(cfg.effective_rule(), StoppingRule::dane_decaying(1.0));
    }

    #[test]
    fn cross_field_errors() {
        let p = QuadraticParams { n: 4, m: 1, d: 2, ..Default::default() }.generate().unwrap();
        let mut cfg = base();
        cfg.algorithm = Algorithm::Dane;
        cfg.s = Some(2);
        assert!(matches!(cfg.validate_for(&p), Err(Error::Config(_))));
        cfg.s = Some(9);
        cfg.algorithm = Algorithm::Sdane;
        assert!(cfg.validate_for(&p).is_err());

        let mut cfg = base();
        cfg.lambda = LambdaMode::Budgeted { budget: None };
        assert!(cfg.validate().is_err());
        cfg.target_eps = Some(1e-3);
        assert!(cfg.validate().is_ok());

        let mut cfg = base();
        cfg.algorithm = Algorithm::SdaneDl;
        assert!(cfg.validate().is_err());
        cfg.dl = Some(DlParams { option: DlOption::Plain, gamma: 0.99, eta: 0.01 });
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn malformed_json_is_a_config_error() {
        let e = ExperimentConfig::from_json("{\"algorithm\": \"nope\"}").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
