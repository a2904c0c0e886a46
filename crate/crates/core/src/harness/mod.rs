//! Declarative experiments: configuration, the round loop with metrics,
//! trace persistence and trace comparison.

mod compare;
mod config;
mod runner;
mod trace;

pub use compare::{compare, write_plot_csv, Assertion, ComparisonReport, GapMetric, PairRelation, Relation, TraceSummary};
pub use config::{CapPolicy, DlParams, ExperimentConfig, LambdaMode, MuMode, OutputPoint, ProblemSource};
pub use runner::{resolve_lambda, run_experiment, run_on_problem, RunReport, LAMBDA_PROBES};
pub use trace::{parse_trace, read_trace, render_trace, write_trace, TraceFormat, TraceRecord, TRACE_HEADER};
