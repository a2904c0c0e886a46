use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sdane_core::harness::{
    compare, read_trace, run_experiment, write_plot_csv, write_trace, ExperimentConfig, GapMetric, ProblemSource,
    TraceFormat,
};
use sdane_core::problems::{dissimilarity_report, EstimateMode, EstimateOptions, GeneratorParams, ProblemInstance};
use sdane_core::{Error, Result};

#[derive(Parser)]
#[command(name = "sdane-sim", version, about = "Distributed proximal-point optimization simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a problem instance and write it as .problem.json.
    Gen {
        /// Generator parameters, or an experiment config with a generated problem.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a dissimilarity report as JSON.
    Estimate {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        problem: Option<PathBuf>,
        /// Experiment config whose problem is estimated.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Participation sizes; defaults to n.
        #[arg(long = "s")]
        s: Vec<usize>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = 32)]
        probes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the output extension (.jsonl or csv).
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Overrides the run seed (sampling and stochastic solvers).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare traces at a target accuracy. Traces are `NAME=PATH` or `PATH`
    /// (named by file stem).
    Compare {
        #[arg(required = true, num_args = 2..)]
        traces: Vec<String>,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Metric::Last)]
        metric: Metric,
        /// Report JSON; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Long-form plot data CSV.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    ExactQuadratic,
    PowerIteration,
    ProbeEstimate,
}

impl From<Mode> for EstimateMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ExactQuadratic => EstimateMode::ExactQuadratic,
            Mode::PowerIteration => EstimateMode::PowerIteration,
            Mode::ProbeEstimate => EstimateMode::ProbeEstimate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Last,
    Avg,
}

fn read_generator(path: &Path) -> Result<GeneratorParams> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(g) = serde_json::from_str::<GeneratorParams>(&text) {
        return Ok(g);
    }
    match ExperimentConfig::from_json(&text)?.problem {
        ProblemSource::Generate(g) => Ok(g),
        ProblemSource::Path(_) => Err(Error::Config("config refers to an existing problem file".into())),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

fn parse_trace_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let stem = path.file_name().and_then(|s| s.to_str()).unwrap_or(arg);
            let name = stem.split('.').next().unwrap_or(stem).to_string();
            (name, path)
        }
    }
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Gen { config, out, seed } => {
            let mut g = read_generator(&config)?;
            if let Some(s) = seed {
                g.set_seed(s);
            }
            let p = g.generate()?;
            p.save(&out)?;
            eprintln!("wrote {} (n={}, d={})", out.display(), p.n(), p.d);
        }
        Cmd::Estimate { problem, config, s, mode, probes, out } => {
            let p = match (problem, config) {
                (Some(path), _) => ProblemInstance::load(path)?,
                (None, Some(cfg)) => ExperimentConfig::load(cfg)?.load_problem()?,
                (None, None) => unreachable!("clap requires one of --problem/--config"),
            };
            let mode = mode.map(EstimateMode::from).unwrap_or(if p.all_quadratic() {
                EstimateMode::ExactQuadratic
            } else {
                EstimateMode::PowerIteration
            });
            let s = if s.is_empty() { vec![p.n()] } else { s };
            let opts = EstimateOptions { probes, seed: p.seed, ..Default::default() };
            let report = dissimilarity_report(&p, &s, mode, &opts)?;
            emit(&serde_json::to_string_pretty(&report)?, out.as_deref())?;
        }
        Cmd::Run { config, out, format, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let format = match format {
                Some(Format::Csv) => TraceFormat::Csv,
                Some(Format::Jsonl) => TraceFormat::Jsonl,
                None => TraceFormat::from_path(&out),
            };
            let rep = run_experiment(&cfg)?;
            write_trace(&rep.records, &out, format)?;
            let last = rep.records.last().expect("at least the initial record");
            eprintln!(
                "{}: {} rounds, f_gap_last={:.3e}, oracle_total={}{}",
                cfg.algorithm.name(),
                last.round,
                last.f_gap_last,
                last.cum_oracle_total,
                if rep.capped.is_empty() { String::new() } else { format!(", {} capped rounds", rep.capped.len()) }
            );
        }
        Cmd::Compare { traces, eps, metric, out, plot } => {
            let loaded = traces
                .iter()
                .map(|a| {
                    let (name, path) = parse_trace_arg(a);
                    Ok((name, read_trace(&path)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let metric = match metric {
                Metric::Last => GapMetric::Last,
                Metric::Avg => GapMetric::Avg,
            };
            let report = compare(&loaded, eps, metric)?;
            if let Some(p) = plot {
                write_plot_csv(&loaded, p)?;
            }
            emit(&serde_json::to_string_pretty(&report)?, out.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
