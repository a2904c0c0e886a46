use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trace::TraceRecord;
use crate::error::{Error, Result};

/// Which suboptimality column decides whether ε was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMetric {
    #[default]
    Last,
    Avg,
}

impl GapMetric {
    fn of(self, r: &TraceRecord) -> f64 {
        match self {
            GapMetric::Last => r.f_gap_last,
            GapMetric::Avg => r.f_gap_avg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub name: String,
    pub rounds_to_eps: Option<usize>,
    pub oracle_total_to_eps: Option<u64>,
    pub oracle_parallel_to_eps: Option<u64>,
    pub vectors_to_eps: Option<u64>,
    pub final_gap: f64,
    pub rounds_run: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Less,
    Equal,
    Greater,
}

impl From<Ordering> for Relation {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Less => Relation::Less,
            Ordering::Equal => Relation::Equal,
            Ordering::Greater => Relation::Greater,
        }
    }
}

/// How trace `a` compares with trace `b`; `None` when either missed ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRelation {
    pub a: String,
    pub b: String,
    pub rounds: Option<Relation>,
    pub oracle_total: Option<Relation>,
    pub oracle_parallel: Option<Relation>,
}

/// A named ordering claim. `holds` is `None` when a trace it mentions is
/// missing or never reached ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub eps: f64,
    pub metric: GapMetric,
    pub traces: Vec<TraceSummary>,
    pub pairs: Vec<PairRelation>,
    pub assertions: Vec<Assertion>,
}

impl ComparisonReport {
    pub fn summary(&self, name: &str) -> Option<&TraceSummary> {
        self.traces.iter().find(|t| t.name == name)
    }

    pub fn assertion(&self, name: &str) -> Option<bool> {
        self.assertions.iter().find(|a| a.name == name).and_then(|a| a.holds)
    }
}

fn summarize(name: &str, recs: &[TraceRecord], eps: f64, metric: GapMetric) -> TraceSummary {
    let hit = recs.iter().find(|r| metric.of(r) <= eps);
    TraceSummary {
        name: name.to_string(),
        rounds_to_eps: hit.map(|r| r.round),
        oracle_total_to_eps: hit.map(|r| r.cum_oracle_total),
        oracle_parallel_to_eps: hit.map(|r| r.cum_oracle_parallel),
        vectors_to_eps: hit.map(|r| r.cum_vectors),
        final_gap: recs.last().map_or(f64::NAN, |r| metric.of(r)),
        rounds_run: recs.last().map_or(0, |r| r.round),
    }
}

fn rel<T: Ord>(a: Option<T>, b: Option<T>) -> Option<Relation> {
    Some(a?.cmp(&b?).into())
}

/// Rounds-to-ε and calls-to-ε per trace, pairwise orderings, and the
/// standard claims between traces named `acc_sdane`, `sdane` and `dane`.
pub fn compare(traces: &[(String, Vec<TraceRecord>)], eps: f64, metric: GapMetric) -> Result<ComparisonReport> {
    if traces.len() < 2 {
        return Err(Error::Config("compare needs at least two traces".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Config("eps must be positive".into()));
    }
    let summaries: Vec<TraceSummary> = traces.iter().map(|(n, r)| summarize(n, r, eps, metric)).collect();
    let mut pairs = Vec::new();
    for (i, a) in summaries.iter().enumerate() {
        for b in &summaries[i + 1..] {
            pairs.push(PairRelation {
                a: a.name.clone(),
                b: b.name.clone(),
                rounds: rel(a.rounds_to_eps, b.rounds_to_eps),
                oracle_total: rel(a.oracle_total_to_eps, b.oracle_total_to_eps),
                oracle_parallel: rel(a.oracle_parallel_to_eps, b.oracle_parallel_to_eps),
            });
        }
    }
    let find = |n: &str| summaries.iter().find(|s| s.name == n);
    let le = |a: &str, b: &str| Some(find(a)?.rounds_to_eps? <= find(b)?.rounds_to_eps?);
    let lt_oracle = |a: &str, b: &str| Some(find(a)?.oracle_total_to_eps? < find(b)?.oracle_total_to_eps?);
    let assertions = vec![
        Assertion { name: "acc_sdane.rounds <= sdane.rounds".into(), holds: le("acc_sdane", "sdane") },
        Assertion { name: "sdane.rounds <= dane.rounds".into(), holds: le("sdane", "dane") },
        Assertion { name: "sdane.oracle_total < dane.oracle_total".into(), holds: lt_oracle("sdane", "dane") },
    ];
    Ok(ComparisonReport { eps, metric, traces: summaries, pairs, assertions })
}

/// Long-form plot data: one row per (trace, round).
pub fn write_plot_csv(traces: &[(String, Vec<TraceRecord>)], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "trace",
        "round",
        "cum_comm_rounds",
        "cum_vectors",
        "cum_oracle_total",
        "cum_oracle_parallel",
        "f_gap_last",
        "f_gap_avg",
    ])?;
    for (name, recs) in traces {
        for r in recs {
            w.write_record([
                name.clone(),
                r.round.to_string(),
                r.cum_comm_rounds.to_string(),
                r.cum_vectors.to_string(),
                r.cum_oracle_total.to_string(),
                r.cum_oracle_parallel.to_string(),
                format!("{:.16e}", r.f_gap_last),
                format!("{:.16e}", r.f_gap_avg),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(gaps: &[f64], calls_per_round: u64) -> Vec<TraceRecord> {
        gaps.iter()
            .enumerate()
            .map(|(r, &g)| TraceRecord {
                round: r,
                f_gap_last: g,
                f_gap_avg: g * 2.0,
                dist_sq_v: 0.0,
                dist_sq_x: 0.0,
                lambda_used: 1.0,
                s_used: if r == 0 { 0 } else { 2 },
                cum_comm_rounds: r as u64,
                cum_vectors: 10 * r as u64,
                cum_oracle_total: calls_per_round * r as u64,
                cum_oracle_parallel: calls_per_round * r as u64 / 2,
                potential_sdane: None,
                potential_acc: None,
            })
            .collect()
    }

    #[test]
    fn identical_traces_tie_everywhere() {
        let t = trace(&[1.0, 0.1, 1e-3, 1e-7], 5);
        let rep = compare(&[("a".into(), t.clone()), ("b".into(), t)], 1e-6, GapMetric::Last).unwrap();
        let p = &rep.pairs[0];
        assert_eq!((p.rounds, p.oracle_total, p.oracle_parallel), (Some(Relation::Equal), Some(Relation::Equal), Some(Relation::Equal)));
        assert_eq!(rep.summary("a").unwrap().rounds_to_eps, Some(3));
    }

    #[test]
    fn unreached_traces_are_excluded() {
        let rep = compare(
            &[("sdane".into(), trace(&[1.0, 1e-7], 4)), ("dane".into(), trace(&[1.0, 0.5], 9))],
            1e-6,
            GapMetric::Last,
        )
        .unwrap();
        assert_eq!(rep.summary("dane").unwrap().rounds_to_eps, None);
        assert_eq!(rep.pairs[0].rounds, None);
        assert_eq!(rep.assertion("sdane.rounds <= dane.rounds"), None);
    }

    #[test]
    fn named_assertions() {
        let rep = compare(
            &[
                ("acc_sdane".into(), trace(&[1.0, 1e-2, 1e-7], 6)),
                ("sdane".into(), trace(&[1.0, 1e-2, 1e-4, 1e-7], 4)),
                ("dane".into(), trace(&[1.0, 1e-2, 1e-4, 1e-7], 9)),
            ],
            1e-6,
            GapMetric::Last,
        )
        .unwrap();
        assert_eq!(rep.assertion("acc_sdane.rounds <= sdane.rounds"), Some(true));
        assert_eq!(rep.assertion("sdane.rounds <= dane.rounds"), Some(true));
        assert_eq!(rep.assertion("sdane.oracle_total < dane.oracle_total"), Some(true));
    }

    #[test]
    fn avg_metric_uses_the_averaged_column() {
        let t = trace(&[1.0, 1e-6, 1e-7], 1);
        let rep = compare(&[("a".into(), t.clone()), ("b".into(), t)], 1e-6, GapMetric::Avg).unwrap();
        assert_eq!(rep.traces[0].rounds_to_eps, Some(2));
    }

    #[test]
    fn needs_two_traces() {
        assert!(compare(&[("a".into(), trace(&[1.0], 1))], 1e-3, GapMetric::Last).is_err());
    }

    #[test]
    fn plot_csv_is_long_form() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        write_plot_csv(&[("a".into(), trace(&[1.0, 0.5], 2)), ("b".into(), trace(&[1.0], 2))], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(2).unwrap().starts_with("a,1,1,10,2,1,"));
    }
}
