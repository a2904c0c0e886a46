//! Frozen trace of the seed-42 desk benchmark. Regenerate with
//! `SDANE_BLESS=1 cargo test --test golden` after an intended change.

use std::path::PathBuf;

use sdane_core::harness::{render_trace, run_experiment, ExperimentConfig, TraceFormat};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check(config: &str, golden: &str) {
    let cfg = ExperimentConfig::load(golden_dir().join(config)).unwrap();
    let text = render_trace(&run_experiment(&cfg).unwrap().records, TraceFormat::Csv);
    let path = golden_dir().join(golden);
    if std::env::var_os("SDANE_BLESS").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    let frozen = std::fs::read_to_string(&path).expect("golden file present");
    assert!(frozen == text, "{golden} differs from the current run");
}

#[test]
fn sdane_benchmark_trace_is_frozen() {
    check("sdane_seed42.json", "sdane_seed42.csv");
}

#[test]
fn acc_sdane_partial_participation_trace_is_frozen() {
    check("acc_sdane_s5_seed42.json", "acc_sdane_s5_seed42.csv");
}
