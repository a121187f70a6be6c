use std::path::Path;

use swarmupdate::results::{self, float, rendered, HEADER, MEAN_HEADER};
use swarmupdate::{cell_means, read_rows, run_sweep, write_means, write_rows, ExperimentConfig, SchemaError};
use swarmupdate_core::MetricsRecord;

fn small_grid() -> ExperimentConfig {
    ExperimentConfig {
        sizes: vec![20],
        failure_rates: vec![0.0, 0.25],
        repetitions: 3,
        seed_base: 42,
        ..ExperimentConfig::default()
    }
}

fn sweep_csv(config: &ExperimentConfig) -> (Vec<MetricsRecord>, Vec<u8>) {
    let rows = run_sweep(&config.cells().unwrap(), |_| {}).unwrap();
    let mut out = Vec::new();
    write_rows(&mut out, &rows).unwrap();
    (rows, out)
}

#[test]
fn csv_layout_follows_the_schema() {
    let (rows, bytes) = sweep_csv(&small_grid());
    assert_eq!(rows.len(), 2 * 3 * 3);
    let text = String::from_utf8(bytes).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), HEADER.join(","));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "swarmsync");
    assert_eq!(first[2], "0.000000");
    assert_eq!(first[7].split('.').nth(1).unwrap().len(), 6);
    assert_eq!(first[14], "true");
    // Grid order: failure rate, then strategy, then repetition.
    let order: Vec<(String, u32)> = rows.iter().map(|r| (format!("{}{}", r.failure_rate, r.strategy), r.rep)).collect();
    assert_eq!(order[0], ("0swarmsync".into(), 0));
    assert_eq!(order[3], ("0gossip".into(), 0));
    assert_eq!(order[9], ("0.25swarmsync".into(), 0));
}

#[test]
fn rows_read_back_as_written() {
    let (rows, bytes) = sweep_csv(&small_grid());
    let back = read_rows(bytes.as_slice()).unwrap();
    assert_eq!(back.len(), rows.len());
    for (a, b) in rows.iter().zip(&back) {
        assert_eq!(a.convergence_steps, b.convergence_steps);
        assert_eq!(a.overhead_bytes, b.overhead_bytes);
        assert_eq!(float(a.steps_per_drone), float(b.steps_per_drone));
        assert_eq!(a.strategy, b.strategy);
        assert_eq!(a.converged, b.converged);
    }
}

#[test]
fn sweeps_are_byte_identical_for_a_seed() {
    let (_, a) = sweep_csv(&small_grid());
    let (_, b) = sweep_csv(&small_grid());
    assert_eq!(a, b);
    let (_, c) = sweep_csv(&ExperimentConfig {
        seed_base: 43,
        ..small_grid()
    });
    assert_ne!(a, c);
}

#[test]
fn means_are_arithmetic_means_of_the_written_rows() {
    let (_, bytes) = sweep_csv(&small_grid());
    let rows = read_rows(bytes.as_slice()).unwrap();
    let means = cell_means(&rows);
    assert_eq!(means.len(), 6);
    let mut out = Vec::new();
    write_means(&mut out, &means).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), MEAN_HEADER.join(","));
    for (line, chunk) in lines.zip(rows.chunks(3)) {
        let fields: Vec<&str> = line.split(',').collect();
        let mean = |v: fn(&MetricsRecord) -> f64| chunk.iter().map(v).sum::<f64>() / 3.0;
        assert_eq!(fields[4], "3");
        assert_eq!(fields[6], float(mean(|r| r.convergence_steps as f64)));
        assert_eq!(fields[7], float(mean(|r| rendered(r.steps_per_drone))));
        assert_eq!(fields[8], float(mean(|r| r.overhead_bytes as f64)));
        assert_eq!(fields[9], float(mean(|r| rendered(r.overhead_per_drone_bytes))));
    }
}

#[test]
fn missing_columns_are_named() {
    let (_, bytes) = sweep_csv(&ExperimentConfig {
        strategies: vec!["soul".into()],
        failure_rates: vec![0.0],
        repetitions: 1,
        ..small_grid()
    });
    let text = String::from_utf8(bytes).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(9);
            f.join(",") + "\n"
        })
        .collect();
    match read_rows(stripped.as_bytes()) {
        Err(SchemaError::MissingColumn(c)) => assert_eq!(c, "overhead_per_drone_bytes"),
        other => panic!("expected a missing column, got {other:?}"),
    }
    let broken = text.replacen("\nsoul,", "\nflood,", 1);
    assert!(matches!(
        read_rows(broken.as_bytes()),
        Err(SchemaError::BadValue { column: "strategy", .. })
    ));
}

#[test]
fn grids_have_the_documented_cardinality() {
    assert_eq!(ExperimentConfig::default().cells().unwrap().len() * 10, 480);
    let patch_study = ExperimentConfig {
        sizes: vec![200],
        failure_rates: vec![0.25],
        patch_packets: vec![240, 192, 128, 64],
        ..ExperimentConfig::default()
    };
    assert_eq!(patch_study.cells().unwrap().len(), 12);
}

#[test]
fn mean_file_sits_next_to_the_results() {
    assert_eq!(
        results::mean_path(Path::new("out/results.csv")),
        Path::new("out/results.mean.csv")
    );
}
