use swarmupdate::report::{build_report, ordering_checks, verdict, write_report, CheckKind, Verdict};
use swarmupdate::results::CellMean;
use swarmupdate::{cell_means, run_sweep, ExperimentConfig};
use swarmupdate_core::Strategy;

fn mean(strategy: Strategy, size: usize, f: f64, packets: u32, steps: f64, overhead: f64) -> CellMean {
    CellMean {
        strategy,
        swarm_size: size,
        failure_rate: f,
        patch_packets: packets,
        reps: 1,
        converged_reps: 1,
        convergence_steps: steps * size as f64,
        steps_per_drone: steps,
        overhead_bytes: overhead * size as f64,
        overhead_per_drone_bytes: overhead,
        packet_emissions: 0.0,
        signal_emissions: 0.0,
        evictions: 0.0,
        aborts: 0.0,
    }
}

#[test]
fn single_cell_gives_a_one_row_table_and_point_charts() {
    let means = vec![mean(Strategy::Soul, 20, 0.25, 240, 3.5, 1000.0)];
    let report = build_report(&means);
    let rows: Vec<&str> = report.summary.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("soul"));
    assert_eq!(report.charts.len(), 3);
    for (_, svg) in &report.charts {
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("NaN"));
    }
    assert!(report.checks.iter().all(|c| c.verdict == Verdict::Missing));
}

#[test]
fn orderings_are_judged_per_cell() {
    use Strategy::*;
    let means = vec![
        mean(SwarmSync, 100, 0.0, 240, 10.0, 200.0),
        mean(Gossip, 100, 0.0, 240, 12.0, 900.0),
        mean(Soul, 100, 0.0, 240, 14.0, 100.0),
        mean(SwarmSync, 500, 0.0, 240, 2.0, 150.0),
        mean(Gossip, 500, 0.0, 240, 6.0, 800.0),
        mean(Soul, 500, 0.0, 240, 5.0, 80.0),
    ];
    let checks = ordering_checks(&means);
    let speed: Vec<Verdict> = checks
        .iter()
        .filter(|c| c.kind == CheckKind::SpeedOrder)
        .map(|c| c.verdict)
        .collect();
    assert_eq!(speed, vec![Verdict::Pass, Verdict::Fail]);
    assert_eq!(verdict(&checks, CheckKind::SpeedOrder), Verdict::Fail);
    // 10 / 2 = 5x.
    assert_eq!(verdict(&checks, CheckKind::SpeedScaling), Verdict::Pass);
    assert_eq!(verdict(&checks, CheckKind::OverheadOrder), Verdict::Pass);
    assert_eq!(verdict(&checks, CheckKind::LossGrowth), Verdict::Missing);
}

#[test]
fn sweep_results_produce_all_artifacts() {
    let config = ExperimentConfig {
        sizes: vec![20, 40],
        failure_rates: vec![0.0, 0.5],
        patch_packets: vec![240, 64],
        repetitions: 1,
        ..ExperimentConfig::default()
    };
    let rows = run_sweep(&config.cells().unwrap(), |_| {}).unwrap();
    let report = build_report(&cell_means(&rows));
    let dir = tempfile::tempdir().unwrap();
    write_report(dir.path(), &report).unwrap();
    for name in [
        "summary.txt",
        "orderings.txt",
        "steps_per_drone.svg",
        "overhead_per_drone.svg",
        "patch_size.svg",
    ] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(!text.is_empty(), "{name}");
    }
    // Two failure rates → two panels, three strategies each.
    let steps = &report.charts[0].1;
    assert_eq!(steps.matches("<polyline").count(), 6);
    assert_eq!(report.summary.lines().count(), 2 + 2 * 2 * 2 * 3);
}
