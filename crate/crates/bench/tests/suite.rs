use delta_aqm_bench::report::{read_rows, write_rows, Row};
use delta_aqm_bench::{run_benchmark, AqmSpec, RunOptions, ScenarioConfig, Suite, TargetSpec};

fn suite() -> Suite {
    let mut scenarios = Vec::new();
    for (id, aqm) in [
        ("none", AqmSpec::None),
        ("offline", AqmSpec::OfflineOptimum),
        (
            "codel",
            AqmSpec::Codel {
                target: None,
                interval: None,
            },
        ),
    ] {
        let mut s = ScenarioConfig::new(id, 0.916, TargetSpec::Quantile(0.9));
        s.num_packets = 10_000;
        s.seeds = Some(vec![2, 0, 1]);
        s.aqm = aqm;
        scenarios.push(s);
    }
    Suite { scenarios }
}

fn csv(rows: &[Row]) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).unwrap();
    String::from_utf8(buf).unwrap()
}

fn without_wall_time(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect()
}

#[test]
fn reports_are_identical_apart_from_wall_time() {
    let one = run_benchmark(&suite(), &RunOptions { jobs: Some(1), ..Default::default() }).unwrap();
    let many = run_benchmark(&suite(), &RunOptions { jobs: Some(3), ..Default::default() }).unwrap();
    assert_eq!(without_wall_time(&one.to_csv()), without_wall_time(&many.to_csv()));
}

#[test]
fn rows_satisfy_the_report_identities() {
    let report = run_benchmark(&suite(), &RunOptions::default()).unwrap();
    assert_eq!(report.rows.len(), 9);
    for row in &report.rows {
        assert!(row.is_consistent(), "{row:?}");
        assert_eq!(row.served_on_time + row.delayed + row.dropped, row.m);
        assert_eq!(row.m, 10_000);
    }
    let offline: Vec<_> = report.rows.iter().filter(|r| r.aqm == "offline_optimum").collect();
    assert!(offline.iter().all(|r| r.delayed == 0));
    // Values are stored rounded, so a second pass changes nothing.
    let back = read_rows(report.to_csv().as_bytes()).unwrap();
    assert_eq!(csv(&back), csv(&report.rows));
}

#[test]
fn partial_file_holds_every_finished_row() {
    let dir = tempfile::tempdir().unwrap();
    let partial = dir.path().join("partial.csv");
    let options = RunOptions {
        jobs: Some(2),
        partial_path: Some(partial.clone()),
    };
    let report = run_benchmark(&suite(), &options).unwrap();
    let mut written = read_rows(std::fs::File::open(&partial).unwrap()).unwrap();
    written.sort_by(|a, b| (&a.scenario_id, a.seed).cmp(&(&b.scenario_id, b.seed)));
    assert_eq!(csv(&written), csv(&report.rows));
}

#[test]
fn suite_survives_a_toml_round_trip() {
    let text = suite().to_toml();
    let parsed = Suite::from_toml(&text).unwrap();
    assert_eq!(parsed, suite());
}
