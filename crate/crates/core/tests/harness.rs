use std::path::PathBuf;

use uwqkd::harness::{
    parse_config, run_experiment, run_preset, ExperimentConfig, HarnessError, Preset, ResultTable, COLUMNS,
};

fn quick(extra: &str) -> ExperimentConfig {
    parse_config(&format!("photons = 20000\ndiameter_nodes = 8\nseed = 11\n{extra}")).unwrap()
}

fn data_section(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn distance_sweep_rows_ascending() {
    let t = run_experiment(&quick("distance = [90, 30, 60]")).unwrap();
    let values: Vec<f64> = t.rows.iter().map(|r| r.sweep_value).collect();
    assert_eq!(values, vec![30.0, 60.0, 90.0]);
    let counts: Vec<u64> = t.rows.iter().map(|r| r.received_ballistic).collect();
    assert!(counts[0] > counts[1] && counts[1] > counts[2]);
}

#[test]
fn empty_sweep_is_header_only() {
    let t = run_experiment(&quick("distance = []")).unwrap();
    assert!(t.rows.is_empty());
    let csv = t.to_csv(Some(0));
    assert_eq!(data_section(&csv), vec![COLUMNS.join(",")]);
}

#[test]
fn workers_do_not_change_output() {
    let one = run_experiment(&quick("workers = 1\ndistance = [20, 70]")).unwrap();
    let eight = run_experiment(&quick("workers = 8\ndistance = [20, 70]")).unwrap();
    assert_eq!(one.to_csv(Some(1)), eight.to_csv(Some(1)));
    assert!(!one.to_csv(None).contains("workers"));
}

#[test]
fn written_files_differ_only_in_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = [1usize, 8].iter().map(|w| dir.path().join(format!("w{w}.csv"))).collect();
    for (w, path) in [1usize, 8].iter().zip(&paths) {
        let mut cfg = quick("distance = [40]");
        cfg.workers = Some(*w);
        cfg.output = Some(path.clone());
        run_experiment(&cfg).unwrap();
    }
    let strip = |p: &PathBuf| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# generated_unix"))
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&paths[0]), strip(&paths[1]));
}

#[test]
fn numeric_fields_round_trip() {
    let t = run_experiment(&quick("distance = [35]\nenvironment = \"full-moon\"")).unwrap();
    let row = &t.rows[0];
    let fields = row.fields();
    assert_eq!(fields.len(), COLUMNS.len());
    let col = |name: &str| COLUMNS.iter().position(|c| *c == name).unwrap();
    assert_eq!(fields[col("sweep_value")].parse::<f64>().unwrap(), row.sweep_value);
    assert_eq!(fields[col("signal_rate")].parse::<f64>().unwrap(), row.signal_rate);
    assert_eq!(fields[col("background_error")].parse::<f64>().unwrap(), row.background_error);
    assert_eq!(fields[col("qber")].parse::<f64>().ok(), row.qber);
    assert_eq!(fields[col("kappa")].parse::<f64>().ok(), row.kappa);
    assert_eq!(fields[col("received_ballistic")].parse::<u64>().unwrap(), row.received_ballistic);
    for f in &fields[1..] {
        if let Ok(v) = f.parse::<f64>() {
            assert_eq!(v.to_string().parse::<f64>().unwrap(), v);
        }
    }
}

#[test]
fn provenance_records_seed_and_hash() {
    let a = run_experiment(&quick("distance = [25]")).unwrap();
    let b = run_experiment(&quick("distance = [25]\nworkers = 3")).unwrap();
    let c = run_experiment(&quick("distance = [25]\nmean_photons = 0.2")).unwrap();
    assert_eq!(a.provenance_value("seed"), Some("11"));
    assert_eq!(a.provenance_value("config_hash"), b.provenance_value("config_hash"));
    assert_ne!(a.provenance_value("config_hash"), c.provenance_value("config_hash"));
}

#[test]
fn unwritable_output_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    let mut cfg = quick("distance = [25]");
    cfg.output = Some(path.clone());
    assert!(matches!(run_experiment(&cfg), Err(HarnessError::Io { .. })));
    assert!(!path.exists());
}

#[test]
fn invalid_config_is_rejected_before_running() {
    let mut cfg = quick("");
    cfg.aperture = -1.0;
    assert!(matches!(run_experiment(&cfg), Err(HarnessError::Config(_))));
}

#[test]
fn preset_fig9_decreases_with_depth() {
    let base = quick("");
    let t: ResultTable = run_preset(Preset::Fig9, &base).unwrap();
    for series in ["cloudy-night", "starlight"] {
        let q: Vec<f64> = t.rows.iter().filter(|r| r.series == series).map(|r| r.qber.unwrap()).collect();
        assert_eq!(q.len(), 17);
        assert!(q.windows(2).all(|w| w[1] < w[0]), "{series}: {q:?}");
    }
}

#[test]
fn counts_partition_is_consistent() {
    let t = run_experiment(&quick("distance = [10, 50]\nstates = [\"H\", \"P\"]")).unwrap();
    for r in &t.rows {
        assert!(r.received_ballistic + r.received_scattered <= 40_000);
        assert!(r.fidelity[0].is_some() == (r.received_scattered > 0));
        assert!(r.fidelity[1].is_none() && r.fidelity[3].is_none());
    }
}
