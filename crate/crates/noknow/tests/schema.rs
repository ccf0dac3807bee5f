//! Column names and order of every experiment, checked against golden files.

use noknow::{parse_config_for, run, Experiment, Runner};

fn small_config(e: Experiment) -> String {
    match e {
        Experiment::DqcScan => r#"{"n_min": 2, "n_max": 2, "etas": [1.0]}"#.into(),
        Experiment::Jump => r#"{"n_traj": 3, "t_final": 0.1}"#.into(),
        Experiment::Trajectory | Experiment::FeedbackCancel => r#"{"t_final": 0.1}"#.into(),
        _ => r#"{"n_traj": 3, "t_final": 0.1}"#.into(),
    }
}

#[test]
fn columns_match_golden_files() {
    let runner = Runner::new(Some(1)).unwrap();
    for e in Experiment::ALL {
        let golden = std::fs::read_to_string(format!("{}/tests/golden/{}.txt", env!("CARGO_MANIFEST_DIR"), e.name()))
            .unwrap_or_else(|err| panic!("{}: {err}", e.name()));
        let mut lines = golden.lines();
        let cfg = parse_config_for(&small_config(e), Some(e)).unwrap();
        let table = run(&cfg, &runner).unwrap();
        assert_eq!(table.schema, lines.next().unwrap(), "{}", e.name());
        assert_eq!(table.columns.join(","), lines.next().unwrap(), "{}", e.name());
        assert!(!table.rows.is_empty());
        assert!(table.rows.iter().all(|r| r.len() == table.columns.len()));
    }
}
