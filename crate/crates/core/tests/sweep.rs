use proptest::prelude::*;
use relay_duality::experiment::*;
use relay_duality::{Case, Execution};

#[test]
fn default_sweep_matches_both_links() {
    let table = run_sweep(&SweepConfig::default(), Execution::default()).unwrap();
    assert_eq!(table.rows.len(), 32);
    assert_eq!(table.wall_times.len(), 32);
    assert!(table.all_consistent());
    for case in Case::ALL {
        let rows: Vec<&SweepRow> = table.rows_for(case).collect();
        assert_eq!(rows.len(), 8);
        for w in rows.windows(2) {
            assert!(w[0].rate_target < w[1].rate_target);
            if let (Some(a), Some(b)) = (w[0].ul_power, w[1].ul_power) {
                assert!(b >= a);
            }
            if let (Some(a), Some(b)) = (w[0].dl_power, w[1].dl_power) {
                assert!(b >= a);
            }
        }
    }
    for (i, rate) in (1..=8).map(|i| 0.25 * i as f64).enumerate() {
        let at = |case: Case| {
            table
                .rows_for(case)
                .nth(i)
                .and_then(|r| r.dl_power)
                .unwrap()
        };
        assert_eq!(table.rows_for(Case::I).nth(i).unwrap().rate_target, rate);
        assert!(at(Case::III) <= at(Case::I) + 1e-6);
        assert!(at(Case::IV) <= at(Case::II) + 1e-6);
        assert!(at(Case::II) <= at(Case::I));
        assert!(at(Case::IV) <= at(Case::III));
    }
}

#[test]
fn zero_rate_rows_have_zero_power() {
    let config = SweepConfig {
        rates: vec![0.0],
        ..SweepConfig::default()
    };
    let table = run_sweep(&config, Execution::Sequential).unwrap();
    assert_eq!(table.rows.len(), 4);
    for row in &table.rows {
        assert_eq!(row.ul_power, Some(0.0));
        assert_eq!(row.dl_power.map(f64::abs).map(|p| p < 1e-9), Some(true));
    }
}

#[test]
fn output_is_deterministic_and_independent_of_execution() {
    let config = SweepConfig {
        rates: vec![0.5, 1.0, 1.5],
        ..SweepConfig::default()
    };
    let a = csv_string(&run_sweep(&config, Execution::Parallel).unwrap());
    let b = csv_string(&run_sweep(&config, Execution::Parallel).unwrap());
    let c = csv_string(&run_sweep(&config, Execution::Sequential).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn csv_format() {
    let row = SweepRow {
        case: Case::III,
        rate_target: 4.0,
        ul_power: None,
        dl_power: None,
        rel_gap: None,
        beta_resid: None,
        q_resid: None,
        status: RowStatus::Infeasible,
    };
    let table = SweepTable {
        rows: vec![row],
        wall_times: Vec::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    emit_csv(&table, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, format!("{CSV_HEADER}\nIII,4,,,,,,infeasible\n"));
    assert_eq!(text.lines().count(), 2);
    assert_eq!(parse_csv(&text).unwrap().rows, table.rows);
}

#[test]
fn emit_reports_the_path_on_failure() {
    let table = run_sweep(
        &SweepConfig {
            rates: vec![1.0],
            cases: vec![Case::I],
            ..SweepConfig::default()
        },
        Execution::Sequential,
    )
    .unwrap();
    let err = emit_csv(&table, "/nonexistent-dir/x.csv")
        .unwrap_err()
        .to_string();
    assert!(err.contains("/nonexistent-dir/x.csv"), "{err}");
}

#[test]
fn configuration_errors_surface_before_solving() {
    let dir = std::path::Path::new(".");
    for text in [
        r#"{"rates": [1.0, 0.5]}"#,
        r#"{"cases": []}"#,
        r#"{"M": 3, "K": 3, "bogus": 1}"#,
        r#"{"orders": {"tau": [1, 1, 2], "rho": [1, 2, 3]}}"#,
        r#"{"caps": 0}"#,
    ] {
        let res = parse_sweep_config(text, dir).and_then(|c| c.validate().map(|_| c));
        assert!(res.is_err(), "{text}");
    }
}

fn status() -> impl Strategy<Value = RowStatus> {
    prop_oneof![
        Just(RowStatus::Ok),
        Just(RowStatus::Infeasible),
        Just(RowStatus::Mismatch),
        Just(RowStatus::CheckFailed),
        Just(RowStatus::NearBoundary),
    ]
}

fn value() -> impl Strategy<Value = Option<f64>> {
    prop::option::of(prop_oneof![Just(0.0), 1e-12..1e-3f64, 1e-3..1e6f64])
}

fn row() -> impl Strategy<Value = SweepRow> {
    (
        0usize..4,
        0.0..10.0f64,
        value(),
        value(),
        value(),
        value(),
        value(),
        status(),
    )
        .prop_map(
            |(c, rate_target, ul_power, dl_power, rel_gap, beta_resid, q_resid, status)| SweepRow {
                case: Case::ALL[c],
                rate_target,
                ul_power,
                dl_power,
                rel_gap,
                beta_resid,
                q_resid,
                status,
            },
        )
}

proptest! {
    #[test]
    fn csv_round_trip(rows in prop::collection::vec(row(), 1..20)) {
        let table = SweepTable { rows, wall_times: Vec::new() };
        let text = csv_string(&table);
        let back = parse_csv(&text).unwrap();
        let expected: Vec<SweepRow> = table.rows.iter().map(SweepRow::rounded).collect();
        prop_assert_eq!(&back.rows, &expected);
        prop_assert_eq!(csv_string(&back), text);
    }
}
