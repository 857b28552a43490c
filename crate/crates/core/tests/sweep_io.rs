use aon_core::sweep::{emit, parse_json, run_sweep, Format, GridSpec, SweepConfig, Task, CSV_HEADER};
use aon_core::Error;

fn config() -> SweepConfig {
    SweepConfig {
        p: 10,
        k: 2,
        sigma2: 0.2,
        grid: GridSpec::Ratios(vec![0.0, 0.5, 1.0, 2.0, 4.0]),
        trials: 120,
        seed: 21,
        tasks: vec![Task::Mmse, Task::Divergence],
        ..SweepConfig::default()
    }
}

#[test]
fn emit_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_sweep(&config()).unwrap();

    let json = dir.path().join("out.json");
    emit(&res, Format::Json, &json).unwrap();
    assert_eq!(parse_json(&std::fs::read_to_string(&json).unwrap()).unwrap(), res);

    let csv = dir.path().join("out.csv");
    emit(&res, Format::Csv, &csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), res.rows.len() + 1);
}

#[test]
fn emit_surfaces_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let res = run_sweep(&SweepConfig { tasks: vec![], ..config() }).unwrap();
    let err = emit(&res, Format::Csv, dir.path()).unwrap_err();
    assert!(matches!(err, Error::Io(_)));
    assert!(!err.is_user_error());
}

#[test]
fn no_data_row_and_mmse_trend() {
    let res = run_sweep(&config()).unwrap();
    let first = &res.rows[0];
    assert_eq!(first.n, 0);
    assert!((first.mmse_ratio.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!((first.kl_mc, first.tv_mc), (Some(0.0), Some(0.0)));
    for w in res.rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let slack = 3.0 * (a.mmse_se.unwrap().powi(2) + b.mmse_se.unwrap().powi(2)).sqrt();
        assert!(b.mmse_ratio.unwrap() <= a.mmse_ratio.unwrap() + slack, "{a:?} {b:?}");
    }
}
