use chrono::NaiveDate;
use imputelab::config::{Overrides, RunConfig, Task};
use imputelab::{read_dataset, run_task, write_dataset, write_report, ExternalPredictor, RayonExecutor, WideCsvSchema};
use imputelab_core::pipeline::{PredictError, Predictor, WeekExample};
use imputelab_core::{Cell, DayRow, LongitudinalDataset, ParticipantSeries};
use proptest::prelude::*;

fn dataset_strategy() -> impl Strategy<Value = LongitudinalDataset> {
    (1usize..4, 1usize..4).prop_flat_map(|(n_p, n_f)| {
        let cell = prop_oneof![Just(None), any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(Some)];
        let row = (1u64..4, prop::collection::vec(cell, n_f), prop::option::of(any::<bool>()));
        prop::collection::vec(prop::collection::vec(row, 0..8), n_p).prop_map(move |parts| {
            let participants = parts
                .into_iter()
                .enumerate()
                .map(|(i, rows)| {
                    let mut day = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
                    let rows = rows
                        .into_iter()
                        .map(|(gap, vals, label)| {
                            day = day + chrono::Days::new(gap);
                            DayRow::new(day, 0, vals.into_iter().map(Cell::from_option).collect(), label)
                        })
                        .collect();
                    ParticipantSeries::with_derived_weeks(format!("p{i}"), rows).unwrap()
                })
                .filter(|p| !p.is_empty())
                .collect();
            LongitudinalDataset::new((0..n_f).map(|j| format!("f{j}")).collect(), participants).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn csv_round_trip(ds in dataset_strategy()) {
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), &WideCsvSchema::default(), "mem").unwrap();
        prop_assert_eq!(back, ds);
    }
}

fn small_config(n_participants: usize, strategies: &str) -> RunConfig {
    let text = format!(
        r#"{{"synth":{{"n_participants":{n_participants},"n_weeks":4,"n_features":3,"missing_rate":0.2,"seed":3}},
            "strategies":{strategies},"seed":11}}"#
    );
    RunConfig::from_json_str(&text).unwrap().resolve(&Overrides::default()).unwrap()
}

#[test]
fn reconstruction_table_is_strategy_by_participant() {
    let cfg = small_config(3, r#"[{"kind":"MEDIAN"},{"kind":"SIMPLE_KNN"}]"#);
    let exec = RayonExecutor::new(Some(2)).unwrap();
    let out = run_task(Task::Reconstruct, &cfg, &exec).unwrap();
    let table = &out.report.tables["r_rmse_per_participant"];
    assert_eq!(table.columns, ["pid", "strategy", "r_rmse", "availability_pct"]);
    assert_eq!(table.rows.len(), 6);
    let dir = tempfile::tempdir().unwrap();
    write_report(&out.report, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("r_rmse_per_participant.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn same_config_same_bytes() {
    let cfg = small_config(4, r#"[{"kind":"MEDIAN"},{"kind":"AUTOENCODER","epochs":2}]"#);
    let write = |jobs| {
        let dir = tempfile::tempdir().unwrap();
        let exec = RayonExecutor::new(Some(jobs)).unwrap();
        let out = run_task(Task::Reconstruct, &cfg, &exec).unwrap();
        let files = write_report(&out.report, dir.path()).unwrap();
        let bytes: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(p).unwrap()))
            .collect();
        bytes
    };
    let a = write(1);
    assert_eq!(a, write(1));
    assert_eq!(a, write(3));
}

#[test]
fn report_echoes_resolved_config() {
    let cfg = small_config(2, r#"[{"kind":"MEDIAN","name":"med"}]"#);
    let out = run_task(Task::Availability, &cfg, &RayonExecutor::new(Some(1)).unwrap()).unwrap();
    assert_eq!(out.report.config, cfg);
    assert_eq!(out.report.config.strategies[0].name, "med");
}

fn examples(rows: &[(&str, u32, f64, bool)]) -> Vec<WeekExample> {
    rows.iter()
        .map(|&(p, w, x, label)| WeekExample {
            participant_id: p.into(),
            week: w,
            features: vec![x, -x],
            label,
        })
        .collect()
}

#[test]
fn external_predictor_contract() {
    let train = examples(&[("a", 1, 0.1, false), ("a", 2, 0.9, true), ("b", 1, 0.2, false)]);
    let test = examples(&[("a", 3, 0.7, true), ("b", 2, 0.3, false)]);
    // score = first feature of each test row
    let script = r#"test -s train.csv || exit 9
{ echo pid,week,score; tail -n +2 test.csv | cut -d, -f1-3; } > scores.csv"#;
    let p = ExternalPredictor::new(vec!["sh".into(), "-c".into(), script.into()]);
    let out = p.fit_predict(&train, &test).unwrap();
    assert_eq!(out.scores, vec![0.7, 0.3]);

    let failing = ExternalPredictor::new(vec!["sh".into(), "-c".into(), "exit 4".into()]);
    assert!(matches!(failing.fit_predict(&train, &test), Err(PredictError::Failed(_))));

    let partial = ExternalPredictor::new(vec!["sh".into(), "-c".into(), "printf 'pid,week,score\\na,3,0.5\\n' > scores.csv".into()]);
    assert!(matches!(partial.fit_predict(&train, &test), Err(PredictError::Failed(_))));
}
