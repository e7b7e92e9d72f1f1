//! File-based predictor contract: the tool writes `train.csv` (pid, week,
//! label, features) and `test.csv` (pid, week, features) into a scratch
//! directory, runs the command there and reads `scores.csv` (pid, week,
//! score). The scratch paths are also passed as `IMPUTELAB_TRAIN`,
//! `IMPUTELAB_TEST` and `IMPUTELAB_SCORES`.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;

use imputelab_core::pipeline::{PredictError, Predictor, PredictorOutput, WeekExample};

pub struct ExternalPredictor {
    command: Vec<String>,
}

impl ExternalPredictor {
    /// Panics on an empty command; configs are validated before this.
    pub fn new(command: Vec<String>) -> Self {
        assert!(!command.is_empty(), "empty predictor command");
        Self { command }
    }
}

fn failed(e: impl std::fmt::Display) -> PredictError {
    PredictError::Failed(e.to_string())
}

fn write_examples(path: &Path, rows: &[WeekExample], with_label: bool) -> Result<(), PredictError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(failed)?;
    let width = rows.first().map_or(0, |r| r.features.len());
    let mut header = vec!["pid".to_string(), "week".into()];
    if with_label {
        header.push("label".into());
    }
    header.extend((1..=width).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(failed)?;
    for r in rows {
        let mut rec = vec![r.participant_id.clone(), r.week.to_string()];
        if with_label {
            rec.push(u8::from(r.label).to_string());
        }
        rec.extend(r.features.iter().map(f64::to_string));
        w.write_record(&rec).map_err(failed)?;
    }
    w.flush().map_err(failed)
}

impl Predictor for ExternalPredictor {
    fn name(&self) -> &str {
        "external"
    }

    fn fit_predict(&self, train: &[WeekExample], test: &[WeekExample]) -> Result<PredictorOutput, PredictError> {
        if train.is_empty() {
            return Err(PredictError::EmptyTrain);
        }
        if train.iter().all(|r| r.label == train[0].label) {
            return Err(PredictError::SingleClassTrain);
        }
        let dir = tempfile::tempdir().map_err(failed)?;
        let (train_path, test_path, scores_path) =
            (dir.path().join("train.csv"), dir.path().join("test.csv"), dir.path().join("scores.csv"));
        write_examples(&train_path, train, true)?;
        write_examples(&test_path, test, false)?;
        let status = Command::new(&self.command[0])
            .args(&self.command[1..])
            .current_dir(dir.path())
            .env("IMPUTELAB_TRAIN", &train_path)
            .env("IMPUTELAB_TEST", &test_path)
            .env("IMPUTELAB_SCORES", &scores_path)
            .status()
            .map_err(|e| failed(format!("cannot run `{}`: {e}", self.command[0])))?;
        if !status.success() {
            return Err(failed(format!("external predictor exited with {status}")));
        }
        let mut rdr = csv::Reader::from_path(&scores_path).map_err(failed)?;
        let mut scores: HashMap<(String, u32), f64> = HashMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(failed)?;
            let bad = || failed(format!("scores.csv: malformed row {:?}", rec));
            let pid = rec.get(0).ok_or_else(bad)?.to_string();
            let week: u32 = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let score: f64 = rec.get(2).and_then(|s| s.parse().ok()).filter(|s: &f64| s.is_finite()).ok_or_else(bad)?;
            scores.insert((pid, week), score);
        }
        let scores = test
            .iter()
            .map(|r| {
                scores
                    .get(&(r.participant_id.clone(), r.week))
                    .copied()
                    .ok_or_else(|| failed(format!("scores.csv has no score for {} week {}", r.participant_id, r.week)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(PredictorOutput {
            scores,
            threshold: 0.5,
            weights: Vec::new(),
        })
    }
}
