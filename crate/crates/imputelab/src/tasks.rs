//! One function per task. Each turns a resolved config and a dataset into
//! a report, a human summary and any dataset artifacts.

use std::path::{Path, PathBuf};

use imputelab_core::pipeline::{
    generate_synthetic, pldi, run_prediction, run_realtime, run_reconstruction, BaselineLogistic, PipelineError,
    PredictionConfig, Predictor, PredictorSpec, SynthConfig,
};
use imputelab_core::stats::{benjamini_hochberg, little_mcar_test};
use imputelab_core::{ampute, availability, AmputationError, DataError, FeatureSet, Imputer, LongitudinalDataset};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{RunConfig, Task};
use crate::csvio::{load_dataset_csv, write_dataset_csv, IoError};
use crate::exec::RayonExecutor;
use crate::external::ExternalPredictor;
use crate::report::{num, opt, write_report, ReportDocument, Table};

#[derive(Debug, Error)]
pub enum RunError {
    /// Invalid configuration or arguments.
    #[error("{0}")]
    Config(String),
    /// Unreadable or inconsistent input data.
    #[error("{0}")]
    Data(String),
    /// Failure writing outputs.
    #[error("{0}")]
    Output(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Data(_) => 3,
            RunError::Output(_) => 1,
        }
    }
}

impl From<IoError> for RunError {
    fn from(e: IoError) -> Self {
        RunError::Data(e.to_string())
    }
}

impl From<DataError> for RunError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::FeatureNotFound(_) | DataError::DuplicateFeature(_) | DataError::EmptyFeatureSet => {
                RunError::Config(format!("features: {e}"))
            }
            DataError::InvalidFraction(_) => RunError::Config(e.to_string()),
            other => RunError::Data(other.to_string()),
        }
    }
}

impl From<AmputationError> for RunError {
    fn from(e: AmputationError) -> Self {
        match e {
            AmputationError::InvalidRate(_) => RunError::Config(format!("amputation.r: {e}")),
            AmputationError::Data(d) => d.into(),
        }
    }
}

impl From<PipelineError> for RunError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Data(d) => d.into(),
            PipelineError::Amputation(a) => a.into(),
            PipelineError::NoStrategies => RunError::Config("strategies: none selected".into()),
            PipelineError::Invalid(m) => RunError::Data(m),
            PipelineError::Predictor(p) => RunError::Data(p.to_string()),
        }
    }
}

/// Human-readable result table for standard output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Summary {
    fn new(title: impl Into<String>, header: &[&str]) -> Self {
        Self {
            title: title.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(String::len).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = format!("{}\n{}\n", self.title, line(&self.header));
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

fn fmt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

pub struct TaskOutput {
    pub report: ReportDocument,
    pub summary: Summary,
    /// Dataset files to write next to the report, by file name.
    pub datasets: Vec<(String, LongitudinalDataset)>,
}

pub fn load_dataset(cfg: &RunConfig) -> Result<LongitudinalDataset, RunError> {
    match (&cfg.dataset, &cfg.synth) {
        (Some(path), _) => {
            log::info!("loading {}", path.display());
            Ok(load_dataset_csv(path, &cfg.schema)?)
        }
        (None, Some(s)) => {
            log::info!("generating synthetic dataset ({} participants)", s.n_participants);
            Ok(generate_synthetic(s)?)
        }
        (None, None) => Err(RunError::Config("dataset: no dataset path and no synth section given".into())),
    }
}

fn feature_set(cfg: &RunConfig, ds: &LongitudinalDataset) -> Result<FeatureSet, RunError> {
    let fs = match &cfg.features {
        Some(names) => FeatureSet::new(names.iter().map(String::as_str))?,
        None => FeatureSet::all(ds)?,
    };
    fs.resolve(ds)?;
    Ok(fs)
}

fn predictor(cfg: &RunConfig) -> Box<dyn Predictor> {
    match &cfg.predictor {
        PredictorSpec::BaselineLogistic(c) => Box::new(BaselineLogistic { config: c.clone() }),
        PredictorSpec::External { command } => Box::new(ExternalPredictor::new(command.clone())),
    }
}

fn failures_table(rows: impl IntoIterator<Item = imputelab_core::pipeline::ParticipantFailure>) -> Table {
    let mut t = Table::new(&["pid", "strategy", "error"]);
    for f in rows {
        t.push(vec![json!(f.participant_id), json!(f.strategy), json!(f.error)]);
    }
    t
}

pub fn run_task(task: Task, cfg: &RunConfig, exec: &RayonExecutor) -> Result<TaskOutput, RunError> {
    let mut report = ReportDocument::new(task.as_str(), cfg);
    if task == Task::Synth {
        return synth(cfg, report);
    }
    let ds = load_dataset(cfg)?;
    let fs = feature_set(cfg, &ds)?;
    let strategies = cfg.strategy_set();
    let imputers: Vec<&dyn Imputer> = strategies.iter().map(|s| s as &dyn Imputer).collect();
    let mut datasets = Vec::new();
    let summary = match task {
        Task::Availability => {
            let a = availability(&ds, &fs)?;
            let mut per_feature = Table::new(&["feature", "availability_pct"]);
            let mut s = Summary::new(format!("availability: {:.2}% overall", a.overall_pct), &["feature", "availability_pct"]);
            for (f, pct) in &a.per_feature_pct {
                per_feature.push(vec![json!(f), num(*pct)]);
                s.push(vec![f.clone(), format!("{pct:.2}")]);
            }
            let mut per_participant = Table::new(&["pid", "availability_pct"]);
            for (p, pct) in &a.per_participant_pct {
                per_participant.push(vec![json!(p), num(*pct)]);
            }
            report.tables.insert("availability_per_feature".into(), per_feature);
            report.tables.insert("availability_per_participant".into(), per_participant);
            report.results = serde_json::to_value(&a).expect("serialisable");
            s
        }
        Task::Ampute => {
            let amp = cfg.amputation_config();
            let (amputed, plan) = ampute(&ds, &fs, &amp)?;
            report.tables.insert("plan".into(), plan_table(&plan));
            let mut skipped = Table::new(&["pid", "feature"]);
            for g in &plan.skipped {
                skipped.push(vec![json!(g.participant_id), json!(g.feature)]);
            }
            report.tables.insert("amputation_skipped".into(), skipped);
            report.results = json!({
                "amputation": amp,
                "realized_rate_pct": num(plan.realized_rate_pct),
                "n_removed": plan.removed.len(),
            });
            datasets.push(("amputed.csv".to_string(), amputed));
            let mut s = Summary::new(format!("ampute: {}", amp.kind.as_str()), &["r", "realized_rate_pct", "n_removed"]);
            s.push(vec![format!("{}", amp.r), format!("{:.3}", plan.realized_rate_pct), plan.removed.len().to_string()]);
            s
        }
        Task::Impute => {
            let cols = fs.resolve(&ds)?;
            let before = ds.participants().iter().map(|p| p.matrix(&cols).n_missing()).sum::<usize>();
            let mut s = Summary::new("impute", &["strategy", "missing_before", "missing_after", "failures"]);
            let mut results = Vec::new();
            let mut failures = Vec::new();
            for imp in &imputers {
                log::info!("imputing with {}", imp.name());
                let out = pldi(&ds, &fs, *imp, cfg.seed, exec)?;
                let after = out.dataset.participants().iter().map(|p| p.matrix(&cols).n_missing()).sum::<usize>();
                s.push(vec![imp.name().into(), before.to_string(), after.to_string(), out.failures.len().to_string()]);
                results.push(json!({
                    "strategy": imp.name(),
                    "missing_before": before,
                    "missing_after": after,
                    "file": format!("imputed_{}.csv", imp.name()),
                }));
                failures.extend(out.failures);
                datasets.push((format!("imputed_{}.csv", imp.name()), out.dataset));
            }
            report.tables.insert("failures".into(), failures_table(failures));
            report.results = Value::Array(results);
            s
        }
        Task::Reconstruct => {
            let amp = cfg.amputation_config();
            log::info!("reconstruction: {} at r = {}", amp.kind.as_str(), amp.r);
            let res = run_reconstruction(&ds, &fs, &imputers, &amp, cfg.seed, exec)?;
            let mut per = Table::new(&["pid", "strategy", "r_rmse", "availability_pct"]);
            let mut counts = Table::new(&["pid", "strategy", "n_removed", "n_scored", "n_declined"]);
            for sc in &res.per_participant {
                per.push(vec![json!(sc.participant_id), json!(sc.strategy), opt(sc.r_rmse), num(sc.availability_pct)]);
                counts.push(vec![
                    json!(sc.participant_id),
                    json!(sc.strategy),
                    json!(sc.n_removed),
                    json!(sc.n_scored),
                    json!(sc.n_declined),
                ]);
            }
            let mut summary = Table::new(&[
                "strategy",
                "mean_r_rmse",
                "pooled_r_rmse",
                "n_scored",
                "n_declined",
                "n_failures",
                "wilcoxon_p_vs_first",
            ]);
            let mut s = Summary::new(
                format!("reconstruct: {} r = {} (realized {:.2}%)", amp.kind.as_str(), amp.r, res.realized_rate_pct),
                &["strategy", "mean_r_rmse", "pooled_r_rmse", "declined", "failures", "p_vs_first"],
            );
            for st in &res.summaries {
                let p = st.wilcoxon_vs_first.as_ref().map(|w| w.p_value);
                summary.push(vec![
                    json!(st.strategy),
                    opt(st.mean_r_rmse),
                    opt(st.pooled_r_rmse),
                    json!(st.n_scored),
                    json!(st.n_declined),
                    json!(st.failures.len()),
                    opt(p),
                ]);
                s.push(vec![
                    st.strategy.clone(),
                    fmt(st.mean_r_rmse),
                    fmt(st.pooled_r_rmse),
                    st.n_declined.to_string(),
                    st.failures.len().to_string(),
                    fmt(p),
                ]);
            }
            report.tables.insert("r_rmse_per_participant".into(), per);
            report.tables.insert("r_rmse_counts".into(), counts);
            report.tables.insert("r_rmse_summary".into(), summary);
            report.tables.insert("plan".into(), plan_table(&res.plan));
            report
                .tables
                .insert("failures".into(), failures_table(res.summaries.iter().flat_map(|s| s.failures.clone())));
            report.results = serde_json::to_value(&res).expect("serialisable");
            s
        }
        Task::Predict => {
            let pc = PredictionConfig {
                train_fraction: cfg.train_fraction,
                leakage: cfg.leakage,
                aggregation: cfg.aggregation,
                seed: cfg.seed,
            };
            let pred = predictor(cfg);
            log::info!("prediction: leakage mode {}", pc.leakage.as_str());
            let res = run_prediction(&ds, &fs, &imputers, pred.as_ref(), &pc, exec)?;
            let mut summary = Table::new(&[
                "strategy",
                "pooled_auroc",
                "pooled_balanced_accuracy",
                "n_train",
                "n_test",
                "n_failures",
                "predictor_error",
                "wilcoxon_p_vs_first",
            ]);
            let mut per = Table::new(&["pid", "strategy", "n_test", "accuracy"]);
            let mut preds = Table::new(&["pid", "strategy", "week", "label", "score", "pred"]);
            let mut s = Summary::new(
                format!("predict: leakage {} predictor {}", pc.leakage.as_str(), res.predictor),
                &["strategy", "auroc", "balanced_acc", "n_test", "failures", "p_vs_first"],
            );
            let mut failures = Vec::new();
            for st in &res.strategies {
                let p = st.wilcoxon_vs_first.as_ref().map(|w| w.p_value);
                summary.push(vec![
                    json!(st.strategy),
                    opt(st.pooled_auroc),
                    opt(st.pooled_balanced_accuracy),
                    json!(st.n_train),
                    json!(st.n_test),
                    json!(st.failures.len()),
                    st.predictor_error.as_ref().map_or(Value::Null, |e| json!(e)),
                    opt(p),
                ]);
                s.push(vec![
                    st.strategy.clone(),
                    fmt(st.pooled_auroc),
                    fmt(st.pooled_balanced_accuracy),
                    st.n_test.to_string(),
                    st.failures.len().to_string(),
                    fmt(p),
                ]);
                for pp in &st.per_participant {
                    per.push(vec![json!(pp.participant_id), json!(st.strategy), json!(pp.n_test), opt(pp.accuracy)]);
                }
                for w in &st.predictions {
                    preds.push(vec![
                        json!(w.participant_id),
                        json!(st.strategy),
                        json!(w.week),
                        json!(u8::from(w.label)),
                        num(w.score),
                        json!(u8::from(w.pred)),
                    ]);
                }
                failures.extend(st.failures.clone());
            }
            let mut excl = Table::new(&["pid", "scope", "reason"]);
            for e in &res.excluded {
                excl.push(vec![json!(e.participant_id), json!("all"), json!(e.reason)]);
            }
            for e in &res.excluded_from_fit {
                excl.push(vec![json!(e.participant_id), json!("predictor-fit"), json!(e.reason)]);
            }
            report.tables.insert("prediction_summary".into(), summary);
            report.tables.insert("prediction_per_participant".into(), per);
            report.tables.insert("predictions".into(), preds);
            report.tables.insert("exclusions".into(), excl);
            report.tables.insert("failures".into(), failures_table(failures));
            report.results = serde_json::to_value(&res).expect("serialisable");
            s
        }
        Task::Realtime => {
            let pred = predictor(cfg);
            let res = run_realtime(&ds, &fs, &imputers, pred.as_ref(), cfg.aggregation, cfg.seed, exec)?;
            let mut weekly =
                Table::new(&["strategy", "week", "auroc", "balanced_accuracy", "n_train", "n_test", "predictor_error"]);
            let mut s = Summary::new(
                format!("realtime: weeks {}..={}", res.start_week, res.end_week),
                &["strategy", "week", "auroc", "balanced_acc", "n_test"],
            );
            for w in &res.weeks {
                weekly.push(vec![
                    json!(w.strategy),
                    json!(w.week),
                    opt(w.auroc),
                    opt(w.balanced_accuracy),
                    json!(w.n_train),
                    json!(w.n_test),
                    w.predictor_error.as_ref().map_or(Value::Null, |e| json!(e)),
                ]);
                s.push(vec![
                    w.strategy.clone(),
                    w.week.to_string(),
                    fmt(w.auroc),
                    fmt(w.balanced_accuracy),
                    w.n_test.to_string(),
                ]);
            }
            let mut excl = Table::new(&["pid", "reason"]);
            for e in &res.skipped {
                excl.push(vec![json!(e.participant_id), json!(e.reason)]);
            }
            report.tables.insert("realtime_weekly".into(), weekly);
            report.tables.insert("exclusions".into(), excl);
            report.results = serde_json::to_value(&res).expect("serialisable");
            s
        }
        Task::McarTest => mcar(cfg, &ds, &fs, exec, &mut report)?,
        Task::Synth => unreachable!("handled above"),
    };
    Ok(TaskOutput {
        report,
        summary,
        datasets,
    })
}

fn plan_table(plan: &imputelab_core::AmputationPlan) -> Table {
    let mut t = Table::new(&["pid", "date", "feature", "original_value"]);
    for c in &plan.removed {
        t.push(vec![json!(c.participant_id), json!(c.date.to_string()), json!(c.feature), num(c.original_value)]);
    }
    t
}

fn mcar(
    cfg: &RunConfig,
    ds: &LongitudinalDataset,
    fs: &FeatureSet,
    exec: &RayonExecutor,
    report: &mut ReportDocument,
) -> Result<Summary, RunError> {
    use imputelab_core::pipeline::Executor;
    let cols = fs.resolve(ds)?;
    let results = exec.map(ds.participants(), |p| little_mcar_test(p.id(), &p.matrix(&cols)));
    let tested: Vec<usize> = (0..results.len()).filter(|&i| !results[i].skipped).collect();
    let ps: Vec<f64> = tested.iter().map(|&i| results[i].p_value.unwrap_or(1.0)).collect();
    let bh = benjamini_hochberg(&ps, cfg.alpha);
    let mut reject = vec![None; results.len()];
    for (k, &i) in tested.iter().enumerate() {
        reject[i] = Some(bh.reject[k]);
    }
    let mut t = Table::new(&["pid", "d2", "df", "p_value", "reject_bh", "skipped", "reason"]);
    for (r, rej) in results.iter().zip(&reject) {
        t.push(vec![
            json!(r.participant_id),
            num(r.d2),
            json!(r.df),
            opt(r.p_value),
            rej.map_or(Value::Null, Value::Bool),
            json!(r.skipped),
            r.reason.as_ref().map_or(Value::Null, |m| json!(m)),
        ]);
    }
    let n_reject = bh.reject.iter().filter(|&&b| b).count();
    let pct = (!tested.is_empty()).then(|| 100.0 * n_reject as f64 / tested.len() as f64);
    report.tables.insert("mcar".into(), t);
    report.results = json!({
        "alpha": cfg.alpha,
        "n_participants": results.len(),
        "n_tested": tested.len(),
        "n_rejected_bh": n_reject,
        "pct_rejected_bh": opt(pct),
        "tests": results,
    });
    let mut s = Summary::new(format!("mcar-test: BH at alpha = {}", cfg.alpha), &["tested", "rejected", "pct_rejected"]);
    s.push(vec![tested.len().to_string(), n_reject.to_string(), fmt(pct)]);
    Ok(s)
}

fn synth(cfg: &RunConfig, mut report: ReportDocument) -> Result<TaskOutput, RunError> {
    let sc = cfg.synth.clone().unwrap_or(SynthConfig {
        seed: cfg.seed,
        ..SynthConfig::default()
    });
    let ds = generate_synthetic(&sc)?;
    let a = availability(&ds, &FeatureSet::all(&ds)?)?;
    report.results = json!({ "synth": sc, "availability_pct": num(a.overall_pct) });
    let mut s = Summary::new("synth", &["participants", "features", "weeks", "availability_pct"]);
    s.push(vec![
        sc.n_participants.to_string(),
        sc.n_features.to_string(),
        sc.n_weeks.to_string(),
        format!("{:.2}", a.overall_pct),
    ]);
    Ok(TaskOutput {
        report,
        summary: s,
        datasets: vec![("dataset.csv".into(), ds)],
    })
}

/// Runs `task` and writes the report and dataset artifacts into the
/// configured output directory. Returns the written paths.
pub fn execute(task: Task, cfg: &RunConfig, exec: &RayonExecutor) -> Result<(Vec<PathBuf>, Summary), RunError> {
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("imputelab-out"));
    let out = run_task(task, cfg, exec)?;
    let output = |e: IoError| RunError::Output(e.to_string());
    let mut written = write_report(&out.report, &out_dir).map_err(output)?;
    for (name, ds) in &out.datasets {
        let path: PathBuf = Path::new(&out_dir).join(name);
        write_dataset_csv(ds, &path).map_err(output)?;
        written.push(path);
    }
    Ok((written, out.summary))
}
