//! Train → predict → evaluate runs and the files they leave on disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::config::{DataSource, ExperimentConfig, Method};
use super::csvio::{self, write_file, Dataset};
use super::model_io;
use crate::error::{Error, Result};
use crate::linalg::{self, RankSpec};
use crate::metrics::{rmse_mae, PairedSamples};
use crate::predict::{self, clamp_nonnegative, error_series, ErrorSeries, PredictionResult};
use crate::simqueue::{self, sha256_hex};
use crate::snapshots::{build_snapshot_pair, ControlSequence};
use crate::sysid::{self, LinearModel};

pub const SOFTWARE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Simulates or ingests the configured data.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.source {
        DataSource::Simulate(sim) => Ok(Dataset::from_trace(&simqueue::simulate(sim)?)),
        DataSource::Csv { states, controls } => csvio::ingest_csv(states, controls),
    }
}

/// Fits `method` on transitions `0..m` of the dataset.
pub fn fit(ds: &Dataset, method: Method, m: usize, h: usize, rank: RankSpec) -> Result<LinearModel> {
    match method {
        Method::Dmdc => {
            let pair = build_snapshot_pair(&ds.series, 0, m)?;
            let u = ControlSequence::new(ds.controls.values().columns(0, m).into_owned())?;
            sysid::dmdc(&pair, &u, rank)
        }
        Method::Hdmdc => sysid::hdmdc(&ds.series, &ds.controls, h, m, rank),
    }
}

/// Steps needed to train on `m` transitions and then predict `steps` more.
pub fn required_steps(m: usize, steps: usize) -> usize {
    m + 1 + steps
}

/// Predicts columns `m+1 ..= m+steps` from the true states ending at `m`.
pub fn predict_after_training(
    ds: &Dataset,
    model: &LinearModel,
    m: usize,
    steps: usize,
) -> Result<(PredictionResult, DMatrix<f64>)> {
    let h = model.depth;
    let need = required_steps(m, steps);
    if need > ds.n_steps() || m + 1 < h {
        return Err(Error::Coverage(format!(
            "training on {m} transitions and predicting {steps} steps needs {need} samples, data has {}",
            ds.n_steps()
        )));
    }
    let first = m + 1 - h;
    let history = ds.series.values().columns(first, h).into_owned();
    let controls = ds.controls.values().columns(first, h - 1 + steps).into_owned();
    let result = predict::rollout(model, &history, &controls, steps, m + 1)?;
    let actual = ds.series.values().columns(m + 1, steps).into_owned();
    Ok((result, actual))
}

/// One row of the headline metrics table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: Method,
    pub horizon: usize,
    pub errors: ErrorSeries,
    pub overflow_columns: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub models: Vec<(Method, LinearModel)>,
    pub rows: Vec<MetricsRow>,
    pub files: Vec<String>,
}

pub fn metrics_table_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("method,horizon,rmse,mae\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.method, r.horizon, r.errors.aggregate_rmse, r.errors.aggregate_mae
        );
    }
    out
}

fn per_state_csv(rows: &[MetricsRow], names: &[String]) -> String {
    let mut out = String::from("method,horizon,state,rmse,mae\n");
    for r in rows {
        for (i, name) in names.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.method, r.horizon, name, r.errors.per_state_rmse[i], r.errors.per_state_mae[i]
            );
        }
    }
    out
}

fn eigenvalues_csv(model: &LinearModel) -> Result<String> {
    let e = linalg::eig(&model.a)?;
    let mut out = String::from("index,re,im,magnitude\n");
    for (i, z) in e.values.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{}", z.re, z.im, z.norm());
    }
    Ok(out)
}

fn human_report(
    config: &ExperimentConfig,
    ds: &Dataset,
    models: &[(Method, LinearModel)],
    rows: &[MetricsRow],
    predictions: &[(Method, usize, DMatrix<f64>)],
) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{SOFTWARE_VERSION}");
    let _ = writeln!(
        out,
        "data: {} states x {} steps starting at t={}",
        ds.series.n_states(),
        ds.n_steps(),
        ds.first_second
    );
    let _ = writeln!(
        out,
        "training transitions: {}  rank policy: {}\n",
        config.train_snapshots, config.rank
    );
    let _ = writeln!(out, "{:<8}{:>6}{:>10}{:>12}{:>12}", "method", "h", "rank", "radius", "unstable");
    for (method, model) in models {
        let s = predict::spectral_stability(model)?;
        let _ = writeln!(
            out,
            "{:<8}{:>6}{:>10}{:>12.6}{:>12}",
            method.name(),
            model.depth,
            model.rank_used,
            s.spectral_radius,
            s.unstable_count
        );
    }
    let _ = writeln!(out, "\n{:<8}{:>8}{:>12}{:>12}", "method", "horizon", "RMSE", "MAE");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<8}{:>8}{:>12.4}{:>12.4}{}",
            r.method.name(),
            r.horizon,
            r.errors.aggregate_rmse,
            r.errors.aggregate_mae,
            if r.overflow_columns > 0 { "  (overflow)" } else { "" }
        );
    }
    let _ = writeln!(out, "\nmean predicted queue (negative values shown as 0)");
    let _ = write!(out, "{:<8}{:>8}", "method", "horizon");
    for n in &ds.state_names {
        let _ = write!(out, "{n:>8}");
    }
    out.push('\n');
    for (method, horizon, pred) in predictions {
        let clamped = clamp_nonnegative(pred);
        let _ = write!(out, "{:<8}{:>8}", method.name(), horizon);
        for row in clamped.row_iter() {
            let _ = write!(out, "{:>8.2}", row.mean());
        }
        out.push('\n');
    }
    Ok(out)
}

fn check_coverage(config: &ExperimentConfig, ds: &Dataset) -> Result<()> {
    let need = required_steps(config.train_snapshots, config.max_steps());
    if need > ds.n_steps() {
        return Err(Error::Coverage(format!(
            "train_snapshots={} with max horizon {} needs {need} samples, data has {}",
            config.train_snapshots,
            config.max_steps(),
            ds.n_steps()
        )));
    }
    Ok(())
}

fn write_model_files(
    out: &Path,
    method: Method,
    model: &LinearModel,
    files: &mut Vec<String>,
) -> Result<()> {
    let mut put = |name: String, body: String| -> Result<()> {
        write_file(&out.join(&name), &body)?;
        files.push(name);
        Ok(())
    };
    put(format!("model_{method}.txt"), model_io::model_to_string(model))?;
    put(format!("a_{method}.csv"), csvio::matrix_csv(&model.a))?;
    put(format!("b_{method}.csv"), csvio::matrix_csv(&model.b))?;
    if model.depth > 1 {
        let (a, b) = sysid::extract_current_block(model);
        put(format!("a_{method}_current.csv"), csvio::matrix_csv(&a))?;
        put(format!("b_{method}_current.csv"), csvio::matrix_csv(&b))?;
    }
    put(format!("eigenvalues_{method}.csv"), eigenvalues_csv(model)?)?;
    Ok(())
}

fn manifest(config: &ExperimentConfig, ds: &Dataset, files: &[String]) -> String {
    let data_digest = sha256_hex(
        format!("{}{}", csvio::states_csv(ds), csvio::controls_csv(ds)).as_bytes(),
    );
    let mut out = format!(
        "software = {SOFTWARE_VERSION}\nseed = {}\nconfig_digest = {}\ndata_digest = {data_digest}\n",
        config.seed,
        config.digest(),
    );
    let _ = writeln!(out, "files = {}", files.join(","));
    out.push_str("\n# resolved configuration\n");
    for line in config.canonical_text().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// Full run: identify every configured method, predict every horizon and
/// write the report bundle into `out`. Data coverage is checked before any
/// file is created.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    config.validate()?;
    let ds = load_dataset(config)?;
    check_coverage(config, &ds)?;

    let m = config.train_snapshots;
    let mut models = Vec::new();
    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for &method in &config.methods {
        let model = fit(&ds, method, m, config.depth(method), config.rank)?;
        for &steps in &config.predict_steps {
            let (result, actual) = predict_after_training(&ds, &model, m, steps)?;
            rows.push(MetricsRow {
                method,
                horizon: steps,
                errors: error_series(&actual, &result)?,
                overflow_columns: result.overflow_columns.len(),
            });
            predictions.push((method, steps, result, actual));
        }
        models.push((method, model));
    }

    create_dir(out)?;
    let mut files = Vec::new();
    if matches!(config.source, DataSource::Simulate(_)) {
        csvio::emit_csv(&ds, &out.join("states.csv"), &out.join("controls.csv"))?;
        files.extend(["states.csv".to_string(), "controls.csv".to_string()]);
    }
    for (method, model) in &models {
        write_model_files(out, *method, model, &mut files)?;
    }
    for (method, steps, result, actual) in &predictions {
        let name = format!("predictions_{method}_{steps}.csv");
        let t0 = ds.first_second + result.start_index as u64;
        write_file(
            &out.join(&name),
            &csvio::predictions_csv(t0, &ds.state_names, &result.predicted, actual),
        )?;
        files.push(name);
    }
    write_file(&out.join("metrics.csv"), &metrics_table_csv(&rows))?;
    write_file(
        &out.join("metrics_per_state.csv"),
        &per_state_csv(&rows, &ds.state_names),
    )?;
    let summaries: Vec<(Method, usize, DMatrix<f64>)> = predictions
        .iter()
        .map(|(m, s, r, _)| (*m, *s, r.predicted.clone()))
        .collect();
    write_file(
        &out.join("report.txt"),
        &human_report(config, &ds, &models, &rows, &summaries)?,
    )?;
    files.extend([
        "metrics.csv".to_string(),
        "metrics_per_state.csv".to_string(),
        "report.txt".to_string(),
    ]);
    write_file(&out.join("manifest.txt"), &manifest(config, &ds, &files))?;
    files.push("manifest.txt".to_string());

    Ok(ExperimentOutcome {
        out_dir: out.to_path_buf(),
        models,
        rows,
        files,
    })
}

/// Identification only: model, matrix grids and spectrum per method.
pub fn run_identify(config: &ExperimentConfig, out: &Path) -> Result<Vec<(Method, LinearModel)>> {
    config.validate()?;
    let ds = load_dataset(config)?;
    if config.train_snapshots + 1 > ds.n_steps() {
        return Err(Error::Coverage(format!(
            "train_snapshots={} needs {} samples, data has {}",
            config.train_snapshots,
            config.train_snapshots + 1,
            ds.n_steps()
        )));
    }
    let models = config
        .methods
        .iter()
        .map(|&method| {
            fit(&ds, method, config.train_snapshots, config.depth(method), config.rank)
                .map(|m| (method, m))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(out)?;
    let mut files = Vec::new();
    for (method, model) in &models {
        write_model_files(out, *method, model, &mut files)?;
    }
    write_file(&out.join("manifest.txt"), &manifest(config, &ds, &files))?;
    Ok(models)
}

/// Rolls a stored model forward after the configured training window and
/// writes predictions plus their metrics.
pub fn run_predict(
    config: &ExperimentConfig,
    model_path: &Path,
    out: &Path,
) -> Result<Vec<(usize, ErrorSeries)>> {
    config.validate()?;
    let model = model_io::read_model(model_path)?;
    let ds = load_dataset(config)?;
    if model.n_states != ds.series.n_states() || model.n_inputs != ds.controls.n_inputs() {
        return Err(Error::Mismatch(format!(
            "model is {} states x {} inputs, data is {} x {}",
            model.n_states,
            model.n_inputs,
            ds.series.n_states(),
            ds.controls.n_inputs()
        )));
    }
    check_coverage(config, &ds)?;
    let m = config.train_snapshots;
    let mut results = Vec::new();
    let mut body = Vec::new();
    for &steps in &config.predict_steps {
        let (result, actual) = predict_after_training(&ds, &model, m, steps)?;
        let t0 = ds.first_second + result.start_index as u64;
        body.push((
            format!("predictions_{steps}.csv"),
            csvio::predictions_csv(t0, &ds.state_names, &result.predicted, &actual),
        ));
        results.push((steps, error_series(&actual, &result)?));
    }
    create_dir(out)?;
    for (name, text) in body {
        write_file(&out.join(name), &text)?;
    }
    let mut table = String::from("horizon,rmse,mae\n");
    for (steps, e) in &results {
        let _ = writeln!(table, "{steps},{},{}", e.aggregate_rmse, e.aggregate_mae);
    }
    write_file(&out.join("metrics.csv"), &table)?;
    Ok(results)
}

/// RMSE/MAE over all states and steps of a predictions CSV, recomputed from
/// the file alone.
pub fn metrics_from_predictions(path: &Path) -> Result<(f64, f64)> {
    let (pred, actual) = csvio::read_predictions_csv(path)?;
    let flat = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
    let r = rmse_mae(&PairedSamples::new(flat(&actual), flat(&pred))?);
    Ok((r.rmse, r.mae))
}
