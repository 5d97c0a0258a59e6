//! Open-loop rollout of identified models, prediction error series, and
//! spectral stability of the state matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{rmse_mae, PairedSamples};
use crate::sysid::LinearModel;

/// Eigenvalues with magnitude above `1 + STABILITY_MARGIN` count as unstable.
pub const STABILITY_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    /// `n × steps`, column `k` is the state at `start_index + k`.
    pub predicted: DMatrix<f64>,
    pub start_index: usize,
    pub depth: usize,
    /// Stacked state after the last step; feed to [`continue_rollout`].
    pub final_state: DVector<f64>,
    /// Columns holding non-finite values after the model blew up.
    pub overflow_columns: Vec<usize>,
}

impl PredictionResult {
    pub fn steps(&self) -> usize {
        self.predicted.ncols()
    }

    pub fn is_unstable(&self) -> bool {
        !self.overflow_columns.is_empty()
    }
}

fn check_controls(model: &LinearModel, controls: &DMatrix<f64>, steps: usize) -> Result<()> {
    let needed = model.depth - 1 + steps;
    if controls.nrows() != model.n_inputs {
        return Err(Error::Mismatch(format!(
            "model takes {} inputs, controls have {} rows",
            model.n_inputs,
            controls.nrows()
        )));
    }
    if controls.ncols() < needed {
        return Err(Error::Coverage(format!(
            "{steps} steps at depth {} need {needed} control columns, got {}",
            model.depth,
            controls.ncols()
        )));
    }
    Ok(())
}

fn propagate(
    model: &LinearModel,
    mut z: DVector<f64>,
    controls: &DMatrix<f64>,
    steps: usize,
    start_index: usize,
) -> PredictionResult {
    let n = model.n_states;
    let q = model.n_inputs;
    let h = model.depth;
    let newest = model.stacked_states() - n;
    let mut predicted = DMatrix::zeros(n, steps);
    let mut overflow_columns = Vec::new();
    let mut w = DVector::zeros(h * q);
    for k in 0..steps {
        for b in 0..h {
            w.rows_mut(b * q, q).copy_from(&controls.column(k + b));
        }
        z = &model.a * &z + &model.b * &w;
        let x = z.rows(newest, n);
        if x.iter().any(|v| !v.is_finite()) {
            overflow_columns.push(k);
        }
        predicted.set_column(k, &x);
    }
    PredictionResult {
        predicted,
        start_index,
        depth: h,
        final_state: z,
        overflow_columns,
    }
}

/// Predicts `steps` states after the newest column of `history`.
///
/// `history` holds the `h` most recent true states, oldest first. `controls`
/// starts at the oldest history step and must cover `h − 1 + steps` columns;
/// the window ending at step `k` drives the transition to `k + 1`.
/// `start_index` labels the first predicted column.
pub fn rollout(
    model: &LinearModel,
    history: &DMatrix<f64>,
    controls: &DMatrix<f64>,
    steps: usize,
    start_index: usize,
) -> Result<PredictionResult> {
    if history.shape() != (model.n_states, model.depth) {
        return Err(Error::Coverage(format!(
            "history must be {}x{} (states x depth), got {}x{}",
            model.n_states,
            model.depth,
            history.nrows(),
            history.ncols()
        )));
    }
    linalg::ensure_finite(history)?;
    check_controls(model, controls, steps)?;
    let z0 = DVector::from_column_slice(history.as_slice());
    Ok(propagate(model, z0, controls, steps, start_index))
}

/// Continues a rollout from its final stacked state. `controls` starts
/// `h − 1` steps before the first new prediction's driving step, exactly as
/// for [`rollout`].
pub fn continue_rollout(
    model: &LinearModel,
    previous: &PredictionResult,
    controls: &DMatrix<f64>,
    steps: usize,
) -> Result<PredictionResult> {
    if previous.final_state.len() != model.stacked_states() {
        return Err(Error::Mismatch(format!(
            "stacked state has {} rows, model expects {}",
            previous.final_state.len(),
            model.stacked_states()
        )));
    }
    check_controls(model, controls, steps)?;
    Ok(propagate(
        model,
        previous.final_state.clone(),
        controls,
        steps,
        previous.start_index + previous.steps(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    /// actual − predicted
    pub errors: DMatrix<f64>,
    pub per_state_mae: Vec<f64>,
    pub per_state_rmse: Vec<f64>,
    pub aggregate_mae: f64,
    pub aggregate_rmse: f64,
}

/// Flattens state-major: all steps of state 0, then state 1, and so on.
fn flatten_rows(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn error_series(actual: &DMatrix<f64>, result: &PredictionResult) -> Result<ErrorSeries> {
    if actual.shape() != result.predicted.shape() {
        return Err(Error::Mismatch(format!(
            "actual is {:?}, prediction is {:?}",
            actual.shape(),
            result.predicted.shape()
        )));
    }
    let errors = actual - &result.predicted;
    let mut per_state_mae = Vec::with_capacity(actual.nrows());
    let mut per_state_rmse = Vec::with_capacity(actual.nrows());
    for i in 0..actual.nrows() {
        let s = PairedSamples::new(
            actual.row(i).iter().copied().collect(),
            result.predicted.row(i).iter().copied().collect(),
        )?;
        let m = rmse_mae(&s);
        per_state_mae.push(m.mae);
        per_state_rmse.push(m.rmse);
    }
    let all = PairedSamples::new(flatten_rows(actual), flatten_rows(&result.predicted))?;
    let agg = rmse_mae(&all);
    Ok(ErrorSeries {
        errors,
        per_state_mae,
        per_state_rmse,
        aggregate_mae: agg.mae,
        aggregate_rmse: agg.rmse,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Nonincreasing.
    pub magnitudes: Vec<f64>,
    pub unstable_count: usize,
    pub spectral_radius: f64,
    pub stable: bool,
}

pub fn spectral_stability(model: &LinearModel) -> Result<StabilityReport> {
    let e = linalg::eig(&model.a)?;
    let magnitudes: Vec<f64> = e.values.iter().map(|z| z.norm()).collect();
    let unstable_count = magnitudes
        .iter()
        .filter(|&&m| m > 1.0 + STABILITY_MARGIN)
        .count();
    Ok(StabilityReport {
        spectral_radius: magnitudes.first().copied().unwrap_or(0.0),
        magnitudes,
        unstable_count,
        stable: unstable_count == 0,
    })
}

/// Lag of the strongest autocorrelation peak after the initial decay, searched
/// up to `max_lag`. `None` for flat series or when no peak exists in range.
pub fn dominant_period(series: &[f64], max_lag: usize) -> Option<usize> {
    let n = series.len();
    let max_lag = max_lag.min(n.saturating_sub(1));
    if max_lag < 2 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let acf: Vec<f64> = (0..=max_lag)
        .map(|lag| {
            dev.iter()
                .zip(&dev[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect();
    if !acf[0].is_finite() || acf[0] <= 0.0 {
        return None;
    }
    // skip the main lobe around lag 0
    let first_rise = (1..max_lag).find(|&l| acf[l + 1] > acf[l])?;
    (first_rise..=max_lag).max_by(|&a, &b| acf[a].total_cmp(&acf[b]).then(b.cmp(&a)))
}

/// Copy with negative queue lengths raised to zero, for human-readable output.
pub fn clamp_nonnegative(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}
