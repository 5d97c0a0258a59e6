//! Grid evaluation over training size, embedding depth and prediction window.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::{Method, SweepGrid};
use super::csvio::Dataset;
use super::experiment::{fit, predict_after_training, required_steps};
use crate::error::{Error, Result};
use crate::predict::error_series;

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Ok { rmse: f64, mae: f64 },
    Failed { code: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub train_snapshots: usize,
    pub embedding: usize,
    pub window: usize,
    pub outcome: CellOutcome,
}

impl SweepRow {
    fn key(&self) -> (usize, usize, usize) {
        (self.train_snapshots, self.embedding, self.window)
    }
}

fn failed(e: Error) -> CellOutcome {
    CellOutcome::Failed {
        code: e.code(),
        message: e.to_string(),
    }
}

fn evaluate_pair(ds: &Dataset, grid: &SweepGrid, m: usize, h: usize) -> Vec<SweepRow> {
    let row = |window, outcome| SweepRow {
        train_snapshots: m,
        embedding: h,
        window,
        outcome,
    };
    if m < h + 2 {
        return grid
            .windows
            .iter()
            .map(|&w| {
                let e = Error::Embedding(format!("train_snapshots {m} < embedding {h} + 2"));
                row(w, failed(e))
            })
            .collect();
    }
    let model = if m + 1 > ds.n_steps() {
        Err(Error::Coverage(format!(
            "training on {m} transitions needs {} samples, data has {}",
            m + 1,
            ds.n_steps()
        )))
    } else {
        fit(ds, Method::Hdmdc, m, h, grid.rank)
    };
    grid.windows
        .iter()
        .map(|&w| {
            let outcome = match &model {
                Err(e) => CellOutcome::Failed {
                    code: e.code(),
                    message: e.to_string(),
                },
                Ok(_) if required_steps(m, w) > ds.n_steps() => failed(Error::Coverage(format!(
                    "needs {} samples, data has {}",
                    required_steps(m, w),
                    ds.n_steps()
                ))),
                Ok(model) => match predict_after_training(ds, model, m, w)
                    .and_then(|(r, actual)| error_series(&actual, &r))
                {
                    Ok(e) => CellOutcome::Ok {
                        rmse: e.aggregate_rmse,
                        mae: e.aggregate_mae,
                    },
                    Err(e) => failed(e),
                },
            };
            row(w, outcome)
        })
        .collect()
}

/// One row per grid cell, sorted by `(m, h, window)`. Cells run in parallel;
/// a failing cell becomes an error-coded row.
pub fn run_sweep(ds: &Dataset, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let pairs: Vec<(usize, usize)> = grid
        .train_snapshots
        .iter()
        .flat_map(|&m| grid.embeddings.iter().map(move |&h| (m, h)))
        .collect();
    let mut rows: Vec<SweepRow> = pairs
        .par_iter()
        .flat_map_iter(|&(m, h)| evaluate_pair(ds, grid, m, h))
        .collect();
    rows.sort_by_key(SweepRow::key);
    rows.dedup_by_key(|r| r.key());
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("train_snapshots,embedding,window,status,rmse,mae\n");
    for r in rows {
        let _ = match &r.outcome {
            CellOutcome::Ok { rmse, mae } => writeln!(
                out,
                "{},{},{},ok,{rmse},{mae}",
                r.train_snapshots, r.embedding, r.window
            ),
            CellOutcome::Failed { code, .. } => writeln!(
                out,
                "{},{},{},{code},,",
                r.train_snapshots, r.embedding, r.window
            ),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RankSpec;
    use crate::snapshots::{ControlSequence, TimeSeries};
    use nalgebra::DMatrix;

    fn toy_dataset(steps: usize) -> Dataset {
        let u = DMatrix::from_fn(1, steps, |_, k| (((k * 37) % 11) > 5) as u8 as f64);
        let mut x = DMatrix::zeros(2, steps);
        for k in 1..steps {
            x[(0, k)] = 0.8 * x[(0, k - 1)] + 0.1 * x[(1, k - 1)] + u[(0, k - 1)];
            x[(1, k)] = -0.2 * x[(0, k - 1)] + 0.7 * x[(1, k - 1)] + 0.5 * u[(0, k - 1)];
        }
        Dataset::new(TimeSeries::new(x).unwrap(), ControlSequence::new(u).unwrap(), 0).unwrap()
    }

    #[test]
    fn cardinality_and_order() {
        let ds = toy_dataset(700);
        let grid = SweepGrid {
            train_snapshots: vec![400, 200],
            embeddings: vec![9, 1],
            windows: vec![200],
            rank: RankSpec::Automatic,
        };
        let rows = run_sweep(&ds, &grid).unwrap();
        let keys: Vec<_> = rows.iter().map(SweepRow::key).collect();
        assert_eq!(keys, vec![(200, 1, 200), (200, 9, 200), (400, 1, 200), (400, 9, 200)]);
        assert!(rows.iter().all(|r| matches!(r.outcome, CellOutcome::Ok { .. })));
    }

    #[test]
    fn infeasible_cells_are_isolated() {
        let ds = toy_dataset(300);
        let grid = SweepGrid {
            train_snapshots: vec![5, 100],
            embeddings: vec![1, 9],
            windows: vec![50, 250],
            rank: RankSpec::Automatic,
        };
        let rows = run_sweep(&ds, &grid).unwrap();
        assert_eq!(rows.len(), 8);
        let get = |m, h, w| rows.iter().find(|r| r.key() == (m, h, w)).unwrap();
        assert!(matches!(get(5, 9, 50).outcome, CellOutcome::Failed { code: "embedding", .. }));
        assert!(matches!(get(100, 9, 250).outcome, CellOutcome::Failed { code: "coverage", .. }));
        assert!(matches!(get(100, 9, 50).outcome, CellOutcome::Ok { .. }));
        assert!(matches!(get(5, 1, 50).outcome, CellOutcome::Ok { .. }));
        let text = sweep_csv(&rows);
        assert!(text.contains("5,9,50,embedding,,\n"));
    }

    #[test]
    fn empty_axis_rejected() {
        let grid = SweepGrid {
            windows: vec![],
            ..SweepGrid::default()
        };
        assert!(run_sweep(&toy_dataset(50), &grid).is_err());
    }
}
