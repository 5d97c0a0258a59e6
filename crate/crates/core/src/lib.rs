//! System identification of signalized-intersection queue dynamics with
//! DMD-with-control and Hankel DMD-with-control.
//!
//! Modules, bottom up:
//!
//! * [`linalg`]: SVD, rank truncation, pseudoinverse, eigendecomposition.
//! * [`snapshots`]: time series, snapshot pairs, Hankel embedding.
//! * [`sysid`]: DMD, DMDc and HDMDc identification.
//! * [`predict`]: open-loop rollout, error series, spectral stability.
//! * [`metrics`]: RMSE/MAE, GEH, Pearson correlation.
//! * [`simqueue`]: point-queue intersection simulator.
//! * [`cli`]: file formats, experiment runner, parameter sweeps.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod predict;
pub mod simqueue;
pub mod snapshots;
pub mod sysid;

pub use error::{Error, Result};
