//! Linear model identification from snapshot data.
//!
//! * [`dmd`] fits `X′ ≈ A·X` and returns the reduced operator, its spectrum
//!   and the lifted modes.
//! * [`dmdc`] fits `X′ ≈ A·X + B·Υ` through a truncated SVD of the stacked
//!   matrix `Ω = [X; Υ]`.
//! * [`hdmdc`] runs the same fit on delay-embedded (Hankel) matrices, giving
//!   a model on the stacked state `[x_{k−h+1}; …; x_k]`.
//!
//! Rank-deficient `Ω` is solved in the minimum-norm sense, so input
//! directions that the data never excites come out as zero columns of `B`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, Complex64, RankSpec};
use crate::snapshots::{build_hankel_pair, ControlSequence, SnapshotPair, TimeSeries};

/// `z_{k+1} = A·z_k + B·w_k` on a stacked state of `depth` blocks of
/// `n_states` rows (and stacked inputs of `depth` blocks of `n_inputs`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub depth: usize,
    pub n_states: usize,
    pub n_inputs: usize,
    pub rank_used: usize,
    pub training_columns: usize,
}

impl LinearModel {
    /// Checks the block structure and finiteness.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        depth: usize,
        n_states: usize,
        n_inputs: usize,
        rank_used: usize,
        training_columns: usize,
    ) -> Result<Self> {
        let n_eff = depth * n_states;
        let q_eff = depth * n_inputs;
        if depth == 0 || n_states == 0 || n_inputs == 0 {
            return Err(Error::Argument(
                "model depth, state and input counts must be positive".into(),
            ));
        }
        if a.shape() != (n_eff, n_eff) || b.shape() != (n_eff, q_eff) {
            return Err(Error::Mismatch(format!(
                "expected A {n_eff}x{n_eff} and B {n_eff}x{q_eff}, got A {:?} and B {:?}",
                a.shape(),
                b.shape()
            )));
        }
        linalg::ensure_finite(&a)?;
        linalg::ensure_finite(&b)?;
        Ok(Self {
            a,
            b,
            depth,
            n_states,
            n_inputs,
            rank_used,
            training_columns,
        })
    }

    pub fn stacked_states(&self) -> usize {
        self.depth * self.n_states
    }

    pub fn stacked_inputs(&self) -> usize {
        self.depth * self.n_inputs
    }
}

#[derive(Debug, Clone)]
pub struct DmdResult {
    /// `U_rᵀ·X′·V_r·Σ_r⁻¹`
    pub a_tilde: DMatrix<f64>,
    pub eigenvalues: DVector<Complex64>,
    /// `X′·V_r·Σ_r⁻¹·W`, one mode per column.
    pub modes: DMatrix<Complex64>,
    pub rank_used: usize,
}

/// `X′·V_r·Σ_r⁻¹`, the factor shared by every variant below.
fn right_factor(x_prime: &DMatrix<f64>, v: &DMatrix<f64>, sigma: &DVector<f64>) -> DMatrix<f64> {
    let mut k = x_prime * v;
    for (j, s) in sigma.iter().enumerate() {
        k.column_mut(j).scale_mut(1.0 / s);
    }
    k
}

pub fn dmd(pair: &SnapshotPair, rank: RankSpec) -> Result<DmdResult> {
    let full = linalg::svd(&pair.x)?;
    let f = linalg::truncate(&full, rank)?;
    let k = right_factor(&pair.x_prime, &f.v, &f.sigma);
    let a_tilde = f.u.transpose() * &k;
    let eig = linalg::eig(&a_tilde)?;
    let modes = k.map(|x| Complex64::new(x, 0.0)) * &eig.vectors;
    Ok(DmdResult {
        a_tilde,
        eigenvalues: eig.values,
        modes,
        rank_used: f.rank(),
    })
}

fn fit_with_control(
    x: &DMatrix<f64>,
    x_prime: &DMatrix<f64>,
    upsilon: &DMatrix<f64>,
    rank: RankSpec,
    depth: usize,
    n_states: usize,
    n_inputs: usize,
) -> Result<LinearModel> {
    let rows_x = x.nrows();
    let rows_u = upsilon.nrows();
    let cols = x.ncols();
    let mut omega = DMatrix::zeros(rows_x + rows_u, cols);
    omega.rows_mut(0, rows_x).copy_from(x);
    omega.rows_mut(rows_x, rows_u).copy_from(upsilon);

    let full = linalg::svd(&omega)?;
    let f = linalg::truncate(&full, rank)?;
    let k = right_factor(x_prime, &f.v, &f.sigma);
    let a = &k * f.u.rows(0, rows_x).transpose();
    let b = &k * f.u.rows(rows_x, rows_u).transpose();
    LinearModel::new(a, b, depth, n_states, n_inputs, f.rank(), cols)
}

pub fn dmdc(pair: &SnapshotPair, controls: &ControlSequence, rank: RankSpec) -> Result<LinearModel> {
    if controls.n_steps() != pair.n_columns() {
        return Err(Error::Mismatch(format!(
            "{} control columns for {} snapshot columns",
            controls.n_steps(),
            pair.n_columns()
        )));
    }
    fit_with_control(
        &pair.x,
        &pair.x_prime,
        controls.values(),
        rank,
        1,
        pair.n_states(),
        controls.n_inputs(),
    )
}

/// DMDc on `h`-deep Hankel matrices of the first `train_window` transitions.
pub fn hdmdc(
    series: &TimeSeries,
    controls: &ControlSequence,
    h: usize,
    train_window: usize,
    rank: RankSpec,
) -> Result<LinearModel> {
    let hp = build_hankel_pair(series, controls, h, train_window)?;
    fit_with_control(
        &hp.x_tilde,
        &hp.x_prime_tilde,
        &hp.upsilon_tilde,
        rank,
        h,
        series.n_states(),
        controls.n_inputs(),
    )
}

/// The last `n` rows of `A` and `B`: the map from the stacked history to the
/// newest state block. Every other block row of a Hankel model only shifts
/// the history.
pub fn extract_current_block(model: &LinearModel) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = model.n_states;
    let start = model.stacked_states() - n;
    (
        model.a.rows(start, n).into_owned(),
        model.b.rows(start, n).into_owned(),
    )
}
