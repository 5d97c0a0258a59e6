//! Time series containers and the snapshot / Hankel matrices built from them.
//!
//! All indices are 0-based: column `k` of a [`TimeSeries`] is the state at
//! step `k`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::ensure_finite;

/// States sampled on a fixed cadence, one column per step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: DMatrix<f64>,
    dt_seconds: f64,
}

impl TimeSeries {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        Self::with_dt(values, 1.0)
    }

    pub fn with_dt(values: DMatrix<f64>, dt_seconds: f64) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Argument(format!(
                "time series needs at least one state and one step, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if !(dt_seconds.is_finite() && dt_seconds > 0.0) {
            return Err(Error::Argument(format!(
                "sampling interval must be positive, got {dt_seconds}"
            )));
        }
        ensure_finite(&values)?;
        Ok(Self { values, dt_seconds })
    }

    pub fn n_states(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.values.ncols()
    }

    pub fn dt_seconds(&self) -> f64 {
        self.dt_seconds
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// Binary control inputs, one column per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    values: DMatrix<f64>,
}

impl ControlSequence {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Argument(format!(
                "control sequence needs at least one input and one step, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        let mut bad = Vec::new();
        for (col, column) in values.column_iter().enumerate() {
            for (row, &v) in column.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    bad.push(format!("entry ({row}, {col}) = {v} is not 0 or 1"));
                }
            }
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        Ok(Self { values })
    }

    pub fn n_inputs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// `X` and its one-step successor `X′`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPair {
    pub x: DMatrix<f64>,
    pub x_prime: DMatrix<f64>,
}

impl SnapshotPair {
    pub fn new(x: DMatrix<f64>, x_prime: DMatrix<f64>) -> Result<Self> {
        if x.shape() != x_prime.shape() {
            return Err(Error::Mismatch(format!(
                "snapshot matrices differ in shape: {:?} vs {:?}",
                x.shape(),
                x_prime.shape()
            )));
        }
        if x.is_empty() {
            return Err(Error::Argument("empty snapshot matrices".into()));
        }
        Ok(Self { x, x_prime })
    }

    pub fn n_states(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.x.ncols()
    }
}

/// Delay-embedded states, successors and controls with a shared column count.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelPair {
    pub depth: usize,
    pub x_tilde: DMatrix<f64>,
    pub x_prime_tilde: DMatrix<f64>,
    pub upsilon_tilde: DMatrix<f64>,
}

impl HankelPair {
    pub fn n_columns(&self) -> usize {
        self.x_tilde.ncols()
    }
}

pub fn build_snapshot_pair(series: &TimeSeries, start: usize, count: usize) -> Result<SnapshotPair> {
    if count == 0 {
        return Err(Error::Range("snapshot count must be positive".into()));
    }
    let needed = start + count + 1;
    if needed > series.n_steps() {
        return Err(Error::Range(format!(
            "window start={start} count={count} needs {needed} steps (start + count + 1), series has {}",
            series.n_steps()
        )));
    }
    let v = series.values();
    Ok(SnapshotPair {
        x: v.columns(start, count).into_owned(),
        x_prime: v.columns(start + 1, count).into_owned(),
    })
}

/// Stacks `h` column-shifted copies of `matrix`: output column `j` is source
/// columns `j, j+1, …, j+h−1` on top of one another.
pub fn hankel_embed(matrix: &DMatrix<f64>, h: usize) -> Result<DMatrix<f64>> {
    if h == 0 {
        return Err(Error::Argument("embedding depth must be at least 1".into()));
    }
    let (n, m) = matrix.shape();
    if h > m {
        return Err(Error::Embedding(format!(
            "embedding depth {h} exceeds the {m} available columns"
        )));
    }
    let cols = m - h + 1;
    let mut out = DMatrix::zeros(h * n, cols);
    for b in 0..h {
        out.view_mut((b * n, 0), (n, cols))
            .copy_from(&matrix.columns(b, cols));
    }
    Ok(out)
}

/// Hankel matrices over the first `train_window` transitions of `series`.
pub fn build_hankel_pair(
    series: &TimeSeries,
    controls: &ControlSequence,
    h: usize,
    train_window: usize,
) -> Result<HankelPair> {
    if series.n_steps() != controls.n_steps() {
        return Err(Error::Mismatch(format!(
            "series has {} steps but controls have {}",
            series.n_steps(),
            controls.n_steps()
        )));
    }
    if train_window == 0 {
        return Err(Error::Range("training window must be positive".into()));
    }
    if train_window + 1 > series.n_steps() {
        return Err(Error::Range(format!(
            "training window {train_window} needs {} steps, series has {}",
            train_window + 1,
            series.n_steps()
        )));
    }
    let v = series.values();
    let x_tilde = hankel_embed(&v.columns(0, train_window).into_owned(), h)?;
    let x_prime_tilde = hankel_embed(&v.columns(1, train_window).into_owned(), h)?;
    let upsilon_tilde = hankel_embed(&controls.values().columns(0, train_window).into_owned(), h)?;
    Ok(HankelPair {
        depth: h,
        x_tilde,
        x_prime_tilde,
        upsilon_tilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn series(values: DMatrix<f64>) -> TimeSeries {
        TimeSeries::new(values).unwrap()
    }

    #[test]
    fn snapshot_pair_shift() {
        let s = series(dmatrix![1.0, 2.0, 3.0, 4.0, 5.0; 10.0, 20.0, 30.0, 40.0, 50.0]);
        let p = build_snapshot_pair(&s, 0, 4).unwrap();
        assert_eq!(p.x, dmatrix![1.0, 2.0, 3.0, 4.0; 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(p.x_prime, dmatrix![2.0, 3.0, 4.0, 5.0; 20.0, 30.0, 40.0, 50.0]);

        let p = build_snapshot_pair(&s, 2, 2).unwrap();
        assert_eq!(p.x, dmatrix![3.0, 4.0; 30.0, 40.0]);
    }

    #[test]
    fn snapshot_pair_out_of_range() {
        let s = series(dmatrix![1.0, 2.0]);
        let err = build_snapshot_pair(&s, 0, 2).unwrap_err();
        assert!(matches!(err, Error::Range(ref msg) if msg.contains("needs 3")));
    }

    #[test]
    fn constant_series_is_a_fixed_point() {
        let s = series(DMatrix::from_element(3, 6, 2.5));
        let p = build_snapshot_pair(&s, 0, 5).unwrap();
        assert_eq!(p.x, p.x_prime);
    }

    #[test]
    fn hankel_examples() {
        let m = dmatrix![1.0, 2.0, 3.0, 4.0];
        assert_eq!(hankel_embed(&m, 1).unwrap(), m);
        assert_eq!(
            hankel_embed(&m, 2).unwrap(),
            dmatrix![1.0, 2.0, 3.0; 2.0, 3.0, 4.0]
        );
        let m2 = dmatrix![1.0, 2.0, 3.0, 4.0; 5.0, 6.0, 7.0, 8.0];
        let full = hankel_embed(&m2, 4).unwrap();
        assert_eq!(full.shape(), (8, 1));
        assert_eq!(full.as_slice(), &[1.0, 5.0, 2.0, 6.0, 3.0, 7.0, 4.0, 8.0]);
    }

    #[test]
    fn hankel_depth_errors() {
        let m = dmatrix![1.0, 2.0];
        assert!(matches!(hankel_embed(&m, 3), Err(Error::Embedding(_))));
        assert!(matches!(hankel_embed(&m, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn hankel_pair_scalar_example() {
        let s = series(dmatrix![1.0, 2.0, 3.0, 4.0, 5.0]);
        let u = ControlSequence::new(dmatrix![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let hp = build_hankel_pair(&s, &u, 2, 4).unwrap();
        assert_eq!(hp.x_tilde, dmatrix![1.0, 2.0, 3.0; 2.0, 3.0, 4.0]);
        assert_eq!(hp.x_prime_tilde, dmatrix![2.0, 3.0, 4.0; 3.0, 4.0, 5.0]);
        assert_eq!(hp.upsilon_tilde, dmatrix![0.0, 1.0, 0.0; 1.0, 0.0, 1.0]);
    }

    #[test]
    fn hankel_pair_intersection_dimensions() {
        let s = series(DMatrix::from_fn(8, 401, |i, j| (i * 401 + j) as f64));
        let u = ControlSequence::new(DMatrix::from_fn(8, 401, |i, j| ((i + j) % 2) as f64)).unwrap();
        let hp = build_hankel_pair(&s, &u, 9, 400).unwrap();
        assert_eq!(hp.x_tilde.shape(), (72, 392));
        assert_eq!(hp.x_prime_tilde.shape(), (72, 392));
        assert_eq!(hp.upsilon_tilde.shape(), (72, 392));
    }

    #[test]
    fn hankel_pair_mismatch() {
        let s = series(DMatrix::zeros(1, 5));
        let u = ControlSequence::new(DMatrix::zeros(1, 4)).unwrap();
        assert!(matches!(
            build_hankel_pair(&s, &u, 1, 3),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn controls_must_be_binary() {
        let err = ControlSequence::new(dmatrix![0.0, 2.0; 1.0, 0.5]).unwrap_err();
        let Error::Validation(v) = err else { panic!() };
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn non_finite_series_rejected() {
        assert!(TimeSeries::new(dmatrix![1.0, f64::INFINITY]).is_err());
    }

    fn matrix_strategy() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..5, 1usize..12).prop_flat_map(|(n, m)| {
            proptest::collection::vec(-100.0f64..100.0, n * m)
                .prop_map(move |v| DMatrix::from_vec(n, m, v))
        })
    }

    proptest! {
        #[test]
        fn hankel_shape_and_block_shift(m in matrix_strategy(), h_seed in 0usize..100) {
            let (n, cols) = m.shape();
            let h = 1 + h_seed % cols;
            let e = hankel_embed(&m, h).unwrap();
            prop_assert_eq!(e.shape(), (h * n, cols - h + 1));
            for b in 0..h {
                for j in 0..e.ncols() {
                    for i in 0..n {
                        prop_assert_eq!(e[(b * n + i, j)], m[(i, j + b)]);
                    }
                }
            }
            for b in 0..h.saturating_sub(1) {
                for j in 1..e.ncols() {
                    for i in 0..n {
                        prop_assert_eq!(e[(b * n + i, j)], e[((b + 1) * n + i, j - 1)]);
                    }
                }
            }
            if h == 1 {
                prop_assert_eq!(e, m);
            }
        }

        #[test]
        fn unit_depth_hankel_pair_matches_snapshot_pair(m in matrix_strategy(), w in 1usize..11) {
            let steps = m.ncols();
            prop_assume!(w < steps);
            let s = TimeSeries::new(m.clone()).unwrap();
            let u = ControlSequence::new(DMatrix::from_fn(2, steps, |i, j| ((i + j) % 2) as f64)).unwrap();
            let hp = build_hankel_pair(&s, &u, 1, w).unwrap();
            let sp = build_snapshot_pair(&s, 0, w).unwrap();
            prop_assert_eq!(hp.x_tilde, sp.x);
            prop_assert_eq!(hp.x_prime_tilde, sp.x_prime);
            prop_assert_eq!(hp.upsilon_tilde, u.values().columns(0, w).into_owned());
        }
    }
}
