//! RMSE/MAE for predictions and the GEH / correlation statistics used to
//! judge simulated volumes against observed ones.

use crate::error::{Error, Result};

/// A GEH below this value counts as a good fit.
pub const GEH_THRESHOLD: f64 = 4.0;
/// A correlation coefficient at or above this value counts as acceptable.
pub const CC_THRESHOLD: f64 = 0.85;

/// Observed values next to simulated or predicted ones.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    observed: Vec<f64>,
    predicted: Vec<f64>,
}

impl PairedSamples {
    pub fn new(observed: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        if observed.len() != predicted.len() {
            return Err(Error::Mismatch(format!(
                "{} observed vs {} predicted samples",
                observed.len(),
                predicted.len()
            )));
        }
        if observed.is_empty() {
            return Err(Error::Argument("no samples".into()));
        }
        if let Some(i) = observed
            .iter()
            .chain(predicted.iter())
            .position(|x| !x.is_finite())
        {
            let (which, idx) = if i < observed.len() {
                ("observed", i)
            } else {
                ("predicted", i - observed.len())
            };
            return Err(Error::Argument(format!("{which}[{idx}] is not finite")));
        }
        Ok(Self {
            observed,
            predicted,
        })
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseMae {
    pub rmse: f64,
    pub mae: f64,
}

const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn rmse_mae(samples: &PairedSamples) -> RmseMae {
    let n = samples.len() as f64;
    let diffs: Vec<f64> = samples
        .observed
        .iter()
        .zip(&samples.predicted)
        .map(|(o, p)| o - p)
        .collect();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let sq: Vec<f64> = diffs.iter().map(|d| d * d).collect();
    let mae = pairwise_sum(&abs) / n;
    let rmse = (pairwise_sum(&sq) / n).sqrt();
    // rounding can put rmse a few ulps under mae on constant-magnitude errors
    RmseMae {
        rmse: rmse.max(mae),
        mae,
    }
}

pub fn geh(v_obs: f64, v_sim: f64) -> Result<f64> {
    if !(v_obs.is_finite() && v_sim.is_finite()) || v_obs < 0.0 || v_sim < 0.0 {
        return Err(Error::Argument(format!(
            "volumes must be finite and nonnegative, got {v_obs} and {v_sim}"
        )));
    }
    let total = v_obs + v_sim;
    if total == 0.0 {
        return Err(Error::UndefinedGeh);
    }
    let d = v_obs - v_sim;
    Ok((2.0 * d * d / total).sqrt())
}

pub fn pearson_cc(samples: &PairedSamples) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::Argument(
            "correlation needs at least two samples".into(),
        ));
    }
    let n = samples.len() as f64;
    let mean_o = pairwise_sum(&samples.observed) / n;
    let mean_p = pairwise_sum(&samples.predicted) / n;
    let dev_o: Vec<f64> = samples.observed.iter().map(|x| x - mean_o).collect();
    let dev_p: Vec<f64> = samples.predicted.iter().map(|x| x - mean_p).collect();
    let cross: Vec<f64> = dev_o.iter().zip(&dev_p).map(|(a, b)| a * b).collect();
    let ss_o: Vec<f64> = dev_o.iter().map(|a| a * a).collect();
    let ss_p: Vec<f64> = dev_p.iter().map(|b| b * b).collect();
    let var_o = pairwise_sum(&ss_o);
    let var_p = pairwise_sum(&ss_p);
    if var_o == 0.0 {
        return Err(Error::ZeroVariance("observed"));
    }
    if var_p == 0.0 {
        return Err(Error::ZeroVariance("predicted"));
    }
    let r = pairwise_sum(&cross) / (var_o.sqrt() * var_p.sqrt());
    Ok(r.clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(o: &[f64], p: &[f64]) -> PairedSamples {
        PairedSamples::new(o.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn rmse_mae_examples() {
        let r = rmse_mae(&ps(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]));
        assert_eq!((r.rmse, r.mae), (0.0, 0.0));
        let r = rmse_mae(&ps(&[0.0, 0.0], &[3.0, 4.0]));
        assert!((r.rmse - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((r.rmse - 3.535534).abs() < 1e-6);
        assert_eq!(r.mae, 3.5);
    }

    #[test]
    fn samples_validation() {
        assert!(matches!(
            PairedSamples::new(vec![], vec![]),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            PairedSamples::new(vec![1.0], vec![1.0, 2.0]),
            Err(Error::Mismatch(_))
        ));
        assert!(PairedSamples::new(vec![1.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn geh_examples() {
        assert_eq!(geh(100.0, 100.0).unwrap(), 0.0);
        let g = geh(100.0, 80.0).unwrap();
        assert!((g - (800.0f64 / 180.0).sqrt()).abs() < 1e-15);
        assert!((g - 2.108185).abs() < 1e-6);
        assert_eq!(geh(80.0, 100.0).unwrap(), g);
        assert!(matches!(geh(0.0, 0.0), Err(Error::UndefinedGeh)));
        assert!(geh(-1.0, 3.0).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson_cc(&ps(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_cc(&ps(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])).unwrap() + 1.0).abs() < 1e-15);
        // deviations (−1,0,1) and (−4/3,−1/3,5/3): cross 3, sums of squares 2 and 42/9
        let expected = 3.0 / (2.0f64 * 42.0 / 9.0).sqrt();
        let r = pearson_cc(&ps(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0])).unwrap();
        assert!((r - expected).abs() < 1e-15);
        assert!((r - 0.981981).abs() < 1e-6);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson_cc(&ps(&[1.0, 1.0], &[1.0, 2.0])),
            Err(Error::ZeroVariance("observed"))
        ));
        assert!(matches!(
            pearson_cc(&ps(&[1.0], &[1.0])),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn pairwise_matches_exact_sums() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..64).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1e3f64..1e3, n),
                proptest::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae_and_is_symmetric((o, p) in paired()) {
            let fwd = rmse_mae(&ps(&o, &p));
            let rev = rmse_mae(&ps(&p, &o));
            prop_assert!(fwd.rmse >= fwd.mae && fwd.mae >= 0.0);
            prop_assert_eq!(fwd, rev);
        }

        #[test]
        fn geh_symmetry_and_scaling(a in 0.0f64..1e4, b in 0.0f64..1e4, k in 0.01f64..100.0) {
            prop_assume!(a + b > 0.0);
            prop_assert_eq!(geh(a, b).unwrap(), geh(b, a).unwrap());
            prop_assert_eq!(geh(a, a).unwrap(), 0.0);
            let scaled = geh(k * a, k * b).unwrap();
            let expected = k.sqrt() * geh(a, b).unwrap();
            prop_assert!((scaled - expected).abs() <= 1e-12 * expected.max(1.0));
        }

        #[test]
        fn pearson_affine_invariance((o, p) in paired(), scale in 0.1f64..10.0, shift in -50.0f64..50.0) {
            let s = ps(&o, &p);
            let Ok(r) = pearson_cc(&s) else { return Ok(()) };
            let moved: Vec<f64> = p.iter().map(|x| scale * x + shift).collect();
            let r2 = pearson_cc(&ps(&o, &moved)).unwrap();
            prop_assert!((r - r2).abs() <= 1e-12);
            let neg: Vec<f64> = p.iter().map(|x| -x).collect();
            let r3 = pearson_cc(&ps(&o, &neg)).unwrap();
            prop_assert!((r + r3).abs() <= 1e-12);
        }
    }
}
