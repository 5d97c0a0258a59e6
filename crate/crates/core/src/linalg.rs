//! Dense numerical primitives: thin SVD, rank truncation, Moore–Penrose
//! pseudoinverse and eigendecomposition of real square matrices.
//!
//! The factorizations themselves are delegated to `nalgebra`; this module
//! adds the contracts the identification code relies on: sorted singular
//! values, explicit rank policies, finite-input checks, and eigenvectors with
//! conjugate-pair closure.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, DVector, Schur, SVD};

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;

const SVD_MAX_ITERATIONS: usize = 10_000;
const SCHUR_MAX_ITERATIONS: usize = 10_000;
const INVERSE_ITERATION_STEPS: usize = 8;

/// How many singular triplets to keep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankSpec {
    /// Keep exactly this many leading triplets.
    Exact(usize),
    /// Keep the shortest prefix whose share of `Σσᵢ²` reaches the threshold.
    Energy(f64),
    /// Keep `σᵢ > ε·σ₁·max(rows, cols)`.
    #[default]
    Automatic,
}

impl fmt::Display for RankSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankSpec::Exact(r) => write!(f, "{r}"),
            RankSpec::Energy(t) => write!(f, "energy:{t}"),
            RankSpec::Automatic => f.write_str("auto"),
        }
    }
}

impl FromStr for RankSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") || s.eq_ignore_ascii_case("automatic") {
            return Ok(RankSpec::Automatic);
        }
        if let Some(t) = s.strip_prefix("energy:") {
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("bad energy threshold `{t}`")))?;
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Argument(format!(
                    "energy threshold must lie in (0, 1], got {t}"
                )));
            }
            return Ok(RankSpec::Energy(t));
        }
        let r = s.strip_prefix("exact:").unwrap_or(s);
        r.trim()
            .parse::<usize>()
            .map(RankSpec::Exact)
            .map_err(|_| Error::Argument(format!("bad rank spec `{s}`")))
    }
}

/// Thin SVD `M = U·diag(σ)·Vᵀ`, possibly truncated to `rank()` triplets.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Shape of the factored matrix.
    pub shape: (usize, usize),
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Eigenvalues sorted by nonincreasing magnitude, column `j` of `vectors`
/// paired with `values[j]`. Vectors have unit 2-norm.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: DVector<Complex64>,
    pub vectors: DMatrix<Complex64>,
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    for (col, column) in m.column_iter().enumerate() {
        if let Some(row) = column.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

pub fn svd(matrix: &DMatrix<f64>) -> Result<SvdFactors> {
    if matrix.is_empty() {
        return Err(Error::Argument("cannot factor an empty matrix".into()));
    }
    ensure_finite(matrix)?;
    let shape = matrix.shape();
    let mut f = SVD::try_new(
        matrix.clone(),
        true,
        true,
        f64::EPSILON,
        SVD_MAX_ITERATIONS,
    )
    .ok_or(Error::NoConvergence {
        routine: "svd",
        iterations: SVD_MAX_ITERATIONS,
    })?;
    f.sort_by_singular_values();
    Ok(SvdFactors {
        u: f.u.expect("u requested"),
        sigma: f.singular_values,
        v: f.v_t.expect("v requested").transpose(),
        shape,
    })
}

/// Number of triplets a rank policy keeps for the given singular values.
pub fn select_rank(sigma: &[f64], shape: (usize, usize), spec: RankSpec) -> Result<usize> {
    let available = sigma.len();
    let r = match spec {
        RankSpec::Exact(r) => {
            if r > available {
                return Err(Error::RankTooLarge {
                    requested: r,
                    available,
                });
            }
            r
        }
        RankSpec::Energy(threshold) => {
            let total: f64 = sigma.iter().map(|s| s * s).sum();
            if total == 0.0 {
                0
            } else {
                let mut acc = 0.0;
                let mut r = available;
                for (i, s) in sigma.iter().enumerate() {
                    acc += s * s;
                    if acc / total >= threshold {
                        r = i + 1;
                        break;
                    }
                }
                r
            }
        }
        RankSpec::Automatic => {
            let cutoff = match sigma.first() {
                Some(&s1) => f64::EPSILON * s1 * shape.0.max(shape.1) as f64,
                None => 0.0,
            };
            sigma.iter().take_while(|&&s| s > cutoff).count()
        }
    };
    if r == 0 {
        return Err(Error::DegenerateRank(format!(
            "rank policy `{spec}` retains no singular values"
        )));
    }
    Ok(r)
}

pub fn truncate(factors: &SvdFactors, spec: RankSpec) -> Result<SvdFactors> {
    let r = select_rank(factors.sigma.as_slice(), factors.shape, spec)?;
    Ok(SvdFactors {
        u: factors.u.columns(0, r).into_owned(),
        sigma: factors.sigma.rows(0, r).into_owned(),
        v: factors.v.columns(0, r).into_owned(),
        shape: factors.shape,
    })
}

/// `V·Σ⁻¹·Uᵀ` over the retained, strictly positive singular values. A matrix
/// with no retained singular values maps to the zero matrix.
pub fn pinv(matrix: &DMatrix<f64>, spec: RankSpec) -> Result<DMatrix<f64>> {
    let (n, m) = matrix.shape();
    let full = svd(matrix)?;
    let kept = match truncate(&full, spec) {
        Ok(f) => f,
        Err(Error::DegenerateRank(_)) => return Ok(DMatrix::zeros(m, n)),
        Err(e) => return Err(e),
    };
    let mut v_scaled = kept.v.clone();
    for (j, s) in kept.sigma.iter().enumerate() {
        let inv = if *s > 0.0 { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(j).scale_mut(inv);
    }
    Ok(v_scaled * kept.u.transpose())
}

fn magnitude_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.norm()
        .total_cmp(&a.norm())
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

pub fn eig(matrix: &DMatrix<f64>) -> Result<EigenPairs> {
    if !matrix.is_square() {
        return Err(Error::Argument(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.is_empty() {
        return Err(Error::Argument("cannot decompose an empty matrix".into()));
    }
    ensure_finite(matrix)?;

    let n = matrix.nrows();
    let schur = Schur::try_new(matrix.clone(), f64::EPSILON, SCHUR_MAX_ITERATIONS).ok_or(
        Error::NoConvergence {
            routine: "schur",
            iterations: SCHUR_MAX_ITERATIONS,
        },
    )?;
    let mut values: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(magnitude_order);

    let norm = matrix.norm();
    let scale = if norm > 0.0 { norm } else { 1.0 };
    let ac = matrix.map(|x| Complex64::new(x, 0.0));
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        let lambda = values[j];
        // second member of a conjugate pair reuses its partner's vector
        if lambda.im < 0.0 && j > 0 && values[j - 1] == lambda.conj() {
            let partner = vectors.column(j - 1).map(|z| z.conj());
            vectors.set_column(j, &partner);
            continue;
        }
        let v = inverse_iteration(&ac, lambda, scale, j)?;
        vectors.set_column(j, &v);
    }

    Ok(EigenPairs {
        values: DVector::from_vec(values),
        vectors,
    })
}

fn start_vector(n: usize, salt: usize) -> DVector<Complex64> {
    // deterministic, generic direction; avoids being orthogonal to the target
    let v = DVector::from_fn(n, |i, _| {
        let t = ((i + 1) as f64 * 0.618_033_988_749_895 + salt as f64 * 0.414_213_562_373_095)
            .fract();
        Complex64::new(1.0 + t, 0.5 * t)
    });
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

fn inverse_iteration(
    a: &DMatrix<Complex64>,
    lambda: Complex64,
    scale: f64,
    salt: usize,
) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let mut best: Option<(f64, DVector<Complex64>)> = None;
    for attempt in 0..6 {
        let delta = scale * 1e-12 * 10f64.powi(attempt);
        let shift = lambda + Complex64::new(delta, 0.0);
        let shifted = a - DMatrix::<Complex64>::identity(n, n) * shift;
        let lu = shifted.lu();
        let mut v = start_vector(n, salt + attempt as usize);
        for _ in 0..INVERSE_ITERATION_STEPS {
            let Some(w) = lu.solve(&v) else { break };
            let norm = w.norm();
            if !norm.is_finite() || norm == 0.0 {
                break;
            }
            v = w / Complex64::new(norm, 0.0);
            let residual = (a * &v - &v * lambda).norm();
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, v.clone()));
            }
            if residual <= 1e-13 * scale {
                return Ok(v);
            }
        }
        if let Some((r, _)) = &best {
            if *r <= 1e-10 * scale {
                break;
            }
        }
    }
    best.map(|(_, v)| v).ok_or(Error::NoConvergence {
        routine: "inverse iteration",
        iterations: INVERSE_ITERATION_STEPS,
    })
}
