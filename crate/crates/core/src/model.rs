//! Source-prior weighting and the recursively weighted covariance shared by
//! both solvers.

use num_complex::Complex64;

use crate::error::{AecError, Result};
use crate::expansion::StackedObservation;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense Hermitian `n x n` matrix `V`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCovariance {
    n: usize,
    data: Vec<Complex64>,
}

impl WeightedCovariance {
    /// `scale * I`.
    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut data = vec![ZERO; n * n];
        for k in 0..n {
            data[k * n + k] = Complex64::new(scale, 0.0);
        }
        Self { n, data }
    }

    /// Wraps a row-major matrix. The caller is responsible for Hermitian symmetry.
    pub fn from_row_major(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(AecError::Structural(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.n..(row + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|k| self.get(k, k).re).sum()
    }

    /// Largest `|V - V^H|` entry.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n {
            for c in r..self.n {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Adds `delta` to every diagonal entry.
    pub fn add_diagonal(&mut self, delta: f64) {
        for k in 0..self.n {
            self.data[k * self.n + k].re += delta;
        }
    }

    /// `V x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Rank-1 recursion `V <- alpha V + (1 - alpha) phi y y^H`.
    ///
    /// Only the upper triangle is computed; the lower triangle is its
    /// conjugate mirror and the diagonal is kept real, so `V` stays exactly
    /// Hermitian over arbitrarily long runs.
    pub fn update(&mut self, y: &[Complex64], phi: f64, alpha: f64) -> Result<()> {
        if y.len() != self.n {
            return Err(AecError::Structural(format!(
                "observation length {} does not match covariance size {}",
                y.len(),
                self.n
            )));
        }
        if !phi.is_finite() || !alpha.is_finite() {
            return Err(AecError::Numeric(format!("non-finite weight {phi} or alpha {alpha}")));
        }
        let gain = (1.0 - alpha) * phi;
        let n = self.n;
        for r in 0..n {
            let yr = y[r] * gain;
            let d = &mut self.data[r * n + r];
            *d = Complex64::new(alpha * d.re + (yr * y[r].conj()).re, 0.0);
            for c in r + 1..n {
                let v = alpha * self.data[r * n + c] + yr * y[c].conj();
                self.data[r * n + c] = v;
                self.data[c * n + r] = v.conj();
            }
        }
        Ok(())
    }
}

/// Near-end extraction filter `w`, applied as `w^H y`.
///
/// After normalization `w[0] == 1`; the remaining entries are the conjugated
/// echo-cancelling coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionFilter(pub Vec<Complex64>);

impl ExtractionFilter {
    /// First unit vector, i.e. the first row of an identity demixing matrix.
    pub fn identity(n: usize) -> Self {
        let mut w = vec![ZERO; n];
        w[0] = Complex64::new(1.0, 0.0);
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// `w^H y`.
    #[inline]
    pub fn apply(&self, y: &[Complex64]) -> Complex64 {
        self.0.iter().zip(y).map(|(w, y)| w.conj() * y).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Weight `max(r, r_floor)^(beta - 2)` of the generalized Gaussian prior.
pub fn weight(r: f64, beta: f64, r_floor: f64) -> f64 {
    r.max(r_floor).powf(beta - 2.0)
}

/// `sqrt(sum_i |w_i^H y_i|^2)` over all bins, using each bin's previous filter.
pub fn aux_norm(filters: &[ExtractionFilter], observations: &[StackedObservation]) -> Result<f64> {
    if filters.len() != observations.len() {
        return Err(AecError::Structural(format!(
            "{} filters for {} observations",
            filters.len(),
            observations.len()
        )));
    }
    let mut acc = 0.0;
    for (i, (w, y)) in filters.iter().zip(observations).enumerate() {
        if w.len() != y.len() {
            return Err(AecError::Structural(format!(
                "bin {i}: filter length {} vs observation length {}",
                w.len(),
                y.len()
            )));
        }
        acc += w.apply(y.as_slice()).norm_sqr();
    }
    Ok(acc.sqrt())
}

pub fn update_covariance(
    v: &WeightedCovariance,
    y: &StackedObservation,
    phi: f64,
    alpha: f64,
) -> Result<WeightedCovariance> {
    let mut next = v.clone();
    next.update(y.as_slice(), phi, alpha)?;
    Ok(next)
}

/// `w^H V w` without validation. Real for Hermitian `V`.
#[inline]
pub fn quad_form(w: &[Complex64], v: &WeightedCovariance) -> f64 {
    let n = v.dim();
    let mut acc = 0.0;
    for r in 0..n {
        let vw: Complex64 = v.row(r).iter().zip(w).map(|(a, b)| a * b).sum();
        acc += (w[r].conj() * vw).re;
    }
    acc
}

/// Per-bin auxiliary value `w^H V w - 2 log|first|`.
///
/// With `first = None` the log-determinant term is dropped: for the
/// structured demixing matrix (unit first element, identity below) the
/// determinant is 1. Passing `Some(w0)` evaluates the EISS objective where
/// the determinant equals the running first element.
pub fn aux_value(w: &ExtractionFilter, v: &WeightedCovariance, first: Option<Complex64>) -> Result<f64> {
    if w.len() != v.dim() {
        return Err(AecError::Structural(format!(
            "filter length {} vs covariance size {}",
            w.len(),
            v.dim()
        )));
    }
    let scale = v.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if v.hermitian_defect() > 1e-9 * scale {
        return Err(AecError::Numeric("covariance is not Hermitian".into()));
    }
    let quad = quad_form(w.as_slice(), v);
    Ok(match first {
        Some(w0) => quad - 2.0 * w0.norm().ln(),
        None => quad,
    })
}
