//! Element-wise iterative source steering (EISS).
//!
//! One sweep visits every coordinate of the extraction filter once, each
//! time minimizing the per-bin auxiliary function in closed form:
//!
//! * index 0 (the scaling step): `u = 1 - (w^H V w)^{-1/2}`, then
//!   `w[0] <- w[0] - u` and `w[m] <- (1 - u) w[m]` for `m >= 1`;
//! * index `k >= 1`: `u = (V w)_k / V[k][k]`, then `w[k] <- w[k] - u`.
//!
//! The filter is stored as the column `w` and applied as `w^H y`, so the
//! coefficient acting on `w[k]` is the complex conjugate of the row-form
//! coefficient `w^H v_k / V[k][k]`. The step only touches one entry, so a
//! whole sweep costs `O(n^2)` and never solves a linear system.

use num_complex::Complex64;

use crate::error::{AecError, Result};
use crate::model::{quad_form, ExtractionFilter, WeightedCovariance};
use crate::solver_ip::normalize_in_place;

/// How coefficients within one sweep see the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Each coefficient is computed from the running, partially updated filter.
    #[default]
    Sequential,
    /// Every coefficient is computed from the start-of-frame filter and all
    /// updates are applied afterwards. Kept for A/B comparison only.
    Frozen,
}

/// `(V w)_k`, one row of the matrix-vector product.
#[inline]
fn row_dot(v: &WeightedCovariance, w: &[Complex64], k: usize) -> Complex64 {
    v.row(k).iter().zip(w).map(|(a, b)| a * b).sum()
}

fn check(w: &[Complex64], v: &WeightedCovariance, index: usize) -> Result<()> {
    if w.len() != v.dim() {
        return Err(AecError::Structural(format!(
            "filter length {} vs covariance size {}",
            w.len(),
            v.dim()
        )));
    }
    if index >= w.len() {
        return Err(AecError::Structural(format!(
            "coordinate {index} out of range for length {}",
            w.len()
        )));
    }
    Ok(())
}

/// Closed-form coefficient for coordinate `index` (0-based; 0 is the
/// scaling step) given the current filter state.
pub fn eiss_coeff(w: &ExtractionFilter, v: &WeightedCovariance, index: usize) -> Result<Complex64> {
    check(w.as_slice(), v, index)?;
    coeff_unchecked(w.as_slice(), v, index)
}

#[inline]
fn coeff_unchecked(w: &[Complex64], v: &WeightedCovariance, index: usize) -> Result<Complex64> {
    if index == 0 {
        let q = quad_form(w, v);
        if !(q > 0.0) || !q.is_finite() {
            return Err(AecError::Numeric(format!("quadratic form w^H V w = {q:e}")));
        }
        Ok(Complex64::new(1.0 - q.sqrt().recip(), 0.0))
    } else {
        let d = v.get(index, index).re;
        if !(d > 0.0) || !d.is_finite() {
            return Err(AecError::Numeric(format!("diagonal entry {index} = {d:e}")));
        }
        Ok(row_dot(v, w, index) / d)
    }
}

/// Applies coefficient `u` to coordinate `index` (0-based).
pub fn eiss_apply(w: &ExtractionFilter, u: Complex64, index: usize) -> Result<ExtractionFilter> {
    if index >= w.len() {
        return Err(AecError::Structural(format!(
            "coordinate {index} out of range for length {}",
            w.len()
        )));
    }
    let mut out = w.clone();
    apply_unchecked(&mut out.0, u, index);
    Ok(out)
}

#[inline]
fn apply_unchecked(w: &mut [Complex64], u: Complex64, index: usize) {
    if index == 0 {
        w[0] -= u;
        let keep = Complex64::new(1.0, 0.0) - u;
        for z in &mut w[1..] {
            *z *= keep;
        }
    } else {
        w[index] -= u;
    }
}

/// One sweep over all coordinates, in place, without normalization.
///
/// Coordinates whose coefficient is numerically undefined (zero diagonal or
/// zero quadratic form) are skipped. Returns how many were skipped.
pub fn sweep_in_place(w: &mut [Complex64], v: &WeightedCovariance, mode: SweepMode) -> usize {
    let n = w.len();
    let mut skipped = 0;
    match mode {
        SweepMode::Sequential => {
            for k in 0..n {
                match coeff_unchecked(w, v, k) {
                    Ok(u) => apply_unchecked(w, u, k),
                    Err(_) => skipped += 1,
                }
            }
        }
        SweepMode::Frozen => {
            let coeffs: Vec<Option<Complex64>> = (0..n).map(|k| coeff_unchecked(w, v, k).ok()).collect();
            for (k, u) in coeffs.into_iter().enumerate() {
                match u {
                    Some(u) => apply_unchecked(w, u, k),
                    None => skipped += 1,
                }
            }
        }
    }
    skipped
}

/// Runs `sweeps` rounds of (sweep, normalize `w[0]` to one).
///
/// The scaling step assumes `w[0] == 1` on entry, so every sweep starts from
/// a normalized filter. If normalization degenerates, `w` is restored to its
/// input value and the error returned.
pub fn update_in_place(
    w: &mut [Complex64],
    v: &WeightedCovariance,
    sweeps: usize,
    mode: SweepMode,
    backup: &mut Vec<Complex64>,
) -> Result<()> {
    backup.clear();
    backup.extend_from_slice(w);
    let mut outcome = Ok(());
    for _ in 0..sweeps {
        sweep_in_place(w, v, mode);
        let finite = w.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        outcome = if finite {
            normalize_in_place(w)
        } else {
            Err(AecError::Numeric("non-finite filter after sweep".into()))
        };
        if outcome.is_err() {
            break;
        }
    }
    if outcome.is_err() {
        w.copy_from_slice(backup);
    }
    outcome
}

/// One full sequential sweep followed by first-element normalization.
///
/// On a degenerate first element the previous filter is returned unchanged.
pub fn eiss_update(w: &ExtractionFilter, v: &WeightedCovariance) -> Result<ExtractionFilter> {
    eiss_update_with(w, v, 1, SweepMode::Sequential)
}

pub fn eiss_update_with(
    w: &ExtractionFilter,
    v: &WeightedCovariance,
    sweeps: usize,
    mode: SweepMode,
) -> Result<ExtractionFilter> {
    check(w.as_slice(), v, 0)?;
    let mut out = w.clone();
    let mut backup = Vec::with_capacity(w.len());
    // degenerate normalization already restored `out`
    let _ = update_in_place(&mut out.0, v, sweeps, mode, &mut backup);
    Ok(out)
}
