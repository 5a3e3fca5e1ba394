//! Iterative projection: `w = V^{-1} e_1` through a Hermitian factorization,
//! followed by first-element normalization.
//!
//! Two routes to `V^{-1} e_1` share one factorization (Cholesky, falling
//! back to LDL^H): [`IpMethod::Inverse`] forms the whole inverse and reads
//! its first column, [`IpMethod::Solve`] back-substitutes `e_1` only.

use num_complex::Complex64;

use crate::config::IpMethod;
use crate::error::{AecError, Result};
use crate::model::{ExtractionFilter, WeightedCovariance};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative jitter `delta` added as `delta * trace(V) / n * I` before the retry.
pub const JITTER: f64 = 1e-10;

/// Pivots smaller than this fraction of the original diagonal entry count as breakdown.
const PIVOT_RTOL: f64 = 1e-13;

/// Scratch space for repeated solves of one size.
#[derive(Debug, Clone)]
pub struct IpWorkspace {
    n: usize,
    factor: Vec<Complex64>,
    diag: Vec<f64>,
    z: Vec<Complex64>,
    column: Vec<Complex64>,
    inverse: Vec<Complex64>,
    method: IpMethod,
}

impl IpWorkspace {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            factor: vec![ZERO; n * n],
            diag: vec![0.0; n],
            z: vec![ZERO; n],
            column: vec![ZERO; n],
            inverse: vec![ZERO; n * n],
            method: IpMethod::default(),
        }
    }

    pub fn with_method(n: usize, method: IpMethod) -> Self {
        Self { method, ..Self::new(n) }
    }

    pub fn method(&self) -> IpMethod {
        self.method
    }

    /// Full inverse from the last successful [`IpMethod::Inverse`] solve, row-major.
    pub fn last_inverse(&self) -> &[Complex64] {
        &self.inverse
    }

    /// Cholesky `V = L L^H`; lower triangle of `factor` holds `L`.
    fn cholesky(&mut self, v: &WeightedCovariance, shift: f64) -> bool {
        let n = self.n;
        let l = &mut self.factor;
        for j in 0..n {
            let vjj = v.get(j, j).re + shift;
            let mut d = vjj;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > PIVOT_RTOL * vjj.abs()) || !d.is_finite() {
                return false;
            }
            let ljj = d.sqrt();
            l[j * n + j] = Complex64::new(ljj, 0.0);
            let inv = 1.0 / ljj;
            for i in j + 1..n {
                let mut s = v.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s * inv;
            }
        }
        true
    }

    /// Solves `L L^H x = e_unit`.
    fn cholesky_solve_unit(&mut self, unit: usize, out: &mut [Complex64]) {
        let n = self.n;
        let l = &self.factor;
        let z = &mut self.z;
        // L z = e_unit; entries above `unit` are zero
        z[..unit].fill(ZERO);
        for i in unit..n {
            let mut s = if i == unit { Complex64::new(1.0, 0.0) } else { ZERO };
            for k in unit..i {
                s -= l[i * n + k] * z[k];
            }
            z[i] = s / l[i * n + i].re;
        }
        // L^H w = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= l[k * n + i].conj() * out[k];
            }
            out[i] = s / l[i * n + i].re;
        }
    }

    /// `V = L D L^H` with unit lower `L` and real `D`, no pivoting.
    fn ldl(&mut self, v: &WeightedCovariance, shift: f64) -> bool {
        let n = self.n;
        let l = &mut self.factor;
        let d = &mut self.diag;
        for j in 0..n {
            let vjj = v.get(j, j).re + shift;
            let mut dj = vjj;
            for k in 0..j {
                dj -= l[j * n + k].norm_sqr() * d[k];
            }
            if !(dj.abs() > PIVOT_RTOL * vjj.abs()) || !dj.is_finite() {
                return false;
            }
            d[j] = dj;
            l[j * n + j] = Complex64::new(1.0, 0.0);
            for i in j + 1..n {
                let mut s = v.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj() * d[k];
                }
                l[i * n + j] = s / dj;
            }
        }
        true
    }

    /// Solves `L D L^H x = e_unit`.
    fn ldl_solve_unit(&mut self, unit: usize, out: &mut [Complex64]) {
        let n = self.n;
        let l = &self.factor;
        let z = &mut self.z;
        z[..unit].fill(ZERO);
        for i in unit..n {
            let mut s = if i == unit { Complex64::new(1.0, 0.0) } else { ZERO };
            for k in unit..i {
                s -= l[i * n + k] * z[k];
            }
            z[i] = s;
        }
        for i in 0..n {
            z[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= l[k * n + i].conj() * out[k];
            }
            out[i] = s;
        }
    }

    fn try_solve(&mut self, v: &WeightedCovariance, shift: f64, out: &mut [Complex64]) -> bool {
        let cholesky = if self.cholesky(v, shift) {
            true
        } else if self.ldl(v, shift) {
            false
        } else {
            return false;
        };
        let solve = |ws: &mut Self, unit: usize, dst: &mut [Complex64]| {
            if cholesky {
                ws.cholesky_solve_unit(unit, dst)
            } else {
                ws.ldl_solve_unit(unit, dst)
            }
        };
        match self.method {
            IpMethod::Solve => solve(self, 0, out),
            IpMethod::Inverse => {
                let n = self.n;
                let mut column = std::mem::take(&mut self.column);
                for k in 0..n {
                    solve(self, k, &mut column);
                    for (r, x) in column.iter().enumerate() {
                        self.inverse[r * n + k] = *x;
                    }
                }
                self.column = column;
                for (r, x) in out.iter_mut().enumerate() {
                    *x = self.inverse[r * n];
                }
            }
        }
        out.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Solves `V w = e_1` into `out` without regularization.
    pub fn solve_e1(&mut self, v: &WeightedCovariance, out: &mut [Complex64]) -> Result<()> {
        self.check(v, out)?;
        if self.try_solve(v, 0.0, out) {
            Ok(())
        } else {
            Err(AecError::Solver {
                reason: "Cholesky and LDL^H both broke down".into(),
                size: self.n,
            })
        }
    }

    /// Solves `V w = e_1`, retrying once with diagonal jitter on breakdown.
    pub fn solve_e1_regularized(&mut self, v: &WeightedCovariance, out: &mut [Complex64]) -> Result<()> {
        self.check(v, out)?;
        if self.try_solve(v, 0.0, out) {
            return Ok(());
        }
        let jitter = JITTER * v.trace() / self.n as f64;
        if jitter > 0.0 && self.try_solve(v, jitter, out) {
            return Ok(());
        }
        Err(AecError::Solver {
            reason: format!("singular after jitter {jitter:e}"),
            size: self.n,
        })
    }

    fn check(&self, v: &WeightedCovariance, out: &[Complex64]) -> Result<()> {
        if v.dim() != self.n || out.len() != self.n {
            return Err(AecError::Structural(format!(
                "workspace size {} vs matrix {} and output {}",
                self.n,
                v.dim(),
                out.len()
            )));
        }
        Ok(())
    }
}

/// Unnormalized IP update `V^{-1} e_1` through the full inverse.
pub fn ip_update(v: &WeightedCovariance) -> Result<ExtractionFilter> {
    ip_update_with(v, IpMethod::Inverse)
}

pub fn ip_update_with(v: &WeightedCovariance, method: IpMethod) -> Result<ExtractionFilter> {
    let mut ws = IpWorkspace::with_method(v.dim(), method);
    let mut out = vec![ZERO; v.dim()];
    ws.solve_e1_regularized(v, &mut out)?;
    Ok(ExtractionFilter(out))
}

/// Divides by the first element in place so that `w[0] == 1` exactly.
pub fn normalize_in_place(w: &mut [Complex64]) -> Result<()> {
    let peak = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let w0 = w[0];
    if !(w0.norm() > 1e-12 * peak) || !w0.re.is_finite() || !w0.im.is_finite() {
        return Err(AecError::DegenerateFilter { magnitude: w0.norm() });
    }
    let inv = w0.inv();
    for z in w.iter_mut().skip(1) {
        *z *= inv;
    }
    w[0] = Complex64::new(1.0, 0.0);
    Ok(())
}

pub fn normalize(w: &ExtractionFilter) -> Result<ExtractionFilter> {
    let mut out = w.clone();
    normalize_in_place(&mut out.0)?;
    Ok(out)
}
