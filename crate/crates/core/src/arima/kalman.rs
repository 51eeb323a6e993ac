//! Exact Gaussian likelihood of a zero-mean ARMA(p, q) series through the
//! Kalman filter on its state-space form
//!
//! ```text
//! state_t = T state_{t-1} + R e_t,   x_t = state_t[0],
//! ```
//!
//! with `T` carrying the AR coefficients in its first column and
//! `R = (1, theta_1, ..., theta_{r-1})`, `r = max(p, q + 1)`. All variances
//! are relative to the innovation variance.

use nalgebra::{DMatrix, DVector};

pub(crate) struct StateSpace {
    r: usize,
    phi: Vec<f64>,
    rvec: Vec<f64>,
}

impl StateSpace {
    pub(crate) fn new(phi: &[f64], theta: &[f64]) -> Self {
        let r = phi.len().max(theta.len() + 1);
        let mut ar = vec![0.0; r];
        ar[..phi.len()].copy_from_slice(phi);
        let mut rvec = vec![0.0; r];
        rvec[0] = 1.0;
        rvec[1..=theta.len()].copy_from_slice(theta);
        StateSpace { r, phi: ar, rvec }
    }

    pub(crate) fn dim(&self) -> usize {
        self.r
    }

    /// `T a`
    pub(crate) fn propagate_state(&self, a: &mut [f64]) {
        let a0 = a[0];
        for i in 0..self.r {
            let next = if i + 1 < self.r { a[i + 1] } else { 0.0 };
            a[i] = self.phi[i] * a0 + next;
        }
    }

    /// `P <- T P T' + R R'` (row-major, `scratch` has length r*r)
    fn propagate_cov(&self, p: &mut [f64], scratch: &mut [f64]) {
        let r = self.r;
        // scratch = T P
        for i in 0..r {
            for j in 0..r {
                let below = if i + 1 < r { p[(i + 1) * r + j] } else { 0.0 };
                scratch[i * r + j] = self.phi[i] * p[j] + below;
            }
        }
        // p = scratch T' + R R'
        for i in 0..r {
            for j in 0..r {
                let right = if j + 1 < r { scratch[i * r + j + 1] } else { 0.0 };
                p[i * r + j] = self.phi[j] * scratch[i * r] + right + self.rvec[i] * self.rvec[j];
            }
        }
    }

    /// Stationary state covariance, the solution of `P = T P T' + R R'`.
    pub(crate) fn stationary_covariance(&self) -> Option<Vec<f64>> {
        let r = self.r;
        if r == 1 {
            let denom = 1.0 - self.phi[0] * self.phi[0];
            return (denom > 0.0).then(|| vec![1.0 / denom]);
        }
        let t = |i: usize, k: usize| -> f64 {
            if k == 0 {
                self.phi[i]
            } else if k == i + 1 {
                1.0
            } else {
                0.0
            }
        };
        let m = r * r;
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for i in 0..r {
            for j in 0..r {
                let row = i * r + j;
                b[row] = self.rvec[i] * self.rvec[j];
                for k in 0..r {
                    let tik = t(i, k);
                    if tik == 0.0 {
                        continue;
                    }
                    for l in 0..r {
                        let tjl = t(j, l);
                        if tjl != 0.0 {
                            a[(row, k * r + l)] -= tik * tjl;
                        }
                    }
                }
            }
        }
        let sol = a.lu().solve(&b)?;
        if sol.iter().all(|v| v.is_finite()) && sol[0] > 0.0 {
            Some(sol.iter().copied().collect())
        } else {
            None
        }
    }
}

pub(crate) struct FilterOutput {
    /// `sum v_t^2 / F_t`
    pub ssq: f64,
    /// `sum ln F_t`
    pub sum_log_f: f64,
    pub n: usize,
    /// Filtered state after the last observation.
    pub state: Vec<f64>,
}

/// Runs the filter over the zero-mean series `x`. `None` when the model has
/// no stationary covariance.
pub(crate) fn filter(phi: &[f64], theta: &[f64], x: &[f64]) -> Option<FilterOutput> {
    let ss = StateSpace::new(phi, theta);
    let r = ss.dim();
    let mut p = ss.stationary_covariance()?;
    let mut a = vec![0.0; r];
    let mut scratch = vec![0.0; r * r];
    let mut gain = vec![0.0; r];
    let mut ssq = 0.0;
    let mut sum_log_f = 0.0;

    for (t, &obs) in x.iter().enumerate() {
        if t > 0 {
            ss.propagate_state(&mut a);
            ss.propagate_cov(&mut p, &mut scratch);
        }
        let f = p[0];
        if !(f > 0.0) || !f.is_finite() {
            return None;
        }
        let v = obs - a[0];
        ssq += v * v / f;
        sum_log_f += f.ln();
        for i in 0..r {
            gain[i] = p[i * r] / f;
            a[i] += gain[i] * v;
        }
        scratch[..r].copy_from_slice(&p[..r]);
        for i in 0..r {
            for j in 0..r {
                p[i * r + j] -= gain[i] * scratch[j];
            }
        }
    }
    Some(FilterOutput {
        ssq,
        sum_log_f,
        n: x.len(),
        state: a,
    })
}
