//! Non-seasonal ARIMA(p, d, q) models for the component score series.
//!
//! The `d`-fold differenced series `w_t` follows
//!
//! ```text
//! (w_t - c) - sum phi_i (w_{t-i} - c) = e_t + sum theta_j e_{t-j}
//! ```
//!
//! where `c` is the drift (a constant mean when `d = 0`, a per-period trend
//! when `d = 1`) and is zero when the model has no drift term.

mod kalman;
pub mod kpss;
pub mod params;
mod select;

pub use kpss::{kpss_statistic, ndiffs};
pub use select::{auto_select, auto_select_with, SearchOptions};

use std::fmt;

use crate::error::{Error, Result};
use crate::optim::{bfgs, BfgsOptions};
use kalman::StateSpace;

pub const MAX_P: usize = 5;
pub const MAX_D: usize = 2;
pub const MAX_Q: usize = 5;

/// Innovation variances are floored here so that exact fits keep a finite
/// likelihood.
const SIGMA2_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArimaSpec {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub drift: bool,
}

impl ArimaSpec {
    pub fn new(p: usize, d: usize, q: usize, drift: bool) -> Result<Self> {
        if p > MAX_P || d > MAX_D || q > MAX_Q {
            return Err(Error::invalid(format!(
                "ARIMA({p},{d},{q}) is outside p <= {MAX_P}, d <= {MAX_D}, q <= {MAX_Q}"
            )));
        }
        if drift && d > 1 {
            return Err(Error::invalid("drift is only allowed with d <= 1"));
        }
        Ok(ArimaSpec { p, d, q, drift })
    }

    /// Estimated parameters, the innovation variance included.
    pub fn n_params(&self) -> usize {
        self.p + self.q + usize::from(self.drift) + 1
    }
}

impl fmt::Display for ArimaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARIMA({},{},{})", self.p, self.d, self.q)?;
        if self.drift {
            f.write_str(if self.d == 0 { " with mean" } else { " with drift" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit {
    pub spec: ArimaSpec,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Mean of the differenced series; 0 without drift.
    pub drift: f64,
    pub sigma2: f64,
    pub loglik: f64,
    pub aicc: f64,
    /// Length of the differenced series.
    pub n_effective: usize,
}

/// `d`-fold first differences.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::invalid(format!(
            "cannot difference {} values {d} times",
            series.len()
        )));
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

fn aicc(loglik: f64, m: usize, n: usize) -> f64 {
    let denom = n as f64 - m as f64 - 1.0;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    -2.0 * loglik + 2.0 * m as f64 * (n as f64 / denom)
}

fn gaussian_loglik(n: usize, sigma2: f64, sum_log_f: f64) -> f64 {
    -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) - 0.5 * sum_log_f
}

/// Unpacked optimiser coordinates.
struct Coefficients {
    ar: Vec<f64>,
    ma: Vec<f64>,
    drift: f64,
}

fn unpack(spec: &ArimaSpec, x: &[f64]) -> Coefficients {
    let (p, q) = (spec.p, spec.q);
    Coefficients {
        ar: params::ar_from_unconstrained(&x[..p]),
        ma: params::ma_from_unconstrained(&x[p..p + q]),
        drift: if spec.drift { x[p + q] } else { 0.0 },
    }
}

/// Conditional sum of squares objective, `0.5 ln(css / n_used)`.
fn css_objective(spec: &ArimaSpec, x: &[f64], w: &[f64]) -> f64 {
    let c = unpack(spec, x);
    let n = w.len();
    let start = spec.p;
    if n <= start {
        return f64::INFINITY;
    }
    let mut resid = vec![0.0; n];
    let mut ssq = 0.0;
    for t in start..n {
        let mut e = w[t] - c.drift;
        for (i, phi) in c.ar.iter().enumerate() {
            e -= phi * (w[t - i - 1] - c.drift);
        }
        for (j, theta) in c.ma.iter().enumerate() {
            if t >= j + 1 + start {
                e -= theta * resid[t - j - 1];
            }
        }
        resid[t] = e;
        ssq += e * e;
    }
    0.5 * (ssq / (n - start) as f64).ln()
}

/// Concentrated exact likelihood objective,
/// `0.5 (ln sigma2_hat + sum ln F_t / n)`.
fn ml_objective(spec: &ArimaSpec, x: &[f64], w: &[f64]) -> f64 {
    let c = unpack(spec, x);
    let centered: Vec<f64> = w.iter().map(|v| v - c.drift).collect();
    match kalman::filter(&c.ar, &c.ma, &centered) {
        Some(out) => {
            let n = out.n as f64;
            0.5 * ((out.ssq / n).ln() + out.sum_log_f / n)
        }
        None => f64::INFINITY,
    }
}

/// Exact Gaussian likelihood pieces for given coefficients:
/// `(sigma2_hat, loglik)`.
fn evaluate(ar: &[f64], ma: &[f64], drift: f64, w: &[f64]) -> Option<(f64, f64)> {
    let centered: Vec<f64> = w.iter().map(|v| v - drift).collect();
    let out = kalman::filter(ar, ma, &centered)?;
    let sigma2 = (out.ssq / out.n as f64).max(SIGMA2_FLOOR);
    Some((sigma2, gaussian_loglik(out.n, sigma2, out.sum_log_f)))
}

fn check_length(spec: &ArimaSpec, n_eff: usize) -> Result<()> {
    let needed = spec.p + spec.q + usize::from(spec.drift) + 5;
    if n_eff < needed {
        return Err(Error::invalid(format!(
            "{spec} needs at least {needed} differenced observations, got {n_eff}"
        )));
    }
    Ok(())
}

/// Maximum-likelihood fit of `spec` to `series`: conditional sum of squares
/// start values refined by the exact Gaussian likelihood.
pub fn fit(series: &[f64], spec: ArimaSpec) -> Result<ArimaFit> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let w = difference(series, spec.d)?;
    let n = w.len();
    check_length(&spec, n)?;
    let m = spec.n_params();

    if spec.p == 0 && spec.q == 0 {
        let drift = if spec.drift { w.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let sigma2 = (w.iter().map(|v| (v - drift).powi(2)).sum::<f64>() / n as f64).max(SIGMA2_FLOOR);
        let loglik = gaussian_loglik(n, sigma2, 0.0);
        return Ok(ArimaFit {
            spec,
            ar: vec![],
            ma: vec![],
            drift,
            sigma2,
            loglik,
            aicc: aicc(loglik, m, n),
            n_effective: n,
        });
    }

    // optimise on a unit-scale copy; ARMA coefficients are scale free
    let mean = w.iter().sum::<f64>() / n as f64;
    let scale = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(scale > 1e-12 * mean.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::numerical(format!("{spec}: differenced series is constant")));
    }
    let y: Vec<f64> = w.iter().map(|v| v / scale).collect();

    let mut x0 = vec![0.0; spec.p + spec.q + usize::from(spec.drift)];
    if spec.drift {
        x0[spec.p + spec.q] = mean / scale;
    }
    let options = BfgsOptions::default();
    let css = bfgs(|x| css_objective(&spec, x, &y), &x0, &options);
    let start = if css.value.is_finite() && ml_objective(&spec, &css.x, &y).is_finite() {
        css.x
    } else {
        x0
    };
    let ml = bfgs(|x| ml_objective(&spec, x, &y), &start, &options);
    if !ml.converged {
        return Err(Error::numerical(format!(
            "{spec}: likelihood optimisation did not converge in {} iterations",
            ml.iterations
        )));
    }
    if !ml.value.is_finite() {
        return Err(Error::numerical(format!("{spec}: likelihood is not finite")));
    }

    let coeffs = unpack(&spec, &ml.x);
    if !params::is_stationary(&coeffs.ar) {
        return Err(Error::numerical(format!("{spec}: fitted AR part is not stationary")));
    }
    if !params::is_invertible(&coeffs.ma) {
        return Err(Error::numerical(format!("{spec}: fitted MA part is not invertible")));
    }
    let drift = coeffs.drift * scale;
    let (sigma2, loglik) = evaluate(&coeffs.ar, &coeffs.ma, drift, &w)
        .ok_or_else(|| Error::numerical(format!("{spec}: likelihood evaluation failed")))?;
    let value = aicc(loglik, m, n);
    if !value.is_finite() {
        return Err(Error::numerical(format!("{spec}: AICc is not finite")));
    }
    Ok(ArimaFit {
        spec,
        ar: coeffs.ar,
        ma: coeffs.ma,
        drift,
        sigma2,
        loglik,
        aicc: value,
        n_effective: n,
    })
}

impl ArimaFit {
    /// A model with the given coefficients; innovation variance, likelihood
    /// and AICc are evaluated on `series`.
    pub fn with_coefficients(
        series: &[f64],
        spec: ArimaSpec,
        ar: Vec<f64>,
        ma: Vec<f64>,
        drift: f64,
    ) -> Result<Self> {
        if ar.len() != spec.p || ma.len() != spec.q {
            return Err(Error::invalid(format!(
                "{spec} needs {} AR and {} MA coefficients",
                spec.p, spec.q
            )));
        }
        if !params::is_stationary(&ar) || !params::is_invertible(&ma) {
            return Err(Error::invalid("coefficients are not stationary and invertible"));
        }
        let drift = if spec.drift { drift } else { 0.0 };
        let w = difference(series, spec.d)?;
        let n = w.len();
        let (sigma2, loglik) = evaluate(&ar, &ma, drift, &w)
            .ok_or_else(|| Error::numerical("likelihood evaluation failed"))?;
        Ok(ArimaFit {
            spec,
            ar,
            ma,
            drift,
            sigma2,
            loglik,
            aicc: aicc(loglik, spec.n_params(), n),
            n_effective: n,
        })
    }

    /// MA(infinity) weights `psi_0 .. psi_{h-1}` of the integrated model
    /// `phi(B) (1 - B)^d y_t = theta(B) e_t`.
    pub fn psi_weights(&self, h: usize) -> Vec<f64> {
        // phi*(B) = phi(B) (1 - B)^d as coefficients of 1 - sum a_i B^i
        let mut poly = vec![1.0];
        poly.extend(self.ar.iter().map(|v| -v));
        for _ in 0..self.spec.d {
            let mut next = vec![0.0; poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c;
            }
            poly = next;
        }
        let a: Vec<f64> = poly[1..].iter().map(|c| -c).collect();
        let mut psi = vec![0.0; h];
        for j in 0..h {
            let mut v = if j == 0 {
                1.0
            } else if j <= self.ma.len() {
                self.ma[j - 1]
            } else {
                0.0
            };
            for (i, ai) in a.iter().enumerate() {
                if j > i {
                    v += ai * psi[j - i - 1];
                }
            }
            psi[j] = v;
        }
        psi
    }

    /// Point forecasts (conditional means) and forecast-error variances for
    /// horizons `1..=horizon` beyond the end of `series`.
    pub fn forecast(&self, series: &[f64], horizon: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if horizon < 1 {
            return Err(Error::invalid("forecast horizon must be at least 1"));
        }
        let d = self.spec.d;
        let w = difference(series, d)?;
        let centered: Vec<f64> = w.iter().map(|v| v - self.drift).collect();
        let out = kalman::filter(&self.ar, &self.ma, &centered)
            .ok_or_else(|| Error::numerical("forecast filter failed"))?;
        let ss = StateSpace::new(&self.ar, &self.ma);
        let mut state = out.state;
        let mut diff_fc = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            ss.propagate_state(&mut state);
            diff_fc.push(self.drift + state[0]);
        }

        // undo differencing level by level
        let levels = (0..d).map(|k| difference(series, k)).collect::<Result<Vec<_>>>()?;
        let mut fc = diff_fc;
        for level in levels.iter().rev() {
            let mut last = *level.last().expect("nonempty");
            fc = fc
                .iter()
                .map(|inc| {
                    last += inc;
                    last
                })
                .collect();
        }

        let psi = self.psi_weights(horizon);
        let mut acc = 0.0;
        let var = psi
            .iter()
            .map(|p| {
                acc += p * p;
                self.sigma2 * acc
            })
            .collect();
        Ok((fc, var))
    }
}
