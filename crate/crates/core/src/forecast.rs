//! Rate forecasts from a principal-component decomposition: ARIMA score
//! forecasts, transformed-scale points and variances, normal prediction
//! intervals and the inverse Box-Cox back to rates.
//!
//! The back-transformed point forecast is the median of the forecast
//! distribution on the rate scale, not its mean.

use nalgebra::DMatrix;

use crate::arima::{self, ArimaFit};
use crate::data::AgeRateSurface;
use crate::decomposition::{ComponentRule, PcaDecomposition};
use crate::error::{Error, Result};
use crate::normal::normal_quantile;
use crate::transform::{inv_box_cox, transform_surface, BoxCoxLambda};

/// Rate assigned to back-transformed values whose inverse Box-Cox is
/// undefined (`lambda * z + 1 <= 0`).
pub const RATE_CLAMP: f64 = 1e-10;

/// Per-component ARIMA forecasts of the score series.
#[derive(Debug, Clone)]
pub struct ScoreForecast {
    /// `H x K` conditional means.
    pub points: DMatrix<f64>,
    /// `H x K` forecast-error variances.
    pub variances: DMatrix<f64>,
    pub models: Vec<ArimaFit>,
}

impl ScoreForecast {
    pub fn horizon(&self) -> usize {
        self.points.nrows()
    }
}

pub fn forecast_scores(decomposition: &PcaDecomposition, horizon: usize) -> Result<ScoreForecast> {
    if horizon < 1 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    let k = decomposition.k();
    let mut points = DMatrix::zeros(horizon, k);
    let mut variances = DMatrix::zeros(horizon, k);
    let mut models = Vec::with_capacity(k);
    for c in 0..k {
        let series = decomposition.score_series(c);
        let model = arima::auto_select(&series)?;
        let (pt, var) = model.forecast(&series, horizon)?;
        for h in 0..horizon {
            points[(h, c)] = pt[h];
            variances[(h, c)] = var[h];
        }
        models.push(model);
    }
    Ok(ScoreForecast {
        points,
        variances,
        models,
    })
}

fn check_dims(decomposition: &PcaDecomposition, scores: &ScoreForecast) -> Result<()> {
    if scores.points.ncols() != decomposition.k() || scores.variances.shape() != scores.points.shape() {
        return Err(Error::invalid(format!(
            "score forecast has {} components, decomposition has {}",
            scores.points.ncols(),
            decomposition.k()
        )));
    }
    Ok(())
}

/// `z[h, i] = mean[i] + sum_k beta[h, k] phi[i, k]`, one row per horizon.
pub fn point_forecast(decomposition: &PcaDecomposition, scores: &ScoreForecast) -> Result<DMatrix<f64>> {
    check_dims(decomposition, scores)?;
    let mut z = &scores.points * decomposition.components.transpose();
    for mut row in z.row_iter_mut() {
        row += decomposition.mean.transpose();
    }
    Ok(z)
}

/// `var[h, i] = sum_k u[h, k] phi[i, k]^2 + v[i]`, with the residual
/// variance `v` constant across horizons.
pub fn total_variance(decomposition: &PcaDecomposition, scores: &ScoreForecast) -> Result<DMatrix<f64>> {
    check_dims(decomposition, scores)?;
    let phi_sq = decomposition.components.map(|v| v * v);
    let mut var = &scores.variances * phi_sq.transpose();
    for mut row in var.row_iter_mut() {
        row += decomposition.residual_variance.transpose();
    }
    Ok(var)
}

/// Central `(1 - alpha)` normal interval `z -/+ Phi^{-1}(1 - alpha/2) sqrt(var)`.
pub fn prediction_interval(
    z_point: &DMatrix<f64>,
    z_var: &DMatrix<f64>,
    alpha: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if z_point.shape() != z_var.shape() {
        return Err(Error::invalid("point and variance matrices differ in shape"));
    }
    if z_var.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("forecast variances must be nonnegative"));
    }
    let mult = normal_quantile(1.0 - alpha / 2.0);
    let half = z_var.map(|v| mult * v.sqrt());
    Ok((z_point - &half, z_point + &half))
}

/// Rate-scale values produced by [`back_transform`].
#[derive(Debug, Clone)]
pub struct BackTransformed {
    pub point: DMatrix<f64>,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
    /// Cells where at least one of the three values was clamped to
    /// [`RATE_CLAMP`].
    pub clamped: DMatrix<bool>,
}

pub fn back_transform(
    z_point: &DMatrix<f64>,
    z_lower: &DMatrix<f64>,
    z_upper: &DMatrix<f64>,
    lambda: BoxCoxLambda,
) -> Result<BackTransformed> {
    if z_point.shape() != z_lower.shape() || z_point.shape() != z_upper.shape() {
        return Err(Error::invalid("interval matrices differ in shape"));
    }
    let (h, p) = z_point.shape();
    let mut clamped = DMatrix::from_element(h, p, false);
    let mut invert = |z: &DMatrix<f64>| -> DMatrix<f64> {
        DMatrix::from_fn(h, p, |r, c| match inv_box_cox(z[(r, c)], lambda) {
            Ok(v) => v,
            Err(_) => {
                clamped[(r, c)] = true;
                RATE_CLAMP
            }
        })
    };
    let point = invert(z_point);
    let lower = invert(z_lower);
    let upper = invert(z_upper);
    Ok(BackTransformed {
        point,
        lower,
        upper,
        clamped,
    })
}

/// Forecast of a rate surface for horizons `1..=H`, on both scales.
#[derive(Debug, Clone)]
pub struct RateForecast {
    /// Calendar year of horizon 1.
    pub first_year: i32,
    pub first_age: i32,
    pub lambda: BoxCoxLambda,
    pub alpha: f64,
    pub z_point: DMatrix<f64>,
    pub z_variance: DMatrix<f64>,
    pub z_lower: DMatrix<f64>,
    pub z_upper: DMatrix<f64>,
    pub rate_point: DMatrix<f64>,
    pub rate_lower: DMatrix<f64>,
    pub rate_upper: DMatrix<f64>,
    pub clamped: DMatrix<bool>,
}

impl RateForecast {
    pub fn horizon(&self) -> usize {
        self.z_point.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.z_point.ncols()
    }
}

/// Every intermediate of one fit-and-forecast run.
#[derive(Debug, Clone)]
pub struct ForecastRun {
    pub decomposition: PcaDecomposition,
    pub scores: ScoreForecast,
    pub rates: RateForecast,
}

#[derive(Debug, Clone, Copy)]
pub struct ForecastOptions {
    pub lambda: BoxCoxLambda,
    pub horizon: usize,
    pub alpha: f64,
    pub components: ComponentRule,
}

/// Transform, decompose, forecast the scores and back-transform, using every
/// year of `surface` for estimation.
pub fn forecast_surface(surface: &AgeRateSurface, options: &ForecastOptions) -> Result<ForecastRun> {
    let z = transform_surface(surface, options.lambda)?;
    let decomposition = PcaDecomposition::fit(&z, options.components)?;
    let scores = forecast_scores(&decomposition, options.horizon)?;
    let z_point = point_forecast(&decomposition, &scores)?;
    let z_variance = total_variance(&decomposition, &scores)?;
    let (z_lower, z_upper) = prediction_interval(&z_point, &z_variance, options.alpha)?;
    let back = back_transform(&z_point, &z_lower, &z_upper, options.lambda)?;
    let rates = RateForecast {
        first_year: surface.last_year() + 1,
        first_age: surface.first_age(),
        lambda: options.lambda,
        alpha: options.alpha,
        z_point,
        z_variance,
        z_lower,
        z_upper,
        rate_point: back.point,
        rate_lower: back.lower,
        rate_upper: back.upper,
        clamped: back.clamped,
    };
    Ok(ForecastRun {
        decomposition,
        scores,
        rates,
    })
}
