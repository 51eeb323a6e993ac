//! Forecast accuracy on a held-out span: mean absolute forecast error,
//! interval score, and the rolling-origin (expanding window) harness that
//! pools both by horizon.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::AgeRateSurface;
use crate::decomposition::ComponentRule;
use crate::error::{Error, Result};
use crate::forecast::{forecast_surface, ForecastOptions};
use crate::transform::BoxCoxLambda;

/// Mean of `|actual - predicted|` over all cells.
pub fn mafe(actual: &DMatrix<f64>, predicted: &DMatrix<f64>) -> Result<f64> {
    if actual.shape() != predicted.shape() {
        return Err(Error::invalid("actual and predicted matrices differ in shape"));
    }
    if actual.is_empty() {
        return Err(Error::invalid("no cells to evaluate"));
    }
    Ok(actual.iter().zip(predicted.iter()).map(|(a, p)| (a - p).abs()).sum::<f64>() / actual.len() as f64)
}

/// Interval score of the central `(1 - alpha)` interval `[lower, upper]` for
/// the realised value `observed`:
/// `(u - l) + (2 / alpha) [(l - x) 1{x < l} + (x - u) 1{x > u}]`.
pub fn interval_score(lower: f64, upper: f64, observed: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if lower > upper {
        return Err(Error::invalid(format!("interval lower bound {lower} exceeds upper bound {upper}")));
    }
    let mut score = upper - lower;
    if observed < lower {
        score += 2.0 / alpha * (lower - observed);
    } else if observed > upper {
        score += 2.0 / alpha * (observed - upper);
    }
    Ok(score)
}

/// Mean interval score over all cells.
pub fn averaged_interval_score(
    lower: &DMatrix<f64>,
    upper: &DMatrix<f64>,
    actual: &DMatrix<f64>,
    alpha: f64,
) -> Result<f64> {
    if lower.shape() != actual.shape() || upper.shape() != actual.shape() {
        return Err(Error::invalid("bound and actual matrices differ in shape"));
    }
    if actual.is_empty() {
        return Err(Error::invalid("no cells to evaluate"));
    }
    let mut total = 0.0;
    for ((l, u), x) in lower.iter().zip(upper.iter()).zip(actual.iter()) {
        total += interval_score(*l, *u, *x, alpha)?;
    }
    Ok(total / actual.len() as f64)
}

/// Median with the mid-mean convention for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonRow {
    pub h: usize,
    pub mafe: f64,
    pub interval_score: f64,
    /// Forecast origins pooled at this horizon.
    pub n_forecasts: usize,
}

/// Per-horizon accuracy with mean and median summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonErrorTable {
    pub rows: Vec<HorizonRow>,
}

impl HorizonErrorTable {
    pub fn mafe_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mafe).collect()
    }

    pub fn interval_score_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.interval_score).collect()
    }

    pub fn mean_mafe(&self) -> f64 {
        mean(&self.mafe_column()).unwrap_or(f64::NAN)
    }

    pub fn median_mafe(&self) -> f64 {
        median(&self.mafe_column()).unwrap_or(f64::NAN)
    }

    pub fn mean_interval_score(&self) -> f64 {
        mean(&self.interval_score_column()).unwrap_or(f64::NAN)
    }

    pub fn median_interval_score(&self) -> f64 {
        median(&self.interval_score_column()).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RollingOriginOptions {
    pub lambda: BoxCoxLambda,
    pub alpha: f64,
    pub components: ComponentRule,
}

impl RollingOriginOptions {
    pub fn new(lambda: BoxCoxLambda, alpha: f64) -> Self {
        RollingOriginOptions {
            lambda,
            alpha,
            components: ComponentRule::default(),
        }
    }
}

/// Errors of one origin, indexed by horizon.
struct OriginErrors {
    abs_error: Vec<f64>,
    score: Vec<f64>,
}

fn evaluate_origin(
    surface: &AgeRateSurface,
    origin: i32,
    eval_end_year: i32,
    options: &RollingOriginOptions,
) -> Result<OriginErrors> {
    let history = surface.years_through(origin)?;
    let horizon = (eval_end_year - origin) as usize;
    let run = forecast_surface(
        &history,
        &ForecastOptions {
            lambda: options.lambda,
            horizon,
            alpha: options.alpha,
            components: options.components,
        },
    )?;
    log::info!(
        "origin {origin}: K = {}, models = [{}]",
        run.decomposition.k(),
        run.scores
            .models
            .iter()
            .map(|m| m.spec.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    let actual = surface.years_between(origin + 1, eval_end_year)?;
    let actual = actual.rates();
    let rates = &run.rates;
    let mut abs_error = Vec::with_capacity(horizon);
    let mut score = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let mut e = 0.0;
        let mut s = 0.0;
        for i in 0..actual.ncols() {
            let x = actual[(h, i)];
            e += (x - rates.rate_point[(h, i)]).abs();
            s += interval_score(rates.rate_lower[(h, i)], rates.rate_upper[(h, i)], x, options.alpha)?;
        }
        abs_error.push(e);
        score.push(s);
    }
    Ok(OriginErrors { abs_error, score })
}

/// Expanding-window evaluation: for every origin `o` in
/// `fit_end_year..eval_end_year`, refit the whole pipeline on the years up
/// to `o`, forecast through `eval_end_year`, and pool errors by horizon.
/// Horizon `h` pools `M - h + 1` origins, `M = eval_end_year - fit_end_year`.
pub fn rolling_origin(
    surface: &AgeRateSurface,
    fit_end_year: i32,
    eval_end_year: i32,
    options: &RollingOriginOptions,
) -> Result<HorizonErrorTable> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", options.alpha)));
    }
    if fit_end_year >= eval_end_year {
        return Err(Error::invalid(format!(
            "fit end year {fit_end_year} must precede evaluation end year {eval_end_year}"
        )));
    }
    if surface.year_index(fit_end_year).is_none() || surface.year_index(eval_end_year).is_none() {
        return Err(Error::invalid(format!(
            "years {fit_end_year} and {eval_end_year} must lie within {}..={}",
            surface.first_year(),
            surface.last_year()
        )));
    }
    let span = (eval_end_year - fit_end_year) as usize;
    let origins: Vec<i32> = (fit_end_year..eval_end_year).collect();
    let per_origin: Vec<OriginErrors> = origins
        .par_iter()
        .map(|&o| {
            evaluate_origin(surface, o, eval_end_year, options).map_err(|e| Error::Origin {
                origin: o,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let n_ages = surface.n_ages() as f64;
    let rows = (1..=span)
        .map(|h| {
            let pooled: Vec<&OriginErrors> = per_origin.iter().filter(|o| o.abs_error.len() >= h).collect();
            let cells = pooled.len() as f64 * n_ages;
            HorizonRow {
                h,
                mafe: pooled.iter().map(|o| o.abs_error[h - 1]).sum::<f64>() / cells,
                interval_score: pooled.iter().map(|o| o.score[h - 1]).sum::<f64>() / cells,
                n_forecasts: pooled.len(),
            }
        })
        .collect();
    Ok(HorizonErrorTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mafe_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mafe(&a, &a).unwrap(), 0.0);
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        assert!((mafe(&one(0.010), &one(0.013)).unwrap() - 0.003).abs() < 1e-15);
        let p = DMatrix::from_row_slice(2, 2, &[1.1, 2.3, 2.8, 4.4]);
        assert!((mafe(&a, &p).unwrap() - 0.25).abs() < 1e-12);
        assert!(mafe(&DMatrix::zeros(0, 0), &DMatrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn interval_score_examples() {
        assert!((interval_score(1.0, 2.0, 1.5, 0.2).unwrap() - 1.0).abs() < 1e-12);
        assert!((interval_score(1.0, 2.0, 0.5, 0.2).unwrap() - 6.0).abs() < 1e-12);
        assert!((interval_score(1.0, 2.0, 2.25, 0.2).unwrap() - 3.5).abs() < 1e-12);
        assert!(interval_score(2.0, 1.0, 1.5, 0.2).is_err());
        assert!(interval_score(1.0, 2.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn averaged_interval_score_examples() {
        let row = |v: &[f64]| DMatrix::from_row_slice(1, v.len(), v);
        let s = averaged_interval_score(&row(&[1.0, 1.0, 1.0]), &row(&[2.0, 2.0, 2.0]), &row(&[1.5, 0.5, 2.25]), 0.2)
            .unwrap();
        assert!((s - 3.5).abs() < 1e-12);

        let w = averaged_interval_score(&row(&[0.0, 5.0]), &row(&[0.3, 5.3]), &row(&[0.1, 5.2]), 0.2).unwrap();
        assert!((w - 0.3).abs() < 1e-12);

        let x = row(&[0.1, 0.2]);
        assert_eq!(averaged_interval_score(&x, &x, &x, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[1.0, 2.0, 3.0, 10.0]), Some(2.5));
        let col: Vec<f64> = (1..=17).rev().map(f64::from).collect();
        assert_eq!(median(&col), Some(9.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn table_summaries() {
        let rows = [(1.0, 4.0), (2.0, 5.0), (6.0, 9.0)]
            .iter()
            .enumerate()
            .map(|(i, (m, s))| HorizonRow { h: i + 1, mafe: *m, interval_score: *s, n_forecasts: 3 - i })
            .collect();
        let t = HorizonErrorTable { rows };
        assert_eq!(t.mean_mafe(), 3.0);
        assert_eq!(t.median_mafe(), 2.0);
        assert_eq!(t.mean_interval_score(), 6.0);
        assert_eq!(t.median_interval_score(), 5.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn interval_score_law(
                l in -10.0f64..10.0,
                width in 0.0f64..5.0,
                x in -20.0f64..20.0,
                alpha in 0.01f64..0.99,
            ) {
                let u = l + width;
                let s = interval_score(l, u, x, alpha).unwrap();
                prop_assert!(s >= u - l);
                let covered = l <= x && x <= u;
                prop_assert_eq!(s == u - l, covered);
            }

            #[test]
            fn pooled_order_irrelevant(
                cells in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..30),
                shift in 0usize..30,
            ) {
                let n = cells.len();
                let mk = |f: &dyn Fn(&(f64, f64, f64)) -> f64, rot: usize| {
                    DMatrix::from_fn(1, n, |_, j| f(&cells[(j + rot) % n]))
                };
                let a = mk(&|c| c.0, 0);
                let p = mk(&|c| c.1, 0);
                let a2 = mk(&|c| c.0, shift);
                let p2 = mk(&|c| c.1, shift);
                prop_assert!((mafe(&a, &p).unwrap() - mafe(&a2, &p2).unwrap()).abs() < 1e-12);
                let lo = mk(&|c| c.1.min(c.2), 0);
                let hi = mk(&|c| c.1.max(c.2), 0);
                let lo2 = mk(&|c| c.1.min(c.2), shift);
                let hi2 = mk(&|c| c.1.max(c.2), shift);
                prop_assert!(
                    (averaged_interval_score(&lo, &hi, &a, 0.2).unwrap()
                        - averaged_interval_score(&lo2, &hi2, &a2, 0.2).unwrap()).abs() < 1e-12
                );
            }
        }
    }
}
