//! Choice of the Box-Cox parameter by rolling-origin forecast accuracy on
//! the validation sample: the selected `lambda` minimises the median, over
//! horizons, of the chosen error measure.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{AgeRateSurface, SampleSplit};
use crate::decomposition::ComponentRule;
use crate::error::{Error, Result};
use crate::evaluation::{median, rolling_origin, HorizonErrorTable, RollingOriginOptions};
use crate::optim::{argmin, brent_minimize};
use crate::transform::BoxCoxLambda;

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const GRID_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Mean absolute forecast error.
    Point,
    /// Averaged interval score.
    Interval,
}

impl Criterion {
    pub fn column(self, table: &HorizonErrorTable) -> Vec<f64> {
        match self {
            Criterion::Point => table.mafe_column(),
            Criterion::Interval => table.interval_score_column(),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Point => "point",
            Criterion::Interval => "interval",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" | "mafe" => Ok(Criterion::Point),
            "interval" | "score" => Ok(Criterion::Interval),
            other => Err(Error::invalid(format!("unknown criterion `{other}` (point|interval)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Brent,
    Grid,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Brent => "brent",
            Method::Grid => "grid",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brent" => Ok(Method::Brent),
            "grid" => Ok(Method::Grid),
            other => Err(Error::invalid(format!("unknown method `{other}` (brent|grid)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub lambda_star: BoxCoxLambda,
    pub criterion: Criterion,
    pub method: Method,
    pub objective_value: f64,
    /// `(lambda, objective)` in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

/// `{0, 0.01, ..., 1}`
pub fn lambda_grid() -> Vec<f64> {
    (0..=GRID_STEPS).map(|i| i as f64 / GRID_STEPS as f64).collect()
}

/// Minimises `objective` over `lambda` in `[0, 1]`. Grid ties resolve to the
/// smaller `lambda`.
pub fn minimize_lambda<F>(objective: F, method: Method, tolerance: f64) -> Result<(f64, f64, Vec<(f64, f64)>)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(tolerance > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tolerance}")));
    }
    match method {
        Method::Brent => {
            let m = brent_minimize(|x| objective(x), 0.0, 1.0, tolerance)?;
            Ok((m.x, m.value, m.trace))
        }
        Method::Grid => {
            let grid = lambda_grid();
            let values: Vec<f64> = grid.par_iter().map(|&l| objective(l)).collect::<Result<_>>()?;
            let best = argmin(&values).expect("grid is nonempty");
            let trace = grid.into_iter().zip(values).collect::<Vec<_>>();
            Ok((trace[best].0, trace[best].1, trace))
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelectionOptions {
    pub criterion: Criterion,
    pub alpha: f64,
    pub method: Method,
    pub tolerance: f64,
    pub components: ComponentRule,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            criterion: Criterion::Point,
            alpha: 0.2,
            method: Method::Brent,
            tolerance: DEFAULT_TOLERANCE,
            components: ComponentRule::default(),
        }
    }
}

fn check_validation(split: &SampleSplit) -> Result<()> {
    if split.validation_years() < 2 {
        return Err(Error::invalid(format!(
            "validation sample needs at least 2 years, got {}",
            split.validation_years()
        )));
    }
    Ok(())
}

/// Median over horizons of the rolling-origin error on the validation span.
pub fn objective(
    surface: &AgeRateSurface,
    lambda: BoxCoxLambda,
    split: &SampleSplit,
    options: &SelectionOptions,
) -> Result<f64> {
    check_validation(split)?;
    let table = rolling_origin(
        surface,
        split.training_end_year,
        split.validation_end_year,
        &RollingOriginOptions {
            lambda,
            alpha: options.alpha,
            components: options.components,
        },
    )?;
    median(&options.criterion.column(&table)).ok_or_else(|| Error::invalid("empty error table"))
}

pub fn optimize_lambda(
    surface: &AgeRateSurface,
    split: &SampleSplit,
    options: &SelectionOptions,
) -> Result<LambdaSelection> {
    check_validation(split)?;
    let (x, value, evaluations) = minimize_lambda(
        |l| {
            let v = objective(surface, BoxCoxLambda::new(l)?, split, options)?;
            log::debug!("lambda {l:.6}: objective {v:.6e}");
            Ok(v)
        },
        options.method,
        options.tolerance,
    )?;
    Ok(LambdaSelection {
        lambda_star: BoxCoxLambda::new(x)?,
        criterion: options.criterion,
        method: options.method,
        objective_value: value,
        evaluations,
    })
}

/// Rolling-origin accuracy of several `lambda` values over the test span.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaComparison {
    pub lambdas: Vec<BoxCoxLambda>,
    pub tables: Vec<HorizonErrorTable>,
}

pub fn compare_lambdas(
    surface: &AgeRateSurface,
    lambdas: &[BoxCoxLambda],
    split: &SampleSplit,
    alpha: f64,
    components: ComponentRule,
) -> Result<LambdaComparison> {
    if lambdas.is_empty() {
        return Err(Error::invalid("at least one lambda is required"));
    }
    let tables = lambdas
        .iter()
        .map(|&lambda| {
            rolling_origin(
                surface,
                split.validation_end_year,
                split.test_end_year,
                &RollingOriginOptions {
                    lambda,
                    alpha,
                    components,
                },
            )
        })
        .collect::<Result<_>>()?;
    Ok(LambdaComparison {
        lambdas: lambdas.to_vec(),
        tables,
    })
}
