//! One-parameter Box-Cox transform with `lambda` restricted to `[0, 1]`.

use std::fmt;

use nalgebra::DMatrix;

use crate::data::AgeRateSurface;
use crate::error::{Error, Result};

/// Below this magnitude `lambda` is treated as zero (logarithm branch).
pub const LOG_BRANCH_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BoxCoxLambda(f64);

impl BoxCoxLambda {
    pub const LOG: BoxCoxLambda = BoxCoxLambda(0.0);

    pub fn new(lambda: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&lambda) {
            Ok(BoxCoxLambda(lambda))
        } else {
            Err(Error::invalid(format!("lambda must lie in [0, 1], got {lambda}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    fn is_log(self) -> bool {
        self.0.abs() < LOG_BRANCH_THRESHOLD
    }
}

impl fmt::Display for BoxCoxLambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `(f^lambda - 1) / lambda`, or `ln f` on the logarithm branch.
pub fn box_cox(f: f64, lambda: BoxCoxLambda) -> Result<f64> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::Domain(format!("box-cox needs a positive finite value, got {f}")));
    }
    let ln_f = f.ln();
    if lambda.is_log() {
        Ok(ln_f)
    } else {
        // expm1 keeps the power branch accurate as lambda approaches zero
        Ok((lambda.0 * ln_f).exp_m1() / lambda.0)
    }
}

/// `(lambda * z + 1)^(1 / lambda)`, or `exp z` on the logarithm branch.
pub fn inv_box_cox(z: f64, lambda: BoxCoxLambda) -> Result<f64> {
    if lambda.is_log() {
        return Ok(z.exp());
    }
    let base = lambda.0 * z + 1.0;
    if !(base > 0.0) {
        return Err(Error::Domain(format!(
            "inverse box-cox undefined for z = {z}, lambda = {}: lambda * z + 1 = {base}",
            lambda.0
        )));
    }
    Ok(((lambda.0 * z).ln_1p() / lambda.0).exp())
}

/// Box-Cox transformed surface; same axes as its source.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSurface {
    pub first_year: i32,
    pub first_age: i32,
    pub lambda: BoxCoxLambda,
    pub values: DMatrix<f64>,
}

impl TransformedSurface {
    pub fn n_years(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.values.ncols()
    }
}

pub fn transform_surface(surface: &AgeRateSurface, lambda: BoxCoxLambda) -> Result<TransformedSurface> {
    let rates = surface.rates();
    let mut values = DMatrix::zeros(rates.nrows(), rates.ncols());
    for (out, &f) in values.iter_mut().zip(rates.iter()) {
        *out = box_cox(f, lambda)?;
    }
    Ok(TransformedSurface {
        first_year: surface.first_year(),
        first_age: surface.first_age(),
        lambda,
        values,
    })
}
