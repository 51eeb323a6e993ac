//! Mapping between unconstrained optimiser coordinates and stationary /
//! invertible polynomial coefficients via partial autocorrelations.

use nalgebra::DMatrix;

/// Optimiser coordinates are clipped here before `tanh`, so partial
/// autocorrelations stay strictly inside (-1, 1).
const MAX_COORDINATE: f64 = 8.0;

/// Partial autocorrelations whose magnitude exceeds this are treated as
/// sitting on the unit circle.
pub const PACF_LIMIT: f64 = 1.0 - 1e-5;

/// Durbin-Levinson recursion: partial autocorrelations to the coefficients
/// of `1 - phi_1 B - ... - phi_p B^p`.
pub fn pacf_to_coeffs(pacf: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi.push(r);
    }
    phi
}

/// Inverse of [`pacf_to_coeffs`]. Returns `None` when the polynomial has a
/// root on or inside the unit circle.
pub fn coeffs_to_pacf(coeffs: &[f64]) -> Option<Vec<f64>> {
    let mut phi = coeffs.to_vec();
    let mut pacf = vec![0.0; phi.len()];
    for k in (0..phi.len()).rev() {
        let r = phi[k];
        if !(r.abs() < 1.0) {
            return None;
        }
        pacf[k] = r;
        let denom = 1.0 - r * r;
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        phi.truncate(k);
    }
    Some(pacf)
}

/// Whether `1 - sum phi_j B^j` has all roots outside the unit circle with
/// margin.
pub fn is_stationary(coeffs: &[f64]) -> bool {
    match coeffs_to_pacf(coeffs) {
        Some(pacf) => pacf.iter().all(|r| r.abs() <= PACF_LIMIT),
        None => false,
    }
}

/// Whether `1 + sum theta_j B^j` has all roots outside the unit circle.
pub fn is_invertible(theta: &[f64]) -> bool {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    is_stationary(&neg)
}

/// Smallest root modulus of `1 - sum c_j B^j`, from the spectral radius of
/// the companion matrix (whose eigenvalues are the inverse roots). Infinite
/// for a constant polynomial.
pub fn min_root_modulus(coeffs: &[f64]) -> f64 {
    let p = coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    if p == 0 {
        return f64::INFINITY;
    }
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            coeffs[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let radius = companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    1.0 / radius
}

pub fn ar_from_unconstrained(u: &[f64]) -> Vec<f64> {
    let pacf: Vec<f64> = u.iter().map(|v| v.clamp(-MAX_COORDINATE, MAX_COORDINATE).tanh()).collect();
    pacf_to_coeffs(&pacf)
}

pub fn ma_from_unconstrained(u: &[f64]) -> Vec<f64> {
    ar_from_unconstrained(u).into_iter().map(|v| -v).collect()
}

/// Unconstrained coordinates for AR coefficients; coefficients outside the
/// stationary region are shrunk towards zero until they fit.
pub fn ar_to_unconstrained(coeffs: &[f64]) -> Vec<f64> {
    let mut scale: f64 = 1.0;
    loop {
        let shrunk: Vec<f64> = coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * scale.powi(j as i32 + 1))
            .collect();
        if let Some(pacf) = coeffs_to_pacf(&shrunk) {
            if pacf.iter().all(|r| r.abs() < 0.99) {
                return pacf.iter().map(|r| r.atanh()).collect();
            }
        }
        scale *= 0.9;
        if scale < 1e-3 {
            return vec![0.0; coeffs.len()];
        }
    }
}

pub fn ma_to_unconstrained(theta: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = theta.iter().map(|t| -t).collect();
    ar_to_unconstrained(&neg)
}
