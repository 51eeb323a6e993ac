//! Principal-component decomposition of a transformed surface into a mean
//! age profile, orthonormal age components and per-year score series.
//!
//! `z[t, i] = mean[i] + sum_k scores[t, k] * components[i, k] + residual[t, i]`

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::transform::{BoxCoxLambda, TransformedSurface};

const SVD_MAX_ITERATIONS: usize = 10_000;

/// How many components to retain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentRule {
    /// Eigenvalue-ratio estimator searched over `1..=k_max`; `None` uses
    /// `floor(min(n, p) / 2)`.
    Ratio { k_max: Option<usize> },
    Fixed(usize),
}

impl Default for ComponentRule {
    fn default() -> Self {
        ComponentRule::Ratio { k_max: None }
    }
}

/// Per-age mean over years and the centered matrix.
pub fn center(values: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = values.nrows();
    if n < 2 {
        return Err(Error::invalid(format!("centering needs at least 2 years, got {n}")));
    }
    let mean = DVector::from_iterator(
        values.ncols(),
        values.column_iter().map(|c| c.sum() / n as f64),
    );
    let mut centered = values.clone();
    for (mut col, m) in centered.column_iter_mut().zip(mean.iter()) {
        col.add_scalar_mut(-m);
    }
    Ok((mean, centered))
}

/// Leading singular factors of a centered matrix.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `p x k_max`, column `k` is the `k`-th right singular vector.
    pub components: DMatrix<f64>,
    /// `n x k_max`, column `k` is the left singular vector times its
    /// singular value.
    pub scores: DMatrix<f64>,
    /// All `min(n, p)` singular values, nonincreasing.
    pub singular_values: DVector<f64>,
}

pub fn svd_decompose(centered: &DMatrix<f64>, k_max: usize) -> Result<SvdFactors> {
    let (n, p) = centered.shape();
    let rank_bound = n.min(p);
    if k_max < 1 || k_max > rank_bound {
        return Err(Error::invalid(format!(
            "k_max must lie in 1..={rank_bound}, got {k_max}"
        )));
    }
    let svd = SVD::try_new(centered.clone(), true, true, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or_else(|| Error::numerical("singular value decomposition did not converge"))?;
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sv = &svd.singular_values;

    let mut components = DMatrix::zeros(p, k_max);
    let mut scores = DMatrix::zeros(n, k_max);
    for k in 0..k_max {
        let mut phi: DVector<f64> = v_t.row(k).transpose();
        let mut beta: DVector<f64> = u.column(k) * sv[k];
        // sign: largest-magnitude loading is positive
        let pivot = phi.iamax();
        if phi[pivot] < 0.0 {
            phi.neg_mut();
            beta.neg_mut();
        }
        components.set_column(k, &phi);
        scores.set_column(k, &beta);
    }
    Ok(SvdFactors {
        components,
        scores,
        singular_values: sv.clone(),
    })
}

/// Ratio-based choice of the number of components: the `k` in `1..=k_max`
/// minimising `sigma[k+1]^2 / sigma[k]^2`. Ratios with a zero denominator
/// never win; ties go to the smaller `k`.
pub fn select_k(singular_values: &[f64], k_max: usize) -> Result<usize> {
    if k_max < 1 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    if singular_values.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("singular values must be finite and nonnegative"));
    }
    if singular_values.iter().all(|&s| s == 0.0) {
        return Err(Error::invalid("all singular values are zero"));
    }
    if singular_values.len() < 2 {
        return Ok(1);
    }
    let k_max = k_max.min(singular_values.len() - 1);
    let eig: Vec<f64> = singular_values.iter().map(|s| s * s).collect();
    let mut best = (1, f64::INFINITY);
    for k in 1..=k_max {
        let ratio = if eig[k - 1] > 0.0 {
            eig[k] / eig[k - 1]
        } else {
            f64::INFINITY
        };
        if ratio < best.1 {
            best = (k, ratio);
        }
    }
    Ok(best.0)
}

/// Per-age sample variance (divisor `n - 1`) of what the first `k`
/// components leave unexplained.
pub fn residual_variance(centered: &DMatrix<f64>, factors: &SvdFactors, k: usize) -> Result<DVector<f64>> {
    if k > factors.components.ncols() {
        return Err(Error::invalid(format!(
            "asked for {k} components, only {} computed",
            factors.components.ncols()
        )));
    }
    let n = centered.nrows();
    if n < 2 {
        return Err(Error::invalid("residual variance needs at least 2 years"));
    }
    let fitted = factors.scores.columns(0, k) * factors.components.columns(0, k).transpose();
    let resid = centered - fitted;
    Ok(DVector::from_iterator(
        resid.ncols(),
        resid.column_iter().map(|c| {
            let m = c.mean();
            c.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64
        }),
    ))
}

/// Mean profile, retained components, their score series and residual
/// variances for one transformed surface.
#[derive(Debug, Clone)]
pub struct PcaDecomposition {
    pub first_year: i32,
    pub first_age: i32,
    pub lambda: BoxCoxLambda,
    pub mean: DVector<f64>,
    /// `p x K`
    pub components: DMatrix<f64>,
    /// `n x K`
    pub scores: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub residual_variance: DVector<f64>,
}

impl PcaDecomposition {
    pub fn fit(surface: &TransformedSurface, rule: ComponentRule) -> Result<Self> {
        let (n, p) = surface.values.shape();
        let rank_bound = n.min(p);
        let (mean, centered) = center(&surface.values)?;
        let factors = svd_decompose(&centered, rank_bound)?;

        let k = match rule {
            ComponentRule::Fixed(k) => {
                if k < 1 || k > rank_bound {
                    return Err(Error::invalid(format!("K must lie in 1..={rank_bound}, got {k}")));
                }
                k
            }
            ComponentRule::Ratio { k_max } => {
                let k_max = k_max.unwrap_or((rank_bound / 2).max(1));
                // singular values at rounding level count as exact zeros
                let scale = surface.values.norm().max(factors.singular_values[0]);
                let tol = n.max(p) as f64 * f64::EPSILON * scale;
                let cleaned: Vec<f64> = factors
                    .singular_values
                    .iter()
                    .map(|&s| if s <= tol { 0.0 } else { s })
                    .collect();
                if cleaned.iter().all(|&s| s == 0.0) {
                    1
                } else {
                    select_k(&cleaned, k_max)?
                }
            }
        };

        let residual_variance = residual_variance(&centered, &factors, k)?;
        Ok(PcaDecomposition {
            first_year: surface.first_year,
            first_age: surface.first_age,
            lambda: surface.lambda,
            mean,
            components: factors.components.columns(0, k).into_owned(),
            scores: factors.scores.columns(0, k).into_owned(),
            singular_values: factors.singular_values,
            residual_variance,
        })
    }

    /// Number of retained components.
    pub fn k(&self) -> usize {
        self.components.ncols()
    }

    pub fn n_years(&self) -> usize {
        self.scores.nrows()
    }

    pub fn n_ages(&self) -> usize {
        self.mean.len()
    }

    /// `mean + scores * components^T`, one row per training year.
    pub fn fitted(&self) -> DMatrix<f64> {
        let mut out = &self.scores * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }

    pub fn score_series(&self, k: usize) -> Vec<f64> {
        self.scores.column(k).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn transformed(values: DMatrix<f64>) -> TransformedSurface {
        TransformedSurface {
            first_year: 1900,
            first_age: 15,
            lambda: BoxCoxLambda::LOG,
            values,
        }
    }

    fn gaussian(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn center_constant_and_two_point() {
        let (mean, c) = center(&DMatrix::from_element(4, 3, 2.5)).unwrap();
        assert!(mean.iter().all(|&m| m == 2.5));
        assert!(c.iter().all(|&v| v == 0.0));

        let (mean, c) = center(&DMatrix::from_column_slice(2, 1, &[1.0, 4.0])).unwrap();
        assert_eq!(mean[0], 2.5);
        assert_eq!(c[(0, 0)], -1.5);
        assert_eq!(c[(1, 0)], 1.5);

        assert!(center(&DMatrix::from_element(1, 3, 1.0)).is_err());
    }

    #[test]
    fn centered_columns_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = gaussian(&mut rng, 25, 8) * 50.0;
        let (_, c) = center(&z).unwrap();
        let bound = 1e-12 * 25.0 * z.amax();
        for col in c.column_iter() {
            assert!(col.sum().abs() <= bound);
        }
    }

    #[test]
    fn rank_one_is_exact() {
        let u = DVector::from_vec(vec![3.0, -1.0, -2.0, 0.0]);
        let v = DVector::from_vec(vec![1.0, 2.0, 2.0]) / 3.0;
        let m = &u * v.transpose();
        let f = svd_decompose(&m, 3).unwrap();
        let phi = f.components.column(0);
        let beta = f.scores.column(0);
        let sign = phi.dot(&v).signum();
        assert!((phi - &v * sign).amax() < 1e-12);
        assert!((beta - &u * sign).amax() < 1e-12);
        assert!(f.singular_values[1].abs() < 1e-12);
    }

    #[test]
    fn full_rank_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, p) in [(20, 10), (8, 12), (30, 30)] {
            let (_, c) = center(&gaussian(&mut rng, n, p)).unwrap();
            let r = n.min(p);
            let f = svd_decompose(&c, r).unwrap();
            let back = &f.scores * f.components.transpose();
            assert!((back - &c).norm() / c.norm() < 1e-8);
        }
    }

    #[test]
    fn select_k_examples() {
        let sv = |sq: &[f64]| sq.iter().map(|s: &f64| s.sqrt()).collect::<Vec<_>>();
        assert_eq!(select_k(&sv(&[100.0, 1.0, 0.9, 0.8]), 2).unwrap(), 1);
        assert_eq!(select_k(&sv(&[100.0, 90.0, 1.0, 0.9]), 3).unwrap(), 2);
        for k_max in 1..=5 {
            assert_eq!(select_k(&sv(&[5.0, 0.0, 0.0]), k_max).unwrap(), 1);
        }
        assert!(select_k(&[0.0, 0.0], 1).is_err());
        assert!(select_k(&[1.0], 0).is_err());
    }

    #[test]
    fn full_rank_residual_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, c) = center(&gaussian(&mut rng, 12, 5)).unwrap();
        let f = svd_decompose(&c, 5).unwrap();
        let v = residual_variance(&c, &f, 5).unwrap();
        assert!(v.amax() < 1e-24);
    }

    #[test]
    fn residual_variance_recovers_noise_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let (n, p, s) = (500, 35, 0.3);
        let shape = DVector::from_fn(p, |i, _| (-((i as f64 - 13.0) / 8.0).powi(2)).exp() + 0.1).normalize();
        let z = DMatrix::from_fn(n, p, |t, i| {
            10.0 * (t as f64 / 40.0).sin() * shape[i] + s * rng.sample::<f64, _>(StandardNormal)
        });
        let d = PcaDecomposition::fit(&transformed(z), ComponentRule::Fixed(1)).unwrap();
        for v in d.residual_variance.iter() {
            assert!((v / (s * s) - 1.0).abs() < 0.2, "{v}");
        }
    }

    #[test]
    fn white_noise_residual_close_to_raw_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (n, p) = (400, 10);
        let z = gaussian(&mut rng, n, p);
        let d = PcaDecomposition::fit(&transformed(z.clone()), ComponentRule::Fixed(1)).unwrap();
        let (_, c) = center(&z).unwrap();
        let raw_total: f64 = c.iter().map(|e| e * e).sum::<f64>() / (n - 1) as f64;
        let resid_total: f64 = d.residual_variance.sum();
        // one of ten roughly equal directions is removed
        assert!(resid_total / raw_total > 0.8 && resid_total / raw_total < 0.95);
    }

    #[test]
    fn constant_surface_forces_one_component() {
        let d = PcaDecomposition::fit(&transformed(DMatrix::from_element(30, 10, 0.1)), ComponentRule::default())
            .unwrap();
        assert_eq!(d.k(), 1);
        assert!(d.scores.amax() < 1e-12);
    }

    #[test]
    fn default_search_picks_dominant_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, p) = (40, 12);
        let a = DVector::from_fn(p, |i, _| (i as f64 / 3.0).sin()).normalize();
        let b = DVector::from_fn(p, |i, _| (i as f64 / 5.0).cos()).normalize();
        let z = DMatrix::from_fn(n, p, |t, i| {
            5.0 * t as f64 * a[i] + 3.0 * (t as f64).sqrt() * b[i] + 1e-3 * rng.sample::<f64, _>(StandardNormal)
        });
        let d = PcaDecomposition::fit(&transformed(z), ComponentRule::default()).unwrap();
        assert_eq!(d.k(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn structural_invariants(seed in any::<u64>(), n in 3usize..25, p in 2usize..15) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let z = gaussian(&mut rng, n, p);
                let (_, c) = center(&z).unwrap();
                let r = n.min(p);
                let f = svd_decompose(&c, r).unwrap();
                let gram = f.components.transpose() * &f.components;
                prop_assert!((gram - DMatrix::identity(r, r)).amax() < 1e-10);
                for col in f.scores.column_iter() {
                    prop_assert!(col.mean().abs() < 1e-8);
                }
                for w in f.singular_values.as_slice().windows(2) {
                    prop_assert!(w[0] >= w[1]);
                }
                let mut last = f64::INFINITY;
                for k in 1..=r {
                    let err = (&c - f.scores.columns(0, k) * f.components.columns(0, k).transpose()).norm();
                    prop_assert!(err <= last + 1e-10);
                    last = err;
                }
            }

            #[test]
            fn select_k_scale_invariant(
                mut sv in proptest::collection::vec(0.0f64..100.0, 2..12),
                scale in 1e-3f64..1e3,
                k_max in 1usize..10,
            ) {
                sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
                prop_assume!(sv[0] > 0.0);
                let scaled: Vec<f64> = sv.iter().map(|s| s * scale).collect();
                let k = select_k(&sv, k_max).unwrap();
                prop_assert!(k >= 1);
                // exact ties can be broken differently by rounding after scaling
                let eig = |v: &[f64], k: usize| (v[k] * v[k]) / (v[k - 1] * v[k - 1]);
                let ks = select_k(&scaled, k_max).unwrap();
                prop_assert!(k == ks || (eig(&sv, k) - eig(&sv, ks)).abs() < 1e-12);
            }
        }
    }
}
