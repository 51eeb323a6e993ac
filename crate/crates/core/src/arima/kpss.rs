//! KPSS test of level stationarity, used to pick the differencing order.

use super::difference;

/// 5% critical value of the level-stationarity KPSS statistic.
pub const KPSS_CRITICAL_5PCT: f64 = 0.463;

/// Largest differencing order considered.
pub const MAX_DIFFERENCES: usize = 2;

/// Bartlett-window truncation lag `floor(3 sqrt(n) / 13)`.
pub fn kpss_lag(n: usize) -> usize {
    (3.0 * (n as f64).sqrt() / 13.0).floor() as usize
}

/// Level-stationarity KPSS statistic. `None` for a constant series, where
/// the long-run variance is zero.
pub fn kpss_statistic(series: &[f64]) -> Option<f64> {
    let n = series.len();
    if n < 2 {
        return None;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let e: Vec<f64> = series.iter().map(|x| x - mean).collect();

    let mut partial = 0.0;
    let mut eta = 0.0;
    for v in &e {
        partial += v;
        eta += partial * partial;
    }
    eta /= (n * n) as f64;

    let lag = kpss_lag(n);
    let mut s2 = e.iter().map(|v| v * v).sum::<f64>() / n as f64;
    for s in 1..=lag.min(n - 1) {
        let w = 1.0 - s as f64 / (lag as f64 + 1.0);
        let cov: f64 = (s..n).map(|t| e[t] * e[t - s]).sum();
        s2 += 2.0 * w * cov / n as f64;
    }
    if !(s2 > 0.0) || !s2.is_finite() {
        return None;
    }
    Some(eta / s2)
}

fn is_constant(series: &[f64]) -> bool {
    let first = series[0];
    let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    series.iter().all(|v| (v - first).abs() <= 1e-12 * scale)
}

/// Smallest `d` in `0..=2` whose `d`-fold difference is not rejected as
/// level stationary at the 5% level (2 when every order is rejected).
pub fn ndiffs(series: &[f64]) -> usize {
    let mut current = series.to_vec();
    for d in 0..MAX_DIFFERENCES {
        if current.len() < 3 || is_constant(&current) {
            return d;
        }
        match kpss_statistic(&current) {
            Some(stat) if stat > KPSS_CRITICAL_5PCT => {}
            _ => return d,
        }
        current = difference(&current, 1).expect("length checked above");
    }
    MAX_DIFFERENCES
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn lag_rule() {
        assert_eq!(kpss_lag(52), 1);
        assert_eq!(kpss_lag(300), 3);
        assert_eq!(kpss_lag(10), 0);
    }

    #[test]
    fn hand_computed_statistic() {
        // e = (-1.5, -0.5, 0.5, 1.5), S = (-1.5, -2, -1.5, 0), lag 0
        // eta = (2.25 + 4 + 2.25) / 16, s2 = 5 / 4
        let stat = kpss_statistic(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((stat - (8.5 / 16.0) / 1.25).abs() < 1e-14);
    }

    #[test]
    fn trend_needs_one_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trend: Vec<f64> = (0..100)
            .map(|t| 0.5 * t as f64 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        assert!(ndiffs(&trend) >= 1);
        assert_eq!(ndiffs(&[3.0; 20]), 0);
        let line: Vec<f64> = (0..20).map(|t| t as f64).collect();
        assert_eq!(ndiffs(&line), 1);
    }
}
