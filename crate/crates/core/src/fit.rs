//! Power-law fits `y ≈ C x^p` by least squares in log-log coordinates.

use serde::Serialize;

use crate::{Error, Result};

const MIN_BIN_COUNT: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub exponent: f64,
    pub constant: f64,
    /// Max absolute deviation of `log y` from the fitted line.
    pub residual: f64,
    /// Abscissae used, strictly increasing.
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

/// Ordinary least squares of `log y` on `log x`.
///
/// Points are sorted by `x`; non-positive values are rejected.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Precondition("fit inputs differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientPoints { needed: 2, got: xs.len() });
    }
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    if pts.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Precondition("log-log fit needs positive finite data".into()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Precondition("fit abscissae must be distinct".into()));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(FitResult {
        exponent: slope,
        constant: intercept.exp(),
        residual,
        radii: pts.iter().map(|p| p.0).collect(),
        values: pts.iter().map(|p| p.1).collect(),
    })
}

/// Power law through the largest `y` in each of `bins` log-spaced bins of
/// `x` over `[lo, hi]`. Points outside the band, bins with fewer than three
/// points and zero maxima are skipped; each bin is placed at the geometric
/// mean of its members.
pub fn fit_binned_max(xs: &[f64], ys: &[f64], lo: f64, hi: f64, bins: usize) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::Precondition("fit inputs differ in length".into()));
    }
    if !(lo > 0.0 && hi > lo && bins > 0) {
        return Err(Error::Precondition(format!("bad binning band [{lo}, {hi}] with {bins} bins")));
    }
    let width = (hi / lo).ln() / bins as f64;
    let mut acc = vec![(0.0f64, 0usize, 0.0f64); bins];
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x >= lo && x <= hi) || !y.is_finite() {
            continue;
        }
        let b = (((x / lo).ln() / width) as usize).min(bins - 1);
        acc[b].0 += x.ln();
        acc[b].1 += 1;
        acc[b].2 = acc[b].2.max(y);
    }
    let (bx, by): (Vec<f64>, Vec<f64>) =
        acc.iter().filter(|a| a.1 >= MIN_BIN_COUNT && a.2 > 0.0).map(|a| ((a.0 / a.1 as f64).exp(), a.2)).unzip();
    fit_power_law(&bx, &by)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn guards() {
        assert!(matches!(fit_power_law(&[1.0], &[1.0]), Err(Error::InsufficientPoints { .. })));
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, -1.0]).is_err());
        assert!(fit_power_law(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn binned_max_follows_the_envelope() {
        let xs: Vec<f64> = (1..200).map(|i| 0.01 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x.sqrt() * if i % 3 == 0 { 1.0 } else { 0.5 }).collect();
        let f = fit_binned_max(&xs, &ys, 0.05, 1.5, 6).unwrap();
        assert!((f.exponent - 0.5).abs() < 0.05, "{f:?}");
        assert!(fit_binned_max(&xs, &ys, 0.05, 0.06, 1).is_err());
    }

    proptest! {
        #[test]
        fn recovers_exact_power_laws(p in -3.0f64..6.0, c in 1e-3f64..1e3, r0 in 0.01f64..0.1) {
            let xs: Vec<f64> = (0..6).map(|i| r0 * 1.5f64.powi(i)).collect();
            let ys: Vec<f64> = xs.iter().rev().map(|x| c * x.powf(p)).rev().collect();
            let f = fit_power_law(&xs, &ys).unwrap();
            prop_assert!((f.exponent - p).abs() < 1e-9);
            prop_assert!((f.constant / c - 1.0).abs() < 1e-8);
            prop_assert!(f.residual < 1e-9);
            prop_assert!(f.radii.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
