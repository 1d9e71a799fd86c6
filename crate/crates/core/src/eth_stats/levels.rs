//! Minimal gap ratios and the GOE surmise.

use serde::{Deserialize, Serialize};

use super::{r_squared_direct, r_squared_linear, Histogram, StatsError};

/// `P_GOE(r) = (27/4) r (1 + r) / (1 + r + r²)^{5/2}`, which has unit area on
/// `[0, 1]`, the support of the minimal gap ratio.
pub fn p_goe(r: f64) -> f64 {
    27.0 / 4.0 * r * (1.0 + r) / (1.0 + r + r * r).powf(2.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRatioResult {
    pub ratios: Vec<f64>,
    /// Levels removed because they were within `1e-12 × bandwidth` of the
    /// previous kept level.
    pub dropped_levels: usize,
    pub histogram: Histogram,
    pub mean_ratio: f64,
    /// Regression with intercept of the histogram density on `2 P_GOE`. The
    /// value is the same against `P_GOE`, since `R²` of a fitted line is
    /// invariant under rescaling the regressor.
    pub r2_fit: f64,
    /// `R²` with `2 P_GOE` taken as the prediction, no fitted parameters.
    pub r2_direct_2p: f64,
    /// Same against `P_GOE`; the meaningful unfitted comparison, since
    /// `P_GOE` itself integrates to one on `[0, 1]`.
    pub r2_direct_p: f64,
}

pub fn gap_ratios(eigenvalues: &[f64]) -> Result<GapRatioResult, StatsError> {
    gap_ratios_with_bins(eigenvalues, 25)
}

pub fn gap_ratios_with_bins(eigenvalues: &[f64], bins: usize) -> Result<GapRatioResult, StatsError> {
    let mut levels = eigenvalues.to_vec();
    levels.sort_by(f64::total_cmp);
    let bandwidth = match (levels.first(), levels.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let threshold = 1e-12 * bandwidth;
    let mut kept: Vec<f64> = Vec::with_capacity(levels.len());
    for e in levels {
        match kept.last() {
            Some(&last) if e - last < threshold || e == last => {}
            _ => kept.push(e),
        }
    }
    let dropped_levels = eigenvalues.len() - kept.len();
    if kept.len() < 3 {
        return Err(StatsError::TooFewLevels(kept.len()));
    }
    let ratios: Vec<f64> = kept
        .windows(3)
        .map(|w| {
            let (a, b) = (w[1] - w[0], w[2] - w[1]);
            (a / b).min(b / a)
        })
        .collect();
    let histogram = Histogram::new(&ratios, 0.0, 1.0, bins);
    let centers = histogram.centers();
    let p: Vec<f64> = centers.iter().map(|&r| p_goe(r)).collect();
    let two_p: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
    let y = &histogram.densities;
    Ok(GapRatioResult {
        mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
        r2_fit: r_squared_linear(y, &two_p),
        r2_direct_2p: r_squared_direct(y, &two_p),
        r2_direct_p: r_squared_direct(y, &p),
        dropped_levels,
        ratios,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_spacing() {
        let r = gap_ratios(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.ratios, vec![1.0, 1.0]);
    }

    #[test]
    fn single_ratio() {
        let r = gap_ratios(&[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(r.ratios, vec![0.5]);
    }

    #[test]
    fn too_few_levels() {
        assert!(matches!(gap_ratios(&[0.0, 1.0]), Err(StatsError::TooFewLevels(2))));
        assert!(matches!(gap_ratios(&[0.0, 1.0, 1.0]), Err(StatsError::TooFewLevels(2))));
    }

    #[test]
    fn degenerate_levels_dropped() {
        let r = gap_ratios(&[0.0, 1.0, 1.0, 3.0]).unwrap();
        assert_eq!(r.dropped_levels, 1);
        assert_eq!(r.ratios, vec![0.5]);
    }

    #[test]
    fn surmise_values() {
        assert!((p_goe(1.0) - 27.0 / 4.0 * 2.0 / 3f64.powf(2.5)).abs() < 1e-15);
        assert!((p_goe(1.0) - 0.8660254).abs() < 1e-7);
        assert_eq!(p_goe(0.0), 0.0);
        // Simpson's rule: the surmise is already a unit-area density on [0, 1]
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut acc = p_goe(0.0) + p_goe(1.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * p_goe(i as f64 * h);
        }
        assert!((acc * h / 3.0 - 1.0).abs() < 1e-6);
    }
}
