//! Small order-statistics and regression helpers for experiment summaries.
//!
//! Everything here is deterministic given its input slice; summaries are
//! computed after parallel collection, in fixed (k, replicate) order.

/// Median / quartile triple of a sample.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of pre-sorted data (type-7, the common
/// spreadsheet convention): position p*(n-1) between order statistics.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Quartiles of an unordered nonempty sample; NaN-free input expected.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-comparable value in sample"));
    Some(Quartiles {
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

pub fn median(values: &[f64]) -> Option<f64> {
    quartiles(values).map(|q| q.median)
}

/// Sample mean, standard deviation (n-1 denominator) and standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MeanStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

pub fn mean_stats(values: &[f64]) -> Option<MeanStats> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let (sd, se) = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        (sd, sd / (n as f64).sqrt())
    } else {
        (0.0, 0.0)
    };
    Some(MeanStats { n, mean, sd, se })
}

/// Least-squares slope of log(y) against log(x). Returns None unless at
/// least two points with positive coordinates are supplied.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quartiles_match_hand_values() {
        let q = quartiles(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_relative_eq!(q.q1, 1.75);
        assert_relative_eq!(q.median, 2.5);
        assert_relative_eq!(q.q3, 3.25);
        let q = quartiles(&[5.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (5.0, 5.0, 5.0));
        assert_eq!(quartiles(&[]), None);
        assert_relative_eq!(median(&[9.0, 1.0, 5.0]).unwrap(), 5.0);
    }

    #[test]
    fn mean_stats_match_hand_values() {
        let s = mean_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(s.mean, 2.5);
        // var = (2.25 + 0.25 + 0.25 + 2.25)/3
        assert_relative_eq!(s.sd, (5.0f64 / 3.0).sqrt());
        assert_relative_eq!(s.se, s.sd / 2.0);
        let single = mean_stats(&[7.0]).unwrap();
        assert_eq!((single.mean, single.sd, single.se), (7.0, 0.0, 0.0));
        assert!(mean_stats(&[]).is_none());
    }

    #[test]
    fn loglog_slope_recovers_power_law() {
        let xs: [f64; 4] = [64.0, 256.0, 1024.0, 4096.0];
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 * x.powf(-0.5)).collect();
        assert_relative_eq!(loglog_slope(&xs, &ys).unwrap(), -0.5, epsilon = 1e-12);
        assert!(loglog_slope(&xs, &[1.0, 1.0, 0.0, 1.0]).is_none());
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }
}
