//! Piecewise transmission-line fit of a phase offset across frequency.
//!
//! Each segment is a single nondispersive line, `phi(f) = -theta * f / f_ref`,
//! fitted in the minimax sense. The partition into contiguous segments
//! minimizes the worst error over all points.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TlFitError {
    #[error("segment count must be at least 1")]
    NoSegments,
    #[error("{points} points cannot support {segments} segments (need at least segments + 1)")]
    TooFewPoints { points: usize, segments: usize },
    #[error("frequencies must be positive, finite and strictly increasing (index {0})")]
    BadFrequencies(usize),
    #[error("phase at index {0} is not finite")]
    BadPhase(usize),
    #[error("reference frequency {0} must be positive")]
    BadReference(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub freq_lo: f64,
    pub freq_hi: f64,
    /// Electrical length at the reference frequency, degrees.
    pub electrical_length_deg: f64,
    pub max_abs_error_deg: f64,
    /// First and last input index covered, inclusive.
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFitResult {
    pub segments: Vec<Segment>,
    pub max_abs_error_deg: f64,
}

const BISECTION_STEPS: usize = 200;
const TIE: f64 = 1e-12;

fn max_error(xs: &[f64], ys: &[f64], theta: f64) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (y + theta * x).abs())
        .fold(0.0, f64::max)
}

/// Minimax single-line fit; returns `(theta, max_error)`.
fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let roots = xs.iter().zip(ys).map(|(x, y)| -y / x);
    let (mut lo, mut hi) = roots.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    // The residual envelope above zero rises with theta and the one below
    // falls, so the optimum is where they meet.
    let envelopes = |theta: f64| {
        let mut up = (f64::NEG_INFINITY, 0);
        let mut down = (f64::NEG_INFINITY, 0);
        for (k, (x, y)) in xs.iter().zip(ys).enumerate() {
            let r = y + theta * x;
            if r > up.0 {
                up = (r, k);
            }
            if -r > down.0 {
                down = (-r, k);
            }
        }
        (up, down)
    };
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let (up, down) = envelopes(mid);
        if up.0 > down.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta_b = 0.5 * (lo + hi);
    let (up, down) = envelopes(theta_b);
    let (i, j) = (up.1, down.1);
    let theta_x = -(ys[i] + ys[j]) / (xs[i] + xs[j]);
    let (eb, ex) = (max_error(xs, ys, theta_b), max_error(xs, ys, theta_x));
    if ex <= eb {
        (theta_x, ex)
    } else {
        (theta_b, eb)
    }
}

pub fn tl_phase_fit(
    points: &[(f64, f64)],
    k_segments: usize,
    ref_freq: f64,
) -> Result<PhaseFitResult, TlFitError> {
    if k_segments < 1 {
        return Err(TlFitError::NoSegments);
    }
    if points.len() < k_segments + 1 {
        return Err(TlFitError::TooFewPoints {
            points: points.len(),
            segments: k_segments,
        });
    }
    if !(ref_freq.is_finite() && ref_freq > 0.0) {
        return Err(TlFitError::BadReference(ref_freq));
    }
    for (k, &(f, p)) in points.iter().enumerate() {
        if !(f.is_finite() && f > 0.0) || (k > 0 && !(f > points[k - 1].0)) {
            return Err(TlFitError::BadFrequencies(k));
        }
        if !p.is_finite() {
            return Err(TlFitError::BadPhase(k));
        }
    }

    let n = points.len();
    let xs: Vec<f64> = points.iter().map(|p| p.0 / ref_freq).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();

    // cost[i][j]: worst error of one line through points i..=j.
    let mut cost = vec![vec![(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in i..n {
            cost[i][j] = fit_line(&xs[i..=j], &ys[i..=j]);
        }
    }

    // best[m][j]: worst error covering 0..=j with m+1 segments; split[m][j]
    // is the first index of the last segment.
    let mut best = vec![vec![f64::INFINITY; n]; k_segments];
    let mut split = vec![vec![0usize; n]; k_segments];
    for j in 0..n {
        best[0][j] = cost[0][j].1;
    }
    for m in 1..k_segments {
        for j in m..n {
            for s in m..=j {
                let e = best[m - 1][s - 1].max(cost[s][j].1);
                if e < best[m][j] - TIE {
                    best[m][j] = e;
                    split[m][j] = s;
                }
            }
        }
    }

    let mut bounds = Vec::with_capacity(k_segments);
    let mut end = n - 1;
    for m in (0..k_segments).rev() {
        let start = if m == 0 { 0 } else { split[m][end] };
        bounds.push((start, end));
        if m > 0 {
            end = start - 1;
        }
    }
    bounds.reverse();

    let segments: Vec<Segment> = bounds
        .iter()
        .enumerate()
        .map(|(s, &(first, last))| {
            let freq_lo = if s == 0 {
                points[0].0
            } else {
                0.5 * (points[first - 1].0 + points[first].0)
            };
            let freq_hi = if s + 1 == bounds.len() {
                points[n - 1].0
            } else {
                0.5 * (points[last].0 + points[last + 1].0)
            };
            let (theta, err) = cost[first][last];
            Segment {
                freq_lo,
                freq_hi,
                electrical_length_deg: theta,
                max_abs_error_deg: err,
                first,
                last,
            }
        })
        .collect();
    let max_abs_error_deg = segments
        .iter()
        .map(|s| s.max_abs_error_deg)
        .fold(0.0, f64::max);
    Ok(PhaseFitResult {
        segments,
        max_abs_error_deg,
    })
}

/// Phase predicted by a fit at frequency `f`.
pub fn evaluate_fit(fit: &PhaseFitResult, f: f64, ref_freq: f64) -> Option<f64> {
    fit.segments
        .iter()
        .find(|s| f >= s.freq_lo && f <= s.freq_hi)
        .map(|s| -s.electrical_length_deg * f / ref_freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Exact minimax line by trying every pairwise equal-and-opposite
    /// residual crossing.
    fn pairwise_fit(xs: &[f64], ys: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..xs.len() {
            for j in i..xs.len() {
                let th = -(ys[i] + ys[j]) / (xs[i] + xs[j]);
                best = best.min(max_error(xs, ys, th));
            }
        }
        best
    }

    /// Brute force over every placement of two breakpoints.
    fn exhaustive3(points: &[(f64, f64)], f_ref: f64) -> (f64, Vec<usize>) {
        let xs: Vec<f64> = points.iter().map(|p| p.0 / f_ref).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let n = xs.len();
        let mut best = (f64::INFINITY, vec![]);
        for a in 1..n - 1 {
            for b in a + 1..n {
                let e = pairwise_fit(&xs[..a], &ys[..a])
                    .max(pairwise_fit(&xs[a..b], &ys[a..b]))
                    .max(pairwise_fit(&xs[b..], &ys[b..]));
                if e < best.0 - 1e-12 {
                    best = (e, vec![a, b]);
                }
            }
        }
        best
    }

    fn three_slope() -> Vec<(f64, f64)> {
        let f_ref = 2.3;
        (0..13)
            .map(|k| {
                let f = 1.7 + 0.1 * k as f64;
                let theta = match k {
                    0..=3 => 95.0,
                    4..=8 => 130.0,
                    _ => 170.0,
                };
                let noise = if k % 2 == 0 { 1.0 } else { -1.0 };
                (f, -theta * f / f_ref + noise)
            })
            .collect()
    }

    #[test]
    fn exact_line() {
        let pts: Vec<_> = (1..=10).map(|k| (k as f64 * 0.3, -100.0 * k as f64 * 0.3)).collect();
        let fit = tl_phase_fit(&pts, 1, 1.0).unwrap();
        assert!(fit.max_abs_error_deg < 1e-9);
        assert_relative_eq!(fit.segments[0].electrical_length_deg, 100.0, epsilon = 1e-9);
        let fit = tl_phase_fit(&pts, 3, 1.0).unwrap();
        assert!(fit.max_abs_error_deg < 1e-9);
        assert_eq!(fit.segments.len(), 3);
    }

    #[test]
    fn three_slopes_with_noise() {
        let pts = three_slope();
        let fit = tl_phase_fit(&pts, 3, 2.3).unwrap();
        assert!(fit.max_abs_error_deg <= 1.01, "{}", fit.max_abs_error_deg);
        let breaks: Vec<usize> = fit.segments[1..].iter().map(|s| s.first).collect();
        assert_eq!(breaks, vec![4, 9]);
        let (oracle_err, oracle_breaks) = exhaustive3(&pts, 2.3);
        assert_eq!(breaks, oracle_breaks);
        assert!((fit.max_abs_error_deg - oracle_err).abs() < 1e-9);
        assert_relative_eq!(fit.segments[0].freq_lo, 1.7);
        assert_relative_eq!(fit.segments[0].freq_hi, 2.05, epsilon = 1e-12);
        assert_relative_eq!(fit.segments[2].freq_hi, 2.9, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let pts = three_slope();
        assert_eq!(tl_phase_fit(&pts, 0, 1.0), Err(TlFitError::NoSegments));
        assert!(matches!(
            tl_phase_fit(&pts[..3], 3, 1.0),
            Err(TlFitError::TooFewPoints { .. })
        ));
        let mut bad = pts.clone();
        bad.swap(2, 3);
        assert_eq!(tl_phase_fit(&bad, 2, 1.0), Err(TlFitError::BadFrequencies(3)));
        assert!(tl_phase_fit(&pts, 2, 0.0).is_err());
    }

    #[test]
    fn evaluate_within_range() {
        let pts = three_slope();
        let fit = tl_phase_fit(&pts, 3, 2.3).unwrap();
        for &(f, p) in &pts {
            let e = evaluate_fit(&fit, f, 2.3).unwrap();
            assert!((e - p).abs() <= fit.max_abs_error_deg + 1e-9);
        }
        assert!(evaluate_fit(&fit, 5.0, 2.3).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn more_segments_never_hurt(
            ys in proptest::collection::vec(-400.0f64..0.0, 6..14),
        ) {
            let pts: Vec<_> = ys.iter().enumerate().map(|(k, &y)| (1.0 + 0.1 * k as f64, y)).collect();
            let mut prev = f64::INFINITY;
            for k in 1..pts.len() {
                let fit = tl_phase_fit(&pts, k, 1.5).unwrap();
                prop_assert!(fit.max_abs_error_deg <= prev + 1e-9);
                prop_assert_eq!(fit.segments.len(), k);
                prop_assert_eq!(fit.segments[0].first, 0);
                prop_assert_eq!(fit.segments[k - 1].last, pts.len() - 1);
                for w in fit.segments.windows(2) {
                    prop_assert_eq!(w[0].last + 1, w[1].first);
                    prop_assert_eq!(w[0].freq_hi, w[1].freq_lo);
                }
                prev = fit.max_abs_error_deg;
            }
        }

        #[test]
        fn line_fit_is_minimax(ys in proptest::collection::vec(-50.0f64..50.0, 1..8)) {
            let xs: Vec<f64> = (0..ys.len()).map(|k| 0.8 + 0.15 * k as f64).collect();
            let (theta, e) = fit_line(&xs, &ys);
            prop_assert!((max_error(&xs, &ys, theta) - e).abs() < 1e-12);
            for d in [-1e-4, 1e-4, -0.1, 0.1, 5.0] {
                prop_assert!(max_error(&xs, &ys, theta + d) >= e - 1e-9);
            }
        }
    }
}
