use alloc::vec::Vec;

use super::ShapeVector;
use crate::{Error, Result};

/// Straight-line distance between equal-length sequences.
pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(libm::sqrt(sq_euclidean(a, b)))
}

pub(super) fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dynamic time warping with squared point costs and steps
/// match / insert / delete, anchored at both ends, no window constraint.
/// Returns the square root of the cheapest accumulated cost.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    let m = b.len();
    let mut prev = alloc::vec![f64::INFINITY; m + 1];
    let mut cur = alloc::vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let d = x - b[j - 1];
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = d * d + best;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    Ok(libm::sqrt(prev[m]))
}

pub fn dist_euclidean(a: &ShapeVector, b: &ShapeVector) -> Result<f64> {
    euclidean(&a.features, &b.features)
}

pub fn dist_dtw(a: &ShapeVector, b: &ShapeVector) -> Result<f64> {
    dtw(&a.features, &b.features)
}

fn interpolate(values: &[f64], t: f64) -> f64 {
    let last = values.len() - 1;
    if t <= 0.0 {
        return values[0];
    }
    if t >= last as f64 {
        return values[last];
    }
    let i = libm::floor(t) as usize;
    let frac = t - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Slopes of `strips` equal-width strips over the time axis `[0, n - 1]`,
/// with strip endpoints interpolated linearly between samples.
pub fn slopes_features(values: &[f64], strips: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 || strips == 0 || strips > n - 1 {
        return Err(Error::DegenerateStrips { points: n, strips });
    }
    let span = (n - 1) as f64;
    let width = span / strips as f64;
    let at = |s: usize| s as f64 * span / strips as f64;
    Ok((0..strips)
        .map(|s| (interpolate(values, at(s + 1)) - interpolate(values, at(s))) / width)
        .collect())
}

/// A third of the mean event length, at least 1.
pub fn choose_strip_count(lengths: &[usize]) -> usize {
    if lengths.is_empty() {
        return 1;
    }
    let total: usize = lengths.iter().sum();
    (total / (3 * lengths.len())).max(1)
}

/// `len` points evenly spaced over the original time axis.
pub fn resample_linear(values: &[f64], len: usize) -> Vec<f64> {
    if values.len() == 1 || len == 1 {
        return alloc::vec![values[0]; len];
    }
    let span = (values.len() - 1) as f64;
    (0..len)
        .map(|i| interpolate(values, i as f64 * span / (len - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn euclidean_basics() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(
            euclidean(&[0.0; 3], &[0.0; 4]),
            Err(Error::LengthMismatch { left: 3, right: 4 })
        ));
    }

    #[test]
    fn dtw_basics() {
        assert_eq!(dtw(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(dtw(&[1.0, 5.0], &[1.0, 5.0]).unwrap(), 0.0);
        assert!(dtw(&[], &[1.0]).is_err());
        // one point against many: every pair is matched
        assert_eq!(dtw(&[0.0], &[1.0, 1.0, 2.0]).unwrap(), 6f64.sqrt());
    }

    #[test]
    fn slopes_examples() {
        let ramp: Vec<f64> = (0..6).map(f64::from).collect();
        assert_eq!(slopes_features(&ramp, 2).unwrap(), vec![1.0, 1.0]);
        assert_eq!(slopes_features(&[2.5; 7], 3).unwrap(), vec![0.0; 3]);
        let d = euclidean(&slopes_features(&ramp, 2).unwrap(), &[0.0, 0.0]).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn slopes_interpolate_inside_days() {
        // tent 0,2,0 over 3 strips of width 2/3
        let s = slopes_features(&[0.0, 2.0, 0.0], 2).unwrap();
        assert_eq!(s, vec![2.0, -2.0]);
        assert!(matches!(
            slopes_features(&[0.0, 2.0, 0.0], 3),
            Err(Error::DegenerateStrips { points: 3, strips: 3 })
        ));
        assert!(slopes_features(&[1.0], 1).is_err());
        assert!(slopes_features(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn strip_count_rule() {
        assert_eq!(choose_strip_count(&[9, 9, 9]), 3);
        assert_eq!(choose_strip_count(&[7, 42]), 8);
        assert_eq!(choose_strip_count(&[2]), 1);
    }

    #[test]
    fn resampling_keeps_endpoints() {
        let r = resample_linear(&[0.0, 10.0], 6);
        assert_eq!(r, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(resample_linear(&[3.0], 3), vec![3.0; 3]);
        assert_eq!(resample_linear(&[1.0, 2.0, 3.0], 3), vec![1.0, 2.0, 3.0]);
    }
}
