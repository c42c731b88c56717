//! Small statistics toolkit for the acceptance and study harnesses.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{DomiError, Result};
use crate::rng::SeededRng;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by `n`); zero for fewer than two values.
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Enumeration limit for exact permutation tests.
const EXACT_LIMIT: u64 = 250_000;
const MONTE_CARLO_PERMUTATIONS: usize = 100_000;

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u64::MAX,
        };
    }
    acc
}

/// One-sided two-sample permutation test of `mean(a) > mean(b)`.
///
/// Exact over all relabelings when there are at most 250 000 of them,
/// otherwise Monte Carlo with 100 000 seeded relabelings (add-one p-value).
pub fn permutation_test_greater(a: &[f64], b: &[f64], seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(DomiError::InvalidArgument(
            "permutation test needs two nonempty samples".into(),
        ));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total: f64 = pooled.iter().sum();
    let (na, nb) = (a.len(), b.len());
    let stat = |sum_a: f64| sum_a / na as f64 - (total - sum_a) / nb as f64;
    let observed = stat(a.iter().sum());
    let tol = 1e-12 * (1.0 + observed.abs());
    let n = pooled.len();

    if binomial(n as u64, na as u64) <= EXACT_LIMIT {
        let mut hits = 0u64;
        let mut count = 0u64;
        let mut combo: Vec<usize> = (0..na).collect();
        loop {
            let s: f64 = combo.iter().map(|&i| pooled[i]).sum();
            count += 1;
            if stat(s) >= observed - tol {
                hits += 1;
            }
            let mut i = na;
            loop {
                if i == 0 {
                    return Ok(hits as f64 / count as f64);
                }
                i -= 1;
                if combo[i] < n - na + i {
                    combo[i] += 1;
                    for j in i + 1..na {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    let mut rng = SeededRng::new(seed);
    let mut work = pooled.clone();
    let mut hits = 0usize;
    for _ in 0..MONTE_CARLO_PERMUTATIONS {
        rng.partial_shuffle(&mut work, na);
        if stat(work[..na].iter().sum()) >= observed - tol {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (MONTE_CARLO_PERMUTATIONS + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

fn chi_square_tail(statistic: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Ok(1.0);
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| DomiError::InvalidArgument(e.to_string()))?;
    Ok(dist.sf(statistic))
}

/// Goodness of fit of `observed` counts to `probs` (categories with zero
/// probability must have zero counts and are dropped).
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() {
        return Err(DomiError::DimensionMismatch {
            expected: probs.len(),
            got: observed.len(),
        });
    }
    let n: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return Err(DomiError::InvalidArgument(
                    "observed count in a zero-probability category".into(),
                ));
            }
            continue;
        }
        let e = p * n as f64;
        statistic += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let df = cells.saturating_sub(1);
    Ok(ChiSquare {
        statistic,
        df,
        p_value: chi_square_tail(statistic, df)?,
    })
}

/// Homogeneity of two count vectors over the same categories.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquare> {
    if a.len() != b.len() {
        return Err(DomiError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(DomiError::InvalidArgument("empty sample".into()));
    }
    let n = na + nb;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        let ea = col * na / n;
        let eb = col * nb / n;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
        cells += 1;
    }
    let df = cells.saturating_sub(1);
    Ok(ChiSquare {
        statistic,
        df,
        p_value: chi_square_tail(statistic, df)?,
    })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(DomiError::InvalidArgument(
            "correlation needs two equal-length samples of size ≥ 2".into(),
        ));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(DomiError::Degenerate("constant sample".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson(&ranks(x), &ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_examples() {
        assert_eq!(population_variance(&[3.0]), 0.0);
        assert!((population_variance(&[1.0, 2.0, 3.0, 4.0]) - 1.25).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn exact_permutation_extremes() {
        let a = [10.0, 11.0, 12.0];
        let b = [1.0, 2.0, 3.0];
        // Only the observed split reaches the observed difference: 1 / C(6,3).
        let p = permutation_test_greater(&a, &b, 0).unwrap();
        assert!((p - 0.05).abs() < 1e-12);
        assert_eq!(permutation_test_greater(&b, &a, 0).unwrap(), 1.0);
    }

    #[test]
    fn monte_carlo_permutation_is_close_to_null() {
        let mut rng = SeededRng::new(3);
        let a: Vec<f64> = (0..30).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..30).map(|_| rng.normal() + 3.0).collect();
        assert!(permutation_test_greater(&b, &a, 1).unwrap() < 1e-3);
        assert!(permutation_test_greater(&a, &b, 1).unwrap() > 0.99);
    }

    #[test]
    fn chi_square_known_values() {
        let r = chi_square_gof(&[50, 50], &[0.5, 0.5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        // 3.841 is the 95% point of χ²(1).
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.0455).abs() < 1e-3);
        assert!(chi_square_gof(&[1, 0], &[0.0, 1.0]).is_err());
        let h = chi_square_homogeneity(&[10, 20, 0], &[20, 40, 0]).unwrap();
        assert!(h.statistic.abs() < 1e-12);
        assert_eq!(h.df, 1);
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }
}
