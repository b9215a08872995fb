//! Summary statistics and tests used to compare runs.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn stderr(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Mean of the last `fraction` of `xs` (at least one element).
pub fn tail_mean(xs: &[f64], fraction: f64) -> f64 {
    let k = ((xs.len() as f64 * fraction).ceil() as usize).clamp(1, xs.len().max(1));
    mean(&xs[xs.len().saturating_sub(k)..])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for "the first sample has the larger mean".
    pub p_greater: f64,
}

fn upper_tail(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    1.0 - StudentsT::new(0.0, 1.0, df).expect("df > 0").cdf(t)
}

/// Paired t-test on `a[i] - b[i]`. Identical nonzero differences give an
/// infinite statistic.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> TTest {
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 2, "need two pairs");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, se) = (mean(&d), stderr(&d));
    let t = if se == 0.0 {
        if m == 0.0 { f64::NAN } else { m.signum() * f64::INFINITY }
    } else {
        m / se
    };
    let df = (d.len() - 1) as f64;
    TTest { t, df, p_greater: upper_tail(t, df) }
}

/// Welch's unequal-variance t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> TTest {
    assert!(a.len() >= 2 && b.len() >= 2, "need two values per sample");
    let (va, vb) = (std_dev(a).powi(2) / a.len() as f64, std_dev(b).powi(2) / b.len() as f64);
    let diff = mean(a) - mean(b);
    let se = (va + vb).sqrt();
    if se == 0.0 {
        let t = if diff == 0.0 { f64::NAN } else { diff.signum() * f64::INFINITY };
        return TTest { t, df: (a.len() + b.len() - 2) as f64, p_greater: upper_tail(t, 1.0) };
    }
    let df = (va + vb).powi(2) / (va.powi(2) / (a.len() - 1) as f64 + vb.powi(2) / (b.len() - 1) as f64);
    let t = diff / se;
    TTest { t, df, p_greater: upper_tail(t, df) }
}

/// Ranks from 1 with ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut out = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            out[k] = avg;
        }
        start = end;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation; NaN when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    pearson(&ranks(x), &ranks(y))
}

/// One-sided p-value for a negative rank correlation: the share of all
/// orderings of `y` whose Spearman correlation with `x` is at most the observed
/// one. Exact, so only for short series.
pub fn spearman_p_less(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() <= 9, "exact test enumerates n! orderings");
    let observed = spearman(x, y);
    if observed.is_nan() {
        return 1.0;
    }
    let mut perm = y.to_vec();
    let (mut below, mut total) = (0u64, 0u64);
    permute(&mut perm, 0, &mut |p| {
        total += 1;
        below += (spearman(x, p) <= observed + 1e-12) as u64;
    });
    below as f64 / total as f64
}

fn permute(v: &mut [f64], k: usize, visit: &mut dyn FnMut(&[f64])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    /// First index of the window where the trace settles.
    pub index: usize,
    /// Mean of the trace from `index` on.
    pub level: f64,
}

/// Splits `trace` into non-overlapping windows and returns the first window
/// after which every step between consecutive window means stays within
/// `tol * |final window mean|`. `None` when fewer than two windows fit.
pub fn plateau(trace: &[f64], window: usize, tol: f64) -> Option<Plateau> {
    assert!(window > 0);
    let means: Vec<f64> = trace.chunks_exact(window).map(mean).collect();
    if means.len() < 2 {
        return None;
    }
    let limit = tol * means[means.len() - 1].abs();
    let mut k = means.len() - 1;
    while k > 0 && (means[k] - means[k - 1]).abs() <= limit {
        k -= 1;
    }
    let index = k * window;
    Some(Plateau { index, level: mean(&trace[index..]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn summary_values() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&xs), 5.0);
        assert!((std_dev(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(tail_mean(&xs, 0.25), 8.0);
        assert_eq!(tail_mean(&xs, 0.01), 9.0);
    }

    #[test]
    fn paired_test_reference() {
        // d = [1, 2, 3]: mean 2, sd 1, t = 2 * sqrt(3), df 2; p = 0.5 - t / (2 sqrt(t^2 + 2)).
        let a = [2.0, 4.0, 6.0];
        let b = [1.0, 2.0, 3.0];
        let r = paired_t_test(&a, &b);
        let t = 2.0 * 3f64.sqrt();
        assert!((r.t - t).abs() < 1e-12);
        let p = 0.5 - t / (2.0 * (t * t + 2.0).sqrt());
        assert!((r.p_greater - p).abs() < 1e-9, "{} {p}", r.p_greater);
        assert_eq!(paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).p_greater, 0.0);
        assert_eq!(paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).p_greater, 1.0);
    }

    #[test]
    fn welch_matches_pooled_for_equal_sizes_and_variances() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [0.0, 1.0, 2.0, 3.0];
        let r = welch_t_test(&a, &b);
        // Pooled sd = sqrt(5/3), se = sd * sqrt(1/2).
        let t = 1.0 / ((5.0f64 / 3.0) * 0.5).sqrt();
        assert!((r.t - t).abs() < 1e-12);
        assert!((r.df - 6.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties_and_order() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 90.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // Textbook case: sum d^2 = 2 over n = 5 gives 1 - 6*2/(5*24) = 0.9.
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 3.0, 4.0, 5.0]) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn exact_spearman_p() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman_p_less(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]) - 1.0 / 120.0).abs() < 1e-12);
        assert_eq!(spearman_p_less(&x, &x), 1.0);
        assert_eq!(spearman_p_less(&x, &[1.0; 5]), 1.0);
    }

    #[test]
    fn plateau_of_step() {
        let mut trace = vec![0.0; 100];
        trace.extend(vec![1.0; 300]);
        let p = plateau(&trace, 50, 0.02).unwrap();
        assert_eq!(p.index, 100);
        assert_eq!(p.level, 1.0);
        assert!(plateau(&trace[..60], 50, 0.1).is_none());
    }

    proptest! {
        #[test]
        fn spearman_is_rank_invariant(xs in prop::collection::vec(-1e3f64..1e3, 3..30)) {
            let ys: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0).collect();
            let r = spearman(&xs, &ys);
            if std_dev(&xs) > 0.0 {
                prop_assert!((r - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn plateau_of_constant_is_start(c in -5.0f64..5.0, n in 2usize..20) {
            let p = plateau(&vec![c; n * 10], 10, 0.01).unwrap();
            prop_assert_eq!(p.index, 0);
        }
    }
}
