//! Small estimators used to summarise replicated runs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Sample mean with a two-sided 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// `None` for fewer than two samples.
    pub ci95: Option<f64>,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Option<Estimate> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let ci95 = (n >= 2).then(|| {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("dof >= 1")
                .inverse_cdf(0.975);
            t * (var / n as f64).sqrt()
        });
        Some(Estimate { mean, ci95, n })
    }

    pub fn relative_error(&self, reference: f64) -> f64 {
        (self.mean - reference).abs() / reference.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of non-negative counts against the geometric law
/// `P(k) = q^k (1 - q)`. Bins run `0, 1, ...` while the expected count stays at
/// least 5; the remaining tail is pooled into the last bin. One degree of
/// freedom is spent on the estimated `q`.
pub fn geometric_chi_square(samples: &[u64], q: f64) -> Option<ChiSquareTest> {
    let n = samples.len() as f64;
    if samples.is_empty() || !(0.0..1.0).contains(&q) {
        return None;
    }
    let mut bins = 0usize;
    while n * q.powi(bins as i32 + 1) >= 5.0 && n * q.powi(bins as i32 + 1) * (1.0 - q) >= 5.0 {
        bins += 1;
    }
    // bins 0..bins are exact, bin `bins` is the tail k >= bins
    let mut observed = vec![0u64; bins + 1];
    for &s in samples {
        observed[(s as usize).min(bins)] += 1;
    }
    let statistic: f64 = observed
        .iter()
        .enumerate()
        .map(|(k, &o)| {
            let p = if k < bins {
                q.powi(k as i32) * (1.0 - q)
            } else {
                q.powi(k as i32)
            };
            let e = n * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = bins.saturating_sub(1).max(1);
    let p_value = 1.0 - ChiSquared::new(dof as f64).ok()?.cdf(statistic);
    Some(ChiSquareTest {
        statistic,
        dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant_samples() {
        let e = Estimate::from_samples(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((e.mean, e.ci95, e.n), (2.0, Some(0.0), 3));
        assert!(Estimate::from_samples(&[]).is_none());
        assert_eq!(Estimate::from_samples(&[1.0]).unwrap().ci95, None);
    }

    #[test]
    fn estimate_ci_uses_student_t() {
        // sd = 1, n = 4, t_{0.975,3} = 3.182446...
        let e = Estimate::from_samples(&[-1.5, -0.5, 0.5, 1.5]).unwrap();
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.ci95.unwrap() - 3.182446305284263 * sd / 2.0).abs() < 1e-9);
    }

    #[test]
    fn exact_geometric_counts_fit() {
        // 1000 samples laid out exactly as q = 0.5 expects
        let mut s = Vec::new();
        for (k, count) in [(0u64, 500), (1, 250), (2, 125), (3, 63), (4, 31), (5, 16), (6, 15)] {
            s.extend(std::iter::repeat_n(k, count));
        }
        let t = geometric_chi_square(&s, 0.5).unwrap();
        assert!(t.p_value > 0.5, "{t:?}");
        let skewed = vec![1u64; 1000];
        assert!(geometric_chi_square(&skewed, 0.5).unwrap().p_value < 1e-6);
    }
}
