//! Paired tests, effect sizes, speedups and relative deltas.

mod special;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use special::{ln_gamma, reg_inc_beta, student_t_cdf, student_t_two_sided_p};

/// Index-aligned paired observations; differences are taken as `a − b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSamples {
    pub labels: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedSamples {
    pub fn new(labels: Vec<String>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let s = Self { labels, a, b };
        s.validate()?;
        Ok(s)
    }

    /// Labels are optional; when given they must match the sample count.
    pub fn unlabeled(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::new(Vec::new(), a, b)
    }

    fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(Error::LengthMismatch {
                left: self.a.len(),
                right: self.b.len(),
            });
        }
        if !self.labels.is_empty() && self.labels.len() != self.a.len() {
            return Err(Error::LengthMismatch {
                left: self.labels.len(),
                right: self.a.len(),
            });
        }
        if self.a.len() < 2 {
            return Err(Error::InvalidArgument("paired samples need at least two pairs".into()));
        }
        if self.a.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("paired samples must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p_two_sided: f64,
    pub mean_diff: f64,
    /// Differences had zero variance but nonzero mean: `t = ±∞`, `p = 0`.
    pub degenerate: bool,
}

/// Paired Student's t-test on `a − b`.
pub fn paired_t_test(s: &PairedSamples) -> Result<TTest> {
    s.validate()?;
    let d = s.differences();
    let n = d.len();
    let (mean, sd) = mean_sd(&d);
    let df = n - 1;
    if sd == 0.0 {
        if mean == 0.0 {
            return Err(Error::Degenerate("all paired differences are zero".into()));
        }
        return Ok(TTest {
            t: mean.signum() * f64::INFINITY,
            df,
            p_two_sided: 0.0,
            mean_diff: mean,
            degenerate: true,
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    Ok(TTest {
        t,
        df,
        p_two_sided: student_t_two_sided_p(t, df as f64),
        mean_diff: mean,
        degenerate: false,
    })
}

/// `mean(a − b) / sd(a − b)` with the `n − 1` standard deviation.
pub fn cohens_d_paired(s: &PairedSamples) -> Result<f64> {
    s.validate()?;
    let (mean, sd) = mean_sd(&s.differences());
    if sd == 0.0 {
        return Err(Error::Degenerate(
            "Cohen's d is undefined for zero-variance differences".into(),
        ));
    }
    Ok(mean / sd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectSize {
    Negligible,
    Small,
    Medium,
    Large,
}

impl fmt::Display for EffectSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectSize::Negligible => "negligible",
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        })
    }
}

/// Bands on `|d|` with lower-inclusive bounds: `[0, 0.2)`, `[0.2, 0.5)`,
/// `[0.5, 0.8)`, `[0.8, ∞)`.
pub fn effect_size_label(d: f64) -> Result<EffectSize> {
    if !d.is_finite() {
        return Err(Error::InvalidArgument(format!("effect size must be finite, got {d}")));
    }
    let a = d.abs();
    Ok(if a < 0.2 {
        EffectSize::Negligible
    } else if a < 0.5 {
        EffectSize::Small
    } else if a < 0.8 {
        EffectSize::Medium
    } else {
        EffectSize::Large
    })
}

/// `t_base / t_new`.
pub fn speedup(t_base: f64, t_new: f64) -> Result<f64> {
    if !(t_base > 0.0 && t_new > 0.0) || !t_base.is_finite() || !t_new.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "speedup needs positive times, got {t_base} and {t_new}"
        )));
    }
    Ok(t_base / t_new)
}

/// `100 · (new − base) / base`.
pub fn delta_percent(base: f64, new: f64) -> Result<f64> {
    if base == 0.0 || !base.is_finite() || !new.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "delta_percent needs a finite nonzero base, got {base}"
        )));
    }
    Ok(100.0 * (new - base) / base)
}

/// Mean of the per-pair `delta_percent` values, e.g. one pair per
/// classifier.
pub fn mean_delta_percent(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no pairs to average".into()));
    }
    let mut sum = 0.0;
    for &(b, n) in pairs {
        sum += delta_percent(b, n)?;
    }
    Ok(sum / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairs(a: &[f64], b: &[f64]) -> PairedSamples {
        PairedSamples::unlabeled(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn shifted_pairs_are_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 0.5 + rng.random_range(-0.01..0.01)).collect();
        let r = paired_t_test(&pairs(&a, &b)).unwrap();
        assert!(r.p_two_sided < 0.001);
        assert_eq!(r.df, 29);
    }

    #[test]
    fn single_difference_sets_sign() {
        let b = [1.0, 2.0, 3.0, 4.0];
        let mut a = b;
        a[2] -= 0.5;
        let r = paired_t_test(&pairs(&a, &b)).unwrap();
        assert!(r.t < 0.0);
    }

    #[test]
    fn zero_variance_handling() {
        let b = [1.0, 2.0, 3.0];
        let a = [2.0, 3.0, 4.0];
        let r = paired_t_test(&pairs(&a, &b)).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.p_two_sided, 0.0);
        assert!(cohens_d_paired(&pairs(&a, &b)).is_err());
        assert!(paired_t_test(&pairs(&b, &b)).is_err());
    }

    #[test]
    fn cohens_d_examples() {
        let d = cohens_d_paired(&pairs(&[1.0, -1.0, 1.0, -1.0], &[0.0; 4])).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn bands_are_lower_inclusive() {
        assert_eq!(effect_size_label(-0.87).unwrap(), EffectSize::Large);
        assert_eq!(effect_size_label(0.19).unwrap(), EffectSize::Negligible);
        assert_eq!(effect_size_label(0.2).unwrap(), EffectSize::Small);
        assert_eq!(effect_size_label(0.5).unwrap(), EffectSize::Medium);
        assert_eq!(effect_size_label(0.8).unwrap(), EffectSize::Large);
        assert!(effect_size_label(f64::NAN).is_err());
    }

    #[test]
    fn speedup_and_delta() {
        assert_eq!(speedup(0.2, 0.2).unwrap(), 1.0);
        assert!(speedup(0.0, 1.0).is_err());
        assert!(speedup(1.0, -1.0).is_err());
        assert_eq!(delta_percent(0.5, 0.5).unwrap(), 0.0);
        assert!(delta_percent(0.0, 0.5).is_err());
        assert!((mean_delta_percent(&[(1.0, 1.1), (1.0, 0.9)]).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn swapping_sides_negates_t(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..20)
        ) {
            let a: Vec<f64> = raw.iter().map(|p| p.0).collect();
            let b: Vec<f64> = raw.iter().map(|p| p.1).collect();
            let ab = paired_t_test(&pairs(&a, &b));
            let ba = paired_t_test(&pairs(&b, &a));
            if let (Ok(x), Ok(y)) = (ab, ba) {
                prop_assert_eq!(x.t, -y.t);
                prop_assert_eq!(x.p_two_sided, y.p_two_sided);
            }
        }

        #[test]
        fn d_invariant_to_common_shift(
            raw in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..20),
            shift in -100.0f64..100.0,
        ) {
            let a: Vec<f64> = raw.iter().map(|p| p.0).collect();
            let b: Vec<f64> = raw.iter().map(|p| p.1).collect();
            let a2: Vec<f64> = a.iter().map(|x| x + shift).collect();
            let b2: Vec<f64> = b.iter().map(|x| x + shift).collect();
            if let (Ok(x), Ok(y)) = (cohens_d_paired(&pairs(&a, &b)), cohens_d_paired(&pairs(&a2, &b2))) {
                prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn p_decreases_in_abs_t(t1 in 0.0f64..20.0, dt in 0.0f64..5.0, df in 1usize..60) {
            let p1 = student_t_two_sided_p(t1, df as f64);
            let p2 = student_t_two_sided_p(t1 + dt, df as f64);
            prop_assert!(p2 <= p1 + 1e-15);
        }
    }
}
