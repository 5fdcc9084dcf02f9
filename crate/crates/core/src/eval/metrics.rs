use log::warn;

use crate::{Error, Result};

/// Fraction of positions where prediction and truth agree.
pub fn accuracy<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Binary ROC-AUC via the Mann–Whitney rank statistic with mid-ranks for
/// ties. `None` when either class is empty.
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n = scores.len();
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum keeps everything integral
    let mut rank2_sum_pos: u64 = 0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share the mid-rank (i+j+2)/2
        let twice_mid = (i + j + 2) as u64;
        let pos_in_group = order[i..=j].iter().filter(|&&k| positive[k]).count() as u64;
        rank2_sum_pos += twice_mid * pos_in_group;
        i = j + 1;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    // U = R_pos - p(p+1)/2, computed as (2R - p(p+1)) / 2
    let twice_u = rank2_sum_pos - p * (p + 1);
    Some(twice_u as f64 / (2 * p * q) as f64)
}

/// Per-class one-vs-rest AUCs and their macro average.
#[derive(Debug, Clone, PartialEq)]
pub struct AucReport {
    pub macro_auc: f64,
    /// `None` for classes skipped because they had no positives or negatives.
    pub per_class: Vec<Option<f64>>,
}

/// Macro one-vs-rest AUC over the columns of `probs`.
///
/// Classes without positives or without negatives are skipped with a
/// warning; if every class is skipped this is an error.
pub fn auc_ovr_macro(probs: &[Vec<f64>], truth: &[usize]) -> Result<f64> {
    auc_ovr_report(probs, truth).map(|r| r.macro_auc)
}

pub fn auc_ovr_report(probs: &[Vec<f64>], truth: &[usize]) -> Result<AucReport> {
    if probs.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: probs.len(),
            right: truth.len(),
        });
    }
    let n_classes = probs.first().map_or(0, Vec::len);
    if n_classes < 2 {
        return Err(Error::InvalidArgument(
            "AUC needs probability vectors with at least two classes".into(),
        ));
    }
    let per_class: Vec<Option<f64>> = (0..n_classes)
        .map(|c| {
            let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
            let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            let a = auc_binary(&scores, &pos);
            if a.is_none() {
                warn!("AUC: class {c} has no positives or no negatives; skipped");
            }
            a
        })
        .collect();
    let used: Vec<f64> = per_class.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::Degenerate("no class has both positives and negatives".into()));
    }
    Ok(AucReport {
        macro_auc: used.iter().sum::<f64>() / used.len() as f64,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 1], &[2, 2]).unwrap(), 0.0);
        let p = [1, 1, 1, 1, 1, 1, 1, 0, 0, 0];
        let t = [1; 10];
        assert!((accuracy(&p, &t).unwrap() - 0.7).abs() < 1e-15);
        assert!(accuracy(&[1], &[1, 2]).is_err());
        assert!(accuracy::<u8>(&[], &[]).is_err());
    }

    #[test]
    fn perfect_and_skipped_classes() {
        let probs = vec![
            vec![0.9, 0.05, 0.05],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
            vec![0.7, 0.2, 0.1],
        ];
        assert_eq!(auc_ovr_macro(&probs, &[0, 1, 2, 0]).unwrap(), 1.0);
        let r = auc_ovr_report(&probs, &[0, 1, 1, 0]).unwrap();
        assert_eq!(r.per_class[2], None);
        assert!(auc_ovr_macro(&probs, &[0, 0, 0, 0]).is_err());
    }

    #[test]
    fn random_scores_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                let c: f64 = rng.random();
                let s = a + b + c;
                vec![a / s, b / s, c / s]
            })
            .collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let auc = auc_ovr_macro(&probs, &truth).unwrap();
        assert!((auc - 0.5).abs() < 0.02, "{auc}");
    }

    #[test]
    fn all_ties_give_half() {
        assert_eq!(auc_binary(&[0.3; 6], &[true, false, true, false, false, true]), Some(0.5));
    }

    proptest! {
        #[test]
        fn invariant_under_monotone_transform(
            raw in prop::collection::vec((0u8..10, 0usize..3), 6..30)
        ) {
            let probs: Vec<Vec<f64>> = raw.iter().map(|&(s, _)| {
                let s = s as f64 / 10.0;
                vec![s, 1.0 - s, 0.5 * s]
            }).collect();
            let truth: Vec<usize> = raw.iter().map(|&(_, t)| t).collect();
            let transformed: Vec<Vec<f64>> = probs.iter()
                .map(|p| p.iter().map(|v| (3.0 * v + 1.0).ln()).collect())
                .collect();
            match (auc_ovr_macro(&probs, &truth), auc_ovr_macro(&transformed, &truth)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one side failed"),
            }
        }
    }
}
