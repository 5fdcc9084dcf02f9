//! Per-feature statistics handed to the Refiner.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{pearson_flagged, Dataset};
use crate::par;
use crate::{Error, Result};

/// Which target the feature–target correlation is measured against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum CorrelationTarget {
    /// One Pearson coefficient per class against the `label == class` indicator.
    #[default]
    OneVsRest,
    /// A single coefficient against `label != negative_class`.
    Binary { negative_class: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCorrelation {
    pub class: String,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetadata {
    pub name: String,
    /// Column index in the dataset the metadata was computed on.
    pub index: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub corr_per_class: Vec<ClassCorrelation>,
    pub corr_mean: f64,
    /// Population standard deviation of `corr_per_class`.
    pub corr_std: f64,
    /// Set when the column was constant and every correlation defaulted to 0.
    #[serde(default)]
    pub constant: bool,
}

impl FeatureMetadata {
    pub fn correlation(&self, class: &str) -> Option<f64> {
        self.corr_per_class
            .iter()
            .find(|c| c.class == class)
            .map(|c| c.r)
    }
}

/// Pearson correlation between a feature column and each class indicator.
///
/// A constant column yields all-zero correlations and `constant = true`.
pub fn one_vs_rest_correlations(
    d: &Dataset,
    feature_index: usize,
) -> Result<(Vec<ClassCorrelation>, bool)> {
    if feature_index >= d.n_features() {
        return Err(Error::InvalidArgument(format!(
            "feature index {feature_index} out of range for {} features",
            d.n_features()
        )));
    }
    if d.n_classes() < 2 {
        return Err(Error::InvalidArgument(
            "feature-target correlation needs at least two classes".into(),
        ));
    }
    let col = d.column(feature_index);
    let mut constant = false;
    let out = d
        .class_names()
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let ind: Vec<f64> = d
                .targets()
                .iter()
                .map(|&t| if t == c { 1.0 } else { 0.0 })
                .collect();
            let (r, flag) = pearson_flagged(&col, &ind)?;
            constant |= flag && !is_constant(&ind);
            Ok(ClassCorrelation {
                class: name.clone(),
                r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((out, constant))
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

fn binary_correlation(
    d: &Dataset,
    feature_index: usize,
    negative_class: &str,
) -> Result<(Vec<ClassCorrelation>, bool)> {
    let neg = d
        .class_names()
        .iter()
        .position(|c| c == negative_class)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("class `{negative_class}` not in dataset"))
        })?;
    let col = d.column(feature_index);
    let ind: Vec<f64> = d
        .targets()
        .iter()
        .map(|&t| if t == neg { 0.0 } else { 1.0 })
        .collect();
    let (r, constant) = pearson_flagged(&col, &ind)?;
    Ok((
        vec![ClassCorrelation {
            class: format!("not {negative_class}"),
            r,
        }],
        constant,
    ))
}

fn mean_and_population_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Metadata for every feature, in column order.
pub fn compute_metadata(d: &Dataset) -> Result<Vec<FeatureMetadata>> {
    compute_metadata_with(d, &CorrelationTarget::OneVsRest, par::parallel_available())
}

pub fn compute_metadata_with(
    d: &Dataset,
    target: &CorrelationTarget,
    parallel: bool,
) -> Result<Vec<FeatureMetadata>> {
    par::map_range(d.n_features(), parallel, |j| {
        let (corr_per_class, constant) = match target {
            CorrelationTarget::OneVsRest => one_vs_rest_correlations(d, j)?,
            CorrelationTarget::Binary { negative_class } => {
                binary_correlation(d, j, negative_class)?
            }
        };
        let (mean, std) = mean_and_population_std(&d.column(j));
        let rs: Vec<f64> = corr_per_class.iter().map(|c| c.r).collect();
        let (corr_mean, corr_std) = mean_and_population_std(&rs);
        Ok(FeatureMetadata {
            name: d.feature_names()[j].clone(),
            index: j,
            mean,
            std,
            corr_per_class,
            corr_mean,
            corr_std,
            constant,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_metadata(meta: &[FeatureMetadata], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = serde_json::to_string_pretty(meta)?;
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn read_metadata(path: impl AsRef<Path>) -> Result<Vec<FeatureMetadata>> {
    let path = path.as_ref();
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&body)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::from_columns;
    use crate::data::standardize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight textbook Pearson, kept separate from the implementation.
    fn oracle_r(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn indicator_feature_correlates_perfectly() {
        let labels = ["A", "B", "A", "C", "B", "A"];
        let ind: Vec<f64> = labels.iter().map(|&l| (l == "A") as u8 as f64).collect();
        let d = from_columns(&["f"], &[ind], &labels);
        let (c, constant) = one_vs_rest_correlations(&d, 0).unwrap();
        assert!(!constant);
        assert!((c[0].r - 1.0).abs() < 1e-12);
        assert_eq!(c[0].class, "A");
    }

    #[test]
    fn constant_feature_has_zero_correlations() {
        let labels = ["A", "B", "A", "C"];
        let d = from_columns(&["f"], &[vec![3.0; 4]], &labels);
        let (c, constant) = one_vs_rest_correlations(&d, 0).unwrap();
        assert!(constant);
        assert!(c.iter().all(|x| x.r == 0.0));
        assert!(one_vs_rest_correlations(&d, 1).is_err());
    }

    #[test]
    fn three_class_correlations_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let classes = ["Benign", "BruteForce", "Mirai"];
        let labels: Vec<&str> = (0..300).map(|i| classes[i % 3]).collect();
        let col: Vec<f64> = labels
            .iter()
            .map(|&l| 2.0 * (l == "Mirai") as u8 as f64 + rng.random::<f64>() - 0.5)
            .collect();
        let d = from_columns(&["f"], std::slice::from_ref(&col), &labels);
        let (c, _) = one_vs_rest_correlations(&d, 0).unwrap();
        for cc in &c {
            let ind: Vec<f64> = labels.iter().map(|&l| (l == cc.class) as u8 as f64).collect();
            assert!((cc.r - oracle_r(&col, &ind)).abs() < 1e-12);
        }
        assert!(c[2].r > 0.8);
    }

    fn random_dataset(seed: u64, p: usize, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = ["a", "b", "c"];
        let labels: Vec<&str> = (0..n).map(|_| classes[rng.random_range(0..3)]).collect();
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.random::<f64>() * 10.0).collect())
            .collect();
        let names: Vec<String> = (0..p).map(|i| format!("f{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        from_columns(&refs, &cols, &labels)
    }

    #[test]
    fn summary_matches_recomputation() {
        let d = random_dataset(5, 10, 120);
        let meta = compute_metadata(&d).unwrap();
        assert_eq!(meta.len(), 10);
        for m in &meta {
            let rs: Vec<f64> = m.corr_per_class.iter().map(|c| c.r).collect();
            let mean = rs.iter().sum::<f64>() / rs.len() as f64;
            let var = rs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / rs.len() as f64;
            assert!((m.corr_mean - mean).abs() < 1e-12);
            assert!((m.corr_std - var.sqrt()).abs() < 1e-12);
        }
        let seq = compute_metadata_with(&d, &CorrelationTarget::OneVsRest, false).unwrap();
        assert_eq!(seq, meta);
    }

    #[test]
    fn standardized_metadata_and_single_feature() {
        let d = random_dataset(6, 3, 80);
        let (s, _, _) = standardize(&d);
        for m in compute_metadata(&s).unwrap() {
            assert!(m.mean.abs() < 1e-9);
            assert!((m.std - 1.0).abs() < 1e-9);
        }
        let one = random_dataset(7, 1, 30);
        assert_eq!(compute_metadata(&one).unwrap().len(), 1);
    }

    #[test]
    fn binary_target_mode() {
        let d = random_dataset(8, 2, 60);
        let m = compute_metadata_with(
            &d,
            &CorrelationTarget::Binary {
                negative_class: "a".into(),
            },
            false,
        )
        .unwrap();
        assert_eq!(m[0].corr_per_class.len(), 1);
        assert_eq!(m[0].corr_std, 0.0);
        assert!(compute_metadata_with(
            &d,
            &CorrelationTarget::Binary {
                negative_class: "zzz".into()
            },
            false
        )
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn invariant_under_row_permutation_and_scaling(seed in any::<u64>(), k in 0.01f64..100.0) {
            let d = random_dataset(seed, 3, 50);
            let base = compute_metadata(&d).unwrap();
            let mut rows: Vec<usize> = (0..50).collect();
            rows.reverse();
            rows.swap(3, 17);
            let perm = compute_metadata(&d.select_rows(&rows)).unwrap();
            for (a, b) in base.iter().zip(&perm) {
                prop_assert!((a.mean - b.mean).abs() < 1e-12);
                prop_assert!((a.std - b.std).abs() < 1e-12);
                prop_assert!((a.corr_mean - b.corr_mean).abs() < 1e-12);
                prop_assert!((a.corr_std - b.corr_std).abs() < 1e-12);
            }
            let scaled_col: Vec<f64> = d.column(0).iter().map(|v| v * k).collect();
            let labels = d.labels();
            let lrefs: Vec<&str> = labels.iter().map(String::as_str).collect();
            let s = from_columns(&["f0"], &[scaled_col], &lrefs);
            let (c, _) = one_vs_rest_correlations(&s, 0).unwrap();
            for (x, y) in c.iter().zip(&base[0].corr_per_class) {
                prop_assert!((x.r - y.r).abs() < 1e-12);
            }
        }
    }
}
