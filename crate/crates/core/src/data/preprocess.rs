//! Cleaning, collinearity pruning, standardization, undersampling, splitting.

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassDistribution, Dataset};
use crate::par;
use crate::{Error, Result};

/// Sample Pearson correlation; 0 when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    pearson_flagged(x, y).map(|(r, _)| r)
}

/// Like [`pearson`], also reporting whether the constant-input convention
/// was applied.
pub fn pearson_flagged(x: &[f64], y: &[f64]) -> Result<(f64, bool)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "pearson needs at least two observations".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok((0.0, true));
    }
    Ok(((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0), false))
}

fn is_constant(col: &[f64]) -> bool {
    col.windows(2).all(|w| w[0] == w[1])
}

/// Drops every column whose values are all identical.
pub fn drop_constant_columns(d: &Dataset) -> (Dataset, Vec<String>) {
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for c in 0..d.n_features() {
        if is_constant(&d.column(c)) {
            warn!("dropping constant column `{}`", d.feature_names()[c]);
            dropped.push(d.feature_names()[c].clone());
        } else {
            keep.push(c);
        }
    }
    (d.select_feature_indices(&keep), dropped)
}

/// One entry of the collinearity removal log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollinearRemoval {
    pub kept: String,
    pub dropped: String,
    pub abs_r: f64,
}

/// Absolute correlation matrix (upper triangle filled, row-major `d × d`).
fn abs_correlations(d: &Dataset, parallel: bool) -> Vec<f64> {
    let p = d.n_features();
    let n = d.n_rows();
    let centered: Vec<(Vec<f64>, f64)> = par::map_range(p, parallel, |c| {
        let col = d.column(c);
        let m = col.iter().sum::<f64>() / n as f64;
        let cen: Vec<f64> = col.iter().map(|v| v - m).collect();
        let norm = cen.iter().map(|v| v * v).sum::<f64>().sqrt();
        (cen, norm)
    });
    let rows: Vec<Vec<f64>> = par::map_range(p, parallel, |i| {
        let mut row = vec![0.0; p];
        let (ci, ni) = &centered[i];
        for (j, slot) in row.iter_mut().enumerate().skip(i + 1) {
            let (cj, nj) = &centered[j];
            if *ni == 0.0 || *nj == 0.0 {
                continue;
            }
            let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
            *slot = (dot / (ni * nj)).abs().min(1.0);
        }
        row
    });
    rows.concat()
}

/// Removes one member of every pair with `|r| > threshold`.
///
/// Columns are visited in order; a column is dropped when its correlation
/// with an already-retained lower-index column exceeds the threshold, so the
/// higher-index member of a pair always goes. The log names the first
/// retained partner that triggered the drop.
pub fn prune_collinear(d: &Dataset, threshold: f64) -> Result<(Dataset, Vec<CollinearRemoval>)> {
    prune_collinear_with(d, threshold, par::parallel_available())
}

pub fn prune_collinear_with(
    d: &Dataset,
    threshold: f64,
    parallel: bool,
) -> Result<(Dataset, Vec<CollinearRemoval>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "collinearity threshold must be in (0, 1], got {threshold}"
        )));
    }
    let p = d.n_features();
    let corr = abs_correlations(d, parallel);
    let mut kept: Vec<usize> = Vec::with_capacity(p);
    let mut log = Vec::new();
    for j in 0..p {
        match kept.iter().find(|&&i| corr[i * p + j] > threshold) {
            Some(&i) => log.push(CollinearRemoval {
                kept: d.feature_names()[i].clone(),
                dropped: d.feature_names()[j].clone(),
                abs_r: corr[i * p + j],
            }),
            None => kept.push(j),
        }
    }
    if !log.is_empty() {
        info!("collinearity pruning removed {} feature(s)", log.len());
    }
    Ok((d.select_feature_indices(&kept), log))
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerParams {
    fn columns_for(&self, d: &Dataset) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|n| {
                d.feature_index(n).ok_or_else(|| {
                    Error::InvalidArgument(format!("scaler feature `{n}` missing from dataset"))
                })
            })
            .collect()
    }

    /// Applies `(x - mean) / std` to the scaler's columns of `d`.
    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        let cols = self.columns_for(d)?;
        let sub = d.select_feature_indices(&cols);
        let mut m = sub.matrix().clone();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                m.set(r, c, (m.get(r, c) - self.mean[c]) / self.std[c]);
            }
        }
        Ok(sub.with_matrix(self.feature_names.clone(), m))
    }

    /// Undoes [`ScalerParams::apply`].
    pub fn inverse_apply(&self, d: &Dataset) -> Result<Dataset> {
        let cols = self.columns_for(d)?;
        let sub = d.select_feature_indices(&cols);
        let mut m = sub.matrix().clone();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                m.set(r, c, m.get(r, c) * self.std[c] + self.mean[c]);
            }
        }
        Ok(sub.with_matrix(self.feature_names.clone(), m))
    }
}

/// Standardizes every column to mean 0 and population std 1.
///
/// Constant columns are dropped (with a warning) first; their names are
/// returned alongside the fitted parameters.
pub fn standardize(d: &Dataset) -> (Dataset, ScalerParams, Vec<String>) {
    let (d, dropped) = drop_constant_columns(d);
    let n = d.n_rows() as f64;
    let (mean, std): (Vec<f64>, Vec<f64>) = (0..d.n_features())
        .map(|c| {
            let col = d.column(c);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            (m, var.sqrt())
        })
        .unzip();
    let params = ScalerParams {
        feature_names: d.feature_names().to_vec(),
        mean,
        std,
    };
    let out = params
        .apply(&d)
        .expect("scaler fitted on this dataset covers all of its columns");
    (out, params, dropped)
}

/// Randomly shrinks the single largest class to the size of the smallest.
///
/// All other classes are left untouched and surviving rows keep their
/// original relative order.
pub fn undersample_majority(d: &Dataset, seed: u64) -> Dataset {
    let counts = d.class_counts();
    let present: Vec<(usize, usize)> = counts
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, n)| n > 0)
        .collect();
    if present.len() < 2 {
        return d.clone();
    }
    let min = present.iter().map(|&(_, n)| n).min().unwrap_or(0);
    // first class in class order wins a tie for largest
    let (major, max) = present
        .iter()
        .copied()
        .fold((usize::MAX, 0), |acc, (c, n)| if n > acc.1 { (c, n) } else { acc });
    if max == min {
        return d.clone();
    }
    let mut major_rows: Vec<usize> = (0..d.n_rows())
        .filter(|&r| d.targets()[r] == major)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    major_rows.shuffle(&mut rng);
    let mut keep_major = vec![false; d.n_rows()];
    for &r in &major_rows[..min] {
        keep_major[r] = true;
    }
    let rows: Vec<usize> = (0..d.n_rows())
        .filter(|&r| d.targets()[r] != major || keep_major[r])
        .collect();
    info!(
        "undersampled `{}` from {max} to {min} rows",
        d.class_names()[major]
    );
    d.select_rows(&rows)
}

/// Splits rows into disjoint train and test sets.
///
/// Stratified mode shuffles each class separately and takes
/// `round(test_fraction · n_c)` rows per class (at least one on each side).
/// Both parts keep the original row order.
pub fn split(
    d: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; d.n_rows()];
    if stratified {
        for (c, name) in d.class_names().iter().enumerate() {
            let mut rows: Vec<usize> = (0..d.n_rows()).filter(|&r| d.targets()[r] == c).collect();
            if rows.is_empty() {
                continue;
            }
            if rows.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "class `{name}` has {} row(s); stratified split needs at least 2",
                    rows.len()
                )));
            }
            rows.shuffle(&mut rng);
            let k = ((test_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
            for &r in &rows[..k] {
                is_test[r] = true;
            }
        }
    } else {
        if d.n_rows() < 2 {
            return Err(Error::InvalidArgument("split needs at least 2 rows".into()));
        }
        let mut rows: Vec<usize> = (0..d.n_rows()).collect();
        rows.shuffle(&mut rng);
        let k = ((test_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        for &r in &rows[..k] {
            is_test[r] = true;
        }
    }
    let train: Vec<usize> = (0..d.n_rows()).filter(|&r| !is_test[r]).collect();
    let test: Vec<usize> = (0..d.n_rows()).filter(|&r| is_test[r]).collect();
    Ok((d.select_rows(&train), d.select_rows(&test)))
}

/// Knobs for [`preprocess`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessOptions {
    pub collinearity_threshold: f64,
    pub undersample: bool,
    pub seed: u64,
    pub test_fraction: f64,
    pub stratified: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            collinearity_threshold: 0.9,
            undersample: true,
            seed: 42,
            test_fraction: 0.2,
            stratified: true,
        }
    }
}

/// Everything the preprocessing sequence produces.
#[derive(Debug, Clone)]
pub struct PreprocessOutput {
    /// Cleaned, pruned, standardized and undersampled data (before the split).
    pub dataset: Dataset,
    pub train: Dataset,
    pub test: Dataset,
    pub dropped_constant: Vec<String>,
    pub collinear_removed: Vec<CollinearRemoval>,
    pub scaler: ScalerParams,
    pub before: ClassDistribution,
    pub after: ClassDistribution,
}

/// Runs cleaning → collinearity pruning → standardization → undersampling →
/// split, in that order.
pub fn preprocess(raw: &Dataset, opts: &PreprocessOptions) -> Result<PreprocessOutput> {
    let before = raw.distribution();
    let (clean, mut dropped_constant) = drop_constant_columns(raw);
    let (pruned, collinear_removed) = prune_collinear(&clean, opts.collinearity_threshold)?;
    let (scaled, scaler, more_constant) = standardize(&pruned);
    dropped_constant.extend(more_constant);
    let dataset = if opts.undersample {
        undersample_majority(&scaled, opts.seed)
    } else {
        scaled
    };
    let after = dataset.distribution();
    let (train, test) = split(&dataset, opts.test_fraction, opts.seed, opts.stratified)?;
    Ok(PreprocessOutput {
        dataset,
        train,
        test,
        dropped_constant,
        collinear_removed,
        scaler,
        before,
        after,
    })
}

/// Builds a dataset from columns (test helper shared by sibling modules).
#[cfg(test)]
pub(crate) fn from_columns(names: &[&str], cols: &[Vec<f64>], labels: &[&str]) -> Dataset {
    let rows = labels.len();
    let mut m = super::Matrix::zeros(rows, cols.len());
    for (c, col) in cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            m.set(r, c, *v);
        }
    }
    Dataset::new(
        names.iter().map(|s| s.to_string()).collect(),
        m,
        labels.iter().map(|s| s.to_string()).collect(),
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Independent covariance/std route.
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx: f64 = x.iter().sum::<f64>() / n;
        let my: f64 = y.iter().sum::<f64>() / n;
        let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
        let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        cov / (sx * sy)
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        // 0.8 by hand: cov = 4/3, var_x = var_y = 5/3
        let oracle = pearson_oracle(&x, &y);
        assert!((oracle - 0.8).abs() < 1e-12);
        assert!((pearson(&x, &y).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors_and_constant() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert_eq!(
            pearson_flagged(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(),
            (0.0, true)
        );
    }

    #[test]
    fn duplicate_column_is_pruned() {
        let d = from_columns(
            &["a", "b", "c"],
            &[vec![1.0, 2.0, 3.0, 5.0], vec![1.0, 2.0, 3.0, 5.0], vec![4.0, 1.0, 3.0, 2.0]],
            &["x", "y", "x", "y"],
        );
        let (p, log) = prune_collinear(&d, 0.9).unwrap();
        assert_eq!(p.feature_names(), &["a".to_string(), "c".to_string()]);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].dropped, "b");
        assert!((log[0].abs_r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncorrelated_columns_are_kept() {
        let d = from_columns(
            &["a", "b"],
            &[vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 3.0, 2.0, 4.0]],
            &["x", "y", "x", "y"],
        );
        let (p, log) = prune_collinear(&d, 0.9).unwrap();
        assert_eq!(p, d);
        assert!(log.is_empty());
        assert!(prune_collinear(&d, 0.0).is_err());
        assert!(prune_collinear(&d, 1.5).is_err());
    }

    /// Brute-force oracle: scan every pair of the retained set.
    fn retained_ok(d: &Dataset, t: f64) -> bool {
        for i in 0..d.n_features() {
            for j in i + 1..d.n_features() {
                if pearson_oracle(&d.column(i), &d.column(j)).abs() > t {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn near_duplicate_feature_is_dropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let mut cols: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
            .collect();
        cols[2] = cols[0]
            .iter()
            .map(|v| 0.99 * v + 0.001 * rng.random::<f64>())
            .collect();
        let labels: Vec<&str> = (0..n).map(|i| if i % 2 == 0 { "x" } else { "y" }).collect();
        let d = from_columns(&["f1", "f2", "f3", "f4", "f5"], &cols, &labels);
        let (p, log) = prune_collinear(&d, 0.9).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].dropped, "f3");
        assert!(retained_ok(&p, 0.9));
        let seq = prune_collinear_with(&d, 0.9, false).unwrap();
        assert_eq!(seq.0, p);
    }

    #[test]
    fn standardize_examples() {
        let d = from_columns(&["a"], &[vec![0.0, 10.0]], &["x", "y"]);
        let (s, params, dropped) = standardize(&d);
        assert!(dropped.is_empty());
        assert_eq!(s.column(0), vec![-1.0, 1.0]);
        assert_eq!(params.mean, vec![5.0]);
        let (again, _, _) = standardize(&s);
        for (a, b) in again.column(0).iter().zip(s.column(0)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn standardize_moments_and_constant_drop() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|k| (0..100).map(|_| rng.random::<f64>() * (k as f64 + 1.0) * 7.0 - 3.0).collect())
            .collect();
        let mut with_const = cols.clone();
        with_const.push(vec![2.5; 100]);
        let labels: Vec<&str> = (0..100).map(|i| if i % 3 == 0 { "x" } else { "y" }).collect();
        let d = from_columns(&["a", "b", "c", "d", "k"], &with_const, &labels);
        let (s, params, dropped) = standardize(&d);
        assert_eq!(dropped, vec!["k".to_string()]);
        assert_eq!(s.n_features(), 4);
        for c in 0..4 {
            let col = s.column(c);
            let m = col.iter().sum::<f64>() / 100.0;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 100.0).sqrt();
            assert!(m.abs() < 1e-9, "mean {m}");
            assert!((sd - 1.0).abs() < 1e-9, "std {sd}");
        }
        let back = params.inverse_apply(&s).unwrap();
        for (c, orig) in cols.iter().enumerate() {
            for (a, b) in back.column(c).iter().zip(orig) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12));
            }
        }
    }

    fn counts_dataset(counts: &[(&str, usize)]) -> Dataset {
        let mut labels = Vec::new();
        for (c, n) in counts {
            labels.extend(std::iter::repeat_n(*c, *n));
        }
        let col: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
        from_columns(&["f"], &[col], &labels)
    }

    #[test]
    fn undersampling_reduces_only_the_largest_class() {
        let d = counts_dataset(&[("A", 100), ("B", 10), ("C", 50)]);
        let u1 = undersample_majority(&d, 7);
        let u2 = undersample_majority(&d, 7);
        assert_eq!(u1, u2);
        assert_eq!(u1.class_counts(), vec![10, 10, 50]);
        let balanced = counts_dataset(&[("A", 20), ("B", 20)]);
        assert_eq!(undersample_majority(&balanced, 1), balanced);
    }

    #[test]
    fn split_examples() {
        let d = counts_dataset(&[("A", 50), ("B", 50)]);
        let (tr, te) = split(&d, 0.2, 42, false).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (80, 20));
        let (tr, te) = split(&d, 0.2, 42, true).unwrap();
        assert_eq!(te.class_counts(), vec![10, 10]);
        assert_eq!(tr.class_counts(), vec![40, 40]);
        let (_, te2) = split(&d, 0.2, 42, true).unwrap();
        assert_eq!(te.column(0), te2.column(0));
        assert!(split(&d, 1.0, 1, true).is_err());
        assert!(split(&d, 0.0, 1, true).is_err());
        let tiny = counts_dataset(&[("A", 5), ("B", 1)]);
        assert!(split(&tiny, 0.2, 1, true).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let d = counts_dataset(&[("A", 37), ("B", 11), ("C", 23)]);
        let (tr, te) = split(&d, 0.3, 5, true).unwrap();
        let mut all: Vec<f64> = tr.column(0);
        all.extend(te.column(0));
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.column(0));
        for (c, &n) in d.class_counts().iter().enumerate() {
            let expect = 0.3 * n as f64;
            assert!((te.class_counts()[c] as f64 - expect).abs() <= 1.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn undersampling_never_grows_a_class(
            a in 1usize..60, b in 1usize..60, c in 1usize..60, seed in any::<u64>()
        ) {
            let d = counts_dataset(&[("A", a), ("B", b), ("C", c)]);
            let before = d.class_counts();
            let after = undersample_majority(&d, seed).class_counts();
            let max = *before.iter().max().unwrap();
            let min = *before.iter().min().unwrap();
            let major = before.iter().position(|&n| n == max).unwrap();
            for k in 0..3 {
                prop_assert!(after[k] <= before[k]);
                if k != major {
                    prop_assert_eq!(after[k], before[k]);
                }
            }
            prop_assert_eq!(after[major], min);
            prop_assert_eq!(after.iter().sum::<usize>(), undersample_majority(&d, seed).n_rows());
        }

        #[test]
        fn pruning_is_idempotent(seed in any::<u64>(), t in 0.5f64..0.99) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
            let cols: Vec<Vec<f64>> = (0..6)
                .map(|k| base.iter().map(|b| b * (k % 3) as f64 + rng.random::<f64>()).collect())
                .collect();
            let labels: Vec<&str> = (0..40).map(|i| if i % 2 == 0 { "x" } else { "y" }).collect();
            let d = from_columns(&["a", "b", "c", "d", "e", "f"], &cols, &labels);
            let (once, _) = prune_collinear(&d, t).unwrap();
            let (twice, log) = prune_collinear(&once, t).unwrap();
            prop_assert_eq!(once.feature_names(), twice.feature_names());
            prop_assert!(log.is_empty());
            prop_assert!(retained_ok(&once, t));
        }
    }
}
