//! Datasets, fold partitions and loss matrices.
//!
//! Point indices are 0-based throughout the crate and on disk: index `i`
//! refers to the `i`-th row of a [`Dataset`], and fold ids run over `0..k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::summation::pairwise_sum;

/// One observation: a feature vector and a scalar target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub target: f64,
}

impl DataPoint {
    pub fn new(features: Vec<f64>, target: f64) -> Self {
        Self { features, target }
    }

    pub fn scalar(target: f64) -> Self {
        Self {
            features: Vec::new(),
            target,
        }
    }
}

/// An ordered collection of points sharing one feature dimension.
///
/// Features are stored row-major. A dimension of zero is allowed (pure
/// location problems).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if targets.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a dataset needs at least 2 points, got {}",
                targets.len()
            )));
        }
        if features.len() != dim * targets.len() {
            return Err(Error::InvalidInput(format!(
                "feature buffer has {} values, expected {} x {}",
                features.len(),
                targets.len(),
                dim
            )));
        }
        if let Some(pos) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature at row {}",
                pos / dim.max(1)
            )));
        }
        if let Some(row) = targets.iter().position(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite target at row {row}")));
        }
        Ok(Self {
            dim,
            features,
            targets,
        })
    }

    pub fn from_points(points: &[DataPoint]) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.features.len());
        let mut features = Vec::with_capacity(points.len() * dim);
        let mut targets = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.features.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point {i} has {} features, expected {dim}",
                    p.features.len()
                )));
            }
            features.extend_from_slice(&p.features);
            targets.push(p.target);
        }
        Self::new(dim, features, targets)
    }

    /// Scalar observations with no features.
    pub fn from_targets(targets: Vec<f64>) -> Result<Self> {
        Self::new(0, Vec::new(), targets)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn target(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn point(&self, i: usize) -> DataPoint {
        DataPoint::new(self.features(i).to_vec(), self.targets[i])
    }

    /// True when every target is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.targets.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    pub fn view<'a>(&'a self, indices: &'a [usize]) -> DatasetView<'a> {
        DatasetView {
            data: self,
            indices,
        }
    }

    /// Replace row `i` in place.
    pub fn set_point(&mut self, i: usize, point: &DataPoint) {
        assert_eq!(point.features.len(), self.dim);
        self.features[i * self.dim..(i + 1) * self.dim].copy_from_slice(&point.features);
        self.targets[i] = point.target;
    }
}

/// A borrowed, ordered selection of rows, used as a training set.
#[derive(Debug, Clone, Copy)]
pub struct DatasetView<'a> {
    data: &'a Dataset,
    indices: &'a [usize],
}

impl<'a> DatasetView<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    pub fn features(&self, j: usize) -> &'a [f64] {
        self.data.features(self.indices[j])
    }

    pub fn target(&self, j: usize) -> f64 {
        self.data.targets[self.indices[j]]
    }

    pub fn rows(&self) -> impl Iterator<Item = (&'a [f64], f64)> + '_ {
        self.indices
            .iter()
            .map(move |&i| (self.data.features(i), self.data.targets[i]))
    }
}

/// One train/validation split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPair {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// k ordered train/validation pairs whose validation sets partition `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPartition {
    n: usize,
    pairs: Vec<FoldPair>,
}

impl FoldPartition {
    /// Build from validation folds; training sets are the complements in
    /// ascending index order.
    pub fn from_validation_folds(n: usize, folds: Vec<Vec<usize>>) -> Result<Self> {
        let k = folds.len();
        if k < 2 || k > n {
            return Err(Error::InvalidFoldCount { n, k });
        }
        let mut owner = vec![usize::MAX; n];
        for (j, fold) in folds.iter().enumerate() {
            if fold.is_empty() {
                return Err(Error::InvalidInput(format!("fold {j} is empty")));
            }
            for &i in fold {
                if i >= n {
                    return Err(Error::InvalidInput(format!("index {i} out of range 0..{n}")));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::InvalidInput(format!("index {i} in two folds")));
                }
                owner[i] = j;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::InvalidInput(format!("index {i} in no fold")));
        }
        let pairs = folds
            .into_iter()
            .enumerate()
            .map(|(j, validation)| FoldPair {
                train: (0..n).filter(|&i| owner[i] != j).collect(),
                validation,
            })
            .collect();
        Ok(Self { n, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[FoldPair] {
        &self.pairs
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.validation.len()).collect()
    }

    /// Fold id of every point.
    pub fn assignment(&self) -> Vec<usize> {
        let mut owner = vec![0; self.n];
        for (j, p) in self.pairs.iter().enumerate() {
            for &i in &p.validation {
                owner[i] = j;
            }
        }
        owner
    }
}

/// Split `0..n` into `k` validation folds.
///
/// Indices (optionally permuted by `SeedStream::new(seed).shuffle`) are cut
/// into contiguous blocks; the first `n mod k` folds receive `ceil(n/k)`
/// points and the rest `floor(n/k)`. Each validation fold is stored in
/// ascending order, and each training set is its complement in dataset order.
pub fn make_partition(n: usize, k: usize, seed: u64, shuffle: bool) -> Result<FoldPartition> {
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { n, k });
    }
    let order = permutation(n, seed, shuffle);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for j in 0..k {
        let size = base + usize::from(j < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    FoldPartition::from_validation_folds(n, folds)
}

/// The index order used by [`make_partition`] and the hold-out split.
pub(crate) fn permutation(n: usize, seed: u64, shuffle: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        SeedStream::new(seed).shuffle(&mut order);
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Losses of a single prediction rule.
    Plain,
    /// Entry-wise loss of rule 1 minus loss of rule 2.
    Difference,
}

/// One per-point held-out loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossEntry {
    pub index: usize,
    pub fold: usize,
    pub loss: f64,
}

/// Held-out losses from a cross-validation run, one per point, with fold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    losses: Vec<f64>,
    folds: Vec<usize>,
    k: usize,
    kind: LossKind,
    binary: bool,
}

impl LossMatrix {
    /// Validate and assemble a matrix from entries in any order.
    pub fn from_entries(entries: &[LossEntry], k: usize, kind: LossKind) -> Result<Self> {
        let n = entries.len();
        let mut losses = vec![f64::NAN; n];
        let mut folds = vec![usize::MAX; n];
        for e in entries {
            if e.index >= n {
                return Err(Error::MalformedLossMatrix(format!(
                    "index {} out of range for {n} entries (missing indices)",
                    e.index
                )));
            }
            if folds[e.index] != usize::MAX {
                return Err(Error::MalformedLossMatrix(format!(
                    "duplicate entry for index {}",
                    e.index
                )));
            }
            losses[e.index] = e.loss;
            folds[e.index] = e.fold;
        }
        Self::new(losses, folds, k, kind)
    }

    /// `losses[i]` and `folds[i]` belong to point `i`.
    pub fn new(losses: Vec<f64>, folds: Vec<usize>, k: usize, kind: LossKind) -> Result<Self> {
        let mut m = Self {
            losses,
            folds,
            k,
            kind,
            binary: false,
        };
        m.validate()?;
        Ok(m)
    }

    /// Check every invariant and refresh the binary flag.
    pub fn validate(&mut self) -> Result<()> {
        let n = self.losses.len();
        if n < 2 {
            return Err(Error::MalformedLossMatrix(format!("need at least 2 entries, got {n}")));
        }
        if self.folds.len() != n {
            return Err(Error::MalformedLossMatrix("fold labels and losses differ in length".into()));
        }
        if self.k < 1 {
            return Err(Error::MalformedLossMatrix("k must be positive".into()));
        }
        let mut sizes = vec![0usize; self.k];
        for (i, &f) in self.folds.iter().enumerate() {
            if f == usize::MAX {
                return Err(Error::MalformedLossMatrix(format!("missing index {i}")));
            }
            if f >= self.k {
                return Err(Error::MalformedLossMatrix(format!(
                    "fold {f} of index {i} outside 0..{}",
                    self.k
                )));
            }
            sizes[f] += 1;
        }
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::MalformedLossMatrix(format!("fold {j} is empty")));
        }
        if let Some(i) = self.losses.iter().position(|l| !l.is_finite()) {
            return Err(Error::MalformedLossMatrix(format!("non-finite loss at index {i}")));
        }
        self.binary = self.losses.iter().all(|&l| l == 0.0 || l == 1.0);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.losses.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn entries(&self) -> impl Iterator<Item = LossEntry> + '_ {
        self.losses
            .iter()
            .zip(&self.folds)
            .enumerate()
            .map(|(index, (&loss, &fold))| LossEntry { index, fold, loss })
    }

    /// Relabel as a difference matrix (e.g. after reading one from disk).
    pub fn into_kind(mut self, kind: LossKind) -> Self {
        self.kind = kind;
        self
    }

    /// Losses grouped by fold, each group in index order.
    pub fn by_fold(&self) -> Vec<Vec<f64>> {
        let mut groups = vec![Vec::new(); self.k];
        for (&l, &f) in self.losses.iter().zip(&self.folds) {
            groups[f].push(l);
        }
        groups
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }

    /// The cross-validation error: the mean of all per-point losses.
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.losses) / self.n() as f64
    }

    pub fn fold_means(&self) -> Vec<f64> {
        self.by_fold()
            .iter()
            .map(|g| pairwise_sum(g) / g.len() as f64)
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.losses.iter().map(|&l| f(l)).collect(),
            self.folds.clone(),
            self.k,
            self.kind,
        )
    }

    /// Entry-wise `self - other`; both matrices must share fold labels.
    pub fn difference(&self, other: &LossMatrix) -> Result<Self> {
        if self.folds != other.folds || self.k != other.k {
            return Err(Error::InconsistentInputs(
                "difference of loss matrices with different folds".into(),
            ));
        }
        Self::new(
            self.losses
                .iter()
                .zip(&other.losses)
                .map(|(a, b)| a - b)
                .collect(),
            self.folds.clone(),
            self.k,
            LossKind::Difference,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contiguous_two_folds() {
        let p = make_partition(4, 2, 0, false).unwrap();
        assert_eq!(p.pairs()[0].validation, vec![0, 1]);
        assert_eq!(p.pairs()[1].validation, vec![2, 3]);
        assert_eq!(p.pairs()[0].train, vec![2, 3]);
        assert_eq!(p.pairs()[1].train, vec![0, 1]);
    }

    #[test]
    fn remainder_goes_to_leading_folds() {
        let p = make_partition(5, 2, 0, false).unwrap();
        assert_eq!(p.fold_sizes(), vec![3, 2]);
        let p = make_partition(11, 4, 9, true).unwrap();
        assert_eq!(p.fold_sizes(), vec![3, 3, 3, 2]);
    }

    #[test]
    fn leave_one_out_shape() {
        let p = make_partition(6, 6, 0, false).unwrap();
        for (j, pair) in p.pairs().iter().enumerate() {
            assert_eq!(pair.validation, vec![j]);
            assert_eq!(pair.train.len(), 5);
        }
    }

    #[test]
    fn bad_fold_counts() {
        assert!(matches!(make_partition(5, 1, 0, false), Err(Error::InvalidFoldCount { .. })));
        assert!(matches!(make_partition(5, 6, 0, false), Err(Error::InvalidFoldCount { .. })));
    }

    #[test]
    fn seeds_matter_only_when_shuffling() {
        assert_eq!(make_partition(20, 4, 1, false).unwrap(), make_partition(20, 4, 2, false).unwrap());
        assert_ne!(make_partition(20, 4, 1, true).unwrap(), make_partition(20, 4, 2, true).unwrap());
        assert_eq!(make_partition(20, 4, 1, true).unwrap(), make_partition(20, 4, 1, true).unwrap());
    }

    fn entries(losses: &[f64], folds: &[usize]) -> Vec<LossEntry> {
        losses
            .iter()
            .zip(folds)
            .enumerate()
            .map(|(index, (&loss, &fold))| LossEntry { index, fold, loss })
            .collect()
    }

    #[test]
    fn valid_matrix_and_binary_flag() {
        let m = LossMatrix::from_entries(&entries(&[0., 1., 1., 0.], &[0, 0, 1, 1]), 2, LossKind::Plain)
            .unwrap();
        assert!(m.is_binary());
        let m = LossMatrix::from_entries(&entries(&[0., 1., 0.5, 0.], &[0, 0, 1, 1]), 2, LossKind::Plain)
            .unwrap();
        assert!(!m.is_binary());
    }

    #[test]
    fn duplicate_index_rejected() {
        let mut e = entries(&[0., 1., 1., 0.], &[0, 0, 1, 1]);
        e[3].index = 2;
        let err = LossMatrix::from_entries(&e, 2, LossKind::Plain).unwrap_err();
        assert!(matches!(err, Error::MalformedLossMatrix(_)), "{err}");
    }

    #[test]
    fn missing_index_and_empty_fold_rejected() {
        let mut e = entries(&[0., 1., 1., 0.], &[0, 0, 1, 1]);
        e[3].index = 7;
        assert!(LossMatrix::from_entries(&e, 2, LossKind::Plain).is_err());
        let e = entries(&[0., 1., 1., 0.], &[0, 0, 0, 0]);
        assert!(matches!(
            LossMatrix::from_entries(&e, 2, LossKind::Plain),
            Err(Error::MalformedLossMatrix(_))
        ));
    }

    #[test]
    fn dataset_rejects_non_finite() {
        assert!(Dataset::new(1, vec![1.0, f64::NAN], vec![0.0, 1.0]).is_err());
        assert!(Dataset::from_targets(vec![1.0]).is_err());
    }
}
