//! Brute-force k-nearest-neighbour classifier.
//!
//! Neighbours are ordered by Euclidean distance, ties broken by the lower
//! training index. Label votes are tied toward the lowest task index.

use crate::error::{Error, Result};
use crate::model::TaskId;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    width: usize,
    n_tasks: usize,
    /// Row-major training matrix, `labels.len()` rows of `width` values.
    features: Vec<f64>,
    labels: Vec<TaskId>,
}

impl KnnModel {
    pub fn fit(
        features: Vec<f64>,
        labels: Vec<TaskId>,
        width: usize,
        n_tasks: usize,
        k: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if k == 0 {
            return Err(Error::KZero);
        }
        if k > labels.len() {
            return Err(Error::KTooLarge {
                k,
                train: labels.len(),
            });
        }
        if width == 0 || features.len() != labels.len() * width {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * width.max(1),
                actual: features.len(),
            });
        }
        let n_tasks = labels
            .iter()
            .map(|t| t.0 + 1)
            .max()
            .unwrap_or(0)
            .max(n_tasks);
        Ok(Self {
            k,
            width,
            n_tasks,
            features,
            labels,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of the k nearest training rows, nearest first.
    pub fn neighbors(&self, query: &[f64]) -> Result<Vec<usize>> {
        if query.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                actual: query.len(),
            });
        }
        // Squared distance orders identically to Euclidean distance.
        let mut dist: Vec<(f64, usize)> = self
            .features
            .chunks_exact(self.width)
            .enumerate()
            .map(|(i, row)| {
                let d = row
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        dist.sort_unstable_by(cmp);
        Ok(dist.into_iter().map(|(_, i)| i).collect())
    }

    /// Per-task neighbour vote counts.
    pub fn votes(&self, query: &[f64]) -> Result<Vec<usize>> {
        let mut votes = vec![0usize; self.n_tasks];
        for i in self.neighbors(query)? {
            votes[self.labels[i].0] += 1;
        }
        Ok(votes)
    }

    pub fn predict(&self, query: &[f64]) -> Result<TaskId> {
        Ok(TaskId(argmax_first(&self.votes(query)?)))
    }

    /// Vote-fraction posterior: share of the k neighbours carrying each label.
    pub fn posterior(&self, query: &[f64]) -> Result<Vec<f64>> {
        let k = self.k as f64;
        Ok(self
            .votes(query)?
            .into_iter()
            .map(|v| v as f64 / k)
            .collect())
    }
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax_first<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One-shot majority-vote prediction over labelled training vectors.
pub fn knn_predict(train: &[(Vec<f64>, TaskId)], query: &[f64], k: usize) -> Result<TaskId> {
    let Some((first, _)) = train.first() else {
        return Err(Error::EmptyTrainingSet);
    };
    let width = first.len();
    let mut features = Vec::with_capacity(train.len() * width);
    for (x, _) in train {
        if x.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: x.len(),
            });
        }
        features.extend_from_slice(x);
    }
    let labels = train.iter().map(|(_, t)| *t).collect();
    KnnModel::fit(features, labels, width, 0, k)?.predict(query)
}
