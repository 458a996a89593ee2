//! Seeded train/validation/test partitioning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;

pub const DEFAULT_RATIOS: [f64; 3] = [0.70, 0.15, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// train / validation / test
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: DEFAULT_RATIOS,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.ratios.iter().all(|r| r.is_finite() && *r > 0.0)
            && (self.ratios.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateRatios(self.ratios))
        }
    }

    /// Fold sizes for `n` samples: floor for train and validation, the
    /// remainder goes to test.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        self.validate()?;
        // The epsilon keeps products such as 0.7 * 10 from landing just below an integer.
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.ratios[0]).min(n);
        let val = floor(self.ratios[1]).min(n - train);
        Ok([train, val, n - train - val])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Shuffled sample indices for each fold. Uniform shuffle, no stratification.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    if n < 3 {
        return Err(Error::TooFewSamples(n));
    }
    let [train, val, _] = spec.sizes(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = order.split_off(train + val);
    let val_part = order.split_off(train);
    Ok([order, val_part, test])
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let [train, val, test] = split_indices(ds.len(), spec)?;
    Ok(Split {
        train: ds.select_samples(&train),
        val: ds.select_samples(&val),
        test: ds.select_samples(&test),
    })
}
