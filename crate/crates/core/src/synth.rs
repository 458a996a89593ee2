//! Seeded Gaussian datasets with a controllable set of informative channels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelId, Dataset, Sample, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub std: f64,
}

/// A channel whose mean depends on the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSignal {
    pub channel: ChannelId,
    /// One mean per task.
    pub means: Vec<f64>,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub channels: Vec<ChannelId>,
    pub tasks: Vec<String>,
    pub samples_per_task: usize,
    #[serde(default = "one")]
    pub feature_width: usize,
    /// Shared by every task on channels without a signal.
    pub background: Gaussian,
    pub informative: Vec<ChannelSignal>,
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl SynthSpec {
    /// Each listed channel is shifted by `separation` (unit std) for its own
    /// task and centred at 0 for every other task; remaining channels are
    /// standard normal noise.
    pub fn one_vs_rest(
        channels: Vec<ChannelId>,
        informative_per_task: &[Vec<ChannelId>],
        separation: f64,
        samples_per_task: usize,
        seed: u64,
    ) -> Self {
        let n_tasks = informative_per_task.len();
        let informative = informative_per_task
            .iter()
            .enumerate()
            .flat_map(|(t, chans)| {
                chans.iter().map(move |&channel| {
                    let mut means = vec![0.0; n_tasks];
                    means[t] = separation;
                    ChannelSignal {
                        channel,
                        means,
                        std: 1.0,
                    }
                })
            })
            .collect();
        Self {
            channels,
            tasks: (1..=n_tasks).map(|i| format!("T{i}")).collect(),
            samples_per_task,
            feature_width: 1,
            background: Gaussian {
                mean: 0.0,
                std: 1.0,
            },
            informative,
            seed,
        }
    }

    /// 14 channels labelled 4..=17, 3 tasks, 3 strongly informative
    /// channels per task (shift 3 sigma), 1000 samples per task.
    pub fn benchmark(seed: u64) -> Self {
        let ids = |v: &[u32]| v.iter().copied().map(ChannelId).collect::<Vec<_>>();
        Self::one_vs_rest(
            (4..=17).map(ChannelId).collect(),
            &[ids(&[6, 11, 15]), ids(&[8, 13, 16]), ids(&[4, 10, 14])],
            3.0,
            1000,
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSynthSpec(m));
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        let mut sorted = self.channels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.channels.len() {
            return bad("duplicate channels".into());
        }
        if self.tasks.len() < 2 {
            return bad("need at least 2 tasks".into());
        }
        if self.samples_per_task == 0 || self.feature_width == 0 {
            return bad("samples_per_task and feature_width must be positive".into());
        }
        let positive = |s: f64| s.is_finite() && s > 0.0;
        if !positive(self.background.std) || !self.background.mean.is_finite() {
            return bad("background needs finite mean and std > 0".into());
        }
        let mut seen = Vec::new();
        for sig in &self.informative {
            if !self.channels.contains(&sig.channel) {
                return bad(format!(
                    "informative channel {} not in channel list",
                    sig.channel
                ));
            }
            if seen.contains(&sig.channel) {
                return bad(format!("channel {} has two signals", sig.channel));
            }
            seen.push(sig.channel);
            if sig.means.len() != self.tasks.len() {
                return bad(format!("channel {} needs one mean per task", sig.channel));
            }
            if !positive(sig.std) || sig.means.iter().any(|m| !m.is_finite()) {
                return bad(format!(
                    "channel {} needs finite means and std > 0",
                    sig.channel
                ));
            }
        }
        Ok(())
    }
}

/// Draws `samples_per_task` samples per task, interleaving tasks row by row.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = |mean: f64, std: f64| Normal::new(mean, std).expect("validated std");
    let n_tasks = spec.tasks.len();

    // per task, per channel distribution
    let dists: Vec<Vec<Normal<f64>>> = (0..n_tasks)
        .map(|t| {
            spec.channels
                .iter()
                .map(
                    |c| match spec.informative.iter().find(|s| s.channel == *c) {
                        Some(sig) => normal(sig.means[t], sig.std),
                        None => normal(spec.background.mean, spec.background.std),
                    },
                )
                .collect()
        })
        .collect();

    let mut samples = Vec::with_capacity(spec.samples_per_task * n_tasks);
    for _ in 0..spec.samples_per_task {
        for (t, per_channel) in dists.iter().enumerate() {
            let readings = per_channel
                .iter()
                .map(|d| {
                    (0..spec.feature_width)
                        .map(|_| d.sample(&mut rng))
                        .collect()
                })
                .collect();
            samples.push(Sample {
                readings,
                label: TaskId(t),
            });
        }
    }

    Ok(Dataset {
        channels: spec.channels.clone(),
        tasks: spec.tasks.clone(),
        feature_width: spec.feature_width,
        samples,
    })
}
