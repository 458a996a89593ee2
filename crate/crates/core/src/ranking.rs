//! Per-channel class-precision scoring and the derived channel rankings.
//!
//! Every channel is scored on its own with a k-NN classifier. For each task
//! the channels are then ordered by that task's class precision; the best
//! channel per task is claimed for the root, in task-index order, and the
//! remaining channels form the task's ranking set.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::KnnModel;
use crate::model::{ChannelId, Dataset, TaskId};
use crate::split::{split_indices, SplitSpec};

pub const DEFAULT_K: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub k: usize,
    pub split: SplitSpec,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            split: SplitSpec::default(),
        }
    }
}

/// Channel x task grid of class precisions plus each channel's overall accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionTable {
    pub channels: Vec<ChannelId>,
    pub tasks: Vec<String>,
    /// `precision[c][t]`, row-major by channel.
    pub precision: Vec<Vec<f64>>,
    pub overall: Vec<f64>,
}

impl PrecisionTable {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPrecisionTable(m));
        if self.tasks.is_empty() {
            return bad("no tasks".into());
        }
        if self.precision.len() != self.channels.len() || self.overall.len() != self.channels.len()
        {
            return bad("row count does not match channel count".into());
        }
        let mut seen = HashSet::new();
        for &c in &self.channels {
            if !seen.insert(c) {
                return Err(Error::DuplicateChannel(c));
            }
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        for (c, row) in self.channels.iter().zip(&self.precision) {
            if row.len() != self.tasks.len() {
                return bad(format!("channel {c} row has {} cells", row.len()));
            }
            if !row.iter().copied().all(in_unit) {
                return bad(format!("channel {c} has a precision outside [0, 1]"));
            }
        }
        if !self.overall.iter().copied().all(in_unit) {
            return bad("overall accuracy outside [0, 1]".into());
        }
        Ok(())
    }

    pub fn get(&self, channel: ChannelId, task: TaskId) -> Option<f64> {
        let row = self.channels.iter().position(|&c| c == channel)?;
        self.precision[row].get(task.0).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScore {
    pub precision: Vec<f64>,
    pub overall: f64,
}

/// Confusion counts indexed `[actual][predicted]`.
pub fn confusion_matrix(
    actual: &[TaskId],
    predicted: &[TaskId],
    n_tasks: usize,
) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_tasks]; n_tasks];
    for (a, p) in actual.iter().zip(predicted) {
        m[a.0][p.0] += 1;
    }
    m
}

/// TP / (TP + FP) per predicted class; a class never predicted scores 0.
pub fn class_precision(confusion: &[Vec<usize>]) -> Vec<f64> {
    (0..confusion.len())
        .map(|k| {
            let predicted: usize = confusion.iter().map(|row| row[k]).sum();
            if predicted == 0 {
                0.0
            } else {
                confusion[k][k] as f64 / predicted as f64
            }
        })
        .collect()
}

fn score_channel(
    ds: &Dataset,
    channel: ChannelId,
    train_idx: &[usize],
    test_idx: &[usize],
    k: usize,
) -> Result<ChannelScore> {
    let pos = ds
        .channel_position(channel)
        .ok_or(Error::UnknownChannel(channel))?;
    let width = ds.feature_width;
    let mut features = Vec::with_capacity(train_idx.len() * width);
    let mut labels = Vec::with_capacity(train_idx.len());
    for &i in train_idx {
        features.extend_from_slice(&ds.samples[i].readings[pos]);
        labels.push(ds.samples[i].label);
    }
    let model = KnnModel::fit(features, labels, width, ds.n_tasks(), k)?;

    let actual: Vec<TaskId> = test_idx.iter().map(|&i| ds.samples[i].label).collect();
    let predicted = test_idx
        .iter()
        .map(|&i| model.predict(&ds.samples[i].readings[pos]))
        .collect::<Result<Vec<_>>>()?;
    let confusion = confusion_matrix(&actual, &predicted, ds.n_tasks());
    let correct = (0..ds.n_tasks()).map(|t| confusion[t][t]).sum::<usize>();
    Ok(ChannelScore {
        precision: class_precision(&confusion),
        overall: correct as f64 / actual.len() as f64,
    })
}

fn folds(ds: &Dataset, cfg: &ClassifierConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let [train, _val, test] = split_indices(ds.len(), &cfg.split)?;
    if test.is_empty() {
        return Err(Error::InvalidDataset("test fold is empty".into()));
    }
    Ok((train, test))
}

/// Scores one channel in isolation on the configured split.
pub fn evaluate_channel(
    ds: &Dataset,
    channel: ChannelId,
    cfg: &ClassifierConfig,
) -> Result<ChannelScore> {
    ds.ensure_valid()?;
    let (train, test) = folds(ds, cfg)?;
    score_channel(ds, channel, &train, &test, cfg.k)
}

/// One [`evaluate_channel`] row per channel. Channels are scored in
/// parallel; the result matches a sequential run.
pub fn rank_channels(ds: &Dataset, cfg: &ClassifierConfig) -> Result<PrecisionTable> {
    ds.ensure_valid()?;
    let (train, test) = folds(ds, cfg)?;
    log::debug!(
        "ranking {} channels on {} train / {} test samples",
        ds.n_channels(),
        train.len(),
        test.len()
    );
    let scores = ds
        .channels
        .par_iter()
        .map(|&c| score_channel(ds, c, &train, &test, cfg.k))
        .collect::<Result<Vec<_>>>()?;
    let (precision, overall) = scores.into_iter().map(|s| (s.precision, s.overall)).unzip();
    Ok(PrecisionTable {
        channels: ds.channels.clone(),
        tasks: ds.tasks.clone(),
        precision,
        overall,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootMember {
    pub task: TaskId,
    pub channel: ChannelId,
}

/// Leading channel claimed by each task; merged into the DAG's root node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RootSet {
    pub members: Vec<RootMember>,
}

impl RootSet {
    pub fn channels(&self) -> Vec<ChannelId> {
        self.members.iter().map(|m| m.channel).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Non-root channels ordered by non-increasing precision for one task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingSet {
    pub task: TaskId,
    pub ordered: Vec<ChannelId>,
}

/// Root plus ranking sets, the on-disk form passed between pipeline stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRanking {
    pub tasks: Vec<String>,
    pub root: RootSet,
    pub rankings: Vec<RankingSet>,
}

impl ChannelRanking {
    pub fn from_table(pt: &PrecisionTable) -> Result<Self> {
        let (root, rankings) = build_ranking_sets(pt)?;
        Ok(Self {
            tasks: pt.tasks.clone(),
            root,
            rankings,
        })
    }
}

/// Order in which a task prefers channels: higher precision first, then
/// lower channel id.
fn preference(pt: &PrecisionTable, task: usize) -> Vec<ChannelId> {
    let mut rows: Vec<usize> = (0..pt.channels.len()).collect();
    rows.sort_by(|&a, &b| {
        pt.precision[b][task]
            .total_cmp(&pt.precision[a][task])
            .then(pt.channels[a].cmp(&pt.channels[b]))
    });
    rows.into_iter().map(|r| pt.channels[r]).collect()
}

pub fn build_ranking_sets(pt: &PrecisionTable) -> Result<(RootSet, Vec<RankingSet>)> {
    pt.validate()?;
    let n_tasks = pt.tasks.len();
    if pt.channels.len() <= n_tasks {
        return Err(Error::NotEnoughChannels {
            channels: pt.channels.len(),
            tasks: n_tasks,
        });
    }

    let prefs: Vec<Vec<ChannelId>> = (0..n_tasks).map(|t| preference(pt, t)).collect();

    let mut claimed = HashSet::new();
    let mut members = Vec::with_capacity(n_tasks);
    for (t, pref) in prefs.iter().enumerate() {
        let channel = *pref
            .iter()
            .find(|c| !claimed.contains(*c))
            .expect("more channels than tasks");
        claimed.insert(channel);
        members.push(RootMember {
            task: TaskId(t),
            channel,
        });
    }

    let rankings = prefs
        .into_iter()
        .enumerate()
        .map(|(t, pref)| RankingSet {
            task: TaskId(t),
            ordered: pref.into_iter().filter(|c| !claimed.contains(c)).collect(),
        })
        .collect();
    Ok((RootSet { members }, rankings))
}
