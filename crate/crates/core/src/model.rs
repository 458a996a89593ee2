//! Domain types shared across the pipeline: channels, tasks, samples and
//! datasets, plus report-style dataset validation.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque channel label, e.g. 4..=17 for a 14-channel headset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelId(pub u32);

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Dense 0-based task (class) index. Names live alongside in the owning
/// dataset or table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub usize);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// One feature vector per dataset channel, in dataset channel order.
    pub readings: Vec<Vec<f64>>,
    pub label: TaskId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: Vec<ChannelId>,
    /// Task names; `TaskId(i)` names `tasks[i]`.
    pub tasks: Vec<String>,
    pub feature_width: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channel_position(&self, channel: ChannelId) -> Option<usize> {
        self.channels.iter().position(|&c| c == channel)
    }

    /// Copy of this dataset holding only the samples at `indices`, in that order.
    pub fn select_samples(&self, indices: &[usize]) -> Dataset {
        Dataset {
            channels: self.channels.clone(),
            tasks: self.tasks.clone(),
            feature_width: self.feature_width,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Feature matrix restricted to `channels`, concatenated in the given
    /// order, one row per sample (row-major), plus labels.
    pub fn project(&self, channels: &[ChannelId]) -> Result<(Vec<f64>, Vec<TaskId>)> {
        let positions = channels
            .iter()
            .map(|&c| self.channel_position(c).ok_or(Error::UnknownChannel(c)))
            .collect::<Result<Vec<_>>>()?;
        let mut features = Vec::with_capacity(self.len() * positions.len() * self.feature_width);
        let mut labels = Vec::with_capacity(self.len());
        for sample in &self.samples {
            for &p in &positions {
                features.extend_from_slice(&sample.readings[p]);
            }
            labels.push(sample.label);
        }
        Ok((features, labels))
    }

    /// Borrowing view of one sample as a reading source.
    pub fn row(&self, index: usize) -> SampleRow<'_> {
        SampleRow {
            dataset: self,
            index,
        }
    }

    /// Owned copy of one sample's readings.
    pub fn readings(&self, index: usize) -> ChannelReadings {
        let sample = &self.samples[index];
        ChannelReadings(
            self.channels
                .iter()
                .copied()
                .zip(sample.readings.iter().cloned())
                .collect(),
        )
    }

    pub fn validate(&self) -> ValidationReport {
        validate_dataset(self)
    }

    /// Fails with the first validation violation, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        match report.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidDataset(v.to_string())),
        }
    }

    /// Like [`Dataset::ensure_valid`] but tolerates classes with no samples,
    /// as happens in small train or test folds.
    pub fn ensure_well_formed(&self) -> Result<()> {
        let report = self.validate();
        match report
            .violations
            .iter()
            .find(|v| !matches!(v, Violation::EmptyClass(_)))
        {
            None => Ok(()),
            Some(v) => Err(Error::InvalidDataset(v.to_string())),
        }
    }
}

/// Anything that can hand out a channel's current feature vector.
pub trait ReadingSource {
    fn reading(&self, channel: ChannelId) -> Option<&[f64]>;
}

/// Partial row of readings: only the channels acquired so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelReadings(pub BTreeMap<ChannelId, Vec<f64>>);

impl ChannelReadings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, channel: ChannelId, features: Vec<f64>) {
        self.0.insert(channel, features);
    }

    pub fn channels(&self) -> impl Iterator<Item = ChannelId> + '_ {
        self.0.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl ReadingSource for ChannelReadings {
    fn reading(&self, channel: ChannelId) -> Option<&[f64]> {
        self.0.get(&channel).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SampleRow<'a> {
    dataset: &'a Dataset,
    index: usize,
}

impl SampleRow<'_> {
    pub fn label(&self) -> TaskId {
        self.dataset.samples[self.index].label
    }
}

impl ReadingSource for SampleRow<'_> {
    fn reading(&self, channel: ChannelId) -> Option<&[f64]> {
        let pos = self.dataset.channel_position(channel)?;
        self.dataset.samples[self.index]
            .readings
            .get(pos)
            .map(Vec::as_slice)
    }
}

/// Wraps a reading source and records every channel that was read.
pub struct RecordingReadings<'a, R: ?Sized> {
    inner: &'a R,
    accessed: RefCell<BTreeSet<ChannelId>>,
}

impl<'a, R: ReadingSource + ?Sized> RecordingReadings<'a, R> {
    pub fn new(inner: &'a R) -> Self {
        Self {
            inner,
            accessed: RefCell::new(BTreeSet::new()),
        }
    }

    pub fn accessed(&self) -> BTreeSet<ChannelId> {
        self.accessed.borrow().clone()
    }
}

impl<R: ReadingSource + ?Sized> ReadingSource for RecordingReadings<'_, R> {
    fn reading(&self, channel: ChannelId) -> Option<&[f64]> {
        self.accessed.borrow_mut().insert(channel);
        self.inner.reading(channel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoChannels,
    ZeroFeatureWidth,
    TooFewTasks(usize),
    DuplicateChannel(ChannelId),
    ChannelCount {
        sample: usize,
        expected: usize,
        actual: usize,
    },
    WidthMismatch {
        sample: usize,
        channel: ChannelId,
        expected: usize,
        actual: usize,
    },
    NonFinite {
        sample: usize,
        channel: ChannelId,
    },
    UnknownLabel {
        sample: usize,
        label: TaskId,
    },
    EmptyClass(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoChannels => write!(f, "dataset has no channels"),
            Violation::ZeroFeatureWidth => write!(f, "feature width must be at least 1"),
            Violation::TooFewTasks(n) => write!(f, "need at least 2 tasks, found {n}"),
            Violation::DuplicateChannel(c) => write!(f, "duplicate channel {c}"),
            Violation::ChannelCount {
                sample,
                expected,
                actual,
            } => write!(
                f,
                "sample {sample} has {actual} channel readings, expected {expected}"
            ),
            Violation::WidthMismatch {
                sample,
                channel,
                expected,
                actual,
            } => write!(
                f,
                "width mismatch at sample {sample}, channel {channel}: expected {expected}, got {actual}"
            ),
            Violation::NonFinite { sample, channel } => {
                write!(f, "non-finite value at sample {sample}, channel {channel}")
            }
            Violation::UnknownLabel { sample, label } => {
                write!(f, "sample {sample} has unknown label {label}")
            }
            Violation::EmptyClass(name) => write!(f, "empty class {name}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every violated dataset invariant. Never fails.
pub fn validate_dataset(ds: &Dataset) -> ValidationReport {
    let mut violations = Vec::new();

    if ds.channels.is_empty() {
        violations.push(Violation::NoChannels);
    }
    if ds.feature_width == 0 {
        violations.push(Violation::ZeroFeatureWidth);
    }
    if ds.tasks.len() < 2 {
        violations.push(Violation::TooFewTasks(ds.tasks.len()));
    }

    let mut seen = HashSet::new();
    for &c in &ds.channels {
        if !seen.insert(c) {
            violations.push(Violation::DuplicateChannel(c));
        }
    }

    let mut class_counts = vec![0usize; ds.tasks.len()];
    for (i, sample) in ds.samples.iter().enumerate() {
        if sample.readings.len() != ds.channels.len() {
            violations.push(Violation::ChannelCount {
                sample: i,
                expected: ds.channels.len(),
                actual: sample.readings.len(),
            });
        }
        for (&channel, features) in ds.channels.iter().zip(&sample.readings) {
            if features.len() != ds.feature_width {
                violations.push(Violation::WidthMismatch {
                    sample: i,
                    channel,
                    expected: ds.feature_width,
                    actual: features.len(),
                });
            }
            if features.iter().any(|v| !v.is_finite()) {
                violations.push(Violation::NonFinite { sample: i, channel });
            }
        }
        match class_counts.get_mut(sample.label.0) {
            Some(count) => *count += 1,
            None => violations.push(Violation::UnknownLabel {
                sample: i,
                label: sample.label,
            }),
        }
    }

    for (name, &count) in ds.tasks.iter().zip(&class_counts) {
        if count == 0 {
            violations.push(Violation::EmptyClass(name.clone()));
        }
    }

    ValidationReport { violations }
}
