//! End-to-end experiments: run a selector over a test fold and summarise
//! accuracy and channel utilisation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceSource;
use crate::dag::LayeredDag;
use crate::error::Result;
use crate::knn::KnnModel;
use crate::model::{ChannelId, Dataset};
use crate::ranking::ClassifierConfig;
use crate::selection::{dbcs_select, general_select, SelectionResult, StopReason, Threshold};

pub use crate::split::{split, split_indices, Split, SplitSpec, DEFAULT_RATIOS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: Vec<String>,
    pub threshold: f64,
    pub samples: usize,
    pub n_channels: usize,
    /// Largest selection the selector can produce (T + L for a DAG).
    pub max_channels: usize,
    pub per_task_samples: Vec<usize>,
    pub per_task_accuracy: Vec<f64>,
    pub overall_accuracy: f64,
    /// Selected-path length -> number of test samples.
    pub utilization_counts: BTreeMap<usize, usize>,
    /// Selected-path length -> fraction of test samples.
    pub utilization_histogram: BTreeMap<usize, f64>,
    pub mean_channels: f64,
    pub mean_utilization: f64,
    pub worst_case_channels: usize,
    /// Mean number of channels read, including scored candidates.
    pub mean_probed: f64,
    pub stop_reasons: BTreeMap<StopReason, usize>,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    correct: Vec<usize>,
    count: Vec<usize>,
    lengths: BTreeMap<usize, usize>,
    probed: usize,
    stops: BTreeMap<StopReason, usize>,
}

impl Tally {
    fn new(n_tasks: usize) -> Self {
        Self {
            correct: vec![0; n_tasks],
            count: vec![0; n_tasks],
            ..Default::default()
        }
    }

    fn add(mut self, label: usize, r: &SelectionResult) -> Self {
        self.count[label] += 1;
        if r.predicted.0 == label {
            self.correct[label] += 1;
        }
        *self.lengths.entry(r.selected.len()).or_default() += 1;
        *self.stops.entry(r.stop_reason).or_default() += 1;
        self.probed += r.probed.len();
        self
    }

    fn merge(mut self, other: Tally) -> Self {
        for (a, b) in self.correct.iter_mut().zip(other.correct) {
            *a += b;
        }
        for (a, b) in self.count.iter_mut().zip(other.count) {
            *a += b;
        }
        for (k, v) in other.lengths {
            *self.lengths.entry(k).or_default() += v;
        }
        for (k, v) in other.stops {
            *self.stops.entry(k).or_default() += v;
        }
        self.probed += other.probed;
        self
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Runs `select` on every test sample (in parallel) and reduces counts.
fn evaluate<F>(
    test: &Dataset,
    threshold: Threshold,
    n_channels: usize,
    max_channels: usize,
    select: F,
) -> Result<EvalReport>
where
    F: Fn(usize) -> Result<SelectionResult> + Sync,
{
    let n_tasks = test.n_tasks();
    let tally = (0..test.len())
        .into_par_iter()
        .map(|i| select(i).map(|r| (test.samples[i].label.0, r)))
        .try_fold(
            || Tally::new(n_tasks),
            |acc, item| item.map(|(label, r)| acc.add(label, &r)),
        )
        .try_reduce(|| Tally::new(n_tasks), |a, b| Ok(a.merge(b)))?;

    let n = test.len();
    let total_len: usize = tally.lengths.iter().map(|(len, c)| len * c).sum();
    let mean_channels = ratio(total_len, n);
    Ok(EvalReport {
        tasks: test.tasks.clone(),
        threshold: threshold.value(),
        samples: n,
        n_channels,
        max_channels,
        per_task_accuracy: tally
            .correct
            .iter()
            .zip(&tally.count)
            .map(|(&c, &n)| ratio(c, n))
            .collect(),
        per_task_samples: tally.count.clone(),
        overall_accuracy: ratio(tally.correct.iter().sum(), n),
        utilization_histogram: tally
            .lengths
            .iter()
            .map(|(&len, &c)| (len, ratio(c, n)))
            .collect(),
        worst_case_channels: tally.lengths.keys().next_back().copied().unwrap_or(0),
        utilization_counts: tally.lengths,
        mean_utilization: if n_channels == 0 {
            0.0
        } else {
            mean_channels / n_channels as f64
        },
        mean_channels,
        mean_probed: ratio(tally.probed, n),
        stop_reasons: tally.stops,
    })
}

/// DAG-based selection on every test sample.
pub fn run_experiment<C: ConfidenceSource + Sync + ?Sized>(
    dag: &LayeredDag,
    conf: &C,
    test: &Dataset,
    threshold: Threshold,
) -> Result<EvalReport> {
    test.ensure_well_formed()?;
    dag.check_channels(&test.channels)?;
    log::debug!(
        "running DBCS on {} test samples at threshold {}",
        test.len(),
        threshold.value()
    );
    evaluate(
        test,
        threshold,
        dag.n_channels(),
        dag.max_path_channels(),
        |i| dbcs_select(dag, conf, &test.row(i), threshold),
    )
}

/// Complete-graph baseline selection on every test sample.
pub fn run_baseline<C: ConfidenceSource + Sync + ?Sized>(
    channels: &[ChannelId],
    conf: &C,
    test: &Dataset,
    threshold: Threshold,
) -> Result<EvalReport> {
    test.ensure_well_formed()?;
    evaluate(test, threshold, channels.len(), channels.len(), |i| {
        general_select(channels, conf, &test.row(i), threshold)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub tasks: Vec<String>,
    pub per_task_accuracy: Vec<f64>,
    pub overall_accuracy: f64,
}

/// k-NN on all channels at once, the reference every selector is compared to.
pub fn full_channel_accuracy(
    train: &Dataset,
    test: &Dataset,
    cfg: &ClassifierConfig,
) -> Result<AccuracyReport> {
    train.ensure_well_formed()?;
    test.ensure_well_formed()?;
    let (features, labels) = train.project(&train.channels)?;
    let model = KnnModel::fit(
        features,
        labels,
        train.n_channels() * train.feature_width,
        train.n_tasks(),
        cfg.k,
    )?;
    let (test_features, test_labels) = test.project(&train.channels)?;
    let width = model.width();
    let predictions = test_features
        .par_chunks_exact(width)
        .map(|q| model.predict(q))
        .collect::<Result<Vec<_>>>()?;
    let n_tasks = train.n_tasks();
    let mut correct = vec![0usize; n_tasks];
    let mut count = vec![0usize; n_tasks];
    for (p, a) in predictions.iter().zip(&test_labels) {
        count[a.0] += 1;
        if p == a {
            correct[a.0] += 1;
        }
    }
    Ok(AccuracyReport {
        tasks: train.tasks.clone(),
        per_task_accuracy: correct
            .iter()
            .zip(&count)
            .map(|(&c, &n)| ratio(c, n))
            .collect(),
        overall_accuracy: ratio(correct.iter().sum(), test_labels.len()),
    })
}

fn pct(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

/// Accuracy table: one row per labelled result, one column per task plus overall.
pub fn accuracy_table(tasks: &[String], rows: &[(&str, &[f64], f64)]) -> String {
    let label_w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(8);
    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "");
    for t in tasks {
        let _ = write!(out, "  {t:>9}");
    }
    let _ = writeln!(out, "  {:>9}", "Overall");
    for (name, per_task, overall) in rows {
        let _ = write!(out, "{name:<label_w$}");
        for v in per_task.iter() {
            let _ = write!(out, "  {:>9}", pct(*v));
        }
        let _ = writeln!(out, "  {:>9}", pct(*overall));
    }
    out
}

impl EvalReport {
    /// Plain-text summary: accuracy table followed by utilisation.
    pub fn to_text(&self, label: &str) -> String {
        let mut out = accuracy_table(
            &self.tasks,
            &[(label, &self.per_task_accuracy, self.overall_accuracy)],
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "channels  samples  fraction");
        for (len, count) in &self.utilization_counts {
            let _ = writeln!(
                out,
                "{len:>8}  {count:>7}  {:>8.4}",
                self.utilization_histogram[len]
            );
        }
        let _ = writeln!(
            out,
            "mean channels {:.3} of {} ({:.1}%), worst case {}, mean read {:.3}",
            self.mean_channels,
            self.n_channels,
            self.mean_utilization * 100.0,
            self.worst_case_channels,
            self.mean_probed
        );
        out
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("channels,count,fraction\n");
        for (len, count) in &self.utilization_counts {
            let _ = writeln!(out, "{len},{count},{}", self.utilization_histogram[len]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::TableConfidence;
    use crate::model::{Sample, TaskId};
    use crate::ranking::{RootMember, RootSet};

    fn setup() -> (LayeredDag, Dataset) {
        let dag = LayeredDag::new(
            vec!["A".into(), "B".into()],
            RootSet {
                members: vec![
                    RootMember {
                        task: TaskId(0),
                        channel: ChannelId(1),
                    },
                    RootMember {
                        task: TaskId(1),
                        channel: ChannelId(2),
                    },
                ],
            },
            vec![vec![ChannelId(3), ChannelId(4)], vec![ChannelId(5)]],
        )
        .unwrap();
        let samples = (0..10)
            .map(|i| Sample {
                readings: vec![vec![i as f64]; 5],
                label: TaskId(i % 2),
            })
            .collect();
        let ds = Dataset {
            channels: (1..=5).map(ChannelId).collect(),
            tasks: vec!["A".into(), "B".into()],
            feature_width: 1,
            samples,
        };
        (dag, ds)
    }

    fn all_keys(dag: &LayeredDag, value: f64) -> TableConfidence {
        let mut t = TableConfidence::new();
        for k in crate::confidence::enumerate_model_keys(dag) {
            t.insert(
                k,
                crate::confidence::Confidence {
                    task: TaskId(1),
                    value,
                },
            );
        }
        t
    }

    #[test]
    fn confident_root_uses_root_only() {
        let (dag, ds) = setup();
        let r = run_experiment(&dag, &all_keys(&dag, 1.0), &ds, Threshold::default()).unwrap();
        assert_eq!(r.utilization_counts, BTreeMap::from([(2, 10)]));
        assert_eq!(r.mean_utilization, 2.0 / 5.0);
        assert_eq!(r.overall_accuracy, 0.5);
        assert_eq!(r.per_task_accuracy, vec![0.0, 1.0]);
        assert_eq!(r.stop_reasons[&StopReason::ThresholdMet], 10);
    }

    #[test]
    fn unreachable_threshold_walks_full_path() {
        let (dag, ds) = setup();
        let r = run_experiment(
            &dag,
            &all_keys(&dag, 0.9),
            &ds,
            Threshold::new(1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(r.utilization_counts, BTreeMap::from([(4, 10)]));
        assert_eq!(r.worst_case_channels, dag.max_path_channels());
        let total: f64 = r.utilization_histogram.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(r.to_text("DBCS").contains("Overall"));
        assert_eq!(r.histogram_csv(), "channels,count,fraction\n4,10,1\n");
    }

    #[test]
    fn table_layout() {
        let t = accuracy_table(
            &["T1".into(), "T2".into()],
            &[("S1", &[0.9281, 0.915], 0.922)],
        );
        assert!(t.contains("92.81%"));
        assert!(t.contains("92.20%"));
    }
}
