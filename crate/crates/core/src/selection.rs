//! Greedy channel selection.
//!
//! [`dbcs_select`] walks the layered DAG from the root. At each node it adds
//! the node's channels to the selected path, evaluates the confidence of
//! the whole accumulated subset, and stops once that confidence reaches the
//! threshold. Otherwise it moves along the outgoing edge with the highest
//! edge confidence (tail channels plus head channel). Reaching the
//! destination ends the walk.
//!
//! Edge confidences are computed only for the current node's outgoing edges,
//! so channels in layers the walk never reaches are never read.
//!
//! [`general_select`] is the complete-graph baseline, and
//! [`oracle_best_path`] replays the DAG rule over every enumerated path.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::confidence::{Confidence, ConfidenceSource, SubsetKey};
use crate::dag::{enumerate_paths, LayeredDag, Node};
use crate::error::{Error, Result};
use crate::model::{ChannelId, ChannelReadings, ReadingSource, TaskId};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidThreshold(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Self(DEFAULT_THRESHOLD)
    }
}

impl TryFrom<f64> for Threshold {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Threshold::new(v)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdMet,
    ReachedDestination,
    AllVisited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected channels in visiting order, root channels first.
    pub selected: Vec<ChannelId>,
    /// Readings of the selected channels.
    #[serde(skip)]
    pub readings_used: ChannelReadings,
    /// Confidence of the final selected subset.
    pub pcv: f64,
    pub predicted: TaskId,
    pub stop_reason: StopReason,
    /// Every channel read: the selection plus all candidates scored on the way.
    pub probed: Vec<ChannelId>,
}

fn read_into(
    readings: &dyn ReadingSource,
    channel: ChannelId,
    out: &mut ChannelReadings,
) -> Result<()> {
    let values = readings
        .reading(channel)
        .ok_or(Error::MissingReading(channel))?;
    out.insert(channel, values.to_vec());
    Ok(())
}

fn key_of(channels: &[ChannelId]) -> Result<SubsetKey> {
    SubsetKey::new(channels.iter().copied())
}

/// Picks the candidate with the largest confidence; lowest channel id on ties.
fn best_candidate(scored: &[(ChannelId, f64)]) -> Option<ChannelId> {
    scored
        .iter()
        .copied()
        .reduce(|best, cand| {
            if cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                cand
            } else {
                best
            }
        })
        .map(|(c, _)| c)
}

pub fn dbcs_select<C: ConfidenceSource + ?Sized>(
    dag: &LayeredDag,
    conf: &C,
    readings: &dyn ReadingSource,
    threshold: Threshold,
) -> Result<SelectionResult> {
    let mut selected: Vec<ChannelId> = Vec::with_capacity(dag.max_path_channels());
    let mut used = ChannelReadings::new();
    let mut probed: BTreeSet<ChannelId> = BTreeSet::new();

    let mut node = Node::Root;
    loop {
        let node_channels = dag.node_channels(node);
        for &c in &node_channels {
            read_into(readings, c, &mut used)?;
            probed.insert(c);
        }
        selected.extend_from_slice(&node_channels);

        let pcv: Confidence = conf.confidence(&key_of(&selected)?, readings)?;
        let finish = |stop_reason| SelectionResult {
            selected: selected.clone(),
            readings_used: used.clone(),
            pcv: pcv.value,
            predicted: pcv.task,
            stop_reason,
            probed: probed.iter().copied().collect(),
        };
        if pcv.value >= threshold.value() {
            return Ok(finish(StopReason::ThresholdMet));
        }

        let heads = dag.successors(node);
        if heads == [Node::Dest] {
            return Ok(finish(StopReason::ReachedDestination));
        }
        let mut scored = Vec::with_capacity(heads.len());
        for head in heads {
            let Node::Channel { channel, .. } = head else {
                unreachable!("only the last layer points at the destination")
            };
            probed.insert(channel);
            let mut edge = node_channels.clone();
            edge.push(channel);
            let c = conf.confidence(&key_of(&edge)?, readings)?;
            scored.push((channel, c.value));
        }
        let next = best_candidate(&scored).expect("layers are non-empty");
        let layer = match node {
            Node::Root => 0,
            Node::Channel { layer, .. } => layer + 1,
            Node::Dest => unreachable!(),
        };
        node = Node::Channel {
            layer,
            channel: next,
        };
    }
}

/// Greedy walk over the complete graph of `channels`: start at the best
/// single channel, then repeatedly append the unvisited channel whose pair
/// with the previously added channel is most confident.
pub fn general_select<C: ConfidenceSource + ?Sized>(
    channels: &[ChannelId],
    conf: &C,
    readings: &dyn ReadingSource,
    threshold: Threshold,
) -> Result<SelectionResult> {
    let mut remaining: Vec<ChannelId> = channels.to_vec();
    remaining.sort_unstable();
    remaining.dedup();
    if remaining.is_empty() {
        return Err(Error::InvalidDataset("no channels to select from".into()));
    }

    let mut singles = Vec::with_capacity(remaining.len());
    let mut single_conf = HashMap::new();
    for &c in &remaining {
        let conf_c = conf.confidence(&key_of(&[c])?, readings)?;
        singles.push((c, conf_c.value));
        single_conf.insert(c, conf_c);
    }
    let start = best_candidate(&singles).expect("non-empty");
    remaining.retain(|&c| c != start);

    let mut selected = vec![start];
    let mut used = ChannelReadings::new();
    read_into(readings, start, &mut used)?;
    let mut pcv = single_conf[&start];
    // every channel's singleton was scored, so everything has been read
    let probed: Vec<ChannelId> = single_conf
        .keys()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    loop {
        let stop_reason = if pcv.value >= threshold.value() {
            Some(StopReason::ThresholdMet)
        } else if remaining.is_empty() {
            Some(StopReason::AllVisited)
        } else {
            None
        };
        if let Some(stop_reason) = stop_reason {
            return Ok(SelectionResult {
                selected,
                readings_used: used,
                pcv: pcv.value,
                predicted: pcv.task,
                stop_reason,
                probed,
            });
        }
        let prev = *selected.last().expect("non-empty");
        let mut scored = Vec::with_capacity(remaining.len());
        for &c in &remaining {
            scored.push((c, conf.confidence(&key_of(&[prev, c])?, readings)?.value));
        }
        let next = best_candidate(&scored).expect("non-empty");
        remaining.retain(|&c| c != next);
        selected.push(next);
        read_into(readings, next, &mut used)?;
        pcv = conf.confidence(&key_of(&selected)?, readings)?;
    }
}

/// Highest-confidence path prefix over the whole DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPrefix {
    pub channels: Vec<ChannelId>,
    pub pcv: f64,
    pub predicted: TaskId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// What the greedy rule selects, recomputed from exhaustive edge scores.
    pub greedy: SelectionResult,
    /// Max confidence over all prefixes of all paths; shortest prefix wins ties.
    pub best_prefix: BestPrefix,
    pub paths_examined: usize,
}

/// Exhaustive reference for [`dbcs_select`]. Scores every edge up front,
/// enumerates every path, keeps the one path on which each step is the
/// edge argmax, and replays the stopping rule along it.
pub fn oracle_best_path<C: ConfidenceSource + ?Sized>(
    dag: &LayeredDag,
    conf: &C,
    readings: &dyn ReadingSource,
    threshold: Threshold,
) -> Result<OracleReport> {
    let mut edge_conf: HashMap<(Node, ChannelId), f64> = HashMap::new();
    for (tail, head) in dag.edges() {
        if let Node::Channel { channel, .. } = head {
            let mut chans = dag.node_channels(tail);
            chans.push(channel);
            edge_conf.insert(
                (tail, channel),
                conf.confidence(&key_of(&chans)?, readings)?.value,
            );
        }
    }

    let paths = enumerate_paths(dag);
    let is_greedy_step = |tail: Node, layer: usize, chosen: ChannelId| {
        let mine = edge_conf[&(tail, chosen)];
        dag.layers()[layer].iter().all(|&other| {
            let v = edge_conf[&(tail, other)];
            v < mine || (v == mine && chosen <= other)
        })
    };
    let greedy_path = paths
        .iter()
        .find(|p| {
            let nodes = p.nodes();
            p.steps
                .iter()
                .enumerate()
                .all(|(layer, &c)| is_greedy_step(nodes[layer], layer, c))
        })
        .expect("exactly one path follows the edge argmax");

    let mut prefix_conf: HashMap<Vec<ChannelId>, Confidence> = HashMap::new();
    let mut eval_prefix = |chans: &[ChannelId]| -> Result<Confidence> {
        let mut sorted = chans.to_vec();
        sorted.sort_unstable();
        if let Some(c) = prefix_conf.get(&sorted) {
            return Ok(*c);
        }
        let c = conf.confidence(&key_of(chans)?, readings)?;
        prefix_conf.insert(sorted, c);
        Ok(c)
    };

    let full = greedy_path.channel_set(dag);
    let root_len = dag.root().len();
    let mut greedy = None;
    for depth in 0..=dag.n_layers() {
        let prefix = &full[..root_len + depth];
        let c = eval_prefix(prefix)?;
        let reason = if c.value >= threshold.value() {
            Some(StopReason::ThresholdMet)
        } else if depth == dag.n_layers() {
            Some(StopReason::ReachedDestination)
        } else {
            None
        };
        if let Some(stop_reason) = reason {
            let probed: BTreeSet<ChannelId> = dag
                .root_channels()
                .into_iter()
                .chain(dag.layers()[..depth].iter().flatten().copied())
                .collect();
            let mut used = ChannelReadings::new();
            for &ch in prefix {
                read_into(readings, ch, &mut used)?;
            }
            greedy = Some(SelectionResult {
                selected: prefix.to_vec(),
                readings_used: used,
                pcv: c.value,
                predicted: c.task,
                stop_reason,
                probed: probed.into_iter().collect(),
            });
            break;
        }
    }

    let mut best: Option<BestPrefix> = None;
    for path in &paths {
        let chans = path.channel_set(dag);
        for depth in 0..=dag.n_layers() {
            let prefix = &chans[..root_len + depth];
            let c = eval_prefix(prefix)?;
            let better = match &best {
                None => true,
                Some(b) => c.value > b.pcv || (c.value == b.pcv && prefix.len() < b.channels.len()),
            };
            if better {
                best = Some(BestPrefix {
                    channels: prefix.to_vec(),
                    pcv: c.value,
                    predicted: c.task,
                });
            }
        }
    }

    Ok(OracleReport {
        greedy: greedy.expect("walk always terminates"),
        best_prefix: best.expect("at least the root prefix"),
        paths_examined: paths.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::TableConfidence;
    use crate::model::RecordingReadings;
    use crate::ranking::{RootMember, RootSet};

    fn ids(v: &[u32]) -> Vec<ChannelId> {
        v.iter().copied().map(ChannelId).collect()
    }

    fn dag(root: &[u32], layers: &[&[u32]]) -> LayeredDag {
        LayeredDag::new(
            (0..root.len()).map(|i| format!("T{i}")).collect(),
            RootSet {
                members: root
                    .iter()
                    .enumerate()
                    .map(|(t, &c)| RootMember {
                        task: TaskId(t),
                        channel: ChannelId(c),
                    })
                    .collect(),
            },
            layers.iter().map(|l| ids(l)).collect(),
        )
        .unwrap()
    }

    fn readings(chs: &[u32]) -> ChannelReadings {
        let mut r = ChannelReadings::new();
        for &c in chs {
            r.insert(ChannelId(c), vec![c as f64]);
        }
        r
    }

    const A: u32 = 1;
    const B: u32 = 2;
    const C: u32 = 3;

    /// root {a}; layer {b, c}; edge {a,b} beats edge {a,c}; f({a}) = 0.3.
    /// With a one-channel root the edge {a,b} and the prefix {a,b} are the
    /// same subset, hence the same model: 0.55 serves both roles.
    fn toy() -> (LayeredDag, TableConfidence) {
        let mut t = TableConfidence::new();
        t.set(&[A], TaskId(0), 0.3)
            .set(&[A, B], TaskId(0), 0.55)
            .set(&[A, C], TaskId(0), 0.4);
        (dag(&[A], &[&[B, C]]), t)
    }

    #[test]
    fn toy_dag_walk() {
        let (d, t) = toy();
        let theta = Threshold::new(0.5).unwrap();
        let r = dbcs_select(&d, &t, &readings(&[A, B, C]), theta).unwrap();
        assert_eq!(r.selected, ids(&[A, B]));
        assert_eq!(r.pcv, 0.55);
        assert_eq!(r.stop_reason, StopReason::ThresholdMet);
        assert_eq!(r.probed, ids(&[A, B, C]));
        assert_eq!(r.readings_used.len(), 2);

        let o = oracle_best_path(&d, &t, &readings(&[A, B, C]), theta).unwrap();
        assert_eq!(o.greedy, r);
        assert_eq!(o.best_prefix.channels, ids(&[A, B]));
        assert_eq!(o.best_prefix.pcv, 0.55);
        assert_eq!(o.paths_examined, 2);
    }

    #[test]
    fn root_confident_enough() {
        let d = dag(&[1, 2, 3], &[&[4, 5, 6]]);
        let mut t = TableConfidence::new();
        t.set(&[1, 2, 3], TaskId(2), 0.9);
        let rec_src = readings(&[1, 2, 3, 4, 5, 6]);
        let rec = RecordingReadings::new(&rec_src);
        let r = dbcs_select(&d, &t, &rec, Threshold::default()).unwrap();
        assert_eq!(r.selected, ids(&[1, 2, 3]));
        assert_eq!(r.stop_reason, StopReason::ThresholdMet);
        assert_eq!(r.predicted, TaskId(2));
        assert_eq!(
            rec.accessed().into_iter().collect::<Vec<_>>(),
            ids(&[1, 2, 3])
        );
    }

    #[test]
    fn zero_layer_dag_goes_to_destination() {
        let d = dag(&[1, 2], &[]);
        let mut t = TableConfidence::new();
        t.set(&[1, 2], TaskId(1), 0.4);
        let r = dbcs_select(&d, &t, &readings(&[1, 2]), Threshold::default()).unwrap();
        assert_eq!(r.stop_reason, StopReason::ReachedDestination);
        assert_eq!(r.selected, ids(&[1, 2]));
        let o = oracle_best_path(&d, &t, &readings(&[1, 2]), Threshold::default()).unwrap();
        assert_eq!(o.best_prefix.channels, ids(&[1, 2]));
        assert_eq!(o.greedy, r);
    }

    #[test]
    fn edge_ties_choose_lowest_channel() {
        let d = dag(&[1], &[&[7, 3, 5]]);
        let mut t = TableConfidence::new();
        t.set(&[1], TaskId(0), 0.1)
            .set(&[1, 7], TaskId(0), 0.2)
            .set(&[1, 3], TaskId(0), 0.2)
            .set(&[1, 5], TaskId(0), 0.2);
        let r = dbcs_select(
            &d,
            &t,
            &readings(&[1, 3, 5, 7]),
            Threshold::new(1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(r.selected, ids(&[1, 3]));
    }

    #[test]
    fn missing_model_and_reading() {
        let (d, t) = toy();
        assert!(matches!(
            dbcs_select(&d, &t, &readings(&[A, B]), Threshold::new(0.5).unwrap()),
            Err(Error::MissingReading(ChannelId(C)))
        ));
        let empty = TableConfidence::new();
        assert!(matches!(
            dbcs_select(&d, &empty, &readings(&[A, B, C]), Threshold::default()),
            Err(Error::MissingModel(_))
        ));
    }

    #[test]
    fn threshold_bounds() {
        assert!(Threshold::new(0.0).is_err());
        assert!(Threshold::new(1.0 + 1e-9).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
        assert_eq!(Threshold::new(1.0).unwrap().value(), 1.0);
        assert!(serde_json::from_str::<Threshold>("1.5").is_err());
    }

    fn fig1_table() -> TableConfidence {
        // channel 3 is the best single channel and {3,5} the best pair from 3
        let mut t = TableConfidence::new();
        let single = [0.2, 0.25, 0.4, 0.1, 0.3, 0.15];
        for (i, v) in single.iter().enumerate() {
            t.set(&[i as u32 + 1], TaskId(0), *v);
        }
        for a in 1..=6u32 {
            for b in (a + 1)..=6 {
                let v = match (a, b) {
                    (3, 5) => 0.45,
                    (5, 6) => 0.44,
                    (1, 6) => 0.43,
                    _ => 0.05 * ((a + b) % 5) as f64,
                };
                t.set(&[a, b], TaskId(0), v);
            }
        }
        t
    }

    #[test]
    fn general_select_follows_previous_node() {
        let mut t = fig1_table();
        // accumulated subsets stay under the threshold until {3,5,6,1}
        t.set(&[3, 5], TaskId(0), 0.45);
        t.set(&[3, 5, 6], TaskId(0), 0.48);
        t.set(&[1, 3, 5, 6], TaskId(1), 0.7);
        let r = general_select(
            &ids(&[1, 2, 3, 4, 5, 6]),
            &t,
            &readings(&[1, 2, 3, 4, 5, 6]),
            Threshold::new(0.6).unwrap(),
        )
        .unwrap();
        assert_eq!(r.selected, ids(&[3, 5, 6, 1]));
        assert_eq!(r.stop_reason, StopReason::ThresholdMet);
        assert_eq!(r.predicted, TaskId(1));
    }

    #[test]
    fn general_select_immediate_stop() {
        let t = fig1_table();
        let r = general_select(
            &ids(&[1, 2, 3, 4, 5, 6]),
            &t,
            &readings(&[1, 2, 3, 4, 5, 6]),
            Threshold::new(0.4).unwrap(),
        )
        .unwrap();
        assert_eq!(r.selected, ids(&[3]));
        assert_eq!(r.pcv, 0.4);
    }

    #[test]
    fn general_select_exhausts_channels() {
        let mut t = fig1_table();
        for set in [
            &[3, 5][..],
            &[3, 5, 6],
            &[1, 3, 5, 6],
            &[1, 2, 3, 5, 6],
            &[1, 2, 3, 4, 5, 6],
        ] {
            t.set(set, TaskId(0), 0.5);
        }
        let all = ids(&[1, 2, 3, 4, 5, 6]);
        let r = general_select(
            &all,
            &t,
            &readings(&[1, 2, 3, 4, 5, 6]),
            Threshold::new(1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(r.selected, ids(&[3, 5, 6, 1, 2, 4]));
        assert_eq!(r.stop_reason, StopReason::AllVisited);
        assert_eq!(r.probed, all);
    }
}
