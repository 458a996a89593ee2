//! Layered DAG compiled from the root set and per-task ranking sets.
//!
//! Layer `j` collects, in task-index order, each task's highest-ranked
//! channel not already placed in the root or an earlier position. Edges are
//! implicit: root to every layer-1 node, every node of layer `j` to every
//! node of layer `j + 1`, and every last-layer node to the destination.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelId, TaskId};
use crate::ranking::{ChannelRanking, RankingSet, RootMember, RootSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DagFile")]
pub struct LayeredDag {
    tasks: Vec<String>,
    root: RootSet,
    layers: Vec<Vec<ChannelId>>,
}

#[derive(Deserialize)]
struct DagFile {
    tasks: Vec<String>,
    root: Vec<RootMember>,
    layers: Vec<Vec<ChannelId>>,
}

impl TryFrom<DagFile> for LayeredDag {
    type Error = Error;

    fn try_from(f: DagFile) -> Result<Self> {
        LayeredDag::new(f.tasks, RootSet { members: f.root }, f.layers)
    }
}

/// A node of the layered DAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Root,
    Channel { layer: usize, channel: ChannelId },
    Dest,
}

impl LayeredDag {
    /// Checks structure: one root member per task, non-empty layers and
    /// every channel placed at most once.
    pub fn new(tasks: Vec<String>, mut root: RootSet, layers: Vec<Vec<ChannelId>>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::InvalidDag("no tasks".into()));
        }
        root.members.sort_by_key(|m| m.task);
        let task_ok = root.members.len() == tasks.len()
            && root
                .members
                .iter()
                .enumerate()
                .all(|(i, m)| m.task == TaskId(i));
        if !task_ok {
            return Err(Error::InvalidDag(
                "root must hold exactly one channel per task".into(),
            ));
        }
        let mut seen = HashSet::new();
        for c in root
            .channels()
            .into_iter()
            .chain(layers.iter().flatten().copied())
        {
            if !seen.insert(c) {
                return Err(Error::DuplicateChannel(c));
            }
        }
        if let Some(j) = layers.iter().position(Vec::is_empty) {
            return Err(Error::InvalidDag(format!("layer {} is empty", j + 1)));
        }
        Ok(Self {
            tasks,
            root,
            layers,
        })
    }

    pub fn tasks(&self) -> &[String] {
        &self.tasks
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn root(&self) -> &RootSet {
        &self.root
    }

    /// Root channels in task order.
    pub fn root_channels(&self) -> Vec<ChannelId> {
        self.root.channels()
    }

    pub fn layers(&self) -> &[Vec<ChannelId>] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    /// Every channel in the graph: root first, then layer by layer.
    pub fn channels(&self) -> Vec<ChannelId> {
        self.root_channels()
            .into_iter()
            .chain(self.layers.iter().flatten().copied())
            .collect()
    }

    pub fn n_channels(&self) -> usize {
        self.root.len() + self.layers.iter().map(Vec::len).sum::<usize>()
    }

    /// Channels on a root-to-destination path: one root plus one per layer.
    pub fn max_path_channels(&self) -> usize {
        self.root.len() + self.layers.len()
    }

    /// Number of distinct root-to-destination paths (saturating).
    pub fn path_count(&self) -> usize {
        self.layers
            .iter()
            .fold(1usize, |acc, l| acc.saturating_mul(l.len()))
    }

    /// Fails if the graph mentions a channel outside `universe`.
    pub fn check_channels(&self, universe: &[ChannelId]) -> Result<()> {
        let known: HashSet<_> = universe.iter().collect();
        match self.channels().into_iter().find(|c| !known.contains(c)) {
            Some(c) => Err(Error::UnknownChannel(c)),
            None => Ok(()),
        }
    }

    pub fn successors(&self, node: Node) -> Vec<Node> {
        let next_layer = match node {
            Node::Root => 0,
            Node::Channel { layer, .. } => layer + 1,
            Node::Dest => return Vec::new(),
        };
        match self.layers.get(next_layer) {
            Some(layer) => layer
                .iter()
                .map(|&channel| Node::Channel {
                    layer: next_layer,
                    channel,
                })
                .collect(),
            None => vec![Node::Dest],
        }
    }

    /// All directed edges, in layer order.
    pub fn edges(&self) -> Vec<(Node, Node)> {
        let mut out = Vec::new();
        let mut frontier = vec![Node::Root];
        while let Some(first) = frontier.first().copied() {
            if first == Node::Dest {
                break;
            }
            let next = self.successors(first);
            for &tail in &frontier {
                out.extend(next.iter().map(|&head| (tail, head)));
            }
            frontier = next;
        }
        out
    }

    /// Channels a node stands for; the root expands to all its members.
    pub fn node_channels(&self, node: Node) -> Vec<ChannelId> {
        match node {
            Node::Root => self.root_channels(),
            Node::Channel { channel, .. } => vec![channel],
            Node::Dest => Vec::new(),
        }
    }
}

impl fmt::Display for LayeredDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |cs: &[ChannelId]| {
            cs.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(f, "R  {{{}}}", join(&self.root_channels()))?;
        for (j, layer) in self.layers.iter().enumerate() {
            writeln!(f, "L{} {{{}}}", j + 1, join(layer))?;
        }
        writeln!(f, "D")
    }
}

pub fn build_dag(tasks: &[String], root: &RootSet, rankings: &[RankingSet]) -> Result<LayeredDag> {
    let n_tasks = tasks.len();
    let mut by_task: Vec<Option<&RankingSet>> = vec![None; n_tasks];
    for r in rankings {
        match by_task.get_mut(r.task.0) {
            Some(slot @ None) => *slot = Some(r),
            Some(Some(_)) => {
                return Err(Error::InconsistentRankings(format!(
                    "two ranking sets for task {}",
                    r.task
                )))
            }
            None => {
                return Err(Error::InconsistentRankings(format!(
                    "ranking set for unknown task {}",
                    r.task
                )))
            }
        }
    }
    let by_task: Vec<&RankingSet> = match by_task.into_iter().collect::<Option<Vec<_>>>() {
        Some(v) => v,
        None if rankings.is_empty() => Vec::new(),
        None => {
            return Err(Error::InconsistentRankings(
                "missing ranking set for a task".into(),
            ))
        }
    };

    let universe: BTreeSet<ChannelId> = by_task
        .first()
        .map(|r| r.ordered.iter().copied().collect())
        .unwrap_or_default();
    for r in &by_task {
        let set: BTreeSet<ChannelId> = r.ordered.iter().copied().collect();
        if set.len() != r.ordered.len() {
            return Err(Error::InconsistentRankings(format!(
                "ranking set for task {} repeats a channel",
                r.task
            )));
        }
        if set != universe {
            return Err(Error::InconsistentRankings(
                "ranking sets cover different channels".into(),
            ));
        }
    }
    if let Some(c) = root.channels().into_iter().find(|c| universe.contains(c)) {
        return Err(Error::InconsistentRankings(format!(
            "root channel {c} also appears in a ranking set"
        )));
    }

    let mut placed: HashSet<ChannelId> = HashSet::new();
    let mut cursor = vec![0usize; by_task.len()];
    let mut layers = Vec::new();
    while placed.len() < universe.len() {
        let mut layer = Vec::with_capacity(n_tasks);
        for (t, r) in by_task.iter().enumerate() {
            while cursor[t] < r.ordered.len() && placed.contains(&r.ordered[cursor[t]]) {
                cursor[t] += 1;
            }
            if let Some(&c) = r.ordered.get(cursor[t]) {
                placed.insert(c);
                layer.push(c);
            }
        }
        layers.push(layer);
    }

    LayeredDag::new(tasks.to_vec(), root.clone(), layers)
}

impl ChannelRanking {
    pub fn build_dag(&self) -> Result<LayeredDag> {
        build_dag(&self.tasks, &self.root, &self.rankings)
    }
}

/// A root-to-destination path: one channel chosen per layer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DagPath {
    pub steps: Vec<ChannelId>,
}

impl DagPath {
    /// Root channels followed by the chosen layer channels.
    pub fn channel_set(&self, dag: &LayeredDag) -> Vec<ChannelId> {
        let mut out = dag.root_channels();
        out.extend_from_slice(&self.steps);
        out
    }

    pub fn nodes(&self) -> Vec<Node> {
        std::iter::once(Node::Root)
            .chain(
                self.steps
                    .iter()
                    .enumerate()
                    .map(|(layer, &channel)| Node::Channel { layer, channel }),
            )
            .chain(std::iter::once(Node::Dest))
            .collect()
    }
}

impl fmt::Display for DagPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R")?;
        for c in &self.steps {
            write!(f, " -> {c}")?;
        }
        write!(f, " -> D")
    }
}

/// Every root-to-destination path, lexicographic by in-layer position.
pub fn enumerate_paths(dag: &LayeredDag) -> Vec<DagPath> {
    let layers = dag.layers();
    let mut out = Vec::with_capacity(dag.path_count().min(1 << 20));
    let mut index = vec![0usize; layers.len()];
    loop {
        out.push(DagPath {
            steps: index.iter().zip(layers).map(|(&i, l)| l[i]).collect(),
        });
        // odometer increment, last layer fastest
        let mut j = layers.len();
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            index[j] += 1;
            if index[j] < layers[j].len() {
                break;
            }
            index[j] = 0;
        }
    }
}
