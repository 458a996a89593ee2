//! Subset confidence: the weight function that maps the readings of a set
//! of channels to a class decision with confidence in (0, 1].
//!
//! One model is trained per channel subset ([`SubsetKey`]). A DAG needs two
//! kinds of subsets: edge subsets (the tail node's channels plus the head
//! channel) and path-prefix subsets (everything accumulated from the root).
//! A key identifies its model regardless of which role asks for it.

mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::{LayeredDag, Node};
use crate::error::{Error, Result};
use crate::knn::{argmax_first, KnnModel};
use crate::model::{ChannelId, Dataset, ReadingSource, TaskId};
use crate::ranking::ClassifierConfig;

pub use store::{fingerprint, RegistryManifest, REGISTRY_FORMAT};

/// Lower clamp on reported confidence, keeping values inside (0, 1].
pub const EPSILON: f64 = 1e-6;

/// Non-empty, strictly ascending set of channels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<ChannelId>", into = "Vec<ChannelId>")]
pub struct SubsetKey(Vec<ChannelId>);

impl SubsetKey {
    pub fn new(channels: impl IntoIterator<Item = ChannelId>) -> Result<Self> {
        let set: BTreeSet<ChannelId> = channels.into_iter().collect();
        if set.is_empty() {
            return Err(Error::MissingModel("{}".into()));
        }
        Ok(Self(set.into_iter().collect()))
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<ChannelId>> for SubsetKey {
    type Error = Error;

    fn try_from(v: Vec<ChannelId>) -> Result<Self> {
        let n = v.len();
        let key = SubsetKey::new(v)?;
        if key.len() != n {
            return Err(Error::InvalidRegistry(format!(
                "subset {key} repeats a channel"
            )));
        }
        Ok(key)
    }
}

impl From<SubsetKey> for Vec<ChannelId> {
    fn from(k: SubsetKey) -> Self {
        k.0
    }
}

impl fmt::Display for SubsetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub task: TaskId,
    pub value: f64,
}

impl Confidence {
    /// Argmax class (lowest index on ties) with its probability clamped to [EPSILON, 1].
    pub fn from_posterior(posterior: &[f64]) -> Self {
        let best = argmax_first(posterior);
        let value = posterior.get(best).copied().unwrap_or(0.0);
        Confidence {
            task: TaskId(best),
            value: if value.is_nan() {
                EPSILON
            } else {
                value.clamp(EPSILON, 1.0)
            },
        }
    }
}

/// The weight function: confidence of a channel subset given current readings.
pub trait ConfidenceSource {
    fn confidence(&self, key: &SubsetKey, readings: &dyn ReadingSource) -> Result<Confidence>;
}

/// Concatenates the key's readings in key order.
pub fn gather(key: &SubsetKey, readings: &dyn ReadingSource) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for &c in key.channels() {
        out.extend_from_slice(readings.reading(c).ok_or(Error::MissingReading(c))?);
    }
    Ok(out)
}

fn prefix_keys(
    dag: &LayeredDag,
    prefix: &mut Vec<ChannelId>,
    layer: usize,
    out: &mut BTreeSet<SubsetKey>,
) {
    out.insert(SubsetKey::new(prefix.iter().copied()).expect("root is non-empty"));
    if let Some(nodes) = dag.layers().get(layer) {
        for &c in nodes {
            prefix.push(c);
            prefix_keys(dag, prefix, layer + 1, out);
            prefix.pop();
        }
    }
}

/// Every subset the DAG search may ask about: one per non-terminal edge
/// (tail channels plus head channel) and one per root-anchored path prefix.
///
/// The prefix count is the sum of partial products of layer sizes, so it
/// grows exponentially with depth.
pub fn enumerate_model_keys(dag: &LayeredDag) -> BTreeSet<SubsetKey> {
    let mut keys = BTreeSet::new();
    for (tail, head) in dag.edges() {
        if let Node::Channel { channel, .. } = head {
            let mut chans = dag.node_channels(tail);
            chans.push(channel);
            keys.insert(SubsetKey::new(chans).expect("non-empty"));
        }
    }
    prefix_keys(dag, &mut dag.root_channels(), 0, &mut keys);
    keys
}

fn fit_key(train: &Dataset, key: &SubsetKey, k: usize) -> Result<KnnModel> {
    let (features, labels) = train.project(key.channels())?;
    KnnModel::fit(
        features,
        labels,
        key.len() * train.feature_width,
        train.n_tasks(),
        k,
    )
}

fn check_k(train: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::KZero);
    }
    if k > train.len() {
        return Err(Error::KTooLarge {
            k,
            train: train.len(),
        });
    }
    Ok(())
}

/// Trained k-NN subset models for every key of one DAG.
#[derive(Debug, Clone)]
pub struct ConfidenceRegistry {
    cfg: ClassifierConfig,
    train: Arc<Dataset>,
    models: BTreeMap<SubsetKey, KnnModel>,
}

impl ConfidenceRegistry {
    pub fn config(&self) -> &ClassifierConfig {
        &self.cfg
    }

    pub fn train_set(&self) -> &Dataset {
        &self.train
    }

    pub fn tasks(&self) -> &[String] {
        &self.train.tasks
    }

    pub fn keys(&self) -> impl Iterator<Item = &SubsetKey> {
        self.models.keys()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn contains(&self, key: &SubsetKey) -> bool {
        self.models.contains_key(key)
    }

    fn from_keys(train: Arc<Dataset>, keys: Vec<SubsetKey>, cfg: ClassifierConfig) -> Result<Self> {
        check_k(&train, cfg.k)?;
        let models = keys
            .into_par_iter()
            .map(|key| fit_key(&train, &key, cfg.k).map(|m| (key, m)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self { cfg, train, models })
    }
}

/// Fits one k-NN model per DAG subset key on the training fold.
pub fn train_registry(
    train: &Dataset,
    dag: &LayeredDag,
    cfg: &ClassifierConfig,
) -> Result<ConfidenceRegistry> {
    train.ensure_well_formed()?;
    dag.check_channels(&train.channels)?;
    let keys: Vec<SubsetKey> = enumerate_model_keys(dag).into_iter().collect();
    log::debug!("training {} models on {} samples", keys.len(), train.len());
    ConfidenceRegistry::from_keys(Arc::new(train.clone()), keys, *cfg)
}

impl ConfidenceSource for ConfidenceRegistry {
    fn confidence(&self, key: &SubsetKey, readings: &dyn ReadingSource) -> Result<Confidence> {
        let model = self
            .models
            .get(key)
            .ok_or_else(|| Error::MissingModel(key.to_string()))?;
        let query = gather(key, readings)?;
        Ok(Confidence::from_posterior(&model.posterior(&query)?))
    }
}

/// Models trained on first use and memoised; serves arbitrary subsets.
/// Safe to share between threads; a subset's model does not depend on which
/// query trained it.
#[derive(Debug)]
pub struct LazyRegistry {
    cfg: ClassifierConfig,
    train: Arc<Dataset>,
    cache: Mutex<HashMap<SubsetKey, Arc<KnnModel>>>,
}

impl LazyRegistry {
    pub fn new(train: &Dataset, cfg: &ClassifierConfig) -> Result<Self> {
        train.ensure_well_formed()?;
        check_k(train, cfg.k)?;
        Ok(Self {
            cfg: *cfg,
            train: Arc::new(train.clone()),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn trained_count(&self) -> usize {
        self.cache.lock().expect("cache poisoned").len()
    }

    fn model(&self, key: &SubsetKey) -> Result<Arc<KnnModel>> {
        if let Some(m) = self.cache.lock().expect("cache poisoned").get(key) {
            return Ok(Arc::clone(m));
        }
        let fitted = Arc::new(fit_key(&self.train, key, self.cfg.k)?);
        let mut cache = self.cache.lock().expect("cache poisoned");
        Ok(Arc::clone(cache.entry(key.clone()).or_insert(fitted)))
    }
}

impl ConfidenceSource for LazyRegistry {
    fn confidence(&self, key: &SubsetKey, readings: &dyn ReadingSource) -> Result<Confidence> {
        let model = self.model(key)?;
        let query = gather(key, readings)?;
        Ok(Confidence::from_posterior(&model.posterior(&query)?))
    }
}

/// Fixed confidences per subset, independent of the reading values. Used for
/// hand-built scenarios; it still reads every key channel so missing
/// readings surface as errors.
#[derive(Debug, Clone, Default)]
pub struct TableConfidence {
    entries: BTreeMap<SubsetKey, Confidence>,
}

impl TableConfidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: SubsetKey, conf: Confidence) {
        self.entries.insert(key, conf);
    }

    /// Shorthand: `set(&[1, 2], TaskId(0), 0.6)`.
    pub fn set(&mut self, channels: &[u32], task: TaskId, value: f64) -> &mut Self {
        let key = SubsetKey::new(channels.iter().copied().map(ChannelId)).expect("non-empty");
        self.insert(key, Confidence { task, value });
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ConfidenceSource for TableConfidence {
    fn confidence(&self, key: &SubsetKey, readings: &dyn ReadingSource) -> Result<Confidence> {
        let conf = *self
            .entries
            .get(key)
            .ok_or_else(|| Error::MissingModel(key.to_string()))?;
        gather(key, readings)?;
        Ok(Confidence {
            task: conf.task,
            value: conf.value.clamp(EPSILON, 1.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelReadings, Sample};
    use crate::ranking::{RootMember, RootSet};

    fn ids(v: &[u32]) -> Vec<ChannelId> {
        v.iter().copied().map(ChannelId).collect()
    }

    fn key(v: &[u32]) -> SubsetKey {
        SubsetKey::new(ids(v)).unwrap()
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

    #[test]
    fn subset_key_sorts_and_dedups() {
        assert_eq!(key(&[5, 1, 3, 1]).channels(), &ids(&[1, 3, 5])[..]);
        assert!(SubsetKey::new(Vec::new()).is_err());
        assert!(SubsetKey::try_from(ids(&[2, 2])).is_err());
        assert_eq!(key(&[3, 1]).to_string(), "{1,3}");
    }

    #[test]
    fn zero_layer_dag_has_one_key() {
        let keys = enumerate_model_keys(&dag(&[1, 2], &[]));
        assert_eq!(keys.into_iter().collect::<Vec<_>>(), vec![key(&[1, 2])]);
    }

    #[test]
    fn single_node_layers() {
        // root {r}, layers [a], [b]: root, root+a, root+a+b and the pair {a,b}
        let keys = enumerate_model_keys(&dag(&[1], &[&[2], &[3]]));
        let expected: BTreeSet<_> = [key(&[1]), key(&[1, 2]), key(&[1, 2, 3]), key(&[2, 3])].into();
        assert_eq!(keys, expected);
    }

    #[test]
    fn posterior_to_confidence() {
        let c = Confidence::from_posterior(&[0.0, 1.0, 0.0]);
        assert_eq!((c.task, c.value), (TaskId(1), 1.0));
        let c = Confidence::from_posterior(&[0.5, 0.25, 0.25]);
        assert_eq!((c.task, c.value), (TaskId(0), 0.5));
        let c = Confidence::from_posterior(&[0.5, 0.5, 0.0]);
        assert_eq!((c.task, c.value), (TaskId(0), 0.5));
        let c = Confidence::from_posterior(&[0.0, 0.0]);
        assert_eq!(c.value, EPSILON);
    }

    fn toy_train() -> Dataset {
        // channel 1 separates the classes, channel 2 is noise
        let samples = (0..20)
            .map(|i| Sample {
                readings: vec![
                    vec![if i % 2 == 0 { -1.0 } else { 1.0 }],
                    vec![(i % 5) as f64],
                ],
                label: TaskId(i % 2),
            })
            .collect();
        Dataset {
            channels: ids(&[1, 2]),
            tasks: vec!["A".into(), "B".into()],
            feature_width: 1,
            samples,
        }
    }

    #[test]
    fn registry_serves_dag_keys() {
        let train = toy_train();
        let d = dag(&[1], &[&[2]]);
        let reg = train_registry(&train, &d, &ClassifierConfig::default()).unwrap();
        assert_eq!(reg.len(), 2);
        let mut readings = ChannelReadings::new();
        readings.insert(ChannelId(1), vec![1.0]);
        let c = reg.confidence(&key(&[1]), &readings).unwrap();
        assert_eq!((c.task, c.value), (TaskId(1), 1.0));
        assert!(matches!(
            reg.confidence(&key(&[1, 2]), &readings),
            Err(Error::MissingReading(ChannelId(2)))
        ));
        assert!(matches!(
            reg.confidence(&key(&[2]), &readings),
            Err(Error::MissingModel(_))
        ));
    }

    #[test]
    fn k_exceeds_training_size() {
        let mut train = toy_train();
        train.samples.truncate(3);
        train.samples[2].label = TaskId(1);
        let err =
            train_registry(&train, &dag(&[1], &[]), &ClassifierConfig::default()).unwrap_err();
        assert!(err.to_string().contains("k exceeds training size"), "{err}");
    }

    #[test]
    fn dag_channel_missing_from_dataset() {
        let err = train_registry(
            &toy_train(),
            &dag(&[1], &[&[9]]),
            &ClassifierConfig::default(),
        );
        assert!(matches!(err, Err(Error::UnknownChannel(ChannelId(9)))));
    }

    #[test]
    fn lazy_registry_matches_eager() {
        let train = toy_train();
        let d = dag(&[1], &[&[2]]);
        let cfg = ClassifierConfig::default();
        let eager = train_registry(&train, &d, &cfg).unwrap();
        let lazy = LazyRegistry::new(&train, &cfg).unwrap();
        let row = train.row(3);
        for k in eager.keys() {
            assert_eq!(
                eager.confidence(k, &row).unwrap(),
                lazy.confidence(k, &row).unwrap()
            );
        }
        assert_eq!(lazy.trained_count(), 2);
    }

    #[test]
    fn table_confidence_clamps_and_requires_readings() {
        let mut t = TableConfidence::new();
        t.set(&[1], TaskId(0), 0.0);
        let mut r = ChannelReadings::new();
        assert!(t.confidence(&key(&[1]), &r).is_err());
        r.insert(ChannelId(1), vec![0.0]);
        assert_eq!(t.confidence(&key(&[1]), &r).unwrap().value, EPSILON);
    }
}
