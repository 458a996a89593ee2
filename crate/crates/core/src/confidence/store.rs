//! On-disk registry layout.
//!
//! ```text
//! <dir>/manifest.json   format tag, classifier config, tasks, channels,
//!                       training fingerprint and the list of subset keys
//! <dir>/train.csv       the training fold in dataset CSV format
//! ```
//!
//! k-NN models are the training rows restricted to a key's channels, so one
//! copy of the fold is enough to rebuild every model exactly. Loading
//! refuses a fold whose fingerprint differs from the manifest.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ConfidenceRegistry, SubsetKey, EPSILON};
use crate::error::{Error, Result};
use crate::io::{read_dataset_csv, read_json, write_dataset_csv, write_json};
use crate::model::{ChannelId, Dataset};
use crate::ranking::ClassifierConfig;

pub const REGISTRY_FORMAT: &str = "dbcs-registry/1";
const MANIFEST: &str = "manifest.json";
const TRAIN_FILE: &str = "train.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryManifest {
    pub format: String,
    pub model: String,
    pub classifier: ClassifierConfig,
    pub epsilon: f64,
    pub tasks: Vec<String>,
    pub channels: Vec<ChannelId>,
    pub feature_width: usize,
    pub train_file: String,
    pub train_samples: usize,
    pub train_fingerprint: String,
    pub keys: Vec<SubsetKey>,
}

/// SHA-256 over the fold's channels, task names, width, labels and the
/// exact bit patterns of every feature value.
pub fn fingerprint(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((ds.channels.len() as u64).to_le_bytes());
    for c in &ds.channels {
        h.update(c.0.to_le_bytes());
    }
    h.update((ds.tasks.len() as u64).to_le_bytes());
    for t in &ds.tasks {
        h.update((t.len() as u64).to_le_bytes());
        h.update(t.as_bytes());
    }
    h.update((ds.feature_width as u64).to_le_bytes());
    for s in &ds.samples {
        h.update((s.label.0 as u64).to_le_bytes());
        for v in s.readings.iter().flatten() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

impl ConfidenceRegistry {
    pub fn manifest(&self) -> RegistryManifest {
        RegistryManifest {
            format: REGISTRY_FORMAT.to_string(),
            model: "knn-vote-fraction".to_string(),
            classifier: self.cfg,
            epsilon: EPSILON,
            tasks: self.train.tasks.clone(),
            channels: self.train.channels.clone(),
            feature_width: self.train.feature_width,
            train_file: TRAIN_FILE.to_string(),
            train_samples: self.train.len(),
            train_fingerprint: fingerprint(&self.train),
            keys: self.models.keys().cloned().collect(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_dataset_csv(&self.train, &dir.join(TRAIN_FILE))?;
        write_json(&self.manifest(), &dir.join(MANIFEST))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: RegistryManifest = read_json(&dir.join(MANIFEST))?;
        if manifest.format != REGISTRY_FORMAT {
            return Err(Error::InvalidRegistry(format!(
                "unsupported format {:?}, expected {REGISTRY_FORMAT:?}",
                manifest.format
            )));
        }
        let train_path = dir.join(&manifest.train_file);
        let train = read_dataset_csv(&train_path, Some(&manifest.tasks))?;
        if train.channels != manifest.channels || train.feature_width != manifest.feature_width {
            return Err(Error::InvalidRegistry(
                "training fold layout does not match the manifest".into(),
            ));
        }
        if fingerprint(&train) != manifest.train_fingerprint {
            return Err(Error::InvalidRegistry(
                "training fold fingerprint mismatch".into(),
            ));
        }
        train.ensure_well_formed()?;
        ConfidenceRegistry::from_keys(Arc::new(train), manifest.keys, manifest.classifier)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::ConfidenceSource;
    use crate::model::{Sample, TaskId};

    fn train() -> Dataset {
        let samples = (0..12)
            .map(|i| Sample {
                readings: vec![vec![i as f64 * 0.1 - 0.35], vec![-(i as f64) / 3.0]],
                label: TaskId(i % 3),
            })
            .collect();
        Dataset {
            channels: vec![ChannelId(3), ChannelId(8)],
            tasks: vec!["T1".into(), "T2".into(), "T3".into()],
            feature_width: 1,
            samples,
        }
    }

    fn registry() -> ConfidenceRegistry {
        let keys = vec![
            SubsetKey::new([ChannelId(3)]).unwrap(),
            SubsetKey::new([ChannelId(3), ChannelId(8)]).unwrap(),
        ];
        ConfidenceRegistry::from_keys(Arc::new(train()), keys, ClassifierConfig::default()).unwrap()
    }

    #[test]
    fn save_load_preserves_models() {
        let reg = registry();
        let dir = tempfile::tempdir().unwrap();
        reg.save(dir.path()).unwrap();
        let back = ConfidenceRegistry::load(dir.path()).unwrap();
        assert_eq!(back.manifest(), reg.manifest());
        let ds = train();
        for key in reg.keys() {
            for i in 0..ds.len() {
                assert_eq!(
                    reg.confidence(key, &ds.row(i)).unwrap(),
                    back.confidence(key, &ds.row(i)).unwrap()
                );
            }
        }
    }

    #[test]
    fn tampered_fold_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        registry().save(dir.path()).unwrap();
        let path = dir.path().join(TRAIN_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = ConfidenceRegistry::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("fingerprint"), "{err}");
    }

    #[test]
    fn wrong_format_tag() {
        let dir = tempfile::tempdir().unwrap();
        let reg = registry();
        reg.save(dir.path()).unwrap();
        let mut m = reg.manifest();
        m.format = "something-else/9".into();
        write_json(&m, &dir.path().join(MANIFEST)).unwrap();
        assert!(matches!(
            ConfidenceRegistry::load(dir.path()),
            Err(Error::InvalidRegistry(_))
        ));
    }

    #[test]
    fn fingerprint_sees_value_changes() {
        let a = train();
        let mut b = train();
        b.samples[5].readings[1][0] += 1e-12;
        assert_ne!(fingerprint(&a), fingerprint(&b));
        assert_eq!(fingerprint(&a), fingerprint(&train()));
    }
}
