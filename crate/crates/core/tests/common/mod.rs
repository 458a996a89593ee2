#![allow(dead_code)]

use std::collections::HashSet;

use dbcs_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn count_paths(layers: &[Vec<ChannelId>]) -> usize {
    match layers.split_first() {
        None => 1,
        Some((first, rest)) => first.iter().map(|_| count_paths(rest)).sum(),
    }
}

/// Keys rebuilt straight from the layer lists, without the DAG's edge API.
pub fn brute_force_keys(dag: &LayeredDag) -> HashSet<Vec<ChannelId>> {
    fn prefixes(
        layers: &[Vec<ChannelId>],
        acc: &mut Vec<ChannelId>,
        out: &mut HashSet<Vec<ChannelId>>,
    ) {
        let mut s = acc.clone();
        s.sort();
        out.insert(s);
        if let Some((first, rest)) = layers.split_first() {
            for &c in first {
                acc.push(c);
                prefixes(rest, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = HashSet::new();
    let root = dag.root_channels();
    prefixes(dag.layers(), &mut root.clone(), &mut out);
    if let Some(first) = dag.layers().first() {
        for &c in first {
            let mut s = root.clone();
            s.push(c);
            s.sort();
            out.insert(s);
        }
    }
    for w in dag.layers().windows(2) {
        for &a in &w[0] {
            for &b in &w[1] {
                out.insert(if a < b { vec![a, b] } else { vec![b, a] });
            }
        }
    }
    out
}

pub fn ids(v: &[u32]) -> Vec<ChannelId> {
    v.iter().copied().map(ChannelId).collect()
}

/// One randomized selection scenario.
pub struct Instance {
    pub ranking: ChannelRanking,
    pub dag: LayeredDag,
    pub table: TableConfidence,
    pub readings: ChannelReadings,
    pub threshold: Threshold,
}

fn grid(rng: &mut ChaCha8Rng, steps: u32) -> f64 {
    // coarse values so that ties are common
    f64::from(rng.random_range(1..=steps)) / f64::from(steps)
}

/// Random DAG (<= 20 channels, <= 5 tasks) built through the real ranking
/// pipeline from a random precision table, a random fixed-value registry
/// over every model key, and a random reading row.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_tasks = rng.random_range(1..=5usize);
    let n_channels = rng.random_range(n_tasks + 1..=20usize);
    let mut pool: Vec<u32> = (0..60).collect();
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let i = rng.random_range(0..pool.len());
        channels.push(ChannelId(pool.swap_remove(i)));
    }
    let pt = PrecisionTable {
        channels: channels.clone(),
        tasks: (1..=n_tasks).map(|t| format!("T{t}")).collect(),
        precision: (0..n_channels)
            .map(|_| (0..n_tasks).map(|_| grid(&mut rng, 8)).collect())
            .collect(),
        overall: vec![0.5; n_channels],
    };
    let ranking = ChannelRanking::from_table(&pt).unwrap();
    let dag = ranking.build_dag().unwrap();

    let mut table = TableConfidence::new();
    for key in enumerate_model_keys(&dag) {
        let value = grid(&mut rng, 20);
        let task = TaskId(rng.random_range(0..n_tasks));
        table.insert(key, Confidence { task, value });
    }
    let mut readings = ChannelReadings::new();
    for &c in &channels {
        readings.insert(c, vec![rng.random_range(-1.0..1.0)]);
    }
    let threshold = Threshold::new(grid(&mut rng, 10)).unwrap();
    Instance {
        ranking,
        dag,
        table,
        readings,
        threshold,
    }
}

/// Trained k-NN registry on a small random synthetic dataset, for instances
/// whose confidences depend on the readings.
pub fn random_trained_instance(seed: u64) -> (LayeredDag, ConfidenceRegistry, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_tasks = rng.random_range(2..=4usize);
    let n_channels = rng.random_range(n_tasks + 1..=12usize);
    let channels: Vec<ChannelId> = (1..=n_channels as u32).map(ChannelId).collect();
    let informative: Vec<Vec<ChannelId>> = (0..n_tasks)
        .map(|t| vec![channels[(t * 2) % n_channels]])
        .collect();
    let spec = synth::SynthSpec::one_vs_rest(channels, &informative, 1.5, 25, seed);
    let ds = generate_synthetic(&spec).unwrap();
    let cfg = ClassifierConfig {
        k: 4,
        split: SplitSpec::with_seed(seed),
    };
    let pt = rank_channels(&ds, &cfg).unwrap();
    let dag = ChannelRanking::from_table(&pt)
        .unwrap()
        .build_dag()
        .unwrap();
    let folds = split(&ds, &cfg.split).unwrap();
    let reg = train_registry(&folds.train, &dag, &cfg).unwrap();
    (dag, reg, folds.test)
}
