//! Shared setup for the criterion benchmarks.

use dbcs_core::*;

/// Everything needed to time selection on the built-in 14-channel benchmark.
pub struct Scenario {
    pub dag: LayeredDag,
    pub registry: ConfidenceRegistry,
    pub train: Dataset,
    pub test: Dataset,
}

pub fn benchmark_scenario(seed: u64) -> Result<Scenario> {
    let ds = generate_synthetic(&SynthSpec::benchmark(seed))?;
    let cfg = ClassifierConfig {
        k: 4,
        split: SplitSpec::with_seed(seed),
    };
    let pt = rank_channels(&ds, &cfg)?;
    let dag = ChannelRanking::from_table(&pt)?.build_dag()?;
    let folds = split(&ds, &cfg.split)?;
    let registry = train_registry(&folds.train, &dag, &cfg)?;
    Ok(Scenario {
        dag,
        registry,
        train: folds.train,
        test: folds.test,
    })
}
