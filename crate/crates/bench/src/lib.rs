//! Fixed inputs shared by the benchmarks.

use fruler_core::evolution::{initialize_population, Chromosome};
use fruler_core::pipeline::tune_consequents;
use fruler_core::synthetic::friedman1;
use fruler_core::{discretize_dataset, select_instances, Dataset, GranularityLadder, SgdConfig};

pub const SEED: u64 = 11;

pub fn friedman(n: usize) -> Dataset {
    friedman1(n, 1.0, SEED)
}

/// Everything a fitness evaluation needs, prepared once outside the timed
/// loop.
pub struct FitnessFixture {
    pub train: Dataset,
    pub selected: Dataset,
    pub ladders: Vec<GranularityLadder>,
    pub sgd: SgdConfig,
    pub chromosomes: Vec<Chromosome>,
}

impl FitnessFixture {
    pub fn new(n: usize) -> Self {
        let train = friedman(n);
        let selected = train.subset(&select_instances(&train).expect("selection").selected);
        let ladders = discretize_dataset(&selected);
        let tuned = tune_consequents(&selected, 0.95, SEED).expect("tuning");
        let sgd = SgdConfig {
            lambda: tuned.lambda,
            alpha: 0.95,
            eta0: tuned.eta0,
            seed: SEED,
        };
        let chromosomes = initialize_population(&ladders, 16, SEED);
        Self {
            train,
            selected,
            ladders,
            sgd,
            chromosomes,
        }
    }
}
