#![allow(dead_code)]

use std::path::Path;

use selftrip_cli::config::Config;
use selftrip_core::config::TrainConfig;
use selftrip_core::corpus::{write_corpus, Corpus};
use selftrip_core::synth;

pub fn corpus() -> Corpus {
    synth::memorization_corpus(3)
}

/// Writes the fixture corpus under `dir` and returns a fast config pointing at it.
pub fn fixture(dir: &Path) -> Config {
    let pois = dir.join("in_pois.csv");
    let trips = dir.join("in_trips.csv");
    write_corpus(&corpus(), &pois, &trips).unwrap();
    Config {
        pois: Some(pois),
        trips: Some(trips),
        out_dir: dir.join("out"),
        train: TrainConfig { supervised_epochs: 20, ..TrainConfig::small() },
        ..Config::default()
    }
}
