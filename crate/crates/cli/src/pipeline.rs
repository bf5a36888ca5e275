//! Pipeline stages. Each reads its predecessors' artifacts from the output
//! directory and records what it wrote in `manifest.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use selftrip_core::config::{fingerprint_of, LoocvMode};
use selftrip_core::corpus::{load_corpus, write_corpus, Corpus, InputFormat, Query};
use selftrip_core::embed::PoiEmbeddings;
use selftrip_core::eval::{evaluate_loocv, write_plot_data, EvalOptions, EvalReport, MarkovTrainer, OracleTrainer, SelfTripTrainer, Trainer};
use selftrip_core::geograph::{augment_graph, build_base_graph, read_walks, write_walks, PoiGraph};
use selftrip_core::selftrain::{self, Model};
use selftrip_core::vocab::Vocabulary;
use selftrip_core::{Error, Result};

use crate::config::Config;

pub const POIS: &str = "pois.csv";
pub const TRIPS: &str = "trips.csv";
pub const GRAPH: &str = "graph.csv";
pub const WALKS: &str = "walks.txt";
pub const EMBEDDINGS: &str = "embeddings.json";
pub const WARMUP: &str = "warmup.json";
pub const MODEL: &str = "model.json";
pub const TRAIN_LOG: &str = "train_log.json";
pub const REPORT: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const PLOT: &str = "plot.csv";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    BuildGraph,
    Walk,
    PretrainPoi,
    Warmup,
    Train,
    Evaluate,
}

impl Stage {
    pub fn command(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::BuildGraph => "build-graph",
            Stage::Walk => "walk",
            Stage::PretrainPoi => "pretrain-poi",
            Stage::Warmup => "warmup",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub fingerprint: String,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<Stage, StageRecord>,
}

/// Output directory plus the config that addresses its artifacts.
pub struct Workspace {
    pub config: Config,
    dir: PathBuf,
}

#[derive(Serialize)]
struct DataKey<'a> {
    pois: &'a Option<PathBuf>,
    trips: &'a Option<PathBuf>,
    format: InputFormat,
    utc_offset_hours: i32,
}

impl Workspace {
    pub fn open(config: Config) -> Result<Self> {
        let dir = config.out_dir.clone();
        fs::create_dir_all(&dir)?;
        Ok(Workspace { config, dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn fingerprint(&self, stage: Stage) -> String {
        match stage {
            Stage::Ingest => {
                let c = &self.config;
                let key = DataKey { pois: &c.pois, trips: &c.trips, format: c.format, utc_offset_hours: c.utc_offset_hours };
                fingerprint_of(&key)
            }
            _ => self.config.train.fingerprint(),
        }
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let path = self.path(MANIFEST);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }

    fn record(&self, stage: Stage, artifacts: &[&str]) -> Result<()> {
        let mut m = self.manifest()?;
        m.stages.insert(
            stage,
            StageRecord {
                fingerprint: self.fingerprint(stage),
                artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
            },
        );
        fs::write(self.path(MANIFEST), serde_json::to_string_pretty(&m).expect("serializable"))?;
        Ok(())
    }

    /// Fails unless `stage` ran with the current config and its artifacts exist.
    /// Ingested data is accepted as-is when no input files are configured.
    pub fn require(&self, stage: Stage) -> Result<()> {
        let m = self.manifest()?;
        let rerun = format!("run `selftrip {}` first", stage.command());
        let rec = m.stages.get(&stage).ok_or_else(|| {
            Error::Validation(format!("missing {} output in {}; {rerun}", stage.command(), self.dir.display()))
        })?;
        let unbound = stage == Stage::Ingest && self.config.pois.is_none() && self.config.trips.is_none();
        if !unbound && rec.fingerprint != self.fingerprint(stage) {
            return Err(Error::Validation(format!(
                "{} output in {} was built with a different config; {rerun}",
                stage.command(),
                self.dir.display()
            )));
        }
        for a in &rec.artifacts {
            if !self.path(a).exists() {
                return Err(Error::Validation(format!("missing artifact {a}; {rerun}")));
            }
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<Corpus> {
        self.require(Stage::Ingest)?;
        load_corpus(&self.path(POIS), &self.path(TRIPS), self.config.tz(), InputFormat::Canonical)
    }

    pub fn ingest(&self) -> Result<Corpus> {
        let c = &self.config;
        let (Some(pois), Some(trips)) = (&c.pois, &c.trips) else {
            return Err(Error::Config(vec!["ingest needs --pois and --trips (or `pois`/`trips` in the config)".into()]));
        };
        let corpus = load_corpus(pois, trips, c.tz(), c.format)?;
        write_corpus(&corpus, &self.path(POIS), &self.path(TRIPS))?;
        self.record(Stage::Ingest, &[POIS, TRIPS])?;
        log::info!(
            "ingested {} POIs, {} trips, {} users, {} visits",
            corpus.pois.len(),
            corpus.trips.len(),
            corpus.user_count(),
            corpus.visit_count()
        );
        Ok(corpus)
    }

    fn graph_nodes(&self, corpus: &Corpus) -> Vocabulary {
        augment_graph(&build_base_graph(&corpus.trips), &corpus.pois, self.config.train.threshold_km)
            .nodes()
            .clone()
    }

    pub fn build_graph(&self) -> Result<PoiGraph> {
        let corpus = self.corpus()?;
        let graph = augment_graph(&build_base_graph(&corpus.trips), &corpus.pois, self.config.train.threshold_km);
        graph.write_csv(BufWriter::new(File::create(self.path(GRAPH))?))?;
        self.record(Stage::BuildGraph, &[GRAPH])?;
        log::info!("graph: {} nodes, {} edges", graph.node_count(), graph.edge_count());
        Ok(graph)
    }

    pub fn walk(&self) -> Result<usize> {
        let corpus = self.corpus()?;
        self.require(Stage::BuildGraph)?;
        let graph = PoiGraph::read_csv(File::open(self.path(GRAPH))?, &self.graph_nodes(&corpus))?;
        let walks = selftrain::walk_corpus_on(&graph, &self.config.train);
        write_walks(BufWriter::new(File::create(self.path(WALKS))?), &walks)?;
        self.record(Stage::Walk, &[WALKS])?;
        log::info!("sampled {} walks", walks.len());
        Ok(walks.len())
    }

    pub fn pretrain_poi(&self) -> Result<Vec<f64>> {
        let corpus = self.corpus()?;
        let vocab = Vocabulary::from_table(&corpus.pois);
        let losses = if self.config.train.pretrain_poi {
            self.require(Stage::Walk)?;
            let walks = read_walks(BufReader::new(File::open(self.path(WALKS))?))?;
            let out = selftrain::pretrain_embeddings(&vocab, &walks, &self.config.train)?;
            write_json(&self.path(EMBEDDINGS), &out.embeddings)?;
            out.epoch_losses
        } else {
            log::info!("POI pretraining disabled; keeping initial embeddings");
            let model = Model::new(vocab, self.config.train.clone())?;
            write_json(&self.path(EMBEDDINGS), &model.embeddings())?;
            Vec::new()
        };
        self.record(Stage::PretrainPoi, &[EMBEDDINGS])?;
        Ok(losses)
    }

    pub fn warmup(&self) -> Result<Vec<f64>> {
        let corpus = self.corpus()?;
        self.require(Stage::PretrainPoi)?;
        let emb: PoiEmbeddings = read_json(&self.path(EMBEDDINGS))?;
        let mut model = Model::new(Vocabulary::from_table(&corpus.pois), self.config.train.clone())?;
        model.set_embeddings(&emb)?;
        let log = if self.config.train.warmup {
            let trips = selftrain::training_trips(&model, &corpus)?;
            selftrain::contrastive_warmup(&mut model, &trips)?
        } else {
            Vec::new()
        };
        model.save(&self.path(WARMUP))?;
        self.record(Stage::Warmup, &[WARMUP])?;
        Ok(log)
    }

    pub fn train(&self) -> Result<Model> {
        let corpus = self.corpus()?;
        self.require(Stage::Warmup)?;
        let mut model = Model::load(&self.path(WARMUP))?;
        let trips = selftrain::training_trips(&model, &corpus)?;
        let supervised = selftrain::supervised_train(&mut model, &trips)?;
        model.save(&self.path(MODEL))?;
        let log = TrainLogFile { supervised };
        write_json(&self.path(TRAIN_LOG), &log)?;
        self.record(Stage::Train, &[MODEL, TRAIN_LOG])?;
        log::info!("model {} written", model.version());
        Ok(model)
    }

    /// All training stages in order.
    pub fn run_all(&self) -> Result<Model> {
        self.ingest()?;
        self.build_graph()?;
        self.walk()?;
        self.pretrain_poi()?;
        self.warmup()?;
        self.train()
    }

    pub fn model(&self) -> Result<Model> {
        self.require(Stage::Train)?;
        Model::load(&self.path(MODEL))
    }

    pub fn evaluate(&self, trainer: TrainerKind, jobs: usize) -> Result<EvalReport> {
        let corpus = self.corpus()?;
        let t = &self.config.train;
        let trainer: Box<dyn Trainer> = match trainer {
            TrainerKind::Selftrip => Box::new(SelfTripTrainer::new(t.clone())),
            TrainerKind::Markov => Box::new(MarkovTrainer),
            TrainerKind::Oracle => Box::new(OracleTrainer::new(&corpus)),
        };
        let options = EvalOptions { mode: t.loocv, seed: t.seed, jobs: jobs.max(1) };
        if let LoocvMode::Kfold(k) = t.loocv {
            log::info!("evaluating with {k} folds");
        }
        let report = evaluate_loocv(&corpus, trainer.as_ref(), options)?;
        fs::write(self.path(REPORT), report.to_json())?;
        report.write_csv(BufWriter::new(File::create(self.path(REPORT_CSV))?))?;
        write_plot_data(BufWriter::new(File::create(self.path(PLOT))?), std::slice::from_ref(&report))?;
        self.record(Stage::Evaluate, &[REPORT, REPORT_CSV, PLOT])?;
        log::info!(
            "{}: mean F1 {:.4}, pairs-F1 {:.4} over {} queries ({} skipped)",
            report.method,
            report.mean_f1,
            report.mean_pairs_f1,
            report.scored,
            report.skipped
        );
        Ok(report)
    }

    pub fn recommend(&self, query: &Query) -> Result<Vec<String>> {
        self.model()?.recommend(query)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TrainerKind {
    Selftrip,
    Markov,
    Oracle,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainLogFile {
    supervised: Vec<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string(value).expect("serializable"))?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}
