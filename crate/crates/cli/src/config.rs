use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use selftrip_core::config::{LoocvMode, TrainConfig, Variant};
use selftrip_core::corpus::{InputFormat, UtcOffset};
use selftrip_core::{Error, Result};

/// Everything a pipeline run needs; loaded from JSON, then patched by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pois: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub format: InputFormat,
    pub utc_offset_hours: i32,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            pois: None,
            trips: None,
            format: InputFormat::Canonical,
            utc_offset_hours: 0,
            out_dir: PathBuf::from("out"),
            train: TrainConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))
    }

    pub fn tz(&self) -> UtcOffset {
        UtcOffset::hours(self.utc_offset_hours)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = match self.train.validate() {
            Ok(()) => Vec::new(),
            Err(Error::Config(p)) => p,
            Err(e) => return Err(e),
        };
        if !(-12..=14).contains(&self.utc_offset_hours) {
            problems.push(format!("utc_offset_hours {} outside -12..=14", self.utc_offset_hours));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub pois: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trips: Option<PathBuf>,
    /// Input layout: canonical or flickr.
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<InputFormat>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub utc_offset_hours: Option<i32>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub alpha: Option<usize>,
    #[arg(long, global = true)]
    pub poi_dim: Option<usize>,
    #[arg(long, global = true)]
    pub query_dim: Option<usize>,
    #[arg(long, global = true)]
    pub hidden_dim: Option<usize>,
    #[arg(long, global = true)]
    pub poi_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub warmup_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub supervised_epochs: Option<usize>,
    #[arg(long, global = true)]
    pub threshold_km: Option<f64>,
    #[arg(long, global = true)]
    pub beam_width: Option<usize>,
    /// Train one model per fold instead of one per held-out trip.
    #[arg(long, global = true)]
    pub loocv_folds: Option<usize>,
    /// Skip the contrastive warm-up.
    #[arg(long, global = true)]
    pub no_warmup: bool,
    /// Drop the destination term from the supervised loss.
    #[arg(long, global = true)]
    pub no_dest_signal: bool,
    /// Concatenate endpoint encodings instead of the bilinear query encoder.
    #[arg(long, global = true)]
    pub concat_query: bool,
    /// Skip POI pretraining and learn embeddings in the supervised phase.
    #[arg(long, global = true)]
    pub no_pretrain: bool,
    #[arg(long, global = true)]
    pub finetune_embeddings: bool,
}

fn parse_format(s: &str) -> std::result::Result<InputFormat, String> {
    match s {
        "canonical" => Ok(InputFormat::Canonical),
        "flickr" => Ok(InputFormat::Flickr),
        other => Err(format!("unknown format `{other}` (expected canonical or flickr)")),
    }
}

impl Overrides {
    /// Config file (or defaults) with every given flag applied, validated.
    pub fn resolve(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(
            out_dir => out_dir,
            format => format,
            utc_offset_hours => utc_offset_hours,
            seed => train.seed,
            lr => train.lr,
            batch_size => train.batch_size,
            alpha => train.alpha,
            poi_dim => train.poi_dim,
            query_dim => train.query_dim,
            hidden_dim => train.hidden_dim,
            poi_epochs => train.poi_epochs,
            warmup_epochs => train.warmup_epochs,
            supervised_epochs => train.supervised_epochs,
            threshold_km => train.threshold_km,
            beam_width => train.beam_width,
        );
        if self.pois.is_some() {
            c.pois = self.pois.clone();
        }
        if self.trips.is_some() {
            c.trips = self.trips.clone();
        }
        if let Some(k) = self.loocv_folds {
            c.train.loocv = LoocvMode::Kfold(k);
        }
        if self.no_warmup {
            c.train = c.train.with_variant(Variant::NoWarmup);
        }
        if self.no_dest_signal {
            c.train = c.train.with_variant(Variant::NoDestSignal);
        }
        if self.concat_query {
            c.train = c.train.with_variant(Variant::ConcatQuery);
        }
        if self.no_pretrain {
            c.train.pretrain_poi = false;
        }
        if self.finetune_embeddings {
            c.train.finetune_embeddings = true;
        }
        c.validate()?;
        Ok(c)
    }
}
