use std::net::SocketAddr;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use selftrip_cli::config::Overrides;
use selftrip_cli::exit_code;
use selftrip_cli::pipeline::{TrainerKind, Workspace};
use selftrip_cli::serve::{router, ServiceState};
use selftrip_core::corpus::Query;
use selftrip_core::{Error, Result};

/// Query-conditioned trip recommendation.
#[derive(Parser)]
#[command(name = "selftrip", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalise the POI and trip files.
    Ingest,
    /// Build the base graph and augment it with geographic edges.
    BuildGraph,
    /// Sample random walks over the augmented graph.
    Walk,
    /// Learn POI embeddings from the walks.
    PretrainPoi,
    /// Contrastive warm-up of the query and trip encoders.
    Warmup,
    /// Supervised training; writes model.json.
    Train,
    /// Run every training stage in order.
    RunAll,
    /// Leave-one-out evaluation.
    Evaluate {
        #[arg(long, value_enum, default_value = "selftrip")]
        trainer: TrainerKind,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Recommend one trip from the trained model.
    Recommend {
        #[arg(long)]
        start: String,
        #[arg(long)]
        end: String,
        #[arg(long)]
        start_hour: u8,
        #[arg(long)]
        end_hour: u8,
        #[arg(long)]
        n: usize,
    },
    /// Serve the trained model over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Allowed browser origin; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let ws = Workspace::open(cli.overrides.resolve()?)?;
    match cli.command {
        Command::Ingest => {
            let c = ws.ingest()?;
            println!("{} POIs, {} trips", c.pois.len(), c.trips.len());
        }
        Command::BuildGraph => {
            let g = ws.build_graph()?;
            println!("{} nodes, {} edges", g.node_count(), g.edge_count());
        }
        Command::Walk => println!("{} walks", ws.walk()?),
        Command::PretrainPoi => print_losses("poi", &ws.pretrain_poi()?),
        Command::Warmup => print_losses("warm-up", &ws.warmup()?),
        Command::Train => println!("model {}", ws.train()?.version()),
        Command::RunAll => println!("model {}", ws.run_all()?.version()),
        Command::Evaluate { trainer, jobs } => {
            let r = ws.evaluate(trainer, jobs)?;
            println!("{}: F1 {:.4} pairs-F1 {:.4} ({} scored, {} skipped)", r.method, r.mean_f1, r.mean_pairs_f1, r.scored, r.skipped);
        }
        Command::Recommend { start, end, start_hour, end_hour, n } => {
            let trip = ws.recommend(&Query { start_poi: start, start_hour, end_poi: end, end_hour, n })?;
            println!("{}", serde_json::json!({ "trip": trip }));
        }
        Command::Serve { addr, cors_origin } => serve(ws, addr, cors_origin)?,
    }
    Ok(())
}

fn print_losses(label: &str, losses: &[f64]) {
    match losses.last() {
        Some(l) => println!("{label}: {} epochs, final loss {l:.6}", losses.len()),
        None => println!("{label}: skipped"),
    }
}

fn serve(ws: Workspace, addr: SocketAddr, cors_origin: Option<String>) -> Result<()> {
    let pois = ws.corpus()?.pois;
    ws.require(selftrip_cli::pipeline::Stage::Train)?;
    let state = Arc::new(ServiceState::new(pois));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        let loader = state.clone();
        tokio::task::spawn_blocking(move || match ws.model() {
            Ok(m) => {
                log::info!("model {} loaded", m.version());
                loader.install(m);
            }
            Err(e) => log::error!("model failed to load: {e}"),
        });
        let app = router(state, cors_origin.as_deref());
        axum::serve(listener, app).await.map_err(Error::from)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
