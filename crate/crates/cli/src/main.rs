use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tpms_core::acquisition::write_proposal_csv;
use tpms_core::campaign::{
    export_batch_meshes, ingest_results, init_campaign, proposal_rows, propose_next_batch, run_virtual_campaign,
    write_report, CampaignConfig, CampaignState,
};
use tpms_core::surrogate::save_checkpoint;

const STATE_FILE: &str = "campaign.json";

#[derive(Parser, Debug)]
#[command(
    name = "tpms",
    version,
    about = "Closed-loop discovery of energy-dissipating TPMS lattices"
)]
struct Cli {
    /// Campaign state file [default: $TPMS_STATE_DIR/campaign.json, else ./tpms-campaign/campaign.json]
    #[arg(long, global = true)]
    state: Option<PathBuf>,

    /// Directory holding the state file when --state is not given
    #[arg(long, global = true, env = "TPMS_STATE_DIR", hide_env_values = true)]
    state_dir: Option<PathBuf>,

    /// Campaign seed (init and virtual-run)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of Dirichlet candidates scored per proposal
    #[arg(long, global = true)]
    pool_size: Option<usize>,

    /// Exploration weight used instead of the schedule
    #[arg(long, global = true)]
    kappa_override: Option<f64>,

    /// Designs per proposal (and in the initial batch for init)
    #[arg(long, global = true)]
    batch_size: Option<usize>,

    /// Reduced settings: 1e5 candidates, compact 10-member ensemble
    #[arg(long, global = true)]
    fast: bool,

    /// More log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Start a campaign and write the first batch of designs
    Init {
        /// Replace an existing state file
        #[arg(long)]
        force: bool,
    },
    /// Retrain on all measurements and propose the next batch
    Propose,
    /// Ingest replicate curves named <design-id>_rep<k>.csv
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Batch statistics, PCA projection and curve data
    Report {
        /// Output directory [default: <state dir>/report]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binary STL per design of a batch
    ExportMeshes {
        batch: usize,
        /// Output directory [default: <state dir>/meshes/batch-NN]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full synthetic campaign against the virtual lab
    VirtualRun {
        /// Number of batches [default: 10]
        #[arg(long)]
        batches: Option<usize>,
        /// Report directory [default: <state dir>/report]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Cli {
    fn state_path(&self) -> PathBuf {
        if let Some(p) = &self.state {
            return p.clone();
        }
        self.state_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("tpms-campaign"))
            .join(STATE_FILE)
    }

    fn base_config(&self) -> CampaignConfig {
        if self.fast {
            CampaignConfig::fast()
        } else {
            CampaignConfig::default()
        }
    }

    fn apply_overrides(&self, config: &mut CampaignConfig) {
        if let Some(n) = self.pool_size {
            config.pool_size = n;
        }
        if let Some(k) = self.kappa_override {
            config.kappa_override = Some(k);
        }
        if let Some(n) = self.batch_size {
            config.proposal_size = n;
            config.fabricate_count = config.fabricate_count.min(n);
        }
    }
}

fn state_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn proposal_path(state_path: &Path, batch: usize) -> PathBuf {
    state_dir(state_path)
        .join("proposals")
        .join(format!("batch-{batch:02}.csv"))
}

fn write_batch_proposal(state: &CampaignState, state_path: &Path, batch: usize) -> Result<PathBuf> {
    let path = proposal_path(state_path, batch);
    std::fs::create_dir_all(path.parent().expect("has parent"))?;
    write_proposal_csv(&proposal_rows(state, batch)?, &path)?;
    Ok(path)
}

fn load(path: &Path) -> Result<CampaignState> {
    CampaignState::load(path).with_context(|| format!("loading campaign state {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let state_path = cli.state_path();
    match &cli.command {
        Command::Init { force } => {
            if state_path.exists() && !force {
                bail!("{} already exists; pass --force to replace it", state_path.display());
            }
            let mut config = cli.base_config();
            cli.apply_overrides(&mut config);
            if let Some(n) = cli.batch_size {
                config.initial_batch_size = n;
            }
            let state = init_campaign(config, cli.seed.unwrap_or(0))?;
            state.save(&state_path)?;
            let file = write_batch_proposal(&state, &state_path, 1)?;
            println!(
                "initialized {} with {} designs in batch 1; proposal written to {}",
                state_path.display(),
                state.batches[0].proposed.len(),
                file.display()
            );
        }
        Command::Propose => {
            let mut state = load(&state_path)?;
            if cli.seed.is_some() {
                log::warn!(
                    "--seed is fixed at init; the stored campaign seed {} is used",
                    state.seed
                );
            }
            cli.apply_overrides(&mut state.config);
            state.config.validate()?;
            let proposal = propose_next_batch(&mut state)?;
            let dir = state_dir(&state_path);
            let ckpt = format!("ensemble-b{:02}.bin", proposal.batch_index);
            std::fs::create_dir_all(dir.join("models"))?;
            save_checkpoint(&proposal.model, &dir.join("models").join(&ckpt))?;
            state.checkpoint = Some(format!("models/{ckpt}"));
            state.save(&state_path)?;
            let file = write_batch_proposal(&state, &state_path, proposal.batch_index)?;
            println!(
                "batch {}: {} designs (κ = {}){}; {} unprintable candidates skipped; written to {}",
                proposal.batch_index,
                proposal.rows.len(),
                proposal.kappa,
                if proposal.partial { ", pool exhausted" } else { "" },
                proposal.rejected_unprintable,
                file.display()
            );
        }
        Command::Ingest { files } => {
            let mut state = load(&state_path)?;
            let report = ingest_results(&mut state, files)?;
            state.save(&state_path)?;
            println!(
                "stored {} designs, {} unchanged, {} single-replicate",
                report.stored.len(),
                report.unchanged.len(),
                report.single_replicate.len()
            );
        }
        Command::Report { out } => {
            let state = load(&state_path)?;
            let dir = out.clone().unwrap_or_else(|| state_dir(&state_path).join("report"));
            let (report, _) = write_report(&state, &dir)?;
            print!("{}", report.to_text());
            println!("report written to {}", dir.display());
        }
        Command::ExportMeshes { batch, out } => {
            let state = load(&state_path)?;
            let dir = out
                .clone()
                .unwrap_or_else(|| state_dir(&state_path).join("meshes").join(format!("batch-{batch:02}")));
            let summary = export_batch_meshes(&state, *batch, &dir)?;
            for (id, reason) in &summary.skipped {
                println!("skipped {id}: {reason}");
            }
            println!("{} STL files written to {}", summary.written.len(), dir.display());
        }
        Command::VirtualRun { batches, out } => {
            let mut config = cli.base_config();
            cli.apply_overrides(&mut config);
            if let Some(b) = batches {
                config.total_batches = *b;
            }
            let seed = cli.seed.unwrap_or(0);
            let start = Instant::now();
            let run = run_virtual_campaign(config, seed)?;
            run.state.save(&state_path)?;
            let dir = out.clone().unwrap_or_else(|| state_dir(&state_path).join("report"));
            let (report, _) = write_report(&run.state, &dir)?;
            print!("{}", report.to_text());
            println!(
                "virtual campaign (seed {seed}) finished in {:.1} s; state {}, report {}",
                start.elapsed().as_secs_f64(),
                state_path.display(),
                dir.display()
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
