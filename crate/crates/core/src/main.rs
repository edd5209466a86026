use clap::{Parser, Subcommand};
use smsim::modem::build_constellation;
use smsim::precode::max_beam_count;
use smsim::simkit::engine::ml_ops_for;
use smsim::simkit::{load_config, run_campaign, theory_overlay, write_csv, SimConfig, SimError, SystemKind};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "smsim",
    about = "Link-level simulator for index-keyed multi-user downlinks \
             over correlated massive MIMO channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo campaigns in a config file and write a CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; also settable via SM_SIM_WORKERS. Results are
        /// identical for any value.
        #[arg(long)]
        workers: Option<usize>,
        /// Override every campaign's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Suppress the timing line on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Write analytical-bound curves for the configured campaigns.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a config file and print what each campaign would run.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn worker_count(cli_workers: Option<usize>) -> Option<usize> {
    cli_workers.or_else(|| {
        std::env::var("SM_SIM_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
}

fn describe(idx: usize, cfg: &SimConfig) {
    let c = &cfg.channel;
    let cons = build_constellation(cfg.mod_order).expect("validated order");
    let bits = cfg.bits_per_symbol();
    // The inversion system realizes a square geometry of its own.
    let (n_tx, n_rx) = match cfg.system {
        SystemKind::ChannelInversion => (c.n_users, 1),
        _ => (c.n_tx, c.n_rx),
    };
    print!(
        "campaign {idx}: system={} k_users={} n_tx={n_tx} n_rx={n_rx}",
        cfg.system.as_str(),
        c.n_users,
    );
    match cfg.system {
        SystemKind::BdSm | SystemKind::BdVblast => {
            let j_k = max_beam_count(c.n_tx, c.n_rx, c.n_users);
            print!(" j_k={j_k} n_beams={}", cfg.n_beams);
        }
        SystemKind::TdmaSm => print!(" n_index={}", c.n_tx),
        SystemKind::ChannelInversion => {}
    }
    println!(
        " mod_order={} sym_bits={} bits_per_symbol={bits} ml_ops={} snr_points={} runs={} \
         symbols_per_run={} coherence_block={} master_seed={}",
        cfg.mod_order,
        cons.bits_per_symbol(),
        ml_ops_for(cfg),
        cfg.snr_grid_db.len(),
        cfg.runs,
        cfg.symbols_per_run,
        cfg.coherence_block,
        cfg.master_seed
    );
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            workers,
            seed,
            quiet,
        } => {
            let mut cfgs = load_config(&config)?;
            if let Some(seed) = seed {
                for cfg in &mut cfgs {
                    cfg.master_seed = seed;
                    cfg.channel.seed = seed;
                }
            }
            let start = Instant::now();
            let records = match worker_count(workers) {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .expect("thread pool")
                    .install(|| run_campaign(&cfgs)),
                None => run_campaign(&cfgs),
            }?;
            write_csv(&records, &out)?;
            if !quiet {
                eprintln!(
                    "simulated {} campaigns, {} records in {:.1} s",
                    cfgs.len(),
                    records.len(),
                    start.elapsed().as_secs_f64()
                );
            }
        }
        Command::Theory { config, out } => {
            let cfgs = load_config(&config)?;
            let mut records = Vec::new();
            let mut skipped = None;
            for (idx, cfg) in cfgs.iter().enumerate() {
                match theory_overlay(cfg) {
                    Ok(rows) => records.extend(rows),
                    Err(e @ SimError::NoTheoryAvailable(_)) => {
                        eprintln!("campaign {}: skipped, {e}", idx + 1);
                        skipped = Some(e);
                    }
                    Err(e) => return Err(e),
                }
            }
            if records.is_empty() {
                return Err(skipped
                    .unwrap_or_else(|| SimError::NoTheoryAvailable("empty config".into())));
            }
            write_csv(&records, &out)?;
        }
        Command::Validate { config } => {
            let cfgs = load_config(&config)?;
            for (idx, cfg) in cfgs.iter().enumerate() {
                describe(idx + 1, cfg);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (SimError::Config(_) | SimError::NoTheoryAvailable(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
