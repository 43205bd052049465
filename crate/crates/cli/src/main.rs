use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use bpl_cli::commands::{self, CliResult, ModelArgs, Observed, TaskName};
use bpl_cli::service::{router, AppState};
use bpl_core::exec::Exec;
use bpl_core::files::{read_concept, write_ink};
use bpl_core::harness::summary_table;

#[derive(Parser)]
#[command(name = "bpl", version, about = "Learn recursive visual concepts from a few images")]
struct Cli {
    /// Run configuration (TOML); built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Classify,
    Generate,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecArg {
    Parallel,
    Sequential,
}

#[derive(Subcommand)]
enum Command {
    /// Sample constrained concepts and render each at depths 0 to 4.
    Sample {
        #[arg(short, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a concept file at one depth as a PBM image.
    Render {
        concept: PathBuf,
        #[arg(long)]
        depth: u8,
        #[arg(long)]
        out: PathBuf,
        /// Also write the mean image as PGM.
        #[arg(long)]
        mean: Option<PathBuf>,
    },
    /// Infer a concept from images; writes traces, map.toml and result.json.
    Infer {
        /// Observed image at a known depth, as DEPTH=PATH.
        #[arg(long = "image", value_parser = parse_depth_image)]
        images: Vec<(u8, PathBuf)>,
        /// A single image whose depth is inferred.
        #[arg(long, conflicts_with = "images")]
        unknown_depth: Option<PathBuf>,
        /// Steps per chain; the configured ideal length when absent.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        /// Keep every n-th step in the traces.
        #[arg(long, default_value_t = 10)]
        thin: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build classification and generation suites.
    Suite {
        #[arg(long, default_value = "both")]
        condition: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a model on a suite and write report.tsv and summary.txt.
    Experiment {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, value_enum)]
        task: Task,
        /// bpl, limited, nonrecursive, euclidean, hausdorff, embedding or random.
        #[arg(long)]
        model: String,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        participants: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        /// JSON map from image key to feature vector, for the embedding model.
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "parallel")]
        exec: ExecArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit ink parameters to random scribbles drawn with the configured ink.
    FitInk {
        #[arg(short, default_value_t = 60)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a suite's generation trials over HTTP.
    Serve {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn parse_depth_image(s: &str) -> Result<(u8, PathBuf), String> {
    let (d, p) = s.split_once('=').ok_or("expected DEPTH=PATH")?;
    Ok((d.parse().map_err(|_| format!("bad depth {d:?}"))?, PathBuf::from(p)))
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = commands::load_config(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Sample { n, out } => {
            for l in commands::sample(&cfg, n, &out)? {
                println!("{}\t{}", l.f_rule, l.angle_deg);
            }
        }
        Command::Render { concept, depth, out, mean } => {
            commands::render(&cfg, &read_concept(&concept)?, depth, &out, mean.as_deref())?;
        }
        Command::Infer { images, unknown_depth, steps, chains, thin, out } => {
            let observed = match unknown_depth {
                Some(p) => Observed::Unknown(p),
                None if images.is_empty() => return Err("give --image DEPTH=PATH or --unknown-depth PATH".into()),
                None => Observed::Known(images),
            };
            let steps = steps.unwrap_or(cfg.steps.ideal);
            let chains = chains.unwrap_or(cfg.steps.chains);
            let r = commands::infer(&cfg, &observed, steps, chains, thin, &out)?;
            println!("{}\t{}\tdepth={:?}\tlog_posterior={:.3}", r.concept.f_rule, r.concept.angle_deg, r.depth, r.log_posterior);
        }
        Command::Suite { condition, out } => {
            let suite = commands::suite(&cfg, &commands::parse_conditions(&condition)?, &out)?;
            println!("{} classification trials, {} generation trials", suite.classification.len(), suite.generation.len());
        }
        Command::Experiment { suite, task, model, steps, participants, chains, embedding, exec, out } => {
            let suite = commands::load_suite(&suite)?;
            let task = match task {
                Task::Classify => TaskName::Classify,
                Task::Generate => TaskName::Generate,
            };
            let exec = match exec {
                ExecArg::Parallel => Exec::Parallel,
                ExecArg::Sequential => Exec::Sequential,
            };
            let args = ModelArgs { name: model, steps, participants, chains, embedding, exec };
            let report = commands::experiment(&cfg, &suite, task, &args, out.as_deref())?;
            print!("{}", summary_table(std::slice::from_ref(&report)));
        }
        Command::FitInk { n, out } => {
            let fit = commands::fit_ink(&cfg, n)?;
            write_ink(&out, &fit.params)?;
            println!("log-likelihood {:.3}", fit.log_likelihood);
        }
        Command::Serve { suite, addr } => {
            let suite = commands::load_suite(&suite)?;
            let state = AppState::new(
                suite.generation,
                cfg.grammar()?,
                suite.render,
                cfg.steps.generate_incremental,
                cfg.steps.generate_block,
                cfg.seed,
            );
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr).await?;
                eprintln!("listening on http://{addr}/v1/trials");
                axum::serve(listener, router(Arc::new(state))).await
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

