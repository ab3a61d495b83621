use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fuseg3d::experiment::{cmd_ablate, cmd_eval, cmd_generate, cmd_train, ExperimentConfig};
use fuseg3d::Error;

#[derive(Parser)]
#[command(version, about = "Synthetic LiDAR-camera segmentation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the train and val scene corpus.
    Generate(Common),
    /// Train on the corpus and write a checkpoint.
    Train(Common),
    /// Score a checkpoint on the val split.
    Eval(Common),
    /// Train and score the configured ablation grid.
    Ablate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "corpus")]
    corpus: PathBuf,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn load(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        // An unreadable config file is a config error, not an I/O failure.
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            e => e,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = load(&c)?;
            let m = cmd_generate(&cfg, &c.out)?;
            println!("wrote {} train and {} val scenes to {}", m.train.len(), m.val.len(), c.out.display());
        }
        Command::Train(c) => {
            let cfg = load(&c)?;
            let every = (cfg.train.iterations / 20).max(1);
            let log = cmd_train(&cfg, &c.corpus, &c.out, |it| {
                if (it.step + 1) % every == 0 {
                    eprintln!("step {:>6}  loss {:.4}  rate {:.5}", it.step + 1, it.losses.total, it.rate);
                }
            })?;
            println!("trained {} iterations; checkpoint in {}", log.iterations.len(), c.out.join("checkpoint").display());
        }
        Command::Eval(c) => {
            let cfg = load(&c)?;
            let checkpoint = c.checkpoint.clone().unwrap_or_else(|| c.out.join("checkpoint"));
            let m = cmd_eval(&cfg, &c.corpus, &checkpoint, &c.out)?;
            let fov = m.miou_fov.map_or("n/a".into(), |v| format!("{v:.4}"));
            println!("mIoU {:.4}  mIoU(fov) {fov}  fwIoU {:.4}", m.miou, m.fwiou);
        }
        Command::Ablate(c) => {
            let cfg = load(&c)?;
            cmd_ablate(&cfg, &c.corpus, &c.out, |r| {
                let fov = r.miou_fov.map_or("n/a".into(), |v| format!("{v:.4}"));
                println!(
                    "seed {:>3}  {:<16} {:<11} drop {} frames {}  mIoU {:.4}  fov {fov}",
                    r.seed,
                    r.variant.name(),
                    format!("{:?}", r.kind),
                    r.dropped_cameras,
                    r.frames,
                    r.miou
                );
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
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Numerical(_) | Error::NonFinite { .. } => 3,
                _ => 1,
            })
        }
    }
}
