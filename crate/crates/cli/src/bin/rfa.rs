use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfa_cli::commands::{self, CamInput};
use rfa_cli::{CliError, RunConfig};
use rfa_core::autodiff::Fault;
use rfa_core::zoo::ConvFactory;

#[derive(Parser, Debug)]
#[command(name = "rfa", version, about = "Receptive-field attention convolutions: checks, training and reports")]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// standard, rfa, rfcbam, rfca or naive_sa
    #[arg(long, global = true)]
    factory: Option<ConvFactory>,
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Extra KEY=VALUE overrides, applied after the other flags
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Finite-difference checks of every primitive and attention layer
    Gradcheck {
        /// Inject a known bug: conv_backward
        #[arg(long)]
        mutate: Option<String>,
        /// Tolerance used for every check
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Unfold/group-conv equality, the uniform-attention reduction and the sharing audit
    Equivalence,
    /// Time unfold and group-conv feature extraction
    BenchExtract,
    /// Train the desk-scale network
    Train,
    /// Evaluate a checkpoint on the test set
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Parameter and multiply-accumulate counts
    Count {
        /// tiny, resnet18 or resnet34
        #[arg(long)]
        model: Option<String>,
    },
    /// Grad-CAM heatmap as a binary PGM
    Gradcam {
        #[arg(long)]
        checkpoint: PathBuf,
        /// P5 PGM input image
        #[arg(long, conflicts_with = "index")]
        image: Option<PathBuf>,
        /// Test-set sample index
        #[arg(long)]
        index: Option<usize>,
        /// Target class; defaults to the label or the prediction
        #[arg(long)]
        class: Option<usize>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.factory {
        cfg.factory = f;
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v).map_err(CliError::Usage)?;
    }
    match &cli.command {
        Command::Gradcheck { tol: Some(t), .. } => cfg.tol = Some(*t),
        Command::Count { model: Some(m) } => cfg.set("model", m).map_err(CliError::Usage)?,
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<commands::Outcome, CliError> {
    let cfg = resolve(cli)?;
    for line in cfg.resolved().lines() {
        eprintln!("# config: {line}");
    }
    let out = &cli.out;
    match &cli.command {
        Command::Gradcheck { mutate, .. } => {
            let fault = match mutate.as_deref() {
                None => None,
                Some("conv_backward") => Some(Fault::ConvBackwardTransposedKernel),
                Some(other) => return Err(CliError::Usage(format!("unknown mutation {other:?}"))),
            };
            commands::gradcheck(&cfg, out, fault)
        }
        Command::Equivalence => commands::equivalence(&cfg, out),
        Command::BenchExtract => commands::bench_extract(&cfg, out),
        Command::Train => commands::train_cmd(&cfg, out),
        Command::Eval { checkpoint } => commands::eval_cmd(&cfg, checkpoint),
        Command::Count { .. } => commands::count_cmd(&cfg),
        Command::Gradcam {
            checkpoint,
            image,
            index,
            class,
        } => {
            let input = match (image, index) {
                (Some(p), _) => CamInput::Image(p.clone()),
                (None, Some(i)) => CamInput::Index(*i),
                (None, None) => return Err(CliError::Usage("gradcam needs --image or --index".into())),
            };
            commands::gradcam_cmd(&cfg, checkpoint, &input, *class, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(o) => {
            print!("{}", o.stdout);
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
