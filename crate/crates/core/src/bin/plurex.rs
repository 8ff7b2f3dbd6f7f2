use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use plurex::verify_cli::{
    export_slice, run_pipeline_logged, summarize, CliError, PipelineConfig, SliceFormat, SlicePlane, Stage,
    EXIT_ERROR,
};

#[derive(Parser)]
#[command(name = "plurex", version, about = "Verification pipeline for the twisted Hartogs domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON pipeline configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    spacing_t: Option<f64>,
    #[arg(long)]
    spacing_w: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Replacement profile anchor table (JSON).
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Omega1,
    Omega2,
    Gap,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stages listed in the configuration (all by default).
    Run(Common),
    /// Certify the profile constraints.
    Certify(Common),
    /// Overlap consistency and plurisubharmonicity tests of f and g.
    Psh(Common),
    /// Witness bounds for g.
    Witness(Common),
    /// Envelope solves and the gap report.
    Envelope {
        #[arg(long, value_enum, default_value = "all")]
        which: Which,
        #[command(flatten)]
        common: Common,
    },
    /// Write a slice of a stored envelope.
    Export {
        /// Output directory of a previous run.
        #[arg(long)]
        out: PathBuf,
        /// omega1 (or omega1_proxy) or omega2.
        #[arg(long)]
        result: String,
        /// w0 or t=<value>.
        #[arg(long, default_value = "w0")]
        plane: String,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Print one row per stage report in a directory.
    Summarize {
        #[arg(long)]
        out: PathBuf,
    },
}

fn build_config(common: &Common, stages: Option<Vec<Stage>>) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = stages {
        cfg.stages = s;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = common.delta {
        cfg.delta = v;
    }
    if let Some(v) = common.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = common.spacing_t {
        cfg.spacing_t = v;
    }
    if let Some(v) = common.spacing_w {
        cfg.spacing_w = v;
    }
    if let Some(v) = common.tol {
        cfg.solver.tol = v;
    }
    if let Some(v) = common.max_iters {
        cfg.solver.max_iters = v;
    }
    if let Some(v) = &common.profile {
        cfg.profile_file = Some(v.clone());
    }
    Ok(cfg)
}

fn pipeline(common: &Common, stages: Option<Vec<Stage>>) -> Result<i32, CliError> {
    let cfg = build_config(common, stages)?;
    let outcome = run_pipeline_logged(&cfg, |msg| eprintln!("{msg}"))?;
    print!("{}", summarize(&cfg.output_dir));
    Ok(outcome.exit_code)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(c) => pipeline(&c, None),
        Command::Certify(c) => pipeline(&c, Some(vec![Stage::Certify])),
        Command::Psh(c) => pipeline(&c, Some(vec![Stage::Psh])),
        Command::Witness(c) => pipeline(&c, Some(vec![Stage::Witness])),
        Command::Envelope { which, common } => {
            let stages = match which {
                Which::Omega1 => vec![Stage::Omega1],
                Which::Omega2 => vec![Stage::Omega2],
                Which::Gap | Which::All => vec![Stage::Gap],
            };
            pipeline(&common, Some(stages))
        }
        Command::Export {
            out,
            result,
            plane,
            format,
        } => {
            let path = export_slice(&out, &result, plane.parse::<SlicePlane>()?, format.parse::<SliceFormat>()?)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Summarize { out } => {
            print!("{}", summarize(&out));
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    if let Some(n) = std::env::var("PLUREX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .expect("thread pool is configured once");
        }
    }
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
