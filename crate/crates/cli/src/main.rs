//! `fwlbp` command-line tool: descriptor extraction, model fitting,
//! prediction, evaluation protocols and synthetic corpora.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::ConfigArgs;

#[derive(Debug, Parser)]
#[command(
    name = "fwlbp",
    version,
    about = "Fractal weighted LBP texture descriptors and classification"
)]
struct Cli {
    /// Worker threads for image processing [default: logical cores]
    #[arg(long, global = true, env = "FWLBP_JOBS")]
    jobs: Option<usize>,
    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one descriptor row per image to CSV
    Extract {
        /// PGM files, or directories searched recursively for *.pgm
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output CSV [default: stdout]
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write each fractal-dimension map as an 8-bit PGM here
        #[arg(long, value_name = "DIR")]
        fd_dir: Option<PathBuf>,
        /// Report failing files and continue with the rest
        #[arg(long)]
        keep_going: bool,
        /// Overwrite existing outputs
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fit PCA and the subspace classifier on a class-per-directory dataset
    Fit {
        dataset: PathBuf,
        /// Bundle directory (pca.json, nsc.json, config.json, classes.json)
        #[arg(short, long)]
        out: PathBuf,
        /// Also write the training samples' classifier coordinates as CSV
        #[arg(long)]
        export_coords: bool,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Classify one image with a fitted bundle; prints JSON
    Predict {
        /// Bundle directory written by `fit`
        #[arg(short, long)]
        model: PathBuf,
        image: PathBuf,
    },
    /// Run an evaluation protocol and write JSON/CSV reports
    Eval {
        /// Dataset directory; for invariance also a single PGM
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalMode::Cv)]
        mode: EvalMode,
        #[arg(short, long)]
        out: PathBuf,
        /// SNR levels in dB for the noise sweep
        #[arg(long, value_delimiter = ',', default_value = "100,30,15,10,5")]
        levels: Vec<f64>,
        /// r_max values for the scale-range sweep
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7")]
        rmax: Vec<usize>,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render a synthetic labelled corpus as PGM files
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        /// Corpus recipe or a manifest.json from an earlier run
        #[arg(long, conflicts_with_all = ["samples", "size", "seed", "jitter"])]
        manifest: Option<PathBuf>,
        /// Samples per class [default: 20]
        #[arg(long)]
        samples: Option<usize>,
        /// Image side in pixels [default: 128]
        #[arg(long)]
        size: Option<usize>,
        /// Corpus seed [default: 0]
        #[arg(long)]
        seed: Option<u64>,
        /// Per-sample transforms to draw: scale, rotation
        #[arg(long, value_delimiter = ',', value_enum)]
        jitter: Vec<JitterKind>,
        /// Scale jitter range
        #[arg(long, value_name = "MIN:MAX", default_value = "0.7:1.4")]
        scale_range: String,
        /// Rotation jitter range in degrees
        #[arg(long, value_name = "MIN:MAX", default_value = "0:90")]
        rotation_range: String,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Cv,
    Noise,
    Rmax,
    Invariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum JitterKind {
    Scale,
    Rotation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Extract {
            inputs,
            out,
            fd_dir,
            keep_going,
            force,
            config,
        } => commands::extract(&inputs, out.as_deref(), fd_dir.as_deref(), keep_going, force, &config),
        Command::Fit {
            dataset,
            out,
            export_coords,
            force,
            config,
        } => commands::fit(&dataset, &out, export_coords, force, &config),
        Command::Predict { model, image } => commands::predict(&model, &image),
        Command::Eval {
            input,
            mode,
            out,
            levels,
            rmax,
            force,
            config,
        } => commands::eval(&input, mode, &out, &levels, &rmax, force, &config),
        Command::Synth {
            out,
            manifest,
            samples,
            size,
            seed,
            jitter,
            scale_range,
            rotation_range,
            force,
        } => commands::synth(commands::SynthArgs {
            out: &out,
            manifest: manifest.as_deref(),
            samples,
            size,
            seed,
            jitter: &jitter,
            scale_range: &scale_range,
            rotation_range: &rotation_range,
            force,
        }),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
