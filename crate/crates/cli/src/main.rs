mod commands;
mod config;
mod outputs;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "lipsync", version, about = "Audio-driven lip-sync pipeline")]
struct Cli {
    /// `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract MFCCs, normalize mouth landmarks and fit the PCA shape model.
    Prepare(PrepareArgs),
    /// Write a synthetic corpus with a known audio-to-mouth oracle.
    SynthData(SynthArgs),
    /// Train the generator and discriminator.
    Train(TrainArgs),
    /// Predict mouth features for a whole recording with overlapping windows.
    Infer(InferArgs),
    /// Fit the jaw-correction regression from landmark footage.
    FitJaw(FitJawArgs),
    /// Render one facial map PNG per mouth frame.
    RenderMaps(RenderArgs),
    /// MSE, MAE and Int-MSE between two mouth feature files.
    Eval(EvalArgs),
    /// Per-position error profile of a checkpoint over test windows.
    PlotProfile(ProfileArgs),
}

#[derive(Args, Debug)]
pub struct PrepareArgs {
    /// Mono 16-bit WAV.
    #[arg(long)]
    pub audio: PathBuf,
    /// 68-point landmark CSV (frame_index, x0, y0, ..., x67, y67).
    #[arg(long)]
    pub landmarks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub pca_dims: Option<usize>,
    #[arg(long)]
    pub image_width: Option<u32>,
    #[arg(long)]
    pub image_height: Option<u32>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub minutes: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Also write speech.wav, a planted-spectrum landmarks.csv and a
    /// rendered template directory.
    #[arg(long)]
    pub with_face: bool,
    #[arg(long)]
    pub template_frames: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-width networks (256/128 filters).
    Full,
    /// Same topology at 32 channels.
    Compact,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Audio feature CSV (13 columns, 100 Hz).
    #[arg(long)]
    pub audio: PathBuf,
    /// Mouth feature CSV (25 Hz).
    #[arg(long)]
    pub mouth: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Cosine-anneal the learning rate down to this value by the last epoch.
    #[arg(long)]
    pub final_lr: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub train_hop: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// WAV file or audio feature CSV.
    #[arg(long)]
    pub audio: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub output_overlap: Option<usize>,
    /// One pass over the whole sequence instead of overlapping windows.
    #[arg(long)]
    pub single_pass: bool,
}

#[derive(Args, Debug)]
pub struct FitJawArgs {
    #[arg(long)]
    pub landmarks: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub image_width: Option<u32>,
    #[arg(long)]
    pub image_height: Option<u32>,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// PCA mouth feature CSV.
    #[arg(long)]
    pub mouth: PathBuf,
    /// Directory with frame_*.png and landmarks.csv.
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub jaw: PathBuf,
    #[arg(long)]
    pub pca: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse template frames cyclically when there are fewer than mouth frames.
    #[arg(long)]
    pub cycle: bool,
    #[arg(long)]
    pub canny_low: Option<f64>,
    #[arg(long)]
    pub canny_high: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Metrics CSV; printed only when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub audio: PathBuf,
    #[arg(long)]
    pub mouth: PathBuf,
    /// Directory for profile.csv and profile.png.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub train_hop: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::ConfigFile::load(cli.config.as_deref()).and_then(|cfg| {
        let ctx = commands::Context { cfg, seed: cli.seed };
        match cli.command {
            Command::Prepare(a) => commands::prepare(&ctx, a),
            Command::SynthData(a) => commands::synth_data(&ctx, a),
            Command::Train(a) => commands::train(&ctx, a),
            Command::Infer(a) => commands::infer(&ctx, a),
            Command::FitJaw(a) => commands::fit_jaw(&ctx, a),
            Command::RenderMaps(a) => commands::render_maps(&ctx, a),
            Command::Eval(a) => commands::eval(&ctx, a),
            Command::PlotProfile(a) => commands::plot_profile(&ctx, a),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
