//! `echoloc`: scene building, RIR rendering, dataset generation, training,
//! evaluation and reporting.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for bad input: missing or malformed files, invalid options.
const EXIT_USER: u8 = 2;
const EXIT_INTERNAL: u8 = 1;

#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    pub fn user(e: impl std::fmt::Display) -> CliError {
        CliError::User(e.to_string())
    }

    pub fn internal(e: impl std::fmt::Display) -> CliError {
        CliError::Internal(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "echoloc", version, about = "Room acoustics simulation and sound source localization")]
struct Cli {
    /// Worker threads for rendering. Results do not depend on it.
    #[arg(long, global = true, env = "ECHOLOC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or validate scene files.
    #[command(subcommand)]
    Scene(SceneCommand),
    /// Render one room impulse response to a float WAV with a JSON sidecar.
    Rir(RirArgs),
    /// Render a spectrogram dataset and its manifest.
    Dataset(DatasetArgs),
    /// Train a localization model on one fold, all folds or the full train split.
    Train(TrainArgs),
    /// Evaluate a model, or a predictions file, on a split.
    Eval(EvalArgs),
    /// Summarize cross-validation and plot the leniency curve.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum SceneCommand {
    /// Write a built-in scene.
    Build {
        #[arg(long, value_enum, default_value_t = Preset::House10)]
        preset: Preset,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Parse and validate a scene file.
    Validate { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    House10,
}

#[derive(Args)]
struct PropagationArgs {
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    /// Subpaths traced from each endpoint.
    #[arg(long, default_value_t = 100_000)]
    rays: usize,
    #[arg(long, default_value_t = 50)]
    max_bounces: usize,
    /// Impulse response length in seconds.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    /// Speed of sound, m/s.
    #[arg(long, default_value_t = 343.0)]
    speed_of_sound: f64,
    /// Radius of the endpoint capture spheres, m.
    #[arg(long, default_value_t = 0.5)]
    capture_radius: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Oracle {
    ImageSource,
}

#[derive(Args)]
struct RirArgs {
    /// Scene file.
    #[arg(long, required_unless_present_any = ["free_field", "oracle"])]
    scene: Option<PathBuf>,
    /// No geometry; the receiver sits at --receiver.
    #[arg(long, conflicts_with_all = ["scene", "oracle"])]
    free_field: bool,
    /// Analytic shoebox response instead of path tracing.
    #[arg(long, value_enum, conflicts_with = "scene")]
    oracle: Option<Oracle>,
    /// Shoebox extents for the oracle along x, y (up) and z, meters.
    #[arg(long, value_parser = parse_dims, default_value = "5x4x3")]
    room: [f64; 3],
    /// Wall absorption for the oracle.
    #[arg(long, default_value_t = 0.3)]
    absorption: f64,
    #[arg(long, default_value_t = 2)]
    max_order: usize,
    /// Source position `x,y,z`, meters.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    source: [f64; 3],
    /// Receiver position `x,y,z` for free-field and oracle runs.
    #[arg(long, value_parser = parse_triple, default_value = "0,0,0", allow_hyphen_values = true)]
    receiver: [f64; 3],
    #[command(flatten)]
    propagation: PropagationArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Per-region grids labeled by region.
    Regions,
    /// One lattice over the whole floor.
    Coords,
}

#[derive(Args)]
struct DatasetArgs {
    /// Scene file; the built-in house is used when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Regions)]
    mode: Mode,
    /// Points per region, `ROWSxCOLS` (regions mode).
    #[arg(long, value_parser = parse_grid, default_value = "8x8")]
    grid: [usize; 2],
    /// Scale applied to each region before gridding (regions mode).
    #[arg(long, default_value_t = 0.9)]
    shrink: f64,
    /// Lattice spacing in meters (coords mode).
    #[arg(long, default_value_t = 0.52)]
    spacing: f64,
    /// Source height, m.
    #[arg(long, default_value_t = 1.7)]
    height: f64,
    /// Test positions; defaults to 250 in regions mode and 100 in coords mode.
    #[arg(long)]
    test_count: Option<usize>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Mono WAV dry sound; the bundled synthetic clip is used when omitted.
    #[arg(long)]
    dry: Option<PathBuf>,
    #[command(flatten)]
    propagation: PropagationArgs,
    #[arg(long, default_value_t = 512)]
    window_length: usize,
    #[arg(long, default_value_t = 160)]
    hop: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskArg {
    Regions,
    Coords,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = TaskArg::Regions)]
    task: TaskArg,
    /// Train with this fold held out.
    #[arg(long, conflicts_with = "all_folds")]
    fold: Option<usize>,
    /// Train every fold, then a final model on the whole train split.
    #[arg(long)]
    all_folds: bool,
    /// JSON model config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// SGD learning rate; 1e-2 for regions and 1e-3 for coords unless set.
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, required_unless_present = "predictions")]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "predictions")]
    model: Option<PathBuf>,
    /// Score an existing predictions CSV instead of running a model.
    #[arg(long, conflicts_with_all = ["manifest", "model"], requires = "task")]
    predictions: Option<PathBuf>,
    /// Task of the predictions file.
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Leniency curve step, m.
    #[arg(long, default_value_t = 0.1)]
    radius_step: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directory of `train --all-folds`.
    #[arg(long)]
    train: PathBuf,
    /// Output directory of `eval`.
    #[arg(long)]
    eval: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    v.try_into().map_err(|_| format!("expected x,y,z, got `{s}`"))
}

fn parse_dims(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split('x').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    v.try_into().map_err(|_| format!("expected XxYxZ, got `{s}`"))
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let v: Vec<usize> = s.split('x').map(|p| p.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    v.try_into().map_err(|_| format!("expected ROWSxCOLS, got `{s}`"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = match cli.command {
        Command::Scene(c) => commands::scene(c),
        Command::Rir(a) => commands::rir(a),
        Command::Dataset(a) => commands::dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::User(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USER)
        }
        Err(CliError::Internal(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
