//! `acoustic-sensor`: synthesize stimuli, simulate recordings, train and
//! evaluate sensor models, and run the experiment battery.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acoustic_sensing::dataset_io::{self, write_json, write_text};
use acoustic_sensing::eval::{self, SimConfig, SimultaneousGrid};
use acoustic_sensing::features::{featurize_with, Normalization};
use acoustic_sensing::models::{grid_search, Hyperparams, KnnMode, Metric, ParamGrid, Predictor, SensorModel};
use acoustic_sensing::signal_gen::synthesize;
use acoustic_sensing::{FeatureSet, SoundKind, SoundSpec, Target};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{ExperimentConfig, Task};

/// Environment variable naming the default output root.
const OUT_ENV: &str = "ACOUSTIC_SENSING_OUT";

#[derive(Debug, Parser)]
#[command(name = "acoustic-sensor", version, about = "Active acoustic sensing for soft actuators")]
struct Cli {
    /// Worker threads for simulation, featurization and grid search.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Root for relative output paths.
    #[arg(long, global = true, env = OUT_ENV)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a stimulus into a WAVE file.
    GenSound(GenSound),
    /// Record a task's dataset with the simulator.
    Simulate(Simulate),
    /// Turn a dataset into amplitude-spectrum features.
    Featurize(Featurize),
    /// Fit a sensor model on a feature file.
    Train(Train),
    /// Predict with a trained model.
    Predict(Predict),
    /// Score a trained model on labeled features.
    Evaluate(Evaluate),
    /// Run an experiment or ablation and write its report.
    Ablate(Ablate),
    /// Cross-validated hyperparameter search.
    GridSearch(GridSearch),
    /// SNR of an active against a passive recording.
    Snr(Snr),
}

#[derive(Debug, Args)]
struct GenSound {
    #[arg(long, value_parser = parse_kind)]
    kind: SoundKind,
    /// Sine frequency in Hz.
    #[arg(long)]
    freq: Option<f64>,
    /// Duration in seconds.
    #[arg(long, default_value_t = 1.0)]
    dur: f64,
    #[arg(long, default_value_t = 1.0)]
    volume: f64,
    /// Seed of the noise kinds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rate: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task selector; overrides the config.
    #[arg(long)]
    task: Option<Task>,
    /// Sensing mode: active, passive or dynamic.
    #[arg(long)]
    mode: Option<eval::SensingMode>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    actuator: Option<String>,
}

#[derive(Debug, Args)]
struct Simulate {
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Dataset directory; `<task>-data` under the output root by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Norm {
    None,
    L2,
}

#[derive(Debug, Args)]
struct Featurize {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Truncate every recording to this many samples.
    #[arg(long)]
    len: Option<usize>,
    #[arg(long, value_enum, default_value_t = Norm::None)]
    normalize: Norm,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Knn,
    Svc,
}

#[derive(Debug, Args)]
struct Train {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    target: Target,
    #[arg(long, value_enum, default_value_t = Method::Knn)]
    method: Method,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = Metric::L2)]
    metric: Metric,
    #[arg(long, default_value_t = 100.0)]
    c: f64,
    /// Fit a KNN regressor instead of a classifier.
    #[arg(long)]
    regress: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Predict {
    #[arg(long)]
    model: PathBuf,
    /// Feature file to predict.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    features: Option<PathBuf>,
    /// Dataset directory, featurized at the model's dimension.
    #[arg(long)]
    data: Option<PathBuf>,
    /// TSV output; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Evaluate {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// JSON report; the TSV summary always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Ablate {
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Outside-noise levels in dB.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Volume fractions.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long)]
    poses: Option<u32>,
    /// Training-combination sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    actuators: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    kinds: Option<Vec<SoundKind>>,
    /// Stimulus durations in seconds.
    #[arg(long, value_delimiter = ',')]
    durations: Option<Vec<f64>>,
    /// Report path without extension; `<task>` under the output root by
    /// default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridSearch {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    target: Target,
    #[arg(long, value_enum, default_value_t = Method::Knn)]
    method: Method,
    #[arg(long, default_value_t = acoustic_sensing::models::DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Snr {
    #[arg(long)]
    active: PathBuf,
    #[arg(long)]
    passive: PathBuf,
}

fn parse_kind(s: &str) -> Result<SoundKind, String> {
    s.parse::<SoundKind>().map_err(|e| e.to_string())
}

/// Usage errors exit with 2, everything else with 1.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type Res<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

struct Ctx {
    out_root: PathBuf,
}

impl Ctx {
    fn out(&self, p: &Path) -> PathBuf {
        resolve(&self.out_root, p)
    }
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::from(1)
        }
    }
}

fn one_line(e: &anyhow::Error) -> String {
    e.chain().map(|c| c.to_string()).collect::<Vec<_>>().join(": ").replace('\n', " ")
}

fn run(cli: Cli) -> Res<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let ctx = Ctx {
        out_root: cli.out_dir.clone().unwrap_or_default(),
    };
    match cli.command {
        Command::GenSound(a) => gen_sound(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Featurize(a) => featurize(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Ablate(a) => ablate(&ctx, a),
        Command::GridSearch(a) => grid(&ctx, a),
        Command::Snr(a) => snr(a),
    }
}

fn gen_sound(ctx: &Ctx, a: GenSound) -> Res<()> {
    let mut spec = SoundSpec::new(a.kind, a.dur).with_volume(a.volume);
    spec.seed = a.seed;
    if let Some(f) = a.freq {
        spec.sine_freq_hz = f;
    }
    if let Some(r) = a.rate {
        spec = spec.with_sample_rate(r);
    }
    let w = synthesize(&spec)?;
    dataset_io::write_wav(&ctx.out(&a.out), &w)?;
    Ok(())
}

/// Config file merged with command-line overrides.
fn experiment(ctx: &Ctx, exp: &ExperimentArgs) -> Res<(ExperimentConfig, Task, PathBuf)> {
    let mut cfg = match &exp.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if exp.task.is_some() {
        cfg.task = exp.task;
    }
    if exp.mode.is_some() {
        cfg.mode = exp.mode;
    }
    if let Some(r) = exp.repeats {
        cfg.sim.repeats = r;
    }
    if let Some(id) = &exp.actuator {
        cfg.sim.actuator_id = id.clone();
    }
    let task = cfg.task.ok_or_else(|| usage("no task given (use --task or `task` in the config)"))?;
    let root = match (&cfg.output_dir, ctx.out_root.as_os_str().is_empty()) {
        (Some(d), true) => d.clone(),
        _ => ctx.out_root.clone(),
    };
    Ok((cfg, task, root))
}

fn simulate(ctx: &Ctx, a: Simulate) -> Res<()> {
    let (cfg, task, root) = experiment(ctx, &a.exp)?;
    let sim = cfg.sim_config(a.seed)?;
    let design = match task {
        Task::Location6 => eval::location_design(&sim, &cfg.stimulus(), cfg.mode()),
        Task::Regression30 => eval::regression_design(&sim, &cfg.stimulus(), cfg.mode()),
        Task::Force3 => eval::force_design(&sim),
        Task::Material3 => eval::material_design(&sim),
        Task::Temperature => eval::temperature_design(&sim, cfg.mode()),
        Task::Simultaneous700 => eval::simultaneous_design(&sim, &SimultaneousGrid::default()),
        other => return Err(usage(format!("task `{other}` has no single dataset; use `ablate`"))),
    };
    let recs = design.record(&sim.actuator(&sim.actuator_id))?;
    let dir = match a.out {
        Some(p) => resolve(&root, &p),
        None => root.join(format!("{task}-data")),
    };
    let m = dataset_io::write_dataset(&recs, &dir)?;
    log::info!("wrote {} recordings to {}", m.entries.len(), dir.display());
    Ok(())
}

fn featurize(ctx: &Ctx, a: Featurize) -> Res<()> {
    let recs = dataset_io::read_dataset(&a.data)?;
    let norm = match a.normalize {
        Norm::None => Normalization::None,
        Norm::L2 => Normalization::UnitL2,
    };
    let set = featurize_with(&recs, a.len, norm)?;
    dataset_io::save_features(&ctx.out(&a.out), &set)?;
    Ok(())
}

fn train(ctx: &Ctx, a: Train) -> Res<()> {
    let data = dataset_io::load_features(&a.features)?;
    let (hp, mode) = match a.method {
        Method::Knn => (
            Hyperparams::knn(a.k, a.metric),
            if a.regress { KnnMode::Regress } else { KnnMode::Classify },
        ),
        Method::Svc if a.regress => return Err(usage("--regress only applies to knn")),
        Method::Svc => (Hyperparams::svc(a.c), KnnMode::Classify),
    };
    let model = SensorModel::fit(&data, a.target, &hp, mode)?;
    if let Err(e) = model.require_converged() {
        log::warn!("{e}");
    }
    dataset_io::save_model(&ctx.out(&a.out), &model)?;
    Ok(())
}

fn features_for(model: &SensorModel, features: Option<&Path>, data: Option<&Path>) -> Res<FeatureSet> {
    match (features, data) {
        (Some(f), _) => Ok(dataset_io::load_features(f)?),
        (None, Some(d)) => {
            let recs = dataset_io::read_dataset(d)?;
            // a real DFT of n samples has n/2 bins
            Ok(featurize_with(&recs, Some(model.feature_dim * 2), Normalization::None)?)
        }
        (None, None) => Err(usage("give --features or --data")),
    }
}

fn predict(ctx: &Ctx, a: Predict) -> Res<()> {
    let model = dataset_io::load_model(&a.model)?;
    let set = features_for(&model, a.features.as_deref(), a.data.as_deref())?;
    let preds = model.predict_all(&set.features)?;
    let mut out = String::from("index\tprediction\n");
    for (i, p) in preds.iter().enumerate() {
        match p {
            acoustic_sensing::models::Prediction::Label(l) => out.push_str(&format!("{i}\t{l}\n")),
            acoustic_sensing::models::Prediction::Value(v) => out.push_str(&format!("{i}\t{v}\n")),
        }
    }
    match a.out {
        Some(p) => write_text(&ctx.out(&p), &out)?,
        None => print!("{out}"),
    }
    Ok(())
}

fn evaluate(ctx: &Ctx, a: Evaluate) -> Res<()> {
    let model = dataset_io::load_model(&a.model)?;
    let set = dataset_io::load_features(&a.features)?;
    let report = eval::evaluate(&model, &set)?;
    if let Some(p) = a.out {
        write_json(&ctx.out(&p), &report)?;
    }
    print!("{}", report.to_tsv());
    Ok(())
}

fn ablate(ctx: &Ctx, a: Ablate) -> Res<()> {
    let (mut cfg, task, root) = experiment(ctx, &a.exp)?;
    let axes = &mut cfg.ablation;
    if let Some(v) = a.levels {
        axes.levels_db = v;
    }
    if let Some(v) = a.fractions {
        axes.fractions = v;
    }
    if let Some(v) = a.poses {
        axes.n_poses = v;
    }
    if let Some(v) = a.sizes {
        axes.combo_sizes = v;
    }
    if let Some(v) = a.actuators {
        axes.actuator_ids = v;
    }
    if let Some(v) = a.kinds {
        axes.kinds = v;
    }
    if let Some(v) = a.durations {
        axes.durations_s = v;
    }
    let sim = cfg.sim_config(a.seed)?;
    let base = match a.out {
        Some(p) => resolve(&root, &p),
        None => root.join(task.name()),
    };
    run_task(&cfg, &sim, task, &base)?;
    log::info!("wrote {}.*", base.display());
    Ok(())
}

/// Runs `task` and writes `<base>.json` plus a CSV (ablations) or TSV
/// (experiments) next to it.
fn run_task(cfg: &ExperimentConfig, sim: &SimConfig, task: Task, base: &Path) -> Res<()> {
    let ext = |e: &str| base.with_extension(e);
    let axes = &cfg.ablation;
    let ablation = match task {
        Task::Noise => eval::run_noise_robustness(sim, &axes.levels_db)?,
        Task::Pose => eval::run_pose_transfer(sim, axes.n_poses, &axes.combo_sizes)?,
        Task::SoundGrid => eval::run_sound_ablation(sim, &axes.kinds, &axes.durations_s)?,
        Task::Volume => eval::run_volume_ablation(sim, &axes.fractions)?,
        Task::Transfer => eval::run_actuator_transfer(sim, &axes.actuator_ids, &axes.combo_sizes)?,
        Task::Material3 => {
            let r = eval::run_material_experiment(sim)?;
            write_json(&ext("json"), &r)?;
            write_text(&ext("tsv"), &r.selected().to_tsv())?;
            return Ok(());
        }
        Task::Simultaneous700 => {
            let r = eval::run_simultaneous_experiment(sim, &SimultaneousGrid::default())?;
            write_json(&ext("json"), &r)?;
            let tsv = [&r.location, &r.force, &r.inflation].map(|x| x.to_tsv()).join("\n");
            write_text(&ext("tsv"), &tsv)?;
            return Ok(());
        }
        Task::Location6 | Task::Regression30 | Task::Force3 | Task::Temperature => {
            let r = match task {
                Task::Location6 => eval::run_location_experiment(sim, &cfg.stimulus(), cfg.mode())?,
                Task::Regression30 => eval::run_regression_experiment(sim, &cfg.stimulus(), cfg.mode())?,
                Task::Force3 => eval::run_force_experiment(sim)?,
                _ => eval::run_temperature_experiment(sim, cfg.mode())?,
            };
            write_json(&ext("json"), &r)?;
            write_text(&ext("tsv"), &r.to_tsv())?;
            return Ok(());
        }
    };
    write_json(&ext("json"), &ablation)?;
    write_text(&ext("csv"), &ablation.to_csv())?;
    Ok(())
}

fn grid(ctx: &Ctx, a: GridSearch) -> Res<()> {
    let data = dataset_io::load_features(&a.features)?;
    let g = match a.method {
        Method::Knn => ParamGrid::knn_default(),
        Method::Svc => ParamGrid::svc_default(),
    };
    let r = grid_search(&data, a.target, &g, a.folds, a.seed)?;
    if let Some(p) = a.out {
        write_json(&ctx.out(&p), &r)?;
    }
    println!("best\t{}\t{}", r.best, r.best_score);
    Ok(())
}

fn snr(a: Snr) -> Res<()> {
    let act = dataset_io::read_wav(&a.active)?;
    let pas = dataset_io::read_wav(&a.passive)?;
    println!("{}", eval::snr_db(&act, &pas)?);
    Ok(())
}
