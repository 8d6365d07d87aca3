//! Synthetic analogs of the sensing experiments and ablations. Every
//! runner is a pure function of its [`SimConfig`]: datasets, splits and
//! shuffles derive their seeds from `SimConfig::seed` and the task name.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{evaluate, stratified_indices, random_split, snr_estimate, AblationResult, EvalError, EvalReport};
use crate::actuator::{
    self, sample_dataset_in, ActuatorModel, ActuatorState, ContactSite, External, Material, Recording, Source,
    Stimulus,
};
use crate::features::{featurize, FeatureSet, Target};
use crate::models::{grid_search, GridResult, Hyperparams, KnnMode, ParamGrid, Predictor, SensorModel};
use crate::rng;
use crate::signal_gen::{uniform_noise, SoundKind, SoundSpec, Waveform};

/// Settings shared by all runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Master seed for datasets, splits and shuffles.
    pub seed: u64,
    pub actuator_id: String,
    /// Seed of the per-actuator manufacturing spread.
    pub actuator_seed: u64,
    /// Base simulator parameters before the manufacturing spread; the
    /// reference actuator when absent.
    pub model: Option<ActuatorModel>,
    /// Drop microphone noise, repeatability jitter and robot hum.
    pub noiseless: bool,
    pub insulation_db: Option<f64>,
    pub pose_hum_amplitude: Option<f64>,
    /// Recordings per state in the categorical tasks.
    pub repeats: usize,
    pub split_ratio: f64,
    /// Force used by the location-style tasks.
    pub contact_force_n: f64,
    /// Learner of the KNN tasks.
    pub knn: Hyperparams,
    /// C of the SVC tasks.
    pub svc_c: f64,
    pub folds: usize,
    /// Shuffle training labels before fitting (chance-level control).
    pub permute_labels: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            actuator_id: "A".into(),
            actuator_seed: 0,
            model: None,
            noiseless: false,
            insulation_db: None,
            pose_hum_amplitude: None,
            repeats: 25,
            split_ratio: super::DEFAULT_RATIO,
            contact_force_n: 1.0,
            knn: Hyperparams::knn_default(),
            svc_c: 100.0,
            folds: crate::models::DEFAULT_FOLDS,
            permute_labels: false,
        }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Simulator for actuator `id` with this config's overrides applied.
    pub fn actuator(&self, id: &str) -> ActuatorModel {
        let base = self.model.clone().unwrap_or_else(|| ActuatorModel::reference(id));
        let mut m = base.manufactured(id, self.actuator_seed);
        if let Some(db) = self.insulation_db {
            m.insulation_db = db;
        }
        if let Some(a) = self.pose_hum_amplitude {
            m.pose_hum.amplitude = a;
        }
        if self.noiseless {
            m = m.noiseless();
        }
        m
    }

    fn task_seed(&self, task: &str) -> u64 {
        rng::derive(self.seed, &[rng::hash_str(task)])
    }

    fn knn_model(&self, train: &FeatureSet, target: Target, mode: KnnMode) -> Result<SensorModel, EvalError> {
        Ok(SensorModel::fit(train, target, &self.knn, mode)?)
    }
}

/// How the chamber is excited in the location experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensingMode {
    Active,
    Passive,
    /// A tap transient instead of a speaker stimulus.
    Dynamic,
}

impl SensingMode {
    pub fn stimulus(self, spec: &SoundSpec) -> Stimulus {
        let d = spec.duration_s;
        let rate = spec.sample_rate_hz;
        match self {
            SensingMode::Active => Stimulus::Active(spec.clone()),
            SensingMode::Passive => Stimulus::Passive {
                duration_s: d,
                sample_rate_hz: rate,
            },
            SensingMode::Dynamic => Stimulus::Tap {
                duration_s: d,
                sample_rate_hz: rate,
            },
        }
    }
}

impl std::str::FromStr for SensingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "active" => Ok(SensingMode::Active),
            "passive" => Ok(SensingMode::Passive),
            "dynamic" => Ok(SensingMode::Dynamic),
            _ => Err(format!("unknown sensing mode `{s}`")),
        }
    }
}

/// 1 s logarithmic sweep.
pub fn sweep_1s() -> SoundSpec {
    SoundSpec::log_sweep(1.0)
}

/// 20 ms of white noise; the same realization is played every time.
pub fn white_noise_20ms() -> SoundSpec {
    SoundSpec::white_noise(0.02, 0)
}

/// The six contact sites, touched with `force_n`.
pub fn contact_states(force_n: f64) -> Vec<ActuatorState> {
    ContactSite::CONTACTS
        .iter()
        .map(|&s| ActuatorState::touching(s, force_n))
        .collect()
}

/// The six contact sites plus no contact.
pub fn contact_states_with_none(force_n: f64) -> Vec<ActuatorState> {
    let mut s = contact_states(force_n);
    s.push(ActuatorState::neutral());
    s
}

/// Records `states` and returns the recordings with their features.
pub fn simulate(
    model: &ActuatorModel,
    states: &[ActuatorState],
    stimulus: &Stimulus,
    repeats: usize,
    seed: u64,
    environment_db: Option<f64>,
) -> Result<(Vec<Recording>, FeatureSet), EvalError> {
    let recs = sample_dataset_in(model, states, stimulus, repeats, seed, environment_db)?;
    let features = featurize(&recs)?;
    Ok((recs, features))
}

/// What a task records: states, stimulus, repeats per state and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub states: Vec<ActuatorState>,
    pub stimulus: Stimulus,
    pub repeats: usize,
    pub seed: u64,
}

impl Design {
    pub fn record(&self, model: &ActuatorModel) -> Result<Vec<Recording>, EvalError> {
        Ok(sample_dataset_in(model, &self.states, &self.stimulus, self.repeats, self.seed, None)?)
    }

    fn simulate(&self, model: &ActuatorModel) -> Result<FeatureSet, EvalError> {
        Ok(featurize(&self.record(model)?)?)
    }
}

/// Shuffles whole label rows of `data`.
fn permute_labels(data: &mut FeatureSet, seed: u64) {
    data.labels.shuffle(&mut rng::stream(seed));
}

/// Stratified split on the class label of `target`, with the optional
/// label permutation applied to the training side.
fn split(
    cfg: &SimConfig,
    data: &FeatureSet,
    strata: &[String],
    seed: u64,
) -> Result<(FeatureSet, FeatureSet), EvalError> {
    let (tr, te) = stratified_indices(strata, cfg.split_ratio, seed)?;
    let mut train = data.subset(&tr);
    if cfg.permute_labels {
        permute_labels(&mut train, rng::derive(seed, &[1]));
    }
    Ok((train, data.subset(&te)))
}

fn strata(data: &FeatureSet, target: Target) -> Result<Vec<String>, EvalError> {
    data.class_labels(target).ok_or(EvalError::MissingTarget(target))
}

pub fn location_design(cfg: &SimConfig, stimulus: &SoundSpec, mode: SensingMode) -> Design {
    Design {
        states: contact_states(cfg.contact_force_n),
        stimulus: mode.stimulus(stimulus),
        repeats: cfg.repeats,
        seed: cfg.task_seed("location"),
    }
}

/// Six-site location classification with the default KNN.
pub fn run_location_experiment(cfg: &SimConfig, stimulus: &SoundSpec, mode: SensingMode) -> Result<EvalReport, EvalError> {
    let design = location_design(cfg, stimulus, mode);
    let data = design.simulate(&cfg.actuator(&cfg.actuator_id))?;
    let (train, test) = split(cfg, &data, &strata(&data, Target::Location)?, design.seed)?;
    let m = cfg.knn_model(&train, Target::Location, KnnMode::Classify)?;
    evaluate(&m, &test)
}

/// Positions along the palmar side: 30 points, 3 mm apart.
pub fn regression_positions() -> Vec<f64> {
    (0..30).map(|i| 3.0 * i as f64).collect()
}

pub fn regression_design(cfg: &SimConfig, stimulus: &SoundSpec, mode: SensingMode) -> Design {
    Design {
        states: regression_positions()
            .into_iter()
            .map(|p| ActuatorState::touching_at(p, cfg.contact_force_n))
            .collect(),
        stimulus: mode.stimulus(stimulus),
        repeats: 5,
        seed: cfg.task_seed("regression"),
    }
}

/// Continuous contact position with a KNN regressor, 5 repeats per position.
pub fn run_regression_experiment(cfg: &SimConfig, stimulus: &SoundSpec, mode: SensingMode) -> Result<EvalReport, EvalError> {
    let design = regression_design(cfg, stimulus, mode);
    let data = design.simulate(&cfg.actuator(&cfg.actuator_id))?;
    let (train, test) = split(cfg, &data, &strata(&data, Target::Position)?, design.seed)?;
    let m = cfg.knn_model(&train, Target::Position, KnnMode::Regress)?;
    evaluate(&m, &test)
}

pub fn force_design(cfg: &SimConfig) -> Design {
    Design {
        states: [0.5, 1.5, 3.0]
            .into_iter()
            .cartesian_product([ContactSite::Middle, ContactSite::Left, ContactSite::Right])
            .map(|(f, s)| ActuatorState::touching(s, f))
            .collect(),
        stimulus: Stimulus::Active(white_noise_20ms()),
        repeats: cfg.repeats,
        seed: cfg.task_seed("force"),
    }
}

/// Three forces pressed from three sides (side is a nuisance factor).
pub fn run_force_experiment(cfg: &SimConfig) -> Result<EvalReport, EvalError> {
    let design = force_design(cfg);
    let data = design.simulate(&cfg.actuator(&cfg.actuator_id))?;
    let (train, test) = split(cfg, &data, &strata(&data, Target::Force)?, design.seed)?;
    let m = cfg.knn_model(&train, Target::Force, KnnMode::Classify)?;
    evaluate(&m, &test)
}

/// Range of the hand-applied contact force in the material task.
pub const MATERIAL_FORCE_RANGE_N: (f64, f64) = (0.5, 3.0);

/// Three objects pressed by hand at six sites, 1 s sweep. The force of
/// each press is drawn from [`MATERIAL_FORCE_RANGE_N`].
pub fn material_design(cfg: &SimConfig) -> Design {
    let seed = cfg.task_seed("material");
    let mut r = rng::stream(rng::derive(seed, &[0]));
    let (lo, hi) = MATERIAL_FORCE_RANGE_N;
    let mut states = Vec::new();
    for m in Material::OBJECTS {
        for s in ContactSite::CONTACTS {
            for _ in 0..cfg.repeats {
                let force = r.random_range(lo..=hi);
                states.push(ActuatorState::touching(s, force).with_material(m));
            }
        }
    }
    Design {
        states,
        stimulus: Stimulus::Active(sweep_1s()),
        repeats: 1,
        seed,
    }
}

/// Train and test sets of the material task, split stratified on
/// material and site.
pub fn material_data(cfg: &SimConfig) -> Result<(FeatureSet, FeatureSet), EvalError> {
    let design = material_design(cfg);
    let seed = design.seed;
    let data = design.simulate(&cfg.actuator(&cfg.actuator_id))?;
    let cells: Vec<String> = data
        .labels
        .iter()
        .map(|l| format!("{}/{}", l.material, l.location.label()))
        .collect();
    split(cfg, &data, &cells, seed)
}

/// Learners compared on the material task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialComparison {
    pub default_knn: EvalReport,
    pub svc_default: EvalReport,
    pub knn_grid: GridResult,
    pub knn_best: EvalReport,
    pub svc_grid: GridResult,
    pub svc_best: EvalReport,
}

impl MaterialComparison {
    /// The grid winner with the higher cross-validation score (KNN on ties).
    pub fn selected(&self) -> &EvalReport {
        if self.svc_grid.best_score > self.knn_grid.best_score {
            &self.svc_best
        } else {
            &self.knn_best
        }
    }
}

/// Material classification: default KNN, SVC at `svc_c`, and the
/// cross-validated winners of the KNN and SVC grids, all on one split.
pub fn run_material_experiment(cfg: &SimConfig) -> Result<MaterialComparison, EvalError> {
    let (train, test) = material_data(cfg)?;
    let t = Target::Material;
    let fit = |h: &Hyperparams| -> Result<EvalReport, EvalError> {
        let m = SensorModel::fit(&train, t, h, KnnMode::Classify)?;
        evaluate(&m, &test)
    };
    let grid_seed = cfg.task_seed("material-grid");
    let knn_grid = grid_search(&train, t, &ParamGrid::knn_default(), cfg.folds, grid_seed)?;
    let svc_grid = grid_search(&train, t, &ParamGrid::svc_default(), cfg.folds, grid_seed)?;
    Ok(MaterialComparison {
        default_knn: fit(&Hyperparams::knn_default())?,
        svc_default: fit(&Hyperparams::svc(cfg.svc_c))?,
        knn_best: fit(&knn_grid.best)?,
        svc_best: fit(&svc_grid.best)?,
        knn_grid,
        svc_grid,
    })
}

/// 250 temperatures drawn across 20-95 degC, 1 s white noise.
pub fn temperature_design(cfg: &SimConfig, mode: SensingMode) -> Design {
    let seed = cfg.task_seed("temperature");
    let mut r = rng::stream(rng::derive(seed, &[0]));
    Design {
        states: (0..250)
            .map(|_| ActuatorState::neutral().with_temperature(r.random_range(20.0..=95.0)))
            .collect(),
        stimulus: mode.stimulus(&SoundSpec::white_noise(1.0, 0)),
        repeats: 1,
        seed,
    }
}

/// Temperature regression with a KNN regressor on a random 2:1 split.
pub fn run_temperature_experiment(cfg: &SimConfig, mode: SensingMode) -> Result<EvalReport, EvalError> {
    let design = temperature_design(cfg, mode);
    let data = design.simulate(&cfg.actuator(&cfg.actuator_id))?;
    let (train, test) = random_split(&data, 2.0 / 3.0, design.seed)?;
    let m = cfg.knn_model(&train, Target::Temperature, KnnMode::Regress)?;
    evaluate(&m, &test)
}

/// Condition grid of the simultaneous experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousGrid {
    pub sites: Vec<ContactSite>,
    pub forces_n: Vec<f64>,
    pub inflations_kpa: Vec<f64>,
}

impl Default for SimultaneousGrid {
    /// Seven locations (six sites and no contact) x two forces x two inflations.
    fn default() -> Self {
        let mut sites = ContactSite::CONTACTS.to_vec();
        sites.push(ContactSite::None);
        Self {
            sites,
            forces_n: vec![1.0, 3.0],
            inflations_kpa: vec![0.0, 30.0],
        }
    }
}

impl SimultaneousGrid {
    /// States in grid order. Without contact the force is zero.
    pub fn states(&self) -> Vec<ActuatorState> {
        let mut out = Vec::new();
        for &site in &self.sites {
            for &f in &self.forces_n {
                for &p in &self.inflations_kpa {
                    out.push(ActuatorState::touching(site, f).with_inflation(p));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousReport {
    pub location: EvalReport,
    pub force: EvalReport,
    pub inflation: EvalReport,
}

/// Location, force and inflation from one dataset, each with its own
/// KNN trained on the full training split.
pub fn simultaneous_design(cfg: &SimConfig, grid: &SimultaneousGrid) -> Design {
    Design {
        states: grid.states(),
        stimulus: Stimulus::Active(white_noise_20ms()),
        repeats: cfg.repeats,
        seed: cfg.task_seed("simultaneous"),
    }
}

pub fn run_simultaneous_experiment(cfg: &SimConfig, grid: &SimultaneousGrid) -> Result<SimultaneousReport, EvalError> {
    let design = simultaneous_design(cfg, grid);
    let seed = design.seed;
    let data = design.simulate(&cfg.actuator(&cfg.actuator_id))?;
    let joint: Vec<String> = data
        .labels
        .iter()
        .map(|l| {
            [Target::Location, Target::Force, Target::Inflation]
                .iter()
                .map(|t| t.class_label(l).unwrap_or_default())
                .join("/")
        })
        .collect();
    let (train, test) = split(cfg, &data, &joint, seed)?;
    let run = |t: Target| -> Result<EvalReport, EvalError> {
        let m = cfg.knn_model(&train, t, KnnMode::Classify)?;
        evaluate(&m, &test)
    };
    Ok(SimultaneousReport {
        location: run(Target::Location)?,
        force: run(Target::Force)?,
        inflation: run(Target::Inflation)?,
    })
}

/// Outside white noise at each level (dB re. the model's reference).
/// Models train on quiet recordings and are tested on the same test
/// recordings re-made with outside noise. Cells also carry the SNR of an
/// active against a passive recording in that environment.
pub fn run_noise_robustness(cfg: &SimConfig, levels_db: &[f64]) -> Result<AblationResult, EvalError> {
    let mut result = AblationResult::new("noise", &["level_db"], "acr");
    if levels_db.is_empty() {
        return Ok(result);
    }
    let model = cfg.actuator(&cfg.actuator_id);
    let seed = cfg.task_seed("noise");
    let states = contact_states(cfg.contact_force_n);
    let stim = Stimulus::Active(sweep_1s());
    let (_, quiet) = simulate(&model, &states, &stim, cfg.repeats, seed, None)?;
    let labels = strata(&quiet, Target::Location)?;
    let (tr, te) = stratified_indices(&labels, cfg.split_ratio, seed)?;
    let mut train = quiet.subset(&tr);
    if cfg.permute_labels {
        permute_labels(&mut train, rng::derive(seed, &[1]));
    }
    let m = cfg.knn_model(&train, Target::Location, KnnMode::Classify)?;
    for &level in levels_db {
        let (_, noisy) = simulate(&model, &states, &stim, cfg.repeats, seed, Some(level))?;
        let report = evaluate(&m, &noisy.subset(&te))?;
        let snr = environment_snr(&model, &states[0], &sweep_1s(), level, seed)?;
        result.push(&[fmt_num(level)], report.acr.unwrap_or(f64::NAN), &[("snr_db", snr)]);
    }
    Ok(result)
}

/// SNR of an active recording against a passive one, both with outside
/// white noise at `level_db`.
pub fn environment_snr(
    model: &ActuatorModel,
    state: &ActuatorState,
    spec: &SoundSpec,
    level_db: f64,
    seed: u64,
) -> Result<f64, EvalError> {
    let active = Source::new(Stimulus::Active(spec.clone()))?;
    let passive = Source::new(SensingMode::Passive.stimulus(spec))?;
    let noise = Waveform::new(
        uniform_noise(active.len(), rng::derive(seed, &[7]), 1.0),
        spec.sample_rate_hz,
    );
    let ext = || External {
        waveform: &noise,
        level_db,
    };
    let a = actuator::modulate(model, state, &active, Some(ext()), seed)?;
    let p = actuator::modulate(model, state, &passive, Some(ext()), seed)?;
    snr_estimate(&a, &p)
}

/// SNR of an active against a passive recording in a quiet environment.
pub fn quiet_snr(model: &ActuatorModel, state: &ActuatorState, spec: &SoundSpec, seed: u64) -> Result<f64, EvalError> {
    let a = actuator::modulate(model, state, &Source::new(Stimulus::Active(spec.clone()))?, None, seed)?;
    let p = actuator::modulate(
        model,
        state,
        &Source::new(SensingMode::Passive.stimulus(spec))?,
        None,
        seed,
    )?;
    snr_estimate(&a, &p)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn stderr(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// Per-group train/test split of one dataset per group.
struct GroupData {
    train: FeatureSet,
    test: FeatureSet,
}

/// Trains on every combination of `size` groups and scores on the test
/// sets of the training groups ("same") and of all other groups
/// ("transfer"). Records mean and standard error over combinations.
fn transfer_cells(
    cfg: &SimConfig,
    result: &mut AblationResult,
    groups: &[GroupData],
    sizes: &[usize],
    learner: &Hyperparams,
) -> Result<(), EvalError> {
    for &size in sizes {
        if size == 0 || size > groups.len() {
            return Err(EvalError::InvalidSetting(format!(
                "combination size {size} with {} groups",
                groups.len()
            )));
        }
        let mut same = Vec::new();
        let mut transfer = Vec::new();
        for combo in (0..groups.len()).combinations(size) {
            let mut train = FeatureSet::default();
            for &g in &combo {
                train = train.concat(&groups[g].train);
            }
            if cfg.permute_labels {
                permute_labels(&mut train, rng::derive(cfg.seed, &[combo.len() as u64, combo[0] as u64]));
            }
            let m = SensorModel::fit(&train, Target::Location, learner, KnnMode::Classify)?;
            let score = |g: usize| -> Result<f64, EvalError> { Ok(evaluate(&m, &groups[g].test)?.acr.unwrap_or(f64::NAN)) };
            same.push(mean(&combo.iter().map(|&g| score(g)).collect::<Result<Vec<_>, _>>()?));
            let others: Vec<usize> = (0..groups.len()).filter(|g| !combo.contains(g)).collect();
            if !others.is_empty() {
                transfer.push(mean(&others.iter().map(|&g| score(g)).collect::<Result<Vec<_>, _>>()?));
            }
        }
        let n = same.len() as f64;
        result.push(
            &[size.to_string(), "same".into()],
            mean(&same),
            &[("stderr", stderr(&same)), ("combinations", n)],
        );
        if !transfer.is_empty() {
            result.push(
                &[size.to_string(), "transfer".into()],
                mean(&transfer),
                &[("stderr", stderr(&transfer)), ("combinations", transfer.len() as f64)],
            );
        }
    }
    Ok(())
}

fn group_split(cfg: &SimConfig, data: &FeatureSet, seed: u64) -> Result<GroupData, EvalError> {
    let (tr, te) = stratified_indices(&strata(data, Target::Location)?, cfg.split_ratio, seed)?;
    Ok(GroupData {
        train: data.subset(&tr),
        test: data.subset(&te),
    })
}

/// Seven-class location sensing at robot poses `1..=n_poses`. Cells hold
/// same-pose and transferred-pose ACR per training-combination size.
/// Workspace poses of the pose-transfer analog.
pub const DEFAULT_POSES: u32 = 5;

pub fn run_pose_transfer(cfg: &SimConfig, n_poses: u32, combo_sizes: &[usize]) -> Result<AblationResult, EvalError> {
    let mut result = AblationResult::new("pose", &["train_poses", "evaluation"], "acr");
    let model = cfg.actuator(&cfg.actuator_id);
    let stim = Stimulus::Active(white_noise_20ms());
    let groups = (1..=n_poses)
        .map(|pose| {
            let seed = rng::derive(cfg.task_seed("pose"), &[pose as u64]);
            let states: Vec<ActuatorState> = contact_states_with_none(cfg.contact_force_n)
                .into_iter()
                .map(|s| s.with_pose(pose))
                .collect();
            let (_, data) = simulate(&model, &states, &stim, cfg.repeats, seed, None)?;
            group_split(cfg, &data, seed)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    transfer_cells(cfg, &mut result, &groups, combo_sizes, &cfg.knn)?;
    Ok(result)
}

/// Four-class location sensing (tip, middle, base, none) on each actuator
/// in `ids`; same- vs cross-actuator ACR per training-combination size.
pub fn run_actuator_transfer(cfg: &SimConfig, ids: &[String], combo_sizes: &[usize]) -> Result<AblationResult, EvalError> {
    let mut result = AblationResult::new("transfer", &["train_actuators", "evaluation"], "acr");
    let stim = Stimulus::Active(white_noise_20ms());
    let states = vec![
        ActuatorState::touching(ContactSite::Tip, cfg.contact_force_n),
        ActuatorState::touching(ContactSite::Middle, cfg.contact_force_n),
        ActuatorState::touching(ContactSite::Base, cfg.contact_force_n),
        ActuatorState::neutral(),
    ];
    let groups = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let model = cfg.actuator(id);
            let seed = rng::derive(cfg.task_seed("transfer"), &[i as u64]);
            let (_, data) = simulate(&model, &states, &stim, cfg.repeats, seed, None)?;
            group_split(cfg, &data, seed)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    transfer_cells(cfg, &mut result, &groups, combo_sizes, &cfg.knn)?;
    Ok(result)
}

/// Durations of the sound ablation, in seconds.
pub const ABLATION_DURATIONS_S: [f64; 5] = [0.005, 0.02, 0.05, 0.5, 1.0];

/// Seven-class location ACR for every sound kind and duration.
pub fn run_sound_ablation(cfg: &SimConfig, kinds: &[SoundKind], durations_s: &[f64]) -> Result<AblationResult, EvalError> {
    let mut result = AblationResult::new("sound", &["sound", "duration_ms"], "acr");
    let model = cfg.actuator(&cfg.actuator_id);
    let states = contact_states_with_none(cfg.contact_force_n);
    for &kind in kinds {
        for &d in durations_s {
            let spec = SoundSpec::new(kind, d);
            let seed = rng::derive(cfg.task_seed("sound"), &[kind as u64, d.to_bits()]);
            let (_, data) = simulate(&model, &states, &Stimulus::Active(spec), cfg.repeats, seed, None)?;
            let (train, test) = split(cfg, &data, &strata(&data, Target::Location)?, seed)?;
            let m = cfg.knn_model(&train, Target::Location, KnnMode::Classify)?;
            let acr = evaluate(&m, &test)?.acr.unwrap_or(f64::NAN);
            result.push(&[kind.name().to_string(), fmt_num(d * 1000.0)], acr, &[]);
        }
    }
    Ok(result)
}

/// Six-site location ACR with 20 ms white noise at each volume fraction.
/// Fraction 0 runs as passive sensing.
pub fn run_volume_ablation(cfg: &SimConfig, fractions: &[f64]) -> Result<AblationResult, EvalError> {
    let mut result = AblationResult::new("volume", &["volume"], "acr");
    let model = cfg.actuator(&cfg.actuator_id);
    let states = contact_states(cfg.contact_force_n);
    let seed = cfg.task_seed("volume");
    for &f in fractions {
        if !(0.0..=1.0).contains(&f) {
            return Err(EvalError::InvalidSetting(format!("volume fraction {f} outside [0, 1]")));
        }
        let spec = white_noise_20ms().with_volume(f);
        let mode = if f == 0.0 { SensingMode::Passive } else { SensingMode::Active };
        let (_, data) = simulate(&model, &states, &mode.stimulus(&spec), cfg.repeats, seed, None)?;
        let (train, test) = split(cfg, &data, &strata(&data, Target::Location)?, seed)?;
        let m = cfg.knn_model(&train, Target::Location, KnnMode::Classify)?;
        result.push(&[fmt_num(f)], evaluate(&m, &test)?.acr.unwrap_or(f64::NAN), &[]);
    }
    Ok(result)
}

/// Mean of each cell group keyed by one axis value.
pub fn group_means(result: &AblationResult, axis: usize) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for c in &result.cells {
        groups.entry(c.coords[axis].clone()).or_default().push(c.score);
    }
    groups.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

/// Convenience for tests and the CLI: predictions of any model on a set.
pub fn predict_labels(model: &dyn Predictor, data: &FeatureSet) -> Result<Vec<String>, EvalError> {
    Ok(model.predict_all(&data.features)?.iter().map(|p| p.to_string()).collect())
}
