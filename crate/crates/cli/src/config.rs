use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use acoustic_sensing::eval::{SensingMode, SimConfig};
use acoustic_sensing::models::Hyperparams;
use acoustic_sensing::{ActuatorModel, SoundKind, SoundSpec};
use serde::{Deserialize, Serialize};

/// Experiments and ablations reachable from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "location6")]
    Location6,
    #[serde(rename = "regression30")]
    Regression30,
    #[serde(rename = "force3")]
    Force3,
    #[serde(rename = "material3")]
    Material3,
    #[serde(rename = "temperature")]
    Temperature,
    #[serde(rename = "simultaneous700")]
    Simultaneous700,
    #[serde(rename = "noise")]
    Noise,
    #[serde(rename = "pose")]
    Pose,
    #[serde(rename = "sound-grid")]
    SoundGrid,
    #[serde(rename = "volume")]
    Volume,
    #[serde(rename = "transfer")]
    Transfer,
}

impl Task {
    pub const ALL: [Task; 11] = [
        Task::Location6,
        Task::Regression30,
        Task::Force3,
        Task::Material3,
        Task::Temperature,
        Task::Simultaneous700,
        Task::Noise,
        Task::Pose,
        Task::SoundGrid,
        Task::Volume,
        Task::Transfer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Location6 => "location6",
            Task::Regression30 => "regression30",
            Task::Force3 => "force3",
            Task::Material3 => "material3",
            Task::Temperature => "temperature",
            Task::Simultaneous700 => "simultaneous700",
            Task::Noise => "noise",
            Task::Pose => "pose",
            Task::SoundGrid => "sound-grid",
            Task::Volume => "volume",
            Task::Transfer => "transfer",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Task::ALL.iter().map(|t| t.name()).collect();
            format!("unknown task `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Axes of the ablation tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationAxes {
    pub levels_db: Vec<f64>,
    pub fractions: Vec<f64>,
    pub n_poses: u32,
    pub combo_sizes: Vec<usize>,
    pub actuator_ids: Vec<String>,
    pub kinds: Vec<SoundKind>,
    pub durations_s: Vec<f64>,
}

impl Default for AblationAxes {
    fn default() -> Self {
        Self {
            levels_db: vec![50.0, 70.0, 90.0],
            fractions: vec![1.0, 0.5, 0.25, 0.1, 0.05, 0.02, 0.01, 0.0],
            n_poses: acoustic_sensing::eval::DEFAULT_POSES,
            combo_sizes: vec![1, 2, 3, 4],
            actuator_ids: ["A", "B", "C", "D", "E"].iter().map(|s| s.to_string()).collect(),
            kinds: SoundKind::ALL.to_vec(),
            durations_s: acoustic_sensing::eval::ABLATION_DURATIONS_S.to_vec(),
        }
    }
}

/// One experiment, as written in a TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Option<Task>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// JSON file with simulator parameters; `sim.model` takes precedence.
    pub model_file: Option<PathBuf>,
    pub mode: Option<SensingMode>,
    /// Stimulus of the location and regression tasks; 1 s sweep if absent.
    pub stimulus: Option<SoundSpec>,
    /// Learner of the KNN-based tasks.
    pub learner: Option<Hyperparams>,
    pub split_ratio: Option<f64>,
    pub sim: SimConfig,
    pub ablation: AblationAxes,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e.message()))
    }

    /// The runner settings with every top-level override applied.
    pub fn sim_config(&self, seed: u64) -> anyhow::Result<SimConfig> {
        let mut sim = self.sim.clone();
        sim.seed = seed;
        if sim.model.is_none() {
            if let Some(path) = &self.model_file {
                let m: ActuatorModel = acoustic_sensing::dataset_io::read_json(path)?;
                sim.model = Some(m);
            }
        }
        if let Some(l) = self.learner {
            sim.knn = l;
        }
        if let Some(r) = self.split_ratio {
            sim.split_ratio = r;
        }
        Ok(sim)
    }

    pub fn stimulus(&self) -> SoundSpec {
        self.stimulus.clone().unwrap_or_else(acoustic_sensing::eval::sweep_1s)
    }

    pub fn mode(&self) -> SensingMode {
        self.mode.unwrap_or(SensingMode::Active)
    }
}
