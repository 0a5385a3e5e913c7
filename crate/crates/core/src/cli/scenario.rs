//! Scenario files: a scene reference, a seed and one task.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::inspection::{DetectionParams, PlannerConfig};
use crate::interconnect::AssemblyGraph;
use crate::locomotion::DEFAULT_REACH_M;
use crate::maintenance::MaintenanceAction;
use crate::scene::{SceneFile, WarehouseScene};
use crate::sensors::{CameraModel, ProfilometerModel, SensorHead, ThermalModel};
use crate::verification::PodSpec;

/// Sensor settings applied to every head placed by a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadSettings {
    #[serde(default = "yes")]
    pub illumination_on: bool,
    #[serde(default)]
    pub ambient_light: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraModel>,
    #[serde(default)]
    pub profilometer: ProfilometerModel,
    #[serde(default)]
    pub thermal: ThermalModel,
}

fn yes() -> bool {
    true
}

impl Default for HeadSettings {
    fn default() -> Self {
        Self {
            illumination_on: true,
            ambient_light: false,
            camera: None,
            profilometer: ProfilometerModel::default(),
            thermal: ThermalModel::default(),
        }
    }
}

impl HeadSettings {
    pub fn apply(&self, mut head: SensorHead) -> SensorHead {
        head.illumination_on = self.illumination_on;
        head.ambient_light = self.ambient_light;
        if let Some(cam) = self.camera {
            for c in &mut head.cameras {
                *c = CameraModel {
                    mount: c.mount,
                    ..cam
                };
            }
        }
        head.profilometer = self.profilometer;
        head.thermal = self.thermal;
        head
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Task {
    Inspect {
        oru: String,
        #[serde(default)]
        planner: PlannerConfig,
        #[serde(default)]
        detection: DetectionParams,
    },
    InspectStructure {
        #[serde(default)]
        planner: PlannerConfig,
        #[serde(default)]
        detection: DetectionParams,
    },
    Walk {
        goal: String,
        #[serde(default = "default_reach")]
        reach_m: f64,
        /// Starting (left, rear) fixtures when the scene carries no assembly.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<(String, String)>,
    },
    Pod {
        spec: PodSpec,
        #[serde(default = "default_pod_standoff")]
        standoff_m: f64,
        /// Aim point on the patch; the patch center when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        aim_uv: Option<[f64; 2]>,
    },
    Maintain {
        actions: Vec<MaintenanceAction>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        worksite: Option<[f64; 3]>,
    },
}

fn default_reach() -> f64 {
    DEFAULT_REACH_M
}

fn default_pod_standoff() -> f64 {
    2.0
}

impl Task {
    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Inspect { .. } | Task::InspectStructure { .. } => TaskKind::Inspect,
            Task::Walk { .. } => TaskKind::Walk,
            Task::Pod { .. } => TaskKind::Pod,
            Task::Maintain { .. } => TaskKind::Maintain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Inspect,
    Walk,
    Pod,
    Maintain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    /// Scene file, relative to the scenario file.
    pub scene: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub head: HeadSettings,
    /// Overrides the scene file's assembly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembly: Option<AssemblyGraph>,
    pub task: Task,
}

/// A scenario with its scene loaded and references checked.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub scene: WarehouseScene,
    pub assembly: Option<AssemblyGraph>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<LoadedScenario, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let scenario = Self::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        scenario.resolve(&base)
    }

    /// Load the scene relative to `base` and check every id the task names.
    pub fn resolve(self, base: &Path) -> Result<LoadedScenario, CliError> {
        let scene_path: PathBuf = base.join(&self.scene);
        let text = fs::read_to_string(&scene_path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", scene_path.display())))?;
        let file = SceneFile::from_json(&text)
            .map_err(|e| CliError::Config(format!("scene {}: {e}", self.scene)))?;
        let assembly = self.assembly.clone().or(file.assembly);
        if let Some(a) = &assembly {
            a.validate()
                .map_err(|e| CliError::Config(format!("assembly: {e}")))?;
        }
        let loaded = LoadedScenario {
            scenario: self,
            scene: file.scene,
            assembly,
        };
        loaded.check_references()?;
        Ok(loaded)
    }
}

impl LoadedScenario {
    fn check_references(&self) -> Result<(), CliError> {
        let scene = &self.scene;
        let missing = |what: &str, id: &str| CliError::Config(format!("unknown {what} `{id}`"));
        match &self.scenario.task {
            Task::Inspect { oru, .. } => {
                scene.oru(oru).map_err(|_| missing("ORU", oru))?;
            }
            Task::InspectStructure { .. } => {
                if scene.structure_patches().is_empty() {
                    return Err(CliError::Config("scene has no structure patches".into()));
                }
            }
            Task::Walk { goal, start, .. } => {
                scene.fixture(goal).map_err(|_| missing("fixture", goal))?;
                if let Some((l, r)) = start {
                    scene.fixture(l).map_err(|_| missing("fixture", l))?;
                    scene.fixture(r).map_err(|_| missing("fixture", r))?;
                } else if self.assembly.is_none() {
                    return Err(CliError::Config(
                        "walk needs an assembly or explicit start fixtures".into(),
                    ));
                }
            }
            Task::Pod { spec, .. } => {
                scene
                    .patch(&spec.patch_id)
                    .map_err(|_| missing("patch", &spec.patch_id))?;
            }
            Task::Maintain { .. } => {}
        }
        Ok(())
    }
}
