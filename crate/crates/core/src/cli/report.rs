//! Report document and requirement traceability.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::Task;
use super::CliError;
use crate::inspection::{AnomalyClass, DetectedDefect, InspectionPlan, ThermalAnomaly};
use crate::interconnect::PowerReport;
use crate::maintenance::LogEntry;
use crate::scene::Pose;
use crate::verification::PodResult;

/// Requirement rows, in table order.
pub const REQUIREMENTS: [Requirement; 11] = [
    Requirement::Payloads,
    Requirement::Spacecraft,
    Requirement::Profilometry,
    Requirement::Resolution,
    Requirement::Reliability,
    Requirement::Range,
    Requirement::Thermal,
    Requirement::Illumination,
    Requirement::Handling,
    Requirement::Grasping,
    Requirement::Torque,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Requirement {
    Payloads,
    Spacecraft,
    Profilometry,
    Resolution,
    Reliability,
    Range,
    Thermal,
    Illumination,
    Handling,
    Grasping,
    Torque,
}

impl Requirement {
    pub fn text(self) -> &'static str {
        match self {
            Requirement::Payloads => "NDT of every external surface of every payload",
            Requirement::Spacecraft => {
                "external inspection of hosted spacecraft without disassembly"
            }
            Requirement::Profilometry => "scratch damage from debris over 0.3 mm detected",
            Requirement::Resolution => "impact damage detectable down to 0.6 mm diameter",
            Requirement::Reliability => "90% detection probability at 95% confidence",
            Requirement::Range => "inspection from 0.2 m to 2 m",
            Requirement::Thermal => "temperatures from -40 °C to 150 °C distinguished",
            Requirement::Illumination => "ring illumination carried for vision",
            Requirement::Handling => "parts and tools handled with dedicated robotic tools",
            Requirement::Grasping => "gripper grasps objects from 0.5 cm to 10 cm",
            Requirement::Torque => "torque tool delivers 2.7 N·m to 30 N·m",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotExercised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub requirement: Requirement,
    pub text: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub scene: String,
    pub seed: u64,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewpointSummary {
    pub patch_id: String,
    pub standoff_m: f64,
    pub aim_uv: [f64; 2],
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub target: String,
    pub viewpoints: Vec<ViewpointSummary>,
    pub unreachable_patches: Vec<String>,
}

impl From<&InspectionPlan> for PlanSummary {
    fn from(plan: &InspectionPlan) -> Self {
        Self {
            target: plan.oru_id.clone(),
            viewpoints: plan
                .viewpoints
                .iter()
                .map(|v| ViewpointSummary {
                    patch_id: v.target_patch().to_string(),
                    standoff_m: v.standoff_m,
                    aim_uv: v.aim_uv,
                    pose: v.pose,
                })
                .collect(),
            unreachable_patches: plan.unreachable_patches.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySummary {
    pub patch_id: String,
    pub viewpoint: usize,
    pub classification: AnomalyClass,
    pub pixel_count: usize,
    pub mean_delta_c: f64,
    pub peak_c: f64,
    pub centroid_uv: [f64; 2],
}

impl AnomalySummary {
    pub fn new(viewpoint: usize, a: &ThermalAnomaly) -> Self {
        Self {
            patch_id: a.patch_id.clone(),
            viewpoint,
            classification: a.classification,
            pixel_count: a.pixels.len(),
            mean_delta_c: a.mean_delta_c,
            peak_c: a.peak_c,
            centroid_uv: a.centroid_uv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub start: (String, String),
    pub goal: String,
    pub steps: Vec<String>,
    pub final_legs: (Option<String>, Option<String>),
    /// The assembly stayed grounded after every step.
    pub anchored_throughout: bool,
}

/// Fixed field order keeps the JSON stable across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: ScenarioEcho,
    pub configuration: Option<String>,
    pub power: Option<PowerReport>,
    pub plan: Option<PlanSummary>,
    pub coverage: Option<f64>,
    pub detections: Vec<DetectedDefect>,
    pub thermal_anomalies: Vec<AnomalySummary>,
    pub walk: Option<WalkSummary>,
    pub pod: Option<PodResult>,
    pub maintenance_log: Vec<LogEntry>,
    pub traceability: Vec<TraceRow>,
}

impl Report {
    pub fn empty(scenario: ScenarioEcho) -> Self {
        Self {
            scenario,
            configuration: None,
            power: None,
            plan: None,
            coverage: None,
            detections: vec![],
            thermal_anomalies: vec![],
            walk: None,
            pod: None,
            maintenance_log: vec![],
            traceability: REQUIREMENTS
                .iter()
                .map(|&r| TraceRow {
                    requirement: r,
                    text: r.text().to_string(),
                    status: Status::NotExercised,
                    detail: String::new(),
                })
                .collect(),
        }
    }

    pub fn set(&mut self, requirement: Requirement, pass: bool, detail: impl Into<String>) {
        let row = self
            .traceability
            .iter_mut()
            .find(|r| r.requirement == requirement)
            .expect("every requirement has a row");
        row.status = if pass { Status::Pass } else { Status::Fail };
        row.detail = detail.into();
    }

    pub fn status(&self, requirement: Requirement) -> Status {
        self.traceability
            .iter()
            .find(|r| r.requirement == requirement)
            .map_or(Status::NotExercised, |r| r.status)
    }

    /// 0 when every exercised row passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.traceability.iter().any(|r| r.status == Status::Fail) {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("report: {e}")))
    }
}

pub fn emit_report(report: &Report, path: &Path) -> Result<(), CliError> {
    fs::write(path, report.to_json()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
