//! Viewpoint planning, surface-defect detection and thermal anomaly
//! detection.

mod cluster;
pub mod planner;
pub mod surface;
pub mod thermal;

use thiserror::Error;

use crate::scene::SceneError;
use crate::sensors::SensorError;

pub use planner::{
    coverage, plan_for_oru, plan_viewpoints, CoveredPatch, InspectionPlan, PlannerConfig, Viewpoint,
};
pub use surface::{
    classify_defect, detect_surface_defects, DefectClass, DetectedDefect, DetectionParams,
};
pub use thermal::{detect_thermal_anomalies, AnomalyClass, ThermalAnomaly, DEFAULT_THRESHOLD_C};

#[derive(Debug, Error)]
pub enum InspectionError {
    #[error("ORU `{0}` has no reachable surface")]
    NoReachableSurface(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("invalid inspection setup: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
}

pub type Result<T> = std::result::Result<T, InspectionError>;
