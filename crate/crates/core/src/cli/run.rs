//! Task dispatch.

use std::collections::BTreeSet;

use super::report::{AnomalySummary, PlanSummary, Report, Requirement, ScenarioEcho, WalkSummary};
use super::scenario::{HeadSettings, LoadedScenario, Task};
use super::{derive_seed, CliError};
use crate::inspection::{
    detect_surface_defects, detect_thermal_anomalies, plan_for_oru, AnomalyClass, DetectedDefect,
    DetectionParams, InspectionError, PlannerConfig, DEFAULT_THRESHOLD_C,
};
use crate::interconnect::{AssemblyGraph, Configuration};
use crate::locomotion::{execute_step, leg_fixture, FixtureGraph, Leg};
use crate::maintenance::{
    ActionOutcome, GraspOutcome, MaintenanceAction, MaintenanceCell, ToolKind, TorqueOutcome,
};
use crate::scene::{DefectKind, Oru, Pose, WarehouseScene};
use crate::sensors::{
    capture_image, capture_thermal, facing_pose, scan_profile, Image, PointCloud, SensorHead,
    ThermalFrame, RANGE_M,
};
use crate::verification::{run_pod_campaign, DEFAULT_HIT_RADIUS_MM};

const SEED_THERMAL: u64 = 1;
const SEED_PROFILE: u64 = 2;
/// Detections closer than this on one patch are the same feature.
const DEDUP_MM: f64 = 1.0;

/// The report plus raw measurements for export.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub clouds: Vec<(String, PointCloud)>,
    pub frames: Vec<(String, ThermalFrame)>,
}

pub fn run(loaded: &LoadedScenario, seed_override: Option<u64>) -> Result<RunOutput, CliError> {
    let scenario = &loaded.scenario;
    let seed = seed_override.unwrap_or(scenario.seed);
    let mut out = RunOutput {
        report: Report::empty(ScenarioEcho {
            name: scenario.name.clone(),
            scene: scenario.scene.clone(),
            seed,
            task: scenario.task.clone(),
        }),
        clouds: vec![],
        frames: vec![],
    };
    if let Some(a) = &loaded.assembly {
        describe_assembly(&mut out.report, a);
    }

    let scene = &loaded.scene;
    let settings = &scenario.head;
    match &scenario.task {
        Task::Inspect {
            oru,
            planner,
            detection,
        } => {
            let target = scene
                .oru(oru)
                .map_err(|e| CliError::Config(e.to_string()))?;
            inspect(
                scene,
                target,
                Requirement::Payloads,
                settings,
                planner,
                detection,
                seed,
                &mut out,
            )?;
        }
        Task::InspectStructure { planner, detection } => {
            let target = Oru::new(
                "structure",
                scene.structure_patches().to_vec(),
                [0.0; 3],
                Pose::identity(),
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            inspect(
                scene,
                &target,
                Requirement::Spacecraft,
                settings,
                planner,
                detection,
                seed,
                &mut out,
            )?;
        }
        Task::Walk {
            goal,
            reach_m,
            start,
        } => walk(loaded, goal, *reach_m, start.as_ref(), &mut out.report)?,
        Task::Pod {
            spec,
            standoff_m,
            aim_uv,
        } => {
            let patch = scene
                .patch(&spec.patch_id)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let aim = aim_uv.unwrap_or_else(|| patch.center_uv());
            let head = settings.apply(SensorHead::new(facing_pose(patch, aim, *standoff_m)));
            let mut spec = spec.clone();
            spec.base_seed = seed;
            let result = run_pod_campaign(scene, &head, &spec)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let r = &mut out.report;
            let bound = format!(
                "k = {}, n = {}, lower bound {:.5} vs target {}",
                result.k, result.n, result.pod_lower_bound, result.target_pod
            );
            r.set(Requirement::Reliability, result.pass, bound.clone());
            r.set(
                Requirement::Range,
                (RANGE_M[0]..=RANGE_M[1]).contains(standoff_m),
                format!("scan standoff {standoff_m} m"),
            );
            match spec.template {
                DefectKind::ImpactCrater { diameter_mm, .. } => r.set(
                    Requirement::Resolution,
                    result.pass && diameter_mm <= 0.6 + 1e-9,
                    format!("{diameter_mm} mm craters: {bound}"),
                ),
                DefectKind::Scratch { depth_mm, .. } => r.set(
                    Requirement::Profilometry,
                    result.pass && depth_mm <= 0.3 + 1e-9,
                    format!("{depth_mm} mm-deep scratches: {bound}"),
                ),
                DefectKind::ThermalHotspot { .. } => {}
            }
            r.pod = Some(result);
        }
        Task::Maintain { actions, worksite } => {
            let assembly = maintenance_assembly(loaded.assembly.as_ref())?;
            describe_assembly(&mut out.report, &assembly);
            let mut cell = MaintenanceCell::new(
                assembly,
                settings.apply(SensorHead::new(Pose::identity())),
                worksite.unwrap_or([0.0, 0.0, 1.0]),
            );
            maintain(&mut cell, actions, &mut out.report);
        }
    }
    Ok(out)
}

/// A walking assembly picks up the tool arm where it stands.
fn maintenance_assembly(assembly: Option<&AssemblyGraph>) -> Result<AssemblyGraph, CliError> {
    let config_err = |e: String| CliError::Config(format!("maintenance assembly: {e}"));
    let Some(a) = assembly else {
        return AssemblyGraph::maintenance("f0", "f1").map_err(|e| config_err(e.to_string()));
    };
    match a.validate_configuration() {
        Ok(Configuration::Maintenance) => Ok(a.clone()),
        Ok(Configuration::Walking) => {
            let (Some(l), Some(r)) = (leg_fixture(a, Leg::Left), leg_fixture(a, Leg::Rear)) else {
                return Err(config_err("walking assembly is not anchored".into()));
            };
            AssemblyGraph::maintenance(&l, &r).map_err(|e| config_err(e.to_string()))
        }
        Ok(c) => Err(config_err(format!(
            "{c:?} configuration carries no tool arm"
        ))),
        Err(e) => Err(config_err(e.to_string())),
    }
}

fn describe_assembly(report: &mut Report, assembly: &AssemblyGraph) {
    report.configuration = Some(match assembly.validate_configuration() {
        Ok(c) => format!("{c:?}"),
        Err(e) => format!("unrecognized: {e}"),
    });
    report.power = Some(assembly.power_check_default());
}

struct ViewResult {
    image: Image,
    frame: ThermalFrame,
}

#[allow(clippy::too_many_arguments)]
fn inspect(
    scene: &WarehouseScene,
    target: &Oru,
    coverage_row: Requirement,
    settings: &HeadSettings,
    planner: &PlannerConfig,
    detection: &DetectionParams,
    seed: u64,
    out: &mut RunOutput,
) -> Result<(), CliError> {
    let template = settings.apply(SensorHead::new(Pose::identity()));
    let plan = match plan_for_oru(target, &template, planner) {
        Ok(p) => p,
        Err(InspectionError::NoReachableSurface(id)) => {
            out.report.coverage = Some(0.0);
            out.report.set(
                coverage_row,
                false,
                format!("`{id}` has no reachable surface"),
            );
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    let r = &mut out.report;
    r.plan = Some(PlanSummary::from(&plan));
    r.coverage = Some(plan.coverage_fraction);
    r.set(
        coverage_row,
        plan.coverage_fraction == 1.0 && plan.unreachable_patches.is_empty(),
        format!(
            "coverage {} of reachable area, unreachable patches: [{}]",
            plan.coverage_fraction,
            plan.unreachable_patches.join(", ")
        ),
    );

    let capture = |i: usize| -> Result<ViewResult, CliError> {
        let vp = &plan.viewpoints[i];
        let head = settings.apply(SensorHead::new(vp.pose));
        let patch = vp.target_patch();
        Ok(ViewResult {
            image: capture_image(scene, &head, patch)
                .map_err(|e| CliError::Config(e.to_string()))?,
            frame: capture_thermal(
                scene,
                &head,
                patch,
                derive_seed(seed, SEED_THERMAL, i as u64),
            )
            .map_err(|e| CliError::Config(e.to_string()))?,
        })
    };
    let views: Vec<ViewResult> = par_map(plan.viewpoints.len(), capture)?;

    // profilometer follow-up on every feature the cameras resolved
    let mut seen = BTreeSet::new();
    let mut follow_ups = Vec::new();
    for (vi, view) in views.iter().enumerate() {
        for f in view.image.resolvable_features() {
            if seen.insert(f.defect_index) {
                follow_ups.push((f.defect_index, plan.viewpoints[vi].standoff_m));
            }
        }
    }
    let scan = |k: usize| -> Result<(PointCloud, Vec<DetectedDefect>), CliError> {
        let (index, standoff) = follow_ups[k];
        let defect = &scene.defects()[index];
        let patch = scene
            .patch(&defect.patch_id)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let [lo, hi] = settings.profilometer.working_range_m;
        let head = settings.apply(SensorHead::new(facing_pose(
            patch,
            defect.uv,
            standoff.clamp(lo, hi),
        )));
        let cloud = scan_profile(
            scene,
            &head,
            &patch.id,
            derive_seed(seed, SEED_PROFILE, index as u64),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        let found = detect_surface_defects(&cloud, detection)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok((cloud, found))
    };
    let scans = par_map(follow_ups.len(), scan)?;

    let mut detections: Vec<DetectedDefect> = Vec::new();
    for (k, (cloud, found)) in scans.into_iter().enumerate() {
        for d in found {
            let duplicate = detections.iter().any(|e| {
                e.patch_id == d.patch_id
                    && (e.centroid_uv[0] - d.centroid_uv[0])
                        .hypot(e.centroid_uv[1] - d.centroid_uv[1])
                        * 1e3
                        < DEDUP_MM
            });
            if !duplicate {
                detections.push(d);
            }
        }
        out.clouds
            .push((format!("cloud_{k:03}_{}.xyz", cloud.patch_id), cloud));
    }

    let mut anomalies = Vec::new();
    for (i, view) in views.iter().enumerate() {
        let expected = scene
            .patch(&view.frame.patch_id)
            .map_err(|e| CliError::Config(e.to_string()))?
            .base_temperature;
        anomalies.extend(
            detect_thermal_anomalies(&view.frame, expected, DEFAULT_THRESHOLD_C)
                .iter()
                .map(|a| AnomalySummary::new(i, a)),
        );
    }

    score_inspection(
        scene,
        target,
        &plan_standoffs(&plan),
        settings,
        &detections,
        &anomalies,
        &views,
        &mut out.report,
    );
    out.report.detections = detections;
    out.report.thermal_anomalies = anomalies;
    for (i, view) in views.into_iter().enumerate() {
        out.frames.push((
            format!("thermal_{i:03}_{}.csv", view.frame.patch_id),
            view.frame,
        ));
    }
    Ok(())
}

fn plan_standoffs(plan: &crate::inspection::InspectionPlan) -> Vec<f64> {
    plan.viewpoints.iter().map(|v| v.standoff_m).collect()
}

#[allow(clippy::too_many_arguments)]
fn score_inspection(
    scene: &WarehouseScene,
    target: &Oru,
    standoffs: &[f64],
    settings: &HeadSettings,
    detections: &[DetectedDefect],
    anomalies: &[AnomalySummary],
    views: &[ViewResult],
    r: &mut Report,
) {
    let out_of_range = standoffs
        .iter()
        .filter(|s| !(RANGE_M[0]..=RANGE_M[1]).contains(*s))
        .count();
    r.set(
        Requirement::Range,
        out_of_range == 0,
        format!(
            "{} viewpoints, {out_of_range} outside [0.2, 2] m",
            standoffs.len()
        ),
    );
    let lit = settings.illumination_on || settings.ambient_light;
    r.set(
        Requirement::Illumination,
        lit,
        if settings.illumination_on {
            "ring light on for every capture"
        } else if lit {
            "ambient light only"
        } else {
            "captures taken unlit"
        },
    );

    let inspected: BTreeSet<&str> = target
        .patches
        .iter()
        .filter(|p| p.reachable)
        .map(|p| p.id.as_str())
        .collect();
    let near = |d: &DetectedDefect, patch: &str, uv: [f64; 2]| {
        d.patch_id == patch
            && (d.centroid_uv[0] - uv[0]).hypot(d.centroid_uv[1] - uv[1]) * 1e3
                <= DEFAULT_HIT_RADIUS_MM
    };

    let (mut craters, mut crater_hits, mut scratches, mut scratch_hits) = (0, 0, 0, 0);
    let (mut spots, mut spot_hits) = (0, 0);
    for d in scene
        .defects()
        .iter()
        .filter(|d| inspected.contains(d.patch_id.as_str()))
    {
        let found = detections.iter().any(|x| near(x, &d.patch_id, d.uv));
        match d.kind {
            DefectKind::ImpactCrater { diameter_mm, .. } if diameter_mm >= 0.6 => {
                craters += 1;
                crater_hits += usize::from(found);
            }
            DefectKind::Scratch { depth_mm, .. } if depth_mm >= 0.3 => {
                scratches += 1;
                scratch_hits += usize::from(found);
            }
            DefectKind::ThermalHotspot { delta_c, radius_mm }
                if delta_c.abs() > 2.0 * DEFAULT_THRESHOLD_C =>
            {
                let imaged = views.iter().any(|v| {
                    let f = &v.frame;
                    let col = ((d.uv[0] - f.origin_uv[0]) / f.pixel_size_m[0]).floor();
                    let row = ((d.uv[1] - f.origin_uv[1]) / f.pixel_size_m[1]).floor();
                    f.patch_id == d.patch_id
                        && col >= 0.0
                        && row >= 0.0
                        && (col as usize) < f.width
                        && (row as usize) < f.height
                        && f.on_patch(col as usize, row as usize)
                });
                if !imaged {
                    continue;
                }
                spots += 1;
                let class = if delta_c > 0.0 {
                    AnomalyClass::Hot
                } else {
                    AnomalyClass::Cold
                };
                spot_hits += usize::from(anomalies.iter().any(|a| {
                    a.patch_id == d.patch_id
                        && a.classification == class
                        && (a.centroid_uv[0] - d.uv[0]).hypot(a.centroid_uv[1] - d.uv[1]) * 1e3
                            <= radius_mm
                }));
            }
            _ => {}
        }
    }
    if craters > 0 {
        r.set(
            Requirement::Resolution,
            crater_hits == craters,
            format!("{crater_hits}/{craters} craters of 0.6 mm or more found"),
        );
    }
    if scratches > 0 {
        r.set(
            Requirement::Profilometry,
            scratch_hits == scratches,
            format!("{scratch_hits}/{scratches} scratches 0.3 mm deep or more found"),
        );
    }
    if spots > 0 {
        let in_range = views
            .iter()
            .all(|v| v.frame.values.iter().all(|t| (-40.0..=150.0).contains(t)));
        r.set(
            Requirement::Thermal,
            spot_hits == spots && in_range,
            format!("{spot_hits}/{spots} thermal anomalies flagged"),
        );
    }
}

fn walk(
    loaded: &LoadedScenario,
    goal: &str,
    reach_m: f64,
    start: Option<&(String, String)>,
    report: &mut Report,
) -> Result<(), CliError> {
    let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
    let mut assembly = match (start, &loaded.assembly) {
        (Some((l, r)), _) => AssemblyGraph::walking(l, r).map_err(|e| cfg(&e))?,
        (None, Some(a)) => a.clone(),
        (None, None) => return Err(CliError::Config("walk needs start fixtures".into())),
    };
    let graph =
        FixtureGraph::from_scene(&loaded.scene, reach_m, Some(&assembly)).map_err(|e| cfg(&e))?;
    let (Some(left), Some(rear)) = (
        leg_fixture(&assembly, Leg::Left),
        leg_fixture(&assembly, Leg::Rear),
    ) else {
        return Err(CliError::Config("assembly legs are not anchored".into()));
    };
    let plan = graph.plan_walk((&left, &rear), goal).map_err(|e| cfg(&e))?;
    let mim = assembly
        .mims()
        .next()
        .map(|m| m.id.clone())
        .ok_or_else(|| CliError::Config("assembly has no MIM".into()))?;
    let mut anchored = true;
    for step in &plan.steps {
        assembly = execute_step(&assembly, &graph, step).map_err(|e| cfg(&e))?;
        anchored &= assembly.is_grounded(&mim);
    }
    describe_assembly(report, &assembly);
    report.walk = Some(WalkSummary {
        start: (left, rear),
        goal: goal.to_string(),
        steps: plan.to_lines(),
        final_legs: (
            leg_fixture(&assembly, Leg::Left),
            leg_fixture(&assembly, Leg::Rear),
        ),
        anchored_throughout: anchored,
    });
    Ok(())
}

fn maintain(cell: &mut MaintenanceCell, actions: &[MaintenanceAction], r: &mut Report) {
    use MaintenanceAction as A;
    describe_assembly(r, &cell.assembly);
    let (mut handling, mut handling_ok) = (0, 0);
    let (mut grasps, mut grasps_ok) = (0, 0);
    let (mut torques, mut torques_ok) = (0, 0);
    for action in actions {
        let result = cell.apply(action);
        match action {
            A::Retrieve { .. } | A::Stow { .. } | A::SetDown { .. } | A::PickUp { .. } => {
                handling += 1;
                handling_ok += usize::from(result.is_ok());
            }
            A::Grasp { object_dim_cm, .. } => {
                grasps += 1;
                let [lo, hi] = ToolKind::Gripper.envelope();
                let expect = (lo..=hi).contains(object_dim_cm);
                grasps_ok += usize::from(matches!(
                    result,
                    Ok(ActionOutcome::Grasp { outcome }) if (outcome == GraspOutcome::Success) == expect
                ));
            }
            A::ApplyTorque { torque_nm, .. } => {
                torques += 1;
                let [lo, hi] = ToolKind::TorqueWrench.envelope();
                let expect = (lo..=hi).contains(torque_nm);
                torques_ok += usize::from(matches!(
                    result,
                    Ok(ActionOutcome::Torque { outcome }) if matches!(outcome, TorqueOutcome::Success { .. }) == expect
                ));
            }
            A::OpenLid | A::CloseLid => {}
        }
    }
    let conserved = cell.tool_locations().values().all(|l| l.len() == 1);
    if handling > 0 {
        r.set(
            Requirement::Handling,
            handling_ok == handling && conserved,
            format!("{handling_ok}/{handling} tool transfers completed"),
        );
    }
    if grasps > 0 {
        r.set(
            Requirement::Grasping,
            grasps_ok == grasps,
            format!("{grasps_ok}/{grasps} grasps behaved per the 0.5-10 cm envelope"),
        );
    }
    if torques > 0 {
        r.set(
            Requirement::Torque,
            torques_ok == torques,
            format!("{torques_ok}/{torques} torque runs behaved per the 2.7-30 N·m envelope"),
        );
    }
    r.maintenance_log = cell.log.clone();
}

/// Ordered map over `0..n`, in parallel when the feature is on.
fn par_map<T: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T, CliError> + Sync + Send,
) -> Result<Vec<T>, CliError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
