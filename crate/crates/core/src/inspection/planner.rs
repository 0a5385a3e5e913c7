//! Greedy set-cover viewpoint planning over ORU surface patches.

use serde::{Deserialize, Serialize};

use super::{InspectionError, Result};
use crate::geometry::{union_area, Rect};
use crate::scene::{Oru, Pose, SurfacePatch, WarehouseScene};
use crate::sensors::{facing_pose, SensorHead, RANGE_M};

/// Patch coverage at or above this fraction counts as complete.
const COMPLETE: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Candidate standoffs, meters. Values outside the range are skipped.
    pub standoffs_m: Vec<f64>,
    pub standoff_range_m: [f64; 2],
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            standoffs_m: vec![2.0, 1.0, 0.5],
            standoff_range_m: RANGE_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveredPatch {
    pub patch_id: String,
    pub footprint: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub pose: Pose,
    pub standoff_m: f64,
    /// Aim point on the first covered patch.
    pub aim_uv: [f64; 2],
    pub covers: Vec<CoveredPatch>,
}

impl Viewpoint {
    pub fn target_patch(&self) -> &str {
        &self.covers[0].patch_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionPlan {
    pub oru_id: String,
    pub viewpoints: Vec<Viewpoint>,
    pub coverage_fraction: f64,
    pub unreachable_patches: Vec<String>,
}

struct Candidate {
    patch: usize,
    standoff_m: f64,
    aim_uv: [f64; 2],
    rect: Rect,
}

fn patch_bounds(p: &SurfacePatch) -> Rect {
    Rect::new([0.0, 0.0], [p.extent_u, p.extent_v])
}

/// Tile-aligned candidates on one patch at one standoff.
fn tile_candidates(
    patch_index: usize,
    patch: &SurfacePatch,
    standoff_m: f64,
    size: [f64; 2],
) -> Vec<Candidate> {
    let n = [
        (patch.extent_u / size[0] - 1e-9).ceil().max(1.0) as usize,
        (patch.extent_v / size[1] - 1e-9).ceil().max(1.0) as usize,
    ];
    let bounds = patch_bounds(patch);
    let mut out = Vec::with_capacity(n[0] * n[1]);
    for j in 0..n[1] {
        for i in 0..n[0] {
            // the last tile in each direction is pulled back inside the patch
            let cu = ((i as f64 + 0.5) * size[0])
                .min(patch.extent_u - size[0] / 2.0)
                .max(size[0].min(patch.extent_u) / 2.0);
            let cv = ((j as f64 + 0.5) * size[1])
                .min(patch.extent_v - size[1] / 2.0)
                .max(size[1].min(patch.extent_v) / 2.0);
            let aim = [cu, cv];
            if let Some(rect) = Rect::centered(aim, size).intersection(&bounds) {
                out.push(Candidate {
                    patch: patch_index,
                    standoff_m,
                    aim_uv: aim,
                    rect,
                });
            }
        }
    }
    out
}

fn covered_area(rects: &[Rect]) -> f64 {
    union_area(rects)
}

/// Area of `rect` not already in `covered`.
fn gain(rect: &Rect, covered: &[Rect]) -> f64 {
    let clipped: Vec<Rect> = covered
        .iter()
        .filter_map(|c| c.intersection(rect))
        .collect();
    rect.area() - union_area(&clipped)
}

fn effective_standoffs(config: &PlannerConfig) -> Result<Vec<f64>> {
    let lo = config.standoff_range_m[0].max(RANGE_M[0]);
    let hi = config.standoff_range_m[1].min(RANGE_M[1]);
    let s: Vec<f64> = config
        .standoffs_m
        .iter()
        .copied()
        .filter(|s| s.is_finite() && *s >= lo && *s <= hi)
        .collect();
    if s.is_empty() {
        return Err(InspectionError::InvalidConfig(format!(
            "no candidate standoff inside [{lo}, {hi}] m"
        )));
    }
    Ok(s)
}

/// Plan viewpoints covering every reachable external patch of an ORU.
pub fn plan_viewpoints(
    scene: &WarehouseScene,
    oru_id: &str,
    head: &SensorHead,
    config: &PlannerConfig,
) -> Result<InspectionPlan> {
    let oru = scene.oru(oru_id)?;
    plan_for_oru(oru, head, config)
}

pub fn plan_for_oru(
    oru: &Oru,
    head: &SensorHead,
    config: &PlannerConfig,
) -> Result<InspectionPlan> {
    let reachable: Vec<&SurfacePatch> = oru.patches.iter().filter(|p| p.reachable).collect();
    if reachable.is_empty() {
        return Err(InspectionError::NoReachableSurface(oru.id.clone()));
    }
    let standoffs = effective_standoffs(config)?;

    let mut candidates = Vec::new();
    for (pi, patch) in reachable.iter().enumerate() {
        for &s in &standoffs {
            let size = head.planning_footprint_m(s);
            candidates.extend(tile_candidates(pi, patch, s, size));
        }
    }

    let mut covered: Vec<Vec<Rect>> = vec![Vec::new(); reachable.len()];
    let mut done: Vec<bool> = vec![false; reachable.len()];
    let mut viewpoints = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (ci, c) in candidates.iter().enumerate() {
            if done[c.patch] {
                continue;
            }
            let g = gain(&c.rect, &covered[c.patch]);
            if g > best.map_or(0.0, |b| b.1) {
                best = Some((ci, g));
            }
        }
        let Some((ci, g)) = best else { break };
        let patch = reachable[candidates[ci].patch];
        if g <= patch.area() * 1e-12 {
            break;
        }
        let c = &candidates[ci];
        covered[c.patch].push(c.rect);
        if covered_area(&covered[c.patch]) >= COMPLETE * patch.area() {
            done[c.patch] = true;
        }
        viewpoints.push(Viewpoint {
            pose: facing_pose(patch, c.aim_uv, c.standoff_m),
            standoff_m: c.standoff_m,
            aim_uv: c.aim_uv,
            covers: vec![CoveredPatch {
                patch_id: patch.id.clone(),
                footprint: c.rect.polygon(),
            }],
        });
        if done.iter().all(|d| *d) {
            break;
        }
    }

    let mut plan = InspectionPlan {
        oru_id: oru.id.clone(),
        viewpoints,
        coverage_fraction: 0.0,
        unreachable_patches: oru
            .patches
            .iter()
            .filter(|p| !p.reachable)
            .map(|p| p.id.clone())
            .collect(),
    };
    plan.coverage_fraction = coverage(&plan, oru);
    Ok(plan)
}

/// Fraction of the ORU's reachable area inside the plan's footprints.
/// A patch covered to within 1e-12 of its area counts as fully covered.
pub fn coverage(plan: &InspectionPlan, oru: &Oru) -> f64 {
    let total = oru.reachable_area();
    if !(total > 0.0) {
        return 0.0;
    }
    let mut covered = 0.0;
    for patch in oru.patches.iter().filter(|p| p.reachable) {
        let bounds = patch_bounds(patch);
        let rects: Vec<Rect> = plan
            .viewpoints
            .iter()
            .flat_map(|v| &v.covers)
            .filter(|c| c.patch_id == patch.id)
            .filter_map(|c| Rect::from_polygon(&c.footprint))
            .filter_map(|r| r.intersection(&bounds))
            .collect();
        let area = union_area(&rects);
        covered += if area >= COMPLETE * patch.area() {
            patch.area()
        } else {
            area
        };
    }
    if covered >= COMPLETE * total {
        1.0
    } else {
        (covered / total).clamp(0.0, 1.0)
    }
}
