//! Ground-truth model of the warehouse: fixture points, ORU surfaces, and the
//! defects injected on them.
//!
//! Patches are planar rectangles. A patch frame places its origin at one
//! corner, with local x along `u`, local y along `v` and local z as the
//! outward normal. Patch coordinates (`uv`) are in meters; defect sizes and
//! surface heights are in millimeters.

use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interconnect::AssemblyGraph;

const UV_EPS: f64 = 1e-12;
const QUAT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unknown patch `{0}`")]
    UnknownPatch(String),
    #[error("uv ({u}, {v}) is outside patch `{patch}`")]
    OutOfBounds { patch: String, u: f64, v: f64 },
    #[error("invalid defect: {0}")]
    InvalidDefect(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid patch `{0}`: {1}")]
    InvalidPatch(String, String),
    #[error("ORU `{0}` has no surface patches")]
    EmptyOru(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown ORU `{0}`")]
    UnknownOru(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("scene parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Rigid placement: position in meters, orientation as a unit quaternion
/// stored `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            position: [0.0; 3],
            orientation: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn new(position: [f64; 3], orientation: [f64; 4]) -> Result<Self, SceneError> {
        let pose = Self {
            position,
            orientation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn from_parts(position: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        let q = rotation.quaternion();
        Self {
            position: [position.x, position.y, position.z],
            orientation: [q.w, q.i, q.j, q.k],
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.position.iter().any(|c| !c.is_finite()) {
            return Err(SceneError::InvalidPose("non-finite position".into()));
        }
        let norm = self.orientation.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= QUAT_NORM_TOL) {
            return Err(SceneError::InvalidPose(format!(
                "quaternion norm {norm} is not 1"
            )));
        }
        Ok(())
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.orientation;
        UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z))
    }

    pub fn transform_point(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.translation() + self.rotation() * local
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationClass {
    Internal,
    External,
}

/// A designated structural attachment point a walking manipulator can latch onto.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixturePoint {
    pub id: String,
    pub pose: Pose,
    pub location_class: LocationClass,
    /// Port of some other equipment already latched here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePatch {
    pub id: String,
    pub frame: Pose,
    pub extent_u: f64,
    pub extent_v: f64,
    #[serde(default = "default_emissivity")]
    pub emissivity: f64,
    pub base_temperature: f64,
    #[serde(default = "default_true")]
    pub reachable: bool,
}

fn default_emissivity() -> f64 {
    0.9
}

fn default_true() -> bool {
    true
}

impl SurfacePatch {
    pub fn new(id: impl Into<String>, frame: Pose, extent_u: f64, extent_v: f64) -> Self {
        Self {
            id: id.into(),
            frame,
            extent_u,
            extent_v,
            emissivity: default_emissivity(),
            base_temperature: 20.0,
            reachable: true,
        }
    }

    pub fn with_temperature(mut self, base_temperature: f64) -> Self {
        self.base_temperature = base_temperature;
        self
    }

    pub fn with_reachable(mut self, reachable: bool) -> Self {
        self.reachable = reachable;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.frame.validate()?;
        let bad = |msg: &str| Err(SceneError::InvalidPatch(self.id.clone(), msg.into()));
        if !(self.extent_u > 0.0 && self.extent_v > 0.0) {
            return bad("extents must be positive");
        }
        if !(0.0..=1.0).contains(&self.emissivity) {
            return bad("emissivity must lie in [0, 1]");
        }
        if !self.base_temperature.is_finite() {
            return bad("base temperature must be finite");
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.extent_u * self.extent_v
    }

    pub fn contains(&self, uv: [f64; 2]) -> bool {
        uv[0] >= -UV_EPS
            && uv[0] <= self.extent_u + UV_EPS
            && uv[1] >= -UV_EPS
            && uv[1] <= self.extent_v + UV_EPS
    }

    pub fn center_uv(&self) -> [f64; 2] {
        [self.extent_u / 2.0, self.extent_v / 2.0]
    }

    /// World position of a point on the nominal plane.
    pub fn point_at(&self, uv: [f64; 2]) -> Vector3<f64> {
        self.frame.transform_point(&Vector3::new(uv[0], uv[1], 0.0))
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.frame.rotation() * Vector3::z()
    }

    /// Express a world point in patch coordinates: `(uv, height above plane)`.
    pub fn to_local(&self, world: &Vector3<f64>) -> ([f64; 2], f64) {
        let local = self
            .frame
            .rotation()
            .inverse_transform_point(&Point3::from(world - self.frame.translation()));
        ([local.x, local.y], local.z)
    }

    fn check_uv(&self, uv: [f64; 2]) -> Result<(), SceneError> {
        if uv.iter().all(|c| c.is_finite()) && self.contains(uv) {
            Ok(())
        } else {
            Err(SceneError::OutOfBounds {
                patch: self.id.clone(),
                u: uv[0],
                v: uv[1],
            })
        }
    }
}

/// Defect geometry. Sizes are millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DefectKind {
    /// Straight groove with a parabolic cross-section, centered on the
    /// defect location. `heading_deg` is measured from the patch `u` axis.
    Scratch {
        depth_mm: f64,
        width_mm: f64,
        length_mm: f64,
        #[serde(default)]
        heading_deg: f64,
    },
    /// Paraboloid pit: `h(r) = -depth * (1 - (r/R)^2)` for `r < R`.
    ImpactCrater { diameter_mm: f64, depth_mm: f64 },
    /// Temperature offset falling linearly to zero at `radius_mm`.
    ThermalHotspot { delta_c: f64, radius_mm: f64 },
}

impl DefectKind {
    pub fn crater(diameter_mm: f64, depth_mm: f64) -> Self {
        Self::ImpactCrater {
            diameter_mm,
            depth_mm,
        }
    }

    pub fn scratch(depth_mm: f64, width_mm: f64, length_mm: f64) -> Self {
        Self::Scratch {
            depth_mm,
            width_mm,
            length_mm,
            heading_deg: 0.0,
        }
    }

    pub fn hotspot(delta_c: f64, radius_mm: f64) -> Self {
        Self::ThermalHotspot { delta_c, radius_mm }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(SceneError::InvalidDefect(format!("{name} must be > 0")))
            }
        };
        match *self {
            Self::Scratch {
                depth_mm,
                width_mm,
                length_mm,
                heading_deg,
            } => {
                positive("depth_mm", depth_mm)?;
                positive("width_mm", width_mm)?;
                positive("length_mm", length_mm)?;
                if !heading_deg.is_finite() {
                    return Err(SceneError::InvalidDefect("heading must be finite".into()));
                }
                Ok(())
            }
            Self::ImpactCrater {
                diameter_mm,
                depth_mm,
            } => {
                positive("diameter_mm", diameter_mm)?;
                positive("depth_mm", depth_mm)
            }
            Self::ThermalHotspot { delta_c, radius_mm } => {
                positive("radius_mm", radius_mm)?;
                if delta_c == 0.0 || !delta_c.is_finite() {
                    return Err(SceneError::InvalidDefect("delta_c must be nonzero".into()));
                }
                Ok(())
            }
        }
    }

    /// Radius of the smallest disc around the defect center that contains it.
    pub fn bounding_radius_mm(&self) -> f64 {
        match *self {
            Self::Scratch {
                width_mm,
                length_mm,
                ..
            } => 0.5 * width_mm.hypot(length_mm),
            Self::ImpactCrater { diameter_mm, .. } => diameter_mm / 2.0,
            Self::ThermalHotspot { radius_mm, .. } => radius_mm,
        }
    }

    /// Height displacement at an offset (mm) from the defect center.
    pub fn displacement_mm(&self, du_mm: f64, dv_mm: f64) -> f64 {
        match *self {
            Self::ImpactCrater {
                diameter_mm,
                depth_mm,
            } => {
                let radius = diameter_mm / 2.0;
                let r2 = du_mm * du_mm + dv_mm * dv_mm;
                if r2 < radius * radius {
                    -depth_mm * (1.0 - r2 / (radius * radius))
                } else {
                    0.0
                }
            }
            Self::Scratch {
                depth_mm,
                width_mm,
                length_mm,
                heading_deg,
            } => {
                let (sin, cos) = heading_deg.to_radians().sin_cos();
                let along = du_mm * cos + dv_mm * sin;
                let across = -du_mm * sin + dv_mm * cos;
                let half_w = width_mm / 2.0;
                if along.abs() <= length_mm / 2.0 && across.abs() < half_w {
                    let t = across / half_w;
                    -depth_mm * (1.0 - t * t)
                } else {
                    0.0
                }
            }
            Self::ThermalHotspot { .. } => 0.0,
        }
    }

    /// Temperature offset (°C) at an offset (mm) from the defect center.
    pub fn temperature_delta_c(&self, du_mm: f64, dv_mm: f64) -> f64 {
        match *self {
            Self::ThermalHotspot { delta_c, radius_mm } => {
                let r = du_mm.hypot(dv_mm);
                if r < radius_mm {
                    delta_c * (1.0 - r / radius_mm)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }

    pub fn is_geometric(&self) -> bool {
        !matches!(self, Self::ThermalHotspot { .. })
    }
}

/// A defect injected on a patch, located in patch coordinates (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub kind: DefectKind,
    pub patch_id: String,
    pub uv: [f64; 2],
}

impl Defect {
    pub fn new(kind: DefectKind, patch_id: impl Into<String>, uv: [f64; 2]) -> Self {
        Self {
            kind,
            patch_id: patch_id.into(),
            uv,
        }
    }
}

/// Orbital Replacement Unit: a box-like module with inspectable faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oru {
    pub id: String,
    pub patches: Vec<SurfacePatch>,
    pub bounding_box: [f64; 3],
    pub pose: Pose,
}

impl Oru {
    pub fn new(
        id: impl Into<String>,
        patches: Vec<SurfacePatch>,
        bounding_box: [f64; 3],
        pose: Pose,
    ) -> Result<Self, SceneError> {
        let oru = Self {
            id: id.into(),
            patches,
            bounding_box,
            pose,
        };
        oru.validate()?;
        Ok(oru)
    }

    /// Rectangular box with one outward-facing patch per face. Patch ids are
    /// `<id>.+x`, `<id>.-x`, `<id>.+y`, `<id>.-y`, `<id>.+z`, `<id>.-z`.
    pub fn boxed(id: impl Into<String>, pose: Pose, size: [f64; 3]) -> Result<Self, SceneError> {
        let id = id.into();
        let [sx, sy, sz] = size;
        let (hx, hy, hz) = (sx / 2.0, sy / 2.0, sz / 2.0);
        let base_rot = pose.rotation();
        let base_pos = pose.translation();
        // (suffix, outward normal, u axis, extent_u, extent_v, offset along normal)
        type Face = (&'static str, Vector3<f64>, Vector3<f64>, f64, f64, f64);
        let faces: [Face; 6] = [
            ("+x", Vector3::x(), Vector3::y(), sy, sz, hx),
            ("-x", -Vector3::x(), -Vector3::y(), sy, sz, hx),
            ("+y", Vector3::y(), -Vector3::x(), sx, sz, hy),
            ("-y", -Vector3::y(), Vector3::x(), sx, sz, hy),
            ("+z", Vector3::z(), Vector3::x(), sx, sy, hz),
            ("-z", -Vector3::z(), -Vector3::x(), sx, sy, hz),
        ];
        let patches = faces
            .iter()
            .map(|&(suffix, normal, u_axis, eu, ev, offset)| {
                let v_axis = normal.cross(&u_axis);
                let rot = nalgebra::Rotation3::from_basis_unchecked(&[u_axis, v_axis, normal]);
                let local_rot = UnitQuaternion::from_rotation_matrix(&rot);
                let corner = normal * offset - u_axis * (eu / 2.0) - v_axis * (ev / 2.0);
                let frame = Pose::from_parts(base_pos + base_rot * corner, base_rot * local_rot);
                SurfacePatch::new(format!("{id}.{suffix}"), frame, eu, ev)
            })
            .collect();
        Self::new(id, patches, size, pose)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.patches.is_empty() {
            return Err(SceneError::EmptyOru(self.id.clone()));
        }
        self.pose.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for patch in &self.patches {
            patch.validate()?;
            if !seen.insert(patch.id.as_str()) {
                return Err(SceneError::DuplicateId(patch.id.clone()));
            }
        }
        Ok(())
    }

    /// Total area of the external patches, m².
    pub fn external_area(&self) -> f64 {
        self.patches.iter().map(SurfacePatch::area).sum()
    }

    pub fn reachable_area(&self) -> f64 {
        self.patches
            .iter()
            .filter(|p| p.reachable)
            .map(SurfacePatch::area)
            .sum()
    }
}

pub fn external_area(oru: &Oru) -> f64 {
    oru.external_area()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SceneRepr", try_from = "SceneRepr")]
pub struct WarehouseScene {
    fixtures: Vec<FixturePoint>,
    orus: Vec<Oru>,
    structure_patches: Vec<SurfacePatch>,
    defects: Vec<Defect>,
    ambient_temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SceneRepr {
    #[serde(default)]
    fixtures: Vec<FixturePoint>,
    #[serde(default)]
    orus: Vec<Oru>,
    #[serde(default)]
    structure_patches: Vec<SurfacePatch>,
    #[serde(default)]
    defects: Vec<Defect>,
    ambient_temperature: f64,
}

impl From<WarehouseScene> for SceneRepr {
    fn from(scene: WarehouseScene) -> Self {
        Self {
            fixtures: scene.fixtures,
            orus: scene.orus,
            structure_patches: scene.structure_patches,
            defects: scene.defects,
            ambient_temperature: scene.ambient_temperature,
        }
    }
}

impl TryFrom<SceneRepr> for WarehouseScene {
    type Error = SceneError;

    fn try_from(repr: SceneRepr) -> Result<Self, SceneError> {
        let mut scene = WarehouseScene::new(
            repr.fixtures,
            repr.orus,
            repr.structure_patches,
            repr.ambient_temperature,
        )?;
        for defect in repr.defects {
            scene = scene.add_defect(&defect)?;
        }
        Ok(scene)
    }
}

impl WarehouseScene {
    pub fn new(
        fixtures: Vec<FixturePoint>,
        orus: Vec<Oru>,
        structure_patches: Vec<SurfacePatch>,
        ambient_temperature: f64,
    ) -> Result<Self, SceneError> {
        let scene = Self {
            fixtures,
            orus,
            structure_patches,
            defects: Vec::new(),
            ambient_temperature,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn empty(ambient_temperature: f64) -> Self {
        Self {
            fixtures: Vec::new(),
            orus: Vec::new(),
            structure_patches: Vec::new(),
            defects: Vec::new(),
            ambient_temperature,
        }
    }

    fn validate(&self) -> Result<(), SceneError> {
        if !self.ambient_temperature.is_finite() {
            return Err(SceneError::InvalidPatch(
                "<ambient>".into(),
                "ambient temperature must be finite".into(),
            ));
        }
        let mut fixture_ids = std::collections::BTreeSet::new();
        for fixture in &self.fixtures {
            fixture.pose.validate()?;
            if !fixture_ids.insert(fixture.id.as_str()) {
                return Err(SceneError::DuplicateId(fixture.id.clone()));
            }
        }
        let mut oru_ids = std::collections::BTreeSet::new();
        for oru in &self.orus {
            oru.validate()?;
            if !oru_ids.insert(oru.id.as_str()) {
                return Err(SceneError::DuplicateId(oru.id.clone()));
            }
        }
        let mut patch_ids = std::collections::BTreeSet::new();
        for patch in self.patches() {
            patch.validate()?;
            if !patch_ids.insert(patch.id.as_str()) {
                return Err(SceneError::DuplicateId(patch.id.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn fixtures(&self) -> &[FixturePoint] {
        &self.fixtures
    }

    pub fn fixture(&self, id: &str) -> Result<&FixturePoint, SceneError> {
        self.fixtures
            .iter()
            .find(|f| f.id == id)
            .ok_or_else(|| SceneError::UnknownFixture(id.to_string()))
    }

    pub fn orus(&self) -> &[Oru] {
        &self.orus
    }

    pub fn oru(&self, id: &str) -> Result<&Oru, SceneError> {
        self.orus
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| SceneError::UnknownOru(id.to_string()))
    }

    pub fn structure_patches(&self) -> &[SurfacePatch] {
        &self.structure_patches
    }

    pub fn ambient_temperature(&self) -> f64 {
        self.ambient_temperature
    }

    /// All patches: ORU faces first (in ORU order), then structure patches.
    pub fn patches(&self) -> impl Iterator<Item = &SurfacePatch> {
        self.orus
            .iter()
            .flat_map(|o| o.patches.iter())
            .chain(self.structure_patches.iter())
    }

    pub fn patch(&self, id: &str) -> Result<&SurfacePatch, SceneError> {
        self.patches()
            .find(|p| p.id == id)
            .ok_or_else(|| SceneError::UnknownPatch(id.to_string()))
    }

    pub fn defects(&self) -> &[Defect] {
        &self.defects
    }

    /// Defects on a patch together with their index in the scene's defect list.
    pub fn defects_on<'a>(
        &'a self,
        patch_id: &'a str,
    ) -> impl Iterator<Item = (usize, &'a Defect)> + 'a {
        self.defects
            .iter()
            .enumerate()
            .filter(move |(_, d)| d.patch_id == patch_id)
    }

    /// Returns a copy of the scene with `defect` appended.
    pub fn add_defect(&self, defect: &Defect) -> Result<Self, SceneError> {
        let patch = self.patch(&defect.patch_id)?;
        defect.kind.validate()?;
        patch.check_uv(defect.uv)?;
        let mut next = self.clone();
        next.defects.push(defect.clone());
        Ok(next)
    }

    /// Signed height (mm) of the surface relative to the nominal plane.
    pub fn surface_height(&self, patch_id: &str, uv: [f64; 2]) -> Result<f64, SceneError> {
        self.patch(patch_id)?.check_uv(uv)?;
        Ok(self
            .defects_on(patch_id)
            .map(|(_, d)| {
                d.kind
                    .displacement_mm((uv[0] - d.uv[0]) * 1e3, (uv[1] - d.uv[1]) * 1e3)
            })
            .sum())
    }

    /// Surface temperature (°C) at a patch point.
    pub fn surface_temperature(&self, patch_id: &str, uv: [f64; 2]) -> Result<f64, SceneError> {
        let patch = self.patch(patch_id)?;
        let delta: f64 = self
            .defects_on(patch_id)
            .map(|(_, d)| {
                d.kind
                    .temperature_delta_c((uv[0] - d.uv[0]) * 1e3, (uv[1] - d.uv[1]) * 1e3)
            })
            .sum();
        Ok(patch.base_temperature + delta)
    }
}

/// Contents of a scene configuration file: the scene plus an optional
/// robot assembly under the `assembly` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    #[serde(flatten)]
    pub scene: WarehouseScene,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembly: Option<AssemblyGraph>,
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(text)?)
    }
}
