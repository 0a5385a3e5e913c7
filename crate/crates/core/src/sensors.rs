//! Sensor package models: four corner cameras, a structured-light
//! profilometer and a coarse thermal imager, all carried in a tilting
//! enclosure with a ring illuminator.
//!
//! Every capture is a pure function of the scene, the head and an explicit
//! seed. Footprints are modeled as axis-aligned rectangles in patch
//! coordinates, sized for the slant distance along the boresight.

use std::fmt::Write as _;
use std::io;

use nalgebra::{UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::scene::{DefectKind, Pose, SceneError, SurfacePatch, WarehouseScene};

/// Inspection range of the sensor array, meters.
pub const RANGE_M: [f64; 2] = [0.2, 2.0];
pub const TILT_LIMIT_DEG: f64 = 90.0;
const RESOLVE_REL_TOL: f64 = 1e-9;
const RANGE_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("standoff {standoff_m:.3} m is outside [{min_m}, {max_m}] m")]
    OutOfRange {
        standoff_m: f64,
        min_m: f64,
        max_m: f64,
    },
    #[error("patch `{0}` is not in view")]
    NotInView(String),
    #[error("invalid sensor parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("malformed point cloud: {0}")]
    Parse(String),
}

type Result<T> = std::result::Result<T, SensorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CornerMount {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl CornerMount {
    pub const ALL: [CornerMount; 4] = [
        CornerMount::TopLeft,
        CornerMount::TopRight,
        CornerMount::BottomLeft,
        CornerMount::BottomRight,
    ];

    /// Unit offset signs in the enclosure's front-panel plane.
    fn signs(self) -> [f64; 2] {
        match self {
            CornerMount::TopLeft => [-1.0, 1.0],
            CornerMount::TopRight => [1.0, 1.0],
            CornerMount::BottomLeft => [-1.0, -1.0],
            CornerMount::BottomRight => [1.0, -1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal_length_m: f64,
    pub pixel_pitch_m: f64,
    pub resolution_px: [u32; 2],
    pub mount: CornerMount,
    /// Smallest resolvable feature in pixels.
    pub min_feature_px: f64,
}

impl Default for CameraModel {
    /// 8 mm lens on a 1.2 µm sensor: two pixels span 0.6 mm at 2 m.
    fn default() -> Self {
        Self {
            focal_length_m: 8e-3,
            pixel_pitch_m: 1.2e-6,
            resolution_px: [4608, 2592],
            mount: CornerMount::TopLeft,
            min_feature_px: 2.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.focal_length_m > 0.0
            && self.pixel_pitch_m > 0.0
            && self.resolution_px.iter().all(|&r| r > 0)
            && self.min_feature_px > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SensorError::InvalidParameter(
                "camera parameters must be positive".into(),
            ))
        }
    }

    /// Full field of view (horizontal, vertical) in degrees.
    pub fn fov_deg(&self) -> [f64; 2] {
        self.resolution_px.map(|r| {
            (2.0 * (r as f64 * self.pixel_pitch_m / (2.0 * self.focal_length_m)).atan())
                .to_degrees()
        })
    }

    /// Ground sample distance in mm per pixel.
    pub fn gsd_mm(&self, distance_m: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(SensorError::NonPositiveDistance(distance_m));
        }
        Ok(distance_m * self.pixel_pitch_m / self.focal_length_m * 1e3)
    }

    /// Size of the imaged area (m) at a distance.
    pub fn footprint_m(&self, distance_m: f64) -> [f64; 2] {
        self.resolution_px
            .map(|r| distance_m * r as f64 * self.pixel_pitch_m / self.focal_length_m)
    }

    pub fn smallest_feature_mm(&self, distance_m: f64) -> Result<f64> {
        Ok(self.min_feature_px * self.gsd_mm(distance_m)?)
    }

    pub fn resolves(&self, size_mm: f64, distance_m: f64) -> Result<bool> {
        Ok(size_mm >= self.smallest_feature_mm(distance_m)? * (1.0 - RESOLVE_REL_TOL))
    }
}

pub fn gsd(camera: &CameraModel, distance_m: f64) -> Result<f64> {
    camera.gsd_mm(distance_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilometerModel {
    /// Grid spacing on the target surface.
    pub sample_pitch_mm: f64,
    pub depth_noise_sigma_mm: f64,
    /// Scanned window (u, v) centered on the aim point, meters.
    pub scan_area_m: [f64; 2],
    pub working_range_m: [f64; 2],
}

impl Default for ProfilometerModel {
    fn default() -> Self {
        Self {
            sample_pitch_mm: 0.1,
            depth_noise_sigma_mm: 0.02,
            scan_area_m: [0.02, 0.02],
            working_range_m: RANGE_M,
        }
    }
}

impl ProfilometerModel {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.working_range_m;
        if !(self.sample_pitch_mm > 0.0) {
            return Err(SensorError::InvalidParameter(
                "sample pitch must be > 0".into(),
            ));
        }
        if !(self.depth_noise_sigma_mm >= 0.0) {
            return Err(SensorError::InvalidParameter("sigma must be >= 0".into()));
        }
        if !(self.scan_area_m[0] > 0.0 && self.scan_area_m[1] > 0.0) {
            return Err(SensorError::InvalidParameter(
                "scan area must be > 0".into(),
            ));
        }
        if !(RANGE_M[0] <= lo && lo <= hi && hi <= RANGE_M[1]) {
            return Err(SensorError::InvalidParameter(
                "working range must lie within [0.2, 2.0] m".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    /// Noise-equivalent temperature difference, °C.
    pub netd_c: f64,
    pub fov_deg: [f64; 2],
    /// Sub-samples per pixel edge when averaging the footprint.
    pub supersample: usize,
}

impl Default for ThermalModel {
    fn default() -> Self {
        Self {
            netd_c: 0.5,
            fov_deg: [45.0, 35.0],
            supersample: 3,
        }
    }
}

impl ThermalModel {
    pub const RESOLUTION_PX: [usize; 2] = [80, 62];
    pub const RANGE_C: [f64; 2] = [-40.0, 150.0];

    pub fn validate(&self) -> Result<()> {
        if !(self.netd_c >= 0.0)
            || self.supersample == 0
            || !self.fov_deg.iter().all(|f| *f > 0.0 && *f < 180.0)
        {
            return Err(SensorError::InvalidParameter(
                "invalid thermal model".into(),
            ));
        }
        Ok(())
    }

    pub fn footprint_m(&self, distance_m: f64) -> [f64; 2] {
        self.fov_deg
            .map(|f| 2.0 * distance_m * (f.to_radians() / 2.0).tan())
    }
}

/// The tilting sensor enclosure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorHead {
    pub base_pose: Pose,
    #[serde(default)]
    pub tilt_deg: f64,
    #[serde(default = "yes")]
    pub illumination_on: bool,
    /// External lighting bright enough for imaging without the ring light.
    #[serde(default)]
    pub ambient_light: bool,
    /// Front-panel size; cameras sit at its corners.
    #[serde(default = "default_panel")]
    pub panel_size_m: [f64; 2],
    #[serde(default = "default_cameras")]
    pub cameras: [CameraModel; 4],
    #[serde(default)]
    pub profilometer: ProfilometerModel,
    #[serde(default)]
    pub thermal: ThermalModel,
}

fn yes() -> bool {
    true
}

fn default_panel() -> [f64; 2] {
    [0.12, 0.08]
}

fn default_cameras() -> [CameraModel; 4] {
    CornerMount::ALL.map(|mount| CameraModel {
        mount,
        ..CameraModel::default()
    })
}

/// Where the boresight meets a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    /// Slant distance along the boresight, meters.
    pub standoff_m: f64,
    pub aim_uv: [f64; 2],
}

impl SensorHead {
    pub fn new(base_pose: Pose) -> Self {
        Self {
            base_pose,
            tilt_deg: 0.0,
            illumination_on: true,
            ambient_light: false,
            panel_size_m: default_panel(),
            cameras: default_cameras(),
            profilometer: ProfilometerModel::default(),
            thermal: ThermalModel::default(),
        }
    }

    /// Head placed `standoff_m` off the patch at `uv`, looking straight at it.
    pub fn facing(patch: &SurfacePatch, uv: [f64; 2], standoff_m: f64) -> Self {
        Self::new(facing_pose(patch, uv, standoff_m))
    }

    pub fn with_tilt(mut self, tilt_deg: f64) -> Result<Self> {
        if !(tilt_deg.abs() <= TILT_LIMIT_DEG) {
            return Err(SensorError::InvalidParameter(format!(
                "tilt {tilt_deg}° exceeds ±{TILT_LIMIT_DEG}°"
            )));
        }
        self.tilt_deg = tilt_deg;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.base_pose.validate()?;
        if !(self.tilt_deg.abs() <= TILT_LIMIT_DEG) {
            return Err(SensorError::InvalidParameter("tilt out of limits".into()));
        }
        for cam in &self.cameras {
            cam.validate()?;
        }
        self.profilometer.validate()?;
        self.thermal.validate()
    }

    pub fn position(&self) -> Vector3<f64> {
        self.base_pose.translation()
    }

    /// Enclosure orientation after tilting about its x axis.
    pub fn orientation(&self) -> UnitQuaternion<f64> {
        self.base_pose.rotation()
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.tilt_deg.to_radians())
    }

    pub fn boresight(&self) -> Vector3<f64> {
        self.orientation() * Vector3::z()
    }

    pub fn lit(&self) -> bool {
        self.illumination_on || self.ambient_light
    }

    /// Aim point and slant distance on a patch, checked against `range_m`.
    pub fn view(&self, patch: &SurfacePatch, range_m: [f64; 2]) -> Result<View> {
        let not_in_view = || SensorError::NotInView(patch.id.clone());
        let (uv, height) = patch.to_local(&self.position());
        if !(height > 0.0) {
            return Err(not_in_view());
        }
        let dir = patch.frame.rotation().inverse() * self.boresight();
        if !(dir.z < 0.0) {
            return Err(not_in_view());
        }
        let slant = height / -dir.z;
        if slant < range_m[0] - RANGE_EPS || slant > range_m[1] + RANGE_EPS {
            return Err(SensorError::OutOfRange {
                standoff_m: slant,
                min_m: range_m[0],
                max_m: range_m[1],
            });
        }
        Ok(View {
            standoff_m: slant,
            aim_uv: [uv[0] + slant * dir.x, uv[1] + slant * dir.y],
        })
    }

    /// Camera footprint on the patch plane, before clipping to the patch.
    fn camera_rect(&self, patch: &SurfacePatch, view: &View, cam: &CameraModel) -> Rect {
        let [sx, sy] = cam.mount.signs();
        let offset = self.orientation()
            * Vector3::new(
                sx * self.panel_size_m[0] / 2.0,
                sy * self.panel_size_m[1] / 2.0,
                0.0,
            );
        let local = patch.frame.rotation().inverse() * offset;
        Rect::centered(
            [view.aim_uv[0] + local.x, view.aim_uv[1] + local.y],
            cam.footprint_m(view.standoff_m),
        )
    }

    /// Area every camera covers on a patch plane from a view, centered on the aim.
    pub fn planning_footprint_m(&self, standoff_m: f64) -> [f64; 2] {
        self.cameras.iter().fold([f64::INFINITY; 2], |acc, c| {
            let f = c.footprint_m(standoff_m);
            [acc[0].min(f[0]), acc[1].min(f[1])]
        })
    }
}

/// Pose at `standoff_m` along the patch normal above `uv`, boresight toward the patch.
pub fn facing_pose(patch: &SurfacePatch, uv: [f64; 2], standoff_m: f64) -> Pose {
    let position = patch.point_at(uv) + patch.normal() * standoff_m;
    let rotation = patch.frame.rotation()
        * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
    Pose::from_parts(position, rotation)
}

fn patch_rect(patch: &SurfacePatch) -> Rect {
    Rect::new([0.0, 0.0], [patch.extent_u, patch.extent_v])
}

/// Visible size of a defect for the cameras: crater diameter or groove
/// length. A groove narrower than a pixel still shows up as a line.
fn visible_size_mm(kind: &DefectKind) -> Option<f64> {
    match *kind {
        DefectKind::ImpactCrater { diameter_mm, .. } => Some(diameter_mm),
        DefectKind::Scratch { length_mm, .. } => Some(length_mm),
        DefectKind::ThermalHotspot { .. } => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFeature {
    /// Index into the scene's defect list.
    pub defect_index: usize,
    pub size_mm: f64,
    pub apparent_size_px: f64,
    pub resolvable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub patch_id: String,
    pub standoff_m: f64,
    pub gsd_mm: f64,
    pub footprint: Vec<[f64; 2]>,
    pub features: Vec<ImageFeature>,
    pub illumination_used: bool,
    pub ambient_light: bool,
}

impl Image {
    pub fn resolvable_features(&self) -> impl Iterator<Item = &ImageFeature> {
        self.features.iter().filter(|f| f.resolvable)
    }
}

pub fn capture_image(scene: &WarehouseScene, head: &SensorHead, patch_id: &str) -> Result<Image> {
    let patch = scene.patch(patch_id)?;
    let view = head.view(patch, RANGE_M)?;
    let bounds = patch_rect(patch);
    let rects: Vec<(Rect, &CameraModel)> = head
        .cameras
        .iter()
        .filter_map(|c| {
            head.camera_rect(patch, &view, c)
                .intersection(&bounds)
                .map(|r| (r, c))
        })
        .collect();
    let Some(footprint) = rects.iter().map(|(r, _)| *r).reduce(|a, b| a.bounding(&b)) else {
        return Err(SensorError::NotInView(patch_id.to_string()));
    };

    let mut features = Vec::new();
    for (index, defect) in scene.defects_on(patch_id) {
        let Some(size_mm) = visible_size_mm(&defect.kind) else {
            continue;
        };
        let mut seen = false;
        let mut resolvable = false;
        let mut best_px: f64 = 0.0;
        for (_, cam) in rects.iter().filter(|(r, _)| r.contains(defect.uv)) {
            seen = true;
            best_px = best_px.max(size_mm / cam.gsd_mm(view.standoff_m)?);
            resolvable |= head.lit() && cam.resolves(size_mm, view.standoff_m)?;
        }
        if seen {
            features.push(ImageFeature {
                defect_index: index,
                size_mm,
                apparent_size_px: best_px,
                resolvable,
            });
        }
    }

    Ok(Image {
        patch_id: patch_id.to_string(),
        standoff_m: view.standoff_m,
        gsd_mm: head.cameras[0].gsd_mm(view.standoff_m)?,
        footprint: footprint.polygon(),
        features,
        illumination_used: head.illumination_on,
        ambient_light: head.ambient_light,
    })
}

/// Height samples on a regular grid. Points are in the scan frame: x and y
/// along the patch `u` and `v` axes relative to `origin_uv`, z along the
/// patch normal, all in meters. Rows run along `v`, samples within a row
/// along `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub patch_id: String,
    pub seed: u64,
    pub origin_uv: [f64; 2],
    pub pitch_m: f64,
    pub cols: usize,
    pub rows: usize,
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Patch coordinates of a sample.
    pub fn uv_of(&self, point: &[f64; 3]) -> [f64; 2] {
        [self.origin_uv[0] + point[0], self.origin_uv[1] + point[1]]
    }

    /// ASCII XYZ: one `x y z` triple per line, meters, 9 significant digits.
    pub fn to_xyz(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 48);
        for p in &self.points {
            let _ = writeln!(out, "{:.8e} {:.8e} {:.8e}", p[0], p[1], p[2]);
        }
        out
    }

    pub fn write_xyz(&self, mut w: impl io::Write) -> io::Result<()> {
        w.write_all(self.to_xyz().as_bytes())
    }

    /// Parse ASCII XYZ and recover the sample grid from the x/y spacing.
    pub fn from_xyz(text: &str, patch_id: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| SensorError::Parse(format!("line {}: {e}", n + 1)))?;
            let [x, y, z] = vals[..] else {
                return Err(SensorError::Parse(format!(
                    "line {}: expected 3 values",
                    n + 1
                )));
            };
            points.push([x, y, z]);
        }
        let cols = points
            .iter()
            .position(|p| p[1] != points[0][1])
            .unwrap_or(points.len());
        if cols == 0 || points.len() % cols != 0 {
            return Err(SensorError::Parse("points do not form a grid".into()));
        }
        let pitch_m = if cols > 1 {
            points[1][0] - points[0][0]
        } else if points.len() > 1 {
            points[cols][1] - points[0][1]
        } else {
            0.0
        };
        Ok(Self {
            patch_id: patch_id.to_string(),
            seed: 0,
            origin_uv: [0.0, 0.0],
            pitch_m,
            cols,
            rows: points.len() / cols,
            points,
        })
    }
}

/// Profilometer scan of the window around the aim point.
pub fn scan_profile(
    scene: &WarehouseScene,
    head: &SensorHead,
    patch_id: &str,
    seed: u64,
) -> Result<PointCloud> {
    let patch = scene.patch(patch_id)?;
    let prof = &head.profilometer;
    prof.validate()?;
    let view = head.view(patch, prof.working_range_m)?;
    let window = Rect::centered(view.aim_uv, prof.scan_area_m)
        .intersection(&patch_rect(patch))
        .ok_or_else(|| SensorError::NotInView(patch_id.to_string()))?;

    let pitch_m = prof.sample_pitch_mm * 1e-3;
    let cols = (window.width() / pitch_m + 1e-9).floor() as usize + 1;
    let rows = (window.height() / pitch_m + 1e-9).floor() as usize + 1;
    let defects: Vec<(DefectKind, [f64; 2])> = scene
        .defects_on(patch_id)
        .filter(|(_, d)| d.kind.is_geometric())
        .map(|(_, d)| (d.kind, d.uv))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, prof.depth_noise_sigma_mm)
        .map_err(|e| SensorError::InvalidParameter(e.to_string()))?;
    let origin = view.aim_uv;
    let mut points = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let v = window.min[1] + r as f64 * pitch_m;
        for c in 0..cols {
            let u = window.min[0] + c as f64 * pitch_m;
            let height_mm: f64 = defects
                .iter()
                .map(|(kind, at)| kind.displacement_mm((u - at[0]) * 1e3, (v - at[1]) * 1e3))
                .sum();
            let z_mm = height_mm + noise.sample(&mut rng);
            points.push([u - origin[0], v - origin[1], z_mm * 1e-3]);
        }
    }
    Ok(PointCloud {
        patch_id: patch_id.to_string(),
        seed,
        origin_uv: origin,
        pitch_m,
        cols,
        rows,
        points,
    })
}

/// 80×62 grid of temperatures, row-major. Row `r`, column `c` covers the
/// pixel whose lower corner is `origin_uv + (c, r) * pixel_size_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalFrame {
    pub patch_id: String,
    pub width: usize,
    pub height: usize,
    pub origin_uv: [f64; 2],
    pub pixel_size_m: [f64; 2],
    /// Patch size, so pixels that fall off the patch can be told apart.
    pub patch_extent_m: [f64; 2],
    pub values: Vec<f64>,
}

impl ThermalFrame {
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn pixel_center_uv(&self, col: f64, row: f64) -> [f64; 2] {
        [
            self.origin_uv[0] + (col + 0.5) * self.pixel_size_m[0],
            self.origin_uv[1] + (row + 0.5) * self.pixel_size_m[1],
        ]
    }

    /// Whether a pixel's footprint lies entirely on the imaged patch.
    pub fn on_patch(&self, col: usize, row: usize) -> bool {
        let eps = 1e-12;
        let u0 = self.origin_uv[0] + col as f64 * self.pixel_size_m[0];
        let v0 = self.origin_uv[1] + row as f64 * self.pixel_size_m[1];
        u0 >= -eps
            && v0 >= -eps
            && u0 + self.pixel_size_m[0] <= self.patch_extent_m[0] + eps
            && v0 + self.pixel_size_m[1] <= self.patch_extent_m[1] + eps
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV grid of °C, one image row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Thermal capture: mean surface temperature over each pixel footprint plus
/// NETD noise, clamped to the imager range. Samples off the patch see the
/// ambient temperature.
pub fn capture_thermal(
    scene: &WarehouseScene,
    head: &SensorHead,
    patch_id: &str,
    seed: u64,
) -> Result<ThermalFrame> {
    let patch = scene.patch(patch_id)?;
    let model = &head.thermal;
    model.validate()?;
    let view = head.view(patch, RANGE_M)?;
    let fp = model.footprint_m(view.standoff_m);
    let frame_rect = Rect::centered(view.aim_uv, fp);
    if frame_rect.intersection(&patch_rect(patch)).is_none() {
        return Err(SensorError::NotInView(patch_id.to_string()));
    }
    let [width, height] = ThermalModel::RESOLUTION_PX;
    let pixel = [fp[0] / width as f64, fp[1] / height as f64];
    let s = model.supersample;
    let ambient = scene.ambient_temperature();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise =
        Normal::new(0.0, model.netd_c).map_err(|e| SensorError::InvalidParameter(e.to_string()))?;
    let [lo, hi] = ThermalModel::RANGE_C;

    let mut values = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let mut sum = 0.0;
            for i in 0..s {
                for j in 0..s {
                    let uv = [
                        frame_rect.min[0] + (c as f64 + (j as f64 + 0.5) / s as f64) * pixel[0],
                        frame_rect.min[1] + (r as f64 + (i as f64 + 0.5) / s as f64) * pixel[1],
                    ];
                    sum += if patch.contains(uv) {
                        scene.surface_temperature(patch_id, uv)?
                    } else {
                        ambient
                    };
                }
            }
            let mean = sum / (s * s) as f64;
            values.push((mean + noise.sample(&mut rng)).clamp(lo, hi));
        }
    }
    Ok(ThermalFrame {
        patch_id: patch_id.to_string(),
        width,
        height,
        origin_uv: frame_rect.min,
        pixel_size_m: pixel,
        patch_extent_m: [patch.extent_u, patch.extent_v],
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Defect;

    fn coupon(size: f64) -> WarehouseScene {
        let patch = SurfacePatch::new("P", Pose::identity(), size, size);
        WarehouseScene::new(vec![], vec![], vec![patch], 20.0).unwrap()
    }

    fn head_at(scene: &WarehouseScene, standoff: f64) -> SensorHead {
        let patch = scene.patch("P").unwrap();
        SensorHead::facing(patch, patch.center_uv(), standoff)
    }

    #[test]
    fn gsd_examples() {
        let cam = CameraModel::default();
        assert!((gsd(&cam, 2.0).unwrap() - 0.3).abs() < 1e-12);
        assert!((gsd(&cam, 0.2).unwrap() - 0.03).abs() < 1e-12);
        assert!(matches!(
            gsd(&cam, 0.0),
            Err(SensorError::NonPositiveDistance(_))
        ));
        assert!(cam.resolves(0.6, 2.0).unwrap());
    }

    #[test]
    fn facing_head_views_patch_center() {
        let scene = coupon(0.02);
        let head = head_at(&scene, 1.0);
        let view = head.view(scene.patch("P").unwrap(), RANGE_M).unwrap();
        assert!((view.standoff_m - 1.0).abs() < 1e-12);
        assert!((view.aim_uv[0] - 0.01).abs() < 1e-12);
        assert!((view.aim_uv[1] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn tilt_moves_the_aim_point() {
        let patch = SurfacePatch::new("P", Pose::identity(), 4.0, 4.0);
        let scene = WarehouseScene::new(vec![], vec![], vec![patch.clone()], 20.0).unwrap();
        let head = SensorHead::facing(&patch, [2.0, 2.0], 1.0)
            .with_tilt(30.0)
            .unwrap();
        let view = head.view(scene.patch("P").unwrap(), RANGE_M).unwrap();
        assert!((view.standoff_m - 1.0 / 30f64.to_radians().cos()).abs() < 1e-9);
        assert!((view.aim_uv[0] - 2.0).abs() < 1e-9);
        assert!(((view.aim_uv[1] - 2.0).abs() - 30f64.to_radians().tan()).abs() < 1e-9);
        assert!(SensorHead::new(Pose::identity()).with_tilt(91.0).is_err());
    }

    #[test]
    fn image_resolvability_and_illumination() {
        let scene = coupon(0.5)
            .add_defect(&Defect::new(
                DefectKind::crater(0.6, 0.2),
                "P",
                [0.25, 0.25],
            ))
            .unwrap();
        let head = head_at(&scene, 2.0);
        let img = capture_image(&scene, &head, "P").unwrap();
        assert_eq!(img.resolvable_features().count(), 1);

        let mut dark = head.clone();
        dark.illumination_on = false;
        let img = capture_image(&scene, &dark, "P").unwrap();
        assert_eq!(img.features.len(), 1);
        assert_eq!(img.resolvable_features().count(), 0);

        let far = head_at(&scene, 2.5);
        assert!(matches!(
            capture_image(&scene, &far, "P"),
            Err(SensorError::OutOfRange { .. })
        ));
    }

    #[test]
    fn range_edges() {
        let scene = coupon(0.02);
        for d in [0.19, 2.01] {
            let head = head_at(&scene, d);
            assert!(matches!(
                capture_image(&scene, &head, "P"),
                Err(SensorError::OutOfRange { .. })
            ));
            assert!(matches!(
                scan_profile(&scene, &head, "P", 1),
                Err(SensorError::OutOfRange { .. })
            ));
            assert!(matches!(
                capture_thermal(&scene, &head, "P", 1),
                Err(SensorError::OutOfRange { .. })
            ));
        }
        for d in [0.2, 2.0] {
            assert!(capture_image(&scene, &head_at(&scene, d), "P").is_ok());
        }
    }

    #[test]
    fn head_behind_patch_sees_nothing() {
        let scene = coupon(0.02);
        let patch = scene.patch("P").unwrap();
        let head = SensorHead::facing(patch, patch.center_uv(), -1.0);
        assert!(matches!(
            capture_image(&scene, &head, "P"),
            Err(SensorError::NotInView(_))
        ));
    }

    #[test]
    fn scan_of_flat_noiseless_patch_is_zero() {
        let scene = coupon(0.02);
        let mut head = head_at(&scene, 1.0);
        head.profilometer.depth_noise_sigma_mm = 0.0;
        let cloud = scan_profile(&scene, &head, "P", 7).unwrap();
        assert_eq!(cloud.cols * cloud.rows, cloud.len());
        assert_eq!(cloud.cols, 201);
        assert!(cloud.points.iter().all(|p| p[2] == 0.0));
    }

    #[test]
    fn scan_is_seed_deterministic() {
        let scene = coupon(0.02);
        let head = head_at(&scene, 1.0);
        let a = scan_profile(&scene, &head, "P", 11).unwrap();
        let b = scan_profile(&scene, &head, "P", 11).unwrap();
        let c = scan_profile(&scene, &head, "P", 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn crater_minimum_within_three_sigma() {
        let scene = coupon(0.02)
            .add_defect(&Defect::new(
                DefectKind::crater(0.6, 0.2),
                "P",
                [0.01, 0.01],
            ))
            .unwrap();
        let head = head_at(&scene, 1.0);
        let cloud = scan_profile(&scene, &head, "P", 3).unwrap();
        // the grid node nearest the center sits within 0.07 mm of it
        let min_mm = cloud
            .points
            .iter()
            .map(|p| p[2] * 1e3)
            .fold(f64::INFINITY, f64::min);
        assert!((-0.26..=-0.14).contains(&min_mm), "{min_mm}");
    }

    #[test]
    fn xyz_round_trip_keeps_grid() {
        let scene = coupon(0.002);
        let head = head_at(&scene, 1.0);
        let cloud = scan_profile(&scene, &head, "P", 5).unwrap();
        let text = cloud.to_xyz();
        assert_eq!(text.lines().count(), cloud.len());
        let first = text.lines().next().unwrap();
        let mantissa = first
            .split_whitespace()
            .next()
            .unwrap()
            .split('e')
            .next()
            .unwrap();
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 9);
        let back = PointCloud::from_xyz(&text, "P").unwrap();
        assert_eq!((back.cols, back.rows), (cloud.cols, cloud.rows));
        for (a, b) in back.points.iter().zip(&cloud.points) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-8 * b[k].abs().max(1e-12));
            }
        }
    }

    #[test]
    fn thermal_uniform_and_clamped() {
        let patch = SurfacePatch::new("P", Pose::identity(), 2.0, 2.0);
        let scene = WarehouseScene::new(vec![], vec![], vec![patch], 20.0).unwrap();
        let mut head = head_at(&scene, 0.5);
        head.thermal.netd_c = 0.0;
        let frame = capture_thermal(&scene, &head, "P", 1).unwrap();
        assert_eq!(frame.values.len(), 80 * 62);
        assert!(frame.values.iter().all(|&v| v == 20.0));

        let hot = scene
            .add_defect(&Defect::new(
                DefectKind::hotspot(180.0, 800.0),
                "P",
                [1.0, 1.0],
            ))
            .unwrap();
        let frame = capture_thermal(&hot, &head, "P", 1).unwrap();
        assert_eq!(frame.max(), 150.0);
        assert!(frame.values.iter().all(|v| (-40.0..=150.0).contains(v)));
    }

    #[test]
    fn thermal_csv_shape() {
        let scene = coupon(0.5);
        let frame = capture_thermal(&scene, &head_at(&scene, 0.3), "P", 2).unwrap();
        let csv = frame.to_csv();
        assert_eq!(csv.lines().count(), 62);
        assert!(csv.lines().all(|l| l.split(',').count() == 80));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn gsd_is_linear(d in 0.01..100.0f64) {
                let cam = CameraModel::default();
                prop_assert_eq!(cam.gsd_mm(2.0 * d).unwrap(), 2.0 * cam.gsd_mm(d).unwrap());
            }

            #[test]
            fn resolvability_is_monotone(
                size in 0.01..2.0f64,
                bigger in 0.0..2.0f64,
                d in 0.2..2.0f64,
                closer in 0.0..1.0f64,
            ) {
                let cam = CameraModel::default();
                prop_assume!(cam.resolves(size, d).unwrap());
                let d2 = RANGE_M[0].max(d * (1.0 - closer));
                prop_assert!(cam.resolves(size + bigger, d2).unwrap());
            }

            #[test]
            fn noiseless_scan_matches_surface_height(
                cu in 0.003..0.007f64,
                cv in 0.003..0.007f64,
                dia in 0.2..2.0f64,
                depth in 0.05..0.5f64,
            ) {
                let scene = coupon(0.01)
                    .add_defect(&Defect::new(DefectKind::crater(dia, depth), "P", [cu, cv]))
                    .unwrap()
                    .add_defect(&Defect::new(DefectKind::scratch(0.3, 0.3, 3.0), "P", [0.005, 0.002]))
                    .unwrap();
                let mut head = head_at(&scene, 0.5);
                head.profilometer.depth_noise_sigma_mm = 0.0;
                head.profilometer.sample_pitch_mm = 0.25;
                let cloud = scan_profile(&scene, &head, "P", 0).unwrap();
                for p in &cloud.points {
                    let uv = cloud.uv_of(p);
                    let uv = [uv[0].clamp(0.0, 0.01), uv[1].clamp(0.0, 0.01)];
                    let truth = scene.surface_height("P", uv).unwrap();
                    prop_assert!((p[2] * 1e3 - truth).abs() <= 1e-12, "{} vs {}", p[2] * 1e3, truth);
                }
            }

            #[test]
            fn thermal_values_stay_in_range(delta in -500.0..500.0f64, radius in 1.0..2000.0f64, seed in 0u64..1000) {
                prop_assume!(delta != 0.0);
                let patch = SurfacePatch::new("P", Pose::identity(), 1.0, 1.0).with_temperature(20.0);
                let scene = WarehouseScene::new(vec![], vec![], vec![patch], -300.0)
                    .unwrap()
                    .add_defect(&Defect::new(DefectKind::hotspot(delta, radius), "P", [0.5, 0.5]))
                    .unwrap();
                let mut head = head_at(&scene, 1.0);
                head.thermal.supersample = 1;
                let frame = capture_thermal(&scene, &head, "P", seed).unwrap();
                prop_assert!(frame.values.iter().all(|v| (-40.0..=150.0).contains(v)));
            }
        }
    }
}
