//! Browser bindings: three operations that return JSON for the demo page.

use mim_core::inspection::{
    detect_surface_defects, detect_thermal_anomalies, DetectedDefect, DetectionParams,
    ThermalAnomaly, DEFAULT_THRESHOLD_C,
};
use mim_core::scene::{Defect, DefectKind, Pose, SurfacePatch, WarehouseScene};
use mim_core::sensors::{capture_thermal, scan_profile, SensorHead};
use mim_core::verification::{pod_curve as run_curve, PodSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const AMBIENT_C: f64 = 20.0;

fn coupon(size_m: f64, defects: &[Defect]) -> Result<WarehouseScene, String> {
    let patch = SurfacePatch::new("coupon", Pose::identity(), size_m, size_m);
    let mut scene =
        WarehouseScene::new(vec![], vec![], vec![patch], AMBIENT_C).map_err(|e| e.to_string())?;
    for d in defects {
        scene = scene.add_defect(d).map_err(|e| e.to_string())?;
    }
    Ok(scene)
}

fn facing(scene: &WarehouseScene, standoff_m: f64) -> SensorHead {
    let p = scene.patch("coupon").expect("coupon exists");
    SensorHead::facing(p, p.center_uv(), standoff_m)
}

#[derive(Debug, Serialize)]
pub struct ThermalView {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub min_c: f64,
    pub max_c: f64,
    pub anomalies: Vec<ThermalAnomaly>,
}

/// Thermal frame of a 1 m panel carrying one hot or cold spot at its center.
pub fn thermal_view(
    delta_c: f64,
    radius_mm: f64,
    standoff_m: f64,
    seed: u64,
) -> Result<ThermalView, String> {
    let spot = Defect::new(
        DefectKind::hotspot(delta_c, radius_mm),
        "coupon",
        [0.5, 0.5],
    );
    let scene = coupon(1.0, &[spot])?;
    let frame = capture_thermal(&scene, &facing(&scene, standoff_m), "coupon", seed)
        .map_err(|e| e.to_string())?;
    let anomalies = detect_thermal_anomalies(&frame, AMBIENT_C, DEFAULT_THRESHOLD_C);
    Ok(ThermalView {
        width: frame.width,
        height: frame.height,
        min_c: frame.min(),
        max_c: frame.max(),
        values: frame.values,
        anomalies,
    })
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub size_mm: f64,
    pub k: u64,
    pub n: u64,
    pub pod_lower_bound: f64,
    pub pass: bool,
}

/// Hit/miss campaigns over crater diameters or scratch depths.
pub fn curve(
    scratch: bool,
    sizes_mm: &[f64],
    n_trials: u64,
    standoff_m: f64,
    seed: u64,
) -> Result<Vec<CurvePoint>, String> {
    let scene = coupon(0.05, &[])?;
    let base = if scratch {
        PodSpec::scratch("coupon")
    } else {
        PodSpec::crater("coupon")
    };
    let spec = PodSpec {
        n_trials,
        base_seed: seed,
        ..base
    };
    let points = run_curve(&scene, &facing(&scene, standoff_m), &spec, sizes_mm)
        .map_err(|e| e.to_string())?;
    Ok(points
        .into_iter()
        .map(|(size_mm, r)| CurvePoint {
            size_mm,
            k: r.k,
            n: r.n,
            pod_lower_bound: r.pod_lower_bound,
            pass: r.pass,
        })
        .collect())
}

#[derive(Debug, Serialize)]
pub struct ProfileView {
    pub cols: usize,
    pub rows: usize,
    /// Heights in millimeters, row-major.
    pub heights_mm: Vec<f64>,
    pub detections: Vec<DetectedDefect>,
}

/// Profilometer scan of a 2 cm window with one crater at its center.
pub fn profile_view(
    diameter_mm: f64,
    depth_mm: f64,
    sigma_mm: f64,
    seed: u64,
) -> Result<ProfileView, String> {
    let crater = Defect::new(
        DefectKind::crater(diameter_mm, depth_mm),
        "coupon",
        [0.025, 0.025],
    );
    let scene = coupon(0.05, &[crater])?;
    let mut head = facing(&scene, 1.0);
    head.profilometer.depth_noise_sigma_mm = sigma_mm;
    let cloud = scan_profile(&scene, &head, "coupon", seed).map_err(|e| e.to_string())?;
    let detections =
        detect_surface_defects(&cloud, &DetectionParams::default()).map_err(|e| e.to_string())?;
    Ok(ProfileView {
        cols: cloud.cols,
        rows: cloud.rows,
        heights_mm: cloud.points.iter().map(|p| p[2] * 1e3).collect(),
        detections,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn thermal_frame(
    delta_c: f64,
    radius_mm: f64,
    standoff_m: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(thermal_view(delta_c, radius_mm, standoff_m, seed.into()))
}

/// `kind` is "crater" or "scratch".
#[wasm_bindgen]
pub fn pod_curve(
    kind: &str,
    sizes_mm: Vec<f64>,
    n_trials: u32,
    standoff_m: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(curve(
        kind == "scratch",
        &sizes_mm,
        n_trials.into(),
        standoff_m,
        seed.into(),
    ))
}

#[wasm_bindgen]
pub fn profile_scan(
    diameter_mm: f64,
    depth_mm: f64,
    sigma_mm: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(profile_view(diameter_mm, depth_mm, sigma_mm, seed.into()))
}
