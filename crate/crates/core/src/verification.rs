//! Probability-of-detection campaigns and exact binomial confidence bounds.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::inspection::{detect_surface_defects, DefectClass, DetectionParams, InspectionError};
use crate::scene::{Defect, DefectKind, SceneError, WarehouseScene};
use crate::sensors::{scan_profile, SensorError, SensorHead};

pub const DEFAULT_TARGET_POD: f64 = 0.90;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_HIT_RADIUS_MM: f64 = 2.0;
const BISECTION_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum VerificationError {
    #[error("invalid arguments: {0}")]
    InvalidArguments(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Inspection(#[from] InspectionError),
}

type Result<T> = std::result::Result<T, VerificationError>;

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// P[Binomial(n, p) ≥ k], summed in the log domain.
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let lf = ln_factorials(n);
    binomial_upper_tail_with(&lf, k, n, p)
}

fn binomial_upper_tail_with(lf: &[f64], k: u64, n: u64, p: f64) -> f64 {
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let terms: Vec<f64> = (k..=n)
        .map(|j| {
            let (j_, n_) = (j as usize, n as usize);
            lf[n_] - lf[j_] - lf[n_ - j_] + j as f64 * lp + (n - j) as f64 * lq
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

/// Exact one-sided lower confidence bound on a success probability after
/// `k` successes in `n` trials: the `p` at which P[Binomial(n, p) ≥ k] = alpha.
pub fn clopper_pearson_lower(k: u64, n: u64, alpha: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(VerificationError::InvalidArguments(format!(
            "need 0 ≤ k ≤ n and n ≥ 1, got k = {k}, n = {n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(VerificationError::InvalidArguments(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if k == n {
        return Ok(alpha.powf(1.0 / n as f64));
    }
    let lf = ln_factorials(n);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if binomial_upper_tail_with(&lf, k, n, mid) <= alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smallest number of all-success trials demonstrating `target_pod` at
/// `confidence`.
pub fn min_trials_zero_failure(target_pod: f64, confidence: f64) -> Result<u64> {
    if !(target_pod > 0.0 && target_pod < 1.0 && confidence > 0.0 && confidence < 1.0) {
        return Err(VerificationError::InvalidArguments(format!(
            "target_pod and confidence must be in (0, 1), got {target_pod}, {confidence}"
        )));
    }
    let alpha = 1.0 - confidence;
    let passes = |n: u64| alpha.powf(1.0 / n as f64) >= target_pod;
    let mut n = ((alpha.ln() / target_pod.ln()).ceil() as u64).max(1);
    // guard against rounding in the closed form
    while !passes(n) {
        n += 1;
    }
    while n > 1 && passes(n - 1) {
        n -= 1;
    }
    Ok(n)
}

/// The same template with its governing size changed: crater diameter or
/// scratch depth.
pub fn with_size(template: DefectKind, size_mm: f64) -> DefectKind {
    match template {
        DefectKind::ImpactCrater { depth_mm, .. } => DefectKind::ImpactCrater {
            diameter_mm: size_mm,
            depth_mm,
        },
        DefectKind::Scratch {
            width_mm,
            length_mm,
            heading_deg,
            ..
        } => DefectKind::Scratch {
            depth_mm: size_mm,
            width_mm,
            length_mm,
            heading_deg,
        },
        hotspot @ DefectKind::ThermalHotspot { .. } => hotspot,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodSpec {
    pub template: DefectKind,
    pub n_trials: u64,
    pub patch_id: String,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_target")]
    pub target_pod: f64,
    #[serde(default = "default_hit_radius")]
    pub hit_radius_mm: f64,
    #[serde(default)]
    pub detection: DetectionParams,
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

fn default_target() -> f64 {
    DEFAULT_TARGET_POD
}

fn default_hit_radius() -> f64 {
    DEFAULT_HIT_RADIUS_MM
}

impl PodSpec {
    /// 29 trials of the 0.6 mm crater, the zero-failure size for 90/95.
    pub fn crater(patch_id: impl Into<String>) -> Self {
        Self {
            template: DefectKind::crater(0.6, 0.2),
            n_trials: 29,
            patch_id: patch_id.into(),
            base_seed: 0,
            confidence: DEFAULT_CONFIDENCE,
            target_pod: DEFAULT_TARGET_POD,
            hit_radius_mm: DEFAULT_HIT_RADIUS_MM,
            detection: DetectionParams::default(),
        }
    }

    /// 0.3 mm-deep scratch campaign.
    pub fn scratch(patch_id: impl Into<String>) -> Self {
        Self {
            template: DefectKind::scratch(0.3, 0.3, 5.0),
            ..Self::crater(patch_id)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(VerificationError::InvalidArguments(
                "n_trials must be ≥ 1".into(),
            ));
        }
        if !self.template.is_geometric() {
            return Err(VerificationError::InvalidArguments(
                "POD templates must be surface defects".into(),
            ));
        }
        self.template.validate()?;
        if !(self.confidence > 0.0 && self.confidence < 1.0)
            || !(self.target_pod > 0.0 && self.target_pod < 1.0)
            || !(self.hit_radius_mm > 0.0)
        {
            return Err(VerificationError::InvalidArguments(
                "confidence and target_pod must be in (0, 1), hit radius > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub seed: u64,
    pub placement_uv: [f64; 2],
    pub detected: bool,
    /// Distance from the injected center to the nearest detection, mm.
    pub nearest_mm: Option<f64>,
    pub kind_guess: Option<DefectClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodResult {
    pub template: DefectKind,
    pub patch_id: String,
    pub k: u64,
    pub n: u64,
    pub alpha: f64,
    pub confidence: f64,
    pub target_pod: f64,
    pub pod_lower_bound: f64,
    pub pass: bool,
    pub trials: Vec<TrialRecord>,
}

impl PodResult {
    pub fn detection_rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

/// Region where a defect center can land inside the scan window without its
/// footprint leaving the window or the patch.
pub fn placement_region(scene: &WarehouseScene, head: &SensorHead, spec: &PodSpec) -> Result<Rect> {
    let patch = scene.patch(&spec.patch_id)?;
    let view = head.view(patch, head.profilometer.working_range_m)?;
    let window = Rect::centered(view.aim_uv, head.profilometer.scan_area_m)
        .intersection(&Rect::new([0.0, 0.0], [patch.extent_u, patch.extent_v]))
        .ok_or_else(|| SensorError::NotInView(spec.patch_id.clone()))?;
    let inset = spec.template.bounding_radius_mm() * 1e-3;
    let region = Rect::new(
        [window.min[0] + inset, window.min[1] + inset],
        [window.max[0] - inset, window.max[1] - inset],
    );
    if region.width() <= 0.0 || region.height() <= 0.0 {
        return Err(VerificationError::InvalidArguments(
            "defect does not fit inside the scan window".into(),
        ));
    }
    Ok(region)
}

fn run_trial(
    scene: &WarehouseScene,
    head: &SensorHead,
    spec: &PodSpec,
    region: &Rect,
    index: u64,
) -> Result<TrialRecord> {
    let seed = spec.base_seed.wrapping_add(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uv = [
        rng.random_range(region.min[0]..=region.max[0]),
        rng.random_range(region.min[1]..=region.max[1]),
    ];
    let noise_seed = rng.next_u64();
    let trial_scene = scene.add_defect(&Defect::new(spec.template, spec.patch_id.clone(), uv))?;
    let cloud = scan_profile(&trial_scene, head, &spec.patch_id, noise_seed)?;
    let found = detect_surface_defects(&cloud, &spec.detection)?;
    let nearest = found
        .iter()
        .map(|d| {
            let dist = (d.centroid_uv[0] - uv[0]).hypot(d.centroid_uv[1] - uv[1]) * 1e3;
            (dist, d.kind_guess)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0));
    Ok(TrialRecord {
        index,
        seed,
        placement_uv: uv,
        detected: nearest.is_some_and(|(d, _)| d <= spec.hit_radius_mm),
        nearest_mm: nearest.map(|n| n.0),
        kind_guess: nearest.map(|n| n.1),
    })
}

/// Hit/miss campaign: each trial injects one defect into a copy of the
/// scene, scans it and scores a hit when a detection lands within the hit
/// radius.
pub fn run_pod_campaign(
    scene: &WarehouseScene,
    head: &SensorHead,
    spec: &PodSpec,
) -> Result<PodResult> {
    spec.validate()?;
    let region = placement_region(scene, head, spec)?;

    #[cfg(feature = "parallel")]
    let trials: Vec<TrialRecord> = {
        use rayon::prelude::*;
        (0..spec.n_trials)
            .into_par_iter()
            .map(|i| run_trial(scene, head, spec, &region, i))
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let trials: Vec<TrialRecord> = (0..spec.n_trials)
        .map(|i| run_trial(scene, head, spec, &region, i))
        .collect::<Result<_>>()?;

    summarize(spec, trials)
}

pub fn run_pod_campaign_serial(
    scene: &WarehouseScene,
    head: &SensorHead,
    spec: &PodSpec,
) -> Result<PodResult> {
    spec.validate()?;
    let region = placement_region(scene, head, spec)?;
    let trials = (0..spec.n_trials)
        .map(|i| run_trial(scene, head, spec, &region, i))
        .collect::<Result<_>>()?;
    summarize(spec, trials)
}

fn summarize(spec: &PodSpec, trials: Vec<TrialRecord>) -> Result<PodResult> {
    let k = trials.iter().filter(|t| t.detected).count() as u64;
    let n = trials.len() as u64;
    let alpha = 1.0 - spec.confidence;
    let bound = clopper_pearson_lower(k, n, alpha)?;
    Ok(PodResult {
        template: spec.template,
        patch_id: spec.patch_id.clone(),
        k,
        n,
        alpha,
        confidence: spec.confidence,
        target_pod: spec.target_pod,
        pod_lower_bound: bound,
        pass: bound >= spec.target_pod,
        trials,
    })
}

/// Campaign results over a sweep of defect sizes.
pub fn pod_curve(
    scene: &WarehouseScene,
    head: &SensorHead,
    spec: &PodSpec,
    sizes_mm: &[f64],
) -> Result<Vec<(f64, PodResult)>> {
    sizes_mm
        .iter()
        .map(|&s| {
            let spec = PodSpec {
                template: with_size(spec.template, s),
                ..spec.clone()
            };
            run_pod_campaign(scene, head, &spec).map(|r| (s, r))
        })
        .collect()
}
