//! Defect detection on profilometer point clouds: plane fit, robust noise
//! estimate, thresholded clustering and size measurement.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::cluster::{components, neighbors};
use super::{InspectionError, Result};
use crate::sensors::PointCloud;

/// Median absolute deviation to standard deviation for Gaussian noise.
const MAD_TO_SIGMA: f64 = 1.482_602_218_505_602;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub sigma_factor: f64,
    pub threshold_floor_mm: f64,
    /// Multiplies the final threshold. Values above 1 degrade the detector.
    pub threshold_scale: f64,
    /// Clusters grow into neighbors above max(grow_sigma_factor·σ,
    /// grow_peak_fraction·|peak|) so their extent reflects the whole feature.
    pub grow_sigma_factor: f64,
    pub grow_peak_fraction: f64,
    pub min_cluster_samples: usize,
    pub elongation_ratio: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            sigma_factor: 3.0,
            threshold_floor_mm: 0.15,
            threshold_scale: 1.0,
            grow_sigma_factor: 2.0,
            grow_peak_fraction: 0.1,
            min_cluster_samples: 2,
            elongation_ratio: 3.0,
        }
    }
}

impl DetectionParams {
    /// Same detector with its threshold multiplied by ten.
    pub fn degraded() -> Self {
        Self {
            threshold_scale: 10.0,
            ..Self::default()
        }
    }

    pub fn threshold_mm(&self, sigma_mm: f64) -> f64 {
        (self.sigma_factor * sigma_mm).max(self.threshold_floor_mm) * self.threshold_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefectClass {
    Scratch,
    Impact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedDefect {
    pub patch_id: String,
    pub centroid_uv: [f64; 2],
    pub kind_guess: DefectClass,
    /// Diameter for impacts, length for scratches.
    pub size_mm: f64,
    pub major_extent_mm: f64,
    pub minor_extent_mm: f64,
    pub elongation: f64,
    /// Residual of largest magnitude, signed; depth for dents and grooves.
    pub peak_residual_mm: f64,
    pub samples: usize,
}

impl DetectedDefect {
    pub fn depth_mm(&self) -> f64 {
        self.peak_residual_mm.abs()
    }
}

pub fn classify_defect(d: &DetectedDefect) -> DefectClass {
    classify_elongation(d.elongation, DetectionParams::default().elongation_ratio)
}

pub fn classify_elongation(elongation: f64, ratio: f64) -> DefectClass {
    if elongation >= ratio {
        DefectClass::Scratch
    } else {
        DefectClass::Impact
    }
}

/// Residuals (mm) after removing the least-squares plane z = a + b·x + c·y.
pub fn plane_residuals(cloud: &PointCloud) -> Result<Vec<f64>> {
    let n = cloud.points.len();
    if n == 0 {
        return Err(InspectionError::EmptyCloud);
    }
    let to_mm = |p: &[f64; 3]| [p[0] * 1e3, p[1] * 1e3, p[2] * 1e3];
    let mean = cloud.points.iter().fold([0.0; 3], |acc, p| {
        let q = to_mm(p);
        [acc[0] + q[0], acc[1] + q[1], acc[2] + q[2]]
    });
    let mean = mean.map(|s| s / n as f64);

    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for p in &cloud.points {
        let q = to_mm(p);
        let row = Vector3::new(1.0, q[0] - mean[0], q[1] - mean[1]);
        ata += row * row.transpose();
        atb += row * (q[2] - mean[2]);
    }
    // A degenerate grid (one row or column) leaves a rank-deficient system;
    // the pseudo-inverse then fits the best line or constant.
    let coef = ata
        .pseudo_inverse(1e-12 * ata.norm().max(1.0))
        .map(|inv| inv * atb)
        .unwrap_or_else(|_| Vector3::zeros());

    Ok(cloud
        .points
        .iter()
        .map(|p| {
            let q = to_mm(p);
            let fit = mean[2] + coef[0] + coef[1] * (q[0] - mean[0]) + coef[2] * (q[1] - mean[1]);
            q[2] - fit
        })
        .collect())
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Robust noise estimate from the median absolute deviation.
pub fn mad_sigma(residuals: &[f64]) -> f64 {
    let mut v = residuals.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<f64> = residuals.iter().map(|r| (r - med).abs()).collect();
    MAD_TO_SIGMA * median(&mut dev)
}

fn sign(r: f64) -> i8 {
    if r > 0.0 {
        1
    } else {
        -1
    }
}

pub fn detect_surface_defects(
    cloud: &PointCloud,
    params: &DetectionParams,
) -> Result<Vec<DetectedDefect>> {
    let residuals = plane_residuals(cloud)?;
    let (w, h) = (cloud.cols, cloud.rows);
    if w * h != residuals.len() {
        return Err(InspectionError::InvalidConfig(format!(
            "cloud grid {w}×{h} does not match {} points",
            residuals.len()
        )));
    }
    let sigma = mad_sigma(&residuals);
    let tau = params.threshold_mm(sigma);

    let seed_class: Vec<i8> = residuals
        .iter()
        .map(|&r| if r.abs() > tau { sign(r) } else { 0 })
        .collect();
    let seeds: Vec<Vec<usize>> = components(w, h, &seed_class)
        .into_iter()
        .filter(|c| c.len() >= params.min_cluster_samples)
        .collect();

    // Grow each seed cluster in turn; samples claimed by an earlier cluster stay there.
    let mut owner: Vec<Option<usize>> = vec![None; residuals.len()];
    for (ci, members) in seeds.iter().enumerate() {
        for &i in members {
            owner[i] = Some(ci);
        }
    }
    let mut clusters = Vec::with_capacity(seeds.len());
    for (ci, members) in seeds.iter().enumerate() {
        let s = sign(residuals[members[0]]);
        let peak = members
            .iter()
            .map(|&i| residuals[i].abs())
            .fold(0.0, f64::max);
        let grow_tau = (params.grow_sigma_factor * sigma).max(params.grow_peak_fraction * peak);
        let mut grown = members.clone();
        let mut k = 0;
        while k < grown.len() {
            let i = grown[k];
            k += 1;
            for n in neighbors(i, w, h) {
                if owner[n].is_none() && sign(residuals[n]) == s && residuals[n].abs() > grow_tau {
                    owner[n] = Some(ci);
                    grown.push(n);
                }
            }
        }
        grown.sort_unstable();
        clusters.push(grown);
    }

    Ok(clusters
        .iter()
        .map(|members| measure(cloud, &residuals, members, params))
        .collect())
}

fn measure(
    cloud: &PointCloud,
    residuals: &[f64],
    members: &[usize],
    params: &DetectionParams,
) -> DetectedDefect {
    let pitch_mm = cloud.pitch_m * 1e3;
    let xy: Vec<[f64; 2]> = members
        .iter()
        .map(|&i| [cloud.points[i][0] * 1e3, cloud.points[i][1] * 1e3])
        .collect();
    let n = xy.len() as f64;
    let mean = xy
        .iter()
        .fold([0.0; 2], |a, p| [a[0] + p[0], a[1] + p[1]])
        .map(|s| s / n);

    // principal axes of the sample positions
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &xy {
        let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (sin, cos) = theta.sin_cos();
    let (mut a_lo, mut a_hi, mut b_lo, mut b_hi) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in &xy {
        let a = p[0] * cos + p[1] * sin;
        let b = -p[0] * sin + p[1] * cos;
        a_lo = a_lo.min(a);
        a_hi = a_hi.max(a);
        b_lo = b_lo.min(b);
        b_hi = b_hi.max(b);
    }
    // each sample stands for one pitch-wide cell
    let e1 = a_hi - a_lo + pitch_mm;
    let e2 = b_hi - b_lo + pitch_mm;
    let (major, minor) = if e1 >= e2 { (e1, e2) } else { (e2, e1) };
    let elongation = major / minor;

    let mut wsum = 0.0;
    let mut c = [0.0; 2];
    let mut peak: f64 = 0.0;
    for &i in members {
        let r = residuals[i];
        let w = r.abs();
        wsum += w;
        c[0] += w * cloud.points[i][0];
        c[1] += w * cloud.points[i][1];
        if r.abs() > peak.abs() {
            peak = r;
        }
    }
    let centroid = cloud.uv_of(&[c[0] / wsum, c[1] / wsum, 0.0]);
    let kind_guess = classify_elongation(elongation, params.elongation_ratio);

    DetectedDefect {
        patch_id: cloud.patch_id.clone(),
        centroid_uv: centroid,
        kind_guess,
        size_mm: major,
        major_extent_mm: major,
        minor_extent_mm: minor,
        elongation,
        peak_residual_mm: peak,
        samples: members.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Defect, DefectKind, Pose, SurfacePatch, WarehouseScene};
    use crate::sensors::{scan_profile, SensorHead};

    fn grid(cols: usize, rows: usize, pitch: f64, z: impl Fn(f64, f64) -> f64) -> PointCloud {
        let mut points = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let (x, y) = (c as f64 * pitch, r as f64 * pitch);
                points.push([x, y, z(x, y)]);
            }
        }
        PointCloud {
            patch_id: "P".into(),
            seed: 0,
            origin_uv: [0.0, 0.0],
            pitch_m: pitch,
            cols,
            rows,
            points,
        }
    }

    fn scan(defects: &[(DefectKind, [f64; 2])], sigma: f64, seed: u64) -> PointCloud {
        let patch = SurfacePatch::new("P", Pose::identity(), 0.02, 0.02);
        let mut scene = WarehouseScene::new(vec![], vec![], vec![patch.clone()], 20.0).unwrap();
        for (k, uv) in defects {
            scene = scene.add_defect(&Defect::new(*k, "P", *uv)).unwrap();
        }
        let mut head = SensorHead::facing(&patch, [0.01, 0.01], 2.0);
        head.profilometer.depth_noise_sigma_mm = sigma;
        scan_profile(&scene, &head, "P", seed).unwrap()
    }

    fn d(elongation: f64) -> DetectedDefect {
        DetectedDefect {
            patch_id: "P".into(),
            centroid_uv: [0.0, 0.0],
            kind_guess: DefectClass::Impact,
            size_mm: 1.0,
            major_extent_mm: elongation,
            minor_extent_mm: 1.0,
            elongation,
            peak_residual_mm: -0.2,
            samples: 4,
        }
    }

    #[test]
    fn classifier_ratio_is_inclusive() {
        assert_eq!(classify_defect(&d(1.1)), DefectClass::Impact);
        assert_eq!(classify_defect(&d(8.0)), DefectClass::Scratch);
        assert_eq!(classify_defect(&d(3.0)), DefectClass::Scratch);
    }

    #[test]
    fn flat_cloud_has_no_detections() {
        let cloud = grid(50, 40, 1e-4, |_, _| 0.0);
        assert!(detect_surface_defects(&cloud, &DetectionParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let cloud = grid(0, 0, 1e-4, |_, _| 0.0);
        assert!(matches!(
            detect_surface_defects(&cloud, &DetectionParams::default()),
            Err(InspectionError::EmptyCloud)
        ));
    }

    #[test]
    fn single_crater_under_noise() {
        let cloud = scan(&[(DefectKind::crater(0.6, 0.2), [0.0123, 0.0087])], 0.02, 4);
        let found = detect_surface_defects(&cloud, &DetectionParams::default()).unwrap();
        assert_eq!(found.len(), 1, "{found:?}");
        let f = &found[0];
        assert!((f.size_mm - 0.6).abs() <= 0.2, "{}", f.size_mm);
        assert_eq!(f.kind_guess, DefectClass::Impact);
        let err = (f.centroid_uv[0] - 0.0123).hypot(f.centroid_uv[1] - 0.0087);
        assert!(err < 2e-4);
    }

    #[test]
    fn two_craters_five_mm_apart() {
        let cloud = scan(
            &[
                (DefectKind::crater(0.6, 0.2), [0.0075, 0.01]),
                (DefectKind::crater(0.6, 0.2), [0.0125, 0.01]),
            ],
            0.02,
            9,
        );
        let found = detect_surface_defects(&cloud, &DetectionParams::default()).unwrap();
        assert_eq!(found.len(), 2);
    }

    #[test]
    fn scratch_is_classified_as_scratch() {
        let cloud = scan(
            &[(DefectKind::scratch(0.3, 0.3, 5.0), [0.01, 0.01])],
            0.02,
            2,
        );
        let found = detect_surface_defects(&cloud, &DetectionParams::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind_guess, DefectClass::Scratch);
        assert!((found[0].size_mm - 5.0).abs() <= 0.3);
    }

    #[test]
    fn mad_of_known_sample() {
        // median 3, deviations 2 1 0 1 2 → MAD 1
        let s = mad_sigma(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!((s - MAD_TO_SIGMA).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn tilted_plane_is_removed(
                a in -5.0..5.0f64,
                b in -0.5..0.5f64,
                c in -0.5..0.5f64,
                cols in 1usize..30,
                rows in 1usize..30,
            ) {
                let cloud = grid(cols, rows, 1e-4, |x, y| (a + b * x * 1e3 + c * y * 1e3) * 1e-3);
                for r in plane_residuals(&cloud).unwrap() {
                    prop_assert!(r.abs() < 1e-9, "{r}");
                }
            }

            #[test]
            fn noiseless_sizes_within_two_pitches(
                u in 0.004..0.016f64,
                v in 0.004..0.016f64,
                dia in 0.4..2.0f64,
                depth in 0.2..0.5f64,
            ) {
                let cloud = scan(&[(DefectKind::crater(dia, depth), [u, v])], 0.0, 0);
                let found = detect_surface_defects(&cloud, &DetectionParams::default()).unwrap();
                prop_assert_eq!(found.len(), 1);
                prop_assert!((found[0].size_mm - dia).abs() <= 2.0 * 0.1, "{} vs {}", found[0].size_mm, dia);
            }
        }
    }
}
