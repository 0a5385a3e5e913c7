//! Thermal anomaly detection on imager frames.

use serde::{Deserialize, Serialize};

use super::cluster::components;
use crate::sensors::ThermalFrame;

pub const DEFAULT_THRESHOLD_C: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnomalyClass {
    Hot,
    Cold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalAnomaly {
    pub patch_id: String,
    /// (column, row) of each member pixel.
    pub pixels: Vec<[usize; 2]>,
    pub mean_delta_c: f64,
    pub peak_c: f64,
    pub centroid_uv: [f64; 2],
    pub classification: AnomalyClass,
}

/// Clusters of on-patch pixels deviating from `expected_c` by more than
/// `threshold_c`; hot and cold pixels never share a cluster.
pub fn detect_thermal_anomalies(
    frame: &ThermalFrame,
    expected_c: f64,
    threshold_c: f64,
) -> Vec<ThermalAnomaly> {
    let (w, h) = (frame.width, frame.height);
    let class: Vec<i8> = (0..w * h)
        .map(|i| {
            let d = frame.values[i] - expected_c;
            if !frame.on_patch(i % w, i / w) || d.abs() <= threshold_c {
                0
            } else if d > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();

    components(w, h, &class)
        .into_iter()
        .map(|members| {
            let n = members.len() as f64;
            let hot = class[members[0]] > 0;
            let mut sum = 0.0;
            let mut peak = frame.values[members[0]];
            let (mut cc, mut cr) = (0.0, 0.0);
            for &i in &members {
                let v = frame.values[i];
                sum += v - expected_c;
                peak = if hot { peak.max(v) } else { peak.min(v) };
                cc += (i % w) as f64;
                cr += (i / w) as f64;
            }
            ThermalAnomaly {
                patch_id: frame.patch_id.clone(),
                pixels: members.iter().map(|&i| [i % w, i / w]).collect(),
                mean_delta_c: sum / n,
                peak_c: peak,
                centroid_uv: frame.pixel_center_uv(cc / n, cr / n),
                classification: if hot {
                    AnomalyClass::Hot
                } else {
                    AnomalyClass::Cold
                },
            }
        })
        .collect()
}
