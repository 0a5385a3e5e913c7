use mim_core::inspection::AnomalyClass;
use mim_web::{curve, profile_view, thermal_view};

#[test]
fn hot_spot_is_flagged() {
    let v = thermal_view(80.0, 150.0, 1.0, 3).unwrap();
    assert_eq!(v.values.len(), v.width * v.height);
    assert!(v.max_c > 80.0);
    assert!(v
        .anomalies
        .iter()
        .any(|a| a.classification == AnomalyClass::Hot));
}

#[test]
fn cold_spot_clamps_at_range_floor() {
    let v = thermal_view(-90.0, 300.0, 1.0, 3).unwrap();
    assert_eq!(v.min_c, -40.0);
    assert!(v
        .anomalies
        .iter()
        .any(|a| a.classification == AnomalyClass::Cold));
}

#[test]
fn curve_rises_with_size() {
    let points = curve(false, &[0.1, 0.6], 29, 2.0, 5).unwrap();
    assert_eq!(points.len(), 2);
    assert!(points[0].k < points[1].k);
    assert!(points[1].pass && !points[0].pass);
}

#[test]
fn profile_shows_crater() {
    let v = profile_view(1.0, 0.3, 0.02, 1).unwrap();
    assert_eq!(v.heights_mm.len(), v.cols * v.rows);
    assert_eq!(v.detections.len(), 1);
    assert!(v.heights_mm.iter().cloned().fold(f64::MAX, f64::min) < -0.2);
}

#[test]
fn out_of_range_standoff_is_an_error() {
    assert!(thermal_view(10.0, 100.0, 2.5, 1).is_err());
}
