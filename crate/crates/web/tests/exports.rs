use disac_web::{correlation, eta_sweep, snapshot};
use serde_json::Value;

#[test]
fn errors_are_json() {
    let v: Value = serde_json::from_str(&correlation(2, 64, 40, false, 1)).unwrap();
    assert!(v["error"].as_str().unwrap().contains("nfeasible"), "{v}");
}

#[test]
fn designed_correlation_vanishes_on_support() {
    let v: Value = serde_json::from_str(&correlation(4, 64, 7, false, 1)).unwrap();
    assert!(v["max_cross_on_support"].as_f64().unwrap() < 1e-8);
    let cross = v["cross_db"].as_array().unwrap();
    assert!(cross[3].as_f64().unwrap() < -150.0);
    assert!(v["auto_db"][0].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn snapshot_image_is_normalized() {
    let v: Value = serde_json::from_str(&snapshot(4, 2, 128, 100.0, 0.25, "3", 0.5, false, 1)).unwrap();
    let db = v["db"].as_array().unwrap();
    assert_eq!(
        db.len(),
        (v["nx"].as_u64().unwrap() * v["ny"].as_u64().unwrap()) as usize
    );
    let max = db.iter().map(|x| x.as_f64().unwrap()).fold(f64::MIN, f64::max);
    assert!(max.abs() < 1e-6 && v["entropy"].as_f64().unwrap() > 0.0, "{v}");
    assert_eq!(v["se"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_trades_se_for_entropy() {
    let v: Value = serde_json::from_str(&eta_sweep(4, 2, 128, "3", 3, 1)).unwrap();
    let se: Vec<f64> = v["se"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!(se[0] < se[2], "{v}");
}
