use pooled_wear_demo::{compare, curves, generate};
use serde_json::Value;

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn generate_defaults_to_the_standard_fleet() {
    let v = json(&generate(""));
    let tools = v["tools"].as_array().unwrap();
    assert_eq!(tools.len(), 7);
    assert!(tools.iter().all(|t| t["points"].as_array().unwrap().len() == 20));
    assert_eq!(v["truth"]["groups"].as_array().unwrap().len(), 7);
    assert_eq!(generate(r#"{"seed": 4}"#), generate(r#"{"seed": 4}"#));
}

#[test]
fn compare_returns_bands_and_rows_for_both_models() {
    let v = json(&compare(r#"{"seed": 2, "chains": 2, "warmup": 150, "samples": 100}"#));
    assert_eq!(v["sparse"], serde_json::json!(["6", "7"]));
    assert_eq!(v["rows"].as_array().unwrap().len(), 8);
    for model in ["independent", "hierarchical"] {
        let bands = v[model]["bands"].as_array().unwrap();
        assert_eq!(bands.len(), 7);
        let b = &bands[5];
        let lo = b["lo95"].as_array().unwrap();
        let hi = b["hi95"].as_array().unwrap();
        assert_eq!(lo.len(), b["x"].as_array().unwrap().len());
        assert!(lo.iter().zip(hi).all(|(l, h)| l.as_f64() <= h.as_f64()));
    }
    let holdout: usize = v["holdout"].as_array().unwrap().iter().map(|t| t["points"].as_array().unwrap().len()).sum();
    assert_eq!(holdout, 30);
}

#[test]
fn curves_peak_at_zero_residual() {
    let v = json(&curves(0.2, 2.0));
    let c: Vec<f64> = v["cauchy"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let mid = c.len() / 2;
    assert!(c.iter().all(|&x| x <= c[mid]));
    let pull = v["gaussian_pull"].as_array().unwrap();
    assert!(pull.last().unwrap().as_f64().unwrap() > v["cauchy_pull"].as_array().unwrap().last().unwrap().as_f64().unwrap());
}

#[test]
fn errors_come_back_as_json() {
    assert!(json(&generate(r#"{"tools": 0}"#))["error"].is_string());
    assert!(json(&compare("not json"))["error"].is_string());
    assert!(json(&curves(-1.0, 2.0))["error"].is_string());
}
