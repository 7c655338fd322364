use bcmlr_web::Demo;

#[test]
fn series_reports_scenario_shape() {
    let demo = Demo::generate("cic", "high", 3).unwrap();
    let s = demo.series();
    assert_eq!(s["n"], 600);
    assert_eq!(s["p"], 8);
    assert_eq!(s["columns"].as_array().unwrap().len(), 2);
    assert_eq!(s["truth"], serde_json::json!([100, 500]));
    assert_eq!(s["needs_embedding"], true);
    assert!(Demo::generate("nope", "low", 1).is_err());
}

#[test]
fn fit_and_select_return_json() {
    let demo = Demo::generate("cim", "low", 1).unwrap();
    let fit = demo.fit_value(2, 300, 1, false).unwrap();
    assert_eq!(fit["estimate"].as_array().unwrap().len(), 2);
    assert_eq!(fit["traces"][0].as_array().unwrap().len(), 150);
    assert!(fit["ari"].as_f64().unwrap() > 0.8);

    let sel = demo.select_value(3, 300, 1, false).unwrap();
    let pmf: f64 = sel["pmf"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((pmf - 1.0).abs() < 1e-9);
    assert!(sel["l_hat"].as_u64().unwrap() <= 3);
}
