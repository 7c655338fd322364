use bcmlr::rng::stream;
use bcmlr::selection::{auc_ci_bootstrap, auc_ci_delong, select_num_changepoints, SelectionConfig};
use bcmlr::sim::pure_noise;
use bcmlr::GibbsConfig;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn delong_agrees_with_stratified_bootstrap() {
    let mut rng = stream(40, 0);
    let labels: Vec<bool> = (0..40).map(|i| i % 2 == 0).collect();
    let scores: Vec<f64> = labels
        .iter()
        .map(|&l| if l { 0.8 } else { 0.0 } + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let d = auc_ci_delong(&labels, &scores, 0.1).unwrap();
    let b = auc_ci_bootstrap(&labels, &scores, 0.1, 2000, &mut stream(41, 0)).unwrap();
    assert_eq!(d.auc, b.auc);
    assert!((d.lower - b.lower).abs() < 0.03, "lower {} vs {}", d.lower, b.lower);
    assert!((d.upper - b.upper).abs() < 0.03, "upper {} vs {}", d.upper, b.upper);
}

#[test]
fn pure_noise_mostly_selects_no_changepoints() {
    let mut zeros = 0;
    for r in 0..20u64 {
        let x = pure_noise(300, 3, &mut stream(500 + r, 0)).unwrap();
        let mut sel = SelectionConfig::new(3, 5, 30);
        sel.alpha = 0.1;
        sel.refit = false;
        let result = select_num_changepoints(&x, &sel, &GibbsConfig::new(800).with_seed(r)).unwrap();
        assert!(result.l_true_draws.iter().all(|&c| c <= 3));
        zeros += usize::from(result.l_hat == 0);
    }
    assert!(zeros >= 16, "L hat = 0 in {zeros}/20 replicates");
}
