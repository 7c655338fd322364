use bcmlr::rng::stream;
use bcmlr::sim::{generate, generate_segments, segment_laws, Scenario, ScenarioSpec, SegmentLaw, Variant};
use bcmlr::ChangepointVector;

const ROWS: usize = 20_000;

/// Largest standardized deviation of the sample mean and of the sample
/// covariance from the law, over all entries.
fn worst_deviation(law: &SegmentLaw, seed: u64) -> (f64, f64) {
    let one = ChangepointVector::new(vec![], ROWS, 1).unwrap();
    let x = generate_segments(std::slice::from_ref(law), &one, &mut stream(seed, 0)).unwrap();
    let p = x.n_cols();
    let n = ROWS as f64;
    let means: Vec<f64> = (0..p).map(|d| x.column(d).sum::<f64>() / n).collect();
    let mut worst_mean: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    for a in 0..p {
        let se = (law.cov[(a, a)] / n).sqrt();
        worst_mean = worst_mean.max((means[a] - law.mean[a]).abs() / se);
        for b in a..p {
            let c = x
                .rows()
                .map(|r| (r[a] - means[a]) * (r[b] - means[b]))
                .sum::<f64>()
                / (n - 1.0);
            // variance of a Gaussian sample covariance entry
            let se = ((law.cov[(a, a)] * law.cov[(b, b)] + law.cov[(a, b)].powi(2)) / n).sqrt();
            worst_cov = worst_cov.max((c - law.cov[(a, b)]).abs() / se);
        }
    }
    (worst_mean, worst_cov)
}

#[test]
fn segment_samples_match_their_laws() {
    let mut seed = 0;
    for kind in Scenario::ALL {
        for variant in [Variant::Low, Variant::High] {
            for (j, law) in segment_laws(kind, variant, 3).iter().enumerate() {
                seed += 1;
                let (m, c) = worst_deviation(law, seed);
                // many entries per law, so the covariance bound is a little looser
                assert!(m < 4.0, "{kind:?} {variant:?} segment {}: mean off by {m:.2} SE", j + 1);
                assert!(c < 5.0, "{kind:?} {variant:?} segment {}: covariance off by {c:.2} SE", j + 1);
            }
        }
    }
}

#[test]
fn laws_have_the_documented_structure() {
    let cim = segment_laws(Scenario::Cim, Variant::Low, 3);
    assert_eq!(cim[1].mean.as_slice(), &[2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0, -2.0]);
    assert!(cim[0].mean.iter().all(|&v| v == 0.0) && cim[2].mean == cim[0].mean);

    let cic = segment_laws(Scenario::Cic, Variant::Low, 3);
    assert_eq!((cic[0].cov[(0, 1)], cic[0].cov[(0, 2)]), (0.8, 0.0));
    assert_eq!((cic[1].cov[(0, 1)], cic[1].cov[(0, 2)]), (0.0, 0.8));
    assert_eq!(cic[2].cov, cic[0].cov);

    // the high-dimensional second covariance is not positive definite as
    // written; the repaired matrix keeps a unit diagonal and stays close
    let high = segment_laws(Scenario::Cic, Variant::High, 3);
    let s2 = &high[1].cov;
    assert!(s2.clone().cholesky().is_some());
    assert!((0..8).all(|d| (s2[(d, d)] - 1.0).abs() < 1e-12));
    assert!(s2[(0, 2)] > 0.6 && s2[(1, 2)] > 0.6 && s2[(0, 2)] < 0.9);
    assert_eq!(high[0].cov[(0, 1)], 0.9);

    let cimc = segment_laws(Scenario::Cimc, Variant::High, 3);
    assert_eq!(cimc[1].mean.as_slice(), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!((cimc[0].cov[(0, 1)], cimc[0].cov[(2, 3)]), (0.9, 0.9));
    assert_eq!(cimc[1].cov, cimc[0].cov);
    assert!(cimc[2].cov.is_identity(0.0));
}

#[test]
fn generated_series_follow_the_truth() {
    let spec = ScenarioSpec::new(Scenario::Cimc, Variant::Low, 12);
    let (x, truth) = generate(&spec, &mut stream(12, 0)).unwrap();
    assert_eq!(truth.kappas(), &[100, 500]);
    assert_eq!((x.n_rows(), x.n_cols()), (600, 4));
    let mean = |rows: std::ops::Range<usize>, d: usize| rows.clone().map(|i| x.get(i, d)).sum::<f64>() / rows.len() as f64;
    assert!(mean(0..100, 0).abs() < 0.35);
    assert!((mean(100..600, 0) - 1.0).abs() < 0.15);
}
