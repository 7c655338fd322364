//! Synthetic scenarios and the adjusted Rand index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{labels_for, ChangepointVector, SeriesMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Change in mean.
    Cim,
    /// Change in covariance.
    Cic,
    /// Change in mean and covariance.
    Cimc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Low,
    High,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Cim, Scenario::Cic, Scenario::Cimc];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Cim => "cim",
            Scenario::Cic => "cic",
            Scenario::Cimc => "cimc",
        }
    }

    /// Whether the covariance changes, so the raw series needs the quadratic
    /// embedding to expose the change.
    pub fn needs_embedding(self) -> bool {
        !matches!(self, Scenario::Cim)
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cim" => Ok(Scenario::Cim),
            "cic" => Ok(Scenario::Cic),
            "cimc" => Ok(Scenario::Cimc),
            other => Err(Error::InvalidParameter(format!("unknown scenario '{other}' (cim, cic, cimc)"))),
        }
    }
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Low => "low",
            Variant::High => "high",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Variant::Low),
            "high" => Ok(Variant::High),
            other => Err(Error::InvalidParameter(format!("unknown variant '{other}' (low, high)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: Scenario,
    pub variant: Variant,
    pub n: usize,
    pub kappas: Vec<usize>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// `N = 600`, changepoints at 100 and 500.
    pub fn new(kind: Scenario, variant: Variant, seed: u64) -> Self {
        ScenarioSpec {
            kind,
            variant,
            n: 600,
            kappas: vec![100, 500],
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        match (self.kind, self.variant) {
            (Scenario::Cim, Variant::Low) => 14,
            (Scenario::Cim, Variant::High) => 40,
            (_, Variant::Low) => 4,
            (_, Variant::High) => 8,
        }
    }

    pub fn truth(&self) -> Result<ChangepointVector> {
        ChangepointVector::new(self.kappas.clone(), self.n, 1)
    }
}

/// Gaussian law of one segment.
#[derive(Debug, Clone)]
pub struct SegmentLaw {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn correlation(p: usize, entries: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut m = DMatrix::identity(p, p);
    for &(a, b, v) in entries {
        m[(a - 1, b - 1)] = v;
        m[(b - 1, a - 1)] = v;
    }
    m
}

/// Nearest valid correlation matrix by eigenvalue clipping at `floor` followed
/// by rescaling to a unit diagonal. Positive definite input is returned as is.
pub fn repair_correlation(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.min() > 0.0 {
        return m.clone();
    }
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let d: Vec<f64> = (0..m.nrows()).map(|i| rebuilt[(i, i)].sqrt()).collect();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { 1.0 } else { rebuilt[(i, j)] / (d[i] * d[j]) })
}

const REPAIR_FLOOR: f64 = 1e-2;

/// Segment laws in time order for the scenario, cycling the pattern when more
/// (or fewer) than two changepoints are requested.
pub fn segment_laws(kind: Scenario, variant: Variant, n_segments: usize) -> Vec<SegmentLaw> {
    let spec = ScenarioSpec::new(kind, variant, 0);
    let p = spec.dim();
    let zero = DVector::zeros(p);
    let eye = DMatrix::identity(p, p);
    (0..n_segments)
        .map(|j| match kind {
            Scenario::Cim => {
                let mut mu = DVector::zeros(p);
                if j % 2 == 1 {
                    mu[0] = 2.0;
                    mu[1] = 2.0;
                    mu[p - 2] = -2.0;
                    mu[p - 1] = -2.0;
                }
                SegmentLaw { mean: mu, cov: eye.clone() }
            }
            Scenario::Cic => {
                let cov = match (variant, j % 2) {
                    (Variant::Low, 0) => correlation(p, &[(1, 2, 0.8)]),
                    (Variant::Low, _) => correlation(p, &[(1, 3, 0.8)]),
                    (Variant::High, 0) => correlation(p, &[(1, 2, 0.9)]),
                    (Variant::High, _) => repair_correlation(&correlation(p, &[(1, 3, 0.9), (2, 3, 0.9)]), REPAIR_FLOOR),
                };
                SegmentLaw { mean: zero.clone(), cov }
            }
            Scenario::Cimc => {
                let (mu, sigma) = match variant {
                    Variant::Low => (DVector::from_element(p, 1.0), correlation(p, &[(1, 2, 0.7), (1, 4, 0.7)])),
                    Variant::High => (
                        DVector::from_fn(p, |d, _| if d < 4 { 1.0 } else { 0.0 }),
                        correlation(p, &[(1, 2, 0.9), (3, 4, 0.9)]),
                    ),
                };
                match j {
                    0 => SegmentLaw { mean: zero.clone(), cov: sigma },
                    1 => SegmentLaw { mean: mu, cov: sigma },
                    _ => SegmentLaw { mean: mu, cov: eye.clone() },
                }
            }
        })
        .collect()
}

/// Draws a series with the given segment laws and changepoints.
pub fn generate_segments<R: Rng + ?Sized>(
    laws: &[SegmentLaw],
    kappa: &ChangepointVector,
    rng: &mut R,
) -> Result<SeriesMatrix> {
    if laws.len() != kappa.n_segments() {
        return Err(Error::InvalidInput(format!(
            "{} segment laws for {} segments",
            laws.len(),
            kappa.n_segments()
        )));
    }
    let p = laws[0].mean.len();
    let mut values = Vec::with_capacity(kappa.n() * p);
    for (j, law) in laws.iter().enumerate() {
        let chol = law
            .cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter(format!("segment {} covariance is not positive definite", j + 1)))?;
        let l = chol.l();
        for _ in kappa.segment(j) {
            let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)));
            let x = &law.mean + &l * z;
            values.extend(x.iter());
        }
    }
    SeriesMatrix::new(kappa.n(), p, values)
}

/// Draws the scenario series and returns it with the true changepoints.
pub fn generate<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<(SeriesMatrix, ChangepointVector)> {
    let truth = spec.truth()?;
    let laws = segment_laws(spec.kind, spec.variant, truth.n_segments());
    let x = generate_segments(&laws, &truth, rng)?;
    Ok((x, truth))
}

/// iid standard Gaussian noise, no change.
pub fn pure_noise<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<SeriesMatrix> {
    SeriesMatrix::new(n, p, (0..n * p).map(|_| StandardNormal.sample(rng)).collect())
}

fn choose2(v: u64) -> i128 {
    (v as i128) * (v as i128 - 1) / 2
}

/// Adjusted Rand index of two label vectors via the contingency table.
pub fn adjusted_rand_index_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("label vectors have lengths {} and {}", a.len(), b.len())));
    }
    let n = a.len() as u64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&i, &j) in a.iter().zip(b) {
        table[i * kb + j] += 1;
    }
    let index: i128 = table.iter().map(|&c| choose2(c)).sum();
    let sum_a: i128 = (0..ka).map(|i| choose2(table[i * kb..(i + 1) * kb].iter().sum())).sum();
    let sum_b: i128 = (0..kb).map(|j| choose2((0..ka).map(|i| table[i * kb + j]).sum())).sum();
    let total = choose2(n);
    // (index - E) / (max - E) with E = sum_a sum_b / total, scaled by 2 total
    let num = 2 * (index * total - sum_a * sum_b);
    let den = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
    if den == 0 {
        // both partitions trivial in the same way
        return Ok(if num == 0 { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}

/// Adjusted Rand index of the partitions induced by two changepoint vectors.
pub fn adjusted_rand_index(truth: &ChangepointVector, estimate: &ChangepointVector) -> Result<f64> {
    if truth.n() != estimate.n() {
        return Err(Error::InvalidInput(format!(
            "series lengths differ: {} and {}",
            truth.n(),
            estimate.n()
        )));
    }
    adjusted_rand_index_labels(&labels_for(truth.kappas(), truth.n()), &labels_for(estimate.kappas(), estimate.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn cp(k: &[usize], n: usize) -> ChangepointVector {
        ChangepointVector::new(k.to_vec(), n, 1).unwrap()
    }

    #[test]
    fn ari_examples() {
        assert_eq!(adjusted_rand_index(&cp(&[3], 6), &cp(&[3], 6)).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&cp(&[3], 6), &cp(&[], 6)).unwrap(), 0.0);
        assert_eq!(adjusted_rand_index(&cp(&[], 6), &cp(&[], 6)).unwrap(), 1.0);
        // pairs: 15 total; together in both = C(2,2)+C(3,2) = 4; truth 6, est 7
        // ARI = 2(4*15 - 6*7) / ((6+7)*15 - 2*6*7) = 36 / 111
        let v = adjusted_rand_index(&cp(&[3], 6), &cp(&[2], 6)).unwrap();
        assert_eq!(v, 36.0 / 111.0);
    }

    #[test]
    fn cim_low_shape_and_means() {
        let spec = ScenarioSpec::new(Scenario::Cim, Variant::Low, 7);
        let (x, truth) = generate(&spec, &mut stream(7, 0)).unwrap();
        assert_eq!((x.n_rows(), x.n_cols()), (600, 14));
        assert_eq!(truth.kappas(), &[100, 500]);
        for (d, target) in [(0, 2.0), (1, 2.0), (12, -2.0), (13, -2.0), (5, 0.0)] {
            let mean = (100..500).map(|r| x.get(r, d)).sum::<f64>() / 400.0;
            assert!((mean - target).abs() < 4.0 / 400f64.sqrt(), "dim {d}: {mean}");
        }
    }

    fn sample_corr(x: &SeriesMatrix, rows: std::ops::Range<usize>, a: usize, b: usize) -> f64 {
        let n = rows.len() as f64;
        let ma = rows.clone().map(|r| x.get(r, a)).sum::<f64>() / n;
        let mb = rows.clone().map(|r| x.get(r, b)).sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for r in rows {
            let da = x.get(r, a) - ma;
            let db = x.get(r, b) - mb;
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn cic_low_correlations() {
        let spec = ScenarioSpec::new(Scenario::Cic, Variant::Low, 3);
        let (x, _) = generate(&spec, &mut stream(3, 0)).unwrap();
        assert_eq!(x.n_cols(), 4);
        assert!((sample_corr(&x, 0..100, 0, 1) - 0.8).abs() < 0.1);
        assert!(sample_corr(&x, 100..500, 0, 1).abs() < 0.15);
        assert!((sample_corr(&x, 100..500, 0, 2) - 0.8).abs() < 0.06);
    }

    #[test]
    fn dimensions_of_every_scenario() {
        for kind in Scenario::ALL {
            for (variant, lo_hi) in [(Variant::Low, 0), (Variant::High, 1)] {
                let spec = ScenarioSpec::new(kind, variant, 1);
                let (x, _) = generate(&spec, &mut stream(1, 0)).unwrap();
                let expected = match kind {
                    Scenario::Cim => [14, 40][lo_hi],
                    _ => [4, 8][lo_hi],
                };
                assert_eq!(x.n_cols(), expected);
            }
        }
    }

    #[test]
    fn repaired_covariance_is_valid_correlation() {
        let laws = segment_laws(Scenario::Cic, Variant::High, 3);
        let c = &laws[1].cov;
        assert!(c.clone().cholesky().is_some());
        for i in 0..8 {
            assert!((c[(i, i)] - 1.0).abs() < 1e-12);
        }
        assert!(c[(0, 2)] > 0.6 && c[(1, 2)] > 0.6);
        // already valid matrices pass through
        let ok = correlation(4, &[(1, 2, 0.8)]);
        assert_eq!(repair_correlation(&ok, 1e-2), ok);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = ScenarioSpec::new(Scenario::Cimc, Variant::High, 5);
        let a = generate(&spec, &mut stream(5, 0)).unwrap().0;
        let b = generate(&spec, &mut stream(5, 0)).unwrap().0;
        assert_eq!(a, b);
    }
}
