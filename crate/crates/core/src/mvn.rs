//! Gaussian draws for the coefficient full conditionals, parameterized by
//! precision `P` and linear term `b`: the target is `N(P^-1 b, P^-1)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussianPosteriorSpec {
    pub precision: DMatrix<f64>,
    pub linear_term: DVector<f64>,
}

impl GaussianPosteriorSpec {
    pub fn new(precision: DMatrix<f64>, linear_term: DVector<f64>) -> Result<Self> {
        let p = precision.nrows();
        if precision.ncols() != p || linear_term.len() != p {
            return Err(Error::InvalidParameter(format!(
                "precision is {}x{}, linear term has length {}",
                precision.nrows(),
                precision.ncols(),
                linear_term.len()
            )));
        }
        let asym = (&precision - precision.transpose()).amax();
        if asym >= 1e-10 * (1.0 + precision.amax()) {
            return Err(Error::InvalidParameter(format!(
                "precision is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(GaussianPosteriorSpec {
            precision,
            linear_term,
        })
    }

    pub fn dim(&self) -> usize {
        self.linear_term.len()
    }

    /// `P^-1 b` via Cholesky.
    pub fn mean(&self) -> Result<DVector<f64>> {
        Ok(factor(&self.precision)?.solve(&self.linear_term))
    }
}

/// Cholesky factor with one jitter retry of `1e-10 * trace / p` on the diagonal.
pub(crate) fn factor(precision: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(ch) = precision.clone().cholesky() {
        return Ok(ch);
    }
    let p = precision.nrows();
    let trace = precision.trace();
    let jitter = 1e-10 * trace / p as f64;
    let mut jittered = precision.clone();
    for d in 0..p {
        jittered[(d, d)] += jitter;
    }
    jittered.cholesky().ok_or_else(|| {
        let diag = precision.diagonal();
        Error::Numerical(format!(
            "precision matrix ({p}x{p}) is not positive definite: trace {trace:e}, diagonal range [{:e}, {:e}], diagonal ratio {:e}",
            diag.min(),
            diag.max(),
            diag.max() / diag.min()
        ))
    })
}

fn standard_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Draws from `N(P^-1 b, P^-1)`: with `P = L L^T`, returns `P^-1 b + L^-T z`.
pub fn draw_gaussian<R: Rng + ?Sized>(spec: &GaussianPosteriorSpec, rng: &mut R) -> Result<DVector<f64>> {
    let ch = factor(&spec.precision)?;
    let mean = ch.solve(&spec.linear_term);
    let z = standard_normals(spec.dim(), rng);
    let noise = ch
        .l()
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    Ok(mean + noise)
}

/// Draws from the same law as [`draw_gaussian`] for precision
/// `X^T diag(omega) X + diag(prior_var)^-1` and linear term `X^T rhs`, working
/// with an `n x n` system instead of `p x p`. Worth it when `p > n`.
///
/// `x` is row-major `n x p`.
pub fn draw_gaussian_fast<R: Rng + ?Sized>(
    x: &[f64],
    n: usize,
    p: usize,
    omega: &[f64],
    rhs: &[f64],
    prior_var: &[f64],
    rng: &mut R,
) -> Result<DVector<f64>> {
    if x.len() != n * p || omega.len() != n || rhs.len() != n || prior_var.len() != p {
        return Err(Error::InvalidParameter("dimension mismatch in fast Gaussian draw".into()));
    }
    if let Some(w) = omega.iter().find(|w| !(**w > 0.0)) {
        return Err(Error::InvalidParameter(format!("weights must be positive, got {w}")));
    }
    if let Some(v) = prior_var.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("prior variances must be positive, got {v}")));
    }
    let sqrt_w: Vec<f64> = omega.iter().map(|w| w.sqrt()).collect();
    // phi = diag(sqrt w) X
    let phi = DMatrix::from_fn(n, p, |i, d| sqrt_w[i] * x[i * p + d]);
    let alpha = DVector::from_iterator(n, rhs.iter().zip(&sqrt_w).map(|(r, s)| r / s));
    let d = DVector::from_column_slice(prior_var);

    let u = standard_normals(p, rng).component_mul(&d.map(f64::sqrt));
    let delta = standard_normals(n, rng);
    let v = &phi * &u + delta;
    let phi_d = DMatrix::from_fn(n, p, |i, k| phi[(i, k)] * d[k]);
    let mut system = &phi_d * phi.transpose();
    for i in 0..n {
        system[(i, i)] += 1.0;
    }
    let w = factor(&system)?.solve(&(alpha - v));
    Ok(u + phi_d.transpose() * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn sample_moments(draws: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let s = draws.len() as f64;
        let p = draws[0].len();
        let mean = draws.iter().fold(DVector::zeros(p), |acc, d| acc + d) / s;
        let cov = draws.iter().fold(DMatrix::zeros(p, p), |acc, d| {
            let c = d - &mean;
            acc + &c * c.transpose()
        }) / (s - 1.0);
        (mean, cov)
    }

    #[test]
    fn identity_precision_gives_standard_normal() {
        let spec = GaussianPosteriorSpec::new(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        let mut rng = stream(1, 0);
        let n = 100_000;
        let draws: Vec<_> = (0..n).map(|_| draw_gaussian(&spec, &mut rng).unwrap()).collect();
        let (mean, cov) = sample_moments(&draws);
        for d in 0..3 {
            assert!(mean[d].abs() < 4.0 / (n as f64).sqrt());
            assert!((cov[(d, d)] - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
        }
    }

    #[test]
    fn scalar_precision_moments() {
        // V = 1/4, m = V * 8 = 2
        let spec = GaussianPosteriorSpec::new(DMatrix::from_element(1, 1, 4.0), DVector::from_element(1, 8.0)).unwrap();
        let mut rng = stream(2, 0);
        let n = 100_000;
        let draws: Vec<_> = (0..n).map(|_| draw_gaussian(&spec, &mut rng).unwrap()).collect();
        let (mean, cov) = sample_moments(&draws);
        assert!((mean[0] - 2.0).abs() < 4.0 * (0.25 / n as f64).sqrt());
        assert!((cov[(0, 0)] - 0.25).abs() < 4.0 * 0.25 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn two_by_two_mean_solves_system() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let spec = GaussianPosteriorSpec::new(p, DVector::from_vec(vec![1.0, 1.0])).unwrap();
        let m = spec.mean().unwrap();
        assert!((m[0] - 1.0 / 3.0).abs() < 1e-14 && (m[1] - 1.0 / 3.0).abs() < 1e-14);

        let mut rng = stream(3, 0);
        let n = 50_000;
        let draws: Vec<_> = (0..n).map(|_| draw_gaussian(&spec, &mut rng).unwrap()).collect();
        let (mean, _) = sample_moments(&draws);
        // V = [[2,-1],[-1,2]]/3, sd = sqrt(2/3)
        let se = (2.0 / 3.0 / n as f64).sqrt();
        assert!((mean[0] - 1.0 / 3.0).abs() < 5.0 * se);
        assert!((mean[1] - 1.0 / 3.0).abs() < 5.0 * se);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GaussianPosteriorSpec::new(asym, DVector::zeros(2)).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let spec = GaussianPosteriorSpec::new(indefinite, DVector::zeros(2)).unwrap();
        match draw_gaussian(&spec, &mut stream(0, 0)) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("not positive definite")),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    fn random_instance(n: usize, p: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = stream(seed, 0);
        let x: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let omega: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.5)).collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let var: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..2.0)).collect();
        (x, omega, rhs, var)
    }

    fn direct_spec(x: &[f64], n: usize, p: usize, omega: &[f64], rhs: &[f64], var: &[f64]) -> GaussianPosteriorSpec {
        let xm = DMatrix::from_row_slice(n, p, x);
        let mut prec = xm.transpose() * DMatrix::from_diagonal(&DVector::from_column_slice(omega)) * &xm;
        for d in 0..p {
            prec[(d, d)] += 1.0 / var[d];
        }
        let prec = (&prec + prec.transpose()) * 0.5;
        GaussianPosteriorSpec::new(prec, xm.transpose() * DVector::from_column_slice(rhs)).unwrap()
    }

    #[test]
    fn fast_path_matches_direct_path() {
        let (n, p) = (20, 30);
        let (x, omega, rhs, var) = random_instance(n, p, 11);
        let spec = direct_spec(&x, n, p, &omega, &rhs, &var);
        let s = 10_000;
        let mut r1 = stream(12, 0);
        let mut r2 = stream(13, 0);
        let fast: Vec<_> = (0..s)
            .map(|_| draw_gaussian_fast(&x, n, p, &omega, &rhs, &var, &mut r1).unwrap())
            .collect();
        let direct: Vec<_> = (0..s).map(|_| draw_gaussian(&spec, &mut r2).unwrap()).collect();
        let (mf, cf) = sample_moments(&fast);
        let (md, cd) = sample_moments(&direct);
        for d in 0..p {
            let sd = cd[(d, d)].sqrt();
            let se_mean = sd * (2.0 / s as f64).sqrt();
            assert!((mf[d] - md[d]).abs() < 4.0 * se_mean, "mean dim {d}");
            let se_var = cd[(d, d)] * (4.0 / s as f64).sqrt();
            assert!((cf[(d, d)] - cd[(d, d)]).abs() < 4.0 * se_var, "var dim {d}");
        }
    }

    #[test]
    fn fast_path_scalar_case() {
        // one observation, one coefficient: precision w x^2 + 1/v, mean x r / precision
        let (x, w, r, v) = (1.5, 0.4, 0.3, 2.0);
        let prec = w * x * x + 1.0 / v;
        let s = 100_000;
        let mut rng = stream(21, 0);
        let draws: Vec<f64> = (0..s)
            .map(|_| draw_gaussian_fast(&[x], 1, 1, &[w], &[r], &[v], &mut rng).unwrap()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / s as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
        assert!((mean - x * r / prec).abs() < 4.0 * (1.0 / prec / s as f64).sqrt());
        assert!((var - 1.0 / prec).abs() < 4.0 / prec * (2.0 / s as f64).sqrt());
    }

    #[test]
    fn fast_path_flat_prior_approaches_weighted_least_squares() {
        let (n, p) = (12, 3);
        let (x, omega, rhs, _) = random_instance(n, p, 31);
        let var = vec![1e8; p];
        let xm = DMatrix::from_row_slice(n, p, &x);
        let wls = (xm.transpose() * DMatrix::from_diagonal(&DVector::from_column_slice(&omega)) * &xm)
            .cholesky()
            .unwrap()
            .solve(&(xm.transpose() * DVector::from_column_slice(&rhs)));
        let s = 20_000;
        let mut rng = stream(32, 0);
        let mean = (0..s)
            .map(|_| draw_gaussian_fast(&x, n, p, &omega, &rhs, &var, &mut rng).unwrap())
            .fold(DVector::zeros(p), |a, d| a + d)
            / s as f64;
        let spec = direct_spec(&x, n, p, &omega, &rhs, &var);
        let exact = spec.mean().unwrap();
        assert!((&exact - &wls).amax() < 1e-3, "limit identity");
        let ch = spec.precision.clone().cholesky().unwrap().inverse();
        for d in 0..p {
            assert!((mean[d] - wls[d]).abs() < 4.0 * (ch[(d, d)] / s as f64).sqrt() + 1e-3);
        }
    }

    #[test]
    fn fast_path_rejects_nonpositive_weights() {
        let mut rng = stream(0, 0);
        assert!(draw_gaussian_fast(&[1.0], 1, 1, &[0.0], &[0.0], &[1.0], &mut rng).is_err());
        assert!(draw_gaussian_fast(&[1.0], 1, 1, &[1.0], &[0.0], &[-1.0], &mut rng).is_err());
    }
}
