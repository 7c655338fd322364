//! Loss, class probabilities, linearized logits and priors.
//!
//! Classes are zero-based `0..J` with `J = L + 1`; class `J - 1` is the
//! reference class whose coefficients are pinned at zero. Everything is kept
//! in log space.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{ChangepointVector, SeriesMatrix};
use crate::error::{Error, Result};

/// Coefficients `beta_0 .. beta_{J-1}` (row-major `J x p`); the last row is
/// the reference class and is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    n_classes: usize,
    p: usize,
    values: Vec<f64>,
}

impl CoefficientSet {
    pub fn zeros(n_classes: usize, p: usize) -> Self {
        assert!(n_classes >= 1, "at least one class");
        CoefficientSet {
            n_classes,
            p,
            values: vec![0.0; n_classes * p],
        }
    }

    /// Builds from the free (non-reference) coefficient rows.
    pub fn from_free(free: &[Vec<f64>], p: usize) -> Result<Self> {
        let mut set = CoefficientSet::zeros(free.len() + 1, p);
        for (j, row) in free.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidInput(format!("coefficient row {j} has length {}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("coefficient row {j} is not finite")));
            }
            set.beta_mut(j).copy_from_slice(row);
        }
        Ok(set)
    }

    /// Builds from a flat `(J-1) x p` slice of free coefficients.
    pub fn from_free_flat(free: &[f64], n_classes: usize, p: usize) -> Self {
        let mut set = CoefficientSet::zeros(n_classes, p);
        set.values[..(n_classes - 1) * p].copy_from_slice(free);
        set
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn beta(&self, j: usize) -> &[f64] {
        &self.values[j * self.p..(j + 1) * self.p]
    }

    /// Mutable access to a free class. Panics for the reference class.
    pub fn beta_mut(&mut self, j: usize) -> &mut [f64] {
        assert!(j + 1 < self.n_classes, "reference class {j} is fixed at zero");
        &mut self.values[j * self.p..(j + 1) * self.p]
    }

    /// The free `(J-1) x p` block, row-major.
    pub fn free(&self) -> &[f64] {
        &self.values[..(self.n_classes - 1) * self.p]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear predictors `x_i^T beta_j` for every class.
pub fn logits(x_i: &[f64], betas: &CoefficientSet, out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate().take(betas.n_classes) {
        *o = dot(x_i, betas.beta(j));
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log q_ij` for every class, written into `out`.
pub fn log_class_probs_into(x_i: &[f64], betas: &CoefficientSet, out: &mut [f64]) {
    logits(x_i, betas, out);
    let lse = log_sum_exp(out.iter().copied());
    for o in out.iter_mut() {
        *o -= lse;
    }
}

pub fn log_class_probs(x_i: &[f64], betas: &CoefficientSet) -> Vec<f64> {
    let mut out = vec![0.0; betas.n_classes];
    log_class_probs_into(x_i, betas, &mut out);
    out
}

/// Softmax class probabilities `q_ij`.
pub fn class_probs(x_i: &[f64], betas: &CoefficientSet) -> Vec<f64> {
    log_class_probs(x_i, betas).into_iter().map(f64::exp).collect()
}

/// Multinomial-logistic loss `-sum_i log q_{i, class(i)}`.
pub fn loss(kappa: &ChangepointVector, betas: &CoefficientSet, x: &SeriesMatrix) -> f64 {
    loss_on_rows(kappa, betas, x, None)
}

/// Loss restricted to `rows` (all rows when `None`).
pub fn loss_on_rows(
    kappa: &ChangepointVector,
    betas: &CoefficientSet,
    x: &SeriesMatrix,
    rows: Option<&[usize]>,
) -> f64 {
    let labels = crate::data::labels_for(kappa.kappas(), x.n_rows());
    let mut buf = vec![0.0; betas.n_classes];
    let mut term = |i: usize| {
        log_class_probs_into(x.row(i), betas, &mut buf);
        -buf[labels[i]]
    };
    match rows {
        Some(rows) => rows.iter().map(|&i| term(i)).sum(),
        None => (0..x.n_rows()).map(term).sum(),
    }
}

fn require_alternatives(betas: &CoefficientSet) -> Result<()> {
    if betas.n_classes < 2 {
        return Err(Error::InvalidInput(
            "linearized logits need at least two classes".into(),
        ));
    }
    Ok(())
}

/// `c_ij = log sum_{k != j} exp(x_i^T beta_k)`.
pub fn c_offset(x_i: &[f64], betas: &CoefficientSet, j: usize) -> Result<f64> {
    require_alternatives(betas)?;
    let mut z = vec![0.0; betas.n_classes];
    logits(x_i, betas, &mut z);
    Ok(c_from_logits(&z, j))
}

pub(crate) fn c_from_logits(z: &[f64], j: usize) -> f64 {
    log_sum_exp(z.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v))
}

/// `eta_ij = x_i^T beta_j - c_ij`, the logit of `q_ij` against all other classes.
pub fn eta(x_i: &[f64], betas: &CoefficientSet, j: usize) -> Result<f64> {
    require_alternatives(betas)?;
    let mut z = vec![0.0; betas.n_classes];
    logits(x_i, betas, &mut z);
    Ok(z[j] - c_from_logits(&z, j))
}

/// `log(1 + e^v)` without overflow.
#[inline]
pub fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Binary-logistic form of the loss for one free class `j`:
/// `-sum_i [eta_ij y_ij - log(1 + e^eta_ij)]`.
///
/// As a function of `beta_j` (others held fixed) this differs from [`loss`]
/// only by a term free of `beta_j`; with two classes the two are equal. This is
/// the identity the augmented sampler relies on.
pub fn eta_form_loss(kappa: &ChangepointVector, betas: &CoefficientSet, x: &SeriesMatrix, j: usize) -> Result<f64> {
    require_alternatives(betas)?;
    let labels = crate::data::labels_for(kappa.kappas(), x.n_rows());
    let mut z = vec![0.0; betas.n_classes];
    let mut total = 0.0;
    for (i, row) in x.rows().enumerate() {
        logits(row, betas, &mut z);
        let e = z[j] - c_from_logits(&z, j);
        let y = if labels[i] == j { 1.0 } else { 0.0 };
        total -= e * y - softplus(e);
    }
    Ok(total)
}

/// Segment-length prior `prod_j (1/len_j)^len_j`, in logs and unnormalized.
pub fn kappa_log_prior(kappa: &ChangepointVector) -> f64 {
    kappa.segment_lengths().into_iter().map(|len| -segment_log_weight(len)).sum()
}

/// `len * log(len)` (zero for `len <= 1`).
#[inline]
pub(crate) fn segment_log_weight(len: usize) -> f64 {
    if len <= 1 {
        0.0
    } else {
        let l = len as f64;
        l * l.ln()
    }
}

/// Single-changepoint segment-length prior `-k log k - (n-k) log(n-k)`.
pub fn bclr_kappa_log_prior(kappa: usize, n: usize) -> Result<f64> {
    if kappa == 0 || kappa >= n {
        return Err(Error::InvalidInput(format!("changepoint {kappa} outside 1..{}", n.saturating_sub(1))));
    }
    Ok(-segment_log_weight(kappa) - segment_log_weight(n - kappa))
}

/// Prior on the changepoint locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaPrior {
    /// Favors equal segment lengths.
    #[default]
    SegmentLength,
    Uniform,
}

impl KappaPrior {
    pub(crate) fn segment_term(self, len: usize) -> f64 {
        match self {
            KappaPrior::SegmentLength => -segment_log_weight(len),
            KappaPrior::Uniform => 0.0,
        }
    }
}

/// Gaussian prior on one coefficient vector, held in precision form.
#[derive(Debug, Clone)]
pub struct GaussianBlock {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    pub precision_mean: DVector<f64>,
    log_det_precision: f64,
}

impl GaussianBlock {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        if cov.nrows() != p || cov.ncols() != p {
            return Err(Error::InvalidParameter("prior covariance has the wrong shape".into()));
        }
        let ch = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("prior covariance is not positive definite".into()))?;
        let precision = ch.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        let log_det_cov: f64 = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision_mean = &precision * &mean;
        Ok(GaussianBlock {
            mean,
            precision,
            precision_mean,
            log_det_precision: -log_det_cov,
        })
    }

    pub fn log_density(&self, beta: &[f64]) -> f64 {
        let p = beta.len() as f64;
        let diff = DVector::from_column_slice(beta) - &self.mean;
        let quad = (diff.transpose() * &self.precision * &diff)[(0, 0)];
        -0.5 * (p * (2.0 * std::f64::consts::PI).ln() - self.log_det_precision + quad)
    }
}

/// Independent Gaussian priors on the free coefficient vectors. A single block
/// is shared by every class.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    blocks: Vec<GaussianBlock>,
}

impl GaussianPrior {
    /// `N(0, variance * I)` for every class.
    pub fn isotropic(p: usize, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::InvalidParameter(format!("prior variance must be positive, got {variance}")));
        }
        Ok(GaussianPrior {
            blocks: vec![GaussianBlock::new(DVector::zeros(p), DMatrix::identity(p, p) * variance)?],
        })
    }

    pub fn shared(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Ok(GaussianPrior {
            blocks: vec![GaussianBlock::new(mean, cov)?],
        })
    }

    pub fn per_class(blocks: Vec<GaussianBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidParameter("no prior blocks".into()));
        }
        Ok(GaussianPrior { blocks })
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].mean.len()
    }

    pub fn block(&self, j: usize) -> &GaussianBlock {
        if self.blocks.len() == 1 {
            &self.blocks[0]
        } else {
            &self.blocks[j]
        }
    }

    pub(crate) fn check_classes(&self, n_free: usize) -> Result<()> {
        if self.blocks.len() != 1 && self.blocks.len() != n_free {
            return Err(Error::InvalidParameter(format!(
                "{} prior blocks for {n_free} free classes",
                self.blocks.len()
            )));
        }
        Ok(())
    }

    pub fn log_density(&self, betas: &CoefficientSet) -> f64 {
        (0..betas.n_classes() - 1).map(|j| self.block(j).log_density(betas.beta(j))).sum()
    }
}

/// Coefficient prior.
#[derive(Debug, Clone)]
pub enum PriorSpec {
    /// `N(0, variance * I)` for every free class, resolved once `p` is known.
    IsotropicGaussian { variance: f64 },
    Gaussian(GaussianPrior),
    /// Horseshoe with a global scale shared across all free classes; every
    /// hyperparameter is sampled.
    Horseshoe,
}

impl Default for PriorSpec {
    /// `N(0, 3 I)`.
    fn default() -> Self {
        PriorSpec::IsotropicGaussian { variance: 3.0 }
    }
}

impl PriorSpec {
    pub fn is_horseshoe(&self) -> bool {
        matches!(self, PriorSpec::Horseshoe)
    }

    pub(crate) fn validate(&self, p: usize, n_free: usize) -> Result<()> {
        match self {
            PriorSpec::IsotropicGaussian { variance } if !(*variance > 0.0 && variance.is_finite()) => Err(
                Error::InvalidParameter(format!("prior variance must be positive, got {variance}")),
            ),
            PriorSpec::Gaussian(g) => {
                if g.dim() != p {
                    return Err(Error::InvalidParameter(format!(
                        "prior has dimension {} but the data has {p} columns",
                        g.dim()
                    )));
                }
                g.check_classes(n_free)
            }
            _ => Ok(()),
        }
    }
}

/// Horseshoe scales in their inverse-gamma augmented form. Local quantities are
/// `(J-1) x p`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeState {
    pub lambda2: Vec<f64>,
    pub nu: Vec<f64>,
    pub tau2: f64,
    pub xi: f64,
}

impl HorseshoeState {
    pub fn initial(n_free: usize, p: usize) -> Self {
        HorseshoeState {
            lambda2: vec![1.0; n_free * p],
            nu: vec![1.0; n_free * p],
            tau2: 1.0,
            xi: 1.0,
        }
    }

    /// Prior variances `lambda_dj^2 tau^2` for class `j`.
    pub fn prior_variances(&self, j: usize, p: usize) -> Vec<f64> {
        self.lambda2[j * p..(j + 1) * p].iter().map(|l| l * self.tau2).collect()
    }

    pub fn is_valid(&self) -> bool {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        self.lambda2.iter().all(|&v| ok(v)) && self.nu.iter().all(|&v| ok(v)) && ok(self.tau2) && ok(self.xi)
    }
}
