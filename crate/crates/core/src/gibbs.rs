//! Pólya-Gamma augmented Gibbs samplers.
//!
//! One sweep updates every changepoint in increasing order from its discrete
//! full conditional, then for each free class `j` draws the augmentation
//! variables `omega_j` given the current coefficients and immediately redraws
//! `beta_j`, then (with a horseshoe prior) the shrinkage scales. Every sweep can
//! be run against the tempered target `exp(-t * loss) * prior`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::{labels_for, ChangepointVector, SeriesMatrix};
use crate::error::{Error, Result};
use crate::model::{
    self, bclr_kappa_log_prior, c_from_logits, dot, log_sum_exp, softplus, CoefficientSet, GaussianBlock,
    HorseshoeState, KappaPrior, PriorSpec,
};
use crate::mvn::{draw_gaussian, draw_gaussian_fast, GaussianPosteriorSpec};
use crate::pg::{draw_pg, PgParams};
use crate::rng::{stream, RngStream};

/// Smallest value any sampled scale may take.
pub const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// `round(l N / (L + 1))`, repaired to satisfy the segment-length minimum.
    #[default]
    Even,
    /// User-supplied changepoints, projected onto the feasible set.
    Kappa(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct GibbsConfig {
    pub iters: usize,
    pub burn_in: usize,
    pub min_seg: usize,
    pub init: Init,
    pub prior: PriorSpec,
    pub kappa_prior: KappaPrior,
    pub seed: u64,
    pub thin: usize,
    /// When false the changepoints stay at their initial values and the chain
    /// is plain augmented multinomial logistic regression.
    pub update_kappa: bool,
}

impl GibbsConfig {
    /// Defaults: burn-in `iters / 2`, minimum segment 1, even start,
    /// `N(0, 3I)` prior, no thinning.
    pub fn new(iters: usize) -> Self {
        GibbsConfig {
            iters,
            burn_in: iters / 2,
            min_seg: 1,
            init: Init::Even,
            prior: PriorSpec::default(),
            kappa_prior: KappaPrior::SegmentLength,
            seed: 0,
            thin: 1,
            update_kappa: true,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_min_seg(mut self, min_seg: usize) -> Self {
        self.min_seg = min_seg;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_prior(mut self, prior: PriorSpec) -> Self {
        self.prior = prior;
        self
    }

    pub fn with_kappa_prior(mut self, kappa_prior: KappaPrior) -> Self {
        self.kappa_prior = kappa_prior;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_thin(mut self, thin: usize) -> Self {
        self.thin = thin;
        self
    }

    pub fn fixed_kappa(mut self, kappas: Vec<usize>) -> Self {
        self.init = Init::Kappa(kappas);
        self.update_kappa = false;
        self
    }

    /// Number of stored draws, `floor((T - T0) / thin)`.
    pub fn n_stored(&self) -> usize {
        (self.iters - self.burn_in) / self.thin
    }

    pub fn validate(&self, n: usize, n_changepoints: usize) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::InvalidParameter("iterations must be positive".into()));
        }
        if self.burn_in >= self.iters {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.iters
            )));
        }
        if self.min_seg == 0 {
            return Err(Error::InvalidParameter("minimum segment length must be >= 1".into()));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thinning interval must be >= 1".into()));
        }
        if n < (n_changepoints + 1) * self.min_seg {
            return Err(Error::Infeasible(format!(
                "{n_changepoints} changepoints with minimum segment length {} need N >= {}, got N = {n}",
                self.min_seg,
                (n_changepoints + 1) * self.min_seg
            )));
        }
        if let Init::Kappa(k) = &self.init {
            if k.len() != n_changepoints {
                return Err(Error::InvalidParameter(format!(
                    "initial changepoints have length {} but {n_changepoints} were requested",
                    k.len()
                )));
            }
        }
        Ok(())
    }
}

/// Which class carries the free coefficients in a stored draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Multiple-changepoint convention: the last segment is pinned at zero.
    Last,
    /// Single-changepoint logistic convention: the first segment is the
    /// baseline and the stored vector scores the post-change segment.
    First,
}

/// Horseshoe scales recorded at every stored iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeTrace {
    pub tau2: Vec<f64>,
    pub xi: Vec<f64>,
    /// `S x (J-1) x p`, row-major.
    pub lambda2: Vec<f64>,
}

/// Stored draws: changepoints `S x L`, free coefficients `S x (J-1) x p`
/// (class-major), the loss at each stored iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub n: usize,
    pub p: usize,
    pub n_changepoints: usize,
    pub min_seg: usize,
    pub reference: Reference,
    pub iterations: Vec<usize>,
    pub kappa: Vec<usize>,
    pub beta: Vec<f64>,
    pub loss: Vec<f64>,
    pub horseshoe: Option<HorseshoeTrace>,
}

impl PosteriorDraws {
    pub(crate) fn empty(n: usize, p: usize, n_changepoints: usize, min_seg: usize, horseshoe: bool) -> Self {
        PosteriorDraws {
            n,
            p,
            n_changepoints,
            min_seg,
            reference: Reference::Last,
            iterations: Vec::new(),
            kappa: Vec::new(),
            beta: Vec::new(),
            loss: Vec::new(),
            horseshoe: horseshoe.then(HorseshoeTrace::default),
        }
    }

    pub fn n_draws(&self) -> usize {
        self.loss.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_changepoints + 1
    }

    pub fn kappa_draw(&self, s: usize) -> &[usize] {
        let l = self.n_changepoints;
        &self.kappa[s * l..(s + 1) * l]
    }

    /// Free coefficients of draw `s` as stored.
    pub fn beta_draw(&self, s: usize) -> &[f64] {
        let w = self.n_changepoints * self.p;
        &self.beta[s * w..(s + 1) * w]
    }

    /// Coefficients of draw `s` in the multiple-changepoint convention (last
    /// class zero). Draws stored with the first class as baseline are shifted,
    /// which leaves every class probability unchanged.
    pub fn coefficient_set(&self, s: usize) -> CoefficientSet {
        let j = self.n_classes();
        match self.reference {
            Reference::Last => CoefficientSet::from_free_flat(self.beta_draw(s), j, self.p),
            Reference::First => {
                let neg: Vec<f64> = self.beta_draw(s).iter().map(|v| -v).collect();
                CoefficientSet::from_free_flat(&neg, j, self.p)
            }
        }
    }

    pub fn changepoints(&self, s: usize) -> ChangepointVector {
        ChangepointVector::new(self.kappa_draw(s).to_vec(), self.n, self.min_seg)
            .expect("stored draws satisfy the segment constraints")
    }

    /// All draws of changepoint `l`.
    pub fn kappa_column(&self, l: usize) -> Vec<usize> {
        (0..self.n_draws()).map(|s| self.kappa_draw(s)[l]).collect()
    }

    pub(crate) fn push_state(&mut self, iter: usize, state: &ChainState) {
        self.iterations.push(iter);
        self.kappa.extend_from_slice(state.kappa.kappas());
        self.beta.extend_from_slice(state.betas.free());
        self.loss.push(state.loss);
        if let (Some(trace), Some(hs)) = (self.horseshoe.as_mut(), state.horseshoe.as_ref()) {
            trace.tau2.push(hs.tau2);
            trace.xi.push(hs.xi);
            trace.lambda2.extend_from_slice(&hs.lambda2);
        }
    }
}

/// Full state of one chain. The augmentation variables are redrawn from
/// scratch every sweep and so are not carried.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub kappa: ChangepointVector,
    pub betas: CoefficientSet,
    pub horseshoe: Option<HorseshoeState>,
    /// Untempered loss on the fitted rows at the current state.
    pub loss: f64,
}

/// Discrete full conditional of one changepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaConditional {
    pub support: Range<usize>,
    pub probs: Vec<f64>,
}

impl KappaConditional {
    pub fn prob(&self, k: usize) -> f64 {
        if self.support.contains(&k) {
            self.probs[k - self.support.start]
        } else {
            0.0
        }
    }
}

/// Admissible values for changepoint `l` given its neighbors.
fn kappa_support(l: usize, kappas: &[usize], n: usize, min_seg: usize) -> Result<(usize, usize, Range<usize>)> {
    let prev = if l == 0 { 0 } else { kappas[l - 1] };
    let next = kappas.get(l + 1).copied().unwrap_or(n);
    let lo = prev + min_seg;
    if next < lo + min_seg {
        return Err(Error::Infeasible(format!(
            "no admissible value for changepoint {} between {prev} and {next} with minimum segment {min_seg}",
            l + 1
        )));
    }
    Ok((prev, next, lo..next - min_seg + 1))
}

/// Unnormalized log weights over the support, from log class probabilities
/// `log_q` (row-major `N x J`); rows with `active[r] == false` are skipped.
#[allow(clippy::too_many_arguments)]
fn kappa_log_weights(
    l: usize,
    kappas: &[usize],
    n: usize,
    n_classes: usize,
    log_q: &[f64],
    active: Option<&[bool]>,
    min_seg: usize,
    kappa_prior: KappaPrior,
    power: f64,
) -> Result<(Range<usize>, Vec<f64>)> {
    let (prev, next, support) = kappa_support(l, kappas, n, min_seg)?;
    let is_active = |r: usize| active.is_none_or(|a| a[r]);
    // lik(k) = sum_{prev <= r < k} log q_{r,l} + sum_{k <= r < next} log q_{r,l+1}
    let mut left = 0.0;
    for r in prev..support.start {
        if is_active(r) {
            left += log_q[r * n_classes + l];
        }
    }
    let mut right = 0.0;
    for r in support.start..next {
        if is_active(r) {
            right += log_q[r * n_classes + l + 1];
        }
    }
    let mut weights = Vec::with_capacity(support.len());
    for k in support.clone() {
        if k > support.start {
            let r = k - 1;
            if is_active(r) {
                left += log_q[r * n_classes + l];
                right -= log_q[r * n_classes + l + 1];
            }
        }
        let prior = kappa_prior.segment_term(k - prev) + kappa_prior.segment_term(next - k);
        weights.push(power * (left + right) + prior);
    }
    Ok((support, weights))
}

fn normalize_log_weights(weights: &mut [f64]) {
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn log_q_matrix(x: &SeriesMatrix, betas: &CoefficientSet) -> Vec<f64> {
    let j = betas.n_classes();
    let mut out = vec![0.0; x.n_rows() * j];
    for (r, chunk) in out.chunks_mut(j).enumerate() {
        model::log_class_probs_into(x.row(r), betas, chunk);
    }
    out
}

/// Full conditional of changepoint `l` (zero-based) under the segment-length
/// prior.
pub fn kappa_full_conditional(
    l: usize,
    kappa: &ChangepointVector,
    betas: &CoefficientSet,
    x: &SeriesMatrix,
    min_seg: usize,
) -> Result<KappaConditional> {
    kappa_conditional(l, kappa, betas, x, min_seg, KappaPrior::SegmentLength, 1.0, None)
}

/// Full conditional of changepoint `l` with an explicit prior, likelihood
/// power `power` and optional mask of fitted rows.
#[allow(clippy::too_many_arguments)]
pub fn kappa_conditional(
    l: usize,
    kappa: &ChangepointVector,
    betas: &CoefficientSet,
    x: &SeriesMatrix,
    min_seg: usize,
    kappa_prior: KappaPrior,
    power: f64,
    active: Option<&[bool]>,
) -> Result<KappaConditional> {
    if l >= kappa.len() {
        return Err(Error::InvalidParameter(format!("changepoint index {l} out of range")));
    }
    if betas.n_classes() != kappa.n_segments() || betas.dim() != x.n_cols() || kappa.n() != x.n_rows() {
        return Err(Error::InvalidInput("changepoints, coefficients and data disagree in shape".into()));
    }
    let log_q = log_q_matrix(x, betas);
    let (support, mut probs) = kappa_log_weights(
        l,
        kappa.kappas(),
        x.n_rows(),
        betas.n_classes(),
        &log_q,
        active,
        min_seg,
        kappa_prior,
        power,
    )?;
    normalize_log_weights(&mut probs);
    Ok(KappaConditional { support, probs })
}

/// `IG(shape, scale)` drawn as `scale / Gamma(shape, 1)`, floored at
/// [`SCALE_FLOOR`].
pub fn inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    let v = scale / g;
    if v.is_finite() && v > SCALE_FLOOR {
        v
    } else if v.is_finite() || v.is_nan() {
        SCALE_FLOOR
    } else {
        f64::MAX
    }
}

/// Shape of the global-scale full conditional: `(n_free * p + 1) / 2`.
pub fn tau2_shape(n_free: usize, p: usize) -> f64 {
    (n_free * p + 1) as f64 / 2.0
}

/// One pass over the horseshoe scales given the free coefficients
/// (`n_free x p`, row-major).
pub fn update_horseshoe<R: Rng + ?Sized>(hs: &mut HorseshoeState, free: &[f64], p: usize, rng: &mut R) {
    let n_free = free.len() / p;
    for (idx, &b) in free.iter().enumerate() {
        let lambda2 = inverse_gamma(1.0, 1.0 / hs.nu[idx] + b * b / (2.0 * hs.tau2), rng);
        hs.lambda2[idx] = lambda2;
        hs.nu[idx] = inverse_gamma(1.0, 1.0 + 1.0 / lambda2, rng);
    }
    let ss: f64 = free.iter().zip(&hs.lambda2).map(|(b, l)| b * b / (2.0 * l)).sum();
    hs.tau2 = inverse_gamma(tau2_shape(n_free, p), 1.0 / hs.xi + ss, rng);
    hs.xi = inverse_gamma(1.0, 1.0 + 1.0 / hs.tau2, rng);
}

/// Coefficient prior resolved against the data dimension.
#[derive(Debug, Clone)]
enum Resolved {
    Isotropic(f64),
    Full(Vec<GaussianBlock>),
    Horseshoe,
}

enum BlockPrior<'a> {
    Diagonal(Vec<f64>),
    Full(&'a GaussianBlock),
}

/// Draws one coefficient vector from its augmented full conditional:
/// precision `X^T diag(omega) X + prior precision`, linear term
/// `X^T rhs + prior precision * prior mean`. `xa` holds the fitted rows.
fn draw_block<R: Rng + ?Sized>(
    xa: &[f64],
    n: usize,
    p: usize,
    omega: &[f64],
    rhs: &[f64],
    prior: BlockPrior<'_>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if let BlockPrior::Diagonal(var) = &prior {
        if p > n {
            return draw_gaussian_fast(xa, n, p, omega, rhs, var, rng);
        }
    }
    let mut prec = DMatrix::<f64>::zeros(p, p);
    let mut lin = DVector::<f64>::zeros(p);
    for r in 0..n {
        let row = &xa[r * p..(r + 1) * p];
        let w = omega[r];
        for a in 0..p {
            let wa = w * row[a];
            lin[a] += row[a] * rhs[r];
            for b in a..p {
                prec[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in a + 1..p {
            prec[(b, a)] = prec[(a, b)];
        }
    }
    match prior {
        BlockPrior::Diagonal(var) => {
            for d in 0..p {
                prec[(d, d)] += 1.0 / var[d];
            }
        }
        BlockPrior::Full(block) => {
            prec += &block.precision;
            lin += &block.precision_mean;
        }
    }
    let spec = GaussianPosteriorSpec::new(prec, lin)?;
    draw_gaussian(&spec, rng)
}

/// The multiple-changepoint sampler bound to a data set. Rows outside the
/// fitted set keep their time positions but never enter the loss.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    x: &'a SeriesMatrix,
    n_changepoints: usize,
    active: Option<Vec<bool>>,
    rows: Vec<usize>,
    xa: Vec<f64>,
    prior: Resolved,
    config: GibbsConfig,
}

impl<'a> Sampler<'a> {
    pub fn new(x: &'a SeriesMatrix, n_changepoints: usize, config: &GibbsConfig) -> Result<Self> {
        Sampler::build(x, n_changepoints, config, None)
    }

    /// Fits on the rows flagged `true` only.
    pub fn with_rows(x: &'a SeriesMatrix, n_changepoints: usize, config: &GibbsConfig, active: &[bool]) -> Result<Self> {
        if active.len() != x.n_rows() {
            return Err(Error::InvalidInput(format!(
                "row mask has length {} for {} rows",
                active.len(),
                x.n_rows()
            )));
        }
        Sampler::build(x, n_changepoints, config, Some(active.to_vec()))
    }

    fn build(x: &'a SeriesMatrix, n_changepoints: usize, config: &GibbsConfig, active: Option<Vec<bool>>) -> Result<Self> {
        config.validate(x.n_rows(), n_changepoints)?;
        let p = x.n_cols();
        config.prior.validate(p, n_changepoints)?;
        let prior = match &config.prior {
            PriorSpec::IsotropicGaussian { variance } => Resolved::Isotropic(*variance),
            PriorSpec::Gaussian(g) => Resolved::Full((0..n_changepoints.max(1)).map(|j| g.block(j).clone()).collect()),
            PriorSpec::Horseshoe => Resolved::Horseshoe,
        };
        let rows: Vec<usize> = match &active {
            Some(mask) => (0..x.n_rows()).filter(|&r| mask[r]).collect(),
            None => (0..x.n_rows()).collect(),
        };
        if rows.is_empty() {
            return Err(Error::InvalidInput("no rows left to fit".into()));
        }
        let mut xa = Vec::with_capacity(rows.len() * p);
        for &r in &rows {
            xa.extend_from_slice(x.row(r));
        }
        Ok(Sampler {
            x,
            n_changepoints,
            active,
            rows,
            xa,
            prior,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &GibbsConfig {
        &self.config
    }

    pub fn data(&self) -> &SeriesMatrix {
        self.x
    }

    pub fn fitted_rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn initial_state(&self) -> Result<ChainState> {
        let n = self.x.n_rows();
        let kappa = match &self.config.init {
            Init::Even => ChangepointVector::even(n, self.n_changepoints, self.config.min_seg)?,
            Init::Kappa(k) => ChangepointVector::project(k.clone(), n, self.config.min_seg)?,
        };
        let j = self.n_changepoints + 1;
        let p = self.x.n_cols();
        let betas = CoefficientSet::zeros(j, p);
        let horseshoe = matches!(self.prior, Resolved::Horseshoe).then(|| HorseshoeState::initial(j - 1, p));
        let loss = self.loss(&kappa, &betas);
        Ok(ChainState {
            kappa,
            betas,
            horseshoe,
            loss,
        })
    }

    /// Untempered loss on the fitted rows.
    pub fn loss(&self, kappa: &ChangepointVector, betas: &CoefficientSet) -> f64 {
        model::loss_on_rows(kappa, betas, self.x, Some(&self.rows))
    }

    /// One sweep against the target with likelihood power `power`.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut ChainState, power: f64, rng: &mut R) -> Result<()> {
        let n_classes = self.n_changepoints + 1;
        let p = self.x.n_cols();
        let n = self.x.n_rows();
        if n_classes == 1 {
            return Ok(());
        }

        if self.config.update_kappa {
            let log_q = log_q_matrix(self.x, &state.betas);
            for l in 0..self.n_changepoints {
                let (support, mut w) = kappa_log_weights(
                    l,
                    state.kappa.kappas(),
                    n,
                    n_classes,
                    &log_q,
                    self.active.as_deref(),
                    self.config.min_seg,
                    self.config.kappa_prior,
                    power,
                )?;
                normalize_log_weights(&mut w);
                let k = support.start + sample_index(&w, rng);
                state.kappa.set(l, k);
            }
        }

        let labels = labels_for(state.kappa.kappas(), n);
        let na = self.rows.len();
        let mut z = vec![0.0; na * n_classes];
        for (i, chunk) in z.chunks_mut(n_classes).enumerate() {
            model::logits(&self.xa[i * p..(i + 1) * p], &state.betas, chunk);
        }
        let mut omega = vec![0.0; na];
        let mut rhs = vec![0.0; na];
        for j in 0..n_classes - 1 {
            for i in 0..na {
                let zi = &z[i * n_classes..(i + 1) * n_classes];
                let c = c_from_logits(zi, j);
                let eta = zi[j] - c;
                let w = draw_pg(PgParams { b: power, c: eta }, rng);
                let y = if labels[self.rows[i]] == j { 1.0 } else { 0.0 };
                omega[i] = w;
                rhs[i] = w * c + power * (y - 0.5);
            }
            let prior = match &self.prior {
                Resolved::Isotropic(v) => BlockPrior::Diagonal(vec![*v; p]),
                Resolved::Full(blocks) => BlockPrior::Full(if blocks.len() == 1 { &blocks[0] } else { &blocks[j] }),
                Resolved::Horseshoe => {
                    BlockPrior::Diagonal(state.horseshoe.as_ref().expect("horseshoe state").prior_variances(j, p))
                }
            };
            let beta = draw_block(&self.xa, na, p, &omega, &rhs, prior, rng)?;
            state.betas.beta_mut(j).copy_from_slice(beta.as_slice());
            let bj = state.betas.beta(j);
            for i in 0..na {
                z[i * n_classes + j] = dot(&self.xa[i * p..(i + 1) * p], bj);
            }
        }
        if let Some(hs) = state.horseshoe.as_mut() {
            update_horseshoe(hs, state.betas.free(), p, rng);
        }

        let mut loss = 0.0;
        for i in 0..na {
            let zi = &z[i * n_classes..(i + 1) * n_classes];
            loss += log_sum_exp(zi.iter().copied()) - zi[labels[self.rows[i]]];
        }
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("loss became non-finite ({loss})")));
        }
        state.loss = loss;
        Ok(())
    }

    pub(crate) fn empty_draws(&self) -> PosteriorDraws {
        PosteriorDraws::empty(
            self.x.n_rows(),
            self.x.n_cols(),
            self.n_changepoints,
            self.config.min_seg,
            matches!(self.prior, Resolved::Horseshoe),
        )
    }

    /// Whether iteration `iter` (1-based) is kept.
    pub(crate) fn keeps(&self, iter: usize) -> bool {
        iter > self.config.burn_in && (iter - self.config.burn_in) % self.config.thin == 0
    }

    /// Runs the full chain from the configured start on stream 0.
    pub fn run(&self) -> Result<PosteriorDraws> {
        let mut rng = stream(self.config.seed, 0);
        self.run_with(&mut rng)
    }

    pub fn run_with(&self, rng: &mut RngStream) -> Result<PosteriorDraws> {
        let mut state = self.initial_state()?;
        let mut draws = self.empty_draws();
        for iter in 1..=self.config.iters {
            self.sweep(&mut state, 1.0, rng)?;
            if self.keeps(iter) {
                draws.push_state(iter, &state);
            }
        }
        Ok(draws)
    }
}

/// Samples `n_changepoints` changepoints and the coefficients.
pub fn run_chain(x: &SeriesMatrix, n_changepoints: usize, config: &GibbsConfig) -> Result<PosteriorDraws> {
    Sampler::new(x, n_changepoints, config)?.run()
}

/// As [`run_chain`], fitting only the rows flagged in `active`.
pub fn run_chain_on_rows(
    x: &SeriesMatrix,
    n_changepoints: usize,
    config: &GibbsConfig,
    active: &[bool],
) -> Result<PosteriorDraws> {
    Sampler::with_rows(x, n_changepoints, config, active)?.run()
}

/// Single-changepoint logistic sampler: rows before the changepoint are
/// labelled 0, rows after it 1, and the stored coefficients give
/// `P(y = 1 | x) = logistic(x^T beta)`.
pub fn run_bclr(x: &SeriesMatrix, config: &GibbsConfig) -> Result<PosteriorDraws> {
    config.validate(x.n_rows(), 1)?;
    let n = x.n_rows();
    let p = x.n_cols();
    config.prior.validate(p, 1)?;
    let m = config.min_seg;
    let mut rng = stream(config.seed, 0);

    let mut kappa = match &config.init {
        Init::Even => ChangepointVector::even(n, 1, m)?,
        Init::Kappa(k) => ChangepointVector::project(k.clone(), n, m)?,
    }
    .kappas()[0];
    let mut beta = vec![0.0; p];
    let mut hs = config.prior.is_horseshoe().then(|| HorseshoeState::initial(1, p));
    let full_block = match &config.prior {
        PriorSpec::Gaussian(g) => Some(g.block(0).clone()),
        _ => None,
    };
    let mut draws = PosteriorDraws::empty(n, p, 1, m, hs.is_some());
    draws.reference = Reference::First;

    let mut z = vec![0.0; n];
    let mut omega = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut weights = Vec::with_capacity(n);
    for iter in 1..=config.iters {
        for (r, zr) in z.iter_mut().enumerate() {
            *zr = dot(x.row(r), &beta);
        }
        if config.update_kappa {
            // log P(y=0) = -softplus(z), log P(y=1) = z - softplus(z)
            weights.clear();
            let mut acc: f64 = (0..n).map(|r| z[r] - softplus(z[r])).sum();
            for r in 0..m {
                acc += -softplus(z[r]) - (z[r] - softplus(z[r]));
            }
            for k in m..=n - m {
                if k > m {
                    let r = k - 1;
                    acc -= z[r];
                }
                let prior = match config.kappa_prior {
                    KappaPrior::SegmentLength => bclr_kappa_log_prior(k, n)?,
                    KappaPrior::Uniform => 0.0,
                };
                weights.push(acc + prior);
            }
            normalize_log_weights(&mut weights);
            kappa = m + sample_index(&weights, &mut rng);
        }
        for r in 0..n {
            let w = draw_pg(PgParams { b: 1.0, c: z[r] }, &mut rng);
            let y = if r >= kappa { 1.0 } else { 0.0 };
            omega[r] = w;
            rhs[r] = y - 0.5;
        }
        let prior = match (&config.prior, &hs, &full_block) {
            (PriorSpec::IsotropicGaussian { variance }, _, _) => BlockPrior::Diagonal(vec![*variance; p]),
            (_, _, Some(block)) => BlockPrior::Full(block),
            (_, Some(h), _) => BlockPrior::Diagonal(h.prior_variances(0, p)),
            _ => unreachable!("prior resolved above"),
        };
        let b = draw_block(x.as_slice(), n, p, &omega, &rhs, prior, &mut rng)?;
        beta.copy_from_slice(b.as_slice());
        if let Some(h) = hs.as_mut() {
            update_horseshoe(h, &beta, p, &mut rng);
        }
        if draws_keep(config, iter) {
            let loss: f64 = (0..n)
                .map(|r| {
                    let e = dot(x.row(r), &beta);
                    let y = if r >= kappa { 1.0 } else { 0.0 };
                    softplus(e) - y * e
                })
                .sum();
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("loss became non-finite ({loss})")));
            }
            draws.iterations.push(iter);
            draws.kappa.push(kappa);
            draws.beta.extend_from_slice(&beta);
            draws.loss.push(loss);
            if let (Some(trace), Some(h)) = (draws.horseshoe.as_mut(), hs.as_ref()) {
                trace.tau2.push(h.tau2);
                trace.xi.push(h.xi);
                trace.lambda2.extend_from_slice(&h.lambda2);
            }
        }
    }
    Ok(draws)
}

fn draws_keep(config: &GibbsConfig, iter: usize) -> bool {
    iter > config.burn_in && (iter - config.burn_in) % config.thin == 0
}
