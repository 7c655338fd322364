//! Choosing the number of changepoints from held-out discrimination.
//!
//! The chain is fit with a generous number of changepoints on every row except
//! a regular grid of held-out rows. For each stored draw and each fitted
//! changepoint, the two neighboring segments' held-out rows are scored with the
//! draw's pairwise class probability and the changepoint counts as real when
//! the lower confidence bound of the AUC clears a threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{ChangepointVector, SeriesMatrix};
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, run_chain_on_rows, GibbsConfig, PosteriorDraws};
use crate::model::{dot, CoefficientSet};
use crate::rng::{derive_seed, stream};

fn check_inputs(labels: &[bool], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidInput(format!("score {s} is not a number")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc(format!("need both classes, got {pos} positive and {neg} negative")));
    }
    Ok((pos, neg))
}

/// Midranks (1-based, ties averaged) of `values`.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Fraction of (positive, negative) pairs ordered correctly, ties counted one half.
pub fn auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check_inputs(labels, scores)?;
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (pos, neg) = (pos as f64, neg as f64);
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Two-sided AUC interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucInterval {
    pub auc: f64,
    pub lower: f64,
    pub upper: f64,
    /// Set when the variance estimate is zero and the interval collapses to the point.
    pub degenerate: bool,
}

fn normal_quantile(alpha: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - alpha / 2.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `(1 - alpha)` interval from the DeLong variance estimate.
pub fn auc_ci_delong(labels: &[bool], scores: &[f64], alpha: f64) -> Result<AucInterval> {
    check_alpha(alpha)?;
    let (pos, neg) = check_inputs(labels, scores)?;
    if pos < 2 || neg < 2 {
        return Err(Error::UndefinedAuc(format!(
            "interval needs two of each class, got {pos} positive and {neg} negative"
        )));
    }
    let pos_scores: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg_scores: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    let all = midranks(scores);
    let within_pos = midranks(&pos_scores);
    let within_neg = midranks(&neg_scores);
    let (m, n) = (pos as f64, neg as f64);
    let all_pos: Vec<f64> = all.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| *r).collect();
    let all_neg: Vec<f64> = all.iter().zip(labels).filter(|(_, &l)| !l).map(|(r, _)| *r).collect();
    // structural components
    let v10: Vec<f64> = all_pos.iter().zip(&within_pos).map(|(a, w)| (a - w) / n).collect();
    let v01: Vec<f64> = all_neg.iter().zip(&within_neg).map(|(a, w)| 1.0 - (a - w) / m).collect();
    let auc = v10.iter().sum::<f64>() / m;
    let var = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let variance = var(&v10) / m + var(&v01) / n;
    if !(variance > 0.0) {
        return Ok(AucInterval {
            auc,
            lower: auc,
            upper: auc,
            degenerate: true,
        });
    }
    let half = normal_quantile(alpha) * variance.sqrt();
    Ok(AucInterval {
        auc,
        lower: (auc - half).clamp(0.0, 1.0),
        upper: (auc + half).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Lower DeLong bound.
pub fn auc_ci_lower(labels: &[bool], scores: &[f64], alpha: f64) -> Result<f64> {
    Ok(auc_ci_delong(labels, scores, alpha)?.lower)
}

/// Percentile interval from `resamples` stratified bootstrap resamples.
pub fn auc_ci_bootstrap<R: Rng + ?Sized>(
    labels: &[bool],
    scores: &[f64],
    alpha: f64,
    resamples: usize,
    rng: &mut R,
) -> Result<AucInterval> {
    check_alpha(alpha)?;
    check_inputs(labels, scores)?;
    if resamples == 0 {
        return Err(Error::InvalidParameter("bootstrap needs at least one resample".into()));
    }
    let point = auc(labels, scores)?;
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    let mut draws = Vec::with_capacity(resamples);
    let mut lab = Vec::with_capacity(labels.len());
    let mut sc = Vec::with_capacity(labels.len());
    lab.extend(std::iter::repeat_n(true, pos.len()));
    lab.extend(std::iter::repeat_n(false, neg.len()));
    for _ in 0..resamples {
        sc.clear();
        sc.extend((0..pos.len()).map(|_| pos[rng.random_range(0..pos.len())]));
        sc.extend((0..neg.len()).map(|_| neg[rng.random_range(0..neg.len())]));
        draws.push(auc(&lab, &sc)?);
    }
    draws.sort_by(f64::total_cmp);
    let lower = crate::summary::quantile_linear(&draws, alpha / 2.0);
    let upper = crate::summary::quantile_linear(&draws, 1.0 - alpha / 2.0);
    Ok(AucInterval {
        auc: point,
        lower,
        upper,
        degenerate: lower == upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum CiMethod {
    DeLong,
    Bootstrap { resamples: usize },
}

/// Which rows of the neighboring segments are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalRows {
    HeldOut,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub l_fitted: usize,
    pub alpha: f64,
    pub tau: f64,
    pub zeta: usize,
    pub min_seg: usize,
    pub refit: bool,
    pub ci: CiMethod,
    pub eval_rows: EvalRows,
}

impl SelectionConfig {
    /// `alpha = 0.05`, `tau = 0.5`, refit on, DeLong intervals on held-out rows.
    pub fn new(l_fitted: usize, zeta: usize, min_seg: usize) -> Self {
        SelectionConfig {
            l_fitted,
            alpha: 0.05,
            tau: 0.5,
            zeta,
            min_seg,
            refit: true,
            ci: CiMethod::DeLong,
            eval_rows: EvalRows::HeldOut,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_fitted == 0 {
            return Err(Error::InvalidParameter("the number of fitted changepoints must be >= 1".into()));
        }
        check_alpha(self.alpha)?;
        if !(self.tau >= 0.5 && self.tau < 1.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in [0.5, 1), got {}", self.tau)));
        }
        if self.zeta < 2 {
            return Err(Error::InvalidParameter(format!("holdout stride zeta must be >= 2, got {}", self.zeta)));
        }
        if self.min_seg <= self.zeta {
            return Err(Error::InvalidParameter(format!(
                "minimum segment length ({}) must exceed the holdout stride zeta ({})",
                self.min_seg, self.zeta
            )));
        }
        if let CiMethod::Bootstrap { resamples: 0 } = self.ci {
            return Err(Error::InvalidParameter("bootstrap needs at least one resample".into()));
        }
        Ok(())
    }
}

/// Mask of rows used for fitting: `false` at times `zeta, 2 zeta, ...`
/// (0-based rows `zeta - 1, 2 zeta - 1, ...`).
pub fn holdout_mask(n: usize, zeta: usize) -> Vec<bool> {
    (0..n).map(|r| (r + 1) % zeta != 0).collect()
}

/// Held-out rows, 0-based.
pub fn holdout_rows(n: usize, zeta: usize) -> Vec<usize> {
    (1..=n / zeta).map(|k| k * zeta - 1).collect()
}

/// Outcome of scoring one changepoint in one draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangepointScore {
    pub auc_lower: Option<f64>,
    pub accepted: bool,
    pub note: Option<String>,
}

/// `logistic(x^T (beta_{l+1} - beta_l))`, the probability of class `l + 1`
/// among classes `l` and `l + 1`.
pub fn pairwise_probability(x_i: &[f64], betas: &CoefficientSet, l: usize) -> f64 {
    let v = dot(x_i, betas.beta(l + 1)) - dot(x_i, betas.beta(l));
    1.0 / (1.0 + (-v).exp())
}

/// Scores changepoint `l` (0-based) of one draw on the rows `eval` (sorted,
/// 0-based). `rng` is only used by the bootstrap.
#[allow(clippy::too_many_arguments)]
pub fn score_changepoint<R: Rng + ?Sized>(
    l: usize,
    kappa: &ChangepointVector,
    betas: &CoefficientSet,
    x: &SeriesMatrix,
    eval: &[usize],
    config: &SelectionConfig,
    rng: &mut R,
) -> Result<ChangepointScore> {
    let b = kappa.boundaries();
    let (prev, split, next) = (b[l], b[l + 1], b[l + 2]);
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    for &r in eval.iter().filter(|&&r| r >= prev && r < next) {
        labels.push(r >= split);
        scores.push(pairwise_probability(x.row(r), betas, l));
    }
    let interval = match config.ci {
        CiMethod::DeLong => auc_ci_delong(&labels, &scores, config.alpha),
        CiMethod::Bootstrap { resamples } => auc_ci_bootstrap(&labels, &scores, config.alpha, resamples, rng),
    };
    match interval {
        Ok(iv) => Ok(ChangepointScore {
            auc_lower: Some(iv.lower),
            accepted: iv.lower > config.tau,
            note: iv.degenerate.then(|| "degenerate interval".to_string()),
        }),
        Err(Error::UndefinedAuc(msg)) => Ok(ChangepointScore {
            auc_lower: None,
            accepted: false,
            note: Some(msg),
        }),
        Err(e) => Err(e),
    }
}

/// Posterior over the number of changepoints.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub l_true_draws: Vec<usize>,
    /// `pmf[k] = P(L_true = k)`, `k = 0..=l_fitted`.
    pub pmf: Vec<f64>,
    pub l_hat: usize,
    /// Fraction of draws in which each fitted changepoint was accepted.
    pub acceptance_rates: Vec<f64>,
    pub holdout_rows: Vec<usize>,
    pub config: SelectionConfig,
    #[serde(skip)]
    pub fitted: PosteriorDraws,
    #[serde(skip)]
    pub refit: Option<PosteriorDraws>,
}

impl SelectionResult {
    /// The `k` most probable counts with their probabilities, most probable first.
    pub fn top(&self, k: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self.pmf.iter().copied().enumerate().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("serializable");
        v["top"] = self
            .top(3)
            .into_iter()
            .map(|(count, prob)| serde_json::json!({ "count": count, "probability": prob }))
            .collect();
        v
    }
}

/// Counts the accepted changepoints of every stored draw.
pub fn count_true_changepoints(
    draws: &PosteriorDraws,
    x: &SeriesMatrix,
    eval: &[usize],
    config: &SelectionConfig,
    seed: u64,
) -> Result<(Vec<usize>, Vec<Vec<bool>>)> {
    let score_draw = |s: usize| -> Result<Vec<bool>> {
        let kappa = draws.changepoints(s);
        let betas = draws.coefficient_set(s);
        let mut rng = stream(derive_seed(seed, 0x5e1ec7), s as u64);
        (0..draws.n_changepoints)
            .map(|l| Ok(score_changepoint(l, &kappa, &betas, x, eval, config, &mut rng)?.accepted))
            .collect()
    };
    #[cfg(feature = "parallel")]
    let accepted: Vec<Vec<bool>> = {
        use rayon::prelude::*;
        (0..draws.n_draws()).into_par_iter().map(score_draw).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let accepted: Vec<Vec<bool>> = (0..draws.n_draws()).map(score_draw).collect::<Result<_>>()?;
    let counts = accepted.iter().map(|a| a.iter().filter(|&&v| v).count()).collect();
    Ok((counts, accepted))
}

/// Fits `l_fitted` changepoints on the non-held-out rows, scores every draw and
/// optionally refits all rows with the selected count.
pub fn select_num_changepoints(x: &SeriesMatrix, config: &SelectionConfig, gibbs: &GibbsConfig) -> Result<SelectionResult> {
    config.validate()?;
    let n = x.n_rows();
    let mut fit_cfg = gibbs.clone();
    fit_cfg.min_seg = config.min_seg;
    fit_cfg.validate(n, config.l_fitted)?;
    let mask = holdout_mask(n, config.zeta);
    let held = holdout_rows(n, config.zeta);
    let fitted = run_chain_on_rows(x, config.l_fitted, &fit_cfg, &mask)?;

    let eval: Vec<usize> = match config.eval_rows {
        EvalRows::HeldOut => held.clone(),
        EvalRows::All => (0..n).collect(),
    };
    let (counts, accepted) = count_true_changepoints(&fitted, x, &eval, config, gibbs.seed)?;
    let s = counts.len().max(1) as f64;
    let mut pmf = vec![0.0; config.l_fitted + 1];
    for &c in &counts {
        pmf[c] += 1.0 / s;
    }
    let l_hat = pmf
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
        .0;
    let acceptance_rates = (0..config.l_fitted)
        .map(|l| accepted.iter().filter(|a| a[l]).count() as f64 / s)
        .collect();
    let refit = if config.refit {
        let mut refit_cfg = fit_cfg.clone();
        refit_cfg.init = crate::gibbs::Init::Even;
        refit_cfg.seed = derive_seed(gibbs.seed, 1);
        Some(run_chain(x, l_hat, &refit_cfg)?)
    } else {
        None
    };
    Ok(SelectionResult {
        l_true_draws: counts,
        pmf,
        l_hat,
        acceptance_rates,
        holdout_rows: held,
        config: config.clone(),
        fitted,
        refit,
    })
}
