//! Posterior summaries: changepoint modes and intervals, coefficient
//! differences and discriminant trajectories.
//!
//! Integer changepoint draws use nearest-rank quantiles; real-valued draws use
//! linear interpolation between order statistics.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::data::SeriesMatrix;
use crate::error::{Error, Result};
use crate::gibbs::PosteriorDraws;
use crate::model::dot;

/// Nearest-rank quantile of sorted values: element `ceil(q S)` (1-based).
pub fn quantile_nearest_rank<T: Copy>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of no values");
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Linearly interpolated quantile of sorted values.
pub fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of no values");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Most frequent value, ties broken toward the smallest.
pub fn mode(values: &[usize]) -> Option<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if best.is_none_or(|(_, c)| j - i > c) {
            best = Some((sorted[i], j - i));
        }
        i = j;
    }
    best.map(|(v, _)| v)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_draws(draws: &PosteriorDraws) -> Result<()> {
    if draws.n_draws() == 0 {
        return Err(Error::InvalidInput("no stored draws to summarize".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaStat {
    /// 1-based changepoint number.
    pub index: usize,
    pub mode: usize,
    pub mean: f64,
    pub lower: usize,
    pub upper: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChangepointSummary {
    pub gamma: f64,
    pub changepoints: Vec<KappaStat>,
}

impl ChangepointSummary {
    pub fn modes(&self) -> Vec<usize> {
        self.changepoints.iter().map(|c| c.mode).collect()
    }
}

/// Per-changepoint marginal mode, mean and central `1 - gamma` interval.
pub fn summarize_kappa(draws: &PosteriorDraws, gamma: f64) -> Result<ChangepointSummary> {
    check_gamma(gamma)?;
    check_draws(draws)?;
    let changepoints = (0..draws.n_changepoints)
        .map(|l| {
            let mut col = draws.kappa_column(l);
            col.sort_unstable();
            KappaStat {
                index: l + 1,
                mode: mode(&col).expect("non-empty"),
                mean: col.iter().sum::<usize>() as f64 / col.len() as f64,
                lower: quantile_nearest_rank(&col, gamma / 2.0),
                upper: quantile_nearest_rank(&col, 1.0 - gamma / 2.0),
            }
        })
        .collect();
    Ok(ChangepointSummary { gamma, changepoints })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDiff {
    /// 1-based class labels: the summarized quantity is `beta_first - beta_second`.
    pub first: usize,
    pub second: usize,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Interval excludes zero.
    pub credibly_changed: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientDiffSummary {
    pub gamma: f64,
    pub pairs: Vec<PairDiff>,
}

/// Adjacent pairs `(l + 1, l)` for `l = 0..L`, zero-based.
pub fn adjacent_pairs(n_changepoints: usize) -> Vec<(usize, usize)> {
    (0..n_changepoints).map(|l| (l + 1, l)).collect()
}

/// Draws of `beta_a - beta_b` (zero-based classes; the last class is the
/// zero reference), `S x p` row-major.
pub fn beta_diff_draws(draws: &PosteriorDraws, a: usize, b: usize) -> Result<Vec<f64>> {
    let j = draws.n_classes();
    if a >= j || b >= j {
        return Err(Error::InvalidParameter(format!(
            "class pair ({}, {}) outside 1..={j}",
            a + 1,
            b + 1
        )));
    }
    let p = draws.p;
    let mut out = Vec::with_capacity(draws.n_draws() * p);
    for s in 0..draws.n_draws() {
        let set = draws.coefficient_set(s);
        out.extend(set.beta(a).iter().zip(set.beta(b)).map(|(x, y)| x - y));
    }
    Ok(out)
}

/// Mean and interval of each requested difference, per dimension.
pub fn summarize_beta_diffs(draws: &PosteriorDraws, pairs: &[(usize, usize)], gamma: f64) -> Result<CoefficientDiffSummary> {
    check_gamma(gamma)?;
    check_draws(draws)?;
    let p = draws.p;
    let s = draws.n_draws();
    let pairs = pairs
        .iter()
        .map(|&(a, b)| {
            let diffs = beta_diff_draws(draws, a, b)?;
            let mut mean = Vec::with_capacity(p);
            let mut lower = Vec::with_capacity(p);
            let mut upper = Vec::with_capacity(p);
            for d in 0..p {
                let mut col: Vec<f64> = (0..s).map(|i| diffs[i * p + d]).collect();
                mean.push(col.iter().sum::<f64>() / s as f64);
                col.sort_by(f64::total_cmp);
                lower.push(quantile_linear(&col, gamma / 2.0));
                upper.push(quantile_linear(&col, 1.0 - gamma / 2.0));
            }
            let credibly_changed = lower.iter().zip(&upper).map(|(l, u)| *l > 0.0 || *u < 0.0).collect();
            Ok(PairDiff {
                first: a + 1,
                second: b + 1,
                mean,
                lower,
                upper,
                credibly_changed,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CoefficientDiffSummary { gamma, pairs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// 1-based changepoint number.
    pub changepoint: usize,
    /// 0-based row range `start..end` covered.
    pub start: usize,
    pub end: usize,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Pointwise posterior mean and `1 - gamma` band of `x_i^T (beta_{l+1} - beta_l)`
/// over the two segments around changepoint `l` (zero-based), delimited by the
/// neighboring changepoints' marginal modes.
pub fn discriminant_trajectory(draws: &PosteriorDraws, l: usize, x: &SeriesMatrix, gamma: f64) -> Result<Trajectory> {
    check_gamma(gamma)?;
    check_draws(draws)?;
    if l >= draws.n_changepoints {
        return Err(Error::InvalidParameter(format!("changepoint {} out of range", l + 1)));
    }
    if x.n_rows() != draws.n || x.n_cols() != draws.p {
        return Err(Error::InvalidInput("data do not match the draws".into()));
    }
    let modes: Vec<usize> = (0..draws.n_changepoints)
        .map(|k| mode(&draws.kappa_column(k)).expect("non-empty"))
        .collect();
    let start = if l == 0 { 0 } else { modes[l - 1] };
    let end = modes.get(l + 1).copied().unwrap_or(draws.n).max(start + 1);
    let diffs = beta_diff_draws(draws, l + 1, l)?;
    let p = draws.p;
    let s = draws.n_draws();
    let mut mean = Vec::with_capacity(end - start);
    let mut lower = Vec::with_capacity(end - start);
    let mut upper = Vec::with_capacity(end - start);
    let mut vals = vec![0.0; s];
    for r in start..end {
        let row = x.row(r);
        for (i, v) in vals.iter_mut().enumerate() {
            *v = dot(row, &diffs[i * p..(i + 1) * p]);
        }
        mean.push(vals.iter().sum::<f64>() / s as f64);
        vals.sort_by(f64::total_cmp);
        lower.push(quantile_linear(&vals, gamma / 2.0));
        upper.push(quantile_linear(&vals, 1.0 - gamma / 2.0));
    }
    Ok(Trajectory {
        changepoint: l + 1,
        start,
        end,
        mean,
        lower,
        upper,
    })
}

/// Everything reported after a fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub n: usize,
    pub p: usize,
    pub n_draws: usize,
    pub kappa: ChangepointSummary,
    pub beta_diffs: CoefficientDiffSummary,
    pub trajectories: Vec<Trajectory>,
}

impl FitSummary {
    pub fn compute(draws: &PosteriorDraws, x: &SeriesMatrix, gamma: f64) -> Result<Self> {
        let trajectories = (0..draws.n_changepoints)
            .map(|l| discriminant_trajectory(draws, l, x, gamma))
            .collect::<Result<_>>()?;
        Ok(FitSummary {
            n: draws.n,
            p: draws.p,
            n_draws: draws.n_draws(),
            kappa: summarize_kappa(draws, gamma)?,
            beta_diffs: summarize_beta_diffs(draws, &adjacent_pairs(draws.n_changepoints), gamma)?,
            trajectories,
        })
    }

    /// Long format: `quantity,index,dimension,statistic,value`. Changepoint
    /// rows leave `dimension` empty; trajectory rows use the 0-based row as
    /// the dimension.
    pub fn write_long_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["quantity", "index", "dimension", "statistic", "value"]).map_err(fmt)?;
        for c in &self.kappa.changepoints {
            let idx = c.index.to_string();
            for (stat, v) in [
                ("mode", c.mode as f64),
                ("mean", c.mean),
                ("lower", c.lower as f64),
                ("upper", c.upper as f64),
            ] {
                w.write_record(["kappa", &idx, "", stat, &v.to_string()]).map_err(fmt)?;
            }
        }
        for pair in &self.beta_diffs.pairs {
            let idx = format!("{}-{}", pair.first, pair.second);
            for d in 0..pair.mean.len() {
                let dim = (d + 1).to_string();
                for (stat, v) in [("mean", pair.mean[d]), ("lower", pair.lower[d]), ("upper", pair.upper[d])] {
                    w.write_record(["beta_diff", &idx, &dim, stat, &v.to_string()]).map_err(fmt)?;
                }
            }
        }
        for t in &self.trajectories {
            let idx = t.changepoint.to_string();
            for (i, r) in (t.start..t.end).enumerate() {
                let dim = r.to_string();
                for (stat, v) in [("mean", t.mean[i]), ("lower", t.lower[i]), ("upper", t.upper[i])] {
                    w.write_record(["trajectory", &idx, &dim, stat, &v.to_string()]).map_err(fmt)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn save(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))?;
        let file = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        self.write_long_csv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::Reference;

    fn draws_with(kappa: Vec<usize>, l: usize, beta: Vec<f64>, p: usize, n: usize) -> PosteriorDraws {
        let s = if l == 0 { beta.len() / p.max(1) } else { kappa.len() / l };
        PosteriorDraws {
            n,
            p,
            n_changepoints: l,
            min_seg: 1,
            reference: Reference::Last,
            iterations: (1..=s).collect(),
            kappa,
            beta,
            loss: vec![0.0; s],
            horseshoe: None,
        }
    }

    #[test]
    fn kappa_examples() {
        let d = draws_with(vec![3, 3, 4], 1, vec![0.0; 3], 1, 10);
        let s = summarize_kappa(&d, 0.05).unwrap();
        assert_eq!(s.changepoints[0].mode, 3);
        assert!((s.changepoints[0].mean - 10.0 / 3.0).abs() < 1e-12);

        let same = draws_with(vec![7; 20], 1, vec![0.0; 20], 1, 10);
        let s = summarize_kappa(&same, 0.05).unwrap();
        assert_eq!((s.changepoints[0].lower, s.changepoints[0].upper), (7, 7));

        let uniform = draws_with((1..=100).collect(), 1, vec![0.0; 100], 1, 200);
        let s = summarize_kappa(&uniform, 0.05).unwrap();
        assert_eq!((s.changepoints[0].lower, s.changepoints[0].upper), (3, 98));
    }

    #[test]
    fn mode_ties_go_to_smallest() {
        assert_eq!(mode(&[5, 2, 5, 2, 9]), Some(2));
        assert_eq!(mode(&[]), None);
    }

    #[test]
    fn linear_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_linear(&v, 0.5), 2.5);
        assert_eq!(quantile_linear(&v, 0.0), 1.0);
        assert_eq!(quantile_linear(&v, 1.0), 4.0);
    }

    #[test]
    fn beta_diff_identities() {
        // J = 3, p = 2, two draws
        let beta = vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 2.0, 2.0];
        let d = draws_with(vec![3, 6, 4, 7], 2, beta.clone(), 2, 10);
        let same = beta_diff_draws(&d, 1, 1).unwrap();
        assert!(same.iter().all(|v| *v == 0.0));
        let vs_ref = beta_diff_draws(&d, 2, 0).unwrap();
        assert_eq!(vs_ref, vec![-1.0, -2.0, 1.0, -0.5]);
        assert!(beta_diff_draws(&d, 3, 0).is_err());
        let sum = summarize_beta_diffs(&d, &[(1, 0)], 0.05).unwrap();
        assert_eq!(sum.pairs[0].mean, vec![2.5, 1.75]);
        assert_eq!((sum.pairs[0].first, sum.pairs[0].second), (2, 1));
    }

    #[test]
    fn trajectory_properties() {
        let x = SeriesMatrix::new(10, 2, (0..20).map(|v| v as f64 * 0.1).collect()).unwrap();
        let x2 = x.scaled(2.0);
        let zero = draws_with(vec![5, 5], 1, vec![0.0; 4], 2, 10);
        let t = discriminant_trajectory(&zero, 0, &x, 0.1).unwrap();
        assert!(t.mean.iter().all(|v| *v == 0.0));

        let single = draws_with(vec![5], 1, vec![0.4, -0.3], 2, 10);
        let t = discriminant_trajectory(&single, 0, &x, 0.1).unwrap();
        assert_eq!(t.mean, t.lower);
        assert_eq!(t.mean, t.upper);
        assert_eq!((t.start, t.end), (0, 10));

        let two = draws_with(vec![5, 6], 1, vec![0.4, -0.3, 1.0, 0.2], 2, 10);
        let a = discriminant_trajectory(&two, 0, &x, 0.1).unwrap();
        let b = discriminant_trajectory(&two, 0, &x2, 0.1).unwrap();
        for (u, v) in a.mean.iter().zip(&b.mean) {
            assert!((2.0 * u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn long_csv_has_header_and_rows() {
        let x = SeriesMatrix::new(10, 1, (0..10).map(|v| v as f64).collect()).unwrap();
        let d = draws_with(vec![4, 5, 5], 1, vec![0.1, 0.2, 0.3], 1, 10);
        let s = FitSummary::compute(&d, &x, 0.05).unwrap();
        let mut buf = Vec::new();
        s.write_long_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("quantity,index,dimension,statistic,value\nkappa,1,,mode,5\n"));
    }
}
