//! Non-reversible parallel tempering with deterministic even-odd swaps.
//!
//! Slot `k` holds the chain targeting `exp(-t_k * loss) * prior`. After every
//! round of sweeps, adjacent slots `(0,1), (2,3), ...` attempt to exchange
//! states on even rounds and `(1,2), (3,4), ...` on odd rounds. Because the
//! priors are untempered they cancel in the exchange ratio, leaving
//! `log A = (t_a - t_b) (loss_a - loss_b)`.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::data::SeriesMatrix;
use crate::error::{Error, Result};
use crate::gibbs::{ChainState, GibbsConfig, PosteriorDraws, Sampler};
use crate::rng::{stream, RngStream, SWAP_STREAM};

/// Increasing likelihood powers ending at exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperSchedule {
    powers: Vec<f64>,
}

impl TemperSchedule {
    /// A single slot at power 1 is allowed and reduces to a plain chain.
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one power".into()));
        }
        if powers.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::InvalidParameter(format!("powers must lie in (0, 1]: {powers:?}")));
        }
        if powers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!("powers must be strictly increasing: {powers:?}")));
        }
        if *powers.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter("the last power must be exactly 1".into()));
        }
        Ok(TemperSchedule { powers })
    }

    /// `t_k = r^(K-k)` with `t_1 = lowest`.
    pub fn geometric(k: usize, lowest: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("schedule needs at least one power".into()));
        }
        if k == 1 {
            return TemperSchedule::new(vec![1.0]);
        }
        if !(lowest > 0.0 && lowest < 1.0) {
            return Err(Error::InvalidParameter(format!("lowest power must lie in (0, 1), got {lowest}")));
        }
        let r = lowest.powf(1.0 / (k - 1) as f64);
        let mut powers: Vec<f64> = (1..=k).map(|i| r.powi((k - i) as i32)).collect();
        powers[k - 1] = 1.0;
        TemperSchedule::new(powers)
    }

    /// Six powers from 0.1 to 1.
    pub fn default_grid() -> Self {
        TemperSchedule::geometric(6, 0.1).expect("valid default grid")
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// Adjacent pairs attempted on `round` (0-based).
    pub fn pairs(&self, round: usize) -> impl Iterator<Item = (usize, usize)> {
        let k = self.powers.len();
        (round % 2..k.saturating_sub(1)).step_by(2).map(|a| (a, a + 1))
    }
}

/// `log A` for exchanging states with untempered losses `loss_a`, `loss_b`
/// between powers `t_a` and `t_b`.
pub fn swap_log_ratio(loss_a: f64, t_a: f64, loss_b: f64, t_b: f64) -> f64 {
    (t_a - t_b) * (loss_a - loss_b)
}

/// `min(1, A)`.
pub fn swap_probability(theta_a: &ChainState, t_a: f64, theta_b: &ChainState, t_b: f64) -> f64 {
    swap_log_ratio(theta_a.loss, t_a, theta_b.loss, t_b).min(0.0).exp()
}

/// Swap statistics for one adjacent pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PairStats {
    pub attempts: usize,
    pub rejections: usize,
    /// Sum of `1 - min(1, A)` over attempts.
    pub rejection_prob_sum: f64,
}

impl PairStats {
    pub fn rejection_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.rejection_prob_sum / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct TemperedRun {
    /// Draws from the power-1 slot.
    pub draws: PosteriorDraws,
    pub schedule: TemperSchedule,
    pub pairs: Vec<PairStats>,
    /// `slot_history[round][k]` = replica id occupying slot `k` after the swaps.
    pub slot_history: Vec<Vec<usize>>,
}

impl TemperedRun {
    /// CSV with columns `pair,mean_rejection` (pairs numbered from 1).
    pub fn write_rejection_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "pair,mean_rejection")?;
        for (i, s) in self.pairs.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, s.rejection_rate())?;
        }
        Ok(())
    }

    pub fn save_rejection_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_rejection_csv(std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }
}

/// One sweep of `state` against the power-`power` target.
pub fn tempered_sweep<R: Rng + ?Sized>(
    sampler: &Sampler<'_>,
    state: &mut ChainState,
    power: f64,
    rng: &mut R,
) -> Result<()> {
    if !(power > 0.0 && power <= 1.0) {
        return Err(Error::InvalidParameter(format!("power must lie in (0, 1], got {power}")));
    }
    sampler.sweep(state, power, rng)
}

fn sweep_all(sampler: &Sampler<'_>, schedule: &TemperSchedule, states: &mut [ChainState], rngs: &mut [RngStream]) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if states.len() > 1 {
            return states
                .par_iter_mut()
                .zip(rngs.par_iter_mut())
                .zip(schedule.powers().par_iter())
                .try_for_each(|((s, r), &t)| sampler.sweep(s, t, r));
        }
    }
    for ((s, r), &t) in states.iter_mut().zip(rngs.iter_mut()).zip(schedule.powers()) {
        sampler.sweep(s, t, r)?;
    }
    Ok(())
}

/// Runs the tempered system with a prepared sampler.
pub fn run_tempered_with(sampler: &Sampler<'_>, schedule: &TemperSchedule) -> Result<TemperedRun> {
    let k = schedule.len();
    let seed = sampler.config().seed;
    let init = sampler.initial_state()?;
    let mut states = vec![init; k];
    // the power-1 slot reads stream 0, matching a plain chain
    let mut rngs: Vec<RngStream> = (0..k).map(|i| stream(seed, (k - 1 - i) as u64)).collect();
    let mut swap_rng = stream(seed, SWAP_STREAM);
    let mut owner: Vec<usize> = (0..k).collect();
    let mut pairs = vec![PairStats::default(); k.saturating_sub(1)];
    let mut draws = sampler.empty_draws();
    let mut slot_history = Vec::with_capacity(sampler.config().iters);
    let powers = schedule.powers();

    for round in 0..sampler.config().iters {
        sweep_all(sampler, schedule, &mut states, &mut rngs)?;
        for (a, b) in schedule.pairs(round) {
            let log_a = swap_log_ratio(states[a].loss, powers[a], states[b].loss, powers[b]);
            let accept_prob = log_a.min(0.0).exp();
            let u: f64 = swap_rng.random();
            let stats = &mut pairs[a];
            stats.attempts += 1;
            stats.rejection_prob_sum += 1.0 - accept_prob;
            if u < accept_prob {
                states.swap(a, b);
                owner.swap(a, b);
            } else {
                stats.rejections += 1;
            }
        }
        slot_history.push(owner.clone());
        let iter = round + 1;
        if sampler.keeps(iter) {
            draws.push_state(iter, &states[k - 1]);
        }
    }
    Ok(TemperedRun {
        draws,
        schedule: schedule.clone(),
        pairs,
        slot_history,
    })
}

pub fn run_tempered(
    x: &SeriesMatrix,
    n_changepoints: usize,
    config: &GibbsConfig,
    schedule: &TemperSchedule,
) -> Result<TemperedRun> {
    run_tempered_with(&Sampler::new(x, n_changepoints, config)?, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ChangepointVector;
    use crate::gibbs::{kappa_conditional, run_chain};
    use crate::model::{self, kappa_log_prior, CoefficientSet, GaussianPrior, KappaPrior};

    fn small_series(n: usize, seed: u64) -> SeriesMatrix {
        let mut rng = stream(seed, 0);
        let values = (0..n)
            .map(|i| if i < n / 2 { 0.0 } else { 1.5 } + rng.random_range(-1.0..1.0))
            .collect();
        SeriesMatrix::new(n, 1, values).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(TemperSchedule::new(vec![0.5, 0.5, 1.0]).is_err());
        assert!(TemperSchedule::new(vec![0.5, 0.9]).is_err());
        assert!(TemperSchedule::new(vec![0.0, 1.0]).is_err());
        let g = TemperSchedule::default_grid();
        assert_eq!(g.len(), 6);
        assert!((g.powers()[0] - 0.1).abs() < 1e-12);
        assert_eq!(g.powers()[5], 1.0);
        let even: Vec<_> = g.pairs(0).collect();
        let odd: Vec<_> = g.pairs(1).collect();
        assert_eq!(even, vec![(0, 1), (2, 3), (4, 5)]);
        assert_eq!(odd, vec![(1, 2), (3, 4)]);
    }

    #[test]
    fn single_slot_equals_plain_chain() {
        let x = small_series(20, 1);
        let cfg = GibbsConfig::new(60).with_seed(4).with_min_seg(2);
        let plain = run_chain(&x, 2, &cfg).unwrap();
        let tempered = run_tempered(&x, 2, &cfg, &TemperSchedule::new(vec![1.0]).unwrap()).unwrap();
        assert_eq!(plain, tempered.draws);
    }

    #[test]
    fn unit_power_sweep_is_plain_sweep() {
        let x = small_series(16, 2);
        let cfg = GibbsConfig::new(10).with_seed(1);
        let sampler = Sampler::new(&x, 1, &cfg).unwrap();
        let mut a = sampler.initial_state().unwrap();
        let mut b = a.clone();
        let mut ra = stream(3, 0);
        let mut rb = stream(3, 0);
        for _ in 0..5 {
            sampler.sweep(&mut a, 1.0, &mut ra).unwrap();
            tempered_sweep(&sampler, &mut b, 1.0, &mut rb).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn vanishing_power_conditional_approaches_prior() {
        let x = small_series(30, 3);
        let kappa = ChangepointVector::new(vec![10, 20], 30, 2).unwrap();
        let betas = CoefficientSet::from_free(&[vec![2.0], vec![-1.0]], 1).unwrap();
        let cond = kappa_conditional(0, &kappa, &betas, &x, 2, KappaPrior::SegmentLength, 1e-6, None).unwrap();
        let prior: Vec<f64> = cond
            .support
            .clone()
            .map(|k| kappa_log_prior(&ChangepointVector::new(vec![k, 20], 30, 2).unwrap()).exp())
            .collect();
        let total: f64 = prior.iter().sum();
        let tv: f64 = cond.probs.iter().zip(&prior).map(|(p, q)| (p - q / total).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.01, "tv {tv}");
    }

    #[test]
    fn tempered_loss_is_scaled_loss() {
        let x = small_series(25, 4);
        let kappa = ChangepointVector::new(vec![12], 25, 1).unwrap();
        let betas = CoefficientSet::from_free(&[vec![0.8]], 1).unwrap();
        let labels = crate::data::labels_for(kappa.kappas(), 25);
        let t = 0.37;
        let tempered: f64 = (0..25)
            .map(|i| -t * model::log_class_probs(x.row(i), &betas)[labels[i]])
            .sum();
        assert!((tempered - t * model::loss(&kappa, &betas, &x)).abs() < 1e-8);
    }

    #[test]
    fn swap_ratio_matches_four_density_evaluation() {
        let x = small_series(14, 5);
        let prior = GaussianPrior::isotropic(1, 3.0).unwrap();
        let log_target = |state: &ChainState, t: f64| {
            -t * model::loss(&state.kappa, &state.betas, &x) + kappa_log_prior(&state.kappa) + prior.log_density(&state.betas)
        };
        let mut rng = stream(6, 0);
        for _ in 0..50 {
            let make = |rng: &mut RngStream| {
                let k = rng.random_range(2..12);
                let kappa = ChangepointVector::new(vec![k], 14, 1).unwrap();
                let betas = CoefficientSet::from_free(&[vec![rng.random_range(-3.0..3.0)]], 1).unwrap();
                let loss = model::loss(&kappa, &betas, &x);
                ChainState { kappa, betas, horseshoe: None, loss }
            };
            let a = make(&mut rng);
            let b = make(&mut rng);
            let (ta, tb) = (rng.random_range(0.05..0.5), rng.random_range(0.5..1.0));
            let direct = log_target(&b, ta) + log_target(&a, tb) - log_target(&a, ta) - log_target(&b, tb);
            let simple = swap_log_ratio(a.loss, ta, b.loss, tb);
            assert!((direct - simple).abs() < 1e-10);
            assert_eq!(swap_probability(&a, ta, &a, tb), 1.0);
        }
    }

    #[test]
    fn slots_form_a_permutation_every_round() {
        let x = small_series(24, 7);
        let cfg = GibbsConfig::new(40).with_seed(2).with_min_seg(2);
        let run = run_tempered(&x, 1, &cfg, &TemperSchedule::geometric(4, 0.2).unwrap()).unwrap();
        for owners in &run.slot_history {
            let mut sorted = owners.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3]);
        }
        assert_eq!(run.pairs.len(), 3);
        assert!(run.pairs.iter().all(|p| p.attempts == 20));
        let mut csv = Vec::new();
        run.write_rejection_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("pair,mean_rejection\n1,"));
    }

    #[test]
    fn tempered_runs_are_deterministic() {
        let x = small_series(24, 8);
        let cfg = GibbsConfig::new(30).with_seed(5).with_min_seg(2);
        let s = TemperSchedule::geometric(3, 0.3).unwrap();
        let a = run_tempered(&x, 1, &cfg, &s).unwrap();
        let b = run_tempered(&x, 1, &cfg, &s).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.slot_history, b.slot_history);
    }
}
