//! Benchmark harness over the synthetic scenarios.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{preprocess, ChangepointVector, ScaleOrder, SeriesMatrix};
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, GibbsConfig, PosteriorDraws};
use crate::model::PriorSpec;
use crate::rng::{derive_seed, stream};
use crate::selection::{select_num_changepoints, SelectionConfig};
use crate::sim::{adjusted_rand_index, generate, generate_segments, segment_laws, Scenario, ScenarioSpec, Variant};
use crate::summary::mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputType {
    Raw,
    Poly2,
}

impl InputType {
    pub fn name(self) -> &'static str {
        match self {
            InputType::Raw => "raw",
            InputType::Poly2 => "poly2",
        }
    }
}

/// Point estimate from marginal modes, moved onto the feasible set if the
/// modes happen to collide.
pub fn modal_changepoints(draws: &PosteriorDraws) -> Result<ChangepointVector> {
    if draws.n_draws() == 0 {
        return Err(Error::InvalidInput("no stored draws".into()));
    }
    let modes = (0..draws.n_changepoints)
        .map(|l| mode(&draws.kappa_column(l)).expect("non-empty"))
        .collect();
    ChangepointVector::project(modes, draws.n, 1)
}

/// Centering and scaling plus the optional quadratic embedding, in the order
/// the simulation study uses: the raw series is standardized first.
pub fn prepare_input(x: &SeriesMatrix, input: InputType) -> Result<SeriesMatrix> {
    prepare_input_with(x, input, ScaleOrder::BeforeEmbedding)
}

pub fn prepare_input_with(x: &SeriesMatrix, input: InputType, order: ScaleOrder) -> Result<SeriesMatrix> {
    Ok(preprocess(x, input == InputType::Poly2, true, order)?.matrix)
}

/// Stress instance for tempering: 150 CIM rows with a mean shift at 100,
/// followed by the same rows in reverse order. The reversal makes the
/// one-changepoint posterior exactly symmetric under `kappa -> 300 - kappa`,
/// with modes near 100 and 200 separated by a deep valley.
pub fn mirrored_cim_instance(variant: Variant, seed: u64) -> Result<SeriesMatrix> {
    let laws = segment_laws(Scenario::Cim, variant, 2);
    let half = ChangepointVector::new(vec![100], 150, 1)?;
    let first = generate_segments(&laws, &half, &mut stream(seed, 0))?;
    let rows: Vec<Vec<f64>> = first.rows().chain(first.rows().rev()).map(<[f64]>::to_vec).collect();
    SeriesMatrix::from_rows(&rows)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub cases: Vec<(Scenario, Variant)>,
    pub known_l: Vec<bool>,
    pub replicates: usize,
    pub seed: u64,
    pub iters: usize,
    pub burn_in: usize,
    pub min_seg: usize,
    pub l_fitted: usize,
    pub alpha: f64,
    pub tau: f64,
    pub zeta: usize,
    pub horseshoe: bool,
    /// Also run the raw input for scenarios that are embedded by default.
    pub include_raw: bool,
    pub scale_order: ScaleOrder,
}

impl BenchConfig {
    /// `T = 5000`, `T0 = 2500`, `m = 30`, 5 fitted changepoints, `alpha = 0.1`,
    /// `tau = 0.5`, `zeta = 5`, horseshoe prior, series standardized before
    /// the embedding.
    pub fn new(cases: Vec<(Scenario, Variant)>, replicates: usize) -> Self {
        BenchConfig {
            cases,
            known_l: vec![true, false],
            replicates,
            seed: 1,
            iters: 5000,
            burn_in: 2500,
            min_seg: 30,
            l_fitted: 5,
            alpha: 0.1,
            tau: 0.5,
            zeta: 5,
            horseshoe: true,
            include_raw: true,
            scale_order: ScaleOrder::BeforeEmbedding,
        }
    }

    pub fn all_cases() -> Vec<(Scenario, Variant)> {
        Scenario::ALL
            .iter()
            .flat_map(|&s| [(s, Variant::Low), (s, Variant::High)])
            .collect()
    }

    pub fn gibbs(&self, seed: u64) -> GibbsConfig {
        GibbsConfig::new(self.iters)
            .with_burn_in(self.burn_in)
            .with_min_seg(self.min_seg)
            .with_seed(seed)
            .with_prior(if self.horseshoe { PriorSpec::Horseshoe } else { PriorSpec::default() })
    }

    pub fn selection(&self) -> SelectionConfig {
        let mut s = SelectionConfig::new(self.l_fitted, self.zeta, self.min_seg);
        s.alpha = self.alpha;
        s.tau = self.tau;
        s
    }

    fn inputs(&self, scenario: Scenario) -> Vec<InputType> {
        match (scenario.needs_embedding(), self.include_raw) {
            (false, _) => vec![InputType::Raw],
            (true, true) => vec![InputType::Raw, InputType::Poly2],
            (true, false) => vec![InputType::Poly2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub scenario: Scenario,
    pub variant: Variant,
    pub input: InputType,
    pub known_l: bool,
    pub replicate: usize,
    pub ari: f64,
    pub wall_seconds: f64,
    pub n_changepoints: usize,
}

/// Seed of the data set for one replicate; shared by every method run on it.
pub fn replicate_seed(seed: u64, scenario: Scenario, variant: Variant, replicate: usize) -> u64 {
    let case = (scenario as u64) * 2 + variant as u64;
    derive_seed(seed, (case << 32) | replicate as u64)
}

/// Runs one pipeline on one replicate.
pub fn run_case(
    config: &BenchConfig,
    scenario: Scenario,
    variant: Variant,
    input: InputType,
    known_l: bool,
    replicate: usize,
) -> Result<BenchRecord> {
    let data_seed = replicate_seed(config.seed, scenario, variant, replicate);
    let spec = ScenarioSpec::new(scenario, variant, data_seed);
    let (raw, truth) = generate(&spec, &mut stream(data_seed, 0))?;
    let x = prepare_input_with(&raw, input, config.scale_order)?;
    let chain_seed = derive_seed(data_seed, 1 + input as u64);
    let start = Instant::now();
    let estimate = if known_l {
        modal_changepoints(&run_chain(&x, truth.len(), &config.gibbs(chain_seed))?)?
    } else {
        let result = select_num_changepoints(&x, &config.selection(), &config.gibbs(chain_seed))?;
        modal_changepoints(result.refit.as_ref().expect("refit enabled"))?
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    Ok(BenchRecord {
        scenario,
        variant,
        input,
        known_l,
        replicate,
        ari: adjusted_rand_index(&truth, &estimate)?,
        wall_seconds,
        n_changepoints: estimate.len(),
    })
}

/// Every (case, input, known-L flag, replicate) job, run in parallel when the
/// `parallel` feature is on. Records come back in job order.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if config.replicates == 0 {
        return Err(Error::InvalidParameter("at least one replicate is required".into()));
    }
    let mut jobs = Vec::new();
    for &(scenario, variant) in &config.cases {
        for input in config.inputs(scenario) {
            for &known in &config.known_l {
                for r in 0..config.replicates {
                    jobs.push((scenario, variant, input, known, r));
                }
            }
        }
    }
    let run = |&(s, v, i, k, r): &(Scenario, Variant, InputType, bool, usize)| run_case(config, s, v, i, k, r);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(run).collect()
    }
}

pub const CSV_COLUMNS: [&str; 7] = [
    "scenario",
    "variant",
    "input-type",
    "known_L",
    "replicate",
    "ARI",
    "wall-time-seconds",
];

pub fn write_records_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(fmt)?;
    for r in records {
        w.write_record([
            r.scenario.name().to_string(),
            r.variant.name().to_string(),
            r.input.name().to_string(),
            r.known_l.to_string(),
            (r.replicate + 1).to_string(),
            r.ari.to_string(),
            format!("{:.3}", r.wall_seconds),
        ])
        .map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummaryRow {
    pub scenario: Scenario,
    pub variant: Variant,
    pub input: InputType,
    pub known_l: bool,
    pub replicates: usize,
    pub mean_ari: f64,
    pub se_ari: f64,
}

/// Mean and standard error of the ARI per (case, input, known-L) cell.
pub fn summarize_records(records: &[BenchRecord]) -> Vec<BenchSummaryRow> {
    let mut keys: Vec<(Scenario, Variant, InputType, bool)> = Vec::new();
    for r in records {
        let k = (r.scenario, r.variant, r.input, r.known_l);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(scenario, variant, input, known_l)| {
            let aris: Vec<f64> = records
                .iter()
                .filter(|r| (r.scenario, r.variant, r.input, r.known_l) == (scenario, variant, input, known_l))
                .map(|r| r.ari)
                .collect();
            let n = aris.len() as f64;
            let mean = aris.iter().sum::<f64>() / n;
            let se = if aris.len() > 1 {
                (aris.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            BenchSummaryRow {
                scenario,
                variant,
                input,
                known_l,
                replicates: aris.len(),
                mean_ari: mean,
                se_ari: se,
            }
        })
        .collect()
}

pub fn format_table(rows: &[BenchSummaryRow]) -> String {
    let mut s = format!(
        "{:<9} {:<7} {:<6} {:<8} {:>4} {:>9} {:>8}\n",
        "scenario", "variant", "input", "L", "R", "mean ARI", "se"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<9} {:<7} {:<6} {:<8} {:>4} {:>9.3} {:>8.3}\n",
            r.scenario.name(),
            r.variant.name(),
            r.input.name(),
            if r.known_l { "known" } else { "unknown" },
            r.replicates,
            r.mean_ari,
            r.se_ari
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_benchmark_produces_complete_table() {
        let mut cfg = BenchConfig::new(vec![(Scenario::Cic, Variant::Low)], 1);
        cfg.iters = 30;
        cfg.burn_in = 15;
        let records = run_benchmark(&cfg).unwrap();
        // raw and embedded, known and unknown
        assert_eq!(records.len(), 4);
        let rows = summarize_records(&records);
        assert_eq!(rows.len(), 4);
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("scenario,variant,input-type,known_L,replicate,ARI,wall-time-seconds\n"));
        assert_eq!(text.lines().count(), 5);
        assert!(format_table(&rows).contains("cic"));
    }

    #[test]
    fn replicate_seeds_differ() {
        let a = replicate_seed(1, Scenario::Cim, Variant::Low, 0);
        assert_ne!(a, replicate_seed(1, Scenario::Cim, Variant::Low, 1));
        assert_ne!(a, replicate_seed(1, Scenario::Cim, Variant::High, 0));
    }
}
