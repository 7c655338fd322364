//! Browser bindings: simulate a scenario, fit it, and choose the number of
//! changepoints. Everything crosses the boundary as JSON strings.
//!
//! The same functions are plain Rust, so the crate is tested natively.

use bcmlr::bench::{modal_changepoints, prepare_input, InputType};
use bcmlr::selection::{select_num_changepoints, SelectionConfig};
use bcmlr::sim::{adjusted_rand_index, generate, Scenario, ScenarioSpec, Variant};
use bcmlr::summary::summarize_kappa;
use bcmlr::{run_chain, ChangepointVector, GibbsConfig, PriorSpec, SeriesMatrix};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// A simulated series kept between calls so the page can fit it repeatedly.
#[wasm_bindgen]
pub struct Demo {
    raw: SeriesMatrix,
    truth: ChangepointVector,
    scenario: Scenario,
}

fn js_err(e: bcmlr::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn gibbs(iters: usize, min_seg: usize, seed: u64, horseshoe: bool) -> GibbsConfig {
    GibbsConfig::new(iters)
        .with_min_seg(min_seg)
        .with_seed(seed)
        .with_prior(if horseshoe { PriorSpec::Horseshoe } else { PriorSpec::default() })
}

impl Demo {
    pub fn generate(scenario: &str, variant: &str, seed: u64) -> bcmlr::Result<Demo> {
        let scenario: Scenario = scenario.parse()?;
        let variant: Variant = variant.parse()?;
        let spec = ScenarioSpec::new(scenario, variant, seed);
        let (raw, truth) = generate(&spec, &mut bcmlr::rng::stream(seed, 0))?;
        Ok(Demo { raw, truth, scenario })
    }

    fn input(&self, embed: bool) -> bcmlr::Result<SeriesMatrix> {
        prepare_input(&self.raw, if embed { InputType::Poly2 } else { InputType::Raw })
    }

    /// The first two coordinates of every row, for plotting.
    pub fn series(&self) -> Value {
        let take = self.raw.n_cols().min(2);
        let cols: Vec<Vec<f64>> = (0..take).map(|d| self.raw.column(d).collect()).collect();
        json!({
            "n": self.raw.n_rows(),
            "p": self.raw.n_cols(),
            "columns": cols,
            "truth": self.truth.kappas(),
            "needs_embedding": self.scenario.needs_embedding(),
        })
    }

    pub fn fit_value(&self, n_changepoints: usize, iters: usize, seed: u64, embed: bool) -> bcmlr::Result<Value> {
        let x = self.input(embed)?;
        let draws = run_chain(&x, n_changepoints, &gibbs(iters, 30, seed, true))?;
        let summary = summarize_kappa(&draws, 0.05)?;
        let estimate = modal_changepoints(&draws)?;
        let ari = adjusted_rand_index(&self.truth, &estimate)?;
        Ok(json!({
            "changepoints": summary.changepoints,
            "traces": (0..n_changepoints).map(|l| draws.kappa_column(l)).collect::<Vec<_>>(),
            "estimate": estimate.kappas(),
            "ari": ari,
        }))
    }

    pub fn select_value(&self, l_fitted: usize, iters: usize, seed: u64, embed: bool) -> bcmlr::Result<Value> {
        let x = self.input(embed)?;
        let mut sel = SelectionConfig::new(l_fitted, 5, 30);
        sel.alpha = 0.1;
        let result = select_num_changepoints(&x, &sel, &gibbs(iters, 30, seed, true))?;
        let estimate = match &result.refit {
            Some(d) if d.n_changepoints > 0 => modal_changepoints(d)?.kappas().to_vec(),
            _ => Vec::new(),
        };
        Ok(json!({
            "pmf": result.pmf,
            "l_hat": result.l_hat,
            "acceptance_rates": result.acceptance_rates,
            "estimate": estimate,
        }))
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, variant: &str, seed: u32) -> Result<Demo, JsError> {
        Demo::generate(scenario, variant, seed as u64).map_err(js_err)
    }

    #[wasm_bindgen(js_name = seriesJson)]
    pub fn series_json(&self) -> String {
        self.series().to_string()
    }

    /// Fits a known number of changepoints and returns the summary as JSON.
    pub fn fit(&self, n_changepoints: usize, iters: usize, seed: u32, embed: bool) -> Result<String, JsError> {
        self.fit_value(n_changepoints, iters, seed as u64, embed)
            .map(|v| v.to_string())
            .map_err(js_err)
    }

    /// Chooses the number of changepoints and returns the pmf as JSON.
    pub fn select(&self, l_fitted: usize, iters: usize, seed: u32, embed: bool) -> Result<String, JsError> {
        self.select_value(l_fitted, iters, seed as u64, embed)
            .map(|v| v.to_string())
            .map_err(js_err)
    }
}
