use std::path::{Path, PathBuf};

use bcmlr::bench::{self, BenchConfig};
use bcmlr::data::{self, preprocess, ScaleOrder};
use bcmlr::model::KappaPrior;
use bcmlr::selection::{select_num_changepoints, CiMethod, EvalRows, SelectionConfig};
use bcmlr::sim::{generate, Scenario, ScenarioSpec, Variant};
use bcmlr::summary::FitSummary;
use bcmlr::tempering::{run_tempered, TemperSchedule};
use bcmlr::{run_chain, GibbsConfig, PosteriorDraws, PriorSpec, SeriesMatrix};

use crate::config::{resolve, resolve_opt, ConfigFile};
use crate::error::CliError;
use crate::{BenchArgs, ChainArgs, DrawFormat, EmbedArg, FitArgs, OutArgs, PriorArg, SelectArgs, SimulateArgs, SummarizeArgs, OUT_DIR_ENV};

const DEFAULT_ITERS: usize = 5000;
const DEFAULT_GAMMA: f64 = 0.05;

/// Flag, then config file, then `$BCMLR_OUT_DIR`, then the working directory.
/// The directory is created if needed.
fn out_dir(args: &OutArgs, file: &ConfigFile) -> Result<PathBuf, CliError> {
    let dir = match resolve_opt(args.out.clone(), file, "out")? {
        Some(d) => d,
        None => std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
    };
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn parse_enum<T: std::str::FromStr<Err = bcmlr::Error>>(value: Option<String>, file: &ConfigFile, key: &str) -> Result<Option<T>, CliError> {
    match resolve_opt(value, file, key)? {
        Some(v) => Ok(Some(v.parse::<T>()?)),
        None => Ok(None),
    }
}

fn prior_arg(value: Option<PriorArg>, file: &ConfigFile) -> Result<PriorArg, CliError> {
    if let Some(p) = value {
        return Ok(p);
    }
    match file.raw("prior") {
        None | Some("gaussian") => Ok(PriorArg::Gaussian),
        Some("horseshoe") => Ok(PriorArg::Horseshoe),
        Some(other) => Err(CliError::Usage(format!("config key 'prior': expected gaussian or horseshoe, got '{other}'"))),
    }
}

fn embed_arg(value: Option<EmbedArg>, file: &ConfigFile) -> Result<Option<EmbedArg>, CliError> {
    if value.is_some() {
        return Ok(value);
    }
    match file.raw("embed") {
        None | Some("none") => Ok(None),
        Some("poly2") => Ok(Some(EmbedArg::Poly2)),
        Some(other) => Err(CliError::Usage(format!("config key 'embed': expected poly2, got '{other}'"))),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| bcmlr::Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn load_matrix(path: &Path, embed: Option<EmbedArg>, scale: bool, order: ScaleOrder) -> Result<SeriesMatrix, CliError> {
    let x = data::read_csv(path)?;
    let s = preprocess(&x, embed == Some(EmbedArg::Poly2), scale, order)?;
    if !s.constant_columns.is_empty() {
        eprintln!("warning: constant columns left at zero: {:?}", s.constant_columns);
    }
    Ok(s.matrix)
}

/// Chain settings shared by `fit` and `select`, plus the prepared data.
struct Prepared {
    x: SeriesMatrix,
    gibbs: GibbsConfig,
    gamma: f64,
    format: DrawFormat,
}

fn prepare(args: &ChainArgs, file: &ConfigFile, default_min_seg: usize) -> Result<Prepared, CliError> {
    let iters = resolve(args.iters, file, "iters", DEFAULT_ITERS)?;
    let burn_in = resolve(args.burnin, file, "burnin", iters / 2)?;
    let mut gibbs = GibbsConfig::new(iters)
        .with_burn_in(burn_in)
        .with_thin(resolve(args.thin, file, "thin", 1)?)
        .with_min_seg(resolve(args.min_seg, file, "min-seg", default_min_seg)?)
        .with_seed(resolve(args.seed, file, "seed", 0)?);
    gibbs.prior = match prior_arg(args.prior, file)? {
        PriorArg::Horseshoe => PriorSpec::Horseshoe,
        PriorArg::Gaussian => PriorSpec::IsotropicGaussian {
            variance: resolve(args.prior_var, file, "prior-var", 3.0)?,
        },
    };
    if args.uniform_kappa_prior || file.flag("uniform-kappa-prior")? {
        gibbs.kappa_prior = KappaPrior::Uniform;
    }
    let gamma = resolve(args.gamma, file, "gamma", DEFAULT_GAMMA)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(CliError::Usage(format!("--gamma must lie in (0, 1), got {gamma}")));
    }
    let format = match (args.draws_format, file.raw("draws-format")) {
        (Some(f), _) => f,
        (None, None | Some("csv")) => DrawFormat::Csv,
        (None, Some("binary")) => DrawFormat::Binary,
        (None, Some(other)) => {
            return Err(CliError::Usage(format!("config key 'draws-format': expected csv or binary, got '{other}'")))
        }
    };
    let data = resolve_opt(args.data.clone(), file, "data")?.ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let embed = embed_arg(args.embed, file)?;
    let scale = args.standardize || file.flag("standardize")?;
    // iteration and segment checks that do not need the data
    gibbs.validate(usize::MAX, 0)?;
    let order = resolve(args.scale_order, file, "scale-order", ScaleOrder::AfterEmbedding)?;
    let x = load_matrix(&data, embed, scale, order)?;
    Ok(Prepared { x, gibbs, gamma, format })
}

fn save_draws(draws: &PosteriorDraws, dir: &Path, stem: &str, format: DrawFormat) -> Result<PathBuf, CliError> {
    Ok(match format {
        DrawFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            draws.save_csv(&path)?;
            path
        }
        DrawFormat::Binary => {
            let path = dir.join(format!("{stem}.bin"));
            draws.save_binary(&path)?;
            path
        }
    })
}

fn save_summary(summary: &FitSummary, dir: &Path, stem: &str) -> Result<(), CliError> {
    summary.save(&dir.join(format!("{stem}.json")), &dir.join(format!("{stem}.csv")))?;
    Ok(())
}

fn print_changepoints(summary: &FitSummary) {
    for c in &summary.kappa.changepoints {
        println!(
            "kappa_{}: mode {} mean {:.1} interval [{}, {}]",
            c.index, c.mode, c.mean, c.lower, c.upper
        );
    }
}

pub fn simulate(args: SimulateArgs, file: &ConfigFile) -> Result<(), CliError> {
    let scenario: Scenario = parse_enum(args.scenario, file, "scenario")?.unwrap_or(Scenario::Cim);
    let variant: Variant = parse_enum(args.variant, file, "variant")?.unwrap_or(Variant::Low);
    let seed = resolve(args.seed, file, "seed", 0)?;
    let mut spec = ScenarioSpec::new(scenario, variant, seed);
    if let Some(n) = resolve_opt(args.n, file, "n")? {
        spec.n = n;
    }
    if let Some(k) = args.kappas {
        spec.kappas = k;
    } else if let Some(raw) = file.raw("kappas") {
        spec.kappas = raw
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("config key 'kappas': {e}")))?;
    }
    spec.truth()?;
    let dir = out_dir(&args.out, file)?;
    let (x, truth) = generate(&spec, &mut bcmlr::rng::stream(seed, 0))?;
    let data_path = dir.join("data.csv");
    data::write_csv(&x, &data_path)?;
    write_json(
        &dir.join("truth.json"),
        &serde_json::json!({
            "scenario": scenario.name(),
            "variant": variant.name(),
            "seed": seed,
            "n": x.n_rows(),
            "p": x.n_cols(),
            "changepoints": truth.kappas(),
        }),
    )?;
    println!("{} x {} -> {}", x.n_rows(), x.n_cols(), data_path.display());
    Ok(())
}

pub fn fit(args: FitArgs, file: &ConfigFile) -> Result<(), CliError> {
    let l = resolve_opt(args.num_changepoints, file, "num-changepoints")?
        .ok_or_else(|| CliError::Usage("--num-changepoints is required".into()))?;
    let temper = resolve_opt(args.temper, file, "temper")?;
    let temper_min = resolve(args.temper_min, file, "temper-min", 0.1)?;
    let schedule = temper.map(|k| TemperSchedule::geometric(k, temper_min)).transpose()?;
    let prep = prepare(&args.chain, file, 1)?;
    prep.gibbs.validate(prep.x.n_rows(), l)?;
    let dir = out_dir(&args.out, file)?;

    let draws = match &schedule {
        Some(s) => {
            let run = run_tempered(&prep.x, l, &prep.gibbs, s)?;
            run.save_rejection_csv(&dir.join("rejection.csv"))?;
            for (k, pair) in run.pairs.iter().enumerate() {
                println!("swap pair {}-{}: mean rejection {:.3}", k + 1, k + 2, pair.rejection_rate());
            }
            run.draws
        }
        None => run_chain(&prep.x, l, &prep.gibbs)?,
    };
    let path = save_draws(&draws, &dir, "draws", prep.format)?;
    let summary = FitSummary::compute(&draws, &prep.x, prep.gamma)?;
    save_summary(&summary, &dir, "summary")?;
    println!("{} draws -> {}", draws.n_draws(), path.display());
    print_changepoints(&summary);
    Ok(())
}

pub fn select(args: SelectArgs, file: &ConfigFile) -> Result<(), CliError> {
    let mut sel = SelectionConfig::new(
        resolve(args.l_fitted, file, "l-fitted", 10)?,
        resolve(args.zeta, file, "zeta", 5)?,
        1,
    );
    sel.alpha = resolve(args.alpha, file, "alpha", sel.alpha)?;
    sel.tau = resolve(args.tau, file, "tau", 0.5)?;
    sel.refit = args.refit || file.flag("refit")?;
    if let Some(b) = resolve_opt(args.bootstrap, file, "bootstrap")? {
        sel.ci = CiMethod::Bootstrap { resamples: b };
    }
    if args.score_all_rows || file.flag("score-all-rows")? {
        sel.eval_rows = EvalRows::All;
    }
    sel.min_seg = resolve(args.chain.min_seg, file, "min-seg", 10)?;
    sel.validate()?;
    let mut prep = prepare(&args.chain, file, sel.min_seg)?;
    prep.gibbs.min_seg = sel.min_seg;
    prep.gibbs.validate(prep.x.n_rows(), sel.l_fitted)?;
    let dir = out_dir(&args.out, file)?;

    let result = select_num_changepoints(&prep.x, &sel, &prep.gibbs)?;
    write_json(&dir.join("selection.json"), &result.to_json())?;
    println!("selected number of changepoints: {}", result.l_hat);
    for (count, prob) in result.top(3) {
        println!("  L = {count}: {prob:.3}");
    }
    if let Some(refit) = &result.refit {
        save_draws(refit, &dir, "refit_draws", prep.format)?;
        if refit.n_changepoints > 0 {
            let summary = FitSummary::compute(refit, &prep.x, prep.gamma)?;
            save_summary(&summary, &dir, "refit_summary")?;
            print_changepoints(&summary);
        }
    }
    Ok(())
}

pub fn bench(args: BenchArgs, file: &ConfigFile) -> Result<(), CliError> {
    let cases = if args.all || file.flag("all")? {
        BenchConfig::all_cases()
    } else {
        let scenario: Scenario = parse_enum(args.scenario, file, "scenario")?
            .ok_or_else(|| CliError::Usage("bench needs --scenario or --all".into()))?;
        match parse_enum::<Variant>(args.variant, file, "variant")? {
            Some(v) => vec![(scenario, v)],
            None => vec![(scenario, Variant::Low), (scenario, Variant::High)],
        }
    };
    let mut cfg = BenchConfig::new(cases, resolve(args.replicates, file, "replicates", 10)?);
    let known = args.known_l || file.flag("known-l")?;
    let unknown = args.unknown_l || file.flag("unknown-l")?;
    cfg.known_l = match (known, unknown) {
        (true, false) => vec![true],
        (false, true) => vec![false],
        _ => vec![true, false],
    };
    cfg.include_raw = !(args.embedded_only || file.flag("embedded-only")?);
    cfg.scale_order = resolve(args.scale_order, file, "scale-order", cfg.scale_order)?;
    cfg.horseshoe = match args.prior {
        Some(p) => p == PriorArg::Horseshoe,
        None => file.raw("prior").is_none_or(|p| p == "horseshoe"),
    };
    cfg.seed = resolve(args.seed, file, "seed", cfg.seed)?;
    cfg.iters = resolve(args.iters, file, "iters", cfg.iters)?;
    cfg.burn_in = resolve(args.burnin, file, "burnin", cfg.iters / 2)?;
    cfg.min_seg = resolve(args.min_seg, file, "min-seg", cfg.min_seg)?;
    cfg.l_fitted = resolve(args.l_fitted, file, "l-fitted", cfg.l_fitted)?;
    cfg.alpha = resolve(args.alpha, file, "alpha", cfg.alpha)?;
    cfg.tau = resolve(args.tau, file, "tau", cfg.tau)?;
    cfg.zeta = resolve(args.zeta, file, "zeta", cfg.zeta)?;
    cfg.gibbs(cfg.seed).validate(600, cfg.l_fitted.max(2))?;
    if cfg.known_l.contains(&false) {
        cfg.selection().validate()?;
    }
    let dir = out_dir(&args.out, file)?;

    let records = bench::run_benchmark(&cfg)?;
    let csv_path = dir.join("bench.csv");
    let f = std::fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    bench::write_records_csv(&records, std::io::BufWriter::new(f))?;
    let table = bench::format_table(&bench::summarize_records(&records));
    let txt_path = dir.join("bench.txt");
    std::fs::write(&txt_path, &table).map_err(|e| CliError::io(&txt_path, e))?;
    print!("{table}");
    Ok(())
}

pub fn summarize(args: SummarizeArgs, file: &ConfigFile) -> Result<(), CliError> {
    let gamma = resolve(args.gamma, file, "gamma", DEFAULT_GAMMA)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(CliError::Usage(format!("--gamma must lie in (0, 1), got {gamma}")));
    }
    let embed = embed_arg(args.embed, file)?;
    let order = resolve(args.scale_order, file, "scale-order", ScaleOrder::AfterEmbedding)?;
    let x = load_matrix(&args.data, embed, args.standardize || file.flag("standardize")?, order)?;
    let draws = PosteriorDraws::load(&args.draws, x.n_rows())?;
    if draws.n != x.n_rows() || (draws.n_changepoints > 0 && draws.p != x.n_cols()) {
        return Err(CliError::Usage(format!(
            "draws were fit on {} x {} data but --data is {} x {}",
            draws.n,
            draws.p,
            x.n_rows(),
            x.n_cols()
        )));
    }
    let dir = out_dir(&args.out, file)?;
    let summary = FitSummary::compute(&draws, &x, gamma)?;
    save_summary(&summary, &dir, "summary")?;
    print_changepoints(&summary);
    Ok(())
}
