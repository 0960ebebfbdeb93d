use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use iwt_core::fit::dataset::{Dataset, Provenance, Variable};
use iwt_core::fit::mlp::{SearchSpace, TrainConfig};
use iwt_core::fit::poly::TermStructure;
use iwt_core::fit::reference::{self, CORRELATION, PRINTED_TOLERANCE, SUMMARY};
use iwt_core::fit::stats::{correlation_matrix, describe as summarize_dataset};
use iwt_core::fit::synth::synthesize_dataset;
use iwt_core::fit::tree::TreeParams;
use iwt_core::fit::{default_inputs, fit_mlp, fit_polynomial, fit_tree, ranking, FitOptions, FitReport};
use iwt_core::sim::engine::Simulator;
use iwt_core::{load_config, PlantConfig, Scenario};

use crate::{Failure, ModelKind, PolyStructure, Search, TraceFormat};

pub type CmdResult = Result<(), Failure>;

/// Plant configuration from a file, or the defaults.
pub fn plant_config(path: Option<&Path>) -> Result<PlantConfig, Failure> {
    match path {
        Some(p) => load_config(p).map_err(|e| Failure::usage(anyhow!(e).context(format!("config {}", p.display())))),
        None => Ok(PlantConfig::default()),
    }
}

/// Aligns the plant step with the scenario step, retuning the PI gains
/// for the new step.
pub fn align_step(cfg: &mut PlantConfig, scenario: &Scenario) {
    if cfg.dt_s != scenario.step_s {
        log::info!("using the scenario step {} s (config had {} s); PI gains retuned", scenario.step_s, cfg.dt_s);
        cfg.dt_s = scenario.step_s;
        cfg.retune_gains();
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| Failure::usage(anyhow!(e).context(format!("scenario {}", path.display()))))
}

pub fn simulate(scenario_path: &Path, config: Option<&Path>, out: &Path, format: Option<TraceFormat>) -> CmdResult {
    let scenario = load_scenario(scenario_path)?;
    let mut cfg = plant_config(config)?;
    align_step(&mut cfg, &scenario);
    let format = format.unwrap_or_else(|| match out.extension().and_then(|e| e.to_str()) {
        Some("json") => TraceFormat::Json,
        _ => TraceFormat::Csv,
    });
    let outcome = Simulator::run(cfg, &scenario).map_err(|e| Failure::usage(anyhow!(e)))?;
    let file = File::create(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(Failure::Usage)?;
    let w = BufWriter::new(file);
    match format {
        TraceFormat::Csv => outcome.trace.write_csv(w),
        TraceFormat::Json => outcome.trace.write_json(w),
    }
    .with_context(|| format!("writing {}", out.display()))
    .map_err(Failure::Usage)?;
    println!("wrote {} rows to {}", outcome.trace.rows.len(), out.display());
    match outcome.halt {
        Some(h) => Err(Failure::Halt(anyhow!(h))),
        None => Ok(()),
    }
}

fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    let f = File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::Usage)?;
    Dataset::read_csv(BufReader::new(f), Provenance::Real)
        .map_err(|e| Failure::usage(anyhow!(e).context(format!("dataset {}", path.display()))))
}

fn parse_variable(name: &str) -> Result<Variable, Failure> {
    name.parse::<Variable>().map_err(Failure::usage)
}

pub struct FitArgs {
    pub data: PathBuf,
    pub target: String,
    pub kind: ModelKind,
    pub out: PathBuf,
    pub inputs: Option<Vec<String>>,
    pub structure: PolyStructure,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub search: Search,
    pub epochs: usize,
    pub folds: usize,
    pub seed: u64,
    pub report: Option<PathBuf>,
}

pub fn fit(args: FitArgs) -> CmdResult {
    let ds = read_dataset(&args.data)?;
    let target = parse_variable(&args.target)?;
    let inputs = match &args.inputs {
        Some(names) => names.iter().map(|n| parse_variable(n)).collect::<Result<Vec<_>, _>>()?,
        None => default_inputs(target),
    };
    let opts = FitOptions { folds: args.folds, seed: args.seed };
    let fitted = match args.kind {
        ModelKind::Polynomial => {
            let structure = match args.structure {
                PolyStructure::Linear => TermStructure::Linear,
                PolyStructure::Interactions => TermStructure::Interactions { max_order: inputs.len(), intercept: true },
                PolyStructure::Factor => TermStructure::FactorTimesInteractions { factor: 0 },
            };
            fit_polynomial(&ds, &inputs, target, &structure, &opts).map(|(p, r)| (p, r, Vec::new()))
        }
        ModelKind::Tree => fit_tree(
            &ds,
            &inputs,
            target,
            TreeParams { max_depth: args.max_depth, min_leaf: args.min_leaf },
            &opts,
        )
        .map(|(p, r)| (p, r, Vec::new())),
        ModelKind::Mlp => {
            let space = match args.search {
                Search::Coarse => SearchSpace::coarse(),
                Search::Full => SearchSpace::full(),
            };
            let train = TrainConfig { epochs: args.epochs, seed: args.seed, ..TrainConfig::default() };
            fit_mlp(&ds, &inputs, target, &space, &train, &opts)
        }
    };
    let (predictor, report, candidates) = fitted.map_err(Failure::usage)?;
    predictor
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(Failure::Usage)?;
    print_report(&report);
    if !candidates.is_empty() {
        let mut ranked: Vec<_> = candidates.iter().filter_map(|c| c.cv_mse.map(|m| (m, c))).collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
        println!("best candidates (of {}):", candidates.len());
        for (m, c) in ranked.iter().take(5) {
            println!("  {:?} {:?}  cv MSE {m:.4}", c.hidden, c.activation);
        }
    }
    print_published(target);
    if let Some(path) = &args.report {
        let f = File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(Failure::Usage)?;
        serde_json::to_writer_pretty(BufWriter::new(f), &report)
            .context("writing report")
            .map_err(Failure::Usage)?;
    }
    println!("model written to {}", args.out.display());
    Ok(())
}

fn print_report(r: &FitReport) {
    let names: Vec<&str> = r.inputs.iter().map(|v| v.name()).collect();
    println!("model      {}", r.model);
    println!("target     {}", r.target);
    println!("inputs     {}", names.join(", "));
    println!("rows       {}", r.rows);
    println!("seed       {}", r.seed);
    println!("params     {}", r.hyperparameters);
    println!("{:<12}{:>12}{:>12}", "", "MSE", "MAE");
    println!("{:<12}{:>12.4}{:>12.4}", "in-sample", r.in_sample.mse, r.in_sample.mae);
    if let Some(cv) = &r.cv {
        for (i, (m, a)) in cv.fold_mse.iter().zip(&cv.fold_mae).enumerate() {
            println!("{:<12}{:>12.4}{:>12.4}", format!("fold {}", i + 1), m, a);
        }
        println!("{:<12}{:>12.4}{:>12.4}", format!("cv mean/{}", cv.k), cv.mean_mse, cv.mean_mae);
    } else {
        println!("cross-validation skipped: fewer rows than folds");
    }
}

fn print_published(target: Variable) {
    let table: &[(&str, f64, f64)] = match target {
        Variable::Tn => &reference::NOZZLE_TEMPERATURE_MODELS,
        Variable::Mvd => &reference::MVD_MODELS,
        _ => return,
    };
    println!("published figures for {target} (for comparison only):");
    for (name, mse, mae) in table {
        println!("  {name:<32} MSE {mse:>7.2}  MAE {mae:>5.2}");
    }
}

pub fn describe(path: &Path, compare: bool, target: &str) -> CmdResult {
    let ds = read_dataset(path)?;
    let target = parse_variable(target)?;
    let stats = summarize_dataset(&ds).map_err(Failure::usage)?;
    let mut out = std::io::stdout().lock();
    let header = ["", "mean", "std", "min", "25%", "50%", "75%", "max"];
    let _ = writeln!(out, "{} rows", ds.len());
    let _ = writeln!(out, "{:<8}{}", header[0], header[1..].iter().map(|h| format!("{h:>10}")).collect::<String>());
    for (v, s) in &stats {
        let _ = writeln!(out, "{:<8}{}", v.name(), s.as_array().iter().map(|x| format!("{x:>10.2}")).collect::<String>());
    }
    let corr = correlation_matrix(&ds).map_err(Failure::usage)?;
    let _ = writeln!(out, "\ncorrelation");
    let _ = writeln!(out, "{:<8}{}", "", Variable::ALL.iter().map(|v| format!("{:>7}", v.name())).collect::<String>());
    for (i, v) in Variable::ALL.iter().enumerate() {
        let _ = writeln!(out, "{:<8}{}", v.name(), corr[i].iter().map(|x| format!("{x:>7.2}")).collect::<String>());
    }
    if ds.len() >= 10 {
        let features = ranking::other_variables(target);
        let mig = ranking::mutual_information_gain(&ds, target, &features).map_err(Failure::usage)?;
        let f = ranking::f_score(&ds, target, &features).map_err(Failure::usage)?;
        let _ = writeln!(out, "\nranking for {target}");
        let _ = writeln!(out, "{:<8}{:>10}    {:<8}{:>12}", "MIG", "nats", "F-score", "F");
        for ((mv, m), (fv, fs)) in mig.iter().zip(&f) {
            let _ = writeln!(out, "{:<8}{:>10.4}    {:<8}{:>12.2}", mv.name(), m, fv.name(), fs);
        }
    }
    if compare {
        let _ = writeln!(out, "\ncomparison with the published tables (tolerance {PRINTED_TOLERANCE})");
        let mut mismatches = 0;
        for (j, (v, s)) in stats.iter().enumerate() {
            for (k, (got, want)) in s.as_array().iter().zip(SUMMARY.iter().map(|row| row[j])).enumerate() {
                if (got - want).abs() > PRINTED_TOLERANCE {
                    mismatches += 1;
                    let _ = writeln!(out, "  summary {} {}: {got:.3} vs {want}", v.name(), header[k + 1]);
                }
            }
        }
        for i in 0..9 {
            for j in (i + 1)..9 {
                if (corr[i][j] - CORRELATION[i][j]).abs() > PRINTED_TOLERANCE {
                    mismatches += 1;
                    let _ = writeln!(
                        out,
                        "  corr({}, {}): {:.3} vs {}",
                        Variable::ALL[i].name(),
                        Variable::ALL[j].name(),
                        corr[i][j],
                        CORRELATION[i][j]
                    );
                }
            }
        }
        let _ = writeln!(out, "{mismatches} entries outside tolerance");
    }
    Ok(())
}

pub fn synthesize(n: usize, seed: u64, out: &Path) -> CmdResult {
    let ds = synthesize_dataset(n, seed).map_err(Failure::usage)?;
    let f = File::create(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(Failure::Usage)?;
    ds.write_csv(BufWriter::new(f)).map_err(Failure::usage)?;
    println!("wrote {n} synthetic rows to {}", out.display());
    Ok(())
}
