//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any gated criterion fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iwt_core::config::PlantConfig;
use iwt_core::fit::dataset::{Dataset, ExperimentRecord, Provenance, Variable};
use iwt_core::fit::mlp::{Mlp, SearchSpace, TrainConfig};
use iwt_core::fit::poly::TermStructure;
use iwt_core::fit::predictor::{Model, Predictor};
use iwt_core::fit::ranking::{f_score, mutual_information_gain, other_variables};
use iwt_core::fit::reference::{self, SUMMARY};
use iwt_core::fit::stats::{pearson, quantile_sorted};
use iwt_core::fit::synth::synthesize_dataset;
use iwt_core::fit::tree::{fit_tree_model, TreeNode, TreeParams};
use iwt_core::fit::{fit_mlp, fit_polynomial, fit_tree, FitOptions, FitReport};
use iwt_core::nozzle::nozzle_temperature;
use iwt_core::sim::engine::Simulator;
use iwt_core::sim::scenario::{Action, Initial, Scenario};
use iwt_core::sim::trace::Trace;
use iwt_core::tank::{water_temp_rhs, WaterTankInput};
use iwt_core::test_section::lwc;
use iwt_core::units::celsius_to_kelvin;
use iwt_core::valve::{air_valve_flow, AirConditions};
use iwt_core::load_config;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn nozzle_polynomial() -> Outcome {
    let t = nozzle_temperature(-6.5, 70.4, 70.7, &Predictor::nozzle_temperature_polynomial());
    ensure((t - 38.70).abs() <= 0.01, || format!("T_n = {t}"))?;
    Ok(format!("T_n at the table means = {t:.4} °C"))
}

fn lwc_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a_ts = 0.8;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let q = rng.random_range(0.0..1e-3);
        let v = rng.random_range(1.0..80.0);
        let k = rng.random_range(0.01..100.0);
        let base = lwc(q, v, a_ts, 1000.0).unwrap();
        let kq = lwc(k * q, v, a_ts, 1000.0).unwrap();
        let kv = lwc(q, k * v, a_ts, 1000.0).unwrap();
        // Equal up to the rounding of the final product or quotient.
        let e1 = (kq - k * base).abs() / (f64::EPSILON * kq.abs().max(f64::MIN_POSITIVE));
        let e2 = (kv - base / k).abs() / (f64::EPSILON * kv.abs().max(f64::MIN_POSITIVE));
        worst = worst.max(e1).max(e2);
    }
    ensure(worst <= 4.0, || format!("homogeneity off by {worst} ulp"))?;
    ensure(lwc(0.0, 30.0, a_ts, 1000.0).unwrap() == 0.0, || "zero flow gave nonzero LWC".into())?;
    Ok(format!("1000 random cases, worst deviation {worst:.1} ulp; zero flow → 0"))
}

fn lwc_event_times(s: &Scenario) -> Vec<f64> {
    s.events
        .iter()
        .filter(|e| {
            matches!(
                e.action,
                Action::SetWaterSetpoint { .. } | Action::EnableValve { .. } | Action::DisableValve { .. } | Action::SetVTs { .. }
            )
        })
        .map(|e| e.t)
        .collect()
}

fn scenario_replication() -> Outcome {
    let dir = scenarios();
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let trace_path = out.path().join("trace.csv");
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_iwt"))
        .args(["simulate", "--scenario"])
        .arg(dir.join("reference_run.scenario.json"))
        .arg("--config")
        .arg(dir.join("reference_run.config.json"))
        .arg("--out")
        .arg(&trace_path)
        .env("IWT_LOG", "error")
        .status()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(status.code() == Some(0), || format!("exit status {status}"))?;
    ensure(elapsed < 5.0, || format!("took {elapsed:.2} s"))?;
    let trace = Trace::read_csv(std::fs::File::open(&trace_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(trace.rows.len() == 1201, || format!("{} rows", trace.rows.len()))?;

    let scenario = Scenario::load(&dir.join("reference_run.scenario.json")).map_err(|e| e.to_string())?;
    let mut boundaries: Vec<f64> = scenario.events.iter().map(|e| e.t).collect();
    boundaries.push(f64::INFINITY);
    let settle = 30.0;
    let mut worst_track = 0.0f64;
    for r in &trace.rows {
        let since = boundaries.iter().filter(|b| **b < r.t_s).fold(0.0f64, |a, b| a.max(*b));
        if r.t_s - since <= settle {
            continue;
        }
        for v in &r.valves {
            if v.water_enabled {
                worst_track = worst_track.max((v.water_flow_lph / v.water_setpoint_lph - 1.0).abs());
            }
            if v.air_enabled {
                worst_track = worst_track.max((v.air_flow_lpm / v.air_setpoint_lpm - 1.0).abs());
            }
        }
    }
    ensure(worst_track < 0.02, || format!("settled tracking error {:.2} %", 100.0 * worst_track))?;

    let events = lwc_event_times(&scenario);
    for w in trace.rows.windows(2) {
        let rel = (w[1].lwc_g_m3 - w[0].lwc_g_m3).abs() / w[0].lwc_g_m3;
        let t = w[1].t_s;
        ensure(rel <= 1e-4 || events.iter().any(|e| t > *e && t <= e + settle), || {
            format!("LWC moved by {rel:e} at t = {t} s, away from any flow/valve/v_TS event")
        })?;
    }

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in &trace.rows {
        let m = r.mvd_um.ok_or_else(|| format!("no MVD at t = {}", r.t_s))?;
        lo = lo.min(m);
        hi = hi.max(m);
    }
    ensure(lo >= 10.0 && hi <= 35.0, || format!("MVD spans [{lo:.2}, {hi:.2}] µm"))?;
    Ok(format!(
        "exit 0 in {elapsed:.2} s, 1201 rows, tracking within {:.3} %, MVD in [{lo:.1}, {hi:.1}] µm",
        100.0 * worst_track
    ))
}

fn air_valve_law() -> Outcome {
    let air = |ratio: f64| {
        let t_k = 300.0;
        let tank_pa = 5.0e5;
        AirConditions {
            density: tank_pa / (287.0 * t_k),
            temp_k: t_k,
            tank_pa,
            downstream_pa: ratio * tank_pa,
            gamma: 1.4,
            gas_constant: 287.0,
        }
    };
    let area = 1e-6;
    let at_one = air_valve_flow(area, &air(1.0)).map_err(|e| e.to_string())?;
    ensure(at_one == 0.0, || format!("flow at ratio 1 = {at_one}"))?;
    let n = 100_000;
    let (mut best_r, mut best_q) = (0.0, f64::NEG_INFINITY);
    for i in 1..n {
        let r = i as f64 / n as f64;
        let q = air_valve_flow(area, &air(r)).map_err(|e| e.to_string())?;
        if q > best_q {
            best_q = q;
            best_r = r;
        }
    }
    ensure((best_r - 0.528f64).abs() <= 0.001, || format!("maximum at ratio {best_r}"))?;
    Ok(format!("zero flow at ratio 1; maximum at ratio {best_r:.5}"))
}

fn tank_physics() -> Outcome {
    // Mass balance: with every valve at a fixed opening the level after n
    // Euler steps is the start level minus the summed outflow.
    let cfg = PlantConfig::default();
    let init = Initial { steady_state: true, ..Initial::default() };
    let mut sim = Simulator::new(cfg.clone(), &init).map_err(|e| e.to_string())?;
    let h0 = sim.state().h;
    let mut drained = 0.0;
    for _ in 0..200 {
        let out = cfg.rho_w * sim.state().total_water_flow();
        drained += cfg.dt_s * out / (cfg.rho_w * cfg.s1_m2);
        sim.step().map_err(|e| e.to_string())?;
    }
    let h = sim.state().h;
    let err = (h0 - drained - h).abs();
    ensure(err <= 1e-12, || format!("level mismatch {err:e} m"))?;

    // Temperature equilibrium: heater power balancing the leak is a fixed
    // point of the water temperature equation.
    let leaky = PlantConfig { kappa_w: 12.0, ..PlantConfig::default() };
    let t_w = 55.0;
    let input = WaterTankInput { mdot_in: 0.0, mdot_out: 0.0, t_in_k: celsius_to_kelvin(20.0), p_heat: 12.0 * t_w };
    let rate = water_temp_rhs(0.5, t_w, &input, &leaky).map_err(|e| e.to_string())?;
    ensure(rate == 0.0, || format!("dT/dt at equilibrium = {rate:e}"))?;
    let quiet = Initial {
        water_setpoint_lph: 0.0,
        air_setpoint_lpm: 0.0,
        t_w_c: t_w,
        heater_water_w: 12.0 * t_w,
        p_a_bar: Some(7.0),
        t_a_c: iwt_core::units::kelvin_to_celsius(leaky.air_supply_temp_k),
        ..Initial::default()
    };
    let mut still = Simulator::new(leaky, &quiet).map_err(|e| e.to_string())?;
    for _ in 0..100 {
        still.step().map_err(|e| e.to_string())?;
    }
    ensure(still.state().t_w == t_w, || format!("T_w drifted to {}", still.state().t_w))?;

    // Step halving on the shipped scenario.
    let dir = scenarios();
    let cfg = load_config(&dir.join("reference_run.config.json")).map_err(|e| e.to_string())?;
    let scenario = Scenario::load(&dir.join("reference_run.scenario.json")).map_err(|e| e.to_string())?;
    let coarse = Simulator::run(cfg.clone(), &scenario).map_err(|e| e.to_string())?.trace;
    let mut fine_cfg = cfg;
    fine_cfg.dt_s = 0.5;
    fine_cfg.retune_gains();
    let fine = Simulator::run(fine_cfg, &Scenario { step_s: 0.5, ..scenario.clone() })
        .map_err(|e| e.to_string())?
        .trace;
    let mut worst = 0.0f64;
    for t in lwc_event_times(&scenario).into_iter().chain([scenario.duration_s]) {
        let a = coarse.rows[t as usize].lwc_g_m3;
        let b = fine.rows[(2.0 * t) as usize].lwc_g_m3;
        worst = worst.max((a - b).abs() / a);
    }
    ensure(worst < 0.01, || format!("settled LWC moved {:.3} % on halving", 100.0 * worst))?;
    Ok(format!(
        "mass balance to {err:.1e} m, equilibrium exact, Δt halving moves settled LWC {:.4} %",
        100.0 * worst
    ))
}

fn planted_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|_| {
            let mut v = [0.0; 9];
            for x in v.iter_mut() {
                *x = rng.random_range(-2.0..2.0);
            }
            ExperimentRecord::from_array(v)
        })
        .collect();
    Dataset::new(records, Provenance::Synthetic)
}

fn fitting_pipeline() -> Outcome {
    let start = Instant::now();
    let mut reports: Vec<FitReport> = Vec::new();

    // OLS on noiseless planted data.
    let mut ds = planted_dataset(200, 5);
    let inputs = [Variable::TTs, Variable::Tw, Variable::Ta];
    let planted = [2.5, -1.25, 0.75, 3.0, 0.5, -0.2, 1.1, 0.05];
    let exps = TermStructure::Interactions { max_order: 3, intercept: true }.exponents(3);
    let truth = Predictor::new(
        inputs.to_vec(),
        Variable::Tn,
        Model::Polynomial(iwt_core::fit::poly::Polynomial::from_terms(
            &exps.iter().zip(planted).map(|(e, c)| (c, e.as_slice())).collect::<Vec<_>>(),
        )),
    );
    for r in &mut ds.records {
        r.t_n = truth.evaluate_record(r);
    }
    let (fitted, report) = fit_polynomial(
        &ds,
        &inputs,
        Variable::Tn,
        &TermStructure::Interactions { max_order: 3, intercept: true },
        &FitOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let Model::Polynomial(p) = &fitted.model else { return Err("not a polynomial".into()) };
    let coef_err = p.terms.iter().zip(planted).map(|(t, c)| (t.coefficient - c).abs()).fold(0.0, f64::max);
    ensure(coef_err <= 1e-9, || format!("OLS coefficient error {coef_err:e}"))?;
    reports.push(report);

    // CART on a piecewise-constant target.
    let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
    let step = 0.37;
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let y: Vec<f64> = xs.iter().map(|&x| if x <= step { -1.0 } else { 4.0 }).collect();
    let tree = fit_tree_model(&rows, &y, TreeParams::default());
    let train_mse = rows.iter().zip(&y).map(|(r, t)| (tree.evaluate(r) - t).powi(2)).sum::<f64>() / y.len() as f64;
    ensure(train_mse == 0.0, || format!("tree training MSE {train_mse}"))?;
    let TreeNode::Split { threshold, .. } = &tree.nodes[0] else { return Err("tree did not split".into()) };
    ensure((threshold - step).abs() <= 0.02, || format!("threshold {threshold} vs step {step}"))?;

    // MLP gradients against central differences.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let candidates = SearchSpace::full().candidates();
    let mut worst_grad = 0.0f64;
    for _ in 0..20 {
        let (hidden, act) = candidates[rng.random_range(0..candidates.len())].clone();
        let n_in = rng.random_range(1..5);
        let net = Mlp::random(n_in, &hidden, act, &mut rng);
        let xs: Vec<Vec<f64>> = (0..6).map(|_| (0..n_in).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
        let ys: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, analytic) = net.loss_and_gradient(&xs, &ys);
        let p0 = net.parameters();
        let mut probe = net.clone();
        let h = 1e-6;
        let numeric: Vec<f64> = (0..p0.len())
            .map(|k| {
                let mut p = p0.clone();
                p[k] += h;
                probe.set_parameters(&p);
                let up = probe.loss_and_gradient(&xs, &ys).0;
                p[k] -= 2.0 * h;
                probe.set_parameters(&p);
                let down = probe.loss_and_gradient(&xs, &ys).0;
                (up - down) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12);
        worst_grad = worst_grad.max(rel);
    }
    ensure(worst_grad <= 1e-5, || format!("gradient relative error {worst_grad:e}"))?;

    // MAE ≤ RMSE on every report from each model kind.
    let synth = synthesize_dataset(300, 3).map_err(|e| e.to_string())?;
    let t_inputs = [Variable::TTs, Variable::Tw, Variable::Ta];
    reports.push(
        fit_polynomial(&synth, &t_inputs, Variable::Tn, &TermStructure::Linear, &FitOptions::default())
            .map_err(|e| e.to_string())?
            .1,
    );
    reports.push(
        fit_tree(&synth, &t_inputs, Variable::Tn, TreeParams::default(), &FitOptions::default())
            .map_err(|e| e.to_string())?
            .1,
    );
    let space = SearchSpace { hidden_layers: vec![1, 2], neurons: vec![2, 4], activations: SearchSpace::full().activations };
    let train = TrainConfig { epochs: 200, ..TrainConfig::default() };
    reports.push(
        fit_mlp(&synth, &t_inputs, Variable::Tn, &space, &train, &FitOptions::default())
            .map_err(|e| e.to_string())?
            .1,
    );
    ensure(reports.iter().all(FitReport::mae_within_rmse), || "a report has MAE > RMSE".into())?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 60.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!(
        "OLS error {coef_err:.1e}, tree split at {threshold}, gradient error {worst_grad:.1e}, {} reports with MAE ≤ RMSE, {elapsed:.1} s",
        reports.len()
    ))
}

fn synthetic_dataset() -> Outcome {
    let start = Instant::now();
    let ds = synthesize_dataset(10_000, 2024).map_err(|e| e.to_string())?;
    let mut worst = (0.0f64, String::new());
    for v in Variable::ALL {
        let mut col = ds.column(v);
        col.sort_by(f64::total_cmp);
        for (row, p, label) in [
            (reference::MIN, 0.0, "min"),
            (reference::Q25, 0.25, "25%"),
            (reference::Q50, 0.5, "50%"),
            (reference::Q75, 0.75, "75%"),
            (reference::MAX, 1.0, "max"),
        ] {
            let target = SUMMARY[row][v.index()];
            let rel = (quantile_sorted(&col, p) - target).abs() / target.abs();
            if rel > worst.0 {
                worst = (rel, format!("{v} {label}"));
            }
        }
    }
    ensure(worst.0 <= 0.05, || format!("{} off by {:.2} %", worst.1, 100.0 * worst.0))?;
    let r = pearson(&ds.column(Variable::Mvd), &ds.column(Variable::Qa));
    ensure((r + 0.83).abs() <= 0.08, || format!("corr(MVD, Q_a) = {r:.3}"))?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!(
        "worst quantile deviation {:.2} % ({}), corr(MVD, Q_a) = {r:.3}, {elapsed:.2} s",
        100.0 * worst.0,
        worst.1
    ))
}

fn feature_ranking() -> Outcome {
    let ds = synthesize_dataset(1000, 42).map_err(|e| e.to_string())?;
    let ranked = mutual_information_gain(&ds, Variable::Tn, &other_variables(Variable::Tn)).map_err(|e| e.to_string())?;
    let pos = |v: Variable| ranked.iter().position(|(x, _)| *x == v).unwrap();
    for top in [Variable::Tw, Variable::TTs, Variable::Ta] {
        for low in [Variable::Qa, Variable::VTs] {
            ensure(pos(top) < pos(low), || format!("{top} ranks below {low}: {ranked:?}"))?;
        }
    }
    let mut constant = ds.clone();
    for r in &mut constant.records {
        r.v_ts = 25.0;
    }
    let f = f_score(&constant, Variable::Tn, &[Variable::VTs, Variable::Tw]).map_err(|e| e.to_string())?;
    let fv = f.iter().find(|(v, _)| *v == Variable::VTs).unwrap().1;
    ensure(fv == 0.0, || format!("constant feature F = {fv}"))?;
    let order: Vec<&str> = ranked.iter().map(|(v, _)| v.name()).collect();
    Ok(format!("MIG order for T_n: {}; constant feature F = 0", order.join(" > ")))
}

/// Not gated: prints this artifact's scores next to the published ones.
fn reference_report() -> String {
    let ds = match synthesize_dataset(1000, 42) {
        Ok(ds) => ds,
        Err(e) => return format!("synthesis failed: {e}"),
    };
    let mut lines = Vec::new();
    let opts = FitOptions::default();
    let t_inputs = [Variable::TTs, Variable::Tw, Variable::Ta];
    if let Ok((_, r)) = fit_polynomial(&ds, &t_inputs, Variable::Tn, &TermStructure::Linear, &opts) {
        let (_, mse, mae) = reference::NOZZLE_TEMPERATURE_MODELS[0];
        lines.push(format!(
            "T_n polynomial: synthetic cv MSE {:.2} MAE {:.2}; published MSE {mse} MAE {mae}",
            r.cv.as_ref().map_or(f64::NAN, |c| c.mean_mse),
            r.cv.as_ref().map_or(f64::NAN, |c| c.mean_mae)
        ));
    }
    let m_inputs = iwt_core::fit::predictor::mvd_inputs();
    if let Ok((_, r)) = fit_tree(&ds, &m_inputs, Variable::Mvd, TreeParams::default(), &opts) {
        let (_, mse, mae) = reference::MVD_MODELS[2];
        lines.push(format!(
            "MVD tree: synthetic cv MSE {:.2} MAE {:.2}; published MSE {mse} MAE {mae}",
            r.cv.as_ref().map_or(f64::NAN, |c| c.mean_mse),
            r.cv.as_ref().map_or(f64::NAN, |c| c.mean_mae)
        ));
    }
    lines.push("table comparison runs through `iwt describe --reference` on the original 30-row data, which is not distributed".into());
    lines.join("\n        ")
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("T_n polynomial fidelity", nozzle_polynomial),
        ("LWC law", lwc_law),
        ("Shipped scenario replication", scenario_replication),
        ("Air-valve law", air_valve_law),
        ("Tank physics", tank_physics),
        ("Fitting pipeline", fitting_pipeline),
        ("Synthetic dataset", synthetic_dataset),
        ("Feature-ranking oracles", feature_ranking),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("INFO  Reference-number reporting (not gated): {}", reference_report());
    println!("{} of 8 gated criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
