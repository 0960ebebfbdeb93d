//! Explicit Euler integration of the plant on a fixed grid.
//!
//! One step advances the tanks with the flows of the previous step, then
//! runs the PI loops on the previous measured flows, then recomputes the
//! algebraic outputs: valve flows, nozzle velocity, T_n, LWC and MVD.

use std::collections::BTreeSet;

use crate::config::{nominal_water_gain, validate_config, LwcFlowMode, PlantConfig, WaterDropModel};
use crate::fit::dataset::Variable;
use crate::fit::reference::{MAX, MIN, SUMMARY};
use crate::nozzle::{nozzle_temperature, outlet_velocity};
use crate::state::{ConduitState, PlantState};
use crate::tank::{
    air_density_rhs, air_temp_rhs, water_level_rhs, water_temp_rhs, AirTankInput, TankError, WaterTankInput,
    EMPTY_LEVEL_M,
};
use crate::test_section::{lwc, mvd};
use crate::units::{bar_to_pa, celsius_to_kelvin, lph_to_m3s, lpm_to_m3s, m3s_to_lpm};
use crate::valve::{air_valve_flow, pi_step, water_flow_for_drop, water_valve_flow, AirConditions};

use super::scenario::{check_action, Action, Initial, Line, Scenario, TankKind};
use super::trace::{Trace, TraceRow};
use super::SimError;

/// Upper LWC guard, g/m³: the largest observed value plus half.
pub const LWC_GUARD: f64 = 2.5 * 1.5;
/// MVD guard band, µm.
pub const MVD_GUARD: (f64, f64) = (10.0, 48.8 * 1.1);

fn envelope(var: Variable) -> (f64, f64) {
    (SUMMARY[MIN][var.index()], SUMMARY[MAX][var.index()])
}

fn outside(var: Variable, x: f64) -> bool {
    let (lo, hi) = envelope(var);
    x < lo || x > hi
}

#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: PlantConfig,
    state: PlantState,
    step: u64,
    water_inflow_temp_k: f64,
    warnings: Vec<String>,
    logged: BTreeSet<String>,
}

/// Result of [`Simulator::run`]. On a halt the trace holds every row up to
/// the last valid state.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Trace,
    pub halt: Option<SimError>,
}

impl Simulator {
    pub fn new(cfg: PlantConfig, init: &Initial) -> Result<Self, SimError> {
        let violations = validate_config(&cfg);
        if !violations.is_empty() {
            return Err(SimError::InvalidConfig(violations));
        }
        let n = cfg.n_conduits;
        if init.level_m > cfg.tank_height_m {
            return Err(SimError::InvalidScenario(format!(
                "initial.level_m {} exceeds the tank height {}",
                init.level_m, cfg.tank_height_m
            )));
        }
        if let Some(en) = &init.enabled {
            if let Some(bad) = en.iter().find(|c| **c == 0 || **c > n) {
                return Err(SimError::InvalidScenario(format!("initial.enabled: conduit {bad} outside 1..={n}")));
            }
        }
        let mut conduits = vec![ConduitState::new(lph_to_m3s(init.water_setpoint_lph), lpm_to_m3s(init.air_setpoint_lpm)); n];
        if let Some(en) = &init.enabled {
            for (i, c) in conduits.iter_mut().enumerate() {
                let on = en.contains(&(i + 1));
                c.water_valve.enabled = on;
                c.air_valve.enabled = on;
            }
        }
        for (name, w, max) in [
            ("heater_water_w", init.heater_water_w, cfg.water_heater_max_w),
            ("heater_air_w", init.heater_air_w, cfg.air_heater_max_w),
        ] {
            if !(0.0..=max).contains(&w) {
                return Err(SimError::InvalidScenario(format!("initial.{name} must lie in [0, {max}] W")));
            }
        }

        let t_a_k = celsius_to_kelvin(init.t_a_c);
        let p_a = match init.p_a_bar {
            Some(p) => bar_to_pa(p),
            None if init.steady_state => {
                let demand: f64 = conduits.iter().filter(|c| c.air_valve.enabled).map(|c| c.air_setpoint).sum();
                cfg.air_supply_pa / (1.0 + demand / (cfg.air_supply_conductance * cfg.gas_constant * t_a_k))
            }
            None => cfg.air_supply_pa,
        };
        let state = PlantState {
            h: init.level_m,
            t_w: init.t_w_c,
            rho_a: p_a / (cfg.gas_constant * t_a_k),
            t_a: init.t_a_c,
            conduits,
            t_ts: init.t_ts_c,
            v_ts: init.v_ts_mps,
            p_heat_w: init.heater_water_w,
            p_heat_a: init.heater_air_w,
            water_inflow: init.water_inflow_kg_s,
            t_n: 0.0,
            lwc: 0.0,
            mvd: None,
            nozzle_velocity: 0.0,
        };
        let mut sim = Self {
            water_inflow_temp_k: cfg.water_inflow_temp_k,
            cfg,
            state,
            step: 0,
            warnings: Vec::new(),
            logged: BTreeSet::new(),
        };
        if init.steady_state {
            sim.preload_valves();
        }
        sim.evaluate()?;
        Ok(sim)
    }

    /// Opens every enabled valve to the area that delivers its setpoint at
    /// the initial tank state, with the integrator holding that area.
    fn preload_valves(&mut self) {
        let a_max = self.cfg.valve.max_area_m2;
        let gains = (self.cfg.water_gains, self.cfg.air_gains);
        let air_gain = {
            let t_k = celsius_to_kelvin(self.state.t_a);
            (0..self.cfg.n_conduits)
                .map(|i| {
                    air_valve_flow(a_max, &self.air_conditions(i, t_k)).map(|q| q / a_max).unwrap_or(0.0)
                })
                .collect::<Vec<_>>()
        };
        for i in 0..self.cfg.n_conduits {
            let water_gain = match self.cfg.water_drop_model {
                WaterDropModel::TankPressure => self.tank_pressure_flow(i, a_max).flow_m3s / a_max,
                WaterDropModel::XiVelocity => nominal_water_gain(&self.cfg),
            };
            let c = &mut self.state.conduits[i];
            for (valve, setpoint, gain, ki) in [
                (&mut c.water_valve, c.water_setpoint, water_gain, gains.0.ki),
                (&mut c.air_valve, c.air_setpoint, air_gain[i], gains.1.ki),
            ] {
                if !valve.enabled || gain <= 0.0 {
                    continue;
                }
                valve.area_m2 = (setpoint / gain).clamp(0.0, a_max);
                valve.integral = if ki > 0.0 { valve.area_m2 / ki } else { 0.0 };
            }
        }
    }

    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt_s
    }

    /// Warnings raised by the latest evaluation.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn row(&self) -> TraceRow {
        TraceRow::from_state(self.step, self.time(), &self.state, &self.cfg, &self.warnings)
    }

    /// Checks an action against the configuration without applying it.
    pub fn check(&self, action: &Action) -> Result<(), SimError> {
        check_action(action, self.cfg.n_conduits).map_err(SimError::InvalidAction)?;
        if let Action::SetHeater { tank, watts } = action {
            let max = match tank {
                TankKind::Water => self.cfg.water_heater_max_w,
                TankKind::Air => self.cfg.air_heater_max_w,
            };
            if *watts > max {
                return Err(SimError::InvalidAction(format!("heater power {watts} W exceeds the {max} W rating")));
            }
        }
        Ok(())
    }

    /// Applies an operator action. It takes effect on the next step.
    pub fn apply(&mut self, action: &Action) -> Result<(), SimError> {
        self.check(action)?;
        let s = &mut self.state;
        let select = |conduit: &Option<usize>, n: usize| match conduit {
            Some(c) => (c - 1)..*c,
            None => 0..n,
        };
        let n = s.conduits.len();
        match action {
            Action::SetWaterSetpoint { lph, conduit } => {
                for c in &mut s.conduits[select(conduit, n)] {
                    c.water_setpoint = lph_to_m3s(*lph);
                }
            }
            Action::SetAirSetpoint { lpm, conduit } => {
                for c in &mut s.conduits[select(conduit, n)] {
                    c.air_setpoint = lpm_to_m3s(*lpm);
                }
            }
            Action::EnableValve { conduit, line } | Action::DisableValve { conduit, line } => {
                let on = matches!(action, Action::EnableValve { .. });
                let c = &mut s.conduits[conduit - 1];
                let mut valves = Vec::with_capacity(2);
                if matches!(line, Line::Water | Line::Both) {
                    valves.push(&mut c.water_valve);
                }
                if matches!(line, Line::Air | Line::Both) {
                    valves.push(&mut c.air_valve);
                }
                for v in valves {
                    if v.enabled != on {
                        v.enabled = on;
                        v.area_m2 = 0.0;
                        v.integral = 0.0;
                    }
                }
            }
            Action::SetTTs { celsius } => s.t_ts = *celsius,
            Action::SetVTs { mps } => s.v_ts = *mps,
            Action::SetHeater { tank: TankKind::Water, watts } => s.p_heat_w = *watts,
            Action::SetHeater { tank: TankKind::Air, watts } => s.p_heat_a = *watts,
            Action::SetWaterInflow { kg_per_s, temp_c } => {
                s.water_inflow = *kg_per_s;
                if let Some(t) = temp_c {
                    self.water_inflow_temp_k = celsius_to_kelvin(*t);
                }
            }
        }
        Ok(())
    }

    fn halt_context(&self) -> (u64, f64) {
        (self.step + 1, (self.step + 1) as f64 * self.cfg.dt_s)
    }

    /// Advances one step. On error the state is left at the last valid
    /// step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let cfg = &self.cfg;
        let dt = cfg.dt_s;
        let (step, t_s) = self.halt_context();
        let s = &self.state;
        let tank_err = |source: TankError| SimError::Tank { step, t_s, source };

        let water = WaterTankInput {
            mdot_in: s.water_inflow,
            mdot_out: cfg.rho_w * s.total_water_flow(),
            t_in_k: self.water_inflow_temp_k,
            p_heat: s.p_heat_w,
        };
        let p_a = s.air_pressure(cfg.gas_constant);
        let air = AirTankInput {
            mdot_in: (cfg.air_supply_conductance * (cfg.air_supply_pa - p_a)).max(0.0),
            mdot_out: s.rho_a * s.total_air_flow(),
            t_in_k: cfg.air_supply_temp_k,
            p_heat: s.p_heat_a,
        };
        let h = s.h + dt * water_level_rhs(&water, cfg);
        let t_w = s.t_w + dt * water_temp_rhs(s.h, s.t_w, &water, cfg).map_err(tank_err)?;
        let rho_a = s.rho_a + dt * air_density_rhs(&air, cfg);
        let t_a = s.t_a + dt * air_temp_rhs(s.rho_a, s.t_a, &air, cfg).map_err(tank_err)?;

        if h < EMPTY_LEVEL_M {
            return Err(tank_err(TankError::EmptyTank { level_m: h }));
        }
        if h > cfg.tank_height_m {
            return Err(SimError::Overflow { step, t_s, level_m: h });
        }
        if rho_a <= 0.0 {
            return Err(tank_err(TankError::NoAirMass { mass_kg: rho_a * cfg.v_at_m3 }));
        }
        for (what, x) in [("T_w", t_w), ("T_a", t_a), ("rho_a", rho_a), ("h", h)] {
            if !x.is_finite() {
                return Err(SimError::NonFinite { step, t_s, what });
            }
        }

        let a_max = cfg.valve.max_area_m2;
        let conduits: Vec<ConduitState> = s
            .conduits
            .iter()
            .map(|c| ConduitState {
                water_valve: pi_step(c.water_valve, c.water_setpoint, c.q_wv, &cfg.water_gains, a_max, dt),
                air_valve: pi_step(c.air_valve, c.air_setpoint, c.q_av, &cfg.air_gains, a_max, dt),
                ..*c
            })
            .collect();

        let next = PlantState {
            h,
            t_w,
            rho_a,
            t_a,
            conduits,
            ..s.clone()
        };
        let previous = std::mem::replace(&mut self.state, next);
        self.step += 1;
        if let Err(e) = self.evaluate() {
            self.state = previous;
            self.step -= 1;
            return Err(e);
        }
        Ok(())
    }

    fn tank_pressure_flow(&self, i: usize, area: f64) -> crate::valve::WaterFlow {
        let cfg = &self.cfg;
        let dp = cfg.p0_pa + cfg.rho_w * crate::units::STANDARD_GRAVITY * self.state.h - cfg.downstream_pa[i];
        water_flow_for_drop(area, &cfg.valve, cfg.rho_w, dp, cfg.cd_mode)
    }

    fn air_conditions(&self, i: usize, t_k: f64) -> AirConditions {
        AirConditions {
            density: self.state.rho_a,
            temp_k: t_k,
            tank_pa: self.state.rho_a * self.cfg.gas_constant * t_k,
            downstream_pa: self.cfg.downstream_pa[i],
            gamma: self.cfg.gamma,
            gas_constant: self.cfg.gas_constant,
        }
    }

    /// Algebraic outputs for the current tank and valve state.
    fn evaluate(&mut self) -> Result<(), SimError> {
        let (step, t_s) = (self.step, self.time());
        let cfg = &self.cfg;
        let mut warnings = Vec::new();
        let t_a_k = celsius_to_kelvin(self.state.t_a);
        let a_max = cfg.valve.max_area_m2;
        let mut flows = Vec::with_capacity(cfg.n_conduits);
        for (i, c) in self.state.conduits.iter().enumerate() {
            let q_wv = if c.water_valve.enabled && c.water_valve.area_m2 > 0.0 {
                let wf = match cfg.water_drop_model {
                    WaterDropModel::TankPressure => self.tank_pressure_flow(i, c.water_valve.area_m2),
                    WaterDropModel::XiVelocity => {
                        let v = c.q_wv / c.water_valve.area_m2.max(cfg.min_area_fraction * a_max);
                        water_valve_flow(c.water_valve.area_m2, &cfg.valve, cfg.rho_w, v, cfg.cd_mode, cfg.xi_diameter_unit)
                    }
                };
                if wf.out_of_envelope {
                    warnings.push(format!("valve_pressure_envelope:w{}", i + 1));
                }
                wf.flow_m3s
            } else {
                0.0
            };
            let q_av = if c.air_valve.enabled {
                air_valve_flow(c.air_valve.area_m2, &self.air_conditions(i, t_a_k)).map_err(|source| SimError::Air {
                    step,
                    t_s,
                    conduit: i + 1,
                    source,
                })?
            } else {
                0.0
            };
            flows.push((q_wv, q_av));
        }
        for (c, (q_wv, q_av)) in self.state.conduits.iter_mut().zip(flows) {
            c.q_wv = q_wv;
            c.q_av = q_av;
        }

        let s = &mut self.state;
        let inlet = cfg.nozzle_inlet_area_m2();
        let active: Vec<&ConduitState> = s.conduits.iter().filter(|c| c.active()).collect();
        s.nozzle_velocity = if active.is_empty() {
            0.0
        } else {
            active
                .iter()
                .map(|c| outlet_velocity((c.q_wv + c.q_av) / inlet, cfg.nozzle_area_ratio))
                .sum::<f64>()
                / active.len() as f64
        };

        s.t_n = nozzle_temperature(s.t_ts, s.t_w, s.t_a, &cfg.nozzle_predictor);
        if cfg.nozzle_heating && s.t_n <= 0.0 {
            warnings.push("freeze_risk".to_owned());
        }
        if outside(Variable::TTs, s.t_ts) || outside(Variable::Tw, s.t_w) || outside(Variable::Ta, s.t_a) {
            warnings.push("nozzle_inputs_envelope".to_owned());
        }

        let q_w = match cfg.lwc_flow_mode {
            LwcFlowMode::Aggregate => s.total_water_flow(),
            LwcFlowMode::PerBus if active.is_empty() => 0.0,
            LwcFlowMode::PerBus => s.total_water_flow() / active.len() as f64,
        };
        s.lwc = lwc(q_w, s.v_ts, cfg.a_ts_m2, cfg.rho_w).map_err(|_| SimError::NoWind { step, t_s, v_ts: s.v_ts })?;
        if !(0.0..=LWC_GUARD).contains(&s.lwc) {
            warnings.push("lwc_envelope".to_owned());
        }

        let air_on: Vec<f64> = s.conduits.iter().filter(|c| c.air_valve.enabled).map(|c| m3s_to_lpm(c.q_av)).collect();
        let q_a = if air_on.is_empty() {
            0.0
        } else {
            air_on.iter().sum::<f64>() / air_on.len() as f64
        };
        s.mvd = mvd(q_a, s.lwc, s.t_ts, s.v_ts, &cfg.mvd_predictor);
        if let Some(m) = s.mvd {
            if !(MVD_GUARD.0..=MVD_GUARD.1).contains(&m) {
                warnings.push("mvd_envelope".to_owned());
            }
            if outside(Variable::Qa, q_a) || outside(Variable::Lwc, s.lwc) || outside(Variable::VTs, s.v_ts) {
                warnings.push("mvd_inputs_envelope".to_owned());
            }
        }

        for w in &warnings {
            if !self.logged.contains(w) {
                log::warn!("step {step}: {w}");
            }
        }
        self.logged = warnings.iter().cloned().collect();
        self.warnings = warnings;
        Ok(())
    }

    /// Runs a scenario to completion or to the first halt.
    pub fn run(cfg: PlantConfig, scenario: &Scenario) -> Result<RunOutcome, SimError> {
        let problems = scenario.validate(cfg.n_conduits);
        if !problems.is_empty() {
            return Err(SimError::InvalidScenario(problems.join("; ")));
        }
        if (scenario.step_s - cfg.dt_s).abs() > 1e-12 * cfg.dt_s {
            return Err(SimError::InvalidScenario(format!(
                "step_s {} differs from the configured dt_s {}",
                scenario.step_s, cfg.dt_s
            )));
        }
        let n = cfg.n_conduits;
        let mut trace = Trace::new(scenario.step_s, n);
        let mut sim = match Simulator::new(cfg, &scenario.initial) {
            Ok(sim) => sim,
            Err(e) if e.is_halt() => return Ok(RunOutcome { trace, halt: Some(e) }),
            Err(e) => return Err(e),
        };
        trace.rows.push(sim.row());
        let mut events = scenario.events.iter().peekable();
        for k in 0..scenario.steps() {
            while let Some(e) = events.next_if(|e| scenario.event_step(e.t) <= k) {
                sim.apply(&e.action)?;
            }
            if let Err(e) = sim.step() {
                return Ok(RunOutcome { trace, halt: Some(e) });
            }
            trace.rows.push(sim.row());
        }
        Ok(RunOutcome { trace, halt: None })
    }
}
