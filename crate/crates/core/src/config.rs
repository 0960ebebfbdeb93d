//! Plant configuration: physical constants, geometry, interpretation
//! switches and controller gains, all in SI.
//!
//! Config files use operator units with the unit spelled in the key
//! (`"P0_bar": 7`, `"Kv_m3ph": 0.05`). Every key is optional and overrides
//! the default.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::predictor::{Predictor, PredictorError};
use crate::units::{bar_to_pa, celsius_to_kelvin, ATMOSPHERE_PA, STANDARD_GRAVITY};
use crate::valve::{
    discharge_coefficient, pressure_ratio_factor, CdMode, PiGains, ValveSpec, XiDiameterUnit,
};

/// How the pressure drop across a water valve is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaterDropModel {
    /// Tank pressure plus hydrostatic head minus the downstream pressure.
    #[default]
    TankPressure,
    /// `½·ξ·ρ·v²` with `v` the previous flow over the current opening.
    /// The resulting flow does not depend on the opening, so the PI loop
    /// has no authority in this mode; kept for comparison.
    XiVelocity,
}

/// Which water flow enters the LWC balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LwcFlowMode {
    /// Sum over all conduits.
    #[default]
    Aggregate,
    /// Mean over enabled conduits.
    PerBus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    /// Water tank cross-section, m².
    pub s1_m2: f64,
    /// Tank outlet orifice area, m². Recorded for completeness; the lumped
    /// level equation does not use it.
    pub s2_m2: Option<f64>,
    pub tank_height_m: f64,
    pub tank_capacity_l: f64,
    /// Water tank pressurisation, Pa.
    pub p0_pa: f64,
    /// Water heater bank: four 500 W and one 300 W resistor.
    pub water_heater_max_w: f64,
    pub air_heater_max_w: f64,
    /// Water specific heat, J/(kg·K).
    pub ce: f64,
    /// Air specific heat at constant pressure, J/(kg·K).
    pub cp: f64,
    /// Leak coefficients, W/°C.
    pub kappa_w: f64,
    pub kappa_a: f64,
    /// Apply the leak term to the Kelvin temperature instead of Celsius.
    pub leak_in_kelvin: bool,
    pub rho_w: f64,
    /// Water refill temperature, K.
    pub water_inflow_temp_k: f64,
    /// Air tank volume, m³.
    pub v_at_m3: f64,
    pub gamma: f64,
    /// Specific gas constant of air, J/(kg·K).
    pub gas_constant: f64,
    /// Supply line feeding the air tank.
    pub air_supply_pa: f64,
    pub air_supply_temp_k: f64,
    /// Mass flow per pascal of pressure deficit, kg/(s·Pa).
    pub air_supply_conductance: f64,
    pub valve: ValveSpec,
    pub cd_mode: CdMode,
    pub xi_diameter_unit: XiDiameterUnit,
    pub water_drop_model: WaterDropModel,
    /// Opening below which the through-valve velocity is evaluated at this
    /// floor, as a fraction of the full area.
    pub min_area_fraction: f64,
    /// Pressure downstream of each valve pair, Pa.
    pub downstream_pa: Vec<f64>,
    /// Nozzle inlet/outlet area ratio.
    pub nozzle_area_ratio: f64,
    pub nozzle_inlet_diameter_m: f64,
    /// Nozzle heating patch active.
    pub nozzle_heating: bool,
    /// Test section cross-section, m². Placeholder value, calibratable.
    pub a_ts_m2: f64,
    pub lwc_flow_mode: LwcFlowMode,
    pub n_conduits: usize,
    pub water_gains: PiGains,
    pub air_gains: PiGains,
    pub dt_s: f64,
    pub nozzle_predictor: Predictor,
    pub mvd_predictor: Predictor,
}

/// Nominal opening-to-flow gain of a water valve, m/s.
pub fn nominal_water_gain(cfg: &PlantConfig) -> f64 {
    let dp = cfg.p0_pa + cfg.rho_w * STANDARD_GRAVITY * 0.8 * cfg.tank_height_m - ATMOSPHERE_PA;
    discharge_coefficient(&cfg.valve, cfg.rho_w, cfg.cd_mode) * (2.0 * dp.max(0.0) / cfg.rho_w).sqrt()
}

/// Nominal opening-to-flow gain of an air valve at supply conditions, m/s.
pub fn nominal_air_gain(cfg: &PlantConfig) -> f64 {
    let g = cfg.gamma;
    let ratio = (ATMOSPHERE_PA / cfg.air_supply_pa).min(1.0);
    (2.0 * g / (cfg.gas_constant * (g - 1.0))).sqrt()
        * cfg.gas_constant
        * cfg.air_supply_temp_k.sqrt()
        * pressure_ratio_factor(ratio, g)
}

impl Default for PlantConfig {
    fn default() -> Self {
        let n = 12;
        let mut cfg = Self {
            s1_m2: PI * 0.2 * 0.2,
            s2_m2: None,
            tank_height_m: 1.0,
            tank_capacity_l: 125.0,
            p0_pa: 7.0e5,
            water_heater_max_w: 4.0 * 500.0 + 300.0,
            air_heater_max_w: 2300.0,
            ce: 4186.0,
            cp: 1005.0,
            kappa_w: 0.0,
            kappa_a: 0.0,
            leak_in_kelvin: false,
            rho_w: 1000.0,
            water_inflow_temp_k: celsius_to_kelvin(70.4),
            v_at_m3: 0.05,
            gamma: 1.4,
            gas_constant: 287.0,
            air_supply_pa: 7.0e5,
            air_supply_temp_k: celsius_to_kelvin(70.7),
            air_supply_conductance: 2.5e-7,
            valve: ValveSpec::default(),
            cd_mode: CdMode::UnitConsistent,
            xi_diameter_unit: XiDiameterUnit::Millimetres,
            water_drop_model: WaterDropModel::TankPressure,
            min_area_fraction: 1e-3,
            downstream_pa: vec![ATMOSPHERE_PA; n],
            nozzle_area_ratio: 1.2,
            nozzle_inlet_diameter_m: 2.0e-3,
            nozzle_heating: true,
            a_ts_m2: 0.8,
            lwc_flow_mode: LwcFlowMode::Aggregate,
            n_conduits: n,
            water_gains: PiGains { kp: 0.0, ki: 0.0 },
            air_gains: PiGains { kp: 0.0, ki: 0.0 },
            dt_s: 1.0,
            nozzle_predictor: Predictor::nozzle_temperature_polynomial(),
            mvd_predictor: Predictor::mvd_full_polynomial(),
        };
        cfg.retune_gains();
        cfg
    }
}

impl PlantConfig {
    /// Sets both PI loops to the default placement for the nominal plant
    /// gains at the configured step.
    pub fn retune_gains(&mut self) {
        self.water_gains = PiGains::for_plant_gain(nominal_water_gain(self), self.dt_s);
        self.air_gains = PiGains::for_plant_gain(nominal_air_gain(self), self.dt_s);
    }

    /// Nozzle inlet cross-section, m².
    pub fn nozzle_inlet_area_m2(&self) -> f64 {
        PI * self.nozzle_inlet_diameter_m.powi(2) / 4.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every violated invariant; empty means the configuration is usable.
pub fn validate_config(cfg: &PlantConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| {
        out.push(Violation {
            field: field.to_owned(),
            message,
        })
    };
    let positive = [
        ("S1", cfg.s1_m2),
        ("H", cfg.tank_height_m),
        ("tank_capacity", cfg.tank_capacity_l),
        ("Ce", cfg.ce),
        ("Cp", cfg.cp),
        ("rho_w", cfg.rho_w),
        ("V_AT", cfg.v_at_m3),
        ("R", cfg.gas_constant),
        ("D", cfg.valve.diameter_m),
        ("Kv", cfg.valve.kv_m3ph),
        ("A_max", cfg.valve.max_area_m2),
        ("A_TS", cfg.a_ts_m2),
        ("nozzle_inlet_D", cfg.nozzle_inlet_diameter_m),
        ("air_supply_temp", cfg.air_supply_temp_k),
        ("water_inflow_temp", cfg.water_inflow_temp_k),
    ];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            push(name, format!("{name} must be positive"));
        }
    }
    if let Some(s2) = cfg.s2_m2 {
        if !(s2.is_finite() && s2 > 0.0) {
            push("S2", "S2 must be positive".into());
        }
    }
    for (name, v) in [
        ("P0", cfg.p0_pa),
        ("kappa_w", cfg.kappa_w),
        ("kappa_a", cfg.kappa_a),
        ("air_supply", cfg.air_supply_pa),
        ("air_supply_conductance", cfg.air_supply_conductance),
        ("P_heat_w_max", cfg.water_heater_max_w),
        ("P_heat_a_max", cfg.air_heater_max_w),
        ("min_area_fraction", cfg.min_area_fraction),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            push(name, format!("{name} must be non-negative"));
        }
    }
    if !(cfg.gamma.is_finite() && cfg.gamma > 1.0) {
        push("gamma", "γ > 1 required".into());
    }
    if !(cfg.dt_s.is_finite() && cfg.dt_s > 0.0) {
        push("dt", "Δt must be positive".into());
    }
    if !(1..=12).contains(&cfg.n_conduits) {
        push("n_conduits", "between 1 and 12 conduits required".into());
    }
    if cfg.downstream_pa.len() != cfg.n_conduits {
        push(
            "P_av",
            format!("{} downstream pressures for {} conduits", cfg.downstream_pa.len(), cfg.n_conduits),
        );
    }
    if cfg.downstream_pa.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        push("P_av", "downstream pressures must be positive".into());
    }
    if !(cfg.nozzle_area_ratio.is_finite() && cfg.nozzle_area_ratio > 1.0) {
        push("nozzle_area_ratio", "nozzle area ratio must exceed 1".into());
    }
    let (lo, hi) = cfg.valve.pressure_range_pa;
    if !(lo >= 0.0 && hi > lo) {
        push("P_range", "valve pressure range must satisfy 0 ≤ low < high".into());
    }
    for (name, g) in [("pi_water", cfg.water_gains), ("pi_air", cfg.air_gains)] {
        if !(g.kp.is_finite() && g.kp >= 0.0 && g.ki.is_finite() && g.ki >= 0.0) {
            push(name, "PI gains must be non-negative".into());
        }
    }
    for (name, p) in [("nozzle_model", &cfg.nozzle_predictor), ("mvd_model", &cfg.mvd_predictor)] {
        if let Err(e) = p.validate() {
            push(name, e.to_string());
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("model file {path}: {source}")]
    Model {
        path: PathBuf,
        source: PredictorError,
    },
    #[error("{0}")]
    Conflict(String),
    #[error("invalid configuration: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PerConduit {
    Uniform(f64),
    Each(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    /// `"polynomial"` for the nozzle, `"full_polynomial"` or
    /// `"factor_polynomial"` for MVD.
    Builtin(String),
    File { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    pub kp: f64,
    pub ki: f64,
}

/// On-disk configuration in operator units.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ConfigFile {
    pub S1_m2: Option<f64>,
    pub S2_m2: Option<f64>,
    pub H_m: Option<f64>,
    pub capacity_L: Option<f64>,
    pub P0_bar: Option<f64>,
    pub P0_Pa: Option<f64>,
    pub P_heat_w_max_W: Option<f64>,
    pub P_heat_a_max_W: Option<f64>,
    pub Ce_J_per_kgK: Option<f64>,
    pub Cp_J_per_kgK: Option<f64>,
    pub kappa_w_W_per_C: Option<f64>,
    pub kappa_a_W_per_C: Option<f64>,
    pub leak_in_kelvin: Option<bool>,
    pub rho_w_kg_m3: Option<f64>,
    pub water_inflow_temp_C: Option<f64>,
    pub V_AT_m3: Option<f64>,
    pub gamma: Option<f64>,
    pub R_J_per_kgK: Option<f64>,
    pub air_supply_bar: Option<f64>,
    pub air_supply_temp_C: Option<f64>,
    pub air_supply_conductance_kg_per_s_Pa: Option<f64>,
    pub D_mm: Option<f64>,
    pub Kv_m3ph: Option<f64>,
    pub P_range_bar: Option<(f64, f64)>,
    pub A_max_mm2: Option<f64>,
    pub cd_mode: Option<CdMode>,
    pub xi_diameter_unit: Option<XiDiameterUnit>,
    pub water_drop_model: Option<WaterDropModel>,
    pub min_area_fraction: Option<f64>,
    pub P_av_bar: Option<PerConduit>,
    pub nozzle_area_ratio: Option<f64>,
    pub nozzle_inlet_D_mm: Option<f64>,
    pub nozzle_heating: Option<bool>,
    pub A_TS_m2: Option<f64>,
    pub lwc_flow_mode: Option<LwcFlowMode>,
    pub n_conduits: Option<usize>,
    pub pi_water: Option<GainsFile>,
    pub pi_air: Option<GainsFile>,
    pub dt_s: Option<f64>,
    pub nozzle_model: Option<ModelRef>,
    pub mvd_model: Option<ModelRef>,
}

fn resolve_model(r: &ModelRef, base: &Path, nozzle: bool) -> Result<Predictor, ConfigError> {
    match r {
        ModelRef::Builtin(name) => match (nozzle, name.as_str()) {
            (true, "polynomial") => Ok(Predictor::nozzle_temperature_polynomial()),
            (false, "full_polynomial" | "polynomial") => Ok(Predictor::mvd_full_polynomial()),
            (false, "factor_polynomial") => Ok(Predictor::mvd_factor_polynomial()),
            _ => Err(ConfigError::Conflict(format!("unknown built-in model `{name}`"))),
        },
        ModelRef::File { file } => {
            let path = base.join(file);
            Predictor::load(&path).map_err(|source| ConfigError::Model { path, source })
        }
    }
}

impl ConfigFile {
    /// Applies the file over the defaults. Model file paths are resolved
    /// against `base_dir`. Gains not given in the file are retuned for the
    /// resulting plant.
    pub fn into_config(self, base_dir: &Path) -> Result<PlantConfig, ConfigError> {
        let mut c = PlantConfig::default();
        macro_rules! set {
            ($src:expr, $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
            ($src:expr, $dst:expr, $f:expr) => {
                if let Some(v) = $src {
                    $dst = $f(v);
                }
            };
        }
        if self.P0_bar.is_some() && self.P0_Pa.is_some() {
            return Err(ConfigError::Conflict("give P0_bar or P0_Pa, not both".into()));
        }
        set!(self.S1_m2, c.s1_m2);
        c.s2_m2 = self.S2_m2.or(c.s2_m2);
        set!(self.H_m, c.tank_height_m);
        set!(self.capacity_L, c.tank_capacity_l);
        set!(self.P0_bar, c.p0_pa, bar_to_pa);
        set!(self.P0_Pa, c.p0_pa);
        set!(self.P_heat_w_max_W, c.water_heater_max_w);
        set!(self.P_heat_a_max_W, c.air_heater_max_w);
        set!(self.Ce_J_per_kgK, c.ce);
        set!(self.Cp_J_per_kgK, c.cp);
        set!(self.kappa_w_W_per_C, c.kappa_w);
        set!(self.kappa_a_W_per_C, c.kappa_a);
        set!(self.leak_in_kelvin, c.leak_in_kelvin);
        set!(self.rho_w_kg_m3, c.rho_w);
        set!(self.water_inflow_temp_C, c.water_inflow_temp_k, celsius_to_kelvin);
        set!(self.V_AT_m3, c.v_at_m3);
        set!(self.gamma, c.gamma);
        set!(self.R_J_per_kgK, c.gas_constant);
        set!(self.air_supply_bar, c.air_supply_pa, bar_to_pa);
        set!(self.air_supply_temp_C, c.air_supply_temp_k, celsius_to_kelvin);
        set!(self.air_supply_conductance_kg_per_s_Pa, c.air_supply_conductance);
        if let Some(d) = self.D_mm {
            let area_given = self.A_max_mm2.is_some();
            let keep = c.valve;
            c.valve = ValveSpec::new(d * 1e-3, keep.kv_m3ph);
            c.valve.pressure_range_pa = keep.pressure_range_pa;
            if area_given {
                c.valve.max_area_m2 = keep.max_area_m2;
            }
        }
        set!(self.Kv_m3ph, c.valve.kv_m3ph);
        set!(self.P_range_bar, c.valve.pressure_range_pa, |(lo, hi)| (bar_to_pa(lo), bar_to_pa(hi)));
        set!(self.A_max_mm2, c.valve.max_area_m2, |a: f64| a * 1e-6);
        set!(self.cd_mode, c.cd_mode);
        set!(self.xi_diameter_unit, c.xi_diameter_unit);
        set!(self.water_drop_model, c.water_drop_model);
        set!(self.min_area_fraction, c.min_area_fraction);
        set!(self.nozzle_area_ratio, c.nozzle_area_ratio);
        set!(self.nozzle_inlet_D_mm, c.nozzle_inlet_diameter_m, |d: f64| d * 1e-3);
        set!(self.nozzle_heating, c.nozzle_heating);
        set!(self.A_TS_m2, c.a_ts_m2);
        set!(self.lwc_flow_mode, c.lwc_flow_mode);
        set!(self.n_conduits, c.n_conduits);
        set!(self.dt_s, c.dt_s);
        c.downstream_pa = match self.P_av_bar {
            None => vec![ATMOSPHERE_PA; c.n_conduits],
            Some(PerConduit::Uniform(p)) => vec![bar_to_pa(p); c.n_conduits],
            Some(PerConduit::Each(v)) => v.into_iter().map(bar_to_pa).collect(),
        };
        if let Some(m) = &self.nozzle_model {
            c.nozzle_predictor = resolve_model(m, base_dir, true)?;
        }
        if let Some(m) = &self.mvd_model {
            c.mvd_predictor = resolve_model(m, base_dir, false)?;
        }
        c.retune_gains();
        if let Some(g) = self.pi_water {
            c.water_gains = PiGains { kp: g.kp, ki: g.ki };
        }
        if let Some(g) = self.pi_air {
            c.air_gains = PiGains { kp: g.kp, ki: g.ki };
        }
        let violations = validate_config(&c);
        if violations.is_empty() {
            Ok(c)
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<PlantConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    let file: ConfigFile = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_owned(),
        source,
    })?;
    file.into_config(path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(cfg: &PlantConfig) -> Vec<String> {
        validate_config(cfg).into_iter().map(|v| v.field).collect()
    }

    #[test]
    fn default_is_valid() {
        assert_eq!(validate_config(&PlantConfig::default()), vec![]);
    }

    #[test]
    fn zero_s1_reported() {
        let cfg = PlantConfig {
            s1_m2: 0.0,
            ..Default::default()
        };
        let v = validate_config(&cfg);
        assert!(v.contains(&Violation {
            field: "S1".into(),
            message: "S1 must be positive".into()
        }));
    }

    #[test]
    fn gamma_below_one_reported() {
        let cfg = PlantConfig {
            gamma: 0.9,
            ..Default::default()
        };
        let v = validate_config(&cfg);
        assert!(v.iter().any(|v| v.field == "gamma" && v.message == "γ > 1 required"));
    }

    #[test]
    fn every_violation_listed() {
        let cfg = PlantConfig {
            s1_m2: -1.0,
            gamma: 1.0,
            dt_s: 0.0,
            n_conduits: 13,
            ..Default::default()
        };
        let f = fields(&cfg);
        for name in ["S1", "gamma", "dt", "n_conduits", "P_av"] {
            assert!(f.contains(&name.to_owned()), "{name} missing from {f:?}");
        }
    }

    #[test]
    fn default_gains_match_nominal_plant() {
        let cfg = PlantConfig::default();
        let gw = nominal_water_gain(&cfg);
        let ga = nominal_air_gain(&cfg);
        assert!((gw - 30.2).abs() < 0.5, "{gw}");
        assert!((130.0..150.0).contains(&ga), "{ga}");
        assert!((cfg.water_gains.kp * gw - 0.2).abs() < 1e-12);
        assert!((cfg.water_gains.ki * gw * cfg.dt_s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn file_with_unit_suffixes() {
        let json = r#"{ "Kv_m3ph": 0.1, "P0_bar": 6, "D_mm": 1.5, "P_av_bar": 1.2, "A_TS_m2": 0.2,
                        "gamma": 1.3, "pi_water": {"kp": 0.001, "ki": 0.002}, "mvd_model": "factor_polynomial" }"#;
        let file: ConfigFile = serde_json::from_str(json).unwrap();
        let cfg = file.into_config(Path::new(".")).unwrap();
        assert_eq!(cfg.valve.kv_m3ph, 0.1);
        assert_eq!(cfg.p0_pa, 6.0e5);
        assert!((cfg.valve.diameter_m - 1.5e-3).abs() < 1e-15);
        assert!((cfg.valve.max_area_m2 - PI * 1.5e-3 * 1.5e-3 / 4.0).abs() < 1e-18);
        assert_eq!(cfg.downstream_pa, vec![1.2e5; 12]);
        assert_eq!(cfg.water_gains, PiGains { kp: 0.001, ki: 0.002 });
        assert_eq!(cfg.mvd_predictor, Predictor::mvd_factor_polynomial());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{ "Kv": 0.05 }"#).is_err());
    }

    #[test]
    fn invalid_file_values_reported() {
        let file: ConfigFile = serde_json::from_str(r#"{ "S1_m2": 0 }"#).unwrap();
        match file.into_config(Path::new(".")) {
            Err(ConfigError::Invalid(v)) => assert_eq!(v[0].message, "S1 must be positive"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alternate_gas_constant_selectable() {
        let file: ConfigFile = serde_json::from_str(r#"{ "R_J_per_kgK": 2870 }"#).unwrap();
        let cfg = file.into_config(Path::new(".")).unwrap();
        assert_eq!(cfg.gas_constant, 2870.0);
    }
}
