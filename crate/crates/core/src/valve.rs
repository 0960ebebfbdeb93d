//! Proportional solenoid valve flow laws and the PI loop that positions them.
//!
//! Water valves follow the incompressible orifice law
//! `Q = A·C_d·√(2ΔP/ρ_w)`; air valves follow the isentropic nozzle law
//! evaluated at the tank state. Both are linear in the opening area `A`,
//! which is what the PI controller acts on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const SECONDS_PER_HOUR: f64 = 3600.0;
const PA_PER_BAR: f64 = 1.0e5;

/// How the discharge coefficient treats the catalog units of `K_v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdMode {
    /// `K_v` converted from m³/h to m³/s and the 1 bar reference to Pa.
    #[default]
    UnitConsistent,
    /// The expression evaluated with `K_v` in m³/h and `D` in metres, as printed.
    Literal,
}

/// Length unit `D` is expressed in when evaluating the pressure-drop coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiDiameterUnit {
    #[default]
    Millimetres,
    Metres,
}

/// Catalog data of one proportional valve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValveSpec {
    /// Orifice diameter, m.
    pub diameter_m: f64,
    /// Flow factor, m³/h at 1 bar.
    pub kv_m3ph: f64,
    /// Operating pressure envelope, Pa.
    pub pressure_range_pa: (f64, f64),
    /// Fully open area, m².
    pub max_area_m2: f64,
}

impl ValveSpec {
    pub fn new(diameter_m: f64, kv_m3ph: f64) -> Self {
        Self {
            diameter_m,
            kv_m3ph,
            pressure_range_pa: (0.0, 16.0 * PA_PER_BAR),
            max_area_m2: PI * diameter_m * diameter_m / 4.0,
        }
    }
}

impl Default for ValveSpec {
    /// ASCO SCG202A series: 1.2 mm orifice, K_v = 0.05 m³/h, 0–16 bar.
    fn default() -> Self {
        Self::new(1.2e-3, 0.05)
    }
}

/// Discharge coefficient derived from the catalog flow factor.
pub fn discharge_coefficient(spec: &ValveSpec, rho_w: f64, mode: CdMode) -> f64 {
    let d2 = spec.diameter_m * spec.diameter_m;
    let literal = 4.0 * spec.kv_m3ph / (PI * d2) * (rho_w / 2.0).sqrt();
    match mode {
        CdMode::Literal => literal,
        CdMode::UnitConsistent => literal / SECONDS_PER_HOUR / PA_PER_BAR.sqrt(),
    }
}

/// Pressure-drop coefficient `ξ = πD⁴ / (8000·K_v²)`.
pub fn pressure_drop_coefficient(spec: &ValveSpec, unit: XiDiameterUnit) -> f64 {
    let d = match unit {
        XiDiameterUnit::Millimetres => spec.diameter_m * 1.0e3,
        XiDiameterUnit::Metres => spec.diameter_m,
    };
    PI * d.powi(4) / (8000.0 * spec.kv_m3ph * spec.kv_m3ph)
}

/// Dynamic pressure drop `½·ξ·ρ·v²` across the valve.
pub fn velocity_pressure_drop(xi: f64, rho_w: f64, velocity: f64) -> f64 {
    0.5 * xi * rho_w * velocity * velocity
}

/// Result of a water flow evaluation. `out_of_envelope` is set when the
/// pressure drop falls outside the valve's rated range; the flow is still
/// computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterFlow {
    pub flow_m3s: f64,
    pub pressure_drop_pa: f64,
    pub out_of_envelope: bool,
}

/// Orifice law for a given pressure drop across the valve.
pub fn water_flow_for_drop(
    area_m2: f64,
    spec: &ValveSpec,
    rho_w: f64,
    pressure_drop_pa: f64,
    cd_mode: CdMode,
) -> WaterFlow {
    let (lo, hi) = spec.pressure_range_pa;
    let out_of_envelope = pressure_drop_pa < lo || pressure_drop_pa > hi;
    let cd = discharge_coefficient(spec, rho_w, cd_mode);
    let flow_m3s = if area_m2 <= 0.0 || pressure_drop_pa <= 0.0 {
        0.0
    } else {
        area_m2 * cd * (2.0 * pressure_drop_pa / rho_w).sqrt()
    };
    WaterFlow {
        flow_m3s,
        pressure_drop_pa,
        out_of_envelope,
    }
}

/// Water valve flow with the pressure drop taken from the through-valve
/// velocity via the pressure-drop coefficient.
pub fn water_valve_flow(
    area_m2: f64,
    spec: &ValveSpec,
    rho_w: f64,
    velocity_mps: f64,
    cd_mode: CdMode,
    xi_unit: XiDiameterUnit,
) -> WaterFlow {
    let xi = pressure_drop_coefficient(spec, xi_unit);
    let dp = velocity_pressure_drop(xi, rho_w, velocity_mps);
    water_flow_for_drop(area_m2, spec, rho_w, dp, cd_mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AirFlowError {
    #[error("downstream pressure {downstream_pa} Pa exceeds tank pressure {tank_pa} Pa (backflow is not modelled)")]
    Backflow { tank_pa: f64, downstream_pa: f64 },
    #[error("pressures and temperature must be positive (tank {tank_pa} Pa, downstream {downstream_pa} Pa, {temp_k} K)")]
    Domain {
        tank_pa: f64,
        downstream_pa: f64,
        temp_k: f64,
    },
}

/// Thermodynamic conditions upstream and downstream of an air valve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirConditions {
    /// Tank density, kg/m³.
    pub density: f64,
    /// Tank temperature, K.
    pub temp_k: f64,
    /// Tank pressure, Pa.
    pub tank_pa: f64,
    /// Pressure downstream of the valve, Pa.
    pub downstream_pa: f64,
    pub gamma: f64,
    /// Specific gas constant, J/(kg·K).
    pub gas_constant: f64,
}

/// Pressure-ratio factor `r^(1/γ)·√(1 − r^((γ−1)/γ))` of the air valve law.
pub fn pressure_ratio_factor(ratio: f64, gamma: f64) -> f64 {
    let tail = 1.0 - ratio.powf((gamma - 1.0) / gamma);
    ratio.powf(1.0 / gamma) * tail.max(0.0).sqrt()
}

/// Pressure ratio at which the air valve law peaks, `(2/(γ+1))^(γ/(γ−1))`.
pub fn critical_pressure_ratio(gamma: f64) -> f64 {
    (2.0 / (gamma + 1.0)).powf(gamma / (gamma - 1.0))
}

/// Volumetric air flow through a valve, m³/s at tank density.
pub fn air_valve_flow(area_m2: f64, air: &AirConditions) -> Result<f64, AirFlowError> {
    if air.downstream_pa <= 0.0 || air.tank_pa <= 0.0 || air.temp_k <= 0.0 || air.density <= 0.0 {
        return Err(AirFlowError::Domain {
            tank_pa: air.tank_pa,
            downstream_pa: air.downstream_pa,
            temp_k: air.temp_k,
        });
    }
    if air.downstream_pa > air.tank_pa {
        return Err(AirFlowError::Backflow {
            tank_pa: air.tank_pa,
            downstream_pa: air.downstream_pa,
        });
    }
    if area_m2 <= 0.0 {
        return Ok(0.0);
    }
    let g = air.gamma;
    let ratio = air.downstream_pa / air.tank_pa;
    let mass_flux = (2.0 * g / (air.gas_constant * (g - 1.0))).sqrt() * air.tank_pa
        / air.temp_k.sqrt()
        * pressure_ratio_factor(ratio, g);
    Ok(area_m2 / air.density * mass_flux)
}

/// Proportional and integral gains of one valve loop. The output is the
/// opening area in m², the error is a volumetric flow in m³/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    pub kp: f64,
    /// Integral gain, 1/s.
    pub ki: f64,
}

impl PiGains {
    /// Gains for a static plant `Q = g·A` placing the loop at normalised
    /// proportional gain `g·kp = 0.2` and integral gain `g·ki·Δt = 0.5`.
    /// The closed loop poles are then the roots of `z² − 0.3z − 0.2`, i.e.
    /// 0.62 and −0.32.
    pub fn for_plant_gain(gain: f64, dt: f64) -> Self {
        Self {
            kp: 0.2 / gain,
            ki: 0.5 / (gain * dt),
        }
    }
}

/// Actuator state of one valve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValveState {
    /// Opening area, m².
    pub area_m2: f64,
    /// Integrated flow error, m³.
    pub integral: f64,
    pub enabled: bool,
}

impl Default for ValveState {
    fn default() -> Self {
        Self {
            area_m2: 0.0,
            integral: 0.0,
            enabled: true,
        }
    }
}

impl ValveState {
    pub fn opening_fraction(&self, spec: &ValveSpec) -> f64 {
        (self.area_m2 / spec.max_area_m2).clamp(0.0, 1.0)
    }
}

/// One PI update of the valve opening.
///
/// The integrator is only advanced when the resulting command stays inside
/// `[0, A_max]`, or when the error drives it back out of saturation. A
/// disabled valve closes and forgets its integral.
pub fn pi_step(
    valve: ValveState,
    setpoint: f64,
    measured: f64,
    gains: &PiGains,
    max_area_m2: f64,
    dt: f64,
) -> ValveState {
    if !valve.enabled {
        return ValveState {
            area_m2: 0.0,
            integral: 0.0,
            enabled: false,
        };
    }
    let error = setpoint - measured;
    let candidate = valve.integral + error * dt;
    let raw = gains.kp * error + gains.ki * candidate;
    let integral = if (0.0..=max_area_m2).contains(&raw)
        || (raw > max_area_m2 && error < 0.0)
        || (raw < 0.0 && error > 0.0)
    {
        candidate
    } else {
        valve.integral
    };
    let area_m2 = (gains.kp * error + gains.ki * integral).clamp(0.0, max_area_m2);
    ValveState {
        area_m2,
        integral,
        enabled: true,
    }
}
