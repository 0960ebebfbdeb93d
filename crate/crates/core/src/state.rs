//! Continuous and derived plant state.

use serde::{Deserialize, Serialize};

use crate::valve::ValveState;

/// Flows and actuator state of one water/air conduit pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConduitState {
    pub water_valve: ValveState,
    pub air_valve: ValveState,
    /// Setpoints, m³/s.
    pub water_setpoint: f64,
    pub air_setpoint: f64,
    /// Measured flows, m³/s.
    pub q_wv: f64,
    pub q_av: f64,
}

impl ConduitState {
    pub fn new(water_setpoint: f64, air_setpoint: f64) -> Self {
        Self {
            water_valve: ValveState::default(),
            air_valve: ValveState::default(),
            water_setpoint,
            air_setpoint,
            q_wv: 0.0,
            q_av: 0.0,
        }
    }

    /// A nozzle is active when its water line is open.
    pub fn active(&self) -> bool {
        self.water_valve.enabled
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Water level, m.
    pub h: f64,
    /// Water tank temperature, °C.
    pub t_w: f64,
    /// Air tank density, kg/m³.
    pub rho_a: f64,
    /// Air tank temperature, °C.
    pub t_a: f64,
    pub conduits: Vec<ConduitState>,
    /// Test section temperature, °C.
    pub t_ts: f64,
    /// Test section wind speed, m/s.
    pub v_ts: f64,
    /// Heater powers, W.
    pub p_heat_w: f64,
    pub p_heat_a: f64,
    /// Tank refill mass flow, kg/s.
    pub water_inflow: f64,
    /// Nozzle mix temperature, °C.
    pub t_n: f64,
    /// Liquid water content, g/m³.
    pub lwc: f64,
    /// Median volumetric diameter, µm. `None` when there is no water.
    pub mvd: Option<f64>,
    /// Nozzle outlet velocity, m/s, averaged over active nozzles.
    pub nozzle_velocity: f64,
}

impl PlantState {
    pub fn total_water_flow(&self) -> f64 {
        self.conduits.iter().map(|c| c.q_wv).sum()
    }

    pub fn total_air_flow(&self) -> f64 {
        self.conduits.iter().map(|c| c.q_av).sum()
    }

    pub fn active_conduits(&self) -> usize {
        self.conduits.iter().filter(|c| c.active()).count()
    }

    /// Air tank pressure from the ideal gas law, Pa.
    pub fn air_pressure(&self, gas_constant: f64) -> f64 {
        self.rho_a * gas_constant * crate::units::celsius_to_kelvin(self.t_a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_valve() -> impl Strategy<Value = ValveState> {
        (0.0f64..1.2e-6, -1.0f64..1.0, any::<bool>()).prop_map(|(a, i, e)| ValveState {
            area_m2: a,
            integral: i,
            enabled: e,
        })
    }

    fn arb_state() -> impl Strategy<Value = PlantState> {
        let conduit = (arb_valve(), arb_valve(), 0.0f64..1e-4, 0.0f64..1e-3, 0.0f64..1e-4, 0.0f64..1e-3)
            .prop_map(|(w, a, ws, as_, qw, qa)| ConduitState {
                water_valve: w,
                air_valve: a,
                water_setpoint: ws,
                air_setpoint: as_,
                q_wv: qw,
                q_av: qa,
            });
        (
            (0.0f64..1.0, 0.0f64..100.0, 0.1f64..10.0, 0.0f64..100.0),
            proptest::collection::vec(conduit, 1..13),
            (-20.0f64..5.0, 1.0f64..60.0, 0.0f64..2300.0, 0.0f64..2300.0, 0.0f64..0.1),
            (-100.0f64..100.0, 0.0f64..5.0, proptest::option::of(0.0f64..60.0), 0.0f64..100.0),
        )
            .prop_map(|((h, t_w, rho_a, t_a), conduits, (t_ts, v_ts, pw, pa, inflow), (t_n, lwc, mvd, vn))| PlantState {
                h,
                t_w,
                rho_a,
                t_a,
                conduits,
                t_ts,
                v_ts,
                p_heat_w: pw,
                p_heat_a: pa,
                water_inflow: inflow,
                t_n,
                lwc,
                mvd,
                nozzle_velocity: vn,
            })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_lossless(state in arb_state()) {
            let text = serde_json::to_string(&state).unwrap();
            let back: PlantState = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, state);
        }
    }
}
