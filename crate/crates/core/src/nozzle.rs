//! Atomizer nozzles: continuity through the contraction and the mix
//! temperature predictor.

use crate::fit::predictor::Predictor;

/// Outlet velocity from `S_i·v_i = S_o·v_o`.
pub fn outlet_velocity(v_in: f64, area_ratio: f64) -> f64 {
    area_ratio * v_in
}

/// Nozzle mix temperature in °C from (T_TS, T_w, T_a) in °C.
pub fn nozzle_temperature(t_ts: f64, t_w: f64, t_a: f64, predictor: &Predictor) -> f64 {
    use crate::fit::dataset::Variable;
    predictor.evaluate_with(|v| match v {
        Variable::TTs => t_ts,
        Variable::Tw => t_w,
        Variable::Ta => t_a,
        _ => f64::NAN,
    })
}
