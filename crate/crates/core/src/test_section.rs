//! Test section: liquid water content by mass balance, MVD by predictor.

use thiserror::Error;

use crate::fit::dataset::Variable;
use crate::fit::predictor::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TestSectionError {
    #[error("test section velocity must be positive (got {0} m/s)")]
    NoWind(f64),
}

/// Liquid water content in g/m³ from a water flow in m³/s.
pub fn lwc(q_w: f64, v_ts: f64, a_ts: f64, rho_w: f64) -> Result<f64, TestSectionError> {
    if !(v_ts > 0.0) {
        return Err(TestSectionError::NoWind(v_ts));
    }
    Ok(rho_w * 1000.0 * q_w / (v_ts * a_ts))
}

/// Median volumetric diameter in µm; `None` without liquid water.
/// Inputs are in operator units: Q_a in L/min per bus, LWC in g/m³, T_TS in
/// °C, v_TS in m/s.
pub fn mvd(q_a: f64, lwc: f64, t_ts: f64, v_ts: f64, predictor: &Predictor) -> Option<f64> {
    if lwc == 0.0 {
        return None;
    }
    Some(predictor.evaluate_with(|v| match v {
        Variable::Qa => q_a,
        Variable::Lwc => lwc,
        Variable::TTs => t_ts,
        Variable::VTs => v_ts,
        _ => f64::NAN,
    }))
}
