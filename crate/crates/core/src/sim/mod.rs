//! Fixed-step simulation of the whole plant, scenario files, traces and
//! the live session used by the service.

pub mod engine;
pub mod live;
pub mod scenario;
pub mod trace;

use thiserror::Error;

use crate::config::Violation;
use crate::tank::TankError;
use crate::valve::AirFlowError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid configuration: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidConfig(Vec<Violation>),
    #[error("halted at step {step} (t = {t_s} s): {source}")]
    Tank { step: u64, t_s: f64, source: TankError },
    #[error("halted at step {step} (t = {t_s} s): water tank overflow (level {level_m:.4} m)")]
    Overflow { step: u64, t_s: f64, level_m: f64 },
    #[error("halted at step {step} (t = {t_s} s): test section velocity is {v_ts} m/s, LWC undefined")]
    NoWind { step: u64, t_s: f64, v_ts: f64 },
    #[error("halted at step {step} (t = {t_s} s): air valve {conduit}: {source}")]
    Air {
        step: u64,
        t_s: f64,
        conduit: usize,
        source: AirFlowError,
    },
    #[error("halted at step {step} (t = {t_s} s): {what} is not finite")]
    NonFinite { step: u64, t_s: f64, what: &'static str },
}

impl SimError {
    /// Runtime halts, as opposed to bad input.
    pub fn is_halt(&self) -> bool {
        !matches!(self, Self::InvalidScenario(_) | Self::InvalidAction(_) | Self::InvalidConfig(_))
    }

    pub fn step(&self) -> Option<u64> {
        match self {
            Self::Tank { step, .. }
            | Self::Overflow { step, .. }
            | Self::NoWind { step, .. }
            | Self::Air { step, .. }
            | Self::NonFinite { step, .. } => Some(*step),
            _ => None,
        }
    }
}
