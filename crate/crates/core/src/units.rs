//! Unit conversions between the plant's operator units and SI.
//!
//! Everything inside the model runs in SI. Operator-facing inputs and
//! outputs (scenario files, traces, datasets, the live protocol) use the
//! units the plant instrumentation reports in:
//!
//! | kind        | operator unit | SI unit |
//! |-------------|---------------|---------|
//! | temperature | °C            | K       |
//! | water flow  | L/h           | m³/s    |
//! | air flow    | L/min         | m³/s    |
//! | pressure    | bar           | Pa      |
//! | LWC         | g/m³          | kg/m³   |
//! | MVD         | µm            | m       |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset between the Celsius and Kelvin scales.
pub const KELVIN_OFFSET: f64 = 273.15;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.806_65;

/// Standard atmosphere, Pa.
pub const ATMOSPHERE_PA: f64 = 101_325.0;

const SECONDS_PER_HOUR: f64 = 3600.0;
const LITRES_PER_M3: f64 = 1000.0;
const PA_PER_BAR: f64 = 1.0e5;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown unit kind `{0}` (expected one of temperature, water-flow, air-flow, pressure, lwc, mvd)")]
pub struct UnknownUnitKind(pub String);

/// The quantity kinds that cross the system boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitKind {
    Temperature,
    WaterFlow,
    AirFlow,
    Pressure,
    Lwc,
    Mvd,
}

impl UnitKind {
    pub const ALL: [UnitKind; 6] = [
        UnitKind::Temperature,
        UnitKind::WaterFlow,
        UnitKind::AirFlow,
        UnitKind::Pressure,
        UnitKind::Lwc,
        UnitKind::Mvd,
    ];

    /// `si = operator * factor + offset`
    fn affine(self) -> (f64, f64) {
        match self {
            UnitKind::Temperature => (1.0, KELVIN_OFFSET),
            UnitKind::WaterFlow => (1.0 / (LITRES_PER_M3 * SECONDS_PER_HOUR), 0.0),
            UnitKind::AirFlow => (1.0 / (LITRES_PER_M3 * 60.0), 0.0),
            UnitKind::Pressure => (PA_PER_BAR, 0.0),
            UnitKind::Lwc => (1.0e-3, 0.0),
            UnitKind::Mvd => (1.0e-6, 0.0),
        }
    }

    pub fn operator_unit(self) -> &'static str {
        match self {
            UnitKind::Temperature => "°C",
            UnitKind::WaterFlow => "L/h",
            UnitKind::AirFlow => "L/min",
            UnitKind::Pressure => "bar",
            UnitKind::Lwc => "g/m³",
            UnitKind::Mvd => "µm",
        }
    }

    pub fn si_unit(self) -> &'static str {
        match self {
            UnitKind::Temperature => "K",
            UnitKind::WaterFlow | UnitKind::AirFlow => "m³/s",
            UnitKind::Pressure => "Pa",
            UnitKind::Lwc => "kg/m³",
            UnitKind::Mvd => "m",
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            UnitKind::Temperature => "temperature",
            UnitKind::WaterFlow => "water-flow",
            UnitKind::AirFlow => "air-flow",
            UnitKind::Pressure => "pressure",
            UnitKind::Lwc => "lwc",
            UnitKind::Mvd => "mvd",
        };
        f.write_str(name)
    }
}

impl FromStr for UnitKind {
    type Err = UnknownUnitKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "temperature" => Ok(UnitKind::Temperature),
            "water-flow" => Ok(UnitKind::WaterFlow),
            "air-flow" => Ok(UnitKind::AirFlow),
            "pressure" => Ok(UnitKind::Pressure),
            "lwc" => Ok(UnitKind::Lwc),
            "mvd" => Ok(UnitKind::Mvd),
            _ => Err(UnknownUnitKind(s.to_owned())),
        }
    }
}

/// Converts an operator-unit value to SI.
pub fn to_si(value: f64, kind: UnitKind) -> f64 {
    let (factor, offset) = kind.affine();
    value * factor + offset
}

/// Converts an SI value back to operator units.
pub fn from_si(value: f64, kind: UnitKind) -> f64 {
    let (factor, offset) = kind.affine();
    (value - offset) / factor
}

pub fn celsius_to_kelvin(t_c: f64) -> f64 {
    t_c + KELVIN_OFFSET
}

pub fn kelvin_to_celsius(t_k: f64) -> f64 {
    t_k - KELVIN_OFFSET
}

pub fn lph_to_m3s(q: f64) -> f64 {
    to_si(q, UnitKind::WaterFlow)
}

pub fn m3s_to_lph(q: f64) -> f64 {
    from_si(q, UnitKind::WaterFlow)
}

pub fn lpm_to_m3s(q: f64) -> f64 {
    to_si(q, UnitKind::AirFlow)
}

pub fn m3s_to_lpm(q: f64) -> f64 {
    from_si(q, UnitKind::AirFlow)
}

pub fn bar_to_pa(p: f64) -> f64 {
    to_si(p, UnitKind::Pressure)
}

pub fn pa_to_bar(p: f64) -> f64 {
    from_si(p, UnitKind::Pressure)
}
