//! Scenario files: initial conditions plus a timed list of operator
//! actions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Line {
    Water,
    Air,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TankKind {
    Water,
    Air,
}

/// Operator actions, shared by scenario files and the live protocol.
/// Conduits are numbered from 1. Units are the operator units named in
/// the field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "args", rename_all = "snake_case")]
pub enum Action {
    /// Water flow setpoint per conduit; all conduits when `conduit` is absent.
    SetWaterSetpoint {
        lph: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conduit: Option<usize>,
    },
    SetAirSetpoint {
        lpm: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conduit: Option<usize>,
    },
    EnableValve {
        conduit: usize,
        #[serde(default)]
        line: Line,
    },
    DisableValve {
        conduit: usize,
        #[serde(default)]
        line: Line,
    },
    #[serde(rename = "set_t_ts")]
    SetTTs { celsius: f64 },
    #[serde(rename = "set_v_ts")]
    SetVTs { mps: f64 },
    SetHeater { tank: TankKind, watts: f64 },
    /// Tank refill; inflow temperature defaults to the configured one.
    SetWaterInflow {
        kg_per_s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        temp_c: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Seconds from the start. Off-grid times apply at the next grid point.
    pub t: f64,
    #[serde(flatten)]
    pub action: Action,
}

fn default_level() -> f64 {
    0.8
}
fn default_t_w() -> f64 {
    70.4
}
fn default_t_a() -> f64 {
    70.7
}
fn default_t_ts() -> f64 {
    -6.5
}
fn default_v_ts() -> f64 {
    34.2
}
fn default_water_sp() -> f64 {
    6.0
}
fn default_air_sp() -> f64 {
    6.0
}

/// Starting conditions, operator units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Initial {
    #[serde(default = "default_level")]
    pub level_m: f64,
    #[serde(default = "default_t_w")]
    pub t_w_c: f64,
    #[serde(default = "default_t_a")]
    pub t_a_c: f64,
    /// Air tank pressure; the supply pressure when absent, or the
    /// supply/demand balance pressure when `steady_state` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_a_bar: Option<f64>,
    #[serde(default = "default_t_ts")]
    pub t_ts_c: f64,
    #[serde(default = "default_v_ts")]
    pub v_ts_mps: f64,
    #[serde(default = "default_water_sp")]
    pub water_setpoint_lph: f64,
    #[serde(default = "default_air_sp")]
    pub air_setpoint_lpm: f64,
    /// Conduits enabled at start (1-based); all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<Vec<usize>>,
    #[serde(default)]
    pub heater_water_w: f64,
    #[serde(default)]
    pub heater_air_w: f64,
    #[serde(default)]
    pub water_inflow_kg_s: f64,
    /// Start with every enabled valve at the opening that delivers its
    /// setpoint and the integrators preloaded accordingly.
    #[serde(default)]
    pub steady_state: bool,
}

impl Default for Initial {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

fn default_step() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default = "default_step")]
    pub step_s: f64,
    #[serde(default)]
    pub initial: Initial,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        (self.duration_s / self.step_s).round() as usize
    }

    /// Grid index at which an event at time `t` takes effect.
    pub fn event_step(&self, t: f64) -> usize {
        (t / self.step_s - 1e-9).ceil().max(0.0) as usize
    }

    /// Problems with times, setpoints and conduit numbers, each naming the
    /// offending event.
    pub fn validate(&self, n_conduits: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            out.push("duration_s must be non-negative".into());
        }
        if !(self.step_s.is_finite() && self.step_s > 0.0) {
            out.push("step_s must be positive".into());
        } else if (self.duration_s / self.step_s - self.steps() as f64).abs() > 1e-9 {
            out.push("duration_s must be a whole number of steps".into());
        }
        let i = &self.initial;
        if !(i.level_m > 0.0) {
            out.push("initial.level_m must be positive".into());
        }
        if i.water_setpoint_lph < 0.0 || i.air_setpoint_lpm < 0.0 {
            out.push("initial setpoints must be non-negative".into());
        }
        if let Some(en) = &i.enabled {
            if en.iter().any(|c| *c == 0 || *c > n_conduits) {
                out.push(format!("initial.enabled: conduits are numbered 1..={n_conduits}"));
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for (k, e) in self.events.iter().enumerate() {
            if !(e.t >= 0.0 && e.t <= self.duration_s) {
                out.push(format!("events[{k}]: t = {} outside [0, {}]", e.t, self.duration_s));
            }
            if e.t < prev {
                out.push(format!("events[{k}]: t = {} is earlier than the previous event", e.t));
            }
            prev = e.t;
            if let Err(msg) = check_action(&e.action, n_conduits) {
                out.push(format!("events[{k}]: {msg}"));
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::InvalidScenario(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Static checks on an action's arguments.
pub fn check_action(action: &Action, n_conduits: usize) -> Result<(), String> {
    let conduit_ok = |c: usize| {
        if c == 0 || c > n_conduits {
            Err(format!("conduit {c} outside 1..={n_conduits}"))
        } else {
            Ok(())
        }
    };
    let finite_nonneg = |name: &str, v: f64| {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(format!("{name} must be a non-negative number"))
        }
    };
    match action {
        Action::SetWaterSetpoint { lph, conduit } => {
            finite_nonneg("lph", *lph)?;
            conduit.map_or(Ok(()), conduit_ok)
        }
        Action::SetAirSetpoint { lpm, conduit } => {
            finite_nonneg("lpm", *lpm)?;
            conduit.map_or(Ok(()), conduit_ok)
        }
        Action::EnableValve { conduit, .. } | Action::DisableValve { conduit, .. } => conduit_ok(*conduit),
        Action::SetTTs { celsius } => {
            if celsius.is_finite() {
                Ok(())
            } else {
                Err("celsius must be finite".into())
            }
        }
        Action::SetVTs { mps } => finite_nonneg("mps", *mps),
        Action::SetHeater { watts, .. } => finite_nonneg("watts", *watts),
        Action::SetWaterInflow { kg_per_s, temp_c } => {
            finite_nonneg("kg_per_s", *kg_per_s)?;
            match temp_c {
                Some(t) if !t.is_finite() => Err("temp_c must be finite".into()),
                _ => Ok(()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_event_forms() {
        let json = r#"{
            "duration_s": 10,
            "events": [
                {"t": 1, "action": "disable_valve", "args": {"conduit": 1}},
                {"t": 2, "action": "set_water_setpoint", "args": {"lph": 5.5}},
                {"t": 3, "action": "set_v_ts", "args": {"mps": 48}},
                {"t": 4, "action": "set_heater", "args": {"tank": "water", "watts": 500}}
            ]
        }"#;
        let s = Scenario::from_json(json).unwrap();
        assert_eq!(s.step_s, 1.0);
        assert_eq!(s.events[0].action, Action::DisableValve { conduit: 1, line: Line::Both });
        assert_eq!(s.events[1].action, Action::SetWaterSetpoint { lph: 5.5, conduit: None });
        assert!(s.validate(12).is_empty());
        let back = Scenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn event_after_duration_rejected() {
        let s = Scenario::from_json(r#"{"duration_s": 10, "events": [{"t": 11, "action": "set_t_ts", "args": {"celsius": -5}}]}"#).unwrap();
        let v = s.validate(12);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("events[0]"), "{v:?}");
    }

    #[test]
    fn bad_conduit_and_order_rejected() {
        let s = Scenario::from_json(
            r#"{"duration_s": 10, "events": [
                {"t": 5, "action": "enable_valve", "args": {"conduit": 13}},
                {"t": 4, "action": "set_air_setpoint", "args": {"lpm": -1}}]}"#,
        )
        .unwrap();
        assert_eq!(s.validate(12).len(), 3);
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = Scenario::from_json("{\n  \"duration_s\": \"x\"\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn off_grid_events_round_up() {
        let s = Scenario { duration_s: 10.0, step_s: 0.5, initial: Initial::default(), events: vec![] };
        assert_eq!(s.event_step(1.0), 2);
        assert_eq!(s.event_step(1.2), 3);
        assert_eq!(s.event_step(0.0), 0);
        assert_eq!(s.steps(), 20);
    }
}
