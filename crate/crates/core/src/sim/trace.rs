//! Simulation traces in operator units, with CSV and JSON export.
//!
//! CSV column order: `step, t_s, h_m, T_w_C, rho_a_kg_m3, T_a_C, P_a_bar,
//! T_TS_C, v_TS_mps, T_n_C, LWC_g_m3, MVD_um, nozzle_velocity_mps,
//! P_heat_w_W, P_heat_a_W, active_conduits, Q_w_total_Lph, Q_a_total_Lpm`,
//! then for each conduit `i` the water columns `w{i}_enabled,
//! w{i}_setpoint_Lph, w{i}_flow_Lph, w{i}_opening` and the air columns
//! `a{i}_enabled, a{i}_setpoint_Lpm, a{i}_flow_Lpm, a{i}_opening`, then
//! `warnings` (semicolon separated). An absent MVD is an empty field.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PlantConfig;
use crate::state::PlantState;
use crate::units::{m3s_to_lph, m3s_to_lpm, pa_to_bar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValveRow {
    pub water_enabled: bool,
    pub water_setpoint_lph: f64,
    pub water_flow_lph: f64,
    /// Fraction of the full opening.
    pub water_opening: f64,
    pub air_enabled: bool,
    pub air_setpoint_lpm: f64,
    pub air_flow_lpm: f64,
    pub air_opening: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub t_s: f64,
    pub h_m: f64,
    pub t_w_c: f64,
    pub rho_a_kg_m3: f64,
    pub t_a_c: f64,
    pub p_a_bar: f64,
    pub t_ts_c: f64,
    pub v_ts_mps: f64,
    pub t_n_c: f64,
    pub lwc_g_m3: f64,
    pub mvd_um: Option<f64>,
    pub nozzle_velocity_mps: f64,
    pub p_heat_w_w: f64,
    pub p_heat_a_w: f64,
    pub active_conduits: usize,
    pub q_w_total_lph: f64,
    pub q_a_total_lpm: f64,
    pub valves: Vec<ValveRow>,
    pub warnings: Vec<String>,
}

impl TraceRow {
    pub fn from_state(step: u64, t_s: f64, s: &PlantState, cfg: &PlantConfig, warnings: &[String]) -> Self {
        Self {
            step,
            t_s,
            h_m: s.h,
            t_w_c: s.t_w,
            rho_a_kg_m3: s.rho_a,
            t_a_c: s.t_a,
            p_a_bar: pa_to_bar(s.air_pressure(cfg.gas_constant)),
            t_ts_c: s.t_ts,
            v_ts_mps: s.v_ts,
            t_n_c: s.t_n,
            lwc_g_m3: s.lwc,
            mvd_um: s.mvd,
            nozzle_velocity_mps: s.nozzle_velocity,
            p_heat_w_w: s.p_heat_w,
            p_heat_a_w: s.p_heat_a,
            active_conduits: s.active_conduits(),
            q_w_total_lph: m3s_to_lph(s.total_water_flow()),
            q_a_total_lpm: m3s_to_lpm(s.total_air_flow()),
            valves: s
                .conduits
                .iter()
                .map(|c| ValveRow {
                    water_enabled: c.water_valve.enabled,
                    water_setpoint_lph: m3s_to_lph(c.water_setpoint),
                    water_flow_lph: m3s_to_lph(c.q_wv),
                    water_opening: c.water_valve.opening_fraction(&cfg.valve),
                    air_enabled: c.air_valve.enabled,
                    air_setpoint_lpm: m3s_to_lpm(c.air_setpoint),
                    air_flow_lpm: m3s_to_lpm(c.q_av),
                    air_opening: c.air_valve.opening_fraction(&cfg.valve),
                })
                .collect(),
            warnings: warnings.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub step_s: f64,
    pub n_conduits: usize,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
}

const SCALAR_COLUMNS: [&str; 18] = [
    "step",
    "t_s",
    "h_m",
    "T_w_C",
    "rho_a_kg_m3",
    "T_a_C",
    "P_a_bar",
    "T_TS_C",
    "v_TS_mps",
    "T_n_C",
    "LWC_g_m3",
    "MVD_um",
    "nozzle_velocity_mps",
    "P_heat_w_W",
    "P_heat_a_W",
    "active_conduits",
    "Q_w_total_Lph",
    "Q_a_total_Lpm",
];

const VALVE_SUFFIXES: [&str; 8] = [
    "w{}_enabled",
    "w{}_setpoint_Lph",
    "w{}_flow_Lph",
    "w{}_opening",
    "a{}_enabled",
    "a{}_setpoint_Lpm",
    "a{}_flow_Lpm",
    "a{}_opening",
];

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

impl Trace {
    pub fn new(step_s: f64, n_conduits: usize) -> Self {
        Self { step_s, n_conduits, rows: Vec::new() }
    }

    pub fn header(n_conduits: usize) -> Vec<String> {
        let mut h: Vec<String> = SCALAR_COLUMNS.iter().map(|s| s.to_string()).collect();
        for i in 1..=n_conduits {
            h.extend(VALVE_SUFFIXES.iter().map(|s| s.replace("{}", &i.to_string())));
        }
        h.push("warnings".into());
        h
    }

    /// Values of one named CSV column, `None` for absent MVD.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = Self::header(self.n_conduits).iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| {
                    let f = Self::fields(r)[idx].clone();
                    if f.is_empty() {
                        None
                    } else {
                        f.parse().ok()
                    }
                })
                .collect(),
        )
    }

    fn fields(r: &TraceRow) -> Vec<String> {
        let mut out = vec![
            r.step.to_string(),
            r.t_s.to_string(),
            r.h_m.to_string(),
            r.t_w_c.to_string(),
            r.rho_a_kg_m3.to_string(),
            r.t_a_c.to_string(),
            r.p_a_bar.to_string(),
            r.t_ts_c.to_string(),
            r.v_ts_mps.to_string(),
            r.t_n_c.to_string(),
            r.lwc_g_m3.to_string(),
            r.mvd_um.map(|m| m.to_string()).unwrap_or_default(),
            r.nozzle_velocity_mps.to_string(),
            r.p_heat_w_w.to_string(),
            r.p_heat_a_w.to_string(),
            r.active_conduits.to_string(),
            r.q_w_total_lph.to_string(),
            r.q_a_total_lpm.to_string(),
        ];
        for v in &r.valves {
            out.extend([
                bit(v.water_enabled).to_owned(),
                v.water_setpoint_lph.to_string(),
                v.water_flow_lph.to_string(),
                v.water_opening.to_string(),
                bit(v.air_enabled).to_owned(),
                v.air_setpoint_lpm.to_string(),
                v.air_flow_lpm.to_string(),
                v.air_opening.to_string(),
            ]);
        }
        out.push(r.warnings.join(";"));
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::header(self.n_conduits))?;
        for r in &self.rows {
            wr.write_record(Self::fields(r))?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Trace::write_csv`]. The step size is taken
    /// from the first two rows (1 s when fewer).
    pub fn read_csv<R: Read>(r: R) -> Result<Self, TraceError> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        let valve_cols = header.len().saturating_sub(SCALAR_COLUMNS.len() + 1);
        if valve_cols % VALVE_SUFFIXES.len() != 0 {
            return Err(TraceError::Format { row: 0, message: "unexpected column count".into() });
        }
        let n = valve_cols / VALVE_SUFFIXES.len();
        if header != Self::header(n) {
            return Err(TraceError::Format { row: 0, message: "header does not match the trace layout".into() });
        }
        let mut rows = Vec::new();
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            let row = k + 1;
            let bad = |col: usize, e: &dyn std::fmt::Display| TraceError::Format {
                row,
                message: format!("{}: {e}", header[col]),
            };
            let num = |col: usize| -> Result<f64, TraceError> { rec[col].parse::<f64>().map_err(|e| bad(col, &e)) };
            let int = |col: usize| -> Result<u64, TraceError> { rec[col].parse::<u64>().map_err(|e| bad(col, &e)) };
            let flag = |col: usize| -> Result<bool, TraceError> {
                match &rec[col] {
                    "1" => Ok(true),
                    "0" => Ok(false),
                    other => Err(bad(col, &format!("expected 0 or 1, got {other:?}"))),
                }
            };
            let mut valves = Vec::with_capacity(n);
            for i in 0..n {
                let b = SCALAR_COLUMNS.len() + i * VALVE_SUFFIXES.len();
                valves.push(ValveRow {
                    water_enabled: flag(b)?,
                    water_setpoint_lph: num(b + 1)?,
                    water_flow_lph: num(b + 2)?,
                    water_opening: num(b + 3)?,
                    air_enabled: flag(b + 4)?,
                    air_setpoint_lpm: num(b + 5)?,
                    air_flow_lpm: num(b + 6)?,
                    air_opening: num(b + 7)?,
                });
            }
            let w = &rec[header.len() - 1];
            rows.push(TraceRow {
                step: int(0)?,
                t_s: num(1)?,
                h_m: num(2)?,
                t_w_c: num(3)?,
                rho_a_kg_m3: num(4)?,
                t_a_c: num(5)?,
                p_a_bar: num(6)?,
                t_ts_c: num(7)?,
                v_ts_mps: num(8)?,
                t_n_c: num(9)?,
                lwc_g_m3: num(10)?,
                mvd_um: if rec[11].is_empty() { None } else { Some(num(11)?) },
                nozzle_velocity_mps: num(12)?,
                p_heat_w_w: num(13)?,
                p_heat_a_w: num(14)?,
                active_conduits: int(15)? as usize,
                q_w_total_lph: num(16)?,
                q_a_total_lpm: num(17)?,
                valves,
                warnings: if w.is_empty() { Vec::new() } else { w.split(';').map(str::to_owned).collect() },
            });
        }
        let step_s = match rows.as_slice() {
            [a, b, ..] => b.t_s - a.t_s,
            _ => 1.0,
        };
        Ok(Self { step_s, n_conduits: n, rows })
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), TraceError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self, TraceError> {
        Ok(serde_json::from_reader(r)?)
    }
}
