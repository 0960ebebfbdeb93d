//! Experiment records and the dataset CSV format.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The nine measured variables, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    #[serde(rename = "T_TS")]
    TTs,
    #[serde(rename = "T_w")]
    Tw,
    #[serde(rename = "T_a")]
    Ta,
    #[serde(rename = "T_n")]
    Tn,
    #[serde(rename = "v_TS")]
    VTs,
    #[serde(rename = "LWC")]
    Lwc,
    #[serde(rename = "MVD")]
    Mvd,
    #[serde(rename = "Q_a")]
    Qa,
    #[serde(rename = "Q_w")]
    Qw,
}

impl Variable {
    pub const ALL: [Variable; 9] = [
        Variable::TTs,
        Variable::Tw,
        Variable::Ta,
        Variable::Tn,
        Variable::VTs,
        Variable::Lwc,
        Variable::Mvd,
        Variable::Qa,
        Variable::Qw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::TTs => "T_TS",
            Variable::Tw => "T_w",
            Variable::Ta => "T_a",
            Variable::Tn => "T_n",
            Variable::VTs => "v_TS",
            Variable::Lwc => "LWC",
            Variable::Mvd => "MVD",
            Variable::Qa => "Q_a",
            Variable::Qw => "Q_w",
        }
    }

    /// Column position in the CSV schema.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn unit(self) -> &'static str {
        match self {
            Variable::TTs | Variable::Tw | Variable::Ta | Variable::Tn => "°C",
            Variable::VTs => "m/s",
            Variable::Lwc => "g/m³",
            Variable::Mvd => "µm",
            Variable::Qa => "L/min",
            Variable::Qw => "L/h",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown variable `{0}` (expected one of T_TS, T_w, T_a, T_n, v_TS, LWC, MVD, Q_a, Q_w)")]
pub struct UnknownVariable(pub String);

impl FromStr for Variable {
    type Err = UnknownVariable;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownVariable(s.to_owned()))
    }
}

/// One experiment, in operator units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    #[serde(rename = "T_TS")]
    pub t_ts: f64,
    #[serde(rename = "T_w")]
    pub t_w: f64,
    #[serde(rename = "T_a")]
    pub t_a: f64,
    #[serde(rename = "T_n")]
    pub t_n: f64,
    #[serde(rename = "v_TS")]
    pub v_ts: f64,
    #[serde(rename = "LWC")]
    pub lwc: f64,
    #[serde(rename = "MVD")]
    pub mvd: f64,
    #[serde(rename = "Q_a")]
    pub q_a: f64,
    #[serde(rename = "Q_w")]
    pub q_w: f64,
}

impl ExperimentRecord {
    pub fn from_array(v: [f64; 9]) -> Self {
        Self {
            t_ts: v[0],
            t_w: v[1],
            t_a: v[2],
            t_n: v[3],
            v_ts: v[4],
            lwc: v[5],
            mvd: v[6],
            q_a: v[7],
            q_w: v[8],
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        [
            self.t_ts, self.t_w, self.t_a, self.t_n, self.v_ts, self.lwc, self.mvd, self.q_a,
            self.q_w,
        ]
    }

    pub fn get(&self, var: Variable) -> f64 {
        self.to_array()[var.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    Real,
    Synthetic,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset schema mismatch: missing columns [{}], unexpected columns [{}]", missing.join(", "), unexpected.join(", "))]
    Schema {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },
    #[error("line {line}: column {column}: {message}")]
    Value {
        line: u64,
        column: String,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<ExperimentRecord>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<ExperimentRecord>, provenance: Provenance) -> Self {
        Self {
            records,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column(&self, var: Variable) -> Vec<f64> {
        self.records.iter().map(|r| r.get(var)).collect()
    }

    /// Rows of the selected variables, in the given order.
    pub fn matrix(&self, vars: &[Variable]) -> Vec<Vec<f64>> {
        self.records
            .iter()
            .map(|r| vars.iter().map(|&v| r.get(v)).collect())
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            provenance: self.provenance,
        }
    }

    /// Reads the CSV schema. Column order is free, but the header must
    /// contain exactly the nine variables.
    pub fn read_csv<R: Read>(reader: R, provenance: Provenance) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let missing: Vec<String> = Variable::ALL
            .iter()
            .filter(|v| !names.contains(&v.name()))
            .map(|v| v.name().to_owned())
            .collect();
        let unexpected: Vec<String> = names
            .iter()
            .filter(|n| Variable::ALL.iter().all(|v| v.name() != **n))
            .map(|n| (*n).to_owned())
            .collect();
        if !missing.is_empty() || !unexpected.is_empty() {
            return Err(DatasetError::Schema {
                missing,
                unexpected,
            });
        }
        let positions: Vec<usize> = Variable::ALL
            .iter()
            .map(|v| names.iter().position(|n| *n == v.name()).unwrap_or(0))
            .collect();
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let mut values = [0.0; 9];
            for (slot, (&pos, var)) in values.iter_mut().zip(positions.iter().zip(Variable::ALL)) {
                let raw = row.get(pos).unwrap_or("");
                let value: f64 = raw.parse().map_err(|_| DatasetError::Value {
                    line,
                    column: var.name().to_owned(),
                    message: format!("`{raw}` is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(DatasetError::Value {
                        line,
                        column: var.name().to_owned(),
                        message: "value must be finite".into(),
                    });
                }
                *slot = value;
            }
            records.push(ExperimentRecord::from_array(values));
        }
        Ok(Self {
            records,
            provenance,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(Variable::ALL.iter().map(|v| v.name()))?;
        for r in &self.records {
            wtr.write_record(r.to_array().iter().map(|x| x.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}
