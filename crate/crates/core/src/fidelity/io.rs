//! JSON-lines format for mapping samples.
//!
//! An optional first line carries a header; every other non-blank line is one
//! record:
//!
//! ```text
//! {"format":"choiforge-sample","version":1,"n":2,"d":2,"seed":7}
//! {"input":{"kind":"pure","amplitudes":[1.0,0.0]},"output":{"kind":"pure","amplitudes":[0.0,1.0]},"omega":1.0,"nu":1.0}
//! {"input":{"kind":"density","dim":2,"entries":[0.5,0.0,0.0,0.5]},"output":{"kind":"pure","amplitudes":[1.0,0.0]},"omega":0.5}
//! ```
//!
//! `omega` defaults to 1 and `nu` defaults to `omega`.
//!
//! A fidelity tensor on its own is stored as
//! `{"n": 2, "d": 3, "s": [/* (D·n)² row-major entries */]}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{FidelityTensor, MappingRecord, MappingSample, State};
use crate::channel::{DensityMatrix, PureState};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::scalar::Scalar;

pub const SAMPLE_FORMAT: &str = "choiforge-sample";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum StateLine {
    Pure { amplitudes: Vec<f64> },
    Density { dim: usize, entries: Vec<f64> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    input: StateLine,
    output: StateLine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
}

impl StateLine {
    fn from_state<T: Scalar>(s: &State<T>) -> Self {
        match s {
            State::Pure(p) => StateLine::Pure {
                amplitudes: p.amplitudes().iter().map(|v| v.as_f64()).collect(),
            },
            State::Mixed(m) => StateLine::Density {
                dim: m.dim(),
                entries: m.matrix().as_matrix().as_slice().iter().map(|v| v.as_f64()).collect(),
            },
        }
    }

    fn to_state<T: Scalar>(&self) -> Result<State<T>> {
        match self {
            StateLine::Pure { amplitudes } => {
                Ok(State::Pure(PureState::new(amplitudes.iter().map(|&v| T::of(v)).collect())?))
            }
            StateLine::Density { dim, entries } => {
                let m = SymMatrix::from_vec(*dim, entries.iter().map(|&v| T::of(v)).collect())?;
                Ok(State::Mixed(DensityMatrix::new(m)?))
            }
        }
    }
}

fn parse_err(line: usize, msg: impl ToString) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

/// Reads a sample; errors carry the 1-based line number.
pub fn read_sample_jsonl<T: Scalar, R: BufRead>(reader: R) -> Result<MappingSample<T>> {
    let mut header: Option<SampleHeader> = None;
    let mut records = Vec::new();
    let mut first_content = true;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if first_content {
            first_content = false;
            let v: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_err(lineno, e))?;
            if v.get("format").is_some() {
                let h: SampleHeader = serde_json::from_value(v).map_err(|e| parse_err(lineno, e))?;
                if h.format != SAMPLE_FORMAT {
                    return Err(parse_err(lineno, format!("unknown format {:?}", h.format)));
                }
                header = Some(h);
                continue;
            }
        }
        let rec: RecordLine = serde_json::from_str(text).map_err(|e| parse_err(lineno, e))?;
        let omega = rec.omega.unwrap_or(1.0);
        let nu = rec.nu.unwrap_or(omega);
        let input = rec.input.to_state::<T>().map_err(|e| parse_err(lineno, format!("input: {e}")))?;
        let output = rec.output.to_state::<T>().map_err(|e| parse_err(lineno, format!("output: {e}")))?;
        if let Some(h) = &header {
            if input.dim() != h.n || output.dim() != h.d {
                return Err(parse_err(
                    lineno,
                    format!(
                        "record dims ({}, {}) differ from header ({}, {})",
                        input.dim(),
                        output.dim(),
                        h.n,
                        h.d
                    ),
                ));
            }
        }
        records.push(MappingRecord {
            input,
            output,
            omega: T::of(omega),
            nu: T::of(nu),
        });
    }
    MappingSample::new(records, header.and_then(|h| h.seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityDocument {
    pub n: usize,
    pub d: usize,
    pub s: Vec<f64>,
}

impl<T: Scalar> From<&FidelityTensor<T>> for FidelityDocument {
    fn from(t: &FidelityTensor<T>) -> Self {
        Self {
            n: t.n(),
            d: t.d(),
            s: t.matrix().as_matrix().as_slice().iter().map(|v| v.as_f64()).collect(),
        }
    }
}

impl FidelityDocument {
    pub fn to_tensor<T: Scalar>(&self) -> Result<FidelityTensor<T>> {
        let dim = self.n * self.d;
        if self.s.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "fidelity document has {} entries, expected {}",
                self.s.len(),
                dim * dim
            )));
        }
        let m = SymMatrix::from_vec(dim, self.s.iter().map(|&v| T::of(v)).collect())?;
        FidelityTensor::new(self.n, self.d, m)
    }

    pub fn read_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

/// Writes a header line followed by one record per line.
pub fn write_sample_jsonl<T: Scalar, W: Write>(sample: &MappingSample<T>, mut w: W) -> Result<()> {
    let header = SampleHeader {
        format: SAMPLE_FORMAT.into(),
        version: 1,
        n: sample.n(),
        d: sample.d(),
        seed: sample.seed(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for r in sample.records() {
        let line = RecordLine {
            input: StateLine::from_state(&r.input),
            output: StateLine::from_state(&r.output),
            omega: Some(r.omega.as_f64()),
            nu: Some(r.nu.as_f64()),
        };
        writeln!(w, "{}", serde_json::to_string(&line)?)?;
    }
    Ok(())
}
