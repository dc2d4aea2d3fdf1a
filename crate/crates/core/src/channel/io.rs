//! JSON documents for Kraus sets and Choi matrices.
//!
//! ```json
//! {"d_in": 2, "d_out": 3, "n_s": 1, "operators": [[b00, b01, b10, b11, b20, b21]]}
//! {"d_in": 2, "d_out": 3, "j": [/* (D·n)² row-major entries */]}
//! ```
//!
//! Numbers are written in shortest round-trip form, so a write/read cycle
//! reproduces every `f64` exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChoiMatrix, KrausSet};
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{Matrix, SymMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrausDocument {
    pub d_in: usize,
    pub d_out: usize,
    pub n_s: usize,
    /// One row-major `d_out × d_in` entry list per operator.
    pub operators: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiDocument {
    pub d_in: usize,
    pub d_out: usize,
    /// Row-major entries of the `(d_out·d_in)²` matrix, index `j·d_in + k`.
    pub j: Vec<f64>,
}

impl<T: Scalar> From<&KrausSet<T>> for KrausDocument {
    fn from(ch: &KrausSet<T>) -> Self {
        Self {
            d_in: ch.d_in(),
            d_out: ch.d_out(),
            n_s: ch.n_s(),
            operators: ch
                .operators()
                .iter()
                .map(|op| op.as_slice().iter().map(|v| v.as_f64()).collect())
                .collect(),
        }
    }
}

impl KrausDocument {
    pub fn to_kraus<T: Scalar>(&self) -> Result<KrausSet<T>> {
        if self.operators.len() != self.n_s {
            return Err(dim_mismatch(self.n_s, self.operators.len()));
        }
        let ops = self
            .operators
            .iter()
            .map(|entries| {
                Matrix::from_vec(self.d_out, self.d_in, entries.iter().map(|&v| T::of(v)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        KrausSet::new(ops)
    }
}

impl<T: Scalar> From<&ChoiMatrix<T>> for ChoiDocument {
    fn from(c: &ChoiMatrix<T>) -> Self {
        Self {
            d_in: c.d_in(),
            d_out: c.d_out(),
            j: c.matrix().as_matrix().as_slice().iter().map(|v| v.as_f64()).collect(),
        }
    }
}

impl ChoiDocument {
    pub fn to_choi<T: Scalar>(&self) -> Result<ChoiMatrix<T>> {
        let dim = self.d_in * self.d_out;
        let j = SymMatrix::from_vec(dim, self.j.iter().map(|&v| T::of(v)).collect())?;
        ChoiMatrix::new(self.d_out, self.d_in, j)
    }
}

impl<T: Scalar> KrausSet<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&KrausDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<KrausDocument>(s)?.to_kraus()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl<T: Scalar> ChoiMatrix<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ChoiDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ChoiDocument = serde_json::from_str(s)?;
        let dim = doc.d_in * doc.d_out;
        if doc.j.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "Choi document has {} entries, expected {}",
                doc.j.len(),
                dim * dim
            )));
        }
        doc.to_choi()
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
