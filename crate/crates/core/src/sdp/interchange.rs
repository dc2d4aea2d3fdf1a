//! Sparse SDPA (`.dat-s`) text format.
//!
//! SDPA solves the primal `min Σ c_i x_i  s.t.  Σ F_i x_i − F_0 ⪰ 0` and the
//! dual `max F_0•Y  s.t.  F_i•Y = c_i, Y ⪰ 0`. Our problem is that dual with
//! `Y = J`, `F_0 = S`, `F_c = A_c` and `c_c = β_c`, so an external solver's
//! dual objective equals `Tr(J S)` and its primal vector equals our `y`.
//!
//! Layout, one item per line:
//!
//! ```text
//! m
//! 1
//! dim
//! β_1 … β_m
//! 0 1 i j S_ij        (upper triangle, 1-based)
//! c 1 i j (A_c)_ij
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use super::{LinearConstraint, SdpProblem};
use crate::error::{Error, Result};
use crate::fidelity::FidelityTensor;
use crate::linalg::SymMatrix;
use crate::scalar::Scalar;

pub fn write_interchange<T: Scalar, W: Write>(p: &SdpProblem<T>, mut w: W) -> Result<()> {
    let dim = p.dim();
    writeln!(w, "{}", p.num_constraints())?;
    writeln!(w, "1")?;
    writeln!(w, "{dim}")?;
    let betas: Vec<String> = p.constraints().iter().map(|c| format!("{}", c.beta.as_f64())).collect();
    writeln!(w, "{}", betas.join(" "))?;
    let mut entries = |idx: usize, a: &SymMatrix<T>| -> std::io::Result<()> {
        for i in 0..dim {
            for j in i..dim {
                let v = a.get(i, j);
                if v != T::zero() {
                    writeln!(w, "{idx} 1 {} {} {}", i + 1, j + 1, v.as_f64())?;
                }
            }
        }
        Ok(())
    };
    entries(0, p.objective().matrix())?;
    for (c, con) in p.constraints().iter().enumerate() {
        entries(c + 1, &con.a)?;
    }
    Ok(())
}

pub fn export_interchange<T: Scalar>(p: &SdpProblem<T>, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_interchange(p, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_interchange`]; `n` and `d` restore the
/// channel dimensions, which the format does not carry.
pub fn import_interchange<T: Scalar, R: BufRead>(reader: R, n: usize, d: usize) -> Result<SdpProblem<T>> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| match l {
            Ok(s) => {
                let t = s.trim();
                !t.is_empty() && !t.starts_with('*') && !t.starts_with('"')
            }
            Err(_) => true,
        });
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(s))) => Ok((n, s)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let first_num = |line: usize, s: &str| -> Result<usize> {
        s.split(|c: char| c.is_whitespace() || c == ',')
            .find(|t| !t.is_empty())
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| perr(line, format!("expected an integer, found {s:?}")))
    };
    let (l, s) = next("constraint count")?;
    let m = first_num(l, &s)?;
    let (l, s) = next("block count")?;
    if first_num(l, &s)? != 1 {
        return Err(perr(l, "only a single block is supported".into()));
    }
    let (l, s) = next("block size")?;
    let dim = first_num(l, &s)?;
    if dim != n * d {
        return Err(perr(l, format!("block size {dim} does not match n·D = {}", n * d)));
    }
    let (l, s) = next("objective vector")?;
    let betas: Vec<f64> = s
        .split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| perr(l, format!("bad number {t:?}: {e}"))))
        .collect::<Result<_>>()?;
    if betas.len() != m {
        return Err(perr(l, format!("expected {m} objective entries, found {}", betas.len())));
    }
    let mut mats = vec![SymMatrix::<T>::zeros(dim); m + 1];
    while let Some((l, s)) = lines.next() {
        let s = s?;
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(perr(l, format!("expected 5 fields, found {}", toks.len())));
        }
        let idx: usize = toks[0].parse().map_err(|e| perr(l, format!("matrix index: {e}")))?;
        let blk: usize = toks[1].parse().map_err(|e| perr(l, format!("block index: {e}")))?;
        let i: usize = toks[2].parse().map_err(|e| perr(l, format!("row: {e}")))?;
        let j: usize = toks[3].parse().map_err(|e| perr(l, format!("column: {e}")))?;
        let v: f64 = toks[4].parse().map_err(|e| perr(l, format!("value: {e}")))?;
        if idx > m || blk != 1 || i == 0 || j == 0 || i > dim || j > dim {
            return Err(perr(l, "entry index out of range".into()));
        }
        mats[idx].set(i - 1, j - 1, T::of(v));
    }
    let mut mats = mats.into_iter();
    let s = FidelityTensor::new(n, d, mats.next().expect("objective slot"))?;
    let cons = mats
        .zip(betas)
        .map(|(a, b)| LinearConstraint::new(a, T::of(b)))
        .collect();
    SdpProblem::new(s, cons)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SdpProblem<f64> {
        let s = FidelityTensor::new(2, 1, SymMatrix::from_diag(&[1.0, 2.0])).unwrap();
        SdpProblem::new(s, vec![LinearConstraint::new(SymMatrix::identity(2), 1.0)]).unwrap()
    }

    #[test]
    fn toy_file_layout() {
        let mut buf = Vec::new();
        write_interchange(&toy(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let expect = "1\n1\n2\n1\n0 1 1 1 1\n0 1 2 2 2\n1 1 1 1 1\n1 1 2 2 1\n";
        assert_eq!(text, expect);
    }

    #[test]
    fn round_trip() {
        let p = toy();
        let mut buf = Vec::new();
        write_interchange(&p, &mut buf).unwrap();
        let back: SdpProblem<f64> = import_interchange(&buf[..], 2, 1).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn malformed_reports_line() {
        let text = "1\n1\n2\n1\n0 1 1 1\n";
        match import_interchange::<f64, _>(text.as_bytes(), 2, 1) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }
}
