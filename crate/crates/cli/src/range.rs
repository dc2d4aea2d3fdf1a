//! Integer lists on the command line: `5`, `2,3,5`, `2..6` (inclusive), or
//! a mix such as `1,4..6`.

use crate::error::{CliError, Result};

pub fn parse_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b) = (parse_one(a)?, parse_one(b.trim_start_matches('='))?);
            if a > b {
                return Err(CliError::usage(format!("empty range `{part}`")));
            }
            out.extend(a..=b);
        } else {
            out.push(parse_one(part)?);
        }
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("no values in `{s}`")));
    }
    Ok(out)
}

fn parse_one(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| CliError::usage(format!("`{s}` is not a non-negative integer")))
}
