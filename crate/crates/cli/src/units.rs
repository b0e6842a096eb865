//! Budgets and step sizes: integer numerators over 255 by default, raw
//! pixel values with `--raw`.

use crate::error::{CliError, CliResult};

pub fn parse_amount(s: &str, raw: bool, what: &str) -> CliResult<f32> {
    let s = s.trim();
    if raw {
        let v: f32 = s.parse().map_err(|_| CliError::usage(format!("{what}: {s:?} is not a number")))?;
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::usage(format!("{what}: {v} is outside [0, 1]")));
        }
        Ok(v)
    } else {
        let v: u32 = s
            .parse()
            .map_err(|_| CliError::usage(format!("{what}: {s:?} is not an integer numerator over 255 (use --raw for pixel values)")))?;
        if v > 255 {
            return Err(CliError::usage(format!("{what}: {v}/255 exceeds 1")));
        }
        Ok(v as f32 / 255.0)
    }
}

pub fn parse_list<T>(s: &str, what: &str, item: impl Fn(&str) -> CliResult<T>) -> CliResult<Vec<T>> {
    let items: Vec<T> = s.split(',').filter(|p| !p.trim().is_empty()).map(|p| item(p.trim())).collect::<CliResult<_>>()?;
    if items.is_empty() {
        return Err(CliError::usage(format!("{what} is empty")));
    }
    Ok(items)
}

pub fn parse_steps(s: &str) -> CliResult<Vec<usize>> {
    parse_list(s, "steps", |p| p.parse().map_err(|_| CliError::usage(format!("steps: {p:?} is not a count"))))
}
