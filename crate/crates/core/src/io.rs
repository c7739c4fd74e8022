//! Text formats shared by the artifact writers.

use crate::error::{Error, Result};

/// Formats `v` with 12 significant digits, in the style of C's `%.12g`.
pub fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        t.to_string()
    } else {
        s
    }
}

pub fn csv_row(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(fmt_sig)
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses a numeric CSV body, checking the header against `expected`.
pub fn parse_csv(text: &str, expected_header: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != expected_header {
        return Err(Error::Parse(format!(
            "unexpected header {header:?}, expected {}",
            expected_header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != cols.len() {
            return Err(Error::Parse(format!(
                "line {} has {} columns, expected {}",
                i + 2,
                row.len(),
                cols.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Relative agreement at 12 significant digits.
pub fn same_at_12_digits(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 5e-12 * a.abs().max(b.abs())
}
