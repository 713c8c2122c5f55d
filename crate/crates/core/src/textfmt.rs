//! Shared helpers for the plain-text matrix formats.

use num_complex::Complex64;

use crate::{Error, Result};

/// `re:im` with shortest round-trip float formatting.
pub(crate) fn fmt_complex(z: Complex64) -> String {
    format!("{:e}:{:e}", z.re, z.im)
}

pub(crate) fn parse_complex(tok: &str, line: usize) -> Result<Complex64> {
    let (re, im) = tok.split_once(':').ok_or_else(|| Error::Parse {
        line,
        msg: format!("expected re:im, got {tok:?}"),
    })?;
    Ok(Complex64::new(parse_f64(re, line)?, parse_f64(im, line)?))
}

pub(crate) fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid number {tok:?}"),
    })
}

pub(crate) fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid count {tok:?}"),
    })
}

/// Non-empty, non-comment lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub(crate) fn expect_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    what: &str,
) -> Result<(usize, &'a str)> {
    lines.next().ok_or_else(|| Error::Parse {
        line: 0,
        msg: format!("unexpected end of input, expected {what}"),
    })
}

/// Parses an `A B` dimension header.
pub(crate) fn parse_dims(line: usize, text: &str) -> Result<(usize, usize)> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(Error::Parse {
            line,
            msg: format!("expected two dimensions, got {text:?}"),
        });
    }
    Ok((parse_usize(toks[0], line)?, parse_usize(toks[1], line)?))
}

pub(crate) fn parse_complex_row(line: usize, text: &str, len: usize) -> Result<Vec<Complex64>> {
    let row: Vec<Complex64> = text
        .split_whitespace()
        .map(|t| parse_complex(t, line))
        .collect::<Result<_>>()?;
    if row.len() != len {
        return Err(Error::Parse {
            line,
            msg: format!("expected {len} entries, got {}", row.len()),
        });
    }
    Ok(row)
}
