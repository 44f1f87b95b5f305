//! Plain-text serialization of complex matrices, channel sets, and beam
//! sets, for replay across runs and languages.
//!
//! Format, line by line:
//!
//! ```text
//! matrix <rows> <cols>
//! <re> <im> <re> <im> ...     (cols pairs per row, one line per row)
//! ```
//!
//! Channel estimate sets and beam sets are sequences of tagged matrices:
//!
//! ```text
//! chanset <K> <N_r> <N_t>
//! link <k> <i>
//! matrix ...
//!
//! beamset <K> <N_t> <N_r> <d>
//! tx <k>
//! matrix ...
//! rx <k>
//! matrix ...
//! ```
//!
//! Floats are written with full round-trip precision.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{BeamSet, ChannelEstimateSet};

#[derive(Debug, Error, PartialEq)]
pub enum MatIoError {
    #[error("line {line}: expected {expected}, got {got:?}")]
    Unexpected {
        line: usize,
        expected: &'static str,
        got: String,
    },
    #[error("line {1}: {0}")]
    Parse(String, usize),
    #[error("unexpected end of input (wanted {wanted})")]
    Eof { wanted: &'static str },
}

pub fn write_matrix(out: &mut String, m: &DMatrix<Complex64>) {
    let _ = writeln!(out, "matrix {} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let mut first = true;
        for c in 0..m.ncols() {
            if !first {
                out.push(' ');
            }
            first = false;
            let z = m[(r, c)];
            let _ = write!(out, "{:e} {:e}", z.re, z.im);
        }
        out.push('\n');
    }
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    fn next_content(&mut self, wanted: &'static str) -> Result<(usize, &'a str), MatIoError> {
        for (idx, line) in self.iter.by_ref() {
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                return Ok((idx + 1, trimmed));
            }
        }
        Err(MatIoError::Eof { wanted })
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, MatIoError> {
    tok.parse()
        .map_err(|e| MatIoError::Parse(format!("bad float {tok:?}: {e}"), line))
}

fn parse_usize(tok: &str, line: usize) -> Result<usize, MatIoError> {
    tok.parse()
        .map_err(|e| MatIoError::Parse(format!("bad integer {tok:?}: {e}"), line))
}

fn read_matrix_body(lines: &mut Lines) -> Result<DMatrix<Complex64>, MatIoError> {
    let (lno, header) = lines.next_content("matrix header")?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("matrix") {
        return Err(MatIoError::Unexpected {
            line: lno,
            expected: "matrix <rows> <cols>",
            got: header.to_string(),
        });
    }
    let rows = parse_usize(toks.next().unwrap_or(""), lno)?;
    let cols = parse_usize(toks.next().unwrap_or(""), lno)?;
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let (lno, row) = lines.next_content("matrix row")?;
        let toks: Vec<&str> = row.split_whitespace().collect();
        if toks.len() != 2 * cols {
            return Err(MatIoError::Parse(
                format!("expected {} floats, found {}", 2 * cols, toks.len()),
                lno,
            ));
        }
        for c in 0..cols {
            let re = parse_f64(toks[2 * c], lno)?;
            let im = parse_f64(toks[2 * c + 1], lno)?;
            m[(r, c)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

pub fn read_matrix(text: &str) -> Result<DMatrix<Complex64>, MatIoError> {
    read_matrix_body(&mut Lines::new(text))
}

pub fn write_channel_set(set: &ChannelEstimateSet) -> String {
    let k = set.users();
    let (nr, nt) = (set.get(0, 0).nrows(), set.get(0, 0).ncols());
    let mut out = String::new();
    let _ = writeln!(out, "chanset {k} {nr} {nt}");
    for row in 0..k {
        for col in 0..k {
            let _ = writeln!(out, "link {row} {col}");
            write_matrix(&mut out, set.get(row, col));
        }
    }
    out
}

#[allow(clippy::needless_range_loop)]
pub fn read_channel_set(text: &str) -> Result<ChannelEstimateSet, MatIoError> {
    let mut lines = Lines::new(text);
    let (lno, header) = lines.next_content("chanset header")?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("chanset") {
        return Err(MatIoError::Unexpected {
            line: lno,
            expected: "chanset <K> <N_r> <N_t>",
            got: header.to_string(),
        });
    }
    let k = parse_usize(toks.next().unwrap_or(""), lno)?;
    let mut links = vec![Vec::with_capacity(k); k];
    for row in 0..k {
        for col in 0..k {
            let (lno, tag) = lines.next_content("link tag")?;
            let want = format!("link {row} {col}");
            if tag != want {
                return Err(MatIoError::Unexpected {
                    line: lno,
                    expected: "link <k> <i> in row-major order",
                    got: tag.to_string(),
                });
            }
            links[row].push(read_matrix_body(&mut lines)?);
        }
    }
    Ok(ChannelEstimateSet::new(links))
}

pub fn write_beam_set(beams: &BeamSet) -> String {
    let k = beams.users();
    let (nt, d) = (beams.tx[0].nrows(), beams.tx[0].ncols());
    let nr = beams.rx[0].nrows();
    let mut out = String::new();
    let _ = writeln!(out, "beamset {k} {nt} {nr} {d}");
    for i in 0..k {
        let _ = writeln!(out, "tx {i}");
        write_matrix(&mut out, &beams.tx[i]);
        let _ = writeln!(out, "rx {i}");
        write_matrix(&mut out, &beams.rx[i]);
    }
    out
}

pub fn read_beam_set(text: &str) -> Result<BeamSet, MatIoError> {
    let mut lines = Lines::new(text);
    let (lno, header) = lines.next_content("beamset header")?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("beamset") {
        return Err(MatIoError::Unexpected {
            line: lno,
            expected: "beamset <K> <N_t> <N_r> <d>",
            got: header.to_string(),
        });
    }
    let k = parse_usize(toks.next().unwrap_or(""), lno)?;
    let mut tx = Vec::with_capacity(k);
    let mut rx = Vec::with_capacity(k);
    for i in 0..k {
        for (tag_name, store) in [("tx", &mut tx), ("rx", &mut rx)] {
            let (lno, tag) = lines.next_content("beam tag")?;
            let want = format!("{tag_name} {i}");
            if tag != want {
                return Err(MatIoError::Unexpected {
                    line: lno,
                    expected: "tx/rx tags in user order",
                    got: tag.to_string(),
                });
            }
            store.push(read_matrix_body(&mut lines)?);
        }
    }
    Ok(BeamSet { tx, rx })
}
