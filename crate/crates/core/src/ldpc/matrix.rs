use std::collections::HashSet;
use std::fmt::Write as _;

use super::{Codeword, LdpcError, M, N};
use crate::gf64::Gf64;

/// Sparse 81x162 parity-check matrix over GF(64).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    /// Nonzero entries, sorted by (row, col).
    entries: Vec<(usize, usize, Gf64)>,
    /// Per row: (col, element).
    rows: Vec<Vec<(usize, Gf64)>>,
    /// Per column: (row, index into that row's list).
    cols: Vec<Vec<(usize, usize)>>,
}

impl ParityCheckMatrix {
    /// Builds and validates a matrix from (row, col, element) triples.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (usize, usize, u8)>,
    ) -> Result<Self, LdpcError> {
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for (row, col, e) in entries {
            if row >= M || col >= N {
                return Err(LdpcError::OutOfRange { row, col });
            }
            if e == 0 {
                return Err(LdpcError::ZeroElement { row, col });
            }
            let element = Gf64::new(e).map_err(|_| LdpcError::Parse {
                line: 0,
                msg: format!("element {e} at ({row}, {col}) exceeds 63"),
            })?;
            if !seen.insert((row, col)) {
                return Err(LdpcError::Duplicate { row, col });
            }
            list.push((row, col, element));
        }
        list.sort_by_key(|&(r, c, _)| (r, c));
        let mut rows = vec![Vec::new(); M];
        for &(r, c, e) in &list {
            rows[r].push((c, e));
        }
        let mut cols = vec![Vec::new(); N];
        for (r, row) in rows.iter().enumerate() {
            for (idx, &(c, _)) in row.iter().enumerate() {
                cols[c].push((r, idx));
            }
        }
        Ok(ParityCheckMatrix { entries: list, rows, cols })
    }

    /// Parses the `ldpc-h 81 162` text format: a header line followed by one
    /// `row col element` line per nonzero entry, 0-based, elements in 1..63.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, LdpcError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(LdpcError::Parse {
            line: 1,
            msg: "missing `ldpc-h` header".into(),
        })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 || h[0] != "ldpc-h" {
            return Err(LdpcError::Parse { line: hline, msg: format!("bad header `{header}`") });
        }
        let dims = (h[1].parse::<usize>(), h[2].parse::<usize>());
        match dims {
            (Ok(M), Ok(N)) => {}
            (Ok(r), Ok(c)) => return Err(LdpcError::Dimension(format!("header declares {r}x{c}, expected {M}x{N}"))),
            _ => return Err(LdpcError::Parse { line: hline, msg: format!("bad header `{header}`") }),
        }
        let mut entries = Vec::new();
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            let parsed = match f.as_slice() {
                [r, c, e] => (r.parse::<usize>(), c.parse::<usize>(), e.parse::<u8>()),
                _ => return Err(LdpcError::Parse { line, msg: format!("expected `row col element`, got `{l}`") }),
            };
            match parsed {
                (Ok(r), Ok(c), Ok(e)) => entries.push((r, c, e)),
                _ => return Err(LdpcError::Parse { line, msg: format!("non-numeric entry `{l}`") }),
            }
        }
        Self::from_entries(entries)
    }

    /// Writes the matrix in the `ldpc-h` text format.
    pub fn to_text(&self) -> String {
        let mut s = format!("ldpc-h {M} {N}\n");
        for &(r, c, e) in &self.entries {
            let _ = writeln!(s, "{r} {c} {}", e.value());
        }
        s
    }

    pub fn entries(&self) -> &[(usize, usize, Gf64)] {
        &self.entries
    }

    pub fn row(&self, r: usize) -> &[(usize, Gf64)] {
        &self.rows[r]
    }

    /// For column `c`: the (row, slot-in-row) pairs that touch it.
    pub fn col(&self, c: usize) -> &[(usize, usize)] {
        &self.cols[c]
    }

    pub fn rows(&self) -> usize {
        M
    }

    pub fn cols(&self) -> usize {
        N
    }

    /// Dense copy (row-major, 81 x 162).
    pub fn to_dense(&self) -> Vec<Vec<Gf64>> {
        let mut d = vec![vec![Gf64::ZERO; N]; M];
        for &(r, c, e) in &self.entries {
            d[r][c] = e;
        }
        d
    }
}

/// Builds a matrix from the index/element description pair.
///
/// Each text holds 81 non-empty lines, one per check row. The index text
/// lists the 0-based column positions of that row's nonzero entries and the
/// element text lists the matching GF(64) values (1..63) in the same order.
pub fn load_parity_matrix(index_spec: &str, element_spec: &str) -> Result<ParityCheckMatrix, LdpcError> {
    fn rows(text: &str) -> Result<Vec<(usize, Vec<u64>)>, LdpcError> {
        text.lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty())
            .map(|(line, l)| {
                l.split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<u64>().map_err(|_| LdpcError::Parse { line, msg: format!("bad number `{t}`") }))
                    .collect::<Result<Vec<_>, _>>()
                    .map(|v| (line, v))
            })
            .collect()
    }
    let idx = rows(index_spec)?;
    let elt = rows(element_spec)?;
    if idx.len() != M || elt.len() != M {
        return Err(LdpcError::Dimension(format!(
            "index spec has {} rows, element spec has {}, expected {M}",
            idx.len(),
            elt.len()
        )));
    }
    let mut entries = Vec::new();
    for (r, ((_, cols), (line, vals))) in idx.iter().zip(&elt).enumerate() {
        if cols.len() != vals.len() {
            return Err(LdpcError::Dimension(format!(
                "row {r}: {} column indices but {} elements",
                cols.len(),
                vals.len()
            )));
        }
        for (&c, &e) in cols.iter().zip(vals) {
            if e > 63 {
                return Err(LdpcError::Parse { line: *line, msg: format!("element {e} exceeds 63") });
            }
            entries.push((r, c as usize, e as u8));
        }
    }
    ParityCheckMatrix::from_entries(entries)
}

/// `s = c H^T`.
pub fn syndrome(c: &Codeword, h: &ParityCheckMatrix) -> Vec<Gf64> {
    syndrome_of(&c.0, h)
}

pub(crate) fn syndrome_of(c: &[Gf64], h: &ParityCheckMatrix) -> Vec<Gf64> {
    h.rows
        .iter()
        .map(|row| row.iter().fold(Gf64::ZERO, |acc, &(col, e)| acc + e * c[col]))
        .collect()
}
