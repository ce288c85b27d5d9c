//! Sparse binary observation matrix and its on-disk formats.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// n x M matrix of 0/1 entries in compressed-row form. Each row stores the
/// sorted, duplicate-free column indices that hold a 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl BinaryMatrix {
    /// Builds a matrix from `(row, col)` positions holding a 1. Duplicate
    /// positions are rejected.
    pub fn from_entries(
        n_rows: usize,
        n_cols: usize,
        entries: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_rows];
        for (r, c) in entries {
            if r >= n_rows || c >= n_cols {
                return invalid(format!(
                    "entry ({r}, {c}) outside a {n_rows}x{n_cols} matrix"
                ));
            }
            if !rows[r].insert(c) {
                return invalid(format!("duplicate entry ({r}, {c})"));
            }
        }
        Ok(Self::from_row_sets(n_cols, rows))
    }

    fn from_row_sets(n_cols: usize, rows: Vec<BTreeSet<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            col_idx.extend(row.iter().copied());
            row_ptr.push(col_idx.len());
        }
        BinaryMatrix {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
        }
    }

    /// Builds a matrix from dense rows; every value must be 0 or 1.
    pub fn from_dense<R: AsRef<[u8]>>(n_cols: usize, rows: &[R]) -> Result<Self> {
        let mut sets = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return invalid(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    row.len()
                ));
            }
            let mut set = BTreeSet::new();
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => {
                        set.insert(j);
                    }
                    _ => return invalid(format!("entry ({i}, {j}) = {v} is not binary")),
                }
            }
            sets.push(set);
        }
        Ok(Self::from_row_sets(n_cols, sets))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Sorted column indices of the ones in row `i`.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    /// Row `i` expanded to a dense 0/1 vector.
    pub fn dense_row(&self, i: usize) -> Vec<u8> {
        let mut out = vec![0u8; self.n_cols];
        for &j in self.row(i) {
            out[j] = 1;
        }
        out
    }

    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_cols];
        for &j in &self.col_idx {
            counts[j] += 1;
        }
        counts
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_rows.max(1) as f64;
        self.column_counts()
            .into_iter()
            .map(|c| c as f64 / n)
            .collect()
    }

    /// Fraction of entries equal to one.
    pub fn density(&self) -> f64 {
        if self.n_rows == 0 || self.n_cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.n_rows as f64 * self.n_cols as f64)
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &BinaryMatrix) -> Result<Self> {
        if self.n_cols != other.n_cols {
            return invalid("column counts differ");
        }
        let mut out = self.clone();
        let offset = out.col_idx.len();
        out.col_idx.extend_from_slice(&other.col_idx);
        out.row_ptr
            .extend(other.row_ptr.iter().skip(1).map(|p| p + offset));
        out.n_rows += other.n_rows;
        Ok(out)
    }

    /// Writes the matrix in MatrixMarket `coordinate pattern general` form
    /// with 1-based indices, row-major order.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate pattern general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            for &j in self.row(i) {
                writeln!(w, "{} {}", i + 1, j + 1)?;
            }
        }
        Ok(())
    }

    /// Reads a MatrixMarket coordinate file. `pattern`, `integer` and `real`
    /// fields are accepted; explicit zeros are skipped and any other value
    /// is an error.
    pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty MatrixMarket file".into()))??;
        let tokens: Vec<String> = header
            .split_whitespace()
            .map(|t| t.to_ascii_lowercase())
            .collect();
        if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
            return Err(Error::Parse(format!("bad MatrixMarket header: {header}")));
        }
        if tokens[2] != "coordinate" {
            return Err(Error::Parse("only coordinate MatrixMarket files are supported".into()));
        }
        let pattern = match tokens[3].as_str() {
            "pattern" => true,
            "integer" | "real" => false,
            other => return Err(Error::Parse(format!("unsupported field type {other}"))),
        };
        if tokens[4] != "general" {
            return Err(Error::Parse(format!("unsupported symmetry {}", tokens[4])));
        }

        let mut size: Option<(usize, usize, usize)> = None;
        let mut entries = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = t.split_whitespace().collect();
            let parse = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: bad integer {s:?}", lineno + 2)))
            };
            match size {
                None => {
                    if parts.len() != 3 {
                        return Err(Error::Parse("bad size line".into()));
                    }
                    size = Some((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?));
                }
                Some((n, m, _)) => {
                    if parts.len() < 2 || (!pattern && parts.len() < 3) {
                        return Err(Error::Parse(format!("line {}: too few fields", lineno + 2)));
                    }
                    let (r, c) = (parse(parts[0])?, parse(parts[1])?);
                    if r == 0 || c == 0 || r > n || c > m {
                        return Err(Error::Parse(format!(
                            "line {}: index ({r}, {c}) out of range",
                            lineno + 2
                        )));
                    }
                    if !pattern {
                        let v: f64 = parts[2].parse().map_err(|_| {
                            Error::Parse(format!("line {}: bad value", lineno + 2))
                        })?;
                        if v == 0.0 {
                            continue;
                        }
                        if v != 1.0 {
                            return Err(Error::Parse(format!(
                                "line {}: value {v} is not binary",
                                lineno + 2
                            )));
                        }
                    }
                    entries.push((r - 1, c - 1));
                }
            }
        }
        let (n, m, _) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
        Self::from_entries(n, m, entries).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Writes dense CSV, optionally preceded by a header of item names.
    pub fn write_csv<W: Write>(&self, w: W, item_names: Option<&[String]>) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        if let Some(names) = item_names {
            if names.len() != self.n_cols {
                return invalid("item name count does not match column count");
            }
            wtr.write_record(names)?;
        }
        for i in 0..self.n_rows {
            wtr.write_record(self.dense_row(i).iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads dense CSV of 0/1 values. A first row that is not entirely 0/1 is
    /// taken as a header of item names.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<(Self, Option<Vec<String>>)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut names = None;
        let mut rows: Vec<Vec<u8>> = Vec::new();
        let mut n_cols: Option<usize> = None;
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: Option<Vec<u8>> = rec
                .iter()
                .map(|f| match f {
                    "0" => Some(0u8),
                    "1" => Some(1u8),
                    _ => None,
                })
                .collect();
            match parsed {
                Some(row) => {
                    if *n_cols.get_or_insert(row.len()) != row.len() {
                        return Err(Error::Parse(format!("row {k} has inconsistent width")));
                    }
                    rows.push(row);
                }
                None if k == 0 => {
                    let header: Vec<String> = rec.iter().map(str::to_string).collect();
                    n_cols = Some(header.len());
                    names = Some(header);
                }
                None => return Err(Error::Parse(format!("row {k} contains a non-binary value"))),
            }
        }
        let m = n_cols.unwrap_or(0);
        let mat = Self::from_dense(m, &rows).map_err(|e| Error::Parse(e.to_string()))?;
        Ok((mat, names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_duplicates() {
        assert!(BinaryMatrix::from_entries(2, 2, [(2, 0)]).is_err());
        assert!(BinaryMatrix::from_entries(2, 2, [(0, 2)]).is_err());
        assert!(BinaryMatrix::from_entries(2, 2, [(0, 1), (0, 1)]).is_err());
        assert!(BinaryMatrix::from_dense(2, &[vec![0u8, 2]]).is_err());
    }

    #[test]
    fn rows_are_sorted() {
        let m = BinaryMatrix::from_entries(2, 4, [(0, 3), (0, 1), (1, 2)]).unwrap();
        assert_eq!(m.row(0), &[1, 3]);
        assert_eq!(m.row(1), &[2]);
        assert!(m.get(0, 3) && !m.get(0, 0));
        assert_eq!(m.column_counts(), vec![0, 1, 1, 1]);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = BinaryMatrix::from_dense(3, &[vec![1u8, 0, 1], vec![0, 0, 0], vec![0, 1, 0]]).unwrap();
        let mut buf = Vec::new();
        m.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate pattern general\n3 3 3\n1 1\n"));
        let back = BinaryMatrix::read_matrix_market(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_market_integer_values() {
        let text = "%%MatrixMarket matrix coordinate integer general\n% c\n2 2 2\n1 1 1\n2 2 0\n";
        let m = BinaryMatrix::read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.nnz(), 1);
        let bad = "%%MatrixMarket matrix coordinate integer general\n2 2 1\n1 1 3\n";
        assert!(BinaryMatrix::read_matrix_market(bad.as_bytes()).is_err());
    }

    #[test]
    fn csv_with_and_without_header() {
        let (m, names) = BinaryMatrix::read_csv("a,b\n1,0\n0,1\n".as_bytes()).unwrap();
        assert_eq!(names.unwrap(), vec!["a", "b"]);
        assert_eq!(m.n_rows(), 2);
        let (m2, names2) = BinaryMatrix::read_csv("1,0\n0,1\n".as_bytes()).unwrap();
        assert!(names2.is_none());
        assert_eq!(m, m2);
        let mut out = Vec::new();
        m.write_csv(&mut out, Some(&["a".into(), "b".into()])).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n1,0\n0,1\n");
        assert!(BinaryMatrix::read_csv("1,0\n0,2\n".as_bytes()).is_err());
    }

    #[test]
    fn vstack_duplicates_rows() {
        let m = BinaryMatrix::from_entries(2, 2, [(0, 1)]).unwrap();
        let d = m.vstack(&m).unwrap();
        assert_eq!(d.n_rows(), 4);
        assert_eq!(d.row(2), &[1]);
        assert!(d.row(3).is_empty());
    }
}
