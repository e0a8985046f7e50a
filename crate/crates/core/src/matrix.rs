//! Sparse nonnegative integer matrices and exact reference statistics.
//!
//! [`SparseIntMatrix`] stores only nonzero entries and is immutable after
//! construction. The statistics here (`lp_norm_pow`, `linf_norm`,
//! `heavy_hitters_exact`, supports) are the slow-but-exact baselines every
//! protocol is scored against.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Default bound on stored entry values.
pub const DEFAULT_MAX_VALUE: u64 = u32::MAX as u64;

/// Sparse matrix over nonnegative integers; absent entries are zero.
#[derive(Clone, Debug)]
pub struct SparseIntMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: BTreeMap<(usize, usize), u64>,
    is_binary: bool,
    max_value: u64,
}

/// Equality is shape plus entries; the configured value bound is not part
/// of the value.
impl PartialEq for SparseIntMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows && self.n_cols == other.n_cols && self.entries == other.entries
    }
}

impl Eq for SparseIntMatrix {}

/// Scalar statistic of a matrix: `value` carries the p-th power of the
/// norm for finite p (the nonzero count for p = 0), the max entry for
/// `p = f64::INFINITY`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixStats {
    pub p: f64,
    pub value: f64,
    pub entry_count: usize,
}

/// Output set of a heavy-hitter protocol with its guarantee parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct HeavyHitterSet {
    pub pairs: BTreeSet<(usize, usize)>,
    pub phi: f64,
    pub eps: f64,
}

impl HeavyHitterSet {
    pub fn new(pairs: BTreeSet<(usize, usize)>, phi: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= phi && phi <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "heavy-hitter parameters need 0 < eps <= phi <= 1, got phi={phi} eps={eps}"
            )));
        }
        Ok(Self { pairs, phi, eps })
    }
}

impl SparseIntMatrix {
    pub fn zero(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: BTreeMap::new(),
            is_binary: true,
            max_value: DEFAULT_MAX_VALUE,
        }
    }

    pub fn identity(n: usize) -> Self {
        let entries = (0..n).map(|i| ((i, i), 1u64)).collect();
        Self {
            n_rows: n,
            n_cols: n,
            entries,
            is_binary: true,
            max_value: DEFAULT_MAX_VALUE,
        }
    }

    /// Builds a matrix from `(row, col, value)` triples. Zero values are
    /// dropped; duplicate positions, out-of-range indices and values above
    /// the bound are rejected.
    pub fn from_entries<I>(n_rows: usize, n_cols: usize, triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u64)>,
    {
        Self::from_entries_bounded(n_rows, n_cols, triples, DEFAULT_MAX_VALUE)
    }

    pub fn from_entries_bounded<I>(
        n_rows: usize,
        n_cols: usize,
        triples: I,
        max_value: u64,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, u64)>,
    {
        let mut entries = BTreeMap::new();
        for (i, j, v) in triples {
            if v == 0 {
                continue;
            }
            if i >= n_rows || j >= n_cols {
                return Err(Error::IndexOutOfRange(format!(
                    "entry ({i}, {j}) outside {n_rows}x{n_cols}"
                )));
            }
            if v > max_value {
                return Err(Error::EntryOutOfRange(format!(
                    "value {v} exceeds bound {max_value}"
                )));
            }
            if entries.insert((i, j), v).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate entry at ({i}, {j})"
                )));
            }
        }
        Ok(Self::from_map(n_rows, n_cols, entries, max_value))
    }

    pub(crate) fn from_map(
        n_rows: usize,
        n_cols: usize,
        entries: BTreeMap<(usize, usize), u64>,
        max_value: u64,
    ) -> Self {
        debug_assert!(entries.values().all(|&v| v >= 1 && v <= max_value));
        debug_assert!(entries.keys().all(|&(i, j)| i < n_rows && j < n_cols));
        let is_binary = entries.values().all(|&v| v == 1);
        Self {
            n_rows,
            n_cols,
            entries,
            is_binary,
            max_value,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_binary(&self) -> bool {
        self.is_binary
    }

    pub fn max_value(&self) -> u64 {
        self.max_value
    }

    /// Publicly declared per-entry bound, used by protocols to fix wire
    /// field widths: 1 for binary matrices, otherwise the configured
    /// maximum.
    pub fn entry_bound(&self) -> u64 {
        if self.is_binary {
            1
        } else {
            self.max_value
        }
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    /// Nonzero entries of one row, as `(col, value)` pairs.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, u64)> {
        self.entries
            .range((i, 0)..=(i, self.n_cols.saturating_sub(1).max(0)))
            .map(|(&(_, j), &v)| (j, v))
            .collect()
    }

    /// All rows at once, cheaper than repeated range queries.
    pub fn rows(&self) -> Vec<Vec<(usize, u64)>> {
        let mut rows = vec![Vec::new(); self.n_rows];
        for (&(i, j), &v) in &self.entries {
            rows[i].push((j, v));
        }
        rows
    }

    /// All columns at once, as `(row, value)` pairs sorted by row.
    pub fn cols(&self) -> Vec<Vec<(usize, u64)>> {
        let mut cols = vec![Vec::new(); self.n_cols];
        for (&(i, j), &v) in &self.entries {
            cols[j].push((i, v));
        }
        cols
    }

    /// Indices of the nonzero entries of row `i`.
    pub fn row_support(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.n_rows {
            return Err(Error::IndexOutOfRange(format!(
                "row {i} of {} rows",
                self.n_rows
            )));
        }
        Ok(self.row_entries(i).into_iter().map(|(j, _)| j).collect())
    }

    /// Indices of the nonzero entries of column `j`.
    pub fn col_support(&self, j: usize) -> Result<Vec<usize>> {
        if j >= self.n_cols {
            return Err(Error::IndexOutOfRange(format!(
                "col {j} of {} cols",
                self.n_cols
            )));
        }
        Ok(self
            .entries
            .iter()
            .filter(|(&(_, c), _)| c == j)
            .map(|(&(r, _), _)| r)
            .collect())
    }

    /// Sum of one row's values.
    pub fn row_l1(&self, i: usize) -> u64 {
        self.row_entries(i).into_iter().map(|(_, v)| v).sum()
    }

    pub fn row_l1s(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.n_rows];
        for (&(i, _), &v) in &self.entries {
            out[i] += v;
        }
        out
    }

    pub fn col_l1s(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.n_cols];
        for (&(_, j), &v) in &self.entries {
            out[j] += v;
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let mut dense = vec![vec![0u64; self.n_cols]; self.n_rows];
        for (&(i, j), &v) in &self.entries {
            dense[i][j] = v;
        }
        dense
    }

    /// Exact integer matrix product.
    pub fn multiply(&self, other: &SparseIntMatrix) -> Result<SparseIntMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let other_rows = other.rows();
        let mut acc: BTreeMap<(usize, usize), u128> = BTreeMap::new();
        for (&(i, k), &va) in &self.entries {
            for &(j, vb) in &other_rows[k] {
                *acc.entry((i, j)).or_insert(0) += va as u128 * vb as u128;
            }
        }
        let mut entries = BTreeMap::new();
        for ((i, j), v) in acc {
            if v > u64::MAX as u128 {
                return Err(Error::Overflow("matrix product entry"));
            }
            entries.insert((i, j), v as u64);
        }
        Ok(SparseIntMatrix::from_map(
            self.n_rows,
            other.n_cols,
            entries,
            u64::MAX,
        ))
    }

    /// Sum of p-th powers of the entries, with the conventions 0^0 = 0 and
    /// p = 0 counting nonzeros.
    pub fn lp_norm_pow(&self, p: f64) -> Result<f64> {
        if !(0.0..=2.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("p={p} outside [0, 2]")));
        }
        if p == 0.0 {
            return Ok(self.entries.len() as f64);
        }
        if p == 1.0 {
            let total: u128 = self.entries.values().map(|&v| v as u128).sum();
            return Ok(total as f64);
        }
        if p == 2.0 {
            let total: u128 = self.entries.values().map(|&v| (v as u128).pow(2)).sum();
            return Ok(total as f64);
        }
        Ok(self.entries.values().map(|&v| (v as f64).powf(p)).sum())
    }

    /// Maximum entry value; 0 for the zero matrix.
    pub fn linf_norm(&self) -> u64 {
        self.entries.values().copied().max().unwrap_or(0)
    }

    /// Exact heavy hitters: all positions with value^p >= phi * sum(value^p).
    pub fn heavy_hitters_exact(&self, p: f64, phi: f64) -> Result<BTreeSet<(usize, usize)>> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!("p={p} outside (0, 2]")));
        }
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(Error::InvalidParameter(format!("phi={phi} outside (0, 1]")));
        }
        let total = self.lp_norm_pow(p)?;
        if total == 0.0 {
            return Ok(BTreeSet::new());
        }
        Ok(self
            .entries
            .iter()
            .filter(|(_, &v)| (v as f64).powf(p) >= phi * total)
            .map(|(&(i, j), _)| (i, j))
            .collect())
    }

    pub fn stats(&self, p: f64) -> Result<MatrixStats> {
        let value = if p.is_infinite() {
            self.linf_norm() as f64
        } else {
            self.lp_norm_pow(p)?
        };
        Ok(MatrixStats {
            p,
            value,
            entry_count: self.nnz(),
        })
    }

    /// Writes the text format: a `n_rows n_cols nnz binary_flag` header,
    /// then one `row col value` triple per line in row-major order.
    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(
            out,
            "{} {} {} {}",
            self.n_rows,
            self.n_cols,
            self.entries.len(),
            u8::from(self.is_binary)
        )?;
        for (&(i, j), &v) in &self.entries {
            writeln!(out, "{i} {j} {v}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: &mut R) -> Result<SparseIntMatrix> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("bad header line: {header:?}")));
        }
        let parse = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad integer {s:?}")))
        };
        let (n_rows, n_cols, nnz, flag) = (
            parse(fields[0])?,
            parse(fields[1])?,
            parse(fields[2])?,
            parse(fields[3])?,
        );
        let mut triples = Vec::with_capacity(nnz);
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad entry line: {line:?}")));
            }
            let v: u64 = f[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {:?}", f[2])))?;
            triples.push((parse(f[0])?, parse(f[1])?, v));
        }
        if triples.len() != nnz {
            return Err(Error::Parse(format!(
                "header declares {nnz} entries, found {}",
                triples.len()
            )));
        }
        let m = SparseIntMatrix::from_entries(n_rows, n_cols, triples)?;
        if usize::from(m.is_binary) != flag {
            return Err(Error::Parse("binary flag does not match entries".into()));
        }
        Ok(m)
    }

    pub fn save_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_text(&mut f)
    }

    pub fn load_file<P: AsRef<Path>>(path: P) -> Result<SparseIntMatrix> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        SparseIntMatrix::read_text(&mut f)
    }
}
