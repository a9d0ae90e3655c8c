//! Row-major sample matrices and column groups.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of observations (rows) by variables (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    nrows: usize,
    ncols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, nrows: usize, ncols: usize) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch {
                expected: nrows * ncols,
                got: data.len(),
            });
        }
        Ok(Self { data, nrows, ncols })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            data: vec![0.0; nrows * ncols],
            nrows,
            ncols,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(Error::DimensionMismatch {
                    expected: ncols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            data,
            nrows: rows.len(),
            ncols,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols.max(1)).take(self.nrows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// A named block of columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub columns: Vec<usize>,
}

impl Group {
    pub fn new(name: impl Into<String>, columns: Vec<usize>) -> Self {
        Self {
            name: name.into(),
            columns,
        }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }
}

/// An `n x d` sample whose columns are partitioned into named groups, i.e. the
/// random vectors whose dependence is being measured.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedData {
    values: Matrix,
    groups: Vec<Group>,
}

impl GroupedData {
    pub fn new(values: Matrix, groups: Vec<Group>) -> Result<Self> {
        let (n, d) = (values.nrows(), values.ncols());
        if n < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        let mut seen = vec![false; d];
        for (gi, g) in groups.iter().enumerate() {
            if g.columns.is_empty() {
                return Err(Error::invalid(format!("group `{}` has no columns", g.name)));
            }
            if groups[..gi].iter().any(|h| h.name == g.name) {
                return Err(Error::invalid(format!("duplicate group name `{}`", g.name)));
            }
            for &c in &g.columns {
                if c >= d {
                    return Err(Error::invalid(format!(
                        "group `{}` references column {c} but d = {d}",
                        g.name
                    )));
                }
                if seen[c] {
                    return Err(Error::invalid(format!(
                        "column {c} appears in more than one group"
                    )));
                }
                seen[c] = true;
            }
        }
        Ok(Self { values, groups })
    }

    /// Two groups `X` (first `p` columns) and `Y` (next `q` columns).
    pub fn two_groups(values: Matrix, p: usize) -> Result<Self> {
        let d = values.ncols();
        if p == 0 || p >= d {
            return Err(Error::invalid(format!("cannot split {d} columns at {p}")));
        }
        let groups = vec![
            Group::new("X", (0..p).collect()),
            Group::new("Y", (p..d).collect()),
        ];
        Self::new(values, groups)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Result<&Group> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::UnknownGroup(name.to_string()))
    }

    pub fn view(&self, name: &str) -> Result<GroupView<'_>> {
        Ok(GroupView {
            values: &self.values,
            columns: &self.group(name)?.columns,
        })
    }

    /// Subsample (or resample, with repeats) the rows listed in `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let d = self.d();
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(self.values.row(r));
        }
        Self::new(Matrix::new(data, rows.len(), d)?, self.groups.clone())
    }

    /// Apply `f(column, value)` to every cell.
    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let d = self.d();
        let data = self
            .values
            .as_slice()
            .iter()
            .enumerate()
            .map(|(idx, &v)| f(idx % d, v))
            .collect();
        Self {
            values: Matrix {
                data,
                nrows: self.n(),
                ncols: d,
            },
            groups: self.groups.clone(),
        }
    }
}

/// Borrowed view of one group's columns.
#[derive(Debug, Clone, Copy)]
pub struct GroupView<'a> {
    values: &'a Matrix,
    columns: &'a [usize],
}

impl<'a> GroupView<'a> {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values.get(i, self.columns[t])
    }

    pub fn row_into(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        let row = self.values.row(i);
        buf.extend(self.columns.iter().map(|&c| row[c]));
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        self.values.column(self.columns[t])
    }

    /// Gather the group into its own contiguous matrix.
    pub fn to_matrix(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.n() * self.dim());
        for i in 0..self.n() {
            let row = self.values.row(i);
            data.extend(self.columns.iter().map(|&c| row[c]));
        }
        Matrix {
            data,
            nrows: self.n(),
            ncols: self.dim(),
        }
    }
}
