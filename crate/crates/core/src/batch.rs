//! Point batches: stacks of d-dimensional rows in flat row-major storage.

use crate::error::{Error, Result};

/// A stack of points of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    dim: usize,
    data: Vec<f64>,
}

impl Batch {
    pub fn empty(dim: usize) -> Batch {
        Batch {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Batch> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::config(format!(
                "flat batch of length {} is not a multiple of dimension {}",
                data.len(),
                dim
            )));
        }
        Ok(Batch { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Batch> {
        let dim = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::config("empty batch"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Shape {
                    context: "batch row",
                    expected: dim,
                    got: rows[i].len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Batch { dim, data })
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Componentwise mean over rows.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (mi, xi) in m.iter_mut().zip(row) {
                *mi += xi;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// New batch with the given rows selected, in order.
    pub fn select(&self, indices: &[usize]) -> Batch {
        let mut out = Batch::empty(self.dim);
        for &i in indices {
            out.push_row(self.row(i));
        }
        out
    }

    /// Shifts every row by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Batch {
        debug_assert_eq!(offset.len(), self.dim);
        let mut out = self.clone();
        for row in out.data.chunks_exact_mut(self.dim) {
            for (x, o) in row.iter_mut().zip(offset) {
                *x += o;
            }
        }
        out
    }
}
