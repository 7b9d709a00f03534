//! Prefix sums of block sufficient statistics.

use std::ops::Range;

use crate::data::{Column, Design};
use crate::model::InclusionMask;

/// Prefix sums of `y` and `y²` for intercept-only blocks.
#[derive(Debug, Clone)]
pub(crate) struct MeanStats {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl MeanStats {
    pub(crate) fn new(y: &[f64]) -> Self {
        let mut s1 = Vec::with_capacity(y.len() + 1);
        let mut s2 = Vec::with_capacity(y.len() + 1);
        s1.push(0.0);
        s2.push(0.0);
        for v in y {
            s1.push(s1.last().unwrap() + v);
            s2.push(s2.last().unwrap() + v * v);
        }
        Self { s1, s2 }
    }

    /// `(n, Σy, Σy²)` over `rows`.
    #[inline]
    pub(crate) fn block(&self, rows: Range<usize>) -> (usize, f64, f64) {
        (
            rows.len(),
            self.s1[rows.end] - self.s1[rows.start],
            self.s2[rows.end] - self.s2[rows.start],
        )
    }
}

/// Prefix sums of `X'X`, `X'y` and `y'y` over the active columns of a mask.
#[derive(Debug, Clone)]
pub(crate) struct GramPrefix {
    pub(crate) cols: Vec<Column>,
    k: usize,
    gram: Vec<f64>,
    xty: Vec<f64>,
    yty: Vec<f64>,
}

/// Sufficient statistics of one block.
#[derive(Debug, Clone)]
pub(crate) struct BlockStats {
    pub(crate) n: usize,
    pub(crate) gram: Vec<f64>,
    pub(crate) xty: Vec<f64>,
    pub(crate) yty: f64,
}

impl GramPrefix {
    pub(crate) fn new(design: &Design, mask: &InclusionMask) -> Self {
        let cols = design.active_columns(mask);
        let k = cols.len();
        let n = design.n_rows();
        let y = design.y();
        let mut gram = vec![0.0; (n + 1) * k * k];
        let mut xty = vec![0.0; (n + 1) * k];
        let mut yty = vec![0.0; n + 1];
        let mut row = vec![0.0; k];
        for r in 0..n {
            for (c, col) in cols.iter().enumerate() {
                row[c] = design.value(r, *col);
            }
            let (prev, next) = gram.split_at_mut((r + 1) * k * k);
            let prev = &prev[r * k * k..];
            for i in 0..k {
                for j in 0..k {
                    next[i * k + j] = prev[i * k + j] + row[i] * row[j];
                }
            }
            for i in 0..k {
                xty[(r + 1) * k + i] = xty[r * k + i] + row[i] * y[r];
            }
            yty[r + 1] = yty[r] + y[r] * y[r];
        }
        Self {
            cols,
            k,
            gram,
            xty,
            yty,
        }
    }

    pub(crate) fn k(&self) -> usize {
        self.k
    }

    pub(crate) fn block(&self, rows: Range<usize>) -> BlockStats {
        let k = self.k;
        let (a, b) = (rows.start, rows.end);
        let gram = (0..k * k)
            .map(|i| self.gram[b * k * k + i] - self.gram[a * k * k + i])
            .collect();
        let xty = (0..k)
            .map(|i| self.xty[b * k + i] - self.xty[a * k + i])
            .collect();
        BlockStats {
            n: rows.len(),
            gram,
            xty,
            yty: self.yty[b] - self.yty[a],
        }
    }
}

impl BlockStats {
    /// Statistics with one more column appended, given its cross products
    /// with the existing columns, its squared norm and its product with `y`.
    pub(crate) fn augmented(&self, cross: &[f64], sq: f64, with_y: f64) -> BlockStats {
        let k = self.xty.len();
        let k1 = k + 1;
        let mut gram = vec![0.0; k1 * k1];
        for i in 0..k {
            for j in 0..k {
                gram[i * k1 + j] = self.gram[i * k + j];
            }
            gram[i * k1 + k] = cross[i];
            gram[k * k1 + i] = cross[i];
        }
        gram[k * k1 + k] = sq;
        let mut xty = self.xty.clone();
        xty.push(with_y);
        BlockStats {
            n: self.n,
            gram,
            xty,
            yty: self.yty,
        }
    }

    /// Statistics with column `drop` removed.
    pub(crate) fn reduced(&self, drop: usize) -> BlockStats {
        let k = self.xty.len();
        let keep: Vec<usize> = (0..k).filter(|&i| i != drop).collect();
        let k1 = keep.len();
        let mut gram = vec![0.0; k1 * k1];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                gram[a * k1 + b] = self.gram[i * k + j];
            }
        }
        BlockStats {
            n: self.n,
            gram,
            xty: keep.iter().map(|&i| self.xty[i]).collect(),
            yty: self.yty,
        }
    }
}
