//! Datasets and the effective design matrix derived from them.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InclusionMask, Segmentation};
use crate::numerics::SegmentData;

/// Record of the preprocessing applied to a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    pub sqrt_transform: bool,
    pub standardized: bool,
}

/// Raw inputs: response `y`, optional covariates `X` (n × p).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Option<DMatrix<f64>>,
    /// Prepend a segment-specific intercept column.
    pub has_intercept: bool,
    /// Append the lagged response `y_{i-1}` as a selectable column. The
    /// first observation is then conditioned on and enters only as a
    /// regressor.
    pub ar_lag: bool,
    pub covariate_names: Vec<String>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Option<DMatrix<f64>>) -> Result<Self> {
        if y.len() < 2 {
            return Err(Error::InvalidModel(format!(
                "need at least 2 observations, got {}",
                y.len()
            )));
        }
        if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response at index {}", bad + 1)));
        }
        let covariate_names = match &x {
            Some(m) => {
                if m.nrows() != y.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "design has {} rows but response has {}",
                        m.nrows(),
                        y.len()
                    )));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("design matrix entry".into()));
                }
                (1..=m.ncols()).map(|j| format!("x{j}")).collect()
            }
            None => Vec::new(),
        };
        Ok(Self {
            y,
            x,
            has_intercept: true,
            ar_lag: false,
            covariate_names,
            meta: DatasetMeta::default(),
        })
    }

    pub fn with_ar_lag(mut self, ar_lag: bool) -> Self {
        self.ar_lag = ar_lag;
        self
    }

    pub fn with_intercept(mut self, has_intercept: bool) -> Self {
        self.has_intercept = has_intercept;
        self
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} covariates",
                names.len(),
                self.p()
            )));
        }
        self.covariate_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariates in `X` (excluding intercept and lag).
    pub fn p(&self) -> usize {
        self.x.as_ref().map_or(0, |m| m.ncols())
    }

    /// Builds the effective regression design.
    pub fn design(&self) -> Design {
        let offset = usize::from(self.ar_lag);
        let n = self.n();
        let y = self.y[offset..].to_vec();
        let mut columns = Vec::with_capacity(self.p() + offset);
        let mut names = self.covariate_names.clone();
        if let Some(x) = &self.x {
            for j in 0..x.ncols() {
                columns.push((offset..n).map(|i| x[(i, j)]).collect());
            }
        }
        if self.ar_lag {
            columns.push(self.y[..n - 1].to_vec());
            names.push("lag1".to_string());
        }
        Design {
            y,
            columns,
            names,
            intercept: self.has_intercept,
            offset,
        }
    }
}

/// A column of the effective design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Intercept,
    Selectable(usize),
}

/// Likelihood rows and selectable columns of a dataset.
///
/// Rows are 0-based and exclude the conditioned-on first observation when
/// the dataset carries an AR lag. Changepoint positions exposed to users are
/// 1-based indices into the original series; `index_of_row` and
/// `row_of_index` convert between the two.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    y: Vec<f64>,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    intercept: bool,
    offset: usize,
}

impl Design {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// Number of columns subject to selection (covariates, then the lag).
    pub fn n_selectable(&self) -> usize {
        self.columns.len()
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, m: usize) -> &[f64] {
        &self.columns[m]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Rows conditioned on before the first likelihood row (1 with an AR lag).
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Length of the original series.
    pub fn n_original(&self) -> usize {
        self.y.len() + self.offset
    }

    pub fn index_of_row(&self, row: usize) -> usize {
        row + self.offset + 1
    }

    pub fn row_of_index(&self, index: usize) -> Option<usize> {
        index
            .checked_sub(self.offset + 1)
            .filter(|r| *r < self.n_rows())
    }

    /// Segmentation whose blocks start at the given 1-based original indices.
    pub fn segmentation_from_changepoints(&self, changepoints: &[usize]) -> Result<Segmentation> {
        let mut starts = Vec::with_capacity(changepoints.len());
        for &cp in changepoints {
            match self.row_of_index(cp) {
                Some(r) if r > 0 => starts.push(r),
                _ => {
                    return Err(Error::InvalidModel(format!(
                        "changepoint {cp} outside admissible range {}..={}",
                        self.offset + 2,
                        self.n_original()
                    )))
                }
            }
        }
        Segmentation::from_starts(self.n_rows(), &starts)
    }

    /// 1-based original indices where blocks of `seg` start (excluding the first).
    pub fn changepoints_of(&self, seg: &Segmentation) -> Vec<usize> {
        seg.starts().into_iter().map(|r| self.index_of_row(r)).collect()
    }

    /// Active columns for `mask`: intercept first, then included selectable
    /// columns in ascending order.
    pub fn active_columns(&self, mask: &InclusionMask) -> Vec<Column> {
        let mut cols = Vec::with_capacity(mask.size() + 1);
        if self.intercept {
            cols.push(Column::Intercept);
        }
        cols.extend(mask.indices().into_iter().map(Column::Selectable));
        cols
    }

    #[inline]
    pub fn value(&self, row: usize, col: Column) -> f64 {
        match col {
            Column::Intercept => 1.0,
            Column::Selectable(m) => self.columns[m][row],
        }
    }

    /// Responses and active columns for one block of rows.
    pub fn segment(&self, rows: Range<usize>, mask: &InclusionMask) -> Result<SegmentData> {
        if mask.len() != self.n_selectable() {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} entries, design has {} selectable columns",
                mask.len(),
                self.n_selectable()
            )));
        }
        if rows.end > self.n_rows() || rows.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "block {rows:?} outside 0..{}",
                self.n_rows()
            )));
        }
        let cols = self.active_columns(mask);
        let len = rows.len();
        let y = DVector::from_column_slice(&self.y[rows.clone()]);
        let x = DMatrix::from_fn(len, cols.len(), |i, j| self.value(rows.start + i, cols[j]));
        SegmentData::new(y, x)
    }
}
