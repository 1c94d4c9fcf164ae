use alloc::vec::Vec;

/// Pipeline stage a candidate matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Stage {
    /// Walk output in free coordinates only.
    Free,
    /// Full-dimensional samples (`B`).
    Sampled,
    /// After library refinement (`C`).
    Refined,
    /// After facility-location thinning (`Z`).
    Thinned,
}

/// Row-major matrix of impedance candidates, one `[r, x]` vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    pub stage: Stage,
}

impl CandidateMatrix {
    pub fn new(n_cols: usize, stage: Stage) -> Self {
        Self { data: Vec::new(), n_rows: 0, n_cols, stage }
    }

    /// Panics if `data.len()` is not a multiple of `n_cols`.
    pub fn from_rows(data: Vec<f64>, n_cols: usize, stage: Stage) -> Self {
        assert!(n_cols > 0 && data.len().is_multiple_of(n_cols), "row data does not match column count");
        let n_rows = data.len() / n_cols;
        Self { data, n_rows, n_cols, stage }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.n_cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.n_rows += 1;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Subset of rows in the given order.
    pub fn select(&self, indices: &[usize], stage: Stage) -> Self {
        let mut out = Self::new(self.n_cols, stage);
        for &i in indices {
            out.push_row(self.row(i));
        }
        out
    }

    pub fn with_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }
}
