use serde::{Deserialize, Serialize};

/// Dense row-major matrix of model inputs with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn zeros(n_rows: usize, names: Vec<String>) -> Self {
        let n_cols = names.len();
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
            names,
        }
    }

    /// Build from row vectors. Names default to `x0..x{d-1}` when `None`.
    ///
    /// Panics if rows have unequal length.
    pub fn from_rows(rows: &[Vec<f64>], names: Option<Vec<String>>) -> Self {
        let n_cols = names
            .as_ref()
            .map(|n| n.len())
            .or_else(|| rows.first().map(|r| r.len()))
            .unwrap_or(0);
        let names = names.unwrap_or_else(|| (0..n_cols).map(|j| format!("x{j}")).collect());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged feature rows");
            data.extend_from_slice(r);
        }
        Self {
            n_rows: rows.len(),
            n_cols,
            data,
            names,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            data,
            names: self.names.clone(),
        }
    }

    /// First `n` rows (or all when fewer).
    pub fn head(&self, n: usize) -> FeatureMatrix {
        let idx: Vec<usize> = (0..n.min(self.n_rows)).collect();
        self.select_rows(&idx)
    }
}
