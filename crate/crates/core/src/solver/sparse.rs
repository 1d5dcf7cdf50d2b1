//! Compressed-row sparse matrices.

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<usize>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![usize::MAX; n];
        row_ptr.push(0);
        for (r, mut entries) in rows.into_iter().enumerate() {
            entries.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in entries {
                if last == Some(c) {
                    *vals.last_mut().expect("previous entry") += v;
                    continue;
                }
                if c == r {
                    diag[r] = cols.len();
                }
                cols.push(c);
                vals.push(v);
                last = Some(c);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            rows: n,
            row_ptr,
            cols,
            vals,
            diag,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn diagonal(&self, r: usize) -> f64 {
        match self.diag[r] {
            usize::MAX => 0.0,
            k => self.vals[k],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|e| e.0 == c).map_or(0.0, |e| e.1)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    /// One Gauss-Seidel sweep for `A x = b`, forward or backward.
    pub fn gauss_seidel(&self, b: &[f64], x: &mut [f64], forward: bool) {
        let mut sweep = |r: usize| {
            let mut acc = b[r];
            let mut d = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                if c == r {
                    d = self.vals[k];
                } else {
                    acc -= self.vals[k] * x[c];
                }
            }
            x[r] = acc / d;
        };
        if forward {
            (0..self.rows).for_each(&mut sweep);
        } else {
            (0..self.rows).rev().for_each(&mut sweep);
        }
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
