//! Compressed sparse rows and a Jacobi-preconditioned conjugate gradient.

#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Rows are lists of `(column, value)` pairs sorted by column.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), n);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_start.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                values.push(v);
            }
            row_start.push(cols.len());
        }
        Self { n, row_start, cols, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Adds `shift[i]` to each diagonal entry (which must be stored).
    pub fn add_diagonal(&mut self, shift: &[f64]) {
        for i in 0..self.n {
            for k in self.row_start[i]..self.row_start[i + 1] {
                if self.cols[k] == i {
                    self.values[k] += shift[i];
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(self.row_start.windows(2)) {
            let (cols, vals) = (&self.cols[w[0]..w[1]], &self.values[w[0]..w[1]]);
            *o = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        m
    }
}

/// Solves `a x = b` for symmetric positive definite `a`. Returns the
/// solution and the number of iterations.
pub fn conjugate_gradient(a: &SparseMatrix, b: &[f64], rel_tol: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return (x, 0);
    }
    let target = (rel_tol * b_norm).powi(2);
    let mut r = b.to_vec();
    let mut p: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut rz = dot(&r, &p);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        let mut rr = 0.0;
        let mut rz_new = 0.0;
        for (((xk, rk), (&pk, &apk)), &dk) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)).zip(&inv_diag) {
            *xk += alpha * pk;
            *rk -= alpha * apk;
            rr += *rk * *rk;
            rz_new += *rk * *rk * dk;
        }
        if rr <= target {
            return (x, it);
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for ((pk, &rk), &dk) in p.iter_mut().zip(&r).zip(&inv_diag) {
            *pk = rk * dk + beta * *pk;
        }
    }
    (x, max_iter)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
