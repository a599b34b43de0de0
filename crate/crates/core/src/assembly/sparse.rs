//! Compressed row storage for symmetric matrices and a profile (skyline)
//! Cholesky factorization under reverse Cuthill-McKee ordering.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

/// Square matrix in compressed row storage. Both triangles are stored; the
/// pattern is fixed at construction and entries are accumulated with `add`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix over the given (per row, sorted) column sets.
    pub fn from_pattern(rows: &[BTreeSet<usize>]) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for r in rows {
            cols.extend(r.iter().copied());
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].binary_search(&j).ok().map(|k| a + k)
    }

    /// Adds `v` at `(i, j)`.
    ///
    /// # Panics
    ///
    /// If `(i, j)` is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) not in pattern"));
        self.vals[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `self += alpha * other`; both must share the pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &CsrMatrix) {
        assert!(self.row_ptr == other.row_ptr && self.cols == other.cols, "pattern mismatch");
        for (a, b) in self.vals.iter_mut().zip(&other.vals) {
            *a += alpha * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }
}

/// Reverse Cuthill-McKee ordering. `perm[new] = old`. Ties are broken by
/// index so the result is deterministic.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let neighbours: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    let degree: Vec<usize> = neighbours.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // Returns (eccentricity, a minimum-degree node of the last level).
        let mut level = vec![usize::MAX; n];
        level[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut last = start;
        while let Some(x) = queue.pop_front() {
            for &y in &neighbours[x] {
                if !visited[y] && level[y] == usize::MAX {
                    level[y] = level[x] + 1;
                    queue.push_back(y);
                    let better = level[y] > level[last] || (level[y] == level[last] && degree[y] < degree[last]);
                    if better {
                        last = y;
                    }
                }
            }
        }
        (level[last], last)
    };

    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)).unwrap();
        // Pseudo-peripheral node search.
        let mut root = seed;
        let (mut ecc, mut far) = bfs_levels(root, &visited);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far, &visited);
            if e2 <= ecc {
                break;
            }
            root = far;
            ecc = e2;
            far = f2;
        }
        visited[root] = true;
        let start = order.len();
        order.push(root);
        let mut head = start;
        while head < order.len() {
            let x = order[head];
            head += 1;
            let mut next: Vec<usize> = neighbours[x].iter().copied().filter(|&y| !visited[y]).collect();
            next.sort_by_key(|&y| (degree[y], y));
            for y in next {
                visited[y] = true;
                order.push(y);
            }
        }
    }
    order.reverse();
    order
}

/// `L L^T` factor stored row-wise over each row's envelope.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    ptr: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut ptr = Vec::with_capacity(n + 1);
        ptr.push(0);
        for i in 0..n {
            ptr.push(ptr[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; ptr[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let c = inv[j];
                if c <= new {
                    data[ptr[new] + c - first[new]] += v;
                }
            }
        }

        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = data[ptr[i] + j - fi];
                let ri = &data[ptr[i] + lo - fi..ptr[i] + j - fi];
                let rj = &data[ptr[j] + lo - fj..ptr[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if j < i {
                    data[ptr[i] + j - fi] = s / data[ptr[j + 1] - 1];
                } else {
                    if !(s > 1e-14 * scale) {
                        return Err(Error::LinearSolve {
                            reason: format!("matrix is not positive definite (pivot {s:e} at row {i})"),
                            residual: f64::INFINITY,
                        });
                    }
                    data[ptr[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(SkylineCholesky { perm, first, ptr, data })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.ptr[i]..self.ptr[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.ptr[i]..self.ptr[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Number of stored factor entries.
    pub fn profile_size(&self) -> usize {
        self.data.len()
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct SPD solve followed by iterative refinement until the residual
/// stops shrinking; fails if the relative residual is then above `tol`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let chol = SkylineCholesky::factor(a)?;
    let residual = |x: &[f64]| -> Vec<f64> { b.iter().zip(a.mul_vec(x)).map(|(bi, ai)| bi - ai).collect() };
    let mut x = chol.solve(b);
    let mut r = residual(&x);
    let mut rel = norm2(&r) / bnorm;
    for _ in 0..5 {
        let dx = chol.solve(&r);
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, d)| xi + d).collect();
        let rt = residual(&trial);
        let rel_t = norm2(&rt) / bnorm;
        if !(rel_t < 0.5 * rel) {
            break;
        }
        (x, r, rel) = (trial, rt, rel_t);
    }
    if rel <= tol {
        Ok(x)
    } else {
        Err(Error::LinearSolve { reason: "relative residual above tolerance after refinement".into(), residual: rel })
    }
}
