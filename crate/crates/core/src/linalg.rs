//! Small dense helpers. Everything here works on plain slices; the problems
//! in this crate are at most a few dozen dimensions.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `a + t * b`
pub fn axpy(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

pub fn scale(a: &[f64], t: f64) -> Vec<f64> {
    a.iter().map(|x| t * x).collect()
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return None;
        }
        Some(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::identity(n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        (0..self.rows).all(|i| {
            (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol * scale)
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ y`
    pub fn rmatvec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    /// `AᵀA`
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut data = vec![0.0; n * n];
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..n {
                for b in 0..n {
                    data[a * n + b] += r[a] * r[b];
                }
            }
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn scaled(&self, t: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * t).collect(),
        }
    }

    /// Cholesky factorisation succeeds, i.e. the (symmetric) matrix is
    /// numerically positive definite.
    pub fn is_positive_definite(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= 0.0 || !d.is_finite() {
                return false;
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        true
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, run until the Rayleigh quotient changes by less than `rel_tol`
/// (relative) between sweeps.
pub fn power_iteration_psd(m: &Matrix, rel_tol: f64, max_iter: usize) -> f64 {
    let n = m.rows();
    // Deterministic start vector with components along every axis.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sqrt()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = m.matvec(&v);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = dot(&v, &w);
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Spectral norm of a symmetric matrix: `sqrt(λ_max(A²))`, computed by power
/// iteration on `AᵀA` so that eigenvalues of opposite sign cannot stall it.
pub fn spectral_norm_symmetric(a: &Matrix, rel_tol: f64) -> f64 {
    power_iteration_psd(&a.gram(), rel_tol, 1_000_000).sqrt()
}

/// Smallest singular value of a square matrix via power iteration on the
/// shifted Gram matrix `c·I − AᵀA` with `c = ‖A‖²`.
pub fn smallest_singular_value(a: &Matrix, rel_tol: f64) -> f64 {
    let g = a.gram();
    let c = power_iteration_psd(&g, rel_tol, 1_000_000);
    let n = g.rows();
    let mut shifted = g.scaled(-1.0);
    for i in 0..n {
        shifted.data[i * n + i] += c;
    }
    let top = power_iteration_psd(&shifted, rel_tol, 1_000_000);
    (c - top).max(0.0).sqrt()
}

/// `base^n` by repeated squaring, so that integer powers are reproducible
/// independent of the platform `powi` lowering.
pub fn pow_int(base: f64, n: u64) -> f64 {
    let mut result = 1.0;
    let mut b = base;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result *= b;
        }
        b *= b;
        e >>= 1;
    }
    result
}
