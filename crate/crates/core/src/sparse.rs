//! Compressed sparse row storage for Hermitian operators.

use alloc::vec::Vec;

use crate::C64;

/// Linear operator that is Hermitian with respect to the Euclidean inner product.
pub trait HermitianOperator {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Square complex matrix in CSR layout.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

/// Accumulates `(row, col, value)` triplets; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder {
            n,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: C64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    /// Adds `c |u_b - e^{i theta} u_a|^2` to the quadratic form.
    pub fn push_link(&mut self, a: usize, b: usize, c: f64, phase: C64) {
        self.push(a, a, C64::new(c, 0.0));
        self.push(b, b, C64::new(c, 0.0));
        self.push(b, a, -phase * c);
        self.push(a, b, -phase.conj() * c);
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries
            .sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(self.entries.len());
        row_ptr.push(0);
        let mut row = 0;
        for (r, c, v) in self.entries {
            while row < r {
                row_ptr.push(cols.len());
                row += 1;
            }
            if cols.len() > row_ptr[row] && *cols.last().unwrap() == c {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
            }
        }
        while row < self.n {
            row_ptr.push(cols.len());
            row += 1;
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Scale entries to `D A D` for a real diagonal `D`.
    pub fn scale_symmetric(&mut self, d: &[f64]) {
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                self.vals[k] *= d[r] * d[self.cols[k]];
            }
        }
    }

    /// Largest entrywise deviation `max |A_rc - conj(A_cr)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                let d = (v - self.get(c, r).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn gershgorin_max(&self) -> f64 {
        (0..self.n)
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| if c == r { v.re } else { v.norm() })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Dense copy, only meant for small matrices in tests and oracles.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut out = alloc::vec![C64::new(0.0, 0.0); self.n * self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out[r * self.n + c] = v;
            }
        }
        out
    }
}

impl HermitianOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        // conj(x) * y
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    use num_traits::Float;
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
