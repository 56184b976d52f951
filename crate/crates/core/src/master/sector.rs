//! The generator restricted to even `n + m`, the sector a vacuum start never
//! leaves, as a sparse row-compressed operator and as a banded linear system.

use super::Generator;

/// Even-parity cells in column-major order, with the generator in CSR form.
pub(crate) struct EvenSector {
    pub dim: usize,
    /// `(n, m)` for each compressed index.
    pub cells: Vec<(usize, usize)>,
    /// Compressed index of `n + m * dim`, or `usize::MAX` for odd cells.
    slot: Vec<usize>,
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl EvenSector {
    pub fn new(gen: &Generator) -> Self {
        let d = gen.dim;
        let mut cells = Vec::with_capacity(d * d / 2 + 1);
        let mut slot = vec![usize::MAX; d * d];
        for m in 0..d {
            for n in 0..d {
                if (n + m) % 2 == 0 {
                    slot[n + m * d] = cells.len();
                    cells.push((n, m));
                }
            }
        }
        let mut ptr = Vec::with_capacity(cells.len() + 1);
        let mut col = Vec::with_capacity(9 * cells.len());
        let mut val = Vec::with_capacity(9 * cells.len());
        ptr.push(0);
        for &(n, m) in &cells {
            gen.stencil(n, m, |i, j, c| {
                if c != 0.0 {
                    col.push(slot[i + j * d]);
                    val.push(c);
                }
            });
            ptr.push(col.len());
        }
        EvenSector {
            dim: d,
            cells,
            slot,
            ptr,
            col,
            val,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn index_of(&self, n: usize, m: usize) -> usize {
        self.slot[n + m * self.dim]
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.ptr[r]..self.ptr[r + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            *out = acc;
        }
    }

    /// Expands a compressed vector into a column-major `dim x dim` slice.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut full = vec![0.0; d * d];
        for (&(n, m), &v) in self.cells.iter().zip(x) {
            full[n + m * d] = v;
        }
        full
    }

    /// Solves `L rho = 0` with `tr rho = 1`.
    ///
    /// The diagonal equations sum to zero, so the one for `(0, 0)` is redundant
    /// and is replaced by the pin `rho_00 = 1`; the result is then normalised.
    /// Returns `None` if the banded factorisation meets a zero pivot.
    pub fn null_vector(&self) -> Option<Vec<f64>> {
        let len = self.len();
        let pin = self.index_of(0, 0);
        let (mut kl, mut ku) = (0usize, 0usize);
        for r in 0..len {
            for &c in &self.col[self.ptr[r]..self.ptr[r + 1]] {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        let mut band = Banded::new(len, kl, ku);
        for r in 0..len {
            if r == pin {
                band.set(r, r, 1.0);
                continue;
            }
            for k in self.ptr[r]..self.ptr[r + 1] {
                band.add(r, self.col[k], self.val[k]);
            }
        }
        let mut rhs = vec![0.0; len];
        rhs[pin] = 1.0;
        band.solve(&mut rhs)?;
        let trace: f64 = self
            .cells
            .iter()
            .zip(&rhs)
            .filter(|((n, m), _)| n == m)
            .map(|(_, v)| v)
            .sum();
        for v in &mut rhs {
            *v /= trace;
        }
        Some(rhs)
    }
}

/// Square banded matrix in LAPACK `gbtrf` layout: `kl` extra rows of headroom
/// for fill-in from partial pivoting.
struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row stride; entry `(i, j)` lives at `(kl + ku + i - j) + j * ld`.
    ld: usize,
    data: Vec<f64>,
}

impl Banded {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; ld * n],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        self.kl + self.ku + i - j + j * self.ld
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] = v;
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    /// In-place LU with partial pivoting followed by the two triangular solves.
    fn solve(&mut self, b: &mut [f64]) -> Option<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = self.data[self.at(j, j)].abs();
            for i in j + 1..=last {
                let v = self.data[self.at(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            piv[j] = p;
            let right = (j + kl + ku).min(n - 1);
            if p != j {
                for c in j..=right {
                    let (a, bb) = (self.at(j, c), self.at(p, c));
                    self.data.swap(a, bb);
                }
            }
            let pivot = self.data[self.at(j, j)];
            for i in j + 1..=last {
                let k = self.at(i, j);
                let l = self.data[k] / pivot;
                self.data[k] = l;
                if l == 0.0 {
                    continue;
                }
                for c in j + 1..=right {
                    let u = self.data[self.at(j, c)];
                    if u != 0.0 {
                        let t = self.at(i, c);
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        for j in 0..n {
            b.swap(j, piv[j]);
            let bj = b[j];
            if bj != 0.0 {
                for i in j + 1..=(j + kl).min(n - 1) {
                    b[i] -= self.data[self.at(i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.data[self.at(j, j)];
            let bj = b[j];
            for i in j.saturating_sub(kl + ku)..j {
                b[i] -= self.data[self.at(i, j)] * bj;
            }
        }
        Some(())
    }
}
