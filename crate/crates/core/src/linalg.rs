//! Banded and dense direct solvers, and Jacobian assembly by graph colouring.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Square matrix with `bw` sub- and super-diagonals, stored by rows.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedMatrix { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.bw < i || j > i + self.bw || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * (2 * self.bw + 1) + (j + self.bw - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {}", self.bw));
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside band {}", self.bw));
        self.data[s] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            let row = &self.data[i * (2 * self.bw + 1)..];
            let mut s = 0.0;
            for j in lo..=hi {
                s += row[j + self.bw - i] * x[j];
            }
            *yi = s;
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            for j in lo..=hi {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// Max |A - Aᵀ| over the band.
    pub fn asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in i..(i + self.bw + 1).min(self.n) {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    /// In-place LU without pivoting. Intended for mass-dominated or
    /// symmetric positive definite systems.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        let mut scale: f64 = 0.0;
        for v in &self.data {
            scale = scale.max(v.abs());
        }
        let tiny = scale * 1e-14;
        for k in 0..n {
            let pivot = self.data[k * w + bw];
            if !(pivot.abs() > tiny) || !pivot.is_finite() {
                return Err(Error::Singular(format!("pivot {pivot:e} at row {k} of banded matrix")));
            }
            let hi = (k + bw).min(n - 1);
            for i in (k + 1)..=hi {
                let li = i * w + (k + bw - i);
                let l = self.data[li] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[li] = l;
                for j in (k + 1)..=hi {
                    let u = self.data[k * w + (j + bw - k)];
                    self.data[i * w + (j + bw - i)] -= l * u;
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.m.n, self.m.bw);
        let w = 2 * bw + 1;
        let d = &self.m.data;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for j in lo..i {
                s -= d[i * w + (j + bw - i)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = b[i];
            for j in (i + 1)..=hi {
                s -= d[i * w + (j + bw - i)] * b[j];
            }
            b[i] = s / d[i * w + bw];
        }
    }
}

/// Dense LU with partial pivoting.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let lu = m.lu();
        let u = lu.u();
        let scale = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..u.nrows() {
            if !(u[(i, i)].abs() > scale * 1e-15) {
                return Err(Error::Singular(format!("dense pivot {:e} at row {i}", u[(i, i)])));
            }
        }
        Ok(DenseLu { lu })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let mut v = DVector::from_column_slice(b);
        self.lu.solve_mut(&mut v);
        b.copy_from_slice(v.as_slice());
    }
}

/// Bandwidth of an operator whose stencil reaches two nodes in each
/// direction, with `ncomp` interleaved unknowns per node.
pub fn stencil_bandwidth(g: &Grid, ncomp: usize) -> usize {
    ncomp * (2 * g.mx() + 2) + ncomp
}

/// Recover a banded Jacobian from `5 × 5 × ncomp` products `J·e`.
///
/// Unknowns are interleaved per node (`dof = node·ncomp + comp`), and every
/// row may only couple to nodes within two steps in each direction.
pub fn assemble_by_colouring(g: &Grid, ncomp: usize, mut jvp: impl FnMut(&[f64]) -> Vec<f64>) -> BandedMatrix {
    let (mx, my) = (g.mx(), g.my());
    let n = mx * my * ncomp;
    let mut a = BandedMatrix::zeros(n, stencil_bandwidth(g, ncomp));
    let mut probe = vec![0.0; n];
    for ci in 0..5 {
        for cj in 0..5 {
            for comp in 0..ncomp {
                probe.iter_mut().for_each(|v| *v = 0.0);
                for j in (cj..my).step_by(5) {
                    for i in (ci..mx).step_by(5) {
                        probe[(j * mx + i) * ncomp + comp] = 1.0;
                    }
                }
                let col = jvp(&probe);
                for j in 0..my {
                    let dj = offset_to_residue(j, cj);
                    let Some(sj) = shift(j, dj, my) else { continue };
                    for i in 0..mx {
                        let di = offset_to_residue(i, ci);
                        let Some(si) = shift(i, di, mx) else { continue };
                        let source = (sj * mx + si) * ncomp + comp;
                        for rc in 0..ncomp {
                            let row = (j * mx + i) * ncomp + rc;
                            let v = col[row];
                            if v != 0.0 {
                                a.set(row, source, v);
                            }
                        }
                    }
                }
            }
        }
    }
    a
}

// offset in -2..=2 taking `i` to the residue class `c` modulo 5
fn offset_to_residue(i: usize, c: usize) -> isize {
    let d = ((c + 5 - i % 5) % 5) as isize;
    if d > 2 {
        d - 5
    } else {
        d
    }
}

fn shift(i: usize, d: isize, len: usize) -> Option<usize> {
    let s = i as isize + d;
    (s >= 0 && (s as usize) < len).then_some(s as usize)
}
