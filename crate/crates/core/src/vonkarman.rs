//! Airy-type stress function `φ(u, v)`: the clamped discrete biharmonic
//! problem `Δ_h² φ = [u, v]`, and the von Kármán coupling force.

use crate::error::{Error, Result};
use crate::grid::{BcKind, BoundaryCondition, Field, Grid};
use crate::grid_ops::{bending_dot, bih_into, bracket_adjoint_into, bracket_into, lap_into};
use crate::linalg::{BandedLu, BandedMatrix};
use crate::memory::{dm_apply, HistoryBuffer, MemoryKernel};

/// Clamped homogeneous `Δ_h²` on interior nodes with a cached factorization.
#[derive(Clone, Debug)]
pub struct AiryOperator {
    grid: Grid,
    bc: BoundaryCondition,
    matrix: BandedMatrix,
    lu: BandedLu,
}

impl AiryOperator {
    pub fn new(grid: Grid) -> Result<Self> {
        let bc = BoundaryCondition::homogeneous(BcKind::Clamped, grid);
        let matrix = assemble_interior(&grid, &bc);
        let lu = matrix.clone().factor().map_err(|e| Error::Singular(format!("Airy operator: {e}")))?;
        Ok(AiryOperator { grid, bc, matrix, lu })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The assembled matrix over interior nodes, ordered row by row.
    pub fn matrix(&self) -> &BandedMatrix {
        &self.matrix
    }

    /// Solves `Δ_h² φ = rhs` in place on a full-node array: interior values
    /// of `rhs` are replaced by `φ`, the ring is zeroed.
    pub fn solve_full_in_place(&self, rhs: &mut [f64]) {
        let g = &self.grid;
        let mut b: Vec<f64> = g.interior().map(|k| rhs[k]).collect();
        self.lu.solve_in_place(&mut b);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for (k, v) in g.interior().zip(b) {
            rhs[k] = v;
        }
    }

    /// `φ(u, u)` on a raw array.
    pub fn phi_of(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.node_count()];
        bracket_into(&self.grid, u, u, &mut out);
        self.solve_full_in_place(&mut out);
        out
    }

    /// `Σ_interior h²·φ·(Δ_h² φ)`, the squared discrete norm of `Δφ`.
    pub fn energy_norm_sq(&self, phi: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.node_count();
        let mut lap = vec![0.0; n];
        lap_into(g, phi, &self.bc, &mut lap);
        bending_dot(g, &lap, &lap)
    }

    /// `Δ_h φ` with the clamped ghost extension.
    pub fn laplacian_of(&self, phi: &[f64]) -> Vec<f64> {
        let mut lap = vec![0.0; self.grid.node_count()];
        lap_into(&self.grid, phi, &self.bc, &mut lap);
        lap
    }
}

fn assemble_interior(g: &Grid, bc: &BoundaryCondition) -> BandedMatrix {
    let (nx, ny) = (g.nx, g.ny);
    let n = nx * ny;
    let mut a = BandedMatrix::zeros(n, 2 * nx);
    let nn = g.node_count();
    let mut probe = vec![0.0; nn];
    let mut scratch = vec![0.0; nn];
    let mut out = vec![0.0; nn];
    // stencil radius 2: colour by residues mod 5
    for ci in 0..5 {
        for cj in 0..5 {
            probe.iter_mut().for_each(|v| *v = 0.0);
            for j in 1..=ny {
                for i in 1..=nx {
                    if i % 5 == ci && j % 5 == cj {
                        probe[g.idx(i, j)] = 1.0;
                    }
                }
            }
            bih_into(g, &probe, bc, &mut scratch, &mut out);
            for j in 1..=ny {
                for i in 1..=nx {
                    let v = out[g.idx(i, j)];
                    if v == 0.0 {
                        continue;
                    }
                    let si = nearest_in_class(i, ci);
                    let sj = nearest_in_class(j, cj);
                    let row = (j - 1) * nx + (i - 1);
                    let col = (sj - 1) * nx + (si - 1);
                    a.set(row, col, v);
                }
            }
        }
    }
    a
}

fn nearest_in_class(i: usize, c: usize) -> usize {
    let d = (c + 5 - i % 5) % 5;
    if d > 2 {
        i + d - 5
    } else {
        i + d
    }
}

/// `φ(u, v)`: clamped solution of `Δ_h² φ = [u, v]`.
pub fn solve_airy(op: &AiryOperator, u: &Field, v: &Field) -> Result<Field> {
    op.grid.check_same(u.grid())?;
    op.grid.check_same(v.grid())?;
    let mut rhs = vec![0.0; op.grid.node_count()];
    bracket_into(&op.grid, u.as_slice(), v.as_slice(), &mut rhs);
    op.solve_full_in_place(&mut rhs);
    Field::from_vec(op.grid, rhs)
}

/// How the viscous part of the coupling is formed.
pub enum EvkMode<'a> {
    ShortMemory,
    /// `history` holds past `φ(u, u)`, one entry per completed step.
    SingularMemory { history: &'a HistoryBuffer, kernel: &'a MemoryKernel },
}

/// Coupling force `[u, ·]ᵀ(e₀ φ(u,u) + e₁ ∂ₜφ(u,u))`, with the time
/// derivative taken as `2φ(u, u̇)` (short memory) or replaced by `d_m`
/// of the stored `φ` history (singular memory).
pub fn evk_operator(u: &Field, udot: &Field, e0: f64, e1: f64, op: &AiryOperator, mode: EvkMode<'_>) -> Result<Field> {
    let g = op.grid;
    g.check_same(u.grid())?;
    g.check_same(udot.grid())?;
    let n = g.node_count();
    let phi = op.phi_of(u.as_slice());
    let mut psi: Vec<f64> = phi.iter().map(|p| e0 * p).collect();
    if e1 != 0.0 {
        match mode {
            EvkMode::ShortMemory => {
                let mut rate = vec![0.0; n];
                bracket_into(&g, u.as_slice(), udot.as_slice(), &mut rate);
                op.solve_full_in_place(&mut rate);
                psi.iter_mut().zip(&rate).for_each(|(p, r)| *p += e1 * 2.0 * r);
            }
            EvkMode::SingularMemory { history, kernel } => {
                if history.is_empty() {
                    return Err(Error::invalid("singular memory needs history", "no stored Airy history for the memory coupling"));
                }
                let d = dm_apply(history, &phi, kernel)?;
                psi.iter_mut().zip(&d).for_each(|(p, r)| *p += e1 * r);
            }
        }
    }
    let mut out = vec![0.0; n];
    bracket_adjoint_into(&g, u.as_slice(), &psi, &mut out);
    Field::from_vec(g, out)
}
