//! Finite-difference operators on [`Grid`] fields.
//!
//! Second-order operators (Laplacian, biharmonic, bracket) use ghost nodes
//! supplied by a [`BoundaryCondition`]. First-order operators are
//! summation-by-parts pairs: central differences inside, one-sided on the
//! boundary ring, with the trapezoid weights of [`Grid::sbp_weight`]. Their
//! `_adj` companions are the weighted adjoints `H⁻¹DᵀH`, which play the role
//! of `-div` / `-Div` with natural boundary terms built in.
//!
//! The `*_into` functions work on raw node arrays and skip grid checks.

use crate::error::Result;
use crate::grid::{BoundaryCondition, Field, Grid, SymTensorField, VecField};

/// 5-point Laplacian with ghost extension. Defined on interior and edge
/// nodes; corners are set to 0 (never read by the biharmonic stencil).
pub fn lap_into(g: &Grid, u: &[f64], bc: &BoundaryCondition, out: &mut [f64]) {
    let (mx, nx, ny) = (g.mx(), g.nx, g.ny);
    let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let at = |i: usize, j: usize| u[j * mx + i];
    for j in 0..=ny + 1 {
        for i in 0..=nx + 1 {
            let k = j * mx + i;
            if g.is_corner(i, j) {
                out[k] = 0.0;
                continue;
            }
            let c = at(i, j);
            let west = if i == 0 { bc.ghost_left(at(1, j), j) } else { at(i - 1, j) };
            let east = if i == nx + 1 { bc.ghost_right(at(nx, j), j) } else { at(i + 1, j) };
            let south = if j == 0 { bc.ghost_bottom(at(i, 1), i) } else { at(i, j - 1) };
            let north = if j == ny + 1 { bc.ghost_top(at(i, ny), i) } else { at(i, j + 1) };
            out[k] = ax * (west - 2.0 * c + east) + ay * (south - 2.0 * c + north);
        }
    }
}

/// 5-point Laplacian at interior nodes taking ring values as given
/// (Dirichlet); ring entries of `out` are 0.
pub fn lap5_into(g: &Grid, u: &[f64], out: &mut [f64]) {
    let mx = g.mx();
    let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 1..=g.ny {
        for i in 1..=g.nx {
            let k = j * mx + i;
            out[k] = ax * (u[k - 1] - 2.0 * u[k] + u[k + 1]) + ay * (u[k - mx] - 2.0 * u[k] + u[k + mx]);
        }
    }
}

/// `Δ_h(Δ_h u)` at interior nodes; ring entries are 0. `scratch` receives `Δ_h u`.
pub fn bih_into(g: &Grid, u: &[f64], bc: &BoundaryCondition, scratch: &mut [f64], out: &mut [f64]) {
    lap_into(g, u, bc, scratch);
    lap5_into(g, scratch, out);
}

#[inline]
fn d11(u: &[f64], k: usize, ax: f64) -> f64 {
    ax * (u[k - 1] - 2.0 * u[k] + u[k + 1])
}
#[inline]
fn d22(u: &[f64], k: usize, mx: usize, ay: f64) -> f64 {
    ay * (u[k - mx] - 2.0 * u[k] + u[k + mx])
}
#[inline]
fn d12(u: &[f64], k: usize, mx: usize, axy: f64) -> f64 {
    axy * (u[k + mx + 1] - u[k - mx + 1] - u[k + mx - 1] + u[k - mx - 1])
}

/// Pointwise second differences `(∂₁₁u, ∂₂₂u, ∂₁₂u)` at interior nodes, zero on the ring.
pub fn hessian_into(g: &Grid, u: &[f64], h11: &mut [f64], h22: &mut [f64], h12: &mut [f64]) {
    let mx = g.mx();
    let (ax, ay, axy) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy), 0.25 / (g.hx * g.hy));
    for v in [&mut *h11, &mut *h22, &mut *h12] {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    for j in 1..=g.ny {
        for i in 1..=g.nx {
            let k = j * mx + i;
            h11[k] = d11(u, k, ax);
            h22[k] = d22(u, k, mx, ay);
            h12[k] = d12(u, k, mx, axy);
        }
    }
}

/// `[u, v]` at interior nodes, zero on the ring.
pub fn bracket_into(g: &Grid, u: &[f64], v: &[f64], out: &mut [f64]) {
    let mx = g.mx();
    let (ax, ay, axy) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy), 0.25 / (g.hx * g.hy));
    out.iter_mut().for_each(|x| *x = 0.0);
    for j in 1..=g.ny {
        for i in 1..=g.nx {
            let k = j * mx + i;
            let (u11, u22, u12) = (d11(u, k, ax), d22(u, k, mx, ay), d12(u, k, mx, axy));
            let (v11, v22, v12) = (d11(v, k, ax), d22(v, k, mx, ay), d12(v, k, mx, axy));
            // written so that swapping u and v gives the same rounding
            out[k] = (u11 * v22 + u22 * v11) - 2.0 * (u12 * v12);
        }
    }
}

/// Transpose of `δ ↦ [u, δ]` over interior nodes, applied to `psi`.
///
/// With `a, b, c` the second differences of `u`, this is
/// `D₂₂(aψ) + D₁₁(bψ) − 2D₁₂(cψ)` where the products vanish on the ring.
pub fn bracket_adjoint_into(g: &Grid, u: &[f64], psi: &[f64], out: &mut [f64]) {
    let n = g.node_count();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    hessian_into(g, u, &mut a, &mut b, &mut c);
    bracket_adjoint_with_hessian(g, &a, &b, &c, psi, out);
}

/// As [`bracket_adjoint_into`] with the Hessian of `u` precomputed.
pub fn bracket_adjoint_with_hessian(g: &Grid, h11: &[f64], h22: &[f64], h12: &[f64], psi: &[f64], out: &mut [f64]) {
    let mx = g.mx();
    let (ax, ay, axy) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy), 0.25 / (g.hx * g.hy));
    let n = g.node_count();
    // weighted products; the Hessians are zero on the ring so these are too
    let mut pa = vec![0.0; n];
    let mut pb = vec![0.0; n];
    let mut pc = vec![0.0; n];
    for k in 0..n {
        pa[k] = h11[k] * psi[k];
        pb[k] = h22[k] * psi[k];
        pc[k] = h12[k] * psi[k];
    }
    out.iter_mut().for_each(|x| *x = 0.0);
    for j in 1..=g.ny {
        for i in 1..=g.nx {
            let k = j * mx + i;
            out[k] = d22(&pa, k, mx, ay) + d11(&pb, k, ax) - 2.0 * d12(&pc, k, mx, axy);
        }
    }
}

/// SBP first derivative along `x₁` at every node.
pub fn dx_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    let (mx, last) = (g.mx(), g.nx + 1);
    let (r, r2) = (1.0 / g.hx, 0.5 / g.hx);
    for j in 0..g.my() {
        let row = j * mx;
        out[row] = r * (f[row + 1] - f[row]);
        for i in 1..last {
            out[row + i] = r2 * (f[row + i + 1] - f[row + i - 1]);
        }
        out[row + last] = r * (f[row + last] - f[row + last - 1]);
    }
}

/// SBP first derivative along `x₂` at every node.
pub fn dy_into(g: &Grid, f: &[f64], out: &mut [f64]) {
    let (mx, last) = (g.mx(), g.ny + 1);
    let (r, r2) = (1.0 / g.hy, 0.5 / g.hy);
    for i in 0..mx {
        out[i] = r * (f[mx + i] - f[i]);
        for j in 1..last {
            out[j * mx + i] = r2 * (f[(j + 1) * mx + i] - f[(j - 1) * mx + i]);
        }
        out[last * mx + i] = r * (f[last * mx + i] - f[(last - 1) * mx + i]);
    }
}

/// `H⁻¹D₁ᵀH w`: the weighted adjoint of [`dx_into`].
pub fn dx_adj_into(g: &Grid, w: &[f64], out: &mut [f64]) {
    let (mx, last) = (g.mx(), g.nx + 1);
    let (r, r2) = (1.0 / g.hx, 0.5 / g.hx);
    for j in 0..g.my() {
        let row = j * mx;
        out[row] = -r * (w[row] + w[row + 1]);
        for i in 1..last {
            out[row + i] = r2 * (w[row + i - 1] - w[row + i + 1]);
        }
        out[row + last] = r * (w[row + last - 1] + w[row + last]);
    }
}

/// `H⁻¹D₂ᵀH w`: the weighted adjoint of [`dy_into`].
pub fn dy_adj_into(g: &Grid, w: &[f64], out: &mut [f64]) {
    let (mx, last) = (g.mx(), g.ny + 1);
    let (r, r2) = (1.0 / g.hy, 0.5 / g.hy);
    for i in 0..mx {
        out[i] = -r * (w[i] + w[mx + i]);
        for j in 1..last {
            out[j * mx + i] = r2 * (w[(j - 1) * mx + i] - w[(j + 1) * mx + i]);
        }
        out[last * mx + i] = r * (w[(last - 1) * mx + i] + w[last * mx + i]);
    }
}

/// `Σ H_k a_k b_k` over all nodes.
pub fn sbp_dot(g: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let mx = g.mx();
    let mut s = 0.0;
    for j in 0..g.my() {
        for i in 0..mx {
            let k = j * mx + i;
            s += g.sbp_weight(i, j) * a[k] * b[k];
        }
    }
    s
}

/// `Σ w_k a_k b_k` with the bending weights (1 inside, ½ on edges, 0 at corners).
pub fn bending_dot(g: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let mx = g.mx();
    let mut s = 0.0;
    for j in 0..g.my() {
        for i in 0..mx {
            let k = j * mx + i;
            let w = g.bending_weight(i, j);
            if w != 0.0 {
                s += w * a[k] * b[k];
            }
        }
    }
    s * g.cell_area()
}

fn check2(a: &Field, b: &Field) -> Result<Grid> {
    a.grid().check_same(b.grid())?;
    Ok(*a.grid())
}

fn check_bc(f: &Field, bc: &BoundaryCondition) -> Result<Grid> {
    check2(f, &bc.dirichlet_data)
}

/// Discrete Laplacian honouring `bc`.
pub fn laplacian(f: &Field, bc: &BoundaryCondition) -> Result<Field> {
    let g = check_bc(f, bc)?;
    let mut out = Field::zeros(g);
    lap_into(&g, f.as_slice(), bc, out.as_mut_slice());
    Ok(out)
}

/// Discrete biharmonic `Δ_h∘Δ_h` honouring `bc`; zero on the ring.
pub fn biharmonic(f: &Field, bc: &BoundaryCondition) -> Result<Field> {
    let g = check_bc(f, bc)?;
    let mut scratch = vec![0.0; g.node_count()];
    let mut out = Field::zeros(g);
    bih_into(&g, f.as_slice(), bc, &mut scratch, out.as_mut_slice());
    Ok(out)
}

/// Von Kármán bracket `[u, v]`; zero on the ring.
pub fn vk_bracket(u: &Field, v: &Field) -> Result<Field> {
    let g = check2(u, v)?;
    let mut out = Field::zeros(g);
    bracket_into(&g, u.as_slice(), v.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Transpose of `δ ↦ [u, δ]` applied to `psi` (interior values only).
pub fn bracket_adjoint(u: &Field, psi: &Field) -> Result<Field> {
    let g = check2(u, psi)?;
    let mut out = Field::zeros(g);
    bracket_adjoint_into(&g, u.as_slice(), psi.as_slice(), out.as_mut_slice());
    Ok(out)
}

pub fn gradient(f: &Field) -> VecField {
    let g = *f.grid();
    let mut a = Field::zeros(g);
    let mut b = Field::zeros(g);
    dx_into(&g, f.as_slice(), a.as_mut_slice());
    dy_into(&g, f.as_slice(), b.as_mut_slice());
    VecField { c: [a, b] }
}

/// `ε₀(φ) = ½(∇φ + ∇φᵀ)`.
pub fn sym_grad(phi: &VecField) -> SymTensorField {
    let g = *phi.grid();
    let n = g.node_count();
    let (p1, p2) = (phi.c[0].as_slice(), phi.c[1].as_slice());
    let mut e11 = Field::zeros(g);
    let mut e22 = Field::zeros(g);
    let mut e12 = Field::zeros(g);
    let mut t = vec![0.0; n];
    dx_into(&g, p1, e11.as_mut_slice());
    dy_into(&g, p2, e22.as_mut_slice());
    dy_into(&g, p1, e12.as_mut_slice());
    dx_into(&g, p2, &mut t);
    for (e, s) in e12.as_mut_slice().iter_mut().zip(&t) {
        *e = 0.5 * (*e + s);
    }
    SymTensorField { c11: e11, c22: e22, c12: e12 }
}

/// `Div ω = (∂ᵢω₁ᵢ, ∂ᵢω₂ᵢ)`.
pub fn div_tensor(w: &SymTensorField) -> VecField {
    let g = *w.grid();
    let n = g.node_count();
    let mut t = vec![0.0; n];
    let mut a = Field::zeros(g);
    let mut b = Field::zeros(g);
    dx_into(&g, w.c11.as_slice(), a.as_mut_slice());
    dy_into(&g, w.c12.as_slice(), &mut t);
    a.as_mut_slice().iter_mut().zip(&t).for_each(|(x, y)| *x += y);
    dx_into(&g, w.c12.as_slice(), b.as_mut_slice());
    dy_into(&g, w.c22.as_slice(), &mut t);
    b.as_mut_slice().iter_mut().zip(&t).for_each(|(x, y)| *x += y);
    VecField { c: [a, b] }
}

pub fn div(phi: &VecField) -> Field {
    let g = *phi.grid();
    let mut out = Field::zeros(g);
    let mut t = vec![0.0; g.node_count()];
    dx_into(&g, phi.c[0].as_slice(), out.as_mut_slice());
    dy_into(&g, phi.c[1].as_slice(), &mut t);
    out.as_mut_slice().iter_mut().zip(&t).for_each(|(x, y)| *x += y);
    out
}

pub fn trace(w: &SymTensorField) -> Field {
    let g = *w.grid();
    let data = w.c11.as_slice().iter().zip(w.c22.as_slice()).map(|(a, b)| a + b).collect();
    Field::from_vec(g, data).expect("same grid")
}

/// Weighted adjoint of [`sym_grad`] for the tensor pairing `ω:ε`; the
/// discrete `-Div ω` including boundary traction terms.
pub fn sym_grad_adj_into(g: &Grid, w11: &[f64], w22: &[f64], w12: &[f64], out1: &mut [f64], out2: &mut [f64]) {
    let mut t = vec![0.0; g.node_count()];
    dx_adj_into(g, w11, out1);
    dy_adj_into(g, w12, &mut t);
    out1.iter_mut().zip(&t).for_each(|(x, y)| *x += y);
    dy_adj_into(g, w22, out2);
    dx_adj_into(g, w12, &mut t);
    out2.iter_mut().zip(&t).for_each(|(x, y)| *x += y);
}

/// Weighted adjoint of the gradient: `H⁻¹(D₁ᵀH w₁ + D₂ᵀH w₂)`, the discrete `-div w`.
pub fn grad_adj_into(g: &Grid, w1: &[f64], w2: &[f64], out: &mut [f64]) {
    let mut t = vec![0.0; g.node_count()];
    dx_adj_into(g, w1, out);
    dy_adj_into(g, w2, &mut t);
    out.iter_mut().zip(&t).for_each(|(x, y)| *x += y);
}
