//! Uniform rectangular grids and nodal fields.
//!
//! Nodes are indexed `(i, j)` with `i in 0..=nx+1`, `j in 0..=ny+1`; the
//! outer ring is the boundary Γ and `nx × ny` nodes are interior. Node
//! `(i, j)` sits at `(i·hx, j·hy)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    /// Grid on `[0, lx] × [0, ly]` with `nx × ny` interior nodes.
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::invalid("nx, ny >= 3", format!("grid needs at least 3 interior nodes per axis, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::invalid("lx, ly > 0", "domain edge lengths must be positive"));
        }
        Ok(Grid {
            nx,
            ny,
            hx: lx / (nx + 1) as f64,
            hy: ly / (ny + 1) as f64,
            lx,
            ly,
        })
    }

    /// Unit square with `n × n` interior nodes.
    pub fn unit_square(n: usize) -> Result<Self> {
        Grid::new(n, n, 1.0, 1.0)
    }

    /// Nodes per row including the boundary ring.
    #[inline]
    pub fn mx(&self) -> usize {
        self.nx + 2
    }

    #[inline]
    pub fn my(&self) -> usize {
        self.ny + 2
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.mx() * self.my()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.mx() + i
    }

    /// Inverse of [`idx`](Self::idx).
    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.mx(), k / self.mx())
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i >= 1 && i <= self.nx && j >= 1 && j <= self.ny
    }

    #[inline]
    pub fn is_corner(&self, i: usize, j: usize) -> bool {
        (i == 0 || i == self.nx + 1) && (j == 0 || j == self.ny + 1)
    }

    /// Area element `hx·hy`.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// Trapezoid (summation-by-parts) node weight including `hx·hy`.
    #[inline]
    pub fn sbp_weight(&self, i: usize, j: usize) -> f64 {
        let cx = if i == 0 || i == self.nx + 1 { 0.5 } else { 1.0 };
        let cy = if j == 0 || j == self.ny + 1 { 0.5 } else { 1.0 };
        cx * cy * self.cell_area()
    }

    /// Weight of the bending energy quadrature: 1 inside, ½ on edges, 0 at corners.
    #[inline]
    pub fn bending_weight(&self, i: usize, j: usize) -> f64 {
        if self.is_corner(i, j) {
            0.0
        } else if self.is_interior(i, j) {
            1.0
        } else {
            0.5
        }
    }

    /// Grid with every cell halved (`2n+1` interior nodes per axis).
    pub fn refined(&self) -> Grid {
        Grid::new(2 * self.nx + 1, 2 * self.ny + 1, self.lx, self.ly).expect("refinement of a valid grid")
    }

    /// Iterator over interior node indices.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.ny).flat_map(move |j| (1..=self.nx).map(move |i| self.idx(i, j)))
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} (h={},{}) vs {}x{} (h={},{})",
                self.nx, self.ny, self.hx, self.hy, other.nx, other.ny, other.hx, other.hy
            )))
        }
    }
}

/// Scalar nodal field over all nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            data: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field {
            grid,
            data: vec![value; grid.node_count()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.node_count());
        for j in 0..grid.my() {
            for i in 0..grid.mx() {
                data.push(f(grid.x(i), grid.y(j)));
            }
        }
        Field { grid, data }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.node_count(),
                data.len()
            )));
        }
        Ok(Field { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.data[k] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute value over interior nodes.
    pub fn interior_max_abs(&self) -> f64 {
        self.grid.interior().map(|k| self.data[k].abs()).fold(0.0, f64::max)
    }

    /// `Σ_interior hx·hy·f·g`.
    pub fn interior_dot(&self, other: &Field) -> f64 {
        let a = self.grid.cell_area();
        self.grid.interior().map(|k| self.data[k] * other.data[k]).sum::<f64>() * a
    }

    /// Row-major CSV of the interior values: `ny` rows (bottom to top) of `nx`
    /// values, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for j in 1..=self.grid.ny {
            let row: Vec<String> = (1..=self.grid.nx).map(|i| format!("{:.16e}", self.at(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Two-component nodal vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct VecField {
    pub c: [Field; 2],
}

impl VecField {
    pub fn new(a: Field, b: Field) -> Result<Self> {
        a.grid.check_same(&b.grid)?;
        Ok(VecField { c: [a, b] })
    }

    pub fn zeros(grid: Grid) -> Self {
        VecField {
            c: [Field::zeros(grid), Field::zeros(grid)],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.c[0].grid()
    }
}

/// Symmetric 2×2 tensor field stored as `(11, 22, 12)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    pub c11: Field,
    pub c22: Field,
    pub c12: Field,
}

impl SymTensorField {
    pub fn new(c11: Field, c22: Field, c12: Field) -> Result<Self> {
        c11.grid.check_same(&c22.grid)?;
        c11.grid.check_same(&c12.grid)?;
        Ok(SymTensorField { c11, c22, c12 })
    }

    pub fn zeros(grid: Grid) -> Self {
        SymTensorField {
            c11: Field::zeros(grid),
            c22: Field::zeros(grid),
            c12: Field::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.c11.grid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Clamped,
    SimplySupported,
}

/// Plate boundary condition realised through one ghost ring outside Γ.
///
/// The ghost value across an edge is `s·u(mirror) + offset` with `s = +1`
/// for clamped plates (even reflection of `u - u0`, so `∂ₙu = ∂ₙu0`) and
/// `s = -1` for simply supported plates (odd reflection about the boundary
/// value, so `Δu = 0` on straight edges with constant data).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryCondition {
    pub kind: BcKind,
    /// Trace of `u0`; only the boundary ring is meaningful.
    pub dirichlet_data: Field,
    // offsets indexed by the tangential node index: left/right by j, bottom/top by i
    left: Vec<f64>,
    right: Vec<f64>,
    bottom: Vec<f64>,
    top: Vec<f64>,
}

impl BoundaryCondition {
    /// Homogeneous condition (zero data, zero offsets).
    pub fn homogeneous(kind: BcKind, grid: Grid) -> Self {
        BoundaryCondition {
            kind,
            dirichlet_data: Field::zeros(grid),
            left: vec![0.0; grid.my()],
            right: vec![0.0; grid.my()],
            bottom: vec![0.0; grid.mx()],
            top: vec![0.0; grid.mx()],
        }
    }

    /// Condition with data `u0`, evaluated also one cell outside Ω for clamped plates.
    pub fn from_data(kind: BcKind, grid: Grid, u0: impl Fn(f64, f64) -> f64) -> Self {
        let mut bc = Self::homogeneous(kind, grid);
        bc.dirichlet_data = Field::from_fn(grid, &u0);
        let (hx, hy) = (grid.hx, grid.hy);
        let (xr, yt) = (grid.lx, grid.ly);
        for j in 0..grid.my() {
            let y = grid.y(j);
            match kind {
                BcKind::Clamped => {
                    bc.left[j] = u0(-hx, y) - u0(hx, y);
                    bc.right[j] = u0(xr + hx, y) - u0(xr - hx, y);
                }
                BcKind::SimplySupported => {
                    bc.left[j] = 2.0 * u0(0.0, y);
                    bc.right[j] = 2.0 * u0(xr, y);
                }
            }
        }
        for i in 0..grid.mx() {
            let x = grid.x(i);
            match kind {
                BcKind::Clamped => {
                    bc.bottom[i] = u0(x, -hy) - u0(x, hy);
                    bc.top[i] = u0(x, yt + hy) - u0(x, yt - hy);
                }
                BcKind::SimplySupported => {
                    bc.bottom[i] = 2.0 * u0(x, 0.0);
                    bc.top[i] = 2.0 * u0(x, yt);
                }
            }
        }
        bc
    }

    /// Same kind with zero data; the condition satisfied by increments.
    pub fn to_homogeneous(&self) -> Self {
        Self::homogeneous(self.kind, *self.dirichlet_data.grid())
    }

    #[inline]
    fn sign(&self) -> f64 {
        match self.kind {
            BcKind::Clamped => 1.0,
            BcKind::SimplySupported => -1.0,
        }
    }

    #[inline]
    pub(crate) fn ghost_left(&self, u_mirror: f64, j: usize) -> f64 {
        self.sign() * u_mirror + self.left[j]
    }
    #[inline]
    pub(crate) fn ghost_right(&self, u_mirror: f64, j: usize) -> f64 {
        self.sign() * u_mirror + self.right[j]
    }
    #[inline]
    pub(crate) fn ghost_bottom(&self, u_mirror: f64, i: usize) -> f64 {
        self.sign() * u_mirror + self.bottom[i]
    }
    #[inline]
    pub(crate) fn ghost_top(&self, u_mirror: f64, i: usize) -> f64 {
        self.sign() * u_mirror + self.top[i]
    }

    /// Whether the boundary trace is constant (required for simply supported runs).
    pub fn has_constant_trace(&self, tol: f64) -> bool {
        let g = self.dirichlet_data.grid();
        let d = &self.dirichlet_data;
        let c = d.at(0, 0);
        let mut ok = true;
        for i in 0..g.mx() {
            ok &= (d.at(i, 0) - c).abs() <= tol && (d.at(i, g.ny + 1) - c).abs() <= tol;
        }
        for j in 0..g.my() {
            ok &= (d.at(0, j) - c).abs() <= tol && (d.at(g.nx + 1, j) - c).abs() <= tol;
        }
        ok
    }
}
