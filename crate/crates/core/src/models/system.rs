//! Discrete plate systems: unknown layout, forces, linearisations, energies.
//!
//! Unknowns are interleaved per node, `dof = node·ncomp + comp`, over every
//! node of the grid. Component 0 is always the deflection `u`; components
//! 1 and 2 are the rotations (Reissner–Mindlin) or in-plane displacements
//! (full von Kármán). Constrained dofs (`u` on the boundary, rotations on a
//! clamped boundary) keep their initial value.
//!
//! Forces are "strong" quantities: the gradient of the discrete energy with
//! respect to a dof divided by that dof's quadrature weight. One time step
//! is the discrete-gradient form of the implicit midpoint rule, so the
//! stored energy changes exactly by the work of the forces.

use crate::contact_law::{BoundaryLaw, RegularizedLaw};
use crate::error::{Error, Result};
use crate::grid::{BcKind, BoundaryCondition, Grid};
use crate::grid_ops::{
    bending_dot, bih_into, bracket_adjoint_into, bracket_into, dx_into, dy_into, grad_adj_into, lap5_into, lap_into, sbp_dot,
    sym_grad_adj_into,
};
use crate::memory::{dm_split, HistoryBuffer, MemoryKernel};
use crate::scenario::{CompiledField, ModelKind, Scenario};
use crate::vonkarman::AiryOperator;

/// Hooke-type tensor `C(ω) = c̃/(1-ν²)(ν tr ω I + (1-ν) ω)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Hooke {
    k: f64,
    nu: f64,
}

impl Hooke {
    fn new(c_tilde: f64, nu: f64) -> Self {
        Hooke { k: c_tilde / (1.0 - nu * nu), nu }
    }

    /// `s·C(ω)` added into `out`.
    fn apply_add(&self, s: f64, w: &[Vec<f64>; 3], out: &mut [Vec<f64>; 3]) {
        let (k, nu) = (self.k * s, self.nu);
        for i in 0..w[0].len() {
            out[0][i] += k * (w[0][i] + nu * w[1][i]);
            out[1][i] += k * (w[1][i] + nu * w[0][i]);
            out[2][i] += k * (1.0 - nu) * w[2][i];
        }
    }
}

fn zeros3(n: usize) -> [Vec<f64>; 3] {
    [vec![0.0; n], vec![0.0; n], vec![0.0; n]]
}

/// Tensor pairing `Σ H (a₁₁b₁₁ + a₂₂b₂₂ + 2a₁₂b₁₂)`.
fn tensor_dot(g: &Grid, a: &[Vec<f64>; 3], b: &[Vec<f64>; 3]) -> f64 {
    sbp_dot(g, &a[0], &b[0]) + sbp_dot(g, &a[1], &b[1]) + 2.0 * sbp_dot(g, &a[2], &b[2])
}

/// Per-step data fixed during the Newton solve.
pub struct StepContext {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub dt: f64,
    pub t_mid: f64,
    /// Loads at `t_mid` per dof (zero on constrained dofs).
    pub loads: Vec<f64>,
    /// Memory quantity at the start of the step.
    pub q0: Vec<f64>,
    pub memory: Option<MemoryStepData>,
}

/// `d_m q(t_{n+1}) = c·q_{n+1} - b`, plus `d_m q(t_n)` from the last step.
pub struct MemoryStepData {
    pub c: f64,
    pub b: Vec<f64>,
    pub d_prev: Vec<f64>,
}

/// Force split by role, each entry a strong per-dof value.
pub struct Forces {
    pub conservative: Vec<f64>,
    /// Kelvin–Voigt part (short memory) or memory part (singular memory).
    pub rate: Vec<f64>,
    pub external: Vec<f64>,
}

/// Stored energy split by term.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub elastic_bending: f64,
    pub elastic_coupling: f64,
    pub contact_potential: f64,
    pub boundary_potential: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.elastic_bending + self.elastic_coupling + self.contact_potential + self.boundary_potential
    }
}

#[derive(Clone, Debug)]
struct Facet {
    node: usize,
    n: [f64; 2],
    w: f64,
}

/// A fully assembled plate model ready for time stepping.
pub struct System {
    pub kind: ModelKind,
    pub grid: Grid,
    pub ncomp: usize,
    pub bc: BoundaryCondition,
    bc_hom: BoundaryCondition,
    pub law: RegularizedLaw,
    pub boundary_law: Option<BoundaryLaw>,
    pub gap: Vec<f64>,
    pub kernel: Option<MemoryKernel>,
    constrained: Vec<bool>,
    weights: Vec<f64>,
    e0: f64,
    e1: f64,
    /// Bending stiffness factor (`b0`, or `b` for the full system).
    beta: f64,
    /// Coefficient of `-Δ` in the mass operator of `u`.
    mass_lap: f64,
    coupling: f64,
    hooke0: Hooke,
    hooke1: Hooke,
    airy: Option<AiryOperator>,
    facets: Vec<Facet>,
    load_fields: Vec<(usize, CompiledField)>,
}

impl System {
    pub fn new(s: &Scenario) -> Result<Self> {
        let grid = s.grid.build()?;
        let kind = s.model.kind;
        let ncomp = kind.ncomp();
        let m = &s.model;
        let u0 = s.initial.u0.compile()?;
        let bc = BoundaryCondition::from_data(m.bc, grid, |x, y| u0.eval(x, y, 0.0));
        let bc_hom = bc.to_homogeneous();
        let law = s.contact.law()?;
        let boundary_law = if kind == ModelKind::FullVonKarman { Some(s.contact.boundary_law()?) } else { None };
        let gap = s.loads.gap.compile()?.sample(grid, 0.0).into_vec();
        let n = grid.node_count();

        let mut constrained = vec![false; n * ncomp];
        let mut weights = vec![0.0; n * ncomp];
        for j in 0..grid.my() {
            for i in 0..grid.mx() {
                let node = grid.idx(i, j);
                let inside = grid.is_interior(i, j);
                constrained[node * ncomp] = !inside;
                weights[node * ncomp] = if inside { grid.cell_area() } else { 0.0 };
                for c in 1..ncomp {
                    let fixed = kind == ModelKind::ReissnerMindlin && m.bc == BcKind::Clamped && !inside;
                    constrained[node * ncomp + c] = fixed;
                    weights[node * ncomp + c] = if fixed { 0.0 } else { grid.sbp_weight(i, j) };
                }
            }
        }

        let (beta, mass_lap) = match kind {
            ModelKind::Biharmonic | ModelKind::VonKarman => (m.b0, 0.0),
            ModelKind::VonKarmanRotInertia => (m.b0, m.g0),
            ModelKind::ReissnerMindlin => (0.0, 0.0),
            ModelKind::FullVonKarman => (m.b, m.a),
        };
        let airy = if kind.is_von_karman() { Some(AiryOperator::new(grid)?) } else { None };

        let mut facets = Vec::new();
        if kind == ModelKind::FullVonKarman {
            let (mx, my) = (grid.mx(), grid.my());
            for i in 0..mx {
                let w = if i == 0 || i == mx - 1 { 0.5 * grid.hx } else { grid.hx };
                facets.push(Facet { node: grid.idx(i, 0), n: [0.0, -1.0], w });
                facets.push(Facet { node: grid.idx(i, my - 1), n: [0.0, 1.0], w });
            }
            for j in 0..my {
                let w = if j == 0 || j == my - 1 { 0.5 * grid.hy } else { grid.hy };
                facets.push(Facet { node: grid.idx(0, j), n: [-1.0, 0.0], w });
                facets.push(Facet { node: grid.idx(mx - 1, j), n: [1.0, 0.0], w });
            }
        }

        let mut load_fields = vec![(0, s.loads.f.compile()?)];
        match kind {
            ModelKind::ReissnerMindlin => {
                load_fields.push((1, s.loads.m1.compile()?));
                load_fields.push((2, s.loads.m2.compile()?));
            }
            ModelKind::FullVonKarman => {
                load_fields.push((1, s.loads.f1.compile()?));
                load_fields.push((2, s.loads.f2.compile()?));
            }
            _ => {}
        }
        load_fields.retain(|(_, f)| !f.is_zero());

        Ok(System {
            kind,
            grid,
            ncomp,
            bc,
            bc_hom,
            law,
            boundary_law,
            gap,
            kernel: m.memory,
            constrained,
            weights,
            e0: m.e0,
            e1: m.e1,
            beta,
            mass_lap,
            coupling: if kind.is_von_karman() { m.coupling } else { 0.0 },
            hooke0: Hooke::new(m.c_tilde, m.nu0),
            hooke1: Hooke::new(m.c_tilde, m.nu1),
            airy,
            facets,
            load_fields,
        })
    }

    pub fn dofs(&self) -> usize {
        self.grid.node_count() * self.ncomp
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    /// Quadrature weight attached to each dof.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Whether the forces are affine in the unknowns apart from contact.
    pub fn is_linear(&self) -> bool {
        match self.kind {
            ModelKind::Biharmonic | ModelKind::ReissnerMindlin => true,
            ModelKind::VonKarman | ModelKind::VonKarmanRotInertia => self.coupling == 0.0,
            ModelKind::FullVonKarman => false,
        }
    }

    /// Whether the Jacobian has a dense part (the Airy coupling).
    pub fn has_dense_coupling(&self) -> bool {
        self.airy.is_some() && self.coupling != 0.0
    }

    pub fn airy(&self) -> Option<&AiryOperator> {
        self.airy.as_ref()
    }

    fn comp(&self, x: &[f64], c: usize) -> Vec<f64> {
        x.iter().skip(c).step_by(self.ncomp).copied().collect()
    }

    fn add_comp(&self, out: &mut [f64], c: usize, vals: &[f64], s: f64) {
        for (o, v) in out.iter_mut().skip(c).step_by(self.ncomp).zip(vals) {
            *o += s * v;
        }
    }

    /// Loads at time `t` per dof.
    pub fn loads_at(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs()];
        for (c, f) in &self.load_fields {
            let vals = f.sample(self.grid, t).into_vec();
            self.add_comp(&mut out, *c, &vals, 1.0);
        }
        for (o, fixed) in out.iter_mut().zip(&self.constrained) {
            if *fixed {
                *o = 0.0;
            }
        }
        out
    }

    /// Length of the memory quantity vector.
    pub fn memory_len(&self) -> usize {
        let n = self.grid.node_count();
        match self.kind {
            ModelKind::Biharmonic => n,
            ModelKind::VonKarman | ModelKind::VonKarmanRotInertia => 2 * n,
            ModelKind::ReissnerMindlin => 3 * n,
            ModelKind::FullVonKarman => 4 * n,
        }
    }

    /// The quantity whose rate is dissipated: `u` and, depending on the
    /// model, the Airy function, the whole state, or the membrane strain.
    pub fn memory_quantity(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.node_count();
        match self.kind {
            ModelKind::Biharmonic => x.to_vec(),
            ModelKind::VonKarman | ModelKind::VonKarmanRotInertia => {
                let mut q = x.to_vec();
                q.extend(self.airy.as_ref().expect("airy operator").phi_of(x));
                q
            }
            ModelKind::ReissnerMindlin => x.to_vec(),
            ModelKind::FullVonKarman => {
                let mut q = self.comp(x, 0);
                let xi = self.membrane_strain(x);
                q.reserve(3 * n);
                for c in xi {
                    q.extend(c);
                }
                q
            }
        }
    }

    /// Builds the per-step context. `history` holds the memory quantity at
    /// `t_0..=t_n` and `d_prev = d_m q(t_n)`.
    pub fn context(&self, x0: &[f64], v0: &[f64], t0: f64, dt: f64, history: Option<(&HistoryBuffer, &[f64])>) -> StepContext {
        let q0 = self.memory_quantity(x0);
        let memory = match (&self.kernel, history) {
            (Some(k), Some((buf, d_prev))) => {
                let split = dm_split(buf, k);
                Some(MemoryStepData { c: split.c, b: split.b, d_prev: d_prev.to_vec() })
            }
            _ => None,
        };
        StepContext {
            x0: x0.to_vec(),
            v0: v0.to_vec(),
            dt,
            t_mid: t0 + 0.5 * dt,
            loads: self.loads_at(t0 + 0.5 * dt),
            q0,
            memory,
        }
    }

    /// Rate of the memory quantity and its derivative factor `ρ = ∂rate/∂q₁`.
    fn rate(&self, ctx: &StepContext, q1: &[f64]) -> (Vec<f64>, f64) {
        match &ctx.memory {
            None => {
                let r = q1.iter().zip(&ctx.q0).map(|(a, b)| (a - b) / ctx.dt).collect();
                (r, 1.0 / ctx.dt)
            }
            Some(m) => {
                let r = q1
                    .iter()
                    .zip(&m.b)
                    .zip(&m.d_prev)
                    .map(|((q, b), d)| 0.5 * (d + m.c * q - b))
                    .collect();
                (r, 0.5 * m.c)
            }
        }
    }

    fn rate_factor(&self, ctx: &StepContext) -> f64 {
        match &ctx.memory {
            None => 1.0 / ctx.dt,
            Some(m) => 0.5 * m.c,
        }
    }

    /// `d_m q` at the end of the step, for the next step's context.
    pub fn memory_rate_at_end(&self, ctx: &StepContext, q1: &[f64]) -> Option<Vec<f64>> {
        ctx.memory
            .as_ref()
            .map(|m| q1.iter().zip(&m.b).map(|(q, b)| m.c * q - b).collect())
    }

    /// `(ε(𝐮) + ½∇u⊗∇u)` for the full system.
    fn membrane_strain(&self, x: &[f64]) -> [Vec<f64>; 3] {
        let g = &self.grid;
        let n = g.node_count();
        let (u, p1, p2) = (self.comp(x, 0), self.comp(x, 1), self.comp(x, 2));
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        dx_into(g, &u, &mut ax);
        dy_into(g, &u, &mut ay);
        let mut xi = sym_grad(g, &p1, &p2);
        for k in 0..n {
            xi[0][k] += 0.5 * ax[k] * ax[k];
            xi[1][k] += 0.5 * ay[k] * ay[k];
            xi[2][k] += 0.5 * ax[k] * ay[k];
        }
        xi
    }

    fn bending_force(&self, um: &[f64], rate_u: &[f64], cons: &mut [f64], rate: &mut [f64]) {
        if self.beta == 0.0 {
            return;
        }
        let g = &self.grid;
        let n = g.node_count();
        let (mut s, mut o) = (vec![0.0; n], vec![0.0; n]);
        bih_into(g, um, &self.bc, &mut s, &mut o);
        self.add_comp(cons, 0, &o, self.beta * self.e0);
        if self.e1 != 0.0 {
            bih_into(g, rate_u, &self.bc_hom, &mut s, &mut o);
            self.add_comp(rate, 0, &o, self.beta * self.e1);
        }
    }

    /// All forces at the trial end state `x1`.
    pub fn forces(&self, ctx: &StepContext, x1: &[f64]) -> Forces {
        let g = &self.grid;
        let n = g.node_count();
        let nd = self.dofs();
        let mut cons = vec![0.0; nd];
        let mut rate = vec![0.0; nd];
        let q1 = self.memory_quantity(x1);
        let (rq, _) = self.rate(ctx, &q1);
        let xm: Vec<f64> = ctx.x0.iter().zip(x1).map(|(a, b)| 0.5 * (a + b)).collect();
        let um = self.comp(&xm, 0);

        // foundation contact
        for k in g.interior() {
            let d = k * self.ncomp;
            let s0 = ctx.x0[d] + self.gap[k];
            let s1 = x1[d] + self.gap[k];
            cons[d] -= self.law.mean_pk(s0, s1);
        }

        match self.kind {
            ModelKind::Biharmonic => self.bending_force(&um, &rq[..n], &mut cons, &mut rate),
            ModelKind::VonKarman | ModelKind::VonKarmanRotInertia => {
                self.bending_force(&um, &rq[..n], &mut cons, &mut rate);
                if self.coupling != 0.0 {
                    let mut o = vec![0.0; n];
                    let phi_bar: Vec<f64> = ctx.q0[n..].iter().zip(&q1[n..]).map(|(a, b)| 0.5 * self.e0 * (a + b)).collect();
                    bracket_adjoint_into(g, &um, &phi_bar, &mut o);
                    self.add_comp(&mut cons, 0, &o, self.coupling);
                    if self.e1 != 0.0 {
                        let psi: Vec<f64> = rq[n..].iter().map(|r| self.e1 * r).collect();
                        bracket_adjoint_into(g, &um, &psi, &mut o);
                        self.add_comp(&mut rate, 0, &o, self.coupling);
                    }
                }
            }
            ModelKind::ReissnerMindlin => {
                let (jc, sc) = self.rm_fluxes(&xm, self.e0, &self.hooke0, 1.0);
                self.rm_apply(&jc, &sc, &mut cons);
                if self.e1 != 0.0 {
                    let (jr, sr) = self.rm_fluxes(&rq, self.e1, &self.hooke1, 1.0);
                    self.rm_apply(&jr, &sr, &mut rate);
                }
            }
            ModelKind::FullVonKarman => {
                self.bending_force(&um, &rq[..n], &mut cons, &mut rate);
                let xi_bar: [Vec<f64>; 3] =
                    std::array::from_fn(|c| (0..n).map(|k| 0.5 * (ctx.q0[(c + 1) * n + k] + q1[(c + 1) * n + k])).collect());
                let xi_rate: [Vec<f64>; 3] = std::array::from_fn(|c| rq[(c + 1) * n..(c + 2) * n].to_vec());
                let mut s_cons = zeros3(n);
                self.hooke0.apply_add(self.e0, &xi_bar, &mut s_cons);
                let mut s_rate = zeros3(n);
                if self.e1 != 0.0 {
                    self.hooke1.apply_add(self.e1, &xi_rate, &mut s_rate);
                }
                let am = self.grad_pair(&um);
                self.membrane_apply(&s_cons, &am, &mut cons);
                if self.e1 != 0.0 {
                    self.membrane_apply(&s_rate, &am, &mut rate);
                }
                let bl = self.boundary_law.as_ref().expect("boundary law");
                for f in &self.facets {
                    let (d1, d2) = (f.node * 3 + 1, f.node * 3 + 2);
                    let r0 = ctx.x0[d1] * f.n[0] + ctx.x0[d2] * f.n[1];
                    let r1 = x1[d1] * f.n[0] + x1[d2] * f.n[1];
                    let (i, j) = g.ij(f.node);
                    let s = -f.w * bl.mean_qk(r0, r1) / g.sbp_weight(i, j);
                    cons[d1] += s * f.n[0];
                    cons[d2] += s * f.n[1];
                }
            }
        }

        for (d, fixed) in self.constrained.iter().enumerate() {
            if *fixed {
                cons[d] = 0.0;
                rate[d] = 0.0;
            }
        }
        Forces { conservative: cons, rate, external: ctx.loads.clone() }
    }

    fn grad_pair(&self, u: &[f64]) -> [Vec<f64>; 2] {
        let g = &self.grid;
        let n = g.node_count();
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        dx_into(g, u, &mut ax);
        dy_into(g, u, &mut ay);
        [ax, ay]
    }

    /// `u`-force `∇*(S a)` and in-plane force `ε*(S)` of a membrane stress.
    fn membrane_apply(&self, s: &[Vec<f64>; 3], a: &[Vec<f64>; 2], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.node_count();
        let mut w1 = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        for k in 0..n {
            w1[k] = s[0][k] * a[0][k] + s[2][k] * a[1][k];
            w2[k] = s[2][k] * a[0][k] + s[1][k] * a[1][k];
        }
        let mut o = vec![0.0; n];
        grad_adj_into(g, &w1, &w2, &mut o);
        self.add_comp(out, 0, &o, 1.0);
        let (mut o1, mut o2) = (vec![0.0; n], vec![0.0; n]);
        sym_grad_adj_into(g, &s[0], &s[1], &s[2], &mut o1, &mut o2);
        self.add_comp(out, 1, &o1, 1.0);
        self.add_comp(out, 2, &o2, 1.0);
    }

    /// Shear flux `e·(∇u + φ)` and bending stress `C(ε(φ))` of a state-shaped vector, scaled by `s`.
    fn rm_fluxes(&self, x: &[f64], e: f64, c: &Hooke, s: f64) -> ([Vec<f64>; 2], [Vec<f64>; 3]) {
        let g = &self.grid;
        let n = g.node_count();
        let (u, p1, p2) = (self.comp(x, 0), self.comp(x, 1), self.comp(x, 2));
        let [mut j1, mut j2] = self.grad_pair(&u);
        for k in 0..n {
            j1[k] = s * e * (j1[k] + p1[k]);
            j2[k] = s * e * (j2[k] + p2[k]);
        }
        let eps = sym_grad(g, &p1, &p2);
        let mut st = zeros3(n);
        c.apply_add(s, &eps, &mut st);
        ([j1, j2], st)
    }

    fn rm_apply(&self, j: &[Vec<f64>; 2], st: &[Vec<f64>; 3], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.node_count();
        let mut o = vec![0.0; n];
        grad_adj_into(g, &j[0], &j[1], &mut o);
        self.add_comp(out, 0, &o, 1.0);
        let (mut o1, mut o2) = (vec![0.0; n], vec![0.0; n]);
        sym_grad_adj_into(g, &st[0], &st[1], &st[2], &mut o1, &mut o2);
        self.add_comp(out, 1, &j[0], 1.0);
        self.add_comp(out, 2, &j[1], 1.0);
        self.add_comp(out, 1, &o1, 1.0);
        self.add_comp(out, 2, &o2, 1.0);
    }

    /// `M v` for the mass operator `I - m Δ₅` on `u` (identity otherwise).
    fn mass_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        if self.mass_lap != 0.0 {
            let g = &self.grid;
            let mut u = self.comp(v, 0);
            for k in 0..g.node_count() {
                if self.constrained[k * self.ncomp] {
                    u[k] = 0.0;
                }
            }
            let mut l = vec![0.0; g.node_count()];
            lap5_into(g, &u, &mut l);
            self.add_comp(&mut out, 0, &l, -self.mass_lap);
        }
        out
    }

    /// End velocity of the midpoint rule.
    pub fn end_velocity(&self, ctx: &StepContext, x1: &[f64]) -> Vec<f64> {
        x1.iter()
            .zip(&ctx.x0)
            .zip(&ctx.v0)
            .enumerate()
            .map(|(d, ((a, b), v))| if self.constrained[d] { 0.0 } else { 2.0 * (a - b) / ctx.dt - v })
            .collect()
    }

    /// Impulse residual `M(v₁ - v₀) + dt·F` on free dofs, `x₁ - x₀` on constrained ones.
    pub fn residual(&self, ctx: &StepContext, x1: &[f64]) -> Vec<f64> {
        let f = self.forces(ctx, x1);
        self.residual_from(ctx, x1, &f)
    }

    pub fn residual_from(&self, ctx: &StepContext, x1: &[f64], f: &Forces) -> Vec<f64> {
        let v1 = self.end_velocity(ctx, x1);
        let dv: Vec<f64> = v1.iter().zip(&ctx.v0).map(|(a, b)| a - b).collect();
        let mut r = self.mass_apply(&dv);
        for d in 0..r.len() {
            if self.constrained[d] {
                r[d] = x1[d] - ctx.x0[d];
            } else {
                r[d] += ctx.dt * (f.conservative[d] + f.rate[d] - f.external[d]);
            }
        }
        r
    }

    /// Directional derivative of the residual in `dx`, leaving out the
    /// dense Airy part (see [`dense_coupling`](Self::dense_coupling)).
    pub fn residual_jvp(&self, ctx: &StepContext, x1: &[f64], dx: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.node_count();
        let nd = self.dofs();
        let dt = ctx.dt;
        let rho = self.rate_factor(ctx);
        let mut df = vec![0.0; nd];

        for k in g.interior() {
            let d = k * self.ncomp;
            if dx[d] != 0.0 {
                let s0 = ctx.x0[d] + self.gap[k];
                let s1 = x1[d] + self.gap[k];
                df[d] -= self.law.mean_pk_dright(s0, s1) * dx[d];
            }
        }
        let mut du = self.comp(dx, 0);
        for k in 0..n {
            if self.constrained[k * self.ncomp] {
                du[k] = 0.0;
            }
        }
        if self.beta != 0.0 {
            let (mut s, mut o) = (vec![0.0; n], vec![0.0; n]);
            bih_into(g, &du, &self.bc_hom, &mut s, &mut o);
            self.add_comp(&mut df, 0, &o, self.beta * (0.5 * self.e0 + self.e1 * rho));
        }
        match self.kind {
            ModelKind::Biharmonic => {}
            ModelKind::VonKarman | ModelKind::VonKarmanRotInertia => {
                if self.coupling != 0.0 {
                    // the coupling with the Airy function held fixed
                    let q1 = self.memory_quantity(x1);
                    let (rq, _) = self.rate(ctx, &q1);
                    let psi: Vec<f64> = (0..n)
                        .map(|k| 0.5 * self.e0 * (ctx.q0[n + k] + q1[n + k]) + self.e1 * rq[n + k])
                        .collect();
                    let half: Vec<f64> = du.iter().map(|v| 0.5 * v).collect();
                    let mut o = vec![0.0; n];
                    bracket_adjoint_into(g, &half, &psi, &mut o);
                    self.add_comp(&mut df, 0, &o, self.coupling);
                }
            }
            ModelKind::ReissnerMindlin => {
                let mut dxf = dx.to_vec();
                for (d, fixed) in self.constrained.iter().enumerate() {
                    if *fixed {
                        dxf[d] = 0.0;
                    }
                }
                let (jc, sc) = self.rm_fluxes(&dxf, self.e0, &self.hooke0, 0.5);
                self.rm_apply(&jc, &sc, &mut df);
                if self.e1 != 0.0 {
                    let (jr, sr) = self.rm_fluxes(&dxf, self.e1, &self.hooke1, rho);
                    self.rm_apply(&jr, &sr, &mut df);
                }
            }
            ModelKind::FullVonKarman => self.full_vk_jvp(ctx, x1, &du, dx, rho, &mut df),
        }
        let mut r = vec![0.0; nd];
        let mut dxm = dx.to_vec();
        for (d, fixed) in self.constrained.iter().enumerate() {
            if *fixed {
                dxm[d] = 0.0;
            }
        }
        let m = self.mass_apply(&dxm);
        for d in 0..nd {
            r[d] = if self.constrained[d] { dx[d] } else { 2.0 / dt * m[d] + dt * df[d] };
        }
        r
    }

    fn full_vk_jvp(&self, ctx: &StepContext, x1: &[f64], du: &[f64], dx: &[f64], rho: f64, df: &mut [f64]) {
        let g = &self.grid;
        let n = g.node_count();
        let q1 = self.memory_quantity(x1);
        let (rq, _) = self.rate(ctx, &q1);
        let u1 = self.comp(x1, 0);
        let u0 = self.comp(&ctx.x0, 0);
        let a1 = self.grad_pair(&u1);
        let a0 = self.grad_pair(&u0);
        let am: [Vec<f64>; 2] = std::array::from_fn(|c| (0..n).map(|k| 0.5 * (a0[c][k] + a1[c][k])).collect());
        let da = self.grad_pair(du);
        let (d1, d2) = (self.comp(dx, 1), self.comp(dx, 2));
        let mut dxi = sym_grad(g, &d1, &d2);
        for k in 0..n {
            dxi[0][k] += a1[0][k] * da[0][k];
            dxi[1][k] += a1[1][k] * da[1][k];
            dxi[2][k] += 0.5 * (a1[0][k] * da[1][k] + a1[1][k] * da[0][k]);
        }
        let mut ds = zeros3(n);
        self.hooke0.apply_add(0.5 * self.e0, &dxi, &mut ds);
        let mut s = zeros3(n);
        let xi_bar: [Vec<f64>; 3] = std::array::from_fn(|c| (0..n).map(|k| 0.5 * (ctx.q0[(c + 1) * n + k] + q1[(c + 1) * n + k])).collect());
        self.hooke0.apply_add(self.e0, &xi_bar, &mut s);
        if self.e1 != 0.0 {
            self.hooke1.apply_add(self.e1 * rho, &dxi, &mut ds);
            let xi_rate: [Vec<f64>; 3] = std::array::from_fn(|c| rq[(c + 1) * n..(c + 2) * n].to_vec());
            self.hooke1.apply_add(self.e1, &xi_rate, &mut s);
        }
        // u-force: ∇*(dS·a_m + S·da/2)
        let mut w1 = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        for k in 0..n {
            let (hx, hy) = (0.5 * da[0][k], 0.5 * da[1][k]);
            w1[k] = ds[0][k] * am[0][k] + ds[2][k] * am[1][k] + s[0][k] * hx + s[2][k] * hy;
            w2[k] = ds[2][k] * am[0][k] + ds[1][k] * am[1][k] + s[2][k] * hx + s[1][k] * hy;
        }
        let mut o = vec![0.0; n];
        grad_adj_into(g, &w1, &w2, &mut o);
        self.add_comp(df, 0, &o, 1.0);
        let (mut o1, mut o2) = (vec![0.0; n], vec![0.0; n]);
        sym_grad_adj_into(g, &ds[0], &ds[1], &ds[2], &mut o1, &mut o2);
        self.add_comp(df, 1, &o1, 1.0);
        self.add_comp(df, 2, &o2, 1.0);
        let bl = self.boundary_law.as_ref().expect("boundary law");
        for f in &self.facets {
            let (i1, i2) = (f.node * 3 + 1, f.node * 3 + 2);
            let dr = dx[i1] * f.n[0] + dx[i2] * f.n[1];
            if dr == 0.0 {
                continue;
            }
            let r0 = ctx.x0[i1] * f.n[0] + ctx.x0[i2] * f.n[1];
            let r1 = x1[i1] * f.n[0] + x1[i2] * f.n[1];
            let (i, j) = g.ij(f.node);
            let s = -f.w * bl.mean_qk_dright(r0, r1) * dr / g.sbp_weight(i, j);
            df[i1] += s * f.n[0];
            df[i2] += s * f.n[1];
        }
    }

    /// Dense part of the Jacobian from the Airy coupling, in residual
    /// units: `dt·c·[u_m,·]ᵀ κ 2K⁻¹[u₁,·]` over interior `u` dofs.
    pub fn dense_coupling(&self, ctx: &StepContext, x1: &[f64]) -> Option<Vec<(usize, Vec<f64>)>> {
        if !self.has_dense_coupling() {
            return None;
        }
        let airy = self.airy.as_ref()?;
        let g = &self.grid;
        let n = g.node_count();
        let kappa = 0.5 * self.e0 + self.e1 * self.rate_factor(ctx);
        let um: Vec<f64> = ctx.x0.iter().zip(x1).map(|(a, b)| 0.5 * (a + b)).collect();
        let scale = ctx.dt * self.coupling * kappa * 2.0;
        let mut cols = Vec::with_capacity(g.nx * g.ny);
        let mut e = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut col = vec![0.0; n];
        for k in g.interior() {
            e[k] = 1.0;
            bracket_into(g, x1, &e, &mut w);
            e[k] = 0.0;
            airy.solve_full_in_place(&mut w);
            bracket_adjoint_into(g, &um, &w, &mut col);
            cols.push((k, col.iter().map(|v| v * scale).collect()));
        }
        Some(cols)
    }

    /// Stored energy of a state.
    pub fn energy(&self, x: &[f64], v: &[f64]) -> EnergyParts {
        let g = &self.grid;
        let n = g.node_count();
        let mv = self.mass_apply(v);
        let kinetic = 0.5 * mv.iter().zip(v).zip(&self.weights).map(|((a, b), w)| w * a * b).sum::<f64>();
        let u = self.comp(x, 0);
        let mut contact = 0.0;
        for k in g.interior() {
            contact += self.law.eval_Pk(u[k] + self.gap[k]);
        }
        contact *= g.cell_area();
        let mut bending = 0.0;
        if self.beta != 0.0 {
            let mut l = vec![0.0; n];
            lap_into(g, &u, &self.bc, &mut l);
            bending = 0.5 * self.beta * self.e0 * bending_dot(g, &l, &l);
        }
        let mut coupling = 0.0;
        let mut boundary = 0.0;
        match self.kind {
            ModelKind::VonKarman | ModelKind::VonKarmanRotInertia => {
                if self.coupling != 0.0 {
                    let airy = self.airy.as_ref().expect("airy operator");
                    let phi = airy.phi_of(&u);
                    let mut br = vec![0.0; n];
                    bracket_into(g, &u, &u, &mut br);
                    let s: f64 = g.interior().map(|k| phi[k] * br[k]).sum();
                    coupling = 0.25 * self.coupling * self.e0 * s * g.cell_area();
                }
            }
            ModelKind::ReissnerMindlin => {
                let (j, st) = self.rm_fluxes(x, 1.0, &self.hooke0, 1.0);
                let (p1, p2) = (self.comp(x, 1), self.comp(x, 2));
                let eps = sym_grad(g, &p1, &p2);
                bending = 0.5 * self.e0 * (sbp_dot(g, &j[0], &j[0]) + sbp_dot(g, &j[1], &j[1])) + 0.5 * tensor_dot(g, &st, &eps);
            }
            ModelKind::FullVonKarman => {
                let xi = self.membrane_strain(x);
                let mut s = zeros3(n);
                self.hooke0.apply_add(self.e0, &xi, &mut s);
                coupling = 0.5 * tensor_dot(g, &s, &xi);
                let bl = self.boundary_law.as_ref().expect("boundary law");
                for f in &self.facets {
                    let r = x[f.node * 3 + 1] * f.n[0] + x[f.node * 3 + 2] * f.n[1];
                    boundary += f.w * bl.potential(r);
                }
            }
            ModelKind::Biharmonic => {}
        }
        EnergyParts {
            kinetic,
            elastic_bending: bending,
            elastic_coupling: coupling,
            contact_potential: contact,
            boundary_potential: boundary,
        }
    }

    /// Initial state `(x, v)` from the scenario data; constrained velocities are zero.
    pub fn initial_state(&self, s: &Scenario) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.grid;
        let nd = self.dofs();
        let mut x = vec![0.0; nd];
        let mut v = vec![0.0; nd];
        let i = &s.initial;
        self.add_comp(&mut x, 0, &i.u0.compile()?.sample(g, 0.0).into_vec(), 1.0);
        self.add_comp(&mut v, 0, &i.u1.compile()?.sample(g, 0.0).into_vec(), 1.0);
        let extra = match self.kind {
            ModelKind::ReissnerMindlin => Some([&i.phi0_1, &i.phi0_2, &i.phi1_1, &i.phi1_2]),
            ModelKind::FullVonKarman => Some([&i.uvec0_1, &i.uvec0_2, &i.uvec1_1, &i.uvec1_2]),
            _ => None,
        };
        if let Some([a, b, c, d]) = extra {
            self.add_comp(&mut x, 1, &a.compile()?.sample(g, 0.0).into_vec(), 1.0);
            self.add_comp(&mut x, 2, &b.compile()?.sample(g, 0.0).into_vec(), 1.0);
            self.add_comp(&mut v, 1, &c.compile()?.sample(g, 0.0).into_vec(), 1.0);
            self.add_comp(&mut v, 2, &d.compile()?.sample(g, 0.0).into_vec(), 1.0);
        }
        for d in 0..nd {
            if self.constrained[d] {
                v[d] = 0.0;
            }
        }
        if x.iter().chain(&v).any(|a| !a.is_finite()) {
            return Err(Error::invalid("fields finite", "initial data is not finite"));
        }
        Ok((x, v))
    }

    /// Smallest `u + g` over interior nodes.
    pub fn min_gap(&self, x: &[f64]) -> f64 {
        self.grid.interior().map(|k| x[k * self.ncomp] + self.gap[k]).fold(f64::INFINITY, f64::min)
    }

    /// Largest outward normal displacement on the boundary (full system).
    pub fn max_boundary_normal(&self, x: &[f64]) -> Option<f64> {
        if self.facets.is_empty() {
            return None;
        }
        Some(
            self.facets
                .iter()
                .map(|f| x[f.node * 3 + 1] * f.n[0] + x[f.node * 3 + 2] * f.n[1])
                .fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// `(outward normal displacement, length weight)` per boundary facet.
    pub fn boundary_normals(&self, x: &[f64]) -> Vec<(f64, f64)> {
        self.facets
            .iter()
            .map(|f| (x[f.node * 3 + 1] * f.n[0] + x[f.node * 3 + 2] * f.n[1], f.w))
            .collect()
    }

    /// Deflection component of a state vector.
    pub fn deflection(&self, x: &[f64]) -> Vec<f64> {
        self.comp(x, 0)
    }

    /// Component `c` of a state vector.
    pub fn component(&self, x: &[f64], c: usize) -> Vec<f64> {
        self.comp(x, c)
    }

    /// `Σ w_d a_d b_d` with the dof weights.
    pub fn weighted_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| w * x * y).sum()
    }
}

/// `ε₀` on raw component arrays.
fn sym_grad(g: &Grid, p1: &[f64], p2: &[f64]) -> [Vec<f64>; 3] {
    let n = g.node_count();
    let mut e = zeros3(n);
    let mut t = vec![0.0; n];
    dx_into(g, p1, &mut e[0]);
    dy_into(g, p2, &mut e[1]);
    dy_into(g, p1, &mut e[2]);
    dx_into(g, p2, &mut t);
    for k in 0..n {
        e[2][k] = 0.5 * (e[2][k] + t[k]);
    }
    e
}
