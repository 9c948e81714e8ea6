//! Oracles shared by the integration tests. They are written independently of
//! the library code they check.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use plate_interpen::grid::{BcKind, Field, Grid};
use plate_interpen::memory::MemoryKernel;
use plate_interpen::scenario::Scenario;

const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

fn gl5(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    r * GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(c + r * x)).sum::<f64>()
}

fn gl_adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (l, r) = (gl5(f, a, m), gl5(f, m, b));
    // the floor keeps the recursion finite once round-off dominates
    if depth == 0 || (l + r - whole).abs() <= tol.max(1e-15 * (l.abs() + r.abs())) {
        return l + r;
    }
    gl_adapt(f, a, m, l, 0.5 * tol, depth - 1) + gl_adapt(f, m, b, r, 0.5 * tol, depth - 1)
}

/// Adaptive 5-point Gauss-Legendre quadrature on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    gl_adapt(f, a, b, gl5(f, a, b), tol, 30)
}

/// Like [`integrate`], splitting at every break point inside `(a, b)`.
pub fn integrate_split(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    pts.push(b);
    let n = (pts.len() - 1) as f64;
    pts.windows(2).map(|w| integrate(f, w[0], w[1], tol / n)).sum()
}

/// Max-norm of a slice.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn scenario(text: &str) -> Scenario {
    Scenario::from_toml_str(text, &[]).expect("test scenario is valid")
}

/// Path of a bundled scenario.
pub fn bundled(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

/// Base scenario on a 7×7 interior grid; `overrides` use the `--set` syntax.
pub const SMALL: &str = r#"
[grid]
nx = 7
ny = 7

[time]
t_final = 0.05
dt = 0.01

[model]
kind = "biharmonic"
bc = "clamped"
e0 = 1.0

[contact]
family = "rational_barrier"
gamma = -0.1
kappa = 5.0
k = 4

[loads]
gap = 0.0

[initial]
u0 = 0.5

[solver]
tol = 1e-12
"#;

pub fn small(overrides: &[(&str, &str)]) -> Scenario {
    let o: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    Scenario::from_toml_str(SMALL, &o).unwrap_or_else(|e| panic!("{overrides:?}: {e}"))
}

/// Settings that make each model kind valid on top of [`SMALL`].
pub fn model_overrides(kind: &str) -> Vec<(&'static str, &'static str)> {
    match kind {
        "biharmonic" => vec![("model.b0", "0.5")],
        "von_karman" => vec![("model.kind", "\"von_karman\""), ("model.b0", "0.5")],
        "von_karman_rot_inertia" => vec![("model.kind", "\"von_karman_rot_inertia\""), ("model.b0", "0.5"), ("model.g0", "0.05")],
        "reissner_mindlin" => vec![("model.kind", "\"reissner_mindlin\""), ("model.c_tilde", "0.05")],
        "full_von_karman" => vec![
            ("model.kind", "\"full_von_karman\""),
            ("model.bc", "\"simply_supported\""),
            ("model.a", "0.01"),
            ("model.b", "0.5"),
        ],
        other => panic!("unknown kind {other}"),
    }
}

pub const KINDS: [&str; 5] = ["biharmonic", "von_karman", "von_karman_rot_inertia", "reissner_mindlin", "full_von_karman"];

/// A memory kernel that passes the smallness check for `e0 = 1`, `e1 <= 0.1`.
pub const MEMORY: [(&str, &str); 6] = [
    ("model.e1", "0.05"),
    ("model.memory.alpha", "0.25"),
    ("model.memory.q0", "1.0"),
    ("model.memory.lambda", "1.0"),
    ("model.memory.r0", "0.2"),
    ("model.memory.mu", "2.0"),
];

/// Deterministic pseudo-random values in `[-1, 1)`.
pub fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

/// Node values padded with one ghost layer built from the boundary data:
/// `u(-h) = s·u(h) + (u0(-h) - s·u0(h))` with the reflection sign `s`.
pub struct Padded {
    mx: usize,
    v: Vec<f64>,
}

impl Padded {
    pub fn new(g: &Grid, u: &Field, kind: BcKind, u0: &dyn Fn(f64, f64) -> f64) -> Self {
        let (mx, my) = (g.mx() + 2, g.my() + 2);
        let mut v = vec![f64::NAN; mx * my];
        let s = if kind == BcKind::Clamped { 1.0 } else { -1.0 };
        for j in 0..g.my() {
            for i in 0..g.mx() {
                v[(j + 1) * mx + i + 1] = u.at(i, j);
            }
        }
        let (nx, ny) = (g.nx, g.ny);
        let offset = |xg: f64, yg: f64, xm: f64, ym: f64, xb: f64, yb: f64| match kind {
            BcKind::Clamped => u0(xg, yg) - u0(xm, ym),
            BcKind::SimplySupported => 2.0 * u0(xb, yb),
        };
        for j in 0..g.my() {
            let y = g.y(j);
            v[(j + 1) * mx] = s * u.at(1, j) + offset(-g.hx, y, g.hx, y, 0.0, y);
            v[(j + 1) * mx + nx + 3] = s * u.at(nx, j) + offset(g.lx + g.hx, y, g.lx - g.hx, y, g.lx, y);
        }
        for i in 0..g.mx() {
            let x = g.x(i);
            v[i + 1] = s * u.at(i, 1) + offset(x, -g.hy, x, g.hy, x, 0.0);
            v[(ny + 3) * mx + i + 1] = s * u.at(i, ny) + offset(x, g.ly + g.hy, x, g.ly - g.hy, x, g.ly);
        }
        Padded { mx, v }
    }

    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.v[((j + 1) as usize) * self.mx + (i + 1) as usize]
    }

    /// The 13-point biharmonic stencil written out term by term.
    pub fn bih13(&self, g: &Grid, i: usize, j: usize) -> f64 {
        let (i, j) = (i as isize, j as isize);
        let u = |a: isize, b: isize| self.at(i + a, j + b);
        let (hx2, hy2) = (g.hx * g.hx, g.hy * g.hy);
        let xx = (u(2, 0) - 4.0 * u(1, 0) + 6.0 * u(0, 0) - 4.0 * u(-1, 0) + u(-2, 0)) / (hx2 * hx2);
        let yy = (u(0, 2) - 4.0 * u(0, 1) + 6.0 * u(0, 0) - 4.0 * u(0, -1) + u(0, -2)) / (hy2 * hy2);
        let xy = (u(1, 1) + u(-1, 1) + u(1, -1) + u(-1, -1) - 2.0 * (u(1, 0) + u(-1, 0) + u(0, 1) + u(0, -1)) + 4.0 * u(0, 0))
            / (hx2 * hy2);
        xx + yy + 2.0 * xy
    }
}

pub fn random_field(g: Grid, seed: u64, zero_ring: bool) -> Field {
    let mut v = noise(seed, g.node_count());
    if zero_ring {
        for j in 0..g.my() {
            for i in 0..g.mx() {
                if !g.is_interior(i, j) {
                    v[g.idx(i, j)] = 0.0;
                }
            }
        }
    }
    Field::from_vec(g, v).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = max_abs(b).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Dense direct solve of the clamped problem built from the 13-point oracle.
pub fn dense_airy(g: &Grid, rhs: &Field) -> Field {
    let ids: Vec<usize> = g.interior().collect();
    let mut m = DMatrix::zeros(ids.len(), ids.len());
    for (c, &k) in ids.iter().enumerate() {
        let mut e = Field::zeros(*g);
        e.as_mut_slice()[k] = 1.0;
        let pad = Padded::new(g, &e, BcKind::Clamped, &|_, _| 0.0);
        for (r, &kr) in ids.iter().enumerate() {
            let (i, j) = g.ij(kr);
            m[(r, c)] = pad.bih13(g, i, j);
        }
    }
    let b = DVector::from_iterator(ids.len(), ids.iter().map(|&k| rhs.as_slice()[k]));
    let x = m.lu().solve(&b).expect("nonsingular");
    let mut out = Field::zeros(*g);
    for (v, &k) in x.iter().zip(&ids) {
        out.as_mut_slice()[k] = *v;
    }
    out
}

/// `Σ w (Δ_h φ)²` with the clamped ghost rule, independent of the library.
pub fn laplacian_energy(g: &Grid, phi: &Field) -> f64 {
    let pad = Padded::new(g, phi, BcKind::Clamped, &|_, _| 0.0);
    let mut s = 0.0;
    for j in 0..g.my() {
        for i in 0..g.mx() {
            let on_x = i == 0 || i == g.nx + 1;
            let on_y = j == 0 || j == g.ny + 1;
            let w = match (on_x, on_y) {
                (true, true) => continue,
                (false, false) => 1.0,
                _ => 0.5,
            };
            let (a, b) = (i as isize, j as isize);
            let l = (pad.at(a - 1, b) - 2.0 * pad.at(a, b) + pad.at(a + 1, b)) / (g.hx * g.hx)
                + (pad.at(a, b - 1) - 2.0 * pad.at(a, b) + pad.at(a, b + 1)) / (g.hy * g.hy);
            s += w * l * l;
        }
    }
    s * g.hx * g.hy
}

/// `∫₀^∞ K` by quadrature. The singular part is mapped by `t = w^p`,
/// `p = 1/(1-2α)`, which turns `t^{-2α} dt` into `p dw`.
pub fn mass_by_quadrature(k: &MemoryKernel) -> f64 {
    let p = 1.0 / (1.0 - 2.0 * k.alpha);
    let mut total = 0.0;
    if k.q0 > 0.0 {
        let t_end = 60.0 / k.lambda;
        let w_end = t_end.powf(1.0 / p);
        let f = |w: f64| p * k.q0 * (-k.lambda * w.powf(p)).exp();
        let pieces = 64;
        total += (0..pieces)
            .map(|i| integrate(&f, w_end * i as f64 / pieces as f64, w_end * (i + 1) as f64 / pieces as f64, 1e-16))
            .sum::<f64>();
    }
    if k.r0 > 0.0 {
        let t_end = 60.0 / k.mu;
        let f = |t: f64| k.r0 * (-k.mu * t).exp();
        total += (0..64).map(|i| integrate(&f, t_end * i as f64 / 64.0, t_end * (i + 1) as f64 / 64.0, 1e-16)).sum::<f64>();
    }
    total
}
