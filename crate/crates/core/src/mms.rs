//! Manufactured-solution convergence sweep for the linear Kirchhoff plate.
//!
//! The exact deflection is `u* = c + cos(t)·sin(πx₁/l₁)·sin(πx₂/l₂)` with the
//! load that makes it solve the undamped or damped plate equation. Observed
//! orders come from successive differences: halving `h` at fixed `dt`
//! cancels the time error to leading order, and vice versa, so each order
//! isolates one discretisation. Errors against `u*` under simultaneous
//! halving are reported as well.

use std::f64::consts::PI;

use crate::diagnostics::fmt17;
use crate::error::{Error, Result};
use crate::exec;
use crate::models::run_with_system;
use crate::scenario::{FieldSpec, InitialSpec, ModelKind, Scenario};

#[derive(Clone, Debug, PartialEq)]
pub struct MmsLevel {
    pub h: f64,
    pub dt: f64,
    /// Max-norm difference to the next finer level at the final time (`None` on the finest).
    pub diff_to_next: Option<f64>,
    /// Max-norm error against the exact solution at the final time.
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MmsReport {
    pub spatial: Vec<MmsLevel>,
    pub temporal: Vec<MmsLevel>,
    pub combined: Vec<MmsLevel>,
    pub spatial_orders: Vec<f64>,
    pub temporal_orders: Vec<f64>,
    /// Orders of the exact error under simultaneous halving.
    pub combined_orders: Vec<f64>,
}

impl MmsReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("sweep,level,h,dt,diff_to_next,error\n");
        for (name, lv) in [("spatial", &self.spatial), ("temporal", &self.temporal), ("combined", &self.combined)] {
            for (i, l) in lv.iter().enumerate() {
                s.push_str(&format!(
                    "{name},{i},{},{},{},{}\n",
                    fmt17(l.h),
                    fmt17(l.dt),
                    l.diff_to_next.map(fmt17).unwrap_or_default(),
                    fmt17(l.error)
                ));
            }
        }
        s
    }

    pub fn orders_csv(&self) -> String {
        let mut s = String::from("sweep,halving,order\n");
        for (name, o) in [("spatial", &self.spatial_orders), ("temporal", &self.temporal_orders), ("combined", &self.combined_orders)] {
            for (i, v) in o.iter().enumerate() {
                s.push_str(&format!("{name},{},{}\n", i + 1, fmt17(*v)));
            }
        }
        s
    }
}

/// Scenario whose exact solution is the manufactured deflection.
pub fn manufactured_scenario(base: &Scenario, nx: usize, ny: usize, dt: f64) -> Result<Scenario> {
    let m = &base.model;
    if m.kind != ModelKind::Biharmonic || m.memory.is_some() {
        return Err(Error::invalid("mms needs the short-memory Kirchhoff model", "manufactured solutions are set up for kind = biharmonic without memory"));
    }
    let spec = base.mms.unwrap_or_default();
    if !(spec.offset > 1.0) {
        return Err(Error::invalid("mms offset > 1", "the manufactured deflection must stay clear of the foundation"));
    }
    let (lx, ly) = (base.grid.lx, base.grid.ly);
    let lam = PI * PI * (1.0 / (lx * lx) + 1.0 / (ly * ly));
    let a = m.e0 * m.b0 * lam * lam - 1.0;
    let b = -m.e1 * m.b0 * lam * lam;
    let shape = format!("sin(pi*x1/{lx:?})*sin(pi*x2/{ly:?})");
    let mut s = base.clone();
    s.grid.nx = nx;
    s.grid.ny = ny;
    s.time.dt = dt;
    s.time.snapshot_every = 0;
    s.loads = Default::default();
    s.loads.f = FieldSpec::Expr(format!("({a:?}*cos(t) + {b:?}*sin(t))*{shape}"));
    s.loads.gap = FieldSpec::Const(0.0);
    s.initial = InitialSpec {
        u0: FieldSpec::Expr(format!("{:?} + {shape}", spec.offset)),
        u1: FieldSpec::Const(0.0),
        phi0_1: FieldSpec::Const(0.0),
        phi0_2: FieldSpec::Const(0.0),
        phi1_1: FieldSpec::Const(0.0),
        phi1_2: FieldSpec::Const(0.0),
        uvec0_1: FieldSpec::Const(0.0),
        uvec0_2: FieldSpec::Const(0.0),
        uvec1_1: FieldSpec::Const(0.0),
        uvec1_2: FieldSpec::Const(0.0),
        c0: Some(spec.offset - 1.0),
    };
    s.study = None;
    s.validate()?;
    Ok(s)
}

fn exact(base: &Scenario, x: f64, y: f64, t: f64) -> f64 {
    let spec = base.mms.unwrap_or_default();
    spec.offset + t.cos() * (PI * x / base.grid.lx).sin() * (PI * y / base.grid.ly).sin()
}

struct LevelRun {
    h: f64,
    dt: f64,
    nx: usize,
    /// Final deflection on all nodes.
    u: Vec<f64>,
    error: f64,
}

fn run_level(base: &Scenario, level: (usize, usize, f64)) -> Result<LevelRun> {
    let (nx, ny, dt) = level;
    let s = manufactured_scenario(base, nx, ny, dt)?;
    let (sys, traj) = run_with_system(&s)?;
    let u = traj.deflection(traj.steps());
    let t = traj.times[traj.steps()];
    let g = sys.grid;
    let error = g
        .interior()
        .map(|k| {
            let (i, j) = g.ij(k);
            (u[k] - exact(base, g.x(i), g.y(j), t)).abs()
        })
        .fold(0.0, f64::max);
    Ok(LevelRun { h: g.hx, dt, nx, u, error })
}

/// Max difference over the nodes of the coarser of two nested grids.
fn nested_diff(a: &LevelRun, b: &LevelRun, ny_a: usize) -> f64 {
    let r = (b.nx + 1) / (a.nx + 1);
    let (mxa, mxb) = (a.nx + 2, b.nx + 2);
    let mut m: f64 = 0.0;
    for j in 1..=ny_a {
        for i in 1..=a.nx {
            m = m.max((a.u[j * mxa + i] - b.u[r * j * mxb + r * i]).abs());
        }
    }
    m
}

fn orders(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn sweep(base: &Scenario, levels: &[(usize, usize, f64)]) -> Result<(Vec<MmsLevel>, Vec<f64>, Vec<f64>)> {
    let runs: Vec<LevelRun> = exec::par_map(levels, |&l| run_level(base, l)).into_iter().collect::<Result<_>>()?;
    let diffs: Vec<f64> = runs.windows(2).zip(levels).map(|(w, l)| nested_diff(&w[0], &w[1], l.1)).collect();
    let rows = runs
        .iter()
        .enumerate()
        .map(|(i, r)| MmsLevel { h: r.h, dt: r.dt, diff_to_next: diffs.get(i).copied(), error: r.error })
        .collect();
    let errors: Vec<f64> = runs.iter().map(|r| r.error).collect();
    Ok((rows, orders(&diffs), orders(&errors)))
}

/// Runs the three sweeps with `halvings` halvings each, starting from the
/// grid and step of `base`.
pub fn mms_sweep(base: &Scenario) -> Result<MmsReport> {
    let spec = base.mms.unwrap_or_default();
    let n = spec.halvings;
    if n < 2 {
        return Err(Error::invalid("mms halvings >= 2", "at least two halvings are needed to observe an order"));
    }
    let (nx, ny, dt) = (base.grid.nx, base.grid.ny, base.time.dt);
    let refine = |l: usize| ((nx + 1) << l) - 1;
    let refine_y = |l: usize| ((ny + 1) << l) - 1;
    let half = |l: usize| dt / (1u64 << l) as f64;
    let spatial: Vec<_> = (0..=n).map(|l| (refine(l), refine_y(l), dt)).collect();
    let temporal: Vec<_> = (0..=n).map(|l| (nx, ny, half(l))).collect();
    let combined: Vec<_> = (0..=n).map(|l| (refine(l), refine_y(l), half(l))).collect();
    let (spatial, spatial_orders, _) = sweep(base, &spatial)?;
    let (temporal, temporal_orders, _) = sweep(base, &temporal)?;
    let (combined, _, combined_orders) = sweep(base, &combined)?;
    Ok(MmsReport { spatial, temporal, combined, spatial_orders, temporal_orders, combined_orders })
}
