//! Energy ledger, space-time norms and the two limit studies.

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{BoundaryCondition, Grid};
use crate::grid_ops::{bending_dot, lap_into};
use crate::memory::frac_norm;
use crate::models::{run_with_system, SimState, StepContext, System, Trajectory};
use crate::scenario::Scenario;

/// Energy balance of one step: `epsilon = ΔE + viscous + memory - work`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerRow {
    pub step: usize,
    pub t: f64,
    pub kinetic: f64,
    pub elastic_bending: f64,
    pub elastic_coupling: f64,
    pub contact_potential: f64,
    pub boundary_potential: f64,
    /// Total stored energy at the end of the step.
    pub stored: f64,
    /// Stored energy at the start of the step.
    pub stored_prev: f64,
    pub viscous: f64,
    pub memory: f64,
    pub work: f64,
    pub epsilon: f64,
    /// `min(u + g)` over interior nodes at the end of the step.
    pub min_gap: f64,
}

impl LedgerRow {
    pub fn evaluate(sys: &System, ctx: &StepContext, old: &SimState, x1: &[f64], v1: &[f64], step: usize) -> LedgerRow {
        let e0 = sys.energy(&old.x, &old.v);
        let e1 = sys.energy(x1, v1);
        let f = sys.forces(ctx, x1);
        let dx: Vec<f64> = x1.iter().zip(&old.x).map(|(a, b)| a - b).collect();
        let d = sys.weighted_dot(&f.rate, &dx);
        let w = sys.weighted_dot(&f.external, &dx);
        let (viscous, memory) = if ctx.memory.is_some() { (0.0, d) } else { (d, 0.0) };
        let stored = e1.total();
        let stored_prev = e0.total();
        LedgerRow {
            step,
            t: old.t + ctx.dt,
            kinetic: e1.kinetic,
            elastic_bending: e1.elastic_bending,
            elastic_coupling: e1.elastic_coupling,
            contact_potential: e1.contact_potential,
            boundary_potential: e1.boundary_potential,
            stored,
            stored_prev,
            viscous,
            memory,
            work: w,
            epsilon: (stored - stored_prev) + d - w,
            min_gap: sys.min_gap(x1),
        }
    }

    /// Magnitude against which `epsilon` is judged.
    pub fn scale(&self) -> f64 {
        self.stored.abs().max(self.stored_prev.abs()).max(self.viscous.abs()).max(self.memory.abs()).max(self.work.abs())
    }

    pub const CSV_HEADER: &'static str = "step,t,kinetic,elastic_bending,elastic_coupling,contact_potential,boundary_potential,stored,viscous,memory,work,epsilon,min_gap";

    pub fn csv_line(&self) -> String {
        let v = [
            self.t,
            self.kinetic,
            self.elastic_bending,
            self.elastic_coupling,
            self.contact_potential,
            self.boundary_potential,
            self.stored,
            self.viscous,
            self.memory,
            self.work,
            self.epsilon,
            self.min_gap,
        ];
        let mut s = self.step.to_string();
        for x in v {
            s.push(',');
            s.push_str(&fmt17(x));
        }
        s
    }
}

/// Float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trapezoid weights in time for `n` levels.
fn time_weights(n: usize, dt: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if i == 0 || i + 1 == n { 0.5 * dt } else { dt })
}

/// Discrete `L₂(Q)` distance of the deflections of two runs on one grid.
pub fn l2q_distance(g: &Grid, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.states.len() != b.states.len() || a.ncomp != b.ncomp {
        return Err(Error::invalid("comparable trajectories", "trajectories differ in length or layout"));
    }
    let nc = a.ncomp;
    let mut s = 0.0;
    for (w, (xa, xb)) in time_weights(a.states.len(), a.dt).zip(a.states.iter().zip(&b.states)) {
        let inner: f64 = g.interior().map(|k| (xa[k * nc] - xb[k * nc]).powi(2)).sum();
        s += w * inner * g.cell_area();
    }
    Ok(s.sqrt())
}

/// Space-time contact quantities of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactSummary {
    /// `max(0, -min(u + g))` over the whole run.
    pub max_penetration: f64,
    /// `min(u + g)` over the whole run.
    pub min_gap: f64,
    /// `‖p_k(u+g)‖_{L₁(Q)}`.
    pub force_mass: f64,
    /// `⟨p_k(u+g), u+g⟩_Q`, never positive.
    pub pairing: f64,
    /// `⟨q̃_k(ũ_n), ũ_n⟩_S` for the full system, else 0.
    pub boundary_pairing: f64,
}

pub fn contact_summary(sys: &System, traj: &Trajectory) -> ContactSummary {
    let g = &sys.grid;
    let nc = traj.ncomp;
    let mut out = ContactSummary { min_gap: f64::INFINITY, ..Default::default() };
    for (w, x) in time_weights(traj.states.len(), traj.dt).zip(&traj.states) {
        let (mut mass, mut pair) = (0.0, 0.0);
        for k in g.interior() {
            let s = x[k * nc] + sys.gap[k];
            out.min_gap = out.min_gap.min(s);
            let p = sys.law.eval_pk(s);
            mass += p;
            pair += p * s;
        }
        out.force_mass += w * mass * g.cell_area();
        out.pairing += w * pair * g.cell_area();
        if let Some(bl) = &sys.boundary_law {
            let b: f64 = sys.boundary_normals(x).iter().map(|(r, len)| len * bl.eval_qk(*r) * r).sum();
            out.boundary_pairing += w * b;
        }
    }
    out.max_penetration = (-out.min_gap).max(0.0);
    out
}

/// One row of the regularisation study.
#[derive(Clone, Debug, PartialEq)]
pub struct KStudyRow {
    pub k: u32,
    pub summary: Option<ContactSummary>,
    /// `‖u_k - u_{k_prev}‖_{L₂(Q)}`; `None` on the first row or after a failure.
    pub distance_to_prev: Option<f64>,
    pub error: Option<String>,
}

impl KStudyRow {
    pub const CSV_HEADER: &'static str = "k,max_penetration,force_mass_l1,pairing,distance_to_prev,error";

    pub fn csv_line(&self) -> String {
        let s = self.summary.unwrap_or_default();
        let ok = self.summary.is_some();
        format!(
            "{},{},{},{},{},{}",
            self.k,
            opt(ok.then_some(s.max_penetration)),
            opt(ok.then_some(s.force_mass)),
            opt(ok.then_some(s.pairing)),
            opt(self.distance_to_prev),
            self.error.as_deref().unwrap_or("").replace(',', ";")
        )
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

fn with_k(s: &Scenario, k: u32) -> Scenario {
    let mut s = s.clone();
    s.contact.k = k;
    s
}

fn successive<T>(runs: &[Result<(System, Trajectory)>], mut f: impl FnMut(usize, &Result<(System, Trajectory)>, Option<f64>) -> T) -> Vec<T> {
    let mut rows = Vec::with_capacity(runs.len());
    for (i, r) in runs.iter().enumerate() {
        let dist = match (i.checked_sub(1).map(|p| &runs[p]), r) {
            (Some(Ok((_, a))), Ok((sys, b))) => l2q_distance(&sys.grid, a, b).ok(),
            _ => None,
        };
        rows.push(f(i, r, dist));
    }
    rows
}

/// Runs the scenario once per cap index. Failed runs are reported in
/// their row and do not stop the others.
pub fn k_study(s: &Scenario, k_list: &[u32]) -> Result<Vec<KStudyRow>> {
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("k_list increasing", "k_list must be strictly increasing"));
    }
    let runs = exec::par_map(k_list, |&k| run_with_system(&with_k(s, k)));
    Ok(successive(&runs, |i, r, dist| match r {
        Ok((sys, traj)) => KStudyRow { k: k_list[i], summary: Some(contact_summary(sys, traj)), distance_to_prev: dist, error: None },
        Err(e) => KStudyRow { k: k_list[i], summary: None, distance_to_prev: None, error: Some(e.to_string()) },
    }))
}

/// One row of the Signorini limit study.
#[derive(Clone, Debug, PartialEq)]
pub struct SignoriniRow {
    pub gamma: f64,
    pub summary: Option<ContactSummary>,
    pub distance_to_prev: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignoriniReport {
    pub k: u32,
    pub rows: Vec<SignoriniRow>,
    /// `L₂(Q)` distance between the last run and the same run on the
    /// refined grid, sampled at the coarse nodes.
    pub refinement_error: Option<f64>,
}

impl SignoriniReport {
    pub const CSV_HEADER: &'static str = "gamma,max_penetration,complementarity,boundary_complementarity,force_mass_l1,distance_to_prev,error";

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let s = r.summary.unwrap_or_default();
            let ok = r.summary.is_some();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt17(r.gamma),
                opt(ok.then_some(s.max_penetration)),
                opt(ok.then_some(s.pairing.abs())),
                opt(ok.then_some(s.boundary_pairing.abs())),
                opt(ok.then_some(s.force_mass)),
                opt(r.distance_to_prev),
                r.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        out
    }
}

/// Runs the scenario for each `γ` (same cap index `k`), then measures the
/// spatial error of the last run against a refined grid.
pub fn gamma_study(s: &Scenario, gamma_list: &[f64], k: u32) -> Result<SignoriniReport> {
    if gamma_list.is_empty() || gamma_list.iter().any(|g| !(*g < 0.0)) || gamma_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("gamma_list increasing and negative", "gamma_list must be negative and strictly increasing"));
    }
    let scen: Vec<Scenario> = gamma_list
        .iter()
        .map(|&gm| {
            let mut t = with_k(s, k);
            t.contact.gamma = gm;
            t
        })
        .collect();
    let mut jobs: Vec<(Scenario, bool)> = scen.iter().cloned().map(|t| (t, false)).collect();
    let mut fine = scen.last().expect("non-empty").clone();
    fine.grid.nx = 2 * fine.grid.nx + 1;
    fine.grid.ny = 2 * fine.grid.ny + 1;
    jobs.push((fine, true));
    let mut runs = exec::par_map(&jobs, |(t, _)| run_with_system(t));
    let fine_run = runs.pop().expect("refined run");
    let rows = successive(&runs, |i, r, dist| match r {
        Ok((sys, traj)) => SignoriniRow { gamma: gamma_list[i], summary: Some(contact_summary(sys, traj)), distance_to_prev: dist, error: None },
        Err(e) => SignoriniRow { gamma: gamma_list[i], summary: None, distance_to_prev: None, error: Some(e.to_string()) },
    });
    let refinement_error = match (runs.last(), &fine_run) {
        (Some(Ok((sys, coarse))), Ok((fsys, finetraj))) => Some(coarse_fine_distance(&sys.grid, coarse, &fsys.grid, finetraj)?),
        _ => None,
    };
    Ok(SignoriniReport { k, rows, refinement_error })
}

/// `L₂(Q)` distance between a coarse run and a run on `coarse.refined()`,
/// compared at the coarse nodes.
pub fn coarse_fine_distance(gc: &Grid, coarse: &Trajectory, gf: &Grid, fine: &Trajectory) -> Result<f64> {
    if *gf != gc.refined() || coarse.states.len() != fine.states.len() {
        return Err(Error::invalid("refined companion run", "fine run must use the refined grid and the same time levels"));
    }
    let (nc, mxf) = (coarse.ncomp, gf.mx());
    let mut s = 0.0;
    for (w, (xc, xf)) in time_weights(coarse.states.len(), coarse.dt).zip(coarse.states.iter().zip(&fine.states)) {
        let mut inner = 0.0;
        for k in gc.interior() {
            let (i, j) = gc.ij(k);
            let kf = 2 * j * mxf + 2 * i;
            inner += (xc[k * nc] - xf[kf * nc]).powi(2);
        }
        s += w * inner * gc.cell_area();
    }
    Ok(s.sqrt())
}

/// Fractional-in-time norms of a recorded run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FracReport {
    pub alpha: f64,
    /// `H^α(0,T; H²)`-type norm of the deflection history.
    pub deflection: f64,
    /// Same for `Δφ(u,u)` (von Kármán models only).
    pub airy: Option<f64>,
}

/// Squared discrete `H²` norm: `‖u‖² + ‖Δ_h u‖²`.
/// The homogeneous ghost rule keeps it a norm on differences of states.
fn h2_norm_sq(g: &Grid, bc: &BoundaryCondition, u: &[f64]) -> f64 {
    let mut lap = vec![0.0; g.node_count()];
    lap_into(g, u, bc, &mut lap);
    let l2: f64 = g.interior().map(|k| u[k] * u[k]).sum::<f64>() * g.cell_area();
    l2 + bending_dot(g, &lap, &lap)
}

pub fn frac_report(sys: &System, traj: &Trajectory, alpha: f64) -> Result<FracReport> {
    let us: Vec<Vec<f64>> = (0..traj.states.len()).map(|n| traj.deflection(n)).collect();
    let bc = sys.bc.to_homogeneous();
    let deflection = frac_norm(&us, traj.dt, alpha, |u| h2_norm_sq(&sys.grid, &bc, u))?;
    let airy = match sys.airy() {
        Some(op) => {
            let phis: Vec<Vec<f64>> = us.iter().map(|u| op.phi_of(u)).collect();
            Some(frac_norm(&phis, traj.dt, alpha, |p| op.energy_norm_sq(p))?)
        }
        None => None,
    };
    Ok(FracReport { alpha, deflection, airy })
}
