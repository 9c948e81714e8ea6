//! Time stepping of the plate models.

mod newton;
mod system;

pub use newton::{NewtonSolver, StepStats};
pub use system::{EnergyParts, Forces, MemoryStepData, StepContext, System};

use crate::diagnostics::LedgerRow;
use crate::error::{Error, Result};
use crate::memory::HistoryBuffer;
use crate::scenario::Scenario;

/// State at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Interleaved unknowns, see [`System`].
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// Recorded output of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub ncomp: usize,
    /// Time of every level `t_0..=t_N`.
    pub times: Vec<f64>,
    /// Unknowns at every level.
    pub states: Vec<Vec<f64>>,
    /// Indices into `states` selected by `snapshot_every`.
    pub snapshots: Vec<usize>,
    pub ledger: Vec<LedgerRow>,
    pub newton_iterations: Vec<usize>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("non-empty trajectory")
    }

    /// Deflection at level `n`.
    pub fn deflection(&self, n: usize) -> Vec<f64> {
        self.states[n].iter().step_by(self.ncomp).copied().collect()
    }
}

/// A system together with its solver and time-stepping state.
pub struct Simulation {
    pub system: System,
    solver: NewtonSolver,
    state: SimState,
    dt: f64,
    step_index: usize,
    history: Option<HistoryBuffer>,
    d_prev: Vec<f64>,
}

impl Simulation {
    pub fn new(s: &Scenario) -> Result<Self> {
        let system = System::new(s)?;
        let (x, v) = system.initial_state(s)?;
        let dt = s.time.dt;
        let history = match &system.kernel {
            Some(_) => {
                let mut h = HistoryBuffer::new(dt, system.memory_len())?;
                h.push(system.memory_quantity(&x))?;
                Some(h)
            }
            None => None,
        };
        let d_prev = vec![0.0; system.memory_len()];
        let solver = NewtonSolver::new(s.solver.tol, s.solver.max_iter);
        Ok(Simulation { system, solver, state: SimState { t: 0.0, x, v }, dt, step_index: 0, history, d_prev })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Advances one step and returns its ledger row.
    pub fn step(&mut self) -> Result<(LedgerRow, StepStats)> {
        let sys = &self.system;
        let t0 = self.state.t;
        let ctx = sys.context(
            &self.state.x,
            &self.state.v,
            t0,
            self.dt,
            self.history.as_ref().map(|h| (h, self.d_prev.as_slice())),
        );
        let step = self.step_index + 1;
        let (x1, stats) = self.solver.solve(sys, &ctx).map_err(|(message, residuals)| Error::StepFailed { step, message, residuals })?;

        let gamma = sys.law.gamma();
        let min_gap = sys.min_gap(&x1);
        if !(min_gap > gamma) {
            return Err(Error::Penetration { step, min_gap, gamma });
        }
        if let Some(r) = sys.max_boundary_normal(&x1) {
            if !(r < -gamma) {
                return Err(Error::Penetration { step, min_gap: -r, gamma });
            }
        }
        if x1.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailed { step, message: "non-finite state".into(), residuals: stats.residuals.clone() });
        }

        let v1 = sys.end_velocity(&ctx, &x1);
        let row = LedgerRow::evaluate(sys, &ctx, &self.state, &x1, &v1, step);
        if let Some(h) = self.history.as_mut() {
            let q1 = sys.memory_quantity(&x1);
            if let Some(d) = sys.memory_rate_at_end(&ctx, &q1) {
                self.d_prev = d;
            }
            h.push(q1)?;
        }
        self.step_index = step;
        self.state = SimState { t: step as f64 * self.dt, x: x1, v: v1 };
        Ok((row, stats))
    }
}

/// Runs a scenario to its final time.
pub fn run(s: &Scenario) -> Result<Trajectory> {
    run_with_system(s).map(|(_, t)| t)
}

/// Like [`run`], also handing back the assembled system.
pub fn run_with_system(s: &Scenario) -> Result<(System, Trajectory)> {
    let mut sim = Simulation::new(s)?;
    let n = s.time.steps();
    let every = s.time.snapshot_every;
    let mut traj = Trajectory {
        dt: s.time.dt,
        ncomp: sim.system.ncomp,
        times: vec![0.0],
        states: vec![sim.state.x.clone()],
        snapshots: vec![0],
        ledger: Vec::with_capacity(n),
        newton_iterations: Vec::with_capacity(n),
    };
    for k in 1..=n {
        let (row, stats) = sim.step()?;
        traj.ledger.push(row);
        traj.newton_iterations.push(stats.iterations);
        traj.times.push(sim.state.t);
        traj.states.push(sim.state.x.clone());
        if k == n || (every > 0 && k % every == 0) {
            traj.snapshots.push(k);
        }
    }
    Ok((sim.system, traj))
}
