//! Damped Newton iteration with a reusable Jacobian factorization.

use nalgebra::DMatrix;

use super::system::{StepContext, System};
use crate::linalg::{assemble_by_colouring, BandedLu, DenseLu};

enum Factor {
    Banded(BandedLu),
    Dense(DenseLu),
}

impl Factor {
    fn solve_in_place(&self, b: &mut [f64]) {
        match self {
            Factor::Banded(lu) => lu.solve_in_place(b),
            Factor::Dense(lu) => lu.solve_in_place(b),
        }
    }
}

/// Per-step solver statistics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    pub factorizations: usize,
    /// Max-norm residual after each iterate, starting with the predictor.
    pub residuals: Vec<f64>,
}

/// Newton solver for one implicit step. The Jacobian factorization is kept
/// between steps and refreshed only when convergence slows down.
pub struct NewtonSolver {
    tol: f64,
    max_iter: usize,
    factor: Option<Factor>,
}

const MAX_HALVINGS: usize = 12;
const REFRESH_RATIO: f64 = 0.25;
const ROUND_OFF: f64 = 1e-13;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl NewtonSolver {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        NewtonSolver { tol, max_iter, factor: None }
    }

    /// Drops the cached factorization.
    pub fn reset(&mut self) {
        self.factor = None;
    }

    fn factorize(sys: &System, ctx: &StepContext, x: &[f64]) -> Result<Factor, String> {
        let banded = assemble_by_colouring(&sys.grid, sys.ncomp, |p| sys.residual_jvp(ctx, x, p));
        match sys.dense_coupling(ctx, x) {
            None => banded.factor().map(Factor::Banded).map_err(|e| e.to_string()),
            Some(cols) => {
                let mut m: DMatrix<f64> = banded.to_dense();
                let nc = sys.ncomp;
                for (node, col) in cols {
                    let c = node * nc;
                    for (row_node, v) in col.iter().enumerate() {
                        let r = row_node * nc;
                        if *v != 0.0 && !sys.is_constrained(r) {
                            m[(r, c)] += v;
                        }
                    }
                }
                DenseLu::new(m).map(Factor::Dense).map_err(|e| e.to_string())
            }
        }
    }

    /// Solves the step equations; on failure returns a message and the residual history.
    pub fn solve(&mut self, sys: &System, ctx: &StepContext) -> Result<(Vec<f64>, StepStats), (String, Vec<f64>)> {
        let mut stats = StepStats::default();
        let mut x: Vec<f64> = (0..ctx.x0.len())
            .map(|d| if sys.is_constrained(d) { ctx.x0[d] } else { ctx.x0[d] + ctx.dt * ctx.v0[d] })
            .collect();
        let mut r = sys.residual(ctx, &x);
        let mut rn = max_abs(&r);
        stats.residuals.push(rn);
        let mut fresh = false;

        loop {
            if rn <= self.tol {
                return Ok((x, stats));
            }
            if !rn.is_finite() {
                return Err(("non-finite residual".into(), stats.residuals));
            }
            if stats.iterations >= self.max_iter {
                return Err((
                    format!("Newton did not converge in {} iterations; try a smaller dt or a larger k", self.max_iter),
                    stats.residuals,
                ));
            }
            if self.factor.is_none() {
                self.factor = Some(Self::factorize(sys, ctx, &x).map_err(|m| (m, stats.residuals.clone()))?);
                stats.factorizations += 1;
                fresh = true;
            }
            stats.iterations += 1;
            let mut dx: Vec<f64> = r.iter().map(|v| -v).collect();
            self.factor.as_ref().expect("factor present").solve_in_place(&mut dx);

            let xn = max_abs(&x);
            if max_abs(&dx) <= ROUND_OFF * (1.0 + xn) {
                // the correction is at round-off level: the residual cannot drop further
                x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
                stats.residuals.push(max_abs(&sys.residual(ctx, &x)));
                return Ok((x, stats));
            }
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
                let rt = sys.residual(ctx, &xt);
                let rtn = max_abs(&rt);
                if rtn < rn || rtn <= self.tol {
                    accepted = Some((xt, rt, rtn));
                    break;
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((xt, rt, rtn)) => {
                    let ratio = rtn / rn;
                    x = xt;
                    r = rt;
                    rn = rtn;
                    stats.residuals.push(rn);
                    fresh = false;
                    if ratio > REFRESH_RATIO && rn > self.tol {
                        self.factor = None;
                    }
                }
                None if !fresh => self.factor = None,
                None => return Err(("no residual decrease along the Newton direction".into(), stats.residuals)),
            }
        }
    }
}
