//! Weakly singular memory kernel `K(t) = t^{-2α} q(t) + r(t)` with
//! exponential `q`, `r`, and the convolution operator
//! `d_m v(t) = ∫₀ᵗ K(t-s) (v(t) - v(s)) ds`.
//!
//! Quadrature: on each slab the difference `v(t) - v(s)` is frozen at the
//! slab midpoint (average of the two endpoint states); the power factor is
//! integrated exactly and the smooth factors are sampled at the midpoint.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryKernel {
    pub alpha: f64,
    pub q0: f64,
    pub lambda: f64,
    pub r0: f64,
    pub mu: f64,
    /// Length of an interval `[0, t0]` on which `q > 0` is required.
    #[serde(default = "default_t0")]
    pub t0: f64,
}

fn default_t0() -> f64 {
    1.0
}

impl MemoryKernel {
    pub fn new(alpha: f64, q0: f64, lambda: f64, r0: f64, mu: f64) -> Result<Self> {
        let k = MemoryKernel { alpha, q0, lambda, r0, mu, t0: 1.0 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::invalid("0 < alpha < 1/2", format!("memory exponent alpha = {} outside (0, 1/2)", self.alpha)));
        }
        if !ok(self.q0) || !ok(self.r0) {
            return Err(Error::invalid("q, r >= 0", "memory amplitudes q0, r0 must be nonnegative"));
        }
        if !ok(self.lambda) || !ok(self.mu) {
            return Err(Error::invalid("q, r nonincreasing", "memory decay rates lambda, mu must be nonnegative"));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::invalid("t0 > 0", "positivity interval t0 must be positive"));
        }
        Ok(())
    }

    /// Whether `q > 0` on `[0, t0]`, i.e. the kernel really is singular.
    pub fn is_singular(&self) -> bool {
        self.q0 > 0.0
    }

    #[inline]
    pub fn q(&self, t: f64) -> f64 {
        self.q0 * (-self.lambda * t).exp()
    }

    #[inline]
    pub fn r(&self, t: f64) -> f64 {
        self.r0 * (-self.mu * t).exp()
    }

    /// `K(t)`; zero for `t <= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        t.powf(-2.0 * self.alpha) * self.q(t) + self.r(t)
    }

    /// `∫₀^∞ K`, infinite when a nonzero term does not decay.
    pub fn total_mass(&self) -> f64 {
        let mut m = 0.0;
        if self.q0 > 0.0 {
            if self.lambda <= 0.0 {
                return f64::INFINITY;
            }
            m += self.q0 * gamma(1.0 - 2.0 * self.alpha) * self.lambda.powf(2.0 * self.alpha - 1.0);
        }
        if self.r0 > 0.0 {
            if self.mu <= 0.0 {
                return f64::INFINITY;
            }
            m += self.r0 / self.mu;
        }
        m
    }

    /// Passes iff `∫K < e0 / (2 e1)`.
    pub fn smallness_check(&self, e0: f64, e1: f64) -> Result<()> {
        let m = self.total_mass();
        let bound = if e1 > 0.0 { e0 / (2.0 * e1) } else { f64::INFINITY };
        if m < bound {
            Ok(())
        } else {
            Err(Error::invalid(
                "memory smallness: total_mass < e0/(2 e1)",
                format!("kernel mass {m} is not below e0/(2 e1) = {bound}; the memory term would overpower the elastic one"),
            ))
        }
    }

    /// Weight of the slab lying `m` steps back (`m >= 1`): the slab
    /// `[T - m·dt, T - (m-1)·dt]` seen from evaluation time `T`.
    pub fn lag_weight(&self, m: usize, dt: f64) -> f64 {
        debug_assert!(m >= 1);
        let e = 1.0 - 2.0 * self.alpha;
        let mid = (m as f64 - 0.5) * dt;
        let power = dt.powf(e) * ((m as f64).powf(e) - ((m - 1) as f64).powf(e)) / e;
        self.q(mid) * power + self.r(mid) * dt
    }
}

/// Stored history `v(t_0), …, v(t_{n-1})` on the uniform grid `t_j = j·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryBuffer {
    dt: f64,
    len: usize,
    states: Vec<Vec<f64>>,
}

impl HistoryBuffer {
    pub fn new(dt: f64, state_len: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt > 0", "history step must be positive"));
        }
        Ok(HistoryBuffer { dt, len: state_len, states: Vec::new() })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_len(&self) -> usize {
        self.len
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn push(&mut self, v: Vec<f64>) -> Result<()> {
        if v.len() != self.len {
            return Err(Error::GridMismatch(format!("history state of length {} pushed into buffer of length {}", v.len(), self.len)));
        }
        self.states.push(v);
        Ok(())
    }
}

/// `d_m v` at `t_n = len·dt`, where `current = v(t_n)` closes the last slab.
pub fn dm_apply(buf: &HistoryBuffer, current: &[f64], k: &MemoryKernel) -> Result<Vec<f64>> {
    if current.len() != buf.len {
        return Err(Error::GridMismatch(format!("state of length {} against history of length {}", current.len(), buf.len)));
    }
    let n = buf.states.len();
    let mut out = vec![0.0; current.len()];
    for j in 0..n {
        let w = k.lag_weight(n - j, buf.dt);
        let next = if j + 1 < n { &buf.states[j + 1] } else { current };
        let prev = &buf.states[j];
        for (o, ((c, a), b)) in out.iter_mut().zip(current.iter().zip(prev).zip(next)) {
            *o += w * (c - 0.5 * (a + b));
        }
    }
    Ok(out)
}

/// Split of `d_m v` at the next time level `t_{n+1}`, with `buf` holding
/// `v(t_0..=t_n)`: `d_m v(t_{n+1}) = c·v(t_{n+1}) - b`.
#[derive(Clone, Debug, PartialEq)]
pub struct DmSplit {
    pub c: f64,
    pub b: Vec<f64>,
}

pub fn dm_split(buf: &HistoryBuffer, k: &MemoryKernel) -> DmSplit {
    let n1 = buf.states.len();
    let mut b = vec![0.0; buf.len];
    if n1 == 0 {
        return DmSplit { c: 0.0, b };
    }
    // slabs j = 0..n1-1, the last one ending at the unknown state
    let mut total = 0.0;
    for j in 0..n1 {
        let w = k.lag_weight(n1 - j, buf.dt);
        total += w;
        if j + 1 < n1 {
            for (o, (x, y)) in b.iter_mut().zip(buf.states[j].iter().zip(&buf.states[j + 1])) {
                *o += w * 0.5 * (x + y);
            }
        } else {
            for (o, x) in b.iter_mut().zip(&buf.states[j]) {
                *o += w * 0.5 * x;
            }
        }
    }
    let w_last = k.lag_weight(1, buf.dt);
    DmSplit { c: total - 0.5 * w_last, b }
}

/// Discrete `H^α(0, T; X)` norm of a uniformly sampled trajectory.
///
/// Both time integrals use trapezoid weights; diagonal cells of the double
/// integral are dropped. `norm_sq` is the squared spatial norm.
pub fn frac_norm(states: &[Vec<f64>], dt: f64, alpha: f64, norm_sq: impl Fn(&[f64]) -> f64) -> Result<f64> {
    if states.len() < 2 {
        return Err(Error::invalid("at least 2 samples", "fractional norm needs at least two time samples"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt > 0", "sampling step must be positive"));
    }
    let n = states.len();
    let w: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * dt } else { dt }).collect();
    let l2: f64 = states.iter().zip(&w).map(|(s, wi)| wi * norm_sq(s)).sum();
    let mut diff = vec![0.0; states[0].len()];
    let mut dbl = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for (d, (a, b)) in diff.iter_mut().zip(states[i].iter().zip(&states[j])) {
                *d = a - b;
            }
            let lag = (j - i) as f64 * dt;
            // (i, j) and (j, i) contribute equally
            dbl += 2.0 * w[i] * w[j] * norm_sq(&diff) / lag.powf(1.0 + 2.0 * alpha);
        }
    }
    Ok((l2 + dbl).sqrt())
}
