//! Contact laws with a bounded interpenetration depth.
//!
//! A [`ContactLaw`] is a nonincreasing barrier `p` that vanishes on
//! `[0, ∞)`, is finite on `(γ, 0)` and blows up as `x ↘ γ`. The
//! regularized law `p_k` replaces `p` left of `γ + δ_k` by the smaller of
//! `p` and its left tangent line there, which makes it globally Lipschitz.
//! Potentials are `P_k(s) = ∫_s^∞ p_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Barrier family selector, as written in scenario files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawFamily {
    /// `p(x) = κ(-x)/(x-γ)` on `(γ, 0)`.
    RationalBarrier,
    /// `p(x) = -κ ln((x-γ)/(-γ))` on `(γ, 0]`.
    LogBarrier,
    /// Piecewise-linear samples on `[x_1, 0]` with a hyperbolic tail on `(γ, x_1)`.
    Tabulated,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Rational,
    Log,
    Tabulated(Table),
}

/// Samples `(x_i, p_i)` with `γ < x_1 < ... < x_m = 0`, `p_m = 0`.
#[derive(Clone, Debug, PartialEq)]
struct Table {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

/// The barrier graph `p` with interpenetration bound `gamma < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactLaw {
    gamma: f64,
    kappa: f64,
    shape: Shape,
}

impl ContactLaw {
    pub fn rational(gamma: f64, kappa: f64) -> Result<Self> {
        Self::closed_form(gamma, kappa, Shape::Rational)
    }

    pub fn log_barrier(gamma: f64, kappa: f64) -> Result<Self> {
        Self::closed_form(gamma, kappa, Shape::Log)
    }

    fn closed_form(gamma: f64, kappa: f64, shape: Shape) -> Result<Self> {
        check_gamma(gamma)?;
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("kappa > 0", format!("kappa must be positive, got {kappa}")));
        }
        Ok(ContactLaw { gamma, kappa, shape })
    }

    /// Builds a tabulated law from `(x, p)` samples inside `(gamma, 0]`.
    ///
    /// A `(0, 0)` sample is appended when missing. Values must be finite,
    /// nonnegative and nonincreasing in `x`.
    pub fn tabulated(gamma: f64, samples: &[(f64, f64)]) -> Result<Self> {
        check_gamma(gamma)?;
        let mut pts: Vec<(f64, f64)> = samples.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.last().map_or(true, |p| p.0 < 0.0) {
            pts.push((0.0, 0.0));
        }
        for w in pts.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid("table abscissae increasing", "duplicate sample abscissa"));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::invalid("p nonincreasing", "tabulated values must be nonincreasing in x"));
            }
        }
        let (x0, _) = pts[0];
        if x0 <= gamma || pts.last().unwrap().0 != 0.0 {
            return Err(Error::invalid(
                "table inside (gamma, 0]",
                "tabulated abscissae must lie in (gamma, 0]",
            ));
        }
        if pts.last().unwrap().1 != 0.0 {
            return Err(Error::invalid("p(0) = 0", "tabulated value at x = 0 must be 0"));
        }
        if pts.iter().any(|p| !(p.1.is_finite() && p.1 >= 0.0)) {
            return Err(Error::invalid("p >= 0", "tabulated values must be finite and nonnegative"));
        }
        if pts.len() < 2 || pts[0].1 <= 0.0 {
            return Err(Error::invalid(
                "p -> +inf at gamma",
                "the first tabulated value must be positive so the tail blows up at gamma",
            ));
        }
        let (xs, ps) = pts.into_iter().unzip();
        Ok(ContactLaw {
            gamma,
            kappa: 1.0,
            shape: Shape::Tabulated(Table { xs, ps }),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn family(&self) -> LawFamily {
        match self.shape {
            Shape::Rational => LawFamily::RationalBarrier,
            Shape::Log => LawFamily::LogBarrier,
            Shape::Tabulated(_) => LawFamily::Tabulated,
        }
    }

    /// Tabulated samples, if any.
    pub fn table(&self) -> Option<Vec<(f64, f64)>> {
        match &self.shape {
            Shape::Tabulated(t) => Some(t.xs.iter().copied().zip(t.ps.iter().copied()).collect()),
            _ => None,
        }
    }

    /// Normalized distance from the bound, `(x - γ)/|γ|`.
    #[inline]
    fn unit(&self, x: f64) -> f64 {
        (x - self.gamma) / -self.gamma
    }

    /// `p(x)`; `+∞` in the forbidden region `x <= γ`.
    pub fn eval_p(&self, x: f64) -> f64 {
        if x >= 0.0 {
            return 0.0;
        }
        if x <= self.gamma {
            return f64::INFINITY;
        }
        match &self.shape {
            Shape::Rational => self.kappa * (-x) / (x - self.gamma),
            Shape::Log => -self.kappa * self.unit(x).ln(),
            Shape::Tabulated(t) => t.eval(self.gamma, x),
        }
    }

    /// Derivative of `p` on `(γ, 0)`; zero on `[0, ∞)`.
    pub fn eval_dp(&self, x: f64) -> f64 {
        if x >= 0.0 {
            return 0.0;
        }
        if x <= self.gamma {
            return f64::NEG_INFINITY;
        }
        match &self.shape {
            Shape::Rational => self.kappa * self.gamma / ((x - self.gamma) * (x - self.gamma)),
            Shape::Log => -self.kappa / (x - self.gamma),
            Shape::Tabulated(t) => t.slope(self.gamma, x),
        }
    }

    /// Left derivative at `x`.
    ///
    /// Tables use the slope of the segment ending at `x`, which is where a
    /// one-sided difference quotient converges. Evaluating the quotient with
    /// a tiny step loses about nine digits to cancellation, enough to tilt
    /// the cap off the segment it should extend.
    pub fn left_derivative(&self, x: f64) -> f64 {
        self.eval_dp(x)
    }

    /// `P(s) = ∫_s^0 p(z) dz` for `s > γ` (zero for `s >= 0`).
    pub fn potential(&self, s: f64) -> f64 {
        if s >= 0.0 {
            return 0.0;
        }
        if s <= self.gamma {
            return f64::INFINITY;
        }
        let g = -self.gamma;
        let y = self.unit(s);
        match &self.shape {
            // κ|γ| ∫_y^1 (1-w)/w dw
            Shape::Rational => self.kappa * g * (y - 1.0 - y.ln()),
            // -κ|γ| ∫_y^1 ln w dw
            Shape::Log => self.kappa * g * (1.0 - y + y * y.ln()),
            Shape::Tabulated(t) => t.integral(self.gamma, s, 0.0),
        }
    }

    /// Mean of `p` over the segment between `a` and `b` inside `(γ, 0]`.
    fn barrier_mean(&self, a: f64, b: f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == b {
            return self.eval_p(a);
        }
        let ya = self.unit(a);
        let yb = self.unit(b);
        let d = (b - a) / -self.gamma;
        match &self.shape {
            Shape::Rational => self.kappa * ((d / ya).ln_1p() / d - 1.0),
            Shape::Log => self.kappa * (1.0 - ya.ln() - yb / d * (d / ya).ln_1p()),
            Shape::Tabulated(t) => t.integral(self.gamma, a, b) / (b - a),
        }
    }

    /// Mean of `p` over `[a, b]` for `a, b > γ`.
    pub fn mean_p(&self, a: f64, b: f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == b {
            return self.eval_p(a);
        }
        if a >= 0.0 {
            return 0.0;
        }
        if b <= 0.0 {
            return self.barrier_mean(a, b);
        }
        self.barrier_mean(a, 0.0) * (-a) / (b - a)
    }

    fn is_convex_family(&self) -> bool {
        !matches!(self.shape, Shape::Tabulated(_))
    }

    /// Builds `p_k` with the default offset `δ_0 = |γ|/2`.
    pub fn regularize(&self, k: u32) -> Result<RegularizedLaw> {
        RegularizedLaw::new(self.clone(), k, None)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma < 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma < 0", format!("gamma must be negative, got {gamma}")));
    }
    Ok(())
}

impl Table {
    fn tail_constant(&self, gamma: f64) -> f64 {
        self.ps[0] * (self.xs[0] - gamma)
    }

    fn segment(&self, x: f64) -> usize {
        // index i with xs[i] <= x < xs[i+1] (clamped to the last segment)
        let i = self.xs.partition_point(|&v| v <= x);
        i.saturating_sub(1).min(self.xs.len() - 2)
    }

    fn eval(&self, gamma: f64, x: f64) -> f64 {
        if x < self.xs[0] {
            return self.tail_constant(gamma) / (x - gamma);
        }
        let i = self.segment(x);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ps[i] + t * (self.ps[i + 1] - self.ps[i])
    }

    fn slope(&self, gamma: f64, x: f64) -> f64 {
        if x < self.xs[0] {
            let r = x - gamma;
            return -self.tail_constant(gamma) / (r * r);
        }
        // left-continuous: at a sample point use the segment to its left
        let mut i = self.segment(x);
        if i > 0 && x == self.xs[i] {
            i -= 1;
        } else if i == 0 && x == self.xs[0] {
            let r = x - gamma;
            return -self.tail_constant(gamma) / (r * r);
        }
        (self.ps[i + 1] - self.ps[i]) / (self.xs[i + 1] - self.xs[i])
    }

    /// Exact `∫_a^b p` for `γ < a <= b <= 0`.
    fn integral(&self, gamma: f64, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        let x0 = self.xs[0];
        if a < x0 {
            let hi = b.min(x0);
            total += self.tail_constant(gamma) * ((hi - a) / (a - gamma)).ln_1p();
        }
        for i in 0..self.xs.len() - 1 {
            let lo = a.max(self.xs[i]);
            let hi = b.min(self.xs[i + 1]);
            if hi > lo {
                total += (hi - lo) * 0.5 * (self.eval(gamma, lo) + self.eval(gamma, hi));
            }
        }
        total
    }
}

/// The `k`-th Lipschitz cap `p_k` of a [`ContactLaw`].
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedLaw {
    base: ContactLaw,
    k: u32,
    delta_k: f64,
    cap_point: f64,
    cap_value: f64,
    cap_slope: f64,
    cap_potential: f64,
}

impl RegularizedLaw {
    /// `δ_k = δ_0 · 2^{-k}`; `delta0` defaults to `|γ|/2`.
    pub fn new(base: ContactLaw, k: u32, delta0: Option<f64>) -> Result<Self> {
        let gamma = base.gamma;
        let delta0 = delta0.unwrap_or(-gamma / 2.0);
        if !(delta0 > 0.0) {
            return Err(Error::invalid("delta0 > 0", format!("delta0 must be positive, got {delta0}")));
        }
        let delta_k = delta0 * 0.5f64.powi(k as i32);
        let cap_point = gamma + delta_k;
        if cap_point >= 0.0 {
            return Err(Error::invalid(
                "gamma + delta_k < 0",
                format!("cap point gamma + delta_k = {cap_point} must be negative"),
            ));
        }
        let cap_value = base.eval_p(cap_point);
        let cap_slope = base.left_derivative(cap_point);
        let cap_potential = base.potential(cap_point);
        Ok(RegularizedLaw {
            base,
            k,
            delta_k,
            cap_point,
            cap_value,
            cap_slope,
            cap_potential,
        })
    }

    pub fn base(&self) -> &ContactLaw {
        &self.base
    }
    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }
    pub fn cap_point(&self) -> f64 {
        self.cap_point
    }
    pub fn cap_value(&self) -> f64 {
        self.cap_value
    }
    pub fn cap_slope(&self) -> f64 {
        self.cap_slope
    }
    pub fn gamma(&self) -> f64 {
        self.base.gamma
    }

    #[inline]
    fn tangent(&self, y: f64) -> f64 {
        self.cap_value + self.cap_slope * (y - self.cap_point)
    }

    /// `p_k(x)`.
    pub fn eval_pk(&self, x: f64) -> f64 {
        if x > self.cap_point {
            self.base.eval_p(x)
        } else {
            self.base.eval_p(x).min(self.tangent(x))
        }
    }

    /// Derivative of the active branch of `p_k`; the cap slope at the junction.
    pub fn eval_dpk(&self, x: f64) -> f64 {
        if x >= 0.0 {
            0.0
        } else if x > self.cap_point {
            self.base.eval_dp(x)
        } else if self.tangent(x) <= self.base.eval_p(x) {
            self.cap_slope
        } else {
            self.base.eval_dp(x)
        }
    }

    /// `∫_a^b p_k` over part of the cap region `b <= cap_point`.
    fn cap_integral(&self, a: f64, b: f64) -> f64 {
        if self.base.is_convex_family() {
            // a convex barrier lies above its tangent, so p_k is the tangent here
            (b - a) * self.tangent(0.5 * (a + b))
        } else {
            let tol = 1e-13 * (1.0 + self.cap_value.abs()) * (b - a).max(f64::MIN_POSITIVE);
            adaptive_simpson(&|y| self.eval_pk(y), a, b, tol, 40)
        }
    }

    /// `P_k(s) = ∫_s^∞ p_k(z) dz`.
    #[allow(non_snake_case)]
    pub fn eval_Pk(&self, s: f64) -> f64 {
        if s >= self.cap_point {
            self.base.potential(s)
        } else {
            self.cap_potential + self.cap_integral(s, self.cap_point)
        }
    }

    /// Mean value of `p_k` on the segment between `a` and `b`.
    ///
    /// This is the discrete-gradient contact force: for `a != b` it equals
    /// `(P_k(a) - P_k(b)) / (b - a)`.
    pub fn mean_pk(&self, a: f64, b: f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == b {
            return self.eval_pk(a);
        }
        let c = self.cap_point;
        if a >= c && b <= 0.0 {
            // a single barrier piece
            return self.base.barrier_mean(a, b);
        }
        let len = b - a;
        let mut acc = 0.0;
        if a < c {
            let hi = b.min(c);
            if hi - a < 1e-12 * self.delta_k && !self.base.is_convex_family() {
                acc += (hi - a) * self.eval_pk(0.5 * (a + hi));
            } else {
                acc += self.cap_integral(a, hi);
            }
        }
        if b > c && a < 0.0 {
            let lo = a.max(c);
            let hi = b.min(0.0);
            if hi > lo {
                acc += (hi - lo) * self.base.barrier_mean(lo, hi);
            }
        }
        acc / len
    }

    /// Derivative of [`mean_pk`](Self::mean_pk) with respect to its second argument.
    pub fn mean_pk_dright(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        if d.abs() <= 1e-8 * self.delta_k {
            0.5 * self.eval_dpk(0.5 * (a + b))
        } else {
            (self.eval_pk(b) - self.mean_pk(a, b)) / d
        }
    }
}

/// Boundary traction law `q̃(x) = -p(-x)`, the mirror of a barrier law.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryLaw {
    inner: RegularizedLaw,
}

impl BoundaryLaw {
    pub fn new(inner: RegularizedLaw) -> Self {
        BoundaryLaw { inner }
    }

    pub fn inner(&self) -> &RegularizedLaw {
        &self.inner
    }

    /// Unregularized `q̃(x) = -p(-x)`.
    pub fn eval_q(&self, x: f64) -> f64 {
        -self.inner.base().eval_p(-x)
    }

    /// `q̃_k(x) = -p_k(-x)`.
    pub fn eval_qk(&self, x: f64) -> f64 {
        -self.inner.eval_pk(-x)
    }

    /// Boundary potential `Q̃_k(r) = P_k(-r) >= 0`.
    pub fn potential(&self, r: f64) -> f64 {
        self.inner.eval_Pk(-r)
    }

    /// Mean of `q̃_k` over the segment between `a` and `b`.
    pub fn mean_qk(&self, a: f64, b: f64) -> f64 {
        -self.inner.mean_pk(-a, -b)
    }

    /// Derivative of [`mean_qk`](Self::mean_qk) in its second argument.
    pub fn mean_qk_dright(&self, a: f64, b: f64) -> f64 {
        self.inner.mean_pk_dright(-a, -b)
    }
}
