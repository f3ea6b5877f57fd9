//! Young functions as evaluable objects.
//!
//! Every [`YoungSpec`] evaluates a convex, nondecreasing `Φ: [0, ∞) → [0, ∞)`
//! with `Φ(0) = 0`. Besides the closed-form families (powers, `L log L`
//! bumps, exponentials) there are constructors for the truncation `Φ₀`,
//! the composition `Θ(t) = ∫₁ᵗ Ψ₀'(u) Φ(t/u) du`, compositions with a power
//! of the argument, and tabulated piecewise-linear functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear Young function through `(0, 0)` and the given
/// breakpoints, extended linearly past the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    ts: Vec<f64>,
    ys: Vec<f64>,
}

impl Table {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        let mut ts = vec![0.0];
        let mut ys = vec![0.0];
        for &(t, y) in points {
            if !(t.is_finite() && y.is_finite()) {
                return Err(Error::contract("tabulated breakpoints must be finite"));
            }
            if t <= *ts.last().unwrap() || y < *ys.last().unwrap() {
                return Err(Error::contract(
                    "tabulated breakpoints must be strictly increasing in t and nondecreasing in y",
                ));
            }
            ts.push(t);
            ys.push(y);
        }
        if ts.len() < 2 {
            return Err(Error::contract("tabulated Young function needs a breakpoint"));
        }
        let slopes: Vec<f64> = (1..ts.len()).map(|i| (ys[i] - ys[i - 1]) / (ts[i] - ts[i - 1])).collect();
        if slopes.windows(2).any(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(1.0)) {
            return Err(Error::contract("tabulated Young function must have nondecreasing slopes"));
        }
        if *slopes.last().unwrap() <= 0.0 {
            return Err(Error::contract("tabulated Young function must eventually increase"));
        }
        Ok(Table { ts, ys })
    }

    fn segment(&self, t: f64) -> usize {
        // index i with ts[i] <= t < ts[i+1], clamped to the last segment
        match self.ts.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.ts.len() - 2),
            Err(i) => (i.max(1) - 1).min(self.ts.len() - 2),
        }
    }

    fn slope(&self, i: usize) -> f64 {
        (self.ys[i + 1] - self.ys[i]) / (self.ts[i + 1] - self.ts[i])
    }

    fn eval(&self, t: f64) -> f64 {
        let i = self.segment(t);
        self.ys[i] + self.slope(i) * (t - self.ts[i])
    }

    fn derivative(&self, t: f64) -> f64 {
        self.slope(self.segment(t))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ts.iter().copied().zip(self.ys.iter().copied()).skip(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum YoungSpec {
    Identity,
    Power(f64),
    /// `t^r (1 + log⁺ t)^eps`.
    LogBump { r: f64, eps: f64 },
    /// `e^{t^{1/δ}} - 1` for `t ≥ knee`, continued below the knee by the
    /// tangent line through the origin so the function stays convex.
    ExpMinusOne { delta: f64, knee: f64, slope: f64 },
    /// `Φ₀`: zero on `[0, 1)`, `Φ(t) - Φ(1)` afterwards.
    TruncatedZero(Box<YoungSpec>),
    /// `Θ(t) = ∫₁ᵗ Ψ₀'(u) Φ(t/u) du`.
    ThetaCompose { phi: Box<YoungSpec>, psi: Box<YoungSpec> },
    Tabulated(Table),
    /// `Φ(t^exponent)`.
    PowerArg { inner: Box<YoungSpec>, exponent: f64 },
    /// `factor · Φ(t)`.
    Scaled { factor: f64, inner: Box<YoungSpec> },
}

impl YoungSpec {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::contract(format!("power exponent must be >= 1, got {p}")));
        }
        Ok(if p == 1.0 { YoungSpec::Identity } else { YoungSpec::Power(p) })
    }

    pub fn log_bump(r: f64, eps: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 1.0 && eps.is_finite() && eps >= 0.0) {
            return Err(Error::contract(format!("logbump needs r >= 1, eps >= 0, got ({r}, {eps})")));
        }
        Ok(YoungSpec::LogBump { r, eps })
    }

    /// `Φ_ε(t) = t (1 + log⁺ t)^ε`.
    pub fn phi_eps(eps: f64) -> Result<Self> {
        Self::log_bump(1.0, eps)
    }

    pub fn exp_minus_one(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 1.0) {
            return Err(Error::contract(format!("expm1 needs delta >= 1, got {delta}")));
        }
        let (knee, slope) = exp_knee(delta);
        Ok(YoungSpec::ExpMinusOne { delta, knee, slope })
    }

    pub fn truncated_zero(inner: YoungSpec) -> Self {
        YoungSpec::TruncatedZero(Box::new(inner))
    }

    pub fn theta(phi: YoungSpec, psi: YoungSpec) -> Self {
        YoungSpec::ThetaCompose { phi: Box::new(phi), psi: Box::new(psi) }
    }

    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        Ok(YoungSpec::Tabulated(Table::new(points)?))
    }

    pub fn power_arg(inner: YoungSpec, exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::contract(format!("argument exponent must be > 0, got {exponent}")));
        }
        Ok(if exponent == 1.0 {
            inner
        } else {
            YoungSpec::PowerArg { inner: Box::new(inner), exponent }
        })
    }

    pub fn scaled(factor: f64, inner: YoungSpec) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::contract(format!("scale factor must be > 0, got {factor}")));
        }
        Ok(YoungSpec::Scaled { factor, inner: Box::new(inner) })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::contract(format!("Young functions are defined on [0, ∞), got t = {t}")));
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation for `t ≥ 0`; hot loops call this directly.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            YoungSpec::Identity => t,
            YoungSpec::Power(p) => t.powf(*p),
            YoungSpec::LogBump { r, eps } => {
                let base = if *r == 1.0 { t } else { t.powf(*r) };
                if t <= 1.0 || *eps == 0.0 {
                    base
                } else {
                    base * (1.0 + t.ln()).powf(*eps)
                }
            }
            YoungSpec::ExpMinusOne { delta, knee, slope } => {
                if t < *knee {
                    slope * t
                } else {
                    t.powf(1.0 / delta).exp_m1()
                }
            }
            YoungSpec::TruncatedZero(inner) => {
                if t < 1.0 {
                    0.0
                } else {
                    inner.value(t) - inner.value(1.0)
                }
            }
            YoungSpec::ThetaCompose { phi, psi } => theta_value(phi, psi, t),
            YoungSpec::Tabulated(table) => table.eval(t),
            YoungSpec::PowerArg { inner, exponent } => inner.value(t.powf(*exponent)),
            YoungSpec::Scaled { factor, inner } => factor * inner.value(t),
        }
    }

    /// `φ = Φ'` where a closed form exists (right derivative at kinks).
    pub fn derivative_closed_form(&self, t: f64) -> Option<f64> {
        Some(match self {
            YoungSpec::Identity => 1.0,
            YoungSpec::Power(p) => p * t.powf(p - 1.0),
            YoungSpec::LogBump { r, eps } => {
                let tr1 = t.powf(r - 1.0);
                if t < 1.0 || *eps == 0.0 {
                    r * tr1
                } else {
                    let l = 1.0 + t.ln();
                    tr1 * l.powf(eps - 1.0) * (r * l + eps)
                }
            }
            YoungSpec::ExpMinusOne { delta, knee, slope } => {
                if t < *knee {
                    *slope
                } else if t == 0.0 {
                    1.0
                } else {
                    let s = t.powf(1.0 / delta);
                    s.exp() * s / (delta * t)
                }
            }
            YoungSpec::TruncatedZero(inner) => {
                if t < 1.0 {
                    0.0
                } else {
                    inner.derivative_closed_form(t)?
                }
            }
            YoungSpec::ThetaCompose { .. } => return None,
            YoungSpec::Tabulated(table) => table.derivative(t),
            YoungSpec::PowerArg { inner, exponent } => {
                inner.derivative_closed_form(t.powf(*exponent))? * exponent * t.powf(exponent - 1.0)
            }
            YoungSpec::Scaled { factor, inner } => factor * inner.derivative_closed_form(t)?,
        })
    }

    /// `Φ'(t)`, falling back to a central difference.
    pub fn derivative(&self, t: f64) -> f64 {
        self.derivative_closed_form(t).unwrap_or_else(|| {
            let d = 1e-6 * t.max(1.0);
            let lo = (t - d).max(0.0);
            (self.value(t + d) - self.value(lo)) / (t + d - lo)
        })
    }

    /// Smallest `t` with `Φ(t) ≥ y`, by bracketed bisection.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) || !y.is_finite() {
            return Err(Error::Range { what: format!("{self}"), value: y });
        }
        if y == 0.0 {
            if self.value(0.5) == 0.0 {
                return Err(Error::Range { what: format!("invertible part of {self}"), value: y });
            }
            return Ok(0.0);
        }
        let mut hi = 1.0f64;
        let mut steps = 0;
        while self.value(hi) < y {
            hi *= 2.0;
            steps += 1;
            if steps > 1100 || !hi.is_finite() {
                return Err(Error::Range { what: format!("{self}"), value: y });
            }
        }
        let mut lo = 0.0f64;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// The complementary function `Φ̃(t) = sup_{s ≥ 0} (ts - Φ(s))`.
    pub fn complementary(&self, t: f64) -> Result<Complement> {
        if !(t >= 0.0) {
            return Err(Error::contract(format!("complementary needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(Complement::Finite(0.0));
        }
        // grow the search range until the objective is decreasing
        let mut upper = 1.0f64;
        while self.derivative(upper) < t {
            upper *= 2.0;
            if upper > 1e300 {
                return Ok(Complement::Unbounded);
            }
        }
        let objective = |s: f64| t * s - self.value(s);
        let lower = 1e-8f64.min(1e-4 * t).min(upper * 1e-3);
        const POINTS: usize = 4000;
        let ratio = (upper / lower).ln() / (POINTS - 1) as f64;
        let grid: Vec<f64> = (0..POINTS).map(|i| lower * (ratio * i as f64).exp()).collect();
        let (best, best_val) = grid
            .iter()
            .enumerate()
            .map(|(i, &s)| (i, objective(s)))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        // concave objective: ternary search on the neighbouring bracket
        let mut a = if best == 0 { 0.0 } else { grid[best - 1] };
        let mut b = grid[(best + 1).min(POINTS - 1)];
        for _ in 0..200 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if objective(m1) < objective(m2) {
                a = m1;
            } else {
                b = m2;
            }
        }
        let refined = objective(0.5 * (a + b));
        Ok(Complement::Finite(refined.max(best_val).max(0.0)))
    }

    /// Growth order `t^power (log t)^log_power` at infinity, when known in
    /// closed form. `None` means faster than any power or unknown.
    fn growth_order(&self) -> Option<(f64, f64)> {
        match self {
            YoungSpec::Identity => Some((1.0, 0.0)),
            YoungSpec::Power(p) => Some((*p, 0.0)),
            YoungSpec::LogBump { r, eps } => Some((*r, *eps)),
            YoungSpec::ExpMinusOne { .. } => None,
            YoungSpec::TruncatedZero(inner) | YoungSpec::Scaled { inner, .. } => inner.growth_order(),
            YoungSpec::PowerArg { inner, exponent } => {
                inner.growth_order().map(|(p, l)| (p * exponent, l))
            }
            YoungSpec::ThetaCompose { .. } | YoungSpec::Tabulated(_) => None,
        }
    }

    fn is_exponential(&self) -> bool {
        match self {
            YoungSpec::ExpMinusOne { .. } => true,
            YoungSpec::TruncatedZero(inner)
            | YoungSpec::Scaled { inner, .. }
            | YoungSpec::PowerArg { inner, .. } => inner.is_exponential(),
            YoungSpec::ThetaCompose { phi, psi } => phi.is_exponential() || psi.is_exponential(),
            _ => false,
        }
    }
}

/// Result of a convex-conjugate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Complement {
    Finite(f64),
    Unbounded,
}

impl Complement {
    pub fn finite(self) -> Option<f64> {
        match self {
            Complement::Finite(v) => Some(v),
            Complement::Unbounded => None,
        }
    }
}

/// Tangent point from the origin of `e^{t^{1/δ}} - 1`. Writing `s = t^{1/δ}`
/// the tangency condition reads `δ (1 - e^{-s}) = s`.
fn exp_knee(delta: f64) -> (f64, f64) {
    if delta <= 1.0 {
        return (0.0, 1.0);
    }
    let h = |s: f64| delta * (1.0 - (-s).exp()) - s;
    let (mut lo, mut hi) = (1e-12, delta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let knee = s.powf(delta);
    (knee, s.exp_m1() / knee)
}

const THETA_ABS_TOL: f64 = 1e-10;
const THETA_REL_TOL: f64 = 1e-9;

/// `Ψ₀'(u)` for `u ≥ 1` by finite difference; one-sided at the kink.
fn truncated_derivative(psi: &YoungSpec, u: f64) -> f64 {
    let d = 1e-6 * u.max(1.0);
    let psi0 = |x: f64| if x < 1.0 { 0.0 } else { psi.value(x) - psi.value(1.0) };
    if u - d >= 1.0 {
        (psi0(u + d) - psi0(u - d)) / (2.0 * d)
    } else {
        (psi0(u + d) - psi0(u.max(1.0))) / (u + d - u.max(1.0))
    }
}

fn theta_value(phi: &YoungSpec, psi: &YoungSpec, t: f64) -> f64 {
    if t <= 1.0 {
        return 0.0;
    }
    // u = e^s turns ∫₁ᵗ into ∫₀^{ln t}, which is tame for large t
    let integrand = |s: f64| {
        let u = s.exp();
        truncated_derivative(psi, u) * phi.value(t / u) * u
    };
    adaptive_simpson(&integrand, 0.0, t.ln(), THETA_ABS_TOL, THETA_REL_TOL)
}

pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    recurse(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// Geometric sample of `count` points spanning `[lo, hi]`.
pub(crate) fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

/// Outcome of the bounded search for `Ψ(t) ≤ b Φ(at)`, `t ≥ t₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Domination {
    Dominated { a: f64, b: f64, t0: f64 },
    NotDominated { witness: f64 },
}

impl Domination {
    pub fn is_dominated(&self) -> bool {
        matches!(self, Domination::Dominated { .. })
    }
}

/// Largest sampled `t` in domination searches. Polylogarithmic separations
/// such as `t²` versus `t log⁵ t` only show up with the constants allowed
/// here far beyond `10⁸`.
pub const DOMINATION_T_MAX: f64 = 1e100;
const DOMINATION_EXP_RANGE: i32 = 10;

/// Searches for `a, b ∈ {2^i : |i| ≤ 10}` and `t₀ ∈ {1, 2, …, 2^10}` with
/// `psi(t) ≤ b · phi(a t)` on a geometric sample of `[t₀, 10^100]`.
pub fn check_domination(psi: &YoungSpec, phi: &YoungSpec) -> Domination {
    let ts = geometric(1.0, DOMINATION_T_MAX, 401);
    let psi_vals: Vec<f64> = ts.iter().map(|&t| psi.value(t)).collect();
    let pows: Vec<f64> = (-DOMINATION_EXP_RANGE..=DOMINATION_EXP_RANGE).map(|i| 2f64.powi(i)).collect();
    let b_max = 2f64.powi(DOMINATION_EXP_RANGE);

    // ratio psi(t) / phi(a t); infinite when the sample cannot be satisfied
    let ratio = |psi_t: f64, phi_at: f64| -> Option<f64> {
        match (psi_t.is_finite(), phi_at.is_finite()) {
            (false, false) => None,
            (false, true) => Some(f64::INFINITY),
            (true, false) => Some(0.0),
            (true, true) if phi_at > 0.0 => Some(psi_t / phi_at),
            (true, true) if psi_t > 0.0 => Some(f64::INFINITY),
            _ => Some(0.0),
        }
    };

    let phi_table: Vec<Vec<f64>> = pows
        .iter()
        .map(|&a| ts.iter().map(|&t| phi.value(a * t)).collect())
        .collect();

    for e0 in 0..=DOMINATION_EXP_RANGE {
        let t0 = 2f64.powi(e0);
        for (ai, &a) in pows.iter().enumerate() {
            let needed = ts
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= t0)
                .filter_map(|(i, _)| ratio(psi_vals[i], phi_table[ai][i]))
                .fold(0.0f64, f64::max);
            if needed <= b_max * (1.0 + 1e-12) {
                let b = pows
                    .iter()
                    .copied()
                    .find(|&b| needed <= b * (1.0 + 1e-12))
                    .unwrap_or(b_max);
                return Domination::Dominated { a, b, t0 };
            }
        }
    }

    let t0 = 2f64.powi(DOMINATION_EXP_RANGE);
    let witness = ts
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= t0)
        .filter_map(|(i, &t)| ratio(psi_vals[i], phi_table.last().unwrap()[i]).map(|r| (t, r)))
        .fold((t0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc })
        .0;
    Domination::NotDominated { witness }
}

/// `Φ ≈_∞ Ψ`: domination in both directions.
pub fn equivalent_at_infinity(a: &YoungSpec, b: &YoungSpec) -> bool {
    check_domination(a, b).is_dominated() && check_domination(b, a).is_dominated()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpVerdict {
    pub in_bp: bool,
    /// `∫₁^{10¹²} Φ(t) / t^{p+1} dt`.
    pub truncated_integral: f64,
}

pub const BP_UPPER: f64 = 1e12;
const BP_SLOPE_MARGIN: f64 = 1e-2;

/// Classifies `Φ ∈ B_p`, i.e. `∫^∞ Φ(t)/t^p dt/t < ∞`.
pub fn check_bp(spec: &YoungSpec, p: f64) -> Result<BpVerdict> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::contract(format!("B_p needs p > 1, got {p}")));
    }
    // t = e^x
    let x_max = BP_UPPER.ln();
    let n = 4000;
    let dx = x_max / n as f64;
    let g = |x: f64| {
        let v = spec.value(x.exp()) * (-p * x).exp();
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut integral = 0.5 * (g(0.0) + g(x_max));
    for i in 1..n {
        integral += g(i as f64 * dx);
    }
    integral *= dx;

    let in_bp = if spec.is_exponential() {
        false
    } else if let Some((power, _)) = spec.growth_order() {
        // log factors have nonnegative exponent, so power == p diverges
        power < p
    } else {
        tail_slope(spec) < p - BP_SLOPE_MARGIN
    };
    Ok(BpVerdict { in_bp, truncated_integral: integral })
}

/// Least-squares slope of `log Φ` against `log t` on `[10⁸, 10¹²]`.
fn tail_slope(spec: &YoungSpec) -> f64 {
    let ts = geometric(1e8, BP_UPPER, 33);
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| (t.ln(), spec.value(t)))
        .filter(|(_, y)| y.is_finite() && *y > 0.0)
        .map(|(x, y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `C = max{(ε/δ)^ε, 1}` with `t^r (1 + log⁺ t)^ε ≤ C t^{r+δ}` for `t ≥ 1`,
/// confirmed on a sample of `[1, 10⁸]`.
pub fn small_bound_constant(r: f64, eps: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::contract(format!("delta must be > 0, got {delta}")));
    }
    let spec = YoungSpec::log_bump(r, eps)?;
    let c = if eps == 0.0 { 1.0 } else { (eps / delta).powf(eps).max(1.0) };
    for t in geometric(1.0, 1e8, 2001) {
        let lhs = spec.value(t);
        let rhs = c * t.powf(r + delta);
        if lhs > rhs * (1.0 + 1e-12) {
            return Err(Error::Internal(format!(
                "L log L power bound fails at t = {t}: {lhs} > {rhs}"
            )));
        }
    }
    Ok(c)
}

/// Measured `sup Φ(st) / (Φ(s) Φ(t))` over a geometric sample of
/// `[lo, hi]²`.
pub fn submultiplicative_constant(spec: &YoungSpec, lo: f64, hi: f64) -> f64 {
    let ts = geometric(lo, hi, 121);
    let vals: Vec<f64> = ts.iter().map(|&t| spec.value(t)).collect();
    let mut worst = 0.0f64;
    for (i, &s) in ts.iter().enumerate() {
        for (j, &t) in ts.iter().enumerate() {
            let denom = vals[i] * vals[j];
            if denom > 0.0 && denom.is_finite() {
                let num = spec.value(s * t);
                if num.is_finite() {
                    worst = worst.max(num / denom);
                }
            }
        }
    }
    worst
}

/// Sampled shape checks for a Young function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub zero_at_origin: bool,
    pub nonnegative: bool,
    pub nondecreasing: bool,
    pub convex: bool,
    /// `Φ(10⁶)/10⁶ > Φ(1)`.
    pub superlinear: bool,
}

impl ShapeReport {
    pub fn is_young(&self) -> bool {
        self.zero_at_origin && self.nonnegative && self.nondecreasing && self.convex
    }
}

pub fn check_shape(spec: &YoungSpec) -> ShapeReport {
    let mut ts = vec![0.0];
    ts.extend(geometric(1e-6, 1e6, 601));
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| (t, spec.value(t)))
        .take_while(|(_, y)| y.is_finite())
        .collect();
    let tol = |x: f64| 1e-9 * x.abs().max(1.0);
    let nonnegative = pts.iter().all(|&(_, y)| y >= 0.0);
    let nondecreasing = pts.windows(2).all(|w| w[1].1 >= w[0].1 - tol(w[0].1));
    let slopes: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let convex = slopes.windows(2).all(|s| s[1] >= s[0] - 1e-7 * s[0].abs().max(1.0));
    let big = spec.value(1e6);
    ShapeReport {
        zero_at_origin: spec.value(0.0) == 0.0,
        nonnegative,
        nondecreasing,
        convex,
        superlinear: big / 1e6 > spec.value(1.0) || big.is_infinite(),
    }
}

/// `Φ` is p-Young when `t ↦ Φ(t^{1/p})` is again a Young function.
pub fn is_p_young(spec: &YoungSpec, p: f64) -> Result<bool> {
    if !(p >= 1.0) {
        return Err(Error::contract(format!("p-Young needs p >= 1, got {p}")));
    }
    let composed = YoungSpec::power_arg(spec.clone(), 1.0 / p)?;
    Ok(check_shape(&composed).is_young())
}

impl fmt::Display for YoungSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YoungSpec::Identity => write!(f, "identity"),
            YoungSpec::Power(p) => write!(f, "power:{p}"),
            YoungSpec::LogBump { r, eps } => write!(f, "logbump:{r},{eps}"),
            YoungSpec::ExpMinusOne { delta, .. } => write!(f, "expm1:{delta}"),
            YoungSpec::TruncatedZero(inner) => write!(f, "trunc0({inner})"),
            YoungSpec::ThetaCompose { phi, psi } => write!(f, "theta({phi},{psi})"),
            YoungSpec::Tabulated(table) => {
                write!(f, "table:")?;
                for (i, (t, y)) in table.points().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{t}/{y}")?;
                }
                Ok(())
            }
            YoungSpec::PowerArg { inner, exponent } => write!(f, "powarg({inner},{exponent})"),
            YoungSpec::Scaled { factor, inner } => write!(f, "scaled({factor},{inner})"),
        }
    }
}

/// Splits `a,b` at top-level commas (outside parentheses).
pub(crate) fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

/// Re-attaches numeric fragments that a top-level comma split tore off a
/// multi-parameter spec such as `logbump:1,1`.
fn group_spec_args(parts: Vec<&str>) -> Vec<String> {
    let arity = |s: &str| -> Option<usize> {
        let (head, params) = s.split_once(':')?;
        if s.contains('(') {
            return None;
        }
        let want = match head {
            "logbump" => 2usize,
            _ => 1,
        };
        Some(want.saturating_sub(params.split(',').count()))
    };
    let mut out: Vec<String> = Vec::new();
    for part in parts {
        let numeric = part.parse::<f64>().is_ok();
        match out.last_mut() {
            Some(prev) if numeric && arity(prev).is_some_and(|missing| missing > 0) => {
                prev.push(',');
                prev.push_str(part);
            }
            _ => out.push(part.to_string()),
        }
    }
    out
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(format!("expected a number, got {s:?}")))
}

fn parse_nums(s: &str, count: usize, what: &str) -> Result<Vec<f64>> {
    let nums: Vec<f64> = s.split(',').map(parse_num).collect::<Result<_>>()?;
    if nums.len() != count {
        return Err(Error::parse(format!("{what} expects {count} parameter(s), got {s:?}")));
    }
    Ok(nums)
}

impl FromStr for YoungSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "identity" {
            return Ok(YoungSpec::Identity);
        }
        if let Some((head, rest)) = s.split_once('(') {
            let body = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::parse(format!("unbalanced parentheses in {s:?}")))?;
            let args = group_spec_args(split_top_level(body));
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            return match (head.trim(), args.as_slice()) {
                ("trunc0", [inner]) => Ok(YoungSpec::truncated_zero(inner.parse()?)),
                ("theta", [phi, psi]) => Ok(YoungSpec::theta(phi.parse()?, psi.parse()?)),
                ("powarg", [inner, e]) => YoungSpec::power_arg(inner.parse()?, parse_num(e)?),
                ("scaled", [c, inner]) => YoungSpec::scaled(parse_num(c)?, inner.parse()?),
                _ => Err(Error::parse(format!("unknown Young constructor {s:?}"))),
            };
        }
        let (head, params) = s
            .split_once(':')
            .ok_or_else(|| Error::parse(format!("unknown Young function {s:?}")))?;
        match head {
            "power" => YoungSpec::power(parse_nums(params, 1, "power")?[0]),
            "logbump" => {
                let v = parse_nums(params, 2, "logbump")?;
                YoungSpec::log_bump(v[0], v[1])
            }
            "expm1" => YoungSpec::exp_minus_one(parse_nums(params, 1, "expm1")?[0]),
            "table" => {
                let points = params
                    .split(';')
                    .map(|pair| {
                        let (t, y) = pair
                            .split_once('/')
                            .ok_or_else(|| Error::parse(format!("bad table point {pair:?}")))?;
                        Ok((parse_num(t)?, parse_num(y)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                YoungSpec::tabulated(&points)
            }
            _ => Err(Error::parse(format!("unknown Young function {s:?}"))),
        }
    }
}

impl Serialize for YoungSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YoungSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
