//! Experiment engine: evaluates both sides of an inequality over a sweep of
//! functions, weights and levels, and records the largest observed ratio.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::czo::{apply_czo, commutator, KernelSpec};
use crate::error::{Error, Result};
use crate::families::Family;
use crate::lattice::{DyadicCube, Grid, SampledFunction};
use crate::orlicz::{iterated_maximal, localization_ratio, maximal, maximal_within, weak_type_sides};
use crate::weights::{ap_constant, bmo_norm, conjugate, rh_constant, stability, Stability};
use crate::young::{check_bp, check_domination, Domination, YoungSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    StrongFs,
    MixedWeakCzo,
    MixedWeakCommutator,
    MaximalWeakType,
    Composition,
    A1SelfImprove,
    PointwiseTwoWeight,
    AInftyMembership,
    Coifman,
    CoifmanCommutator,
    BpMaximalCharacterization,
    Localization,
}

impl TheoremId {
    pub const ALL: [TheoremId; 12] = [
        TheoremId::StrongFs,
        TheoremId::MixedWeakCzo,
        TheoremId::MixedWeakCommutator,
        TheoremId::MaximalWeakType,
        TheoremId::Composition,
        TheoremId::A1SelfImprove,
        TheoremId::PointwiseTwoWeight,
        TheoremId::AInftyMembership,
        TheoremId::Coifman,
        TheoremId::CoifmanCommutator,
        TheoremId::BpMaximalCharacterization,
        TheoremId::Localization,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::StrongFs => "strong_fs",
            TheoremId::MixedWeakCzo => "mixed_weak_czo",
            TheoremId::MixedWeakCommutator => "mixed_weak_commutator",
            TheoremId::MaximalWeakType => "maximal_weak_type",
            TheoremId::Composition => "composition",
            TheoremId::A1SelfImprove => "a1_self_improve",
            TheoremId::PointwiseTwoWeight => "pointwise_two_weight",
            TheoremId::AInftyMembership => "a_infty_membership",
            TheoremId::Coifman => "coifman",
            TheoremId::CoifmanCommutator => "coifman_commutator",
            TheoremId::BpMaximalCharacterization => "bp_maximal_characterization",
            TheoremId::Localization => "localization",
        }
    }

    pub fn is_lemma(&self) -> bool {
        !matches!(self, TheoremId::StrongFs | TheoremId::MixedWeakCzo | TheoremId::MixedWeakCommutator)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown theorem id '{s}'")))
    }
}

/// Which power of `v` serves as the measure in `M_{Φ, v^e}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightExponent {
    /// `e = 1 - q`.
    #[default]
    OneMinusQ,
    /// `e = 1 - q'`.
    OneMinusQPrime,
}

impl WeightExponent {
    pub fn exponent(&self, q: f64) -> Result<f64> {
        match self {
            WeightExponent::OneMinusQ => Ok(1.0 - q),
            WeightExponent::OneMinusQPrime => Ok(1.0 - conjugate(q)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub p: f64,
    pub q: f64,
    pub epsilon: f64,
    pub m: u32,
    pub delta: f64,
    pub phi: YoungSpec,
    pub psi: YoungSpec,
    pub theta: YoungSpec,
    pub cube_level: u32,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            p: 1.2,
            q: 2.0,
            epsilon: 1.0,
            m: 0,
            delta: 0.5,
            phi: YoungSpec::LogBump { r: 1.0, eps: 1.0 },
            psi: YoungSpec::Identity,
            theta: YoungSpec::LogBump { r: 1.0, eps: 1.0 },
            cube_level: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Families {
    pub f: Vec<Family>,
    pub u: Vec<Family>,
    pub v: Vec<Family>,
    pub w: Vec<Family>,
    pub b: Vec<Family>,
}

impl Default for Families {
    fn default() -> Self {
        Families {
            f: vec![Family::Bump { c: 0.0, r: 0.25 }],
            u: vec![Family::Const { c: 1.0 }],
            v: vec![Family::Const { c: 1.0 }],
            w: vec![Family::Const { c: 1.0 }],
            b: vec![Family::LogBmo { x0: 0.0 }],
        }
    }
}

/// Levels `2^e` for `e` evenly spaced in `[lo_exp, hi_exp]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaSweep {
    pub lo_exp: f64,
    pub hi_exp: f64,
    pub points: usize,
}

impl Default for LambdaSweep {
    fn default() -> Self {
        LambdaSweep { lo_exp: -8.0, hi_exp: 8.0, points: 33 }
    }
}

impl LambdaSweep {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![2f64.powf(self.lo_exp)];
        }
        let step = (self.hi_exp - self.lo_exp) / (self.points - 1) as f64;
        (0..self.points).map(|i| 2f64.powf(self.lo_exp + step * i as f64)).collect()
    }
}

fn default_levels() -> u32 {
    10
}
fn default_domain() -> (f64, f64) {
    (-1.0, 1.0)
}
fn default_truncation() -> usize {
    1
}
fn default_stability_ratio() -> f64 {
    crate::weights::DEFAULT_STABILITY_RATIO
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theorem: TheoremId,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default = "default_domain")]
    pub domain: (f64, f64),
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub families: Families,
    #[serde(default)]
    pub lambda: LambdaSweep,
    #[serde(default)]
    pub seed: u64,
    /// Extra random piecewise-constant `f` samples, drawn from `seed` and
    /// supported in the middle half of the domain.
    #[serde(default)]
    pub random_samples: usize,
    #[serde(default)]
    pub weight_exponent: WeightExponent,
    #[serde(default = "default_truncation")]
    pub kernel_truncation: usize,
    #[serde(default = "default_stability_ratio")]
    pub stability_ratio: f64,
    #[serde(default = "default_true")]
    pub check_stability: bool,
}

impl ExperimentConfig {
    pub fn new(theorem: TheoremId) -> Self {
        serde_json::from_value(serde_json::json!({ "theorem": theorem })).expect("defaults are valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self, levels: u32) -> Result<Grid> {
        Grid::new(self.domain.0, self.domain.1, levels)
    }

    fn kernel(&self) -> KernelSpec {
        KernelSpec::hilbert(self.kernel_truncation)
    }

    fn measure_exponent(&self) -> Result<f64> {
        self.weight_exponent.exponent(self.params.q)
    }

    /// Checks the parameter constraints of the selected theorem.
    pub fn validate(&self) -> Result<()> {
        let max_levels = crate::lattice::MAX_LEVELS - u32::from(self.check_stability);
        if self.levels == 0 || self.levels > max_levels {
            return Err(Error::config(format!("levels must lie in 1..={max_levels}, got {}", self.levels)));
        }
        if !(self.domain.0 < self.domain.1) || !self.domain.0.is_finite() || !self.domain.1.is_finite() {
            return Err(Error::config(format!("invalid domain {:?}", self.domain)));
        }
        if self.lambda.points == 0 || !(self.lambda.lo_exp <= self.lambda.hi_exp) {
            return Err(Error::config("lambda sweep needs points >= 1 and lo_exp <= hi_exp"));
        }
        if self.kernel_truncation == 0 {
            return Err(Error::config("kernel_truncation must be at least 1"));
        }
        if !(self.stability_ratio >= 1.0) {
            return Err(Error::config("stability_ratio must be >= 1"));
        }
        let pr = &self.params;
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("{} requires {what}", self.theorem)))
            }
        };
        let nonempty = |list: &[Family], role: &str| need(!list.is_empty(), &format!("a non-empty '{role}' family list"));
        let fam = &self.families;
        match self.theorem {
            TheoremId::StrongFs => {
                need(pr.q > 1.0, "q > 1")?;
                need(pr.epsilon > 0.0, "epsilon > 0")?;
                need(pr.p > 1.0, "p > 1")?;
                need(pr.p < pr.q, "p < q")?;
                let cap = 1.0 + pr.epsilon / (pr.m as f64 + 1.0);
                need(pr.p < cap, &format!("p < 1 + epsilon/(m+1) = {cap}"))?;
                nonempty(&fam.f, "f")?;
                nonempty(&fam.w, "w")?;
                nonempty(&fam.v, "v")?;
                if pr.m > 0 {
                    nonempty(&fam.b, "b")?;
                }
            }
            TheoremId::MixedWeakCzo | TheoremId::MixedWeakCommutator => {
                need(pr.q > 1.0, "q > 1")?;
                need(pr.epsilon > 0.0, "epsilon > 0")?;
                if self.theorem == TheoremId::MixedWeakCzo {
                    need(pr.m == 0, "m = 0 (use mixed_weak_commutator for m >= 1)")?;
                } else {
                    need(pr.m >= 1, "m >= 1")?;
                    nonempty(&fam.b, "b")?;
                }
                nonempty(&fam.f, "f")?;
                nonempty(&fam.u, "u")?;
                nonempty(&fam.v, "v")?;
            }
            TheoremId::MaximalWeakType => {
                nonempty(&fam.f, "f")?;
                nonempty(&fam.w, "w")?;
            }
            TheoremId::Composition => {
                nonempty(&fam.f, "f")?;
                nonempty(&fam.w, "w")?;
                let composed = YoungSpec::theta(pr.phi.clone(), pr.psi.clone());
                if let Domination::NotDominated { witness } = check_domination(&composed, &pr.theta) {
                    return Err(Error::config(format!(
                        "composition requires theta({},{}) dominated by {} at infinity; fails near t = {witness:e}",
                        pr.phi, pr.psi, pr.theta
                    )));
                }
            }
            TheoremId::A1SelfImprove => {
                need(pr.delta > 0.0 && pr.delta < 1.0, "0 < delta < 1")?;
                nonempty(&fam.f, "f")?;
                nonempty(&fam.w, "w")?;
            }
            TheoremId::PointwiseTwoWeight | TheoremId::AInftyMembership => {
                need(pr.q > 1.0, "q > 1")?;
                need(pr.p > 1.0 && pr.p < pr.q, "1 < p < q")?;
                need(pr.epsilon >= 0.0, "epsilon >= 0")?;
                nonempty(&fam.u, "u")?;
                nonempty(&fam.v, "v")?;
            }
            TheoremId::Coifman | TheoremId::CoifmanCommutator => {
                need(pr.p > 0.0, "p > 0")?;
                nonempty(&fam.f, "f")?;
                nonempty(&fam.w, "w")?;
                if self.theorem == TheoremId::CoifmanCommutator {
                    need(pr.m >= 1, "m >= 1")?;
                    nonempty(&fam.b, "b")?;
                }
            }
            TheoremId::BpMaximalCharacterization => {
                need(pr.p > 1.0, "p > 1")?;
                nonempty(&fam.f, "f")?;
                nonempty(&fam.u, "u")?;
                nonempty(&fam.w, "w")?;
            }
            TheoremId::Localization => {
                need(pr.cube_level <= self.levels, "cube_level <= levels")?;
                nonempty(&fam.f, "f")?;
                nonempty(&fam.w, "w")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub label: String,
    pub lambda: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; absent when `rhs = 0`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub levels: (u32, u32),
    #[serde(flatten)]
    pub stability: Stability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata { tool: "mixedfs".into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub theorem: TheoremId,
    pub levels: u32,
    /// Largest ratio over the sweep; a lower bound for the best constant of
    /// the dyadic model.
    pub best_constant: f64,
    pub attaining: Option<SweepPoint>,
    pub points: Vec<SweepPoint>,
    pub zero_rhs_points: usize,
    pub violations: Vec<String>,
    pub stability: Option<StabilityRecord>,
    pub extras: BTreeMap<String, f64>,
    pub passed: bool,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub metadata: Metadata,
}

impl InequalityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per sweep point: theorem, params, label, λ, lhs, rhs, ratio.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Internal(e.to_string());
        w.write_record(["theorem", "levels", "params", "label", "lambda", "lhs", "rhs", "ratio"]).map_err(io)?;
        let pr = &self.config.params;
        let params = format!("p={};q={};epsilon={};m={};delta={}", pr.p, pr.q, pr.epsilon, pr.m, pr.delta);
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for pt in &self.points {
            w.write_record([
                self.theorem.as_str().to_string(),
                self.levels.to_string(),
                params.clone(),
                pt.label.clone(),
                opt(pt.lambda),
                pt.lhs.to_string(),
                pt.rhs.to_string(),
                opt(pt.ratio),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Raw output of one sweep at a fixed resolution.
#[derive(Debug, Default)]
struct Sweep {
    points: Vec<(String, Option<f64>, f64, f64)>,
    extras: BTreeMap<String, f64>,
    violations: Vec<String>,
    /// Ratios above this bound are violations.
    known_bound: Option<f64>,
}

impl Sweep {
    fn best(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| p.3 > 0.0)
            .map(|p| p.2 / p.3)
            .fold(0.0, f64::max)
    }
}

/// `v^e` sampled cellwise.
fn power_of(v: &SampledFunction, e: f64) -> Result<SampledFunction> {
    v.map(|x| x.powf(e))
}

fn phi_eps(eps: f64) -> Result<YoungSpec> {
    YoungSpec::log_bump(1.0, eps)
}

fn ones(grid: &Grid) -> Result<SampledFunction> {
    SampledFunction::constant(*grid, 1.0)
}

/// Both sides of the strong-type inequality for one sample, with the
/// measure `v^{exponent}` inside the maximal operator.
#[allow(clippy::too_many_arguments)]
pub fn strong_fs_sides(
    f: &SampledFunction,
    w: &SampledFunction,
    v: &SampledFunction,
    b: &SampledFunction,
    p: f64,
    eps: f64,
    m: u32,
    exponent: f64,
    kernel: &KernelSpec,
) -> Result<(f64, f64)> {
    let h = f.grid().h();
    let nu = power_of(v, exponent)?;
    let mw = maximal(w, &nu, &phi_eps(m as f64 + eps)?)?;
    let t = commutator(f, b, m, kernel)?;
    let vp = power_of(v, 1.0 - p)?;
    let lhs: f64 = (0..f.len()).map(|i| t.values()[i].abs().powf(p) * w.values()[i] * vp.values()[i]).sum::<f64>() * h;
    let rhs: f64 = (0..f.len()).map(|i| f.values()[i].abs().powf(p) * mw.values()[i] * vp.values()[i]).sum::<f64>() * h;
    Ok((lhs, rhs))
}

/// `(lhs, rhs)` of the mixed weak-type inequality for each `λ`. For `m ≥ 1`
/// the right side is `∫ Φ_m(‖b‖^m |f| / λ) M_{Φ_{m+ε}, v^e} u · v`.
#[allow(clippy::too_many_arguments)]
pub fn mixed_weak_sides(
    f: &SampledFunction,
    u: &SampledFunction,
    v: &SampledFunction,
    b: &SampledFunction,
    m: u32,
    eps: f64,
    exponent: f64,
    bmo: f64,
    lambdas: &[f64],
    kernel: &KernelSpec,
) -> Result<Vec<(f64, f64)>> {
    let h = f.grid().h();
    let g = commutator(&f.mul(v)?, b, m, kernel)?;
    let level: Vec<f64> = g.values().iter().zip(v.values()).map(|(x, y)| x.abs() / y).collect();
    let mu = maximal(u, &power_of(v, exponent)?, &phi_eps(m as f64 + eps)?)?;
    let phi_m = phi_eps(m as f64)?;
    let bm = bmo.powi(m as i32);
    let weights: Vec<f64> = mu.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
    let l1: f64 = f.values().iter().zip(&weights).map(|(x, k)| x.abs() * k).sum::<f64>() * h;
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let lhs: f64 = (0..f.len())
                .filter(|&i| level[i] > lambda)
                .map(|i| u.values()[i] * v.values()[i])
                .sum::<f64>()
                * h;
            let rhs = if m == 0 {
                l1 / lambda
            } else {
                f.values()
                    .iter()
                    .zip(&weights)
                    .map(|(x, k)| phi_m.value(bm * x.abs() / lambda) * k)
                    .sum::<f64>()
                    * h
            };
            (lhs, rhs)
        })
        .collect())
}

/// Largest cellwise `num / den`, as `(num, den)` at the attaining cell, and
/// whether some cell has `den = 0 < num`.
fn pointwise(num: &SampledFunction, den: &SampledFunction) -> ((f64, f64), bool) {
    let mut best = (0.0, 1.0);
    let mut broken = false;
    for (&a, &b) in num.values().iter().zip(den.values()) {
        if b > 0.0 {
            if a / b > best.0 / best.1 {
                best = (a, b);
            }
        } else if a > 0.0 {
            broken = true;
        }
    }
    (best, broken)
}

type Sampled = Vec<(Family, SampledFunction)>;

fn sample_all(list: &[Family], grid: &Grid) -> Result<Sampled> {
    list.iter().map(|f| Ok((*f, f.sample(grid)?))).collect()
}

fn random_f(cfg: &ExperimentConfig, grid: &Grid) -> Result<Vec<(String, SampledFunction)>> {
    let (lo, hi) = cfg.domain;
    let (a, b) = (lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo));
    (0..cfg.random_samples)
        .map(|i| {
            let fam = Family::RandomPiecewise { seed: cfg.seed.wrapping_add(i as u64), pieces: 64 };
            let f = fam.sample(grid)?.zip_with(&Family::Indicator { a, b }.sample(grid)?, |x, y| x * y)?;
            Ok((format!("{fam}|mid"), f))
        })
        .collect()
}

fn f_samples(cfg: &ExperimentConfig, grid: &Grid) -> Result<Vec<(String, SampledFunction)>> {
    let mut out: Vec<(String, SampledFunction)> =
        sample_all(&cfg.families.f, grid)?.into_iter().map(|(f, s)| (f.to_string(), s)).collect();
    out.extend(random_f(cfg, grid)?);
    Ok(out)
}

fn weight_samples(list: &[Family], grid: &Grid, role: &str) -> Result<Sampled> {
    let out = sample_all(list, grid)?;
    for (fam, s) in &out {
        s.check_weight(&format!("{role} = {fam}"))
            .map_err(|e| Error::config(format!("{role}-family {fam} is not a positive weight: {e}")))?;
    }
    Ok(out)
}

/// Index tuples of the Cartesian product of lists with the given lengths.
fn product(lens: &[usize]) -> Vec<Vec<usize>> {
    lens.iter().fold(vec![vec![]], |acc, &n| {
        acc.into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |i| {
                    let mut p = prefix.clone();
                    p.push(i);
                    p
                })
            })
            .collect()
    })
}

fn evaluate(cfg: &ExperimentConfig, levels: u32) -> Result<Sweep> {
    let grid = cfg.grid(levels)?;
    let pr = &cfg.params;
    let kernel = cfg.kernel();
    let fam = &cfg.families;
    let lambdas = cfg.lambda.values();
    let mut sweep = Sweep::default();

    match cfg.theorem {
        TheoremId::StrongFs => {
            let fs = f_samples(cfg, &grid)?;
            let ws = sample_all(&fam.w, &grid)?;
            let vs = weight_samples(&fam.v, &grid, "v")?;
            let bs = if pr.m > 0 { sample_all(&fam.b, &grid)? } else { vec![(Family::Const { c: 0.0 }, SampledFunction::zeros(grid))] };
            let e = cfg.measure_exponent()?;
            let combos = product(&[fs.len(), ws.len(), vs.len(), bs.len()]);
            let pts: Result<Vec<_>> = combos
                .par_iter()
                .map(|c| {
                    let (lhs, rhs) = strong_fs_sides(&fs[c[0]].1, &ws[c[1]].1, &vs[c[2]].1, &bs[c[3]].1, pr.p, pr.epsilon, pr.m, e, &kernel)?;
                    let mut label = format!("f={} w={} v={}", fs[c[0]].0, ws[c[1]].0, vs[c[2]].0);
                    if pr.m > 0 {
                        label.push_str(&format!(" b={}", bs[c[3]].0));
                    }
                    Ok((label, None, lhs, rhs))
                })
                .collect();
            sweep.points = pts?;
        }
        TheoremId::MixedWeakCzo | TheoremId::MixedWeakCommutator => {
            let m = if cfg.theorem == TheoremId::MixedWeakCzo { 0 } else { pr.m };
            let fs = f_samples(cfg, &grid)?;
            let us = sample_all(&fam.u, &grid)?;
            let vs = weight_samples(&fam.v, &grid, "v")?;
            let bs = if m > 0 { sample_all(&fam.b, &grid)? } else { vec![(Family::Const { c: 0.0 }, SampledFunction::zeros(grid))] };
            let norms: Vec<f64> = if m > 0 {
                bs.iter().map(|(_, b)| bmo_norm(b).map(|r| r.constant)).collect::<Result<_>>()?
            } else {
                vec![0.0]
            };
            if m > 0 {
                for ((fb, _), n) in bs.iter().zip(&norms) {
                    sweep.extras.insert(format!("bmo[{fb}]"), *n);
                }
            }
            let e = cfg.measure_exponent()?;
            let combos = product(&[fs.len(), us.len(), vs.len(), bs.len()]);
            let per: Result<Vec<Vec<_>>> = combos
                .par_iter()
                .map(|c| {
                    let sides = mixed_weak_sides(&fs[c[0]].1, &us[c[1]].1, &vs[c[2]].1, &bs[c[3]].1, m, pr.epsilon, e, norms[c[3]], &lambdas, &kernel)?;
                    let mut label = format!("f={} u={} v={}", fs[c[0]].0, us[c[1]].0, vs[c[2]].0);
                    if m > 0 {
                        label.push_str(&format!(" b={}", bs[c[3]].0));
                    }
                    Ok(sides.into_iter().zip(&lambdas).map(|((l, r), &lam)| (label.clone(), Some(lam), l, r)).collect())
                })
                .collect();
            sweep.points = per?.into_iter().flatten().collect();
        }
        TheoremId::MaximalWeakType => {
            let fs = f_samples(cfg, &grid)?;
            let ws = weight_samples(&fam.w, &grid, "w")?;
            let combos = product(&[fs.len(), ws.len()]);
            let per: Result<Vec<(Vec<_>, f64)>> = combos
                .par_iter()
                .map(|c| {
                    let (f, w) = (&fs[c[0]].1, &ws[c[1]].1);
                    let mv = maximal_within(f, w, &pr.phi, DyadicCube::ROOT)?;
                    let label = format!("f={} w={}", fs[c[0]].0, ws[c[1]].0);
                    let mut restricted = 0.0f64;
                    let mut pts = Vec::with_capacity(lambdas.len());
                    for &lam in &lambdas {
                        let (l, r) = weak_type_sides(f, w, &pr.phi, DyadicCube::ROOT, &mv, lam, false)?;
                        let (rl, rr) = weak_type_sides(f, w, &pr.phi, DyadicCube::ROOT, &mv, lam, true)?;
                        if rr > 0.0 {
                            restricted = restricted.max(rl / rr);
                        }
                        pts.push((label.clone(), Some(lam), l, r));
                    }
                    Ok((pts, restricted))
                })
                .collect();
            let mut restricted = 0.0f64;
            for (pts, r) in per? {
                sweep.points.extend(pts);
                restricted = restricted.max(r);
            }
            sweep.extras.insert("restricted_level_constant".into(), restricted);
            sweep.known_bound = Some(1.0 + 1e-9);
        }
        TheoremId::Composition => {
            let fs = f_samples(cfg, &grid)?;
            let ws = weight_samples(&fam.w, &grid, "w")?;
            let combos = product(&[fs.len(), ws.len()]);
            let pts: Result<Vec<_>> = combos
                .par_iter()
                .map(|c| {
                    let (f, w) = (&fs[c[0]].1, &ws[c[1]].1);
                    let outer = maximal(&maximal(f, w, &pr.phi)?, w, &pr.psi)?;
                    let bound = maximal(f, w, &pr.theta)?;
                    let ((l, r), broken) = pointwise(&outer, &bound);
                    Ok((format!("f={} w={}", fs[c[0]].0, ws[c[1]].0), l, r, broken))
                })
                .collect();
            for (label, l, r, broken) in pts? {
                if broken {
                    sweep.violations.push(format!("{label}: composed maximal positive where the bound vanishes"));
                }
                sweep.points.push((label, None, l, r));
            }
        }
        TheoremId::A1SelfImprove => {
            let fs = f_samples(cfg, &grid)?;
            let ws = weight_samples(&fam.w, &grid, "w")?;
            let combos = product(&[fs.len(), ws.len()]);
            let pts: Result<Vec<_>> = combos
                .par_iter()
                .map(|c| {
                    let (f, w) = (&fs[c[0]].1, &ws[c[1]].1);
                    let g = maximal(f, w, &pr.phi)?.powf(pr.delta)?;
                    let rep = ap_constant(&g, 1.0, Some(w))?;
                    Ok((format!("f={} w={}", fs[c[0]].0, ws[c[1]].0), None, rep.constant, 1.0))
                })
                .collect();
            sweep.points = pts?;
        }
        TheoremId::PointwiseTwoWeight => {
            let us = sample_all(&fam.u, &grid)?;
            let vs = weight_samples(&fam.v, &grid, "v")?;
            let e = cfg.measure_exponent()?;
            let phi = phi_eps(pr.epsilon)?;
            let one = ones(&grid)?;
            let combos = product(&[us.len(), vs.len()]);
            let pts: Result<Vec<_>> = combos
                .par_iter()
                .map(|c| {
                    let (u, v) = (&us[c[0]].1, &vs[c[1]].1);
                    let vp = power_of(v, 1.0 - pr.p)?;
                    let num = maximal(&u.mul(&vp)?, &one, &phi)?;
                    let den = maximal(u, &power_of(v, e)?, &phi)?.mul(&vp)?;
                    let ((l, r), broken) = pointwise(&num, &den);
                    Ok((format!("u={} v={}", us[c[0]].0, vs[c[1]].0), l, r, broken))
                })
                .collect();
            for (label, l, r, broken) in pts? {
                if broken {
                    sweep.violations.push(format!("{label}: left side positive where the right side vanishes"));
                }
                sweep.points.push((label, None, l, r));
            }
        }
        TheoremId::AInftyMembership => {
            let us = sample_all(&fam.u, &grid)?;
            let vs = weight_samples(&fam.v, &grid, "v")?;
            let e = cfg.measure_exponent()?;
            let pp = conjugate(pr.p)?;
            let phi = phi_eps(pr.epsilon)?;
            let ts = [pp + 0.5, pp + 1.0, 2.0 * pp];
            let combos = product(&[us.len(), vs.len()]);
            let pts: Result<Vec<_>> = combos
                .par_iter()
                .map(|c| {
                    let (u, v) = (&us[c[0]].1, &vs[c[1]].1);
                    let big = maximal(u, &power_of(v, e)?, &phi)?.powf(1.0 - pp)?.mul(v)?;
                    let mut best = (f64::INFINITY, ts[0]);
                    for &t in &ts {
                        let k = ap_constant(&big, t, None)?.constant;
                        if k < best.0 {
                            best = (k, t);
                        }
                    }
                    Ok((format!("u={} v={} t={}", us[c[0]].0, vs[c[1]].0, best.1), None, best.0, 1.0))
                })
                .collect();
            sweep.points = pts?;
        }
        TheoremId::Coifman | TheoremId::CoifmanCommutator => {
            let m = if cfg.theorem == TheoremId::Coifman { 0 } else { pr.m };
            let fs = f_samples(cfg, &grid)?;
            let ws = weight_samples(&fam.w, &grid, "w")?;
            let bs = if m > 0 { sample_all(&fam.b, &grid)? } else { vec![(Family::Const { c: 0.0 }, SampledFunction::zeros(grid))] };
            for (fw, w) in &ws {
                sweep.extras.insert(format!("a2[{fw}]"), ap_constant(w, 2.0, None)?.constant);
            }
            let one = ones(&grid)?;
            let h = grid.h();
            let combos = product(&[fs.len(), ws.len(), bs.len()]);
            let pts: Result<Vec<_>> = combos
                .par_iter()
                .map(|c| {
                    let (f, w, b) = (&fs[c[0]].1, &ws[c[1]].1, &bs[c[2]].1);
                    let t = if m == 0 { apply_czo(f, &kernel)? } else { commutator(f, b, m, &kernel)? };
                    let mf = iterated_maximal(f, &one, m + 1)?;
                    let lhs: f64 = t.values().iter().zip(w.values()).map(|(x, k)| x.abs().powf(pr.p) * k).sum::<f64>() * h;
                    let rhs: f64 = mf.values().iter().zip(w.values()).map(|(x, k)| x.powf(pr.p) * k).sum::<f64>() * h;
                    let mut label = format!("f={} w={}", fs[c[0]].0, ws[c[1]].0);
                    if m > 0 {
                        label.push_str(&format!(" b={}", bs[c[2]].0));
                    }
                    Ok((label, None, lhs, rhs))
                })
                .collect();
            sweep.points = pts?;
        }
        TheoremId::BpMaximalCharacterization => {
            let verdict = check_bp(&pr.phi, pr.p)?;
            sweep.extras.insert("in_bp".into(), if verdict.in_bp { 1.0 } else { 0.0 });
            sweep.extras.insert("bp_truncated_integral".into(), verdict.truncated_integral);
            let fs = f_samples(cfg, &grid)?;
            let us = sample_all(&fam.u, &grid)?;
            let ws = weight_samples(&fam.w, &grid, "w")?;
            let one = ones(&grid)?;
            let h = grid.h();
            let p = pr.p;
            let combos = product(&[fs.len(), us.len(), ws.len()]);
            let pts: Result<Vec<_>> = combos
                .par_iter()
                .map(|c| {
                    let (f, u, w) = (&fs[c[0]].1, &us[c[1]].1, &ws[c[2]].1);
                    let mf = maximal(f, &one, &YoungSpec::Identity)?;
                    let mu = maximal(u, &one, &YoungSpec::Identity)?;
                    let mphi = maximal(w, &one, &pr.phi)?;
                    let lhs: f64 = (0..f.len())
                        .map(|i| mf.values()[i].powf(p) * u.values()[i] / mphi.values()[i].powf(p - 1.0))
                        .sum::<f64>()
                        * h;
                    let rhs: f64 = (0..f.len())
                        .map(|i| f.values()[i].abs().powf(p) * mu.values()[i] / w.values()[i].powf(p - 1.0))
                        .sum::<f64>()
                        * h;
                    Ok((format!("f={} u={} w={}", fs[c[0]].0, us[c[1]].0, ws[c[2]].0), None, lhs, rhs))
                })
                .collect();
            sweep.points = pts?;
        }
        TheoremId::Localization => {
            let fs = f_samples(cfg, &grid)?;
            let ws = weight_samples(&fam.w, &grid, "w")?;
            let level = pr.cube_level;
            let combos = product(&[fs.len(), ws.len(), 1usize << level]);
            let pts: Result<Vec<_>> = combos
                .par_iter()
                .map(|c| {
                    let q = DyadicCube::new(level, c[2]);
                    let r = localization_ratio(&fs[c[0]].1, &ws[c[1]].1, &pr.phi, q)?;
                    Ok((format!("f={} w={} Q=({},{})", fs[c[0]].0, ws[c[1]].0, level, c[2]), r))
                })
                .collect();
            let mut degenerate = 0usize;
            for (label, r) in pts? {
                if r.degenerate {
                    degenerate += 1;
                } else {
                    sweep.points.push((label, None, r.ratio, 1.0));
                }
            }
            sweep.extras.insert("degenerate_cubes".into(), degenerate as f64);
        }
    }
    Ok(sweep)
}

/// For the mixed theorems: every `v` must have `RH_∞` and `A_{q'}`
/// constants that are stable between `L` and `L + 1`.
fn check_mixed_weights(cfg: &ExperimentConfig) -> Result<BTreeMap<String, f64>> {
    let mut extras = BTreeMap::new();
    let qp = conjugate(cfg.params.q)?;
    let coarse = cfg.grid(cfg.levels)?;
    let fine = cfg.grid((cfg.levels + 1).min(crate::lattice::MAX_LEVELS))?;
    for fam in &cfg.families.v {
        let (a, b) = (fam.sample(&coarse)?, fam.sample(&fine)?);
        for (name, ca, cb) in [
            ("rh_inf", rh_constant(&a, f64::INFINITY)?.constant, rh_constant(&b, f64::INFINITY)?.constant),
            ("a_qprime", ap_constant(&a, qp, None)?.constant, ap_constant(&b, qp, None)?.constant),
        ] {
            let s = stability(ca, cb, cfg.stability_ratio);
            if !s.stable {
                return Err(Error::config(format!(
                    "v-family {fam} fails the {name} stability check ({ca:.4e} at L, {cb:.4e} at L+1)"
                )));
            }
            extras.insert(format!("{name}[{fam}]"), ca);
        }
    }
    Ok(extras)
}

fn assemble(cfg: &ExperimentConfig, sweep: Sweep, fine: Option<Sweep>) -> InequalityReport {
    let mut points = Vec::with_capacity(sweep.points.len());
    let mut zero_rhs = 0;
    let mut violations = sweep.violations;
    let mut best = 0.0f64;
    let mut attaining: Option<SweepPoint> = None;
    for (index, (label, lambda, lhs, rhs)) in sweep.points.into_iter().enumerate() {
        let ratio = if rhs > 0.0 { Some(lhs / rhs) } else { None };
        if ratio.is_none() {
            zero_rhs += 1;
            if lhs > 0.0 {
                violations.push(format!("point {index} ({label}): rhs = 0 but lhs = {lhs:e}"));
            }
        }
        let pt = SweepPoint { index, label, lambda, lhs, rhs, ratio };
        if let Some(r) = ratio {
            if !r.is_finite() {
                violations.push(format!("point {index} ({}): non-finite ratio", pt.label));
            } else if r > best || attaining.is_none() {
                best = best.max(r);
                attaining = Some(pt.clone());
            }
        }
        points.push(pt);
    }
    if let (Some(bound), Some(a)) = (sweep.known_bound, &attaining) {
        if best > bound {
            violations.push(format!("best constant {best} exceeds {bound} at point {} ({})", a.index, a.label));
        }
    }
    let stability = fine.map(|f| StabilityRecord {
        levels: (cfg.levels, cfg.levels + 1),
        stability: stability(best, f.best(), cfg.stability_ratio),
    });
    InequalityReport {
        theorem: cfg.theorem,
        levels: cfg.levels,
        best_constant: best,
        attaining,
        points,
        zero_rhs_points: zero_rhs,
        passed: violations.is_empty(),
        violations,
        stability,
        extras: sweep.extras,
        seed: cfg.seed,
        config: cfg.clone(),
        metadata: Metadata::default(),
    }
}

fn run_checked(cfg: &ExperimentConfig, pre: BTreeMap<String, f64>) -> Result<InequalityReport> {
    let mut coarse = evaluate(cfg, cfg.levels)?;
    coarse.extras.extend(pre);
    let fine = if cfg.check_stability { Some(evaluate(cfg, cfg.levels + 1)?) } else { None };
    Ok(assemble(cfg, coarse, fine))
}

pub fn run_strong_fs(cfg: &ExperimentConfig) -> Result<InequalityReport> {
    expect_theorem(cfg, &[TheoremId::StrongFs])?;
    cfg.validate()?;
    run_checked(cfg, BTreeMap::new())
}

pub fn run_mixed_weak(cfg: &ExperimentConfig) -> Result<InequalityReport> {
    expect_theorem(cfg, &[TheoremId::MixedWeakCzo, TheoremId::MixedWeakCommutator])?;
    cfg.validate()?;
    let pre = check_mixed_weights(cfg)?;
    run_checked(cfg, pre)
}

pub fn run_lemma_suite(cfg: &ExperimentConfig) -> Result<InequalityReport> {
    if !cfg.theorem.is_lemma() {
        return Err(Error::config(format!("{} is not a lemma id", cfg.theorem)));
    }
    cfg.validate()?;
    run_checked(cfg, BTreeMap::new())
}

/// Dispatches on the theorem id.
pub fn run(cfg: &ExperimentConfig) -> Result<InequalityReport> {
    match cfg.theorem {
        TheoremId::StrongFs => run_strong_fs(cfg),
        TheoremId::MixedWeakCzo | TheoremId::MixedWeakCommutator => run_mixed_weak(cfg),
        _ => run_lemma_suite(cfg),
    }
}

fn expect_theorem(cfg: &ExperimentConfig, ids: &[TheoremId]) -> Result<()> {
    if ids.contains(&cfg.theorem) {
        Ok(())
    } else {
        Err(Error::config(format!("theorem {} is not handled by this runner", cfg.theorem)))
    }
}
