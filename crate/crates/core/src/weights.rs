//! Constants of Muckenhoupt, reverse Hölder and BMO classes, computed as
//! suprema over the dyadic lattice.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DyadicCube, Grid, Pyramid, SampledFunction};

/// Default tolerated ratio between constants measured at `L` and `L + 1`.
pub const DEFAULT_STABILITY_RATIO: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightClass {
    A1,
    Ap(f64),
    A1u,
    Apu(f64),
    RHs(f64),
    RHinf,
    Bmo,
}

impl WeightClass {
    /// Muckenhoupt or reverse Hölder class, i.e. a class whose constant is at least 1.
    pub fn is_multiplicative(&self) -> bool {
        !matches!(self, WeightClass::Bmo)
    }
}

impl fmt::Display for WeightClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightClass::A1 => write!(f, "A1"),
            WeightClass::Ap(p) => write!(f, "Ap({p})"),
            WeightClass::A1u => write!(f, "A1(u)"),
            WeightClass::Apu(p) => write!(f, "Ap({p},u)"),
            WeightClass::RHs(s) => write!(f, "RHs({s})"),
            WeightClass::RHinf => write!(f, "RHinf"),
            WeightClass::Bmo => write!(f, "BMO"),
        }
    }
}

/// Accepts `A1`, `A<p>`, `Ap(<p>)`, `RH<s>`, `RHs(<s>)`, `RHinf` and `BMO`.
impl FromStr for WeightClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let num = |x: &str| -> Result<f64> {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(format!("bad exponent in weight class '{s}'")))
        };
        let inner = |prefix: &str| t.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
        let class = match t {
            "A1" => WeightClass::A1,
            "A1(u)" => WeightClass::A1u,
            "RHinf" | "RHs(inf)" => WeightClass::RHinf,
            "BMO" => WeightClass::Bmo,
            _ => {
                if let Some(r) = inner("Ap(") {
                    match r.split_once(',') {
                        Some((p, u)) if u.trim() == "u" => WeightClass::Apu(num(p)?),
                        _ => WeightClass::Ap(num(r)?),
                    }
                } else if let Some(r) = inner("RHs(") {
                    WeightClass::RHs(num(r)?)
                } else if let Some(r) = t.strip_prefix("RH") {
                    WeightClass::RHs(num(r)?)
                } else if let Some(r) = t.strip_prefix('A') {
                    let p = num(r)?;
                    if p == 1.0 {
                        WeightClass::A1
                    } else {
                        WeightClass::Ap(p)
                    }
                } else {
                    return Err(Error::parse(format!("unknown weight class '{s}'")));
                }
            }
        };
        Ok(class)
    }
}

impl Serialize for WeightClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for WeightClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub class_name: WeightClass,
    pub constant: f64,
    pub witness_cube: DyadicCube,
    pub levels_scanned: u32,
}

/// `p' = p / (p - 1)`, with `1' = ∞` and `∞' = 1`.
pub fn conjugate(p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::contract(format!("exponent must be >= 1, got {p}")));
    }
    if p == 1.0 {
        Ok(f64::INFINITY)
    } else if p.is_infinite() {
        Ok(1.0)
    } else {
        Ok(p / (p - 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub coarse: f64,
    pub fine: f64,
    /// `max(fine / coarse, coarse / fine)`.
    pub ratio: f64,
    pub stable: bool,
}

pub fn stability(coarse: f64, fine: f64, max_ratio: f64) -> Stability {
    let ratio = if coarse == fine {
        1.0
    } else if coarse > 0.0 && fine > 0.0 {
        (fine / coarse).max(coarse / fine)
    } else {
        f64::INFINITY
    };
    Stability { coarse, fine, ratio, stable: ratio.is_finite() && ratio <= max_ratio }
}

/// Supremum of `value(cube)` over the lattice, scanning coarsest first;
/// ties keep the earliest cube.
fn lattice_sup(grid: &Grid, value: impl Fn(DyadicCube) -> f64 + Sync) -> (f64, DyadicCube) {
    (0..=grid.levels())
        .map(|level| {
            (0..1usize << level)
                .into_par_iter()
                .map(|i| {
                    let c = DyadicCube::new(level, i);
                    (value(c), c)
                })
                .reduce(
                    || (f64::NEG_INFINITY, DyadicCube::new(level, usize::MAX)),
                    |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1.index < a.1.index) { b } else { a },
                )
        })
        .fold((f64::NEG_INFINITY, DyadicCube::ROOT), |a, b| if b.0 > a.0 { b } else { a })
}

fn report(class_name: WeightClass, grid: &Grid, (constant, witness_cube): (f64, DyadicCube)) -> WeightReport {
    WeightReport { class_name, constant, witness_cube, levels_scanned: grid.levels() + 1 }
}

/// `A_p` constant of `w`, or `A_p(u)` when `base` is given.
pub fn ap_constant(w: &SampledFunction, p: f64, base: Option<&SampledFunction>) -> Result<WeightReport> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::contract(format!("A_p needs p >= 1, got {p}")));
    }
    w.check_weight("A_p weight")?;
    let grid = *w.grid();
    let ones;
    let u = match base {
        Some(u) => {
            u.check_same_grid(w)?;
            u.check_weight("A_p base measure")?;
            u
        }
        None => {
            ones = SampledFunction::constant(grid, 1.0)?;
            &ones
        }
    };
    let us = Pyramid::sums(u.values());
    let wu: Vec<f64> = w.values().iter().zip(u.values()).map(|(a, b)| a * b).collect();
    let wus = Pyramid::sums(&wu);
    let class = match (p == 1.0, base.is_some()) {
        (true, false) => WeightClass::A1,
        (true, true) => WeightClass::A1u,
        (false, false) => WeightClass::Ap(p),
        (false, true) => WeightClass::Apu(p),
    };
    if p == 1.0 {
        let mins = Pyramid::mins(w.values());
        let sup = lattice_sup(&grid, |c| wus.get(c) / us.get(c) / mins.get(c));
        return Ok(report(class, &grid, sup));
    }
    let e = 1.0 - conjugate(p)?;
    let dual: Vec<f64> = w.values().iter().zip(u.values()).map(|(a, b)| a.powf(e) * b).collect();
    let duals = Pyramid::sums(&dual);
    let sup = lattice_sup(&grid, |c| {
        let m = us.get(c);
        (wus.get(c) / m) * (duals.get(c) / m).powf(p - 1.0)
    });
    Ok(report(class, &grid, sup))
}

/// `RH_s` constant for finite `s > 1`, or `RH_∞` for `s = ∞`.
pub fn rh_constant(w: &SampledFunction, s: f64) -> Result<WeightReport> {
    if s.is_nan() || s <= 1.0 {
        return Err(Error::contract(format!("reverse Hölder exponent must exceed 1, got {s}")));
    }
    w.check_weight("reverse Hölder weight")?;
    let grid = *w.grid();
    let sums = Pyramid::sums(w.values());
    if s.is_infinite() {
        let maxs = Pyramid::maxs(w.values());
        let sup = lattice_sup(&grid, |c| maxs.get(c) * c.num_cells(&grid) as f64 / sums.get(c));
        return Ok(report(WeightClass::RHinf, &grid, sup));
    }
    let ws: Vec<f64> = w.values().iter().map(|x| x.powf(s)).collect();
    let pows = Pyramid::sums(&ws);
    let sup = lattice_sup(&grid, |c| {
        let n = c.num_cells(&grid) as f64;
        (pows.get(c) / n).powf(1.0 / s) / (sums.get(c) / n)
    });
    Ok(report(WeightClass::RHs(s), &grid, sup))
}

/// Constant of `w` for `class`. A `base` measure turns the `A_p` classes
/// into their `A_p(u)` form and is ignored otherwise.
pub fn weight_constant(w: &SampledFunction, class: WeightClass, base: Option<&SampledFunction>) -> Result<WeightReport> {
    match class {
        WeightClass::A1 | WeightClass::A1u => ap_constant(w, 1.0, base),
        WeightClass::Ap(p) | WeightClass::Apu(p) => ap_constant(w, p, base),
        WeightClass::RHs(s) => rh_constant(w, s),
        WeightClass::RHinf => rh_constant(w, f64::INFINITY),
        WeightClass::Bmo => bmo_norm(w),
    }
}

/// Mean oscillation `(1/|Q|) ∫_Q |b - b_Q|`.
pub fn mean_oscillation(b: &SampledFunction, cube: DyadicCube) -> Result<f64> {
    b.grid().check_cube(cube)?;
    Ok(oscillation(&b.values()[cube.cells(b.grid())]))
}

fn oscillation(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let avg = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - avg).abs()).sum::<f64>() / n
}

pub fn bmo_norm(b: &SampledFunction) -> Result<WeightReport> {
    let grid = *b.grid();
    let sup = lattice_sup(&grid, |c| oscillation(&b.values()[c.cells(&grid)]));
    Ok(report(WeightClass::Bmo, &grid, sup))
}

/// `max_{1 ≤ k ≤ kmax} |b_Q - b_{Q^(k)}| / (k ‖b‖_BMO)`, where `Q^(k)` is the
/// k-th dyadic ancestor of `Q`.
pub fn telescoping_check(b: &SampledFunction, cube: DyadicCube, kmax: u32) -> Result<f64> {
    let norm = bmo_norm(b)?.constant;
    telescoping_with_norm(b, cube, kmax, norm)
}

fn telescoping_with_norm(b: &SampledFunction, cube: DyadicCube, kmax: u32, norm: f64) -> Result<f64> {
    let grid = b.grid();
    grid.check_cube(cube)?;
    if kmax > cube.level {
        return Err(Error::contract(format!(
            "cube {cube:?} has only {} ancestors, asked for {kmax}",
            cube.level
        )));
    }
    if norm == 0.0 {
        return Ok(0.0);
    }
    let sums = Pyramid::sums(b.values());
    let avg = |c: DyadicCube| sums.get(c) / c.num_cells(grid) as f64;
    let base = avg(cube);
    Ok((1..=kmax)
        .map(|k| (base - avg(cube.ancestor(k).expect("checked above"))).abs() / (k as f64 * norm))
        .fold(0.0, f64::max))
}

/// Telescoping ratio maximized over every cube and every available ancestor.
pub fn telescoping_constant(b: &SampledFunction) -> Result<f64> {
    let norm = bmo_norm(b)?.constant;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let grid = *b.grid();
    let sums = Pyramid::sums(b.values());
    let avg = |c: DyadicCube| sums.get(c) / c.num_cells(&grid) as f64;
    let (sup, _) = lattice_sup(&grid, |c| {
        let base = avg(c);
        (1..=c.level)
            .map(|k| (base - avg(c.ancestor(k).unwrap())).abs() / (k as f64 * norm))
            .fold(0.0, f64::max)
    });
    Ok(sup)
}

/// `|x - x₀|^a` sampled at midpoints.
pub fn power_weight(grid: &Grid, a: f64, x0: f64) -> Result<SampledFunction> {
    if !a.is_finite() || !x0.is_finite() {
        return Err(Error::contract("power weight needs finite exponent and centre"));
    }
    if x0 < grid.lo() || x0 > grid.hi() {
        return Err(Error::Range { what: "power weight centre".into(), value: x0 });
    }
    SampledFunction::from_fn(*grid, |x| (x - x0).abs().powf(a))
}
