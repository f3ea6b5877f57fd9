//! Named function and weight families, parsed from strings like
//! `indicator:0,0.25` or `power:0.5,0` and sampled onto a grid.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Grid, SampledFunction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `χ_[a,b)`.
    Indicator { a: f64, b: f64 },
    /// `max(0, 1 - |x - c| / r)`.
    Tent { c: f64, r: f64 },
    /// `exp(1 - 1 / (1 - ((x - c) / r)²))` inside `|x - c| < r`, peak 1.
    Bump { c: f64, r: f64 },
    /// Uniform `[0, 1)` values on `pieces` equal subintervals of the domain.
    RandomPiecewise { seed: u64, pieces: usize },
    /// 1 on the cell containing `x`, 0 elsewhere.
    Spike { x: f64 },
    Const { c: f64 },
    /// `|x - x0|^a`.
    Power { a: f64, x0: f64 },
    /// `log(1 / |x - x0|)`.
    LogBmo { x0: f64 },
    /// Positive weight `e^U`, `U` uniform in `[-1, 1)`, constant on each of
    /// the `2^smoothness` dyadic subintervals, so samples do not depend on
    /// the grid resolution once it is fine enough.
    RandomWeight { seed: u64, smoothness: u32 },
}

impl Family {
    pub fn sample(&self, grid: &Grid) -> Result<SampledFunction> {
        let (lo, hi) = (grid.lo(), grid.hi());
        let rel = move |x: f64| (x - lo) / (hi - lo);
        match *self {
            Family::Indicator { a, b } => {
                SampledFunction::from_fn(*grid, |x| if x >= a && x < b { 1.0 } else { 0.0 })
            }
            Family::Tent { c, r } => SampledFunction::from_fn(*grid, |x| (1.0 - (x - c).abs() / r).max(0.0)),
            Family::Bump { c, r } => SampledFunction::from_fn(*grid, |x| {
                let s = (x - c) / r;
                if s.abs() < 1.0 {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                } else {
                    0.0
                }
            }),
            Family::RandomPiecewise { seed, pieces } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let vals: Vec<f64> = (0..pieces).map(|_| rng.gen::<f64>()).collect();
                SampledFunction::from_fn(*grid, |x| vals[((rel(x) * pieces as f64) as usize).min(pieces - 1)])
            }
            Family::Spike { x } => {
                if x < lo || x >= hi {
                    return Err(Error::Range { what: "spike position".into(), value: x });
                }
                let mut v = vec![0.0; grid.len()];
                v[grid.cell_of(x)] = 1.0;
                SampledFunction::new(*grid, v)
            }
            Family::Const { c } => SampledFunction::constant(*grid, c),
            Family::Power { a, x0 } => crate::weights::power_weight(grid, a, x0),
            Family::LogBmo { x0 } => SampledFunction::from_fn(*grid, |x| -(x - x0).abs().ln()),
            Family::RandomWeight { seed, smoothness } => {
                let pieces = 1usize << smoothness;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let vals: Vec<f64> = (0..pieces).map(|_| rng.gen_range(-1.0..1.0f64).exp()).collect();
                SampledFunction::from_fn(*grid, |x| vals[((rel(x) * pieces as f64) as usize).min(pieces - 1)])
            }
        }
    }

    pub fn is_positive(&self) -> bool {
        match *self {
            Family::Const { c } => c > 0.0,
            Family::Power { a, .. } => a == 0.0,
            Family::RandomWeight { .. } => true,
            _ => false,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Indicator { a, b } => write!(f, "indicator:{a},{b}"),
            Family::Tent { c, r } => write!(f, "tent:{c},{r}"),
            Family::Bump { c, r } => write!(f, "bump:{c},{r}"),
            Family::RandomPiecewise { seed, pieces } => write!(f, "randpc:{seed},{pieces}"),
            Family::Spike { x } => write!(f, "spike:{x}"),
            Family::Const { c } => write!(f, "const:{c}"),
            Family::Power { a, x0 } => write!(f, "power:{a},{x0}"),
            Family::LogBmo { x0 } => write!(f, "logbmo:{x0}"),
            Family::RandomWeight { seed, smoothness } => write!(f, "random:{seed},{smoothness}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let args: Vec<&str> = if args.is_empty() { vec![] } else { args.split(',').map(str::trim).collect() };
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                Err(Error::parse(format!("family '{name}' takes {n} argument(s), got '{s}'")))
            }
        };
        let real = |i: usize| -> Result<f64> {
            let v: f64 = args[i].parse().map_err(|_| Error::parse(format!("bad number '{}' in '{s}'", args[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(format!("non-finite parameter in '{s}'")))
            }
        };
        let int = |i: usize| -> Result<u64> {
            args[i].parse().map_err(|_| Error::parse(format!("bad integer '{}' in '{s}'", args[i])))
        };
        let positive = |v: f64, what: &str| -> Result<f64> {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::parse(format!("{what} must be positive in '{s}'")))
            }
        };
        let fam = match name {
            "indicator" => {
                arity(2)?;
                let (a, b) = (real(0)?, real(1)?);
                if a >= b {
                    return Err(Error::parse(format!("empty interval in '{s}'")));
                }
                Family::Indicator { a, b }
            }
            "tent" => {
                arity(2)?;
                Family::Tent { c: real(0)?, r: positive(real(1)?, "radius")? }
            }
            "bump" => {
                arity(2)?;
                Family::Bump { c: real(0)?, r: positive(real(1)?, "radius")? }
            }
            "randpc" => {
                arity(2)?;
                let pieces = int(1)? as usize;
                if pieces == 0 {
                    return Err(Error::parse(format!("randpc needs at least one piece: '{s}'")));
                }
                Family::RandomPiecewise { seed: int(0)?, pieces }
            }
            "spike" => {
                arity(1)?;
                Family::Spike { x: real(0)? }
            }
            "const" => {
                arity(1)?;
                Family::Const { c: real(0)? }
            }
            "power" => {
                arity(2)?;
                Family::Power { a: real(0)?, x0: real(1)? }
            }
            "logbmo" => {
                arity(1)?;
                Family::LogBmo { x0: real(0)? }
            }
            "random" => {
                arity(2)?;
                let smoothness = int(1)?;
                if smoothness > 24 {
                    return Err(Error::parse(format!("smoothness at most 24 in '{s}'")));
                }
                Family::RandomWeight { seed: int(0)?, smoothness: smoothness as u32 }
            }
            _ => return Err(Error::parse(format!("unknown family '{name}'"))),
        };
        Ok(fam)
    }
}

impl Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
