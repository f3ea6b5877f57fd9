//! Truncated Hilbert transform on the grid, kernel-condition measurement
//! and the iterated commutators `T_b^m`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SampledFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `K(x) = 1 / (πx)`.
    Hilbert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Pairs of cells closer than this many cells are excluded from the sum.
    pub truncation: usize,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::hilbert(1)
    }
}

impl KernelSpec {
    pub fn hilbert(truncation: usize) -> Self {
        KernelSpec { kind: KernelKind::Hilbert, truncation }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            KernelKind::Hilbert => 1.0 / (PI * x),
        }
    }

    /// Samples `K(k·spacing)` for `k = -m..=m`.
    pub fn tabulate(&self, spacing: f64, m: usize) -> TabulatedKernel {
        TabulatedKernel::from_fn(spacing, m, |x| self.eval(x))
    }

    fn check(&self) -> Result<()> {
        if self.truncation == 0 {
            return Err(Error::contract("kernel truncation must be at least one cell"));
        }
        Ok(())
    }
}

/// Kernel values on the offsets `k·spacing`, `|k| ≤ m`; the entry at 0 is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    spacing: f64,
    values: Vec<f64>,
}

impl TabulatedKernel {
    pub fn from_fn(spacing: f64, m: usize, k: impl Fn(f64) -> f64) -> Self {
        let values = (0..=2 * m)
            .map(|i| {
                let off = i as isize - m as isize;
                if off == 0 {
                    0.0
                } else {
                    k(off as f64 * spacing)
                }
            })
            .collect();
        TabulatedKernel { spacing, values }
    }

    pub fn reach(&self) -> usize {
        self.values.len() / 2
    }

    pub fn at(&self, offset: isize) -> f64 {
        self.values[(offset + self.reach() as isize) as usize]
    }

    /// Copy with `K(x)` replaced by `(K(x) + K(-x)) / 2 + c·|K(x)|`.
    pub fn with_even_part(&self, c: f64) -> Self {
        let m = self.reach() as isize;
        let values = (-m..=m)
            .map(|k| if k == 0 { 0.0 } else { 0.5 * (self.at(k) + self.at(-k)) + c * self.at(k).abs() })
            .collect();
        TabulatedKernel { spacing: self.spacing, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    /// `max |x| |K(x)|` over grid offsets.
    pub size_c: f64,
    /// `max |K(x-y) - K(x-z)| |x-y|² / |x-z|` over triples with `|x-y| > 2|y-z|`.
    pub smooth_c: f64,
    /// `max |K(x) + K(-x)| / |K(x)|`.
    pub antisymmetry_defect: f64,
    pub antisymmetric: bool,
}

pub const ANTISYMMETRY_TOL: f64 = 1e-12;

pub fn tabulated_constants(k: &TabulatedKernel) -> KernelConstants {
    let m = k.reach() as isize;
    let h = k.spacing;
    let mut size_c = 0.0f64;
    let mut defect = 0.0f64;
    for off in 1..=m {
        for s in [off, -off] {
            size_c = size_c.max((s as f64 * h).abs() * k.at(s).abs());
        }
        let scale = k.at(off).abs().max(k.at(-off).abs());
        if scale > 0.0 {
            defect = defect.max((k.at(off) + k.at(-off)).abs() / scale);
        }
    }
    // a = x - y, c = y - z, so x - z = a + c
    let smooth_c = (-m..=m)
        .into_par_iter()
        .filter(|&a| a != 0)
        .map(|a| {
            let mut best = 0.0f64;
            let cmax = (a.abs() - 1) / 2;
            for c in -cmax..=cmax {
                let xz = a + c;
                if c == 0 || xz.abs() > m || 2 * c.abs() >= a.abs() {
                    continue;
                }
                let num = (k.at(a) - k.at(xz)).abs() * (a as f64 * h).powi(2);
                best = best.max(num / (xz as f64 * h).abs());
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    KernelConstants { size_c, smooth_c, antisymmetry_defect: defect, antisymmetric: defect <= ANTISYMMETRY_TOL }
}

/// Kernel constants sampled on the offsets of a grid with `cells` cells of width `h`.
pub fn kernel_constants(kernel: &KernelSpec, h: f64, cells: usize) -> KernelConstants {
    tabulated_constants(&kernel.tabulate(h, cells.saturating_sub(1)))
}

/// `(Tf)(x_i) = h Σ_{|i-j| ≥ η} K(x_i - x_j) f(x_j)`.
pub fn apply_czo(f: &SampledFunction, kernel: &KernelSpec) -> Result<SampledFunction> {
    kernel.check()?;
    let grid = *f.grid();
    let h = grid.h();
    let n = f.len();
    // every shipped kernel is odd, so K(-kh) = -K(kh)
    let table: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { kernel.eval(k as f64 * h) }).collect();
    let v = f.values();
    let eta = kernel.truncation;
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for k in eta..n {
                let left = if k <= i { v[i - k] } else { 0.0 };
                let right = if i + k < n { v[i + k] } else { 0.0 };
                acc += table[k] * (left - right);
                if k > i && i + k >= n {
                    break;
                }
            }
            h * acc
        })
        .collect();
    SampledFunction::new(grid, out)
}

/// `T_b^0 f = Tf`, `T_b^m f = b T_b^{m-1} f - T_b^{m-1}(b f)`.
pub fn commutator(f: &SampledFunction, b: &SampledFunction, m: u32, kernel: &KernelSpec) -> Result<SampledFunction> {
    f.check_same_grid(b)?;
    if m == 0 {
        return apply_czo(f, kernel);
    }
    let first = commutator(f, b, m - 1, kernel)?.mul(b)?;
    let second = commutator(&f.mul(b)?, b, m - 1, kernel)?;
    first.zip_with(&second, |x, y| x - y)
}
