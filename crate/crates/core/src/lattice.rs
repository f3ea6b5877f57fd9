//! Uniform grids over an interval, the dyadic lattice over them, and
//! weighted integration on dyadic cubes.
//!
//! A grid with `levels = L` has `N = 2^L` cells. Every sample sits at a cell
//! midpoint. The cube at `(level, index)` covers cells
//! `[index * 2^(L - level), (index + 1) * 2^(L - level))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported refinement level (N = 2^24 cells).
pub const MAX_LEVELS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: f64,
    hi: f64,
    levels: u32,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, levels: u32) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::contract(format!("grid needs lo < hi, got [{lo}, {hi})")));
        }
        if levels == 0 || levels > MAX_LEVELS {
            return Err(Error::contract(format!(
                "grid levels must lie in 1..={MAX_LEVELS}, got {levels}"
            )));
        }
        Ok(Grid { lo, hi, levels })
    }

    /// The unit interval `[0, 1)` with `2^levels` cells.
    pub fn unit(levels: u32) -> Result<Self> {
        Grid::new(0.0, 1.0, levels)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn len(&self) -> usize {
        1usize << self.levels
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell width.
    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.len() as f64
    }

    pub fn midpoint(&self, cell: usize) -> f64 {
        self.lo + (cell as f64 + 0.5) * self.h()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.midpoint(k)).collect()
    }

    /// Index of the cell containing `x`, clamped to the grid.
    pub fn cell_of(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.h()).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.len() - 1)
        }
    }

    /// Same domain, one level finer or coarser.
    pub fn with_levels(&self, levels: u32) -> Result<Self> {
        Grid::new(self.lo, self.hi, levels)
    }

    pub fn root(&self) -> DyadicCube {
        DyadicCube::ROOT
    }

    pub fn contains(&self, cube: DyadicCube) -> bool {
        cube.level <= self.levels && cube.index < (1usize << cube.level)
    }

    pub fn check_cube(&self, cube: DyadicCube) -> Result<()> {
        if self.contains(cube) {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "cube {cube:?} is not part of a grid with {} levels",
                self.levels
            )))
        }
    }

    /// Every cube of the lattice, coarsest level first.
    pub fn cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        (0..=self.levels).flat_map(|level| {
            (0..(1usize << level)).map(move |index| DyadicCube { level, index })
        })
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Node `(level, index)` of the dyadic lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub index: usize,
}

impl DyadicCube {
    pub const ROOT: DyadicCube = DyadicCube { level: 0, index: 0 };

    pub fn new(level: u32, index: usize) -> Self {
        DyadicCube { level, index }
    }

    /// Half-open cell range `[start, end)` on `grid`.
    pub fn cells(&self, grid: &Grid) -> std::ops::Range<usize> {
        let span = 1usize << (grid.levels() - self.level);
        self.index * span..(self.index + 1) * span
    }

    pub fn num_cells(&self, grid: &Grid) -> usize {
        1usize << (grid.levels() - self.level)
    }

    pub fn side(&self, grid: &Grid) -> f64 {
        (grid.hi() - grid.lo()) / (1u64 << self.level) as f64
    }

    pub fn endpoints(&self, grid: &Grid) -> (f64, f64) {
        let side = self.side(grid);
        let a = grid.lo() + self.index as f64 * side;
        (a, a + side)
    }

    pub fn center(&self, grid: &Grid) -> f64 {
        let (a, b) = self.endpoints(grid);
        0.5 * (a + b)
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        (self.level > 0).then(|| DyadicCube::new(self.level - 1, self.index / 2))
    }

    /// The `k`-th dyadic ancestor; `k = 0` is the cube itself.
    pub fn ancestor(&self, k: u32) -> Option<DyadicCube> {
        (k <= self.level).then(|| DyadicCube::new(self.level - k, self.index >> k))
    }

    pub fn children(&self) -> [DyadicCube; 2] {
        [
            DyadicCube::new(self.level + 1, 2 * self.index),
            DyadicCube::new(self.level + 1, 2 * self.index + 1),
        ]
    }

    /// Cube of `level` containing cell `cell` of `grid`.
    pub fn containing(grid: &Grid, level: u32, cell: usize) -> DyadicCube {
        DyadicCube::new(level, cell >> (grid.levels() - level))
    }

    pub fn contains_cube(&self, other: &DyadicCube) -> bool {
        other.level >= self.level && (other.index >> (other.level - self.level)) == self.index
    }

    /// Cells of the dilate of this cube by `factor` about its centre,
    /// clipped to the grid.
    pub fn dilated_cells(&self, grid: &Grid, factor: f64) -> std::ops::Range<usize> {
        let r = self.cells(grid);
        let len = (r.end - r.start) as f64;
        let centre = 0.5 * (r.start + r.end) as f64;
        let half = 0.5 * factor * len;
        let start = (centre - half).floor().max(0.0) as usize;
        let end = ((centre + half).ceil() as usize).min(grid.len());
        start..end
    }
}

/// Real values sampled at the cell midpoints of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite sample {} at cell {k}", values[k])));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.midpoint(k))).collect();
        SampledFunction::new(grid, values)
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        SampledFunction::new(grid, vec![c; grid.len()])
    }

    pub fn zeros(grid: Grid) -> Self {
        SampledFunction { grid, values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fails unless every sample is strictly positive.
    pub fn check_weight(&self, role: &str) -> Result<()> {
        match self.values.iter().position(|&v| v <= 0.0) {
            None => Ok(()),
            Some(k) => Err(Error::contract(format!(
                "{role} must be positive, found {} at cell {k}",
                self.values[k]
            ))),
        }
    }

    pub fn check_same_grid(&self, other: &SampledFunction) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        SampledFunction::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(
        &self,
        other: &SampledFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        SampledFunction::new(self.grid, values)
    }

    pub fn mul(&self, other: &SampledFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        SampledFunction {
            grid: self.grid,
            values: self.values.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn powf(&self, e: f64) -> Result<Self> {
        self.map(|v| v.powf(e))
    }

    /// Zeroes the samples in `cells`.
    pub fn without_cells(&self, cells: std::ops::Range<usize>) -> Self {
        let mut values = self.values.clone();
        values[cells].iter_mut().for_each(|v| *v = 0.0);
        SampledFunction { grid: self.grid, values }
    }

    /// `h * sum_k f_k w_k` over the whole grid.
    pub fn integral_against(&self, w: &SampledFunction) -> Result<f64> {
        integrate(self, w, DyadicCube::ROOT)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Midpoint rule for `∫_Q f w dx`.
pub fn integrate(f: &SampledFunction, w: &SampledFunction, cube: DyadicCube) -> Result<f64> {
    f.check_same_grid(w)?;
    f.grid.check_cube(cube)?;
    let r = cube.cells(&f.grid);
    let s: f64 = f.values[r.clone()].iter().zip(&w.values[r]).map(|(a, b)| a * b).sum();
    Ok(f.grid.h() * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeStats {
    pub average: f64,
    pub infimum: f64,
    pub supremum: f64,
    pub w_measure: f64,
}

pub fn cube_stats(w: &SampledFunction, cube: DyadicCube) -> Result<CubeStats> {
    w.grid.check_cube(cube)?;
    let r = cube.cells(&w.grid);
    let slice = &w.values[r];
    let sum: f64 = slice.iter().sum();
    let w_measure = w.grid.h() * sum;
    let (infimum, supremum) = slice
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok(CubeStats {
        average: w_measure / cube.side(&w.grid),
        infimum,
        supremum,
        w_measure,
    })
}

/// Per-level cube sums built bottom-up by pairwise addition.
/// `levels[l][j]` is the plain sum of the samples in cube `(l, j)`.
#[derive(Debug, Clone)]
pub(crate) struct Pyramid {
    levels: Vec<Vec<f64>>,
}

impl Pyramid {
    pub(crate) fn sums(values: &[f64]) -> Self {
        Self::build(values, |a, b| a + b)
    }

    pub(crate) fn mins(values: &[f64]) -> Self {
        Self::build(values, f64::min)
    }

    pub(crate) fn maxs(values: &[f64]) -> Self {
        Self::build(values, f64::max)
    }

    fn build(values: &[f64], op: impl Fn(f64, f64) -> f64) -> Self {
        let mut levels = vec![values.to_vec()];
        while levels.last().map_or(0, Vec::len) > 1 {
            let prev = levels.last().unwrap();
            let next = prev.chunks_exact(2).map(|c| op(c[0], c[1])).collect();
            levels.push(next);
        }
        levels.reverse();
        Pyramid { levels }
    }

    pub(crate) fn get(&self, cube: DyadicCube) -> f64 {
        self.levels[cube.level as usize][cube.index]
    }
}
