//! Calderón–Zygmund decomposition of a nonnegative `f` at level `λ` with
//! respect to `v dx`, by a top-down stopping time on dyadic cubes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DyadicCube, Grid, Pyramid, SampledFunction};

/// Dilation factor defining `Q* ⊃ Q` in one dimension.
pub const STAR_FACTOR: f64 = 4.0;
pub const RECONSTRUCTION_TOL: f64 = 1e-12;
pub const MEAN_ZERO_TOL: f64 = 1e-10;

/// `h_j = (f - f^v_{Q_j}) χ_{Q_j}`, stored on the cells of its cube only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadPart {
    pub cube: DyadicCube,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub lambda: f64,
    pub cubes: Vec<DyadicCube>,
    pub good: SampledFunction,
    pub bad_parts: Vec<BadPart>,
    pub omega: Vec<bool>,
    pub omega_star: Vec<bool>,
    pub weighted_averages: Vec<f64>,
    /// `max v(parent) / v(child)` over the lattice.
    pub doubling_constant: f64,
    /// The root average already exceeds `λ`; the upper bound on averages is vacuous.
    pub root_selected: bool,
    /// Finest-level cubes whose average exceeds `C_v λ`.
    pub floor_saturated: Vec<DyadicCube>,
}

impl Decomposition {
    pub fn grid(&self) -> &Grid {
        self.good.grid()
    }

    /// `Σ_j h_j` on the whole grid.
    pub fn bad_sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.good.len()];
        for part in &self.bad_parts {
            let r = part.cube.cells(self.grid());
            for (o, v) in out[r].iter_mut().zip(&part.values) {
                *o += v;
            }
        }
        out
    }
}

fn doubling_constant(v: &Pyramid, levels: u32) -> f64 {
    let mut c = 1.0f64;
    for level in 1..=levels {
        for i in 0..1usize << level {
            let child = DyadicCube::new(level, i);
            c = c.max(v.get(child.parent().unwrap()) / v.get(child));
        }
    }
    c
}

pub fn cz_decompose(f: &SampledFunction, v: &SampledFunction, lambda: f64) -> Result<Decomposition> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::contract(format!("level must be positive and finite, got {lambda}")));
    }
    f.check_same_grid(v)?;
    v.check_weight("decomposition measure")?;
    if let Some(k) = f.values().iter().position(|&x| x < 0.0) {
        return Err(Error::contract(format!("f is negative at cell {k}")));
    }
    let grid = *f.grid();
    let fv: Vec<f64> = f.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
    let fvs = Pyramid::sums(&fv);
    let vs = Pyramid::sums(v.values());
    let avg = |c: DyadicCube| fvs.get(c) / vs.get(c);
    let c_v = doubling_constant(&vs, grid.levels());

    let mut cubes = Vec::new();
    let mut stack = vec![DyadicCube::ROOT];
    while let Some(q) = stack.pop() {
        if avg(q) > lambda {
            cubes.push(q);
        } else if q.level < grid.levels() {
            let [l, r] = q.children();
            stack.push(r);
            stack.push(l);
        }
    }

    let mut good = f.values().to_vec();
    let mut omega = vec![false; grid.len()];
    let mut omega_star = vec![false; grid.len()];
    let mut bad_parts = Vec::with_capacity(cubes.len());
    let mut weighted_averages = Vec::with_capacity(cubes.len());
    let mut floor_saturated = Vec::new();
    for &q in &cubes {
        let a = avg(q);
        let r = q.cells(&grid);
        let values = f.values()[r.clone()].iter().map(|x| x - a).collect();
        good[r.clone()].iter_mut().for_each(|g| *g = a);
        omega[r].iter_mut().for_each(|m| *m = true);
        omega_star[q.dilated_cells(&grid, STAR_FACTOR)].iter_mut().for_each(|m| *m = true);
        if q.level == grid.levels() && a > c_v * lambda {
            floor_saturated.push(q);
        }
        bad_parts.push(BadPart { cube: q, values });
        weighted_averages.push(a);
    }

    Ok(Decomposition {
        lambda,
        root_selected: cubes.first() == Some(&DyadicCube::ROOT),
        cubes,
        good: SampledFunction::new(grid, good)?,
        bad_parts,
        omega,
        omega_star,
        weighted_averages,
        doubling_constant: c_v,
        floor_saturated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub name: String,
    pub pass: bool,
    /// Worst observed value of the checked quantity.
    pub measured: f64,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub doubling_constant: f64,
    pub properties: Vec<PropertyVerdict>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.properties.iter().all(|p| p.pass)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyVerdict> {
        self.properties.iter().find(|p| p.name == name)
    }
}

fn verdict(name: &str, pass: bool, measured: f64) -> PropertyVerdict {
    PropertyVerdict { name: name.into(), pass, measured, note: String::new() }
}

pub fn verify_decomposition(d: &Decomposition, f: &SampledFunction, v: &SampledFunction) -> Result<VerificationReport> {
    f.check_same_grid(v)?;
    f.check_same_grid(&d.good)?;
    let grid = *f.grid();
    let lambda = d.lambda;
    let fv: Vec<f64> = f.values().iter().zip(v.values()).map(|(a, b)| a * b).collect();
    let fvs = Pyramid::sums(&fv);
    let vs = Pyramid::sums(v.values());
    let avg = |c: DyadicCube| fvs.get(c) / vs.get(c);
    let c_v = doubling_constant(&vs, grid.levels());
    let mut props = Vec::new();

    let mut cover = vec![0u32; grid.len()];
    let mut cubes_valid = d.cubes.len() == d.bad_parts.len() && d.cubes.len() == d.weighted_averages.len();
    for q in &d.cubes {
        if !grid.contains(*q) {
            cubes_valid = false;
            continue;
        }
        cover[q.cells(&grid)].iter_mut().for_each(|c| *c += 1);
    }
    let overlap = cover.iter().copied().max().unwrap_or(0);
    props.push(verdict("disjoint", cubes_valid && overlap <= 1, overlap as f64));
    let omega: Vec<bool> = cover.iter().map(|&c| c > 0).collect();

    let mut worst_ancestor = 0.0f64;
    for q in d.cubes.iter().filter(|q| grid.contains(**q)) {
        for k in 1..=q.level {
            worst_ancestor = worst_ancestor.max(avg(q.ancestor(k).unwrap()));
        }
    }
    props.push(verdict("maximal", worst_ancestor <= lambda, worst_ancestor / lambda));

    let recomputed: Vec<f64> = d.cubes.iter().filter(|q| grid.contains(**q)).map(|&q| avg(q)).collect();
    let lowest = recomputed.iter().copied().fold(f64::INFINITY, f64::min);
    let recorded_match = recomputed.iter().zip(&d.weighted_averages).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
    props.push(verdict("lower_bound", recorded_match && (d.cubes.is_empty() || lowest > lambda), lowest / lambda));

    let highest = recomputed.iter().copied().fold(0.0, f64::max);
    let mut upper = verdict("upper_bound", d.root_selected || highest <= c_v * lambda, highest / lambda);
    if d.root_selected {
        upper.note = "root selected; upper bound vacuous".into();
    }
    props.push(upper);

    let g = d.good.values();
    let worst_good = g.iter().zip(&omega).filter(|(_, &m)| m).map(|(x, _)| *x).fold(0.0, f64::max);
    props.push(verdict("good_bounded", d.root_selected || worst_good <= c_v * lambda, worst_good / lambda));

    let off_mismatch = g
        .iter()
        .zip(f.values())
        .zip(&omega)
        .filter(|(_, &m)| !m)
        .map(|((a, b), _)| (a - b).abs())
        .fold(0.0, f64::max);
    props.push(verdict("good_equals_f_off_omega", off_mismatch == 0.0, off_mismatch));

    let bad = d.bad_sum();
    let recon = f
        .values()
        .iter()
        .zip(g)
        .zip(&bad)
        .map(|((a, b), c)| (a - b - c).abs())
        .fold(0.0, f64::max);
    props.push(verdict("reconstruction", recon <= RECONSTRUCTION_TOL, recon));

    let fmax = f.max_abs();
    let mut worst_mean = 0.0f64;
    let mut support_ok = true;
    for part in &d.bad_parts {
        if !grid.contains(part.cube) || part.values.len() != part.cube.num_cells(&grid) {
            support_ok = false;
            continue;
        }
        let wv = &v.values()[part.cube.cells(&grid)];
        let integral: f64 = part.values.iter().zip(wv).map(|(a, b)| a * b).sum::<f64>() * grid.h();
        let scale = fmax * vs.get(part.cube) * grid.h();
        if scale > 0.0 {
            worst_mean = worst_mean.max(integral.abs() / scale);
        }
    }
    props.push(verdict("mean_zero", support_ok && worst_mean <= MEAN_ZERO_TOL, worst_mean));

    let worst_off = f
        .values()
        .iter()
        .zip(&omega)
        .filter(|(_, &m)| !m)
        .map(|(x, _)| *x)
        .fold(0.0, f64::max);
    props.push(verdict("below_level_off_omega", worst_off <= lambda, worst_off / lambda));

    let v_omega: f64 = v.values().iter().zip(&omega).filter(|(_, &m)| m).map(|(x, _)| x).sum::<f64>() * grid.h();
    let chebyshev = fv.iter().sum::<f64>() * grid.h() / lambda;
    let ratio = if chebyshev > 0.0 { v_omega / chebyshev } else { 0.0 };
    props.push(verdict("measure_bound", v_omega <= chebyshev, ratio));

    Ok(VerificationReport { doubling_constant: c_v, properties: props })
}

/// Flat JSON-friendly view of a decomposition and its verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub lambda: f64,
    pub cubes: Vec<(u32, usize)>,
    pub weighted_averages: Vec<f64>,
    pub doubling_constant: f64,
    pub root_selected: bool,
    pub floor_saturated: Vec<(u32, usize)>,
    pub omega_measure: f64,
    pub omega_star_measure: f64,
    pub verification: VerificationReport,
}

pub fn summarize(d: &Decomposition, verification: VerificationReport) -> DecompositionSummary {
    let h = d.grid().h();
    let count = |m: &[bool]| m.iter().filter(|&&b| b).count() as f64 * h;
    DecompositionSummary {
        lambda: d.lambda,
        cubes: d.cubes.iter().map(|c| (c.level, c.index)).collect(),
        weighted_averages: d.weighted_averages.clone(),
        doubling_constant: d.doubling_constant,
        root_selected: d.root_selected,
        floor_saturated: d.floor_saturated.iter().map(|c| (c.level, c.index)).collect(),
        omega_measure: count(&d.omega),
        omega_star_measure: count(&d.omega_star),
        verification,
    }
}
