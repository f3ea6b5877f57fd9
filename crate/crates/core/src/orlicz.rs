//! Luxemburg averages and the generalized weighted maximal operators
//! `M_{Φ,w} f(x) = sup_{Q ∋ x} ‖f‖_{Φ,Q,w}` over dyadic cubes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DyadicCube, Pyramid, SampledFunction};
use crate::young::{geometric, YoungSpec};

/// Relative width of the final bisection bracket.
pub const LUXEMBURG_REL_TOL: f64 = 1e-13;
/// Cap on bracket expansions and on bisection steps.
pub const LUXEMBURG_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct LuxemburgQuery<'a> {
    pub f: &'a SampledFunction,
    pub w: &'a SampledFunction,
    pub cube: DyadicCube,
    pub phi: &'a YoungSpec,
}

impl<'a> LuxemburgQuery<'a> {
    pub fn new(
        f: &'a SampledFunction,
        w: &'a SampledFunction,
        cube: DyadicCube,
        phi: &'a YoungSpec,
    ) -> Self {
        LuxemburgQuery { f, w, cube, phi }
    }

    fn slices(&self) -> Result<(&'a [f64], &'a [f64])> {
        self.f.check_same_grid(self.w)?;
        self.f.grid().check_cube(self.cube)?;
        let r = self.cube.cells(self.f.grid());
        let w = &self.w.values()[r.clone()];
        if let Some(k) = w.iter().position(|&x| x <= 0.0) {
            return Err(Error::contract(format!(
                "weight not positive at cell {} of cube {:?}",
                r.start + k,
                self.cube
            )));
        }
        Ok((&self.f.values()[r], w))
    }
}

/// `‖f‖_{Φ,Q,w} = inf{λ > 0 : (1/w(Q)) ∫_Q Φ(|f|/λ) w ≤ 1}`.
pub fn luxemburg(q: &LuxemburgQuery) -> Result<f64> {
    let (f, w) = q.slices()?;
    luxemburg_slice(f, w, q.phi).map_err(|reason| Error::Overflow { cube: q.cube, reason })
}

/// Unit-ball functional `(1/Σw) Σ Φ(|f|/λ) w` on raw slices.
fn modular(f: &[f64], w: &[f64], wsum: f64, phi: &YoungSpec, lambda: f64) -> f64 {
    f.iter()
        .zip(w)
        .map(|(&x, &wk)| phi.value(x.abs() / lambda) * wk)
        .sum::<f64>()
        / wsum
}

pub(crate) fn luxemburg_slice(f: &[f64], w: &[f64], phi: &YoungSpec) -> std::result::Result<f64, String> {
    let wsum: f64 = w.iter().sum();
    let fw: f64 = f.iter().zip(w).map(|(x, wk)| x.abs() * wk).sum();
    if fw == 0.0 {
        return Ok(0.0);
    }
    let start = fw / wsum;
    if matches!(phi, YoungSpec::Identity) {
        return Ok(start);
    }
    let unit = |lambda: f64| -> std::result::Result<bool, String> {
        let m = modular(f, w, wsum, phi, lambda);
        if m.is_nan() {
            Err(format!("modular is NaN at λ = {lambda}"))
        } else {
            Ok(m <= 1.0)
        }
    };

    let (mut lo, mut hi);
    if unit(start)? {
        hi = start;
        lo = start / 4.0;
        let mut n = 0;
        while unit(lo)? {
            hi = lo;
            lo /= 4.0;
            n += 1;
            if n > LUXEMBURG_MAX_ITER || lo == 0.0 {
                return Err("bracket collapsed toward zero".into());
            }
        }
    } else {
        lo = start;
        hi = 4.0 * start;
        let mut n = 0;
        while !unit(hi)? {
            lo = hi;
            hi *= 4.0;
            n += 1;
            if n > LUXEMBURG_MAX_ITER || !hi.is_finite() {
                return Err("modular stays above 1 for every bracket".into());
            }
        }
    }
    for _ in 0..LUXEMBURG_MAX_ITER {
        if hi - lo <= LUXEMBURG_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if unit(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `min_{μ>0} μ + (μ/w(Q)) ∫_Q Φ(|f|/μ) w`, comparable to the Luxemburg
/// average within `[1, 2]` times it.
pub fn equivalent_infimum_form(q: &LuxemburgQuery) -> Result<f64> {
    let (f, w) = q.slices()?;
    let norm = luxemburg_slice(f, w, q.phi).map_err(|reason| Error::Overflow { cube: q.cube, reason })?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let wsum: f64 = w.iter().sum();
    let objective = |log_mu: f64| {
        let mu = log_mu.exp();
        mu + mu * modular(f, w, wsum, q.phi, mu)
    };
    // the objective is nondecreasing beyond 2‖f‖, so the minimum is inside
    let mut a = (norm * 2f64.powi(-40)).ln();
    let mut b = (4.0 * norm).ln();
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..LUXEMBURG_MAX_ITER {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    Ok(fc.min(fd).min(objective(0.5 * (a + b))))
}

/// Largest sampled `Φ⁻¹(t) Ψ⁻¹(t) / Θ⁻¹(t)` on `[1, 10⁶]` accepted as
/// satisfying the triple condition.
pub const HOLDER_TRIPLE_CAP: f64 = 1e6;
/// Growth of the triple ratio between `10³` and `10⁶` read as unbounded.
pub const HOLDER_TRIPLE_GROWTH: f64 = 1.25;

/// Measures the sampled constant in `Φ⁻¹(t) Ψ⁻¹(t) ≤ C Θ⁻¹(t)`, failing
/// with a witness when the ratio is unbounded on the sample.
pub fn holder_triple_constant(phi: &YoungSpec, psi: &YoungSpec, theta: &YoungSpec) -> Result<f64> {
    let ts = geometric(1.0, 1e6, 61);
    let mut ratios = Vec::with_capacity(ts.len());
    for &t in &ts {
        ratios.push(phi.inverse(t)? * psi.inverse(t)? / theta.inverse(t)?);
    }
    let (arg, max) = ratios
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
    let mid = ratios[30];
    let top = *ratios.last().unwrap();
    if max > HOLDER_TRIPLE_CAP || top > HOLDER_TRIPLE_GROWTH * mid {
        let witness = if top > HOLDER_TRIPLE_GROWTH * mid { *ts.last().unwrap() } else { ts[arg] };
        return Err(Error::Precondition {
            witness,
            reason: format!(
                "Φ⁻¹Ψ⁻¹/Θ⁻¹ is not bounded on the sample (ratio {top:.4e} at 1e6, {mid:.4e} at 1e3)"
            ),
        });
    }
    Ok(max)
}

/// `‖fg‖_{Θ,Q,w} / (‖f‖_{Φ,Q,w} ‖g‖_{Ψ,Q,w})`, with `0/0 = 0`.
#[allow(clippy::too_many_arguments)]
pub fn holder_check(
    f: &SampledFunction,
    g: &SampledFunction,
    w: &SampledFunction,
    cube: DyadicCube,
    phi: &YoungSpec,
    psi: &YoungSpec,
    theta: &YoungSpec,
) -> Result<f64> {
    holder_triple_constant(phi, psi, theta)?;
    let fg = f.mul(g)?;
    let num = luxemburg(&LuxemburgQuery::new(&fg, w, cube, theta))?;
    let nf = luxemburg(&LuxemburgQuery::new(f, w, cube, phi))?;
    let ng = luxemburg(&LuxemburgQuery::new(g, w, cube, psi))?;
    let denom = nf * ng;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(num / denom)
}

/// Luxemburg averages of every cube of one level inside `root`.
fn level_norms(
    f: &SampledFunction,
    w: &SampledFunction,
    phi: &YoungSpec,
    level: u32,
    root: DyadicCube,
    sums: Option<(&Pyramid, &Pyramid)>,
) -> Result<Vec<f64>> {
    let grid = f.grid();
    let depth = level - root.level;
    let first = root.index << depth;
    let count = 1usize << depth;
    (first..first + count)
        .into_par_iter()
        .map(|index| {
            let cube = DyadicCube::new(level, index);
            if let Some((fw, ws)) = sums {
                return Ok(fw.get(cube) / ws.get(cube));
            }
            let r = cube.cells(grid);
            luxemburg_slice(&f.values()[r.clone()], &w.values()[r], phi)
                .map_err(|reason| Error::Overflow { cube, reason })
        })
        .collect()
}

/// Dyadic maximal operator restricted to the subcubes of `root`. Returns
/// one value per cell of `root`.
pub fn maximal_within(
    f: &SampledFunction,
    w: &SampledFunction,
    phi: &YoungSpec,
    root: DyadicCube,
) -> Result<Vec<f64>> {
    f.check_same_grid(w)?;
    w.check_weight("weight of the maximal operator")?;
    let grid = *f.grid();
    grid.check_cube(root)?;

    let identity = matches!(phi, YoungSpec::Identity);
    let pyramids = identity.then(|| {
        let fw: Vec<f64> = f.values().iter().zip(w.values()).map(|(a, b)| a.abs() * b).collect();
        (Pyramid::sums(&fw), Pyramid::sums(w.values()))
    });
    let sums = pyramids.as_ref().map(|(a, b)| (a, b));

    let mut running = vec![0.0f64; 1];
    for level in root.level..=grid.levels() {
        let norms = level_norms(f, w, phi, level, root, sums)?;
        running = norms
            .iter()
            .enumerate()
            .map(|(i, &n)| if level == root.level { n } else { n.max(running[i / 2]) })
            .collect();
    }
    Ok(running)
}

/// `M_{Φ,w} f` over all dyadic cubes of the grid.
pub fn maximal(f: &SampledFunction, w: &SampledFunction, phi: &YoungSpec) -> Result<SampledFunction> {
    let values = maximal_within(f, w, phi, DyadicCube::ROOT)?;
    SampledFunction::new(*f.grid(), values)
}

/// `M_w^k f`, the k-fold composition of the dyadic `M_w`.
pub fn iterated_maximal(f: &SampledFunction, w: &SampledFunction, k: u32) -> Result<SampledFunction> {
    if k == 0 {
        return Err(Error::contract("iterated maximal needs k >= 1"));
    }
    let mut out = maximal(f, w, &YoungSpec::Identity)?;
    for _ in 1..k {
        out = maximal(&out, w, &YoungSpec::Identity)?;
    }
    Ok(out)
}

/// Both sides of the local weak-type estimate on `root` at level `λ`:
/// `w({x ∈ Q₀ : M f(x) > λ})` and `∫_{Q₀} Φ(|f|/λ) w`. With
/// `restricted = true` the right side becomes
/// `∫_{Q₀ ∩ {|f| > λ/2}} Φ(2|f|/λ) w`.
pub fn weak_type_sides(
    f: &SampledFunction,
    w: &SampledFunction,
    phi: &YoungSpec,
    root: DyadicCube,
    maximal_values: &[f64],
    lambda: f64,
    restricted: bool,
) -> Result<(f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::contract(format!("level must be positive, got {lambda}")));
    }
    let grid = f.grid();
    let r = root.cells(grid);
    if maximal_values.len() != r.len() {
        return Err(Error::GridMismatch("maximal values do not cover the root cube".into()));
    }
    let h = grid.h();
    let fv = &f.values()[r.clone()];
    let wv = &w.values()[r];
    let lhs: f64 = maximal_values
        .iter()
        .zip(wv)
        .filter(|(m, _)| **m > lambda)
        .map(|(_, wk)| wk)
        .sum::<f64>()
        * h;
    let rhs: f64 = fv
        .iter()
        .zip(wv)
        .map(|(x, wk)| {
            let x = x.abs();
            if restricted {
                if x > 0.5 * lambda {
                    phi.value(2.0 * x / lambda) * wk
                } else {
                    0.0
                }
            } else {
                phi.value(x / lambda) * wk
            }
        })
        .sum::<f64>()
        * h;
    Ok((lhs, rhs))
}

/// Dilation factor of the localization lemma in one dimension (`4√n`).
pub const LOCALIZATION_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    /// `max_{x,y ∈ Q} M(fχ_{outside RQ})(x) / M(fχ_{outside RQ})(y)`.
    pub ratio: f64,
    /// Set when `f` vanishes outside `RQ`; the ratio is then 1 by convention.
    pub degenerate: bool,
}

pub fn localization_ratio(
    f: &SampledFunction,
    w: &SampledFunction,
    phi: &YoungSpec,
    cube: DyadicCube,
) -> Result<LocalizationResult> {
    let grid = *f.grid();
    grid.check_cube(cube)?;
    let far = f.without_cells(cube.dilated_cells(&grid, LOCALIZATION_FACTOR));
    if far.values().iter().all(|&v| v == 0.0) {
        return Ok(LocalizationResult { ratio: 1.0, degenerate: true });
    }
    let m = maximal(&far, w, phi)?;
    let on_q = &m.values()[cube.cells(&grid)];
    let max = on_q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = on_q.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        return Ok(LocalizationResult { ratio: f64::INFINITY, degenerate: false });
    }
    Ok(LocalizationResult { ratio: max / min, degenerate: false })
}

/// Largest pointwise ratio `a / b` over cells where `b > 0`, with the cell
/// index attaining it.
pub fn max_pointwise_ratio(a: &[f64], b: &[f64]) -> (f64, usize) {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(_, (_, &d))| d > 0.0)
        .map(|(i, (&n, &d))| (n / d, i))
        .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    use crate::lattice::Grid;

    fn unit(levels: u32) -> Grid {
        Grid::unit(levels).unwrap()
    }

    fn spec(s: &str) -> YoungSpec {
        s.parse().unwrap()
    }

    #[test]
    fn constant_function_has_its_value_as_norm() {
        let g = unit(6);
        let c = SampledFunction::constant(g, 2.5).unwrap();
        let w = SampledFunction::from_fn(g, |x| 1.0 + x * x).unwrap();
        for s in ["identity", "power:2", "logbump:1,1", "logbump:2,3", "expm1:1"] {
            let phi = spec(s);
            let n = luxemburg(&LuxemburgQuery::new(&c, &w, DyadicCube::new(2, 1), &phi)).unwrap();
            let expected = 2.5 / phi.inverse(1.0).unwrap();
            assert_relative_eq!(n, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_function_and_zero_forms() {
        let g = unit(4);
        let z = SampledFunction::zeros(g);
        let one = SampledFunction::constant(g, 1.0).unwrap();
        let phi = spec("logbump:1,1");
        let q = LuxemburgQuery::new(&z, &one, DyadicCube::ROOT, &phi);
        assert_eq!(luxemburg(&q).unwrap(), 0.0);
        assert_eq!(equivalent_infimum_form(&q).unwrap(), 0.0);
    }

    #[test]
    fn infimum_form_of_constant() {
        let g = unit(5);
        let c = SampledFunction::constant(g, 3.0).unwrap();
        let one = SampledFunction::constant(g, 1.0).unwrap();
        let phi = spec("logbump:1,2");
        let v = equivalent_infimum_form(&LuxemburgQuery::new(&c, &one, DyadicCube::ROOT, &phi)).unwrap();
        assert!(v <= 6.0 * (1.0 + 1e-9) && v >= 3.0);
    }

    #[test]
    fn non_positive_weight_is_rejected() {
        let g = unit(3);
        let f = SampledFunction::constant(g, 1.0).unwrap();
        let w = SampledFunction::from_fn(g, |x| x - 0.5).unwrap();
        let phi = YoungSpec::Identity;
        assert!(luxemburg(&LuxemburgQuery::new(&f, &w, DyadicCube::ROOT, &phi)).is_err());
    }

    #[test]
    fn maximal_of_half_indicator() {
        let g = unit(8);
        let f = SampledFunction::from_fn(g, |x| if x < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let one = SampledFunction::constant(g, 1.0).unwrap();
        let m = maximal(&f, &one, &YoungSpec::Identity).unwrap();
        for (k, &v) in m.values().iter().enumerate() {
            let expected = if k < 128 { 1.0 } else { 0.5 };
            assert_relative_eq!(v, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn maximal_identity_matches_naive_scan() {
        let g = unit(8);
        let f = SampledFunction::from_fn(g, |x| (13.0 * x).sin() * x).unwrap();
        let one = SampledFunction::constant(g, 1.0).unwrap();
        let m = maximal(&f, &one, &YoungSpec::Identity).unwrap();
        // independent two-loop oracle over cells and levels
        for k in 0..g.len() {
            let mut best = 0.0f64;
            for level in 0..=8u32 {
                let span = 1usize << (8 - level);
                let start = (k / span) * span;
                let avg: f64 = f.values()[start..start + span].iter().map(|v| v.abs()).sum::<f64>() / span as f64;
                best = best.max(avg);
            }
            assert_relative_eq!(m.values()[k], best, max_relative = 1e-12);
        }
    }

    #[test]
    fn maximal_of_constant_and_pointwise_lower_bound() {
        let g = unit(6);
        let w = SampledFunction::from_fn(g, |x| 0.5 + x).unwrap();
        let c = SampledFunction::constant(g, 1.7).unwrap();
        let phi = spec("logbump:1,1");
        for v in maximal(&c, &w, &phi).unwrap().values() {
            assert_relative_eq!(*v, 1.7, max_relative = 1e-12);
        }
        let f = SampledFunction::from_fn(g, |x| (9.0 * x).cos()).unwrap();
        let m = maximal(&f, &w, &phi).unwrap();
        for (a, b) in m.values().iter().zip(f.values()) {
            assert!(*a >= b.abs() * (1.0 - 1e-12));
        }
    }

    #[test]
    fn iterated_maximal_basics() {
        let g = unit(6);
        let one = SampledFunction::constant(g, 1.0).unwrap();
        let f = SampledFunction::from_fn(g, |x| if x > 0.8 { 3.0 } else { 0.1 }).unwrap();
        assert_eq!(
            iterated_maximal(&f, &one, 1).unwrap(),
            maximal(&f, &one, &YoungSpec::Identity).unwrap()
        );
        let c = SampledFunction::constant(g, 2.0).unwrap();
        for v in iterated_maximal(&c, &one, 3).unwrap().values() {
            assert_relative_eq!(*v, 2.0, epsilon = 1e-14);
        }
        assert!(iterated_maximal(&f, &one, 0).is_err());
    }

    #[test]
    fn localization_examples() {
        let g = unit(10);
        let one = SampledFunction::constant(g, 1.0).unwrap();
        let q = DyadicCube::new(4, 5);
        // support inside RQ
        let (a, b) = q.endpoints(&g);
        let inside = SampledFunction::from_fn(g, |x| if x >= a && x < b { 1.0 } else { 0.0 }).unwrap();
        let r = localization_ratio(&inside, &one, &YoungSpec::Identity, q).unwrap();
        assert!(r.degenerate && r.ratio == 1.0);
        let spike = SampledFunction::from_fn(g, |x| if (x - 0.93).abs() < 1e-3 { 50.0 } else { 0.0 }).unwrap();
        let r = localization_ratio(&spike, &one, &YoungSpec::Identity, q).unwrap();
        assert!(!r.degenerate && r.ratio >= 1.0 && r.ratio <= 8.0);
    }

    #[test]
    fn holder_refuses_bad_triple() {
        let g = unit(4);
        let one = SampledFunction::constant(g, 1.0).unwrap();
        let err = holder_check(&one, &one, &one, DyadicCube::ROOT, &spec("identity"), &spec("identity"), &spec("identity"));
        assert!(matches!(err, Err(Error::Precondition { .. })));
    }

    #[test]
    fn holder_zero_factor() {
        let g = unit(4);
        let one = SampledFunction::constant(g, 1.0).unwrap();
        let z = SampledFunction::zeros(g);
        let r = holder_check(&z, &one, &one, DyadicCube::ROOT, &spec("power:2"), &spec("power:2"), &spec("identity"));
        assert_eq!(r.unwrap(), 0.0);
    }
}
