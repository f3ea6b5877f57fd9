//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mixedfs::czdecomp::{cz_decompose, verify_decomposition};
use mixedfs::czo::{apply_czo, commutator, KernelSpec};
use mixedfs::harness::{mixed_weak_sides, run, ExperimentConfig};
use mixedfs::orlicz::{iterated_maximal, luxemburg, maximal, maximal_within, weak_type_sides, LuxemburgQuery};
use mixedfs::weights::{bmo_norm, power_weight};
use mixedfs::young::check_bp;
use mixedfs::{DyadicCube, Family, Grid, SampledFunction, YoungSpec};

type Outcome = (bool, String);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn sf(grid: Grid, values: Vec<f64>) -> SampledFunction {
    SampledFunction::new(grid, values).unwrap()
}

/// Piecewise constant on `2^s` dyadic pieces.
fn piecewise(grid: Grid, r: &mut ChaCha8Rng, s: u32, mut draw: impl FnMut(&mut ChaCha8Rng) -> f64) -> SampledFunction {
    let pieces = 1usize << s.min(grid.levels());
    let vals: Vec<f64> = (0..pieces).map(|_| draw(r)).collect();
    let per = grid.len() / pieces;
    sf(grid, (0..grid.len()).map(|i| vals[i / per]).collect())
}

fn random_weight(grid: Grid, r: &mut ChaCha8Rng, spread: f64) -> SampledFunction {
    let s = r.gen_range(0..=grid.levels());
    piecewise(grid, r, s, |r| r.gen_range(-spread..spread).exp())
}

fn random_signed(grid: Grid, r: &mut ChaCha8Rng) -> SampledFunction {
    let s = r.gen_range(1..=grid.levels());
    piecewise(grid, r, s, |r| if r.gen_bool(0.4) { 0.0 } else { r.gen_range(-5.0..5.0) })
}

fn random_cube(grid: Grid, r: &mut ChaCha8Rng) -> DyadicCube {
    let level = r.gen_range(0..=grid.levels());
    DyadicCube::new(level, r.gen_range(0..1usize << level))
}

fn weighted_power_average(f: &[f64], w: &[f64], p: f64) -> f64 {
    let num: f64 = f.iter().zip(w).map(|(x, y)| x.abs().powf(p) * y).sum();
    let den: f64 = w.iter().sum();
    (num / den).powf(1.0 / p)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst = 0.0f64;
    let ps = [1.0, 1.5, 2.0, 3.0];
    for case in 0..200 {
        let grid = Grid::new(0.0, 1.0, r.gen_range(4..=10)).unwrap();
        let f = random_signed(grid, &mut r);
        let w = random_weight(grid, &mut r, 2.0);
        let cube = random_cube(grid, &mut r);
        let p = ps[case % ps.len()];
        let phi = YoungSpec::power(p).unwrap();
        let got = luxemburg(&LuxemburgQuery::new(&f, &w, cube, &phi)).unwrap();
        let cells = cube.cells(&grid);
        let exact = weighted_power_average(&f.values()[cells.clone()], &w.values()[cells], p);
        worst = worst.max(rel(got, exact));
    }
    let secs = start.elapsed().as_secs_f64();
    (worst <= 1e-9 && secs < 10.0, format!("200 cases, worst relative error {worst:.2e} (tol 1e-9), {secs:.2}s (limit 10s)"))
}

fn criterion_2() -> Outcome {
    let mut r = rng(202);
    let phis = [
        YoungSpec::Identity,
        YoungSpec::power(1.5).unwrap(),
        YoungSpec::log_bump(1.0, 1.0).unwrap(),
        YoungSpec::log_bump(2.0, 0.5).unwrap(),
        YoungSpec::exp_minus_one(1.0).unwrap(),
    ];
    let mut worst = 0.0f64;
    for case in 0..100 {
        let grid = Grid::new(0.0, 1.0, r.gen_range(4..=9)).unwrap();
        let s = r.gen_range(1..=grid.levels());
        let f = piecewise(grid, &mut r, s, |r| if r.gen_bool(0.3) { 0.0 } else { r.gen_range(0.0..3.0) });
        let w = random_weight(grid, &mut r, 1.0);
        let cube = random_cube(grid, &mut r);
        let rr = if case % 2 == 0 { 2.0 } else { 3.0 };
        let phi = &phis[case % phis.len()];
        let psi = YoungSpec::power_arg(phi.clone(), rr).unwrap();
        let fr = f.powf(rr).unwrap();
        let lhs = luxemburg(&LuxemburgQuery::new(&fr, &w, cube, phi)).unwrap();
        let rhs = luxemburg(&LuxemburgQuery::new(&f, &w, cube, &psi)).unwrap().powf(rr);
        worst = worst.max(rel(lhs, rhs));
    }
    (worst <= 1e-8, format!("100 cases, r in {{2,3}}, worst relative error {worst:.2e} (tol 1e-8)"))
}

fn criterion_3() -> Outcome {
    let phis = [YoungSpec::Identity, YoungSpec::log_bump(1.0, 1.0).unwrap(), YoungSpec::power(2.0).unwrap()];
    let results: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|case| {
            let mut r = rng(303 + case);
            let grid = Grid::new(0.0, 1.0, r.gen_range(6..=10)).unwrap();
            let f = random_signed(grid, &mut r);
            let w = random_weight(grid, &mut r, 2.0);
            let phi = &phis[case as usize % phis.len()];
            let root = if case % 2 == 0 { DyadicCube::ROOT } else { random_cube(grid, &mut r) };
            let mv = maximal_within(&f, &w, phi, root).unwrap();
            let top = f.max_abs().max(1e-3);
            let mut worst = 0.0f64;
            for k in -24..=6 {
                let lam = top * 2f64.powf(k as f64 / 2.0 + r.gen_range(0.0..0.5));
                let (lhs, rhs) = weak_type_sides(&f, &w, phi, root, &mv, lam, false).unwrap();
                if rhs > 0.0 {
                    worst = worst.max(lhs / rhs);
                } else if lhs > 0.0 {
                    worst = f64::INFINITY;
                }
            }
            worst
        })
        .collect();
    let worst = results.iter().copied().fold(0.0, f64::max);
    (worst <= 1.0 + 1e-9, format!("50 cases x 31 levels, measured constant {worst:.12} (bound 1 + 1e-9)"))
}

/// Maximal dyadic cubes with `v`-average of `f` above `lambda`, by direct summation.
fn oracle_cz_cubes(f: &[f64], v: &[f64], grid: Grid, lambda: f64) -> BTreeSet<DyadicCube> {
    let above = |q: DyadicCube| {
        let c = q.cells(&grid);
        let num: f64 = f[c.clone()].iter().zip(&v[c.clone()]).map(|(a, b)| a * b).sum();
        let den: f64 = v[c].iter().sum();
        num / den > lambda
    };
    let mut out = BTreeSet::new();
    for level in 0..=grid.levels() {
        for index in 0..1usize << level {
            let q = DyadicCube::new(level, index);
            if above(q) && (1..=level).all(|k| !above(q.ancestor(k).unwrap())) {
                out.insert(q);
            }
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut problems = Vec::new();
    let mut r = rng(404);
    let mut worst_recon = 0.0f64;
    let mut worst_mean = 0.0f64;
    let mut selected = 0usize;
    for case in 0..100 {
        let grid = Grid::new(0.0, 1.0, r.gen_range(3..=9)).unwrap();
        let s = r.gen_range(1..=grid.levels());
        let f = piecewise(grid, &mut r, s, |r| if r.gen_bool(0.5) { 0.0 } else { r.gen_range(0.0..1.0f64).powi(3) * 20.0 });
        let v = if case % 3 == 0 {
            power_weight(&grid, r.gen_range(-0.5..1.0), r.gen_range(0.0..1.0)).unwrap()
        } else {
            random_weight(grid, &mut r, 1.5)
        };
        let mean = f.integral_against(&v).unwrap() / v.values().iter().sum::<f64>() / grid.h();
        let lambda = mean.max(1e-3) * r.gen_range(0.5..4.0);
        let d = cz_decompose(&f, &v, lambda).unwrap();
        selected += d.cubes.len();

        let expected = oracle_cz_cubes(f.values(), v.values(), grid, lambda);
        let got: BTreeSet<DyadicCube> = d.cubes.iter().copied().collect();
        if got != expected || got.len() != d.cubes.len() {
            problems.push(format!("case {case}: selected cubes differ from brute force"));
        }
        let mut cover = vec![0u32; grid.len()];
        for q in &d.cubes {
            for c in q.cells(&grid) {
                cover[c] += 1;
            }
        }
        if cover.iter().any(|&c| c > 1) {
            problems.push(format!("case {case}: cubes overlap"));
        }
        let bad = d.bad_sum();
        for i in 0..grid.len() {
            worst_recon = worst_recon.max((f.values()[i] - d.good.values()[i] - bad[i]).abs());
        }
        for part in &d.bad_parts {
            let c = part.cube.cells(&grid);
            let wv = &v.values()[c.clone()];
            let integral: f64 = part.values.iter().zip(wv).map(|(a, b)| a * b).sum();
            let scale: f64 = f.values()[c].iter().zip(wv).map(|(a, b)| a.abs() * b).sum();
            worst_mean = worst_mean.max(integral.abs() / scale);
        }
        let v_omega: f64 = (0..grid.len()).filter(|&i| cover[i] > 0).map(|i| v.values()[i]).sum::<f64>() * grid.h();
        if !(v_omega <= f.integral_against(&v).unwrap() / lambda) {
            problems.push(format!("case {case}: v(Omega) exceeds the Chebyshev bound"));
        }
        let report = verify_decomposition(&d, &f, &v).unwrap();
        if !report.all_pass() {
            problems.push(format!("case {case}: verify_decomposition rejected a fresh decomposition"));
        }
    }
    if worst_recon > 1e-12 {
        problems.push(format!("reconstruction error {worst_recon:.2e}"));
    }
    if worst_mean > 1e-10 {
        problems.push(format!("mean of a bad part {worst_mean:.2e}"));
    }

    let grid = Grid::new(0.0, 1.0, 10).unwrap();
    let f = SampledFunction::from_fn(grid, |x| if x < 0.25 { 4.0 } else { 0.0 }).unwrap();
    let one = SampledFunction::constant(grid, 1.0).unwrap();
    let d = cz_decompose(&f, &one, 1.0).unwrap();
    let half = DyadicCube::new(1, 0).cells(&grid);
    let hand_ok = d.cubes == [DyadicCube::new(1, 0)]
        && d.good.values()[half.clone()].iter().all(|&g| g == 2.0)
        && d.good.values()[half.end..].iter().all(|&g| g == 0.0);
    if !hand_ok {
        problems.push("hand example: expected the single cube [0, 1/2) with g = 2 on it".into());
    }

    let detail = format!(
        "100 cases ({selected} cubes), reconstruction {worst_recon:.1e} (tol 1e-12), mean-zero {worst_mean:.1e} (tol 1e-10), hand example {}",
        if hand_ok { "ok" } else { "wrong" }
    );
    report(problems, detail)
}

fn report(problems: Vec<String>, detail: String) -> Outcome {
    if problems.is_empty() {
        (true, detail)
    } else {
        (false, format!("{detail}; {}", problems.join("; ")))
    }
}

fn criterion_5() -> Outcome {
    let kernel = KernelSpec::default();
    let grid = Grid::new(-2.0, 2.0, 12).unwrap();
    let a = 0.5;
    let f = SampledFunction::from_fn(grid, |x| if x.abs() <= a { 1.0 } else { 0.0 }).unwrap();
    let t = apply_czo(&f, &kernel).unwrap();
    let mut worst_oracle = 0.0f64;
    for (i, x) in grid.midpoints().into_iter().enumerate() {
        if (x.abs() - a).abs() <= 4.0 * grid.h() {
            continue;
        }
        let exact = ((x + a) / (x - a)).abs().ln() / PI;
        if exact.abs() > 1e-14 {
            worst_oracle = worst_oracle.max((t.values()[i] - exact).abs() / exact.abs());
        }
    }

    let mut r = rng(505);
    let g10 = Grid::new(0.0, 1.0, 10).unwrap();
    let mut worst_skew = 0.0f64;
    let mut worst_binom = 0.0f64;
    for _ in 0..5 {
        let f = random_signed(g10, &mut r);
        let g = random_signed(g10, &mut r);
        let (tf, tg) = (apply_czo(&f, &kernel).unwrap(), apply_czo(&g, &kernel).unwrap());
        let dot = |a: &SampledFunction, b: &SampledFunction| a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>();
        let norm = |a: &SampledFunction| dot(a, a).sqrt();
        let scale = norm(&tf) * norm(&g) + norm(&f) * norm(&tg);
        worst_skew = worst_skew.max((dot(&tf, &g) + dot(&f, &tg)).abs() / scale);

        let b = SampledFunction::from_fn(g10, |x| (1.0 / (x - 0.37).abs()).ln()).unwrap();
        let c2 = commutator(&f, &b, 2, &kernel).unwrap();
        let tbf = apply_czo(&f.mul(&b).unwrap(), &kernel).unwrap();
        let tbbf = apply_czo(&f.mul(&b).unwrap().mul(&b).unwrap(), &kernel).unwrap();
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..g10.len() {
            let bi = b.values()[i];
            let terms = [bi * bi * tf.values()[i], 2.0 * bi * tbf.values()[i], tbbf.values()[i]];
            let expected = terms[0] - terms[1] + terms[2];
            err = err.max((c2.values()[i] - expected).abs());
            scale = scale.max(terms.iter().map(|x| x.abs()).fold(0.0, f64::max));
        }
        worst_binom = worst_binom.max(err / scale);
    }
    let pass = worst_oracle <= 0.02 && worst_skew <= 1e-10 && worst_binom <= 1e-10;
    (
        pass,
        format!(
            "indicator oracle {worst_oracle:.4} (tol 0.02), skew-adjointness {worst_skew:.1e} (tol 1e-10), m=2 binomial {worst_binom:.1e} (tol 1e-10)"
        ),
    )
}

fn band(k: u32, levels: u32, fs: &[Family]) -> (f64, f64) {
    let grid = Grid::new(0.0, 1.0, levels).unwrap();
    let one = SampledFunction::constant(grid, 1.0).unwrap();
    let phi = YoungSpec::log_bump(1.0, k as f64).unwrap();
    fs.par_iter()
        .map(|fam| {
            let f = fam.sample(&grid).unwrap();
            let iter = iterated_maximal(&f, &one, k + 1).unwrap();
            let orl = maximal(&f, &one, &phi).unwrap();
            iter.values()
                .iter()
                .zip(orl.values())
                .map(|(a, b)| a / b)
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)))
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

fn criterion_6() -> Outcome {
    let mut r = rng(606);
    let fs: Vec<Family> = (0..20u64)
        .map(|i| match i % 4 {
            0 | 1 => Family::RandomPiecewise { seed: 6000 + i, pieces: 1 << r.gen_range(1..=8) },
            2 => Family::Tent { c: r.gen_range(0.1..0.9), r: r.gen_range(0.01..0.3) },
            _ => Family::Bump { c: r.gen_range(0.1..0.9), r: r.gen_range(0.01..0.3) },
        })
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [1, 2] {
        let (lo10, hi10) = band(k, 10, &fs);
        let (lo12, hi12) = band(k, 12, &fs);
        let (dlo, dhi) = (rel(lo10, lo12), rel(hi10, hi12));
        ok &= dlo < 0.25 && dhi < 0.25 && lo10 > 0.0 && hi10.is_finite();
        parts.push(format!("k={k}: L=10 [{lo10:.4}, {hi10:.4}], L=12 [{lo12:.4}, {hi12:.4}], endpoint change {:.1}%/{:.1}%", 100.0 * dlo, 100.0 * dhi));
    }
    (ok, format!("{} (limit 25%)", parts.join("; ")))
}

fn two_weight_ratio(levels: u32, a: f64, q: f64, u: &Family) -> f64 {
    let grid = Grid::new(-1.0, 1.0, levels).unwrap();
    let p = 0.5 * (1.0 + q);
    let phi = YoungSpec::log_bump(1.0, 1.0).unwrap();
    let v = power_weight(&grid, a, 0.0).unwrap();
    let u = u.sample(&grid).unwrap();
    let one = SampledFunction::constant(grid, 1.0).unwrap();
    let vp = v.map(|x| x.powf(1.0 - p)).unwrap();
    let num = maximal(&u.mul(&vp).unwrap(), &one, &phi).unwrap();
    let den = maximal(&u, &v.map(|x| x.powf(1.0 - q)).unwrap(), &phi).unwrap().mul(&vp).unwrap();
    num.values().iter().zip(den.values()).map(|(a, b)| a / b).fold(0.0, f64::max)
}

fn criterion_7() -> Outcome {
    let mut cases = Vec::new();
    for a in [0.0, 0.2, 0.4] {
        for q in [1.5, 2.0] {
            for i in 0..20u64 {
                cases.push((a, q, Family::RandomWeight { seed: 7000 + i, smoothness: 1 + (i % 8) as u32 }));
            }
        }
    }
    let results: Vec<(f64, f64)> =
        cases.par_iter().map(|(a, q, u)| (two_weight_ratio(10, *a, *q, u), two_weight_ratio(11, *a, *q, u))).collect();
    let finite = results.iter().all(|(x, y)| x.is_finite() && y.is_finite());
    let worst = results.iter().map(|(x, y)| (x / y).max(y / x)).fold(1.0, f64::max);
    let largest = results.iter().map(|(x, y)| x.max(*y)).fold(0.0, f64::max);
    (
        finite && worst <= 1.5,
        format!("{} cases, largest ratio {largest:.3}, worst L=10/L=11 drift {worst:.4}x (limit 1.5x)", results.len()),
    )
}

fn config_path(name: &str) -> String {
    format!("{}/../../configs/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn load_config(name: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&std::fs::read_to_string(config_path(name)).unwrap()).unwrap()
}

fn sup_ratio(sides: &[(f64, f64)]) -> f64 {
    sides.iter().filter(|(_, r)| *r > 0.0).map(|(l, r)| l / r).fold(0.0, f64::max)
}

fn dense_hilbert(f: &[f64], xs: &[f64], h: f64) -> Vec<f64> {
    (0..f.len())
        .map(|i| (0..f.len()).filter(|&j| j != i).map(|j| f[j] / (PI * (xs[i] - xs[j]))).sum::<f64>() * h)
        .collect()
}

fn log_bump(eps: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| if t <= 1.0 { t } else { t * (1.0 + t.ln()).powf(eps) }
}

/// Unweighted Luxemburg average by plain bisection.
fn bisect_norm(f: &[f64], phi: &dyn Fn(f64) -> f64) -> f64 {
    let top = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if top == 0.0 {
        return 0.0;
    }
    let mean = |lam: f64| f.iter().map(|x| phi(x.abs() / lam)).sum::<f64>() / f.len() as f64;
    let (mut lo, mut hi) = (0.0, top);
    while mean(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn brute_maximal(f: &[f64], levels: u32, phi: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0f64; n];
    for level in 0..=levels {
        let side = n >> level;
        for q in 0..1usize << level {
            let cells = q * side..(q + 1) * side;
            let norm = bisect_norm(&f[cells.clone()], phi);
            for c in cells {
                out[c] = out[c].max(norm);
            }
        }
    }
    out
}

fn brute_bmo(b: &[f64], levels: u32) -> f64 {
    let n = b.len();
    let mut sup = 0.0f64;
    for level in 0..=levels {
        let side = n >> level;
        for q in 0..1usize << level {
            let s = &b[q * side..(q + 1) * side];
            let avg = s.iter().sum::<f64>() / side as f64;
            sup = sup.max(s.iter().map(|x| (x - avg).abs()).sum::<f64>() / side as f64);
        }
    }
    sup
}

fn criterion_8() -> Outcome {
    let mut problems = Vec::new();
    let kernel = KernelSpec::default();

    let mut sups = Vec::new();
    for name in ["mixed_czo", "mixed_commutator"] {
        let rep = run(&load_config(name)).unwrap();
        sups.push(format!("{name} sup {:.4}", rep.best_constant));
        if !rep.best_constant.is_finite() || rep.points.iter().any(|p| p.ratio.is_some_and(|r| !r.is_finite())) {
            problems.push(format!("{name}: non-finite ratio"));
        }
        if rep.points.iter().any(|p| p.rhs == 0.0 && p.lhs != 0.0) || !rep.violations.is_empty() {
            problems.push(format!("{name}: positive left side with zero right side"));
        }
    }

    let grid = Grid::new(-1.0, 1.0, 9).unwrap();
    let mut r = rng(808);
    let lambdas: Vec<f64> = (-12..=8).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
    let mut worst_scale = 0.0f64;
    let zero_b = SampledFunction::zeros(grid);
    for _ in 0..5 {
        let f = random_signed(grid, &mut r);
        let u = random_weight(grid, &mut r, 1.0);
        let v = power_weight(&grid, r.gen_range(-0.3..0.6), 0.1).unwrap();
        let base = sup_ratio(&mixed_weak_sides(&f, &u, &v, &zero_b, 0, 1.0, -1.0, 0.0, &lambdas, &kernel).unwrap());
        for c in [1e-3, 3.7, 250.0] {
            let scaled: Vec<f64> = lambdas.iter().map(|l| l * c).collect();
            let fc = f.scale(c).unwrap();
            let s1 = sup_ratio(&mixed_weak_sides(&fc, &u, &v, &zero_b, 0, 1.0, -1.0, 0.0, &scaled, &kernel).unwrap());
            let uc = u.scale(c).unwrap();
            let s2 = sup_ratio(&mixed_weak_sides(&f, &uc, &v, &zero_b, 0, 1.0, -1.0, 0.0, &lambdas, &kernel).unwrap());
            worst_scale = worst_scale.max(rel(s1, base)).max(rel(s2, base));
        }
    }
    if worst_scale > 1e-10 {
        problems.push(format!("scaling invariance {worst_scale:.2e}"));
    }

    let mut zero_cases = 0;
    let b = Family::LogBmo { x0: 0.3 }.sample(&grid).unwrap();
    let f = random_signed(grid, &mut r);
    let u = random_weight(grid, &mut r, 1.0);
    let v = random_weight(grid, &mut r, 1.0);
    let zero = SampledFunction::zeros(grid);
    for m in [0, 1] {
        for (ff, uu) in [(&zero, &u), (&f, &zero)] {
            for (l, rr) in mixed_weak_sides(ff, uu, &v, &b, m, 1.0, -1.0, 1.0, &lambdas, &kernel).unwrap() {
                zero_cases += 1;
                if rr != 0.0 || l != 0.0 {
                    problems.push(format!("m={m}: zero data gave lhs {l}, rhs {rr}"));
                }
            }
        }
    }

    let g8 = Grid::new(-1.0, 1.0, 8).unwrap();
    let xs = g8.midpoints();
    let h = g8.h();
    let one = SampledFunction::constant(g8, 1.0).unwrap();
    let mut worst_lhs = 0.0f64;
    let mut worst_rhs = 0.0f64;
    for case in 0..4 {
        let f = random_signed(g8, &mut r);
        let u = random_weight(g8, &mut r, 1.5);
        let b = if case % 2 == 0 {
            Family::LogBmo { x0: 0.3 }.sample(&g8).unwrap()
        } else {
            piecewise(g8, &mut r, 4, |r| r.gen_range(-1.0..1.0))
        };
        let (fv, uv, bv) = (f.values(), u.values(), b.values());
        let norm = brute_bmo(bv, g8.levels());
        let core_norm = bmo_norm(&b).unwrap().constant;
        worst_rhs = worst_rhs.max(rel(norm, core_norm));
        for m in [0u32, 1] {
            let tb: Vec<f64> = if m == 0 {
                dense_hilbert(fv, &xs, h)
            } else {
                let tf = dense_hilbert(fv, &xs, h);
                let bf: Vec<f64> = fv.iter().zip(bv).map(|(x, y)| x * y).collect();
                let tbf = dense_hilbert(&bf, &xs, h);
                (0..fv.len()).map(|i| bv[i] * tf[i] - tbf[i]).collect()
            };
            let phi_outer = log_bump(m as f64);
            let mu = brute_maximal(uv, g8.levels(), &log_bump(m as f64 + 1.0));
            let ours = mixed_weak_sides(&f, &u, &one, &b, m, 1.0, -1.0, norm, &lambdas, &kernel).unwrap();
            for (&lam, (l, rr)) in lambdas.iter().zip(ours) {
                let lhs: f64 = (0..fv.len()).filter(|&i| tb[i].abs() > lam).map(|i| uv[i]).sum::<f64>() * h;
                let rhs: f64 = if m == 0 {
                    (0..fv.len()).map(|i| fv[i].abs() * mu[i]).sum::<f64>() * h / lam
                } else {
                    (0..fv.len()).map(|i| phi_outer(norm * fv[i].abs() / lam) * mu[i]).sum::<f64>() * h
                };
                worst_lhs = worst_lhs.max(rel(l, lhs));
                worst_rhs = worst_rhs.max(rel(rr, rhs));
            }
        }
    }
    if worst_lhs > 1e-10 || worst_rhs > 1e-10 {
        problems.push(format!("unweighted reduction differs: lhs {worst_lhs:.2e}, rhs {worst_rhs:.2e}"));
    }

    let detail = format!(
        "{}; scaling invariance {worst_scale:.1e} (tol 1e-10); {zero_cases} zero-data points clean; v=1 vs independent evaluation lhs {worst_lhs:.1e}, rhs {worst_rhs:.1e} (tol 1e-10)",
        sups.join(", ")
    );
    report(problems, detail)
}

fn criterion_9() -> Outcome {
    let mut problems = Vec::new();
    let bp_power = check_bp(&YoungSpec::power(2.0).unwrap(), 2.0).unwrap();
    let bp_log = check_bp(&YoungSpec::log_bump(1.0, 1.0).unwrap(), 2.0).unwrap();
    if bp_power.in_bp {
        problems.push("Power(2) accepted as a B_2 function".into());
    }
    if !bp_log.in_bp {
        problems.push("t log(e+t) rejected as a B_2 function".into());
    }
    let bp_run = run(&load_config("bp_maximal_characterization")).unwrap();
    let mut cfg = load_config("bp_maximal_characterization");
    cfg.params.phi = YoungSpec::power(2.0).unwrap();
    let bp_neg = run(&cfg).unwrap();
    if bp_run.extras.get("in_bp") != Some(&1.0) || bp_neg.extras.get("in_bp") != Some(&0.0) {
        problems.push("bp experiment does not flag membership correctly".into());
    }

    let kernel = KernelSpec::default();
    let grid = Grid::new(0.0, 1.0, 10).unwrap();
    let mut r = rng(909);
    let mut worst_comm = 0.0f64;
    for m in 1..=3 {
        let f = random_signed(grid, &mut r);
        let b = SampledFunction::constant(grid, r.gen_range(-5.0..5.0)).unwrap();
        let scale = apply_czo(&f, &kernel).unwrap().max_abs() * b.max_abs().powi(m as i32);
        worst_comm = worst_comm.max(commutator(&f, &b, m, &kernel).unwrap().max_abs() / scale);
    }
    if worst_comm > 1e-12 {
        problems.push(format!("constant-b commutator is {worst_comm:.2e}"));
    }

    let f = piecewise(grid, &mut r, 6, |r| r.gen_range(0.0..4.0));
    let v = random_weight(grid, &mut r, 1.0);
    let d = cz_decompose(&f, &v, 2.5).unwrap();
    let fails = |d: &mixedfs::czdecomp::Decomposition, name: &str| {
        let rep = verify_decomposition(d, &f, &v).unwrap();
        !rep.all_pass() && !rep.get(name).unwrap().pass
    };
    let mut tampered = 0;
    if d.cubes.len() >= 2 {
        let mut dropped = d.clone();
        dropped.cubes.pop();
        dropped.bad_parts.pop();
        dropped.weighted_averages.pop();
        tampered += 1;
        if !fails(&dropped, "reconstruction") {
            problems.push("dropping a cube went unnoticed".into());
        }
    } else {
        problems.push("tamper fixture selected fewer than two cubes".into());
    }
    if let Some(i) = d.omega.iter().position(|&m| !m) {
        let mut shifted = d.clone();
        let mut g = shifted.good.values().to_vec();
        g[i] += 1e-6;
        shifted.good = SampledFunction::new(grid, g).unwrap();
        tampered += 1;
        if !fails(&shifted, "good_equals_f_off_omega") {
            problems.push("changing g off Omega went unnoticed".into());
        }
    }
    if let Some(&q) = d.cubes.iter().find(|q| q.level > 0) {
        let mut grown = d.clone();
        let parent = q.parent().unwrap();
        let pos = grown.cubes.iter().position(|c| *c == q).unwrap();
        grown.cubes[pos] = parent;
        tampered += 1;
        if verify_decomposition(&grown, &f, &v).unwrap().all_pass() {
            problems.push("replacing a cube by its parent went unnoticed".into());
        }
    }

    let detail = format!(
        "Power(2) in B_2: {} (integral {:.3e}); constant-b commutator {worst_comm:.1e} (tol 1e-12); {tampered} tampered decompositions rejected",
        bp_power.in_bp, bp_power.truncated_integral
    );
    report(problems, detail)
}

const ALL_CONFIGS: [&str; 12] = [
    "mixed_czo",
    "mixed_commutator",
    "strong_fs",
    "maximal_weak_type",
    "composition",
    "pointwise_two_weight",
    "a_infty_membership",
    "a1_self_improve",
    "coifman",
    "coifman_commutator",
    "bp_maximal_characterization",
    "localization",
];

fn criterion_10() -> Outcome {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut differing = Vec::new();
    for name in ALL_CONFIGS {
        let cfg = load_config(name);
        let a = run(&cfg).unwrap().to_json();
        let b = run(&cfg).unwrap().to_json();
        let c = single.install(|| run(&cfg).unwrap().to_json());
        if a != b || a != c {
            differing.push(name);
        }
    }
    (
        differing.is_empty(),
        format!("{} configs, 3 runs each (one single-threaded), differing: {:?}", ALL_CONFIGS.len(), differing),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "Luxemburg norm vs closed form", criterion_1),
        (2, "norms of powers", criterion_2),
        (3, "local weak type of M_Phi", criterion_3),
        (4, "CZ decomposition invariants", criterion_4),
        (5, "Hilbert transform oracle", criterion_5),
        (6, "iterated maximal vs Orlicz maximal", criterion_6),
        (7, "pointwise two-weight bound", criterion_7),
        (8, "mixed weak type", criterion_8),
        (9, "negative controls", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {n} ({name}): {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
