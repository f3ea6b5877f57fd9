use std::f64::consts::PI;

use mixedfs::czo::KernelSpec;
use mixedfs::harness::{run, strong_fs_sides, ExperimentConfig, TheoremId};
use mixedfs::orlicz::maximal;
use mixedfs::{Family, Grid, SampledFunction, YoungSpec};

fn dense_hilbert(f: &[f64], xs: &[f64], h: f64) -> Vec<f64> {
    (0..f.len())
        .map(|i| (0..f.len()).filter(|&j| j != i).map(|j| f[j] / (PI * (xs[i] - xs[j]))).sum::<f64>() * h)
        .collect()
}

#[test]
fn strong_fs_sides_match_a_straight_loop() {
    let grid = Grid::new(-1.0, 1.0, 7).unwrap();
    let (xs, h) = (grid.midpoints(), grid.h());
    let f = Family::Bump { c: 0.2, r: 0.3 }.sample(&grid).unwrap();
    let w = Family::RandomWeight { seed: 5, smoothness: 3 }.sample(&grid).unwrap();
    let v = Family::Power { a: 0.4, x0: 0.05 }.sample(&grid).unwrap();
    let b = Family::LogBmo { x0: -0.3 }.sample(&grid).unwrap();
    let (p, eps, e) = (1.4, 0.5, -1.0);

    for m in [0u32, 1] {
        let (lhs, rhs) = strong_fs_sides(&f, &w, &v, &b, p, eps, m, e, &KernelSpec::default()).unwrap();

        let (fv, bv, vv, wv) = (f.values(), b.values(), v.values(), w.values());
        let t: Vec<f64> = if m == 0 {
            dense_hilbert(fv, &xs, h)
        } else {
            let tf = dense_hilbert(fv, &xs, h);
            let bf: Vec<f64> = fv.iter().zip(bv).map(|(a, c)| a * c).collect();
            let tbf = dense_hilbert(&bf, &xs, h);
            (0..fv.len()).map(|i| bv[i] * tf[i] - tbf[i]).collect()
        };
        let nu = SampledFunction::new(grid, vv.iter().map(|x| x.powf(e)).collect()).unwrap();
        let mw = maximal(&w, &nu, &YoungSpec::log_bump(1.0, m as f64 + eps).unwrap()).unwrap();
        let mut expect_l = 0.0;
        let mut expect_r = 0.0;
        for i in 0..fv.len() {
            let weight = vv[i].powf(1.0 - p);
            expect_l += t[i].abs().powf(p) * wv[i] * weight * h;
            expect_r += fv[i].abs().powf(p) * mw.values()[i] * weight * h;
        }
        assert!((lhs - expect_l).abs() <= 1e-10 * expect_l, "m={m}: {lhs} vs {expect_l}");
        assert!((rhs - expect_r).abs() <= 1e-12 * expect_r, "m={m}: {rhs} vs {expect_r}");
    }
}

#[test]
fn every_theorem_runs_on_defaults() {
    for id in TheoremId::ALL {
        let mut cfg = ExperimentConfig::new(id);
        cfg.levels = 6;
        if id.as_str().ends_with("commutator") {
            cfg.params.m = 1;
        }
        let cfg = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        let report = run(&cfg).unwrap_or_else(|e| panic!("{id}: {e}"));
        assert!(report.best_constant.is_finite(), "{id}");
        assert_eq!(report.theorem, id);
    }
}
