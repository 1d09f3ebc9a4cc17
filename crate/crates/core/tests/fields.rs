use std::f64::consts::{E, PI};

use betaplane::dispersion::{ModeIndex, WaveClass};
use betaplane::eigenbasis::Basis;
use betaplane::fields::{analyze, load_snapshot, read_snapshot, save_snapshot, synthesize, write_snapshot, Grid, ModeCoefficients, ModeLayout, SpectralField, Truncation};
use betaplane::hermite::HermiteContext;
use betaplane::Error;
use num_complex::Complex64 as C64;

fn unit(beta: f64, trunc: Truncation, m: ModeIndex) -> ModeCoefficients {
    ModeCoefficients::unit(ModeLayout::new(beta, trunc), m).unwrap()
}

/// `Σ (1 + k² + β(2n+1))^s |f̂|²`: the harmonic-oscillator norm, diagonal in the Hermite–Fourier basis.
fn oscillator_norm(f: &SpectralField, s: f64) -> f64 {
    let mut sum = 0.0;
    for c in 0..3 {
        for k in -(f.k_max as i32)..=f.k_max as i32 {
            for n in 0..=f.n_max {
                let w = 1.0 + (k * k) as f64 + f.beta * (2 * n + 1) as f64;
                sum += w.powf(s) * f.get(c, n, k).norm_sqr();
            }
        }
    }
    sum.sqrt()
}

#[test]
fn hl_norm_examples() {
    let m = unit(1.0, Truncation::rect(4, 3), ModeIndex { n: 3, k: 2, j: 1 });
    assert!((m.hl_norm(1.0) - 8f64.sqrt()).abs() < 1e-15);
    let basis = Basis::new(E, Truncation::rect(5, 4)).unwrap();
    let r = ModeCoefficients::random(basis.layout.clone(), 9, true);
    assert!((r.hl_norm(0.0) - basis.synthesize(&r).l2_norm()).abs() < 1e-13);
}

#[test]
fn hl_norm_is_equivalent_to_the_oscillator_norm() {
    let beta = 1.4;
    let basis = Basis::new(beta, Truncation::rect(10, 6)).unwrap();
    for s in [0.0, 1.0, 2.0] {
        let (mut lo, mut hi) = (f64::MAX, 0.0f64);
        for seed in 0..100 {
            let mc = ModeCoefficients::random(basis.layout.clone(), seed, true);
            let r = mc.hl_norm(s) / oscillator_norm(&basis.synthesize(&mc), s);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        assert!(hi / lo < 3.0 && lo > 0.2 && hi < 5.0, "s={s}: [{lo}, {hi}]");
    }
}

#[test]
fn tau_weighted_examples() {
    let t = Truncation::rect(3, 3);
    let k = unit(1.0, t, ModeIndex { n: 0, k: 3, j: 0 });
    assert!((k.tau_weighted_norm(1.0) - 10f64.sqrt()).abs() < 1e-14);
    assert!((k.tau_weighted_norm(0.0) - 1.0).abs() < 1e-15);
    let r = unit(1.0, t, ModeIndex { n: 1, k: 1, j: 0 });
    assert!((r.tau_weighted_norm(1.0) - (1.0f64 + 0.25410 * 0.25410).sqrt()).abs() < 1e-5);
    assert!((r.tau_weighted_norm(1.0) - 1.0318).abs() < 1e-4);
}

#[test]
fn tau_weights_match_index_weights_on_fast_waves() {
    let beta = 1.0;
    let layout = ModeLayout::new(beta, Truncation::rect(10, 8));
    for s in [0.5, 1.0, 2.0] {
        let (mut lo, mut hi) = (f64::MAX, 0.0f64);
        for seed in 0..50 {
            let mc = ModeCoefficients::random(layout.clone(), seed, true);
            let mut fast = mc.project(WaveClass::Kelvin);
            fast.axpy(C64::new(1.0, 0.0), &mc.project(WaveClass::Poincare));
            let r = fast.tau_weighted_norm(s) / fast.hl_norm(s);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        assert!(lo > 0.2 && hi < 5.0, "s={s}: [{lo}, {hi}]");
    }
}

#[test]
fn projections_partition_the_state() {
    let layout = ModeLayout::new(E, Truncation::rect(6, 5));
    let mc = ModeCoefficients::random(layout, 3, true);
    let mut sum = ModeCoefficients::zeros(mc.layout.clone(), true);
    for c in WaveClass::ALL {
        let p = mc.project(c);
        assert_eq!(p.project(c).phi, p.phi);
        sum.axpy(C64::new(1.0, 0.0), &p);
    }
    assert_eq!(sum.phi, mc.phi);
    let k = unit(1.0, Truncation::rect(2, 3), ModeIndex { n: 0, k: 2, j: 0 });
    assert_eq!(k.project(WaveClass::Kelvin).phi, k.phi);
    assert_eq!(k.project(WaveClass::Rossby).l2_norm(), 0.0);
}

#[test]
fn kernel_projection_is_geostrophically_balanced() {
    let beta = 1.7;
    let basis = Basis::new(beta, Truncation::rect(8, 4)).unwrap();
    let mc = ModeCoefficients::random(basis.layout.clone(), 12, true);
    let f = basis.synthesize(&mc.project(WaveClass::Geostrophic));
    let ctx = HermiteContext::new(beta, f.n_max).unwrap();
    let half = 14.0 / beta.sqrt();
    let steps = 2000;
    let h = 2.0 * half / steps as f64;
    let (mut u1, mut balance) = (0.0, 0.0);
    for k in -4..=4 {
        for i in 0..=steps {
            let x = -half + i as f64 * h;
            let (mut eta_d, mut u2v, mut u1v) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for n in 0..=f.n_max {
                eta_d += f.get(0, n, k) * ctx.eval_dpsi(n, x).unwrap();
                u2v += f.get(2, n, k) * ctx.eval_psi(n, x).unwrap();
                u1v += f.get(1, n, k) * ctx.eval_psi(n, x).unwrap();
            }
            u1 += u1v.norm_sqr() * h;
            balance += (beta * x * u2v + eta_d).norm_sqr() * h;
        }
    }
    assert_eq!(u1, 0.0);
    assert!(balance.sqrt() <= 1e-9, "{}", balance.sqrt());
}

#[test]
fn filter_examples() {
    let layout = ModeLayout::new(E, Truncation::rect(5, 4));
    let mc = ModeCoefficients::random(layout, 8, false);
    assert_eq!(mc.filter(0.0).phi, mc.phi);
    assert!(mc.filter(0.7).filter(-0.7).distance(&mc) < 1e-12);
    for s in [0.0, 1.0, 2.5] {
        assert!((mc.filter(3.1).hl_norm(s) - mc.hl_norm(s)).abs() < 1e-12 * mc.hl_norm(s));
    }
    let k = unit(1.0, Truncation::rect(1, 1), ModeIndex { n: 0, k: 1, j: 0 });
    let f = k.filter(PI);
    assert!((f.get(ModeIndex { n: 0, k: 1, j: 0 }) + 1.0).norm() < 1e-15);
}

#[test]
fn grid_round_trip() {
    let beta = 2.2;
    let f = SpectralField::random(beta, 10, 5, 4, false);
    let ctx = HermiteContext::new(beta, 10).unwrap();
    let grid = Grid::standard(&ctx, 5);
    let phys = synthesize(&ctx, &f, &grid).unwrap();
    let back = analyze(&ctx, &phys, 10, 5, false).unwrap();
    let err: f64 = back.coeffs.iter().zip(&f.coeffs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!(err <= 1e-9 * f.l2_norm());
}

#[test]
fn real_fields_synthesize_to_real_values() {
    let beta = 1.0;
    let f = SpectralField::random(beta, 6, 3, 5, true);
    let ctx = HermiteContext::new(beta, 6).unwrap();
    let phys = synthesize(&ctx, &f, &Grid::standard(&ctx, 3)).unwrap();
    let worst = phys.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-10);
}

#[test]
fn kernel_mode_is_zonal_with_gaussian_profile() {
    let beta = 1.0;
    let basis = Basis::new(beta, Truncation::rect(2, 2)).unwrap();
    let mc = ModeCoefficients::unit(basis.layout.clone(), ModeIndex { n: 0, k: 0, j: 0 }).unwrap();
    let f = basis.synthesize(&mc);
    let ctx = HermiteContext::new(beta, f.n_max).unwrap();
    let grid = Grid::standard(&ctx, 2);
    let phys = synthesize(&ctx, &f, &grid).unwrap();
    let ratio = phys.at(0, 0, 0).re / ctx.eval_psi(0, grid.x1[0]).unwrap();
    assert!(ratio.abs() > 1e-3);
    for (i, &x) in grid.x1.iter().enumerate() {
        let want = ratio * ctx.eval_psi(0, x).unwrap();
        for m in 0..grid.n2 {
            assert!((phys.at(0, i, m) - want).norm() < 1e-13);
            assert!((phys.at(2, i, m) - want).norm() < 1e-13);
            assert!(phys.at(1, i, m).norm() < 1e-15);
        }
    }
}

#[test]
fn under_resolved_grids_are_rejected() {
    let beta = 1.0;
    let ctx = HermiteContext::new(beta, 4).unwrap();
    let f = SpectralField::random(beta, 4, 3, 1, true);
    let coarse = Grid::standard(&ctx, 2);
    assert!(matches!(synthesize(&ctx, &f, &coarse), Err(Error::Resolution(_))));
    let phys = synthesize(&ctx, &f, &Grid::standard(&ctx, 3)).unwrap();
    assert!(matches!(analyze(&ctx, &phys, 4, 5, true), Err(Error::Resolution(_))));
}

#[test]
fn reality_symmetry() {
    let f = SpectralField::random(1.0, 5, 4, 2, true);
    for c in 0..3 {
        for n in 0..=5 {
            for k in -4..=4 {
                assert_eq!(f.get(c, n, -k), f.get(c, n, k).conj());
            }
        }
    }
}

#[test]
fn ball_truncation_masks_the_rectangle() {
    let t = Truncation::ball(3.0);
    assert_eq!((t.n_max, t.k_max), (9, 3));
    assert!(t.contains(9, 0) && t.contains(5, 2) && !t.contains(6, 2) && t.contains(0, 3) && !t.contains(1, 3));
    let layout = ModeLayout::new(1.0, t);
    let mut mc = ModeCoefficients::random(layout.clone(), 0, true);
    mc.mask();
    for i in 0..layout.len() {
        let m = layout.mode(i);
        if !t.contains(m.n, m.k) {
            assert_eq!(mc.phi[i].norm(), 0.0);
        }
    }
}

#[test]
fn random_states_are_reproducible_and_smooth() {
    let layout = ModeLayout::new(E, Truncation::rect(8, 6));
    let a = ModeCoefficients::random(layout.clone(), 42, true);
    let b = ModeCoefficients::random(layout.clone(), 42, true);
    let c = ModeCoefficients::random(layout, 43, true);
    assert_eq!(a.phi, b.phi);
    assert_ne!(a.phi, c.phi);
    assert!(a.hl_norm(2.0).is_finite() && a.hl_norm(2.0) < 10.0 * a.l2_norm());
}

#[test]
fn snapshot_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("snap.csv");
    let f = SpectralField::random(E, 6, 3, 7, true);
    save_snapshot(&path, &f, 0.125).unwrap();
    let (g, t) = load_snapshot(&path).unwrap();
    assert_eq!(t, 0.125);
    assert_eq!(g.coeffs, f.coeffs);
    assert_eq!((g.beta, g.n_max, g.k_max, g.real), (f.beta, f.n_max, f.k_max, f.real));
}

#[test]
fn malformed_snapshots_are_rejected() {
    let f = SpectralField::random(1.0, 2, 1, 7, false);
    let mut buf = Vec::new();
    write_snapshot(&mut buf, &f, 0.0).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(read_snapshot("not json\n".as_bytes()).is_err());
    let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    assert!(read_snapshot(truncated.as_bytes()).is_err());
    let mut rows: Vec<&str> = text.lines().collect();
    rows[3] = "0,0,0,1.0,abc";
    assert!(read_snapshot(rows.join("\n").as_bytes()).is_err());
    let mut dup: Vec<&str> = text.lines().collect();
    dup.push(dup[2]);
    assert!(read_snapshot(dup.join("\n").as_bytes()).is_err());
}
