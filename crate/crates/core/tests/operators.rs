use std::f64::consts::{E, PI};

use betaplane::dispersion::ModeIndex;
use betaplane::eigenbasis::{build_mode, Overflow};
use betaplane::fields::{ModeCoefficients, SpectralField, Truncation};
use betaplane::hermite::HermiteContext;
use betaplane::operators::{
    alpha, cache_file, cached_tensor, context_for, corrector, delta_prime_field, kernel_coupling_quadrature,
    q_apply_quadrature, resonant_identity_rhs, DiffusionMatrix, GeostrophicDiffusion, InteractionTensor, TensorBuilder,
    TensorKind,
};
use betaplane::resonance::ResonantSet;
use betaplane::{Basis, Error, WaveClass};
use num_complex::Complex64;

fn rel(a: &ModeCoefficients, b: &ModeCoefficients) -> f64 {
    a.distance(b) / a.l2_norm().max(b.l2_norm()).max(1e-300)
}

fn setup(beta: f64, trunc: Truncation) -> (Basis, HermiteContext) {
    let basis = Basis::new(beta, trunc).unwrap();
    let ctx = context_for(&basis).unwrap();
    (basis, ctx)
}

fn m(n: usize, k: i32, j: i8) -> ModeIndex {
    ModeIndex { n, k, j }
}

#[test]
fn kelvin_self_interaction_closed_form() {
    let (basis, ctx) = setup(1.0, Truncation::rect(2, 2));
    let tb = TensorBuilder::new(&ctx, &basis).unwrap();
    let l = &basis.layout;
    let k1 = l.index(m(0, 1, 0)).unwrap();
    let k2 = l.index(m(0, 2, 0)).unwrap();
    // Q(K₁, K₁) = (2i, 0, i)·ψ₀²e^{2ix₂}/(4π); project on K₂ and use ∫ψ₀³ = √(2/3)π^{-1/4}.
    let t000 = (2.0f64 / 3.0).sqrt() * PI.powf(-0.25);
    let want = Complex64::new(0.0, 3.0 * 2.0 * PI * (4.0 * PI).powf(-1.5) * t000);
    assert!((tb.entry(k2, k1, k1) - want).norm() < 1e-14);
    // Fourier selection: nothing lands at k = 1.
    assert_eq!(tb.entry(k1, k1, k1), Complex64::new(0.0, 0.0));
}

#[test]
fn tensor_matches_quadrature_route() {
    let (basis, ctx) = setup(E, Truncation::rect(4, 3));
    let full = TensorBuilder::new(&ctx, &basis).unwrap().full();
    for seed in 0..3 {
        let x = ModeCoefficients::random(basis.layout.clone(), seed, true);
        let y = ModeCoefficients::random(basis.layout.clone(), seed + 100, false);
        let a = full.q_apply(&x, &y).unwrap();
        let b = q_apply_quadrature(&ctx, &basis, &x, &y).unwrap();
        assert!(rel(&a, &b) < 1e-10, "seed {seed}: {:e}", rel(&a, &b));
    }
}

#[test]
fn tensor_is_symmetric_and_selective() {
    let (basis, ctx) = setup(1.3, Truncation::rect(3, 2));
    let full = TensorBuilder::new(&ctx, &basis).unwrap().full();
    let l = &basis.layout;
    for (a, b, c, v) in full.entries() {
        assert_eq!(l.mode(a).k, l.mode(b).k + l.mode(c).k);
        assert_eq!(full.get(a, c, b), v);
    }
}

#[test]
fn zero_input_gives_zero() {
    let (basis, ctx) = setup(1.0, Truncation::rect(3, 2));
    let full = TensorBuilder::new(&ctx, &basis).unwrap().full();
    let z = ModeCoefficients::zeros(basis.layout.clone(), true);
    let x = ModeCoefficients::random(basis.layout.clone(), 3, true);
    assert_eq!(full.q_apply(&z, &x).unwrap().l2_norm(), 0.0);
    assert_eq!(full.q_apply(&x, &z).unwrap().l2_norm(), 0.0);
}

#[test]
fn mismatched_layouts_rejected() {
    let (basis, ctx) = setup(1.0, Truncation::rect(3, 2));
    let full = TensorBuilder::new(&ctx, &basis).unwrap().full();
    let other = Basis::new(1.1, Truncation::rect(3, 2)).unwrap();
    let x = ModeCoefficients::random(other.layout.clone(), 3, true);
    assert!(matches!(full.q_apply(&x, &x), Err(Error::Configuration(_))));
    let stale = ResonantSet::for_layout(&other.layout, 1e-9).unwrap();
    let y = ModeCoefficients::random(basis.layout.clone(), 3, true);
    assert!(matches!(full.q_l_apply(&stale, &y, &y), Err(Error::Configuration(_))));
}

#[test]
fn limit_form_spares_kernel_and_energy() {
    let (basis, ctx) = setup(E, Truncation::rect(4, 3));
    let tb = TensorBuilder::new(&ctx, &basis).unwrap();
    let set = ResonantSet::for_layout(&basis.layout, 1e-9).unwrap();
    let ql = tb.resonant(&set).unwrap();
    let full = tb.full();
    for seed in 0..10 {
        let x = ModeCoefficients::random(basis.layout.clone(), seed, true);
        let q = ql.q_apply(&x, &x).unwrap();
        assert!(q.project(WaveClass::Geostrophic).l2_norm() <= 1e-10 * q.l2_norm().max(1.0));
        assert!(x.inner(&q).norm() <= 1e-14);
        // Same answer from the full tensor with the resonant mask.
        let q2 = full.q_l_apply(&set, &x, &x).unwrap();
        assert!(rel(&q, &q2) < 1e-13);
    }
}

#[test]
fn geostrophic_self_interaction() {
    let (basis, ctx) = setup(E, Truncation::rect(5, 2));
    let tb = TensorBuilder::new(&ctx, &basis).unwrap();
    let set = ResonantSet::for_layout(&basis.layout, 1e-9).unwrap();
    let g = ModeCoefficients::unit(basis.layout.clone(), m(2, 0, 0)).unwrap();
    let q = tb.full().q_apply(&g, &g).unwrap();
    assert!(q.phi.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    let ql = tb.resonant(&set).unwrap().q_apply(&g, &g).unwrap();
    assert!(ql.project(WaveClass::Geostrophic).l2_norm() <= 1e-12);
}

#[test]
fn rossby_inputs_have_no_limit_interaction() {
    let (basis, ctx) = setup(E, Truncation::rect(4, 3));
    let set = ResonantSet::for_layout(&basis.layout, 1e-9).unwrap();
    let ql = TensorBuilder::new(&ctx, &basis).unwrap().resonant(&set).unwrap();
    for seed in 0..5 {
        let x = ModeCoefficients::random(basis.layout.clone(), seed, true).project(WaveClass::Rossby);
        assert!(ql.q_apply(&x, &x).unwrap().l2_norm() <= 1e-13);
    }
}

#[test]
fn kelvin_sector_is_a_convolution() {
    let (basis, ctx) = setup(E, Truncation::rect(3, 4));
    let set = ResonantSet::for_layout(&basis.layout, 1e-9).unwrap();
    let ql = TensorBuilder::new(&ctx, &basis).unwrap().resonant(&set).unwrap();
    let l = basis.layout.clone();
    let x = ModeCoefficients::random(l.clone(), 7, false).project(WaveClass::Kelvin);
    let y = ModeCoefficients::random(l.clone(), 8, false).project(WaveClass::Kelvin);
    let got = ql.q_apply(&x, &y).unwrap();
    let gamma = 2.0 * PI * (4.0 * PI).powf(-1.5) * ctx.triple_product(0, 0, 0).unwrap();
    let kmax: i32 = 4;
    let mut want = ModeCoefficients::zeros(l.clone(), false);
    for kc in -kmax..=kmax {
        if kc == 0 {
            continue;
        }
        let mut s = Complex64::new(0.0, 0.0);
        for ka in -kmax..=kmax {
            let kb = kc - ka;
            if ka == 0 || kb == 0 || kb.abs() > kmax {
                continue;
            }
            s += x.get(m(0, ka, 0)) * y.get(m(0, kb, 0));
        }
        want.phi[l.index(m(0, kc, 0)).unwrap()] = s * Complex64::new(0.0, 1.5 * kc as f64 * gamma);
    }
    assert!(got.distance(&want) <= 1e-13 * want.l2_norm().max(1.0));
}

#[test]
fn resonant_identity_matches_entries() {
    let (basis, ctx) = setup(E, Truncation::rect(4, 3));
    let tb = TensorBuilder::new(&ctx, &basis).unwrap();
    let set = ResonantSet::for_layout(&basis.layout, 1e-9).unwrap();
    let ql = tb.resonant(&set).unwrap();
    assert!(!ql.is_empty());
    for (a, b, c, v) in ql.entries() {
        let r = resonant_identity_rhs(&ctx, basis.mode(a), basis.mode(b), basis.mode(c)).unwrap();
        assert!((r - v).norm() <= 1e-12, "{} {} {}", basis.layout.mode(a), basis.layout.mode(b), basis.layout.mode(c));
        if basis.layout.tau(a) == 0.0 {
            assert_eq!(r, Complex64::new(0.0, 0.0));
        }
    }
}

#[test]
fn delta_prime_on_shifted_gaussian() {
    let beta = 1.7;
    let mut f = SpectralField::zeros(beta, 3, 1, false);
    f.set(1, 0, 1, Complex64::new(1.0, 0.0));
    let d = delta_prime_field(&f, Overflow::Grow).unwrap();
    let ctx = HermiteContext::new(beta, 8).unwrap();
    let q = ctx.quadrature(1.0).unwrap();
    for mm in 0..=5 {
        // ∫(ψ₀'' − ψ₀)ψ_m dx.
        let mut s = 0.0;
        for (i, &x) in q.nodes.iter().enumerate() {
            s += q.deweighted[i] * (ctx.eval_d2psi(0, x).unwrap() - ctx.eval_psi(0, x).unwrap()) * ctx.eval_psi(mm, x).unwrap();
        }
        assert!((d.get(1, mm, 1).re - s).abs() < 1e-13, "m = {mm}");
        assert_eq!(d.get(2, mm, 1), Complex64::new(0.0, 0.0));
        assert_eq!(d.get(0, mm, 1), Complex64::new(0.0, 0.0));
    }
    assert!((d.get(1, 0, 1).re - (-beta / 2.0 - 1.0)).abs() < 1e-15);
    assert!((d.get(1, 2, 1).re - beta / 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn delta_prime_kills_height() {
    let mut f = SpectralField::random(1.0, 4, 3, 5, true);
    for k in -3..=3 {
        for c in 1..3 {
            f.series_mut(c, k).fill(Complex64::new(0.0, 0.0));
        }
    }
    assert_eq!(delta_prime_field(&f, Overflow::Grow).unwrap().l2_norm(), 0.0);
}

#[test]
fn delta_prime_matches_finite_differences() {
    let beta = 2.0;
    let mut f = SpectralField::zeros(beta, 2, 0, true);
    f.set(2, 0, 0, Complex64::new(1.0, 0.0));
    let d = delta_prime_field(&f, Overflow::Grow).unwrap();
    let ctx = HermiteContext::new(beta, 6).unwrap();
    let (h, n) = (1e-3, 16000);
    for mm in 0..=4 {
        let mut s = 0.0;
        for i in 0..=n {
            let x = -8.0 + i as f64 * h;
            let p = |y: f64| ctx.eval_psi(0, y).unwrap();
            let second = (p(x + h) - 2.0 * p(x) + p(x - h)) / (h * h);
            s += h * second * ctx.eval_psi(mm, x).unwrap();
        }
        assert!((d.get(2, mm, 0).re - s).abs() < 1e-6, "m = {mm}");
    }
}

#[test]
fn limited_diffusion_is_diagonal_off_kernel() {
    let (basis, _) = setup(E, Truncation::rect(4, 3));
    let dm = DiffusionMatrix::new(&basis);
    let l = basis.layout.clone();
    let p = l.index(m(2, 1, 1)).unwrap();
    let x = ModeCoefficients::unit(l.clone(), m(2, 1, 1)).unwrap();
    let y = dm.apply_l(&x);
    let mut want = ModeCoefficients::zeros(l.clone(), false);
    want.phi[p] = dm.entry(p, p);
    assert!(y.distance(&want) < 1e-15);
    assert!(dm.entry(p, p).re < 0.0);
    for seed in 0..100 {
        let x = ModeCoefficients::random(l.clone(), seed, seed % 2 == 0);
        assert!(dm.dissipation(&x, 0.0) >= 0.0);
    }
}

#[test]
fn limited_diffusion_on_kernel_matches_band_matrix() {
    let beta = 1.4;
    let (basis, _) = setup(beta, Truncation::rect(8, 1));
    let dm = DiffusionMatrix::new(&basis);
    let g = GeostrophicDiffusion::new(beta, 8).unwrap();
    let l = &basis.layout;
    for a in 0..=8 {
        for b in 0..=8 {
            let ia = l.index(m(a, 0, 0)).unwrap();
            let ib = l.index(m(b, 0, 0)).unwrap();
            assert!((dm.entry(ia, ib).re - g.matrix[(a, b)]).abs() < 1e-12, "({a},{b})");
            assert!(dm.entry(ia, ib).im.abs() < 1e-15);
        }
    }
}

#[test]
fn geostrophic_band_examples() {
    assert!((alpha(1.0, 1, 0) + 11.0 / 12.0).abs() < 1e-15);
    assert!((alpha(1.0, 1, 2) - 1.091089451179962).abs() < 1e-14);
    assert!((alpha(2.5, 1, 0) + 11.0 * 2.5 / 12.0).abs() < 1e-14);
}

#[test]
fn geostrophic_band_matches_quadrature() {
    for beta in [0.5, 1.0, E] {
        let g = GeostrophicDiffusion::new(beta, 12).unwrap();
        let ctx = HermiteContext::new(beta, 16).unwrap();
        let mut worst = 0.0f64;
        for a in 0..=12 {
            for b in 0..=12 {
                let q = kernel_coupling_quadrature(&ctx, a, b).unwrap();
                worst = worst.max((g.matrix[(a, b)] - q).abs());
            }
        }
        assert!(worst <= 1e-10, "beta {beta}: {worst:e}");
        assert!((g.band(1, 0) + 11.0 * beta / 12.0).abs() < 1e-12);
        let eig = nalgebra::SymmetricEigen::new(g.matrix.clone());
        assert!(eig.eigenvalues.iter().all(|&v| v <= 1e-12));
        assert!((&g.matrix - g.matrix.transpose()).amax() <= 1e-13);
    }
    assert!(GeostrophicDiffusion::new(1.0, 4).is_err());
}

#[test]
fn commutator_ratio() {
    let g = GeostrophicDiffusion::new(1.0, 20).unwrap();
    let phi: Vec<f64> = (0..=20).map(|n| 1.0 / (1.0 + n as f64)).collect();
    assert_eq!(g.ns_commutator_ratio(0.0, &phi).unwrap(), 0.0);
    assert!(matches!(g.ns_commutator_ratio(1.0, &[0.0; 21]), Err(Error::UndefinedRatio(_))));
    // Single kernel mode n = 8: ((n+1+d)^s − (n+1)^s) α_n^{(d)} on each band.
    let n = 8;
    let mut e = vec![0.0; 21];
    e[n] = 1.0;
    let want = [-4, -2, 2, 4]
        .iter()
        .map(|&d| ((n as f64 + 1.0 + d as f64) - (n as f64 + 1.0)) * alpha(1.0, n, d))
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        / (n as f64 + 1.0);
    assert!((g.ns_commutator_ratio(1.0, &e).unwrap() - want).abs() < 1e-13);
}

#[test]
fn commutator_constant_is_stable() {
    let c1 = |n_max: usize| {
        let g = GeostrophicDiffusion::new(1.0, n_max).unwrap();
        (0..100u64)
            .map(|seed| {
                let x = SpectralField::random(1.0, n_max, 0, seed, true);
                let phi: Vec<f64> = (0..=n_max).map(|n| x.get(2, n, 0).re).collect();
                g.ns_commutator_ratio(1.0, &phi).unwrap()
            })
            .fold(0.0, f64::max)
    };
    let (a, b) = (c1(32), c1(64));
    assert!((b / a - 1.0).abs() <= 0.2, "{a} vs {b}");
}

#[test]
fn corrector_single_kelvin() {
    let (basis, ctx) = setup(E, Truncation::rect(3, 3));
    let tb = TensorBuilder::new(&ctx, &basis).unwrap();
    let full = tb.full();
    let set = ResonantSet::for_layout(&basis.layout, 1e-9).unwrap();
    let dm = DiffusionMatrix::new(&basis);
    let l = basis.layout.clone();
    let x = ModeCoefficients::unit(l.clone(), m(0, 1, 0)).unwrap();
    let phi = corrector(&full, &set, &dm, &x, 0.1, 0.3, 0.0).unwrap();
    assert_eq!(phi.get(m(0, 2, 0)), Complex64::new(0.0, 0.0));
    assert!(phi.l2_norm() > 0.0);
    for i in l.active_indices() {
        if l.mode(i).k != 2 {
            assert_eq!(phi.phi[i], Complex64::new(0.0, 0.0));
        }
    }
    // Phases have unit modulus: the size does not depend on ε.
    let norms: Vec<f64> =
        [1.0, 0.1, 1e-3, 1e-6].iter().map(|&eps| corrector(&full, &set, &dm, &x, eps, 0.7, 0.0).unwrap().l2_norm()).collect();
    for w in &norms {
        assert!((w - norms[0]).abs() < 1e-12);
    }
    assert!(corrector(&full, &set, &dm, &x, 0.0, 0.7, 0.0).is_err());
}

#[test]
fn corrector_poincare_pair_at_time_zero() {
    let (basis, ctx) = setup(E, Truncation::rect(3, 2));
    let tb = TensorBuilder::new(&ctx, &basis).unwrap();
    let full = tb.full();
    let set = ResonantSet::for_layout(&basis.layout, 1e-9).unwrap();
    let dm = DiffusionMatrix::new(&basis);
    let l = basis.layout.clone();
    let p = l.index(m(1, 1, 1)).unwrap();
    let pc = l.conjugate_index(p);
    let mut x = ModeCoefficients::zeros(l.clone(), true);
    x.phi[p] = Complex64::new(0.3, 0.4);
    x.phi[pc] = x.phi[p].conj();
    let got = corrector(&full, &set, &dm, &x, 0.05, 0.0, 0.0).unwrap();
    let mut want = ModeCoefficients::zeros(l.clone(), true);
    let i = Complex64::new(0.0, 1.0);
    for a in l.active_indices() {
        for &b in &[p, pc] {
            for &c in &[p, pc] {
                if set.contains(b, c, a) {
                    continue;
                }
                let w = l.tau(a) - l.tau(b) - l.tau(c);
                want.phi[a] -= tb.entry(a, b, c) * x.phi[b] * x.phi[c] / (i * w);
            }
        }
    }
    assert!(got.distance(&want) <= 1e-13 * want.l2_norm());
    assert!(want.l2_norm() > 0.0);
}

#[test]
fn tensor_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (basis, ctx) = setup(E, Truncation::rect(3, 2));
    let tb = TensorBuilder::new(&ctx, &basis).unwrap();
    let built = cached_tensor(Some(dir.path()), &basis.layout, TensorKind::Full, || Ok(tb.full())).unwrap();
    let path = dir.path().join(cache_file(&basis.layout, TensorKind::Full));
    assert!(path.exists());
    let loaded = cached_tensor(Some(dir.path()), &basis.layout, TensorKind::Full, || panic!("cache miss")).unwrap();
    assert_eq!(built.len(), loaded.len());
    assert!(built.entries().zip(loaded.entries()).all(|(x, y)| x == y));
    let other = Basis::new(1.0, Truncation::rect(3, 2)).unwrap();
    assert!(InteractionTensor::load(&path, other.layout.clone(), TensorKind::Full).is_err());
    assert!(InteractionTensor::load(&path, basis.layout.clone(), TensorKind::Resonant).is_err());
}

#[test]
fn kernel_mode_builds() {
    let g = build_mode(1.0, m(3, 0, 0)).unwrap();
    assert_eq!(g.tau, 0.0);
    assert!(g.u1.is_empty());
}
