use std::f64::consts::PI;

use betaplane::hermite::{x_coupling, HermiteContext, WEIGHT_SCALES};
use betaplane::Error;

/// Trapezoid rule on a wide uniform grid: spectrally accurate for Gaussian-decaying integrands.
fn trapezoid(f: impl Fn(f64) -> f64, beta: f64) -> f64 {
    let half = 14.0 / beta.sqrt();
    let m = 6000;
    let h = 2.0 * half / m as f64;
    (0..=m).map(|i| f(-half + i as f64 * h)).sum::<f64>() * h
}

fn gamma_half(p: usize) -> f64 {
    // Γ(p + 1/2) = (2p)! √π / (4^p p!)
    let mut g = PI.sqrt();
    for i in 0..p {
        g *= i as f64 + 0.5;
    }
    g
}

#[test]
fn psi_point_values() {
    let c1 = HermiteContext::new(1.0, 4).unwrap();
    assert!((c1.eval_psi(0, 0.0).unwrap() - PI.powf(-0.25)).abs() < 1e-15);
    assert_eq!(c1.eval_psi(1, 0.0).unwrap(), 0.0);
    let c4 = HermiteContext::new(4.0, 4).unwrap();
    assert!((c4.eval_psi(0, 0.0).unwrap() - (4.0 / PI).powf(0.25)).abs() < 1e-15);
    assert!((c4.eval_psi(0, 0.0).unwrap() - 1.0622).abs() < 1e-4);
}

#[test]
fn derivative_values() {
    let c = HermiteContext::new(1.0, 4).unwrap();
    assert_eq!(c.eval_dpsi(0, 0.0).unwrap(), 0.0);
    // ψ₁(x) = √2 π^{-1/4} x e^{-x²/2} at β = 1.
    let d1 = c.eval_dpsi(1, 0.0).unwrap();
    assert!((d1 - 2f64.sqrt() * PI.powf(-0.25)).abs() < 1e-14);
    let h = 1e-5;
    let fd = (c.eval_psi(1, h).unwrap() - c.eval_psi(1, -h).unwrap()) / (2.0 * h);
    assert!((d1 - fd).abs() < 1e-9);
    let want = -c.eval_psi(0, 1.0).unwrap();
    assert!((c.eval_dpsi(0, 1.0).unwrap() - want).abs() < 1e-15);
    assert!((want + 0.45558).abs() < 1e-5);
}

#[test]
fn derivative_matches_finite_differences() {
    for beta in [0.5, 1.0, 3.0] {
        let c = HermiteContext::new(beta, 20).unwrap();
        let h = 1e-5;
        for n in 0..20 {
            for i in 0..25 {
                let x = -3.0 + 0.25 * i as f64;
                let fd = (c.eval_psi(n, x + h).unwrap() - c.eval_psi(n, x - h).unwrap()) / (2.0 * h);
                assert!((c.eval_dpsi(n, x).unwrap() - fd).abs() < 1e-7 * (1.0 + n as f64) * beta, "β={beta} n={n} x={x}");
            }
        }
    }
}

#[test]
fn orthonormal_against_trapezoid() {
    for beta in [0.5, 1.0, 2.0] {
        let c = HermiteContext::new(beta, 40).unwrap();
        let half = 14.0 / beta.sqrt();
        let m = 6000;
        let h = 2.0 * half / m as f64;
        let vals: Vec<Vec<f64>> = (0..=m).map(|i| c.psi_all(-half + i as f64 * h, 41)).collect();
        for a in 0..=40 {
            for b in 0..=a {
                let s: f64 = vals.iter().map(|v| v[a] * v[b]).sum::<f64>() * h;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s - want).abs() <= 1e-10, "β={beta} ({a},{b}) {s}");
            }
        }
    }
}

#[test]
fn recurrence_residuals() {
    let beta = 1.3;
    let c = HermiteContext::new(beta, 30).unwrap();
    for i in 0..100 {
        let x = -5.0 + 0.1 * i as f64;
        for n in 0..30 {
            let p = c.psi_all(x, n + 2);
            let lower = if n == 0 { 0.0 } else { p[n - 1] };
            let d = c.eval_dpsi(n, x).unwrap();
            let nf = n as f64;
            let r1 = d + beta * x * p[n] - (2.0 * beta * nf).sqrt() * lower;
            let r2 = -d + beta * x * p[n] - (2.0 * beta * (nf + 1.0)).sqrt() * p[n + 1];
            let tol = 1e-9 * (1.0 + nf.sqrt());
            assert!(r1.abs() <= tol && r2.abs() <= tol, "n={n} x={x}: {r1:e} {r2:e}");
        }
    }
}

#[test]
fn oscillator_equation_second_order() {
    let beta = 2.0;
    let c = HermiteContext::new(beta, 10).unwrap();
    let resid = |n: usize, x: f64, h: f64| {
        let f = |y: f64| c.eval_psi(n, y).unwrap();
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        -d2 + beta * beta * x * x * f(x) - beta * (2.0 * n as f64 + 1.0) * f(x)
    };
    for n in [0, 3, 7] {
        for x in [0.3, -0.9, 1.4] {
            let r1 = resid(n, x, 1e-2).abs();
            let r2 = resid(n, x, 5e-3).abs();
            let ratio = r1 / r2;
            assert!((3.5..4.5).contains(&ratio), "n={n} x={x} ratio {ratio}");
        }
    }
}

#[test]
fn uniform_bound_scales_with_quarter_power() {
    for beta in [0.25, 1.0, 9.0] {
        let c = HermiteContext::new(beta, 40).unwrap();
        let s = beta.powf(0.25);
        for i in 0..4001 {
            let x = (-10.0 + 0.005 * i as f64) / beta.sqrt();
            for v in c.psi_all(x, 41) {
                assert!(v.abs() <= 1.09 * s);
            }
        }
    }
}

#[test]
fn parity_is_exact() {
    let c = HermiteContext::new(1.7, 40).unwrap();
    for i in 1..200 {
        let x = 0.037 * i as f64;
        let p = c.psi_all(x, 41);
        let m = c.psi_all(-x, 41);
        for n in 0..=40 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(m[n], sign * p[n]);
        }
    }
}

#[test]
fn tails_underflow_gracefully() {
    let c = HermiteContext::new(1.0, 60).unwrap();
    for x in [15.0, 20.0, 40.0, 1e3, -1e6] {
        for v in c.psi_all(x, 61) {
            assert!(v.is_finite());
        }
    }
    assert_eq!(c.eval_psi(0, 1e3).unwrap(), 0.0);
}

#[test]
fn quadrature_integrates_gaussian_moments() {
    let beta = 1.9;
    let c = HermiteContext::new(beta, 6).unwrap();
    for s in WEIGHT_SCALES {
        let q = c.quadrature(s).unwrap();
        assert!(q.len() >= 2 * 6 + 4);
        let a = s * beta;
        for p in 0..q.len() {
            let got: f64 = q.nodes.iter().zip(&q.weights).map(|(x, w)| w * x.powi(2 * p as i32)).sum();
            let want = gamma_half(p) / a.powf(p as f64 + 0.5);
            assert!(((got - want) / want).abs() < 1e-11, "s={s} p={p}");
            let odd: f64 = q.nodes.iter().zip(&q.weights).map(|(x, w)| w * x.powi(2 * p as i32 + 1)).sum();
            assert!(odd.abs() < 1e-11 * want.max(1.0));
        }
    }
    assert!(matches!(c.quadrature(2.0), Err(Error::Configuration(_))));
}

#[test]
fn triple_product_values() {
    let c = HermiteContext::new(1.0, 12).unwrap();
    let want = (2.0f64 / 3.0).sqrt() * PI.powf(-0.25);
    assert!((c.triple_product(0, 0, 0).unwrap() - want).abs() < 1e-15);
    assert!((want - 0.61329).abs() < 1e-4);
    assert_eq!(c.triple_product(0, 0, 1).unwrap(), 0.0);
    let oracle = trapezoid(|x| c.eval_psi(1, x).unwrap().powi(2) * c.eval_psi(2, x).unwrap(), 1.0);
    assert!((c.triple_product(1, 1, 2).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn triple_product_matches_trapezoid_everywhere() {
    let beta = 2.3;
    let c = HermiteContext::new(beta, 12).unwrap();
    for a in 0..=12 {
        for b in a..=12 {
            for d in b..=12 {
                let oracle = trapezoid(|x| c.eval_psi(a, x).unwrap() * c.eval_psi(b, x).unwrap() * c.eval_psi(d, x).unwrap(), beta);
                assert!((c.triple_product(a, b, d).unwrap() - oracle).abs() < 1e-12, "({a},{b},{d})");
            }
        }
    }
}

#[test]
fn triple_product_selection_rules() {
    let c = HermiteContext::new(0.8, 12).unwrap();
    for a in 0..=12 {
        for b in 0..=12 {
            for d in 0..=12 {
                let v = c.triple_product(a, b, d).unwrap();
                for (p, q, r) in [(a, d, b), (b, a, d), (b, d, a), (d, a, b), (d, b, a)] {
                    assert_eq!(c.triple_product(p, q, r).unwrap(), v);
                }
                if (a + b + d) % 2 == 1 {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }
    // Products of Hermite functions carry the weight e^{-3βx²/2}, so there is no triangle rule.
    assert!(c.triple_product(0, 0, 4).unwrap().abs() > 1e-3);
}

#[test]
fn x_coupling_values_and_quadrature() {
    let (a, b) = x_coupling(1.0, 0);
    assert_eq!(a, 0.0);
    assert!((b - 0.5f64.sqrt()).abs() < 1e-15);
    let (a, b) = x_coupling(2.0, 1);
    assert!((a - 1.0).abs() < 1e-15 && (b - 2.0f64.sqrt()).abs() < 1e-15);
    let (a, b) = x_coupling(1.0, 3);
    assert!((a - 1.5f64.sqrt()).abs() < 1e-15 && (b - 2.0f64.sqrt()).abs() < 1e-15);
    for (beta, n) in [(2.0, 1usize), (1.0, 3), (0.7, 6)] {
        let c = HermiteContext::new(beta, n + 1).unwrap();
        let (lo, hi) = c.x_coupling(n);
        let up = trapezoid(|x| beta * x * c.eval_psi(n, x).unwrap() * c.eval_psi(n + 1, x).unwrap(), beta);
        assert!((hi - up).abs() < 1e-12);
        if n > 0 {
            let down = trapezoid(|x| beta * x * c.eval_psi(n, x).unwrap() * c.eval_psi(n - 1, x).unwrap(), beta);
            assert!((lo - down).abs() < 1e-12);
        }
    }
}

#[test]
fn argument_errors() {
    assert!(HermiteContext::new(0.0, 4).is_err());
    assert!(HermiteContext::new(-1.0, 4).is_err());
    assert!(HermiteContext::new(1.0, 0).is_err());
    let c = HermiteContext::new(1.0, 4).unwrap();
    assert!(matches!(c.eval_psi(5, 0.0), Err(Error::IndexOutOfRange { .. })));
    assert!(matches!(c.eval_dpsi(0, f64::NAN), Err(Error::InvalidArgument(_))));
    assert!(matches!(c.triple_product(0, 0, 5), Err(Error::IndexOutOfRange { .. })));
}
