//! Quick invariant suites, one per module, run by `betaplane selftest`.

use std::f64::consts::E;

use crate::dispersion::{dispersion_residual, roots, tau, ModeIndex, WaveClass};
use crate::eigenbasis::{eigen_residual, Basis};
use crate::error::Result;
use crate::fields::{read_snapshot, write_snapshot, ModeCoefficients, Truncation};
use crate::hermite::HermiteContext;
use crate::operators::{context_for, q_apply_quadrature, DiffusionMatrix, GeostrophicDiffusion, TensorBuilder};
use crate::resonance::{scan, ResonantSet, Sector};
use crate::solver::{integrate_limit, Model, SolverConfig, RESONANCE_TOL};

/// Outcome of one suite: `Ok(summary)` or `Err(reason)`.
pub type Verdict = std::result::Result<String, String>;

fn check(ok: bool, what: String) -> Verdict {
    if ok {
        Ok(what)
    } else {
        Err(what)
    }
}

fn lift(r: Result<Verdict>) -> Verdict {
    r.unwrap_or_else(|e| Err(e.to_string()))
}

pub fn hermite() -> Verdict {
    lift((|| {
        let ctx = HermiteContext::new(1.7, 40)?;
        let q = ctx.quadrature(1.0)?;
        let mut worst = 0.0f64;
        let vals: Vec<Vec<f64>> = q.nodes.iter().map(|&x| ctx.psi_all(x, 41)).collect();
        for a in 0..=40 {
            for b in 0..=a {
                let s: f64 = (0..q.len()).map(|i| q.deweighted[i] * vals[i][a] * vals[i][b]).sum();
                worst = worst.max((s - if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        let parity = ctx.triple_product(1, 2, 4)?.abs();
        Ok(check(worst < 1e-12 && parity == 0.0, format!("orthonormality {worst:.1e}, odd triple {parity:.1e}")))
    })())
}

pub fn dispersion() -> Verdict {
    let mut worst = 0.0f64;
    let mut kelvin = 0.0f64;
    for beta in [0.5, 1.0, E, 10.0] {
        for n in 0..=32 {
            for k in -32..=32 {
                let r = roots(beta, n, k);
                let p = (k * k) as f64 + beta * (2 * n + 1) as f64;
                for t in r.taus {
                    let scale = t.abs().powi(3) + p * t.abs() + beta * k.abs() as f64;
                    worst = worst.max(dispersion_residual(beta, n, k, t).abs() / scale);
                }
                if n == 0 && k > 0 {
                    kelvin = kelvin.max((tau(beta, ModeIndex { n: 0, k, j: 0 }) - k as f64).abs());
                }
            }
        }
    }
    check(worst < 1e-12 && kelvin == 0.0, format!("cubic residual {worst:.1e}, Kelvin |τ−k| {kelvin:.1e}"))
}

pub fn eigenbasis() -> Verdict {
    lift((|| {
        let basis = Basis::new(1.0, Truncation::rect(8, 8))?;
        let mut res = 0.0f64;
        let mut gram = 0.0f64;
        let l = &basis.layout;
        let active: Vec<usize> = l.active_indices().collect();
        for &a in &active {
            res = res.max(eigen_residual(1.0, basis.mode(a))?);
            for &b in &active {
                if l.mode(a).k == l.mode(b).k {
                    let want = if a == b { 1.0 } else { 0.0 };
                    gram = gram.max((basis.mode(a).inner(basis.mode(b)) - want).norm());
                }
            }
        }
        Ok(check(res < 1e-9 && gram < 1e-8, format!("{} modes, residual {res:.1e}, Gram {gram:.1e}", active.len())))
    })())
}

pub fn fields() -> Verdict {
    lift((|| {
        let basis = Basis::new(E, Truncation::rect(6, 4))?;
        let mc = ModeCoefficients::random(basis.layout.clone(), 11, true);
        let back = basis.decompose(&basis.synthesize(&mc))?;
        let round = back.distance(&mc);
        let f = basis.synthesize(&mc);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, 0.25)?;
        let (g, t) = read_snapshot(buf.as_slice())?;
        let snap = f.coeffs.iter().zip(&g.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let parseval = (f.l2_norm() - mc.l2_norm()).abs();
        Ok(check(
            round < 1e-12 && snap == 0.0 && t == 0.25 && parseval < 1e-12,
            format!("round trip {round:.1e}, Parseval {parseval:.1e}, snapshot exact"),
        ))
    })())
}

pub fn resonance() -> Verdict {
    lift((|| {
        let r = scan(E, Truncation::rect(4, 4), RESONANCE_TOL, Sector::All)?;
        Ok(check(
            r.accidental == 0 && r.max_kelvin_defect < 1e-14,
            format!("{} accidental triads, min defect {:.2e}", r.accidental, r.min_nonexempt_defect),
        ))
    })())
}

pub fn operators() -> Verdict {
    lift((|| {
        let trunc = Truncation::rect(4, 3);
        let basis = Basis::new(E, trunc)?;
        let ctx = context_for(&basis)?;
        let set = ResonantSet::for_layout(&basis.layout, RESONANCE_TOL)?;
        let tb = TensorBuilder::new(&ctx, &basis)?;
        let full = tb.full();
        let res = tb.resonant(&set)?;
        let x = ModeCoefficients::random(basis.layout.clone(), 3, true);
        let y = ModeCoefficients::random(basis.layout.clone(), 4, true);
        let a = full.q_apply(&x, &y)?;
        let b = q_apply_quadrature(&ctx, &basis, &x, &y)?;
        let routes = a.distance(&b) / b.l2_norm();
        let ql = res.q_apply(&x, &x)?;
        let kernel = ql.project(WaveClass::Geostrophic).l2_norm();
        let energy = x.inner(&ql).norm();
        let g = GeostrophicDiffusion::new(E, 12)?;
        let sym = (&g.matrix - g.matrix.transpose()).abs().max();
        let top = nalgebra::SymmetricEigen::new(g.matrix.clone()).eigenvalues.max();
        let d = DiffusionMatrix::new(&basis);
        let diss = d.dissipation(&x, 0.0);
        Ok(check(
            routes < 1e-10 && kernel < 1e-12 && energy < 1e-12 && sym < 1e-12 && top < 1e-12 && diss >= 0.0,
            format!("routes {routes:.1e}, Π₀Q_L {kernel:.1e}, (x|Q_L(x,x)) {energy:.1e}, G symmetric and ≤ 0"),
        ))
    })())
}

pub fn solver() -> Verdict {
    lift((|| {
        let trunc = Truncation::rect(3, 2);
        let model = Model::new(E, trunc, false, None)?;
        let mc0 = ModeCoefficients::random(model.layout().clone(), 5, true);
        let mut cfg = SolverConfig::new(E, trunc);
        cfg.nu = 0.1;
        cfg.t_final = 0.5;
        cfg.dt = 1e-2;
        let coarse = integrate_limit(&cfg, &model, &mc0)?;
        cfg.dt = 5e-3;
        let fine = integrate_limit(&cfg, &model, &mc0)?;
        cfg.dt = 2.5e-3;
        let finest = integrate_limit(&cfg, &model, &mc0)?;
        let ratio = coarse.last().distance(fine.last()) / fine.last().distance(finest.last());
        let e = fine.modulated_energy();
        let excess = e.iter().map(|v| v / e[0] - 1.0).fold(f64::MIN, f64::max);
        let mut masked = fine.last().clone();
        masked.mask();
        let inactive = masked.distance(fine.last());
        let zero_state = ModeCoefficients::zeros(model.layout().clone(), true);
        let zero = integrate_limit(&cfg, &model, &zero_state)?.last().l2_norm();
        Ok(check(
            excess <= 1e-6 && (10.0..=22.0).contains(&ratio) && inactive == 0.0 && zero == 0.0,
            format!("energy excess {excess:.1e}, RK4 refinement ratio {ratio:.1}"),
        ))
    })())
}

/// Every suite in order, with its name.
pub fn suites() -> Vec<(&'static str, fn() -> Verdict)> {
    vec![
        ("hermite", hermite as fn() -> Verdict),
        ("dispersion", dispersion),
        ("eigenbasis", eigenbasis),
        ("fields", fields),
        ("resonance", resonance),
        ("operators", operators),
        ("solver", solver),
    ]
}
