//! The quadratic interaction as a sparse tensor, checked against pointwise products on a grid.
//!
//! Usage: cargo run --release --example interaction_tensor

use std::time::Instant;

use betaplane::fields::{ModeCoefficients, Truncation};
use betaplane::operators::{context_for, q_apply_quadrature, TensorBuilder};
use betaplane::resonance::ResonantSet;
use betaplane::{Basis, WaveClass};

fn main() -> betaplane::Result<()> {
    let beta = std::f64::consts::E;
    let basis = Basis::new(beta, Truncation::rect(5, 4))?;
    let ctx = context_for(&basis)?;
    let t = Instant::now();
    let builder = TensorBuilder::new(&ctx, &basis)?;
    let full = builder.full();
    let set = ResonantSet::for_layout(&basis.layout, 1e-9)?;
    let resonant = builder.resonant(&set)?;
    println!("{} modes: {} nonzero entries, {} resonant ({:.2?})", basis.layout.len(), full.len(), resonant.len(), t.elapsed());

    let x = ModeCoefficients::random(basis.layout.clone(), 11, true);
    let t = Instant::now();
    let a = full.q_apply(&x, &x)?;
    let ta = t.elapsed();
    let t = Instant::now();
    let b = q_apply_quadrature(&ctx, &basis, &x, &x)?;
    println!("tensor route {ta:.2?}, grid route {:.2?}, relative difference {:.2e}", t.elapsed(), a.distance(&b) / b.l2_norm());

    // The resonant part conserves energy and leaves the geostrophic component alone.
    let q = resonant.q_apply(&x, &x)?;
    println!("(x | Q_L(x,x)) = {:.2e}, |P0 Q_L(x,x)| = {:.2e}", x.inner(&q).re, q.project(WaveClass::Geostrophic).l2_norm());
    Ok(())
}
