//! Meridional structure of one wave of each class, written as CSV to stdout.
//!
//! Usage: cargo run --example mode_profiles > profiles.csv

use betaplane::dispersion::ModeIndex;
use betaplane::eigenbasis::build_mode;
use betaplane::hermite::HermiteContext;

fn main() -> betaplane::Result<()> {
    let beta = 1.0;
    let modes = [
        ("kelvin", ModeIndex { n: 0, k: 1, j: 0 }),
        ("mixed", ModeIndex { n: 0, k: 1, j: 1 }),
        ("rossby", ModeIndex { n: 1, k: 1, j: 0 }),
        ("poincare", ModeIndex { n: 1, k: 1, j: -1 }),
        ("geostrophic", ModeIndex { n: 2, k: 0, j: 0 }),
    ];
    println!("class,tau,x,eta,u1,u2");
    for (name, m) in modes {
        let mode = build_mode(beta, m)?;
        let len = mode.support_max() + 1;
        let ctx = HermiteContext::new(beta, len)?;
        for i in 0..=120 {
            let x = -6.0 + 0.1 * i as f64;
            let psi = ctx.psi_all(x, len);
            let val = |c: usize| mode.component(c).iter().map(|&(n, a)| a * psi[n]).sum::<num_complex::Complex64>();
            // Eigenvectors are real or purely imaginary per component; print the nonzero part.
            let show = |z: num_complex::Complex64| if z.re.abs() >= z.im.abs() { z.re } else { z.im };
            println!("{name},{:.6},{x:.2},{:.6e},{:.6e},{:.6e}", mode.tau, show(val(0)), show(val(1)), show(val(2)));
        }
    }
    Ok(())
}
