//! Viscous decay of a zonal geostrophic jet, the weak limit of the fast dynamics.
//!
//! Usage: cargo run --release --example geostrophic_decay

use betaplane::operators::GeostrophicDiffusion;
use betaplane::solver::geostrophic_solve;
use num_complex::Complex64;

fn main() -> betaplane::Result<()> {
    let beta = 1.0;
    let nu = 0.1;
    let g = GeostrophicDiffusion::new(beta, 24)?;
    println!("kernel diffusion bands at n = 6: {:?}", [-4, -2, 0, 2, 4].map(|d| (g.band(6, d) * 1e6).round() / 1e6));

    // Jet built from the two lowest kernel modes.
    let mut jet = vec![Complex64::new(0.0, 0.0); 25];
    jet[0] = Complex64::new(1.0, 0.0);
    jet[2] = Complex64::new(0.5, 0.0);
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    println!("{:>6} {:>12} {:>12} {:>12}", "t", "norm", "phi_0", "phi_2");
    for i in 0..=10 {
        let t = 2.0 * i as f64;
        let s = geostrophic_solve(&g, &jet, nu, t)?;
        println!("{t:>6.1} {:>12.6} {:>12.6} {:>12.6}", norm(&s), s[0].re, s[2].re);
    }
    Ok(())
}
