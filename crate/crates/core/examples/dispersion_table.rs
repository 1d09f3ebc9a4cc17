//! Eigenfrequencies of the first equatorial modes, grouped by wave class.
//!
//! Usage: cargo run --example dispersion_table -- [beta]

use betaplane::dispersion::{asymptote_large_beta, roots, tau, ModeIndex, WaveClass};

fn main() {
    let beta: f64 = std::env::args().nth(1).map_or(1.0, |s| s.parse().expect("beta must be a number"));
    println!("beta = {beta}");
    println!("{:>3} {:>3} {:>3} {:>12}  class", "n", "k", "j", "tau");
    for n in 0..=3 {
        for k in -3..=3 {
            for j in -1i8..=1 {
                let m = ModeIndex { n, k, j };
                println!("{n:>3} {k:>3} {j:>3} {:>12.6}  {}", tau(beta, m), m.class().name());
            }
        }
    }

    // Rossby frequencies approach βk/(k² + β(2n+1)); fast waves ±√(k² + β(2n+1)).
    println!();
    println!("slow branch against the large-beta expansion (n = 1, k = 2):");
    for b in [1e2, 1e4, 1e6] {
        let exact = roots(b, 1, 2).tau(0);
        let approx = asymptote_large_beta(1, 2, 0, b);
        println!("  beta = {b:>8.0e}  root = {exact:.10}  expansion = {approx:.10}  diff = {:.2e}", (exact - approx).abs());
    }

    let kelvin = (1..=3).map(|k| tau(beta, ModeIndex { n: 0, k, j: 0 })).collect::<Vec<_>>();
    assert!(kelvin.iter().zip(1..).all(|(t, k)| *t == k as f64));
    assert_eq!(ModeIndex { n: 0, k: 1, j: 0 }.class(), WaveClass::Kelvin);
    println!("\nKelvin waves travel at unit speed: tau(0,k,0) = k for k = 1, 2, 3");
}
