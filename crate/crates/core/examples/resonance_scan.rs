//! Brute-force triad scan: exact resonances at a generic beta, and what changes at beta = 2.
//!
//! Usage: cargo run --release --example resonance_scan -- [n_max] [k_max]

use betaplane::fields::Truncation;
use betaplane::resonance::{scan, Sector};

fn main() -> betaplane::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().expect("truncation must be an integer"));
    let n_max = args.next().unwrap_or(4);
    let k_max = args.next().unwrap_or(4);
    let trunc = Truncation::rect(n_max, k_max);
    for beta in [std::f64::consts::E, 2.0, 1.3] {
        let r = scan(beta, trunc, 1e-9, Sector::All)?;
        println!("beta = {beta:.6}, n <= {n_max}, |k| <= {k_max}");
        println!("  zero-mode {:>6}  all-kelvin {:>4}  accidental {:>3}  non-resonant {}", r.zero_mode, r.all_kelvin, r.accidental, r.non_resonant);
        if let Some((a, b, c)) = r.min_nonexempt_triad {
            println!("  closest generic triad {a} + {b} -> {c}: |defect| = {:.3e}", r.min_nonexempt_defect);
        }
        if !r.double_roots.is_empty() {
            println!("  double roots of the dispersion cubic at (n, k) = {:?}", r.double_roots);
        }
    }

    let kelvin = scan(1.0, trunc, 1e-9, Sector::Only(betaplane::WaveClass::Kelvin))?;
    println!("Kelvin sector: {} triads, all k_a + k_b = k_c with zero defect", kelvin.records.len());
    Ok(())
}
