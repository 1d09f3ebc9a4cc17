//! Filtered epsilon-system against its resonant limit: strong and weak convergence as epsilon shrinks.
//!
//! Usage: cargo run --release --example filtered_convergence

use betaplane::fields::{ModeCoefficients, Truncation};
use betaplane::solver::{run_sweep, Model, SolverConfig};

fn main() -> betaplane::Result<()> {
    let beta = std::f64::consts::E;
    let trunc = Truncation::rect(3, 3);
    let model = Model::new(beta, trunc, true, None)?;
    let mut cfg = SolverConfig::new(beta, trunc);
    cfg.nu = 0.1;
    cfg.seed = 1;
    let mc0 = ModeCoefficients::random(model.layout().clone(), cfg.seed, true);
    let eps = [0.2, 0.1, 0.05];
    let r = run_sweep(&cfg, &model, &eps, &mc0, true)?;

    let c = &r.convergence;
    let corrected = c.sup_error_corrected.as_deref().unwrap_or(&[]);
    println!("{:>6} {:>12} {:>12} {:>12}", "eps", "limit", "corrected", "kernel");
    for (i, e) in eps.iter().enumerate() {
        println!("{e:>6} {:>12.4e} {:>12.4e} {:>12.4e}", c.sup_error[i], corrected[i], r.weak.sup_kernel_error[i]);
    }
    println!("strong errors decreasing: {}, log-log slope {:.2}", c.monotone, c.order.unwrap_or(f64::NAN));
    println!("kernel errors decreasing: {}", r.weak.monotone);
    Ok(())
}
