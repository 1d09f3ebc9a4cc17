//! Limit (resonant) system on a ball truncation: energy balance and the share held by each wave class.
//!
//! Usage: cargo run --release --example limit_system -- [radius] [nu]

use betaplane::fields::{ModeCoefficients, Truncation};
use betaplane::solver::{integrate_limit, Model, SolverConfig};
use betaplane::WaveClass;

fn main() -> betaplane::Result<()> {
    let mut args = std::env::args().skip(1);
    let radius: f64 = args.next().map_or(4.0, |s| s.parse().expect("radius must be a number"));
    let nu: f64 = args.next().map_or(0.05, |s| s.parse().expect("nu must be a number"));
    let beta = std::f64::consts::E;
    let trunc = Truncation::ball(radius);
    let model = Model::new(beta, trunc, false, None)?;
    println!("{} modes, {} resonant triads", model.layout().len(), model.set.len() / 2);

    let mut cfg = SolverConfig::new(beta, trunc);
    cfg.nu = nu;
    cfg.t_final = 2.0;
    let mut mc0 = ModeCoefficients::random(model.layout().clone(), 3, true);
    mc0.scale(2.0 / mc0.l2_norm());
    let traj = integrate_limit(&cfg, &model, &mc0)?;

    let e = traj.modulated_energy();
    println!("{:>5} {:>10} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9}", "t", "energy", "modulated", "kelvin", "rossby", "poincare", "mixed", "geostr");
    for (t, s) in traj.times.iter().zip(&traj.states).step_by(20) {
        let step = (t / cfg.dt).round() as usize;
        let share = |c| s.project(c).l2_norm().powi(2);
        println!(
            "{t:>5.2} {:>10.6} {:>10.6} {:>9.5} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            traj.diagnostics[step].l2,
            e[step],
            share(WaveClass::Kelvin),
            share(WaveClass::Rossby),
            share(WaveClass::Poincare),
            share(WaveClass::Mixed),
            share(WaveClass::Geostrophic)
        );
    }
    Ok(())
}
