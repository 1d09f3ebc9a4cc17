//! Command-line front end. Every command writes deterministic CSV or JSON whose
//! first line (or `meta` object) records the tool version and physical parameters.
//!
//! Exit codes: 0 success, 1 failed scientific check, 2 usage, 3 I/O.

pub mod config;
pub mod selftest;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::dispersion::{classify, tau, ModeIndex};
use crate::eigenbasis::build_mode;
use crate::error::{Error, Result};
use crate::fields::{ModeCoefficients, Truncation};
use crate::hermite::HermiteContext;
use crate::operators::cache_dir;
use crate::resonance::{scan, ScanReport, Sector};
use crate::solver::{integrate_filtered, integrate_limit, run_sweep, write_trajectory, Model, System};

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "betaplane", version, about = "Equatorial betaplane waves: dispersion, resonances, and filtered shallow-water runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenfrequency table as CSV (beta,n,k,j,tau,class).
    Dispersion {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n_max: usize,
        #[arg(long)]
        k_max: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Brute-force triad scan as JSON.
    Triads {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n_max: usize,
        #[arg(long)]
        k_max: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// all, kelvin, rossby, poincare, mixed or geostrophic.
        #[arg(long, default_value = "all")]
        sector: String,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write a one-row CSV summary (counts per class, smallest generic defect).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Meridional profile of one eigenmode as CSV.
    Modes {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        k: i32,
        #[arg(long, allow_hyphen_values = true)]
        j: i8,
        /// Half-width of the sampled interval in x₁.
        #[arg(long, default_value_t = 6.0)]
        x_max: f64,
        #[arg(long, default_value_t = 241)]
        points: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Integrate the limit or filtered system; writes a trajectory directory.
    Simulate(RunArgs),
    /// Epsilon sweep: strong and weak convergence errors as CSV.
    Converge(RunArgs),
    /// Run the invariant suites; exit 1 if any fails.
    Selftest,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set nu=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output path; overrides the `output` key.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::InvalidArgument(_) | Error::Configuration(_) | Error::Parse(_) | Error::IndexOutOfRange { .. } => EXIT_USAGE,
        _ => EXIT_CHECK,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Dispersion { beta, n_max, k_max, output } => {
            positive_beta(beta)?;
            emit(output.as_deref(), &dispersion_csv(beta, n_max, k_max))?;
            Ok(EXIT_OK)
        }
        Command::Triads { beta, n_max, k_max, tol, sector, output, summary } => {
            positive_beta(beta)?;
            let report = scan(beta, Truncation::rect(n_max, k_max), tol, Sector::parse(&sector)?)?;
            emit(output.as_deref(), &triads_json(&report, n_max, k_max, &sector)?)?;
            if let Some(p) = summary {
                fs::write(p, triads_summary_csv(&report, n_max, k_max))?;
            }
            Ok(EXIT_OK)
        }
        Command::Modes { beta, n, k, j, x_max, points, output } => {
            positive_beta(beta)?;
            let text = mode_csv(beta, ModeIndex::new(n, k, j)?, x_max, points)?;
            emit(output.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Simulate(a) => simulate(&run_config(&a)?),
        Command::Converge(a) => converge(&run_config(&a)?),
        Command::Selftest => Ok(run_selftest(&mut std::io::stdout())),
    }
}

fn positive_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--beta must be positive, got {beta}")))
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn meta_line(fields: serde_json::Value) -> String {
    let mut m = json!({"tool": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")});
    if let (Some(o), serde_json::Value::Object(extra)) = (m.as_object_mut(), fields) {
        o.extend(extra);
    }
    format!("# {m}\n")
}

/// Eigenfrequency table, rows ordered by `n`, then `k`, then `j`.
pub fn dispersion_csv(beta: f64, n_max: usize, k_max: usize) -> String {
    let mut s = meta_line(json!({"beta": beta, "n_max": n_max, "k_max": k_max}));
    s.push_str("beta,n,k,j,tau,class\n");
    let km = k_max as i32;
    for n in 0..=n_max {
        for k in -km..=km {
            for j in -1i8..=1 {
                let t = tau(beta, ModeIndex { n, k, j });
                s.push_str(&format!("{beta},{n},{k},{j},{t:?},{}\n", classify(n, k, j).name()));
            }
        }
    }
    s
}

pub fn triads_json(report: &ScanReport, n_max: usize, k_max: usize, sector: &str) -> Result<String> {
    let (beta, tol) = (report.beta, report.tol);
    let v = json!({
        "meta": {
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "beta": beta, "n_max": n_max, "k_max": k_max, "tol": tol, "sector": sector,
        },
        "report": report,
    });
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn triads_summary_csv(r: &ScanReport, n_max: usize, k_max: usize) -> String {
    let mut s = meta_line(json!({"beta": r.beta, "n_max": n_max, "k_max": k_max, "tol": r.tol}));
    s.push_str("beta,zero_mode,all_kelvin,accidental,min_nonexempt_defect\n");
    s.push_str(&format!("{},{},{},{},{:e}\n", r.beta, r.zero_mode, r.all_kelvin, r.accidental, r.min_nonexempt_defect));
    s
}

/// `x₁ ↦ (η, u₁, u₂)` of one eigenmode, Fourier factor omitted.
pub fn mode_csv(beta: f64, m: ModeIndex, x_max: f64, points: usize) -> Result<String> {
    if points < 2 || !(x_max > 0.0) {
        return Err(Error::InvalidArgument("need at least 2 points and x_max > 0".into()));
    }
    let mode = build_mode(beta, m)?;
    let len = mode.support_max() + 1;
    let ctx = HermiteContext::new(beta, len.max(1))?;
    let mut s = meta_line(json!({"beta": beta, "n": m.n, "k": m.k, "j": m.j, "tau": mode.tau, "class": m.class().name()}));
    s.push_str("x,eta_re,eta_im,u1_re,u1_im,u2_re,u2_im\n");
    for i in 0..points {
        let x = -x_max + 2.0 * x_max * i as f64 / (points - 1) as f64;
        let psi = ctx.psi_all(x, len);
        s.push_str(&format!("{x:?}"));
        for c in 0..3 {
            let v: num_complex::Complex64 = mode.component(c).iter().map(|&(n, a)| a * psi[n]).sum();
            s.push_str(&format!(",{:e},{:e}", v.re, v.im));
        }
        s.push('\n');
    }
    Ok(s)
}

fn run_config(a: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    for kv in &a.overrides {
        cfg.apply_override(kv)?;
    }
    if let Some(o) = &a.output {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

/// Seeded random initial state, optionally rescaled to `amplitude` in L².
pub fn initial_state(cfg: &RunConfig, model: &Model) -> ModeCoefficients {
    let mut mc0 = ModeCoefficients::random(model.layout().clone(), cfg.solver.seed, true);
    if let Some(a) = cfg.amplitude {
        let n = mc0.l2_norm();
        if n > 0.0 {
            mc0.scale(a / n);
        }
    }
    mc0
}

fn simulate(cfg: &RunConfig) -> Result<i32> {
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| Error::Configuration("simulate needs an output directory (--output or output = ...)".into()))?;
    let s = &cfg.solver;
    let model = Model::new(s.beta, s.trunc, cfg.system == System::Filtered, cache_dir().as_deref())?;
    let mc0 = initial_state(cfg, &model);
    let traj = match cfg.system {
        System::Limit => integrate_limit(s, &model, &mc0)?,
        System::Filtered => integrate_filtered(s, &model, &mc0)?,
    };
    write_trajectory(&out, s, cfg.system, &model.basis, &traj)?;
    let last = traj.diagnostics.last().expect("nonempty diagnostics");
    println!("wrote {} snapshots to {}; final t = {} l2 = {:e}", traj.states.len(), out.display(), last.t, last.l2);
    Ok(EXIT_OK)
}

fn converge(cfg: &RunConfig) -> Result<i32> {
    let s = &cfg.solver;
    let model = Model::new(s.beta, s.trunc, true, cache_dir().as_deref())?;
    let mc0 = initial_state(cfg, &model);
    let r = run_sweep(s, &model, &cfg.eps_list, &mc0, cfg.corrector)?;
    let t = s.trunc;
    let mut text = meta_line(json!({
        "beta": s.beta, "nu": s.nu, "n_max": t.n_max, "k_max": t.k_max, "ball": t.ball,
        "dt": s.dt, "t_final": s.t_final, "integrator": s.integrator.name(), "seed": s.seed,
        "nonlinear": s.nonlinear, "amplitude": cfg.amplitude,
    }));
    text.push_str("eps,sup_error,sup_error_corrected,sup_kernel_error\n");
    let c = &r.convergence;
    for (i, e) in c.eps.iter().enumerate() {
        let corr = c.sup_error_corrected.as_ref().map_or(String::new(), |v| format!("{:e}", v[i]));
        text.push_str(&format!("{e},{:e},{corr},{:e}\n", c.sup_error[i], r.weak.sup_kernel_error[i]));
    }
    emit(cfg.output.as_deref(), &text)?;
    let order = c.order.map_or("n/a".to_string(), |o| format!("{o:.3}"));
    eprintln!(
        "strong: {} (order {order}); weak: {}",
        if c.monotone { "decreasing" } else { "NOT decreasing" },
        if r.weak.monotone { "decreasing" } else { "NOT decreasing" }
    );
    Ok(if c.monotone && r.weak.monotone { EXIT_OK } else { EXIT_CHECK })
}

/// Runs every suite, printing one verdict line each; returns the exit code.
pub fn run_selftest(w: &mut dyn Write) -> i32 {
    let mut failed = Vec::new();
    for (name, suite) in selftest::suites() {
        match suite() {
            Ok(msg) => {
                let _ = writeln!(w, "PASS {name}: {msg}");
            }
            Err(msg) => {
                let _ = writeln!(w, "FAIL {name}: {msg}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        let _ = writeln!(w, "selftest: all suites passed");
        EXIT_OK
    } else {
        let _ = writeln!(w, "selftest: failed suites: {}", failed.join(", "));
        EXIT_CHECK
    }
}
