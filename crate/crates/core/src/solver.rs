//! Time integration of the limit system and of the filtered ε-system, the
//! exact geostrophic flow, and the convergence experiments built on them.
//!
//! In eigen coordinates the limit system reads
//! `φ' = −Q_L(φ, φ) + νΔ'_Lφ` and the filtered system
//! `φ' = −𝓛(−t/ε)Q(𝓛(t/ε)φ, 𝓛(t/ε)φ) + ν𝓛(−t/ε)Δ'𝓛(t/ε)φ`, with `𝓛(s)` the
//! phase rotation `e^{−isτ}`. The density-weighted viscous remainder of the
//! filtered system is dropped (`R_ε = 0`).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenbasis::Basis;
use crate::error::{Error, Result};
use crate::fields::{save_snapshot, ModeCoefficients, ModeLayout, Truncation};
use crate::operators::{cached_tensor, context_for, corrector, DiffusionMatrix, GeostrophicDiffusion, InteractionTensor, TensorBuilder, TensorKind};
use crate::resonance::ResonantSet;

type C64 = Complex64;

/// Resonance tolerance used when building the limit system.
pub const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrator {
    #[serde(rename = "rk4")]
    Rk4,
    /// Strang splitting: exact exponential of the linear part, RK4 on the quadratic part.
    #[serde(rename = "strang-exp")]
    StrangExp,
}

impl Integrator {
    pub fn parse(s: &str) -> Result<Integrator> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "strang-exp" => Ok(Integrator::StrangExp),
            _ => Err(Error::Configuration(format!("unknown integrator {s:?} (rk4 or strang-exp)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Integrator::Rk4 => "rk4",
            Integrator::StrangExp => "strang-exp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Limit,
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub beta: f64,
    pub nu: f64,
    /// Only used by the filtered system.
    pub eps: Option<f64>,
    pub trunc: Truncation,
    pub dt: f64,
    pub t_final: f64,
    pub integrator: Integrator,
    pub seed: u64,
    /// `false` switches the quadratic term off.
    pub nonlinear: bool,
}

impl SolverConfig {
    pub fn new(beta: f64, trunc: Truncation) -> SolverConfig {
        SolverConfig {
            beta,
            nu: 0.0,
            eps: None,
            trunc,
            dt: 1e-3,
            t_final: 1.0,
            integrator: Integrator::Rk4,
            seed: 0,
            nonlinear: true,
        }
    }

    /// Largest RK4 step allowed for the filtered system, `ε / (10 max|τ|)`.
    pub fn filtered_dt_cap(&self, layout: &ModeLayout) -> Option<f64> {
        let eps = self.eps?;
        let m = layout.max_abs_tau();
        (m > 0.0).then(|| eps / (10.0 * m))
    }

    pub fn validate(&self, system: System, layout: &ModeLayout) -> Result<()> {
        let bad = |msg: String| Err(Error::Configuration(msg));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return bad(format!("nu must be nonnegative, got {}", self.nu));
        }
        if !(self.dt > 0.0 && self.t_final > 0.0) {
            return bad(format!("dt and t_final must be positive, got {} and {}", self.dt, self.t_final));
        }
        if self.dt > self.t_final {
            return bad(format!("dt = {} exceeds t_final = {}", self.dt, self.t_final));
        }
        if layout.beta != self.beta || layout.trunc != self.trunc {
            return bad("operators were built for a different beta or truncation".into());
        }
        if system == System::Filtered {
            match self.eps {
                Some(e) if e > 0.0 && e.is_finite() => {}
                _ => return bad(format!("the filtered system needs eps > 0, got {:?}", self.eps)),
            }
            if self.integrator == Integrator::Rk4 {
                if let Some(cap) = self.filtered_dt_cap(layout) {
                    if self.dt > cap * (1.0 + 1e-12) {
                        return bad(format!("rk4 step {} exceeds eps/(10 max|tau|) = {cap:e}", self.dt));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }

    /// Snapshot cadence: every `max(1, round(0.01/dt))` steps.
    pub fn snapshot_every(&self) -> usize {
        ((0.01 / self.dt).round() as usize).max(1)
    }
}

/// One row of the per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    /// `‖Φ‖²`.
    pub l2: f64,
    /// `‖(Id − Π₀)Φ‖_{H_L^1}`.
    pub hl1_perp: f64,
    /// `∫₀ᵗ (Φ | −Δ'Φ) ds`, trapezoidal in time.
    pub dissipation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModeCoefficients>,
    pub diagnostics: Vec<Diagnostics>,
    pub nu: f64,
}

impl Trajectory {
    /// `‖Φ(t)‖² + 2ν∫(Φ | −Δ'Φ)` for every diagnostics row.
    pub fn modulated_energy(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.l2 + 2.0 * self.nu * d.dissipation).collect()
    }

    pub fn last(&self) -> &ModeCoefficients {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Everything the integrators need, built once per `(β, truncation)`.
pub struct Model {
    pub basis: Basis,
    pub set: ResonantSet,
    pub resonant: InteractionTensor,
    pub full: Option<InteractionTensor>,
    pub diffusion: DiffusionMatrix,
}

impl Model {
    /// Builds the limit-system operators, and the full tensor when `with_full`.
    /// Tensors are read from and written to `cache` when given.
    pub fn new(beta: f64, trunc: Truncation, with_full: bool, cache: Option<&Path>) -> Result<Model> {
        let basis = Basis::new(beta, trunc)?;
        let ctx = context_for(&basis)?;
        let set = ResonantSet::for_layout(&basis.layout, RESONANCE_TOL)?;
        let tb = TensorBuilder::new(&ctx, &basis)?;
        let resonant = cached_tensor(cache, &basis.layout, TensorKind::Resonant, || tb.resonant(&set))?;
        let full = if with_full {
            Some(cached_tensor(cache, &basis.layout, TensorKind::Full, || Ok(tb.full()))?)
        } else {
            None
        };
        let diffusion = DiffusionMatrix::new(&basis);
        Ok(Model { basis, set, resonant, full, diffusion })
    }

    pub fn layout(&self) -> &Arc<ModeLayout> {
        &self.basis.layout
    }

    fn full(&self) -> Result<&InteractionTensor> {
        self.full
            .as_ref()
            .ok_or_else(|| Error::Configuration("the filtered system needs the full interaction tensor".into()))
    }
}

fn rk4_step<F>(f: &F, t: f64, y: &ModeCoefficients, dt: f64) -> Result<ModeCoefficients>
where
    F: Fn(f64, &ModeCoefficients) -> Result<ModeCoefficients>,
{
    let stage = |k: &ModeCoefficients, h: f64| {
        let mut z = y.clone();
        z.axpy(C64::new(h, 0.0), k);
        z
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &stage(&k1, 0.5 * dt))?;
    let k3 = f(t + 0.5 * dt, &stage(&k2, 0.5 * dt))?;
    let k4 = f(t + dt, &stage(&k3, dt))?;
    let mut out = y.clone();
    let w = C64::new(dt / 6.0, 0.0);
    out.axpy(w, &k1);
    out.axpy(w * 2.0, &k2);
    out.axpy(w * 2.0, &k3);
    out.axpy(w, &k4);
    if out.real {
        out.enforce_real();
    }
    Ok(out)
}

/// Per-wavenumber exponentials of a block-diagonal linear generator.
struct BlockExp {
    bs: usize,
    blocks: Vec<DMatrix<C64>>,
}

impl BlockExp {
    fn new(layout: &ModeLayout, generator: impl Fn(usize) -> DMatrix<C64> + Sync, h: f64) -> BlockExp {
        let blocks = (0..layout.k_count()).into_par_iter().map(|ki| (generator(ki) * C64::new(h, 0.0)).exp()).collect();
        BlockExp { bs: layout.block(), blocks }
    }

    fn apply(&self, x: &ModeCoefficients) -> ModeCoefficients {
        let mut out = x.clone();
        for (ki, m) in self.blocks.iter().enumerate() {
            let base = ki * self.bs;
            let v = DVector::from_column_slice(&x.phi[base..base + self.bs]);
            let w = m * v;
            out.phi[base..base + self.bs].copy_from_slice(w.as_slice());
        }
        out.mask();
        if out.real {
            out.enforce_real();
        }
        out
    }
}

fn diffusion_block(d: &DiffusionMatrix, ki: usize, limited: bool) -> DMatrix<C64> {
    let l = &d.layout;
    let bs = l.block();
    let base = ki * bs;
    if limited {
        return d.group_block(ki);
    }
    DMatrix::from_fn(bs, bs, |r, c| d.entry(base + r, base + c))
}

fn check_initial(layout: &Arc<ModeLayout>, mc0: &ModeCoefficients) -> Result<()> {
    if !layout.same(&mc0.layout) {
        return Err(Error::Configuration("initial state uses a different truncation or beta".into()));
    }
    Ok(())
}

struct Recorder {
    traj: Trajectory,
    every: usize,
    e0: f64,
    last_rate: f64,
}

impl Recorder {
    fn new(mc0: &ModeCoefficients, rate0: f64, every: usize, nu: f64) -> Recorder {
        let l2 = mc0.l2_norm().powi(2);
        Recorder {
            traj: Trajectory {
                times: vec![0.0],
                states: vec![mc0.clone()],
                diagnostics: vec![Diagnostics {
                    t: 0.0,
                    l2,
                    hl1_perp: mc0.ageostrophic().hl_norm(1.0),
                    dissipation: 0.0,
                }],
                nu,
            },
            every,
            e0: l2,
            last_rate: rate0,
        }
    }

    fn push(&mut self, step: usize, t: f64, dt: f64, y: &ModeCoefficients, rate: f64, last: bool) -> Result<()> {
        let l2 = y.l2_norm().powi(2);
        if !l2.is_finite() || (self.e0 > 0.0 && l2 > 10.0 * self.e0) {
            return Err(Error::Instability {
                step,
                t,
                growth: l2 / self.e0,
            });
        }
        let prev = self.traj.diagnostics.last().unwrap().dissipation;
        self.traj.diagnostics.push(Diagnostics {
            t,
            l2,
            hl1_perp: y.ageostrophic().hl_norm(1.0),
            dissipation: prev + 0.5 * dt * (self.last_rate + rate),
        });
        self.last_rate = rate;
        if step % self.every == 0 || last {
            self.traj.times.push(t);
            self.traj.states.push(y.clone());
        }
        Ok(())
    }
}

/// `dφ/dt = −K_N Q_L(K_Nφ, K_Nφ) + νK_N Δ'_L K_Nφ`.
pub fn integrate_limit(cfg: &SolverConfig, model: &Model, mc0: &ModeCoefficients) -> Result<Trajectory> {
    let layout = model.layout().clone();
    cfg.validate(System::Limit, &layout)?;
    check_initial(&layout, mc0)?;
    let mut y = mc0.clone();
    y.mask();
    let d = &model.diffusion;
    let nu = cfg.nu;
    let quad = |_t: f64, x: &ModeCoefficients| -> Result<ModeCoefficients> {
        let mut q = if cfg.nonlinear {
            model.resonant.q_apply(x, x)?
        } else {
            ModeCoefficients::zeros(layout.clone(), x.real)
        };
        q.scale(-1.0);
        Ok(q)
    };
    let full_rhs = |t: f64, x: &ModeCoefficients| -> Result<ModeCoefficients> {
        let mut r = quad(t, x)?;
        if nu != 0.0 {
            r.axpy(C64::new(nu, 0.0), &d.apply_l(x));
        }
        Ok(r)
    };
    let rate = |x: &ModeCoefficients| d.dissipation(x, 0.0);
    let half = (cfg.integrator == Integrator::StrangExp && nu != 0.0)
        .then(|| BlockExp::new(&layout, |ki| diffusion_block(d, ki, true) * C64::new(nu, 0.0), 0.5 * cfg.dt));
    let steps = cfg.steps();
    let mut rec = Recorder::new(&y, rate(&y), cfg.snapshot_every(), nu);
    for s in 1..=steps {
        let t0 = (s - 1) as f64 * cfg.dt;
        y = match &half {
            None => rk4_step(&full_rhs, t0, &y, cfg.dt)?,
            Some(e) => {
                let a = e.apply(&y);
                let b = if cfg.nonlinear { rk4_step(&quad, t0, &a, cfg.dt)? } else { a };
                e.apply(&b)
            }
        };
        rec.push(s, s as f64 * cfg.dt, cfg.dt, &y, rate(&y), s == steps)?;
    }
    Ok(rec.traj)
}

/// Filtered ε-system; the phase rotations are applied exactly at every stage.
pub fn integrate_filtered(cfg: &SolverConfig, model: &Model, mc0: &ModeCoefficients) -> Result<Trajectory> {
    let layout = model.layout().clone();
    cfg.validate(System::Filtered, &layout)?;
    check_initial(&layout, mc0)?;
    let full = model.full()?;
    let eps = cfg.eps.unwrap();
    let nu = cfg.nu;
    let d = &model.diffusion;
    let mut y = mc0.clone();
    y.mask();
    // Right-hand side in the rotated unknown a = 𝓛(t/ε)φ, without the −iτa/ε term.
    let rotated = |x: &ModeCoefficients, with_diffusion: bool| -> Result<ModeCoefficients> {
        let mut r = if cfg.nonlinear {
            full.q_apply(x, x)?
        } else {
            ModeCoefficients::zeros(layout.clone(), x.real)
        };
        r.scale(-1.0);
        if with_diffusion && nu != 0.0 {
            r.axpy(C64::new(nu, 0.0), &d.apply(x));
        }
        Ok(r)
    };
    let rate = |x: &ModeCoefficients, t: f64| {
        let a = x.filter(t / eps);
        let da = d.apply(&a);
        -a.inner(&da).re
    };
    let steps = cfg.steps();
    let mut rec = Recorder::new(&y, rate(&y, 0.0), cfg.snapshot_every(), nu);
    match cfg.integrator {
        Integrator::Rk4 => {
            let rhs = |t: f64, x: &ModeCoefficients| -> Result<ModeCoefficients> {
                Ok(rotated(&x.filter(t / eps), true)?.filter(-t / eps))
            };
            for s in 1..=steps {
                let t0 = (s - 1) as f64 * cfg.dt;
                y = rk4_step(&rhs, t0, &y, cfg.dt)?;
                let t1 = s as f64 * cfg.dt;
                rec.push(s, t1, cfg.dt, &y, rate(&y, t1), s == steps)?;
            }
        }
        Integrator::StrangExp => {
            let taus = layout.taus().to_vec();
            let bs = layout.block();
            let half = BlockExp::new(
                &layout,
                |ki| {
                    let mut g = diffusion_block(d, ki, false) * C64::new(nu, 0.0);
                    for r in 0..bs {
                        g[(r, r)] -= C64::new(0.0, taus[ki * bs + r] / eps);
                    }
                    g
                },
                0.5 * cfg.dt,
            );
            let quad = |_t: f64, x: &ModeCoefficients| rotated(x, false);
            for s in 1..=steps {
                let t0 = (s - 1) as f64 * cfg.dt;
                let t1 = s as f64 * cfg.dt;
                let a = half.apply(&y.filter(t0 / eps));
                let b = if cfg.nonlinear { rk4_step(&quad, t0, &a, cfg.dt)? } else { a };
                y = half.apply(&b).filter(-t1 / eps);
                rec.push(s, t1, cfg.dt, &y, rate(&y, t1), s == steps)?;
            }
        }
    }
    Ok(rec.traj)
}

/// Kernel coefficients `φ_n` of `Ψ_{n,0,0}`, `n ≤ n_max`, of an eigen-coordinate state.
pub fn kernel_coefficients(mc: &ModeCoefficients) -> Vec<C64> {
    let l = &mc.layout;
    (0..=l.trunc.n_max)
        .map(|n| mc.get(crate::dispersion::ModeIndex { n, k: 0, j: 0 }))
        .collect()
}

/// `exp(νt G)` applied to kernel coefficients, with `G = Π₀Δ'Π₀`. A shorter
/// coefficient vector uses the Galerkin restriction of `G` to its leading block.
pub fn geostrophic_solve(g: &GeostrophicDiffusion, coeffs0: &[C64], nu: f64, t: f64) -> Result<Vec<C64>> {
    if !(nu >= 0.0) {
        return Err(Error::InvalidArgument(format!("nu must be nonnegative, got {nu}")));
    }
    let d = coeffs0.len();
    if d == 0 || d > g.n_max + 1 {
        return Err(Error::InvalidArgument(format!("expected 1 to {} kernel coefficients, got {d}", g.n_max + 1)));
    }
    if nu == 0.0 || t == 0.0 {
        return Ok(coeffs0.to_vec());
    }
    let e = SymmetricEigen::new(g.matrix.view((0, 0), (d, d)).into_owned());
    let lam = DMatrix::from_diagonal(&e.eigenvalues.map(|l| (nu * t * l).exp()));
    let m = &e.eigenvectors * lam * e.eigenvectors.transpose();
    let re = &m * DVector::from_iterator(d, coeffs0.iter().map(|z| z.re));
    let im = &m * DVector::from_iterator(d, coeffs0.iter().map(|z| z.im));
    Ok(re.iter().zip(im.iter()).map(|(&a, &b)| C64::new(a, b)).collect())
}

/// Step size for a sweep member: the requested step, capped for rk4 on the
/// filtered system, and shrunk so that 0.01 is a whole number of steps.
pub fn sweep_dt(cfg: &SolverConfig, layout: &ModeLayout, eps: Option<f64>) -> f64 {
    let mut dt = cfg.dt;
    if let (Some(e), Integrator::Rk4) = (eps, cfg.integrator) {
        let m = layout.max_abs_tau();
        if m > 0.0 {
            dt = dt.min(e / (10.0 * m));
        }
    }
    if dt >= 0.01 {
        return dt;
    }
    0.01 / (0.01 / dt).ceil()
}

fn sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times.len() != b.times.len() {
        return Err(Error::Consistency("trajectories were saved at different times".into()));
    }
    let mut sup = 0.0f64;
    for (i, (x, y)) in a.states.iter().zip(&b.states).enumerate() {
        if (a.times[i] - b.times[i]).abs() > 1e-9 {
            return Err(Error::Consistency("trajectories were saved at different times".into()));
        }
        sup = sup.max(x.distance(y));
    }
    Ok(sup)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Least-squares slope of `log(error)` against `log(ε)`.
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps.iter().zip(err).filter(|(e, r)| **e > 0.0 && **r > 0.0).map(|(e, r)| (e.ln(), r.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub eps: Vec<f64>,
    /// `sup_t ‖Φ_ε(t) − Φ(t)‖`.
    pub sup_error: Vec<f64>,
    /// `sup_t ‖Φ_ε(t) − (Φ̃(t) + εφ_N(Φ̃(t), t))‖`, with `Φ̃` the limit flow from `Φ⁰ − εφ_N(Φ⁰, 0)`.
    pub sup_error_corrected: Option<Vec<f64>>,
    pub monotone: bool,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakLimitReport {
    pub eps: Vec<f64>,
    /// `sup_t ‖Π₀Φ_ε(t) − exp(νtG)Π₀Φ⁰‖`.
    pub sup_kernel_error: Vec<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub limit: Trajectory,
    pub filtered: Vec<Trajectory>,
    pub convergence: ConvergenceReport,
    pub weak: WeakLimitReport,
}

fn corrected_error(cfg: &SolverConfig, model: &Model, mc0: &ModeCoefficients, eps: f64, filtered: &Trajectory) -> Result<f64> {
    let full = model.full()?;
    let phi0 = corrector(full, &model.set, &model.diffusion, mc0, eps, 0.0, cfg.nu)?;
    let mut start = mc0.clone();
    start.axpy(C64::new(-eps, 0.0), &phi0);
    let mut lcfg = cfg.clone();
    lcfg.eps = None;
    lcfg.dt = sweep_dt(cfg, model.layout(), None);
    let prepared = integrate_limit(&lcfg, model, &start)?;
    if prepared.times.len() != filtered.times.len() {
        return Err(Error::Consistency("trajectories were saved at different times".into()));
    }
    let mut sup = 0.0f64;
    for (i, s) in prepared.states.iter().enumerate() {
        let mut approx = s.clone();
        let c = corrector(full, &model.set, &model.diffusion, s, eps, prepared.times[i], cfg.nu)?;
        approx.axpy(C64::new(eps, 0.0), &c);
        sup = sup.max(filtered.states[i].distance(&approx));
    }
    Ok(sup)
}

/// Runs the filtered system for every `ε` and compares with the limit system
/// (strong convergence) and with the geostrophic flow (weak limit).
pub fn run_sweep(cfg: &SolverConfig, model: &Model, eps_list: &[f64], mc0: &ModeCoefficients, with_corrector: bool) -> Result<SweepResult> {
    if eps_list.is_empty() || !eps_list.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("eps list must be nonempty and strictly decreasing".into()));
    }
    let layout = model.layout().clone();
    let mut lcfg = cfg.clone();
    lcfg.eps = None;
    lcfg.dt = sweep_dt(cfg, &layout, None);
    let limit = integrate_limit(&lcfg, model, mc0)?;
    let filtered: Vec<Trajectory> = eps_list
        .par_iter()
        .map(|&e| {
            let mut f = cfg.clone();
            f.eps = Some(e);
            f.dt = sweep_dt(cfg, &layout, Some(e));
            integrate_filtered(&f, model, mc0)
        })
        .collect::<Result<_>>()?;
    let sup_error = filtered.iter().map(|f| sup_distance(f, &limit)).collect::<Result<Vec<_>>>()?;
    let sup_error_corrected = if with_corrector {
        Some(
            eps_list
                .par_iter()
                .zip(&filtered)
                .map(|(&e, f)| corrected_error(cfg, model, mc0, e, f))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let weak = weak_limit_report(cfg, model, eps_list, mc0, &filtered)?;
    Ok(SweepResult {
        convergence: ConvergenceReport {
            eps: eps_list.to_vec(),
            monotone: strictly_decreasing(&sup_error),
            order: loglog_slope(eps_list, &sup_error),
            sup_error,
            sup_error_corrected,
        },
        weak,
        limit,
        filtered,
    })
}

fn weak_limit_report(cfg: &SolverConfig, model: &Model, eps_list: &[f64], mc0: &ModeCoefficients, filtered: &[Trajectory]) -> Result<WeakLimitReport> {
    let n_kernel = model.layout().trunc.n_max.max(5);
    let g = GeostrophicDiffusion::new(cfg.beta, n_kernel)?;
    let k0 = kernel_coefficients(mc0);
    let mut sup = Vec::with_capacity(filtered.len());
    for f in filtered {
        let mut worst = 0.0f64;
        for (t, s) in f.times.iter().zip(&f.states) {
            let want = geostrophic_solve(&g, &k0, cfg.nu, *t)?;
            let got = kernel_coefficients(s);
            let e: f64 = want.iter().zip(&got).map(|(w, g)| (g - w).norm_sqr()).sum();
            worst = worst.max(e.sqrt());
        }
        sup.push(worst);
    }
    Ok(WeakLimitReport {
        eps: eps_list.to_vec(),
        monotone: strictly_decreasing(&sup),
        sup_kernel_error: sup,
    })
}

/// Strong-convergence experiment: filtered vs limit trajectories for each `ε`.
pub fn convergence_sweep(cfg: &SolverConfig, model: &Model, eps_list: &[f64], mc0: &ModeCoefficients) -> Result<ConvergenceReport> {
    Ok(run_sweep(cfg, model, eps_list, mc0, true)?.convergence)
}

/// Weak-limit experiment: `Π₀Φ_ε` against the geostrophic flow for each `ε`.
pub fn weak_limit_experiment(cfg: &SolverConfig, model: &Model, mc0: &ModeCoefficients, eps_list: &[f64]) -> Result<WeakLimitReport> {
    Ok(run_sweep(cfg, model, eps_list, mc0, false)?.weak)
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    system: System,
    config: &'a SolverConfig,
    snapshots: usize,
}

/// Writes `meta.json`, `diagnostics.csv` and `snapshots/snap_NNNNN.csv`.
pub fn write_trajectory(dir: &Path, cfg: &SolverConfig, system: System, basis: &Basis, traj: &Trajectory) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))?;
    let meta = Meta {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        system,
        config: cfg,
        snapshots: traj.states.len(),
    };
    let mut w = BufWriter::new(fs::File::create(dir.join("meta.json"))?);
    serde_json::to_writer_pretty(&mut w, &meta).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    let mut w = BufWriter::new(fs::File::create(dir.join("diagnostics.csv"))?);
    writeln!(w, "t,l2,hl1_perp,dissipation")?;
    for d in &traj.diagnostics {
        writeln!(w, "{:e},{:e},{:e},{:e}", d.t, d.l2, d.hl1_perp, d.dissipation)?;
    }
    w.flush()?;
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate() {
        save_snapshot(&dir.join("snapshots").join(format!("snap_{i:05}.csv")), &basis.synthesize(s), *t)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrator_names() {
        for i in [Integrator::Rk4, Integrator::StrangExp] {
            assert_eq!(Integrator::parse(i.name()).unwrap(), i);
        }
        assert!(Integrator::parse("euler").is_err());
    }

    #[test]
    fn cadence() {
        let mut c = SolverConfig::new(1.0, Truncation::rect(2, 2));
        c.dt = 1e-3;
        assert_eq!(c.snapshot_every(), 10);
        c.dt = 0.05;
        assert_eq!(c.snapshot_every(), 1);
        assert_eq!(c.steps(), 20);
    }

    #[test]
    fn slope_of_power_law() {
        let e = [0.2, 0.1, 0.05];
        let r: Vec<f64> = e.iter().map(|x: &f64| 3.0 * x * x).collect();
        assert!((loglog_slope(&e, &r).unwrap() - 2.0).abs() < 1e-12);
    }
}
