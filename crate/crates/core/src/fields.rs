//! Three-component states `(η, u₁, u₂)` in Hermite–Fourier and eigenmode coordinates.
//!
//! Hermite–Fourier coefficients are taken against the orthonormal basis
//! `(2π)^{-1/2} ψ_n(x₁) e^{ikx₂}`, so the `L²(R×T)` norm is the Euclidean norm.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dispersion::{classify, tau, ModeIndex, WaveClass};
use crate::error::{Error, Result};
use crate::hermite::{HermiteContext, Quadrature};

/// Rectangle `n ≤ n_max, |k| ≤ k_max`, optionally intersected with the ball `n + k² ≤ N²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub n_max: usize,
    pub k_max: usize,
    pub ball: Option<f64>,
}

impl Truncation {
    pub fn rect(n_max: usize, k_max: usize) -> Truncation {
        Truncation {
            n_max,
            k_max,
            ball: None,
        }
    }

    /// The ball `(n + k²)^{1/2} ≤ N` inside its bounding rectangle.
    pub fn ball(radius: f64) -> Truncation {
        let r2 = radius * radius;
        Truncation {
            n_max: r2.floor() as usize,
            k_max: radius.floor() as usize,
            ball: Some(radius),
        }
    }

    pub fn contains(&self, n: usize, k: i32) -> bool {
        if n > self.n_max || k.unsigned_abs() as usize > self.k_max {
            return false;
        }
        match self.ball {
            Some(r) => ((n as f64) + (k as f64).powi(2)) <= r * r * (1.0 + 1e-12),
            None => true,
        }
    }
}

/// Flat indexing of eigenmodes in a truncation, with cached frequencies.
#[derive(Debug)]
pub struct ModeLayout {
    pub beta: f64,
    pub trunc: Truncation,
    taus: Vec<f64>,
    active: Vec<bool>,
}

impl ModeLayout {
    pub fn new(beta: f64, trunc: Truncation) -> Arc<ModeLayout> {
        let nn = trunc.n_max + 1;
        let nk = 2 * trunc.k_max + 1;
        let mut taus = vec![0.0; 3 * nn * nk];
        let mut active = vec![false; 3 * nn * nk];
        for ki in 0..nk {
            let k = ki as i32 - trunc.k_max as i32;
            for n in 0..nn {
                for j in 0..3 {
                    let i = (ki * nn + n) * 3 + j;
                    taus[i] = tau(beta, ModeIndex { n, k, j: j as i8 - 1 });
                    active[i] = trunc.contains(n, k);
                }
            }
        }
        Arc::new(ModeLayout {
            beta,
            trunc,
            taus,
            active,
        })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Number of slots sharing one wavenumber, `3(n_max+1)`.
    pub fn block(&self) -> usize {
        3 * (self.trunc.n_max + 1)
    }

    pub fn k_count(&self) -> usize {
        2 * self.trunc.k_max + 1
    }

    pub fn index(&self, m: ModeIndex) -> Option<usize> {
        if m.n > self.trunc.n_max || m.k.unsigned_abs() as usize > self.trunc.k_max || !(-1..=1).contains(&m.j) {
            return None;
        }
        let ki = (m.k + self.trunc.k_max as i32) as usize;
        Some((ki * (self.trunc.n_max + 1) + m.n) * 3 + (m.j + 1) as usize)
    }

    pub fn mode(&self, i: usize) -> ModeIndex {
        let nn = self.trunc.n_max + 1;
        let j = (i % 3) as i8 - 1;
        let n = (i / 3) % nn;
        let k = (i / (3 * nn)) as i32 - self.trunc.k_max as i32;
        ModeIndex { n, k, j }
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.taus[i]
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.active[i])
    }

    pub fn max_abs_tau(&self) -> f64 {
        self.active_indices().map(|i| self.taus[i].abs()).fold(0.0, f64::max)
    }

    pub fn conjugate_index(&self, i: usize) -> usize {
        self.index(self.mode(i).conjugate()).expect("truncation is symmetric in k")
    }

    pub fn same(&self, other: &ModeLayout) -> bool {
        self.beta == other.beta && self.trunc == other.trunc
    }
}

/// Coefficients `φ_{n,k,j}` over the eigenbasis.
#[derive(Debug, Clone)]
pub struct ModeCoefficients {
    pub layout: Arc<ModeLayout>,
    pub real: bool,
    pub phi: Vec<Complex64>,
}

impl ModeCoefficients {
    pub fn zeros(layout: Arc<ModeLayout>, real: bool) -> ModeCoefficients {
        let phi = vec![Complex64::new(0.0, 0.0); layout.len()];
        ModeCoefficients { layout, real, phi }
    }

    pub fn unit(layout: Arc<ModeLayout>, m: ModeIndex) -> Result<ModeCoefficients> {
        let i = layout.index(m).filter(|&i| layout.is_active(i)).ok_or_else(|| Error::IndexOutOfRange {
            what: "mode",
            value: m.n as i64,
            limit: layout.trunc.n_max as i64,
        })?;
        let mut mc = ModeCoefficients::zeros(layout, false);
        mc.phi[i] = Complex64::new(1.0, 0.0);
        Ok(mc)
    }

    /// Seeded smooth random state: complex Gaussians damped by `(1+n+k²)^{-2}`.
    /// Each mode draws from its own stream, so overlapping truncations share values.
    pub fn random(layout: Arc<ModeLayout>, seed: u64, real: bool) -> ModeCoefficients {
        let mut mc = ModeCoefficients::zeros(layout.clone(), real);
        for i in layout.active_indices() {
            let m = layout.mode(i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let key = ((m.n as u64) << 34) | ((((m.k as i64) + (1 << 30)) as u64) << 2) | (m.j + 1) as u64;
            rng.set_stream(key);
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let damp = (1.0 + m.n as f64 + (m.k as f64).powi(2)).powi(-2);
            mc.phi[i] = Complex64::new(re, im) * damp;
        }
        if real {
            mc.enforce_real();
        }
        mc
    }

    pub fn get(&self, m: ModeIndex) -> Complex64 {
        self.layout.index(m).map_or(Complex64::new(0.0, 0.0), |i| self.phi[i])
    }

    /// Symmetrizes `φ_{n,−k,−j} = conj(φ_{n,k,j})`, the condition for a real physical state.
    pub fn enforce_real(&mut self) {
        let l = self.layout.clone();
        for i in 0..l.len() {
            let c = l.conjugate_index(i);
            if c < i {
                continue;
            }
            let v = 0.5 * (self.phi[i] + self.phi[c].conj());
            self.phi[i] = v;
            self.phi[c] = v.conj();
        }
        self.real = true;
    }

    pub fn mask(&mut self) {
        for i in 0..self.phi.len() {
            if !self.layout.is_active(i) {
                self.phi[i] = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.hl_norm(0.0)
    }

    pub fn hl_norm(&self, s: f64) -> f64 {
        let l = &self.layout;
        self.phi
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let m = l.mode(i);
                (1.0 + m.n as f64 + (m.k as f64).powi(2)).powf(s) * v.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn tau_weighted_norm(&self, s: f64) -> f64 {
        self.phi
            .iter()
            .enumerate()
            .map(|(i, v)| (1.0 + self.layout.tau(i).powi(2)).powf(s) * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn project(&self, class: WaveClass) -> ModeCoefficients {
        let mut out = self.clone();
        for (i, v) in out.phi.iter_mut().enumerate() {
            let m = self.layout.mode(i);
            if classify(m.n, m.k, m.j) != class {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Everything outside the kernel: `(Id − Π₀)`.
    pub fn ageostrophic(&self) -> ModeCoefficients {
        let mut out = self.clone();
        let g = self.project(WaveClass::Geostrophic);
        for (o, v) in out.phi.iter_mut().zip(&g.phi) {
            *o -= v;
        }
        out
    }

    /// `φ ↦ e^{−itτ} φ`.
    pub fn filter(&self, t: f64) -> ModeCoefficients {
        let mut out = self.clone();
        for (i, v) in out.phi.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -t * self.layout.tau(i));
        }
        out
    }

    pub fn inner(&self, other: &ModeCoefficients) -> Complex64 {
        self.phi.iter().zip(&other.phi).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn axpy(&mut self, a: Complex64, x: &ModeCoefficients) {
        for (y, v) in self.phi.iter_mut().zip(&x.phi) {
            *y += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in self.phi.iter_mut() {
            *v *= a;
        }
    }

    pub fn distance(&self, other: &ModeCoefficients) -> f64 {
        self.phi
            .iter()
            .zip(&other.phi)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Hermite–Fourier coefficients of `(η, u₁, u₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub beta: f64,
    pub n_max: usize,
    pub k_max: usize,
    pub real: bool,
    pub coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(beta: f64, n_max: usize, k_max: usize, real: bool) -> SpectralField {
        SpectralField {
            beta,
            n_max,
            k_max,
            real,
            coeffs: vec![Complex64::new(0.0, 0.0); 3 * (n_max + 1) * (2 * k_max + 1)],
        }
    }

    #[inline]
    pub fn idx(&self, c: usize, n: usize, k: i32) -> usize {
        ((c * (2 * self.k_max + 1)) + (k + self.k_max as i32) as usize) * (self.n_max + 1) + n
    }

    pub fn get(&self, c: usize, n: usize, k: i32) -> Complex64 {
        if n > self.n_max || k.unsigned_abs() as usize > self.k_max {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[self.idx(c, n, k)]
    }

    pub fn set(&mut self, c: usize, n: usize, k: i32, v: Complex64) {
        let i = self.idx(c, n, k);
        self.coeffs[i] = v;
    }

    /// Hermite series of component `c` at wavenumber `k`.
    pub fn series(&self, c: usize, k: i32) -> &[Complex64] {
        let s = self.idx(c, 0, k);
        &self.coeffs[s..s + self.n_max + 1]
    }

    pub fn series_mut(&mut self, c: usize, k: i32) -> &mut [Complex64] {
        let s = self.idx(c, 0, k);
        let len = self.n_max + 1;
        &mut self.coeffs[s..s + len]
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Copy into a (possibly different) truncation, dropping what does not fit.
    pub fn resized(&self, n_max: usize, k_max: usize) -> SpectralField {
        let mut out = SpectralField::zeros(self.beta, n_max, k_max, self.real);
        let km = self.k_max.min(k_max) as i32;
        for c in 0..3 {
            for k in -km..=km {
                for n in 0..=self.n_max.min(n_max) {
                    out.set(c, n, k, self.get(c, n, k));
                }
            }
        }
        out
    }

    /// Seeded random field with the same damping as [`ModeCoefficients::random`].
    pub fn random(beta: f64, n_max: usize, k_max: usize, seed: u64, real: bool) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(beta, n_max, k_max, real);
        for c in 0..3 {
            for k in -(k_max as i32)..=k_max as i32 {
                for n in 0..=n_max {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    let damp = (1.0 + n as f64 + (k as f64).powi(2)).powi(-2);
                    f.set(c, n, k, Complex64::new(re, im) * damp);
                }
            }
        }
        if real {
            f.enforce_real();
        }
        f
    }

    pub fn enforce_real(&mut self) {
        for c in 0..3 {
            for k in 0..=self.k_max as i32 {
                for n in 0..=self.n_max {
                    let v = 0.5 * (self.get(c, n, k) + self.get(c, n, -k).conj());
                    self.set(c, n, k, v);
                    self.set(c, n, -k, v.conj());
                }
            }
        }
        self.real = true;
    }
}

/// Tensor grid: quadrature nodes in `x₁`, `n2` uniform points on `[0, 2π)` in `x₂`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub x1: Vec<f64>,
    pub w1: Vec<f64>,
    pub n2: usize,
}

impl Grid {
    pub fn from_quadrature(q: &Quadrature, n2: usize) -> Grid {
        Grid {
            x1: q.nodes.clone(),
            w1: q.deweighted.clone(),
            n2,
        }
    }

    /// Weight-scale 1 nodes of the context and the minimal `x₂` resolution for `k_max`.
    pub fn standard(ctx: &HermiteContext, k_max: usize) -> Grid {
        Grid::from_quadrature(ctx.quadrature(1.0).expect("scale 1 is always present"), 2 * k_max + 1)
    }

    pub fn x2(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.n2 as f64
    }
}

/// Point values `values[(c·len(x1) + i)·n2 + m]`.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl PhysicalField {
    pub fn at(&self, c: usize, i: usize, m: usize) -> Complex64 {
        self.values[(c * self.grid.x1.len() + i) * self.grid.n2 + m]
    }

    /// Pointwise product of component `a` of `self` with component `b` of `other`.
    pub fn product(&self, a: usize, other: &PhysicalField, b: usize) -> Vec<Complex64> {
        let nx = self.grid.x1.len();
        let n2 = self.grid.n2;
        (0..nx * n2)
            .map(|p| self.values[a * nx * n2 + p] * other.values[b * nx * n2 + p])
            .collect()
    }
}

/// Evaluates all components on a grid.
pub fn synthesize(ctx: &HermiteContext, field: &SpectralField, grid: &Grid) -> Result<PhysicalField> {
    if grid.n2 < 2 * field.k_max + 1 {
        return Err(Error::Resolution(format!(
            "{} points in x2 cannot resolve |k| <= {}",
            grid.n2, field.k_max
        )));
    }
    if grid.x1.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite x1 node".into()));
    }
    let nx = grid.x1.len();
    let n2 = grid.n2;
    let nk = 2 * field.k_max + 1;
    let norm = (2.0 * PI).powf(-0.5);
    let mut psi = vec![0.0; field.n_max + 1];
    let mut values = vec![Complex64::new(0.0, 0.0); 3 * nx * n2];
    let mut by_k = vec![Complex64::new(0.0, 0.0); nk];
    for (i, &x) in grid.x1.iter().enumerate() {
        ctx.psi_all_into(x, &mut psi);
        for c in 0..3 {
            for (ki, slot) in by_k.iter_mut().enumerate() {
                let k = ki as i32 - field.k_max as i32;
                *slot = field.series(c, k).iter().zip(&psi).map(|(a, p)| a * p).sum::<Complex64>() * norm;
            }
            for m in 0..n2 {
                let x2 = grid.x2(m);
                let mut s = Complex64::new(0.0, 0.0);
                for (ki, v) in by_k.iter().enumerate() {
                    let k = ki as i32 - field.k_max as i32;
                    s += v * Complex64::from_polar(1.0, k as f64 * x2);
                }
                values[(c * nx + i) * n2 + m] = s;
            }
        }
    }
    Ok(PhysicalField {
        grid: grid.clone(),
        values,
    })
}

/// Projects grid values of one scalar onto `(2π)^{-1/2}ψ_n e^{ikx₂}`, `n ≤ n_max`, `|k| ≤ k_max`.
/// Returns coefficients indexed `(k + k_max)·(n_max+1) + n`.
pub fn analyze_scalar(ctx: &HermiteContext, grid: &Grid, values: &[Complex64], n_max: usize, k_max: usize) -> Vec<Complex64> {
    let nx = grid.x1.len();
    let n2 = grid.n2;
    let nk = 2 * k_max + 1;
    let mut fourier = vec![Complex64::new(0.0, 0.0); nx * nk];
    for i in 0..nx {
        for ki in 0..nk {
            let k = ki as f64 - k_max as f64;
            let mut s = Complex64::new(0.0, 0.0);
            for m in 0..n2 {
                s += values[i * n2 + m] * Complex64::from_polar(1.0, -k * grid.x2(m));
            }
            fourier[i * nk + ki] = s * ((2.0 * PI).sqrt() / n2 as f64);
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); nk * (n_max + 1)];
    let mut psi = vec![0.0; n_max + 1];
    for (i, &x) in grid.x1.iter().enumerate() {
        ctx.psi_all_into(x, &mut psi);
        let w = grid.w1[i];
        for ki in 0..nk {
            let f = fourier[i * nk + ki] * w;
            for n in 0..=n_max {
                out[ki * (n_max + 1) + n] += f * psi[n];
            }
        }
    }
    out
}

/// Inverse of [`synthesize`] for fields of the given truncation.
pub fn analyze(ctx: &HermiteContext, phys: &PhysicalField, n_max: usize, k_max: usize, real: bool) -> Result<SpectralField> {
    let grid = &phys.grid;
    if grid.n2 < 2 * k_max + 1 {
        return Err(Error::Resolution(format!("{} points in x2 cannot resolve |k| <= {k_max}", grid.n2)));
    }
    if grid.x1.len() < n_max + 1 {
        return Err(Error::Resolution(format!(
            "{} nodes in x1 cannot resolve n <= {n_max}",
            grid.x1.len()
        )));
    }
    let nx = grid.x1.len();
    let mut f = SpectralField::zeros(ctx.beta(), n_max, k_max, real);
    for c in 0..3 {
        let part = analyze_scalar(ctx, grid, &phys.values[c * nx * grid.n2..(c + 1) * nx * grid.n2], n_max, k_max);
        for k in -(k_max as i32)..=k_max as i32 {
            let ki = (k + k_max as i32) as usize;
            f.series_mut(c, k).copy_from_slice(&part[ki * (n_max + 1)..(ki + 1) * (n_max + 1)]);
        }
    }
    if real {
        f.enforce_real();
    }
    Ok(f)
}

const SNAPSHOT_FORMAT: &str = "betaplane-snapshot";
const SNAPSHOT_VERSION: u32 = 1;

/// First line of a snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    pub beta: f64,
    pub n_max: usize,
    pub k_max: usize,
    pub real: bool,
    pub time: f64,
}

/// Writes a snapshot: a JSON header line, then CSV rows `component,n,k,re,im`
/// ordered by component, then `k`, then `n`.
pub fn write_snapshot<W: Write>(mut w: W, field: &SpectralField, time: f64) -> Result<()> {
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        version: SNAPSHOT_VERSION,
        beta: field.beta,
        n_max: field.n_max,
        k_max: field.k_max,
        real: field.real,
        time,
    };
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(w)?;
    writeln!(w, "component,n,k,re,im")?;
    for c in 0..3 {
        for k in -(field.k_max as i32)..=field.k_max as i32 {
            for n in 0..=field.n_max {
                let v = field.get(c, n, k);
                writeln!(w, "{c},{n},{k},{:e},{:e}", v.re, v.im)?;
            }
        }
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<(SpectralField, f64)> {
    let mut lines = r.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))??;
    let h: SnapshotHeader = serde_json::from_str(&first).map_err(|e| Error::Parse(e.to_string()))?;
    if h.format != SNAPSHOT_FORMAT || h.version != SNAPSHOT_VERSION {
        return Err(Error::Parse(format!("unsupported snapshot format {} v{}", h.format, h.version)));
    }
    let mut f = SpectralField::zeros(h.beta, h.n_max, h.k_max, h.real);
    let cols = lines.next().ok_or_else(|| Error::Parse("missing column header".into()))??;
    if cols.trim() != "component,n,k,re,im" {
        return Err(Error::Parse(format!("unexpected columns {cols:?}")));
    }
    let mut seen = vec![false; f.coeffs.len()];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(Error::Parse(format!("bad snapshot row {line:?}")));
        }
        let bad = || Error::Parse(format!("bad snapshot row {line:?}"));
        let c: usize = parts[0].parse().map_err(|_| bad())?;
        let n: usize = parts[1].parse().map_err(|_| bad())?;
        let k: i32 = parts[2].parse().map_err(|_| bad())?;
        let re: f64 = parts[3].parse().map_err(|_| bad())?;
        let im: f64 = parts[4].parse().map_err(|_| bad())?;
        if c > 2 || n > h.n_max || k.unsigned_abs() as usize > h.k_max {
            return Err(Error::Parse(format!("snapshot row out of range {line:?}")));
        }
        let i = f.idx(c, n, k);
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Parse(format!("duplicate snapshot row {line:?}")));
        }
        f.set(c, n, k, Complex64::new(re, im));
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!("snapshot is missing {} rows (first at flat index {missing})", seen.iter().filter(|s| !**s).count())));
    }
    Ok((f, h.time))
}

pub fn save_snapshot(path: &Path, field: &SpectralField, time: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, field, time)?;
    w.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<(SpectralField, f64)> {
    read_snapshot(BufReader::new(File::open(path)?))
}
