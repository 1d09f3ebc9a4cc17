//! The quadratic form `Q`, the partial diffusion `Δ' = (0, Δu)`, their
//! resonant restrictions `Q_L` and `Δ'_L`, the kernel diffusion band, and the
//! first-order corrector of the filtered dynamics.
//!
//! `Q(Φ,Ψ) = ½[Q̃(Φ,Ψ) + Q̃(Ψ,Φ)]` with `Q̃(Φ,Ψ) = (∇·(Φ₀Ψ'), (Φ'·∇)Ψ')`.
//! Eigen-coordinate entries `(Ψ_a | Q(Ψ_b, Ψ_c))` are exact: Hermite products
//! use the triple-product table and `∂₁` of a product is taken through the
//! projection identity, so nothing is truncated before the final projection.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigenbasis::{Basis, EigenMode, Overflow};
use crate::error::{Error, Result};
use crate::fields::{analyze_scalar, synthesize, Grid, ModeCoefficients, ModeLayout, SpectralField};
use crate::hermite::{projected_derivative, series_derivative, series_second_derivative, HermiteContext};
use crate::resonance::ResonantSet;

type C64 = Complex64;
type Sparse = Vec<(usize, C64)>;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Grouping rule for eigenvalues: `|τ − τ'| ≤ 1e-9·max(1, |τ|)`.
pub fn same_group(t1: f64, t2: f64) -> bool {
    (t1 - t2).abs() <= 1e-9 * t1.abs().max(1.0)
}

/// Hermite context large enough for exact products of the basis modes.
pub fn context_for(basis: &Basis) -> Result<HermiteContext> {
    HermiteContext::new(basis.beta(), basis.trunc().n_max + 3)
}

struct ModeParts {
    k: i32,
    comp: [Sparse; 3],
    d1: [Sparse; 3],
}

impl ModeParts {
    fn new(beta: f64, m: &EigenMode) -> ModeParts {
        let comp = [m.eta.clone(), m.u1.clone(), m.u2.clone()];
        let d1 = [0, 1, 2].map(|c| sparse_derivative(beta, &comp[c]));
        ModeParts { k: m.index.k, comp, d1 }
    }
}

fn sparse_derivative(beta: f64, s: &Sparse) -> Sparse {
    let h = (beta / 2.0).sqrt();
    let mut out: BTreeMap<usize, C64> = BTreeMap::new();
    for &(n, v) in s {
        if n > 0 {
            *out.entry(n - 1).or_insert(ZERO) += v * (h * (n as f64).sqrt());
        }
        *out.entry(n + 1).or_insert(ZERO) += v * (-h * ((n + 1) as f64).sqrt());
    }
    out.into_iter().collect()
}

/// Adds `scale · (2π)^{-1/2} Σ f_a g_b ∫ψ_aψ_bψ_m` to `out[m]`.
fn accumulate_product(ctx: &HermiteContext, f: &Sparse, g: &Sparse, scale: C64, out: &mut [C64]) {
    let s = scale * (2.0 * PI).powf(-0.5);
    for &(a, fa) in f {
        for &(b, gb) in g {
            let w = s * fa * gb;
            // Only parity restricts ∫ψ_aψ_bψ_m; there is no triangle rule for Hermite functions.
            for m in ((a + b) % 2..out.len()).step_by(2) {
                out[m] += w * ctx.triple_unchecked(a, b, m);
            }
        }
    }
}

/// `Q̃(A, B)` projected on `ψ_m`, `m < len`, at wavenumber `k_A + k_B`; added with weight `scale`.
fn directional_form(ctx: &HermiteContext, beta: f64, a: &ModeParts, b: &ModeParts, len: usize, scale: f64, out: &mut [Vec<C64>; 3]) {
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let mut p01 = vec![ZERO; len + 1];
    accumulate_product(ctx, &a.comp[0], &b.comp[1], one, &mut p01);
    let d = projected_derivative(beta, &p01);
    for m in 0..len {
        out[0][m] += d[m] * scale;
    }
    let ko = (a.k + b.k) as f64;
    accumulate_product(ctx, &a.comp[0], &b.comp[2], i * ko * scale, &mut out[0]);
    let kb = b.k as f64;
    for c in 1..3 {
        accumulate_product(ctx, &a.comp[1], &b.d1[c], C64::new(scale, 0.0), &mut out[c]);
        accumulate_product(ctx, &a.comp[2], &b.comp[c], i * kb * scale, &mut out[c]);
    }
}

fn project_on(mode: &EigenMode, q: &[Vec<C64>; 3]) -> C64 {
    let mut s = ZERO;
    for c in 0..3 {
        for &(n, v) in mode.component(c) {
            if n < q[c].len() {
                s += v.conj() * q[c][n];
            }
        }
    }
    s
}

/// Which triads a tensor holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Full,
    Resonant,
}

/// Sparse entries `T[a,b,c] = (Ψ_a | Q(Ψ_b, Ψ_c))`, sorted by `(a, b, c)`.
#[derive(Debug, Clone)]
pub struct InteractionTensor {
    pub layout: Arc<ModeLayout>,
    pub kind: TensorKind,
    a: Vec<u32>,
    b: Vec<u32>,
    c: Vec<u32>,
    v: Vec<C64>,
    rows: Vec<usize>,
}

/// Precomputed pieces for assembling tensor entries.
pub struct TensorBuilder<'a> {
    ctx: &'a HermiteContext,
    basis: &'a Basis,
    parts: Vec<ModeParts>,
    by_k: Vec<Vec<usize>>,
}

impl<'a> TensorBuilder<'a> {
    pub fn new(ctx: &'a HermiteContext, basis: &'a Basis) -> Result<TensorBuilder<'a>> {
        if ctx.beta() != basis.beta() {
            return Err(Error::Configuration("context and basis use different beta".into()));
        }
        if ctx.n_max() < basis.trunc().n_max + 3 {
            return Err(Error::Configuration(format!(
                "Hermite context n_max {} too small for products of modes up to n = {}",
                ctx.n_max(),
                basis.trunc().n_max
            )));
        }
        let layout = &basis.layout;
        let parts = (0..layout.len()).map(|i| ModeParts::new(basis.beta(), basis.mode(i))).collect();
        let mut by_k = vec![Vec::new(); layout.k_count()];
        for i in layout.active_indices() {
            by_k[(layout.mode(i).k + layout.trunc.k_max as i32) as usize].push(i);
        }
        Ok(TensorBuilder { ctx, basis, parts, by_k })
    }

    fn out_len(&self) -> usize {
        self.basis.trunc().n_max + 2
    }

    /// `Q(Ψ_b, Ψ_c)` in Hermite coefficients at wavenumber `k_b + k_c`.
    fn pair_form(&self, b: usize, c: usize) -> [Vec<C64>; 3] {
        let len = self.out_len();
        let mut q = [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]];
        let beta = self.basis.beta();
        directional_form(self.ctx, beta, &self.parts[b], &self.parts[c], len, 0.5, &mut q);
        directional_form(self.ctx, beta, &self.parts[c], &self.parts[b], len, 0.5, &mut q);
        q
    }

    /// Entry `(Ψ_a | Q(Ψ_b, Ψ_c))`.
    pub fn entry(&self, a: usize, b: usize, c: usize) -> C64 {
        if self.parts[a].k != self.parts[b].k + self.parts[c].k {
            return ZERO;
        }
        project_on(self.basis.mode(a), &self.pair_form(b, c))
    }

    fn assemble<F>(&self, pairs: Vec<(usize, usize)>, outputs: F, kind: TensorKind) -> InteractionTensor
    where
        F: Fn(usize, usize) -> Vec<usize> + Sync,
    {
        let layout = &self.basis.layout;
        let kmax = layout.trunc.k_max as i32;
        let chunks: Vec<Vec<(u32, u32, u32, C64)>> = pairs
            .par_iter()
            .map(|&(b, c)| {
                let mut out = Vec::new();
                let kc = self.parts[b].k + self.parts[c].k;
                if kc.abs() > kmax {
                    return out;
                }
                let alphas = outputs(b, c);
                if alphas.is_empty() {
                    return out;
                }
                let q = self.pair_form(b, c);
                for a in alphas {
                    let v = project_on(self.basis.mode(a), &q);
                    if v != ZERO {
                        out.push((a as u32, b as u32, c as u32, v));
                        if b != c {
                            out.push((a as u32, c as u32, b as u32, v));
                        }
                    }
                }
                out
            })
            .collect();
        let mut entries: Vec<(u32, u32, u32, C64)> = chunks.into_iter().flatten().collect();
        entries.sort_by_key(|e| (e.0, e.1, e.2));
        InteractionTensor::from_entries(layout.clone(), kind, entries)
    }

    /// Every entry of the truncation.
    pub fn full(&self) -> InteractionTensor {
        let layout = &self.basis.layout;
        let act: Vec<usize> = layout.active_indices().collect();
        let mut pairs = Vec::new();
        for (x, &b) in act.iter().enumerate() {
            for &c in &act[x..] {
                pairs.push((b, c));
            }
        }
        let kmax = layout.trunc.k_max as i32;
        self.assemble(
            pairs,
            |b, c| {
                let k = self.parts[b].k + self.parts[c].k;
                self.by_k[(k + kmax) as usize].clone()
            },
            TensorKind::Full,
        )
    }

    /// Entries whose triad `τ_b + τ_c = τ_a` is in the resonant set.
    pub fn resonant(&self, set: &ResonantSet) -> Result<InteractionTensor> {
        let layout = &self.basis.layout;
        set.check(layout)?;
        let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let kmax = layout.trunc.k_max as i32;
        let act: Vec<usize> = layout.active_indices().collect();
        for (x, &b) in act.iter().enumerate() {
            for &c in &act[x..] {
                let k = self.parts[b].k + self.parts[c].k;
                if k.abs() > kmax {
                    continue;
                }
                let target = layout.tau(b) + layout.tau(c);
                for &a in &self.by_k[(k + kmax) as usize] {
                    if (layout.tau(a) - target).abs() <= 1e-6 * target.abs().max(1.0) && set.contains(b, c, a) {
                        map.entry((b, c)).or_default().push(a);
                    }
                }
            }
        }
        let pairs: Vec<(usize, usize)> = map.keys().copied().collect();
        Ok(self.assemble(pairs, |b, c| map.get(&(b, c)).cloned().unwrap_or_default(), TensorKind::Resonant))
    }
}

impl InteractionTensor {
    fn from_entries(layout: Arc<ModeLayout>, kind: TensorKind, entries: Vec<(u32, u32, u32, C64)>) -> InteractionTensor {
        let n = layout.len();
        let mut t = InteractionTensor {
            layout,
            kind,
            a: Vec::with_capacity(entries.len()),
            b: Vec::with_capacity(entries.len()),
            c: Vec::with_capacity(entries.len()),
            v: Vec::with_capacity(entries.len()),
            rows: vec![0; n + 1],
        };
        for (a, b, c, v) in entries {
            t.a.push(a);
            t.b.push(b);
            t.c.push(c);
            t.v.push(v);
            t.rows[a as usize + 1] += 1;
        }
        for i in 0..n {
            t.rows[i + 1] += t.rows[i];
        }
        t
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, C64)> + '_ {
        (0..self.v.len()).map(move |i| (self.a[i] as usize, self.b[i] as usize, self.c[i] as usize, self.v[i]))
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> C64 {
        let (lo, hi) = (self.rows[a], self.rows[a + 1]);
        for i in lo..hi {
            if self.b[i] as usize == b && self.c[i] as usize == c {
                return self.v[i];
            }
        }
        ZERO
    }

    fn check(&self, x: &ModeCoefficients) -> Result<()> {
        if !self.layout.same(&x.layout) {
            return Err(Error::Configuration(
                "tensor and coefficients use different truncations or beta".into(),
            ));
        }
        Ok(())
    }

    /// `Σ_{b,c} w(a,b,c) T[a,b,c] x_b y_c` with `w = 1` where unspecified.
    pub fn apply_weighted<W>(&self, x: &ModeCoefficients, y: &ModeCoefficients, weight: W) -> Result<ModeCoefficients>
    where
        W: Fn(usize, usize, usize) -> Option<C64> + Sync,
    {
        self.check(x)?;
        self.check(y)?;
        let phi: Vec<C64> = (0..self.layout.len())
            .into_par_iter()
            .map(|a| {
                let mut s = ZERO;
                for i in self.rows[a]..self.rows[a + 1] {
                    let (b, c) = (self.b[i] as usize, self.c[i] as usize);
                    if let Some(w) = weight(a, b, c) {
                        s += w * self.v[i] * x.phi[b] * y.phi[c];
                    }
                }
                s
            })
            .collect();
        let mut out = ModeCoefficients {
            layout: self.layout.clone(),
            real: x.real && y.real,
            phi,
        };
        if out.real {
            out.enforce_real();
        }
        Ok(out)
    }

    /// `Q(x, y)` in eigen coordinates.
    pub fn q_apply(&self, x: &ModeCoefficients, y: &ModeCoefficients) -> Result<ModeCoefficients> {
        let phi: Vec<C64> = {
            self.check(x)?;
            self.check(y)?;
            (0..self.layout.len())
                .into_par_iter()
                .map(|a| {
                    let mut s = ZERO;
                    for i in self.rows[a]..self.rows[a + 1] {
                        s += self.v[i] * x.phi[self.b[i] as usize] * y.phi[self.c[i] as usize];
                    }
                    s
                })
                .collect()
        };
        let mut out = ModeCoefficients {
            layout: self.layout.clone(),
            real: x.real && y.real,
            phi,
        };
        if out.real {
            out.enforce_real();
        }
        Ok(out)
    }

    /// `Q_L(x, y)`: only entries whose triad is resonant.
    pub fn q_l_apply(&self, set: &ResonantSet, x: &ModeCoefficients, y: &ModeCoefficients) -> Result<ModeCoefficients> {
        set.check(&self.layout)?;
        if self.kind == TensorKind::Resonant {
            return self.q_apply(x, y);
        }
        self.apply_weighted(x, y, |a, b, c| set.contains(b, c, a).then_some(C64::new(1.0, 0.0)))
    }

    /// Writes the tensor: one JSON header line, then little-endian records
    /// `(a: u32, b: u32, c: u32, re: f64, im: f64)`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = TensorHeader {
            format: TENSOR_FORMAT.into(),
            version: TENSOR_VERSION,
            beta: self.layout.beta,
            n_max: self.layout.trunc.n_max,
            k_max: self.layout.trunc.k_max,
            ball: self.layout.trunc.ball,
            kind: self.kind,
            entries: self.len(),
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &header).map_err(|e| Error::Parse(e.to_string()))?;
        w.write_all(b"\n")?;
        for (a, b, c, v) in self.entries() {
            w.write_all(&(a as u32).to_le_bytes())?;
            w.write_all(&(b as u32).to_le_bytes())?;
            w.write_all(&(c as u32).to_le_bytes())?;
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a tensor written by [`save`](Self::save); the header must match `layout`.
    pub fn load(path: &Path, layout: Arc<ModeLayout>, kind: TensorKind) -> Result<InteractionTensor> {
        let mut r = BufReader::new(File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: TensorHeader = serde_json::from_str(line.trim_end()).map_err(|e| Error::Parse(e.to_string()))?;
        let t = layout.trunc;
        if h.format != TENSOR_FORMAT
            || h.version != TENSOR_VERSION
            || h.beta != layout.beta
            || h.n_max != t.n_max
            || h.k_max != t.k_max
            || h.ball != t.ball
            || h.kind != kind
        {
            return Err(Error::Configuration(format!("tensor cache {} does not match", path.display())));
        }
        let mut entries = Vec::with_capacity(h.entries);
        let mut buf = [0u8; 28];
        for _ in 0..h.entries {
            r.read_exact(&mut buf)?;
            let u = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
            let f = |i: usize| f64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
            let (a, b, c) = (u(0), u(4), u(8));
            if a as usize >= layout.len() || b as usize >= layout.len() || c as usize >= layout.len() {
                return Err(Error::Parse("tensor entry index out of range".into()));
            }
            entries.push((a, b, c, C64::new(f(12), f(20))));
        }
        entries.sort_by_key(|e| (e.0, e.1, e.2));
        Ok(InteractionTensor::from_entries(layout, kind, entries))
    }
}

const TENSOR_FORMAT: &str = "betaplane-tensor";
const TENSOR_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    format: String,
    version: u32,
    beta: f64,
    n_max: usize,
    k_max: usize,
    ball: Option<f64>,
    kind: TensorKind,
    entries: usize,
}

/// Environment variable naming the tensor cache directory.
pub const CACHE_ENV: &str = "BETAPLANE_CACHE_DIR";

/// `$BETAPLANE_CACHE_DIR`, else `$XDG_CACHE_HOME/betaplane`, else `$HOME/.cache/betaplane`.
pub fn cache_dir() -> Option<PathBuf> {
    if let Some(d) = std::env::var_os(CACHE_ENV) {
        return Some(PathBuf::from(d));
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return Some(PathBuf::from(d).join("betaplane"));
    }
    std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache").join("betaplane"))
}

/// Cache file name for a layout and tensor kind.
pub fn cache_file(layout: &ModeLayout, kind: TensorKind) -> String {
    let t = layout.trunc;
    let ball = t.ball.map_or("rect".to_string(), |r| format!("ball{r}"));
    let kind = match kind {
        TensorKind::Full => "full",
        TensorKind::Resonant => "resonant",
    };
    format!(
        "tensor-v{TENSOR_VERSION}-{kind}-beta{:016x}-n{}-k{}-{ball}.bin",
        layout.beta.to_bits(),
        t.n_max,
        t.k_max
    )
}

/// Loads a cached tensor if one matches, otherwise builds and (best effort) stores it.
pub fn cached_tensor<F>(dir: Option<&Path>, layout: &Arc<ModeLayout>, kind: TensorKind, build: F) -> Result<InteractionTensor>
where
    F: FnOnce() -> Result<InteractionTensor>,
{
    let Some(dir) = dir else { return build() };
    let path = dir.join(cache_file(layout, kind));
    if path.exists() {
        if let Ok(t) = InteractionTensor::load(&path, layout.clone(), kind) {
            return Ok(t);
        }
    }
    let t = build()?;
    if std::fs::create_dir_all(dir).is_ok() {
        let tmp = path.with_extension("tmp");
        if t.save(&tmp).is_ok() {
            let _ = std::fs::rename(&tmp, &path);
        }
    }
    Ok(t)
}

/// `Q(x, y)` through the physical grid: synthesize, multiply pointwise,
/// project back, and take the divergence in coefficient space.
pub fn q_apply_quadrature(ctx: &HermiteContext, basis: &Basis, x: &ModeCoefficients, y: &ModeCoefficients) -> Result<ModeCoefficients> {
    let fx = basis.synthesize(x);
    let fy = basis.synthesize(y);
    let a = directional_quadrature(ctx, &fx, &fy)?;
    let b = directional_quadrature(ctx, &fy, &fx)?;
    let mut q = a.clone();
    for (o, v) in q.coeffs.iter_mut().zip(&b.coeffs) {
        *o = 0.5 * (*o + v);
    }
    q.real = x.real && y.real;
    basis.decompose(&q)
}

pub fn directional_quadrature(ctx: &HermiteContext, a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    let beta = a.beta;
    let (n, k) = (a.n_max, a.k_max);
    let q = ctx.quadrature(1.5)?;
    if q.len() < (3 * (n + 2)) / 2 + 1 {
        return Err(Error::Resolution("quadrature too coarse for products".into()));
    }
    let grid = Grid::from_quadrature(q, 4 * k + 1);
    // ∂₁B and ∂₂B for the two velocity components.
    let mut d1 = SpectralField::zeros(beta, n + 1, k, false);
    let mut d2 = SpectralField::zeros(beta, n, k, false);
    for c in 1..3 {
        for kk in -(k as i32)..=k as i32 {
            let s = b.series(c, kk);
            d1.series_mut(c, kk).copy_from_slice(&series_derivative(beta, s));
            let ik = C64::new(0.0, kk as f64);
            for (o, v) in d2.series_mut(c, kk).iter_mut().zip(s) {
                *o = ik * v;
            }
        }
    }
    let pa = synthesize(ctx, a, &grid)?;
    let pb = synthesize(ctx, b, &grid)?;
    let pd1 = synthesize(ctx, &d1, &grid)?;
    let pd2 = synthesize(ctx, &d2, &grid)?;
    let np = grid.x1.len() * grid.n2;
    let mut out = SpectralField::zeros(beta, n, k, false);
    let nx = n + 1;
    // Divergence of A₀B'.
    let p01 = analyze_scalar(ctx, &grid, &pa.product(0, &pb, 1), nx, k);
    let p02 = analyze_scalar(ctx, &grid, &pa.product(0, &pb, 2), nx, k);
    for kk in -(k as i32)..=k as i32 {
        let ki = (kk + k as i32) as usize;
        let row = &p01[ki * (nx + 1)..(ki + 1) * (nx + 1)];
        let d = projected_derivative(beta, row);
        let ik = C64::new(0.0, kk as f64);
        for m in 0..=n {
            out.set(0, m, kk, d[m] + ik * p02[ki * (nx + 1) + m]);
        }
    }
    // (A'·∇)B'.
    for c in 1..3 {
        let t1 = pa.product(1, &pd1, c);
        let t2 = pa.product(2, &pd2, c);
        let sum: Vec<C64> = (0..np).map(|p| t1[p] + t2[p]).collect();
        let proj = analyze_scalar(ctx, &grid, &sum, n, k);
        for kk in -(k as i32)..=k as i32 {
            let ki = (kk + k as i32) as usize;
            out.series_mut(c, kk).copy_from_slice(&proj[ki * (n + 1)..(ki + 1) * (n + 1)]);
        }
    }
    Ok(out)
}

/// `Δ'Φ = (0, ΔΦ')` on Hermite–Fourier coefficients.
pub fn delta_prime_field(field: &SpectralField, overflow: Overflow) -> Result<SpectralField> {
    let beta = field.beta;
    let n_out = field.n_max + 2;
    let mut out = SpectralField::zeros(beta, n_out, field.k_max, field.real);
    for k in -(field.k_max as i32)..=field.k_max as i32 {
        let k2 = (k as f64).powi(2);
        for c in 1..3 {
            let s = field.series(c, k);
            let mut d = series_second_derivative(beta, s);
            for (n, v) in s.iter().enumerate() {
                d[n] -= v * k2;
            }
            out.series_mut(c, k).copy_from_slice(&d);
        }
    }
    match overflow {
        Overflow::Grow => Ok(out),
        Overflow::Clamp => Ok(out.resized(field.n_max, field.k_max)),
        Overflow::Strict => {
            for c in 1..3 {
                for k in -(field.k_max as i32)..=field.k_max as i32 {
                    if out.get(c, n_out, k).norm() > 0.0 || out.get(c, n_out - 1, k).norm() > 0.0 {
                        return Err(Error::Truncation(format!(
                            "Laplacian moves energy beyond n_max = {}",
                            field.n_max
                        )));
                    }
                }
            }
            Ok(out.resized(field.n_max, field.k_max))
        }
    }
}

/// `(Ψ_a | Δ'Ψ_b)` for modes sharing a wavenumber.
pub fn delta_prime_entry(beta: f64, a: &EigenMode, b: &EigenMode) -> C64 {
    if a.index.k != b.index.k {
        return ZERO;
    }
    let k2 = (b.index.k as f64).powi(2);
    let len = b.support_max() + 1;
    let mut s = ZERO;
    for c in 1..3 {
        let dense = b.dense(c, len);
        let mut d = series_second_derivative(beta, &dense);
        for (n, v) in dense.iter().enumerate() {
            d[n] -= v * k2;
        }
        for &(n, v) in a.component(c) {
            if n < d.len() {
                s += v.conj() * d[n];
            }
        }
    }
    s
}

/// `Δ'` in eigen coordinates: one dense Hermitian block per wavenumber.
#[derive(Debug, Clone)]
pub struct DiffusionMatrix {
    pub layout: Arc<ModeLayout>,
    blocks: Vec<Vec<C64>>,
}

impl DiffusionMatrix {
    pub fn new(basis: &Basis) -> DiffusionMatrix {
        let layout = basis.layout.clone();
        let bs = layout.block();
        let blocks = (0..layout.k_count())
            .into_par_iter()
            .map(|ki| {
                let mut blk = vec![ZERO; bs * bs];
                let base = ki * bs;
                for r in 0..bs {
                    if !layout.is_active(base + r) {
                        continue;
                    }
                    for c in 0..bs {
                        if layout.is_active(base + c) {
                            blk[r * bs + c] = delta_prime_entry(basis.beta(), basis.mode(base + r), basis.mode(base + c));
                        }
                    }
                }
                blk
            })
            .collect();
        DiffusionMatrix { layout, blocks }
    }

    pub fn entry(&self, a: usize, b: usize) -> C64 {
        let bs = self.layout.block();
        if a / bs != b / bs {
            return ZERO;
        }
        self.blocks[a / bs][(a % bs) * bs + b % bs]
    }

    fn apply_filtered<F>(&self, x: &ModeCoefficients, keep: F) -> ModeCoefficients
    where
        F: Fn(usize, usize) -> Option<C64> + Sync,
    {
        let bs = self.layout.block();
        let phi: Vec<C64> = (0..self.layout.len())
            .into_par_iter()
            .map(|a| {
                let ki = a / bs;
                let r = a % bs;
                let blk = &self.blocks[ki];
                let mut s = ZERO;
                for c in 0..bs {
                    let b = ki * bs + c;
                    let v = blk[r * bs + c];
                    if v != ZERO {
                        if let Some(w) = keep(a, b) {
                            s += w * v * x.phi[b];
                        }
                    }
                }
                s
            })
            .collect();
        let mut out = ModeCoefficients {
            layout: self.layout.clone(),
            real: x.real,
            phi,
        };
        if out.real {
            out.enforce_real();
        }
        out
    }

    /// Galerkin `Δ'`.
    pub fn apply(&self, x: &ModeCoefficients) -> ModeCoefficients {
        self.apply_filtered(x, |_, _| Some(C64::new(1.0, 0.0)))
    }

    /// `Δ'_L`: `Δ'` restricted to pairs in the same eigenvalue group.
    pub fn apply_l(&self, x: &ModeCoefficients) -> ModeCoefficients {
        let l = &self.layout;
        self.apply_filtered(x, |a, b| same_group(l.tau(a), l.tau(b)).then_some(C64::new(1.0, 0.0)))
    }

    /// `Σ_b w(a,b) D[a,b] x_b`.
    pub fn apply_weighted<F>(&self, x: &ModeCoefficients, w: F) -> ModeCoefficients
    where
        F: Fn(usize, usize) -> Option<C64> + Sync,
    {
        self.apply_filtered(x, w)
    }

    /// `(x | −Δ'_L x)` in the `H_L^s` inner product, weights `(1+n+k²)^s`.
    pub fn dissipation(&self, x: &ModeCoefficients, s: f64) -> f64 {
        let d = self.apply_l(x);
        let l = &self.layout;
        let mut sum = 0.0;
        for (i, (a, b)) in x.phi.iter().zip(&d.phi).enumerate() {
            let m = l.mode(i);
            sum -= (1.0 + m.n as f64 + (m.k as f64).powi(2)).powf(s) * (a.conj() * b).re;
        }
        sum
    }

    /// `‖x‖²_{H_L^{s+1}} / (x | −Δ'_L x)_{H_L^s}`, the parabolicity ratio.
    pub fn parabolicity_ratio(&self, x: &ModeCoefficients, s: f64) -> Result<f64> {
        let den = self.dissipation(x, s);
        if !(den > 0.0) {
            return Err(Error::UndefinedRatio(format!("dissipation form is {den:e}")));
        }
        Ok(x.hl_norm(s + 1.0).powi(2) / den)
    }

    /// Dense Hermitian block of `Δ'_L` restricted to one wavenumber.
    pub fn group_block(&self, ki: usize) -> DMatrix<C64> {
        let bs = self.layout.block();
        let base = ki * bs;
        DMatrix::from_fn(bs, bs, |r, c| {
            if same_group(self.layout.tau(base + r), self.layout.tau(base + c)) {
                self.blocks[ki][r * bs + c]
            } else {
                ZERO
            }
        })
    }
}

/// Closed-form coupling `α_n^{(d)} = (Ψ_{n+d,0,0} | Δ'Ψ_{n,0,0})` of the `n ≥ 1` kernel family,
/// `d ∈ {−4, −2, 0, 2, 4}`.
pub fn alpha(beta: f64, n: usize, d: i32) -> f64 {
    let n = n as f64;
    let q = beta / 4.0;
    match d {
        -4 => -q * ((n - 4.0) * (n - 2.0) * (n - 1.0) * (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n - 7.0))).sqrt(),
        -2 => q * (4.0 * n - 2.0) * ((n - 2.0) * (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n - 3.0))).sqrt(),
        0 => -q * (6.0 * n * n + 6.0 * n - 1.0) / (2.0 * n + 1.0),
        2 => q * (4.0 * n + 6.0) * (n * (n + 3.0) / ((2.0 * n + 1.0) * (2.0 * n + 5.0))).sqrt(),
        4 => -q * (n * (n + 2.0) * (n + 3.0) * (n + 5.0) / ((2.0 * n + 1.0) * (2.0 * n + 9.0))).sqrt(),
        _ => 0.0,
    }
}

/// `(Ψ_{m,0,0} | Δ'Ψ_{n,0,0})` by Gauss–Hermite quadrature of `∫ u₂,m ∂₁₁u₂,n dx`,
/// with `ψ'' = (β²x² − β(2n+1))ψ` evaluated pointwise.
pub fn kernel_coupling_quadrature(ctx: &HermiteContext, m: usize, n: usize) -> Result<f64> {
    let beta = ctx.beta();
    let top = m.max(n) + 1;
    if top > ctx.n_max() {
        return Err(Error::IndexOutOfRange {
            what: "kernel index",
            value: top as i64,
            limit: ctx.n_max() as i64,
        });
    }
    let q = ctx.quadrature(1.0)?;
    let gm = build_kernel(beta, m)?;
    let gn = build_kernel(beta, n)?;
    let mut psi = vec![0.0; top + 1];
    let mut s = 0.0;
    for (i, &x) in q.nodes.iter().enumerate() {
        ctx.psi_all_into(x, &mut psi);
        let um: f64 = gm.u2.iter().map(|&(h, v)| v.re * psi[h]).sum();
        let dn: f64 = gn
            .u2
            .iter()
            .map(|&(h, v)| v.re * (beta * beta * x * x - beta * (2.0 * h as f64 + 1.0)) * psi[h])
            .sum();
        s += q.deweighted[i] * um * dn;
    }
    Ok(s)
}

fn build_kernel(beta: f64, n: usize) -> Result<EigenMode> {
    crate::eigenbasis::build_mode(beta, crate::dispersion::ModeIndex { n, k: 0, j: 0 })
}

/// `Π₀Δ'Π₀` on the kernel modes `Ψ_{n,0,0}`, `n ≤ n_max`.
#[derive(Debug, Clone)]
pub struct GeostrophicDiffusion {
    pub beta: f64,
    pub n_max: usize,
    pub matrix: DMatrix<f64>,
}

impl GeostrophicDiffusion {
    /// Sources `n ≥ 4` use the closed forms; sources below 4, and everything touching
    /// the `n = 0` mode, come from quadrature.
    pub fn new(beta: f64, n_max: usize) -> Result<GeostrophicDiffusion> {
        if n_max < 5 {
            return Err(Error::InvalidArgument(format!("kernel truncation must be at least 5, got {n_max}")));
        }
        let ctx = HermiteContext::new(beta, n_max + 3)?;
        let mut g = DMatrix::<f64>::zeros(n_max + 1, n_max + 1);
        for n in 0..=n_max {
            if n >= 4 {
                for d in [-4i32, -2, 0, 2, 4] {
                    let m = n as i32 + d;
                    if m >= 1 && m as usize <= n_max {
                        g[(m as usize, n)] = alpha(beta, n, d);
                    }
                }
            } else {
                for m in 0..=n_max {
                    let v = kernel_coupling_quadrature(&ctx, m, n)?;
                    g[(m, n)] = v;
                    g[(n, m)] = v;
                }
            }
        }
        Ok(GeostrophicDiffusion { beta, n_max, matrix: g })
    }

    pub fn band(&self, n: usize, d: i32) -> f64 {
        let m = n as i32 + d;
        if m < 0 || m as usize > self.n_max {
            return 0.0;
        }
        self.matrix[(m as usize, n)]
    }

    /// `exp(t·G)` through the symmetric eigendecomposition.
    pub fn exp(&self, t: f64) -> DMatrix<f64> {
        let e = SymmetricEigen::new(self.matrix.clone());
        let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| (t * l).exp()));
        &e.eigenvectors * d * e.eigenvectors.transpose()
    }

    /// `‖[N_s, G]φ‖ / ‖N_sφ‖` with `N_sΨ_n = (1+n)^sΨ_n`.
    pub fn ns_commutator_ratio(&self, s: f64, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.n_max + 1 {
            return Err(Error::InvalidArgument("kernel vector length does not match".into()));
        }
        let ns: Vec<f64> = (0..=self.n_max).map(|n| (1.0 + n as f64).powf(s)).collect();
        let x = nalgebra::DVector::from_column_slice(phi);
        let nx = nalgebra::DVector::from_fn(phi.len(), |i, _| ns[i] * phi[i]);
        let den = nx.norm();
        if den == 0.0 {
            return Err(Error::UndefinedRatio("zero kernel field".into()));
        }
        let gx = &self.matrix * &x;
        let ngx = nalgebra::DVector::from_fn(phi.len(), |i, _| ns[i] * gx[i]);
        let gnx = &self.matrix * &nx;
        Ok((ngx - gnx).norm() / den)
    }
}

/// Right-hand side of the resonant-triad identity for `(Ψ_a | Q(Ψ_b, Ψ_c))` with `τ_a = τ_b + τ_c`,
/// evaluated by quadrature from point values:
///
/// `(iλ/2)∫[Ψ̄'_a·(Ψ_{b,0}Ψ'_c + Ψ_{c,0}Ψ'_b) + Ψ̄_{a,0}Ψ'_b·Ψ'_c]
///  − (iλ/2β)∫Ψ̄_{a,2}X_bX_c − (iλ/2β)∫X̄_a(Ψ_{b,2}X_c + Ψ_{c,2}X_b)`,
///
/// with `λ = τ_a`, `X = ∇^⊥·Ψ' − βx₁Ψ₀` and `∇^⊥ = (∂₂, −∂₁)`. It carries the factor `λ`,
/// so it vanishes whenever the output is a kernel mode.
pub fn resonant_identity_rhs(ctx: &HermiteContext, a: &EigenMode, b: &EigenMode, c: &EigenMode) -> Result<C64> {
    if a.index.k != b.index.k + c.index.k {
        return Err(Error::InvalidTriad(format!(
            "wavenumbers {} + {} != {}",
            b.index.k, c.index.k, a.index.k
        )));
    }
    let beta = ctx.beta();
    let top = [a, b, c].iter().map(|m| m.support_max()).max().unwrap() + 1;
    if top > ctx.n_max() {
        return Err(Error::IndexOutOfRange {
            what: "mode support",
            value: top as i64,
            limit: ctx.n_max() as i64,
        });
    }
    let q = ctx.quadrature(1.5)?;
    let i = C64::new(0.0, 1.0);
    let lambda = a.tau;
    let d: Vec<[Sparse; 3]> = [a, b, c]
        .iter()
        .map(|m| [0, 1, 2].map(|cc| sparse_derivative(beta, &m.component(cc).to_vec())))
        .collect();
    let eval = |s: &[(usize, C64)], psi: &[f64]| -> C64 { s.iter().map(|&(n, v)| v * psi[n]).sum() };
    let mut psi = vec![0.0; top + 1];
    let mut total = ZERO;
    for (node, &x) in q.nodes.iter().enumerate() {
        ctx.psi_all_into(x, &mut psi);
        // (η, u₁, u₂, X) for each mode.
        let vals: Vec<[C64; 4]> = [a, b, c]
            .iter()
            .enumerate()
            .map(|(w, m)| {
                let eta = eval(m.component(0), &psi);
                let u1 = eval(m.component(1), &psi);
                let u2 = eval(m.component(2), &psi);
                let d1u2 = eval(&d[w][2], &psi);
                let x_term = i * m.index.k as f64 * u1 - d1u2 - beta * x * eta;
                [eta, u1, u2, x_term]
            })
            .collect();
        let [ea, u1a, u2a, xa] = vals[0];
        let [eb, u1b, u2b, xb] = vals[1];
        let [ec, u1c, u2c, xc] = vals[2];
        let first = u1a.conj() * (eb * u1c + ec * u1b)
            + u2a.conj() * (eb * u2c + ec * u2b)
            + ea.conj() * (u1b * u1c + u2b * u2c);
        let second = u2a.conj() * xb * xc;
        let third = xa.conj() * (u2b * xc + u2c * xb);
        let f = i * lambda / 2.0 * first - i * lambda / (2.0 * beta) * (second + third);
        total += f * q.deweighted[node];
    }
    Ok(total * (2.0 * PI).powf(-0.5))
}

/// First-order corrector: the oscillating remainder of the filtered dynamics around a
/// limit state, `−Σ_{nonres} e^{iωt/ε}/(iω) Π_λQ(Π_μΦ, Π_μ̃Φ) + ν Σ_{λ≠μ} e^{i(λ−μ)t/ε}/(i(λ−μ)) Π_λΔ'Π_μΦ`.
pub fn corrector(
    full: &InteractionTensor,
    set: &ResonantSet,
    diffusion: &DiffusionMatrix,
    mc: &ModeCoefficients,
    eps: f64,
    t: f64,
    nu: f64,
) -> Result<ModeCoefficients> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if full.kind != TensorKind::Full {
        return Err(Error::Configuration("corrector needs the full interaction tensor".into()));
    }
    set.check(&full.layout)?;
    let l = full.layout.clone();
    let i = C64::new(0.0, 1.0);
    let theta = t / eps;
    let bad = std::sync::atomic::AtomicBool::new(false);
    let mut q = full.apply_weighted(mc, mc, |a, b, c| {
        if set.contains(b, c, a) {
            return None;
        }
        let w = l.tau(a) - l.tau(b) - l.tau(c);
        if w.abs() < crate::resonance::threshold(set.tol, l.tau(a), l.tau(b), l.tau(c)) {
            bad.store(true, std::sync::atomic::Ordering::Relaxed);
            return None;
        }
        Some(C64::from_polar(1.0, theta * w) / (i * w))
    })?;
    if bad.into_inner() {
        return Err(Error::Consistency(
            "a near-zero phase gap is missing from the resonant set".into(),
        ));
    }
    q.scale(-1.0);
    if nu != 0.0 {
        let d = diffusion.apply_weighted(mc, |a, b| {
            let w = l.tau(a) - l.tau(b);
            if same_group(l.tau(a), l.tau(b)) {
                None
            } else {
                Some(C64::from_polar(1.0, theta * w) / (i * w))
            }
        });
        q.axpy(C64::new(nu, 0.0), &d);
    }
    Ok(q)
}
