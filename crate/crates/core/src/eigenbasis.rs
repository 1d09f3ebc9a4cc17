//! Eigenvectors `Ψ_{n,k,j}` of the betaplane operator
//! `L(η, u) = (∇·u, βx₁u^⊥ + ∇η)`, `u^⊥ = (u₂, −u₁)`, with `LΨ = iτΨ`.
//!
//! Mode coefficients are stored in the Hermite–Fourier basis
//! `(2π)^{-1/2}ψ_n e^{ikx₂}`, which absorbs the `(2π)^{-1/2}` of the normalization.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dispersion::{tau, ModeIndex};
use crate::error::{Error, Result};
use crate::fields::{ModeCoefficients, ModeLayout, SpectralField, Truncation};
use crate::hermite::{series_derivative, series_x_multiply};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A sparse eigenmode: Hermite index → coefficient for each component.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode {
    pub index: ModeIndex,
    pub tau: f64,
    pub eta: Vec<(usize, Complex64)>,
    pub u1: Vec<(usize, Complex64)>,
    pub u2: Vec<(usize, Complex64)>,
}

impl EigenMode {
    pub fn k(&self) -> i32 {
        self.index.k
    }

    pub fn component(&self, c: usize) -> &[(usize, Complex64)] {
        match c {
            0 => &self.eta,
            1 => &self.u1,
            _ => &self.u2,
        }
    }

    /// Highest Hermite index used.
    pub fn support_max(&self) -> usize {
        (0..3)
            .flat_map(|c| self.component(c).iter().map(|e| e.0))
            .max()
            .unwrap_or(0)
    }

    /// Dense Hermite series of one component, of length `len`.
    pub fn dense(&self, c: usize, len: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; len];
        for &(n, v) in self.component(c) {
            if n < len {
                out[n] += v;
            }
        }
        out
    }

    /// `(self | f)` restricted to wavenumber `self.k()`.
    pub fn inner_field(&self, f: &SpectralField) -> Complex64 {
        let mut s = ZERO;
        for c in 0..3 {
            for &(n, v) in self.component(c) {
                s += v.conj() * f.get(c, n, self.index.k);
            }
        }
        s
    }

    pub fn inner(&self, other: &EigenMode) -> Complex64 {
        if self.index.k != other.index.k {
            return ZERO;
        }
        let mut s = ZERO;
        for c in 0..3 {
            for &(n, v) in self.component(c) {
                for &(m, w) in other.component(c) {
                    if n == m {
                        s += v.conj() * w;
                    }
                }
            }
        }
        s
    }

    pub fn to_field(&self, beta: f64, n_max: usize, k_max: usize) -> SpectralField {
        let mut f = SpectralField::zeros(beta, n_max, k_max, false);
        for c in 0..3 {
            for &(n, v) in self.component(c) {
                if n <= n_max {
                    let i = f.idx(c, n, self.index.k);
                    f.coeffs[i] += v;
                }
            }
        }
        f
    }
}

pub fn build_mode(beta: f64, index: ModeIndex) -> Result<EigenMode> {
    let ModeIndex { n, k, j } = index;
    if !(-1..=1).contains(&j) {
        return Err(Error::InvalidArgument(format!("branch j must be -1, 0 or 1, got {j}")));
    }
    let tau = tau(beta, index);
    let i = Complex64::new(0.0, 1.0);
    let nf = n as f64;
    let kf = k as f64;
    if j == 0 && (n == 0 || k == 0) {
        if n == 0 {
            // Kelvin wave, or the n = 0 kernel mode at k = 0.
            let h = Complex64::new(0.5f64.sqrt(), 0.0);
            return Ok(EigenMode {
                index,
                tau,
                eta: vec![(0, h)],
                u1: vec![],
                u2: vec![(0, h)],
            });
        }
        let g = 1.0 / (2.0 * nf + 1.0).sqrt();
        let a = g * ((nf + 1.0) / 2.0).sqrt();
        let b = g * (nf / 2.0).sqrt();
        return Ok(EigenMode {
            index,
            tau: 0.0,
            eta: vec![(n - 1, Complex64::new(-a, 0.0)), (n + 1, Complex64::new(-b, 0.0))],
            u1: vec![],
            u2: vec![(n - 1, Complex64::new(a, 0.0)), (n + 1, Complex64::new(-b, 0.0))],
        });
    }
    // Neither denominator vanishes: τ = ±k is never an eigenvalue here.
    let lo = if n > 0 { (beta * nf / 2.0).sqrt() / (tau + kf) } else { 0.0 };
    let hi = (beta * (nf + 1.0) / 2.0).sqrt() / (tau - kf);
    let c = 1.0 / (2.0 * lo * lo + 1.0 + 2.0 * hi * hi).sqrt();
    let mut eta = Vec::with_capacity(2);
    let mut u2 = Vec::with_capacity(2);
    if n > 0 {
        eta.push((n - 1, -i * c * lo));
        u2.push((n - 1, i * c * lo));
    }
    eta.push((n + 1, i * c * hi));
    u2.push((n + 1, i * c * hi));
    Ok(EigenMode {
        index,
        tau,
        eta,
        u1: vec![(n, Complex64::new(c, 0.0))],
        u2,
    })
}

/// What to do with the extra Hermite index produced by `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overflow {
    Grow,
    Clamp,
    Strict,
}

/// `L(η, u₁, u₂) = (∂₁u₁ + ∂₂u₂, βx₁u₂ + ∂₁η, −βx₁u₁ + ∂₂η)` in coefficient space.
pub fn apply_l(field: &SpectralField, overflow: Overflow) -> Result<SpectralField> {
    let beta = field.beta;
    let n_out = field.n_max + 1;
    let mut out = SpectralField::zeros(beta, n_out, field.k_max, field.real);
    for k in -(field.k_max as i32)..=field.k_max as i32 {
        let ik = Complex64::new(0.0, k as f64);
        let eta = field.series(0, k);
        let u1 = field.series(1, k);
        let u2 = field.series(2, k);
        let d_u1 = series_derivative(beta, u1);
        let d_eta = series_derivative(beta, eta);
        let x_u2 = series_x_multiply(beta, u2);
        let x_u1 = series_x_multiply(beta, u1);
        for n in 0..=n_out {
            let at = |s: &[Complex64]| if n < s.len() { s[n] } else { ZERO };
            out.set(0, n, k, d_u1[n] + ik * at(u2));
            out.set(1, n, k, x_u2[n] + d_eta[n]);
            out.set(2, n, k, -x_u1[n] + ik * at(eta));
        }
    }
    match overflow {
        Overflow::Grow => Ok(out),
        Overflow::Clamp => Ok(out.resized(field.n_max, field.k_max)),
        Overflow::Strict => {
            for c in 0..3 {
                for k in -(field.k_max as i32)..=field.k_max as i32 {
                    if out.get(c, n_out, k).norm() > 0.0 {
                        return Err(Error::Truncation(format!(
                            "L moves energy to n = {n_out} beyond n_max = {}",
                            field.n_max
                        )));
                    }
                }
            }
            Ok(out.resized(field.n_max, field.k_max))
        }
    }
}

/// `‖LΨ − iτΨ‖` for one mode, computed in coefficient space.
pub fn eigen_residual(beta: f64, mode: &EigenMode) -> Result<f64> {
    let k_max = mode.k().unsigned_abs() as usize;
    let f = mode.to_field(beta, mode.support_max() + 1, k_max);
    let lf = apply_l(&f, Overflow::Clamp)?;
    let it = Complex64::new(0.0, mode.tau);
    Ok(lf.coeffs.iter().zip(&f.coeffs).map(|(a, b)| (a - it * b).norm_sqr()).sum::<f64>().sqrt())
}

/// All eigenmodes of a truncation, built once and shared.
#[derive(Debug)]
pub struct Basis {
    pub layout: Arc<ModeLayout>,
    modes: Vec<EigenMode>,
}

impl Basis {
    pub fn new(beta: f64, trunc: Truncation) -> Result<Basis> {
        let layout = ModeLayout::new(beta, trunc);
        let modes = (0..layout.len())
            .into_par_iter()
            .map(|i| build_mode(beta, layout.mode(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Basis { layout, modes })
    }

    pub fn beta(&self) -> f64 {
        self.layout.beta
    }

    pub fn trunc(&self) -> Truncation {
        self.layout.trunc
    }

    pub fn mode(&self, i: usize) -> &EigenMode {
        &self.modes[i]
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    /// Hermite truncation of a field that holds every synthesized mode.
    pub fn field_n_max(&self) -> usize {
        self.layout.trunc.n_max + 1
    }

    /// Orthogonal projection onto the active modes: `φ_α = (Ψ_α | Φ)`.
    /// Exact reconstruction needs `field.n_max < layout n_max`.
    pub fn decompose(&self, field: &SpectralField) -> Result<ModeCoefficients> {
        if field.beta != self.beta() {
            return Err(Error::Configuration(format!(
                "field beta {} differs from basis beta {}",
                field.beta,
                self.beta()
            )));
        }
        let mut mc = ModeCoefficients::zeros(self.layout.clone(), false);
        for i in self.layout.active_indices() {
            mc.phi[i] = self.modes[i].inner_field(field);
        }
        if field.real {
            mc.enforce_real();
        }
        Ok(mc)
    }

    /// `Σ φ_α Ψ_α` as a Hermite–Fourier field with `n_max + 1` Hermite modes.
    pub fn synthesize(&self, mc: &ModeCoefficients) -> SpectralField {
        let t = self.trunc();
        let mut f = SpectralField::zeros(self.beta(), t.n_max + 1, t.k_max, mc.real);
        for i in self.layout.active_indices() {
            let v = mc.phi[i];
            if v == ZERO {
                continue;
            }
            let m = &self.modes[i];
            for c in 0..3 {
                for &(n, w) in m.component(c) {
                    let ix = f.idx(c, n, m.index.k);
                    f.coeffs[ix] += v * w;
                }
            }
        }
        if mc.real {
            f.enforce_real();
        }
        f
    }

    /// Decomposition through the 3×3 blocks `M_{n,k}` instead of inner products.
    pub fn decompose_via_matrix(&self, field: &SpectralField) -> Result<ModeCoefficients> {
        let t = self.trunc();
        let mut mc = ModeCoefficients::zeros(self.layout.clone(), false);
        for k in -(t.k_max as i32)..=t.k_max as i32 {
            for n in 0..=t.n_max {
                if !t.contains(n, k) {
                    continue;
                }
                let m = decomposition_matrix(self.beta(), n, k)?;
                let inv = m.try_inverse().ok_or_else(|| {
                    Error::Consistency(format!("decomposition matrix at n = {n}, k = {k} is singular"))
                })?;
                let v = decomposition_rhs(field, n, k);
                let phi = (inv * v).map(|z| z / (2.0 * PI).sqrt());
                for j in -1i8..=1 {
                    let i = self.layout.index(ModeIndex { n, k, j }).unwrap();
                    mc.phi[i] = phi[(j + 1) as usize];
                }
            }
        }
        if field.real {
            mc.enforce_real();
        }
        Ok(mc)
    }
}

/// `M_{n,k}`: column `j` holds the coordinates of `Ψ_{n,k,j}` (physical normalization,
/// without the Fourier factor) on `(η at ψ_{n−1}, u₁ at ψ_n, η at ψ_{n+1})`, or on
/// `(η at ψ₀, u₁ at ψ₀, η at ψ₁)` when `n = 0`.
pub fn decomposition_matrix(beta: f64, n: usize, k: i32) -> Result<Matrix3<Complex64>> {
    let mut m = Matrix3::<Complex64>::zeros();
    let scale = (2.0 * PI).powf(-0.5);
    for j in -1i8..=1 {
        let mode = build_mode(beta, ModeIndex { n, k, j })?;
        let col = (j + 1) as usize;
        let rows: [(usize, usize); 3] = if n == 0 {
            [(0, 0), (1, 0), (0, 1)]
        } else {
            [(0, n - 1), (1, n), (0, n + 1)]
        };
        for (r, &(c, h)) in rows.iter().enumerate() {
            let v: Complex64 = mode.component(c).iter().filter(|e| e.0 == h).map(|e| e.1).sum();
            m[(r, col)] = v * scale;
        }
    }
    Ok(m)
}

/// Right-hand side paired with [`decomposition_matrix`]: half sums/differences of
/// `η̂` and `û₂` that isolate the `(n, k)` block.
pub fn decomposition_rhs(field: &SpectralField, n: usize, k: i32) -> nalgebra::Vector3<Complex64> {
    if n == 0 {
        nalgebra::Vector3::new(
            0.5 * (field.get(0, 0, k) + field.get(2, 0, k)),
            field.get(1, 0, k),
            0.5 * (field.get(0, 1, k) + field.get(2, 1, k)),
        )
    } else {
        nalgebra::Vector3::new(
            0.5 * (field.get(0, n - 1, k) - field.get(2, n - 1, k)),
            field.get(1, n, k),
            0.5 * (field.get(0, n + 1, k) + field.get(2, n + 1, k)),
        )
    }
}
