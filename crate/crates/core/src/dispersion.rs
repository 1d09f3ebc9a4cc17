//! The dispersion cubic `τ³ − (k² + β(2n+1))τ + βk = 0`, the wave
//! taxonomy, the large/small-β expansions, and the eigenfrequencies of
//! the betaplane operator.
//!
//! With `L = (∇·u, βx₁u^⊥ + ∇η)` and modes carrying `e^{ikx₂}`, the
//! eigenvalue of `Ψ_{n,k,j}` is the negated cubic root `−τ(n,k,j)`
//! (a root of the Matsuno relation `τ³ − (k² + β(2n+1))τ − βk = 0`);
//! the Kelvin wave keeps `τ = k`. See [`tau`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index `(n, k, j)` of an eigenmode; `j ∈ {−1, 0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub n: usize,
    pub k: i32,
    pub j: i8,
}

impl ModeIndex {
    pub fn new(n: usize, k: i32, j: i8) -> Result<ModeIndex> {
        if !(-1..=1).contains(&j) {
            return Err(Error::InvalidArgument(format!("branch j must be -1, 0 or 1, got {j}")));
        }
        Ok(ModeIndex { n, k, j })
    }

    /// Index of the complex-conjugate mode: `conj(Ψ_{n,k,j}) = Ψ_{n,−k,−j}`.
    pub fn conjugate(self) -> ModeIndex {
        ModeIndex {
            n: self.n,
            k: -self.k,
            j: -self.j,
        }
    }

    pub fn class(self) -> WaveClass {
        classify(self.n, self.k, self.j)
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.n, self.k, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaveClass {
    Poincare,
    Rossby,
    Mixed,
    Kelvin,
    Geostrophic,
}

impl WaveClass {
    pub const ALL: [WaveClass; 5] = [
        WaveClass::Poincare,
        WaveClass::Rossby,
        WaveClass::Mixed,
        WaveClass::Kelvin,
        WaveClass::Geostrophic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WaveClass::Poincare => "poincare",
            WaveClass::Rossby => "rossby",
            WaveClass::Mixed => "mixed",
            WaveClass::Kelvin => "kelvin",
            WaveClass::Geostrophic => "geostrophic",
        }
    }
}

impl fmt::Display for WaveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn classify(n: usize, k: i32, j: i8) -> WaveClass {
    match (n, k, j) {
        (_, 0, 0) => WaveClass::Geostrophic,
        (0, _, 0) => WaveClass::Kelvin,
        (0, 0, _) => WaveClass::Poincare,
        (0, k, j) if j as i32 == k.signum() => WaveClass::Mixed,
        (0, _, _) => WaveClass::Poincare,
        (_, _, 0) => WaveClass::Rossby,
        _ => WaveClass::Poincare,
    }
}

/// The three eigenfrequencies at fixed `(β, n, k)`, stored as `taus[j + 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTriple {
    pub beta: f64,
    pub n: usize,
    pub k: i32,
    pub taus: [f64; 3],
}

impl RootTriple {
    pub fn tau(&self, j: i8) -> f64 {
        self.taus[(j + 1) as usize]
    }
}

/// Value of the dispersion polynomial at `τ`.
pub fn dispersion_residual(beta: f64, n: usize, k: i32, tau: f64) -> f64 {
    let kf = k as f64;
    let p = kf * kf + beta * (2.0 * n as f64 + 1.0);
    tau * tau * tau - p * tau + beta * kf
}

pub fn roots(beta: f64, n: usize, k: i32) -> RootTriple {
    let kf = k as f64;
    let taus = if n == 0 {
        let s = (kf * kf + 4.0 * beta).sqrt();
        [-0.5 * kf - 0.5 * s, kf, -0.5 * kf + 0.5 * s]
    } else if k == 0 {
        let s = (beta * (2.0 * n as f64 + 1.0)).sqrt();
        [-s, 0.0, s]
    } else {
        let p = kf * kf + beta * (2.0 * n as f64 + 1.0);
        let q = beta * kf;
        let r = 2.0 * (p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut t = [
            r * (theta - 2.0 * PI / 3.0).cos(),
            r * (theta - 4.0 * PI / 3.0).cos(),
            r * theta.cos(),
        ];
        for v in t.iter_mut() {
            *v = newton_polish(*v, p, q);
        }
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        t
    };
    RootTriple { beta, n, k, taus }
}

fn newton_polish(mut t: f64, p: f64, q: f64) -> f64 {
    for _ in 0..5 {
        let f = t * t * t - p * t + q;
        if f.abs() <= 1e-13 * (1.0 + t.abs().powi(3)) {
            break;
        }
        let d = 3.0 * t * t - p;
        if d == 0.0 {
            break;
        }
        t -= f / d;
    }
    t
}

/// Eigenfrequency of `Ψ_{n,k,j}`: `LΨ = iτΨ`.
///
/// Zero for geostrophic modes, `k` for Kelvin waves, and `−τ(n,k,j)`
/// from [`roots`] otherwise. The sign flip keeps the taxonomy of
/// [`classify`] (mixed waves are the slow `n = 0` branch) while making
/// the frequencies those of the operator.
pub fn tau(beta: f64, m: ModeIndex) -> f64 {
    match classify(m.n, m.k, m.j) {
        WaveClass::Geostrophic => 0.0,
        WaveClass::Kelvin => m.k as f64,
        _ => -roots(beta, m.n, m.k).tau(m.j),
    }
}

/// Large-β expansion: `±√((2n+1)β) − k/(2(2n+1))` for `j = ±1`,
/// `k/(2n+1) − 4n(n+1)k³/((2n+1)⁴β)` for `j = 0`.
pub fn asymptote_large_beta(n: usize, k: i32, j: i8, beta: f64) -> f64 {
    let m = 2.0 * n as f64 + 1.0;
    let kf = k as f64;
    let nf = n as f64;
    match j {
        0 => kf / m - 4.0 * nf * (nf + 1.0) * kf.powi(3) / (m.powi(4) * beta),
        _ => j as f64 * (m * beta).sqrt() - kf / (2.0 * m),
    }
}

/// Small-β Rossby expansion `β/k`.
pub fn asymptote_small_beta(n: usize, k: i32, beta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("small-beta expansion needs k != 0".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("small-beta expansion needs n >= 1".into()));
    }
    Ok(beta / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_at_n0() {
        let r = roots(1.0, 0, 2);
        assert_eq!(r.tau(0), 2.0);
        assert!((r.tau(1) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((r.tau(-1) + 1.0 + 2f64.sqrt()).abs() < 1e-15);
        let r = roots(2.0, 0, 1);
        assert_eq!(r.tau(0), 1.0);
        assert_eq!(r.tau(1), 1.0);
        assert_eq!(r.tau(-1), -2.0);
    }

    #[test]
    fn classification_table() {
        assert_eq!(classify(0, 3, 0), WaveClass::Kelvin);
        assert_eq!(classify(2, 0, 0), WaveClass::Geostrophic);
        assert_eq!(classify(0, -2, 1), WaveClass::Poincare);
        assert_eq!(classify(0, -2, -1), WaveClass::Mixed);
        assert_eq!(classify(0, 2, 1), WaveClass::Mixed);
        assert_eq!(classify(0, 0, 0), WaveClass::Geostrophic);
        assert_eq!(classify(0, 0, 1), WaveClass::Poincare);
        assert_eq!(classify(3, 1, 0), WaveClass::Rossby);
        assert_eq!(classify(3, 0, -1), WaveClass::Poincare);
    }

    #[test]
    fn asymptote_exact_cases() {
        assert!((asymptote_large_beta(1, 0, 1, 100.0) - 300f64.sqrt()).abs() < 1e-12);
        assert_eq!(asymptote_large_beta(0, 0, -1, 9.0), -3.0);
        assert!(asymptote_small_beta(1, 0, 1e-6).is_err());
        assert_eq!(asymptote_small_beta(1, -1, 1e-6).unwrap(), -1e-6);
    }

    #[test]
    fn bad_branch_rejected() {
        assert!(ModeIndex::new(1, 1, 2).is_err());
    }
}
