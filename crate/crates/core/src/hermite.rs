//! Rescaled Hermite functions `ψ_n(x) = β^{1/4} h_n(√β x)` and the Gauss–Hermite
//! rules used for every weighted integral in the crate.
//!
//! All functions are unit-norm in `L²(R)`. Coefficient-space helpers at the
//! bottom act on Hermite series `Σ c_n ψ_n`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Weight scales `s` (weights `e^{-sβx²}`) precomputed by every context.
pub const WEIGHT_SCALES: [f64; 3] = [0.5, 1.0, 1.5];

/// A Gauss–Hermite rule for the weight `e^{-sβx²}`.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub scale: f64,
    pub nodes: Vec<f64>,
    /// Gauss weights: `∫ e^{-sβx²} p(x) dx = Σ weights[i] p(nodes[i])`.
    pub weights: Vec<f64>,
    /// Weights with the Gaussian divided out: `∫ f dx ≈ Σ deweighted[i] f(nodes[i])`,
    /// exact when `f = e^{-sβx²}·p` with `deg p ≤ 2·len − 1`.
    pub deweighted: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Builds an `m`-point rule by Golub–Welsch, with one Newton polish of each node.
    pub fn new(beta: f64, scale: f64, m: usize) -> Quadrature {
        let y = gauss_hermite_nodes(m);
        let mut h = vec![0.0; m];
        let stretch = (scale * beta).sqrt();
        let mut nodes = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        let mut deweighted = Vec::with_capacity(m);
        for &yi in &y {
            hermite_functions_into(yi, &mut h);
            let s: f64 = h.iter().map(|v| v * v).sum();
            let w = 1.0 / (s * stretch);
            nodes.push(yi / stretch);
            deweighted.push(w);
            weights.push(w * (-yi * yi).exp());
        }
        Quadrature {
            scale,
            nodes,
            weights,
            deweighted,
        }
    }
}

/// Nodes of the `m`-point rule for `e^{-y²}`, increasing.
fn gauss_hermite_nodes(m: usize) -> Vec<f64> {
    let mut jac = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        let b = (i as f64 / 2.0).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut y: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    y.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut h = vec![0.0; m + 1];
    for yi in y.iter_mut() {
        for _ in 0..2 {
            hermite_functions_into(*yi, &mut h);
            // h_m' = √(2m) h_{m-1} − y h_m, and h_m(y_i) = 0 at a node.
            let d = (2.0 * m as f64).sqrt() * h[m - 1] - *yi * h[m];
            if d != 0.0 && d.is_finite() {
                *yi -= h[m] / d;
            }
        }
    }
    for i in 0..m / 2 {
        let a = 0.5 * (y[m - 1 - i] - y[i]);
        y[i] = -a;
        y[m - 1 - i] = a;
    }
    if m % 2 == 1 {
        y[m / 2] = 0.0;
    }
    y
}

fn flush(v: f64) -> f64 {
    if v.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        v
    }
}

/// Fills `out[n] = h_n(y)` for the standard unit-norm Hermite functions.
pub fn hermite_functions_into(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let h0 = flush(PI.powf(-0.25) * (-0.5 * y * y).exp());
    out[0] = h0;
    if out.len() == 1 {
        return;
    }
    out[1] = flush(2f64.sqrt() * y * h0);
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        let v = (2.0 / (nf + 1.0)).sqrt() * y * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out[n + 1] = flush(v);
    }
}

/// Precomputed state for one value of β: quadrature rules and the triple-product table.
#[derive(Debug)]
pub struct HermiteContext {
    beta: f64,
    n_max: usize,
    quads: Vec<Quadrature>,
    triple: OnceLock<Vec<f64>>,
}

impl HermiteContext {
    pub fn new(beta: f64, n_max: usize) -> Result<HermiteContext> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
        }
        if n_max < 1 {
            return Err(Error::InvalidArgument("n_max must be at least 1".into()));
        }
        let m = 2 * n_max + 4;
        let quads = WEIGHT_SCALES
            .iter()
            .map(|&s| Quadrature::new(beta, s, m))
            .collect();
        Ok(HermiteContext {
            beta,
            n_max,
            quads,
            triple: OnceLock::new(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// The rule for weight `e^{-sβx²}`.
    pub fn quadrature(&self, scale: f64) -> Result<&Quadrature> {
        self.quads
            .iter()
            .find(|q| (q.scale - scale).abs() < 1e-12)
            .ok_or_else(|| Error::Configuration(format!("no quadrature at weight scale {scale}")))
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            return Err(Error::IndexOutOfRange {
                what: "n",
                value: n as i64,
                limit: self.n_max as i64,
            });
        }
        Ok(())
    }

    fn check_x(x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("x must be finite, got {x}")));
        }
        Ok(())
    }

    /// `ψ_0(x), …, ψ_{len-1}(x)` written into `out`, without index checks.
    pub fn psi_all_into(&self, x: f64, out: &mut [f64]) {
        hermite_functions_into(self.beta.sqrt() * x, out);
        let s = self.beta.powf(0.25);
        for v in out.iter_mut() {
            *v = flush(*v * s);
        }
    }

    pub fn psi_all(&self, x: f64, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        self.psi_all_into(x, &mut out);
        out
    }

    pub fn eval_psi(&self, n: usize, x: f64) -> Result<f64> {
        self.check_index(n)?;
        Self::check_x(x)?;
        Ok(self.psi_all(x, n + 1)[n])
    }

    pub fn eval_dpsi(&self, n: usize, x: f64) -> Result<f64> {
        self.check_index(n)?;
        Self::check_x(x)?;
        let p = self.psi_all(x, n + 2);
        let lower = if n == 0 { 0.0 } else { p[n - 1] };
        let b = self.beta;
        Ok(0.5 * ((2.0 * b * n as f64).sqrt() * lower - (2.0 * b * (n as f64 + 1.0)).sqrt() * p[n + 1]))
    }

    /// `ψ_n''(x)` from the oscillator equation `ψ'' = (β²x² − β(2n+1))ψ`.
    pub fn eval_d2psi(&self, n: usize, x: f64) -> Result<f64> {
        let p = self.eval_psi(n, x)?;
        let b = self.beta;
        Ok((b * b * x * x - b * (2.0 * n as f64 + 1.0)) * p)
    }

    pub fn x_coupling(&self, n: usize) -> (f64, f64) {
        x_coupling(self.beta, n)
    }

    fn triple_table(&self) -> &Vec<f64> {
        self.triple.get_or_init(|| {
            let q = &self.quads[2];
            let n = self.n_max + 1;
            let mut vals = vec![0.0; n * q.len()];
            let mut row = vec![0.0; n];
            for (i, &x) in q.nodes.iter().enumerate() {
                self.psi_all_into(x, &mut row);
                for a in 0..n {
                    vals[a * q.len() + i] = row[a];
                }
            }
            let mut t = vec![0.0; n * n * n];
            for a in 0..n {
                for b in a..n {
                    for c in b..n {
                        if (a + b + c) % 2 == 1 {
                            continue;
                        }
                        let mut s = 0.0;
                        for i in 0..q.len() {
                            s += q.deweighted[i] * vals[a * q.len() + i] * vals[b * q.len() + i] * vals[c * q.len() + i];
                        }
                        for &(p, r, u) in &[(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                            t[(p * n + r) * n + u] = s;
                        }
                    }
                }
            }
            t
        })
    }

    /// `∫ ψ_a ψ_b ψ_c dx`.
    pub fn triple_product(&self, a: usize, b: usize, c: usize) -> Result<f64> {
        for &i in &[a, b, c] {
            self.check_index(i)?;
        }
        self.quadrature(1.5)?;
        Ok(self.triple_unchecked(a, b, c))
    }

    /// Table lookup without bounds checks beyond the slice index.
    #[inline]
    pub fn triple_unchecked(&self, a: usize, b: usize, c: usize) -> f64 {
        let n = self.n_max + 1;
        self.triple_table()[(a * n + b) * n + c]
    }
}

/// Coefficients `(√(βn/2), √(β(n+1)/2))` of `βxψ_n` on `ψ_{n−1}` and `ψ_{n+1}`.
pub fn x_coupling(beta: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    ((beta * nf / 2.0).sqrt(), (beta * (nf + 1.0) / 2.0).sqrt())
}

/// Coefficients of `d/dx Σ c_n ψ_n`; the result is one entry longer.
pub fn series_derivative<T>(beta: f64, c: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    // ψ_n' = √(β/2)(√n ψ_{n-1} − √(n+1) ψ_{n+1})
    let s = (beta / 2.0).sqrt();
    let mut out = vec![T::default(); c.len() + 1];
    for (n, &v) in c.iter().enumerate() {
        if n > 0 {
            out[n - 1] = out[n - 1] + v * (s * (n as f64).sqrt());
        }
        out[n + 1] = out[n + 1] + v * (-s * ((n + 1) as f64).sqrt());
    }
    out
}

/// Coefficients of `βx Σ c_n ψ_n`; the result is one entry longer.
pub fn series_x_multiply<T>(beta: f64, c: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let mut out = vec![T::default(); c.len() + 1];
    for (n, &v) in c.iter().enumerate() {
        let (lo, hi) = x_coupling(beta, n);
        if n > 0 {
            out[n - 1] = out[n - 1] + v * lo;
        }
        out[n + 1] = out[n + 1] + v * hi;
    }
    out
}

/// Coefficients of `d²/dx² Σ c_n ψ_n`; the result is two entries longer.
pub fn series_second_derivative<T>(beta: f64, c: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let mut out = vec![T::default(); c.len() + 2];
    let h = beta / 2.0;
    for (n, &v) in c.iter().enumerate() {
        let nf = n as f64;
        if n >= 2 {
            out[n - 2] = out[n - 2] + v * (h * (nf * (nf - 1.0)).sqrt());
        }
        out[n] = out[n] + v * (-h * (2.0 * nf + 1.0));
        out[n + 2] = out[n + 2] + v * (h * ((nf + 1.0) * (nf + 2.0)).sqrt());
    }
    out
}

/// Projection of `∂_x f` on `ψ_m` given the projections `f_m` of `f` (exact for any
/// `f` decaying at infinity): `√(β/2)(√(m+1) f_{m+1} − √m f_{m−1})`, for `m < len−1`.
pub fn projected_derivative<T>(beta: f64, f: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let s = (beta / 2.0).sqrt();
    let len = f.len().saturating_sub(1);
    (0..len)
        .map(|m| {
            let up = f[m + 1] * (s * ((m + 1) as f64).sqrt());
            if m > 0 {
                up + f[m - 1] * (-s * (m as f64).sqrt())
            } else {
                up
            }
        })
        .collect()
}
