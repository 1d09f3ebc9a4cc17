//! Triad resonances `τ(a) + τ(b) = τ(c)` with `c.k = a.k + b.k`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{roots, tau, ModeIndex, WaveClass};
use crate::error::{Error, Result};
use crate::fields::{ModeLayout, Truncation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriadClass {
    ZeroMode,
    AllKelvin,
    Accidental,
    NonResonant,
}

impl TriadClass {
    pub fn name(self) -> &'static str {
        match self {
            TriadClass::ZeroMode => "zero-mode",
            TriadClass::AllKelvin => "all-kelvin",
            TriadClass::Accidental => "accidental",
            TriadClass::NonResonant => "non-resonant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadRecord {
    pub a: ModeIndex,
    pub b: ModeIndex,
    pub c: ModeIndex,
    pub beta: f64,
    pub defect: f64,
    pub classification: TriadClass,
}

/// Scale-aware threshold `tol · max(1, |τa| + |τb| + |τc|)`.
pub fn threshold(tol: f64, ta: f64, tb: f64, tc: f64) -> f64 {
    tol * (ta.abs() + tb.abs() + tc.abs()).max(1.0)
}

pub fn triad_defect(beta: f64, a: ModeIndex, b: ModeIndex, c: ModeIndex) -> Result<f64> {
    if c.k != a.k + b.k {
        return Err(Error::InvalidTriad(format!("{c}.k != {a}.k + {b}.k")));
    }
    Ok(tau(beta, a) + tau(beta, b) - tau(beta, c))
}

pub fn classify_triad(a: ModeIndex, b: ModeIndex, c: ModeIndex, taus: [f64; 3], tol: f64) -> TriadClass {
    let defect = taus[0] + taus[1] - taus[2];
    if defect.abs() >= threshold(tol, taus[0], taus[1], taus[2]) {
        return TriadClass::NonResonant;
    }
    if taus.iter().any(|&t| t == 0.0) {
        TriadClass::ZeroMode
    } else if [a, b, c].iter().all(|m| m.class() == WaveClass::Kelvin) {
        TriadClass::AllKelvin
    } else {
        TriadClass::Accidental
    }
}

/// `∏_{j, j*, ℓ} (τ(n,k,j) + τ(n*,k*,j*) − τ(m,k+k*,ℓ))`.
pub fn p_polynomial(beta: f64, n: usize, n_star: usize, m: usize, k: i32, k_star: i32) -> f64 {
    let a = roots(beta, n, k);
    let b = roots(beta, n_star, k_star);
    let c = roots(beta, m, k + k_star);
    let mut p = 1.0;
    for ta in a.taus {
        for tb in b.taus {
            for tc in c.taus {
                p *= ta + tb - tc;
            }
        }
    }
    p
}

/// Leading coefficients of the Rossby defect `ω₀ + ω₁/β + O(β⁻²)` at large β.
pub fn omega_coefficients(n: usize, n_star: usize, m: usize, k: i32, k_star: i32) -> (f64, f64) {
    let w = |n: usize, k: f64| {
        let d = 2.0 * n as f64 + 1.0;
        let nf = n as f64;
        (k / d, 4.0 * k.powi(3) * nf * (nf + 1.0) / d.powi(4))
    };
    let (a0, a1) = w(n, k as f64);
    let (b0, b1) = w(n_star, k_star as f64);
    let (c0, c1) = w(m, (k + k_star) as f64);
    (a0 + b0 - c0, -a1 - b1 + c1)
}

/// Which modes a scan ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    All,
    Only(WaveClass),
}

impl Sector {
    pub fn parse(s: &str) -> Result<Sector> {
        Ok(match s {
            "all" => Sector::All,
            "kelvin" => Sector::Only(WaveClass::Kelvin),
            "rossby" => Sector::Only(WaveClass::Rossby),
            "poincare" => Sector::Only(WaveClass::Poincare),
            "mixed" => Sector::Only(WaveClass::Mixed),
            "geostrophic" => Sector::Only(WaveClass::Geostrophic),
            other => return Err(Error::InvalidArgument(format!("unknown sector {other:?}"))),
        })
    }

    fn admits(self, m: ModeIndex) -> bool {
        match self {
            Sector::All => true,
            Sector::Only(c) => m.class() == c,
        }
    }
}

/// Result of a brute-force triad scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub beta: f64,
    pub tol: f64,
    /// Triads below tolerance, sorted by `(a, b, c)`.
    pub records: Vec<TriadRecord>,
    pub zero_mode: usize,
    pub all_kelvin: usize,
    pub accidental: usize,
    pub non_resonant: usize,
    /// Smallest `|defect|` among triads that are neither zero-mode nor all-Kelvin.
    pub min_nonexempt_defect: f64,
    pub min_nonexempt_triad: Option<(ModeIndex, ModeIndex, ModeIndex)>,
    /// Largest `|defect|` among all-Kelvin triads.
    pub max_kelvin_defect: f64,
    /// `(n, k)` where the dispersion cubic has a double root (`n = 0`, `β = 2k²`).
    /// The eigenfrequencies of the corresponding modes stay distinct.
    pub double_roots: Vec<(usize, i32)>,
}

/// Scans every unordered pair `{a, b}` and every `c` with `c.k = a.k + b.k` in the truncation.
pub fn scan(beta: f64, trunc: Truncation, tol: f64, sector: Sector) -> Result<ScanReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let layout = ModeLayout::new(beta, trunc);
    let modes: Vec<usize> = layout.active_indices().filter(|&i| sector.admits(layout.mode(i))).collect();
    let kmax = trunc.k_max as i32;

    struct Partial {
        records: Vec<TriadRecord>,
        counts: [usize; 4],
        min_def: f64,
        min_arg: Option<(ModeIndex, ModeIndex, ModeIndex)>,
        max_kelvin: f64,
    }

    let parts: Vec<Partial> = (0..modes.len())
        .into_par_iter()
        .map(|ia| {
            let mut p = Partial {
                records: Vec::new(),
                counts: [0; 4],
                min_def: f64::INFINITY,
                min_arg: None,
                max_kelvin: 0.0,
            };
            let a = layout.mode(modes[ia]);
            let ta = layout.tau(modes[ia]);
            for &ib in &modes[ia..] {
                let b = layout.mode(ib);
                let kc = a.k + b.k;
                if kc.abs() > kmax {
                    continue;
                }
                let tb = layout.tau(ib);
                for n in 0..=trunc.n_max {
                    for j in -1i8..=1 {
                        let c = ModeIndex { n, k: kc, j };
                        let ic = layout.index(c).unwrap();
                        if !layout.is_active(ic) || !sector.admits(c) {
                            continue;
                        }
                        let tc = layout.tau(ic);
                        let defect = ta + tb - tc;
                        let zero = ta == 0.0 || tb == 0.0 || tc == 0.0;
                        let kelvin = [a, b, c].iter().all(|m| m.class() == WaveClass::Kelvin);
                        if kelvin {
                            p.max_kelvin = p.max_kelvin.max(defect.abs());
                        } else if !zero && defect.abs() < p.min_def {
                            p.min_def = defect.abs();
                            p.min_arg = Some((a, b, c));
                        }
                        let class = classify_triad(a, b, c, [ta, tb, tc], tol);
                        let slot = match class {
                            TriadClass::ZeroMode => 0,
                            TriadClass::AllKelvin => 1,
                            TriadClass::Accidental => 2,
                            TriadClass::NonResonant => 3,
                        };
                        p.counts[slot] += 1;
                        if class != TriadClass::NonResonant {
                            p.records.push(TriadRecord {
                                a,
                                b,
                                c,
                                beta,
                                defect,
                                classification: class,
                            });
                        }
                    }
                }
            }
            p
        })
        .collect();

    let mut report = ScanReport {
        beta,
        tol,
        records: Vec::new(),
        zero_mode: 0,
        all_kelvin: 0,
        accidental: 0,
        non_resonant: 0,
        min_nonexempt_defect: f64::INFINITY,
        min_nonexempt_triad: None,
        max_kelvin_defect: 0.0,
        double_roots: double_roots(beta, trunc),
    };
    for p in parts {
        report.records.extend(p.records);
        report.zero_mode += p.counts[0];
        report.all_kelvin += p.counts[1];
        report.accidental += p.counts[2];
        report.non_resonant += p.counts[3];
        if p.min_def < report.min_nonexempt_defect {
            report.min_nonexempt_defect = p.min_def;
            report.min_nonexempt_triad = p.min_arg;
        }
        report.max_kelvin_defect = report.max_kelvin_defect.max(p.max_kelvin);
    }
    report.records.sort_by(|x, y| (x.a, x.b, x.c).cmp(&(y.a, y.b, y.c)));
    Ok(report)
}

fn double_roots(beta: f64, trunc: Truncation) -> Vec<(usize, i32)> {
    let kmax = trunc.k_max as i32;
    let mut out = Vec::new();
    for k in -kmax..=kmax {
        for n in 0..=trunc.n_max {
            if !trunc.contains(n, k) {
                continue;
            }
            let t = roots(beta, n, k).taus;
            let scale = t.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if (t[1] - t[0]).abs() <= 1e-9 * scale || (t[2] - t[1]).abs() <= 1e-9 * scale {
                out.push((n, k));
            }
        }
    }
    out
}

/// All triads with `|defect|` below tolerance.
pub fn enumerate_resonances(beta: f64, trunc: Truncation, tol: f64) -> Result<Vec<TriadRecord>> {
    Ok(scan(beta, trunc, tol, Sector::All)?.records)
}

/// Resonant triads as flat layout indices `(a, b, c)`, stored in both `(a, b)` orders.
#[derive(Debug, Clone)]
pub struct ResonantSet {
    pub beta: f64,
    pub trunc: Truncation,
    pub tol: f64,
    triads: HashSet<(u32, u32, u32)>,
}

impl ResonantSet {
    pub fn from_records(layout: &ModeLayout, tol: f64, records: &[TriadRecord]) -> Result<ResonantSet> {
        let mut triads = HashSet::with_capacity(2 * records.len());
        for r in records {
            if r.beta != layout.beta {
                return Err(Error::Configuration(format!(
                    "triad record computed at beta {} used with beta {}",
                    r.beta, layout.beta
                )));
            }
            if r.classification == TriadClass::NonResonant {
                continue;
            }
            let ix = |m: ModeIndex| {
                layout
                    .index(m)
                    .map(|i| i as u32)
                    .ok_or_else(|| Error::Configuration(format!("triad mode {m} outside the truncation")))
            };
            let (a, b, c) = (ix(r.a)?, ix(r.b)?, ix(r.c)?);
            triads.insert((a, b, c));
            triads.insert((b, a, c));
        }
        Ok(ResonantSet {
            beta: layout.beta,
            trunc: layout.trunc,
            tol,
            triads,
        })
    }

    /// Enumerates the resonant triads of a layout at the given tolerance.
    pub fn for_layout(layout: &ModeLayout, tol: f64) -> Result<ResonantSet> {
        let records = enumerate_resonances(layout.beta, layout.trunc, tol)?;
        ResonantSet::from_records(layout, tol, &records)
    }

    pub fn len(&self) -> usize {
        self.triads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triads.is_empty()
    }

    /// Whether `τ(a) + τ(b) = τ(c)` was recorded.
    pub fn contains(&self, a: usize, b: usize, c: usize) -> bool {
        self.triads.contains(&(a as u32, b as u32, c as u32))
    }

    pub fn check(&self, layout: &ModeLayout) -> Result<()> {
        if self.beta != layout.beta || self.trunc != layout.trunc {
            return Err(Error::Configuration(format!(
                "resonant set for beta {} does not match layout beta {}",
                self.beta, layout.beta
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(n: usize, k: i32, j: i8) -> ModeIndex {
        ModeIndex { n, k, j }
    }

    #[test]
    fn exact_defects() {
        assert_eq!(triad_defect(3.3, m(0, 1, 0), m(0, 2, 0), m(0, 3, 0)).unwrap(), 0.0);
        assert_eq!(triad_defect(0.7, m(2, 0, 0), m(0, 3, 0), m(0, 3, 0)).unwrap(), 0.0);
        assert!(matches!(
            triad_defect(1.0, m(0, 1, 0), m(0, 2, 0), m(0, 2, 0)),
            Err(Error::InvalidTriad(_))
        ));
    }

    #[test]
    fn omega_example() {
        let (w0, w1) = omega_coefficients(1, 1, 0, 1, 1);
        assert!((w0 + 4.0 / 3.0).abs() < 1e-15);
        assert!((w1 + 16.0 / 81.0).abs() < 1e-15);
        let (w0, _) = omega_coefficients(2, 2, 3, 3, -3);
        assert_eq!(w0, 0.0);
    }

    #[test]
    fn kelvin_factor_kills_p() {
        assert_eq!(p_polynomial(1.7, 0, 0, 0, 1, 1), 0.0);
    }
}
