//! Closed-form quasi-1D scattering model.
//!
//! In the single-mode regime the confined collision is described by an even
//! amplitude `f0g` (s-wave dominated) and an odd amplitude `f0u` (p-wave
//! dominated), each of the form `-1 / (1 + i cot(delta))`. The transmission
//! coefficient is `T = |1 + f0g + f0u|^2 = cos^2(delta_g - delta_u)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::potentials::MU;
use crate::radial_scattering::ScatteringParams;

/// Default value of the threshold constant `C` in the amplitude model.
pub const DEFAULT_C: f64 = 2.0;

/// Two particles in transverse harmonic traps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub m1: f64,
    pub m2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl TrapConfig {
    pub fn new(m1: f64, m2: f64, omega1: f64, omega2: f64) -> Result<Self> {
        for (name, v) in [("m1", m1), ("m2", m2), ("omega1", omega1), ("omega2", omega2)] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(Self { m1, m2, omega1, omega2 })
    }

    /// Masses fixed by `m1/m2 = ratio` and unit reduced mass.
    pub fn with_mass_ratio(ratio: f64, omega1: f64, omega2: f64) -> Result<Self> {
        if !(ratio > 0.0) {
            return domain(format!("mass ratio must be positive, got {ratio}"));
        }
        Self::new(1.0 + ratio, (1.0 + ratio) / ratio, omega1, omega2)
    }

    /// Equal frequencies chosen so that the confinement length is `a_perp`.
    pub fn decoupled(ratio: f64, a_perp: f64) -> Result<Self> {
        let omega = 1.0 / (MU * a_perp * a_perp);
        Self::with_mass_ratio(ratio, omega, omega)
    }

    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }

    pub fn reduced_mass(&self) -> f64 {
        self.m1 * self.m2 / self.total_mass()
    }

    /// Mean frequency `(omega1 + omega2) / 2`.
    pub fn omega(&self) -> f64 {
        0.5 * (self.omega1 + self.omega2)
    }

    pub fn omega_mu_sq(&self) -> f64 {
        let m = self.total_mass();
        (self.m2 / m) * self.omega1.powi(2) + (self.m1 / m) * self.omega2.powi(2)
    }

    pub fn omega_cm_sq(&self) -> f64 {
        let m = self.total_mass();
        (self.m1 / m) * self.omega1.powi(2) + (self.m2 / m) * self.omega2.powi(2)
    }

    pub fn omega_mu(&self) -> f64 {
        self.omega_mu_sq().sqrt()
    }

    pub fn omega_cm(&self) -> f64 {
        self.omega_cm_sq().sqrt()
    }

    /// `sqrt(1 / (mu omega))` with the mean frequency.
    pub fn a_perp(&self) -> f64 {
        (1.0 / (self.reduced_mass() * self.omega())).sqrt()
    }

    /// Oscillator lengths of the individual particles.
    pub fn a1(&self) -> f64 {
        (1.0 / (self.m1 * self.omega1)).sqrt()
    }

    pub fn a2(&self) -> f64 {
        (1.0 / (self.m2 * self.omega2)).sqrt()
    }

    pub fn is_decoupled(&self) -> bool {
        self.omega1 == self.omega2
    }

    /// Coefficient of `rho rho_R cos(phi)` in the trap potential.
    pub fn coupling(&self) -> f64 {
        self.reduced_mass() * (self.omega1.powi(2) - self.omega2.powi(2))
    }

    /// Whether a collision at longitudinal energy `epsilon` stays in the
    /// transverse ground channel: `omega < omega + epsilon < 3 omega`.
    pub fn single_mode(&self, epsilon: f64) -> bool {
        let w = self.omega();
        epsilon > 0.0 && epsilon < 2.0 * w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quasi1DAmplitudes {
    pub f0g: Complex64,
    pub f0u: Complex64,
    pub cot_g: f64,
    pub cot_u: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmissionSource {
    Analytic,
    WavePacketProjection,
    WavePacketDensity,
}

impl TransmissionSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::WavePacketProjection => "wavepacket_projection",
            Self::WavePacketDensity => "wavepacket_density",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmissionResult {
    pub t: f64,
    pub r: f64,
    pub k0: f64,
    pub source: TransmissionSource,
    pub diagnostics: BTreeMap<String, f64>,
}

impl TransmissionResult {
    pub fn new(t: f64, k0: f64, source: TransmissionSource) -> Self {
        Self { t, r: 1.0 - t, k0, source, diagnostics: BTreeMap::new() }
    }
}

fn threshold_root(a_perp: f64, k0: f64, c: f64) -> Result<f64> {
    if !(k0 > 0.0) {
        return domain(format!("k0 must be positive, got {k0}"));
    }
    if !(a_perp > 0.0) {
        return domain(format!("a_perp must be positive, got {a_perp}"));
    }
    let s2 = c * c - (a_perp * k0).powi(2);
    if s2 < 0.0 {
        return Err(Error::AboveThreshold(s2));
    }
    Ok(s2.sqrt())
}

/// `cot(delta_g) = -[a_perp / a_s - sqrt(C^2 - a_perp^2 k0^2)] a_perp k0 / 2`.
///
/// `a_s = 0` gives an infinite cotangent (no even scattering).
pub fn cot_delta_g(a_s: f64, a_perp: f64, k0: f64, c: f64) -> Result<f64> {
    let s = threshold_root(a_perp, k0, c)?;
    if a_s == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(cot_g_from_inverse(1.0 / a_s, a_perp, k0, s))
}

/// `cot(delta_u) = -[a_perp^3 / V_p + (C^2 - a_perp^2 k0^2)^(3/2)] / (6 a_perp k0)`.
pub fn cot_delta_u(v_p: f64, a_perp: f64, k0: f64, c: f64) -> Result<f64> {
    let s = threshold_root(a_perp, k0, c)?;
    if v_p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(cot_u_from_inverse(1.0 / v_p, a_perp, k0, s))
}

#[inline]
fn cot_g_from_inverse(inv_a_s: f64, a_perp: f64, k0: f64, s: f64) -> f64 {
    -(a_perp * inv_a_s - s) * a_perp * k0 / 2.0
}

#[inline]
fn cot_u_from_inverse(inv_v_p: f64, a_perp: f64, k0: f64, s: f64) -> f64 {
    -(a_perp.powi(3) * inv_v_p + s.powi(3)) / (6.0 * a_perp * k0)
}

/// `-1 / (1 + i cot)`, with `0` for an infinite cotangent.
pub fn amplitude_from_cot(cot: f64) -> Complex64 {
    if !cot.is_finite() {
        return Complex64::new(0.0, 0.0);
    }
    -Complex64::new(1.0, cot).inv()
}

pub fn amplitudes(params: &ScatteringParams, trap: &TrapConfig, k0: f64, c: f64) -> Result<Quasi1DAmplitudes> {
    amplitudes_for(params.a_s, params.v_p, trap.a_perp(), k0, c)
}

/// Amplitudes for explicit `a_s`, `V_p` and `a_perp`. Infinite `a_s` or `V_p`
/// (exact resonance) are valid inputs.
pub fn amplitudes_for(a_s: f64, v_p: f64, a_perp: f64, k0: f64, c: f64) -> Result<Quasi1DAmplitudes> {
    let s = threshold_root(a_perp, k0, c)?;
    let cot_g = if a_s == 0.0 { f64::NEG_INFINITY } else { cot_g_from_inverse(1.0 / a_s, a_perp, k0, s) };
    let cot_u = if v_p == 0.0 { f64::NEG_INFINITY } else { cot_u_from_inverse(1.0 / v_p, a_perp, k0, s) };
    Ok(Quasi1DAmplitudes { f0g: amplitude_from_cot(cot_g), f0u: amplitude_from_cot(cot_u), cot_g, cot_u })
}

/// `T = |1 + f0g + f0u|^2`, evaluated as `|(e^{2i delta_g} + e^{2i delta_u}) / 2|^2`.
pub fn transmission_analytic(amps: &Quasi1DAmplitudes, k0: f64) -> TransmissionResult {
    let eg = 1.0 + 2.0 * amps.f0g;
    let eu = 1.0 + 2.0 * amps.f0u;
    let t = (0.25 * (eg + eu).norm_sqr()).clamp(0.0, 1.0);
    TransmissionResult::new(t, k0, TransmissionSource::Analytic)
}

/// Transmission with the odd amplitude dropped (pure s-wave model).
pub fn transmission_even_only(amps: &Quasi1DAmplitudes, k0: f64) -> TransmissionResult {
    let even = Quasi1DAmplitudes { f0u: Complex64::new(0.0, 0.0), cot_u: f64::NEG_INFINITY, ..*amps };
    transmission_analytic(&even, k0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// `cot(delta_g) = 0`
    EvenResonance,
    /// `cot(delta_u) = 0`
    OddResonance,
    TMin,
    TMax,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CirFeature {
    pub v0: f64,
    pub kind: FeatureKind,
    pub t: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CirScan {
    pub features: Vec<CirFeature>,
    /// No sign change or interior extremum was bracketed by the scan.
    pub no_bracket: bool,
}

impl CirScan {
    pub fn of_kind(&self, kind: FeatureKind) -> impl Iterator<Item = &CirFeature> {
        self.features.iter().filter(move |f| f.kind == kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootSearch {
    pub v0_min: f64,
    pub v0_max: f64,
    pub samples: usize,
    pub tol: f64,
    /// Drop the odd amplitude.
    pub even_only: bool,
}

impl RootSearch {
    pub fn new(v0_min: f64, v0_max: f64, samples: usize) -> Self {
        Self { v0_min, v0_max, samples, tol: 1e-10, even_only: false }
    }
}

/// Locates resonances and transmission extrema along a family of potentials
/// parametrised by `V0`. `params_of` maps `V0` to its low-energy parameters.
pub fn find_cir_roots<F>(params_of: F, search: &RootSearch, a_perp: f64, k0: f64, c: f64) -> Result<CirScan>
where
    F: Fn(f64) -> Result<ScatteringParams>,
{
    let s = threshold_root(a_perp, k0, c)?;
    if search.samples < 3 || !(search.v0_max >= search.v0_min) {
        return domain("root search needs at least 3 samples over a non-empty range");
    }
    // cotangents are continuous in 1/a_s and 1/V_p, so work with inverses
    let eval = |v0: f64| -> Result<(f64, f64, f64)> {
        let p = params_of(v0)?;
        let cg = cot_g_from_inverse(inverse(p.a_s), a_perp, k0, s);
        let cu = if search.even_only || p.v_p == 0.0 {
            f64::NEG_INFINITY
        } else {
            cot_u_from_inverse(inverse(p.v_p), a_perp, k0, s)
        };
        let cg = if p.a_s == 0.0 { f64::NEG_INFINITY } else { cg };
        let amps = Quasi1DAmplitudes { f0g: amplitude_from_cot(cg), f0u: amplitude_from_cot(cu), cot_g: cg, cot_u: cu };
        Ok((cg, cu, transmission_analytic(&amps, k0).t))
    };

    let n = search.samples;
    let h = (search.v0_max - search.v0_min) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| search.v0_min + i as f64 * h).collect();
    let vals = xs.iter().map(|&v| eval(v)).collect::<Result<Vec<_>>>()?;

    let mut features = Vec::new();
    let t_of = |v: f64| eval(v).map(|e| e.2);
    for i in 0..n - 1 {
        let (a, b) = (vals[i], vals[i + 1]);
        for (kind, fa, fb, pick) in
            [(FeatureKind::EvenResonance, a.0, b.0, 0usize), (FeatureKind::OddResonance, a.1, b.1, 1usize)]
        {
            if fa.is_finite() && fb.is_finite() && fa * fb < 0.0 {
                let root =
                    bisect(|v| eval(v).map(|e| if pick == 0 { e.0 } else { e.1 }), xs[i], xs[i + 1], search.tol)?;
                features.push(CirFeature { v0: root, kind, t: t_of(root)? });
            }
        }
    }
    let plateau = 1e-14;
    for i in 1..n - 1 {
        let (tl, tc, tr) = (vals[i - 1].2, vals[i].2, vals[i + 1].2);
        let is_min = tc < tl - plateau && tc <= tr - plateau || tc <= tl - plateau && tc < tr - plateau;
        let is_max = tc > tl + plateau && tc >= tr + plateau || tc >= tl + plateau && tc > tr + plateau;
        if is_min || is_max {
            let sign = if is_min { 1.0 } else { -1.0 };
            let v = golden_section(|v| t_of(v).map(|t| sign * t), xs[i - 1], xs[i + 1], search.tol)?;
            let kind = if is_min { FeatureKind::TMin } else { FeatureKind::TMax };
            features.push(CirFeature { v0: v, kind, t: t_of(v)? });
        }
    }
    features.sort_by(|a, b| a.v0.total_cmp(&b.v0));
    let no_bracket = features.is_empty();
    Ok(CirScan { features, no_bracket })
}

#[inline]
fn inverse(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        1.0 / x
    }
}

fn bisect<F: Fn(f64) -> Result<f64>>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo)?;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimiser of a unimodal function on `[a, b]`.
pub(crate) fn golden_section<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
