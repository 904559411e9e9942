//! Free-space radial scattering: phase shifts, low-energy parameters,
//! bound-state counting and the partial-wave cross section.
//!
//! The reduced radial function `u_l(r) = r R_l(r)` obeys
//! `u'' = [2 mu (V(r) + l(l+1)/(2 mu r^2)) - k^2] u`, integrated outward with
//! Numerov's method on a uniform grid and matched to Riccati–Bessel functions
//! at the outer edge.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::potentials::{centrifugal, PotentialKind, PotentialSpec, MU};
use crate::special::{riccati_j, riccati_y};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialSolverConfig {
    /// Innermost grid point.
    pub r_min: f64,
    /// Target Numerov step.
    pub step: f64,
    /// Matching radius. Doubled once to verify convergence.
    pub r_match: f64,
    /// Relative tolerance on `tan(delta)` under doubling of `r_match`.
    pub match_tol: f64,
    /// Momentum ladder for the `k -> 0` extrapolation, largest first.
    pub k_ladder: [f64; 3],
    /// Allowed disagreement between the two extrapolations of the ladder,
    /// measured on `k^(2l+1) cot(delta)`.
    pub ladder_tol: f64,
    /// `|a_s|` or `|V_p|^(1/3)` beyond this is reported as divergent.
    pub divergence_cap: f64,
}

impl Default for RadialSolverConfig {
    fn default() -> Self {
        Self {
            r_min: 1e-6,
            step: 1e-3,
            r_match: 40.0,
            match_tol: 1e-6,
            k_ladder: [1e-2, 1e-3, 1e-4],
            ladder_tol: 1e-5,
            divergence_cap: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseShiftResult {
    pub l: u32,
    pub k: f64,
    /// Phase shift reduced to `(-pi/2, pi/2]`.
    pub delta: f64,
    pub tan_delta: f64,
    pub matching_radius: f64,
    pub converged: bool,
}

/// One low-energy parameter (`a_s` for `l = 0`, `V_p` for `l = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowEnergyFit {
    pub l: u32,
    /// `a_s` (length) or `V_p` (volume). Infinite when divergent.
    pub value: f64,
    /// Extrapolated `k^(2l+1) cot(delta)` at `k = 0`, i.e. `-1/value`.
    pub inverse: f64,
    /// Smallest momentum used.
    pub k_fit: f64,
    pub extrapolated: bool,
    pub divergent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatteringParams {
    pub a_s: f64,
    /// Scattering volume `V_p = a_p^3`.
    pub v_p: f64,
    pub k_fit: f64,
    pub extrapolated: bool,
    pub s_divergent: bool,
    pub p_divergent: bool,
}

impl ScatteringParams {
    /// Parameters given directly, e.g. for zero-range models.
    pub fn exact(a_s: f64, v_p: f64) -> Self {
        Self { a_s, v_p, k_fit: 0.0, extrapolated: false, s_divergent: false, p_divergent: false }
    }

    /// `a_p = V_p^(1/3)` with the sign of `V_p`.
    pub fn a_p(&self) -> f64 {
        self.v_p.cbrt()
    }
}

struct RadialGrid {
    r0: f64,
    h: f64,
    n: usize,
    /// Index of the node sitting on a potential discontinuity, if any.
    jump: Option<usize>,
}

impl RadialGrid {
    fn new(p: &PotentialSpec, cfg: &RadialSolverConfig, r_max: f64) -> Self {
        let r0 = cfg.r_min;
        match p.kind {
            PotentialKind::SquareWell if p.r0 > r0 && p.v0 != 0.0 => {
                // put the well edge on a node
                let m = ((p.r0 - r0) / cfg.step).ceil().max(1.0);
                let h = (p.r0 - r0) / m;
                let n = ((r_max - r0) / h).ceil() as usize + 1;
                Self { r0, h, n, jump: Some(m as usize) }
            }
            _ => {
                let n = ((r_max - r0) / cfg.step).ceil() as usize + 1;
                Self { r0, h: cfg.step, n, jump: None }
            }
        }
    }

    #[inline]
    fn r(&self, i: usize) -> f64 {
        self.r0 + i as f64 * self.h
    }
}

/// Integrates the regular solution on the grid and returns `u` at every node.
fn numerov(p: &PotentialSpec, l: u32, k2: f64, grid: &RadialGrid) -> Vec<f64> {
    let ll = (l * (l + 1)) as f64;
    // g for the potential on the inner (`inside = true`) or outer side of a jump
    let g_side = |i: usize, inside: bool| -> f64 {
        let r = grid.r(i);
        let v = match grid.jump {
            Some(m) if i == m => {
                if inside {
                    p.v0
                } else {
                    0.0
                }
            }
            _ => p.value(r),
        };
        2.0 * MU * (v + centrifugal(l, r)) - k2
    };
    // leading behaviour r^(l+1) (1 + c r) near the origin
    let c = match p.kind {
        PotentialKind::ScreenedCoulomb => MU * p.v0 * p.r0 / (l as f64 + 1.0),
        PotentialKind::SquareWell => 0.0,
    };
    let start = |r: f64| r.powi(l as i32 + 1) * (1.0 + c * r);

    let h = grid.h;
    let mut u = vec![0.0; grid.n];
    u[0] = start(grid.r(0));
    u[1] = start(grid.r(1));
    match grid.jump {
        Some(m) if m + 1 < grid.n => {
            march(&mut u, 1, m, h, |i| g_side(i, true));
            // restart across the discontinuity from a Taylor step using the
            // one-sided equations u'' = g u on either side
            let r = grid.r(m);
            let gp = -2.0 * ll / r.powi(3);
            let gpp = 6.0 * ll / r.powi(4);
            let gi = g_side(m, true);
            let go = g_side(m, false);
            let h2 = h * h;
            let h3 = h2 * h;
            let h4 = h3 * h;
            let cu_in = 1.0 + h2 / 2.0 * gi - h3 / 6.0 * gp + h4 / 24.0 * (gpp + gi * gi);
            let cd_in = -h - h3 / 6.0 * gi + h4 / 12.0 * gp;
            let du = (u[m - 1] - cu_in * u[m]) / cd_in;
            let cu_out = 1.0 + h2 / 2.0 * go + h3 / 6.0 * gp + h4 / 24.0 * (gpp + go * go);
            let cd_out = h + h3 / 6.0 * go + h4 / 12.0 * gp;
            u[m + 1] = cu_out * u[m] + cd_out * du;
            march(&mut u, m + 1, grid.n - 1, h, |i| g_side(i, false));
        }
        _ => march(&mut u, 1, grid.n - 1, h, |i| g_side(i, true)),
    }
    u
}

/// Numerov steps from nodes `(from - 1, from)` up to `to`, in summed form on
/// `w = (1 - h^2 g / 12) u`: the second difference of `w` is `h^2 g u`, kept
/// in a running first difference so that a tiny `k^2 h^2` is not lost.
fn march<G: Fn(usize) -> f64>(u: &mut [f64], from: usize, to: usize, h: f64, g: G) {
    let hh = h * h;
    let f = |i: usize| 1.0 - hh / 12.0 * g(i);
    let mut w = f(from) * u[from];
    let mut d = w - f(from - 1) * u[from - 1];
    for i in from..to {
        d += hh * g(i) * u[i];
        w += d;
        u[i + 1] = w / f(i + 1);
        // keep the growing solution in range
        if u[i + 1].abs() > 1e200 {
            for v in u.iter_mut().take(i + 2) {
                *v *= 1e-200;
            }
            w *= 1e-200;
            d *= 1e-200;
        }
    }
}

fn tan_delta_at(p: &PotentialSpec, l: u32, k: f64, r_match: f64, cfg: &RadialSolverConfig) -> f64 {
    let grid = RadialGrid::new(p, cfg, r_match);
    let u = numerov(p, l, k * k, &grid);
    let ib = grid.n - 1;
    // second matching point roughly a quarter wavelength (or half the box) inward
    let span = (0.5 * r_match).min(1.0 / k);
    let ia = ib - ((span / grid.h).round() as usize).clamp(1, ib - 1);
    let (ra, rb) = (grid.r(ia), grid.r(ib));
    let (ua, ub) = (u[ia], u[ib]);
    let (ja, jb) = (riccati_j(l, k * ra), riccati_j(l, k * rb));
    let (ya, yb) = (riccati_y(l, k * ra), riccati_y(l, k * rb));
    // u = A (j - tan(delta) y)
    (ub * ja - ua * jb) / (ub * ya - ua * yb)
}

fn reduce_mod_pi(delta: f64) -> f64 {
    let mut d = delta % PI;
    if d <= -PI / 2.0 {
        d += PI;
    } else if d > PI / 2.0 {
        d -= PI;
    }
    d
}

pub fn solve_phase_shift(p: &PotentialSpec, l: u32, k: f64) -> Result<PhaseShiftResult> {
    solve_phase_shift_with(p, l, k, &RadialSolverConfig::default())
}

pub fn solve_phase_shift_with(p: &PotentialSpec, l: u32, k: f64, cfg: &RadialSolverConfig) -> Result<PhaseShiftResult> {
    if !(k > 0.0 && k.is_finite()) {
        return domain(format!("phase shift needs k > 0, got {k}"));
    }
    if !(cfg.step * k < 0.5) {
        return domain(format!("k = {k} is not resolved by the radial step {}", cfg.step));
    }
    let r_match = cfg.r_match.max(p.negligible_beyond(1e-16)).max(2.0 * p.r0);
    let t1 = tan_delta_at(p, l, k, r_match, cfg);
    let t2 = tan_delta_at(p, l, k, 2.0 * r_match, cfg);
    // tan(delta) is only resolved to roundoff times (k r)^(2l+1) at the matching radius
    let lp = 2 * l as i32 + 1;
    let floor = 1e-7 * (k * p.r0.max(1.0)).powi(lp) + 1e-13 * (2.0 * k * r_match).powi(lp);
    let converged = (t1 - t2).abs() <= cfg.match_tol * t1.abs().max(t2.abs()) + floor;
    if !converged {
        return Err(Error::Convergence(format!(
            "phase shift l={l}, k={k}: tan(delta) = {t1:.12e} at r={r_match} but {t2:.12e} at r={}",
            2.0 * r_match
        )));
    }
    Ok(PhaseShiftResult {
        l,
        k,
        delta: reduce_mod_pi(t2.atan()),
        tan_delta: t2,
        matching_radius: 2.0 * r_match,
        converged,
    })
}

/// Extrapolates `k^(2l+1) cot(delta_l)` linearly in `k^2` to `k = 0`.
pub fn low_energy_fit(p: &PotentialSpec, l: u32, cfg: &RadialSolverConfig) -> Result<LowEnergyFit> {
    let k_fit = cfg.k_ladder[2];
    if p.is_zero() {
        return Ok(LowEnergyFit {
            l,
            value: 0.0,
            inverse: f64::NEG_INFINITY,
            k_fit,
            extrapolated: false,
            divergent: false,
        });
    }
    let mut f = [0.0; 3];
    for (fi, &k) in f.iter_mut().zip(cfg.k_ladder.iter()) {
        let t = solve_phase_shift_with(p, l, k, cfg)?.tan_delta;
        *fi = k.powi(2 * l as i32 + 1) / t;
    }
    let k2: Vec<f64> = cfg.k_ladder.iter().map(|k| k * k).collect();
    let extrapolate = |i: usize, j: usize| f[j] - (f[i] - f[j]) * k2[j] / (k2[i] - k2[j]);
    let coarse = extrapolate(0, 1);
    let fine = extrapolate(1, 2);
    if (coarse - fine).abs() > cfg.ladder_tol * (fine.abs() + 1e-2) {
        return Err(Error::Convergence(format!(
            "low-energy ladder for l={l}, V0={}: extrapolations {coarse:.10e} and {fine:.10e} disagree",
            p.v0
        )));
    }
    let value = -1.0 / fine;
    let cap = cfg.divergence_cap.powi(2 * l as i32 + 1);
    let divergent = !value.is_finite() || value.abs() > cap;
    Ok(LowEnergyFit { l, value, inverse: fine, k_fit, extrapolated: true, divergent })
}

pub fn scattering_length_s(p: &PotentialSpec) -> Result<LowEnergyFit> {
    low_energy_fit(p, 0, &RadialSolverConfig::default())
}

pub fn scattering_volume_p(p: &PotentialSpec) -> Result<LowEnergyFit> {
    low_energy_fit(p, 1, &RadialSolverConfig::default())
}

pub fn scattering_params(p: &PotentialSpec) -> Result<ScatteringParams> {
    scattering_params_with(p, &RadialSolverConfig::default())
}

pub fn scattering_params_with(p: &PotentialSpec, cfg: &RadialSolverConfig) -> Result<ScatteringParams> {
    let s = low_energy_fit(p, 0, cfg)?;
    let pw = low_energy_fit(p, 1, cfg)?;
    Ok(ScatteringParams {
        a_s: s.value,
        v_p: pw.value,
        k_fit: s.k_fit,
        extrapolated: s.extrapolated,
        s_divergent: s.divergent,
        p_divergent: pw.divergent,
    })
}

/// Number of bound states in partial wave `l`, from the nodes of the
/// zero-energy regular solution (Sturm oscillation count).
pub fn count_bound_states(p: &PotentialSpec, l: u32) -> usize {
    count_bound_states_with(p, l, &RadialSolverConfig::default())
}

pub fn count_bound_states_with(p: &PotentialSpec, l: u32, cfg: &RadialSolverConfig) -> usize {
    if p.is_zero() {
        return 0;
    }
    let r_max = cfg.r_match.max(p.negligible_beyond(1e-16)).max(2.0 * p.r0);
    let grid = RadialGrid::new(p, cfg, r_max);
    let u = numerov(p, l, 0.0, &grid);
    let mut nodes = u.windows(2).filter(|w| w[0] != 0.0 && w[0].signum() != w[1].signum()).count();

    // Outside the potential u = alpha r^(l+1) + beta r^(-l); a zero beyond the
    // grid sits at r^(2l+1) = -beta / alpha.
    let n = grid.n;
    let (r1, r2) = (grid.r(n - 2), grid.r(n - 1));
    let (u1, u2) = (u[n - 2], u[n - 1]);
    let lp = l as i32;
    let (a1, b1) = (r1.powi(lp + 1), r1.powi(-lp));
    let (a2, b2) = (r2.powi(lp + 1), r2.powi(-lp));
    let det = a1 * b2 - a2 * b1;
    let alpha = (u1 * b2 - u2 * b1) / det;
    let beta = (a1 * u2 - a2 * u1) / det;
    if alpha != 0.0 {
        let zero = -beta / alpha;
        if zero > r2.powi(2 * lp + 1) {
            nodes += 1;
        }
    }
    nodes
}

/// Total 3D cross section `4 pi / k^2 sum_l (2l+1) sin^2 delta_l`.
pub fn cross_section_3d(deltas: &[(u32, f64)], k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return domain(format!("cross section needs k > 0, got {k}"));
    }
    let sum: f64 = deltas.iter().map(|&(l, d)| (2 * l + 1) as f64 * d.sin().powi(2)).sum();
    Ok(4.0 * PI / (k * k) * sum)
}
