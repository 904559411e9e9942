//! Split-step propagation `e^{-iW dt/2} e^{-i(H_mu + V) dt} e^{-i H_M dt} e^{-iW dt/2}`.
//!
//! The trap term `W` is a pointwise phase on the grid. `H_mu + V` is applied
//! exactly in splitting: after the angular transform every `l` channel gets
//! its own radial Cayley step carrying `l(l+1)/2 mu r^2 + V(r)`. `H_M` (coupled
//! tier only) is a Cayley step along `rho_R` per azimuthal number `m`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::radial::Cayley;
use super::{Absorber, PropagationConfig, Tier, WaveFunctionGrid};
use crate::angular_dvr::LegendreBlock;
use crate::error::{Error, Result};
use crate::potentials::{PotentialSpec, MU};
use crate::quasi1d_model::TrapConfig;

/// Per-step norm change beyond which a step is reported unstable.
pub const NORM_STEP_LIMIT: f64 = 1e-4;

pub struct Propagator {
    tier: Tier,
    dt: f64,
    n_r: usize,
    n_theta: usize,
    n_phi: usize,
    n_cm: usize,
    m_max: usize,
    blocks: Vec<LegendreBlock>,
    /// Radial maps indexed by `l`.
    radial_maps: Vec<Cayley>,
    /// Centre-of-mass maps indexed by `|m|`.
    cm_maps: Vec<Cayley>,
    w_half: Vec<Complex64>,
    /// Unitary DFT `e^{-i m phi_k} / sqrt(n_phi)`, row per `m = -m_max..=m_max`.
    dft: Vec<Complex64>,
    absorbing: bool,
    buf: Vec<Complex64>,
    line: Vec<Complex64>,
}

fn as_f64(v: &[Complex64]) -> &[f64] {
    // SAFETY: Complex64 is repr(C) with two f64 fields.
    unsafe { std::slice::from_raw_parts(v.as_ptr() as *const f64, v.len() * 2) }
}

fn as_f64_mut(v: &mut [Complex64]) -> &mut [f64] {
    // SAFETY: as above; the borrow is exclusive.
    unsafe { std::slice::from_raw_parts_mut(v.as_mut_ptr() as *mut f64, v.len() * 2) }
}

impl Propagator {
    /// `trap = None` switches the confinement off (decoupled tier only).
    pub fn new(
        psi: &WaveFunctionGrid,
        trap: Option<&TrapConfig>,
        potential: &PotentialSpec,
        cfg: &PropagationConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.dt;
        let tier = psi.tier;
        if tier == Tier::Coupled && trap.is_none() {
            return Err(Error::Configuration("the coupled tier needs a trap".into()));
        }
        let mu = trap.map_or(MU, |t| t.reduced_mass());
        let radial = &psi.radial;
        let n_r = radial.len();
        let n_theta = psi.angular.n_theta;
        let n_phi = psi.angular.n_phi;
        let m_max = (n_phi - 1) / 2;
        let blocks = psi.transform.blocks.clone();

        let (lap_d, lap_e) = radial.laplacian();
        let upper: Vec<f64> = lap_e.iter().map(|e| e / (2.0 * mu)).collect();
        let gamma: Vec<f64> = match cfg.absorber {
            Absorber::None => vec![0.0; n_r],
            Absorber::Layer { width, strength } => {
                let start = radial.r_max - width;
                radial
                    .nodes
                    .iter()
                    .map(|&r| if r > start { strength * ((r - start) / width).powi(2) } else { 0.0 })
                    .collect()
            }
        };
        let l_top = n_theta - 1 + m_max;
        let radial_maps = (0..=l_top)
            .map(|l| {
                let ll = (l * (l + 1)) as f64;
                let diag: Vec<Complex64> = (0..n_r)
                    .map(|i| {
                        let r = radial.nodes[i];
                        Complex64::new(lap_d[i] / (2.0 * mu) + ll / (2.0 * mu * r * r) + potential.value(r), -gamma[i])
                    })
                    .collect();
                Cayley::new(&diag, &upper, dt)
            })
            .collect();

        let (n_cm, cm_maps, cm_nodes) = match (tier, psi.cm) {
            (Tier::Coupled, Some(cm)) => {
                let big_m = trap.expect("checked").total_mass();
                let (d, e) = cm.laplacian();
                let rho = cm.nodes();
                let upper: Vec<f64> = e.iter().map(|x| x / (2.0 * big_m)).collect();
                let maps = (0..=m_max)
                    .map(|m| {
                        let diag: Vec<Complex64> = d
                            .iter()
                            .zip(&rho)
                            .map(|(&dd, &x)| {
                                Complex64::new(dd / (2.0 * big_m) + (m * m) as f64 / (2.0 * big_m * x * x), 0.0)
                            })
                            .collect();
                        Cayley::new(&diag, &upper, dt)
                    })
                    .collect();
                (cm.n, maps, rho)
            }
            (Tier::Coupled, None) => return Err(Error::Configuration("coupled tier without a rho_R grid".into())),
            _ => (1, Vec::new(), vec![0.0]),
        };

        // e^{-i W dt/2} on the grid, layout [phi][theta][rho_R][r]
        let mut w_half = Vec::with_capacity(n_phi * n_theta * n_cm * n_r);
        for &phi in &psi.angular.phi_nodes {
            for &theta in &psi.angular.theta_nodes {
                let s = theta.sin();
                for &rr in &cm_nodes {
                    for &r in &radial.nodes {
                        let rho = r * s;
                        let w = match trap {
                            None => 0.0,
                            Some(t) if tier == Tier::Decoupled => 0.5 * t.reduced_mass() * t.omega_mu_sq() * rho * rho,
                            Some(t) => {
                                0.5 * t.total_mass() * t.omega_cm_sq() * rr * rr
                                    + 0.5 * t.reduced_mass() * t.omega_mu_sq() * rho * rho
                                    + t.coupling() * rho * rr * phi.cos()
                            }
                        };
                        w_half.push(Complex64::from_polar(1.0, -0.5 * dt * w));
                    }
                }
            }
        }

        let mut dft = Vec::with_capacity(n_phi * n_phi);
        for mi in 0..n_phi {
            let m = mi as f64 - m_max as f64;
            for k in 0..n_phi {
                let phi = 2.0 * PI * k as f64 / n_phi as f64;
                dft.push(Complex64::from_polar(1.0 / (n_phi as f64).sqrt(), -m * phi));
            }
        }

        Ok(Self {
            tier,
            dt,
            n_r,
            n_theta,
            n_phi,
            n_cm,
            m_max,
            blocks,
            radial_maps,
            cm_maps,
            w_half,
            dft,
            absorbing: !matches!(cfg.absorber, Absorber::None),
            buf: vec![Complex64::new(0.0, 0.0); psi.values.len()],
            line: Vec::new(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One split step. Fails if the norm moves by more than
    /// [`NORM_STEP_LIMIT`] (only growth counts when an absorber is active).
    pub fn step(&mut self, psi: &mut WaveFunctionGrid) -> Result<()> {
        if psi.values.len() != self.buf.len() {
            return Err(Error::Shape { expected: self.buf.len(), got: psi.values.len() });
        }
        let before = psi.norm();
        self.apply_phase(&mut psi.values);
        match self.tier {
            Tier::Decoupled => self.kinetic_decoupled(&mut psi.values),
            Tier::Coupled => self.kinetic_coupled(&mut psi.values),
        }
        self.apply_phase(&mut psi.values);
        psi.step += 1;
        psi.time += self.dt;
        let after = psi.norm();
        let drift = after - before;
        if !after.is_finite() || drift > NORM_STEP_LIMIT || (!self.absorbing && drift.abs() > NORM_STEP_LIMIT) {
            return Err(Error::Instability { drift, limit: NORM_STEP_LIMIT });
        }
        Ok(())
    }

    pub fn run(&mut self, psi: &mut WaveFunctionGrid, n: usize) -> Result<()> {
        for _ in 0..n {
            self.step(psi)?;
        }
        Ok(())
    }

    fn apply_phase(&self, v: &mut [Complex64]) {
        for (x, p) in v.iter_mut().zip(&self.w_half) {
            *x *= p;
        }
    }

    fn kinetic_decoupled(&mut self, v: &mut [Complex64]) {
        let n_r = self.n_r;
        let block = &self.blocks[self.m_max];
        block.forward_batch(as_f64(v), 2 * n_r, as_f64_mut(&mut self.buf));
        for (row, &l) in block.ls.iter().enumerate() {
            self.radial_maps[l as usize].apply(&mut self.buf[row * n_r..(row + 1) * n_r]);
        }
        block.inverse_batch(as_f64(&self.buf), 2 * n_r, as_f64_mut(v));
    }

    fn kinetic_coupled(&mut self, v: &mut [Complex64]) {
        let (n_r, n_t, n_c, n_p) = (self.n_r, self.n_theta, self.n_cm, self.n_phi);
        let plane = n_t * n_c * n_r;
        // phi -> m
        self.buf.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for mi in 0..n_p {
            let out = &mut self.buf[mi * plane..(mi + 1) * plane];
            for k in 0..n_p {
                let f = self.dft[mi * n_p + k];
                let src = &v[k * plane..(k + 1) * plane];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += f * s;
                }
            }
        }
        for mi in 0..n_p {
            let am = (mi as isize - self.m_max as isize).unsigned_abs();
            let sector = &mut self.buf[mi * plane..(mi + 1) * plane];
            // H_M along rho_R for every (theta, r)
            for t in 0..n_t {
                self.cm_maps[am].apply_strided(&mut sector[t * n_c * n_r..(t + 1) * n_c * n_r], n_r, &mut self.line);
            }
            // H_mu + V per l
            let block = &self.blocks[mi];
            let spec = &mut v[mi * plane..(mi + 1) * plane];
            block.forward_batch(as_f64(sector), 2 * n_c * n_r, as_f64_mut(spec));
            for (row, &l) in block.ls.iter().enumerate() {
                for p in 0..n_c {
                    let off = (row * n_c + p) * n_r;
                    self.radial_maps[l as usize].apply(&mut spec[off..off + n_r]);
                }
            }
            block.inverse_batch(as_f64(spec), 2 * n_c * n_r, as_f64_mut(sector));
        }
        // m -> phi
        v.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for k in 0..n_p {
            let out = &mut v[k * plane..(k + 1) * plane];
            for mi in 0..n_p {
                let f = self.dft[mi * n_p + k].conj();
                let src = &self.buf[mi * plane..(mi + 1) * plane];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += f * s;
                }
            }
        }
    }
}
