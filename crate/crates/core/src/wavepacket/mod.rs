//! Time-dependent wave-packet scattering in the waveguide.
//!
//! Two tiers share one engine. The decoupled tier (`omega1 = omega2`) works in
//! the relative coordinates `(r, theta)` with `m = 0`. The coupled tier adds
//! the transverse centre-of-mass radius `rho_R` and the relative azimuth
//! `phi` of the co-rotating frame.
//!
//! Values are stored as `sqrt(quadrature weight) x reduced function`, so the
//! norm is the plain sum of `|values|^2` and every grid transform is
//! orthogonal. The reduced function is `r psi` (decoupled) or
//! `r sqrt(rho_R) psi` (coupled).

mod checkpoint;
mod propagator;
pub mod radial;

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use propagator::{Propagator, NORM_STEP_LIMIT};
pub use radial::{CmGridSpec, RadialGrid, RadialGridSpec};

use crate::angular_dvr::{build_basis, AngularGrid, SpectralTransform};
use crate::error::{domain, Error, Result};
use crate::potentials::{PotentialSpec, MU};
use crate::quasi1d_model::{TransmissionResult, TransmissionSource, TrapConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Decoupled,
    Coupled,
}

/// Incident Gaussian packet in the relative coordinate `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub a_z: f64,
    pub z0: f64,
    pub k0: f64,
    pub epsilon: f64,
}

impl PacketSpec {
    pub fn new(a_z: f64, z0: f64, k0: f64) -> Result<Self> {
        if !(a_z > 0.0 && k0 > 0.0 && z0 < 0.0) {
            return domain(format!("packet needs a_z > 0, k0 > 0, z0 < 0 (got {a_z}, {k0}, {z0})"));
        }
        Ok(Self { a_z, z0, k0, epsilon: k0 * k0 / (2.0 * MU) })
    }

    pub fn from_energy(a_z: f64, z0: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return domain(format!("collision energy must be positive, got {epsilon}"));
        }
        Self::new(a_z, z0, (2.0 * MU * epsilon).sqrt())
    }

    /// Packet starts outside the interaction range and stays single-mode.
    pub fn validate(&self, trap: &TrapConfig, r0: f64) -> Result<()> {
        let limit = -(3.0 * self.a_z).max(10.0 * r0);
        if !(self.z0 < limit) {
            return Err(Error::Configuration(format!("z0 = {} must lie below {limit}", self.z0)));
        }
        if !trap.single_mode(self.epsilon) {
            return Err(Error::Configuration(format!(
                "epsilon = {} leaves the single-mode window (0, {})",
                self.epsilon,
                2.0 * trap.omega()
            )));
        }
        Ok(())
    }

    /// Relative velocity `k0 / mu`.
    pub fn velocity(&self) -> f64 {
        self.k0 / MU
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Absorber {
    #[default]
    None,
    /// Quadratic imaginary potential `-i strength ((r - r_max + width)/width)^2`
    /// over the outer `width` of the radial grid.
    Layer { width: f64, strength: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub tier: Tier,
    pub radial: RadialGridSpec,
    pub l_max: u32,
    pub m_max: u32,
    pub cm: Option<CmGridSpec>,
}

impl GridSpec {
    pub fn decoupled(radial: RadialGridSpec, l_max: u32) -> Self {
        Self { tier: Tier::Decoupled, radial, l_max, m_max: 0, cm: None }
    }

    pub fn coupled(radial: RadialGridSpec, l_max: u32, m_max: u32, cm: CmGridSpec) -> Self {
        Self { tier: Tier::Coupled, radial, l_max, m_max, cm: Some(cm) }
    }

    /// Grid sized for a packet in a trap: radial extent from the packet
    /// travel, `l_max` from resolving the transverse tube at that extent.
    pub fn suggested(trap: &TrapConfig, packet: &PacketSpec) -> Self {
        let r_max = (packet.z0.abs() + 7.0 * packet.a_z).max(60.0);
        let l_max = (4.0 * r_max / trap.a_perp()).ceil().max(16.0) as u32;
        let radial = RadialGridSpec { r_max, ..RadialGridSpec::default() };
        Self::decoupled(radial, l_max)
    }
}

/// When the scattered packet counts as asymptotic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopCriterion {
    /// Half-width of the slab `|z| < inner_slab` treated as the interaction region.
    pub inner_slab: f64,
    /// Maximum probability left inside the slab.
    pub inner_density: f64,
    /// Steps between checks.
    pub check_every: usize,
}

impl Default for StopCriterion {
    fn default() -> Self {
        Self { inner_slab: 10.0, inner_density: 1e-3, check_every: 25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    Projection,
    Density,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub dt: f64,
    pub max_steps: usize,
    pub grid: GridSpec,
    pub absorber: Absorber,
    pub stop: StopCriterion,
    pub extraction: Extraction,
}

impl PropagationConfig {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            dt: 1.0,
            max_steps: 200_000,
            grid,
            absorber: Absorber::None,
            stop: StopCriterion::default(),
            extraction: Extraction::Both,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Configuration(format!("dt must be positive, got {}", self.dt)));
        }
        if let Absorber::Layer { width, strength } = self.absorber {
            if !(width > 0.0 && width < self.grid.radial.r_max && strength > 0.0) {
                return Err(Error::Configuration(format!("bad absorber width {width} / strength {strength}")));
            }
            if self.extraction != Extraction::Density {
                return Err(Error::Configuration(
                    "projection extraction needs unitary evolution; disable the absorber or use density extraction"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct WaveFunctionGrid {
    pub tier: Tier,
    pub grid: GridSpec,
    pub radial: RadialGrid,
    pub angular: AngularGrid,
    pub transform: SpectralTransform,
    pub cm: Option<CmGridSpec>,
    /// Layout `[phi][theta][rho_R][r]`; the `phi` and `rho_R` axes have length
    /// one in the decoupled tier.
    pub values: Vec<Complex64>,
    pub step: u64,
    pub time: f64,
}

impl WaveFunctionGrid {
    /// Zero state on the grid.
    pub fn zeros(grid: &GridSpec) -> Result<Self> {
        let radial = grid.radial.build()?;
        let m_max = if grid.tier == Tier::Decoupled { 0 } else { grid.m_max };
        let (angular, transform) = build_basis(grid.l_max, m_max)?;
        let cm = match grid.tier {
            Tier::Decoupled => None,
            Tier::Coupled => match grid.cm {
                Some(c) if c.n > 0 && c.extent > 0.0 => Some(c),
                _ => return Err(Error::Configuration("coupled tier needs a rho_R grid".into())),
            },
        };
        let n = angular.len() * cm.map_or(1, |c| c.n) * radial.len();
        Ok(Self {
            tier: grid.tier,
            grid: GridSpec { m_max, cm, ..*grid },
            radial,
            angular,
            transform,
            cm,
            values: vec![Complex64::new(0.0, 0.0); n],
            step: 0,
            time: 0.0,
        })
    }

    pub fn n_cm(&self) -> usize {
        self.cm.map_or(1, |c| c.n)
    }

    #[inline]
    pub fn index(&self, phi: usize, theta: usize, rho_r: usize, r: usize) -> usize {
        ((phi * self.angular.n_theta + theta) * self.n_cm() + rho_r) * self.radial.len() + r
    }

    /// Quadrature weight of a grid point (for the reduced function).
    pub fn weight(&self, phi: usize, theta: usize, rho_r: usize, r: usize) -> f64 {
        let _ = phi;
        let ang = self.angular.theta_weights[theta] * 2.0 * std::f64::consts::PI / self.angular.n_phi as f64;
        let cm = self.cm.map_or(1.0, |c| c.h());
        let _ = rho_r;
        ang * cm * self.radial.weights[r]
    }

    /// Fills the grid from the reduced function `f(r, theta, phi, rho_R)`.
    pub fn fill<F: Fn(f64, f64, f64, f64) -> Complex64>(&mut self, f: F) {
        let cm_nodes = self.cm.map_or(vec![0.0], |c| c.nodes());
        for j in 0..self.angular.n_phi {
            let phi = self.angular.phi_nodes[j];
            for t in 0..self.angular.n_theta {
                let theta = self.angular.theta_nodes[t];
                for (p, &rr) in cm_nodes.iter().enumerate() {
                    for i in 0..self.radial.len() {
                        let idx = self.index(j, t, p, i);
                        self.values[idx] = self.weight(j, t, p, i).sqrt() * f(self.radial.nodes[i], theta, phi, rr);
                    }
                }
            }
        }
    }

    /// Reduced function at a grid point.
    pub fn reduced(&self, phi: usize, theta: usize, rho_r: usize, r: usize) -> Complex64 {
        self.values[self.index(phi, theta, rho_r, r)] / self.weight(phi, theta, rho_r, r).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return domain("cannot normalize a zero or non-finite state");
        }
        let s = 1.0 / n.sqrt();
        self.values.iter_mut().for_each(|z| *z *= s);
        Ok(n)
    }

    pub fn inner(&self, other: &WaveFunctionGrid) -> Result<Complex64> {
        if self.values.len() != other.values.len() {
            return Err(Error::Shape { expected: self.values.len(), got: other.values.len() });
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum())
    }

    /// Sum of `g(z) |values|^2` with `z = r cos(theta)`.
    pub fn z_moment<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let n_r = self.radial.len();
        let per_theta = self.n_cm() * n_r;
        let mut s = 0.0;
        for (k, chunk) in self.values.chunks(n_r).enumerate() {
            let t = (k / (per_theta / n_r)) % self.angular.n_theta;
            let c = self.angular.cos_theta[t];
            for (v, &r) in chunk.iter().zip(&self.radial.nodes) {
                s += g(r * c) * v.norm_sqr();
            }
        }
        s
    }

    /// Probability in the outermost `fraction` of the radial grid.
    pub fn boundary_population(&self, fraction: f64) -> f64 {
        let cut = self.radial.r_max * (1.0 - fraction);
        let n_r = self.radial.len();
        self.values
            .chunks(n_r)
            .map(|c| c.iter().zip(&self.radial.nodes).filter(|(_, &r)| r > cut).map(|(v, _)| v.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Largest `|reduced function|` on the last radial node.
    pub fn boundary_amplitude(&self) -> f64 {
        let n_r = self.radial.len();
        let mut m: f64 = 0.0;
        for j in 0..self.angular.n_phi {
            for t in 0..self.angular.n_theta {
                for p in 0..self.n_cm() {
                    m = m.max(self.reduced(j, t, p, n_r - 1).norm());
                }
            }
        }
        m
    }

    /// Largest `|values|` in any `m != 0` sector (coupled tier).
    pub fn nonzero_m_amplitude(&self) -> f64 {
        let n_phi = self.angular.n_phi;
        if n_phi == 1 {
            return 0.0;
        }
        let plane = self.values.len() / n_phi;
        let mut worst: f64 = 0.0;
        for q in 0..plane {
            let mean: Complex64 = (0..n_phi).map(|j| self.values[j * plane + q]).sum::<Complex64>() / n_phi as f64;
            for j in 0..n_phi {
                worst = worst.max((self.values[j * plane + q] - mean).norm());
            }
        }
        worst
    }
}

/// Builds `Psi(0)`: the transverse ground state times a Gaussian in `z` with
/// momentum `k0`, normalized to one.
pub fn initialize_packet(trap: &TrapConfig, spec: &PacketSpec, grid: &GridSpec) -> Result<WaveFunctionGrid> {
    if grid.tier == Tier::Decoupled && !trap.is_decoupled() {
        return Err(Error::Configuration("decoupled tier needs omega1 = omega2".into()));
    }
    let mut psi = WaveFunctionGrid::zeros(grid)?;
    let (a_z, z0, k0) = (spec.a_z, spec.z0, spec.k0);
    let gauss = move |z: f64| Complex64::from_polar((-(z - z0).powi(2) / (2.0 * a_z * a_z)).exp(), k0 * z);
    match grid.tier {
        Tier::Decoupled => {
            let a2 = 1.0 / (trap.reduced_mass() * trap.omega_mu());
            psi.fill(|r, theta, _, _| {
                let rho = r * theta.sin();
                r * (-rho * rho / (2.0 * a2)).exp() * gauss(r * theta.cos())
            });
        }
        Tier::Coupled => {
            let m = trap.total_mass();
            let (f1, f2) = (trap.m2 / m, trap.m1 / m);
            let (a1sq, a2sq) = (trap.a1().powi(2), trap.a2().powi(2));
            psi.fill(|r, theta, phi, rr| {
                let rho = r * theta.sin();
                let c = rr * rho * phi.cos();
                let rho1 = rr * rr + f1 * f1 * rho * rho + 2.0 * f1 * c;
                let rho2 = rr * rr + f2 * f2 * rho * rho - 2.0 * f2 * c;
                let phi_t = (-(rho1 / a1sq + rho2 / a2sq) / 2.0).exp();
                r * rr.sqrt() * phi_t * gauss(r * theta.cos())
            });
        }
    }
    psi.normalize()?;
    let edge = psi.boundary_amplitude();
    if edge > 1e-8 {
        return Err(Error::Configuration(format!("initial packet reaches the grid edge (|Psi| = {edge:.3e})")));
    }
    Ok(psi)
}

/// Where the packet stands relative to the asymptotic regime.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticStatus {
    pub forward_probability: f64,
    pub forward_mean_z: f64,
    pub inner_density: f64,
    pub ready: bool,
}

/// The forward lobe must have passed `|z0|` (or, if there is hardly any
/// forward lobe, the free packet centre must have), and the interaction slab
/// must be nearly empty.
pub fn asymptotic_status(psi: &WaveFunctionGrid, packet: &PacketSpec, stop: &StopCriterion) -> AsymptoticStatus {
    let norm = psi.norm();
    let forward = psi.z_moment(|z| if z > 0.0 { 1.0 } else { 0.0 }) / norm;
    let mean = if forward > 0.0 { psi.z_moment(|z| if z > 0.0 { z } else { 0.0 }) / (forward * norm) } else { 0.0 };
    let inner = psi.z_moment(|z| if z.abs() < stop.inner_slab { 1.0 } else { 0.0 }) / norm;
    let passed = if forward > 1e-2 {
        mean >= packet.z0.abs()
    } else {
        packet.z0 + packet.velocity() * psi.time >= packet.z0.abs()
    };
    AsymptoticStatus {
        forward_probability: forward,
        forward_mean_z: mean,
        inner_density: inner,
        ready: passed && inner < stop.inner_density,
    }
}

fn stale(status: &AsymptoticStatus) -> Error {
    Error::Stale(format!("forward <z> = {:.3}, slab population = {:.3e}", status.forward_mean_z, status.inner_density))
}

/// `T` as the probability with `z >= r0`.
pub fn extract_transmission_density(
    psi: &WaveFunctionGrid,
    packet: &PacketSpec,
    stop: &StopCriterion,
    r0: f64,
) -> Result<TransmissionResult> {
    let status = asymptotic_status(psi, packet, stop);
    if !status.ready {
        return Err(stale(&status));
    }
    let t = psi.z_moment(|z| if z >= r0 { 1.0 } else { 0.0 }) / psi.norm();
    let mut res = TransmissionResult::new(t, packet.k0, TransmissionSource::WavePacketDensity);
    res.diagnostics.insert("inner_density".into(), status.inner_density);
    Ok(res)
}

/// `T = |<Psi_0(t)|Psi(t)>|^2` against the freely evolved initial state.
pub fn extract_transmission_projection(
    psi: &WaveFunctionGrid,
    psi0: &WaveFunctionGrid,
    packet: &PacketSpec,
    stop: &StopCriterion,
) -> Result<TransmissionResult> {
    if psi.step != psi0.step {
        return Err(Error::Stale(format!("reference at step {} but state at step {}", psi0.step, psi.step)));
    }
    let status = asymptotic_status(psi, packet, stop);
    if !status.ready {
        return Err(stale(&status));
    }
    let t = psi0.inner(psi)?.norm_sqr();
    let mut res = TransmissionResult::new(t, packet.k0, TransmissionSource::WavePacketProjection);
    res.diagnostics.insert("inner_density".into(), status.inner_density);
    Ok(res)
}

/// Free evolution of `Psi(0)` up to the point where it is asymptotic.
#[derive(Clone, Debug)]
pub struct FreeReference {
    pub psi0: WaveFunctionGrid,
    pub initial: WaveFunctionGrid,
}

impl FreeReference {
    pub fn compute(trap: &TrapConfig, packet: &PacketSpec, cfg: &PropagationConfig) -> Result<Self> {
        let initial = initialize_packet(trap, packet, &cfg.grid)?;
        let mut psi0 = initial.clone();
        let mut prop = Propagator::new(&psi0, Some(trap), &PotentialSpec::screened_coulomb(0.0), cfg)?;
        let every = cfg.stop.check_every.max(1);
        loop {
            if psi0.step as usize >= cfg.max_steps {
                return Err(stale(&asymptotic_status(&psi0, packet, &cfg.stop)));
            }
            prop.run(&mut psi0, every)?;
            if asymptotic_status(&psi0, packet, &cfg.stop).ready {
                return Ok(Self { psi0, initial });
            }
        }
    }
}

/// Propagates `Psi(0)` under `H_0 + V` and extracts `T`.
pub fn run_transmission(
    trap: &TrapConfig,
    potential: &PotentialSpec,
    packet: &PacketSpec,
    cfg: &PropagationConfig,
) -> Result<TransmissionResult> {
    cfg.validate()?;
    packet.validate(trap, potential.r0)?;
    if cfg.extraction == Extraction::Density {
        let psi = initialize_packet(trap, packet, &cfg.grid)?;
        return finish(trap, potential, packet, cfg, psi, None);
    }
    let reference = FreeReference::compute(trap, packet, cfg)?;
    run_with_reference(trap, potential, packet, cfg, &reference)
}

/// As [`run_transmission`] with a precomputed free run, shared across a sweep
/// over potentials at fixed trap, packet and grid.
pub fn run_with_reference(
    trap: &TrapConfig,
    potential: &PotentialSpec,
    packet: &PacketSpec,
    cfg: &PropagationConfig,
    reference: &FreeReference,
) -> Result<TransmissionResult> {
    cfg.validate()?;
    packet.validate(trap, potential.r0)?;
    finish(trap, potential, packet, cfg, reference.initial.clone(), Some(reference))
}

fn finish(
    trap: &TrapConfig,
    potential: &PotentialSpec,
    packet: &PacketSpec,
    cfg: &PropagationConfig,
    mut psi: WaveFunctionGrid,
    reference: Option<&FreeReference>,
) -> Result<TransmissionResult> {
    let clock = Instant::now();
    let mut prop = Propagator::new(&psi, Some(trap), potential, cfg)?;
    let norm0 = psi.norm();
    let every = cfg.stop.check_every.max(1);
    let mut psi0 = reference.map(|r| r.psi0.clone());
    // catch up with the reference first
    if let Some(r) = &psi0 {
        prop.run(&mut psi, r.step as usize)?;
    }
    let mut free_prop = match &psi0 {
        Some(r) => Some(Propagator::new(r, Some(trap), &PotentialSpec::screened_coulomb(0.0), cfg)?),
        None => None,
    };
    loop {
        let status = asymptotic_status(&psi, packet, &cfg.stop);
        if status.ready {
            break;
        }
        if psi.step as usize >= cfg.max_steps {
            return Err(stale(&status));
        }
        prop.run(&mut psi, every)?;
        if let (Some(p0), Some(fp)) = (psi0.as_mut(), free_prop.as_mut()) {
            fp.run(p0, every)?;
        }
    }
    let status = asymptotic_status(&psi, packet, &cfg.stop);
    let dens = extract_transmission_density(&psi, packet, &cfg.stop, potential.r0)?;
    let proj = match &psi0 {
        Some(p0) => Some(extract_transmission_projection(&psi, p0, packet, &cfg.stop)?),
        None => None,
    };
    let mut res = match &proj {
        Some(p) => p.clone(),
        None => dens.clone(),
    };
    let mut d = BTreeMap::new();
    d.insert("t_density".to_string(), dens.t);
    if let Some(p) = &proj {
        d.insert("t_projection".to_string(), p.t);
    }
    d.insert("norm_drift".to_string(), psi.norm() - norm0);
    d.insert("boundary_population".to_string(), psi.boundary_population(0.05));
    d.insert("inner_density".to_string(), status.inner_density);
    d.insert("forward_mean_z".to_string(), status.forward_mean_z);
    d.insert("steps".to_string(), psi.step as f64);
    d.insert("time".to_string(), psi.time);
    d.insert("wall_time_s".to_string(), clock.elapsed().as_secs_f64());
    res.diagnostics = d;
    Ok(res)
}

/// Convenience single step; builds a fresh propagator each call, so loops
/// should hold a [`Propagator`] instead.
pub fn step(
    psi: &mut WaveFunctionGrid,
    trap: &TrapConfig,
    potential: &PotentialSpec,
    cfg: &PropagationConfig,
) -> Result<()> {
    Propagator::new(psi, Some(trap), potential, cfg)?.step(psi)
}
