//! Run configuration: one TOML file, sections map onto the core types.

use std::path::Path;

use anyhow::{bail, Context};
use cirsim::wavepacket::radial::{CmGridSpec, RadialGridSpec};
use cirsim::wavepacket::{Absorber, Extraction, GridSpec, PacketSpec, PropagationConfig, StopCriterion};
use cirsim::{PotentialKind, PotentialSpec, TrapConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    RadialOnly,
    WavePacket,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::RadialOnly => "radial_only",
            Engine::WavePacket => "wave_packet",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    pub kind: PotentialKind,
    pub v0: f64,
    pub r0: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self { kind: PotentialKind::ScreenedCoulomb, v0: -8.45, r0: 1.0 }
    }
}

/// The trap is given by its mean transverse length and the frequency ratio,
/// so `a_perp` keeps its meaning when `omega1 != omega2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    /// `m1 / m2`.
    pub mass_ratio: f64,
    pub a_perp: f64,
    /// `omega1 / omega2`.
    pub omega_ratio: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self { mass_ratio: 40.0 / 87.0, a_perp: 50f64.sqrt(), omega_ratio: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollisionSection {
    pub epsilon: f64,
    /// Constant of the quasi-1D model.
    pub c: f64,
}

impl Default for CollisionSection {
    fn default() -> Self {
        Self { epsilon: 0.002, c: cirsim::quasi1d_model::DEFAULT_C }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PacketSection {
    pub a_z: f64,
    pub z0: f64,
}

impl Default for PacketSection {
    fn default() -> Self {
        Self { a_z: 60.0, z0: -200.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TierName {
    Decoupled,
    Coupled,
}

/// Unset grid sizes fall back to [`GridSpec::suggested`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSection {
    pub tier: TierName,
    pub dt: f64,
    pub max_steps: usize,
    pub r_max: Option<f64>,
    pub h_min: f64,
    pub slope: f64,
    pub h_max: f64,
    pub l_max: Option<u32>,
    pub m_max: u32,
    pub cm_nodes: usize,
    /// `rho_R` extent in units of the centre-of-mass oscillator length.
    pub cm_extent: f64,
    pub extraction: Extraction,
    pub absorber_width: f64,
    pub absorber_strength: f64,
    pub inner_density: f64,
    pub check_every: usize,
    /// Checkpoint interval of `propagate`, in steps; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for PropagationSection {
    fn default() -> Self {
        let r = RadialGridSpec::default();
        let s = StopCriterion::default();
        Self {
            tier: TierName::Decoupled,
            dt: 2.0,
            max_steps: 200_000,
            r_max: None,
            h_min: r.h_min,
            slope: r.slope,
            h_max: r.h_max,
            l_max: None,
            m_max: 4,
            cm_nodes: 64,
            cm_extent: 10.0,
            extraction: Extraction::Both,
            absorber_width: 0.0,
            absorber_strength: 0.0,
            inner_density: s.inner_density,
            check_every: s.check_every,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default = "linear")]
    pub spacing: Spacing,
}

fn linear() -> Spacing {
    Spacing::Linear
}

/// Parameters an axis may drive.
pub const AXIS_NAMES: &[&str] =
    &["v0", "r0", "a_perp", "omega_ratio", "mass_ratio", "epsilon", "c", "a_z", "z0", "dt", "l_max"];

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.count;
        if n == 1 {
            return vec![self.start];
        }
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.start + t * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub engine: Engine,
    /// Worker threads; 0 means all available cores.
    pub jobs: usize,
    /// Also report the transmission with the odd-wave amplitude dropped
    /// (analytic engine).
    pub even_only: bool,
    pub axis: Vec<Axis>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { engine: Engine::Analytic, jobs: 0, even_only: false, axis: Vec::new() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub potential: PotentialSection,
    pub trap: TrapSection,
    pub collision: CollisionSection,
    pub packet: PacketSection,
    pub propagation: PropagationSection,
    pub sweep: SweepSection,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Config::default(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> anyhow::Result<()> {
        for ax in &self.sweep.axis {
            if !AXIS_NAMES.contains(&ax.name.as_str()) {
                bail!("unknown sweep axis `{}` (known: {})", ax.name, AXIS_NAMES.join(", "));
            }
            if ax.count == 0 {
                bail!("sweep axis `{}` is empty", ax.name);
            }
            if ax.spacing == Spacing::Log && !(ax.start > 0.0 && ax.stop > 0.0) {
                bail!("log axis `{}` needs positive bounds", ax.name);
            }
            if !(ax.start.is_finite() && ax.stop.is_finite()) {
                bail!("sweep axis `{}` has non-finite bounds", ax.name);
            }
        }
        let mut names: Vec<&str> = self.sweep.axis.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.sweep.axis.len() {
            bail!("a sweep axis is listed twice");
        }
        Ok(())
    }

    /// Hex SHA-256 of the resolved configuration. The worker count does not
    /// affect results and is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.sweep.jobs = 0;
        let json = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Copy with one scalar parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Self {
        let mut c = self.clone();
        match name {
            "v0" => c.potential.v0 = value,
            "r0" => c.potential.r0 = value,
            "a_perp" => c.trap.a_perp = value,
            "omega_ratio" => c.trap.omega_ratio = value,
            "mass_ratio" => c.trap.mass_ratio = value,
            "epsilon" => c.collision.epsilon = value,
            "c" => c.collision.c = value,
            "a_z" => c.packet.a_z = value,
            "z0" => c.packet.z0 = value,
            "dt" => c.propagation.dt = value,
            "l_max" => c.propagation.l_max = Some(value.round() as u32),
            other => unreachable!("axis `{other}` passed validation"),
        }
        c
    }

    pub fn potential(&self) -> cirsim::Result<PotentialSpec> {
        PotentialSpec::new(self.potential.kind, self.potential.v0, self.potential.r0)
    }

    pub fn trap(&self) -> cirsim::Result<TrapConfig> {
        let t = &self.trap;
        if !(t.a_perp > 0.0 && t.omega_ratio > 0.0) {
            return Err(cirsim::Error::Domain(format!(
                "trap needs a_perp > 0 and omega_ratio > 0 (got {}, {})",
                t.a_perp, t.omega_ratio
            )));
        }
        let omega = 1.0 / (cirsim::potentials::MU * t.a_perp * t.a_perp);
        let w2 = 2.0 * omega / (1.0 + t.omega_ratio);
        TrapConfig::with_mass_ratio(t.mass_ratio, t.omega_ratio * w2, w2)
    }

    pub fn packet(&self) -> cirsim::Result<PacketSpec> {
        PacketSpec::from_energy(self.packet.a_z, self.packet.z0, self.collision.epsilon)
    }

    pub fn propagation(&self, trap: &TrapConfig, packet: &PacketSpec) -> PropagationConfig {
        let p = &self.propagation;
        let mut grid = GridSpec::suggested(trap, packet);
        let radial = RadialGridSpec {
            r_max: p.r_max.unwrap_or(grid.radial.r_max),
            h_min: p.h_min,
            slope: p.slope,
            h_max: p.h_max,
        };
        let l_max = p.l_max.unwrap_or(grid.l_max);
        grid = match p.tier {
            TierName::Decoupled => GridSpec::decoupled(radial, l_max),
            TierName::Coupled => {
                let a_m = (1.0 / (trap.total_mass() * trap.omega_cm())).sqrt();
                GridSpec::coupled(radial, l_max, p.m_max, CmGridSpec { n: p.cm_nodes, extent: p.cm_extent * a_m })
            }
        };
        let mut cfg = PropagationConfig::new(grid);
        cfg.dt = p.dt;
        cfg.max_steps = p.max_steps;
        cfg.extraction = p.extraction;
        cfg.stop.inner_density = p.inner_density;
        cfg.stop.check_every = p.check_every;
        if p.absorber_width > 0.0 {
            cfg.absorber = Absorber::Layer { width: p.absorber_width, strength: p.absorber_strength };
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: Config = toml::from_str("").unwrap();
        assert_eq!(c, Config::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("[trap]\nomega = 3\n").is_err());
    }

    #[test]
    fn unknown_axis_is_rejected() {
        let c: Config = toml::from_str("[[sweep.axis]]\nname = \"bogus\"\nstart = 0\nstop = 1\ncount = 3\n").unwrap();
        assert!(c.check().is_err());
    }

    #[test]
    fn axis_values_hit_both_ends() {
        let a = Axis { name: "v0".into(), start: -2.0, stop: 0.0, count: 5, spacing: Spacing::Linear };
        assert_eq!(a.values(), vec![-2.0, -1.5, -1.0, -0.5, 0.0]);
        let g = Axis { name: "epsilon".into(), start: 1e-3, stop: 1e-1, count: 3, spacing: Spacing::Log };
        let v = g.values();
        assert!((v[1] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn trap_keeps_mean_length_under_asymmetry() {
        let mut c = Config::default();
        c.trap.omega_ratio = 1.35;
        let t = c.trap().unwrap();
        assert!((t.a_perp() - c.trap.a_perp).abs() < 1e-12);
        assert!((t.omega1 / t.omega2 - 1.35).abs() < 1e-12);
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let b = a.with_param("v0", -1.0);
        assert_eq!(a.hash(), Config::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut j = a.clone();
        j.sweep.jobs = 7;
        assert_eq!(a.hash(), j.hash());
    }
}
