//! Propagation checks on small grids (tight trap, fast packet).

use cirsim::wavepacket::*;
use cirsim::{Error, PotentialSpec, TrapConfig};
use num_complex::Complex64;

const RATIO: f64 = 40.0 / 87.0;

fn small_trap() -> TrapConfig {
    TrapConfig::decoupled(RATIO, 2.0).unwrap()
}

fn small_packet() -> PacketSpec {
    PacketSpec::from_energy(6.0, -20.0, 0.3).unwrap()
}

fn small_radial() -> RadialGridSpec {
    RadialGridSpec { r_max: 64.0, h_max: 0.5, ..RadialGridSpec::default() }
}

fn small_config() -> PropagationConfig {
    let mut cfg = PropagationConfig::new(GridSpec::decoupled(small_radial(), 60));
    cfg.dt = 0.25;
    cfg.max_steps = 4000;
    cfg.stop.check_every = 10;
    cfg
}

fn coupled_config(l_max: u32, m_max: u32, trap: &TrapConfig) -> PropagationConfig {
    let a_m = (1.0 / (trap.total_mass() * trap.omega_cm())).sqrt();
    let cm = CmGridSpec { n: 12, extent: 6.0 * a_m };
    let mut cfg = PropagationConfig::new(GridSpec::coupled(small_radial(), l_max, m_max, cm));
    cfg.dt = 0.25;
    cfg.max_steps = 4000;
    cfg.stop.check_every = 10;
    cfg
}

fn rho_sq(psi: &WaveFunctionGrid) -> f64 {
    let n_r = psi.radial.len();
    let mut s = 0.0;
    for t in 0..psi.angular.n_theta {
        let sin2 = 1.0 - psi.angular.cos_theta[t].powi(2);
        for i in 0..n_r {
            let r = psi.radial.nodes[i];
            s += psi.values[psi.index(0, t, 0, i)].norm_sqr() * r * r * sin2;
        }
    }
    s / psi.norm()
}

#[test]
fn initial_packet_is_normalized_and_confined() {
    let trap = small_trap();
    let psi = initialize_packet(&trap, &small_packet(), &small_config().grid).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-12);
    // transverse ground state: <rho^2> = a_perp^2
    assert!((rho_sq(&psi) / trap.a_perp().powi(2) - 1.0).abs() < 1e-3);
    assert!(psi.boundary_amplitude() < 1e-8);
}

#[test]
fn packet_reaching_the_edge_is_rejected() {
    let mut cfg = small_config();
    cfg.grid.radial.r_max = 30.0;
    let e = initialize_packet(&small_trap(), &small_packet(), &cfg.grid).unwrap_err();
    assert!(matches!(e, Error::Configuration(_)));
}

#[test]
fn norm_is_conserved_with_interaction() {
    let trap = small_trap();
    let cfg = small_config();
    let mut psi = initialize_packet(&trap, &small_packet(), &cfg.grid).unwrap();
    let mut prop = Propagator::new(&psi, Some(&trap), &PotentialSpec::screened_coulomb(-8.45), &cfg).unwrap();
    prop.run(&mut psi, 1000).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-6);
    assert_eq!(psi.step, 1000);
    assert!((psi.time - 250.0).abs() < 1e-9);
}

#[test]
fn transverse_profile_is_stationary_in_free_motion() {
    let trap = small_trap();
    let cfg = small_config();
    let mut psi = initialize_packet(&trap, &small_packet(), &cfg.grid).unwrap();
    let before = rho_sq(&psi);
    let mut prop = Propagator::new(&psi, Some(&trap), &PotentialSpec::screened_coulomb(0.0), &cfg).unwrap();
    prop.run(&mut psi, 200).unwrap();
    assert!((rho_sq(&psi) / before - 1.0).abs() < 1e-3, "{} vs {}", rho_sq(&psi), before);
}

#[test]
fn free_gaussian_spreads_by_the_textbook_law() {
    // isotropic Gaussian, no trap: <r^2>(t) = 3/2 s^2 (1 + t^2 / s^4) with mu = 1
    let s: f64 = 2.0;
    let grid = GridSpec::decoupled(RadialGridSpec { r_max: 40.0, h_min: 0.01, slope: 0.01, h_max: 0.05 }, 8);
    let mut psi = WaveFunctionGrid::zeros(&grid).unwrap();
    psi.fill(|r, _, _, _| Complex64::new(r * (-r * r / (2.0 * s * s)).exp(), 0.0));
    psi.normalize().unwrap();
    let mut cfg = PropagationConfig::new(grid);
    cfg.dt = 0.02;
    let mut prop = Propagator::new(&psi, None, &PotentialSpec::screened_coulomb(0.0), &cfg).unwrap();
    prop.run(&mut psi, 200).unwrap();
    let t = psi.time;
    let r2: f64 = psi
        .values
        .chunks(psi.radial.len())
        .flat_map(|c| c.iter().zip(&psi.radial.nodes).map(|(v, r)| v.norm_sqr() * r * r))
        .sum();
    let expect = 1.5 * s * s * (1.0 + t * t / s.powi(4));
    // second order in the radial spacing: 1.4e-3 at h = 0.25, 1.1e-4 at 0.05
    assert!((r2 / expect - 1.0).abs() < 3e-4, "{r2} vs {expect}");
}

#[test]
fn zero_potential_transmits_everything() {
    let trap = small_trap();
    let mut cfg = small_config();
    let r = run_transmission(&trap, &PotentialSpec::screened_coulomb(0.0), &small_packet(), &cfg).unwrap();
    assert!((r.t - 1.0).abs() < 1e-6, "projection T = {}", r.t);
    assert!((r.diagnostics["t_density"] - 1.0).abs() < 2e-3);
    cfg.extraction = Extraction::Density;
    let d = run_transmission(&trap, &PotentialSpec::screened_coulomb(0.0), &small_packet(), &cfg).unwrap();
    assert_eq!(d.source, cirsim::TransmissionSource::WavePacketDensity);
    assert!((d.t - r.diagnostics["t_density"]).abs() < 1e-12);
}

/// `|<1+f>|^2` (projection) and `<|1+f|^2>` (density) differ by the momentum
/// spread of the packet; the gap closes as the packet widens.
#[test]
fn projection_and_density_converge_with_packet_width() {
    let trap = small_trap();
    let pot = PotentialSpec::screened_coulomb(-1.5);
    let gap = |a_z: f64| {
        let packet = PacketSpec::from_energy(a_z, -(3.3 * a_z).max(20.0), 0.3).unwrap();
        let mut grid = GridSpec::suggested(&trap, &packet);
        grid.radial.h_max = 0.5;
        grid.l_max /= 2;
        let mut cfg = PropagationConfig::new(grid);
        cfg.dt = 0.25;
        cfg.stop.check_every = 10;
        let r = run_transmission(&trap, &pot, &packet, &cfg).unwrap();
        let (p, d) = (r.diagnostics["t_projection"], r.diagnostics["t_density"]);
        assert!(p > 0.05 && p < 0.95);
        (p - d).abs()
    };
    let (narrow, wide) = (gap(6.0), gap(24.0));
    assert!(wide < 0.01 && wide < narrow / 5.0, "gap {narrow} -> {wide}");
}

#[test]
fn absorber_needs_density_extraction() {
    let mut cfg = small_config();
    cfg.absorber = Absorber::Layer { width: 10.0, strength: 0.05 };
    assert!(matches!(cfg.validate(), Err(Error::Configuration(_))));
    cfg.extraction = Extraction::Density;
    cfg.validate().unwrap();
}

#[test]
fn absorber_only_removes_norm() {
    let trap = small_trap();
    let mut cfg = small_config();
    cfg.absorber = Absorber::Layer { width: 12.0, strength: 0.1 };
    cfg.extraction = Extraction::Density;
    let mut psi = initialize_packet(&trap, &small_packet(), &cfg.grid).unwrap();
    let mut prop = Propagator::new(&psi, Some(&trap), &PotentialSpec::screened_coulomb(0.0), &cfg).unwrap();
    let mut last = psi.norm();
    for _ in 0..30 {
        prop.run(&mut psi, 10).unwrap();
        assert!(psi.norm() <= last + 1e-12);
        last = psi.norm();
    }
    // the packet front has entered the layer by now
    assert!(last < 1.0 - 1e-3, "norm {last}");
}

#[test]
fn stale_state_is_not_extracted() {
    let trap = small_trap();
    let cfg = small_config();
    let psi = initialize_packet(&trap, &small_packet(), &cfg.grid).unwrap();
    let e = extract_transmission_density(&psi, &small_packet(), &cfg.stop, 1.0).unwrap_err();
    assert!(matches!(e, Error::Stale(_)));
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let trap = small_trap();
    let cfg = small_config();
    let mut psi = initialize_packet(&trap, &small_packet(), &cfg.grid).unwrap();
    let mut prop = Propagator::new(&psi, Some(&trap), &PotentialSpec::screened_coulomb(-3.0), &cfg).unwrap();
    prop.run(&mut psi, 7).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&psi, &mut buf).unwrap();
    let back = read_checkpoint(buf.as_slice()).unwrap();
    assert_eq!(back.step, 7);
    assert_eq!(back.time.to_bits(), psi.time.to_bits());
    assert_eq!(back.grid, psi.grid);
    assert!(back
        .values
        .iter()
        .zip(&psi.values)
        .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));

    // and continuing from it is identical to not stopping
    let mut resumed = back;
    prop.run(&mut psi, 3).unwrap();
    Propagator::new(&resumed, Some(&trap), &PotentialSpec::screened_coulomb(-3.0), &cfg)
        .unwrap()
        .run(&mut resumed, 3)
        .unwrap();
    assert_eq!(resumed.values, psi.values);
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    assert!(matches!(read_checkpoint(&b"NOTACKPT...."[..]), Err(Error::Checkpoint(_))));
    let psi = initialize_packet(&small_trap(), &small_packet(), &small_config().grid).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&psi, &mut buf).unwrap();
    buf.truncate(buf.len() - 5);
    assert!(read_checkpoint(buf.as_slice()).is_err());
}

#[test]
fn shape_mismatch_is_reported() {
    let trap = small_trap();
    let cfg = small_config();
    let psi = initialize_packet(&trap, &small_packet(), &cfg.grid).unwrap();
    let mut prop = Propagator::new(&psi, Some(&trap), &PotentialSpec::screened_coulomb(0.0), &cfg).unwrap();
    let mut other = WaveFunctionGrid::zeros(&GridSpec::decoupled(small_radial(), 20)).unwrap();
    assert!(matches!(prop.step(&mut other), Err(Error::Shape { .. })));
}

#[test]
fn coupled_tier_with_equal_frequencies_stays_in_m_zero() {
    let trap = small_trap();
    let cfg = coupled_config(30, 1, &trap);
    let mut psi = initialize_packet(&trap, &small_packet(), &cfg.grid).unwrap();
    assert!(psi.nonzero_m_amplitude() < 1e-14);
    let mut prop = Propagator::new(&psi, Some(&trap), &PotentialSpec::screened_coulomb(-2.0), &cfg).unwrap();
    prop.run(&mut psi, 50).unwrap();
    assert!(psi.nonzero_m_amplitude() < 1e-12, "{}", psi.nonzero_m_amplitude());
    assert!((psi.norm() - 1.0).abs() < 1e-10);
}

#[test]
fn coupled_tier_conserves_norm_with_unequal_frequencies() {
    let omega2 = 0.25 / 1.175;
    let trap = TrapConfig::with_mass_ratio(RATIO, 1.35 * omega2, omega2).unwrap();
    let cfg = coupled_config(20, 2, &trap);
    let mut psi = initialize_packet(&trap, &small_packet(), &cfg.grid).unwrap();
    let mut prop = Propagator::new(&psi, Some(&trap), &PotentialSpec::screened_coulomb(-8.45), &cfg).unwrap();
    prop.run(&mut psi, 1000).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-6, "drift {}", psi.norm() - 1.0);
    // the coupling populates m != 0
    assert!(psi.nonzero_m_amplitude() > 1e-6);
}

#[test]
fn decoupled_tier_refuses_unequal_frequencies() {
    let trap = TrapConfig::with_mass_ratio(RATIO, 0.3, 0.2).unwrap();
    assert!(matches!(initialize_packet(&trap, &small_packet(), &small_config().grid), Err(Error::Configuration(_))));
}

#[test]
fn packet_validation() {
    let trap = small_trap();
    assert!(small_packet().validate(&trap, 1.0).is_ok());
    // starts inside its own width of the origin
    assert!(PacketSpec::from_energy(10.0, -20.0, 0.3).unwrap().validate(&trap, 1.0).is_err());
    // above the first excited transverse channel
    assert!(PacketSpec::from_energy(6.0, -20.0, 0.6).unwrap().validate(&trap, 1.0).is_err());
    assert!(PacketSpec::from_energy(6.0, 20.0, 0.3).is_err());
}

/// Overlap with `Phi_0(rho) g(z, t)`, `g` the freely spreading Gaussian.
fn product_state_overlap(psi: &WaveFunctionGrid, trap: &TrapConfig, p: &PacketSpec) -> f64 {
    let a2 = trap.a_perp().powi(2);
    let t = psi.time;
    let tau = Complex64::new(1.0, t / (p.a_z * p.a_z));
    let v = p.k0;
    let mut exact = psi.clone();
    exact.fill(|r, theta, _, _| {
        let (rho, z) = (r * theta.sin(), r * theta.cos());
        let dz = z - p.z0 - v * t;
        let g = (-(dz * dz) / (2.0 * p.a_z * p.a_z * tau) + Complex64::new(0.0, p.k0 * (z - 0.5 * v * t))).exp()
            / tau.sqrt();
        r * (-rho * rho / (2.0 * a2)).exp() * g
    });
    exact.normalize().unwrap();
    exact.inner(psi).unwrap().norm_sqr()
}

/// `Phi_0` is an exact eigenstate only of the continuum operator; on the grid
/// the overlap loss is discretization error and shrinks with `h` and `dt`.
#[test]
fn free_packet_stays_in_the_transverse_ground_state() {
    let trap = small_trap();
    let packet = small_packet();
    let loss = |h_max: f64, dt: f64| {
        let mut cfg = small_config();
        cfg.grid.radial.h_max = h_max;
        cfg.dt = dt;
        let mut psi = initialize_packet(&trap, &packet, &cfg.grid).unwrap();
        assert!((product_state_overlap(&psi, &trap, &packet) - 1.0).abs() < 1e-12);
        let mut prop = Propagator::new(&psi, Some(&trap), &PotentialSpec::screened_coulomb(0.0), &cfg).unwrap();
        prop.run(&mut psi, (50.0 / dt) as usize).unwrap();
        1.0 - product_state_overlap(&psi, &trap, &packet)
    };
    let coarse = loss(0.5, 0.25);
    let fine = loss(0.1, 0.1);
    assert!(coarse < 1e-2, "{coarse}");
    assert!(fine < 1e-4 && fine < coarse / 50.0, "{coarse} -> {fine}");
}
