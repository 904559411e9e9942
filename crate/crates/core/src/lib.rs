//! Low-energy two-body scattering in a quasi-one-dimensional harmonic
//! waveguide.
//!
//! The crate covers three layers:
//!
//! * [`radial_scattering`]: free-space phase shifts, the s-wave scattering
//!   length `a_s`, the p-wave scattering volume `V_p` and the 3D cross section;
//! * [`quasi1d_model`]: closed-form even/odd quasi-1D amplitudes built from
//!   `a_s` and `V_p`, the resulting transmission and root finders for the
//!   blocking (`T ~ 0`) and transparent (`T ~ 1`) resonances;
//! * [`wavepacket`]: time-dependent propagation of a confined Gaussian packet
//!   on a radial x angular grid ([`angular_dvr`]) with transmission extracted
//!   from the asymptotic density or from the overlap with a free reference run.
//!
//! All quantities use `hbar = mu = r0 = 1`.

pub mod angular_dvr;
pub mod error;
pub mod potentials;
pub mod quasi1d_model;
pub mod radial_scattering;
pub mod special;
pub mod wavepacket;

pub use error::{Error, Result};
pub use potentials::{PotentialKind, PotentialSpec};
pub use quasi1d_model::{Quasi1DAmplitudes, TransmissionResult, TransmissionSource, TrapConfig};
pub use radial_scattering::{PhaseShiftResult, ScatteringParams};
