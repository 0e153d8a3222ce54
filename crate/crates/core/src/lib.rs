//! Polarized Monte Carlo simulation of underwater free-space optical
//! channels and BB84 link budgets built on top of it.
//!
//! * [`mie`]: sphere scattering amplitudes, Mueller elements, efficiencies.
//! * [`medium`]: Jerlov water types, particle size distribution, ambient light.
//! * [`polarization`]: Stokes/Mueller algebra, BB84 states, fidelity.
//! * [`transport`]: the photon-transport engine.
//! * [`link`]: QBER, security verdicts, sifted key rate.
//! * [`harness`]: configuration, presets and CSV output.

pub mod harness;
pub mod link;
pub mod medium;
pub mod mie;
pub mod polarization;
mod quadrature;
pub mod transport;
