//! BB84 link budget: signal and error rates, QBER, security verdict,
//! sifted key rate and the receiver depth needed to reach a QBER target.

use thiserror::Error;

use crate::medium::{irradiance_at_depth, Environment};
use crate::polarization::Bb84State;
use crate::transport::TransportTallies;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("QBER is undefined when both signal and error rates are zero")]
    NoDetections,
    #[error("invalid link parameter: {0}")]
    InvalidParams(String),
    #[error("QBER target {target} is unreachable at any depth (limit {limit} with no background)")]
    Unreachable { target: f64, limit: f64 },
    #[error("tallies contain no launched photons")]
    EmptyTallies,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Pulse repetition rate (1/s).
    pub pulse_rate: f64,
    /// Mean photon number per pulse.
    pub mean_photons: f64,
    /// Bit period (s).
    pub bit_period: f64,
    /// Receiver gate time (s).
    pub gate: f64,
    /// Vacuum wavelength (m).
    pub wavelength: f64,
    pub detection_efficiency: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            pulse_rate: 1.0 / 35e-9,
            mean_photons: 0.1,
            bit_period: 35e-9,
            gate: 200e-12,
            wavelength: 480e-9,
            detection_efficiency: 1.0,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        let positive = [
            ("pulse_rate", self.pulse_rate),
            ("mean_photons", self.mean_photons),
            ("bit_period", self.bit_period),
            ("gate", self.gate),
            ("wavelength", self.wavelength),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LinkError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.gate > self.bit_period {
            return Err(LinkError::InvalidParams(format!(
                "gate {} s exceeds bit period {} s",
                self.gate, self.bit_period
            )));
        }
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(LinkError::InvalidParams(format!(
                "detection_efficiency must lie in (0, 1], got {}",
                self.detection_efficiency
            )));
        }
        Ok(())
    }

    /// Detected photon rate for a lossless channel, `f <N> DE`.
    pub fn source_rate(&self) -> f64 {
        self.pulse_rate * self.mean_photons * self.detection_efficiency
    }
}

/// Background counts per second collected by the receiver:
/// `pi^2 R_d A^2 dt' lambda (1 - cos fov) / (8 h c dt)`.
pub fn background_error_rate(irradiance: f64, aperture: f64, fov: f64, p: &LinkParams) -> f64 {
    std::f64::consts::PI.powi(2) * irradiance * aperture * aperture * p.gate * p.wavelength * (1.0 - fov.cos())
        / (8.0 * PLANCK * SPEED_OF_LIGHT * p.bit_period)
}

/// `(N, a)`: received signal rate and channel attenuation from simulation.
pub fn signal_rate(tallies: &TransportTallies, p: &LinkParams) -> Result<(f64, f64), LinkError> {
    if tallies.launched == 0 {
        return Err(LinkError::EmptyTallies);
    }
    let a = 1.0 - tallies.received() as f64 / tallies.launched as f64;
    Ok((p.source_rate() * (1.0 - a), a))
}

/// Rate of wrong bits carried by received scattered photons.
pub fn scatter_error_rate(tallies: &TransportTallies, prepared: Bb84State, p: &LinkParams) -> Result<f64, LinkError> {
    if tallies.launched == 0 {
        return Err(LinkError::EmptyTallies);
    }
    Ok(p.source_rate() * tallies.scatter_error_expectation(prepared) / tallies.launched as f64)
}

pub fn qber(signal: f64, error: f64) -> Result<f64, LinkError> {
    let denom = signal + 2.0 * error;
    if denom <= 0.0 {
        return Err(LinkError::NoDetections);
    }
    Ok(error / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecurityVerdict {
    /// QBER <= 10 %.
    SecureSophisticated,
    /// QBER <= 25 %.
    SecureInterceptResend,
    Insecure,
}

impl SecurityVerdict {
    pub fn label(self) -> &'static str {
        match self {
            SecurityVerdict::SecureSophisticated => "secure-sophisticated",
            SecurityVerdict::SecureInterceptResend => "secure-intercept-resend",
            SecurityVerdict::Insecure => "insecure",
        }
    }
}

pub const SOPHISTICATED_ATTACK_QBER: f64 = 0.10;
pub const INTERCEPT_RESEND_QBER: f64 = 0.25;

pub fn security_verdict(qber: f64) -> SecurityVerdict {
    if qber <= SOPHISTICATED_ATTACK_QBER {
        SecurityVerdict::SecureSophisticated
    } else if qber <= INTERCEPT_RESEND_QBER {
        SecurityVerdict::SecureInterceptResend
    } else {
        SecurityVerdict::Insecure
    }
}

/// `kappa = f <N> (1 - a) (1 - QBER) DE / 2`.
pub fn sifted_key_rate(p: &LinkParams, attenuation: f64, qber: f64) -> f64 {
    p.source_rate() * (1.0 - attenuation) * (1.0 - qber) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub signal_rate: f64,
    pub scatter_error: f64,
    pub background_error: f64,
    pub qber: f64,
    pub attenuation: f64,
    pub kappa: f64,
    pub verdict: SecurityVerdict,
}

/// Signal-side inputs that do not depend on the ambient light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRates {
    pub signal_rate: f64,
    pub attenuation: f64,
    pub scatter_error: f64,
}

impl ChannelRates {
    pub fn from_tallies(tallies: &TransportTallies, prepared: Bb84State, p: &LinkParams) -> Result<Self, LinkError> {
        let (signal_rate, attenuation) = signal_rate(tallies, p)?;
        Ok(Self { signal_rate, attenuation, scatter_error: scatter_error_rate(tallies, prepared, p)? })
    }

    /// Pools equal-weight runs, one per prepared state.
    pub fn pooled<'a, I>(runs: I, p: &LinkParams) -> Result<Self, LinkError>
    where
        I: IntoIterator<Item = (Bb84State, &'a TransportTallies)>,
    {
        let mut launched = 0u64;
        let mut received = 0u64;
        let mut wrong = 0.0;
        for (state, t) in runs {
            launched += t.launched;
            received += t.received();
            wrong += t.scatter_error_expectation(state);
        }
        if launched == 0 {
            return Err(LinkError::EmptyTallies);
        }
        let n = launched as f64;
        let attenuation = 1.0 - received as f64 / n;
        Ok(Self {
            signal_rate: p.source_rate() * (1.0 - attenuation),
            attenuation,
            scatter_error: p.source_rate() * wrong / n,
        })
    }

    pub fn budget(&self, background_error: f64, p: &LinkParams) -> Result<LinkBudget, LinkError> {
        let error = self.scatter_error + background_error;
        let q = qber(self.signal_rate, error)?;
        Ok(LinkBudget {
            signal_rate: self.signal_rate,
            scatter_error: self.scatter_error,
            background_error,
            qber: q,
            attenuation: self.attenuation,
            kappa: sifted_key_rate(p, self.attenuation, q),
            verdict: security_verdict(q),
        })
    }
}

/// Background rate at receiver depth `depth` (zero when `env` is `None`).
pub fn background_at_depth(
    env: Option<&Environment>,
    depth: f64,
    aperture: f64,
    fov: f64,
    p: &LinkParams,
) -> f64 {
    match env {
        Some(env) => {
            let r = irradiance_at_depth(env, depth.max(0.0)).unwrap_or(0.0);
            background_error_rate(r, aperture, fov, p)
        }
        None => 0.0,
    }
}

/// Bisection tolerance on depth (m).
pub const DEPTH_TOLERANCE: f64 = 0.1;

/// Smallest receiver depth at which the QBER falls to `target`, holding the
/// signal side fixed. Monotone bisection on the background term.
pub fn depth_threshold(
    target: f64,
    rates: &ChannelRates,
    env: &Environment,
    aperture: f64,
    fov: f64,
    p: &LinkParams,
) -> Result<f64, LinkError> {
    if !(target > 0.0 && target < 0.5) {
        return Err(LinkError::InvalidParams(format!("QBER target {target} outside (0, 0.5)")));
    }
    let qber_at = |z: f64| {
        let bg = background_at_depth(Some(env), z, aperture, fov, p);
        qber(rates.signal_rate, rates.scatter_error + bg)
    };
    let floor = qber(rates.signal_rate, rates.scatter_error).unwrap_or(0.5);
    if floor >= target {
        return Err(LinkError::Unreachable { target, limit: floor });
    }
    if qber_at(0.0)? <= target {
        return Ok(0.0);
    }
    let mut hi = 100.0;
    while qber_at(hi)? > target {
        hi *= 2.0;
        if hi > 1e7 {
            return Err(LinkError::Unreachable { target, limit: floor });
        }
    }
    let mut lo = 0.0;
    while hi - lo > DEPTH_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if qber_at(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
