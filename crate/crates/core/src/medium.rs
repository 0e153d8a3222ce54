//! Water-type optics: Jerlov extinction, particle size distribution,
//! concentration calibration and ambient irradiance with depth.

use thiserror::Error;

use crate::mie::{self, ComplexIndex, MieError};

/// Pure seawater absorption at 480 nm (1/m).
pub const PURE_SEAWATER_ABSORPTION_480NM: f64 = 0.0176;
/// Diffuse attenuation of downwelling irradiance, Jerlov I at 480 nm (1/m).
pub const DIFFUSE_ATTENUATION_JERLOV_I: f64 = 0.019;
/// Refractive index of seawater used to form size parameters.
pub const SEAWATER_INDEX: f64 = 1.34;
pub const DEFAULT_WAVELENGTH: f64 = 480e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MediumError {
    #[error("invalid particle size distribution: {0}")]
    InvalidPsd(String),
    #[error("target extinction {target}/m is below water absorption {water}/m; no non-negative particle load reaches it")]
    Unreachable { target: f64, water: f64 },
    #[error("depth must be non-negative, got {0} m")]
    NegativeDepth(f64),
    #[error(transparent)]
    Mie(#[from] MieError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JerlovType {
    I,
    II,
    III,
}

impl JerlovType {
    pub const ALL: [JerlovType; 3] = [JerlovType::I, JerlovType::II, JerlovType::III];

    /// Beam extinction at 480 nm (1/m).
    pub fn extinction(self) -> f64 {
        match self {
            JerlovType::I => 0.03,
            JerlovType::II => 0.18,
            JerlovType::III => 0.3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            JerlovType::I => "jerlov-i",
            JerlovType::II => "jerlov-ii",
            JerlovType::III => "jerlov-iii",
        }
    }
}

impl std::str::FromStr for JerlovType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().trim_start_matches("jerlov").trim_start_matches(['-', '_', ' ']) {
            "i" | "1" => Ok(JerlovType::I),
            "ii" | "2" => Ok(JerlovType::II),
            "iii" | "3" => Ok(JerlovType::III),
            _ => Err(format!("unknown water type `{s}` (expected I, II or III)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterType {
    pub name: JerlovType,
    pub mu_e: f64,
    pub mu_a_water: f64,
}

impl WaterType {
    pub fn jerlov(name: JerlovType) -> Self {
        Self { name, mu_e: name.extinction(), mu_a_water: PURE_SEAWATER_ABSORPTION_480NM }
    }
}

/// Truncated Junge power law, number density `~ D^-slope` on `[dmin, dmax]`.
///
/// The reference diameter and concentration only scale the density and are
/// absorbed into the calibrated particle concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JungePsd {
    slope: f64,
    dmin: f64,
    dmax: f64,
}

impl Default for JungePsd {
    fn default() -> Self {
        Self { slope: 4.0, dmin: 1e-6, dmax: 2e-4 }
    }
}

impl JungePsd {
    pub fn new(slope: f64, dmin: f64, dmax: f64) -> Result<Self, MediumError> {
        if !(3.0..=5.0).contains(&slope) {
            return Err(MediumError::InvalidPsd(format!("slope {slope} outside [3, 5]")));
        }
        if !(dmin > 0.0 && dmin.is_finite() && dmax.is_finite() && dmin < dmax) {
            return Err(MediumError::InvalidPsd(format!("diameter bounds [{dmin}, {dmax}]")));
        }
        Ok(Self { slope, dmin, dmax })
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn dmin(&self) -> f64 {
        self.dmin
    }

    pub fn dmax(&self) -> f64 {
        self.dmax
    }

    fn exponent(&self) -> f64 {
        1.0 - self.slope
    }

    /// Normalized number density (1/m) on `[dmin, dmax]`, zero outside.
    pub fn density(&self, d: f64) -> f64 {
        if d < self.dmin || d > self.dmax {
            return 0.0;
        }
        let e = self.exponent();
        let norm = (self.dmax.powf(e) - self.dmin.powf(e)) / e;
        d.powf(-self.slope) / norm
    }

    pub fn cdf(&self, d: f64) -> f64 {
        let d = d.clamp(self.dmin, self.dmax);
        let e = self.exponent();
        (d.powf(e) - self.dmin.powf(e)) / (self.dmax.powf(e) - self.dmin.powf(e))
    }

    /// Inverse CDF of the truncated power law.
    pub fn sample_diameter(&self, u: f64) -> f64 {
        let e = self.exponent();
        let lo = self.dmin.powf(e);
        let hi = self.dmax.powf(e);
        (lo + u * (hi - lo)).powf(1.0 / e).clamp(self.dmin, self.dmax)
    }
}

/// Bulk inherent optical properties of a calibrated water column (1/m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterOptics {
    /// Absorption by water and dissolved matter.
    pub mu_m: f64,
    pub mu_s_p: f64,
    pub mu_a_p: f64,
    pub mu_e: f64,
    /// Particles per m^3 between the PSD bounds.
    pub concentration: f64,
    pub psd: JungePsd,
    pub particle_index: ComplexIndex,
    pub wavelength: f64,
    pub n_medium: f64,
}

impl WaterOptics {
    /// Builds optics from explicit coefficients, with `mu_e` their sum.
    pub fn from_coefficients(mu_m: f64, mu_s_p: f64, mu_a_p: f64) -> Self {
        Self {
            mu_m,
            mu_s_p,
            mu_a_p,
            mu_e: mu_m + mu_a_p + mu_s_p,
            concentration: f64::NAN,
            psd: JungePsd::default(),
            particle_index: ComplexIndex::plankton(),
            wavelength: DEFAULT_WAVELENGTH,
            n_medium: SEAWATER_INDEX,
        }
    }

    /// Fraction of particle interactions that scatter.
    pub fn particle_albedo(&self) -> f64 {
        let total = self.mu_s_p + self.mu_a_p;
        if total > 0.0 {
            self.mu_s_p / total
        } else {
            0.0
        }
    }
}

/// Solves for the particle concentration that makes the column's total
/// extinction equal `water.mu_e`. Particle absorption/scattering split comes
/// from PSD-integrated Mie efficiencies; `mu_m` is pure-water absorption.
pub fn calibrate(
    water: WaterType,
    psd: JungePsd,
    index: ComplexIndex,
    wavelength: f64,
    n_medium: f64,
) -> Result<WaterOptics, MediumError> {
    let particle_extinction = water.mu_e - water.mu_a_water;
    if !(particle_extinction >= 0.0) {
        return Err(MediumError::Unreachable { target: water.mu_e, water: water.mu_a_water });
    }
    let (concentration, mu_s_p, mu_a_p) = if particle_extinction == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        let per = mie::mean_cross_sections(&psd, wavelength, index, n_medium)?;
        let c = particle_extinction / (per.mu_s + per.mu_a);
        let mu_s_p = c * per.mu_s;
        // Absorption absorbs the rounding so the sum closes on the target.
        let mu_a_p = particle_extinction - mu_s_p;
        (c, mu_s_p, mu_a_p.max(0.0))
    };
    Ok(WaterOptics {
        mu_m: water.mu_a_water,
        mu_s_p,
        mu_a_p,
        mu_e: water.mu_a_water + mu_a_p + mu_s_p,
        concentration,
        psd,
        particle_index: index,
        wavelength,
        n_medium,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sky {
    FullMoon,
    Starlight,
    CloudyNight,
}

impl Sky {
    pub const ALL: [Sky; 3] = [Sky::FullMoon, Sky::Starlight, Sky::CloudyNight];

    /// Total visible irradiance at sea level (W/m^2).
    pub fn surface_irradiance(self) -> f64 {
        match self {
            Sky::FullMoon => 1e-3,
            Sky::Starlight => 1e-6,
            Sky::CloudyNight => 1e-7,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sky::FullMoon => "full-moon",
            Sky::Starlight => "starlight",
            Sky::CloudyNight => "cloudy-night",
        }
    }
}

impl std::str::FromStr for Sky {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "full-moon" | "fullmoon" | "moon" => Ok(Sky::FullMoon),
            "starlight" | "stars" => Ok(Sky::Starlight),
            "cloudy-night" | "cloudy" => Ok(Sky::CloudyNight),
            _ => Err(format!("unknown environment `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub sky: Sky,
    pub surface_irradiance: f64,
    pub mu_d: f64,
}

impl Environment {
    pub fn new(sky: Sky) -> Self {
        Self { sky, surface_irradiance: sky.surface_irradiance(), mu_d: DIFFUSE_ATTENUATION_JERLOV_I }
    }
}

/// Downwelling irradiance (W/m^2) at depth `z` below the surface.
pub fn irradiance_at_depth(env: &Environment, z: f64) -> Result<f64, MediumError> {
    if !(z >= 0.0) {
        return Err(MediumError::NegativeDepth(z));
    }
    Ok(env.surface_irradiance * (-env.mu_d * z).exp())
}

/// Fraction of photons that travel `l` metres without interacting.
pub fn ballistic_transmission(mu_e: f64, l: f64) -> f64 {
    (-mu_e * l).exp()
}
