//! Lorenz–Mie scattering by a homogeneous sphere.
//!
//! Sign conventions are fixed here and nowhere else:
//!
//! * Refractive indices are quoted the way ocean-optics tables quote them,
//!   `n - i k` with `k >= 0`. [`ComplexIndex`] stores `k` as a magnitude and
//!   [`ComplexIndex::to_bh`] converts to the `n + i k` form used by the
//!   series below (time dependence `exp(-i w t)`).
//! * Mueller elements follow the amplitude-matrix convention
//!   `m1 = (|S2|^2 + |S1|^2)/2`, `m2 = (|S2|^2 - |S1|^2)/2`,
//!   `m3 = Re(S2 S1*)`, `m4 = Im(S2 S1*)`. Unpolarized light scattered at
//!   `theta` then has degree of linear polarization `-m2/m1`, which is
//!   `sin^2/(1 + cos^2)` for a Rayleigh sphere.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::medium::JungePsd;
use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MieError {
    #[error("size parameter must be positive and finite, got x = {0}")]
    InvalidSizeParameter(f64),
    #[error("scattering angle {0} rad is outside [0, pi]")]
    InvalidAngle(f64),
    #[error("non-finite Mie coefficient at order {order} for x = {x}, m = {m}")]
    NonFinite { x: f64, m: ComplexIndex, order: usize },
    #[error("quadrature of {integrand} did not converge (estimate {estimate:e}, error {error:e})")]
    Quadrature { integrand: &'static str, estimate: f64, error: f64 },
    #[error("invalid bulk-coefficient input: {0}")]
    InvalidInput(String),
}

/// Particle refractive index relative to the surrounding medium, `real - i * absorption`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexIndex {
    real: f64,
    absorption: f64,
}

impl ComplexIndex {
    /// `absorption` is the magnitude of the imaginary part; its sign is ignored.
    pub fn new(real: f64, absorption: f64) -> Self {
        Self { real, absorption: absorption.abs() }
    }

    /// Mean plankton index used for all particles unless overridden.
    pub fn plankton() -> Self {
        Self::new(1.41, 0.00672)
    }

    pub fn real(&self) -> f64 {
        self.real
    }

    /// Imaginary part in the `n - i k` convention (always `<= 0`).
    pub fn imag(&self) -> f64 {
        -self.absorption
    }

    pub fn absorption(&self) -> f64 {
        self.absorption
    }

    pub(crate) fn to_bh(self) -> Complex64 {
        Complex64::new(self.real, self.absorption)
    }
}

impl std::fmt::Display for ComplexIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}i", self.real, self.absorption)
    }
}

/// Dimensionless size `x = pi * D * n_medium / lambda_vacuum`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeParameter {
    x: f64,
    diameter: f64,
    wavelength: f64,
}

impl SizeParameter {
    pub fn from_diameter(diameter: f64, wavelength: f64, n_medium: f64) -> Result<Self, MieError> {
        let x = PI * diameter * n_medium / wavelength;
        if !(x.is_finite() && x > 0.0) {
            return Err(MieError::InvalidSizeParameter(x));
        }
        Ok(Self { x, diameter, wavelength })
    }

    /// A bare size parameter with no associated physical diameter.
    pub fn new(x: f64) -> Result<Self, MieError> {
        if !(x.is_finite() && x > 0.0) {
            return Err(MieError::InvalidSizeParameter(x));
        }
        Ok(Self { x, diameter: f64::NAN, wavelength: f64::NAN })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MieAngular {
    pub s1: Complex64,
    pub s2: Complex64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuellerElements {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl MuellerElements {
    pub fn from_amplitudes(s1: Complex64, s2: Complex64) -> Self {
        let a1 = s1.norm_sqr();
        let a2 = s2.norm_sqr();
        let cross = s2 * s1.conj();
        Self { m1: 0.5 * (a2 + a1), m2: 0.5 * (a2 - a1), m3: cross.re, m4: cross.im }
    }

    /// `m1^2 - m2^2 - m3^2 - m4^2`, zero for any single-sphere matrix.
    pub fn jones_defect(&self) -> f64 {
        self.m1 * self.m1 - self.m2 * self.m2 - self.m3 * self.m3 - self.m4 * self.m4
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Efficiencies {
    pub q_ext: f64,
    pub q_sca: f64,
    pub q_abs: f64,
}

/// Series truncation order for size parameter `x`.
pub fn truncation_order(x: f64) -> usize {
    (x + 4.0 * x.cbrt() + 2.0).ceil() as usize
}

/// Expansion coefficients `a_n`, `b_n` for `n = 1..=N`.
#[derive(Debug, Clone)]
pub struct MieCoefficients {
    x: f64,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl MieCoefficients {
    pub fn compute(size: SizeParameter, index: ComplexIndex) -> Result<Self, MieError> {
        let x = size.x;
        let m = index.to_bh();
        let mx = m * x;
        let nstop = truncation_order(x);
        let nmx = nstop.max(mx.norm().ceil() as usize) + 16;

        // Logarithmic derivative D_n(mx), downward from nmx.
        let mut d = vec![Complex64::new(0.0, 0.0); nmx + 1];
        for n in (1..=nmx).rev() {
            let nf = n as f64 / mx;
            d[n - 1] = nf - 1.0 / (d[n] + nf);
        }

        let psi = riccati_psi(x, nstop, nmx);

        // chi_n is the dominant solution, so upward recurrence is stable.
        let mut chi_prev = x.cos(); // chi_0
        let mut chi = x.cos() / x + x.sin(); // chi_1

        let mut a = Vec::with_capacity(nstop);
        let mut b = Vec::with_capacity(nstop);
        for n in 1..=nstop {
            if n > 1 {
                let next = (2 * n - 1) as f64 / x * chi - chi_prev;
                chi_prev = chi;
                chi = next;
            }
            let xi = Complex64::new(psi[n], -chi);
            let xi_prev = Complex64::new(psi[n - 1], -chi_prev);
            let nx = n as f64 / x;
            let da = d[n] / m + nx;
            let db = d[n] * m + nx;
            let an = (da * psi[n] - psi[n - 1]) / (da * xi - xi_prev);
            let bn = (db * psi[n] - psi[n - 1]) / (db * xi - xi_prev);
            if !(an.re.is_finite() && an.im.is_finite() && bn.re.is_finite() && bn.im.is_finite()) {
                return Err(MieError::NonFinite { x, m: index, order: n });
            }
            a.push(an);
            b.push(bn);
        }
        Ok(Self { x, a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// `(a_n, b_n)` for order `n` (1-based).
    pub fn get(&self, n: usize) -> (Complex64, Complex64) {
        (self.a[n - 1], self.b[n - 1])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        self.a.iter().copied().zip(self.b.iter().copied())
    }

    pub fn amplitudes(&self, theta: f64) -> Result<MieAngular, MieError> {
        if !(0.0..=PI).contains(&theta) {
            return Err(MieError::InvalidAngle(theta));
        }
        let (s1, s2) = self.amplitudes_at_cos(theta.cos());
        Ok(MieAngular { s1, s2, theta })
    }

    fn amplitudes_at_cos(&self, mu: f64) -> (Complex64, Complex64) {
        let mut s1 = Complex64::new(0.0, 0.0);
        let mut s2 = Complex64::new(0.0, 0.0);
        let mut pi_prev = 0.0;
        let mut pi_n = 1.0;
        for (i, (an, bn)) in self.pairs().enumerate() {
            let n = (i + 1) as f64;
            let tau_n = n * mu * pi_n - (n + 1.0) * pi_prev;
            let w = (2.0 * n + 1.0) / (n * (n + 1.0));
            s1 += (an * pi_n + bn * tau_n) * w;
            s2 += (an * tau_n + bn * pi_n) * w;
            let next = ((2.0 * n + 1.0) * mu * pi_n - (n + 1.0) * pi_prev) / n;
            pi_prev = pi_n;
            pi_n = next;
        }
        (s1, s2)
    }

    pub fn mueller(&self, theta: f64) -> Result<MuellerElements, MieError> {
        let amp = self.amplitudes(theta)?;
        Ok(MuellerElements::from_amplitudes(amp.s1, amp.s2))
    }

    pub fn efficiencies(&self) -> Efficiencies {
        let mut ext = 0.0;
        let mut sca = 0.0;
        for (i, (an, bn)) in self.pairs().enumerate() {
            let w = (2 * i + 3) as f64;
            ext += w * (an.re + bn.re);
            sca += w * (an.norm_sqr() + bn.norm_sqr());
        }
        let scale = 2.0 / (self.x * self.x);
        let series_ext = scale * ext;
        let q_sca = scale * sca;
        let mut q_abs = series_ext - q_sca;
        if q_abs < 0.0 && q_abs > -1e-12 * series_ext.abs().max(1.0) {
            q_abs = 0.0;
        }
        Efficiencies { q_ext: q_sca + q_abs, q_sca, q_abs }
    }
}

/// `psi_n(x) = x j_n(x)` for `n = 0..=nstop`.
///
/// Upward recurrence is used while `n <= x`; above that the ratio
/// `psi_n / psi_{n-1}` is taken from a downward continued fraction started
/// at `nmx`, which keeps tiny-`x` orders accurate.
fn riccati_psi(x: f64, nstop: usize, nmx: usize) -> Vec<f64> {
    let mut psi = vec![0.0; nstop + 1];
    psi[0] = x.sin();
    let n_up = (x.floor() as usize).min(nstop);
    if n_up >= 1 {
        psi[1] = x.sin() / x - x.cos();
        for n in 2..=n_up {
            psi[n] = (2 * n - 1) as f64 / x * psi[n - 1] - psi[n - 2];
        }
    }
    if n_up < nstop {
        let top = nmx.max(nstop + 16);
        let mut ratio = vec![0.0; top + 2];
        for n in (1..=top).rev() {
            ratio[n] = 1.0 / ((2 * n + 1) as f64 / x - ratio[n + 1]);
        }
        for n in (n_up + 1)..=nstop {
            psi[n] = ratio[n] * psi[n - 1];
        }
    }
    psi
}

pub fn mie_coefficients(
    size: SizeParameter,
    index: ComplexIndex,
) -> Result<Vec<(Complex64, Complex64)>, MieError> {
    Ok(MieCoefficients::compute(size, index)?.pairs().collect())
}

pub fn scattering_amplitudes(
    size: SizeParameter,
    index: ComplexIndex,
    theta: f64,
) -> Result<MieAngular, MieError> {
    MieCoefficients::compute(size, index)?.amplitudes(theta)
}

pub fn mueller_elements(
    size: SizeParameter,
    index: ComplexIndex,
    theta: f64,
) -> Result<MuellerElements, MieError> {
    MieCoefficients::compute(size, index)?.mueller(theta)
}

pub fn efficiencies(size: SizeParameter, index: ComplexIndex) -> Result<Efficiencies, MieError> {
    Ok(MieCoefficients::compute(size, index)?.efficiencies())
}

/// Particle scattering and absorption coefficients (1/m) of a suspension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkCoefficients {
    pub mu_s: f64,
    pub mu_a: f64,
}

/// Integrates single-particle cross sections over the normalized PSD.
///
/// `concentration` is the total particle number density (1/m^3) between
/// the PSD bounds.
pub fn bulk_coefficients(
    psd: &JungePsd,
    concentration: f64,
    wavelength: f64,
    index: ComplexIndex,
    n_medium: f64,
) -> Result<BulkCoefficients, MieError> {
    if !(concentration >= 0.0 && concentration.is_finite()) {
        return Err(MieError::InvalidInput(format!("concentration {concentration}")));
    }
    if concentration == 0.0 {
        return Ok(BulkCoefficients { mu_s: 0.0, mu_a: 0.0 });
    }
    let per_particle = mean_cross_sections(psd, wavelength, index, n_medium)?;
    Ok(BulkCoefficients {
        mu_s: concentration * per_particle.mu_s,
        mu_a: concentration * per_particle.mu_a,
    })
}

/// PSD-averaged scattering and absorption cross sections (m^2 per particle).
pub fn mean_cross_sections(
    psd: &JungePsd,
    wavelength: f64,
    index: ComplexIndex,
    n_medium: f64,
) -> Result<BulkCoefficients, MieError> {
    let lo = psd.dmin().ln();
    let hi = psd.dmax().ln();
    let cross = |t: f64, scattering: bool| -> f64 {
        let d = t.exp();
        let size = match SizeParameter::from_diameter(d, wavelength, n_medium) {
            Ok(s) => s,
            Err(_) => return f64::NAN,
        };
        let q = match MieCoefficients::compute(size, index) {
            Ok(c) => c.efficiencies(),
            Err(_) => return f64::NAN,
        };
        let q = if scattering { q.q_sca } else { q.q_abs };
        // dD = D dt
        psd.density(d) * d * 0.25 * PI * d * d * q
    };
    let run = |scattering: bool, name: &'static str| {
        let v = quadrature::integrate(|t| cross(t, scattering), lo, hi, 1e-6, 4000).map_err(
            |fail| MieError::Quadrature { integrand: name, estimate: fail.estimate, error: fail.error },
        )?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(MieError::InvalidInput(format!("{name} integrand produced a non-finite value")))
        }
    };
    Ok(BulkCoefficients {
        mu_s: run(true, "scattering cross section")?,
        mu_a: run(false, "absorption cross section")?,
    })
}

/// Number of angular nodes in a [`MuellerTable`].
pub const TABLE_ANGLES: usize = 1800;

// Nodes are spaced as theta = THETA_SCALE * (exp(alpha s) - 1), s uniform in [0,1],
// which resolves the narrow diffraction peak of large spheres.
const THETA_SCALE: f64 = 0.01;

fn angular_grid(count: usize) -> Vec<f64> {
    let alpha = (1.0 + PI / THETA_SCALE).ln();
    let mut grid: Vec<f64> = (0..count)
        .map(|k| {
            let s = k as f64 / (count - 1) as f64;
            THETA_SCALE * (alpha * s).exp_m1()
        })
        .collect();
    grid[0] = 0.0;
    grid[count - 1] = PI;
    grid
}

/// Tabulated Mueller elements for one sphere, with polarization-preserving
/// interpolation: `m1` is linear in `theta`, and the interpolated
/// `(m2, m3, m4)` is rescaled to length `m1` so every looked-up matrix is a
/// pure (Jones-derivable) one.
#[derive(Debug, Clone)]
pub struct MuellerTable {
    theta: Vec<f64>,
    elements: Vec<MuellerElements>,
    cos_theta: Vec<f64>,
    // Per-segment bound on m1 and cumulative proposal mass.
    envelope: Vec<f64>,
    cumulative: Vec<f64>,
    size: SizeParameter,
}

impl MuellerTable {
    pub fn build(size: SizeParameter, index: ComplexIndex) -> Result<Self, MieError> {
        Self::with_angles(size, index, TABLE_ANGLES)
    }

    pub fn with_angles(size: SizeParameter, index: ComplexIndex, count: usize) -> Result<Self, MieError> {
        assert!(count >= 2, "a Mueller table needs at least two angles");
        let coefs = MieCoefficients::compute(size, index)?;
        let theta = angular_grid(count);
        let cos_theta: Vec<f64> = theta.iter().map(|t| t.cos()).collect();
        let elements: Vec<MuellerElements> = cos_theta
            .iter()
            .map(|&mu| {
                let (s1, s2) = coefs.amplitudes_at_cos(mu);
                MuellerElements::from_amplitudes(s1, s2)
            })
            .collect();
        if elements.iter().any(|e| !e.m1.is_finite()) {
            return Err(MieError::NonFinite { x: size.x, m: index, order: coefs.len() });
        }
        let mut envelope = Vec::with_capacity(count - 1);
        let mut cumulative = Vec::with_capacity(count - 1);
        let mut total = 0.0;
        for k in 0..count - 1 {
            let e = elements[k].m1.max(elements[k + 1].m1);
            envelope.push(e);
            total += e * (cos_theta[k] - cos_theta[k + 1]);
            cumulative.push(total);
        }
        Ok(Self { theta, elements, cos_theta, envelope, cumulative, size })
    }

    pub fn size(&self) -> SizeParameter {
        self.size
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    pub fn nodes(&self) -> &[MuellerElements] {
        &self.elements
    }

    fn segment(&self, theta: f64) -> usize {
        let k = self.theta.partition_point(|&t| t <= theta);
        k.clamp(1, self.theta.len() - 1) - 1
    }

    /// Interpolated elements at `theta` (clamped to `[0, pi]`).
    pub fn at(&self, theta: f64) -> MuellerElements {
        let theta = theta.clamp(0.0, PI);
        self.interpolate(self.segment(theta), theta)
    }

    fn interpolate(&self, k: usize, theta: f64) -> MuellerElements {
        let (t0, t1) = (self.theta[k], self.theta[k + 1]);
        let w = ((theta - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let (a, b) = (&self.elements[k], &self.elements[k + 1]);
        let lerp = |p: f64, q: f64| p + w * (q - p);
        let m1 = lerp(a.m1, b.m1);
        let mut v = [lerp(a.m2, b.m2), lerp(a.m3, b.m3), lerp(a.m4, b.m4)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 0.0 {
            let s = m1 / norm;
            v.iter_mut().for_each(|c| *c *= s);
        } else {
            let near = if w < 0.5 { a } else { b };
            let s = if near.m1 > 0.0 { m1 / near.m1 } else { 0.0 };
            v = [near.m2 * s, near.m3 * s, near.m4 * s];
        }
        MuellerElements { m1, m2: v[0], m3: v[1], m4: v[2] }
    }

    /// Total proposal mass `sum_k E_k (cos t_k - cos t_{k+1})`.
    pub fn envelope_mass(&self) -> f64 {
        *self.cumulative.last().expect("table has segments")
    }

    /// Draws `(theta, phi)` with density proportional to
    /// `[m1 + m2 (cos 2phi q + sin 2phi u)] sin(theta)` for normalized
    /// linear Stokes components `(q, u)`.
    ///
    /// Rejection against a piecewise-constant envelope `E_k (1 + |(q,u)|)`.
    /// `uniform` must return values in `[0, 1)`.
    pub fn sample_angles<F: FnMut() -> f64>(
        &self,
        q: f64,
        u: f64,
        mut uniform: F,
    ) -> Result<(f64, f64), EnvelopeViolation> {
        let lin = (q * q + u * u).sqrt();
        let total = self.envelope_mass();
        loop {
            let target = uniform() * total;
            let k = self.cumulative.partition_point(|&c| c <= target).min(self.envelope.len() - 1);
            let (c0, c1) = (self.cos_theta[k], self.cos_theta[k + 1]);
            let mu = c0 - uniform() * (c0 - c1);
            let theta = mu.clamp(-1.0, 1.0).acos().clamp(self.theta[k], self.theta[k + 1]);
            let phi = 2.0 * PI * uniform();
            let el = self.interpolate(k, theta);
            let (s2p, c2p) = (2.0 * phi).sin_cos();
            let density = el.m1 + el.m2 * (c2p * q + s2p * u);
            let bound = self.envelope[k] * (1.0 + lin);
            if density > bound * (1.0 + 1e-12) + 1e-300 {
                return Err(EnvelopeViolation { theta, density, bound });
            }
            if uniform() * bound <= density {
                return Ok((theta, phi));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("rejection envelope violated at theta = {theta}: density {density} > bound {bound}")]
pub struct EnvelopeViolation {
    pub theta: f64,
    pub density: f64,
    pub bound: f64,
}

/// Mueller tables at log-spaced representative diameters across a PSD.
/// A sampled diameter is mapped to the nearest node in `ln D`.
#[derive(Debug, Clone)]
pub struct MieTableSet {
    tables: Vec<MuellerTable>,
    ln_dmin: f64,
    ln_step: f64,
}

/// Default number of diameter nodes.
pub const DEFAULT_DIAMETER_NODES: usize = 128;

impl MieTableSet {
    pub fn build(
        psd: &JungePsd,
        wavelength: f64,
        index: ComplexIndex,
        n_medium: f64,
        nodes: usize,
    ) -> Result<Self, MieError> {
        if nodes == 0 {
            return Err(MieError::InvalidInput("diameter node count must be at least 1".into()));
        }
        let ln_dmin = psd.dmin().ln();
        let span = psd.dmax().ln() - ln_dmin;
        let ln_step = if nodes > 1 { span / (nodes - 1) as f64 } else { 0.0 };
        let tables = (0..nodes)
            .into_par_iter()
            .map(|k| {
                let d = if nodes > 1 { (ln_dmin + ln_step * k as f64).exp() } else { (ln_dmin + 0.5 * span).exp() };
                let size = SizeParameter::from_diameter(d, wavelength, n_medium)?;
                MuellerTable::build(size, index)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { tables, ln_dmin, ln_step })
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn tables(&self) -> &[MuellerTable] {
        &self.tables
    }

    pub fn nearest_index(&self, diameter: f64) -> usize {
        if self.tables.len() == 1 {
            return 0;
        }
        let k = ((diameter.ln() - self.ln_dmin) / self.ln_step).round();
        (k.max(0.0) as usize).min(self.tables.len() - 1)
    }

    pub fn table_for(&self, diameter: f64) -> &MuellerTable {
        &self.tables[self.nearest_index(diameter)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rayleigh_a1(x: f64, m: f64) -> Complex64 {
        let m2 = m * m;
        Complex64::new(0.0, -2.0 * x.powi(3) / 3.0 * (m2 - 1.0) / (m2 + 2.0))
    }

    #[test]
    fn truncation_matches_wiscombe() {
        assert_eq!(truncation_order(10.0), 21);
        assert_eq!(truncation_order(1e-6), 3);
    }

    #[test]
    fn vanishing_particle_has_vanishing_coefficients() {
        let c = mie_coefficients(SizeParameter::new(1e-6).unwrap(), ComplexIndex::new(1.33, 0.0)).unwrap();
        for (a, b) in c {
            assert!(a.norm() < 1e-15 && b.norm() < 1e-15, "{a} {b}");
        }
    }

    #[test]
    fn rayleigh_dipole_coefficient() {
        let x = 1e-3;
        let c = MieCoefficients::compute(SizeParameter::new(x).unwrap(), ComplexIndex::new(1.33, 0.0)).unwrap();
        let (a1, _) = c.get(1);
        let expect = rayleigh_a1(x, 1.33);
        assert!((a1 - expect).norm() / expect.norm() < 1e-3, "{a1} vs {expect}");
    }

    #[test]
    fn forward_amplitudes_coincide() {
        let amp = scattering_amplitudes(SizeParameter::new(7.3).unwrap(), ComplexIndex::plankton(), 0.0).unwrap();
        assert_eq!(amp.s1, amp.s2);
        let el = MuellerElements::from_amplitudes(amp.s1, amp.s2);
        assert_eq!(el.m2, 0.0);
        assert_eq!(el.m4, 0.0);
    }

    #[test]
    fn lossless_sphere_absorbs_nothing() {
        for &x in &[0.05, 1.0, 12.0, 150.0] {
            let q = efficiencies(SizeParameter::new(x).unwrap(), ComplexIndex::new(1.2, 0.0)).unwrap();
            assert!(q.q_abs.abs() < 1e-10, "x={x} q_abs={}", q.q_abs);
            assert_eq!(q.q_ext, q.q_sca + (q.q_ext - q.q_sca));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SizeParameter::new(0.0).is_err());
        assert!(SizeParameter::new(f64::NAN).is_err());
        let c = MieCoefficients::compute(SizeParameter::new(1.0).unwrap(), ComplexIndex::plankton()).unwrap();
        assert!(matches!(c.amplitudes(-0.1), Err(MieError::InvalidAngle(_))));
        assert!(matches!(c.amplitudes(4.0), Err(MieError::InvalidAngle(_))));
    }

    #[test]
    fn grid_is_monotone_and_spans_half_circle() {
        let g = angular_grid(TABLE_ANGLES);
        assert_eq!(g.len(), 1800);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1799], PI);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g[1] < 1e-4);
    }

    #[test]
    fn interpolated_elements_stay_pure() {
        let t = MuellerTable::build(SizeParameter::new(25.0).unwrap(), ComplexIndex::plankton()).unwrap();
        for i in 0..997 {
            let th = PI * i as f64 / 996.0;
            let e = t.at(th);
            assert!(e.jones_defect().abs() <= 1e-9 * e.m1 * e.m1, "theta={th}");
            assert!(e.m1 >= e.m2.abs());
        }
    }

    #[test]
    fn nearest_node_lookup() {
        let psd = JungePsd::new(4.0, 1e-6, 2e-4).unwrap();
        let set = MieTableSet::build(&psd, 480e-9, ComplexIndex::plankton(), 1.34, 3).unwrap();
        assert_eq!(set.nearest_index(1e-6), 0);
        assert_eq!(set.nearest_index(2e-4), 2);
        assert_eq!(set.nearest_index((2e-10f64).sqrt()), 1);
        assert_eq!(set.nearest_index(1e-9), 0);
    }
}
