//! Polarized Monte Carlo photon transport from the transmitter at the
//! origin to a receiver plane at `z = L`.
//!
//! Reference-frame convention: every photon carries a unit vector `frame`
//! orthogonal to its direction that spans, together with the direction, the
//! current reference plane (`Q = +1` is polarization along `frame`, `U = +1`
//! along the bisector of `frame` and `direction x frame`). Launch uses the
//! x–z plane. At each event the frame is rotated by `phi` about the
//! direction, the photon is deflected by `theta` inside the new plane, and
//! the frame becomes the in-plane axis of the scattered ray. Received
//! Stokes vectors are rotated back to the plane containing the ray and the
//! global x axis before measurement.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::medium::WaterOptics;
use crate::mie::{ComplexIndex, EnvelopeViolation, MieError, MieTableSet, MuellerTable};
use crate::polarization::{rotate_stokes, scatter_stokes, Bb84State, EnsemblePolarization, StokesVector};

/// Histories still alive after this many scattering events are counted as lost.
pub const MAX_SCATTER_EVENTS: u32 = 10_000;
pub const THETA_BINS: usize = 180;
pub const PHI_BINS: usize = 360;
// Photons per deterministic work unit; independent of the worker count.
const CHUNK: u64 = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("invalid receiver geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid transport input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Envelope(#[from] EnvelopeViolation),
    #[error(transparent)]
    Mie(#[from] MieError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverGeometry {
    /// Distance of the receiving plane from the transmitter (m).
    pub distance: f64,
    /// Aperture diameter (m).
    pub aperture: f64,
    /// Half-angle of the acceptance cone about +z (rad).
    pub fov: f64,
}

impl ReceiverGeometry {
    pub fn new(distance: f64, aperture: f64, fov: f64) -> Result<Self, TransportError> {
        for (name, v) in [("distance", distance), ("aperture", aperture), ("fov", fov)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TransportError::InvalidGeometry(format!("{name} must be positive, got {v}")));
            }
        }
        if fov > PI / 2.0 {
            return Err(TransportError::InvalidGeometry(format!("fov {fov} rad exceeds pi/2")));
        }
        Ok(Self { distance, aperture, fov })
    }

    /// Joint aperture and field-of-view test at the plane crossing.
    pub fn accepts(&self, hit: &Vector3<f64>, direction: &Vector3<f64>) -> bool {
        let radial = (hit.x * hit.x + hit.y * hit.y).sqrt();
        let angle = direction.z.clamp(-1.0, 1.0).acos();
        radial <= 0.5 * self.aperture && angle <= self.fov
    }
}

/// Calibrated optics plus the per-diameter Mueller tables used to scatter.
#[derive(Debug, Clone)]
pub struct ScatteringMedium {
    pub optics: WaterOptics,
    pub tables: Arc<MieTableSet>,
}

impl ScatteringMedium {
    pub fn new(optics: WaterOptics, tables: Arc<MieTableSet>) -> Self {
        Self { optics, tables }
    }

    pub fn build(optics: WaterOptics, diameter_nodes: usize) -> Result<Self, TransportError> {
        let tables = MieTableSet::build(
            &optics.psd,
            optics.wavelength,
            optics.particle_index,
            optics.n_medium,
            diameter_nodes,
        )?;
        Ok(Self::new(optics, Arc::new(tables)))
    }

    pub fn particle_index(&self) -> ComplexIndex {
        self.optics.particle_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonState {
    pub position: Vector3<f64>,
    pub direction: Vector3<f64>,
    pub frame: Vector3<f64>,
    pub stokes: StokesVector,
    pub scatter_count: u32,
    pub path_length: f64,
}

impl PhotonState {
    pub fn launch(prepared: Bb84State) -> Self {
        Self {
            position: Vector3::zeros(),
            direction: Vector3::z(),
            frame: Vector3::x(),
            stokes: prepared.stokes(),
            scatter_count: 0,
            path_length: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhotonOutcome {
    ReceivedBallistic(StokesVector),
    ReceivedScattered(StokesVector),
    Absorbed,
    Lost,
}

/// Per-photon random stream: a pure function of `(seed, photon_index)`.
pub fn photon_rng(seed: u64, photon_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(photon_index);
    rng
}

/// Exponential free path for a uniform `eta` in `(0, 1]`.
pub fn sample_free_path(mu_e: f64, eta: f64) -> f64 {
    -eta.ln() / mu_e
}

/// Survival probability after a free path `dl`.
pub fn survival_weight(mu_s_p: f64, mu_a_p: f64, mu_m: f64, dl: f64) -> f64 {
    let particles = mu_s_p + mu_a_p;
    let albedo = if particles > 0.0 { mu_s_p / particles } else { 0.0 };
    albedo * (-mu_m * dl).exp()
}

pub fn sample_scattering_angles<R: Rng + ?Sized>(
    s: &StokesVector,
    table: &MuellerTable,
    rng: &mut R,
) -> Result<(f64, f64), EnvelopeViolation> {
    let [q, u, _] = s.normalized();
    table.sample_angles(q, u, || rng.gen::<f64>())
}

fn rebuild_frame(d: &Vector3<f64>) -> Vector3<f64> {
    // Global axis least aligned with the direction.
    let axis = if d.x.abs() <= d.y.abs() && d.x.abs() <= d.z.abs() {
        Vector3::x()
    } else if d.y.abs() <= d.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    (axis - d * d.dot(&axis)).normalize()
}

/// Rotates the reference plane by `phi` about `d`, then deflects `d` by
/// `theta` inside it. Returns the new direction and in-plane frame axis.
pub fn update_direction(
    d: &Vector3<f64>,
    frame: &Vector3<f64>,
    theta: f64,
    phi: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let perp = d.cross(frame);
    let plane = frame * cp + perp * sp;
    let nd = (d * ct + plane * st).normalize();
    let mut nf = plane * ct - d * st;
    nf -= nd * nd.dot(&nf);
    let norm = nf.norm();
    let nf = if norm < 1e-9 { rebuild_frame(&nd) } else { nf / norm };
    (nd, nf)
}

/// Re-expresses `stokes` in the plane spanned by `direction` and global x.
fn to_receiver_frame(direction: &Vector3<f64>, frame: &Vector3<f64>, stokes: &StokesVector) -> StokesVector {
    let x = Vector3::x();
    let reference = x - direction * direction.dot(&x);
    let n = reference.norm();
    if n < 1e-12 {
        return *stokes;
    }
    let reference = reference / n;
    let perp = direction.cross(frame);
    let psi = perp.dot(&reference).atan2(frame.dot(&reference));
    if psi == 0.0 {
        *stokes
    } else {
        rotate_stokes(stokes, psi)
    }
}

fn trace<R: Rng, H: FnMut(f64, f64)>(
    prepared: Bb84State,
    medium: &ScatteringMedium,
    recv: &ReceiverGeometry,
    rng: &mut R,
    on_scatter: &mut H,
) -> Result<(PhotonOutcome, PhotonState), TransportError> {
    let optics = &medium.optics;
    let mut photon = PhotonState::launch(prepared);
    loop {
        let eta = 1.0 - rng.gen::<f64>();
        let dl = sample_free_path(optics.mu_e, eta);
        let dz = photon.direction.z;
        if dz > 0.0 && photon.position.z + dl * dz >= recv.distance {
            let t = (recv.distance - photon.position.z) / dz;
            photon.position += photon.direction * t;
            photon.position.z = recv.distance;
            photon.path_length += t;
            let outcome = if recv.accepts(&photon.position, &photon.direction) {
                let s = to_receiver_frame(&photon.direction, &photon.frame, &photon.stokes);
                if photon.scatter_count == 0 {
                    PhotonOutcome::ReceivedBallistic(s)
                } else {
                    PhotonOutcome::ReceivedScattered(s)
                }
            } else {
                PhotonOutcome::Lost
            };
            return Ok((outcome, photon));
        }
        photon.position += photon.direction * dl;
        photon.path_length += dl;

        let w = survival_weight(optics.mu_s_p, optics.mu_a_p, optics.mu_m, dl);
        if rng.gen::<f64>() > w {
            return Ok((PhotonOutcome::Absorbed, photon));
        }
        if photon.scatter_count >= MAX_SCATTER_EVENTS {
            return Ok((PhotonOutcome::Lost, photon));
        }
        photon.scatter_count += 1;

        let diameter = optics.psd.sample_diameter(rng.gen::<f64>());
        let table = medium.tables.table_for(diameter);
        let (theta, phi) = sample_scattering_angles(&photon.stokes, table, rng)?;
        on_scatter(theta, phi);

        let el = table.at(theta);
        let s = scatter_stokes(&rotate_stokes(&photon.stokes, phi), &el);
        // Intensity bookkeeping lives in the survival draw; keep i = 1.
        photon.stokes = s.scaled(1.0 / s.i);
        let (d, f) = update_direction(&photon.direction, &photon.frame, theta, phi);
        photon.direction = d;
        photon.frame = f;
    }
}

/// Follows one history until it is received, absorbed or lost.
pub fn propagate_photon<R: Rng>(
    prepared: Bb84State,
    medium: &ScatteringMedium,
    recv: &ReceiverGeometry,
    rng: &mut R,
) -> Result<PhotonOutcome, TransportError> {
    trace(prepared, medium, recv, rng, &mut |_, _| ()).map(|(o, _)| o)
}

/// Like [`propagate_photon`] but also returns the final photon state.
pub fn propagate_photon_state<R: Rng>(
    prepared: Bb84State,
    medium: &ScatteringMedium,
    recv: &ReceiverGeometry,
    rng: &mut R,
) -> Result<(PhotonOutcome, PhotonState), TransportError> {
    trace(prepared, medium, recv, rng, &mut |_, _| ())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportTallies {
    pub launched: u64,
    pub received_ballistic: u64,
    pub received_scattered: u64,
    pub absorbed: u64,
    pub lost: u64,
    /// Normalized receiver-frame Stokes of received scattered photons.
    pub scattered: EnsemblePolarization,
    pub scatter_events: u64,
    pub theta_histogram: Vec<u64>,
    pub phi_histogram: Vec<u64>,
}

impl Default for TransportTallies {
    fn default() -> Self {
        Self {
            launched: 0,
            received_ballistic: 0,
            received_scattered: 0,
            absorbed: 0,
            lost: 0,
            scattered: EnsemblePolarization::default(),
            scatter_events: 0,
            theta_histogram: vec![0; THETA_BINS],
            phi_histogram: vec![0; PHI_BINS],
        }
    }
}

impl TransportTallies {
    pub fn received(&self) -> u64 {
        self.received_ballistic + self.received_scattered
    }

    pub fn record(&mut self, outcome: &PhotonOutcome) {
        self.launched += 1;
        match outcome {
            PhotonOutcome::ReceivedBallistic(_) => self.received_ballistic += 1,
            PhotonOutcome::ReceivedScattered(s) => {
                self.received_scattered += 1;
                self.scattered.push(s.normalized());
            }
            PhotonOutcome::Absorbed => self.absorbed += 1,
            PhotonOutcome::Lost => self.lost += 1,
        }
    }

    fn record_angles(&mut self, theta: f64, phi: f64) {
        self.scatter_events += 1;
        let t = ((theta / PI * THETA_BINS as f64) as usize).min(THETA_BINS - 1);
        let p = ((phi / (2.0 * PI) * PHI_BINS as f64) as usize).min(PHI_BINS - 1);
        self.theta_histogram[t] += 1;
        self.phi_histogram[p] += 1;
    }

    pub fn merge(&mut self, other: &TransportTallies) {
        self.launched += other.launched;
        self.received_ballistic += other.received_ballistic;
        self.received_scattered += other.received_scattered;
        self.absorbed += other.absorbed;
        self.lost += other.lost;
        self.scattered.merge(&other.scattered);
        self.scatter_events += other.scatter_events;
        for (a, b) in self.theta_histogram.iter_mut().zip(&other.theta_histogram) {
            *a += b;
        }
        for (a, b) in self.phi_histogram.iter_mut().zip(&other.phi_histogram) {
            *a += b;
        }
    }

    /// Sum of per-photon wrong-bit probabilities over received scattered photons.
    pub fn scatter_error_expectation(&self, prepared: Bb84State) -> f64 {
        let b = prepared.bloch();
        let dot: f64 = (0..3).map(|k| b[k] * self.scattered.sum[k]).sum();
        (0.5 * (self.scattered.count as f64 - dot)).max(0.0)
    }
}

fn run_chunk(
    prepared: Bb84State,
    medium: &ScatteringMedium,
    recv: &ReceiverGeometry,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Result<TransportTallies, TransportError> {
    let mut tallies = TransportTallies::default();
    for index in range {
        let mut rng = photon_rng(seed, index);
        let mut angles = Vec::new();
        let (outcome, _) = trace(prepared, medium, recv, &mut rng, &mut |t, p| angles.push((t, p)))?;
        for (t, p) in angles {
            tallies.record_angles(t, p);
        }
        tallies.record(&outcome);
    }
    Ok(tallies)
}

/// Runs `n_photons` histories on `workers` threads. Results depend only on
/// `(seed, n_photons)` and the inputs, never on the worker count.
pub fn run_transport(
    prepared: Bb84State,
    medium: &ScatteringMedium,
    recv: &ReceiverGeometry,
    n_photons: u64,
    seed: u64,
    workers: usize,
) -> Result<TransportTallies, TransportError> {
    if n_photons == 0 {
        return Err(TransportError::InvalidInput("n_photons must be at least 1".into()));
    }
    if !(medium.optics.mu_e > 0.0) {
        return Err(TransportError::InvalidInput(format!("extinction {} must be positive", medium.optics.mu_e)));
    }
    let chunks: Vec<_> = (0..n_photons.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(n_photons))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| TransportError::Pool(e.to_string()))?;
    let parts: Vec<TransportTallies> = pool.install(|| {
        chunks
            .into_par_iter()
            .map(|r| run_chunk(prepared, medium, recv, seed, r))
            .collect::<Result<_, _>>()
    })?;
    let mut total = TransportTallies::default();
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::JungePsd;

    fn small_tables() -> Arc<MieTableSet> {
        let psd = JungePsd::default();
        Arc::new(MieTableSet::build(&psd, 480e-9, ComplexIndex::plankton(), 1.34, 2).unwrap())
    }

    #[test]
    fn free_path_values() {
        assert_eq!(sample_free_path(0.03, 1.0), 0.0);
        assert!((sample_free_path(0.03, (-1.0f64).exp()) - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn survival_values() {
        assert_eq!(survival_weight(0.01, 0.0, 0.0, 5.0), 1.0);
        assert_eq!(survival_weight(0.01, 0.01, 0.0, 5.0), 0.5);
        let w = survival_weight(0.01, 0.0024, 0.0176, 10.0);
        assert!((w - 0.01 / 0.0124 * (-0.176f64).exp()).abs() < 1e-15);
        assert!((w - 0.6763).abs() < 1e-4);
    }

    #[test]
    fn direction_update_limits() {
        let d = Vector3::new(0.3, -0.4, 0.5).normalize();
        let f = rebuild_frame(&d);
        let (same, _) = update_direction(&d, &f, 0.0, 1.1);
        assert!((same - d).norm() < 1e-15);
        for phi in [0.0, 0.7, 2.0, 5.5] {
            let (back, nf) = update_direction(&d, &f, PI, phi);
            assert!((back + d).norm() < 1e-12);
            assert!(nf.dot(&back).abs() < 1e-12);
        }
        let (d1, f1) = update_direction(&d, &f, 0.8, 2.2);
        let (d2, f2) = update_direction(&d1, &f1, 0.0, 0.0);
        assert!((d1 - d2).norm() < 1e-15 && (f1 - f2).norm() < 1e-15);
    }

    #[test]
    fn degenerate_frame_is_rebuilt() {
        let d = Vector3::z();
        let (nd, nf) = update_direction(&d, &d, 0.5, 0.0);
        assert!((nd.norm() - 1.0).abs() < 1e-12);
        assert!((nf.norm() - 1.0).abs() < 1e-12);
        assert!(nf.dot(&nd).abs() < 1e-12);
    }

    #[test]
    fn receiver_frame_identity_for_launch_frame() {
        let s = Bb84State::P.stokes();
        assert_eq!(to_receiver_frame(&Vector3::z(), &Vector3::x(), &s), s);
        // A frame rotated by 90 degrees swaps the sign of Q.
        let r = to_receiver_frame(&Vector3::z(), &Vector3::y(), &Bb84State::H.stokes());
        assert!((r.q + 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_validation() {
        assert!(ReceiverGeometry::new(-1.0, 0.1, 0.1).is_err());
        assert!(ReceiverGeometry::new(10.0, 0.0, 0.1).is_err());
        assert!(ReceiverGeometry::new(10.0, 0.1, 2.0).is_err());
        assert!(ReceiverGeometry::new(10.0, 0.1, 0.175).is_ok());
    }

    #[test]
    fn vacuum_like_medium_delivers_everything_ballistic() {
        let optics = WaterOptics::from_coefficients(1e-6, 0.0, 1e-6);
        let medium = ScatteringMedium::new(optics, small_tables());
        let recv = ReceiverGeometry::new(1.0, 0.1, 0.1).unwrap();
        let t = run_transport(Bb84State::M, &medium, &recv, 500, 3, 1).unwrap();
        assert_eq!(t.received_ballistic, 500);
        for i in 0..20 {
            let o = propagate_photon(Bb84State::M, &medium, &recv, &mut photon_rng(3, i)).unwrap();
            assert_eq!(o, PhotonOutcome::ReceivedBallistic(Bb84State::M.stokes()));
        }
    }

    #[test]
    fn single_photon_run_matches_single_history() {
        let optics = WaterOptics::from_coefficients(0.0176, 0.05, 0.01);
        let medium = ScatteringMedium::new(optics, small_tables());
        let recv = ReceiverGeometry::new(20.0, 0.5, 0.5).unwrap();
        let outcome = propagate_photon(Bb84State::H, &medium, &recv, &mut photon_rng(11, 0)).unwrap();
        let t = run_transport(Bb84State::H, &medium, &recv, 1, 11, 1).unwrap();
        let mut expect = TransportTallies::default();
        expect.record(&outcome);
        assert_eq!(t.launched, 1);
        assert_eq!(
            (t.received_ballistic, t.received_scattered, t.absorbed, t.lost, t.scattered),
            (expect.received_ballistic, expect.received_scattered, expect.absorbed, expect.lost, expect.scattered)
        );
    }

    #[test]
    fn lossless_medium_hits_event_guard() {
        let optics = WaterOptics::from_coefficients(0.0, 5.0, 0.0);
        let medium = ScatteringMedium::new(optics, small_tables());
        let recv = ReceiverGeometry::new(1e6, 0.1, 0.1).unwrap();
        let (o, state) = propagate_photon_state(Bb84State::H, &medium, &recv, &mut photon_rng(1, 1)).unwrap();
        assert_eq!(o, PhotonOutcome::Lost);
        assert_eq!(state.scatter_count, MAX_SCATTER_EVENTS);
        assert!((state.direction.norm() - 1.0).abs() < 1e-12);
        assert!(state.frame.dot(&state.direction).abs() < 1e-12);
        assert!((state.stokes.degree_of_polarization() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_photons_rejected() {
        let optics = WaterOptics::from_coefficients(0.0176, 0.01, 0.0024);
        let medium = ScatteringMedium::new(optics, small_tables());
        let recv = ReceiverGeometry::new(10.0, 0.1, 0.1).unwrap();
        assert!(run_transport(Bb84State::H, &medium, &recv, 0, 1, 1).is_err());
    }
}
