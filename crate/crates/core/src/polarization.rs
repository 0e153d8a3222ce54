//! Stokes/Mueller algebra and the BB84 polarization states.

use thiserror::Error;

use crate::mie::MuellerElements;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum PolarizationError {
    #[error("fidelity is undefined for an empty ensemble")]
    EmptyEnsemble,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector {
    pub i: f64,
    pub q: f64,
    pub u: f64,
    pub v: f64,
}

impl StokesVector {
    pub const fn new(i: f64, q: f64, u: f64, v: f64) -> Self {
        Self { i, q, u, v }
    }

    pub fn unpolarized() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// `(q, u, v) / i`.
    pub fn normalized(&self) -> [f64; 3] {
        [self.q / self.i, self.u / self.i, self.v / self.i]
    }

    pub fn degree_of_polarization(&self) -> f64 {
        (self.q * self.q + self.u * self.u + self.v * self.v).sqrt() / self.i
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.i * s, self.q * s, self.u * s, self.v * s)
    }

    fn as_array(&self) -> [f64; 4] {
        [self.i, self.q, self.u, self.v]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuellerMatrix(pub [[f64; 4]; 4]);

impl MuellerMatrix {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        (0..4).for_each(|k| m[k][k] = 1.0);
        Self(m)
    }

    /// Single-sphere scattering matrix with the block pattern
    /// `[[m1 m2 0 0] [m2 m1 0 0] [0 0 m3 m4] [0 0 -m4 m3]]`.
    pub fn scattering(e: &MuellerElements) -> Self {
        Self([
            [e.m1, e.m2, 0.0, 0.0],
            [e.m2, e.m1, 0.0, 0.0],
            [0.0, 0.0, e.m3, e.m4],
            [0.0, 0.0, -e.m4, e.m3],
        ])
    }

    pub fn mul(&self, rhs: &MuellerMatrix) -> MuellerMatrix {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| self.0[r][k] * rhs.0[k][c]).sum();
            }
        }
        MuellerMatrix(out)
    }
}

/// Frame rotation by `phi` about the propagation direction.
pub fn rotation(phi: f64) -> MuellerMatrix {
    let (s, c) = (2.0 * phi).sin_cos();
    MuellerMatrix([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c, s, 0.0],
        [0.0, -s, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ])
}

pub fn apply_mueller(mat: &MuellerMatrix, s: &StokesVector) -> StokesVector {
    let x = s.as_array();
    let row = |r: usize| (0..4).map(|k| mat.0[r][k] * x[k]).sum::<f64>();
    StokesVector::new(row(0), row(1), row(2), row(3))
}

/// `R(phi)` applied directly, without forming the matrix.
pub fn rotate_stokes(s: &StokesVector, phi: f64) -> StokesVector {
    let (sn, cs) = (2.0 * phi).sin_cos();
    StokesVector::new(s.i, cs * s.q + sn * s.u, -sn * s.q + cs * s.u, s.v)
}

/// `M(theta)` applied directly.
pub fn scatter_stokes(s: &StokesVector, e: &MuellerElements) -> StokesVector {
    StokesVector::new(
        e.m1 * s.i + e.m2 * s.q,
        e.m2 * s.i + e.m1 * s.q,
        e.m3 * s.u + e.m4 * s.v,
        -e.m4 * s.u + e.m3 * s.v,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterEvent {
    pub theta: f64,
    pub phi: f64,
    pub elements: MuellerElements,
}

/// `M(theta_n) R(phi_n) ... M(theta_1) R(phi_1) s0`, events first-to-last.
/// No renormalization is applied.
pub fn scatter_chain(s0: &StokesVector, events: &[ScatterEvent]) -> StokesVector {
    events
        .iter()
        .fold(*s0, |s, ev| scatter_stokes(&rotate_stokes(&s, ev.phi), &ev.elements))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bb84State {
    H,
    V,
    P,
    M,
}

impl Bb84State {
    pub const ALL: [Bb84State; 4] = [Bb84State::H, Bb84State::V, Bb84State::P, Bb84State::M];

    pub fn stokes(self) -> StokesVector {
        match self {
            Bb84State::H => StokesVector::new(1.0, 1.0, 0.0, 0.0),
            Bb84State::V => StokesVector::new(1.0, -1.0, 0.0, 0.0),
            Bb84State::P => StokesVector::new(1.0, 0.0, 1.0, 0.0),
            Bb84State::M => StokesVector::new(1.0, 0.0, -1.0, 0.0),
        }
    }

    pub fn bloch(self) -> [f64; 3] {
        self.stokes().normalized()
    }

    /// The other state of the same basis.
    pub fn orthogonal(self) -> Bb84State {
        match self {
            Bb84State::H => Bb84State::V,
            Bb84State::V => Bb84State::H,
            Bb84State::P => Bb84State::M,
            Bb84State::M => Bb84State::P,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Bb84State::H => "H",
            Bb84State::V => "V",
            Bb84State::P => "P",
            Bb84State::M => "M",
        }
    }
}

impl std::str::FromStr for Bb84State {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "H" => Ok(Bb84State::H),
            "V" => Ok(Bb84State::V),
            "P" | "D" => Ok(Bb84State::P),
            "M" | "A" => Ok(Bb84State::M),
            _ => Err(format!("unknown BB84 state `{s}` (expected H, V, P or M)")),
        }
    }
}

/// Running first and second moments of normalized Stokes components.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnsemblePolarization {
    pub count: u64,
    pub sum: [f64; 3],
    /// `sum s_a s_b` for `(a, b)` in row-major upper-triangular order
    /// `qq, qu, qv, uu, uv, vv`.
    pub sum_products: [f64; 6],
}

impl EnsemblePolarization {
    pub fn push(&mut self, s: [f64; 3]) {
        self.count += 1;
        for (acc, x) in self.sum.iter_mut().zip(s) {
            *acc += x;
        }
        let p = [s[0] * s[0], s[0] * s[1], s[0] * s[2], s[1] * s[1], s[1] * s[2], s[2] * s[2]];
        for (acc, x) in self.sum_products.iter_mut().zip(p) {
            *acc += x;
        }
    }

    pub fn merge(&mut self, other: &EnsemblePolarization) {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_products.iter_mut().zip(other.sum_products) {
            *a += b;
        }
    }

    pub fn mean(&self) -> Option<[f64; 3]> {
        (self.count > 0).then(|| self.sum.map(|x| x / self.count as f64))
    }

    /// Sample mean and standard error of `b . s` over the ensemble.
    pub fn projection_stats(&self, b: [f64; 3]) -> Option<(f64, f64)> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let mean = (0..3).map(|k| b[k] * self.sum[k]).sum::<f64>() / n;
        let p = &self.sum_products;
        let second = b[0] * b[0] * p[0]
            + 2.0 * b[0] * b[1] * p[1]
            + 2.0 * b[0] * b[2] * p[2]
            + b[1] * b[1] * p[3]
            + 2.0 * b[1] * b[2] * p[4]
            + b[2] * b[2] * p[5];
        let var = (second / n - mean * mean).max(0.0);
        Some((mean, (var / n).sqrt()))
    }
}

/// `sqrt(<psi|rho|psi>)` with `rho = (1 + s_mean . sigma)/2`.
pub fn fidelity(psi: Bb84State, ens: &EnsemblePolarization) -> Result<f64, PolarizationError> {
    let (proj, _) = ens.projection_stats(psi.bloch()).ok_or(PolarizationError::EmptyEnsemble)?;
    Ok(((1.0 + proj) / 2.0).clamp(0.0, 1.0).sqrt())
}

/// Fidelity with a one-sigma standard error propagated from the ensemble spread.
pub fn fidelity_with_error(psi: Bb84State, ens: &EnsemblePolarization) -> Result<(f64, f64), PolarizationError> {
    let (proj, se) = ens.projection_stats(psi.bloch()).ok_or(PolarizationError::EmptyEnsemble)?;
    let f = ((1.0 + proj) / 2.0).clamp(0.0, 1.0).sqrt();
    let se_f = if f > 0.0 { se / (4.0 * f) } else { f64::INFINITY };
    Ok((f, se_f))
}

/// Probability that a matched-basis measurement of a photon with normalized
/// Stokes `received` yields the wrong bit for `prepared`.
pub fn measurement_error_probability(prepared: Bb84State, received: [f64; 3]) -> f64 {
    let b = prepared.bloch();
    let dot: f64 = (0..3).map(|k| b[k] * received[k]).sum();
    ((1.0 - dot) / 2.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: &StokesVector, b: &StokesVector, tol: f64) -> bool {
        let (x, y) = (a.as_array(), b.as_array());
        (0..4).all(|k| (x[k] - y[k]).abs() <= tol)
    }

    #[test]
    fn identity_and_extinction() {
        let s = StokesVector::new(1.0, 0.3, -0.2, 0.1);
        assert_eq!(apply_mueller(&MuellerMatrix::identity(), &s), s);
        let polarizer = MuellerMatrix::scattering(&MuellerElements { m1: 1.0, m2: -1.0, m3: 0.0, m4: 0.0 });
        let out = apply_mueller(&polarizer, &Bb84State::H.stokes());
        assert_eq!(out, StokesVector::new(0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn forward_matrix_keeps_linear_state() {
        let e = MuellerElements { m1: 2.5, m2: 0.0, m3: 2.5, m4: 0.0 };
        let out = apply_mueller(&MuellerMatrix::scattering(&e), &Bb84State::H.stokes());
        assert!(close(&out, &Bb84State::H.stokes().scaled(2.5), 1e-15));
    }

    #[test]
    fn rotation_period_and_zero() {
        assert_eq!(rotation(0.0), MuellerMatrix::identity());
        let r = rotation(PI);
        for a in 0..4 {
            for b in 0..4 {
                let id = if a == b { 1.0 } else { 0.0 };
                assert!((r.0[a][b] - id).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_chain_and_single_event() {
        let s0 = Bb84State::P.stokes();
        assert_eq!(scatter_chain(&s0, &[]), s0);
        let e = MuellerElements { m1: 1.0, m2: -0.3, m3: 0.9, m4: 0.3 };
        let one = scatter_chain(&s0, &[ScatterEvent { theta: 1.0, phi: 0.0, elements: e }]);
        assert!(close(&one, &apply_mueller(&MuellerMatrix::scattering(&e), &s0), 1e-15));
    }

    #[test]
    fn two_events_match_explicit_product() {
        let e1 = MuellerElements { m1: 1.0, m2: -0.6, m3: 0.8, m4: 0.0 };
        let e2 = MuellerElements { m1: 3.0, m2: 1.2, m3: 2.4, m4: -1.2 * 1.5 };
        let s0 = StokesVector::new(1.0, 0.2, 0.5, -0.1);
        let (p1, p2) = (0.4, 2.1);
        let chain = scatter_chain(
            &s0,
            &[
                ScatterEvent { theta: 0.3, phi: p1, elements: e1 },
                ScatterEvent { theta: 1.3, phi: p2, elements: e2 },
            ],
        );
        let full = MuellerMatrix::scattering(&e2)
            .mul(&rotation(p2))
            .mul(&MuellerMatrix::scattering(&e1))
            .mul(&rotation(p1));
        assert!(close(&chain, &apply_mueller(&full, &s0), 1e-13));
    }

    #[test]
    fn fidelity_limits() {
        let mut pure_h = EnsemblePolarization::default();
        pure_h.push(Bb84State::H.bloch());
        assert_eq!(fidelity(Bb84State::H, &pure_h).unwrap(), 1.0);
        assert_eq!(fidelity(Bb84State::V, &pure_h).unwrap(), 0.0);
        let mut mixed = EnsemblePolarization::default();
        mixed.push([0.0; 3]);
        for s in Bb84State::ALL {
            assert!((fidelity(s, &mixed).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(fidelity(Bb84State::H, &EnsemblePolarization::default()), Err(PolarizationError::EmptyEnsemble));
    }

    #[test]
    fn error_probability_limits() {
        assert_eq!(measurement_error_probability(Bb84State::P, Bb84State::P.bloch()), 0.0);
        assert_eq!(measurement_error_probability(Bb84State::P, Bb84State::M.bloch()), 1.0);
        assert_eq!(measurement_error_probability(Bb84State::V, [0.0; 3]), 0.5);
    }

    #[test]
    fn bases_are_antipodal() {
        for s in Bb84State::ALL {
            let (a, b) = (s.bloch(), s.orthogonal().bloch());
            assert!((0..3).all(|k| a[k] == -b[k]));
        }
    }

    fn unit3() -> impl Strategy<Value = [f64; 3]> {
        (0.0..PI, 0.0..2.0 * PI).prop_map(|(t, p)| [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
    }

    proptest! {
        #[test]
        fn rotations_compose(a in -10.0..10.0f64, b in -10.0..10.0f64) {
            let lhs = rotation(a).mul(&rotation(b));
            let rhs = rotation(a + b);
            for r in 0..4 {
                for c in 0..4 {
                    prop_assert!((lhs.0[r][c] - rhs.0[r][c]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn rotation_preserves_linear_norm(phi in -10.0..10.0f64, s in unit3()) {
            let st = StokesVector::new(1.0, s[0], s[1], s[2]);
            let r = rotate_stokes(&st, phi);
            prop_assert_eq!(r.i, st.i);
            prop_assert_eq!(r.v, st.v);
            prop_assert!(((r.q * r.q + r.u * r.u) - (st.q * st.q + st.u * st.u)).abs() < 1e-14);
        }

        #[test]
        fn jones_matrix_keeps_pure_states_pure(
            s1r in -5.0..5.0f64, s1i in -5.0..5.0f64, s2r in -5.0..5.0f64, s2i in -5.0..5.0f64,
            s in unit3(),
        ) {
            let e = MuellerElements::from_amplitudes(
                num_complex::Complex64::new(s1r, s1i),
                num_complex::Complex64::new(s2r, s2i),
            );
            let out = scatter_stokes(&StokesVector::new(1.0, s[0], s[1], s[2]), &e);
            prop_assume!(out.i > 1e-6);
            let pol = out.q * out.q + out.u * out.u + out.v * out.v;
            prop_assert!((pol - out.i * out.i).abs() <= 1e-9 * out.i * out.i);
        }

        #[test]
        fn error_probabilities_complement(s in unit3(), state in 0usize..4) {
            let p = Bb84State::ALL[state];
            let total = measurement_error_probability(p, s) + measurement_error_probability(p.orthogonal(), s);
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fidelity_in_unit_interval(s in unit3(), scale in 0.0..1.0f64, state in 0usize..4) {
            let mut ens = EnsemblePolarization::default();
            ens.push(s.map(|c| c * scale));
            let f = fidelity(Bb84State::ALL[state], &ens).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
