//! Independent quadrature oracle for the angular sampling density
//! `[m1 + m2 (q cos 2phi + u sin 2phi)] sin(theta)`, built from exact Mie
//! amplitudes rather than the interpolated tables used by the sampler.

#![allow(dead_code)]

use std::f64::consts::PI;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use uwqkd::mie::{ComplexIndex, MieCoefficients, SizeParameter};

pub struct AngularOracle {
    theta: Vec<f64>,
    // Running integrals of m1 sin(theta) and m2 sin(theta) from 0.
    c1: Vec<f64>,
    c2: Vec<f64>,
}

impl AngularOracle {
    pub fn new(x: f64, index: ComplexIndex, points: usize) -> Self {
        let coefs = MieCoefficients::compute(SizeParameter::new(x).unwrap(), index).unwrap();
        let scale = 1e-3;
        let alpha = (1.0 + PI / scale).ln();
        let theta: Vec<f64> = (0..points)
            .map(|k| {
                let s = k as f64 / (points - 1) as f64;
                (scale * (alpha * s).exp_m1()).min(PI)
            })
            .collect();
        let f: Vec<(f64, f64)> = theta
            .iter()
            .map(|&t| {
                let e = coefs.mueller(t).unwrap();
                (e.m1 * t.sin(), e.m2 * t.sin())
            })
            .collect();
        let mut c1 = vec![0.0; points];
        let mut c2 = vec![0.0; points];
        for k in 1..points {
            let h = theta[k] - theta[k - 1];
            c1[k] = c1[k - 1] + 0.5 * h * (f[k].0 + f[k - 1].0);
            c2[k] = c2[k - 1] + 0.5 * h * (f[k].1 + f[k - 1].1);
        }
        Self { theta, c1, c2 }
    }

    fn cumulative(&self, t: f64) -> (f64, f64) {
        let k = self.theta.partition_point(|&g| g <= t).clamp(1, self.theta.len() - 1);
        let (t0, t1) = (self.theta[k - 1], self.theta[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        (
            self.c1[k - 1] + w * (self.c1[k] - self.c1[k - 1]),
            self.c2[k - 1] + w * (self.c2[k] - self.c2[k - 1]),
        )
    }

    pub fn total(&self) -> f64 {
        *self.c1.last().unwrap()
    }

    /// Integral of `m2 sin(theta)` over `[0, pi]` relative to that of `m1 sin(theta)`.
    pub fn azimuthal_contrast(&self) -> f64 {
        self.c2.last().unwrap() / self.total()
    }

    /// `bins + 1` theta edges splitting the marginal into equal-probability bins.
    pub fn theta_edges(&self, bins: usize) -> Vec<f64> {
        let total = self.total();
        let mut edges = vec![0.0];
        for j in 1..bins {
            let target = total * j as f64 / bins as f64;
            let k = self.c1.partition_point(|&c| c < target);
            let (a, b) = (self.c1[k - 1], self.c1[k]);
            let w = (target - a) / (b - a);
            edges.push(self.theta[k - 1] + w * (self.theta[k] - self.theta[k - 1]));
        }
        edges.push(PI);
        edges
    }

    /// Probability of the cell `[t0, t1] x [p0, p1]`.
    pub fn cell(&self, t0: f64, t1: f64, p0: f64, p1: f64, q: f64, u: f64) -> f64 {
        let (a0, b0) = self.cumulative(t0);
        let (a1, b1) = self.cumulative(t1);
        let cos_part = ((2.0 * p1).sin() - (2.0 * p0).sin()) / 2.0;
        let sin_part = -((2.0 * p1).cos() - (2.0 * p0).cos()) / 2.0;
        ((a1 - a0) * (p1 - p0) + (b1 - b0) * (q * cos_part + u * sin_part)) / (2.0 * PI * self.total())
    }
}

pub fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v).clamp(1, edges.len() - 1) - 1
}

/// Upper-tail p-value of Pearson's statistic with `observed.len() - 1` degrees of freedom.
pub fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    ChiSquared::new((observed.len() - 1) as f64).unwrap().sf(stat)
}
