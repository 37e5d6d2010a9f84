//! Frequency grids, time-profile transforms and Fourier inversion.
//!
//! The inverse transform of a real signal is evaluated on `[0, omega_max]`
//! only: `u(t) = (1/pi) Re sum_j u_hat(omega_j) exp(i omega_j t) w_j`, where
//! `(omega_j, w_j)` are Legendre-Gauss-Lobatto nodes and weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// One point of the product parameter domain: a frequency plus the physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub omega: f64,
    pub xi: Vec<f64>,
}

impl ParameterPoint {
    pub fn new(omega: f64, xi: Vec<f64>) -> Self {
        Self { omega, xi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub omega_max: f64,
    pub n_omega: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomials `P_{n-1}(x)` and `P_n(x)` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (0.0, 1.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p0, p1)
}

/// Lobatto nodes and weights on `[-1, 1]`, ascending.
pub fn lgl_reference(n_points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "Lobatto rule needs at least 2 points, got {n_points}"
        )));
    }
    let deg = n_points - 1;
    let np = n_points as f64;
    let mut nodes = Vec::with_capacity(n_points);
    let mut weights = Vec::with_capacity(n_points);
    for i in 0..n_points {
        // Chebyshev-Gauss-Lobatto start; Newton on (1 - x^2) P'_deg(x) = 0
        // written as x P_deg - P_{deg-1} = 0.
        let mut x = -(PI * i as f64 / deg as f64).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (pm, p) = legendre_pair(deg, x);
            let dx = (x * p - pm) / (np * p);
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON {
                converged = true;
                break;
            }
        }
        if !converged && (i != 0 && i != deg) {
            return Err(Error::NoConvergence(n_points));
        }
        if i == 0 {
            x = -1.0;
        } else if i == deg {
            x = 1.0;
        }
        let (_, p) = legendre_pair(deg, x);
        nodes.push(x);
        weights.push(2.0 / (np * (np - 1.0) * p * p));
    }
    Ok((nodes, weights))
}

/// Lobatto grid mapped affinely onto `[0, omega_max]`.
pub fn lgl_grid(n_omega: usize, omega_max: f64) -> Result<FrequencyGrid> {
    if !(omega_max > 0.0) || !omega_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "omega_max must be positive, got {omega_max}"
        )));
    }
    let (x, w) = lgl_reference(n_omega)?;
    let half = 0.5 * omega_max;
    let mut nodes: Vec<f64> = x.iter().map(|&x| half * (x + 1.0)).collect();
    nodes[0] = 0.0;
    nodes[n_omega - 1] = omega_max;
    Ok(FrequencyGrid {
        omega_max,
        n_omega,
        nodes,
        weights: w.iter().map(|&w| half * w).collect(),
    })
}

impl FrequencyGrid {
    /// Per-node factors `(a_j, b_j)` with `u(t) = sum_j a_j Re u_j + b_j Im u_j`.
    pub fn time_kernels(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let a = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&w, &q)| q * (w * t).cos() / PI)
            .collect();
        let b = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&w, &q)| -q * (w * t).sin() / PI)
            .collect();
        (a, b)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Time-domain source profiles with closed-form whole-line spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    /// `exp(-t^2)`
    Gaussian,
    /// `t / (1 + t^2)`
    OddRational,
    /// `(1 - t^2) / (1 + t^2)^2`, the derivative of `t / (1 + t^2)`
    EvenRational,
}

impl TimeProfile {
    pub fn value(self, t: f64) -> f64 {
        match self {
            TimeProfile::Gaussian => (-t * t).exp(),
            TimeProfile::OddRational => t / (1.0 + t * t),
            TimeProfile::EvenRational => (1.0 - t * t) / ((1.0 + t * t) * (1.0 + t * t)),
        }
    }

    /// `int_R g(t) exp(-i omega t) dt`.
    ///
    /// At `omega = 0` the odd profile takes its limit from the right, which is
    /// the value the Lobatto rule on `[0, omega_max]` needs for a smooth integrand.
    pub fn spectrum(self, omega: f64) -> C64 {
        let a = omega.abs();
        let s = if omega < 0.0 { -1.0 } else { 1.0 };
        match self {
            TimeProfile::Gaussian => C64::new(PI.sqrt() * (-0.25 * omega * omega).exp(), 0.0),
            TimeProfile::OddRational => C64::new(0.0, -s * PI * (-a).exp()),
            TimeProfile::EvenRational => C64::new(PI * a * (-a).exp(), 0.0),
        }
    }
}

/// How source time profiles are carried into the frequency domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SourceTransform {
    /// Closed-form transform of the profile over the whole real line.
    #[default]
    WholeLine,
    /// Numerical transform of the profile zero-extended outside `[0, T]`.
    Truncated,
}

impl SourceTransform {
    pub fn apply(self, profile: TimeProfile, omega: f64, final_time: f64) -> C64 {
        match self {
            SourceTransform::WholeLine => profile.spectrum(omega),
            SourceTransform::Truncated => {
                forward_time_transform(|t| profile.value(t), omega, final_time)
            }
        }
    }
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pm, p) = legendre_pair(n, z);
            let dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() <= 4.0 * f64::EPSILON {
                break;
            }
        }
        let (pm, p) = legendre_pair(n, z);
        let dp = n as f64 * (z * p - pm) / (z * z - 1.0);
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn composite_gl(f: &impl Fn(f64) -> f64, omega: f64, t_end: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> C64 {
    let h = t_end / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let t = mid + 0.5 * h * x;
            acc += C64::from_polar(0.5 * h * w * f(t), -omega * t);
        }
    }
    acc
}

/// `int_0^T g(t) exp(-i omega t) dt` by composite 8-point Gauss-Legendre,
/// doubling the panel count until two successive values agree to 1e-10.
pub fn forward_time_transform(profile: impl Fn(f64) -> f64, omega: f64, final_time: f64) -> C64 {
    let rule = gauss_legendre(8);
    let mut panels = 2;
    let mut prev = composite_gl(&profile, omega, final_time, panels, &rule);
    loop {
        panels *= 2;
        let next = composite_gl(&profile, omega, final_time, panels, &rule);
        let diff = (next - prev).norm();
        if diff <= 1e-10 * next.norm() || diff == 0.0 {
            return next;
        }
        if panels >= 1 << 16 {
            log::warn!("forward transform at omega={omega} stalled at relative change {:.2e}", diff / next.norm());
            return next;
        }
        prev = next;
    }
}

/// Reconstructs a real field at time `t` from its values on the frequency grid.
pub fn inverse_transform(hat_values: &[Vec<C64>], grid: &FrequencyGrid, t: f64) -> Result<Vec<f64>> {
    if hat_values.len() != grid.n_omega {
        return Err(Error::DimensionMismatch {
            what: "frequency samples",
            expected: grid.n_omega,
            got: hat_values.len(),
        });
    }
    let n = hat_values.first().map_or(0, Vec::len);
    let (a, b) = grid.time_kernels(t);
    let mut out = vec![0.0; n];
    for (j, u) in hat_values.iter().enumerate() {
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                what: "frequency sample length",
                expected: n,
                got: u.len(),
            });
        }
        for (o, z) in out.iter_mut().zip(u) {
            *o += a[j] * z.re + b[j] * z.im;
        }
    }
    Ok(out)
}

/// `max_j |u(omega_j)|` restricted to the last node, relative to the overall maximum.
pub fn tail_ratio(hat_values: &[Vec<C64>]) -> f64 {
    let norms: Vec<f64> = hat_values.iter().map(|v| crate::linalg::cnorm(v)).collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    match norms.last() {
        Some(&last) if max > 0.0 => last / max,
        _ => 0.0,
    }
}
