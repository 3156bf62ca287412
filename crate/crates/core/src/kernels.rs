//! Closed-form kernels of the half-space problem.
//!
//! The Gauss kernel `Γ_d`, the Dirichlet heat kernel `Γ_D` built by reflection,
//! its normal derivative `K = ∂_{x_N} Γ_D`, and the boundary kernel
//! `P(x', x_N, t) = C_N (x_N+t)^{1-N} (1 + |x'/(x_N+t)|^2)^{-N/2}` together with
//! its time derivative.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_panels, pairwise_sum};

/// Smallest admissible time argument. Smaller times are rejected, not clamped.
pub const MIN_TIME: f64 = 1e-12;

/// Spatial dimension `N >= 2` of the half-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("dimension must be >= 2, got {n}")));
        }
        Ok(Self(n))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Dimension of the boundary hyperplane, `N - 1`.
    pub fn boundary(self) -> usize {
        self.0 - 1
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

/// A point `(x', x_N)` of the closed half-space.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint {
    pub tangential: Vec<f64>,
    pub height: f64,
}

impl HalfSpacePoint {
    pub fn new(tangential: Vec<f64>, height: f64) -> Result<Self> {
        if !(height >= 0.0) {
            return Err(Error::Domain(format!("height must be >= 0, got {height}")));
        }
        if tangential.is_empty() {
            return Err(Error::Domain("a half-space point needs N - 1 >= 1 tangential coordinates".into()));
        }
        Ok(Self { tangential, height })
    }

    pub(crate) fn new_unchecked(tangential: Vec<f64>, height: f64) -> Self {
        Self { tangential, height }
    }

    pub fn dim(&self) -> usize {
        self.tangential.len() + 1
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= MIN_TIME) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be >= {MIN_TIME:e}, got {t}")));
    }
    Ok(())
}

fn check_pair(x: &HalfSpacePoint, y: &HalfSpacePoint) -> Result<()> {
    if x.tangential.len() != y.tangential.len() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    if !(y.height > 0.0) {
        return Err(Error::Domain(format!("source point must lie in the open half-space, y_N = {}", y.height)));
    }
    Ok(())
}

#[inline]
pub(crate) fn gauss_1d(z: f64, t: f64) -> f64 {
    (4.0 * PI * t).powf(-0.5) * (-z * z / (4.0 * t)).exp()
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Gauss kernel `(4πt)^{-d/2} exp(-|z|^2/4t)` in `R^d`, `d = z.len()`.
pub fn gauss_kernel(z: &[f64], t: f64) -> Result<f64> {
    check_time(t)?;
    let d = z.len() as f64;
    let r2: f64 = z.iter().map(|v| v * v).sum();
    Ok((4.0 * PI * t).powf(-0.5 * d) * (-r2 / (4.0 * t)).exp())
}

/// Dirichlet heat kernel of the half-space.
///
/// Uses `|x - y_*|^2 - |x - y|^2 = 4 x_N y_N`, so the difference of the two
/// Gaussians is `G(x - y) * (1 - exp(-x_N y_N / t))`, evaluated with `expm1`.
pub fn dirichlet_heat_kernel(x: &HalfSpacePoint, y: &HalfSpacePoint, t: f64) -> Result<f64> {
    check_time(t)?;
    check_pair(x, y)?;
    Ok(dirichlet_unchecked(x, y, t))
}

#[inline]
pub(crate) fn dirichlet_unchecked(x: &HalfSpacePoint, y: &HalfSpacePoint, t: f64) -> f64 {
    let n = x.dim() as f64;
    let dn = x.height - y.height;
    let r2 = squared_distance(&x.tangential, &y.tangential) + dn * dn;
    let g = (4.0 * PI * t).powf(-0.5 * n) * (-r2 / (4.0 * t)).exp();
    g * -(-x.height * y.height / t).exp_m1()
}

/// `K(x, y, t) = ∂_{x_N} Γ_D(x, y, t)`.
pub fn normal_derivative_kernel(x: &HalfSpacePoint, y: &HalfSpacePoint, t: f64) -> Result<f64> {
    check_time(t)?;
    check_pair(x, y)?;
    Ok(normal_derivative_unchecked(x, y, t))
}

#[inline]
pub(crate) fn normal_derivative_unchecked(x: &HalfSpacePoint, y: &HalfSpacePoint, t: f64) -> f64 {
    let d = x.dim() - 1;
    let r2 = squared_distance(&x.tangential, &y.tangential);
    let tangential = (4.0 * PI * t).powf(-0.5 * d as f64) * (-r2 / (4.0 * t)).exp();
    let minus = x.height - y.height;
    let plus = x.height + y.height;
    let normal = -minus / (2.0 * t) * gauss_1d(minus, t) + plus / (2.0 * t) * gauss_1d(plus, t);
    tangential * normal
}

/// Boundary trace `K((x',0), y, t) = (y_N/t) Γ_{N-1}(x'-y', t) Γ_1(y_N, t)`.
pub fn normal_derivative_trace(x_tangential: &[f64], y: &HalfSpacePoint, t: f64) -> Result<f64> {
    check_time(t)?;
    let d = x_tangential.len();
    if d != y.tangential.len() {
        return Err(Error::Domain("dimension mismatch".into()));
    }
    let r2 = squared_distance(x_tangential, &y.tangential);
    let tangential = (4.0 * PI * t).powf(-0.5 * d as f64) * (-r2 / (4.0 * t)).exp();
    Ok(y.height / t * tangential * gauss_1d(y.height, t))
}

const CACHED_DIMENSIONS: usize = 16;
static POISSON_CONSTANTS: [OnceLock<f64>; CACHED_DIMENSIONS] = [const { OnceLock::new() }; CACHED_DIMENSIONS];

/// Normalisation constant `C_N` of the boundary kernel.
///
/// Computed once per dimension by quadrature of `∫ (1+|z|^2)^{-N/2} dz` over
/// `R^{N-1}`: in polar coordinates with `|z| = tan θ` the radial integral
/// becomes `∫_0^{π/2} sin^{N-2} θ dθ`, a smooth integrand.
pub fn poisson_constant(n: Dimension) -> f64 {
    let k = n.get();
    if k < CACHED_DIMENSIONS {
        *POISSON_CONSTANTS[k].get_or_init(|| compute_poisson_constant(k))
    } else {
        compute_poisson_constant(k)
    }
}

fn compute_poisson_constant(n: usize) -> f64 {
    let m = (n - 1) as f64;
    // surface measure of the unit sphere S^{N-2} in R^{N-1}
    let sphere = 2.0 * PI.powf(0.5 * m) / libm::tgamma(0.5 * m);
    let terms: Vec<f64> = gauss_panels(0.0, 0.5 * PI, 16, 16)
        .into_iter()
        .map(|(theta, w)| w * theta.sin().powi(n as i32 - 2))
        .collect();
    1.0 / (sphere * pairwise_sum(&terms))
}

fn check_boundary_args(x_height: f64, t: f64) -> Result<f64> {
    if !(x_height >= 0.0) || !(t >= 0.0) {
        return Err(Error::Domain(format!("need x_N >= 0 and t >= 0, got ({x_height}, {t})")));
    }
    let s = x_height + t;
    if !(s >= MIN_TIME) || !s.is_finite() {
        return Err(Error::Domain(format!("boundary kernel is singular at x_N + t = {s}")));
    }
    Ok(s)
}

/// Boundary kernel `P(x', x_N, t)`; the dimension is `x_tangential.len() + 1`.
pub fn boundary_kernel(x_tangential: &[f64], x_height: f64, t: f64) -> Result<f64> {
    let s = check_boundary_args(x_height, t)?;
    let n = Dimension::new(x_tangential.len() + 1)?;
    Ok(boundary_kernel_shifted(x_tangential, s, n))
}

/// `P` as a function of `(x', s)` with `s = x_N + t > 0`.
#[inline]
pub(crate) fn boundary_kernel_shifted(x_tangential: &[f64], s: f64, n: Dimension) -> f64 {
    let r2: f64 = x_tangential.iter().map(|v| v * v).sum();
    let nf = n.get() as f64;
    poisson_constant(n) * s.powf(1.0 - nf) * (1.0 + r2 / (s * s)).powf(-0.5 * nf)
}

/// `∂_t P = (x_N+t)^{-1} (|x'|^2 - (N-1)(x_N+t)^2) / (|x'|^2 + (x_N+t)^2) · P`.
pub fn dt_boundary_kernel(x_tangential: &[f64], x_height: f64, t: f64) -> Result<f64> {
    let s = check_boundary_args(x_height, t)?;
    let n = Dimension::new(x_tangential.len() + 1)?;
    Ok(dt_boundary_kernel_shifted(x_tangential, s, n))
}

#[inline]
pub(crate) fn dt_boundary_kernel_shifted(x_tangential: &[f64], s: f64, n: Dimension) -> f64 {
    let r2: f64 = x_tangential.iter().map(|v| v * v).sum();
    let m = (n.get() - 1) as f64;
    let bracket = (r2 - m * s * s) / (r2 + s * s);
    bracket / s * boundary_kernel_shifted(x_tangential, s, n)
}
