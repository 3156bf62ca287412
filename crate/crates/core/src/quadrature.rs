//! Numerical integration over the half-space, the boundary hyperplane and
//! weakly singular time intervals.
//!
//! All rules are fixed composite rules. Sums are reduced pairwise in a fixed
//! order so that identical inputs give bit-identical results.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::HalfSpacePoint;

/// Nodes per panel of the composite Gauss-Legendre rule.
pub const PANEL_ORDER: usize = 8;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the three-term recurrence; accurate to a few ulps for
/// the orders used here (n <= 128).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Pairwise (cascade) summation with a fixed reduction tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// One-dimensional rule used on bounded intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Trapezoid,
    GaussLegendreComposite,
}

/// Truncation and resolution of spatial integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialQuadratureSpec {
    /// Half-width of the integration box in units of the Gaussian scale `sqrt(2t)`
    /// (or of the supplied `scale` for boundary integrals).
    pub truncation_radius_sigmas: f64,
    pub nodes_per_dimension: usize,
    pub scheme: Scheme,
}

impl Default for SpatialQuadratureSpec {
    fn default() -> Self {
        Self {
            truncation_radius_sigmas: 8.0,
            nodes_per_dimension: 64,
            scheme: Scheme::GaussLegendreComposite,
        }
    }
}

impl SpatialQuadratureSpec {
    pub fn new(truncation_radius_sigmas: f64, nodes_per_dimension: usize, scheme: Scheme) -> Result<Self> {
        let spec = Self {
            truncation_radius_sigmas,
            nodes_per_dimension,
            scheme,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.truncation_radius_sigmas >= 6.0) {
            return Err(Error::Config(format!(
                "truncation_radius_sigmas must be >= 6, got {}",
                self.truncation_radius_sigmas
            )));
        }
        if self.nodes_per_dimension < 16 {
            return Err(Error::Config(format!(
                "nodes_per_dimension must be >= 16, got {}",
                self.nodes_per_dimension
            )));
        }
        Ok(())
    }
}

/// Nodes and weights of a composite rule on `[a, b]` with about `n` nodes.
pub fn composite_rule(a: f64, b: f64, n: usize, scheme: Scheme) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    match scheme {
        Scheme::Trapezoid => {
            let n = n.max(2);
            let h = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                    (a + i as f64 * h, w)
                })
                .collect()
        }
        Scheme::GaussLegendreComposite => {
            let panels = n.div_ceil(PANEL_ORDER).max(1);
            gauss_panels(a, b, panels, PANEL_ORDER)
        }
    }
}

/// Composite Gauss-Legendre with `panels` equal panels of `order` nodes.
pub fn gauss_panels(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}

/// Integral of `f` over the truncated half-space box centred at `center`.
///
/// The box has half-width `R = truncation_radius_sigmas * sqrt(2t)` in every
/// direction and is clipped to `y_N >= 0`; mass outside the box is dropped.
pub fn integrate_halfspace<F>(f: F, center: &HalfSpacePoint, t: f64, spec: &SpatialQuadratureSpec) -> Result<f64>
where
    F: Fn(&HalfSpacePoint) -> f64,
{
    spec.validate()?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("integrate_halfspace needs t > 0, got {t}")));
    }
    let radius = spec.truncation_radius_sigmas * (2.0 * t).sqrt();
    let n = spec.nodes_per_dimension;
    let mut axes: Vec<Vec<(f64, f64)>> = center
        .tangential
        .iter()
        .map(|&c| composite_rule(c - radius, c + radius, n, spec.scheme))
        .collect();
    let lo = (center.height - radius).max(0.0);
    axes.push(composite_rule(lo, center.height + radius, n, spec.scheme));
    tensor_sum(&axes, |coords| {
        let (tan, h) = coords.split_at(coords.len() - 1);
        HalfSpacePoint::new_unchecked(tan.to_vec(), h[0])
    }, f)
}

fn tensor_sum<P, F>(axes: &[Vec<(f64, f64)>], make: impl Fn(&[f64]) -> P, f: F) -> Result<f64>
where
    F: Fn(&P) -> f64,
{
    if axes.iter().any(|a| a.is_empty()) {
        return Ok(0.0);
    }
    let dims = axes.len();
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut terms = Vec::with_capacity(total);
    let mut idx = vec![0usize; dims];
    let mut coords = vec![0.0; dims];
    for _ in 0..total {
        let mut w = 1.0;
        for d in 0..dims {
            let (x, wd) = axes[d][idx[d]];
            coords[d] = x;
            w *= wd;
        }
        let point = make(&coords);
        let v = f(&point);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                location: format!("quadrature node {coords:?}"),
            });
        }
        terms.push(v * w);
        for d in (0..dims).rev() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Integral of `g` over the boundary hyperplane `R^{N-1}`.
///
/// The ball of radius `truncation_radius_sigmas * scale` around `center` is
/// integrated directly; the exterior is mapped onto a bounded interval by the
/// inversion `rho = R / u` and integrated with Gauss-Legendre in `u`. For
/// integrands decaying like `|y'|^{-N}` (the boundary kernel's rate) the mapped
/// tail integrand stays bounded, so the algebraic tail is captured rather than
/// truncated.
pub fn integrate_boundary<G>(g: G, center: &[f64], scale: f64, spec: &SpatialQuadratureSpec) -> Result<f64>
where
    G: Fn(&[f64]) -> f64,
{
    spec.validate()?;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Domain(format!("integrate_boundary needs scale > 0, got {scale}")));
    }
    let radius = spec.truncation_radius_sigmas * scale;
    let n = spec.nodes_per_dimension;
    match center.len() {
        1 => {
            let c = center[0];
            let ball = composite_rule(c - radius, c + radius, n, spec.scheme);
            let tail = composite_rule(0.0, 1.0, n, Scheme::GaussLegendreComposite);
            let mut terms = Vec::with_capacity(ball.len() + 2 * tail.len());
            let mut y = [0.0];
            for &(x, w) in &ball {
                y[0] = x;
                terms.push(checked(g(&y), &y)? * w);
            }
            for &(u, w) in &tail {
                let r = radius / u;
                let jac = radius / (u * u);
                for sign in [-1.0, 1.0] {
                    y[0] = c + sign * r;
                    terms.push(checked(g(&y), &y)? * w * jac);
                }
            }
            Ok(pairwise_sum(&terms))
        }
        2 => {
            let radial = composite_rule(0.0, radius, n, Scheme::GaussLegendreComposite);
            let tail = composite_rule(0.0, 1.0, n, Scheme::GaussLegendreComposite);
            let n_theta = (2 * n).max(32);
            let dtheta = 2.0 * PI / n_theta as f64;
            let mut terms = Vec::with_capacity((radial.len() + tail.len()) * n_theta);
            let mut y = [0.0, 0.0];
            for k in 0..n_theta {
                let (s, c) = (k as f64 * dtheta).sin_cos();
                for &(rho, w) in &radial {
                    y[0] = center[0] + rho * c;
                    y[1] = center[1] + rho * s;
                    terms.push(checked(g(&y), &y)? * w * rho * dtheta);
                }
                for &(u, w) in &tail {
                    let rho = radius / u;
                    let jac = radius * radius / (u * u * u);
                    y[0] = center[0] + rho * c;
                    y[1] = center[1] + rho * s;
                    terms.push(checked(g(&y), &y)? * w * jac * dtheta);
                }
            }
            Ok(pairwise_sum(&terms))
        }
        d => Err(Error::Config(format!(
            "integrate_boundary supports boundary dimension 1 or 2, got {d}"
        ))),
    }
}

fn checked(v: f64, y: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            value: v,
            location: format!("boundary node {y:?}"),
        })
    }
}

/// Endpoint behaviour of a Duhamel-type time integrand on `(0, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingularTimeSpec {
    /// Strength `a` of an `s^{-a}` singularity at `s = 0`.
    pub left_exponent: f64,
    /// Strength `b` of a `(t-s)^{-b}` singularity at `s = t`.
    pub right_exponent: f64,
    pub panels: usize,
}

impl SingularTimeSpec {
    pub fn new(left_exponent: f64, right_exponent: f64, panels: usize) -> Result<Self> {
        let spec = Self {
            left_exponent,
            right_exponent,
            panels,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.left_exponent, self.right_exponent);
        if !(0.0..1.0).contains(&a) || !(0.0..1.0).contains(&b) || a + b > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "singular exponents need 0 <= a, b < 1 and a + b <= 1, got ({a}, {b})"
            )));
        }
        if self.panels < 8 {
            return Err(Error::Config(format!("panels must be >= 8, got {}", self.panels)));
        }
        Ok(())
    }
}

/// Nodes and weights for `int_lo^hi h(s) ds` with optional square-root
/// substitutions at either end.
///
/// With a singular left end the first half uses `s = lo + (m - lo) u^2`
/// (resp. `s = hi - (hi - m) u^2` at the right end), which turns an
/// `(s - lo)^{-1/2}` factor into a bounded one.
pub fn singular_interval_rule(lo: f64, hi: f64, left: bool, right: bool, panels: usize) -> Vec<(f64, f64)> {
    if hi <= lo {
        return Vec::new();
    }
    let mid = 0.5 * (lo + hi);
    let half = mid - lo;
    let mut out = Vec::with_capacity(2 * panels * PANEL_ORDER);
    let base = gauss_panels(0.0, 1.0, panels, PANEL_ORDER);
    if left {
        for &(u, w) in &base {
            out.push((lo + half * u * u, w * 2.0 * half * u));
        }
    } else {
        for &(u, w) in &base {
            out.push((lo + half * u, w * half));
        }
    }
    if right {
        for &(u, w) in base.iter().rev() {
            out.push((hi - half * u * u, w * 2.0 * half * u));
        }
    } else {
        for &(u, w) in &base {
            out.push((mid + half * u, w * half));
        }
    }
    out
}

/// Rule for `int_0^t` honouring the spec's endpoint exponents.
pub fn singular_time_rule(t: f64, spec: &SingularTimeSpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time integral needs t > 0, got {t}")));
    }
    Ok(singular_interval_rule(
        0.0,
        t,
        spec.left_exponent > 0.0,
        spec.right_exponent > 0.0,
        spec.panels,
    ))
}

/// `int_0^t h(s) ds` for integrands with at most `s^{-a}(t-s)^{-b}` endpoint blow-up.
pub fn integrate_time_singular<H>(h: H, t: f64, spec: &SingularTimeSpec) -> Result<f64>
where
    H: Fn(f64) -> f64,
{
    let rule = singular_time_rule(t, spec)?;
    let mut terms = Vec::with_capacity(rule.len());
    for (s, w) in rule {
        let v = h(s);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                location: format!("time node s = {s}"),
            });
        }
        terms.push(v * w);
    }
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gauss_kernel, Dimension};
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(s, 2.0 / 15.0, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn time_rule_examples() {
        let spec = SingularTimeSpec::new(0.5, 0.0, 8).unwrap();
        let v = integrate_time_singular(|s| s.powf(-0.5), 1.0, &spec).unwrap();
        assert!((v - 2.0).abs() < 1e-8);

        let spec = SingularTimeSpec::new(0.5, 0.5, 8).unwrap();
        let v = integrate_time_singular(|s| (s * (1.0 - s)).powf(-0.5), 1.0, &spec).unwrap();
        assert!((v - PI).abs() < 1e-6, "beta(1/2,1/2) = {v}");

        let spec = SingularTimeSpec::new(0.0, 0.0, 8).unwrap();
        let v = integrate_time_singular(|_| 1.0, 2.0, &spec).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn time_spec_rejects_bad_exponents() {
        assert!(SingularTimeSpec::new(0.7, 0.5, 8).is_err());
        assert!(SingularTimeSpec::new(1.0, 0.0, 8).is_err());
        assert!(SingularTimeSpec::new(0.5, 0.5, 4).is_err());
    }

    #[test]
    fn spatial_spec_validation() {
        assert!(SpatialQuadratureSpec::new(5.0, 64, Scheme::Trapezoid).is_err());
        assert!(SpatialQuadratureSpec::new(8.0, 8, Scheme::Trapezoid).is_err());
    }

    #[test]
    fn zero_integrands_vanish() {
        let spec = SpatialQuadratureSpec::default();
        let c = HalfSpacePoint::new(vec![0.0], 1.0).unwrap();
        assert_eq!(integrate_halfspace(|_| 0.0, &c, 1.0, &spec).unwrap(), 0.0);
        assert_eq!(integrate_boundary(|_| 0.0, &[0.0], 1.0, &spec).unwrap(), 0.0);
    }

    #[test]
    fn full_space_gaussian_normalization() {
        let spec = SpatialQuadratureSpec::new(10.0, 128, Scheme::GaussLegendreComposite).unwrap();
        let t = 0.7;
        // centre far enough above the boundary that the clip is inactive
        let c = HalfSpacePoint::new(vec![0.3], 20.0).unwrap();
        let v = integrate_halfspace(
            |y| {
                let z = [y.tangential[0] - c.tangential[0], y.height - c.height];
                gauss_kernel(&z, t).unwrap()
            },
            &c,
            t,
            &spec,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn boundary_gaussian_normalization() {
        let spec = SpatialQuadratureSpec::new(8.0, 128, Scheme::GaussLegendreComposite).unwrap();
        for &t in &[0.01_f64, 1.0, 30.0] {
            let s = (2.0 * t).sqrt();
            let v = integrate_boundary(|y| gauss_kernel(&[y[0] - 0.4], t).unwrap(), &[0.4], s, &spec).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "t={t}: {v}");
        }
        let _ = Dimension::new(2).unwrap();
    }

    #[test]
    fn singular_rule_is_deterministic() {
        let spec = SingularTimeSpec::new(0.5, 0.5, 16).unwrap();
        let f = |s: f64| (s * (3.0 - s)).powf(-0.5) * (1.0 + s).ln();
        let a = integrate_time_singular(f, 3.0, &spec).unwrap();
        let b = integrate_time_singular(f, 3.0, &spec).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert_relative_eq!(pairwise_sum(&v), naive, epsilon = 1e-12);
    }
}
