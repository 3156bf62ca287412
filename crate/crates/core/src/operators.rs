//! Pointwise integral operators: `S₁(t)`, `∂_{x_N} S₁(t)`, `S₂(t)`, the
//! coupling operator `F` and the boundary-generated part `w`.
//!
//! Half-space integrals use tensor Gauss quadrature. Boundary integrals are
//! exact for piecewise-linear boundary data in one tangential dimension
//! (product integration) and use [`integrate_boundary`] otherwise.

use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::kernels::{
    boundary_kernel_shifted, dirichlet_unchecked, dt_boundary_kernel_shifted, normal_derivative_unchecked,
    Dimension, HalfSpacePoint, MIN_TIME,
};
use crate::norms::{SampledBoundaryField, SampledField};
use crate::product::{convolve_at, CauchyKernel, CauchyRateKernel};
use crate::quadrature::{
    integrate_boundary, integrate_halfspace, integrate_time_singular, SingularTimeSpec, SpatialQuadratureSpec,
};

fn check_time(t: f64) -> Result<()> {
    if !(t >= MIN_TIME) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be >= {MIN_TIME:e}, got {t}")));
    }
    Ok(())
}

fn check_point(phi_dim: Dimension, x: &HalfSpacePoint) -> Result<()> {
    if x.dim() != phi_dim.get() {
        return Err(Error::Domain(format!(
            "point has dimension {} but datum has {}",
            x.dim(),
            phi_dim.get()
        )));
    }
    Ok(())
}

/// `[S₁(t)φ](x) = ∫ Γ_D(x, y, t) φ(y) dy`.
pub fn apply_s1(phi: &InitialDatum, t: f64, x: &HalfSpacePoint, quad: &SpatialQuadratureSpec) -> Result<f64> {
    check_time(t)?;
    check_point(phi.dim(), x)?;
    if phi.is_zero() || x.height == 0.0 {
        return Ok(0.0);
    }
    integrate_halfspace(|y| dirichlet_unchecked(x, y, t) * phi.evaluate(y), x, t, quad)
}

/// `[∂_{x_N} S₁(t)φ](x) = ∫ K(x, y, t) φ(y) dy`.
pub fn apply_dxn_s1(phi: &InitialDatum, t: f64, x: &HalfSpacePoint, quad: &SpatialQuadratureSpec) -> Result<f64> {
    check_time(t)?;
    check_point(phi.dim(), x)?;
    if phi.is_zero() {
        return Ok(0.0);
    }
    integrate_halfspace(|y| normal_derivative_unchecked(x, y, t) * phi.evaluate(y), x, t, quad)
}

/// `∫ P(x' - y', σ) ψ(y') dy'` with the shifted time `σ = x_N + t > 0`.
fn s2_shifted(psi: &SampledBoundaryField, sigma: f64, x_tangential: &[f64], quad: &SpatialQuadratureSpec) -> Result<f64> {
    if psi.axes().len() == 1 {
        let axis = &psi.axes()[0];
        return Ok(convolve_at(
            &CauchyKernel::new(sigma),
            x_tangential[0],
            axis,
            psi.as_slice_1d()?,
        ));
    }
    let n = Dimension::new(psi.axes().len() + 1)?;
    integrate_boundary(
        |y| {
            let d: Vec<f64> = x_tangential.iter().zip(y).map(|(a, b)| a - b).collect();
            boundary_kernel_shifted(&d, sigma, n) * psi.evaluate(y)
        },
        x_tangential,
        sigma,
        quad,
    )
}

/// `[S₂(t)ψ](x) = ∫ P(x' - y', x_N, t) ψ(y') dy'`, evaluated as the boundary
/// value at the shifted time `t + x_N`. The boundary datum is the
/// piecewise-linear interpolant of the samples, zero outside the sampled box.
pub fn apply_s2(psi: &SampledBoundaryField, t: f64, x: &HalfSpacePoint, quad: &SpatialQuadratureSpec) -> Result<f64> {
    if x.dim() != psi.axes().len() + 1 {
        return Err(Error::Domain("point and boundary field disagree on the dimension".into()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("S₂ needs t >= 0, got {t}")));
    }
    let sigma = t + x.height;
    if !(sigma >= MIN_TIME) {
        return Err(Error::Domain(format!("S₂ needs t + x_N > 0, got {sigma}")));
    }
    s2_shifted(psi, sigma, &x.tangential, quad)
}

/// `S₂` applied to an arbitrary boundary function by quadrature over the
/// boundary hyperplane.
pub fn apply_s2_fn(
    psi: impl Fn(&[f64]) -> f64,
    t: f64,
    x: &HalfSpacePoint,
    quad: &SpatialQuadratureSpec,
) -> Result<f64> {
    let sigma = t + x.height;
    if !(sigma >= MIN_TIME) {
        return Err(Error::Domain(format!("S₂ needs t + x_N > 0, got {sigma}")));
    }
    let n = Dimension::new(x.dim())?;
    integrate_boundary(
        |y| {
            let d: Vec<f64> = x.tangential.iter().zip(y).map(|(a, b)| a - b).collect();
            boundary_kernel_shifted(&d, sigma, n) * psi(y)
        },
        &x.tangential,
        sigma,
        quad,
    )
}

/// Samples `(t_k, f_k)` with `t_k` increasing and positive, interpolated
/// linearly in `log t`; held constant outside `[t_0, t_last]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<F> {
    times: Vec<f64>,
    values: Vec<F>,
}

/// `∂_{x_N} v(·, 0, t)` sampled in time.
pub type BoundaryTrajectory = Trajectory<SampledBoundaryField>;
/// A half-space field sampled in time.
pub type FieldTrajectory = Trajectory<SampledField>;

/// Fields that can be blended for time interpolation.
pub trait Blend: Clone {
    fn blend(&self, other: &Self, theta: f64) -> Self;
    fn same_grid(&self, other: &Self) -> bool;
}

impl Blend for SampledBoundaryField {
    fn blend(&self, other: &Self, theta: f64) -> Self {
        let v = self.values() * (1.0 - theta) + other.values() * theta;
        SampledBoundaryField::from_parts_unchecked(self.axes().to_vec(), v)
    }
    fn same_grid(&self, other: &Self) -> bool {
        self.axes() == other.axes()
    }
}

impl Blend for SampledField {
    fn blend(&self, other: &Self, theta: f64) -> Self {
        let v = self.values() * (1.0 - theta) + other.values() * theta;
        SampledField::from_parts_unchecked(self.axes().to_vec(), v)
    }
    fn same_grid(&self, other: &Self) -> bool {
        self.axes() == other.axes()
    }
}

impl<F: Blend> Trajectory<F> {
    pub fn new(times: Vec<f64>, values: Vec<F>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Config(format!(
                "trajectory needs matching non-empty times/values, got {} and {}",
                times.len(),
                values.len()
            )));
        }
        if !(times[0] > 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("trajectory times must be positive and strictly increasing".into()));
        }
        if values.windows(2).any(|w| !w[0].same_grid(&w[1])) {
            return Err(Error::Config("trajectory fields live on different grids".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Value at `t`, linear in `log t` between samples.
    pub fn at(&self, t: f64) -> F {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (a, b) = (self.times[k], self.times[k + 1]);
        let theta = (t / a).ln() / (b / a).ln();
        self.values[k].blend(&self.values[k + 1], theta)
    }

    /// Index of the sample at `t` (relative tolerance `1e-12`).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

/// `F[v](x, t) = ∫ P(x'-y', x_N, 0) g(y', t) dy' + ∫₀^t ∫ ∂_t P(x'-y', x_N, t-s) g(y', s) dy' ds`
/// with `g = ∂_{x_N} v(·, 0, ·)`. Requires `x_N > 0`.
pub fn apply_f(
    flux: &BoundaryTrajectory,
    x: &HalfSpacePoint,
    t: f64,
    time: &SingularTimeSpec,
    quad: &SpatialQuadratureSpec,
) -> Result<f64> {
    check_time(t)?;
    if !(x.height > 0.0) {
        return Err(Error::Domain("F is evaluated in the open half-space only (x_N > 0)".into()));
    }
    let z = x.height;
    let first = s2_shifted(&flux.at(t), z, &x.tangential, quad)?;
    let one_d = flux.values()[0].axes().len() == 1;
    let n = Dimension::new(x.dim())?;
    let second = integrate_time_singular(
        |s| {
            let g = flux.at(s);
            let sigma = z + (t - s);
            if one_d {
                let axis = &g.axes()[0];
                convolve_at(
                    &CauchyRateKernel::new(sigma),
                    x.tangential[0],
                    axis,
                    g.as_slice_1d().expect("one-dimensional"),
                )
            } else {
                integrate_boundary(
                    |y| {
                        let d: Vec<f64> = x.tangential.iter().zip(y).map(|(a, b)| a - b).collect();
                        dt_boundary_kernel_shifted(&d, sigma, n) * g.evaluate(y)
                    },
                    &x.tangential,
                    sigma,
                    quad,
                )
                .unwrap_or(f64::NAN)
            }
        },
        t,
        time,
    )?;
    Ok(first + second)
}

/// `w(x, t) = ∫₀^t [S₂(t - s) g(s)](x) ds`.
pub fn compute_w(
    flux: &BoundaryTrajectory,
    x: &HalfSpacePoint,
    t: f64,
    time: &SingularTimeSpec,
    quad: &SpatialQuadratureSpec,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    check_time(t)?;
    let z = x.height;
    integrate_time_singular(
        |s| {
            let sigma = (z + (t - s)).max(MIN_TIME);
            s2_shifted(&flux.at(s), sigma, &x.tangential, quad).unwrap_or(f64::NAN)
        },
        t,
        time,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datum::{DatumSpec, NormalTail};
    use crate::kernels::boundary_kernel;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn dim2() -> Dimension {
        Dimension::new(2).unwrap()
    }

    fn pt(a: f64, z: f64) -> HalfSpacePoint {
        HalfSpacePoint::new(vec![a], z).unwrap()
    }

    fn quad() -> SpatialQuadratureSpec {
        SpatialQuadratureSpec::new(8.0, 96, crate::quadrature::Scheme::GaussLegendreComposite).unwrap()
    }

    fn datum() -> InitialDatum {
        InitialDatum::from_spec(
            dim2(),
            DatumSpec::power_family(1.5, 1.0, 1.0, NormalTail::Gaussian { width: 1.0 }),
        )
        .unwrap()
    }

    #[test]
    fn s1_trivial_cases() {
        let q = quad();
        assert_eq!(apply_s1(&InitialDatum::zero(dim2()), 0.3, &pt(0.1, 0.4), &q).unwrap(), 0.0);
        assert_eq!(apply_s1(&datum(), 0.3, &pt(0.1, 0.0), &q).unwrap(), 0.0);
        assert!(apply_s1(&datum(), 0.0, &pt(0.1, 0.4), &q).is_err());
    }

    #[test]
    fn s1_quadrature_matches_separable_evolution() {
        // smooth datum: tensor Gauss quadrature is spectrally accurate
        let smooth = InitialDatum::from_spec(
            dim2(),
            DatumSpec::Separable {
                tangential: crate::datum::TangentialProfile::Gaussian { amplitude: 1.0, width: 1.0 },
                normal: crate::datum::NormalProfile::Gaussian { center: 1.0, width: 0.5 },
            },
        )
        .unwrap();
        // the x_N^{3/2} cusp limits tensor quadrature to algebraic accuracy
        for (phi, tol) in [(smooth, 1e-10), (datum(), 1e-5)] {
            for (t, x) in [(0.05, pt(0.3, 0.4)), (0.5, pt(-1.0, 1.2)), (0.2, pt(0.0, 0.0))] {
                let (v, d) = phi.separable_evolution(&x, t).unwrap();
                assert_relative_eq!(apply_s1(&phi, t, &x, &quad()).unwrap(), v, epsilon = tol);
                assert_relative_eq!(apply_dxn_s1(&phi, t, &x, &quad()).unwrap(), d, epsilon = 10.0 * tol);
            }
        }
    }

    #[test]
    fn dxn_s1_matches_central_difference() {
        let phi = datum();
        let t = 0.2_f64;
        let h = 1e-3 * t.sqrt();
        let x = pt(0.2, 0.7);
        let up = phi.separable_evolution(&pt(0.2, 0.7 + h), t).unwrap().0;
        let dn = phi.separable_evolution(&pt(0.2, 0.7 - h), t).unwrap().0;
        let d = apply_dxn_s1(&phi, t, &x, &quad()).unwrap();
        assert_relative_eq!(d, (up - dn) / (2.0 * h), max_relative = 1e-6);
    }

    fn unit_field() -> SampledBoundaryField {
        let axis: Vec<f64> = (0..=200).map(|i| -1e4 + 100.0 * i as f64).collect();
        SampledBoundaryField::from_fn_1d(&axis, |_| 1.0).unwrap()
    }

    #[test]
    fn s2_of_constant_is_constant() {
        let psi = unit_field();
        for (t, z) in [(0.1, 0.0), (1.0, 0.5), (0.0, 2.0)] {
            let v = apply_s2(&psi, t, &pt(0.3, z), &quad()).unwrap();
            // truncation at |y'| = 1e4 loses 2(t+z)/(π·1e4)
            assert_relative_eq!(v, 1.0, epsilon = 3e-4);
        }
        assert!(apply_s2(&psi, 0.0, &pt(0.3, 0.0), &quad()).is_err());
    }

    fn bump(y: f64) -> f64 {
        if y.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - y * y)).exp()
        }
    }

    #[test]
    fn s2_shift_identity_and_direct_quadrature() {
        let axis: Vec<f64> = (0..=400).map(|i| -1.0 + 0.005 * i as f64).collect();
        let psi = SampledBoundaryField::from_fn_1d(&axis, bump).unwrap();
        let x = pt(0.4, 0.3);
        let a = apply_s2(&psi, 0.2, &x, &quad()).unwrap();
        let b = apply_s2(&psi, 0.5, &pt(0.4, 0.0), &quad()).unwrap();
        assert_eq!(a, b);
        // direct quadrature of the kernel integral, cell by cell over the support
        let direct: f64 = axis
            .windows(2)
            .flat_map(|w| crate::quadrature::gauss_panels(w[0], w[1], 2, 8))
            .map(|(y, wt)| wt * boundary_kernel(&[0.4 - y], 0.3, 0.2).unwrap() * psi.evaluate(&[y]))
            .sum();
        assert_relative_eq!(a, direct, epsilon = 1e-8);
    }

    fn constant_flux(value: f64) -> BoundaryTrajectory {
        let axis: Vec<f64> = (0..=400).map(|i| -2e4 + 100.0 * i as f64).collect();
        let times = vec![1e-3, 0.1, 1.0];
        let g = SampledBoundaryField::from_fn_1d(&axis, |_| value).unwrap();
        BoundaryTrajectory::new(times, vec![g.clone(), g.clone(), g]).unwrap()
    }

    #[test]
    fn w_and_f_for_constant_flux() {
        // g ≡ c: S₂ preserves constants, so w = c t and F = c
        let flux = constant_flux(2.0);
        let ts = SingularTimeSpec::new(0.5, 0.0, 8).unwrap();
        let w = compute_w(&flux, &pt(0.0, 0.4), 0.5, &ts, &quad()).unwrap();
        assert_relative_eq!(w, 1.0, epsilon = 1e-3);
        let tf = SingularTimeSpec::new(0.5, 0.5, 8).unwrap();
        let f = apply_f(&flux, &pt(0.0, 0.4), 0.5, &tf, &quad()).unwrap();
        assert_relative_eq!(f, 2.0, epsilon = 1e-3);
        assert!(apply_f(&flux, &pt(0.0, 0.0), 0.5, &tf, &quad()).is_err());
        let zero = constant_flux(0.0);
        assert_eq!(compute_w(&zero, &pt(0.0, 0.4), 0.5, &ts, &quad()).unwrap(), 0.0);
        assert_eq!(apply_f(&zero, &pt(0.0, 0.4), 0.5, &tf, &quad()).unwrap(), 0.0);
    }

    #[test]
    fn manufactured_cauchy_flux() {
        // g(y', s) = P(y', 0, a) for all s: F = P(x', x_N + a + t) minus nothing,
        // since ∂_t P-convolution telescopes; w = ∫_a^{a+t} P(x', x_N + σ) dσ
        let a = 0.3;
        let axis: Vec<f64> = (0..=8000).map(|i| -20.0 + 0.005 * i as f64).collect();
        let g = SampledBoundaryField::from_fn_1d(&axis, |y| a / (PI * (a * a + y * y))).unwrap();
        let flux = BoundaryTrajectory::new(vec![1e-4, 1.0], vec![g.clone(), g]).unwrap();
        let (x, z, t) = (0.5, 0.2, 0.4);
        let ts = SingularTimeSpec::new(0.5, 0.0, 8).unwrap();
        let w = compute_w(&flux, &pt(x, z), t, &ts, &quad()).unwrap();
        let lo = z + a;
        let hi = z + a + t;
        let exact = ((hi * hi + x * x) / (lo * lo + x * x)).ln() / (2.0 * PI);
        assert_relative_eq!(w, exact, max_relative = 1e-4);
        let tf = SingularTimeSpec::new(0.5, 0.5, 8).unwrap();
        let f = apply_f(&flux, &pt(x, z), t, &tf, &quad()).unwrap();
        assert_relative_eq!(f, hi / (PI * (hi * hi + x * x)), max_relative = 1e-4);
    }

    #[test]
    fn log_time_interpolation() {
        let axis = vec![0.0, 1.0];
        let a = SampledBoundaryField::from_fn_1d(&axis, |_| 1.0).unwrap();
        let b = SampledBoundaryField::from_fn_1d(&axis, |_| 3.0).unwrap();
        let tr = BoundaryTrajectory::new(vec![0.01, 1.0], vec![a, b]).unwrap();
        assert_relative_eq!(tr.at(0.1).evaluate(&[0.5]), 2.0, epsilon = 1e-12);
        assert_relative_eq!(tr.at(1e-5).evaluate(&[0.5]), 1.0);
        assert!(BoundaryTrajectory::new(vec![0.0], vec![tr.at(0.5)]).is_err());
    }
}
