use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fit::{fit_decay_exponent, log_times, FitResult};
use crate::error::Result;
use crate::kernels::{
    boundary_kernel, dirichlet_heat_kernel, dt_boundary_kernel, gauss_kernel, normal_derivative_kernel,
    normal_derivative_trace, HalfSpacePoint,
};
use crate::quadrature::{
    gauss_legendre, gauss_panels, integrate_boundary, integrate_time_singular, pairwise_sum, Scheme,
    SingularTimeSpec, SpatialQuadratureSpec,
};

/// Outcome of one named check; `error` is the largest observed deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub error: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, error: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            // NaN errors fail
            passed: error <= tolerance,
            error,
            tolerance,
            detail,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn pt(tangential: &[f64], height: f64) -> HalfSpacePoint {
    HalfSpacePoint::new_unchecked(tangential.to_vec(), height)
}

// Fixed sample set: moderate separations and times so that kernel values stay
// well above underflow in both N = 2 and N = 3.
const TIMES: [f64; 3] = [0.1, 1.0, 10.0];
const HEIGHT_PAIRS: [(f64, f64); 4] = [(0.3, 0.7), (1.0, 0.2), (0.05, 2.0), (2.5, 1.5)];
const SHIFTS: [f64; 3] = [0.0, 0.4, -1.3];

fn tangential_pair(n: usize, shift: f64) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..n - 1).map(|k| shift + 0.1 * k as f64).collect();
    let y: Vec<f64> = (0..n - 1).map(|k| -0.2 * k as f64).collect();
    (x, y)
}

/// Kernel identity suite: boundary vanishing, product factorization, boundary
/// trace of the normal derivative, the time derivative of the boundary kernel
/// and its normalization.
pub fn kernel_checks() -> Result<Vec<CheckResult>> {
    let mut vanish = 0.0_f64;
    let mut factor = 0.0_f64;
    let mut trace = 0.0_f64;
    let mut count = 0usize;
    for n in [2usize, 3] {
        for &t in &TIMES {
            for &(xn, yn) in &HEIGHT_PAIRS {
                for &shift in &SHIFTS {
                    let (xt, yt) = tangential_pair(n, shift);
                    let y = pt(&yt, yn);
                    vanish = vanish.max(dirichlet_heat_kernel(&pt(&xt, 0.0), &y, t)?.abs());
                    let d: Vec<f64> = xt.iter().zip(&yt).map(|(a, b)| a - b).collect();
                    let oracle =
                        gauss_kernel(&d, t)? * gauss_kernel(&[xn - yn], t)? * -(-xn * yn / t).exp_m1();
                    factor = factor.max(rel(dirichlet_heat_kernel(&pt(&xt, xn), &y, t)?, oracle));
                    let oracle = yn / t * gauss_kernel(&d, t)? * gauss_kernel(&[yn], t)?;
                    trace = trace
                        .max(rel(normal_derivative_kernel(&pt(&xt, 0.0), &y, t)?, oracle))
                        .max(rel(normal_derivative_trace(&xt, &y, t)?, oracle));
                    count += 1;
                }
            }
        }
    }
    let mut out = vec![
        CheckResult::new("boundary_vanishing", vanish, 0.0, format!("{count} point pairs, N in {{2,3}}")),
        CheckResult::new("factorization", factor, 1e-12, format!("{count} point pairs")),
        CheckResult::new("boundary_trace", trace, 1e-12, format!("{count} point pairs")),
    ];

    // central difference in t away from the zero crossing of the bracket
    let mut dt_err = 0.0_f64;
    let mut dt_count = 0usize;
    for n in [2usize, 3] {
        for &t in &[0.1, 0.5, 2.0] {
            for &xn in &[0.0, 0.5, 2.0] {
                for &r in &[0.0, 0.3, 1.0, 4.0] {
                    let xt: Vec<f64> = (0..n - 1).map(|k| if k == 0 { r } else { 0.5 * r }).collect();
                    let r2: f64 = xt.iter().map(|v| v * v).sum();
                    let s = xn + t;
                    let bracket = (r2 - (n - 1) as f64 * s * s) / (r2 + s * s);
                    if bracket.abs() < 0.1 {
                        continue;
                    }
                    let h = 1e-5 * t;
                    let fd = (boundary_kernel(&xt, xn, t + h)? - boundary_kernel(&xt, xn, t - h)?) / (2.0 * h);
                    dt_err = dt_err.max(rel(dt_boundary_kernel(&xt, xn, t)?, fd));
                    dt_count += 1;
                }
            }
        }
    }
    out.push(CheckResult::new(
        "dt_boundary_kernel_fd",
        dt_err,
        1e-6,
        format!("{dt_count} points with |bracket| >= 0.1"),
    ));

    let quad = SpatialQuadratureSpec::new(8.0, 96, Scheme::GaussLegendreComposite)?;
    let mut norm_err = 0.0_f64;
    for n in [2usize, 3] {
        for &xn in &[0.0, 1.0, 10.0] {
            for &t in &TIMES {
                let center = vec![0.0; n - 1];
                let mass = integrate_boundary(|y| boundary_kernel(y, xn, t).unwrap_or(f64::NAN), &center, xn + t, &quad)?;
                norm_err = norm_err.max((mass - 1.0).abs());
            }
        }
    }
    out.push(CheckResult::new(
        "boundary_kernel_normalization",
        norm_err,
        1e-6,
        "(x_N, t) in {0,1,10} x {0.1,1,10}, N in {2,3}".into(),
    ));
    out.push(semigroup_checks()?);
    Ok(out)
}

/// Smooth bump supported in `|y| < 1`.
pub(crate) fn bump(y: f64) -> f64 {
    if y.abs() < 1.0 {
        (-1.0 / (1.0 - y * y)).exp()
    } else {
        0.0
    }
}

/// `∫ P(x - y, x_N, t) g(y) dy` on the line via `y = x + σ tan θ`, `σ = x_N + t`.
///
/// The map turns the kernel's `|y|^{-2}` tail into a bounded integrand, so
/// the whole line is covered; with `support = Some((a, b))` only the angles
/// mapping into `[a, b]` are integrated.
fn line_s2(g: &dyn Fn(f64) -> f64, t: f64, height: f64, x: f64, support: Option<(f64, f64)>) -> Result<f64> {
    let sigma = height + t;
    let (lo, hi, panels, order) = match support {
        Some((a, b)) => (((a - x) / sigma).atan(), ((b - x) / sigma).atan(), 64, 16),
        None => (-0.5 * PI, 0.5 * PI, 512, 8),
    };
    let mut terms = Vec::new();
    for (th, wt) in gauss_panels(lo, hi, panels, order) {
        let (sin, cos) = th.sin_cos();
        let y = x + sigma * sin / cos;
        terms.push(wt * boundary_kernel(&[x - y], height, t)? * g(y) * sigma / (cos * cos));
    }
    Ok(pairwise_sum(&terms))
}

/// Semigroup and shift laws of the boundary evolution on a bump, N = 2.
fn semigroup_checks() -> Result<CheckResult> {
    let support = Some((-1.0, 1.0));
    let probes = [0.0, 0.5, 2.0];
    let mut peak = 0.0_f64;
    let mut diffs = Vec::new();
    for &t in &[0.1, 0.5] {
        for &t2 in &[0.1, 0.5] {
            for &x in &probes {
                let direct = line_s2(&bump, t + t2, 0.0, x, support)?;
                let inner = |y: f64| line_s2(&bump, t2, 0.0, y, support).unwrap_or(f64::NAN);
                let nested = line_s2(&inner, t, 0.0, x, None)?;
                // evolution for t at height t2 equals evolution for t + t2 on the boundary
                let shifted = line_s2(&bump, t, t2, x, support)?;
                peak = peak.max(direct.abs());
                diffs.push((nested - direct).abs().max((shifted - direct).abs()));
            }
        }
    }
    let err = diffs.iter().fold(0.0_f64, |m, d| m.max(d / peak));
    Ok(CheckResult::new(
        "semigroup_and_shift",
        err,
        1e-6,
        "bump datum, (t, t') in {0.1,0.5}^2, error relative to the peak".into(),
    ))
}

/// Quadrature suite: Gauss-Legendre exactness, time-singular examples and
/// the Gaussian normalization over the boundary.
pub fn quadrature_checks() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut gl = 0.0_f64;
    for n in [2usize, 4, 8, 16] {
        let (x, w) = gauss_legendre(n);
        for k in 0..2 * n {
            let terms: Vec<f64> = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).collect();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
            gl = gl.max((pairwise_sum(&terms) - exact).abs());
        }
    }
    out.push(CheckResult::new("gauss_legendre_exactness", gl, 1e-13, "degree < 2n, n in {2,4,8,16}".into()));

    let left = integrate_time_singular(|s| s.powf(-0.5), 1.0, &SingularTimeSpec::new(0.5, 0.0, 16)?)?;
    out.push(CheckResult::new("time_singular_left", (left - 2.0).abs(), 1e-8, format!("value {left}")));
    let both = integrate_time_singular(
        |s| s.powf(-0.5) * (1.0 - s).powf(-0.5),
        1.0,
        &SingularTimeSpec::new(0.5, 0.5, 16)?,
    )?;
    out.push(CheckResult::new("time_singular_beta", (both - PI).abs(), 1e-6, format!("value {both}")));
    let flat = integrate_time_singular(|_| 1.0, 2.0, &SingularTimeSpec::new(0.0, 0.0, 16)?)?;
    out.push(CheckResult::new("time_regular", (flat - 2.0).abs(), 1e-10, format!("value {flat}")));

    let quad = SpatialQuadratureSpec::new(8.0, 96, Scheme::GaussLegendreComposite)?;
    let mut gauss = 0.0_f64;
    for &t in &TIMES {
        for center in [vec![0.0], vec![0.3, -0.2]] {
            let m = integrate_boundary(
                |y| gauss_kernel(y, t).unwrap_or(f64::NAN),
                &center,
                (2.0 * t).sqrt(),
                &quad,
            )?;
            gauss = gauss.max((m - 1.0).abs());
        }
    }
    out.push(CheckResult::new("boundary_gaussian_mass", gauss, 1e-8, "t in {0.1,1,10}, N-1 in {1,2}".into()));
    Ok(out)
}

/// Decay fit of one moment integral `sup_x ∫ (|z|/t)^k Γ₁(z, t) y^{-j/2} dy`
/// with `z = x ± y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentFit {
    pub k: u32,
    pub j: u32,
    pub expected_slope: f64,
    pub fit: FitResult,
    pub samples: Vec<(f64, f64)>,
    pub passed: bool,
}

const MOMENT_POINTS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

fn moment_integral(k: u32, j: u32, x: f64, t: f64, sign: f64) -> Result<f64> {
    let g = |y: f64| {
        let z = x + sign * y;
        let w = (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
        (z.abs() / t).powi(k as i32) * w
    };
    // y = u^2 removes the y^{-1/2} singularity; the kink of |x - y| sits at u = √x
    let reach = x + 15.0 * t.sqrt();
    let lo = if sign < 0.0 { (x - 15.0 * t.sqrt()).max(0.0).sqrt() } else { 0.0 };
    let hi = if sign < 0.0 { reach.sqrt() } else { (15.0 * t.sqrt()).sqrt() };
    let pieces: Vec<(f64, f64)> = if sign < 0.0 {
        vec![(lo, x.sqrt()), (x.sqrt(), hi)]
    } else {
        vec![(lo, hi)]
    };
    let mut terms = Vec::new();
    for (a, b) in pieces {
        for (u, w) in gauss_panels(a, b, 64, 8) {
            terms.push(w * 2.0 * u.powi(1 - j as i32) * g(u * u));
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Moment bound slopes for `k, j ∈ {0, 1}` over the time grid, tolerance 0.05.
pub fn moment_bound_fits() -> Result<Vec<MomentFit>> {
    let times = log_times(0.1, 10.0, 5);
    let mut out = Vec::new();
    for k in 0..2u32 {
        for j in 0..2u32 {
            let mut samples = Vec::new();
            for &t in &times {
                let mut sup = 0.0_f64;
                for &x in &MOMENT_POINTS {
                    for sign in [-1.0, 1.0] {
                        sup = sup.max(moment_integral(k, j, x, t, sign)?);
                    }
                }
                samples.push((t, sup));
            }
            let fit = fit_decay_exponent(&samples)?;
            let expected = -(k as f64) / 2.0 - j as f64 / 4.0;
            out.push(MomentFit {
                k,
                j,
                expected_slope: expected,
                passed: (fit.slope - expected).abs() <= 0.05,
                fit,
                samples,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_integral_matches_closed_forms() {
        // k = j = 0 at x = 0, minus sign: half the Gaussian mass
        assert!((moment_integral(0, 0, 0.0, 1.0, -1.0).unwrap() - 0.5).abs() < 1e-12);
        // k = 1, j = 0, x = 0: ∫ y/t Γ₁(y) dy = 1/√(πt)
        let t = 0.3;
        let v = moment_integral(1, 0, 0.0, t, 1.0).unwrap();
        assert!((v - 1.0 / (PI * t).sqrt()).abs() < 1e-10);
        // j = 1, x = 0: ∫ y^{-1/2} Γ₁(y) dy = Γ(1/4) (4t)^{-1/4} / (2√π)
        let v = moment_integral(0, 1, 0.0, t, 1.0).unwrap();
        let exact = libm::tgamma(0.25) * (4.0 * t).powf(-0.25) / (2.0 * PI.sqrt());
        assert!((v - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn quadrature_suite_passes() {
        for c in quadrature_checks().unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn checks_report_nan_as_failure() {
        assert!(!CheckResult::new("x", f64::NAN, 1.0, String::new()).passed);
    }
}
