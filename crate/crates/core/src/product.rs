//! Product integration of one-dimensional kernels against piecewise-linear
//! (hat-function) interpolants.
//!
//! For a kernel `k` with antiderivatives `A0' = k` and `A1'(u) = u k(u)`, the
//! integral of `k(x - y)` against a linear piece is a closed-form combination
//! of `A0` and `A1`. On a uniform axis the resulting weights depend only on
//! node offsets, so every matrix is assembled from O(n) kernel evaluations:
//! Toeplitz for convolutions, Toeplitz minus Hankel for the odd reflection on
//! the half-line.

use ndarray::Array2;
use libm::{erf, erfc};
use std::f64::consts::PI;

/// One-dimensional kernel with the two antiderivatives used by product
/// integration. Only differences of antiderivatives are required.
pub trait ProductKernel {
    fn value(&self, u: f64) -> f64;
    /// `A0(u1) - A0(u2)`.
    fn a0_diff(&self, u1: f64, u2: f64) -> f64;
    /// `A1(u1) - A1(u2)`.
    fn a1_diff(&self, u1: f64, u2: f64) -> f64;
}

/// Heat kernel `(4πτ)^{-1/2} exp(-u²/4τ)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussKernel {
    tau: f64,
    scale: f64,
}

impl GaussKernel {
    pub fn new(tau: f64) -> Self {
        debug_assert!(tau > 0.0);
        Self {
            tau,
            scale: 1.0 / (2.0 * tau.sqrt()),
        }
    }
}

impl ProductKernel for GaussKernel {
    fn value(&self, u: f64) -> f64 {
        let z = u * self.scale;
        self.scale * (-z * z).exp() / PI.sqrt()
    }

    fn a0_diff(&self, u1: f64, u2: f64) -> f64 {
        let (z1, z2) = (u1 * self.scale, u2 * self.scale);
        // complementary forms keep tail differences accurate
        if z1 > 0.0 && z2 > 0.0 {
            0.5 * (erfc(z2) - erfc(z1))
        } else if z1 < 0.0 && z2 < 0.0 {
            0.5 * (erfc(-z1) - erfc(-z2))
        } else {
            0.5 * (erf(z1) - erf(z2))
        }
    }

    fn a1_diff(&self, u1: f64, u2: f64) -> f64 {
        -2.0 * self.tau * (self.value(u1) - self.value(u2))
    }
}

/// Cauchy kernel `σ / (π(σ² + u²))`: the boundary kernel in one tangential
/// dimension at shifted time `σ`.
#[derive(Debug, Clone, Copy)]
pub struct CauchyKernel {
    sigma: f64,
}

impl CauchyKernel {
    pub fn new(sigma: f64) -> Self {
        debug_assert!(sigma > 0.0);
        Self { sigma }
    }
}

fn atan_diff(u1: f64, u2: f64, s: f64) -> f64 {
    let den = s * s + u1 * u2;
    if den > 0.0 {
        (s * (u1 - u2) / den).atan()
    } else {
        (u1 / s).atan() - (u2 / s).atan()
    }
}

fn log_ratio(u1: f64, u2: f64, s: f64) -> f64 {
    // ln((s² + u1²) / (s² + u2²))
    ((u1 - u2) * (u1 + u2) / (s * s + u2 * u2)).ln_1p()
}

impl ProductKernel for CauchyKernel {
    fn value(&self, u: f64) -> f64 {
        let s = self.sigma;
        s / (PI * (s * s + u * u))
    }

    fn a0_diff(&self, u1: f64, u2: f64) -> f64 {
        atan_diff(u1, u2, self.sigma) / PI
    }

    fn a1_diff(&self, u1: f64, u2: f64) -> f64 {
        self.sigma / (2.0 * PI) * log_ratio(u1, u2, self.sigma)
    }
}

/// `∂_σ` of the Cauchy kernel, `(u² - σ²) / (π(σ² + u²)²)`.
#[derive(Debug, Clone, Copy)]
pub struct CauchyRateKernel {
    sigma: f64,
}

impl CauchyRateKernel {
    pub fn new(sigma: f64) -> Self {
        debug_assert!(sigma > 0.0);
        Self { sigma }
    }
}

impl ProductKernel for CauchyRateKernel {
    fn value(&self, u: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let d = s2 + u * u;
        (u * u - s2) / (PI * d * d)
    }

    fn a0_diff(&self, u1: f64, u2: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        -(u1 / (s2 + u1 * u1) - u2 / (s2 + u2 * u2)) / PI
    }

    fn a1_diff(&self, u1: f64, u2: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        log_ratio(u1, u2, self.sigma) / (2.0 * PI) + s2 / PI * (1.0 / (s2 + u1 * u1) - 1.0 / (s2 + u2 * u2))
    }
}

/// Time-integrated Cauchy kernel `∫_0^Δ σ/(π(σ²+u²)) dσ = ln(1 + Δ²/u²)/(2π)`.
#[derive(Debug, Clone, Copy)]
pub struct CauchyIntegralKernel {
    delta: f64,
}

impl CauchyIntegralKernel {
    pub fn new(delta: f64) -> Self {
        debug_assert!(delta > 0.0);
        Self { delta }
    }

    fn a0(&self, u: f64) -> f64 {
        let d = self.delta;
        let log_term = if u == 0.0 { 0.0 } else { 0.5 * u * (d * d / (u * u)).ln_1p() };
        (d * (u / d).atan() + log_term) / PI
    }

    fn a1(&self, u: f64) -> f64 {
        let d2 = self.delta * self.delta;
        let tail = if u == 0.0 { 0.0 } else { u * u * (d2 / (u * u)).ln_1p() };
        (d2 * (d2 + u * u).ln() + tail) / (4.0 * PI)
    }
}

impl ProductKernel for CauchyIntegralKernel {
    fn value(&self, u: f64) -> f64 {
        (self.delta * self.delta / (u * u)).ln_1p() / (2.0 * PI)
    }

    fn a0_diff(&self, u1: f64, u2: f64) -> f64 {
        self.a0(u1) - self.a0(u2)
    }

    fn a1_diff(&self, u1: f64, u2: f64) -> f64 {
        self.a1(u1) - self.a1(u2)
    }
}

/// First time moment of the Cauchy kernel,
/// `∫_0^Δ σ²/(π(σ²+u²)) dσ = (Δ - |u| atan(Δ/|u|))/π`.
#[derive(Debug, Clone, Copy)]
pub struct CauchyMomentKernel {
    delta: f64,
}

impl CauchyMomentKernel {
    pub fn new(delta: f64) -> Self {
        debug_assert!(delta > 0.0);
        Self { delta }
    }

    fn a0(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let d = self.delta;
        (d * u + u.signum() * 0.5 * PI * d * d - (d * d + u * u) * (d / u).atan()) / (2.0 * PI)
    }

    fn a1(&self, u: f64) -> f64 {
        let d = self.delta;
        let a = u.abs();
        (d * d * d * (d * d + u * u).ln() + 2.0 * d * u * u - 2.0 * a * a * a * d.atan2(a)) / (6.0 * PI)
    }
}

impl ProductKernel for CauchyMomentKernel {
    fn value(&self, u: f64) -> f64 {
        let a = u.abs();
        (self.delta - a * self.delta.atan2(a)) / PI
    }

    fn a0_diff(&self, u1: f64, u2: f64) -> f64 {
        self.a0(u1) - self.a0(u2)
    }

    fn a1_diff(&self, u1: f64, u2: f64) -> f64 {
        self.a1(u1) - self.a1(u2)
    }
}

/// `∫_{-h}^{0} k(u - y)(1 + y/h) dy`: left half of a hat centred at 0.
pub fn left_piece<K: ProductKernel>(k: &K, u: f64, h: f64) -> f64 {
    ((u + h) * k.a0_diff(u + h, u) - k.a1_diff(u + h, u)) / h
}

/// `∫_{0}^{h} k(u - y)(1 - y/h) dy`: right half of a hat centred at 0.
pub fn right_piece<K: ProductKernel>(k: &K, u: f64, h: f64) -> f64 {
    -((u - h) * k.a0_diff(u, u - h) - k.a1_diff(u, u - h)) / h
}

/// `d/du` of [`left_piece`].
pub fn left_piece_deriv<K: ProductKernel>(k: &K, u: f64, h: f64) -> f64 {
    k.a0_diff(u + h, u) / h - k.value(u)
}

/// `d/du` of [`right_piece`].
pub fn right_piece_deriv<K: ProductKernel>(k: &K, u: f64, h: f64) -> f64 {
    k.value(u) - k.a0_diff(u, u - h) / h
}

/// `∫ k(x - y) ℓ_j(y) dy` for the hat `ℓ_j` of node `j` on a (possibly
/// non-uniform) axis; end hats are one-sided.
pub fn hat_weight<K: ProductKernel>(k: &K, x: f64, nodes: &[f64], j: usize) -> f64 {
    let u = x - nodes[j];
    let mut w = 0.0;
    if j > 0 {
        w += left_piece(k, u, nodes[j] - nodes[j - 1]);
    }
    if j + 1 < nodes.len() {
        w += right_piece(k, u, nodes[j + 1] - nodes[j]);
    }
    w
}

/// `∫ k(x - y) f(y) dy` for the piecewise-linear interpolant of `(nodes, values)`,
/// taken as zero outside `[nodes[0], nodes[n-1]]`.
pub fn convolve_at<K: ProductKernel>(k: &K, x: f64, nodes: &[f64], values: &[f64]) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| v * hat_weight(k, x, nodes, j))
        .sum()
}

/// Offset tables `L(mh), R(mh)` for `m ∈ [-(span-1), span-1]`.
struct OffsetTable {
    span: usize,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl OffsetTable {
    fn new(span: usize, h: f64, f_left: impl Fn(f64) -> f64, f_right: impl Fn(f64) -> f64) -> Self {
        let count = 2 * span - 1;
        let mut left = Vec::with_capacity(count);
        let mut right = Vec::with_capacity(count);
        for idx in 0..count {
            let u = (idx as f64 - (span as f64 - 1.0)) * h;
            left.push(f_left(u));
            right.push(f_right(u));
        }
        Self { span, left, right }
    }

    fn at(&self, m: isize) -> (f64, f64) {
        let idx = (m + self.span as isize - 1) as usize;
        (self.left[idx], self.right[idx])
    }
}

/// Convolution matrix `W[i, j] = ∫ k(x_i - y) ℓ_j(y) dy` on a uniform axis of
/// `n` nodes and spacing `h`.
pub fn convolution_matrix<K: ProductKernel>(k: &K, n: usize, h: f64) -> Array2<f64> {
    let table = OffsetTable::new(n, h, |u| left_piece(k, u, h), |u| right_piece(k, u, h));
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (l, r) = table.at(i as isize - j as isize);
        match j {
            0 => r,
            _ if j == n - 1 => l,
            _ => l + r,
        }
    })
}

/// Half-line matrices for the odd reflection `k(x - y) - k(x + y)` on the
/// uniform axis `x_j = j h`, `j < n`: values and their `x`-derivatives.
pub fn reflected_matrices<K: ProductKernel>(k: &K, n: usize, h: f64) -> (Array2<f64>, Array2<f64>) {
    let span = 2 * n;
    let val = OffsetTable::new(span, h, |u| left_piece(k, u, h), |u| right_piece(k, u, h));
    let der = OffsetTable::new(span, h, |u| left_piece_deriv(k, u, h), |u| right_piece_deriv(k, u, h));
    let build = |t: &OffsetTable| {
        Array2::from_shape_fn((n, n), |(i, j)| {
            let (dl, dr) = t.at(i as isize - j as isize);
            let (rl, rr) = t.at((i + j) as isize);
            // the reflected image of a hat swaps its left and right pieces
            match j {
                0 => dr - rl,
                _ if j == n - 1 => dl - rr,
                _ => (dl + dr) - (rl + rr),
            }
        })
    };
    (build(&val), build(&der))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_panels;
    use approx::assert_relative_eq;

    fn brute<K: ProductKernel>(k: &K, x: f64, nodes: &[f64], j: usize) -> f64 {
        // reference: Gauss panels on each linear piece
        let mut s = 0.0;
        let hat = |y: f64| {
            if j > 0 && y <= nodes[j] {
                (y - nodes[j - 1]) / (nodes[j] - nodes[j - 1])
            } else if j + 1 < nodes.len() && y >= nodes[j] {
                (nodes[j + 1] - y) / (nodes[j + 1] - nodes[j])
            } else {
                0.0
            }
        };
        let lo = if j > 0 { nodes[j - 1] } else { nodes[j] };
        let hi = if j + 1 < nodes.len() { nodes[j + 1] } else { nodes[j] };
        for (a, b) in [(lo, nodes[j]), (nodes[j], hi)] {
            if b > a {
                for (y, w) in gauss_panels(a, b, 64, 8) {
                    s += w * k.value(x - y) * hat(y);
                }
            }
        }
        s
    }

    #[test]
    fn hat_weights_match_brute_force() {
        let nodes = [0.0, 0.1, 0.25, 0.3, 0.7];
        for x in [-0.4, 0.0, 0.12, 0.3, 1.1] {
            for j in 0..nodes.len() {
                let g = GaussKernel::new(0.01);
                assert_relative_eq!(hat_weight(&g, x, &nodes, j), brute(&g, x, &nodes, j), epsilon = 1e-13);
                let c = CauchyKernel::new(0.05);
                assert_relative_eq!(hat_weight(&c, x, &nodes, j), brute(&c, x, &nodes, j), epsilon = 1e-12);
                let d = CauchyRateKernel::new(0.2);
                assert_relative_eq!(hat_weight(&d, x, &nodes, j), brute(&d, x, &nodes, j), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn time_integrated_kernels_match_time_quadrature() {
        // J(Δ) = ∫_0^Δ S₂(σ) dσ and K(Δ) = ∫_0^Δ σ S₂(σ) dσ on hat functions
        let nodes = [-0.3, -0.1, 0.0, 0.2, 0.45];
        let delta = 0.2;
        let j_kernel = CauchyIntegralKernel::new(delta);
        let k_kernel = CauchyMomentKernel::new(delta);
        for x in [-0.5, -0.1, 0.05, 0.3, 2.0] {
            for j in 0..nodes.len() {
                let rule = crate::quadrature::singular_interval_rule(0.0, delta, true, false, 64);
                let (mut ji, mut ki) = (0.0, 0.0);
                for (s, w) in rule {
                    let h = hat_weight(&CauchyKernel::new(s), x, &nodes, j);
                    ji += w * h;
                    ki += w * s * h;
                }
                assert_relative_eq!(hat_weight(&j_kernel, x, &nodes, j), ji, epsilon = 1e-9);
                assert_relative_eq!(hat_weight(&k_kernel, x, &nodes, j), ki, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn piece_derivatives_match_differences() {
        let k = GaussKernel::new(0.03);
        let h = 0.1;
        for u in [-0.3, -0.05, 0.0, 0.07, 0.4] {
            let e = 1e-6;
            let fl = (left_piece(&k, u + e, h) - left_piece(&k, u - e, h)) / (2.0 * e);
            let fr = (right_piece(&k, u + e, h) - right_piece(&k, u - e, h)) / (2.0 * e);
            assert_relative_eq!(left_piece_deriv(&k, u, h), fl, epsilon = 1e-7);
            assert_relative_eq!(right_piece_deriv(&k, u, h), fr, epsilon = 1e-7);
        }
    }

    #[test]
    fn convolution_reproduces_linear_data_in_the_interior() {
        let n = 201;
        let h = 0.05;
        let w = convolution_matrix(&GaussKernel::new(0.01), n, h);
        let x: Vec<f64> = (0..n).map(|i| -5.0 + i as f64 * h).collect();
        let f: Vec<f64> = x.iter().map(|v| 2.0 + 0.5 * v).collect();
        for i in 60..140 {
            let s: f64 = (0..n).map(|j| w[[i, j]] * f[j]).sum();
            assert_relative_eq!(s, f[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn reflected_matrices_match_brute_force() {
        let (n, h, tau) = (40, 0.05, 0.02);
        let k = GaussKernel::new(tau);
        let (v, d) = reflected_matrices(&k, n, h);
        assert!(v.row(0).iter().all(|x| x.abs() < 1e-15));
        let nodes: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
        let hat = |j: usize, y: f64| (1.0 - (y - nodes[j]).abs() / h).max(0.0);
        for j in [0, 1, 7, n - 1] {
            let lo = nodes[j.saturating_sub(1)];
            let hi = nodes[(j + 1).min(n - 1)];
            let quad = gauss_panels(lo, hi, 64, 8);
            // boundary derivative row: weight y/τ Γ₁(y)
            let flux: f64 = quad.iter().map(|&(y, w)| w * y / tau * k.value(y) * hat(j, y)).sum();
            assert_relative_eq!(d[[0, j]], flux, epsilon = 1e-12);
            for i in [3, 20] {
                let x = nodes[i];
                let val: f64 = quad.iter().map(|&(y, w)| w * (k.value(x - y) - k.value(x + y)) * hat(j, y)).sum();
                assert_relative_eq!(v[[i, j]], val, epsilon = 1e-12);
            }
        }
    }
}
