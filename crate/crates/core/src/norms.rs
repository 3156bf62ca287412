//! Lebesgue norms on sampled half-space and boundary grids, the weighted norm
//! `‖f‖_{L^q_α}` with weight `h(x_N)^{-α}`, exponent bookkeeping, and the
//! damped solution-space norm `sup_t e^{-Mt} E[v](t)`.

use ndarray::{ArrayD, ArrayView2, Dimension as _, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Dimension, HalfSpacePoint};
use crate::quadrature::pairwise_sum;

/// `1/r` with `1/∞ = 0`.
pub fn reciprocal(r: f64) -> f64 {
    if r.is_infinite() {
        0.0
    } else {
        1.0 / r
    }
}

/// Boundary weight `h(x_N) = x_N / (x_N + 1)`.
pub fn weight_h(x_height: f64) -> Result<f64> {
    if !(x_height >= 0.0) {
        return Err(Error::Domain(format!("weight_h needs x_N >= 0, got {x_height}")));
    }
    if x_height.is_infinite() {
        return Ok(1.0);
    }
    Ok(x_height / (x_height + 1.0))
}

/// `α(r) = (N-1)(1/q - 1/r) + 1/q`.
pub fn alpha_of(n: Dimension, q: f64, r: f64) -> Result<f64> {
    if !(q >= 1.0) || !(r >= q) {
        return Err(Error::Domain(format!("alpha_of needs 1 <= q <= r, got q={q}, r={r}")));
    }
    let m = n.boundary() as f64;
    Ok(m * (reciprocal(q) - reciprocal(r)) + reciprocal(q))
}

/// Exponents `(N, q, p)` with the set of boundary exponents `r ∈ [q, p]` over
/// which the solution functional takes its supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedExponentSet {
    pub dim: Dimension,
    pub q: f64,
    pub p: f64,
    pub r_values: Vec<f64>,
}

impl WeightedExponentSet {
    /// Exponent set with the default `r`-set `{q, r_mid, p}`, where `r_mid` is
    /// the harmonic midpoint `1/r_mid = (1/q + 1/p)/2` (finite even when `p = ∞`).
    pub fn new(dim: Dimension, q: f64, p: f64) -> Result<Self> {
        let mid = 1.0 / (0.5 * (reciprocal(q) + reciprocal(p)));
        let mut r_values = vec![q, mid, p];
        r_values.dedup();
        Self::with_r_values(dim, q, p, r_values)
    }

    pub fn with_r_values(dim: Dimension, q: f64, p: f64, r_values: Vec<f64>) -> Result<Self> {
        let set = Self { dim, q, p, r_values };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, q, p) = (self.dim.get() as f64, self.q, self.p);
        if !(q >= 1.0) {
            return Err(Error::Config(format!("q must be >= 1, got {q}")));
        }
        if q.is_infinite() {
            if !p.is_infinite() {
                return Err(Error::Config("q = ∞ requires p = ∞".into()));
            }
        } else if !(p > n * q / (n - 1.0)) {
            return Err(Error::Config(format!(
                "inadmissible exponents: need p > Nq/(N-1) = {}, got p = {p}",
                n * q / (n - 1.0)
            )));
        }
        if self.r_values.is_empty() {
            return Err(Error::Config("empty r-set".into()));
        }
        for &r in &self.r_values {
            if !(r >= q && r <= p) {
                return Err(Error::Config(format!("r = {r} outside [q, p] = [{q}, {p}]")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self, r: f64) -> Result<f64> {
        alpha_of(self.dim, self.q, r)
    }

    /// `α(p)`, the weight exponent of the initial-data space.
    pub fn alpha_p(&self) -> f64 {
        alpha_of(self.dim, self.q, self.p).expect("validated exponent set")
    }

    /// Time exponent `(N/2)(1/q - 1/p)` of the solution functional.
    pub fn time_exponent(&self) -> f64 {
        0.5 * self.dim.get() as f64 * (reciprocal(self.q) - reciprocal(self.p))
    }

    /// `(N-1)(1/q - 1/p)`: the boundary-decay threshold for `x_N^λ` data.
    pub fn membership_threshold(&self) -> f64 {
        self.dim.boundary() as f64 * (reciprocal(self.q) - reciprocal(self.p))
    }
}

/// `true` iff `λ > (N-1)(1/q - 1/p)`, i.e. `Φ(x') x_N^λ` near the boundary lies
/// in `L^q_{α(p)}`.
pub fn membership_criterion(lambda: f64, exps: &WeightedExponentSet) -> bool {
    lambda > exps.membership_threshold()
}

fn check_axes(axes: &[Vec<f64>], shape: &[usize]) -> Result<()> {
    if axes.len() != shape.len() {
        return Err(Error::Config(format!(
            "field has {} axes but values have rank {}",
            axes.len(),
            shape.len()
        )));
    }
    for (k, (a, &s)) in axes.iter().zip(shape).enumerate() {
        if a.len() != s {
            return Err(Error::Config(format!("axis {k} has {} nodes, values have {s}", a.len())));
        }
        if a.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!("axis {k} is not strictly increasing")));
        }
    }
    Ok(())
}

fn check_values(values: &ArrayD<f64>) -> Result<()> {
    if let Some((idx, v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            value: *v,
            location: format!("sample {:?}", idx.slice()),
        });
    }
    Ok(())
}

/// Multilinear interpolation on a tensor grid; zero outside the sampled box.
fn multilinear(axes: &[Vec<f64>], values: &ArrayD<f64>, y: &[f64]) -> f64 {
    debug_assert_eq!(y.len(), axes.len());
    let mut corners: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    for (axis, &c) in axes.iter().zip(y) {
        let (lo, hi) = (axis[0], *axis.last().unwrap());
        if !(c >= lo && c <= hi) {
            return 0.0;
        }
        let k = match axis.partition_point(|&a| a <= c) {
            0 => 0,
            k if k >= axis.len() => axis.len() - 2,
            k => k - 1,
        };
        if axis.len() == 1 {
            corners.iter_mut().for_each(|(idx, _)| idx.push(0));
            continue;
        }
        let theta = (c - axis[k]) / (axis[k + 1] - axis[k]);
        corners = corners
            .into_iter()
            .flat_map(|(idx, w)| {
                let mut a = idx.clone();
                a.push(k);
                let mut b = idx;
                b.push(k + 1);
                [(a, w * (1.0 - theta)), (b, w * theta)]
            })
            .collect();
    }
    corners
        .into_iter()
        .map(|(idx, w)| if w == 0.0 { 0.0 } else { w * values[IxDyn(&idx)] })
        .sum()
}

/// Samples of a function on a tensor grid of the truncated half-space.
///
/// The last axis is `x_N` (first node `>= 0`); the others are tangential.
/// Values are stored row-major with `x_N` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    axes: Vec<Vec<f64>>,
    values: ArrayD<f64>,
}

impl SampledField {
    pub fn new(axes: Vec<Vec<f64>>, values: ArrayD<f64>) -> Result<Self> {
        if axes.len() < 2 {
            return Err(Error::Config("a half-space field needs at least two axes".into()));
        }
        check_axes(&axes, values.shape())?;
        if axes.last().unwrap()[0] < 0.0 {
            return Err(Error::Config("normal axis must start at x_N >= 0".into()));
        }
        check_values(&values)?;
        Ok(Self { axes, values })
    }

    /// Samples `f(x', x_N)` on a two-dimensional grid.
    pub fn from_fn_2d(tangential: &[f64], normal: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = ArrayD::zeros(IxDyn(&[tangential.len(), normal.len()]));
        for (i, &x) in tangential.iter().enumerate() {
            for (j, &z) in normal.iter().enumerate() {
                values[[i, j]] = f(x, z);
            }
        }
        Self::new(vec![tangential.to_vec(), normal.to_vec()], values)
    }

    pub(crate) fn from_parts_unchecked(axes: Vec<Vec<f64>>, values: ArrayD<f64>) -> Self {
        Self { axes, values }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            axes: self.axes.clone(),
            values: ArrayD::zeros(self.values.raw_dim()),
        }
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn normal_axis(&self) -> &[f64] {
        self.axes.last().unwrap()
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Two-dimensional view `(x', x_N)`; fails for `N != 2`.
    pub fn view_2d(&self) -> Result<ArrayView2<'_, f64>> {
        self.values
            .view()
            .into_dimensionality()
            .map_err(|_| Error::Config(format!("expected a 2-D field, got rank {}", self.dim())))
    }

    /// Extents `[(min, max)]` of every axis.
    pub fn extents(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a[0], *a.last().unwrap())).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            axes: self.axes.clone(),
            values: &self.values * c,
        }
    }

    /// `self + c * other` on identical grids.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Result<Self> {
        if self.axes != other.axes {
            return Err(Error::Config("fields live on different grids".into()));
        }
        Ok(Self {
            axes: self.axes.clone(),
            values: &self.values + &(&other.values * c),
        })
    }

    /// Multilinear interpolation at `(x', x_N)`; zero outside the sampled box.
    pub fn evaluate(&self, x: &HalfSpacePoint) -> f64 {
        let mut y = x.tangential.clone();
        y.push(x.height);
        multilinear(&self.axes, &self.values, &y)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Samples of a function on a tensor grid of the boundary hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBoundaryField {
    axes: Vec<Vec<f64>>,
    values: ArrayD<f64>,
}

impl SampledBoundaryField {
    pub fn new(axes: Vec<Vec<f64>>, values: ArrayD<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Config("a boundary field needs at least one axis".into()));
        }
        check_axes(&axes, values.shape())?;
        check_values(&values)?;
        Ok(Self { axes, values })
    }

    pub fn from_fn_1d(axis: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = ArrayD::from_shape_vec(IxDyn(&[axis.len()]), axis.iter().map(|&x| f(x)).collect())
            .expect("shape matches");
        Self::new(vec![axis.to_vec()], values)
    }

    pub(crate) fn from_parts_unchecked(axes: Vec<Vec<f64>>, values: ArrayD<f64>) -> Self {
        Self { axes, values }
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn values(&self) -> &ArrayD<f64> {
        &self.values
    }

    /// Values as a flat slice for one-dimensional boundaries.
    pub fn as_slice_1d(&self) -> Result<&[f64]> {
        if self.axes.len() != 1 {
            return Err(Error::Config("expected a one-dimensional boundary field".into()));
        }
        Ok(self.values.as_slice().expect("standard layout"))
    }

    /// Multilinear interpolation; zero outside the sampled box.
    pub fn evaluate(&self, y: &[f64]) -> f64 {
        multilinear(&self.axes, &self.values, y)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            axes: self.axes.clone(),
            values: &self.values * c,
        }
    }
}

/// Trapezoid weights of a (possibly non-uniform) axis.
pub fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    if n < 2 {
        return vec![1.0; n];
    }
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let h = axis[k + 1] - axis[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

fn tensor_lp(axes: &[Vec<f64>], values: &ArrayD<f64>, r: f64) -> Result<f64> {
    if !(r >= 1.0) {
        return Err(Error::Domain(format!("norm exponent must be >= 1, got {r}")));
    }
    check_values(values)?;
    if r.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let weights: Vec<Vec<f64>> = axes.iter().map(|a| trapezoid_weights(a)).collect();
    let terms: Vec<f64> = values
        .indexed_iter()
        .map(|(idx, v)| {
            let w: f64 = idx.slice().iter().enumerate().map(|(d, &i)| weights[d][i]).product();
            w * v.abs().powf(r)
        })
        .collect();
    Ok(pairwise_sum(&terms).powf(1.0 / r))
}

/// Objects carrying samples on a tensor grid.
pub trait Sampled {
    fn sample_axes(&self) -> &[Vec<f64>];
    fn sample_values(&self) -> &ArrayD<f64>;
}

impl Sampled for SampledField {
    fn sample_axes(&self) -> &[Vec<f64>] {
        &self.axes
    }
    fn sample_values(&self) -> &ArrayD<f64> {
        &self.values
    }
}

impl Sampled for SampledBoundaryField {
    fn sample_axes(&self) -> &[Vec<f64>] {
        &self.axes
    }
    fn sample_values(&self) -> &ArrayD<f64> {
        &self.values
    }
}

/// `L^r` norm over the sampled box (trapezoid rule; maximum for `r = ∞`).
pub fn lp_norm<F: Sampled + ?Sized>(f: &F, r: f64) -> Result<f64> {
    tensor_lp(f.sample_axes(), f.sample_values(), r)
}

/// Cells `[b_j, b_{j+1}]` with midpoints and the value rule used in the
/// weighted norm.
///
/// If the normal axis starts at `x_N = 0` each cell spans two nodes and its
/// value is the average of the endpoint samples (midpoint rule). Otherwise the
/// nodes are taken as cell centres, the first cell starting at `x_N = 0`. In
/// both cases the weight is evaluated at a cell midpoint, never at `x_N = 0`.
enum NormalCells {
    NodeCells { mids: Vec<f64>, lengths: Vec<f64> },
    CenteredCells { lengths: Vec<f64> },
}

fn normal_cells(axis: &[f64]) -> NormalCells {
    if axis[0] == 0.0 {
        let mids = axis.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let lengths = axis.windows(2).map(|w| w[1] - w[0]).collect();
        NormalCells::NodeCells { mids, lengths }
    } else {
        let n = axis.len();
        let mut bounds = Vec::with_capacity(n + 1);
        bounds.push(0.0);
        for k in 1..n {
            bounds.push(0.5 * (axis[k - 1] + axis[k]));
        }
        let last = axis[n - 1];
        bounds.push(last + (last - bounds[n - 1]));
        let lengths = bounds.windows(2).map(|w| w[1] - w[0]).collect();
        NormalCells::CenteredCells { lengths }
    }
}

/// Weighted norm `(∫ |f|^q h(x_N)^{-αq} dx)^{1/q}` over the sampled box; the
/// plain sup-norm when `q = ∞`.
pub fn weighted_lq_norm(f: &SampledField, q: f64, alpha: f64) -> Result<f64> {
    if !(q >= 1.0) || !(alpha >= 0.0) {
        return Err(Error::Domain(format!("weighted norm needs q >= 1 and alpha >= 0, got ({q}, {alpha})")));
    }
    check_values(&f.values)?;
    if q.is_infinite() {
        return Ok(f.max_abs());
    }
    let n = f.axes.len();
    let tangential_weights: Vec<Vec<f64>> = f.axes[..n - 1].iter().map(|a| trapezoid_weights(a)).collect();
    let normal = f.normal_axis();
    let nz = normal.len();
    let cells = normal_cells(normal);
    let rows = f.values.len() / nz;
    let flat = f.values.as_standard_layout();
    let flat = flat.as_slice().expect("standard layout");
    let tangential_shape: Vec<usize> = f.values.shape()[..n - 1].to_vec();
    let mut terms = Vec::with_capacity(f.values.len());
    for row in 0..rows {
        // unravel the tangential multi-index of this row
        let mut rem = row;
        let mut wt = 1.0;
        for d in (0..n - 1).rev() {
            let i = rem % tangential_shape[d];
            rem /= tangential_shape[d];
            wt *= tangential_weights[d][i];
        }
        let line = &flat[row * nz..(row + 1) * nz];
        let push = |value: f64, mid: f64, len: f64, j: usize, terms: &mut Vec<f64>| -> Result<()> {
            if value == 0.0 {
                return Ok(());
            }
            let h = mid / (mid + 1.0);
            let weight = h.powf(-alpha * q);
            let term = wt * len * value.abs().powf(q) * weight;
            if !term.is_finite() {
                return Err(Error::Overflow {
                    location: format!("tangential row {row}, normal sample {j} (x_N = {mid:e})"),
                });
            }
            terms.push(term);
            Ok(())
        };
        match &cells {
            NormalCells::NodeCells { mids, lengths } => {
                for j in 0..nz - 1 {
                    let value = 0.5 * (line[j] + line[j + 1]);
                    push(value, mids[j], lengths[j], j, &mut terms)?;
                }
            }
            NormalCells::CenteredCells { lengths } => {
                for j in 0..nz {
                    push(line[j], normal[j], lengths[j], j, &mut terms)?;
                }
            }
        }
    }
    let total = pairwise_sum(&terms);
    if !total.is_finite() {
        return Err(Error::Overflow {
            location: "weighted sum".into(),
        });
    }
    Ok(total.powf(1.0 / q))
}

/// Per-time norms of a trajectory `v` entering the solution functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    /// `‖v(t)‖_{L^p}` over the half-space.
    pub value_lp: f64,
    /// `‖∂_{x_N} v(t)‖_{L^p}` over the half-space.
    pub normal_derivative_lp: f64,
    /// `(r, |∂_{x_N} v(·,0,t)|_{L^r})` on the boundary.
    pub boundary_flux_lr: Vec<(f64, f64)>,
}

/// `E[v](t) = t^{(N/2)(1/q-1/p)} [‖v‖_p + t^{1/2} ‖∂_N v‖_p] + max_r t^{1/2} |∂_N v|_r`.
pub fn energy_functional(record: &NormRecord, exps: &WeightedExponentSet) -> Result<f64> {
    if record.boundary_flux_lr.is_empty() {
        return Err(Error::Config("empty r-set in energy functional".into()));
    }
    let t = record.t;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("energy functional needs t > 0, got {t}")));
    }
    let components = [record.value_lp, record.normal_derivative_lp];
    if components
        .iter()
        .chain(record.boundary_flux_lr.iter().map(|(_, v)| v))
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            value: f64::NAN,
            location: format!("norm record at t = {t}"),
        });
    }
    let sqrt_t = t.sqrt();
    let first = t.powf(exps.time_exponent()) * (record.value_lp + sqrt_t * record.normal_derivative_lp);
    let sup = record
        .boundary_flux_lr
        .iter()
        .map(|&(_, v)| sqrt_t * v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(first + sup)
}

/// Horizon `T > 0` and damping `M >= 1` of the solution-space norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedNormParams {
    pub horizon: f64,
    pub damping: f64,
}

impl DampedNormParams {
    pub fn new(horizon: f64, damping: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!("horizon T must be > 0, got {horizon}")));
        }
        if !(damping >= 1.0) || !damping.is_finite() {
            return Err(Error::Config(format!("damping M must be >= 1, got {damping}")));
        }
        Ok(Self { horizon, damping })
    }

    #[cfg(test)]
    pub(crate) fn unchecked(horizon: f64, damping: f64) -> Self {
        Self { horizon, damping }
    }
}

/// `sup_t e^{-Mt} E(t)` over the sampled times.
pub fn xtm_norm(energies: &[(f64, f64)], params: &DampedNormParams) -> Result<f64> {
    if energies.is_empty() {
        return Err(Error::Config("xtm_norm of an empty trajectory".into()));
    }
    let mut sup: f64 = 0.0;
    for &(t, e) in energies {
        if !(t > 0.0) || t > params.horizon * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("sample time {t} outside (0, T = {}]", params.horizon)));
        }
        sup = sup.max((-params.damping * t).exp() * e);
    }
    Ok(sup)
}

/// Outcome of refining the `x_N` grid towards the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementClassification {
    /// Weighted norms at successive refinement levels.
    pub norms: Vec<f64>,
    /// Ratio of the last two increments; `> 1` signals divergence.
    pub increment_ratio: f64,
    pub converges: bool,
}

/// Classifies whether `‖f‖_{L^q_α}` stays bounded as the normal grid near
/// `x_N = 0` is refined.
///
/// `sample(h)` must return the field on a cell-centred normal grid of spacing
/// `h`; the grid is refined by halving `h` over `levels >= 3` levels. With the
/// midpoint rule, an integrable boundary singularity `x_N^e` (`e > -1`)
/// produces increments shrinking by `2^{-(e+1)}`, a divergent one increments
/// growing by the same factor.
pub fn classify_by_refinement(
    sample: impl Fn(f64) -> Result<SampledField>,
    q: f64,
    alpha: f64,
    h0: f64,
    levels: usize,
) -> Result<RefinementClassification> {
    if levels < 3 {
        return Err(Error::Config("refinement test needs at least three levels".into()));
    }
    let mut norms = Vec::with_capacity(levels);
    let mut h = h0;
    for _ in 0..levels {
        let f = sample(h)?;
        // compare q-th powers so that increments are additive in the cells
        let v = weighted_lq_norm(&f, q, alpha)?;
        norms.push(if q.is_infinite() { v } else { v.powf(q) });
        h *= 0.5;
    }
    let k = norms.len();
    let d1 = norms[k - 2] - norms[k - 3];
    let d2 = norms[k - 1] - norms[k - 2];
    let scale = norms[k - 1].abs().max(f64::MIN_POSITIVE);
    let (ratio, converges) = if d1.abs() <= 1e-12 * scale && d2.abs() <= 1e-12 * scale {
        (0.0, true)
    } else if d1 == 0.0 {
        (f64::INFINITY, false)
    } else {
        let ratio = d2 / d1;
        (ratio, ratio.abs() < 1.0)
    };
    let norms = if q.is_infinite() {
        norms
    } else {
        norms.iter().map(|v| v.powf(1.0 / q)).collect()
    };
    Ok(RefinementClassification {
        norms,
        increment_ratio: ratio,
        converges,
    })
}
