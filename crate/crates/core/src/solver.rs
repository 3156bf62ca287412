//! Grid solver for the fixed-point system `v = S₁(t)φ - D[v]` on a truncated
//! two-dimensional half-space `[-L, L] × [0, H]`, with `w` and `u = v + w`.
//!
//! Fields are piecewise linear on a uniform tensor grid and every operator is
//! applied by product integration. The time discretisation uses the
//! semigroup recursions
//!
//! ```text
//! D(t_i) = S₁(Δ) D(t_{i-1}) + ∫_0^Δ S₁(τ) F(t_i - τ) dτ
//! W(t_i) = S₂(Δ) W(t_{i-1}) + ∫_0^Δ S₂(τ) g(t_i - τ) dτ
//! ```
//!
//! where `g = ∂_{x_N} v(·, 0, ·)` is linear in time on each interval (constant
//! on the first), `W` is the boundary trace of `w`, `w(·, x_N, t) = S₂(x_N) W(t)`
//! and `F = ∂_t w`. The flux always comes from differentiated kernels.

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datum::InitialDatum;
use crate::error::{ensure_finite, Error, Result};
use crate::kernels::{Dimension, HalfSpacePoint};
use crate::norms::{
    energy_functional, trapezoid_weights, xtm_norm, DampedNormParams, NormRecord, SampledBoundaryField, SampledField,
    WeightedExponentSet,
};
use crate::operators::{BoundaryTrajectory, FieldTrajectory};
use crate::product::{
    convolution_matrix, reflected_matrices, CauchyIntegralKernel, CauchyKernel, CauchyMomentKernel,
    CauchyRateKernel, GaussKernel,
};
use crate::quadrature::gauss_legendre;

/// Uniform solver grid on `[-L, L] × [0, H]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub tangential_half_width: f64,
    pub height: f64,
    pub tangential_nodes: usize,
    pub normal_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            tangential_half_width: 8.0,
            height: 8.0,
            tangential_nodes: 257,
            normal_nodes: 129,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tangential_half_width > 0.0) || !(self.height > 0.0) {
            return Err(Error::Config("grid extents must be positive".into()));
        }
        if self.tangential_nodes < 9 || self.normal_nodes < 5 {
            return Err(Error::Config("grid needs at least 9 tangential and 5 normal nodes".into()));
        }
        Ok(())
    }

    pub fn tangential_axis(&self) -> Vec<f64> {
        let n = self.tangential_nodes;
        let h = 2.0 * self.tangential_half_width / (n - 1) as f64;
        (0..n).map(|i| -self.tangential_half_width + i as f64 * h).collect()
    }

    pub fn normal_axis(&self) -> Vec<f64> {
        let n = self.normal_nodes;
        let h = self.height / (n - 1) as f64;
        (0..n).map(|j| j as f64 * h).collect()
    }

    fn spacings(&self) -> (f64, f64) {
        (
            2.0 * self.tangential_half_width / (self.tangential_nodes - 1) as f64,
            self.height / (self.normal_nodes - 1) as f64,
        )
    }
}

/// Solver configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Horizon `T`.
    pub horizon: f64,
    /// Initial damping `M >= 1` of the doubling search.
    pub damping: f64,
    /// Cap of the doubling search.
    pub max_damping: f64,
    /// Accepted observed contraction ratio of `D` in `X_{T,M}`.
    pub contraction_target: f64,
    pub picard_tol: f64,
    pub max_iterations: usize,
    pub grid: GridSpec,
    /// Number of time nodes (geometric in `(0, T]`, output times snapped in).
    pub time_sample_count: usize,
    /// First geometric node as a fraction of `T`.
    pub first_time_fraction: f64,
    pub output_times: Vec<f64>,
    /// Gauss nodes per interval in the square-root-substituted Duhamel integral.
    pub duhamel_nodes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            damping: 1.0,
            max_damping: 1024.0,
            contraction_target: 0.55,
            picard_tol: 1e-4,
            max_iterations: 12,
            grid: GridSpec::default(),
            time_sample_count: 40,
            first_time_fraction: 1e-3,
            output_times: vec![0.1, 0.25, 0.5, 1.0],
            duhamel_nodes: 8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let t = self.horizon;
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Config(format!("horizon must be > 0, got {t}")));
        }
        if !(self.damping >= 1.0) || !(self.max_damping >= self.damping) {
            return Err(Error::Config(format!(
                "damping must satisfy 1 <= M <= max_damping, got {} and {}",
                self.damping, self.max_damping
            )));
        }
        if !(self.contraction_target > 0.0 && self.contraction_target < 1.0) {
            return Err(Error::Config("contraction target must lie in (0, 1)".into()));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!("picard_tol must be > 0, got {}", self.picard_tol)));
        }
        if self.max_iterations < 2 {
            return Err(Error::Config("max_iterations must be >= 2".into()));
        }
        if self.time_sample_count < 4 || self.output_times.len() >= self.time_sample_count {
            return Err(Error::Config("time_sample_count must be >= 4 and exceed the output count".into()));
        }
        if !(self.first_time_fraction > 0.0 && self.first_time_fraction < 1.0) {
            return Err(Error::Config("first_time_fraction must lie in (0, 1)".into()));
        }
        if self.output_times.iter().any(|&o| !(o > 0.0 && o <= t * (1.0 + 1e-12))) {
            return Err(Error::Config("output times must lie in (0, T]".into()));
        }
        if self.duhamel_nodes < 2 {
            return Err(Error::Config("duhamel_nodes must be >= 2".into()));
        }
        self.grid.validate()
    }
}

/// Geometric time nodes in `[f T, T]` with every output time replacing its
/// nearest (in `log t`) geometric node.
pub fn solver_times(config: &SolverConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = config.time_sample_count;
    let t = config.horizon;
    let t0 = config.first_time_fraction * t;
    let mut times: Vec<f64> = (0..n)
        .map(|k| t0 * (t / t0).powf(k as f64 / (n - 1) as f64))
        .collect();
    times[n - 1] = t;
    let mut locked = vec![false; n];
    let mut outputs = config.output_times.clone();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    for o in outputs {
        let idx = (0..n)
            .filter(|&k| !locked[k])
            .min_by(|&a, &b| (times[a] / o).ln().abs().total_cmp(&(times[b] / o).ln().abs()))
            .ok_or_else(|| Error::Config("too many output times".into()))?;
        times[idx] = o;
        locked[idx] = true;
    }
    times.sort_by(f64::total_cmp);
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("output times collide on the time grid; raise time_sample_count".into()));
    }
    Ok(times)
}

/// Operators on one solver grid and time grid.
pub(crate) struct Discretization {
    pub(crate) x: Vec<f64>,
    pub(crate) z: Vec<f64>,
    hx: f64,
    hz: f64,
    pub(crate) times: Vec<f64>,
    /// `S₂(z_j)` for `j >= 1`.
    s2_rows: Vec<Array2<f64>>,
    /// Gauss rule on `[0, 1]` for the substituted variable `τ = Δ u²`.
    unit_rule: Vec<(f64, f64)>,
}

/// `D[g]` and `∂_{x_N} D[g]` at every time node, each `n_x × n_z`.
#[derive(Debug, Clone)]
pub(crate) struct DuhamelFields {
    pub(crate) d: Vec<Array2<f64>>,
    pub(crate) dn: Vec<Array2<f64>>,
}

impl DuhamelFields {
    fn flux(&self, i: usize) -> Array1<f64> {
        self.dn[i].column(0).to_owned()
    }

    fn difference(&self, other: &Self) -> Self {
        Self {
            d: self.d.iter().zip(&other.d).map(|(a, b)| a - b).collect(),
            dn: self.dn.iter().zip(&other.dn).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Discretization {
    pub(crate) fn new(config: &SolverConfig) -> Result<Self> {
        let times = solver_times(config)?;
        let x = config.grid.tangential_axis();
        let z = config.grid.normal_axis();
        let (hx, hz) = config.grid.spacings();
        let s2_rows = z[1..]
            .par_iter()
            .map(|&zj| convolution_matrix(&CauchyKernel::new(zj), x.len(), hx))
            .collect();
        let (u, w) = gauss_legendre(config.duhamel_nodes);
        let unit_rule = u.iter().zip(&w).map(|(&u, &w)| (0.5 * (u + 1.0), 0.5 * w)).collect();
        Ok(Self {
            x,
            z,
            hx,
            hz,
            times,
            s2_rows,
            unit_rule,
        })
    }

    fn shape(&self) -> (usize, usize) {
        (self.x.len(), self.z.len())
    }

    /// `(T(τ), N(τ), N'(τ))` with `S₁(τ)F = T F Nᵀ` and `∂_{x_N} S₁(τ)F = T F N'ᵀ`.
    fn s1_ops(&self, tau: f64) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let k = GaussKernel::new(tau);
        let t = convolution_matrix(&k, self.x.len(), self.hx);
        let (n, nd) = reflected_matrices(&k, self.z.len(), self.hz);
        (t, n, nd)
    }

    /// Columns of `b` lifted into the half-space: `F[:, j] = S₂(z_j) b`.
    fn lift(&self, b: &Array2<f64>) -> Vec<Array2<f64>> {
        let (nx, nz) = self.shape();
        let m = b.ncols();
        let mut out = vec![Array2::<f64>::zeros((nx, nz)); m];
        for (k, f) in out.iter_mut().enumerate() {
            f.column_mut(0).assign(&b.column(k));
        }
        let rows: Vec<Array2<f64>> = self.s2_rows.par_iter().map(|s| s.dot(b)).collect();
        for (j, p) in rows.iter().enumerate() {
            for (k, f) in out.iter_mut().enumerate() {
                f.column_mut(j + 1).assign(&p.column(k));
            }
        }
        out
    }

    /// Boundary trace `W(t_i)` of `w` for the flux samples `g[i] = g(t_i)`.
    pub(crate) fn boundary_potential(&self, g: &[Array1<f64>]) -> Vec<Array1<f64>> {
        let nx = self.x.len();
        let mut out = Vec::with_capacity(g.len());
        let mut prev = Array1::<f64>::zeros(nx);
        for i in 0..self.times.len() {
            let (delta, g_prev, gdot) = self.interval(g, i);
            let mut next = convolution_matrix(&CauchyIntegralKernel::new(delta), nx, self.hx).dot(&g[i]);
            if i > 0 {
                next += &convolution_matrix(&CauchyKernel::new(delta), nx, self.hx).dot(&prev);
                next -= &convolution_matrix(&CauchyMomentKernel::new(delta), nx, self.hx).dot(&gdot);
            }
            let _ = g_prev;
            out.push(next.clone());
            prev = next;
        }
        out
    }

    /// `(Δ, g(t_{i-1}), ġ)` on interval `i`; the first interval holds `g(t_1)`.
    fn interval<'a>(&self, g: &'a [Array1<f64>], i: usize) -> (f64, &'a Array1<f64>, Array1<f64>) {
        if i == 0 {
            (self.times[0], &g[0], Array1::zeros(g[0].len()))
        } else {
            let delta = self.times[i] - self.times[i - 1];
            (delta, &g[i - 1], (&g[i] - &g[i - 1]) / delta)
        }
    }

    /// `D[v]` for the boundary flux samples `g`.
    pub(crate) fn duhamel(&self, g: &[Array1<f64>]) -> DuhamelFields {
        let (nx, nz) = self.shape();
        let nt = self.times.len();
        let mut d_all = Vec::with_capacity(nt);
        let mut dn_all = Vec::with_capacity(nt);
        let w_all = self.boundary_potential(g);
        let mut d_prev = Array2::<f64>::zeros((nx, nz));
        for i in 0..nt {
            let (delta, g_prev, gdot) = self.interval(g, i);
            let nodes: Vec<(f64, f64)> = self
                .unit_rule
                .iter()
                .map(|&(u, w)| (delta * u * u, 2.0 * delta * u * w))
                .collect();
            // ∂_t W at s = t_i - τ, with δ = s - t_{i-1}
            let mut b = Array2::<f64>::zeros((nx, nodes.len()));
            for (k, &(tau, _)) in nodes.iter().enumerate() {
                let dl = delta - tau;
                let mut col = convolution_matrix(&CauchyKernel::new(dl), nx, self.hx).dot(g_prev);
                if i > 0 {
                    col += &convolution_matrix(&CauchyRateKernel::new(dl), nx, self.hx).dot(&w_all[i - 1]);
                    col += &convolution_matrix(&CauchyIntegralKernel::new(dl), nx, self.hx).dot(&gdot);
                }
                b.column_mut(k).assign(&col);
            }
            let f = self.lift(&b);
            let contributions: Vec<(Array2<f64>, Array2<f64>)> = nodes
                .par_iter()
                .zip(f.par_iter())
                .map(|(&(tau, wt), fk)| {
                    let (t, n, nd) = self.s1_ops(tau);
                    let tf = t.dot(fk);
                    (tf.dot(&n.t()) * wt, tf.dot(&nd.t()) * wt)
                })
                .collect();
            let (mut d, mut dn) = if i > 0 {
                let (t, n, nd) = self.s1_ops(delta);
                let td = t.dot(&d_prev);
                (td.dot(&n.t()), td.dot(&nd.t()))
            } else {
                (Array2::zeros((nx, nz)), Array2::zeros((nx, nz)))
            };
            for (cd, cdn) in contributions {
                d += &cd;
                dn += &cdn;
            }
            d_prev = d.clone();
            d_all.push(d);
            dn_all.push(dn);
        }
        DuhamelFields { d: d_all, dn: dn_all }
    }

    /// `(S₁(t)φ, ∂_{x_N} S₁(t)φ)` at every time node. Separable data use their
    /// one-dimensional evolutions; other data are sampled and product-integrated.
    pub(crate) fn initial_fields(&self, phi: &InitialDatum) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let (nx, nz) = self.shape();
        if phi.is_zero() {
            let zeros = vec![Array2::zeros((nx, nz)); self.times.len()];
            return (zeros.clone(), zeros);
        }
        if let Some((tan, normal)) = phi.separable_parts() {
            let per_time: Vec<(Array2<f64>, Array2<f64>)> = self
                .times
                .par_iter()
                .map(|&t| {
                    let a: Vec<f64> = self.x.iter().map(|&x| tan.heat_evolution(&[x], t)).collect();
                    let b: Vec<(f64, f64)> = self.z.iter().map(|&z| normal.dirichlet_evolution(z, t)).collect();
                    let v = Array2::from_shape_fn((nx, nz), |(i, j)| a[i] * b[j].0);
                    let dv = Array2::from_shape_fn((nx, nz), |(i, j)| a[i] * b[j].1);
                    (v, dv)
                })
                .collect();
            return per_time.into_iter().unzip();
        }
        let phi_grid = Array2::from_shape_fn((nx, nz), |(i, j)| {
            phi.evaluate(&HalfSpacePoint::new_unchecked(vec![self.x[i]], self.z[j]))
        });
        self.times
            .par_iter()
            .map(|&t| {
                let (tm, n, nd) = self.s1_ops(t);
                let tf = tm.dot(&phi_grid);
                (tf.dot(&n.t()), tf.dot(&nd.t()))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .unzip()
    }

    /// `w(·, z_j, t_i) = S₂(z_j) W(t_i)`.
    fn lift_potential(&self, w: &Array1<f64>) -> Array2<f64> {
        let b = w.view().insert_axis(ndarray::Axis(1)).to_owned();
        self.lift(&b).pop().expect("one column")
    }

    fn field(&self, values: Array2<f64>) -> SampledField {
        SampledField::from_parts_unchecked(vec![self.x.clone(), self.z.clone()], values.into_dyn())
    }

    fn boundary_field(&self, values: Array1<f64>) -> SampledBoundaryField {
        SampledBoundaryField::from_parts_unchecked(vec![self.x.clone()], values.into_dyn())
    }

    /// `E(t_i)` for a trajectory given by fields and their normal derivatives.
    fn energies(&self, v: &[Array2<f64>], dv: &[Array2<f64>], exps: &WeightedExponentSet) -> Result<Vec<(f64, f64)>> {
        let wx = trapezoid_weights(&self.x);
        let wz = trapezoid_weights(&self.z);
        let lp2 = |f: &Array2<f64>, p: f64| -> f64 {
            if p.is_infinite() {
                return f.iter().fold(0.0, |m, v| m.max(v.abs()));
            }
            let mut s = 0.0;
            for (i, row) in f.outer_iter().enumerate() {
                let mut r = 0.0;
                for (j, v) in row.iter().enumerate() {
                    r += wz[j] * v.abs().powf(p);
                }
                s += wx[i] * r;
            }
            s.powf(1.0 / p)
        };
        let lp1 = |f: &[f64], r: f64| -> f64 {
            if r.is_infinite() {
                return f.iter().fold(0.0, |m, v| m.max(v.abs()));
            }
            f.iter().zip(&wx).map(|(v, w)| w * v.abs().powf(r)).sum::<f64>().powf(1.0 / r)
        };
        self.times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let flux: Vec<f64> = dv[i].column(0).to_vec();
                let record = NormRecord {
                    t,
                    value_lp: lp2(&v[i], exps.p),
                    normal_derivative_lp: lp2(&dv[i], exps.p),
                    boundary_flux_lr: exps.r_values.iter().map(|&r| (r, lp1(&flux, r))).collect(),
                };
                Ok((t, energy_functional(&record, exps)?))
            })
            .collect()
    }
}

/// Per-run solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    /// Accepted damping `M`.
    pub damping: f64,
    /// `(M, observed ratio)` after every search step.
    pub damping_history: Vec<(f64, f64)>,
    /// Largest observed contraction ratio at the accepted `M`.
    pub contraction_ratio: f64,
    /// `‖v^{k+1} - v^k‖_{X_{T,M}}` for `k = 0, 1, ...`.
    pub distances: Vec<f64>,
    /// Number of Picard updates performed.
    pub iterations: usize,
    pub converged: bool,
    /// `‖v + D[v] - S₁(t)φ‖_{X_{T,M}}` of the returned iterate.
    pub residual: f64,
    /// `‖S₁(t)φ‖_{X_{T,M}}`.
    pub initial_norm: f64,
    pub times: Vec<f64>,
    /// `(t, E)` of `S₁(t)φ`; independent of `M`.
    pub initial_energies: Vec<(f64, f64)>,
    /// `(t, E)` of `v^{k+1} - v^k` for every recorded distance.
    pub difference_energies: Vec<Vec<(f64, f64)>>,
}

impl PicardDiagnostics {
    /// `d_{k+1} / d_k`.
    pub fn successive_ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }

    pub fn relative_residual(&self) -> f64 {
        if self.initial_norm > 0.0 {
            self.residual / self.initial_norm
        } else {
            0.0
        }
    }
}

/// Output of [`picard_solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub v: FieldTrajectory,
    /// `∂_{x_N} v`.
    pub v_normal_derivative: FieldTrajectory,
    pub w: FieldTrajectory,
    pub u: FieldTrajectory,
    /// `∂_{x_N} v(·, 0, t)`.
    pub flux: BoundaryTrajectory,
    /// `S₁(t)φ`.
    pub initial_iterate: FieldTrajectory,
    pub exponents: WeightedExponentSet,
    /// `(t, E[v](t))` of the returned `v`.
    pub energies: Vec<(f64, f64)>,
    pub diagnostics: PicardDiagnostics,
}

fn require_plane(dim: Dimension) -> Result<()> {
    if dim.get() != 2 {
        return Err(Error::Config(format!(
            "the grid solver supports N = 2 only, got N = {}",
            dim.get()
        )));
    }
    Ok(())
}

/// Doubling search for `M` driven by every observed contraction ratio.
///
/// Energy profiles of `v⁰` and of the Picard differences do not depend on `M`,
/// so raising `M` mid-iteration only re-evaluates stored suprema.
struct DampingSearch {
    horizon: f64,
    target: f64,
    cap: f64,
    damping: f64,
    initial: Vec<(f64, f64)>,
    /// Profiles of `D[v⁰] = v⁰ - v¹` and of `v^{k+1} - v^k`.
    profiles: Vec<Vec<(f64, f64)>>,
    history: Vec<(f64, f64)>,
}

impl DampingSearch {
    fn new(config: &SolverConfig, initial: Vec<(f64, f64)>) -> Self {
        Self {
            horizon: config.horizon,
            target: config.contraction_target,
            cap: config.max_damping,
            damping: config.damping,
            initial,
            profiles: Vec::new(),
            history: Vec::new(),
        }
    }

    fn norms_at(&self, damping: f64) -> Result<(f64, Vec<f64>)> {
        let params = DampedNormParams::new(self.horizon, damping)?;
        let base = xtm_norm(&self.initial, &params)?;
        let d = self.profiles.iter().map(|e| xtm_norm(e, &params)).collect::<Result<Vec<_>>>()?;
        Ok((base, d))
    }

    /// Largest of `‖D[v⁰]‖/‖v⁰‖` and `d_{k+1}/d_k` at `damping`.
    fn ratio_at(&self, damping: f64) -> Result<f64> {
        let (base, d) = self.norms_at(damping)?;
        let mut worst: f64 = if base > 0.0 { d[0] / base } else { 0.0 };
        for w in d.windows(2) {
            if w[0] > 0.0 {
                worst = worst.max(w[1] / w[0]);
            }
        }
        Ok(worst)
    }

    fn observed_ratio(&self) -> Result<f64> {
        self.ratio_at(self.damping)
    }

    /// Records a new difference profile and doubles `M` while the observed
    /// ratio exceeds the target.
    fn observe(&mut self, profile: Vec<(f64, f64)>) -> Result<()> {
        self.profiles.push(profile);
        loop {
            let ratio = self.ratio_at(self.damping)?;
            self.history.push((self.damping, ratio));
            if ratio <= self.target {
                return Ok(());
            }
            if self.damping * 2.0 > self.cap {
                return Err(Error::SolverFailure {
                    reason: format!(
                        "no contraction up to M = {}: observed ratio {ratio:.4} > {}",
                        self.damping, self.target
                    ),
                    history: self.history.iter().map(|h| h.1).collect(),
                });
            }
            self.damping *= 2.0;
        }
    }

    fn distances(&self) -> Result<Vec<f64>> {
        Ok(self.norms_at(self.damping)?.1)
    }

    fn converged(&self, tol: f64) -> Result<bool> {
        let d = self.distances()?;
        let last = *d.last().expect("at least one profile");
        Ok(last == 0.0 || (d.len() > 1 && last <= tol * d[0]))
    }
}

/// Solves the fixed-point system by Picard iteration from `v⁰ = S₁(t)φ`.
///
/// The damping `M` is doubled from `config.damping` until every observed
/// ratio (`‖D[v⁰]‖/‖v⁰‖` and each `d_{k+1}/d_k`) in `X_{T,M}` is at most
/// `config.contraction_target`; distances are re-measured after a raise. Iteration
/// stops once `‖v^{k+1} - v^k‖ <= picard_tol ‖v¹ - v⁰‖` or after
/// `max_iterations` updates (reported as not converged).
pub fn picard_solve(phi: &InitialDatum, config: &SolverConfig) -> Result<Solution> {
    require_plane(phi.dim())?;
    config.validate()?;
    let exps = match phi.declared_exponents() {
        Some(e) => e.clone(),
        None => WeightedExponentSet::new(phi.dim(), 1.0, f64::INFINITY)?,
    };
    let disc = Discretization::new(config)?;
    let nt = disc.times.len();
    let (v0, dv0) = disc.initial_fields(phi);
    let e_v0 = disc.energies(&v0, &dv0, &exps)?;
    let g0: Vec<Array1<f64>> = dv0.iter().map(|a| a.column(0).to_owned()).collect();

    let d0 = disc.duhamel(&g0);
    let e_d0 = disc.energies(&d0.d, &d0.dn, &exps)?;
    let mut search = DampingSearch::new(config, e_v0.clone());
    search.observe(e_d0)?;
    let mut current = d0;
    let mut iterations = 1;
    let flux_of = |d: &DuhamelFields| -> Vec<Array1<f64>> { (0..nt).map(|i| &g0[i] - &d.flux(i)).collect() };
    while !search.converged(config.picard_tol)? && iterations < config.max_iterations {
        let next = disc.duhamel(&flux_of(&current));
        let diff = next.difference(&current);
        search.observe(disc.energies(&diff.d, &diff.dn, &exps)?)?;
        iterations += 1;
        current = next;
    }
    let converged = search.converged(config.picard_tol)?;
    let damping = search.damping;
    let params = DampedNormParams::new(config.horizon, damping)?;
    let distances = search.distances()?;
    let first = distances[0];
    // the returned iterate is v = v⁰ - current; its residual is D[v] - current
    let flux = flux_of(&current);
    let residual = if first == 0.0 {
        0.0
    } else {
        let res = disc.duhamel(&flux).difference(&current);
        xtm_norm(&disc.energies(&res.d, &res.dn, &exps)?, &params)?
    };

    let v: Vec<Array2<f64>> = v0.iter().zip(&current.d).map(|(a, b)| a - b).collect();
    let dv: Vec<Array2<f64>> = dv0.iter().zip(&current.dn).map(|(a, b)| a - b).collect();
    for (i, f) in v.iter().enumerate() {
        let peak = f.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        ensure_finite(peak, || format!("solution v at t = {}", disc.times[i]))?;
    }
    let energies = disc.energies(&v, &dv, &exps)?;
    let potential = disc.boundary_potential(&flux);
    let w: Vec<Array2<f64>> = potential.iter().map(|p| disc.lift_potential(p)).collect();
    let u: Vec<Array2<f64>> = v.iter().zip(&w).map(|(a, b)| a + b).collect();

    let times = disc.times.clone();
    let traj = |fields: Vec<Array2<f64>>| -> Result<FieldTrajectory> {
        FieldTrajectory::new(times.clone(), fields.into_iter().map(|f| disc.field(f)).collect())
    };
    let initial_norm = xtm_norm(&e_v0, &params)?;
    let diagnostics = PicardDiagnostics {
        damping,
        contraction_ratio: search.observed_ratio()?,
        damping_history: search.history,
        distances,
        iterations,
        converged,
        residual,
        initial_norm,
        times: times.clone(),
        initial_energies: e_v0,
        difference_energies: search.profiles,
    };
    Ok(Solution {
        flux: BoundaryTrajectory::new(times.clone(), flux.into_iter().map(|g| disc.boundary_field(g)).collect())?,
        v: traj(v)?,
        v_normal_derivative: traj(dv)?,
        w: traj(w)?,
        u: traj(u)?,
        initial_iterate: traj(v0)?,
        exponents: exps,
        energies,
        diagnostics,
    })
}

/// `[D[v]](x, t)` for a prescribed boundary flux, computed on the solver grid
/// of `config` (with `t` added to its output times) and interpolated at `x`.
pub fn apply_d(flux: &BoundaryTrajectory, x: &HalfSpacePoint, t: f64, config: &SolverConfig) -> Result<f64> {
    if x.dim() != 2 {
        return Err(Error::Config("apply_d supports N = 2 only".into()));
    }
    let mut cfg = config.clone();
    if !cfg.output_times.iter().any(|&o| (o - t).abs() <= 1e-12 * t) {
        cfg.output_times.push(t);
    }
    if !(t > 0.0 && t <= cfg.horizon) {
        return Err(Error::Domain(format!("apply_d needs t in (0, T], got {t}")));
    }
    let disc = Discretization::new(&cfg)?;
    let g: Vec<Array1<f64>> = disc
        .times
        .iter()
        .map(|&s| {
            let field = flux.at(s);
            disc.x.iter().map(|&y| field.evaluate(&[y])).collect()
        })
        .collect();
    let d = disc.duhamel(&g);
    let idx = disc
        .times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t)
        .expect("t is a node");
    let field = SampledField::from_parts_unchecked(
        vec![disc.x.clone(), disc.z.clone()],
        ArrayD::from_shape_vec(IxDyn(&[disc.x.len(), disc.z.len()]), d.d[idx].iter().copied().collect())
            .expect("shape"),
    );
    Ok(field.evaluate(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datum::{DatumSpec, NormalTail};
    use crate::operators::{apply_dxn_s1, apply_s1};
    use crate::quadrature::{Scheme, SpatialQuadratureSpec};
    use std::f64::consts::PI;

    fn small_config(horizon: f64, samples: usize) -> SolverConfig {
        SolverConfig {
            horizon,
            time_sample_count: samples,
            output_times: vec![horizon],
            ..SolverConfig::default()
        }
    }

    fn dim2() -> Dimension {
        Dimension::new(2).unwrap()
    }

    #[test]
    fn time_grid_snaps_outputs() {
        let cfg = SolverConfig::default();
        let t = solver_times(&cfg).unwrap();
        assert_eq!(t.len(), 40);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        for o in &cfg.output_times {
            assert!(t.contains(o), "{o}");
        }
        assert!((t[0] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig { picard_tol: 0.0, ..SolverConfig::default() },
            SolverConfig { max_iterations: 1, ..SolverConfig::default() },
            SolverConfig { damping: 0.5, ..SolverConfig::default() },
            SolverConfig { output_times: vec![2.0], ..SolverConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
        let phi = InitialDatum::zero(Dimension::new(3).unwrap());
        assert!(matches!(picard_solve(&phi, &SolverConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn zero_datum_converges_at_once() {
        let sol = picard_solve(&InitialDatum::zero(dim2()), &small_config(1.0, 10)).unwrap();
        assert!(sol.diagnostics.converged);
        assert_eq!(sol.diagnostics.iterations, 1);
        assert_eq!(sol.u.at(1.0).max_abs(), 0.0);
    }

    #[test]
    fn boundary_potential_of_cauchy_flux() {
        // g = P(·, a) in time: W(t) = ∫_a^{a+t} P(x', σ) dσ, w(·, z) = S₂(z) W
        let a = 1.0;
        let disc = Discretization::new(&small_config(1.0, 12)).unwrap();
        let g0: Array1<f64> = disc.x.iter().map(|&y| a / (PI * (a * a + y * y))).collect();
        let g = vec![g0; disc.times.len()];
        let w = disc.boundary_potential(&g);
        let last = disc.lift_potential(w.last().unwrap());
        let t = 1.0;
        // the residual error is the flux mass cut off at |y| > L
        for (i, &x) in disc.x.iter().enumerate().filter(|(_, x)| x.abs() <= 2.0) {
            for (j, &z) in disc.z.iter().enumerate().take(20) {
                let (lo, hi) = (z + a, z + a + t);
                let exact = ((hi * hi + x * x) / (lo * lo + x * x)).ln() / (2.0 * PI);
                assert!((last[[i, j]] - exact).abs() < 5e-3 * exact, "{x} {z}: {} vs {exact}", last[[i, j]]);
            }
        }
    }

    #[test]
    fn duhamel_is_linear() {
        let disc = Discretization::new(&SolverConfig {
            grid: GridSpec {
                tangential_nodes: 65,
                normal_nodes: 33,
                ..GridSpec::default()
            },
            ..small_config(0.5, 8)
        })
        .unwrap();
        let g1: Vec<Array1<f64>> = disc
            .times
            .iter()
            .map(|&t| disc.x.iter().map(|&y| (-y * y).exp() * (1.0 + t)).collect())
            .collect();
        let g2: Vec<Array1<f64>> = disc
            .times
            .iter()
            .map(|&t| disc.x.iter().map(|&y| (y * t).sin() / (1.0 + y * y)).collect())
            .collect();
        let mix: Vec<Array1<f64>> = g1.iter().zip(&g2).map(|(a, b)| a * 2.0 - b * 0.5).collect();
        let (d1, d2, dm) = (disc.duhamel(&g1), disc.duhamel(&g2), disc.duhamel(&mix));
        for i in 0..disc.times.len() {
            let lin = &d1.d[i] * 2.0 - &d2.d[i] * 0.5;
            let scale = lin.iter().fold(1e-300_f64, |m, v| m.max(v.abs()));
            let err = (&dm.d[i] - &lin).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-10 * scale, "{err}");
        }
    }

    /// `S₂(σ) exp(-|·|²)` at `y` in the plane.
    fn cauchy_of_gaussian(y: f64, sigma: f64) -> f64 {
        let (u, w) = gauss_legendre(64);
        let half = PI / 2.0;
        u.iter()
            .zip(&w)
            .map(|(&u, &w)| {
                let th = half * u;
                let s = y - sigma * th.tan();
                half * w * (-s * s).exp() / PI
            })
            .sum()
    }

    #[test]
    fn duhamel_matches_pointwise_quadrature() {
        // g = exp(-|y|²) constant in time, F(·, η, s) = S₂(η + s) g
        let t = 0.25;
        let disc = Discretization::new(&small_config(t, 12)).unwrap();
        let g0: Array1<f64> = disc.x.iter().map(|&y| (-y * y).exp()).collect();
        let g = vec![g0; disc.times.len()];
        let d = disc.duhamel(&g);
        let last = disc.times.len() - 1;
        let quad = SpatialQuadratureSpec::new(8.0, 96, Scheme::GaussLegendreComposite).unwrap();
        let (u, w) = gauss_legendre(16);
        let reference = |x: f64, z: f64, flux: bool| -> f64 {
            u.iter()
                .zip(&w)
                .map(|(&u, &w)| {
                    // t - s = t v², v ∈ (0, 1)
                    let v = 0.5 * (u + 1.0);
                    let tau = t * v * v;
                    let s = t - tau;
                    let f = InitialDatum::from_fn(dim2(), move |p| cauchy_of_gaussian(p.tangential[0], p.height + s));
                    let p = HalfSpacePoint::new(vec![x], z).unwrap();
                    let val = if flux {
                        apply_dxn_s1(&f, tau, &p, &quad).unwrap()
                    } else {
                        apply_s1(&f, tau, &p, &quad).unwrap()
                    };
                    0.5 * w * 2.0 * t * v * val
                })
                .sum()
        };
        let idx = |x: f64, z: f64| -> (usize, usize) {
            let i = disc.x.iter().position(|&a| (a - x).abs() < 1e-12).unwrap();
            let j = disc.z.iter().position(|&a| (a - z).abs() < 1e-12).unwrap();
            (i, j)
        };
        for &(x, z) in &[(0.0, 0.5), (0.5, 0.25), (1.0, 1.0)] {
            let (i, j) = idx(x, z);
            let r = reference(x, z, false);
            assert!((d.d[last][[i, j]] - r).abs() < 3e-3 * r, "D at ({x},{z}): {} vs {r}", d.d[last][[i, j]]);
        }
        for &x in &[0.0, 0.5] {
            let (i, _) = idx(x, 0.0);
            let r = reference(x, 0.0, true);
            let got = d.dn[last][[i, 0]];
            assert!((got - r).abs() < 5e-3 * r.abs(), "flux at {x}: {got} vs {r}");
        }
    }

    #[test]
    fn generic_initial_fields_match_separable_path() {
        let spec = DatumSpec::power_family(1.5, 1.0, 1.0, NormalTail::Gaussian { width: 1.0 });
        let sep = InitialDatum::from_spec(dim2(), spec).unwrap();
        let copy = sep.clone();
        let generic = InitialDatum::from_fn(dim2(), move |p| copy.evaluate(p));
        let disc = Discretization::new(&small_config(0.25, 8)).unwrap();
        let (a, da) = disc.initial_fields(&sep);
        let (b, db) = disc.initial_fields(&generic);
        let last = disc.times.len() - 1;
        let scale = a[last].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = (&a[last] - &b[last]).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-3 * scale, "{err}");
        let dscale = da[last].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let derr = (&da[last] - &db[last]).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(derr < 1e-2 * dscale, "{derr}");
    }

    #[test]
    fn picard_contracts_and_meets_residual() {
        let spec = DatumSpec::power_family(1.5, 1.0, 1.0, NormalTail::Gaussian { width: 1.0 });
        let phi = InitialDatum::from_spec(dim2(), spec).unwrap();
        let cfg = SolverConfig {
            grid: GridSpec {
                tangential_nodes: 129,
                normal_nodes: 65,
                ..GridSpec::default()
            },
            max_iterations: 20,
            ..small_config(1.0, 16)
        };
        let sol = picard_solve(&phi, &cfg).unwrap();
        let dg = &sol.diagnostics;
        assert!(dg.converged, "{dg:?}");
        assert!(dg.contraction_ratio <= 0.55);
        assert!(dg.relative_residual() <= 2.0 * cfg.picard_tol, "{dg:?}");
        for r in dg.successive_ratios() {
            assert!(r <= 0.55, "{dg:?}");
        }
        assert!(dg.damping_history.windows(2).all(|w| w[1].0 >= w[0].0));
        let u = sol.u.at(1.0);
        let v = sol.v.at(1.0);
        let w = sol.w.at(1.0);
        let sum = v.add_scaled(1.0, &w).unwrap();
        let err = (u.values() - sum.values()).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(err < 1e-14);
    }
}
