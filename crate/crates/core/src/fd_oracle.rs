//! Explicit finite-difference oracle for the heat equation on a truncated
//! two-dimensional half-space with the dynamical boundary law
//! `∂_t u = ∂_{x_N} u` on `x_N = 0`.
//!
//! The grid is uniform with spacing `dx` in both directions on
//! `[-L, L] × [0, H]`; the three far walls carry homogeneous Dirichlet values.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datum::InitialDatum;
use crate::error::{ensure_finite, Error, Result};
use crate::kernels::HalfSpacePoint;
use crate::norms::SampledField;
use crate::operators::FieldTrajectory;

/// Spatial dimension handled by the oracle.
const DIM: f64 = 2.0;

/// Uniform oracle grid and time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FDGrid {
    /// Half-width `L` of the tangential interval.
    pub tangential_extent: f64,
    /// Height `H`.
    pub height_extent: f64,
    pub dx: f64,
    /// Largest admissible step; output times are hit exactly by shortening steps.
    pub dt: f64,
}

impl FDGrid {
    /// Checks extents, node alignment and `dt <= dx²/(2N)`.
    pub fn new(tangential_extent: f64, height_extent: f64, dx: f64, dt: f64) -> Result<Self> {
        let grid = Self {
            tangential_extent,
            height_extent,
            dx,
            dt,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with `dt = safety · dx²/(2N)`, `0 < safety <= 1`.
    pub fn stable(tangential_extent: f64, height_extent: f64, dx: f64, safety: f64) -> Result<Self> {
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(Error::Config(format!("stability safety factor must lie in (0, 1], got {safety}")));
        }
        Self::new(tangential_extent, height_extent, dx, safety * dx * dx / (2.0 * DIM))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) || !(self.tangential_extent > 0.0) || !(self.height_extent > 0.0) {
            return Err(Error::Config("FD extents and spacing must be positive".into()));
        }
        for (name, ext) in [("tangential", 2.0 * self.tangential_extent), ("height", self.height_extent)] {
            let cells = ext / self.dx;
            if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) || cells.round() < 4.0 {
                return Err(Error::Config(format!(
                    "{name} extent {ext} is not a multiple (>= 4) of dx = {}",
                    self.dx
                )));
            }
        }
        let limit = self.dx * self.dx / (2.0 * DIM);
        if !(self.dt > 0.0 && self.dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::Config(format!(
                "explicit scheme unstable: dt = {} exceeds dx²/(2N) = {limit}",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn tangential_nodes(&self) -> usize {
        (2.0 * self.tangential_extent / self.dx).round() as usize + 1
    }

    pub fn normal_nodes(&self) -> usize {
        (self.height_extent / self.dx).round() as usize + 1
    }

    pub fn tangential_axis(&self) -> Vec<f64> {
        (0..self.tangential_nodes())
            .map(|i| -self.tangential_extent + i as f64 * self.dx)
            .collect()
    }

    pub fn normal_axis(&self) -> Vec<f64> {
        (0..self.normal_nodes()).map(|j| j as f64 * self.dx).collect()
    }
}

/// Update rule of the `x_N = 0` row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// `u_0 += dt (u_1 - u_0)/dx`.
    Dynamical,
    /// `u_0 = 0`, for interior-only checks.
    Dirichlet,
}

/// Grid values, tangential index outer; column 0 is the boundary row.
#[derive(Debug, Clone, PartialEq)]
pub struct FDState {
    pub values: Array2<f64>,
}

impl FDState {
    /// Samples `φ` at interior rows; the boundary row starts at zero.
    pub fn initial(phi: &InitialDatum, grid: &FDGrid) -> Result<Self> {
        grid.validate()?;
        if phi.dim().get() != 2 {
            return Err(Error::Config("the FD oracle supports N = 2 only".into()));
        }
        let x = grid.tangential_axis();
        let z = grid.normal_axis();
        let (nx, nz) = (x.len(), z.len());
        let mut values = Array2::zeros((nx, nz));
        if !phi.is_zero() {
            for i in 1..nx - 1 {
                for j in 1..nz - 1 {
                    values[[i, j]] = phi.evaluate(&HalfSpacePoint::new_unchecked(vec![x[i]], z[j]));
                }
            }
        }
        Ok(Self { values })
    }
}

/// One explicit step of size `dt` (which must satisfy the stability bound).
pub fn fd_step(state: &FDState, grid: &FDGrid, dt: f64, mode: BoundaryMode) -> Result<FDState> {
    grid.validate()?;
    let limit = grid.dx * grid.dx / (2.0 * DIM);
    if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
        return Err(Error::Config(format!("explicit scheme unstable: dt = {dt} exceeds {limit}")));
    }
    let (nx, nz) = state.values.dim();
    if (nx, nz) != (grid.tangential_nodes(), grid.normal_nodes()) {
        return Err(Error::Config("FD state does not match its grid".into()));
    }
    let old = state.values.as_slice().expect("standard layout");
    let mu = dt / (grid.dx * grid.dx);
    let beta = dt / grid.dx;
    let mut new = vec![0.0; nx * nz];
    // walls at i = 0, i = nx - 1 and j = nz - 1 stay zero
    new.par_chunks_mut(nz)
        .enumerate()
        .filter(|(i, _)| *i > 0 && *i < nx - 1)
        .for_each(|(i, row)| {
            let c = &old[i * nz..(i + 1) * nz];
            let l = &old[(i - 1) * nz..i * nz];
            let r = &old[(i + 1) * nz..(i + 2) * nz];
            row[0] = match mode {
                BoundaryMode::Dynamical => c[0] + beta * (c[1] - c[0]),
                BoundaryMode::Dirichlet => 0.0,
            };
            for j in 1..nz - 1 {
                row[j] = c[j] + mu * (l[j] + r[j] + c[j - 1] + c[j + 1] - 4.0 * c[j]);
            }
        });
    Ok(FDState {
        values: Array2::from_shape_vec((nx, nz), new).expect("shape"),
    })
}

/// Marches from `φ` and records the state at each of `times` (increasing, > 0).
pub fn fd_solve_with(phi: &InitialDatum, grid: &FDGrid, times: &[f64], mode: BoundaryMode) -> Result<FieldTrajectory> {
    if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("FD output times must be positive and increasing".into()));
    }
    let mut state = FDState::initial(phi, grid)?;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let steps = ((t - now) / grid.dt).ceil().max(1.0) as usize;
        let dt = (t - now) / steps as f64;
        for _ in 0..steps {
            state = fd_step(&state, grid, dt, mode)?;
        }
        now = t;
        let peak = state.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        ensure_finite(peak, || format!("FD state at t = {t}"))?;
        out.push(SampledField::from_parts_unchecked(
            vec![grid.tangential_axis(), grid.normal_axis()],
            state.values.clone().into_dyn(),
        ));
    }
    FieldTrajectory::new(times.to_vec(), out)
}

/// `u` of the dynamical-boundary problem at `times`.
pub fn fd_solve(phi: &InitialDatum, grid: &FDGrid, times: &[f64]) -> Result<FieldTrajectory> {
    fd_solve_with(phi, grid, times, BoundaryMode::Dynamical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datum::{DatumSpec, NormalTail};
    use crate::kernels::Dimension;
    use proptest::prelude::*;

    fn dim2() -> Dimension {
        Dimension::new(2).unwrap()
    }

    fn datum() -> InitialDatum {
        InitialDatum::from_spec(
            dim2(),
            DatumSpec::power_family(1.5, 1.0, 1.0, NormalTail::Gaussian { width: 1.0 }),
        )
        .unwrap()
    }

    #[test]
    fn stability_is_enforced() {
        assert!(matches!(FDGrid::new(4.0, 4.0, 0.1, 0.0026), Err(Error::Config(_))));
        assert!(FDGrid::new(4.0, 4.0, 0.1, 0.0025).is_ok());
        assert!(matches!(FDGrid::new(4.0, 4.0, 0.3, 0.01), Err(Error::Config(_))));
        let g = FDGrid::stable(4.0, 4.0, 0.1, 0.9).unwrap();
        let s = FDState::initial(&datum(), &g).unwrap();
        assert!(fd_step(&s, &g, 0.01, BoundaryMode::Dynamical).is_err());
    }

    #[test]
    fn zero_is_fixed() {
        let g = FDGrid::stable(2.0, 2.0, 0.1, 1.0).unwrap();
        let tr = fd_solve(&InitialDatum::zero(dim2()), &g, &[0.1, 0.5]).unwrap();
        assert_eq!(tr.at(0.5).max_abs(), 0.0);
    }

    #[test]
    fn interior_gaussian_matches_free_space() {
        // exp(-|x - c|²/(4 s)) evolves to s/(s + t) exp(-|x - c|²/(4 (s + t)))
        let (s, c) = (0.25, 4.0);
        let phi = InitialDatum::from_fn(dim2(), move |p| {
            let r2 = p.tangential[0].powi(2) + (p.height - c).powi(2);
            (-r2 / (4.0 * s)).exp()
        });
        let g = FDGrid::stable(4.0, 8.0, 0.05, 1.0).unwrap();
        let t = 0.5;
        let tr = fd_solve_with(&phi, &g, &[t], BoundaryMode::Dirichlet).unwrap();
        let f = tr.at(t);
        let mut err: f64 = 0.0;
        for &x in &g.tangential_axis() {
            for &z in &g.normal_axis() {
                let r2 = x * x + (z - c).powi(2);
                let exact = s / (s + t) * (-r2 / (4.0 * (s + t))).exp();
                err = err.max((f.evaluate(&HalfSpacePoint::new(vec![x], z).unwrap()) - exact).abs());
            }
        }
        assert!(err < 0.01 * s / (s + t), "{err}");
    }

    #[test]
    fn boundary_row_rises_toward_interior() {
        let g = FDGrid::stable(2.0, 2.0, 0.1, 1.0).unwrap();
        let s = FDState::initial(&datum(), &g).unwrap();
        let next = fd_step(&s, &g, g.dt, BoundaryMode::Dynamical).unwrap();
        for i in 1..g.tangential_nodes() - 1 {
            if s.values[[i, 1]] >= s.values[[i, 0]] {
                assert!(next.values[[i, 0]] >= s.values[[i, 0]]);
            }
        }
        assert!(next.values.column(0).iter().any(|&v| v > 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn fd_is_linear(a in -3.0..3.0_f64, b in -3.0..3.0_f64) {
            let g = FDGrid::stable(2.0, 2.0, 0.2, 1.0).unwrap();
            let d = datum();
            let e = InitialDatum::from_fn(dim2(), |p| (p.tangential[0]).sin() * p.height * (-p.height).exp());
            let (d2, e2) = (d.clone(), e.clone());
            let mix = InitialDatum::from_fn(dim2(), move |p| a * d2.evaluate(p) + b * e2.evaluate(p));
            let t = [0.3];
            let ud = fd_solve(&d, &g, &t).unwrap().at(0.3);
            let ue = fd_solve(&e, &g, &t).unwrap().at(0.3);
            let um = fd_solve(&mix, &g, &t).unwrap().at(0.3);
            let lin = ud.scaled(a).add_scaled(b, &ue).unwrap();
            let err = (um.values() - lin.values()).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            prop_assert!(err <= 1e-12 * (1.0 + lin.max_abs()));
        }

        #[test]
        fn interior_stencil_obeys_maximum_principle(data in prop::collection::vec(-0.5..0.5_f64, 19 * 9)) {
            let g = FDGrid::stable(1.0, 1.0, 0.1, 1.0).unwrap();
            let (nx, nz) = (g.tangential_nodes(), g.normal_nodes());
            let mut values = Array2::zeros((nx, nz));
            for i in 1..nx - 1 {
                for j in 1..nz - 1 {
                    values[[i, j]] = data[(i - 1) * (nz - 2) + j - 1];
                }
            }
            let s = FDState { values };
            let hi = s.values.iter().cloned().fold(f64::MIN, f64::max);
            let lo = s.values.iter().cloned().fold(f64::MAX, f64::min);
            let n = fd_step(&s, &g, g.dt, BoundaryMode::Dirichlet).unwrap();
            for v in n.values.iter() {
                prop_assert!(*v <= hi + 1e-15 && *v >= lo - 1e-15);
            }
        }
    }
}
