use serde::{Deserialize, Serialize};

use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::fd_oracle::{fd_solve, FDGrid};
use crate::kernels::HalfSpacePoint;
use crate::operators::FieldTrajectory;
use crate::quadrature::pairwise_sum;

/// Finite-difference runs and comparison window for the kernel-versus-oracle
/// check. `spacings` lists the oracle resolutions, coarsest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub tangential_extent: f64,
    pub height_extent: f64,
    pub spacings: Vec<f64>,
    /// Fraction of the explicit stability limit used as time step.
    pub safety: f64,
    /// Interior window `|x'| <= window_tangential`, `x_N <= window_height`.
    pub window_tangential: f64,
    pub window_height: f64,
    pub max_gap: f64,
    pub min_refinement_factor: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            tangential_extent: 8.0,
            height_extent: 8.0,
            spacings: vec![0.1, 0.05],
            safety: 0.9,
            window_tangential: 6.4,
            window_height: 6.4,
            max_gap: 0.05,
            min_refinement_factor: 1.7,
        }
    }
}

impl OracleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.spacings.is_empty() || self.spacings.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("oracle spacings must be non-empty and decreasing".into()));
        }
        if !(self.window_tangential > 0.0 && self.window_tangential <= self.tangential_extent)
            || !(self.window_height > 0.0 && self.window_height <= self.height_extent)
        {
            return Err(Error::Config("comparison window must lie inside the oracle box".into()));
        }
        Ok(())
    }
}

/// Relative gaps at one time: max-norm and L² over the window, each divided
/// by the oracle's norm on the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleGap {
    pub t: f64,
    pub max_gap: f64,
    pub l2_gap: f64,
    pub oracle_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLevel {
    pub dx: f64,
    pub gaps: Vec<OracleGap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub levels: Vec<OracleLevel>,
    /// Per time, coarsest-level max gap over the next level's.
    pub refinement_factors: Vec<f64>,
    pub passed: bool,
}

/// Gaps between `u` and the oracle at the oracle's nodes inside the window;
/// `u` is interpolated multilinearly. A zero oracle with zero `u` has gap 0.
pub fn compare_solutions(u: &FieldTrajectory, oracle: &FieldTrajectory, spec: &OracleSpec) -> Result<Vec<OracleGap>> {
    oracle
        .times()
        .iter()
        .zip(oracle.values())
        .map(|(&t, fd)| {
            let kernel = u.at(t);
            let axes = fd.axes();
            let view = fd.view_2d()?;
            let (mut peak, mut gap) = (0.0_f64, 0.0_f64);
            let (mut sq_gap, mut sq_ref) = (Vec::new(), Vec::new());
            for (i, &x) in axes[0].iter().enumerate() {
                if x.abs() > spec.window_tangential + 1e-12 {
                    continue;
                }
                for (j, &z) in axes[1].iter().enumerate() {
                    if z > spec.window_height + 1e-12 {
                        continue;
                    }
                    let reference = view[[i, j]];
                    let d = kernel.evaluate(&HalfSpacePoint::new_unchecked(vec![x], z)) - reference;
                    peak = peak.max(reference.abs());
                    gap = gap.max(d.abs());
                    sq_gap.push(d * d);
                    sq_ref.push(reference * reference);
                }
            }
            let rel = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a / b };
            Ok(OracleGap {
                t,
                max_gap: rel(gap, peak),
                l2_gap: rel(pairwise_sum(&sq_gap).sqrt(), pairwise_sum(&sq_ref).sqrt()),
                oracle_max: peak,
            })
        })
        .collect()
}

/// Runs the oracle at every spacing of `spec` and compares with `u` at
/// `times`; passes when the coarsest gap is at most `max_gap` at every time
/// and each refinement shrinks it by at least `min_refinement_factor`.
pub fn compare_with_oracle(
    u: &FieldTrajectory,
    phi: &InitialDatum,
    times: &[f64],
    spec: &OracleSpec,
) -> Result<OracleReport> {
    spec.validate()?;
    let mut levels = Vec::new();
    for &dx in &spec.spacings {
        let grid = FDGrid::stable(spec.tangential_extent, spec.height_extent, dx, spec.safety)?;
        let fd = fd_solve(phi, &grid, times)?;
        levels.push(OracleLevel {
            dx,
            gaps: compare_solutions(u, &fd, spec)?,
        });
    }
    let mut passed = levels[0].gaps.iter().all(|g| g.max_gap <= spec.max_gap);
    let mut refinement_factors = Vec::new();
    if levels.len() > 1 {
        for (a, b) in levels[0].gaps.iter().zip(&levels[1].gaps) {
            // identical agreement counts as converged
            refinement_factors.push(if b.max_gap == 0.0 { f64::INFINITY } else { a.max_gap / b.max_gap });
        }
        passed &= refinement_factors.iter().all(|&f| f >= spec.min_refinement_factor);
    }
    Ok(OracleReport {
        levels,
        refinement_factors,
        passed,
    })
}
