//! End-to-end experiment runs assembled into [`Report`]s.

use super::checks::{kernel_checks, moment_bound_fits, quadrature_checks, CheckResult};
use super::fit::log_times;
use super::lemma22::check_lemma22;
use super::oracle::compare_with_oracle;
use super::report::{Report, SummaryEntry};
use super::smoothing::{verify_smoothing, ScaledDatum, ScaledNormal, SmoothingOp, SmoothingReport};
use super::spec::ExperimentSpec;
use super::theorem::{verify_theorem11, w_smallness_fit};
use crate::datum::{DatumSpec, TangentialProfile};
use crate::error::{Error, Result};
use crate::kernels::Dimension;
use crate::norms::reciprocal;
use crate::operators::FieldTrajectory;
use crate::solver::{picard_solve, Solution};

fn check_entry(c: &CheckResult) -> SummaryEntry {
    SummaryEntry::new(&c.name, c.passed)
        .value("error", c.error)
        .value("tolerance", c.tolerance)
        .detail(&c.detail)
}

/// Kernel identities, normalization and the boundary semigroup laws.
pub fn kernels_report() -> Result<Report> {
    let mut r = Report::new("kernels");
    for c in kernel_checks()? {
        r.push(check_entry(&c));
    }
    Ok(r)
}

/// Quadrature exactness, singular time integrals and the moment-bound slopes.
pub fn quadrature_report() -> Result<Report> {
    let mut r = Report::new("quadrature");
    for c in quadrature_checks()? {
        r.push(check_entry(&c));
    }
    for m in moment_bound_fits()? {
        let name = format!("moment_k{}_j{}", m.k, m.j);
        r.add_samples(&name, &m.samples);
        r.push(
            SummaryEntry::new(name, m.passed)
                .value("slope", m.fit.slope)
                .value("expected_slope", m.expected_slope)
                .value("residual", m.fit.residual),
        );
    }
    Ok(r)
}

/// Damping search for the damped singular integral, with its sup history.
pub fn lemma22_report(a: f64, b: f64, gamma: f64, horizon: f64, delta: f64) -> Result<Report> {
    let mut r = Report::new("lemma22");
    match check_lemma22(a, b, gamma, horizon, delta) {
        Ok(res) => {
            r.add_samples("sup_curve", &res.curve);
            r.add_samples("sup_by_damping", &res.history);
            r.push(
                SummaryEntry::new("damping_search", true)
                    .value("damping", res.damping)
                    .value("sup", res.sup)
                    .value("delta", delta),
            );
        }
        Err(Error::SearchFailure { reason, history }) => {
            r.add_samples("sup_by_damping", &history);
            r.push(SummaryEntry::new("damping_search", false).value("delta", delta).detail(reason));
        }
        Err(e) => return Err(e),
    }
    Ok(r)
}

fn smoothing_entry(r: &mut Report, name: String, rep: &SmoothingReport) {
    r.add_samples(&name, &rep.samples);
    let mut e = SummaryEntry::new(name, rep.passed)
        .value("slope", rep.fit.slope)
        .value("residual", rep.fit.residual)
        .value("sup_ratio", rep.sup_ratio)
        .value("constant", rep.constants.0)
        .value("constant_rescaled", rep.constants.1);
    if let Some(s) = rep.expected_slope {
        e = e.value("expected_slope", s);
    }
    r.push(e);
}

/// Time sets of the smoothing checks: the decay and contraction laws are
/// scale-free, the boundary-derivative law needs `√t` small against the
/// unit length of the weight.
pub fn smoothing_times(op: SmoothingOp) -> Vec<f64> {
    match op {
        SmoothingOp::S1 => log_times(0.01, 1.0, 6),
        SmoothingOp::DxnS1Boundary => log_times(1e-5, 1e-3, 6),
        SmoothingOp::S2 => log_times(0.01, 100.0, 9),
    }
}

/// Decay slopes of the semigroups over the pairs configured in `spec`.
pub fn smoothing_report(spec: &ExperimentSpec) -> Result<Report> {
    let dim = spec.dim()?;
    let mut r = Report::new(format!("{}-smoothing", spec.id));
    let gaussian = ScaledDatum {
        amplitude: 1.0,
        tangential_width: 1.0,
        normal: ScaledNormal::Gaussian { center: 2.0, width: 1.0 },
    };
    for &[q, rr] in &spec.estimates.decay_pairs {
        let rep = verify_smoothing(SmoothingOp::S1, dim, q, rr, &gaussian, &smoothing_times(SmoothingOp::S1))?;
        smoothing_entry(&mut r, format!("decay_q{q}_r{rr}"), &rep);
    }
    for &[q, rr] in &spec.estimates.trace_pairs {
        // one power above the membership threshold of L^q_{α(r)}
        let threshold = dim.boundary() as f64 * (reciprocal(q) - reciprocal(rr));
        let datum = ScaledDatum {
            amplitude: 1.0,
            tangential_width: 1.0,
            normal: ScaledNormal::Power {
                lambda: threshold + 1.0,
                radius: 3.0,
            },
        };
        let rep = verify_smoothing(
            SmoothingOp::DxnS1Boundary,
            dim,
            q,
            rr,
            &datum,
            &smoothing_times(SmoothingOp::DxnS1Boundary),
        )?;
        smoothing_entry(&mut r, format!("trace_q{q}_r{rr}"), &rep);
    }
    if dim.get() == 2 {
        for &q in &spec.estimates.contraction_exponents {
            let rep = verify_smoothing(SmoothingOp::S2, dim, q, q, &gaussian, &smoothing_times(SmoothingOp::S2))?;
            smoothing_entry(&mut r, format!("contraction_q{q}"), &rep);
        }
    }
    Ok(r)
}

/// Solution estimate over the spec's family and the boundary-potential rate.
///
/// `solve` is called once per admissible member (index, datum) so callers may
/// reuse a solution they already hold.
pub fn theorem_report(
    spec: &ExperimentSpec,
    solve: impl FnMut(usize, &crate::datum::InitialDatum) -> Result<Solution>,
) -> Result<Report> {
    let exps = spec.exponent_set()?;
    let mut r = Report::new(format!("{}-theorem", spec.id));
    if spec.estimates.run_solver {
        let rep = verify_theorem11(&spec.family()?, &exps, solve)?;
        for m in &rep.members {
            for p in &m.profiles {
                r.add_samples(&format!("{}:{}", m.label, p.name), &p.samples);
            }
            r.push(
                SummaryEntry::new(format!("member:{}", m.label), true)
                    .value("weighted_norm", m.weighted_norm)
                    .value("damping", m.damping)
                    .value("iterations", m.iterations as f64)
                    .detail(if m.admissible { "admissible" } else { "inadmissible: datum outside L^q_{alpha(p)}" }),
            );
        }
        for q in &rep.quantities {
            let mut e = SummaryEntry::new(format!("constant:{}", q.name), q.passed).value("spread", q.spread);
            for (k, c) in q.constants.iter().enumerate() {
                e = e.value(&format!("member{k}"), *c);
            }
            r.push(e);
        }
    }
    let (amplitude, width) = match &spec.datum {
        DatumSpec::Separable {
            tangential: TangentialProfile::Gaussian { amplitude, width },
            ..
        } => (*amplitude, *width),
        _ => (1.0, 1.0),
    };
    let [lo, hi] = spec.estimates.w_time_range;
    for w in w_smallness_fit(amplitude, width, &exps.r_values, &log_times(lo, hi, spec.estimates.w_time_count))? {
        let name = format!("w_rate_r{}", w.r);
        r.add_samples(&name, &w.samples);
        r.push(
            SummaryEntry::new(name, w.passed)
                .value("slope", w.fit.slope)
                .value("expected_slope", 0.5)
                .value("residual", w.fit.residual),
        );
    }
    Ok(r)
}

/// Solver run summary: contraction, iterations and residual.
pub fn solve_report(spec: &ExperimentSpec, sol: &Solution) -> Report {
    let d = &sol.diagnostics;
    let mut r = Report::new(format!("{}-solve", spec.id));
    r.add_samples("energy", &sol.energies);
    r.add_samples("damping_ratio", &d.damping_history);
    let iters: Vec<(f64, f64)> = d.distances.iter().enumerate().map(|(k, &v)| ((k + 1) as f64, v)).collect();
    r.add_samples("picard_distance", &iters);
    r.push(
        SummaryEntry::new("picard", d.converged)
            .value("damping", d.damping)
            .value("contraction_ratio", d.contraction_ratio)
            .value("iterations", d.iterations as f64)
            .value("relative_residual", d.relative_residual()),
    );
    r
}

/// Kernel solution against the finite-difference oracle.
pub fn oracle_report(spec: &ExperimentSpec, u: &FieldTrajectory) -> Result<Report> {
    let phi = spec.initial_datum()?;
    let rep = compare_with_oracle(u, &phi, &spec.solver.output_times, &spec.oracle)?;
    let mut r = Report::new(format!("{}-oracle", spec.id));
    for level in &rep.levels {
        let max: Vec<(f64, f64)> = level.gaps.iter().map(|g| (g.t, g.max_gap)).collect();
        let l2: Vec<(f64, f64)> = level.gaps.iter().map(|g| (g.t, g.l2_gap)).collect();
        r.add_samples(&format!("max_gap_dx{}", level.dx), &max);
        r.add_samples(&format!("l2_gap_dx{}", level.dx), &l2);
    }
    let worst = rep.levels[0].gaps.iter().map(|g| g.max_gap).fold(0.0, f64::max);
    let weakest = rep.refinement_factors.iter().cloned().fold(f64::INFINITY, f64::min);
    r.push(
        SummaryEntry::new("oracle_gap", rep.passed)
            .value("max_gap", worst)
            .value("min_refinement_factor", weakest),
    );
    Ok(r)
}

/// Runs the solver on the spec's datum.
pub fn solve_spec(spec: &ExperimentSpec) -> Result<Solution> {
    picard_solve(&spec.initial_datum()?, &spec.solver)
}

/// Dimension guard shared by the solver-backed runs.
pub fn require_plane(spec: &ExperimentSpec) -> Result<Dimension> {
    let dim = spec.dim()?;
    if dim.get() != 2 {
        return Err(Error::Config(format!("solver-backed runs support N = 2 only, got N = {}", dim.get())));
    }
    Ok(dim)
}
