use serde::{Deserialize, Serialize};

use crate::datum::{DatumSpec, InitialDatum, NormalTail};
use crate::error::Result;
use crate::kernels::{Dimension, HalfSpacePoint};
use crate::norms::{classify_by_refinement, membership_criterion, SampledField, WeightedExponentSet};

/// Refinement classification of `Φ(x') x_N^λ ϑ(x_N)` against the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipCase {
    pub lambda: f64,
    pub expected_member: bool,
    pub classified_member: bool,
    pub increment_ratio: f64,
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub q: f64,
    pub p: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub cases: Vec<MembershipCase>,
    pub passed: bool,
}

// coarsest cell and level count of the refinement sequence
const COARSE_CELL: f64 = 1.0 / 16.0;
const LEVELS: usize = 5;
const NORMAL_EXTENT: f64 = 3.0;
const TANGENTIAL_NODES: usize = 49;

/// Classifies `λ = threshold ± offset` by the refinement ratio of
/// `‖φ‖_{L^q_{α(p)}}` on cell-centred normal grids and compares with the
/// exact membership criterion.
pub fn membership_check(dim: Dimension, q: f64, p: f64, offset: f64) -> Result<MembershipReport> {
    let exps = WeightedExponentSet::new(dim, q, p)?;
    let threshold = exps.membership_threshold();
    let alpha = exps.alpha_p();
    let tangential: Vec<f64> = (0..TANGENTIAL_NODES)
        .map(|k| -6.0 + 12.0 * k as f64 / (TANGENTIAL_NODES - 1) as f64)
        .collect();
    let mut cases = Vec::new();
    for lambda in [threshold - offset, threshold + offset] {
        let phi = InitialDatum::from_spec(
            dim,
            DatumSpec::power_family(lambda, 1.0, 1.0, NormalTail::Gaussian { width: 1.0 }),
        )?;
        let sample = |h: f64| {
            let n = (NORMAL_EXTENT / h).round() as usize;
            let normal: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * h).collect();
            SampledField::from_fn_2d(&tangential, &normal, |x, z| {
                phi.evaluate(&HalfSpacePoint::new_unchecked(vec![x], z))
            })
        };
        let class = classify_by_refinement(sample, q, alpha, COARSE_CELL, LEVELS)?;
        cases.push(MembershipCase {
            lambda,
            expected_member: membership_criterion(lambda, &exps),
            classified_member: class.converges,
            increment_ratio: class.increment_ratio,
            norms: class.norms,
        });
    }
    let passed = cases.iter().all(|c| c.expected_member == c.classified_member);
    Ok(MembershipReport {
        q,
        p,
        threshold,
        alpha,
        cases,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_both_sides_of_the_threshold() {
        let rep = membership_check(Dimension::new(2).unwrap(), 1.0, f64::INFINITY, 0.25).unwrap();
        assert_eq!(rep.threshold, 1.0);
        assert!(rep.passed, "{rep:?}");
        assert!(!rep.cases[0].classified_member && rep.cases[1].classified_member);
    }
}
