use serde::{Deserialize, Serialize};

use super::fit::log_times;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_panels, pairwise_sum};

/// Largest damping rate tried before the search gives up.
pub const MAX_DAMPING: f64 = 1_048_576.0;

/// Time grid: `count` log-spaced points in `[first_fraction·T, T]`.
const GRID_COUNT: usize = 64;
const FIRST_FRACTION: f64 = 1e-3;

// graded rule near the damped endpoint: dyadic levels down to 2^{-LEVELS}
const LEVELS: usize = 52;
const ORDER: usize = 16;

/// Result of the damping search for the damped singular integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma22Result {
    /// Smallest power of two meeting the bound.
    pub damping: f64,
    pub sup: f64,
    /// `(M, sup)` per candidate, in search order.
    pub history: Vec<(f64, f64)>,
    /// `(t, value)` on the time grid at the accepted damping.
    pub curve: Vec<(f64, f64)>,
}

fn validate(a: f64, b: f64, gamma: f64, horizon: f64, delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&a) || !(0.0..1.0).contains(&b) || a + b > 1.0 {
        return Err(Error::Domain(format!("need 0 <= a, b < 1 and a + b <= 1, got a = {a}, b = {b}")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("need gamma >= 0, got {gamma}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() || !(delta > 0.0) {
        return Err(Error::Domain(format!("need T > 0 and delta > 0, got T = {horizon}, delta = {delta}")));
    }
    Ok(())
}

/// `e^{-Mt} t^γ ∫_0^t e^{Ms} s^{-a} (t-s)^{-b} ds`.
///
/// With `s = tu` the integral is `t^{γ+1-a-b} ∫_0^1 e^{-Mt(1-u)} u^{-a}(1-u)^{-b} du`.
/// The halves are mapped by `u = w^{1/(1-a)}` and `1-u = v^{1/(1-b)}`, which
/// cancel the endpoint powers exactly; the damped right half is integrated on
/// dyadically graded panels so that any scale `Mt` is resolved.
pub fn damped_singular_sup(a: f64, b: f64, gamma: f64, damping: f64, t: f64) -> f64 {
    let mt = damping * t;
    let ea = 1.0 / (1.0 - a);
    let eb = 1.0 / (1.0 - b);
    let mut terms = Vec::new();
    for (w, wt) in gauss_panels(0.0, 0.5_f64.powf(1.0 - a), 16, ORDER) {
        let u = w.powf(ea);
        terms.push(wt * ea * (-mt * (1.0 - u)).exp() * (1.0 - u).powf(-b));
    }
    let vmax = 0.5_f64.powf(1.0 - b);
    let mut hi = vmax;
    for level in 0..=LEVELS {
        let lo = if level == LEVELS { 0.0 } else { 0.5 * hi };
        for (v, wt) in gauss_panels(lo, hi, 1, ORDER) {
            let r = v.powf(eb);
            terms.push(wt * eb * (-mt * r).exp() * (1.0 - r).powf(-a));
        }
        hi = lo;
    }
    t.powf(gamma + 1.0 - a - b) * pairwise_sum(&terms)
}

/// Doubles `M` from 1 until the sup over the time grid is at most `delta`.
pub fn check_lemma22(a: f64, b: f64, gamma: f64, horizon: f64, delta: f64) -> Result<Lemma22Result> {
    validate(a, b, gamma, horizon, delta)?;
    let times = log_times(FIRST_FRACTION * horizon, horizon, GRID_COUNT);
    let mut history = Vec::new();
    let mut m = 1.0;
    loop {
        let curve: Vec<(f64, f64)> = times.iter().map(|&t| (t, damped_singular_sup(a, b, gamma, m, t))).collect();
        let sup = curve.iter().map(|c| c.1).fold(0.0, f64::max);
        if !sup.is_finite() {
            return Err(Error::NonFinite {
                value: sup,
                location: format!("damped singular integral at M = {m}"),
            });
        }
        history.push((m, sup));
        if sup <= delta {
            return Ok(Lemma22Result {
                damping: m,
                sup,
                history,
                curve,
            });
        }
        if m >= MAX_DAMPING {
            return Err(Error::SearchFailure {
                reason: format!("sup {sup:.4e} > delta {delta:e} at the cap M = {MAX_DAMPING}"),
                history,
            });
        }
        m *= 2.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integral_matches_closed_forms() {
        // a = b = 0: (1 - e^{-Mt}) / M
        for (m, t) in [(1.0, 1.0), (64.0, 0.01), (1e5, 0.3)] {
            let v = damped_singular_sup(0.0, 0.0, 0.0, m, t);
            let exact = -(-m * t as f64).exp_m1() / m;
            assert!((v - exact).abs() < 1e-12 * exact.max(1e-300), "{m} {t}: {v} vs {exact}");
        }
        // M = 0 limit: Beta(1/2, 1/2) = π; Beta(1/4, 1/2) via Gamma
        assert!((damped_singular_sup(0.5, 0.5, 0.0, 0.0, 1.0) - PI).abs() < 1e-12);
        let beta = libm::tgamma(0.75) * libm::tgamma(0.5) / libm::tgamma(1.25);
        assert!((damped_singular_sup(0.25, 0.5, 0.0, 0.0, 1.0) - beta).abs() < 1e-10);
        // large Mt: √(π/(Mt)) to leading order for a = b = 1/2
        let mt = 1e8;
        let v = damped_singular_sup(0.5, 0.5, 0.0, mt, 1.0);
        assert!((v / (PI / mt).sqrt() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unsingular_search_is_bounded_by_reciprocal() {
        for delta in [0.5, 0.1, 0.03, 0.004] {
            let r = check_lemma22(0.0, 0.0, 0.0, 1.0, delta).unwrap();
            let bound = (1.0 / delta as f64).ceil().log2().ceil().exp2();
            assert!(r.damping <= bound, "{delta}: {} > {bound}", r.damping);
            assert!(r.sup <= delta);
        }
    }

    #[test]
    fn huge_delta_accepts_first_candidate() {
        let r = check_lemma22(0.5, 0.5, 0.0, 1.0, 1e6).unwrap();
        assert_eq!(r.damping, 1.0);
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn sup_decreases_with_damping() {
        let r = check_lemma22(0.5, 0.5, 0.0, 1.0, 0.1).unwrap();
        assert!(r.history.windows(2).all(|w| w[1].1 < w[0].1));
        assert!(r.curve.iter().all(|c| c.1 <= 0.1));
    }

    #[test]
    fn rejects_inadmissible_exponents() {
        assert!(matches!(check_lemma22(0.6, 0.5, 0.0, 1.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(check_lemma22(0.5, 0.5, -1.0, 1.0, 0.1), Err(Error::Domain(_))));
        assert!(matches!(check_lemma22(0.5, 0.5, 0.0, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn cap_reports_history() {
        match check_lemma22(0.5, 0.5, 0.0, 1.0, 0.01) {
            Err(Error::SearchFailure { history, .. }) => {
                assert_eq!(history.last().unwrap().0, MAX_DAMPING);
                assert_eq!(history.len(), 21);
            }
            other => panic!("expected search failure, got {other:?}"),
        }
    }
}
