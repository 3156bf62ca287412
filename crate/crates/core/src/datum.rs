//! Initial data: parametrised families with closed-form or one-dimensional
//! evolution under the Dirichlet heat semigroup, plus arbitrary evaluators.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gauss_1d, Dimension, HalfSpacePoint, MIN_TIME};
use crate::norms::WeightedExponentSet;
use crate::quadrature::{gauss_panels, pairwise_sum, PANEL_ORDER};

/// Tangential profile `Φ(x')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TangentialProfile {
    /// `A exp(-|x'|² / w²)`.
    Gaussian { amplitude: f64, width: f64 },
}

impl TangentialProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { amplitude, width } => {
                if !amplitude.is_finite() || !(width > 0.0) || !width.is_finite() {
                    return Err(Error::Config(format!("bad Gaussian profile ({amplitude}, {width})")));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Gaussian { amplitude, width } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * (-r2 / (width * width)).exp()
            }
        }
    }

    /// Free heat evolution `(G(t) * Φ)(x')` and its first tangential derivative
    /// in `x'_1` (used for one-dimensional boundaries).
    pub fn heat_evolution(&self, x: &[f64], t: f64) -> f64 {
        match *self {
            Self::Gaussian { amplitude, width } => {
                let w2 = width * width;
                let s2 = w2 + 4.0 * t;
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * (w2 / s2).powf(0.5 * x.len() as f64) * (-r2 / s2).exp()
            }
        }
    }

    /// `∫ |Φ|^r dx'` over `R^{N-1}`.
    pub fn lr_power(&self, boundary_dim: usize, r: f64) -> f64 {
        match *self {
            Self::Gaussian { amplitude, width } => {
                amplitude.abs().powf(r) * (PI * width * width / r).powf(0.5 * boundary_dim as f64)
            }
        }
    }
}

/// Cut-off `ϑ(x_N)` applied beyond `x_N = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormalTail {
    /// `exp(-((x_N - 1)/w)²)` for `x_N > 1`.
    Gaussian { width: f64 },
    /// Indicator of `x_N <= radius` (`radius >= 1`).
    Cutoff { radius: f64 },
    /// No decay (data not in any Lebesgue space on the half-line).
    None,
}

impl NormalTail {
    fn value(&self, z: f64) -> f64 {
        match *self {
            Self::Gaussian { width } if z > 1.0 => {
                let u = (z - 1.0) / width;
                (-u * u).exp()
            }
            Self::Cutoff { radius } if z > radius => 0.0,
            _ => 1.0,
        }
    }

    /// Upper end of the support (`∞` without decay).
    fn support_end(&self) -> f64 {
        match *self {
            Self::Gaussian { width } => 1.0 + 9.0 * width,
            Self::Cutoff { radius } => radius,
            Self::None => f64::INFINITY,
        }
    }

    /// Points where the profile is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Gaussian { .. } => vec![1.0],
            Self::Cutoff { radius } => vec![radius],
            Self::None => vec![],
        }
    }
}

/// Normal profile `Ψ(x_N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormalProfile {
    /// `x_N^λ ϑ(x_N)`.
    Power { lambda: f64, tail: NormalTail },
    /// `exp(-((x_N - c)/w)²)`.
    Gaussian { center: f64, width: f64 },
}

impl NormalProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Power { lambda, tail } => {
                if !(lambda > -1.0) || !lambda.is_finite() {
                    return Err(Error::Config(format!("power exponent must exceed -1, got {lambda}")));
                }
                match tail {
                    NormalTail::Gaussian { width } if !(width > 0.0) => {
                        Err(Error::Config(format!("tail width must be > 0, got {width}")))
                    }
                    NormalTail::Cutoff { radius } if !(radius >= 1.0) => {
                        Err(Error::Config(format!("cutoff radius must be >= 1, got {radius}")))
                    }
                    _ => Ok(()),
                }
            }
            Self::Gaussian { center, width } => {
                if !(center >= 0.0) || !(width > 0.0) {
                    return Err(Error::Config(format!("bad normal Gaussian ({center}, {width})")));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Self::Power { lambda, tail } => {
                if z <= 0.0 {
                    if lambda > 0.0 {
                        0.0
                    } else if lambda == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    z.powf(lambda) * tail.value(z)
                }
            }
            Self::Gaussian { center, width } => {
                let u = (z - center) / width;
                (-u * u).exp()
            }
        }
    }

    fn support(&self) -> (f64, f64) {
        match *self {
            Self::Power { tail, .. } => (0.0, tail.support_end()),
            Self::Gaussian { center, width } => ((center - 9.0 * width).max(0.0), center + 9.0 * width),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Power { tail, .. } => tail.breakpoints(),
            Self::Gaussian { center, .. } => vec![center],
        }
    }

    /// `(∫_0^∞ [G(z-y) - G(z+y)] Ψ(y) dy, ∂_z of it)` under the one-dimensional
    /// Dirichlet heat semigroup at time `t`.
    pub fn dirichlet_evolution(&self, z: f64, t: f64) -> (f64, f64) {
        let reach = 12.0 * t.sqrt();
        let (s0, s1) = self.support();
        let lo = (z - reach).max(s0);
        let hi = (z + reach).min(s1);
        if !(hi > lo) {
            return (0.0, 0.0);
        }
        let panel = 0.5 * t.sqrt();
        let mut cuts = vec![lo, hi];
        cuts.extend(self.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
        if z > lo && z < hi {
            cuts.push(z);
        }
        cuts.sort_by(f64::total_cmp);
        let mut vals = Vec::new();
        let mut ders = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let nodes = if a == 0.0 {
                graded_rule(b, panel)
            } else {
                let panels = ((b - a) / panel).ceil().max(1.0) as usize;
                gauss_panels(a, b, panels, PANEL_ORDER)
            };
            for (y, wt) in nodes {
                let psi = self.value(y);
                if psi == 0.0 {
                    continue;
                }
                let gm = gauss_1d(z - y, t);
                let gp = gauss_1d(z + y, t);
                vals.push(wt * psi * (gm - gp));
                ders.push(wt * psi * (-(z - y) * gm + (z + y) * gp) / (2.0 * t));
            }
        }
        (pairwise_sum(&vals), pairwise_sum(&ders))
    }

    /// `∫_0^∞ |Ψ|^q h(y)^{-αq} dy`, finite iff the profile decays fast enough
    /// at the boundary.
    pub fn weighted_power(&self, q: f64, alpha: f64) -> f64 {
        let (s0, s1) = self.support();
        let s1 = s1.min(s0 + 60.0);
        let mut cuts = vec![s0, s1];
        cuts.extend(self.breakpoints().into_iter().filter(|&b| b > s0 && b < s1));
        cuts.sort_by(f64::total_cmp);
        let mut terms = Vec::new();
        for w in cuts.windows(2) {
            let nodes = if w[0] == 0.0 {
                graded_rule(w[1], 0.25)
            } else {
                gauss_panels(w[0], w[1], ((w[1] - w[0]) / 0.25).ceil() as usize, PANEL_ORDER)
            };
            for (y, wt) in nodes {
                let h = y / (y + 1.0);
                terms.push(wt * self.value(y).abs().powf(q) * h.powf(-alpha * q));
            }
        }
        pairwise_sum(&terms)
    }
}

/// Rule on `[0, b]` geometrically graded towards 0 (for `y^λ` behaviour),
/// then uniform panels of width `<= panel`.
fn graded_rule(b: f64, panel: f64) -> Vec<(f64, f64)> {
    let first = panel.min(b);
    let mut out = Vec::new();
    let mut right = first;
    for _ in 0..24 {
        let left = right * 0.25;
        out.extend(gauss_panels(left, right, 1, PANEL_ORDER));
        right = left;
    }
    if first < b {
        let panels = ((b - first) / panel).ceil().max(1.0) as usize;
        out.extend(gauss_panels(first, b, panels, PANEL_ORDER));
    }
    out
}

/// Serializable descriptor of an initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    Zero,
    /// `Φ(x') Ψ(x_N)`.
    Separable {
        tangential: TangentialProfile,
        normal: NormalProfile,
    },
    /// `x_N^λ |x|^{κ-λ}` on `|x| <= radius`, zero outside.
    Homogeneous { lambda: f64, kappa: f64, radius: f64 },
    /// `(|x - c|² + ε²)^{-e/2}` on `|x - c| <= radius`, `c = (0, height)`.
    RegularizedPower {
        height: f64,
        epsilon: f64,
        exponent: f64,
        radius: f64,
    },
}

impl DatumSpec {
    /// Separable datum `A exp(-|x'|²/w²) x_N^λ ϑ(x_N)`.
    pub fn power_family(lambda: f64, amplitude: f64, width: f64, tail: NormalTail) -> Self {
        Self::Separable {
            tangential: TangentialProfile::Gaussian { amplitude, width },
            normal: NormalProfile::Power { lambda, tail },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Separable { tangential, normal } => {
                tangential.validate()?;
                normal.validate()
            }
            Self::Homogeneous { lambda, kappa, radius } => {
                if !(*lambda >= 0.0) || !kappa.is_finite() || !(*radius > 0.0) {
                    return Err(Error::Config(format!("bad homogeneous datum ({lambda}, {kappa}, {radius})")));
                }
                Ok(())
            }
            Self::RegularizedPower {
                height,
                epsilon,
                exponent,
                radius,
            } => {
                if !(*height > *radius) || !(*epsilon > 0.0) || !exponent.is_finite() {
                    return Err(Error::Config(
                        "regularized power needs epsilon > 0 and support inside the half-space".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn evaluate(&self, x: &HalfSpacePoint) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Separable { tangential, normal } => {
                if x.height <= 0.0 {
                    return 0.0;
                }
                tangential.value(&x.tangential) * normal.value(x.height)
            }
            Self::Homogeneous { lambda, kappa, radius } => {
                let r2: f64 = x.tangential.iter().map(|v| v * v).sum::<f64>() + x.height * x.height;
                if r2 > radius * radius || x.height <= 0.0 {
                    return 0.0;
                }
                x.height.powf(lambda) * r2.powf(0.5 * (kappa - lambda))
            }
            Self::RegularizedPower {
                height,
                epsilon,
                exponent,
                radius,
            } => {
                let d = x.height - height;
                let r2: f64 = x.tangential.iter().map(|v| v * v).sum::<f64>() + d * d;
                if r2 > radius * radius {
                    return 0.0;
                }
                (r2 + epsilon * epsilon).powf(-0.5 * exponent)
            }
        }
    }
}

type Evaluator = Arc<dyn Fn(&HalfSpacePoint) -> f64 + Send + Sync>;

/// Initial datum `φ` on the half-space.
#[derive(Clone)]
pub struct InitialDatum {
    dim: Dimension,
    spec: Option<DatumSpec>,
    evaluator: Evaluator,
    declared_exponents: Option<WeightedExponentSet>,
}

impl fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialDatum")
            .field("dim", &self.dim)
            .field("spec", &self.spec)
            .field("declared_exponents", &self.declared_exponents)
            .finish_non_exhaustive()
    }
}

impl InitialDatum {
    pub fn from_spec(dim: Dimension, spec: DatumSpec) -> Result<Self> {
        spec.validate()?;
        let s = spec.clone();
        Ok(Self {
            dim,
            spec: Some(spec),
            evaluator: Arc::new(move |x| s.evaluate(x)),
            declared_exponents: None,
        })
    }

    pub fn zero(dim: Dimension) -> Self {
        Self::from_spec(dim, DatumSpec::Zero).expect("zero datum is valid")
    }

    /// Datum given by an arbitrary evaluator (no fast paths apply).
    pub fn from_fn(dim: Dimension, f: impl Fn(&HalfSpacePoint) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            spec: None,
            evaluator: Arc::new(f),
            declared_exponents: None,
        }
    }

    pub fn with_exponents(mut self, exps: WeightedExponentSet) -> Result<Self> {
        if exps.dim != self.dim {
            return Err(Error::Config("exponent set and datum disagree on the dimension".into()));
        }
        exps.validate()?;
        self.declared_exponents = Some(exps);
        Ok(self)
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn spec(&self) -> Option<&DatumSpec> {
        self.spec.as_ref()
    }

    pub fn declared_exponents(&self) -> Option<&WeightedExponentSet> {
        self.declared_exponents.as_ref()
    }

    pub fn evaluate(&self, x: &HalfSpacePoint) -> f64 {
        (self.evaluator)(x)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.spec, Some(DatumSpec::Zero))
    }

    /// `(λ, Φ, ϑ)` for the power family.
    pub fn family_params(&self) -> Option<(f64, TangentialProfile, NormalTail)> {
        match self.spec {
            Some(DatumSpec::Separable {
                tangential,
                normal: NormalProfile::Power { lambda, tail },
            }) => Some((lambda, tangential, tail)),
            _ => None,
        }
    }

    /// `(Φ, Ψ)` when the datum is a tensor product.
    pub fn separable_parts(&self) -> Option<(TangentialProfile, NormalProfile)> {
        match self.spec {
            Some(DatumSpec::Separable { tangential, normal }) => Some((tangential, normal)),
            _ => None,
        }
    }

    /// `‖φ‖_{L^q_α}` over the whole half-space for separable data, by
    /// one-dimensional quadrature; `None` for other data.
    pub fn weighted_norm_exact(&self, q: f64, alpha: f64) -> Option<f64> {
        if self.is_zero() {
            return Some(0.0);
        }
        let (tan, normal) = self.separable_parts()?;
        if q.is_infinite() {
            return None;
        }
        let m = self.dim.boundary();
        Some((tan.lr_power(m, q) * normal.weighted_power(q, alpha)).powf(1.0 / q))
    }

    /// `(S₁(t)φ, ∂_{x_N} S₁(t)φ)` at `x` for separable data.
    pub fn separable_evolution(&self, x: &HalfSpacePoint, t: f64) -> Option<(f64, f64)> {
        if self.is_zero() {
            return Some((0.0, 0.0));
        }
        let (tan, normal) = self.separable_parts()?;
        let a = tan.heat_evolution(&x.tangential, t.max(MIN_TIME));
        let (v, d) = normal.dirichlet_evolution(x.height, t.max(MIN_TIME));
        Some((a * v, a * d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_normal_profile_matches_image_formula() {
        // a Gaussian far from the wall evolves freely up to the image term
        let p = NormalProfile::Gaussian { center: 3.0, width: 0.5 };
        let t = 0.2;
        let z = 2.6;
        let (v, d) = p.dirichlet_evolution(z, t);
        let s2 = 0.25 + 4.0 * t;
        let free = |u: f64| (0.25 / s2).sqrt() * (-(u * u) / s2).exp();
        let exact = free(z - 3.0) - free(z + 3.0);
        let dexact = -2.0 * (z - 3.0) / s2 * free(z - 3.0) + 2.0 * (z + 3.0) / s2 * free(z + 3.0);
        assert_relative_eq!(v, exact, max_relative = 1e-12);
        assert_relative_eq!(d, dexact, max_relative = 1e-11);
    }

    #[test]
    fn linear_profile_is_stationary_near_the_wall() {
        // x_N is harmonic and vanishes on the wall: S₁ preserves it away from the tail
        let p = NormalProfile::Power {
            lambda: 1.0,
            tail: NormalTail::Cutoff { radius: 50.0 },
        };
        for z in [0.0, 0.05, 0.5, 2.0] {
            let (v, d) = p.dirichlet_evolution(z, 0.3);
            assert_relative_eq!(v, z, epsilon = 1e-12);
            assert_relative_eq!(d, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn weighted_power_of_pure_power() {
        // ∫_0^R y^{λq} (y/(y+1))^{-αq} dy with λ=2, q=1, α=1: ∫ y (y+1) dy = R³/3 + R²/2
        let p = NormalProfile::Power {
            lambda: 2.0,
            tail: NormalTail::Cutoff { radius: 2.0 },
        };
        assert_relative_eq!(p.weighted_power(1.0, 1.0), 8.0 / 3.0 + 2.0, max_relative = 1e-12);
    }

    #[test]
    fn datum_validation_and_family() {
        let dim = Dimension::new(2).unwrap();
        assert!(InitialDatum::from_spec(dim, DatumSpec::power_family(-1.5, 1.0, 1.0, NormalTail::None)).is_err());
        let d = InitialDatum::from_spec(
            dim,
            DatumSpec::power_family(1.5, 2.0, 1.0, NormalTail::Gaussian { width: 1.0 }),
        )
        .unwrap();
        let (lambda, _, _) = d.family_params().unwrap();
        assert_eq!(lambda, 1.5);
        let x = HalfSpacePoint::new(vec![0.5], 0.7).unwrap();
        assert_relative_eq!(d.evaluate(&x), 2.0 * (-0.25f64).exp() * 0.7f64.powf(1.5));
        assert!(InitialDatum::zero(dim).is_zero());
    }
}
