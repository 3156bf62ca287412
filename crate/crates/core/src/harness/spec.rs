//! Experiment specifications read from TOML; unknown keys are errors at
//! every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::oracle::OracleSpec;
use crate::datum::{DatumSpec, InitialDatum, NormalTail, TangentialProfile};
use crate::error::{Error, Result};
use crate::kernels::Dimension;
use crate::norms::WeightedExponentSet;
use crate::solver::SolverConfig;

/// `(q, p)` and an optional explicit set of boundary exponents `r ∈ [q, p]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSpec {
    pub q: f64,
    pub p: f64,
    #[serde(default)]
    pub r: Option<Vec<f64>>,
}

/// One member of the estimate family: the datum's normal power and amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub lambda: f64,
    pub amplitude: f64,
}

/// Settings of `verify estimates`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatesSpec {
    /// `(q, r)` pairs for the semigroup decay check.
    pub decay_pairs: Vec<[f64; 2]>,
    /// `(q, r)` pairs for the boundary-derivative check.
    pub trace_pairs: Vec<[f64; 2]>,
    /// `q = r` exponents for the boundary contraction check.
    pub contraction_exponents: Vec<f64>,
    /// Datum family of the solution estimate; shares the tangential profile
    /// and tail of the main datum.
    pub family: Vec<MemberSpec>,
    /// `[lo, hi]` and count of the small times for the boundary-potential rate.
    pub w_time_range: [f64; 2],
    pub w_time_count: usize,
    pub run_solver: bool,
}

impl Default for EstimatesSpec {
    fn default() -> Self {
        Self {
            decay_pairs: vec![[1.0, 2.0], [1.0, f64::INFINITY], [2.0, f64::INFINITY]],
            trace_pairs: vec![[1.0, f64::INFINITY], [2.0, 4.0]],
            contraction_exponents: vec![1.0, 2.0, f64::INFINITY],
            family: vec![
                MemberSpec { lambda: 1.5, amplitude: 1.0 },
                MemberSpec { lambda: 2.0, amplitude: 0.5 },
                MemberSpec { lambda: 2.5, amplitude: 2.0 },
            ],
            w_time_range: [1e-4, 1e-2],
            w_time_count: 5,
            run_solver: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub directory: PathBuf,
    /// Write binary field dumps of the solution trajectories.
    pub dump_fields: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            dump_fields: true,
        }
    }
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    pub dimension: usize,
    pub exponents: ExponentSpec,
    pub datum: DatumSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub estimates: EstimatesSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentSpec {
    /// Reference problem: `N = 2`, `q = 1`, `p = ∞`, `λ = 1.5` with Gaussian
    /// tangential profile and Gaussian tail.
    pub fn reference() -> Self {
        Self {
            id: "reference".into(),
            dimension: 2,
            exponents: ExponentSpec {
                q: 1.0,
                p: f64::INFINITY,
                r: None,
            },
            datum: DatumSpec::power_family(1.5, 1.0, 1.0, NormalTail::Gaussian { width: 1.0 }),
            solver: SolverConfig::default(),
            oracle: OracleSpec::default(),
            estimates: EstimatesSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn dim(&self) -> Result<Dimension> {
        Dimension::new(self.dimension)
    }

    pub fn exponent_set(&self) -> Result<WeightedExponentSet> {
        let dim = self.dim()?;
        match &self.exponents.r {
            Some(r) => WeightedExponentSet::with_r_values(dim, self.exponents.q, self.exponents.p, r.clone()),
            None => WeightedExponentSet::new(dim, self.exponents.q, self.exponents.p),
        }
    }

    /// Checks every section, including admissibility of the exponents.
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(Error::Config(format!("experiment id must be a plain non-empty name, got {:?}", self.id)));
        }
        self.exponent_set()?;
        self.datum.validate()?;
        self.solver.validate()?;
        self.oracle.validate()?;
        let e = &self.estimates;
        if !(e.w_time_range[0] > 0.0 && e.w_time_range[1] > e.w_time_range[0]) || e.w_time_count < 4 {
            return Err(Error::Config("w_time_range must be increasing and positive with >= 4 times".into()));
        }
        Ok(())
    }

    /// The main datum, carrying the exponent set.
    pub fn initial_datum(&self) -> Result<InitialDatum> {
        InitialDatum::from_spec(self.dim()?, self.datum.clone())?.with_exponents(self.exponent_set()?)
    }

    /// Tangential profile and tail shared by the estimate family.
    fn family_shape(&self) -> Result<(f64, NormalTail)> {
        match &self.datum {
            DatumSpec::Separable {
                tangential: TangentialProfile::Gaussian { width, .. },
                normal: crate::datum::NormalProfile::Power { tail, .. },
            } => Ok((*width, *tail)),
            _ => Err(Error::Config("the estimate family needs a separable power datum".into())),
        }
    }

    /// Members of the estimate family, labelled by `(λ, amplitude)`.
    pub fn family(&self) -> Result<Vec<(String, InitialDatum)>> {
        let (width, tail) = self.family_shape()?;
        self.estimates
            .family
            .iter()
            .map(|m| {
                let phi = InitialDatum::from_spec(
                    self.dim()?,
                    DatumSpec::power_family(m.lambda, m.amplitude, width, tail),
                )?;
                Ok((format!("lambda={},amplitude={}", m.lambda, m.amplitude), phi))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
id = "demo"
dimension = 2

[exponents]
q = 1
p = inf

[datum]
kind = "separable"
tangential = { kind = "gaussian", amplitude = 1.0, width = 1.0 }
normal = { kind = "power", lambda = 1.5, tail = { kind = "gaussian", width = 1.0 } }

[solver]
max_iterations = 20

[solver.grid]
tangential_nodes = 65
normal_nodes = 33
"#;

    #[test]
    fn parses_minimal_spec_with_defaults() {
        let s = ExperimentSpec::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.solver.max_iterations, 20);
        assert_eq!(s.solver.grid.tangential_nodes, 65);
        assert_eq!(s.solver.horizon, 1.0);
        assert_eq!(s.oracle, OracleSpec::default());
        assert_eq!(s.family().unwrap().len(), 3);
        assert_eq!(s.exponent_set().unwrap().r_values.len(), 3);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for (from, to) in [
            ("max_iterations = 20", "max_iteration = 20"),
            ("q = 1", "q = 1\nextra = 2"),
            ("id = \"demo\"", "id = \"demo\"\ncolour = 1"),
            ("width = 1.0 }\n", "width = 1.0, shape = 2 }\n"),
        ] {
            let text = MINIMAL.replacen(from, to, 1);
            assert!(matches!(ExperimentSpec::from_toml_str(&text), Err(Error::Parse(_))), "{to}");
        }
    }

    #[test]
    fn inadmissible_exponents_are_rejected() {
        let text = MINIMAL.replace("p = inf", "p = 2");
        assert!(matches!(ExperimentSpec::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn reference_round_trips() {
        let s = ExperimentSpec::reference();
        let text = s.to_toml_string().unwrap();
        assert_eq!(ExperimentSpec::from_toml_str(&text).unwrap(), s);
    }
}
