//! Experiment driver: slope and constant fits, the kernel and quadrature
//! check suites, estimate verification, the solver-versus-oracle comparison,
//! experiment specs and report emission.

mod checks;
mod fit;
mod lemma22;
mod membership;
mod oracle;
pub mod report;
pub mod runs;
mod smoothing;
pub mod spec;
mod theorem;

pub use checks::{kernel_checks, moment_bound_fits, quadrature_checks, CheckResult, MomentFit};
pub use fit::{fit_decay_exponent, log_times, FitResult};
pub use lemma22::{check_lemma22, damped_singular_sup, Lemma22Result};
pub use membership::{membership_check, MembershipCase, MembershipReport};
pub use oracle::{compare_solutions, compare_with_oracle, OracleGap, OracleLevel, OracleReport, OracleSpec};
pub use smoothing::{verify_smoothing, ScaledDatum, ScaledNormal, SmoothingOp, SmoothingReport};
pub use theorem::{
    solution_profiles, verify_theorem11, w_smallness_fit, FamilyMember, QuantityProfile, QuantityStability, TheoremReport,
    WSmallness,
};
