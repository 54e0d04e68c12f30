//! Numerical checks of the estimator's theoretical guarantees.

mod bound;
mod coherence;
mod consistency;
mod identifiability;

pub use bound::{bound_terms, simulate_prediction_error, thm41_bound_report, BoundReport, BoundTerms};
pub use coherence::{
    coherence_report, coherence_report_seeded, mutual_coherence, rho_min, rho_min_exact, rho_min_sampled,
    CoherenceReport, DEFAULT_EXHAUSTIVE_LIMIT,
};
pub use consistency::{
    sample_random_effects, shared_design_discrepancy, thm42_consistency_sweep, thm42_default_instance,
    ConsistencyRow, ConsistencyTable, LAMBDA_MULTIPLIERS,
};
pub use identifiability::{identifiability_report, IdentifiabilityReport};
