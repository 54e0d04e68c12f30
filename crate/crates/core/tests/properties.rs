mod common;

use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn quadratic_expansion_matches_frobenius(seed in any::<u64>()) {
        common::expansion_invariant(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn scc_solutions_satisfy_kkt(seed in any::<u64>()) {
        common::scc_kkt(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn group_lasso_solutions_satisfy_kkt(seed in any::<u64>()) {
        common::group_lasso_kkt(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn objective_traces_never_increase(seed in any::<u64>()) {
        common::monotone_traces(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn zero_variance_gives_zero_coefficient(seed in any::<u64>()) {
        common::zero_coordinate(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn fits_are_bit_reproducible(seed in any::<u64>()) {
        common::determinism(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn feature_permutation_permutes_omega(seed in any::<u64>()) {
        common::permutation_equivariance(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn unpenalized_omega_scales_quadratically(seed in any::<u64>()) {
        common::response_scaling(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn ridge_equals_direct_formula_for_invertible_prior(seed in any::<u64>()) {
        common::ridge_matches_direct_formula(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn variational_form_reproduces_group_lasso_objective(seed in any::<u64>()) {
        common::variational_equivalence(seed).map_err(TestCaseError::fail)?;
    }
}
