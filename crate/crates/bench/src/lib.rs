//! Shared fixtures for the criterion benchmarks in `benches/`.

use graphgrow_core::{build_truth, ridge_covariance, sample_gaussian, Result, ScenarioSpec, SymMatrix};

/// Ridge-regularised sample covariance of a hub scenario with `n = 2d` rows.
pub fn hub_anchor(d: usize, seed: u64) -> Result<SymMatrix> {
    let spec = ScenarioSpec::hub(d, 0.25, 2 * d, seed);
    let truth = build_truth(&spec)?;
    ridge_covariance(&sample_gaussian(&truth.sigma, spec.n, seed, 0)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_positive_definite() {
        let s = hub_anchor(20, 1).unwrap();
        assert_eq!(s.dim(), 20);
        assert!(s.is_positive_definite());
    }
}
