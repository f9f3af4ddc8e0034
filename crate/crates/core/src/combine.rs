//! Variance-minimizing combination of candidate estimates for one entry.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, CompletionError, Result};

/// A completed value for one position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryEstimate {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    /// Uncertainty proxy in the units of the combination weights. Finite
    /// and positive; a ranking signal, not a calibrated standard error.
    pub variance_proxy: f64,
    /// Number of circuits (minors or rank-1 candidates) that were combined.
    pub support: usize,
}

/// One candidate estimate and its deviation proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub value: f64,
    pub proxy: f64,
}

impl Candidate {
    pub fn new(value: f64, proxy: f64) -> Self {
        Candidate { value, proxy }
    }
}

impl From<(f64, f64)> for Candidate {
    fn from((value, proxy): (f64, f64)) -> Self {
        Candidate { value, proxy }
    }
}

fn check(candidates: &[Candidate]) -> Result<()> {
    if candidates.is_empty() {
        return Err(CompletionError::NoCandidates);
    }
    if let Some(c) = candidates.iter().find(|c| !(c.proxy.is_finite() && c.proxy > 0.0)) {
        return Err(invalid(format!("variance proxy {} is not finite and positive", c.proxy)));
    }
    if let Some(c) = candidates.iter().find(|c| !c.value.is_finite()) {
        return Err(invalid(format!("candidate value {} is not finite", c.value)));
    }
    Ok(())
}

/// Normalized weights `q(k) ∝ 1 / proxy_k²`.
pub fn inverse_square_weights(candidates: &[Candidate]) -> Result<Vec<f64>> {
    check(candidates)?;
    // Rescale by the smallest proxy first so tiny proxies do not overflow.
    let min_proxy = candidates.iter().map(|c| c.proxy).fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = candidates
        .iter()
        .map(|c| {
            let r = min_proxy / c.proxy;
            r * r
        })
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Combines candidates as `Σ q(k)·value_k` with `q(k) ∝ 1/proxy_k²`,
/// ignoring covariances between candidates.
pub fn combine_min_variance(candidates: &[Candidate]) -> Result<f64> {
    let q = inverse_square_weights(candidates)?;
    Ok(candidates.iter().zip(&q).map(|(c, w)| w * c.value).sum())
}

/// Proxy of the combined estimate, `(Σ 1/proxy_k²)^(-1/2)`.
pub fn combined_proxy(candidates: &[Candidate]) -> Result<f64> {
    check(candidates)?;
    let min_proxy = candidates.iter().map(|c| c.proxy).fold(f64::INFINITY, f64::min);
    let scaled: f64 = candidates
        .iter()
        .map(|c| {
            let r = min_proxy / c.proxy;
            r * r
        })
        .sum();
    Ok(min_proxy / scaled.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cands(v: &[(f64, f64)]) -> Vec<Candidate> {
        v.iter().copied().map(Candidate::from).collect()
    }

    #[test]
    fn single_candidate_passes_through() {
        assert_eq!(combine_min_variance(&cands(&[(5.0, 1.0)])).unwrap(), 5.0);
    }

    #[test]
    fn equal_proxies_average() {
        assert_relative_eq!(combine_min_variance(&cands(&[(4.0, 1.0), (8.0, 1.0)])).unwrap(), 6.0);
    }

    #[test]
    fn inverse_square_weighting() {
        // q = (1, 1/9) / (10/9) = (0.9, 0.1)
        let v = combine_min_variance(&cands(&[(4.0, 1.0), (10.0, 3.0)])).unwrap();
        assert_relative_eq!(v, 4.6, epsilon = 1e-12);
    }

    #[test]
    fn combined_proxy_of_equal_pair() {
        let p = combined_proxy(&cands(&[(0.0, 2.0), (0.0, 2.0)])).unwrap();
        assert_relative_eq!(p, 2.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            combine_min_variance(&[]),
            Err(CompletionError::NoCandidates)
        ));
        assert!(matches!(
            combine_min_variance(&cands(&[(1.0, 0.0)])),
            Err(CompletionError::InvalidInput(_))
        ));
        assert!(matches!(
            combine_min_variance(&cands(&[(1.0, f64::NAN)])),
            Err(CompletionError::InvalidInput(_))
        ));
        assert!(matches!(
            combine_min_variance(&cands(&[(1.0, -1.0)])),
            Err(CompletionError::InvalidInput(_))
        ));
    }

    fn arb_candidates() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-100.0..100.0f64, 1e-3..1e3f64), 1..12)
    }

    proptest! {
        #[test]
        fn scale_equivariant_in_values(c in arb_candidates(), s in -10.0..10.0f64) {
            let base = combine_min_variance(&cands(&c)).unwrap();
            let scaled: Vec<_> = c.iter().map(|&(v, p)| (s * v, p)).collect();
            let got = combine_min_variance(&cands(&scaled)).unwrap();
            prop_assert!((got - s * base).abs() <= 1e-9 * (1.0 + (s * base).abs()));
        }

        #[test]
        fn invariant_under_common_proxy_rescale(c in arb_candidates(), s in 1e-3..1e3f64) {
            let base = combine_min_variance(&cands(&c)).unwrap();
            let scaled: Vec<_> = c.iter().map(|&(v, p)| (v, s * p)).collect();
            let got = combine_min_variance(&cands(&scaled)).unwrap();
            prop_assert!((got - base).abs() <= 1e-9 * (1.0 + base.abs()));
        }

        #[test]
        fn result_within_candidate_hull(c in arb_candidates()) {
            let v = combine_min_variance(&cands(&c)).unwrap();
            let lo = c.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
            let hi = c.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }
}
