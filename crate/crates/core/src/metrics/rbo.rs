//! Rank-biased overlap between two rankings of the same item set.
//!
//! With agreement `A_d = |a[..d] ∩ b[..d]| / d` and persistence `p`:
//!
//! * truncated: `(1 - p) * Σ_{d=1..n} p^(d-1) * A_d`
//! * extrapolated: truncated `+ A_n * p^n`, i.e. the agreement seen at depth
//!   `n` is assumed to continue forever.
//!
//! Both are evaluated through the disagreement sum
//! `D = (1 - p) * Σ p^(d-1) * (1 - A_d)` so that identical lists give exactly
//! `1.0` (extrapolated) and `extrapolated >= truncated` holds in floating
//! point, not just in exact arithmetic.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::RankedSegments;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RboVariant {
    #[default]
    Extrapolated,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboParams {
    pub p: f64,
    pub variant: RboVariant,
}

impl Default for RboParams {
    fn default() -> Self {
        Self {
            p: 0.9,
            variant: RboVariant::Extrapolated,
        }
    }
}

impl RboParams {
    pub fn new(p: f64, variant: RboVariant) -> Result<Self, MetricsError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(MetricsError::InvalidPersistence(p));
        }
        Ok(Self { p, variant })
    }
}

/// Checks that `a` and `b` are duplicate-free orderings of one item set and
/// returns each item's position in `b`, keyed by position in `a`.
pub(crate) fn paired_positions<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<Vec<usize>, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut pos_b = HashMap::with_capacity(b.len());
    for (i, item) in b.iter().enumerate() {
        if pos_b.insert(item, i).is_some() {
            return Err(MetricsError::DuplicateItem);
        }
    }
    let mut seen = HashSet::with_capacity(a.len());
    a.iter()
        .map(|item| {
            if !seen.insert(item) {
                return Err(MetricsError::DuplicateItem);
            }
            pos_b.get(item).copied().ok_or(MetricsError::LabelSetMismatch)
        })
        .collect()
}

pub fn rbo<T: Eq + Hash>(a: &[T], b: &[T], params: RboParams) -> Result<f64, MetricsError> {
    let p = RboParams::new(params.p, params.variant)?.p;
    let pos_b = paired_positions(a, b)?;
    let n = a.len();
    if n == 0 {
        return Err(MetricsError::EmptyInput);
    }

    // overlap[d] via first-seen depth: an item joins the common prefix at
    // depth max(pos_a, pos_b) + 1
    let mut joins = vec![0usize; n];
    for (ia, &ib) in pos_b.iter().enumerate() {
        joins[ia.max(ib)] += 1;
    }
    let mut overlap = 0usize;
    let mut disagreement = 0.0;
    let mut weight = 1.0 - p; // (1 - p) * p^(d-1)
    let mut last_agreement = 0.0;
    for (d, joined) in joins.into_iter().enumerate() {
        overlap += joined;
        let depth = d + 1;
        last_agreement = overlap as f64 / depth as f64;
        if overlap != depth {
            disagreement += weight * (1.0 - last_agreement);
        }
        weight *= p;
    }
    let tail = p.powi(n as i32);
    let value = match params.variant {
        RboVariant::Truncated => (1.0 - tail) - disagreement,
        RboVariant::Extrapolated => 1.0 - disagreement - (1.0 - last_agreement) * tail,
    };
    Ok(value.clamp(0.0, 1.0))
}

pub fn rbo_ranked(
    a: &RankedSegments,
    b: &RankedSegments,
    params: RboParams,
) -> Result<f64, MetricsError> {
    rbo(&a.order, &b.order, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ext(p: f64) -> RboParams {
        RboParams::new(p, RboVariant::Extrapolated).unwrap()
    }

    fn trunc(p: f64) -> RboParams {
        RboParams::new(p, RboVariant::Truncated).unwrap()
    }

    // literal finite sum, no shared code with the implementation
    fn oracle(a: &[u32], b: &[u32], p: f64) -> (f64, f64) {
        let n = a.len();
        let mut t = 0.0;
        let mut last = 0.0;
        for d in 1..=n {
            let sa: HashSet<_> = a[..d].iter().collect();
            let common = b[..d].iter().filter(|x| sa.contains(x)).count();
            last = common as f64 / d as f64;
            t += p.powi(d as i32 - 1) * last;
        }
        t *= 1.0 - p;
        (t, t + last * p.powi(n as i32))
    }

    #[test]
    fn identical_lists_are_exactly_one() {
        for n in 1..50u32 {
            let a: Vec<u32> = (0..n).collect();
            for p in [0.1, 0.5, 0.9, 0.99] {
                assert_eq!(rbo(&a, &a, ext(p)).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn three_item_swap() {
        let (a, b) = ([1, 2, 3], [1, 3, 2]);
        assert!((rbo(&a, &b, trunc(0.9)).unwrap() - 0.226).abs() < 1e-12);
        assert!((rbo(&a, &b, ext(0.9)).unwrap() - 0.955).abs() < 1e-12);
        let (ot, oe) = oracle(&a, &b, 0.9);
        assert!((ot - 0.226).abs() < 1e-12 && (oe - 0.955).abs() < 1e-12);
    }

    #[test]
    fn reversed_pair() {
        assert!((rbo(&["a", "b"], &["b", "a"], trunc(0.9)).unwrap() - 0.09).abs() < 1e-12);
        assert!((rbo(&["a", "b"], &["b", "a"], ext(0.9)).unwrap() - 0.90).abs() < 1e-12);
    }

    #[test]
    fn precondition_errors() {
        assert_eq!(
            rbo(&[1, 2], &[1, 2, 3], ext(0.9)),
            Err(MetricsError::LengthMismatch { left: 2, right: 3 })
        );
        assert_eq!(rbo(&[1, 2], &[1, 3], ext(0.9)), Err(MetricsError::LabelSetMismatch));
        assert_eq!(rbo(&[1, 1], &[1, 2], ext(0.9)), Err(MetricsError::DuplicateItem));
        assert_eq!(rbo::<u32>(&[], &[], ext(0.9)), Err(MetricsError::EmptyInput));
        assert_eq!(
            RboParams::new(1.0, RboVariant::Truncated),
            Err(MetricsError::InvalidPersistence(1.0))
        );
        let bad = RboParams { p: 0.0, variant: RboVariant::Extrapolated };
        assert_eq!(rbo(&[1], &[1], bad), Err(MetricsError::InvalidPersistence(0.0)));
    }

    #[test]
    fn matches_oracle_on_shuffles() {
        use rand::seq::SliceRandom;
        let mut rng = crate::perturb::rng_from_seed(11);
        for n in 1..30u32 {
            let a: Vec<u32> = (0..n).collect();
            let mut b = a.clone();
            b.shuffle(&mut rng);
            for p in [0.5, 0.9] {
                let (ot, oe) = oracle(&a, &b, p);
                assert!((rbo(&a, &b, trunc(p)).unwrap() - ot).abs() < 1e-12);
                assert!((rbo(&a, &b, ext(p)).unwrap() - oe).abs() < 1e-12);
                assert_eq!(rbo(&a, &b, ext(p)).unwrap(), rbo(&b, &a, ext(p)).unwrap());
            }
        }
    }
}
