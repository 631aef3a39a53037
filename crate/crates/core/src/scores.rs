//! Generalized inverse quantile conformity scores.
//!
//! The score of label `y` is the infimum of the levels `tau` at which the
//! randomized set `S(u, tau)` contains `y`. For a label at 1-based rank `r`
//! with prefix mass `s_r` and probability `pi_(r)` it equals
//! `s_r - u * pi_(r)`. The set of admissible levels is open at that
//! endpoint for `u` in `(0, 1)`, so the infimum is used instead of a minimum.

use crate::error::{Error, Result};
use crate::oracle_sets::{generalized_inverse_set, SortedProbs};

/// Conformity score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ConformityScore(f64);

impl ConformityScore {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::invalid(format!("score {value} not in [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_inputs(sp: &SortedProbs, y: usize, u: f64) -> Result<()> {
    if y >= sp.num_classes() {
        return Err(Error::invalid(format!(
            "label {y} out of range for {} classes",
            sp.num_classes()
        )));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::invalid(format!("u = {u} not in [0, 1]")));
    }
    Ok(())
}

/// Closed-form score. Labels with zero probability score 1.
pub fn conformity_score(sp: &SortedProbs, y: usize, u: f64) -> Result<ConformityScore> {
    check_inputs(sp, y, u)?;
    let r = sp.rank_of(y);
    let pi = sp.sorted()[r];
    if pi <= 0.0 {
        return Ok(ConformityScore(1.0));
    }
    Ok(ConformityScore((sp.cumsum()[r] - u * pi).clamp(0.0, 1.0)))
}

/// Score found by searching the level axis directly: a coarse grid locates
/// the first level whose set contains `y`, then bisection narrows the
/// bracket below 1e-12. Only membership queries on `S` are used.
pub fn conformity_score_bruteforce(sp: &SortedProbs, y: usize, u: f64) -> Result<ConformityScore> {
    check_inputs(sp, y, u)?;
    let member =
        |tau: f64| -> Result<bool> { Ok(generalized_inverse_set(sp, u, tau)?.contains(y)) };

    if !member(1.0)? {
        return Ok(ConformityScore(1.0));
    }
    const GRID: usize = 1024;
    let mut lo = 0.0;
    let mut hi = 1.0;
    for i in 1..=GRID {
        let tau = i as f64 / GRID as f64;
        if member(tau)? {
            hi = tau;
            break;
        }
        lo = tau;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if member(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ConformityScore(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle_sets::sort_probs;
    use crate::rng::RandomSource;
    use crate::types::ProbabilityVector;

    fn sp(probs: &[f64]) -> SortedProbs {
        sort_probs(
            &ProbabilityVector::new(probs.to_vec()).unwrap(),
            &mut RandomSource::new(0),
        )
    }

    #[test]
    fn top_label_score_is_linear_in_u() {
        let s = sp(&[0.3, 0.6, 0.1]);
        for u in [0.0, 0.25, 0.5, 1.0] {
            let e = conformity_score(&s, 1, u).unwrap().value();
            assert!((e - (0.6 - 0.6 * u)).abs() < 1e-12);
        }
        assert_eq!(conformity_score(&s, 1, 1.0).unwrap().value(), 0.0);
    }

    #[test]
    fn second_label_at_u_zero() {
        let s = sp(&[0.3, 0.6, 0.1]);
        let e = conformity_score(&s, 0, 0.0).unwrap().value();
        assert!((e - 0.9).abs() < 1e-12);
        let b = conformity_score_bruteforce(&s, 0, 0.0).unwrap().value();
        assert!((b - 0.9).abs() < 1e-9);
    }

    #[test]
    fn last_label_bruteforce() {
        let s = sp(&[0.3, 0.6, 0.1]);
        let b = conformity_score_bruteforce(&s, 2, 0.0).unwrap().value();
        assert!((b - 1.0).abs() < 1e-9, "{b}");
    }

    #[test]
    fn tied_top_label_at_u_one() {
        let s = sp(&[0.5, 0.5]);
        let top = s.order()[0];
        assert_eq!(conformity_score(&s, top, 1.0).unwrap().value(), 0.0);
        assert!(conformity_score_bruteforce(&s, top, 1.0).unwrap().value() < 1e-9);
    }

    #[test]
    fn zero_probability_label_scores_one() {
        let s = sp(&[0.8, 0.2, 0.0]);
        assert_eq!(conformity_score(&s, 2, 0.3).unwrap().value(), 1.0);
        assert_eq!(
            conformity_score_bruteforce(&s, 2, 0.3).unwrap().value(),
            1.0
        );
    }

    #[test]
    fn rejects_bad_label_and_u() {
        let s = sp(&[0.3, 0.7]);
        assert!(conformity_score(&s, 2, 0.5).is_err());
        assert!(conformity_score(&s, 0, 1.5).is_err());
        assert!(ConformityScore::new(1.1).is_err());
    }
}
