//! Generalized conditional quantiles of a class-probability vector.
//!
//! For probabilities sorted in decreasing order, `L(tau)` is the number of
//! top labels needed to accumulate mass `tau`. The randomized set `S(u, tau)`
//! keeps the top `L - 1` labels when `u <= V(tau)` and the top `L` otherwise,
//! where `V` is the fraction of the rank-`L` probability that overshoots
//! `tau`. With `u` uniform, `S` contains the label with probability exactly
//! `tau` under the given probabilities.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::types::{CalibrationLevel, PredictionSet, ProbabilityVector};

/// Probabilities in decreasing order with their prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedProbs {
    order: Vec<usize>,
    rank: Vec<usize>,
    sorted: Vec<f64>,
    cumsum: Vec<f64>,
}

impl SortedProbs {
    /// `order[r]` is the class at 0-based rank `r`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn cumsum(&self) -> &[f64] {
        &self.cumsum
    }

    /// 0-based rank of `class`.
    pub fn rank_of(&self, class: usize) -> usize {
        self.rank[class]
    }

    pub fn num_classes(&self) -> usize {
        self.order.len()
    }

    /// Probability of `class` (unsorted indexing).
    pub fn prob_of(&self, class: usize) -> f64 {
        self.sorted[self.rank[class]]
    }

    fn total(&self) -> f64 {
        *self.cumsum.last().expect("nonempty")
    }

    /// The top `count` classes, without zero-probability labels.
    fn top(&self, count: usize) -> PredictionSet {
        let mut members: Vec<usize> = self.order[..count]
            .iter()
            .copied()
            .filter(|&c| self.prob_of(c) > 0.0)
            .collect();
        members.sort_unstable();
        PredictionSet::from_sorted_unique(members)
    }
}

/// Sorts probabilities in decreasing order. Exactly tied blocks are put in a
/// uniformly random order drawn from `rng`; vectors without ties consume no
/// randomness.
pub fn sort_probs(p: &ProbabilityVector, rng: &mut RandomSource) -> SortedProbs {
    let probs = p.as_slice();
    let c = probs.len();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));

    let mut start = 0;
    while start < c {
        let mut end = start + 1;
        while end < c && probs[order[end]] == probs[order[start]] {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].shuffle(rng);
        }
        start = end;
    }

    let sorted: Vec<f64> = order.iter().map(|&i| probs[i]).collect();
    let mut rank = vec![0; c];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let cumsum = sorted
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    SortedProbs {
        order,
        rank,
        sorted,
        cumsum,
    }
}

fn check_unit(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {value} not in [0, 1]")))
    }
}

/// Slack on prefix-sum comparisons; sums like 0.6 + 0.3 round below 0.9.
const PREFIX_SLACK: f64 = 1e-12;

/// Levels above the accumulated total (floating-point shortfall) are clamped
/// to the total.
fn effective_tau(sp: &SortedProbs, tau: f64) -> f64 {
    tau.min(sp.total())
}

/// Smallest count `c` (1-based) whose top-`c` mass reaches `tau`.
pub fn generalized_quantile_l(sp: &SortedProbs, tau: f64) -> Result<usize> {
    check_unit("tau", tau)?;
    let tau = effective_tau(sp, tau);
    let idx = sp.cumsum.partition_point(|&s| s < tau - PREFIX_SLACK);
    Ok(idx.min(sp.num_classes() - 1) + 1)
}

/// Randomization cutoff `V = (s_L - tau) / pi_(L)`.
pub fn randomization_cutoff_v(sp: &SortedProbs, tau: f64) -> Result<f64> {
    let l = generalized_quantile_l(sp, tau)?;
    let pi_l = sp.sorted[l - 1];
    if pi_l <= 0.0 {
        return Err(Error::DegenerateProbability(format!(
            "rank {l} has zero probability at tau = {tau}"
        )));
    }
    let tau = effective_tau(sp, tau);
    Ok(((sp.cumsum[l - 1] - tau) / pi_l).max(0.0))
}

/// The randomized generalized inverse set `S(u, tau)`.
///
/// For `tau >= 1` every label with nonzero probability is returned,
/// whatever `u` is.
pub fn generalized_inverse_set(sp: &SortedProbs, u: f64, tau: f64) -> Result<PredictionSet> {
    check_unit("u", u)?;
    check_unit("tau", tau)?;
    if tau >= 1.0 {
        return Ok(sp.top(sp.num_classes()));
    }
    let l = generalized_quantile_l(sp, tau)?;
    let v = randomization_cutoff_v(sp, tau)?;
    let count = if u <= v { l - 1 } else { l };
    Ok(sp.top(count))
}

/// Deterministic oracle set: the top `L(1 - alpha)` labels.
pub fn oracle_set_deterministic(sp: &SortedProbs, alpha: CalibrationLevel) -> PredictionSet {
    let l = generalized_quantile_l(sp, alpha.coverage()).expect("1 - alpha lies in (0, 1)");
    sp.top(l)
}

/// Randomized oracle set `S(u, 1 - alpha)`.
pub fn oracle_set_randomized(
    sp: &SortedProbs,
    u: f64,
    alpha: CalibrationLevel,
) -> Result<PredictionSet> {
    generalized_inverse_set(sp, u, alpha.coverage())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(probs: &[f64]) -> SortedProbs {
        sort_probs(
            &ProbabilityVector::new(probs.to_vec()).unwrap(),
            &mut RandomSource::new(0),
        )
    }

    fn set(members: &[usize]) -> PredictionSet {
        PredictionSet::new(members.iter().copied(), 10).unwrap()
    }

    const EXAMPLE: [f64; 3] = [0.3, 0.6, 0.1];

    #[test]
    fn sorts_three_class_example() {
        let s = sp(&EXAMPLE);
        assert_eq!(s.order(), &[1, 0, 2]);
        assert_eq!(s.sorted(), &[0.6, 0.3, 0.1]);
        let expect = [0.6, 0.9, 1.0];
        for (a, b) in s.cumsum().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(s.rank_of(0), 1);
    }

    #[test]
    fn point_mass_sorting() {
        let s = sp(&[1.0, 0.0, 0.0]);
        assert_eq!(s.sorted(), &[1.0, 0.0, 0.0]);
        assert_eq!(s.cumsum(), &[1.0, 1.0, 1.0]);
        assert_eq!(s.order()[0], 0);
    }

    #[test]
    fn ties_are_broken_both_ways() {
        let p = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let mut first = 0;
        let trials = 4000;
        for seed in 0..trials {
            let s = sort_probs(&p, &mut RandomSource::new(seed));
            if s.order()[0] == 0 {
                first += 1;
            }
        }
        let frac = first as f64 / trials as f64;
        // binomial sd at n = 4000 is about 0.008
        assert!((frac - 0.5).abs() < 0.04, "{frac}");
    }

    #[test]
    fn quantile_l_examples() {
        let s = sp(&EXAMPLE);
        assert_eq!(generalized_quantile_l(&s, 0.9).unwrap(), 2);
        assert_eq!(generalized_quantile_l(&s, 0.5).unwrap(), 1);
        assert_eq!(generalized_quantile_l(&s, 0.0).unwrap(), 1);
        assert_eq!(generalized_quantile_l(&s, 1.0).unwrap(), 3);
        assert!(generalized_quantile_l(&s, 1.5).is_err());
        assert!(generalized_quantile_l(&s, -0.1).is_err());
    }

    #[test]
    fn quantile_l_clamps_shortfall() {
        // cumsum ends slightly below 1
        let s = sp(&[0.1, 0.2, 0.3, 0.4 - 5e-9]);
        assert!(s.cumsum()[3] < 1.0);
        assert_eq!(generalized_quantile_l(&s, 1.0).unwrap(), 4);
    }

    #[test]
    fn cutoff_examples() {
        let s = sp(&EXAMPLE);
        let v = randomization_cutoff_v(&s, 0.5).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(randomization_cutoff_v(&s, 0.6).unwrap(), 0.0);
        let q = sp(&[0.25; 4]);
        assert_eq!(generalized_quantile_l(&q, 0.6).unwrap(), 3);
        let v = randomization_cutoff_v(&q, 0.6).unwrap();
        assert!((v - 0.6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn inverse_set_examples() {
        let s = sp(&EXAMPLE);
        assert_eq!(
            generalized_inverse_set(&s, 0.1, 0.5).unwrap(),
            PredictionSet::empty()
        );
        assert_eq!(generalized_inverse_set(&s, 0.5, 0.5).unwrap(), set(&[1]));
        assert_eq!(generalized_inverse_set(&s, 0.9, 0.9).unwrap(), set(&[0, 1]));
        assert!(generalized_inverse_set(&s, 1.2, 0.5).is_err());
    }

    #[test]
    fn full_level_returns_all_nonzero_labels() {
        let s = sp(&EXAMPLE);
        assert_eq!(
            generalized_inverse_set(&s, 0.0, 1.0).unwrap(),
            set(&[0, 1, 2])
        );
        let z = sp(&[0.7, 0.0, 0.3]);
        assert_eq!(generalized_inverse_set(&z, 0.5, 1.0).unwrap(), set(&[0, 2]));
    }

    #[test]
    fn deterministic_oracle_examples() {
        let s = sp(&EXAMPLE);
        let a01 = CalibrationLevel::new(0.1).unwrap();
        let a05 = CalibrationLevel::new(0.5).unwrap();
        assert_eq!(oracle_set_deterministic(&s, a01), set(&[0, 1]));
        assert_eq!(oracle_set_deterministic(&s, a05), set(&[1]));
        let pm = sp(&[1.0, 0.0, 0.0]);
        for a in [0.01, 0.3, 0.99] {
            let level = CalibrationLevel::new(a).unwrap();
            assert_eq!(oracle_set_deterministic(&pm, level), set(&[0]));
        }
        for a in [a01, a05] {
            assert_eq!(
                oracle_set_deterministic(&s, a),
                generalized_inverse_set(&s, 1.0, a.coverage()).unwrap()
            );
        }
    }

    #[test]
    fn randomized_oracle_matches_inverse_set() {
        let s = sp(&EXAMPLE);
        let a = CalibrationLevel::new(0.5).unwrap();
        assert_eq!(
            oracle_set_randomized(&s, 0.1, a).unwrap(),
            PredictionSet::empty()
        );
        assert_eq!(oracle_set_randomized(&s, 0.5, a).unwrap(), set(&[1]));
        let a = CalibrationLevel::new(0.1).unwrap();
        assert_eq!(oracle_set_randomized(&s, 0.99, a).unwrap(), set(&[0, 1]));
    }
}
