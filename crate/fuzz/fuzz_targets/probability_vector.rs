#![no_main]

use adaptive_conformal::oracle_sets::{generalized_inverse_set, sort_probs};
use adaptive_conformal::scores::conformity_score;
use adaptive_conformal::{ProbabilityVector, RandomSource};
use libfuzzer_sys::fuzz_target;

// Layout: u and tau as the first two f64s, then the probabilities.
fuzz_target!(|data: &[u8]| {
    let values: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.len() < 3 {
        return;
    }
    let (u, tau) = (values[0], values[1]);
    let Ok(p) = ProbabilityVector::new(values[2..].to_vec()) else {
        return;
    };
    let sp = sort_probs(&p, &mut RandomSource::new(0));
    for y in 0..p.num_classes() {
        if let Ok(e) = conformity_score(&sp, y, u) {
            let e = e.value();
            assert!((0.0..=1.0).contains(&e));
            if let Ok(set) = generalized_inverse_set(&sp, u, tau) {
                if (tau - e).abs() > 1e-9 && u > 0.0 {
                    assert_eq!(set.contains(y), e < tau);
                }
            }
        }
    }
});
