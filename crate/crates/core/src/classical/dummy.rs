use rand::Rng;

use crate::label::{ProbTriple, TrendLabel};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

/// One uniformly random label per step.
pub fn dummy_classify(len: usize, seed: u64) -> Vec<TrendLabel> {
    let mut rng = rng_from_seed(seed);
    (0..len).map(|_| TrendLabel::from_class_index(rng.random_range(0..3))).collect()
}

pub fn dummy_probabilities<T: Scalar>(len: usize, seed: u64) -> Vec<ProbTriple<T>> {
    dummy_classify(len, seed).into_iter().map(ProbTriple::one_hot).collect()
}
