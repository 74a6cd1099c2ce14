//! Baselines that do not model the dynamic: the two-EMA crossover, its
//! "convex net" generalization (an identity-activation RNN whose weights form a
//! stochastic matrix), and a uniform random guesser.

mod convex;
mod dummy;
mod ma;

pub use convex::{
    convex_forward, convex_train, project_stochastic_row, spectral_radius, ConvexNetParams, ConvexOutput,
    ConvexTrainOptions, ConvexTrainOutcome,
};
pub use dummy::{dummy_classify, dummy_probabilities};
pub use ma::{ma_classify, ma_grid_search, ma_probabilities, MaConfig, MaGrid, MaSearchResult};
