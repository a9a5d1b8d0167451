//! Classical Markov chains.
//!
//! Transition matrices are left-stochastic: column `i` of `P` is the
//! distribution of the next state given the current state `i`, so
//! `P[(j, i)]` is the probability of the move `i -> j` and distributions
//! evolve as `p' = P p`.

mod chain;
mod classical;
mod distribution;
pub mod generators;

pub use chain::{
    discriminant, is_stochastic, stationary_distribution, time_reversal, ChainDocument,
    DiscriminantMatrix, MarkovChain,
};
pub use classical::{
    mixing_time, mixing_time_bounds, relative_mixing_time, spectral_gap, MixingBounds,
    SpectralGap,
};
pub use distribution::{tv_distance, Distribution, DistributionDocument};
