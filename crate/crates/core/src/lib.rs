//! Quantum mixing of time-reversible Markov chains.
//!
//! The crate simulates Szegedy-type quantum walks densely and uses them to
//! prepare coherent encodings of stationary distributions by running
//! amplitude amplification "in reverse" from cheap initial states. When the
//! target distribution is known to be monotonically decaying, a set of
//! `log2 N` uniform "ladder" distributions always contains one whose
//! coherent encoding has overlap at least `1 / (2 (log2 N + 1))` with the
//! target, which makes the preparation cost polylogarithmic in `N`.
//!
//! The modules follow the layers of the construction:
//!
//! - [`markov`]: classical chains, spectra and exact mixing times.
//! - [`ladder`]: convex geometry of decaying distributions (ladders,
//!   q-decomposition, the `V` matrix and its tridiagonal inverse).
//! - [`szegedy`]: diffusion operators, reflectors and the walk unitary.
//! - [`mixing`]: reflections about `|pi>`, amplitude amplification and the
//!   full mixing algorithm.
//! - [`experiments`]: seeded sweeps and report generation behind the CLI.
//!
//! ```
//! use qmix::markov::{generators, Distribution};
//! use qmix::mixing::{mix_monotone, MixOptions};
//! use qmix::szegedy::WalkOperator;
//!
//! let target = Distribution::from_weights((0..8).map(|i| 0.5f64.powi(i)).collect()).unwrap();
//! let chain = generators::metropolis_chain(&target, &generators::nearest_neighbor_proposal(8)).unwrap();
//! let walk = WalkOperator::new(&chain).unwrap();
//! let result = mix_monotone(&walk, 0.01, &MixOptions::default()).unwrap();
//! assert!(result.fidelity >= 0.99);
//! ```

pub mod error;
pub mod experiments;
pub mod io;
pub mod ladder;
pub mod linalg;
pub mod markov;
pub mod mixing;
pub mod rng;
pub mod szegedy;

pub use error::{Error, Result};
pub use markov::{Distribution, MarkovChain};
