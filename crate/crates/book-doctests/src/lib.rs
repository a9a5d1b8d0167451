//! Runs the listings in `book/src` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/chains.md")]
pub mod chains {}

#[doc = include_str!("../../../book/src/ladders.md")]
pub mod ladders {}

#[doc = include_str!("../../../book/src/walk.md")]
pub mod walk {}

#[doc = include_str!("../../../book/src/mixing.md")]
pub mod mixing {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
