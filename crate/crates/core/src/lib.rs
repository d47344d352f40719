//! Conditionally invariant measures for expanding interval maps with holes.

pub mod analysis;
pub mod checker;
pub mod error;
pub mod interval;
pub mod maps;
pub mod montecarlo;
pub mod operator;
pub mod presets;
pub mod tower;
pub mod ulam;

pub use error::{Error, Result};
pub use interval::{Interval, EPS_GEO};

/// The guide's code blocks, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/tower.md")]
    mod tower {}
    #[doc = include_str!("../../../book/src/hypotheses.md")]
    mod hypotheses {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/studies.md")]
    mod studies {}
}
