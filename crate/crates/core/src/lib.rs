//! Ruin probabilities for the Cramér–Lundberg model under modified ruin.
//!
//! [`analytic`] holds closed forms and quadrature for the asymptotic
//! constants, and [`simulate`] the Monte Carlo engine used to check them.
//! The guide in `book/` walks through both; its snippets run as doctests.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod claims;
pub mod mechanisms;
pub mod numerics;
pub mod rng;
pub mod simulate;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/claims.md")]
    mod claims {}
    #[doc = include_str!("../../../book/src/classical.md")]
    mod classical {}
    #[doc = include_str!("../../../book/src/deficit.md")]
    mod deficit {}
    #[doc = include_str!("../../../book/src/renewal.md")]
    mod renewal {}
    #[doc = include_str!("../../../book/src/mechanisms.md")]
    mod mechanisms {}
    #[doc = include_str!("../../../book/src/monte_carlo.md")]
    mod monte_carlo {}
}
