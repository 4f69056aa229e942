//! Weighted threshold secret sharing whose weights follow reputation.
//!
//! A secret over a prime field is split with Shamir's scheme, each player
//! holding as many points as its weight. The share set evolves without a
//! dealer ([`dynamics`]): refresh, enrollment of a new point, revocation
//! of an old one. Players earn or lose trust each period ([`trust`],
//! [`social`]) and [`tuning`] turns trust bands into weight changes.
//! [`cloudsim`] runs the whole loop against simulated storage providers.
//!
//! ```
//! use socialshare::field::Modulus;
//! use socialshare::shamir::{deal_with_coefficients, reconstruct};
//!
//! let p = Modulus::new(11).unwrap();
//! let xs: Vec<_> = (1..=5).map(|x| p.element(x)).collect();
//! let shares = deal_with_coefficients(&[10, 7, 2].map(|c| p.element(c)), &xs)
//!     .unwrap()
//!     .shares;
//! assert_eq!(reconstruct(&shares[2..], 3).unwrap().value(), 10);
//! ```
//!
//! A guide with more worked examples lives in the `book/` directory.

pub mod cloudsim;
pub mod dynamics;
pub mod field;
pub mod shamir;
pub mod social;
pub mod trust;
pub mod tuning;
pub mod wire;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/shamir.md")]
    mod shamir {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/trust.md")]
    mod trust {}
    #[doc = include_str!("../../../book/src/social.md")]
    mod social {}
    #[doc = include_str!("../../../book/src/tuning.md")]
    mod tuning {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
