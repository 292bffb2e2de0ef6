//! Exact-arithmetic laboratory for weighted ergodic averages.
//!
//! The crate studies maximal operators of the form sup_t w_t·A_t f, where
//! A_t averages a function along an orbit segment and (w_t) is a weight
//! sequence.  Its purpose is to *certify* quantitative statements about such
//! operators — weak-type norms, maximal-inequality constants, and explicit
//! divergence constructions — using rational arithmetic end to end, falling
//! back to directed-rounding enclosures only where a quantity is provably
//! irrational.
//!
//! Module map:
//! * [`rat`], [`precise`] — exact scalars, certified transcendental enclosures.
//! * [`weights`] — weight sequences and their threshold functionals.
//! * [`measure`] — step functions on the circle and on windows, exact norms.
//! * [`dynsys`] — orbit averages, maximal profiles, and inequality audits.
//! * [`constructions`] — lacunary time sequences, simultaneous-residue
//!   solving, and the explicit worst-case constructions.
//! * [`khintchine`] — multiplicative averages, growth dichotomies, and
//!   semigroup Følner diagnostics.
//! * [`report`] — serializable run artifacts shared with the CLI.

pub mod constructions;
pub mod dynsys;
pub mod khintchine;
pub mod measure;
pub mod precise;
pub mod rat;
pub mod report;
pub mod weights;

pub use precise::{Ctx, Iv, LogReal};
pub use rat::Rat;
