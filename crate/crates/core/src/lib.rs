//! Numerical laboratory for weak values of pre- and post-selected,
//! time-dependent quantum systems.
//!
//! * [`weakcore`]: generic two-state-vector weak values and
//!   [`logcomplex`] overflow-safe arithmetic.
//! * [`atombath`]: an excited reference atom coupled to a discrete bath.
//! * [`tunneling`]: a Gaussian packet bouncing between a wall and a delta
//!   barrier, with closed forms and a quadrature oracle.
//! * [`pdeoracle`]: Crank–Nicolson solver for the same 1-D problem.
//! * [`series`], [`config`], [`runner`]: data files, scenario configs, and the
//!   scenario runner behind the `nonbark` CLI.

pub mod atombath;
pub mod config;
pub mod error;
pub mod logcomplex;
pub mod pdeoracle;
pub mod quadrature;
pub mod runner;
pub mod series;
pub mod tunneling;
pub mod weakcore;

pub use error::{Error, Result};
pub use logcomplex::LogComplex;
pub use weakcore::Complex;
