//! Numerical laboratory for an attractive birth-and-death particle model.
//!
//! The crate covers three scales of the same model:
//!
//! * the space-homogeneous problem ([`equilibria`]): stationary densities,
//!   stability threshold, and the arithmetic of growth certificates;
//! * the kinetic equation `u̇ = λ − m·u·e^{−(φ∗u)}` on a periodic grid
//!   ([`meso`]), integrated by method of lines and by Picard iteration of the
//!   integral form;
//! * the particle system itself ([`micro`]), simulated exactly with a
//!   Gillespie engine under the `ε`-rescaling.
//!
//! [`aggregation`] holds the front-expansion recurrences and front fitting.

pub mod aggregation;
pub mod convolution;
pub mod equilibria;
pub mod error;
pub mod grid;
pub mod io;
pub mod lambert;
pub mod meso;
pub mod micro;
pub mod potential;
pub mod quadrature;
pub mod report;
pub mod roots;

pub use error::{Error, Result};
