//! Positive radial ground states of `−Δu + λu = f(|x|, u)` on balls and the
//! mass curve `λ ↦ ‖u_λ‖²` of normalized solutions.
//!
//! * [`ground_state`]: shooting for `u_λ`, the first Dirichlet eigenvalue
//!   and the whole-space soliton `Q`.
//! * [`continuation`]: tracing `m(λ)`, its extrema, and inversion `m(λ) = c`.
//! * [`asymptotics`]: the large-`λ` rescaling and limits of `m`.
//! * [`yanagida`]: sufficient conditions for uniqueness with a radial weight.
//! * [`stability`]: slope criterion and radial linearized spectrum.
//!
//! ```
//! use nls_masscurve::ground_state::{shoot_ground_state, GroundStateSettings};
//! use nls_masscurve::problem::RadialProblem;
//!
//! let problem = RadialProblem::new(3, 3.0, 1.0)?;
//! let gs = shoot_ground_state(&problem, 5.0, &GroundStateSettings::default(), None)?;
//! assert!(gs.relative_residual() < 1e-8);
//! # Ok::<(), nls_masscurve::Error>(())
//! ```

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod config;
pub mod continuation;
pub mod error;
pub mod fv;
pub mod ground_state;
pub mod json;
pub mod ode;
pub mod problem;
pub mod profile;
pub mod report;
pub mod stability;
pub mod yanagida;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/ground-states.md")]
    mod ground_states {}
    #[doc = include_str!("../../../book/src/mass-curve.md")]
    mod mass_curve {}
    #[doc = include_str!("../../../book/src/soliton.md")]
    mod soliton {}
    #[doc = include_str!("../../../book/src/uniqueness.md")]
    mod uniqueness {}
    #[doc = include_str!("../../../book/src/stability.md")]
    mod stability {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
