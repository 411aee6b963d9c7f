//! Scenario-certified minimum-volume approximations of the image of a set
//! under a noisy nonlinear map, and randomized prediction-correction filters
//! built on top of them.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: norm-based sets (`‖P(x−c)‖_p ≤ 1`), axis boxes and
//!   polynomial superlevel sets.
//! * [`sampling`]: seedable, counter-keyed uniform samplers.
//! * [`scenario`]: binomial tail bound and sample-size rules.
//! * [`convex`]: small dense LP / log-det / SDP solvers and the MVEE.
//! * [`fit`]: the scenario programs for every set family.
//! * [`model`]: expression-based dynamics and measurement maps.
//! * [`approx`] and [`filter`]: image-set approximation and the
//!   randomized filters.

pub mod approx;
pub mod convex;
pub mod error;
pub mod filter;
pub mod fit;
pub mod geometry;
pub mod model;
mod par;
pub mod poly;
pub mod sampling;
pub mod scenario;

pub use error::{Error, Result};
pub use geometry::{AxisBox, NasSet, Norm, PasSet};
pub use model::Model;
pub use sampling::{Purpose, SampleStream, Seed};
pub use scenario::{Family, ScenarioCertificate};
