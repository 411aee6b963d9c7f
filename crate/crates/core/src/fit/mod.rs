//! Scenario programs for every set family.

pub mod nas;
pub mod pas;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use nas::{fit_ellipsoid, fit_hyperrectangle, fit_l1_diag, fit_parallelotope, NasOptions, Orientation};
pub use pas::{
    assemble_putinar, auto_domain, box_moments, fit_pas, pas_volume_estimate, GramBlock, MomentVector,
    Multiplier, MultiplierDegree, PasFit, PasOptions,
};

use crate::convex::SolveReport;
use crate::error::{Error, Result};
use crate::geometry::{AxisBox, FittedSet};
use crate::scenario::Family;

/// Width given to a coordinate or direction along which the cloud has no
/// extent: `1e-9·max(1, magnitude)`.
pub fn floor_width(magnitude: f64) -> f64 {
    1e-9 * magnitude.abs().max(1.0)
}

/// Domain box of a polynomial fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainChoice {
    /// Bounding box of the cloud grown by 10%.
    Auto,
    Fixed(AxisBox),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    pub nas: NasOptions,
    pub pas: PasOptions,
    /// Polynomial degree `σ`.
    pub degree: usize,
    pub domain: DomainChoice,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nas: NasOptions::default(),
            pas: PasOptions::default(),
            degree: 4,
            domain: DomainChoice::Auto,
        }
    }
}

/// Fits the requested family; the solver report is attached for the
/// polynomial family.
pub fn fit_family(points: &[DVector<f64>], family: Family, options: &FitOptions) -> Result<(FittedSet, Option<SolveReport>)> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("no points".into()));
    }
    Ok(match family {
        Family::Ellipsoid => (FittedSet::Nas(fit_ellipsoid(points, options.nas.tol)?), None),
        Family::Hyperrectangle => (FittedSet::Nas(fit_hyperrectangle(points)?), None),
        Family::Parallelotope => (FittedSet::Nas(fit_parallelotope(points, options.nas.orientation)?), None),
        Family::CrossPolytope => (FittedSet::Nas(fit_l1_diag(points)?), None),
        Family::Pas => {
            let domain = match &options.domain {
                DomainChoice::Auto => auto_domain(points)?,
                DomainChoice::Fixed(b) => b.clone(),
            };
            let fit = fit_pas(points, &domain, options.degree, &options.pas)?;
            (FittedSet::Pas(fit.set), Some(fit.report))
        }
    })
}
