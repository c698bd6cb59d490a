//! Warping profiles, curvature formulas and verification campaigns for
//! negatively curved warped-product metrics on tubes in complex hyperbolic space.
//!
//! Frame algebra and the closed-form curvature formulas are generic over
//! [`Scalar`] (`f32`/`f64`); profile construction, quadrature and the scans
//! work in `f64`.

pub mod cli;
pub mod convex;
pub mod curvature;
pub mod error;
pub mod frame;
pub mod profiles;
pub mod quadrature;
pub mod search;
pub mod verify;
pub mod symbolic;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type WarpState64 = curvature::WarpState<f64>;
pub type WarpState32 = curvature::WarpState<f32>;
pub type CoordinateCurvatures64 = curvature::CoordinateCurvatures<f64>;
pub type CoordinateCurvatures32 = curvature::CoordinateCurvatures<f32>;
pub type StructureConstants64 = frame::StructureConstants<f64>;
pub type StructureConstants32 = frame::StructureConstants<f32>;
pub type PlanePair64 = frame::PlanePair<f64>;
pub type PlanePair32 = frame::PlanePair<f32>;
