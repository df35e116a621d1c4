//! Contraction of star-shaped hypersurfaces in R^{n+1} by the speed
//! r^{alpha/beta} * sigma_k(kappa)^{1/beta}, where r is the distance to the
//! origin and sigma_k is the k-th elementary symmetric function of the
//! principal curvatures.
//!
//! Surfaces are rotationally symmetric radial graphs r = exp(phi(theta)) over
//! the unit sphere, so the flow reduces to a scalar parabolic equation in the
//! polar angle. The crate provides the symmetric-function algebra, the
//! discrete geometry of such graphs, an explicit time stepper for the
//! normalized (gamma X forcing) and unnormalized flows, closed-form
//! comparison solutions on round spheres, per-step diagnostics, and a
//! self-contained verification suite.

pub mod diagnostics;
pub mod flow_engine;
pub mod grid_geom;
pub mod params;
pub mod reference;
pub mod symfun;
pub mod verify;

pub use params::{FlowParams, Mode, Regime};
