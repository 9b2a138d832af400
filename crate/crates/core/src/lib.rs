//! Numerical convex geometry for central hyperplane sections.
//!
//! The crate computes measures `mu(L) = ∫_L g` of origin-symmetric star bodies,
//! the measures of their central sections `mu(L ∩ xi^⊥)`, maximal sections over
//! the sphere, intersection bodies, diagonal factorizations of unconditional
//! bodies and volume ratios of polar pairs, and uses them to check slicing
//! inequalities of the form
//!
//! ```text
//! mu(L) <= C * max_xi mu(L ∩ xi^⊥) * |L|^(1/n)
//! ```
//!
//! for several classes of bodies and constants `C`.
//!
//! ```
//! use hyperslice::{integrate_section, Density, QuadScheme, StarBody};
//!
//! let cube = StarBody::cube(3);
//! let s = (0.5f64).sqrt();
//! let area = integrate_section(&cube, &Density::lebesgue(3), &[s, s, 0.0], &QuadScheme::default()).unwrap();
//! assert!((area.value - 4.0 * 2f64.sqrt()).abs() < 1e-6);
//! ```

pub mod bodies;
pub mod constants;
pub mod error;
pub mod factorization;
pub mod harness;
pub mod measures;
pub mod num_fmt;
pub mod quadrature;
pub mod sections;
pub mod sphere;

pub use bodies::{BodyFlags, DiagonalMap, SearchConfig, StarBody};
pub use constants::{ball_volume, c_n};
pub use error::{Error, Result};
pub use factorization::{
    john_diagonal_ellipsoid, lozanovskii_box, mahler_volume, verify_sandwich, volume_ratio_report, SandwichReport,
    VolumeRatioReport,
};
pub use harness::{
    builtin_bodies, check_dual_vr, check_hyperplane_general, check_hyperplane_unconditional, check_hyperplane_volume,
    check_stability, run_experiment, InequalityId, InequalityReport, StabilityMode, StabilitySpec,
};
pub use measures::{Density, DensitySpec};
pub use quadrature::{
    grid_oracle_section, grid_oracle_volume, hyperplane_basis, integrate_body, integrate_section, volume, Engine,
    Estimate, Method, QuadScheme,
};
pub use sections::{
    intersection_body_of, max_section, radial_distance, DirectionSample, MaxSectionResult, OptConfig, OrthantRestrict,
    RadialDistance,
};

pub use nalgebra::DMatrix;
