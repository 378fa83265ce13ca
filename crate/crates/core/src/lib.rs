//! Sub-Riemannian geometry of the first Heisenberg group.
//!
//! * [`group`]: group law, isometries in canonical form, dilations, gauge.
//! * [`geodesics`]: exact geodesics, the Carnot–Carathéodory distance,
//!   spheres, cones, the lifetime coordinate and the chord function `ρ`.
//! * [`maps`]: a zoo of biLipschitz self-maps (dilations, spirals,
//!   Korányi–Reimann contact flows) and empirical distortion estimates.
//! * [`pansu`]: finite-difference Pansu differentials and ball averages.
//! * [`sampling`]: seeded, order-independent sampling of balls and pairs.
//!
//! The group and distance layers are generic over [`Scalar`] (`f32`, `f64`);
//! the aliases below fix the precision for callers that do not care.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geodesics;
pub mod group;
pub mod maps;
pub mod pansu;
pub mod roots;
pub mod sampling;
pub mod scalar;

pub use error::{HeisError, Result};
pub use geodesics::{
    cc_distance, cc_norm, cone_aperture, dist_to_sphere, geodesic_point, hemisphere_height, in_convex_hull, rho,
    rho_prime, solve_polar, sphere_point, GeodesicParams, PolarSolve, SphereDistance, SpherePoint,
};
pub use group::{dilate, gauge_distance, inverse, multiply, IsometryDescriptor, Point};
pub use maps::{
    bilip_estimate, eval_map, integrate_flow, kr_vector_field, phi_conjugate, MapDescriptor, Potential, PotentialField,
};
pub use pansu::{bmo_average, orthogonality_defect, pansu_jacobian, DiffConfig, PansuJacobian, Scheme};
pub use sampling::ball_sample;
pub use scalar::Scalar;

pub type Point32 = Point<f32>;
pub type Point64 = Point<f64>;
pub type Isometry32 = IsometryDescriptor<f32>;
pub type Isometry64 = IsometryDescriptor<f64>;
pub type Geodesic32 = GeodesicParams<f32>;
pub type Geodesic64 = GeodesicParams<f64>;
pub type PolarSolve32 = PolarSolve<f32>;
pub type PolarSolve64 = PolarSolve<f64>;
