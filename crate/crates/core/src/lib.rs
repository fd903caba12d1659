//! Expected message delivery time in planar small-world networks.
//!
//! Two engines live side by side:
//!
//! * [`analytic`] evaluates the continuum-limit recursion for the expected hop count
//!   `g(d)` of greedy geographic forwarding when every node holds one uniformly
//!   placed long-range contact.
//! * [`network`], [`routing`] and [`experiments`] simulate finite dense networks on
//!   the `R × R` square, route with δ-greedy forwarding and aggregate hop counts, so
//!   the recursion can be checked against Monte Carlo estimates.
//!
//! Geometry, the recursion, instance construction and routing are generic over the
//! [`Real`] scalar (`f32` or `f64`). The aliases below fix `f64`, which is what the
//! experiment harness uses.

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod network;
pub mod routing;
pub mod scalar;

pub use error::{Error, Result};
pub use network::{NodeRef, TieBreak};
pub use routing::{HopKind, Status};
pub use scalar::Real;

pub type Point = geometry::Point<f64>;
pub type Domain = geometry::Domain<f64>;
pub type Rect = geometry::Rect<f64>;
pub type ContinuumParams = analytic::ContinuumParams<f64>;
pub type DeliveryCurve = analytic::DeliveryCurve<f64>;
pub type NetworkConfig = network::NetworkConfig<f64>;
pub type NetworkInstance = network::NetworkInstance<f64>;
pub type Hop = routing::Hop<f64>;
pub type RoutingOutcome = routing::RoutingOutcome<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type Point = crate::geometry::Point<f32>;
    pub type Domain = crate::geometry::Domain<f32>;
    pub type DeliveryCurve = crate::analytic::DeliveryCurve<f32>;
    pub type NetworkConfig = crate::network::NetworkConfig<f32>;
    pub type NetworkInstance = crate::network::NetworkInstance<f32>;
}
