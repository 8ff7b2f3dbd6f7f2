//! The twisted Hartogs domain, its radial profiles, and the geometric sets
//! used by the separation argument.

pub mod certify;
pub mod geometry;
pub mod point;
pub mod profile;

pub use certify::{certify_profiles, ConstraintCheck, ConstraintKind, ConstraintReport};
pub use geometry::{DomainError, HartogsDomain, RegionTag, K_RADII, V_T_RANGE};
pub use point::DomainPoint;
pub use profile::{smooth_transition, Anchor, ProfileError, ProfileTable, RadialProfile};
