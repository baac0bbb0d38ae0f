//! Time integrators.

pub mod adi;
pub mod spherical;

pub use adi::AdiEvolver;
pub use spherical::SphericalEvolver;
