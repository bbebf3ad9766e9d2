//! The catastrophe environment `K_t = g t + Δ_t`.

mod law;
mod path;
mod spec;
mod truncate;

pub use law::MultiplierLaw;
pub use path::{Discretization, JumpPath, Segment, WindowSandwich};
pub use spec::{Atom, Component, EnvironmentSpec, LaplaceExponent};
pub use truncate::DenseCatastrophes;

pub(crate) use law::integrate;
