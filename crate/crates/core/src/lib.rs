//! Vector fields associated with integrable diffeomorphisms.
//!
//! Given a map `F` with `n - 1` independent first integrals and a scalar
//! multiplier `mu` with `mu(F) = det(DF) mu`, the field built from the
//! integral gradients is preserved by `F`. Along closed orbits of that
//! field `F` acts as a rigid rotation, so its rotation number is the
//! flight time to the image divided by the period.
//!
//! Modules, bottom-up: [`vecgeo`] (cross products, determinants, finite
//! differences), [`maps`] (the map bundles and built-in examples),
//! [`fields`] (field construction and functional-equation checks),
//! [`flow`] (integration, periods, flight times), [`rotation`]
//! (rotation numbers, sweeps, monotonicity) and [`cli`].

pub mod cli;
pub mod fields;
pub mod flow;
pub mod maps;
pub mod par;
pub mod rotation;
pub mod vecgeo;

pub use fields::{build_field, VectorFieldSpec};
pub use flow::IntegratorConfig;
pub use maps::{builtin, MapSpec, ScalarField, SigmaClass};
