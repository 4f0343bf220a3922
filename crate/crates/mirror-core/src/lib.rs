//! Exact computer algebra for the rigid-analytic mirror of an integral affine torus.

pub mod rat;
pub mod novikov;
pub mod affine;
pub mod fixtures;
pub mod affinoid;
pub mod adams;
pub mod dot;
pub mod category;
pub mod functor;
