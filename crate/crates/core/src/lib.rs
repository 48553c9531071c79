//! Sublabel-accurate convex relaxation of Mumford-Shah type problems.
//!
//! The range of the unknown is discretized by a [`grid::LabelGrid`], the
//! lifted problem is assembled per pixel by [`models`] and solved by the
//! primal-dual engine in [`solver`].

pub mod grid;
pub mod models;
pub mod ops;
pub mod par;
pub mod projections;
pub mod regularizer;
pub mod solver;
pub mod unaries;
pub mod verify;
