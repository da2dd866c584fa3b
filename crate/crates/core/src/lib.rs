//! Numerical toolkit for Hamiltonian-stationary cones over isotropic links in
//! odd-dimensional unit spheres `S^{2n−1} ⊂ C^n`.
//!
//! Immersions are given by exact derivative jets; on top of them the crate
//! evaluates isotropy and stationarity residuals, the Hopf function and
//! Legendrian-point indices of surface links, the 1-forms `α` and `β` with
//! the Lagrangian angle, and the closed-form homogeneous-torus family with a
//! least-squares search. [`pipeline::run_analysis`] ties everything into a
//! config-driven report.

// Index loops mirror the tensor notation; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ambient;
pub mod catalog;
pub mod config;
pub mod error;
pub mod family;
pub mod flags;
pub mod geometry;
pub mod hodge;
pub mod hopf;
pub mod immersion;
pub mod isotropy;
pub mod linalg;
pub mod pipeline;
pub mod report;
pub mod search;
pub mod taylor;

pub use ambient::AmbientVector;
pub use catalog::{make_catalog_immersion, CatalogImmersion, CatalogParams};
pub use error::{HsError, Result};
pub use family::{classify_family_member, FamilyClassification, HomogeneousTorusParams};
pub use flags::{Flag, GatedFlag};
pub use immersion::{Domain, Grid, Immersion, Jet, SphereChart};
