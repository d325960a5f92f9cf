//! Robust secure rate-splitting ISAC with an active reconfigurable surface.
//!
//! The design jointly chooses the BS precoders, artificial noise, RIS
//! reflection coefficients, radar receive filter and common-rate split to
//! maximize the worst user's ergodic private secrecy rate when the
//! eavesdropper position is only known up to an annular sector.

pub mod ao;
pub mod channels;
pub mod config;
pub mod convex;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod surrogates;
pub mod validate;
