//! Precision-certified descent of rank-2 Kisin modules.
//!
//! Scalars live in `Q_p` at capped precision ([`padic`]), series in the disc
//! ring `R` with certified `v_R` bounds ([`series`]), and the descent engine
//! ([`descent`]) reduces a Frobenius matrix to the shape
//! `(P, -1; E^h, 0)` under twisted conjugation ([`matrix`]). The [`family`]
//! module runs the whole pipeline for `C_{a_p}`.

pub mod descent;
pub mod error;
pub mod family;
pub mod lambda;
pub mod matrix;
pub mod padic;
pub mod report;
pub mod series;
pub mod valuation;

pub use descent::{descend, error_profile, Descent, DescentParams, DescentTrace, ErrorProfile, Op, TraceEntry};
pub use error::{KisinError, Result};
pub use family::{
    build_c_ap, descent_params, integral_descent, integrality_check, reduce_mod_p, run_family_descent, FamilyInstance,
    FamilyRun, ModPMatrix, RetryPolicy,
};
pub use lambda::LambdaFamily;
pub use matrix::{monodromy_b, monodromy_residual, twisted_conjugate, SeriesMatrix2};
pub use padic::{is_prime, PadicScalar};
pub use report::{CheckRecord, DescentReport};
pub use series::{DiscRing, DiscSeries};
pub use valuation::{RValuation, Val};
