//! Products of kicked horocycle shears in SL(2,R): evolution with log-scaled
//! norms, growth certificates in the upper half plane, dyadic recursions and
//! constructions of kick sequences with large exceptional sets.

// NaN must fail range checks, so `!(x <= tol)` is deliberate throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod construct_eus;
pub mod construct_seq;
pub mod dyadic;
pub mod evolution;
pub mod mat2;
