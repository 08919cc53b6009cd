//! Quaternionic Monge-Ampere on flat hypercomplex tori and the numerical
//! checks of the HKT C^0 estimate chain.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimates;
pub mod experiment;
pub mod exterior;
pub mod hypercomplex;
pub mod linalg;
pub mod simdiag;
pub mod solver;
pub mod suites;
pub mod torus;
