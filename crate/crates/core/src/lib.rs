// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod error;
pub mod exec;
pub mod grassmann;
pub mod io;
pub mod jacobian;
pub mod nodal;
pub mod oracle;
pub mod poly;
pub mod quadrature;
pub mod search;
