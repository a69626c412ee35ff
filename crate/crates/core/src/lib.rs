pub mod affine;
pub mod clopen;
pub mod error;
pub mod literal;
pub mod measure;
pub mod padic;
pub mod poisson;
pub mod random;
pub mod representation;
pub mod stats;
pub mod stepfn;
pub mod suite;
