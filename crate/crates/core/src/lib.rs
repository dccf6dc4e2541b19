pub mod error;
pub mod expr;
pub mod gridfn;
pub mod kernel;
pub mod quadrature;
pub mod energy;
pub mod limits;
pub mod table;
pub mod variational;
pub mod homogenize;
pub mod cli;
