pub mod arith;
pub mod cli;
pub mod conditions;
pub mod conjugacy;
pub mod cylinders;
pub mod error;
pub mod homeo;
pub mod io;
pub mod map_model;
pub mod poly;
pub mod symbolic;
