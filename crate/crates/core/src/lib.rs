pub mod error;
pub mod expr;
pub mod geometry;

pub use error::{Error, Result};
pub mod map_systems;
pub mod fsmooth;
pub mod sections;

mod linear;
pub mod connections;
pub mod fconn;
pub mod dsl;
pub mod cli;
