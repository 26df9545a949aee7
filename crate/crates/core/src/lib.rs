#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod decompose;
pub mod error;
pub mod eval;
pub mod face_model;
pub mod flow;
pub mod io;
pub mod math;
pub mod pipeline;
pub mod raster;
pub mod sequence;

pub use error::{Error, Result};
