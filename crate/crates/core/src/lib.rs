pub mod baselines;
pub mod error;
pub mod field_map;
pub mod fmt;
pub mod ground_truth;
pub mod harness;
pub mod matrix_io;
pub mod mesh;
pub mod par;
pub mod planner;
pub mod seed;
pub mod sensor;
pub mod trajectory;
pub mod world;

pub use error::{IppError, Result};
