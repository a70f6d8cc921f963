pub mod changepoint;
pub mod decode;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod hmm;
pub mod io;
pub mod likelihood;
pub mod math;
pub mod panel;
pub mod params;
pub mod pipeline;
pub mod predict;
pub mod sampler;
pub mod simulate;

pub use error::{Error, Result};
