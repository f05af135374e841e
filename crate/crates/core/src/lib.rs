//! Streaming distance engines, hard-instance constructions and an
//! output-only decoder for online convolution and L2-rearrangement over
//! bit streams.
//!
//! * [`geometry`]: interval lengths, the two-intervals-and-a-gap arithmetic,
//!   and offset grids.
//! * [`distance`] and [`stream`]: bit-array distances, their sliding forms,
//!   and the online engine.
//! * [`hard_instance`]: the fixed L2 pattern and the update distribution.
//! * [`recovery`]: decoding hidden update blocks from L2 outputs alone.
//! * [`toeplitz`]: exact entropy of Toeplitz products and the convolution
//!   pattern.
//! * [`experiment`]: the reproducible drivers behind the command line.

pub mod bits;
pub mod distance;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod hard_instance;
pub mod recovery;
pub mod rng;
pub mod stream;
pub mod toeplitz;

pub use bits::BitArray;
pub use distance::Distance;
pub use error::{Error, Result};
pub use stream::{Mode, Output, StreamState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
