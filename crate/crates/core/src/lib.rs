//! Consistent reconstruction from dithered uniformly quantized random
//! projections: quantizer, Gaussian ensembles, consistency-cell geometry,
//! reconstruction, dumbbell probabilities, measurement bounds and the
//! experiment drivers behind the `qconsist` binary.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod buffon;
pub mod cellgeom;
pub mod check;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod quadrature;
pub mod quantizer;
pub mod randkit;
pub mod reconstruct;
pub mod sensing;
pub mod stats;

pub use error::{Error, Result};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/quantization.md")]
    struct Quantization;
    #[doc = include_str!("../../../book/src/cells.md")]
    struct Cells;
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    struct Reconstruction;
    #[doc = include_str!("../../../book/src/buffon.md")]
    struct Buffon;
    #[doc = include_str!("../../../book/src/bounds.md")]
    struct Bounds;
    #[doc = include_str!("../../../book/src/experiments.md")]
    struct Experiments;
}
