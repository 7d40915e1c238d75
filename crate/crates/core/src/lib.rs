//! Fast convnet layers built from minimal filtering algorithms.
//!
//! The crate covers exact construction and verification of Winograd-style
//! transforms, a whole-layer engine for forward and backward passes, a direct
//! reference implementation, an overlap-and-save FFT baseline and an
//! arithmetic complexity model.
//!
//! ```
//! use fastconv::{direct_forward, winograd_forward, LayerConfig, Precision, Tensor4, WinogradAlgorithm};
//!
//! let cfg = LayerConfig::new(4, 8, 12, 12, 3, 1);
//! let d = Tensor4::<f32>::uniform(cfg.data_shape(), 1, -1.0, 1.0);
//! let g = Tensor4::<f32>::uniform(cfg.filter_shape(), 2, -1.0, 1.0);
//! let alg = WinogradAlgorithm::builtin(2, 3)?;
//! let fast = winograd_forward(&d, &g, &cfg, &alg, false)?;
//! let exact = direct_forward(&d, &g, &cfg, Precision::Fp64)?;
//! assert!(fastconv::max_abs_error(&fast, &exact)? < 1e-4);
//! # Ok::<(), fastconv::ConvError>(())
//! ```

pub mod complexity;
pub mod engine;
pub mod error;
pub mod fft;
pub mod gemm;
pub mod generator;
pub mod instrument;
pub mod matrix;
pub mod oracle;
pub mod reference;
pub mod scalar;
pub mod tensor;
pub mod winograd;

pub use engine::{
    multiply_stage_flops, tile_count, winograd_forward, winograd_grad_inputs, winograd_grad_weights,
    WinogradLayer,
};
pub use error::{ConvError, Result};
pub use generator::{generate, Point, PointSet};
pub use instrument::{count_multiplies, Counted};
pub use matrix::{Matrix, Rational};
pub use reference::{direct_forward, direct_grad_inputs, direct_grad_weights, LayerConfig};
pub use scalar::Real;
pub use tensor::{max_abs_error, quantize_fp16, Precision, Tensor4};
pub use winograd::{Nested2d, Transforms, WinogradAlgorithm};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tiles.md")]
    mod tiles {}
    #[doc = include_str!("../../../book/src/generator.md")]
    mod generator {}
    #[doc = include_str!("../../../book/src/layers.md")]
    mod layers {}
    #[doc = include_str!("../../../book/src/gradients.md")]
    mod gradients {}
    #[doc = include_str!("../../../book/src/fft.md")]
    mod fft {}
    #[doc = include_str!("../../../book/src/complexity.md")]
    mod complexity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
