//! Precode-and-compress fronthaul quantization for cell-free massive MIMO.
//!
//! The crate covers the full chain from channel synthesis to spectral
//! efficiency: precoders ([`precoding`]), the lookup-codebook quantizer family
//! ([`quantizers`]), neural codebooks driven by annealed gradient descent
//! ([`neural`]), codebook training ([`training`]), effective-interference and
//! rate metrics ([`metrics`]), analytic complexity/overhead models
//! ([`accounting`]) and a seeded experiment runner ([`harness`]).

pub mod accounting;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod precoding;
pub mod quantizers;
pub mod training;

pub use error::{Error, Result};
pub use model::{
    apply_power_scaling, assemble_precoded, ChannelState, PrecodedSignal, QuantizationResult, SymbolBatch, SystemConfig,
};

/// Double-precision complex scalar used everywhere.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;

/// Order-preserving map over a slice, parallel when the `parallel` feature
/// is enabled.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}
