//! Filtering and singular spectrum analysis.

mod filter;
mod ssa;

pub use filter::{
    bandpass_filter, notch_filter, Biquad, BiquadState, SosFilter, SosState,
    DEFAULT_BANDPASS_ORDER, DEFAULT_BAND_HZ, DEFAULT_NOTCH_HZ, DEFAULT_NOTCH_Q,
};
pub use ssa::{default_window_len, ssa_decompose, ssa_denoise, SsaDecomposition};
