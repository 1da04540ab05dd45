//! Late-time tails of small spherical solutions of `box phi = F(phi, d phi)`
//! in odd spatial dimensions `d = 2l + 3`.
//!
//! The crate predicts tail exponents and amplitudes in closed form
//! ([`predictions`]), cross-checks them with direct quadrature of the first
//! Duhamel iterate ([`duhamel`]), and measures them from a full nonlinear
//! radial evolution ([`evolver`], [`tailfit`]).

pub mod cli;
pub mod duhamel;
pub mod evolver;
pub mod freewave;
pub mod predictions;
pub mod specialfn;
pub mod tailfit;
pub mod wavedata;
