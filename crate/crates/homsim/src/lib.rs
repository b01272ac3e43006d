//! Desk-scale simulator for Hong-Ou-Mandel interference between two
//! independent, group-velocity-matched SPDC pair sources at telecom
//! wavelength.
//!
//! The pipeline mirrors the optical table: spectral modeling of each PPKTP
//! source ([`spectral`]), Schmidt decomposition and spectral purity
//! ([`schmidt`]), multi-pair emission statistics ([`source`]), interference
//! at a fiber beamsplitter ([`interference`]), SNSPD detection with dark
//! counts and dead time ([`detection`]), windowed coincidence counting
//! ([`coincidence`]), and delay-scan / visibility analysis ([`analysis`]).
//!
//! Most capabilities have a runnable demo under `examples/`; the `homsim`
//! binary exposes the same experiments as subcommands.

pub mod coincidence;
pub mod config;
pub mod detection;
pub mod error;
pub mod interference;
pub mod kv;
pub mod pipeline;
pub mod rng;
pub mod sellmeier;
pub mod schmidt;
pub mod source;
pub mod spectral;

pub use error::{Error, Result};
