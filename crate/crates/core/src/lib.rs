//! Secure key rates for quantum key distribution with weak coherent and
//! modified coherent (squeezed coherent) photon sources.
//!
//! * [`photon_source`]: Fock amplitudes, multi-photon and click probabilities.
//! * [`fock_oracle`]: brute-force Fock-sum and quadrature cross-checks.
//! * [`key_rate`]: channel, detector and secure-rate model.
//! * [`source`]: source families and the name-keyed registry.
//! * [`optimizer`]: optimal source parameter, distance sweeps, cutoffs.

pub mod error;
pub mod fock_oracle;
pub mod key_rate;
pub mod optimizer;
pub mod photon_source;
pub mod source;

pub use error::{Error, Result};
pub use key_rate::{ChannelModel, DetectorModel, FPolicy, RateBreakdown, SignConvention};
pub use optimizer::{Optimum, OptimumPoint, Scenario, SearchSettings};
pub use photon_source::{Protocol, SqueezedCoherentState};
pub use source::{FamilyRegistry, SourceFamily};
