//! Vector coded caching for the multi-antenna downlink.
//!
//! The crate couples three views of the same system:
//!
//! * [`scheme`]: placement/delivery combinatorics of `(G, Q)`-vector coded
//!   caching, where `G = Λγ + 1` groups of `Q` users are served per stage;
//! * [`precoding`] and [`montecarlo`]: signal-level simulation of MF, ZF and
//!   RZF precoding with cache-aided cancellation of inter-group interference;
//! * [`analytic`] and [`optimizer`]: large-antenna closed forms for the
//!   average and CSI-aware effective sum-rates, and the stream ratio
//!   `c = Q/L` that maximizes them.
//!
//! Rates are in nats per channel use throughout.

pub mod analytic;
pub mod channel;
pub mod error;
pub mod montecarlo;
pub mod optimizer;
pub mod precoding;
pub mod scheme;
mod summation;

pub use analytic::{CsiCostModel, RateInputs, RateReport, RateSource, RzfDeterministics};
pub use channel::{ChannelMatrix, RngSeed};
pub use error::{Error, Result};
pub use montecarlo::{McConfig, McEstimate, Normalization};
pub use optimizer::{GainReport, OptMethod, OptimizationResult};
pub use precoding::{PowerMode, Precoder, PrecoderKind};
pub use scheme::{DeliveryPlan, Gamma, OperatingPoint, SchemeConfig, ValidatedScheme};
