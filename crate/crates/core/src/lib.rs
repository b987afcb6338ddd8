//! Privacy auditing as bit transmission.
//!
//! Canary bits are pushed through a simulated mechanism and decoded. The f-DP
//! curve of the mechanism limits how well any decoder can do, so the observed
//! error rate, with a confidence margin, yields a lower bound on ε.

pub mod bounds;
pub mod channel;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod limits;
pub mod optimize;
pub mod special;
pub mod tradeoff;

pub use bounds::{fdp_to_eps, floor_to_param, privacy_lower_bound, AuditResult, CurveFamily};
pub use channel::{simulate, Arrangement, AuditTranscript, MechanismKind, MechanismSpec};
pub use error::{AuditError, Result};
pub use estimate::{advanced_ci, CiMethod, ErrorEstimate};
pub use limits::{bit_error_floor, LimitProfile};
pub use tradeoff::TradeoffCurve;
