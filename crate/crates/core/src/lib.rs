//! Simulator and learning engine for cached 360-degree VR delivery over a
//! UAV backhaul, with a spiking-liquid plus echo-state reinforcement learner
//! per small base station.
//!
//! The numeric layers (`channel`, `latency`, `reservoir`) are generic over
//! [`Scalar`]; the aliases below fix them to `f64`, which is what the
//! simulator uses.

pub mod agent;
pub mod channel;
pub mod content;
pub mod latency;
pub mod linalg;
pub mod oracle;
pub mod reservoir;
pub mod scalar;
pub mod simharness;

pub use scalar::Scalar;

pub type RadioParams = channel::RadioParams<f64>;
pub type Bandwidths = channel::Bandwidths<f64>;
pub type Node = channel::Node<f64>;
pub type GainTable = channel::GainTable<f64>;
pub type ComputeBudget = latency::ComputeBudget<f64>;
pub type LinkRates = latency::LinkRates<f64>;
pub type DeliveryPlan = latency::DeliveryPlan<f64>;
pub type LiquidConfig = reservoir::LiquidConfig<f64>;
pub type LiquidState = reservoir::LiquidState<f64>;
pub type EsnConfig = reservoir::EsnConfig<f64>;
pub type EsnState = reservoir::EsnState<f64>;
pub type Elsm = reservoir::Elsm<f64>;
