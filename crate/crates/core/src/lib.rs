//! Query-driven, progressive entity resolution over property graphs.

pub mod aggregate;
pub mod blocking;
pub mod dsu;
pub mod graph;
pub mod ids;
pub mod matchers;
pub mod metrics;
pub mod pattern;
pub mod pps;
pub mod rules;
pub mod synth;
