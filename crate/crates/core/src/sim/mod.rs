//! Machine description, schedule validation and replay, functional
//! co-simulation and traffic statistics.

mod config;
mod functional;
mod stats;
mod sweep;
mod validate;

pub use config::{fu_timing, ConfigError, FuCounts, FuKind, FuLatencies, FuModel, MachineConfig};
pub use functional::{functional_run, FunctionalError, FunctionalVerdict, MemoryImage};
pub use stats::{traffic_report, SimStats, Traffic, TrafficSplit};
pub use sweep::{sweep, SweepPoint, SweepRow, SweepTable};
pub use validate::{validate_and_run, SimReport, Violation, ViolationKind};
