//! Event-driven simulation of the sampled-output consensus protocol.

mod run;
pub mod scenario;
pub mod schedule;
pub mod trace;

pub use run::run;
pub use scenario::{InitialSpec, InitialStates, ObserverInit, ScenarioConfig};
pub use schedule::{generate_schedules, EdgeSchedule, SamplingSchedule};
pub use trace::{
    decay_window, log_linear_slope, metrics, time_average, EdgeErrorSeries, MetricSeries,
    SampleEvent, SimTrace,
};
