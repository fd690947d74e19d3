//! Scenario configuration, the per-drop simulation pipeline and CSV output.

mod config;
mod output;
mod run;
mod sink;

pub use config::{parse_sweep_values, CorrelationModel, ScenarioConfig, SweepAxis, UtCsi};
pub use output::{emit_csv, summary, CSV_FILES};
pub use run::{relative_noise_power, run_experiment, set_target_sinr, Experiment};
pub use sink::{DropMetrics, MetricSink, PilotSource, RelativeNoise, Series, SeriesMetrics};
