//! Episode runner, metrics, aggregation and export.

mod aggregate;
mod env;
mod episode;
mod export;
mod metrics;
mod suite;

pub use aggregate::{aggregate, AggregateSeries, Aggregator, CellKey, Metric, MetricSeries, ReducedTrace};
pub use env::{EnvStep, Environment, RewardReference, SyntheticEnv, TranscodeEnv};
pub use episode::{run_episode, run_episode_with, EpisodeTrace, StepRecord};
pub use export::{
    fingerprint, read_series_csv, read_table_csv, series_rows, write_json_sidecar, write_series_csv,
    write_table_csv, SeriesRow, TableRow,
};
pub use metrics::{normalized_constraint_last_k, tail_mean, violation_moving_average, MeanSem, Welford};
pub use suite::{
    replay_traces, run_suite, CellReport, CellSpec, CellSummary, RealizationStats, SuiteReport, SuiteSettings,
    SyntheticSuite, TranscodeSuite,
};
