use serde::{Deserialize, Serialize};

use super::episode::EpisodeTrace;
use super::metrics::{violation_moving_average, Welford};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Regret,
    RegretUnconstrained,
    Violation,
    ViolationMovingAverage,
    NormalizedConstraint,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Regret,
        Metric::RegretUnconstrained,
        Metric::Violation,
        Metric::ViolationMovingAverage,
        Metric::NormalizedConstraint,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Regret => "regret",
            Metric::RegretUnconstrained => "regret_unconstrained",
            Metric::Violation => "violation",
            Metric::ViolationMovingAverage => "violation_ma",
            Metric::NormalizedConstraint => "normalized_constraint",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.label() == label)
    }
}

/// Identity of the cell a trace belongs to; traces are only aggregated with
/// traces of the same cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub policy: String,
    pub spec_alpha: f64,
    pub horizon: usize,
    pub window: usize,
}

/// The per-step metric series of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrace {
    pub key: CellKey,
    /// `(metric, first step, values)`.
    pub series: Vec<(Metric, u64, Vec<f64>)>,
}

impl ReducedTrace {
    pub fn from_trace(trace: &EpisodeTrace, window: usize) -> Result<Self> {
        let recs = &trace.records;
        let collect = |f: fn(&super::episode::StepRecord) -> f64| recs.iter().map(f).collect::<Vec<f64>>();
        let ma = violation_moving_average(&trace.violations(), window)?;
        Ok(Self {
            key: CellKey {
                policy: trace.policy.clone(),
                spec_alpha: trace.spec_alpha,
                horizon: trace.horizon(),
                window,
            },
            series: vec![
                (Metric::Regret, 1, collect(|r| r.regret)),
                (Metric::RegretUnconstrained, 1, collect(|r| r.regret_unconstrained)),
                (Metric::Violation, 1, collect(|r| r.violation as u8 as f64)),
                (Metric::ViolationMovingAverage, window as u64, ma),
                (Metric::NormalizedConstraint, 1, collect(|r| r.normalized_constraint())),
            ],
        })
    }

    pub fn get(&self, metric: Metric) -> &[f64] {
        self.series
            .iter()
            .find(|(m, _, _)| *m == metric)
            .map(|(_, _, v)| v.as_slice())
            .unwrap_or(&[])
    }
}

/// Per-step mean and standard error of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: Metric,
    pub first_step: u64,
    pub mean: Vec<f64>,
    pub sem: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Aggregate over realizations of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub key: CellKey,
    pub realizations: usize,
    pub fingerprint: String,
    pub metrics: Vec<MetricSeries>,
}

impl AggregateSeries {
    pub fn metric(&self, metric: Metric) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

/// Streaming aggregation. Feeding realizations in index order makes the
/// result independent of how they were computed.
#[derive(Debug, Clone)]
pub struct Aggregator {
    key: Option<CellKey>,
    fingerprint: String,
    stats: Vec<(Metric, u64, Vec<Welford>)>,
    count: usize,
}

impl Aggregator {
    pub fn new(fingerprint: impl Into<String>) -> Self {
        Self {
            key: None,
            fingerprint: fingerprint.into(),
            stats: Vec::new(),
            count: 0,
        }
    }

    pub fn push(&mut self, reduced: &ReducedTrace) -> Result<()> {
        match &self.key {
            None => {
                self.key = Some(reduced.key.clone());
                self.stats = reduced
                    .series
                    .iter()
                    .map(|(m, first, v)| (*m, *first, vec![Welford::default(); v.len()]))
                    .collect();
            }
            Some(key) if *key != reduced.key => {
                return Err(Error::Aggregation(format!(
                    "cannot mix {:?} with {:?}",
                    reduced.key, key
                )));
            }
            Some(_) => {}
        }
        if reduced.series.len() != self.stats.len() {
            return Err(Error::Aggregation("metric sets differ between realizations".into()));
        }
        for ((metric, first, values), (m, f, acc)) in reduced.series.iter().zip(self.stats.iter_mut()) {
            if metric != m || first != f || values.len() != acc.len() {
                return Err(Error::Aggregation(format!("series shape differs for {}", metric.label())));
            }
            for (a, &v) in acc.iter_mut().zip(values) {
                a.push(v);
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Result<AggregateSeries> {
        let key = self
            .key
            .ok_or_else(|| Error::Aggregation("no realizations to aggregate".into()))?;
        Ok(AggregateSeries {
            key,
            realizations: self.count,
            fingerprint: self.fingerprint,
            metrics: self
                .stats
                .into_iter()
                .map(|(metric, first_step, acc)| MetricSeries {
                    metric,
                    first_step,
                    mean: acc.iter().map(Welford::mean).collect(),
                    sem: acc.iter().map(Welford::sem).collect(),
                })
                .collect(),
        })
    }
}

/// Aggregates complete traces of one cell.
pub fn aggregate(traces: &[EpisodeTrace], window: usize, fingerprint: &str) -> Result<AggregateSeries> {
    let mut agg = Aggregator::new(fingerprint);
    for trace in traces {
        agg.push(&ReducedTrace::from_trace(trace, window)?)?;
    }
    agg.finish()
}
