//! Per-drop metric collection and aggregation across drops.

use std::collections::BTreeMap;
use std::fmt;

use crate::estimation::Estimator;
use crate::geometry::ForwardingStrategy;
use crate::stats::{self, CompensatedSum};

/// Where the estimator's pilot knowledge came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PilotSource {
    /// Pilots known exactly, as over an ideal backhaul.
    Perfect,
    /// Forwarded pilots with injected noise of prescribed power.
    Synthetic,
    /// Pilots forwarded over the air by the terminal this strategy picks.
    Forwarded(ForwardingStrategy),
}

impl PilotSource {
    pub fn label(&self) -> &'static str {
        match self {
            PilotSource::Perfect => "perfect",
            PilotSource::Synthetic => "synthetic",
            PilotSource::Forwarded(s) => s.as_str(),
        }
    }
}

/// One estimator fed by one pilot source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Series {
    pub estimator: Estimator,
    pub source: PilotSource,
}

impl Series {
    pub fn new(estimator: Estimator, source: PilotSource) -> Self {
        Self { estimator, source }
    }

    /// Estimator column label; perfect-pilot baselines get a `_perfect` suffix.
    pub fn estimator_label(&self) -> String {
        match self.source {
            PilotSource::Perfect => format!("{}_perfect", self.estimator.as_str()),
            _ => self.estimator.as_str().to_string(),
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.estimator_label(), self.source.label())
    }
}

/// Samples of one series at one sweep point; one entry per successful drop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesMetrics {
    pub nse: Vec<f64>,
    pub bit_errors: Vec<u64>,
    pub bits_per_drop: Vec<u64>,
}

impl SeriesMetrics {
    /// Mean NSE over drops.
    pub fn nmse(&self) -> f64 {
        stats::mean(&self.nse)
    }

    /// Pooled bit error ratio; NaN when no bits were detected.
    pub fn ber(&self) -> f64 {
        let total: u64 = self.bits_per_drop.iter().sum();
        if total == 0 {
            return f64::NAN;
        }
        self.bit_errors.iter().sum::<u64>() as f64 / total as f64
    }

    pub fn bits(&self) -> u64 {
        self.bits_per_drop.iter().sum()
    }

    /// Per-drop BER, for paired comparisons.
    pub fn ber_per_drop(&self) -> Vec<f64> {
        self.bit_errors
            .iter()
            .zip(&self.bits_per_drop)
            .map(|(&e, &n)| {
                if n == 0 {
                    f64::NAN
                } else {
                    e as f64 / n as f64
                }
            })
            .collect()
    }
}

/// Measured forwarding-noise power relative to the pilot power.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelativeNoise {
    pub noise: CompensatedSum,
    pub pilot: CompensatedSum,
}

impl RelativeNoise {
    pub fn db(&self) -> f64 {
        let p = self.pilot.value();
        if p > 0.0 {
            10.0 * (self.noise.value() / p).log10()
        } else {
            f64::NAN
        }
    }
}

/// Metrics of a single drop, produced by one worker.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DropMetrics {
    /// `points[i][series] = (nse, bit errors, bits)` at sweep point i.
    pub points: Vec<BTreeMap<Series, (f64, u64, u64)>>,
    pub relative_noise: BTreeMap<ForwardingStrategy, (f64, f64)>,
    pub redraws: usize,
}

/// Aggregated metrics over all drops of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricSink {
    pub sweep_values: Vec<f64>,
    pub points: Vec<BTreeMap<Series, SeriesMetrics>>,
    pub relative_noise: BTreeMap<ForwardingStrategy, RelativeNoise>,
    pub drops: usize,
    pub failed_drops: usize,
    pub redraws: usize,
}

impl MetricSink {
    pub fn new(sweep_values: Vec<f64>) -> Self {
        let points = vec![BTreeMap::new(); sweep_values.len()];
        Self {
            sweep_values,
            points,
            ..Default::default()
        }
    }

    /// Appends one drop. Call in drop order for reproducible sums.
    pub fn push(&mut self, drop: DropMetrics) {
        self.drops += 1;
        self.redraws += drop.redraws;
        for (acc, point) in self.points.iter_mut().zip(drop.points) {
            for (series, (nse, errors, bits)) in point {
                let m = acc.entry(series).or_default();
                m.nse.push(nse);
                m.bit_errors.push(errors);
                m.bits_per_drop.push(bits);
            }
        }
        for (s, (noise, pilot)) in drop.relative_noise {
            let r = self.relative_noise.entry(s).or_default();
            r.noise.add(noise);
            r.pilot.add(pilot);
        }
    }

    pub fn record_failure(&mut self) {
        self.failed_drops += 1;
    }

    pub fn series(&self) -> Vec<Series> {
        let mut all: Vec<Series> = self.points.iter().flat_map(|p| p.keys().copied()).collect();
        all.sort();
        all.dedup();
        all
    }

    pub fn get(&self, point: usize, series: Series) -> Option<&SeriesMetrics> {
        self.points.get(point).and_then(|p| p.get(&series))
    }
}
