//! Maps a specification onto eight [0, 1] radar axes where 1 is the most
//! demanding end of each metric's configured range.
//!
//! Axes use a logarithmic scale because the ranges span several orders of
//! magnitude. Reliability is scaled on its failure probability, so each
//! additional "nine" moves the axis by the same amount. Mobility may be zero
//! and is scaled on `ln(1 + v)`.

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::ontology::{Better, CommunicationProcess, Metric, MetricRange, NetworkSpecification, SpecRangeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarAxis {
    pub metric: Metric,
    pub label: String,
    pub unit: String,
    /// Normalized value in [0, 1]; 0 when the metric is absent.
    pub value: f64,
    pub raw: Option<f64>,
}

/// Eight axes in canonical metric order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RadarAxes {
    pub axes: Vec<RadarAxis>,
}

impl RadarAxes {
    pub fn values(&self) -> Vec<f64> {
        self.axes.iter().map(|a| a.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessRadar {
    pub process_id: Uuid,
    pub process_name: String,
    pub axes: RadarAxes,
}

fn transform(metric: Metric, v: f64) -> f64 {
    match metric {
        Metric::Reliability => ((100.0 - v) / 100.0).ln(),
        Metric::Mobility => v.ln_1p(),
        _ => v.ln(),
    }
}

/// Normalized value of one metric. Out-of-range values clamp to the nearest
/// end.
pub fn axis_value(metric: Metric, value: f64, range: &MetricRange) -> f64 {
    let (lo, hi) = (transform(metric, range.min), transform(metric, range.max));
    let t = transform(metric, value.clamp(range.min, range.max));
    let x = if range.better == Better::Higher {
        (t - lo) / (hi - lo)
    } else {
        (hi - t) / (hi - lo)
    };
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

pub fn radar_axes(spec: &NetworkSpecification, ranges: &SpecRangeConfig) -> RadarAxes {
    RadarAxes {
        axes: Metric::ALL
            .into_iter()
            .map(|m| {
                let raw = spec.get(m);
                RadarAxis {
                    metric: m,
                    label: m.label().to_string(),
                    unit: m.unit().to_string(),
                    value: raw.map_or(0.0, |v| axis_value(m, v, ranges.get(m))),
                    raw,
                }
            })
            .collect(),
    }
}

pub fn process_radar(process: &CommunicationProcess, ranges: &SpecRangeConfig) -> ProcessRadar {
    ProcessRadar {
        process_id: process.id,
        process_name: process.name.clone(),
        axes: radar_axes(&process.specification, ranges),
    }
}
