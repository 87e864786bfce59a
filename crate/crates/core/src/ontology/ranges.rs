use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::spec::{Better, Domain, Metric};

/// Square metres per square kilometre.
const M2_PER_KM2: f64 = 1e6;

/// IMT-2030 capability targets. Connection density is quoted per km² and
/// stored per m².
pub mod imt2030 {
    pub const PEAK_DATA_RATE_GBPS: f64 = 200.0;
    pub const USER_EXPERIENCED_DATA_RATE_MBPS: f64 = 500.0;
    pub const AREA_TRAFFIC_CAPACITY_MBPS_PER_M2: f64 = 50.0;
    pub const CONNECTION_DENSITY_PER_KM2: f64 = 1e8;
    pub const MOBILITY_KMPH: f64 = 1000.0;
    pub const LATENCY_MS: f64 = 0.1;
    /// 1 − 10⁻⁷ expressed in percent.
    pub const RELIABILITY_PERCENTAGE: f64 = 99.99999;
    pub const POSITION_ACCURACY_CM: f64 = 1.0;
}

/// Floor used for strictly positive metrics that only have an upper cap.
pub const POSITIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRange {
    pub min: f64,
    pub max: f64,
    pub better: Better,
}

impl MetricRange {
    pub const fn new(min: f64, max: f64, better: Better) -> Self {
        Self { min, max, better }
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.min && value <= self.max
    }

    /// The bound that counts as the best achievable value.
    pub fn best(&self) -> f64 {
        match self.better {
            Better::Higher => self.max,
            Better::Lower => self.min,
        }
    }

    pub fn worst(&self) -> f64 {
        match self.better {
            Better::Higher => self.min,
            Better::Lower => self.max,
        }
    }
}

/// Per-metric admissible ranges, configurable by the network operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecRangeConfig {
    pub user_experienced_data_rate_mbps: MetricRange,
    pub latency_ms: MetricRange,
    pub mobility_kmph: MetricRange,
    pub reliability_percentage: MetricRange,
    pub connectivity_density_per_m2: MetricRange,
    pub area_traffic_capacity_mbps_per_m2: MetricRange,
    pub position_accuracy_cm: MetricRange,
    pub peak_data_rate_gbps: MetricRange,
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid range for {field}: {reason}")]
pub struct RangeError {
    pub field: &'static str,
    pub reason: String,
}

impl Default for SpecRangeConfig {
    /// The IMT-2030 default profile.
    fn default() -> Self {
        use imt2030::*;
        Self {
            user_experienced_data_rate_mbps: MetricRange::new(
                POSITIVE_FLOOR,
                USER_EXPERIENCED_DATA_RATE_MBPS,
                Better::Higher,
            ),
            latency_ms: MetricRange::new(LATENCY_MS, 1e4, Better::Lower),
            mobility_kmph: MetricRange::new(0.0, MOBILITY_KMPH, Better::Higher),
            reliability_percentage: MetricRange::new(90.0, RELIABILITY_PERCENTAGE, Better::Higher),
            connectivity_density_per_m2: MetricRange::new(
                POSITIVE_FLOOR,
                CONNECTION_DENSITY_PER_KM2 / M2_PER_KM2,
                Better::Higher,
            ),
            area_traffic_capacity_mbps_per_m2: MetricRange::new(
                POSITIVE_FLOOR,
                AREA_TRAFFIC_CAPACITY_MBPS_PER_M2,
                Better::Higher,
            ),
            position_accuracy_cm: MetricRange::new(POSITION_ACCURACY_CM, 1e5, Better::Lower),
            peak_data_rate_gbps: MetricRange::new(
                POSITIVE_FLOOR,
                PEAK_DATA_RATE_GBPS,
                Better::Higher,
            ),
        }
    }
}

impl SpecRangeConfig {
    pub fn get(&self, metric: Metric) -> &MetricRange {
        match metric {
            Metric::UserExperiencedDataRate => &self.user_experienced_data_rate_mbps,
            Metric::Latency => &self.latency_ms,
            Metric::Mobility => &self.mobility_kmph,
            Metric::Reliability => &self.reliability_percentage,
            Metric::ConnectivityDensity => &self.connectivity_density_per_m2,
            Metric::AreaTrafficCapacity => &self.area_traffic_capacity_mbps_per_m2,
            Metric::PositionAccuracy => &self.position_accuracy_cm,
            Metric::PeakDataRate => &self.peak_data_rate_gbps,
        }
    }

    pub fn get_mut(&mut self, metric: Metric) -> &mut MetricRange {
        match metric {
            Metric::UserExperiencedDataRate => &mut self.user_experienced_data_rate_mbps,
            Metric::Latency => &mut self.latency_ms,
            Metric::Mobility => &mut self.mobility_kmph,
            Metric::Reliability => &mut self.reliability_percentage,
            Metric::ConnectivityDensity => &mut self.connectivity_density_per_m2,
            Metric::AreaTrafficCapacity => &mut self.area_traffic_capacity_mbps_per_m2,
            Metric::PositionAccuracy => &mut self.position_accuracy_cm,
            Metric::PeakDataRate => &mut self.peak_data_rate_gbps,
        }
    }

    /// Checks the structural invariants; returns every broken metric.
    pub fn check(&self) -> Result<(), Vec<RangeError>> {
        let mut errors = Vec::new();
        for metric in Metric::ALL {
            let r = self.get(metric);
            let field = metric.field_name();
            let mut fail = |reason: String| errors.push(RangeError { field, reason });
            if !r.min.is_finite() || !r.max.is_finite() {
                fail("bounds must be finite".into());
                continue;
            }
            if r.min >= r.max {
                fail(format!("min {} must be below max {}", r.min, r.max));
            }
            match metric.domain() {
                Domain::Positive if r.min <= 0.0 => fail("min must be > 0".into()),
                Domain::NonNegative if r.min < 0.0 => fail("min must be >= 0".into()),
                Domain::Percentage if r.min <= 0.0 || r.max >= 100.0 => {
                    fail("bounds must lie inside (0, 100)".into())
                }
                _ => {}
            }
            let expected = match metric {
                Metric::Latency | Metric::PositionAccuracy => Better::Lower,
                _ => Better::Higher,
            };
            if r.better != expected {
                fail(format!("better must be {expected:?}"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}
