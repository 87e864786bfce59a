use serde::{Deserialize, Serialize};

/// Which end of a metric's range is desirable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Better {
    Higher,
    Lower,
}

/// The eight user-facing network specification metrics, in canonical
/// declaration order. Every per-metric iteration in the crate (validation
/// order, radar axis order, prompt schema) follows [`Metric::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    UserExperiencedDataRate,
    Latency,
    Mobility,
    Reliability,
    ConnectivityDensity,
    AreaTrafficCapacity,
    PositionAccuracy,
    PeakDataRate,
}

/// Admissible domain of a metric before any configured range applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Strictly positive real.
    Positive,
    /// Zero allowed (a stationary device has mobility 0).
    NonNegative,
    /// Open interval (0, 100).
    Percentage,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::UserExperiencedDataRate,
        Metric::Latency,
        Metric::Mobility,
        Metric::Reliability,
        Metric::ConnectivityDensity,
        Metric::AreaTrafficCapacity,
        Metric::PositionAccuracy,
        Metric::PeakDataRate,
    ];

    /// Canonical JSON field name.
    pub const fn field_name(self) -> &'static str {
        match self {
            Metric::UserExperiencedDataRate => "user_experienced_data_rate_mbps",
            Metric::Latency => "latency_ms",
            Metric::Mobility => "mobility_kmph",
            Metric::Reliability => "reliability_percentage",
            Metric::ConnectivityDensity => "connectivity_density_per_m2",
            Metric::AreaTrafficCapacity => "area_traffic_capacity_mbps_per_m2",
            Metric::PositionAccuracy => "position_accuracy_cm",
            Metric::PeakDataRate => "peak_data_rate_gbps",
        }
    }

    pub const fn unit(self) -> &'static str {
        match self {
            Metric::UserExperiencedDataRate => "Mbit/s",
            Metric::Latency => "ms",
            Metric::Mobility => "km/h",
            Metric::Reliability => "%",
            Metric::ConnectivityDensity => "devices/m²",
            Metric::AreaTrafficCapacity => "Mbit/s/m²",
            Metric::PositionAccuracy => "cm",
            Metric::PeakDataRate => "Gbit/s",
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            Metric::UserExperiencedDataRate => "User experienced data rate",
            Metric::Latency => "Latency",
            Metric::Mobility => "Mobility",
            Metric::Reliability => "Reliability",
            Metric::ConnectivityDensity => "Connection density",
            Metric::AreaTrafficCapacity => "Area traffic capacity",
            Metric::PositionAccuracy => "Positioning accuracy",
            Metric::PeakDataRate => "Peak data rate",
        }
    }

    pub const fn domain(self) -> Domain {
        match self {
            Metric::Mobility => Domain::NonNegative,
            Metric::Reliability => Domain::Percentage,
            _ => Domain::Positive,
        }
    }

    pub fn from_field_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.field_name() == name)
    }
}

/// Quantitative requirements of one communication process. Each metric is
/// optional: a process only constrains the axes it cares about.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpecification {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_experienced_data_rate_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "mobility_kmps")]
    pub mobility_kmph: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reliability_percentage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity_density_per_m2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_traffic_capacity_mbps_per_m2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_accuracy_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_data_rate_gbps: Option<f64>,
}

impl NetworkSpecification {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::UserExperiencedDataRate => self.user_experienced_data_rate_mbps,
            Metric::Latency => self.latency_ms,
            Metric::Mobility => self.mobility_kmph,
            Metric::Reliability => self.reliability_percentage,
            Metric::ConnectivityDensity => self.connectivity_density_per_m2,
            Metric::AreaTrafficCapacity => self.area_traffic_capacity_mbps_per_m2,
            Metric::PositionAccuracy => self.position_accuracy_cm,
            Metric::PeakDataRate => self.peak_data_rate_gbps,
        }
    }

    pub fn set(&mut self, metric: Metric, value: Option<f64>) {
        let slot = match metric {
            Metric::UserExperiencedDataRate => &mut self.user_experienced_data_rate_mbps,
            Metric::Latency => &mut self.latency_ms,
            Metric::Mobility => &mut self.mobility_kmph,
            Metric::Reliability => &mut self.reliability_percentage,
            Metric::ConnectivityDensity => &mut self.connectivity_density_per_m2,
            Metric::AreaTrafficCapacity => &mut self.area_traffic_capacity_mbps_per_m2,
            Metric::PositionAccuracy => &mut self.position_accuracy_cm,
            Metric::PeakDataRate => &mut self.peak_data_rate_gbps,
        };
        *slot = value;
    }

    pub fn with(mut self, metric: Metric, value: f64) -> Self {
        self.set(metric, Some(value));
        self
    }

    pub fn is_empty(&self) -> bool {
        Metric::ALL.iter().all(|m| self.get(*m).is_none())
    }

    /// Present metrics in canonical order.
    pub fn present(&self) -> impl Iterator<Item = (Metric, f64)> + '_ {
        Metric::ALL
            .into_iter()
            .filter_map(|m| self.get(m).map(|v| (m, v)))
    }
}
