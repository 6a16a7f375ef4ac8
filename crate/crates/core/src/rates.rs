//! Validated rate vectors and near-equal-rate clustering.

use crate::error::{check_rate, Error, Result};
use crate::summation::compensated_sum;

/// Default relative tolerance under which two rates are treated as equal.
pub const DEFAULT_CLUSTER_TOLERANCE: f64 = 1e-9;

/// Relative gap `|a - b| / max(a, b)` between two positive rates.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.max(b)
}

/// A group of rates that are equal within the cluster tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    members: Vec<usize>,
    rate: f64,
}

impl Cluster {
    /// Indices into the owning [`RateVector`], ordered by rate.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }

    /// Representative rate (arithmetic mean of the members).
    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Rates `λ_1..λ_N` of independent exponential variables.
///
/// Clusters are formed canonically: the rates are sorted and greedily merged,
/// a rate joining the current cluster while its relative gap to the
/// cluster's smallest member is within the tolerance. The result does not
/// depend on the input order.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    rates: Vec<f64>,
    cluster_tolerance: f64,
    clusters: Vec<Cluster>,
}

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(rates, DEFAULT_CLUSTER_TOLERANCE)
    }

    pub fn with_tolerance(rates: Vec<f64>, cluster_tolerance: f64) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Domain("at least one rate is required".into()));
        }
        for &r in &rates {
            check_rate(r)?;
        }
        if !(cluster_tolerance.is_finite() && (0.0..1.0).contains(&cluster_tolerance)) {
            return Err(Error::Domain(format!(
                "cluster tolerance must lie in [0, 1), got {cluster_tolerance}"
            )));
        }

        let mut order: Vec<usize> = (0..rates.len()).collect();
        order.sort_by(|&i, &j| rates[i].total_cmp(&rates[j]).then(i.cmp(&j)));

        let mut groups: Vec<Vec<usize>> = Vec::new();
        for idx in order {
            match groups.last_mut() {
                Some(g) if relative_gap(rates[g[0]], rates[idx]) <= cluster_tolerance => {
                    g.push(idx)
                }
                _ => groups.push(vec![idx]),
            }
        }
        let clusters = groups
            .into_iter()
            .map(|members| {
                let rate =
                    compensated_sum(members.iter().map(|&i| rates[i])) / members.len() as f64;
                Cluster { members, rate }
            })
            .collect();

        Ok(Self {
            rates,
            cluster_tolerance,
            clusters,
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn cluster_tolerance(&self) -> f64 {
        self.cluster_tolerance
    }

    /// Clusters in ascending order of representative rate.
    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// True when every cluster is a singleton.
    pub fn is_distinct(&self) -> bool {
        self.clusters.len() == self.rates.len()
    }

    /// Representative rates, one per cluster, ascending.
    pub fn cluster_rates(&self) -> Vec<f64> {
        self.clusters.iter().map(Cluster::rate).collect()
    }

    /// Smallest relative gap between adjacent cluster representatives, or
    /// `None` for a single cluster.
    pub fn min_relative_gap(&self) -> Option<f64> {
        self.clusters
            .windows(2)
            .map(|w| relative_gap(w[0].rate, w[1].rate))
            .min_by(f64::total_cmp)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ λ_n`.
    pub fn total_rate(&self) -> f64 {
        compensated_sum(self.rates.iter().copied())
    }

    /// Rates multiplied by a positive constant (same tolerance).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        check_rate(factor)?;
        Self::with_tolerance(
            self.rates.iter().map(|r| r * factor).collect(),
            self.cluster_tolerance,
        )
    }
}

impl TryFrom<Vec<f64>> for RateVector {
    type Error = Error;

    fn try_from(rates: Vec<f64>) -> Result<Self> {
        Self::new(rates)
    }
}

impl TryFrom<&[f64]> for RateVector {
    type Error = Error;

    fn try_from(rates: &[f64]) -> Result<Self> {
        Self::new(rates.to_vec())
    }
}
