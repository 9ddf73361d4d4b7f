//! QoE model: KPIs are normalized at the leaves of a weighted factor tree,
//! summed into the media, interaction and performance quality indexes
//! (MQI, IQI, PQI), and combined into a scalar QoE. The per-step RL reward
//! trades display quality against switching and deadline overrun.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KpiField {
    ResolutionLevel,
    FramerateEffective,
    Latency,
    LossRate,
    StallRatio,
}

impl KpiField {
    pub const ALL: [KpiField; 5] = [
        KpiField::ResolutionLevel,
        KpiField::FramerateEffective,
        KpiField::Latency,
        KpiField::LossRate,
        KpiField::StallRatio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KpiField::ResolutionLevel => "delivered_resolution_level",
            KpiField::FramerateEffective => "framerate_effective",
            KpiField::Latency => "end_to_end_latency",
            KpiField::LossRate => "loss_rate",
            KpiField::StallRatio => "stall_ratio",
        }
    }
}

impl fmt::Display for KpiField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KpiField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        KpiField::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::domain("kpi", format!("unknown KPI '{s}'")))
    }
}

/// Engineering-level measurements for one interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KpiSample {
    /// Index into the bitrate ladder.
    pub delivered_resolution_level: f64,
    /// Decodable frames per second (per eye).
    pub framerate_effective: f64,
    pub end_to_end_latency_ms: f64,
    pub loss_rate: f64,
    /// Fraction of frame slots without a decodable frame.
    pub stall_ratio: f64,
}

impl KpiSample {
    pub fn get(&self, field: KpiField) -> f64 {
        match field {
            KpiField::ResolutionLevel => self.delivered_resolution_level,
            KpiField::FramerateEffective => self.framerate_effective,
            KpiField::Latency => self.end_to_end_latency_ms,
            KpiField::LossRate => self.loss_rate,
            KpiField::StallRatio => self.stall_ratio,
        }
    }
}

/// A KPI normalized linearly so that `worst` maps to 0 and `best` to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leaf {
    pub kpi: KpiField,
    pub worst: f64,
    pub best: f64,
}

impl Leaf {
    /// Normalized value and whether it had to be clamped.
    pub fn normalize(&self, x: f64) -> (f64, bool) {
        let v = (x - self.worst) / (self.best - self.worst);
        if v.is_nan() {
            return (0.0, true);
        }
        let c = v.clamp(0.0, 1.0);
        (c, c != v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FactorNode {
    Leaf(Leaf),
    Node {
        name: String,
        children: Vec<(f64, FactorNode)>,
    },
}

impl FactorNode {
    pub fn leaf(kpi: KpiField, worst: f64, best: f64) -> Self {
        FactorNode::Leaf(Leaf { kpi, worst, best })
    }

    pub fn node(name: impl Into<String>, children: Vec<(f64, FactorNode)>) -> Self {
        FactorNode::Node {
            name: name.into(),
            children,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        match self {
            FactorNode::Leaf(l) => {
                if !(l.worst.is_finite() && l.best.is_finite()) || l.worst == l.best {
                    return Err(Error::domain(
                        path,
                        format!("leaf {} needs finite, distinct bounds", l.kpi),
                    ));
                }
                Ok(())
            }
            FactorNode::Node { name, children } => {
                let path = format!("{path}.{name}");
                if children.is_empty() {
                    return Err(Error::domain(&path, "node has no children"));
                }
                if children.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::domain(&path, "weights must be non-negative"));
                }
                let sum: f64 = children.iter().map(|(w, _)| w).sum();
                if (sum - 1.0).abs() > WEIGHT_TOL {
                    return Err(Error::domain(&path, format!("weights sum to {sum}, not 1")));
                }
                children.iter().try_for_each(|(_, c)| c.validate(&path))
            }
        }
    }

    /// Same tree with every node's weights rescaled to sum to 1.
    pub fn normalized(&self) -> Self {
        match self {
            FactorNode::Leaf(_) => self.clone(),
            FactorNode::Node { name, children } => {
                let sum: f64 = children.iter().map(|(w, _)| w).sum();
                FactorNode::Node {
                    name: name.clone(),
                    children: children
                        .iter()
                        .map(|(w, c)| (w / sum, c.normalized()))
                        .collect(),
                }
            }
        }
    }

    fn evaluate(&self, kpi: &KpiSample, clamped: &mut Vec<KpiField>) -> f64 {
        match self {
            FactorNode::Leaf(l) => {
                let (v, was_clamped) = l.normalize(kpi.get(l.kpi));
                if was_clamped && !clamped.contains(&l.kpi) {
                    clamped.push(l.kpi);
                }
                v
            }
            FactorNode::Node { children, .. } => children
                .iter()
                .map(|(w, c)| w * c.evaluate(kpi, clamped))
                .sum(),
        }
    }
}

/// The three index sub-trees.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTree {
    pub mqi: FactorNode,
    pub iqi: FactorNode,
    pub pqi: FactorNode,
}

impl FactorTree {
    /// MQI from resolution and effective framerate, IQI from latency and
    /// stalls, PQI from loss and latency; equal weights throughout.
    pub fn default_for(ladder_len: usize, fps: f64, worst_latency_ms: f64) -> Self {
        let top_level = ladder_len.saturating_sub(1).max(1) as f64;
        FactorTree {
            mqi: FactorNode::node(
                "mqi",
                vec![
                    (
                        0.5,
                        FactorNode::leaf(KpiField::ResolutionLevel, 0.0, top_level),
                    ),
                    (
                        0.5,
                        FactorNode::leaf(KpiField::FramerateEffective, 0.0, fps),
                    ),
                ],
            ),
            iqi: FactorNode::node(
                "iqi",
                vec![
                    (
                        0.5,
                        FactorNode::leaf(KpiField::Latency, worst_latency_ms, 0.0),
                    ),
                    (0.5, FactorNode::leaf(KpiField::StallRatio, 1.0, 0.0)),
                ],
            ),
            pqi: FactorNode::node(
                "pqi",
                vec![
                    (0.5, FactorNode::leaf(KpiField::LossRate, 0.1, 0.0)),
                    (
                        0.5,
                        FactorNode::leaf(KpiField::Latency, worst_latency_ms, 0.0),
                    ),
                ],
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mqi.validate("qoe.mqi")?;
        self.iqi.validate("qoe.iqi")?;
        self.pqi.validate("qoe.pqi")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Indexes {
    pub mqi: f64,
    pub iqi: f64,
    pub pqi: f64,
}

/// KPIs that fell outside their normalization bounds and were clamped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub clamped: Vec<KpiField>,
}

pub fn kpi_to_indexes(kpi: &KpiSample, tree: &FactorTree) -> (Indexes, Diagnostics) {
    let mut clamped = Vec::new();
    let idx = Indexes {
        mqi: tree.mqi.evaluate(kpi, &mut clamped),
        iqi: tree.iqi.evaluate(kpi, &mut clamped),
        pqi: tree.pqi.evaluate(kpi, &mut clamped),
    };
    (idx, Diagnostics { clamped })
}

/// Weights of MQI, IQI and PQI in the scalar QoE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexWeights {
    pub mqi: f64,
    pub iqi: f64,
    pub pqi: f64,
}

impl Default for IndexWeights {
    fn default() -> Self {
        IndexWeights {
            mqi: 1.0 / 3.0,
            iqi: 1.0 / 3.0,
            pqi: 1.0 / 3.0,
        }
    }
}

impl IndexWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.mqi, self.iqi, self.pqi];
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::domain(
                "qoe.index_weights",
                "weights must be non-negative",
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::domain(
                "qoe.index_weights",
                format!("weights sum to {sum}, not 1"),
            ));
        }
        Ok(())
    }
}

/// Convex combination of the three indexes.
pub fn qoe_score(idx: Indexes, weights: IndexWeights) -> Result<f64> {
    weights.validate()?;
    Ok(weights.mqi * idx.mqi + weights.iqi * idx.iqi + weights.pqi * idx.pqi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardParams {
    /// Quality weight.
    pub alpha: f64,
    /// Smoothness (switching) weight.
    pub beta: f64,
    /// Latency-penalty weight.
    pub gamma: f64,
    pub deadline_ms: f64,
    /// Quality per ladder level, non-decreasing, in [0, 1].
    pub quality_map: Vec<f64>,
}

impl RewardParams {
    /// Quality proportional to bitrate, normalized by the top rung.
    pub fn linear_quality(ladder: &[f64]) -> Vec<f64> {
        let top = ladder.last().copied().unwrap_or(1.0);
        ladder.iter().map(|b| b / top).collect()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(
                    format!("qoe.{name}"),
                    format!("must be >= 0, got {v}"),
                ));
            }
        }
        if !(self.deadline_ms.is_finite() && self.deadline_ms > 0.0) {
            return Err(Error::domain("qoe.deadline_ms", "must be > 0"));
        }
        if self.quality_map.is_empty() {
            return Err(Error::domain("qoe.quality_map", "must not be empty"));
        }
        if self.quality_map.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::domain(
                "qoe.quality_map",
                "values must lie in [0, 1]",
            ));
        }
        if self.quality_map.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("qoe.quality_map", "must be non-decreasing"));
        }
        Ok(())
    }
}

/// `alpha*q(l_t) - beta*|q(l_t) - q(l_{t-1})| - gamma*max(0, lat - D)/D`.
pub fn step_reward(level: usize, prev_level: usize, latency_ms: f64, p: &RewardParams) -> f64 {
    let q = p.quality_map[level];
    let q_prev = p.quality_map[prev_level];
    let overrun = (latency_ms - p.deadline_ms).max(0.0) / p.deadline_ms;
    p.alpha * q - p.beta * (q - q_prev).abs() - p.gamma * overrun
}
