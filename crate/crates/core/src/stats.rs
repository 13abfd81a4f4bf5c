//! Pearson correlation with two-tailed Student-t significance.
//!
//! The t CDF is evaluated through the regularized incomplete beta function,
//! using a Lanczos log-gamma and Lentz's continued fraction.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{AgentMetric, ChallengeAggregate};
use crate::report::{HumanMetric, HumanStatRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("join too small for {agent}: {matched} matched challenge(s), need at least 3")]
    JoinTooSmall { agent: String, matched: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    VeryWeak,
    Weak,
    Moderate,
    Strong,
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bucket::VeryWeak => "very weak",
            Bucket::Weak => "weak",
            Bucket::Moderate => "moderate",
            Bucket::Strong => "strong",
        })
    }
}

/// Strength bucket for |r|; intervals are closed on the left.
pub fn bucket(r: f64) -> Bucket {
    let m = r.abs();
    if m < 0.2 {
        Bucket::VeryWeak
    } else if m < 0.4 {
        Bucket::Weak
    } else if m < 0.6 {
        Bucket::Moderate
    } else {
        Bucket::Strong
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
    pub bucket: Bucket,
}

/// Sample Pearson coefficient, computed from centered values.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::DegenerateInput(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::DegenerateInput(format!("n = {n} < 3")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite value".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateInput("zero variance".into()));
    }
    // A single sqrt keeps r exactly 1 when y is a copy of x.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-tailed p-value of a Pearson coefficient `r` over `n` pairs.
pub fn p_value(r: f64, n: usize) -> Result<f64, StatsError> {
    if r.is_nan() || r.abs() > 1.0 {
        return Err(StatsError::DegenerateInput(format!(
            "|r| = {} > 1",
            r.abs()
        )));
    }
    if n < 3 {
        return Err(StatsError::DegenerateInput(format!("n = {n} < 3")));
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let df = (n - 2) as f64;
    // P(|T| >= t) = I_{df/(df+t^2)}(df/2, 1/2), and df/(df+t^2) = 1 - r^2.
    let x = (1.0 - r.abs()) * (1.0 + r.abs());
    Ok(regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0))
}

/// Two-tailed p-value for a t statistic with `df` degrees of freedom.
pub fn t_two_tailed(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)
}

pub fn correlate(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    let r = pearson_r(x, y)?;
    let p = p_value(r, x.len())?;
    Ok(CorrelationResult {
        r,
        p,
        n: x.len(),
        bucket: bucket(r),
    })
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(z) for z > 0.
pub fn ln_gamma(z: f64) -> f64 {
    if z < 0.5 {
        // Reflection keeps the Lanczos sum in its accurate range.
        return (PI / (PI * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_incomplete_beta(1.0 - x, b, a);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    ln_front.exp() * beta_continued_fraction(x, a, b) / a
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Formats p in the `<.001` table style, exact digits otherwise.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<.001".to_string()
    } else {
        let s = format!("{p:.3}");
        s.strip_prefix('0').map(str::to_string).unwrap_or(s)
    }
}

/// Which agent metric is paired with which human metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricPair {
    pub agent: AgentMetric,
    pub human: HumanMetric,
}

impl MetricPair {
    pub fn label(&self) -> String {
        format!("{}~{}", self.agent.key(), self.human.key())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub agent: String,
    pub metric: String,
    #[serde(flatten)]
    pub result: CorrelationResult,
    /// Challenge ids present for the agent but absent from the human data.
    pub unmatched_agent: Vec<String>,
    /// Challenge ids present in the human data but not run by the agent.
    pub unmatched_human: Vec<String>,
}

/// Challenge ids join case-insensitively and ignore surrounding whitespace.
pub fn join_key(id: &str) -> String {
    id.trim().to_ascii_uppercase()
}

/// Joins each agent's aggregates with human records on challenge id and
/// correlates every requested metric pairing.
pub fn correlate_agents(
    aggregates: &BTreeMap<String, Vec<ChallengeAggregate>>,
    human: &[HumanStatRecord],
    pairs: &[MetricPair],
) -> Result<Vec<CorrelationRow>, StatsError> {
    let mut rows = Vec::new();
    for (agent, aggs) in aggregates {
        for pair in pairs {
            let human_values: BTreeMap<String, f64> = human
                .iter()
                .filter_map(|h| pair.human.value(h).map(|v| (join_key(&h.challenge_id), v)))
                .collect();
            let agent_values: BTreeMap<String, f64> = aggs
                .iter()
                .filter_map(|a| pair.agent.value(a).map(|v| (join_key(&a.challenge_id), v)))
                .collect();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            let mut unmatched_agent = Vec::new();
            for (id, v) in &agent_values {
                match human_values.get(id) {
                    Some(h) => {
                        xs.push(*v);
                        ys.push(*h);
                    }
                    None => unmatched_agent.push(id.clone()),
                }
            }
            let unmatched_human = human_values
                .keys()
                .filter(|id| !agent_values.contains_key(*id))
                .cloned()
                .collect();
            if xs.len() < 3 {
                return Err(StatsError::JoinTooSmall {
                    agent: agent.clone(),
                    matched: xs.len(),
                });
            }
            rows.push(CorrelationRow {
                agent: agent.clone(),
                metric: pair.label(),
                result: correlate(&xs, &ys)?,
                unmatched_agent,
                unmatched_human,
            });
        }
    }
    Ok(rows)
}
