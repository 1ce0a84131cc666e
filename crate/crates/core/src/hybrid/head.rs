//! Output heads: softmax over logits, Beta shapes via `1 + softplus`, or a
//! scalar value; plus sampling, log-probabilities, entropies and their
//! gradients with respect to the raw network outputs.

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::{HybridError, Result};

/// Kind and width of a network's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "size", rename_all = "kebab-case")]
pub enum OutputSpec {
    /// Categorical policy over `k` actions.
    Discrete(usize),
    /// Independent Beta policy per action dimension.
    ContinuousBeta(usize),
    /// State value.
    Value,
}

impl OutputSpec {
    /// Width of the raw output vector feeding the head.
    pub fn raw_width(&self) -> usize {
        match *self {
            OutputSpec::Discrete(k) => k,
            OutputSpec::ContinuousBeta(d) => 2 * d,
            OutputSpec::Value => 1,
        }
    }
}

/// Per-dimension affine map from `[0, 1]` onto `[low, high]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        let b = Self { low, high };
        b.validate()?;
        Ok(b)
    }

    pub fn unit(dims: usize) -> Self {
        Self {
            low: vec![0.0; dims],
            high: vec![1.0; dims],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.low.len() != self.high.len() {
            return Err(HybridError::DegenerateBounds);
        }
        if self
            .low
            .iter()
            .zip(&self.high)
            .any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h))
        {
            return Err(HybridError::DegenerateBounds);
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.low.len()
    }

    fn width(&self, d: usize) -> f64 {
        self.high[d] - self.low[d]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn as_vec(&self) -> Vec<f64> {
        match self {
            Action::Discrete(a) => vec![*a as f64],
            Action::Continuous(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyOutput {
    Discrete { probs: Vec<f64> },
    Beta { alpha: Vec<f64>, beta: Vec<f64> },
    Value(f64),
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// `ψ₁(x)`, the trigamma function, for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // asymptotic series with Bernoulli-number coefficients
    acc + inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))))
}

pub fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log-density of `Beta(a, b)` at `x ∈ (0, 1)`.
pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta_fn(a, b)
}

/// Differential entropy of `Beta(a, b)` on `[0, 1]`.
pub fn beta_entropy(a: f64, b: f64) -> f64 {
    ln_beta_fn(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) + (a + b - 2.0) * digamma(a + b)
}

/// Samples are kept strictly inside `(0, 1)` so log-densities stay finite.
const UNIT_EPS: f64 = 1e-12;

fn clamp_unit(x: f64) -> f64 {
    x.clamp(UNIT_EPS, 1.0 - UNIT_EPS)
}

/// Maps raw outputs to the head's distribution (or value).
pub fn apply_head(spec: OutputSpec, raw: &[f64]) -> Result<PolicyOutput> {
    if raw.len() != spec.raw_width() {
        return Err(HybridError::DimensionMismatch {
            what: "raw output",
            expected: spec.raw_width(),
            got: raw.len(),
        });
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(HybridError::NonFinite("network output"));
    }
    Ok(match spec {
        OutputSpec::Discrete(_) => PolicyOutput::Discrete { probs: softmax(raw) },
        OutputSpec::ContinuousBeta(d) => PolicyOutput::Beta {
            alpha: (0..d).map(|i| 1.0 + softplus(raw[2 * i])).collect(),
            beta: (0..d).map(|i| 1.0 + softplus(raw[2 * i + 1])).collect(),
        },
        OutputSpec::Value => PolicyOutput::Value(raw[0]),
    })
}

fn bounds_for<'a>(output: &PolicyOutput, bounds: Option<&'a ActionBounds>) -> Result<Option<&'a ActionBounds>> {
    if let PolicyOutput::Beta { alpha, .. } = output {
        let b = bounds.ok_or(HybridError::DegenerateBounds)?;
        b.validate()?;
        if b.dims() != alpha.len() {
            return Err(HybridError::DimensionMismatch {
                what: "action bounds",
                expected: alpha.len(),
                got: b.dims(),
            });
        }
        return Ok(Some(b));
    }
    Ok(None)
}

/// Draws an action and returns it with its log-probability (log-density
/// with respect to Lebesgue measure on the scaled box for continuous heads).
pub fn sample_and_logprob<R: Rng + ?Sized>(
    output: &PolicyOutput,
    bounds: Option<&ActionBounds>,
    rng: &mut R,
) -> Result<(Action, f64)> {
    let bounds = bounds_for(output, bounds)?;
    match output {
        PolicyOutput::Discrete { probs } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut choice = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    choice = i;
                    break;
                }
            }
            // never pick a zero-probability tail action through round-off
            while probs[choice] == 0.0 && choice > 0 {
                choice -= 1;
            }
            Ok((Action::Discrete(choice), probs[choice].ln()))
        }
        PolicyOutput::Beta { alpha, beta } => {
            let b = bounds.expect("checked above");
            let mut action = Vec::with_capacity(alpha.len());
            let mut logp = 0.0;
            for d in 0..alpha.len() {
                let dist = BetaDist::new(alpha[d], beta[d]).map_err(|_| HybridError::NonFinite("beta shapes"))?;
                let x = clamp_unit(dist.sample(rng));
                action.push(b.low[d] + b.width(d) * x);
                logp += beta_ln_pdf(x, alpha[d], beta[d]) - b.width(d).ln();
            }
            Ok((Action::Continuous(action), logp))
        }
        PolicyOutput::Value(_) => Err(HybridError::NotAPolicy),
    }
}

/// Most likely action: argmax for categorical heads, Beta mode for continuous heads.
pub fn greedy_action(output: &PolicyOutput, bounds: Option<&ActionBounds>) -> Result<Action> {
    let bounds = bounds_for(output, bounds)?;
    match output {
        PolicyOutput::Discrete { probs } => {
            let best = probs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if *p > acc.1 { (i, *p) } else { acc })
                .0;
            Ok(Action::Discrete(best))
        }
        PolicyOutput::Beta { alpha, beta } => {
            let b = bounds.expect("checked above");
            Ok(Action::Continuous(
                (0..alpha.len())
                    .map(|d| {
                        let mode = (alpha[d] - 1.0) / (alpha[d] + beta[d] - 2.0);
                        let mode = if mode.is_finite() { mode } else { 0.5 };
                        b.low[d] + b.width(d) * mode
                    })
                    .collect(),
            ))
        }
        PolicyOutput::Value(_) => Err(HybridError::NotAPolicy),
    }
}

pub fn log_prob(output: &PolicyOutput, action: &Action, bounds: Option<&ActionBounds>) -> Result<f64> {
    let bounds = bounds_for(output, bounds)?;
    match (output, action) {
        (PolicyOutput::Discrete { probs }, Action::Discrete(a)) => probs
            .get(*a)
            .map(|p| p.ln())
            .ok_or(HybridError::InvalidAction),
        (PolicyOutput::Beta { alpha, beta }, Action::Continuous(v)) if v.len() == alpha.len() => {
            let b = bounds.expect("checked above");
            Ok((0..v.len())
                .map(|d| {
                    let x = clamp_unit((v[d] - b.low[d]) / b.width(d));
                    beta_ln_pdf(x, alpha[d], beta[d]) - b.width(d).ln()
                })
                .sum())
        }
        _ => Err(HybridError::InvalidAction),
    }
}

/// Entropy of the policy; continuous heads include the `ln(high − low)` term of the scaling.
pub fn entropy(output: &PolicyOutput, bounds: Option<&ActionBounds>) -> Result<f64> {
    let bounds = bounds_for(output, bounds)?;
    match output {
        PolicyOutput::Discrete { probs } => Ok(-probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()),
        PolicyOutput::Beta { alpha, beta } => {
            let b = bounds.expect("checked above");
            Ok((0..alpha.len())
                .map(|d| beta_entropy(alpha[d], beta[d]) + b.width(d).ln())
                .sum())
        }
        PolicyOutput::Value(_) => Err(HybridError::NotAPolicy),
    }
}

/// Log-probability of `action`, policy entropy, and the gradients of both
/// with respect to the raw head inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTerms {
    pub log_prob: f64,
    pub entropy: f64,
    pub d_log_prob: Vec<f64>,
    pub d_entropy: Vec<f64>,
}

pub fn policy_terms(spec: OutputSpec, raw: &[f64], action: &Action, bounds: Option<&ActionBounds>) -> Result<PolicyTerms> {
    let output = apply_head(spec, raw)?;
    let log_prob = log_prob(&output, action, bounds)?;
    let entropy = entropy(&output, bounds)?;
    let (d_log_prob, d_entropy) = match (&output, action) {
        (PolicyOutput::Discrete { probs }, Action::Discrete(a)) => {
            let logp = log_softmax(raw);
            let d_lp = probs
                .iter()
                .enumerate()
                .map(|(j, p)| f64::from(u8::from(j == *a)) - p)
                .collect();
            let d_h = probs
                .iter()
                .zip(&logp)
                .map(|(p, lp)| -p * (lp + entropy))
                .collect();
            (d_lp, d_h)
        }
        (PolicyOutput::Beta { alpha, beta }, Action::Continuous(v)) => {
            let b = bounds.expect("validated by log_prob");
            let mut d_lp = vec![0.0; raw.len()];
            let mut d_h = vec![0.0; raw.len()];
            for d in 0..alpha.len() {
                let (a, bb) = (alpha[d], beta[d]);
                let x = clamp_unit((v[d] - b.low[d]) / b.width(d));
                let psi_ab = digamma(a + bb);
                let tri_ab = trigamma(a + bb);
                let sa = sigmoid(raw[2 * d]);
                let sb = sigmoid(raw[2 * d + 1]);
                d_lp[2 * d] = (x.ln() - digamma(a) + psi_ab) * sa;
                d_lp[2 * d + 1] = ((-x).ln_1p() - digamma(bb) + psi_ab) * sb;
                d_h[2 * d] = (-(a - 1.0) * trigamma(a) + (a + bb - 2.0) * tri_ab) * sa;
                d_h[2 * d + 1] = (-(bb - 1.0) * trigamma(bb) + (a + bb - 2.0) * tri_ab) * sb;
            }
            (d_lp, d_h)
        }
        _ => return Err(HybridError::InvalidAction),
    };
    Ok(PolicyTerms {
        log_prob,
        entropy,
        d_log_prob,
        d_entropy,
    })
}
