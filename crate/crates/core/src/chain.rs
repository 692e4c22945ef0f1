//! Decay-chain specifications and the closed-form count distributions of
//! independent-atom sources.
//!
//! A chain has components `0..=m`; component `j` is the branch carrying
//! exactly `j` detector counts. Only adjacent transitions `j-1 -> j` exist,
//! each with a constant positive rate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the normalization of a [`ComponentDistribution`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// An adjacent-coupled chain `S_0 -> S_1 -> ... -> S_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChainSpec")]
pub struct ChainSpec {
    rates: Vec<f64>,
    labels: Vec<String>,
}

#[derive(Deserialize)]
struct RawChainSpec {
    rates: Vec<f64>,
    #[serde(default)]
    labels: Vec<String>,
}

impl TryFrom<RawChainSpec> for ChainSpec {
    type Error = Error;

    fn try_from(raw: RawChainSpec) -> Result<Self> {
        let spec = ChainSpec::from_rates(raw.rates)?;
        if raw.labels.is_empty() {
            Ok(spec)
        } else {
            spec.with_labels(raw.labels)
        }
    }
}

impl ChainSpec {
    /// Builds a chain from its `m` transition rates; `rates[j-1]` drives
    /// `j-1 -> j`.
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(invalid("a chain needs at least two components (one rate)"));
        }
        if let Some((i, r)) = rates
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(invalid(format!(
                "rate {} is {r}; rates must be strictly positive and finite",
                i + 1
            )));
        }
        Ok(Self {
            rates,
            labels: Vec::new(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.num_components() {
            return Err(invalid(format!(
                "{} labels given for {} components",
                labels.len(),
                self.num_components()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn num_components(&self) -> usize {
        self.rates.len() + 1
    }

    /// Number of transitions `m`; also the index of the terminal component.
    pub fn num_transitions(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Rate of the transition into component `j` (`1 <= j <= m`).
    pub fn rate_into(&self, j: usize) -> Option<f64> {
        j.checked_sub(1).and_then(|i| self.rates.get(i).copied())
    }

    /// Total rate leaving component `i`; zero for the terminal component.
    pub fn rate_out_of(&self, i: usize) -> f64 {
        self.rates.get(i).copied().unwrap_or(0.0)
    }

    pub fn labels(&self) -> Option<&[String]> {
        (!self.labels.is_empty()).then_some(self.labels.as_slice())
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chain spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid(format!("chain spec JSON: {e}")))
    }
}

/// Square moduli `P_0..P_m` of the chain components at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDistribution {
    pub time: f64,
    pub probs: Vec<f64>,
}

impl ComponentDistribution {
    /// Validates bounds and normalization.
    pub fn new(time: f64, probs: Vec<f64>) -> Result<Self> {
        if !(time.is_finite() && time >= 0.0) {
            return Err(invalid(format!("time {time} must be finite and nonnegative")));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::NumericalIntegrity(format!(
                "component probability {p} outside [0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NumericalIntegrity(format!(
                "component probabilities sum to {total}"
            )));
        }
        Ok(Self { time, probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("decay constant k = {k} must be positive and finite")))
    }
}

fn check_t(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("time t = {t} must be finite and nonnegative")))
    }
}

/// Chain of an `n`-atom source with per-atom decay constant `k`: component
/// `j` holds `j` captured particles and the transition into it runs at
/// `(n - j + 1) k`, the number of still-undecayed atoms times `k`.
pub fn make_n_atom_chain(k: f64, n: usize) -> Result<ChainSpec> {
    check_k(k)?;
    if n == 0 {
        return Err(invalid("atom count must be at least 1"));
    }
    let rates = (1..=n).map(|j| (n - j + 1) as f64 * k).collect();
    let labels = (0..=n).map(|j| format!("S{j}D{j}")).collect();
    ChainSpec::from_rates(rates)?.with_labels(labels)
}

/// Two-atom source: `[AA, AA0 + A0A, A0A0]` with `A = e^{-kt}`,
/// `A0 = 1 - e^{-kt}`.
pub fn two_atom_analytic(k: f64, t: f64) -> Result<ComponentDistribution> {
    check_k(k)?;
    check_t(t)?;
    let a = (-k * t).exp();
    // 1 - e^{-kt} without cancellation at small kt
    let a0 = -(-k * t).exp_m1();
    ComponentDistribution::new(t, vec![a * a, 2.0 * a * a0, a0 * a0])
}

/// Binomial count law of `n` independent atoms:
/// `P_j = C(n, j) A^{n-j} A0^j`.
pub fn n_atom_analytic(k: f64, n: usize, t: f64) -> Result<ComponentDistribution> {
    check_k(k)?;
    check_t(t)?;
    if n == 0 {
        return Err(invalid("atom count must be at least 1"));
    }
    let a = (-k * t).exp();
    let a0 = -(-k * t).exp_m1();
    let mut binom = 1.0_f64;
    let mut probs = Vec::with_capacity(n + 1);
    for j in 0..=n {
        if j > 0 {
            binom = binom * (n - j + 1) as f64 / j as f64;
        }
        probs.push(binom * a.powi((n - j) as i32) * a0.powi(j as i32));
    }
    ComponentDistribution::new(t, probs)
}
