//! Unreduced square-modulus dynamics of a chain: the birth-chain master
//! equation
//!
//! ```text
//! dP_0/dt = -r_1 P_0
//! dP_j/dt =  r_j P_{j-1} - r_{j+1} P_j      (0 < j < m)
//! dP_m/dt =  r_m P_{m-1}
//! ```
//!
//! from `P(0) = (1, 0, ..., 0)`, and the probability currents along it.

use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, ComponentDistribution};
use crate::error::{invalid, Error, Result};

/// Largest supported ratio between the fastest and slowest rate.
pub const MAX_RATE_RATIO: f64 = 1e6;

/// Two decay constants closer than this (relative) are treated as equal and
/// the chain is integrated numerically.
pub const DEGENERACY_REL_GAP: f64 = 1e-3;

/// Violations of `[0, 1]` up to this size are clamped; larger ones are errors.
pub const CLAMP_TOL: f64 = 1e-9;

const MAX_RK4_STEPS: u64 = 100_000_000;

/// Probability currents at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentVector {
    pub time: f64,
    /// `J_i = dP_i/dt` for every component.
    pub net: Vec<f64>,
    /// `f_j = r_j P_{j-1}`, the directed current from `j-1` into `j`
    /// (`flows[j-1]` holds `f_j`).
    pub flows: Vec<f64>,
}

fn check_inputs(chain: &ChainSpec, t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid(format!("time t = {t} must be finite and nonnegative")));
    }
    let ratio = chain.max_rate() / chain.min_rate();
    if ratio > MAX_RATE_RATIO {
        return Err(invalid(format!(
            "rate ratio {ratio:e} exceeds supported range {MAX_RATE_RATIO:e}"
        )));
    }
    Ok(())
}

/// Decay constants `lambda_i` of each component (terminal component: 0).
fn decay_constants(chain: &ChainSpec) -> Vec<f64> {
    (0..chain.num_components())
        .map(|i| chain.rate_out_of(i))
        .collect()
}

/// Whether two decay constants coincide within [`DEGENERACY_REL_GAP`].
pub fn has_degenerate_rates(chain: &ChainSpec) -> bool {
    let rates = chain.rates();
    rates.iter().enumerate().any(|(i, a)| {
        rates[i + 1..]
            .iter()
            .any(|b| (a - b).abs() <= DEGENERACY_REL_GAP * a.max(*b))
    })
}

fn settle(time: f64, mut probs: Vec<f64>) -> Result<ComponentDistribution> {
    for p in &mut probs {
        if !p.is_finite() {
            return Err(Error::NumericalIntegrity(format!("non-finite probability {p}")));
        }
        if *p < 0.0 {
            if *p < -CLAMP_TOL {
                return Err(Error::NumericalIntegrity(format!("probability {p} below 0")));
            }
            *p = 0.0;
        } else if *p > 1.0 {
            if *p > 1.0 + CLAMP_TOL {
                return Err(Error::NumericalIntegrity(format!("probability {p} above 1")));
            }
            *p = 1.0;
        }
    }
    ComponentDistribution::new(time, probs)
}

/// Component distribution at time `t`.
///
/// Uses the sum-of-exponentials solution when all rates are distinct and
/// falls back to [`rk4_distribution`] otherwise.
pub fn born_distribution(chain: &ChainSpec, t: f64) -> Result<ComponentDistribution> {
    if has_degenerate_rates(chain) {
        rk4_distribution(chain, t)
    } else {
        closed_form_distribution(chain, t)
    }
}

/// Sum-of-exponentials solution over distinct decay constants:
///
/// `P_j(t) = (r_1 ... r_j) * sum_{i<=j} e^{-lambda_i t} / prod_{l<=j, l!=i} (lambda_l - lambda_i)`
pub fn closed_form_distribution(chain: &ChainSpec, t: f64) -> Result<ComponentDistribution> {
    check_inputs(chain, t)?;
    if has_degenerate_rates(chain) {
        return Err(invalid(
            "closed form requires distinct rates; use the numerical path",
        ));
    }
    let lambda = decay_constants(chain);
    if t == 0.0 {
        let mut probs = vec![0.0; lambda.len()];
        probs[0] = 1.0;
        return ComponentDistribution::new(t, probs);
    }
    let decay: Vec<f64> = lambda.iter().map(|l| (-l * t).exp()).collect();
    let mut probs = Vec::with_capacity(lambda.len());
    let mut rate_product = 1.0;
    for j in 0..lambda.len() {
        if j > 0 {
            rate_product *= chain.rates()[j - 1];
        }
        let sum: f64 = (0..=j)
            .map(|i| {
                let denom: f64 = (0..=j)
                    .filter(|&l| l != i)
                    .map(|l| lambda[l] - lambda[i])
                    .product();
                decay[i] / denom
            })
            .sum();
        probs.push(rate_product * sum);
    }
    settle(t, probs)
}

fn derivative(rates: &[f64], p: &[f64], out: &mut [f64]) {
    let m = rates.len();
    out[0] = -rates[0] * p[0];
    for j in 1..m {
        out[j] = rates[j - 1] * p[j - 1] - rates[j] * p[j];
    }
    out[m] = rates[m - 1] * p[m - 1];
}

/// Fixed-step RK4 integration with `h = min(1 / (50 max rate), t / 100)`.
pub fn rk4_distribution(chain: &ChainSpec, t: f64) -> Result<ComponentDistribution> {
    check_inputs(chain, t)?;
    let n = chain.num_components();
    let mut p = vec![0.0; n];
    p[0] = 1.0;
    if t == 0.0 {
        return ComponentDistribution::new(t, p);
    }
    let h_max = (1.0 / (50.0 * chain.max_rate())).min(t / 100.0);
    let steps = (t / h_max).ceil();
    if steps > MAX_RK4_STEPS as f64 {
        return Err(invalid(format!(
            "integration to t = {t} needs {steps:e} steps; horizon too long"
        )));
    }
    let steps = steps as u64;
    let h = t / steps as f64;
    let rates = chain.rates();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..steps {
        derivative(rates, &p, &mut k1);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * h * k1[i];
        }
        derivative(rates, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = p[i] + 0.5 * h * k2[i];
        }
        derivative(rates, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = p[i] + h * k3[i];
        }
        derivative(rates, &tmp, &mut k4);
        for i in 0..n {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        p = settle(t, p)?.probs;
    }
    ComponentDistribution::new(t, p)
}

/// Directed flows `f_j = r_j P_{j-1}` and net currents `J_i = f_i - f_{i+1}`.
pub fn currents(chain: &ChainSpec, dist: &ComponentDistribution) -> Result<CurrentVector> {
    if dist.len() != chain.num_components() {
        return Err(invalid(format!(
            "distribution has {} components, chain has {}",
            dist.len(),
            chain.num_components()
        )));
    }
    let flows: Vec<f64> = chain
        .rates()
        .iter()
        .zip(&dist.probs)
        .map(|(r, p)| r * p)
        .collect();
    let flow = |j: usize| -> f64 {
        if j == 0 || j > flows.len() {
            0.0
        } else {
            flows[j - 1]
        }
    };
    let net = (0..chain.num_components())
        .map(|i| flow(i) - flow(i + 1))
        .collect();
    Ok(CurrentVector {
        time: dist.time,
        net,
        flows,
    })
}
