//! Truncated two-component cycles with stochastic hits and reductions.
//!
//! Within a cycle only the conscious component `c` and the single ready
//! component `c + 1` carry weight. Current leaves `c` at the adjacent rate
//! `r_{c+1}` and all of it enters the ready component, so the hit on the
//! ready component is certain and its time density is that current,
//! `f(tau) = r e^{-r tau}`. A hit reduces the state: the conscious index
//! advances by one, the cycle clock restarts and the conscious weight is
//! renormalized to 1.

use serde::{Deserialize, Serialize};

use crate::chain::ChainSpec;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleState {
    pub conscious_index: usize,
    pub ready_index: Option<usize>,
    /// Time since the last reduction.
    pub cycle_clock: f64,
    /// Completed cycle durations plus `cycle_clock`.
    pub global_clock: f64,
    /// Renormalized weight of the conscious component inside the cycle.
    pub p_conscious: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitSample {
    pub waiting_time: f64,
    /// 1-based index of the reduction this hit produces.
    pub cycle_index: usize,
}

impl CycleState {
    /// First cycle: conscious on component 0 at time 0.
    pub fn initial(chain: &ChainSpec) -> Self {
        Self::at(chain, 0, 0.0)
    }

    fn at(chain: &ChainSpec, conscious_index: usize, global_clock: f64) -> Self {
        let ready_index =
            (conscious_index < chain.num_transitions()).then_some(conscious_index + 1);
        Self {
            conscious_index,
            ready_index,
            cycle_clock: 0.0,
            global_clock,
            p_conscious: 1.0,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.ready_index.is_none()
    }

    /// Lets the cycle evolve for `dt` without a hit.
    pub fn advance_clock(&self, chain: &ChainSpec, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt >= 0.0) {
            return Err(invalid(format!("clock step {dt} must be finite and nonnegative")));
        }
        let mut next = *self;
        next.cycle_clock += dt;
        next.global_clock += dt;
        if !self.is_terminal() {
            let rate = cycle_rate(chain, self)?;
            next.p_conscious = (-rate * next.cycle_clock).exp();
        }
        Ok(next)
    }

    /// In-cycle component weights over the whole chain. Only the conscious
    /// and ready entries can be nonzero.
    pub fn snapshot(&self, chain: &ChainSpec) -> Vec<f64> {
        let mut probs = vec![0.0; chain.num_components()];
        probs[self.conscious_index] = self.p_conscious;
        if let Some(ready) = self.ready_index {
            probs[ready] = 1.0 - self.p_conscious;
        }
        probs
    }
}

/// The single adjacent rate out of the conscious component.
pub fn cycle_rate(chain: &ChainSpec, cycle: &CycleState) -> Result<f64> {
    match cycle.ready_index {
        Some(ready) => chain
            .rate_into(ready)
            .ok_or_else(|| invalid(format!("ready index {ready} outside chain"))),
        None => Err(Error::TerminalState(cycle.conscious_index)),
    }
}

/// Probability that the ready component has been hit by cycle time `tau`:
/// the integrated current `1 - e^{-rate tau}`.
pub fn hit_time_cdf(rate: f64, tau: f64) -> Result<f64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(invalid(format!("rate {rate} must be positive and finite")));
    }
    if tau.is_nan() || tau < 0.0 {
        return Err(invalid(format!("cycle time {tau} must be nonnegative")));
    }
    Ok(-(-rate * tau).exp_m1())
}

/// Inverse-transform draw of the hit time: `-ln(1 - u) / rate`.
pub fn sample_hit(rate: f64, u: f64, cycle_index: usize) -> Result<HitSample> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(invalid(format!("rate {rate} must be positive and finite")));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(invalid(format!("uniform {u} outside (0, 1)")));
    }
    let waiting_time = -(-u).ln_1p() / rate;
    if !(waiting_time.is_finite() && waiting_time > 0.0) {
        return Err(Error::NumericalIntegrity(format!(
            "waiting time {waiting_time} from u = {u}, rate = {rate}"
        )));
    }
    Ok(HitSample {
        waiting_time,
        cycle_index,
    })
}

/// Reduction on a hit: the ready component becomes conscious and a fresh,
/// renormalized cycle starts.
pub fn reduce(chain: &ChainSpec, cycle: &CycleState, hit: &HitSample) -> Result<CycleState> {
    let ready = cycle
        .ready_index
        .ok_or(Error::TerminalState(cycle.conscious_index))?;
    if hit.cycle_index != ready {
        return Err(invalid(format!(
            "hit for reduction {} applied to cycle expecting {ready}",
            hit.cycle_index
        )));
    }
    if !(hit.waiting_time.is_finite() && hit.waiting_time > 0.0) {
        return Err(invalid(format!("waiting time {} must be positive", hit.waiting_time)));
    }
    let cycle_start = cycle.global_clock - cycle.cycle_clock;
    Ok(CycleState::at(chain, ready, cycle_start + hit.waiting_time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::make_n_atom_chain;

    #[test]
    fn cycle_rates() {
        let k = 0.7;
        let chain = make_n_atom_chain(k, 2).unwrap();
        let c0 = CycleState::initial(&chain);
        assert_eq!(cycle_rate(&chain, &c0).unwrap(), 2.0 * k);
        let c1 = reduce(&chain, &c0, &sample_hit(2.0 * k, 0.3, 1).unwrap()).unwrap();
        assert_eq!(cycle_rate(&chain, &c1).unwrap(), k);

        let chain = ChainSpec::from_rates(vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        let c = CycleState {
            conscious_index: 2,
            ready_index: Some(3),
            cycle_clock: 0.0,
            global_clock: 0.0,
            p_conscious: 1.0,
        };
        assert_eq!(cycle_rate(&chain, &c).unwrap(), 2.0);
    }

    #[test]
    fn terminal_cycle_errors() {
        let chain = ChainSpec::from_rates(vec![1.0]).unwrap();
        let c0 = CycleState::initial(&chain);
        let c1 = reduce(&chain, &c0, &sample_hit(1.0, 0.5, 1).unwrap()).unwrap();
        assert!(c1.is_terminal());
        assert!(matches!(cycle_rate(&chain, &c1), Err(Error::TerminalState(1))));
        let hit = sample_hit(1.0, 0.5, 2).unwrap();
        assert!(matches!(reduce(&chain, &c1, &hit), Err(Error::TerminalState(1))));
    }

    #[test]
    fn cdf_values() {
        assert_eq!(hit_time_cdf(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(hit_time_cdf(2.0, f64::INFINITY).unwrap(), 1.0);
        assert!((hit_time_cdf(1.0, std::f64::consts::LN_2).unwrap() - 0.5).abs() < 1e-15);
        assert!(hit_time_cdf(0.0, 1.0).is_err());
        assert!(hit_time_cdf(1.0, -1.0).is_err());
    }

    #[test]
    fn sampler_inverts_cdf() {
        let u = 1.0 - (-1.0f64).exp();
        assert!((sample_hit(1.0, u, 1).unwrap().waiting_time - 1.0).abs() < 1e-14);
        let h = sample_hit(2.0, 0.5, 1).unwrap();
        assert!((h.waiting_time - 0.34657359027997264).abs() < 1e-15);
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(sample_hit(1.0, u, 1).is_err());
        }
    }

    #[test]
    fn reductions_accumulate() {
        let chain = make_n_atom_chain(1.0, 2).unwrap();
        let c0 = CycleState::initial(&chain);
        let h1 = sample_hit(2.0, 0.4, 1).unwrap();
        let c1 = reduce(&chain, &c0, &h1).unwrap();
        assert_eq!(c1.conscious_index, 1);
        assert_eq!(c1.ready_index, Some(2));
        assert_eq!(c1.global_clock, h1.waiting_time);
        assert_eq!(c1.cycle_clock, 0.0);
        assert_eq!(c1.p_conscious, 1.0);
        let h2 = sample_hit(1.0, 0.9, 2).unwrap();
        let c2 = reduce(&chain, &c1, &h2).unwrap();
        assert!(c2.is_terminal());
        assert_eq!(c2.global_clock, h1.waiting_time + h2.waiting_time);
    }

    #[test]
    fn mid_cycle_reduction_uses_cycle_origin() {
        let chain = make_n_atom_chain(1.0, 2).unwrap();
        let c0 = CycleState::initial(&chain).advance_clock(&chain, 0.25).unwrap();
        assert!((c0.p_conscious - (-0.5f64).exp()).abs() < 1e-15);
        let c1 = reduce(&chain, &c0, &HitSample { waiting_time: 0.3, cycle_index: 1 }).unwrap();
        assert_eq!(c1.global_clock, 0.3);
    }

    #[test]
    fn mismatched_hit_rejected() {
        let chain = make_n_atom_chain(1.0, 3).unwrap();
        let c0 = CycleState::initial(&chain);
        let hit = HitSample { waiting_time: 0.1, cycle_index: 2 };
        assert!(reduce(&chain, &c0, &hit).is_err());
    }

    #[test]
    fn snapshot_is_two_component() {
        let chain = make_n_atom_chain(1.0, 4).unwrap();
        let c = CycleState::initial(&chain).advance_clock(&chain, 0.1).unwrap();
        let s = c.snapshot(&chain);
        assert!(s[2..].iter().all(|p| *p == 0.0));
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
