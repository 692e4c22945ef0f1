//! Trajectory ensembles, the direct jump-process oracle and the statistical
//! comparisons between them and the unreduced dynamics.
//!
//! Trials are grouped into fixed-size blocks that run in parallel. Each
//! trial owns a counter-based substream, histogram merging is integer
//! addition and waiting-time reservoirs are bottom-k samples under
//! seed-derived priorities, so the merged result does not depend on the
//! number of threads or the order blocks finish in.

use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainSpec, ComponentDistribution};
use crate::error::{invalid, Error, Result};
use crate::observer::{run_trajectory, TrajectoryRecord};
use crate::stats::{
    ks_critical_1pct, ks_exponential, pearson_chi_square, two_sample_chi_square, ChiSquareTest,
};
use crate::stream::{mix64, Family, Uniforms};

pub const MAX_TRIALS: u64 = 1_000_000_000;

/// Waiting times retained per cycle.
pub const RESERVOIR_CAP: usize = 10_000;

const BLOCK: u64 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub chain: ChainSpec,
    pub query_time: f64,
    pub trials: u64,
    /// Occurrences of each count `0..=m`.
    pub count_histogram: Vec<u64>,
    /// `cycle_waiting_samples[c - 1]` holds waiting times of cycle `c`.
    pub cycle_waiting_samples: Vec<Vec<f64>>,
    pub master_seed: u64,
}

impl EnsembleResult {
    pub fn frequencies(&self) -> Vec<f64> {
        self.count_histogram
            .iter()
            .map(|&c| c as f64 / self.trials as f64)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble result serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleKs {
    pub cycle: usize,
    pub rate: f64,
    pub samples: usize,
    pub statistic: f64,
    pub critical_1pct: f64,
}

impl CycleKs {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_1pct
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub expected: ComponentDistribution,
    pub observed_freq: Vec<f64>,
    pub chi_square: ChiSquareTest,
    pub max_abs_deviation: f64,
    pub per_cycle_ks: Vec<CycleKs>,
}

/// Execution knobs that never change results.
#[derive(Debug, Clone, Copy, Default)]
pub struct Execution {
    /// Worker threads; 0 means available parallelism.
    pub threads: usize,
}

/// One trial of some engine: `(chain, query_time, master_seed, trial)`.
pub trait TrialEngine: Sync {
    fn family(&self) -> Family;

    fn run(&self, chain: &ChainSpec, query_time: f64, uniforms: &mut Uniforms, trial: u64)
        -> Result<TrajectoryRecord>;
}

/// Sequential reductions through the clock-zeroing observer.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReductionEngine;

impl TrialEngine for ReductionEngine {
    fn family(&self) -> Family {
        Family::Reduction
    }

    fn run(
        &self,
        chain: &ChainSpec,
        query_time: f64,
        uniforms: &mut Uniforms,
        trial: u64,
    ) -> Result<TrajectoryRecord> {
        run_trajectory(chain, query_time, uniforms, trial)
    }
}

/// Direct jump simulation of the unreduced master equation: at each step
/// every transition leaving the current component contributes a
/// propensity, the holding time is `-ln(u1) / a0` and the transition is
/// picked with `u2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GillespieEngine;

impl TrialEngine for GillespieEngine {
    fn family(&self) -> Family {
        Family::Oracle
    }

    fn run(
        &self,
        chain: &ChainSpec,
        query_time: f64,
        uniforms: &mut Uniforms,
        trial: u64,
    ) -> Result<TrajectoryRecord> {
        // (from, to, rate) over the whole generator
        let transitions: Vec<(usize, usize, f64)> = chain
            .rates()
            .iter()
            .enumerate()
            .map(|(i, &r)| (i, i + 1, r))
            .collect();
        let mut state = 0;
        let mut time = 0.0;
        let mut holding = Vec::new();
        let mut hit_times = Vec::new();
        let mut propensities = Vec::with_capacity(transitions.len());
        while time < query_time {
            propensities.clear();
            propensities.extend(
                transitions
                    .iter()
                    .filter(|(from, _, _)| *from == state)
                    .map(|&(_, to, rate)| (to, rate)),
            );
            let total: f64 = propensities.iter().map(|(_, a)| a).sum();
            if total <= 0.0 {
                break;
            }
            let tau = -uniforms.next_open01().ln() / total;
            let pick = uniforms.next_open01() * total;
            holding.push(tau);
            if time + tau > query_time {
                break;
            }
            time += tau;
            let mut acc = 0.0;
            let mut next = propensities.last().map(|(to, _)| *to).unwrap_or(state);
            for &(to, a) in &propensities {
                acc += a;
                if pick < acc {
                    next = to;
                    break;
                }
            }
            state = next;
            hit_times.push(time);
        }
        Ok(TrajectoryRecord {
            inter_arrival: holding,
            count_at_query: state,
            hit_times,
            query_time,
            seed: trial,
        })
    }
}

type Entry = (u64, u64, u64);

#[derive(Debug, Clone)]
struct Partial {
    histogram: Vec<u64>,
    // max-heaps of (priority, trial, waiting-time bits); keep the smallest
    reservoirs: Vec<BinaryHeap<Entry>>,
}

impl Partial {
    fn empty(chain: &ChainSpec) -> Self {
        Self {
            histogram: vec![0; chain.num_components()],
            reservoirs: vec![BinaryHeap::new(); chain.num_transitions()],
        }
    }

    fn offer(&mut self, cycle: usize, entry: Entry) {
        let heap = &mut self.reservoirs[cycle];
        if heap.len() < RESERVOIR_CAP {
            heap.push(entry);
        } else if heap.peek().is_some_and(|top| entry < *top) {
            heap.pop();
            heap.push(entry);
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        for (cycle, heap) in other.reservoirs.into_iter().enumerate() {
            for entry in heap {
                self.offer(cycle, entry);
            }
        }
        self
    }
}

fn reservoir_priority(base: u64, family: Family, trial: u64, cycle: usize) -> u64 {
    let fam = match family {
        Family::Reduction => 1,
        Family::Oracle => 2,
        Family::Reservoir => 3,
    };
    mix64(base ^ mix64(fam ^ mix64(trial ^ mix64(cycle as u64))))
}

fn check_trials(trials: u64, query_time: f64) -> Result<()> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if trials > MAX_TRIALS {
        return Err(invalid(format!("trials {trials} exceed limit {MAX_TRIALS}")));
    }
    if !(query_time.is_finite() && query_time >= 0.0) {
        return Err(invalid(format!(
            "query time {query_time} must be finite and nonnegative"
        )));
    }
    Ok(())
}

/// Runs `trials` independent trials of `engine` and merges them.
pub fn run_with_engine<E: TrialEngine>(
    engine: &E,
    chain: &ChainSpec,
    query_time: f64,
    trials: u64,
    master_seed: u64,
    exec: Execution,
) -> Result<EnsembleResult> {
    check_trials(trials, query_time)?;
    let family = engine.family();
    let base = Uniforms::for_trial(master_seed, Family::Reservoir, 0).next_u64();
    let blocks = trials.div_ceil(BLOCK);
    let work = || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut part = Partial::empty(chain);
                for trial in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                    let mut uniforms = Uniforms::for_trial(master_seed, family, trial);
                    let rec = engine.run(chain, query_time, &mut uniforms, trial)?;
                    if rec.count_at_query >= part.histogram.len() {
                        return Err(Error::NumericalIntegrity(format!(
                            "trial {trial} reached component {}",
                            rec.count_at_query
                        )));
                    }
                    part.histogram[rec.count_at_query] += 1;
                    for (c, tau) in rec.inter_arrival.iter().enumerate() {
                        let key = reservoir_priority(base, family, trial, c + 1);
                        part.offer(c, (key, trial, tau.to_bits()));
                    }
                }
                Ok(part)
            })
            .try_reduce(|| Partial::empty(chain), |a, b| Ok(a.merge(b)))
    };
    let merged = if exec.threads == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(exec.threads)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(work)?
    };
    let cycle_waiting_samples = merged
        .reservoirs
        .into_iter()
        .map(|heap| {
            let mut entries = heap.into_vec();
            entries.sort_unstable();
            entries.into_iter().map(|(_, _, bits)| f64::from_bits(bits)).collect()
        })
        .collect();
    Ok(EnsembleResult {
        chain: chain.clone(),
        query_time,
        trials,
        count_histogram: merged.histogram,
        cycle_waiting_samples,
        master_seed,
    })
}

/// Ensemble of sequential-reduction trajectories.
pub fn run_ensemble(
    chain: &ChainSpec,
    query_time: f64,
    trials: u64,
    master_seed: u64,
) -> Result<EnsembleResult> {
    run_with_engine(&ReductionEngine, chain, query_time, trials, master_seed, Execution::default())
}

/// Ensemble of direct jump-process trajectories, drawn from a substream
/// family independent of [`run_ensemble`]'s.
pub fn gillespie_oracle(
    chain: &ChainSpec,
    query_time: f64,
    trials: u64,
    master_seed: u64,
) -> Result<EnsembleResult> {
    run_with_engine(&GillespieEngine, chain, query_time, trials, master_seed, Execution::default())
}

/// Count distribution at the query time against `expected`, plus the
/// per-cycle waiting-time laws against `Exp(r_c)`.
pub fn compare(result: &EnsembleResult, expected: &ComponentDistribution) -> Result<ComparisonReport> {
    if expected.len() != result.count_histogram.len() {
        return Err(invalid(format!(
            "expected distribution has {} bins, histogram has {}",
            expected.len(),
            result.count_histogram.len()
        )));
    }
    let observed_freq = result.frequencies();
    let max_abs_deviation = observed_freq
        .iter()
        .zip(&expected.probs)
        .map(|(o, e)| (o - e).abs())
        .fold(0.0, f64::max);
    let chi_square = pearson_chi_square(&result.count_histogram, &expected.probs)?;
    let per_cycle_ks = result
        .cycle_waiting_samples
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(i, samples)| {
            let cycle = i + 1;
            let rate = result.chain.rate_into(cycle).expect("cycle within chain");
            CycleKs {
                cycle,
                rate,
                samples: samples.len(),
                statistic: ks_exponential(samples, rate),
                critical_1pct: ks_critical_1pct(samples.len()),
            }
        })
        .collect();
    Ok(ComparisonReport {
        expected: expected.clone(),
        observed_freq,
        chi_square,
        max_abs_deviation,
        per_cycle_ks,
    })
}

/// Two-sample homogeneity test between two ensembles' count histograms.
pub fn compare_ensembles(a: &EnsembleResult, b: &EnsembleResult) -> Result<ChiSquareTest> {
    if a.count_histogram.len() != b.count_histogram.len() {
        return Err(invalid("ensembles cover different chains"));
    }
    Ok(two_sample_chi_square(&a.count_histogram, &b.count_histogram))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::make_n_atom_chain;

    #[test]
    fn zero_time_all_mass_at_zero() {
        let chain = ChainSpec::from_rates(vec![1.0, 2.0, 3.0]).unwrap();
        let r = run_ensemble(&chain, 0.0, 100, 1).unwrap();
        assert_eq!(r.count_histogram, vec![100, 0, 0, 0]);
        let g = gillespie_oracle(&chain, 0.0, 100, 1).unwrap();
        assert_eq!(g.count_histogram, vec![100, 0, 0, 0]);
    }

    #[test]
    fn trial_limits() {
        let chain = make_n_atom_chain(1.0, 2).unwrap();
        assert!(run_ensemble(&chain, 1.0, 0, 1).is_err());
        assert!(run_ensemble(&chain, 1.0, MAX_TRIALS + 1, 1).is_err());
        assert!(run_ensemble(&chain, -1.0, 10, 1).is_err());
    }

    #[test]
    fn reservoir_is_capped() {
        let chain = make_n_atom_chain(1.0, 2).unwrap();
        let r = run_ensemble(&chain, 5.0, 30_000, 3).unwrap();
        assert_eq!(r.count_histogram.iter().sum::<u64>(), 30_000);
        assert!(r.cycle_waiting_samples.iter().all(|s| s.len() <= RESERVOIR_CAP));
        assert_eq!(r.cycle_waiting_samples[0].len(), RESERVOIR_CAP);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let chain = make_n_atom_chain(0.8, 3).unwrap();
        let runs: Vec<EnsembleResult> = [1, 3, 8]
            .iter()
            .map(|&threads| {
                run_with_engine(&ReductionEngine, &chain, 1.2, 25_000, 9, Execution { threads })
                    .unwrap()
            })
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }

    #[test]
    fn compare_perfect_histogram() {
        let chain = ChainSpec::from_rates(vec![1.0, 1.0]).unwrap();
        let result = EnsembleResult {
            chain,
            query_time: 1.0,
            trials: 1000,
            count_histogram: vec![250, 500, 250],
            cycle_waiting_samples: vec![vec![], vec![]],
            master_seed: 0,
        };
        let expected = ComponentDistribution::new(1.0, vec![0.25, 0.5, 0.25]).unwrap();
        let report = compare(&result, &expected).unwrap();
        assert_eq!(report.chi_square.statistic, 0.0);
        assert_eq!(report.max_abs_deviation, 0.0);
        assert!(report.per_cycle_ks.is_empty());
        assert!((report.observed_freq.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compare_dimension_mismatch() {
        let chain = make_n_atom_chain(1.0, 2).unwrap();
        let r = run_ensemble(&chain, 1.0, 100, 0).unwrap();
        let wrong = ComponentDistribution::new(1.0, vec![0.5, 0.5]).unwrap();
        assert!(compare(&r, &wrong).is_err());
    }
}
