//! Clock-zeroing observation protocol.
//!
//! The observer starts a clock at `t = 0` and restarts it at every count,
//! so each reading is one cycle duration `t_m = t_sc(m) - t_sc(m-1)`. The
//! count at query time `t` is the `n` with
//! `t_1 + ... + t_n <= t < t_1 + ... + t_{n+1}`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chain::ChainSpec;
use crate::error::{invalid, Error, Result};
use crate::rule4::{cycle_rate, reduce, sample_hit, CycleState};
use crate::stream::{Family, Uniforms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// Cycle durations, including the one straddling `query_time`.
    pub inter_arrival: Vec<f64>,
    /// Hit times `t_sc(1) < t_sc(2) < ...` up to and including `query_time`.
    pub hit_times: Vec<f64>,
    pub query_time: f64,
    pub count_at_query: usize,
    pub seed: u64,
}

impl TrajectoryRecord {
    /// `seed,query_time,count,t_1;t_2;...`
    pub fn to_csv_row(&self) -> String {
        let mut row = format!("{},{},{},", self.seed, self.query_time, self.count_at_query);
        for (i, t) in self.inter_arrival.iter().enumerate() {
            if i > 0 {
                row.push(';');
            }
            write!(row, "{t}").unwrap();
        }
        row
    }

    pub const CSV_HEADER: &'static str = "seed,query_time,count,inter_arrival";

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trajectory serializes")
    }
}

/// Number of hits at or before `t`.
pub fn count_at(hit_times: &[f64], t: f64) -> usize {
    hit_times.partition_point(|&h| h <= t)
}

/// Runs reduction cycles against `uniforms` until the chain is terminal or
/// the next cycle would end after `query_time`.
///
/// A cycle is sampled only if it starts strictly before `query_time`. A hit
/// landing exactly on `query_time` counts.
pub fn run_trajectory<I>(
    chain: &ChainSpec,
    query_time: f64,
    uniforms: &mut I,
    seed: u64,
) -> Result<TrajectoryRecord>
where
    I: Iterator<Item = f64> + ?Sized,
{
    if !(query_time.is_finite() && query_time >= 0.0) {
        return Err(invalid(format!(
            "query time {query_time} must be finite and nonnegative"
        )));
    }
    let mut inter_arrival = Vec::new();
    let mut hit_times = Vec::new();
    let mut cycle = CycleState::initial(chain);
    let mut draws = 0;
    while let Some(ready) = cycle.ready_index {
        if cycle.global_clock >= query_time {
            break;
        }
        let rate = cycle_rate(chain, &cycle)?;
        let u = uniforms.next().ok_or(Error::StreamExhausted(draws))?;
        draws += 1;
        let hit = sample_hit(rate, u, ready)?;
        inter_arrival.push(hit.waiting_time);
        let hit_time = cycle.global_clock + hit.waiting_time;
        if hit_time > query_time {
            break;
        }
        cycle = reduce(chain, &cycle, &hit)?;
        hit_times.push(cycle.global_clock);
    }
    Ok(TrajectoryRecord {
        count_at_query: hit_times.len(),
        inter_arrival,
        hit_times,
        query_time,
        seed,
    })
}

/// [`run_trajectory`] on trial `trial`'s substream of `master_seed`.
pub fn run_seeded(
    chain: &ChainSpec,
    query_time: f64,
    master_seed: u64,
    trial: u64,
) -> Result<TrajectoryRecord> {
    let mut uniforms = Uniforms::for_trial(master_seed, Family::Reduction, trial);
    run_trajectory(chain, query_time, &mut uniforms, trial)
}
