//! Seeded simulation of either chain.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`.
//! A plain run uses stream 0; excursion `i` uses stream `i + 1`, so
//! excursions can be simulated in any order or in parallel and still give
//! the same result.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::tv_distance;
use crate::error::{Error, Result};
use crate::kernel::{Edge, MoveKind, TransitionKernel};

/// Per-excursion step cap; longer excursions are counted as truncated.
pub const EXCURSION_CAP: usize = 1_000_000;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_edge<'a, R: Rng>(row: &'a [Edge], rng: &mut R) -> &'a Edge {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for e in row {
        acc += e.p;
        if u < acc {
            return e;
        }
    }
    // rounding left u above the accumulated row sum
    row.last().expect("kernel rows are never empty")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRun {
    pub seed: u64,
    pub steps: usize,
    pub start: usize,
    /// Visit counts including the start state, summing to `steps + 1`.
    pub occupancy: Vec<u64>,
    pub move_counts: BTreeMap<MoveKind, u64>,
    pub final_state: usize,
}

impl ChainRun {
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.occupancy.iter().sum::<u64>() as f64;
        self.occupancy.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn occupancy_csv(&self) -> String {
        let total = (self.steps + 1) as f64;
        let mut out = String::from("state,count,frequency\n");
        for (s, &c) in self.occupancy.iter().enumerate() {
            out.push_str(&format!("{s},{c},{:?}\n", c as f64 / total));
        }
        out
    }
}

pub fn run(k: &TransitionKernel, start: usize, steps: usize, seed: u64) -> Result<ChainRun> {
    if start >= k.state_count() {
        return Err(Error::StateOutOfRange {
            index: start,
            states: k.state_count(),
        });
    }
    let mut rng = stream_rng(seed, 0);
    let mut occupancy = vec![0u64; k.state_count()];
    let mut move_counts = BTreeMap::new();
    let mut state = start;
    occupancy[state] += 1;
    for _ in 0..steps {
        let e = sample_edge(k.row(state), &mut rng);
        *move_counts.entry(e.kind).or_insert(0) += 1;
        state = e.to;
        occupancy[state] += 1;
    }
    Ok(ChainRun {
        seed,
        steps,
        start,
        occupancy,
        move_counts,
        final_state: state,
    })
}

/// Visits to `state` and the move kinds taken out of it, over a run.
pub fn move_frequencies_at(
    k: &TransitionKernel,
    start: usize,
    state: usize,
    visits: u64,
    seed: u64,
) -> BTreeMap<MoveKind, u64> {
    let mut rng = stream_rng(seed, 0);
    let mut counts = BTreeMap::new();
    let mut seen = 0;
    let mut cur = start;
    while seen < visits {
        let e = sample_edge(k.row(cur), &mut rng);
        if cur == state {
            *counts.entry(e.kind).or_insert(0) += 1;
            seen += 1;
        }
        cur = e.to;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionStats {
    pub requested: usize,
    /// Completed returns.
    pub count: usize,
    pub truncated: usize,
    pub lengths: Vec<usize>,
    /// Flip plus stationary moves per completed return.
    pub flips_per_excursion: Vec<usize>,
}

impl ExcursionStats {
    pub fn mean_length(&self) -> f64 {
        self.lengths.iter().sum::<usize>() as f64 / self.count as f64
    }

    /// Empirical law of the flip count over completed returns.
    pub fn flip_law(&self) -> Vec<f64> {
        let max = self.flips_per_excursion.iter().copied().max().unwrap_or(0);
        let mut law = vec![0.0; max + 1];
        for &f in &self.flips_per_excursion {
            law[f] += 1.0;
        }
        law.iter_mut().for_each(|p| *p /= self.count as f64);
        law
    }
}

pub fn excursions(
    k: &TransitionKernel,
    basepoint: usize,
    count: usize,
    seed: u64,
) -> Result<ExcursionStats> {
    excursions_with_cap(k, basepoint, count, seed, EXCURSION_CAP)
}

pub fn excursions_with_cap(
    k: &TransitionKernel,
    basepoint: usize,
    count: usize,
    seed: u64,
    cap: usize,
) -> Result<ExcursionStats> {
    if count == 0 {
        return Err(Error::InvalidParam {
            name: "count".into(),
            reason: "need at least one excursion".into(),
        });
    }
    if basepoint >= k.state_count() {
        return Err(Error::StateOutOfRange {
            index: basepoint,
            states: k.state_count(),
        });
    }
    let results: Vec<Option<(usize, usize)>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64 + 1);
            let mut state = basepoint;
            let mut flips = 0;
            for len in 1..=cap {
                let e = sample_edge(k.row(state), &mut rng);
                if e.kind.is_flip_like() {
                    flips += 1;
                }
                state = e.to;
                if state == basepoint {
                    return Some((len, flips));
                }
            }
            None
        })
        .collect();

    let mut stats = ExcursionStats {
        requested: count,
        count: 0,
        truncated: 0,
        lengths: Vec::with_capacity(count),
        flips_per_excursion: Vec::with_capacity(count),
    };
    for r in results {
        match r {
            Some((len, flips)) => {
                stats.count += 1;
                stats.lengths.push(len);
                stats.flips_per_excursion.push(flips);
            }
            None => stats.truncated += 1,
        }
    }
    Ok(stats)
}

pub fn empirical_tv(run: &ChainRun, target: &[f64]) -> Result<f64> {
    if run.steps == 0 {
        return Err(Error::InvalidParam {
            name: "steps".into(),
            reason: "empirical distance needs at least one step".into(),
        });
    }
    tv_distance(&run.frequencies(), target)
}
