//! Exhaustive small-instance computations over trajectories: path sums,
//! the exact law of the number of flip/stationary moves in one excursion
//! from the basepoint, and the conditional shortening comparison.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::distributions::UnimodalWeights;
use crate::error::{Error, Result};
use crate::kernel::{Direction, KernelLabel, LiftedState, MoveKind, TransitionKernel};

pub const DEFAULT_BUDGET: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnumeration {
    pub origin: usize,
    pub destination: usize,
    pub length: usize,
    pub total_probability: f64,
    pub path_count: u64,
    /// Prefix nodes visited by the search.
    pub work: u64,
}

/// Sums the probabilities of every length-`len` move sequence from `origin`
/// to `destination` by depth-first search.
pub fn enumerate_paths(
    k: &TransitionKernel,
    origin: usize,
    destination: usize,
    len: usize,
    budget: u64,
) -> Result<PathEnumeration> {
    for s in [origin, destination] {
        if s >= k.state_count() {
            return Err(Error::StateOutOfRange {
                index: s,
                states: k.state_count(),
            });
        }
    }
    let required = (k.max_row_len() as f64).powi(len as i32);
    if required > budget as f64 {
        return Err(Error::BudgetExceeded { required, budget });
    }

    let mut total = 0.0;
    let mut count = 0u64;
    let mut work = 0u64;
    let mut stack = vec![(origin, 0usize, 1.0f64)];
    while let Some((state, depth, p)) = stack.pop() {
        work += 1;
        if depth == len {
            if state == destination {
                total += p;
                count += 1;
            }
            continue;
        }
        for e in k.row(state).iter().rev() {
            stack.push((e.to, depth + 1, p * e.p));
        }
    }
    Ok(PathEnumeration {
        origin,
        destination,
        length: len,
        total_probability: total,
        path_count: count,
        work,
    })
}

/// Law of `F'`, the number of flip or stationary moves in the first return
/// to the basepoint, truncated at `l_cap` steps.
///
/// `probabilities[f]` is the unconditional probability of returning within
/// the cap with exactly `f` such moves; the missing mass is `deficiency`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlipLaw {
    pub basepoint: usize,
    pub l_cap: usize,
    pub probabilities: Vec<f64>,
    /// `length_law[l]` is the probability of first returning at step `l`.
    pub length_law: Vec<f64>,
    pub return_mass: f64,
    pub deficiency: f64,
}

impl FlipLaw {
    pub fn prob(&self, flips: usize) -> f64 {
        self.probabilities.get(flips).copied().unwrap_or(0.0)
    }

    /// `P(F' = flips | return within the cap)`.
    pub fn conditional(&self, flips: usize) -> f64 {
        self.prob(flips) / self.return_mass
    }

    /// Mean return length conditioned on returning within the cap.
    pub fn mean_length(&self) -> f64 {
        self.length_law
            .iter()
            .enumerate()
            .map(|(l, p)| l as f64 * p)
            .sum::<f64>()
            / self.return_mass
    }

    pub fn conditional_law(&self) -> Vec<f64> {
        self.probabilities
            .iter()
            .map(|p| p / self.return_mass)
            .collect()
    }
}

/// Dynamic programme over `(state, flips so far)` with absorption at the
/// basepoint.
pub fn flip_law_exact(k: &TransitionKernel, basepoint: usize, l_cap: usize) -> Result<FlipLaw> {
    if basepoint >= k.state_count() {
        return Err(Error::StateOutOfRange {
            index: basepoint,
            states: k.state_count(),
        });
    }
    if l_cap < 2 {
        return Err(Error::InvalidParam {
            name: "l_cap".into(),
            reason: "must be at least 2".into(),
        });
    }
    let s = k.state_count();
    let mut law = vec![0.0; l_cap + 1];
    let mut length_law = vec![0.0; l_cap + 1];
    // mass[x][f]; the basepoint row is only occupied at t = 0
    let mut mass = vec![vec![0.0]; s];
    mass[basepoint][0] = 1.0;
    for t in 1..=l_cap {
        let mut next = vec![vec![0.0; t + 1]; s];
        for (x, row_mass) in mass.iter().enumerate() {
            for (f, &m) in row_mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                for e in k.row(x) {
                    let nf = f + usize::from(e.kind.is_flip_like());
                    let w = m * e.p;
                    if e.to == basepoint {
                        law[nf] += w;
                        length_law[t] += w;
                    } else {
                        next[e.to][nf] += w;
                    }
                }
            }
        }
        mass = next;
    }
    while law.len() > 1 && law.last() == Some(&0.0) {
        law.pop();
    }
    let return_mass: f64 = length_law.iter().sum();
    Ok(FlipLaw {
        basepoint,
        l_cap,
        probabilities: law,
        length_law,
        return_mass,
        deficiency: 1.0 - return_mass,
    })
}

/// Probability that an excursion from the basepoint returns without any
/// flip or stationary move, from the first-passage system on shift and
/// jump edges.
pub fn no_flip_return_probability(k: &TransitionKernel, basepoint: usize) -> Result<f64> {
    if k.label() != KernelLabel::Dhn {
        return Err(Error::WrongKernel { expected: "dhn" });
    }
    if k.n() < 2 {
        return Err(Error::DegenerateChain(k.n()));
    }
    let s = k.state_count();
    if basepoint >= s {
        return Err(Error::StateOutOfRange {
            index: basepoint,
            states: s,
        });
    }
    // unknowns: hitting probabilities h(x) for x != basepoint
    let others: Vec<usize> = (0..s).filter(|&x| x != basepoint).collect();
    let slot = |x: usize| if x < basepoint { x } else { x - 1 };
    let dim = others.len();
    let mut a = DMatrix::<f64>::identity(dim, dim);
    let mut b = DVector::<f64>::zeros(dim);
    for &x in &others {
        for e in k.row(x).iter().filter(|e| !e.kind.is_flip_like()) {
            if e.to == basepoint {
                b[slot(x)] += e.p;
            } else {
                a[(slot(x), slot(e.to))] -= e.p;
            }
        }
    }
    let h = a.lu().solve(&b).ok_or(Error::SingularSystem)?;
    Ok(k.row(basepoint)
        .iter()
        .filter(|e| !e.kind.is_flip_like())
        .map(|e| {
            if e.to == basepoint {
                e.p
            } else {
                e.p * h[slot(e.to)]
            }
        })
        .sum())
}

/// How the unstated move kind of the return transition at `(-1, k')` is
/// read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnReading {
    /// The `-1 -> +1` transition out of `(-1, k')` is a jump.
    Jump,
    /// It may be a jump or a flip.
    JumpOrFlip,
}

impl ReturnReading {
    pub const BOTH: [ReturnReading; 2] = [ReturnReading::Jump, ReturnReading::JumpOrFlip];

    fn admits(self, kind: MoveKind) -> bool {
        match self {
            ReturnReading::Jump => kind == MoveKind::Jump,
            ReturnReading::JumpOrFlip => matches!(kind, MoveKind::Jump | MoveKind::Flip),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Move {
    from: LiftedState,
    to: LiftedState,
    kind: MoveKind,
}

#[derive(Debug, Clone, PartialEq)]
struct CatalogPath {
    prob: f64,
    moves: Vec<Move>,
}

impl CatalogPath {
    fn flip_steps(&self) -> Vec<usize> {
        steps_where(&self.moves, |m| m.kind.is_flip_like())
    }

    fn down_steps(&self) -> Vec<usize> {
        steps_where(&self.moves, |m| {
            m.from.direction == Direction::Plus && m.to.direction == Direction::Minus
        })
    }

    /// Step numbers of `-1 -> +1` transitions leaving `(-1, kp)` whose kind
    /// the reading admits.
    fn up_steps_from(&self, kp: usize, reading: ReturnReading) -> Vec<usize> {
        steps_where(&self.moves, |m| {
            m.from.direction == Direction::Minus
                && m.to.direction == Direction::Plus
                && m.from.position == kp
                && reading.admits(m.kind)
        })
    }
}

fn steps_where(moves: &[Move], pred: impl Fn(&Move) -> bool) -> Vec<usize> {
    moves
        .iter()
        .enumerate()
        .filter(|(_, m)| pred(m))
        .map(|(i, _)| i + 1)
        .collect()
}

/// Every first return to the basepoint with at most one flip or stationary
/// move. There are finitely many for a unimodal target.
#[derive(Debug, Clone)]
pub struct ExcursionCatalog {
    n: usize,
    paths: Vec<CatalogPath>,
    work: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShorteningCheck {
    pub kf: usize,
    pub k0: usize,
    pub kp: usize,
    pub reading: ReturnReading,
    pub p_l1_given_a1: f64,
    pub p_l2_given_a2: f64,
    pub holds: bool,
}

impl ExcursionCatalog {
    pub fn build(k: &TransitionKernel, budget: u64) -> Result<Self> {
        if k.label() != KernelLabel::Dhn {
            return Err(Error::WrongKernel { expected: "dhn" });
        }
        let n = k.n();
        let base = k.basepoint();
        let mut paths = Vec::new();
        let mut work = 0u64;
        let mut stack: Vec<(usize, f64, Vec<Move>, usize)> = vec![(base, 1.0, Vec::new(), 0)];
        while let Some((state, prob, moves, flips)) = stack.pop() {
            work += 1;
            if work > budget {
                return Err(Error::BudgetExceeded {
                    required: work as f64,
                    budget,
                });
            }
            for e in k.row(state).iter().rev() {
                let nf = flips + usize::from(e.kind.is_flip_like());
                if nf > 1 {
                    continue;
                }
                let mut next = moves.clone();
                next.push(Move {
                    from: LiftedState::from_index(state, n),
                    to: LiftedState::from_index(e.to, n),
                    kind: e.kind,
                });
                if e.to == base {
                    paths.push(CatalogPath {
                        prob: prob * e.p,
                        moves: next,
                    });
                } else {
                    stack.push((e.to, prob * e.p, next, nf));
                }
            }
        }
        Ok(Self { n, paths, work })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn max_length(&self) -> usize {
        self.paths.iter().map(|p| p.moves.len()).max().unwrap_or(0)
    }

    /// `P(F' = 0)`.
    pub fn no_flip_mass(&self) -> f64 {
        self.paths
            .iter()
            .filter(|p| p.flip_steps().is_empty())
            .map(|p| p.prob)
            .sum()
    }

    /// `P(F' = 1)`.
    pub fn one_flip_mass(&self) -> f64 {
        self.paths
            .iter()
            .filter(|p| p.flip_steps().len() == 1)
            .map(|p| p.prob)
            .sum()
    }

    /// Compares `P(L1 | A1)` with `P(L2 | A2)` for the triple
    /// `(kf, k0, kp)`.
    ///
    /// * `A1`: no flip or stationary move.
    /// * `L1`: `A1`, the `+1 -> -1` transition happens on step `k0`, and the
    ///   `-1 -> +1` transition leaves `(-1, kp)`.
    /// * `A2`: exactly one flip or stationary move, on step `kf`.
    /// * `L2`: a flip `+1 -> -1` on step `kf`, no other `+1 -> -1`
    ///   transition, no other flip or stationary move, and the `-1 -> +1`
    ///   transition leaves `(-1, kp)`.
    pub fn check(
        &self,
        kf: usize,
        k0: usize,
        kp: usize,
        reading: ReturnReading,
    ) -> Result<ShorteningCheck> {
        if kf == 0 || kf >= k0 {
            return Err(Error::InvalidParam {
                name: "kf".into(),
                reason: format!("need 1 <= kf < k0, got kf = {kf}, k0 = {k0}"),
            });
        }
        if kp == 0 || kp > self.n {
            return Err(Error::InvalidParam {
                name: "kp".into(),
                reason: format!("position must lie in [1, {}]", self.n),
            });
        }
        let (mut a1, mut l1, mut a2, mut l2) = (0.0, 0.0, 0.0, 0.0);
        for p in &self.paths {
            let flips = p.flip_steps();
            let down = p.down_steps();
            let ups = p.up_steps_from(kp, reading);
            if flips.is_empty() {
                a1 += p.prob;
                if down == [k0] && !ups.is_empty() {
                    l1 += p.prob;
                }
            }
            if flips == [kf] {
                a2 += p.prob;
                let flip_down = p.moves[kf - 1].kind == MoveKind::Flip && down == [kf];
                // A2 spends the single flip on step kf, so under either reading
                // the return transition here is a jump.
                if flip_down && !ups.is_empty() {
                    l2 += p.prob;
                }
            }
        }
        if a1 <= 0.0 {
            return Err(Error::EmptyConditioningEvent { event: "A1" });
        }
        if a2 <= 0.0 {
            return Err(Error::EmptyConditioningEvent { event: "A2" });
        }
        let first = l1 / a1;
        let second = l2 / a2;
        Ok(ShorteningCheck {
            kf,
            k0,
            kp,
            reading,
            p_l1_given_a1: first,
            p_l2_given_a2: second,
            holds: first <= second + 1e-12,
        })
    }

    /// Runs every triple `1 <= kf < k0 <= max_length`, `1 <= kp <= n` under
    /// both readings.
    pub fn sweep(&self) -> ShorteningSweep {
        let mut sweep = ShorteningSweep::default();
        let max = self.max_length();
        for reading in ReturnReading::BOTH {
            for k0 in 2..=max {
                for kf in 1..k0 {
                    for kp in 1..=self.n {
                        match self.check(kf, k0, kp, reading) {
                            Ok(c) => {
                                sweep.checked += 1;
                                if c.p_l1_given_a1 > 0.0 {
                                    sweep.nontrivial += 1;
                                }
                                if !c.holds {
                                    sweep.violations.push(c);
                                }
                            }
                            Err(Error::EmptyConditioningEvent { .. }) => sweep.empty += 1,
                            Err(e) => unreachable!("triple generator produced {e}"),
                        }
                    }
                }
            }
        }
        sweep
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ShorteningSweep {
    pub checked: usize,
    /// Checks with `P(L1 | A1) > 0`.
    pub nontrivial: usize,
    /// Triples skipped because `A1` or `A2` has zero probability.
    pub empty: usize,
    pub violations: Vec<ShorteningCheck>,
}

pub fn conditional_shortening_check(
    k: &TransitionKernel,
    kf: usize,
    k0: usize,
    kp: usize,
    reading: ReturnReading,
    budget: u64,
) -> Result<ShorteningCheck> {
    ExcursionCatalog::build(k, budget)?.check(kf, k0, kp, reading)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChebyshevReturnCount {
    pub d_double_star: usize,
    /// `c~ d** m_{j*} / (4 z')`.
    pub threshold: f64,
    /// `2 z' / m_{j*}`.
    pub mean_recurrence: f64,
    /// `mu r / (c~ d**)` at `r = threshold`.
    pub pivot: f64,
}

pub fn chebyshev_return_count(w: &UnimodalWeights, tilde_c: f64) -> Result<ChebyshevReturnCount> {
    if !(tilde_c > 4.0) {
        return Err(Error::TildeCTooSmall(tilde_c));
    }
    let dss = w.shortening_radii()?.d_double_star;
    let threshold = tilde_c * dss as f64 * w.peak() / (4.0 * w.normalizer());
    let mean_recurrence = 2.0 * w.normalizer() / w.peak();
    Ok(ChebyshevReturnCount {
        d_double_star: dss,
        threshold,
        mean_recurrence,
        pivot: mean_recurrence * threshold / (tilde_c * dss as f64),
    })
}

/// The `(kf, k0, kp)` triples with both conditioning events non-empty,
/// keyed for reports.
pub fn shortening_table(
    catalog: &ExcursionCatalog,
    reading: ReturnReading,
) -> BTreeMap<(usize, usize, usize), (f64, f64)> {
    let mut out = BTreeMap::new();
    for k0 in 2..=catalog.max_length() {
        for kf in 1..k0 {
            for kp in 1..=catalog.n {
                if let Ok(c) = catalog.check(kf, k0, kp, reading) {
                    out.insert((kf, k0, kp), (c.p_l1_given_a1, c.p_l2_given_a2));
                }
            }
        }
    }
    out
}
