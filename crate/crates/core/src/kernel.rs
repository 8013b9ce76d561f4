//! Sparse transition kernels for the Metropolis walk on `1..=n` and for the
//! lifted sampler on `{+1, -1} x {1..=n}`.
//!
//! Lifted states are indexed `j - 1` for the `+1` copy and `n + j - 1` for
//! the `-1` copy. Metropolis states are indexed `j - 1`. Zero-probability
//! moves are not stored.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::ProbabilityVector;
use crate::error::{Error, Result};

pub const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Direction {
    pub fn sign(self) -> isize {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Plus => Direction::Minus,
            Direction::Minus => Direction::Plus,
        }
    }
}

/// A lifted state `(direction, position)` with 1-based position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LiftedState {
    pub direction: Direction,
    pub position: usize,
}

impl LiftedState {
    pub fn new(direction: Direction, position: usize) -> Self {
        Self {
            direction,
            position,
        }
    }

    pub fn index(self, n: usize) -> usize {
        match self.direction {
            Direction::Plus => self.position - 1,
            Direction::Minus => n + self.position - 1,
        }
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        if index < n {
            Self::new(Direction::Plus, index + 1)
        } else {
            Self::new(Direction::Minus, index - n + 1)
        }
    }

    /// Position one step along the direction, if it stays on the line.
    fn advanced(self, n: usize) -> Option<usize> {
        let next = self.position as isize + self.direction.sign();
        (1..=n as isize).contains(&next).then_some(next as usize)
    }
}

impl fmt::Display for LiftedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.direction {
            Direction::Plus => "+1",
            Direction::Minus => "-1",
        };
        write!(f, "({sign}, {})", self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Shift,
    Jump,
    Flip,
    Stationary,
    Step,
    Hold,
}

impl MoveKind {
    pub const ALL: [MoveKind; 6] = [
        MoveKind::Shift,
        MoveKind::Jump,
        MoveKind::Flip,
        MoveKind::Stationary,
        MoveKind::Step,
        MoveKind::Hold,
    ];

    /// Flip and stationary moves are the ones counted by `F'`.
    pub fn is_flip_like(self) -> bool {
        matches!(self, MoveKind::Flip | MoveKind::Stationary)
    }

    pub fn name(self) -> &'static str {
        match self {
            MoveKind::Shift => "shift",
            MoveKind::Jump => "jump",
            MoveKind::Flip => "flip",
            MoveKind::Stationary => "stationary",
            MoveKind::Step => "step",
            MoveKind::Hold => "hold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub to: usize,
    pub p: f64,
    pub kind: MoveKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelLabel {
    Metropolis,
    Dhn,
}

impl fmt::Display for KernelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelLabel::Metropolis => "metropolis",
            KernelLabel::Dhn => "dhn",
        })
    }
}

impl std::str::FromStr for KernelLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "metropolis" => Ok(KernelLabel::Metropolis),
            "dhn" => Ok(KernelLabel::Dhn),
            other => Err(Error::InvalidParam {
                name: "sampler".into(),
                reason: format!("unknown sampler {other:?}, expected metropolis or dhn"),
            }),
        }
    }
}

impl KernelLabel {
    /// Builds the kernel of this sampler; `theta` is ignored for Metropolis.
    pub fn build(self, pi: &ProbabilityVector, theta: ThetaSpec) -> Result<TransitionKernel> {
        match self {
            KernelLabel::Metropolis => Ok(metropolis_kernel(pi)),
            KernelLabel::Dhn => dhn_kernel(pi, theta.resolve(pi.n())),
        }
    }
}

/// Row-stochastic kernel stored as per-state outgoing edges.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    label: KernelLabel,
    theta: Option<f64>,
    pi: ProbabilityVector,
    rows: Vec<Vec<Edge>>,
}

impl TransitionKernel {
    pub fn label(&self) -> KernelLabel {
        self.label
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn pi(&self) -> &ProbabilityVector {
        &self.pi
    }

    /// Number of line positions `n`.
    pub fn n(&self) -> usize {
        self.pi.n()
    }

    pub fn state_count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Edge>] {
        &self.rows
    }

    pub fn row(&self, state: usize) -> &[Edge] {
        &self.rows[state]
    }

    pub fn is_lifted(&self) -> bool {
        self.label == KernelLabel::Dhn
    }

    /// Probability of the move of `kind` out of `state`, zero if absent.
    pub fn move_probability(&self, state: usize, kind: MoveKind) -> f64 {
        self.rows[state]
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.p)
            .sum()
    }

    pub fn max_row_len(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `(+1, j*)` for lifted kernels, `j* - 1` for Metropolis.
    pub fn basepoint(&self) -> usize {
        let mode = self.pi.mode();
        match self.label {
            KernelLabel::Dhn => LiftedState::new(Direction::Plus, mode).index(self.n()),
            KernelLabel::Metropolis => mode - 1,
        }
    }

    /// Stationary law of the chain: `pi` or its halved lift.
    pub fn stationary(&self) -> Vec<f64> {
        match self.label {
            KernelLabel::Dhn => lifted_stationary(&self.pi),
            KernelLabel::Metropolis => self.pi.as_slice().to_vec(),
        }
    }

    pub fn describe_state(&self, state: usize) -> String {
        match self.label {
            KernelLabel::Dhn => LiftedState::from_index(state, self.n()).to_string(),
            KernelLabel::Metropolis => (state + 1).to_string(),
        }
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|e| e.p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "n": self.n(),
            "theta": self.theta,
            "rows": self.rows,
        })
    }
}

/// Metropolis acceptance `min{1, pi(k)/pi(j)}` with `pi` zero off the line.
fn acceptance(pi: &ProbabilityVector, from: usize, to: usize) -> f64 {
    (pi.at(to) / pi.at(from)).min(1.0)
}

pub fn metropolis_kernel(pi: &ProbabilityVector) -> TransitionKernel {
    let n = pi.n();
    let rows = (1..=n)
        .map(|j| {
            let mut row = Vec::with_capacity(3);
            let mut moved = 0.0;
            for k in [j.wrapping_sub(1), j + 1] {
                if (1..=n).contains(&k) {
                    let p = 0.5 * acceptance(pi, j, k);
                    if p > 0.0 {
                        row.push(Edge {
                            to: k - 1,
                            p,
                            kind: MoveKind::Step,
                        });
                        moved += p;
                    }
                }
            }
            if moved < 1.0 {
                row.push(Edge {
                    to: j - 1,
                    p: 1.0 - moved,
                    kind: MoveKind::Hold,
                });
            }
            row
        })
        .collect();
    TransitionKernel {
        label: KernelLabel::Metropolis,
        theta: None,
        pi: pi.clone(),
        rows,
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::ThetaOutOfRange(theta))
    }
}

/// The lifted sampler built from the four closed-form move probabilities.
pub fn dhn_kernel(pi: &ProbabilityVector, theta: f64) -> Result<TransitionKernel> {
    check_theta(theta)?;
    let n = pi.n();
    let rows = (0..2 * n)
        .map(|index| {
            let state = LiftedState::from_index(index, n);
            let alpha = match state.advanced(n) {
                Some(next) => acceptance(pi, state.position, next),
                None => 0.0,
            };
            let turned = state.direction.reversed();
            let mut row = Vec::with_capacity(4);
            let mut push = |to: LiftedState, p: f64, kind| {
                if p > 0.0 {
                    row.push(Edge {
                        to: to.index(n),
                        p,
                        kind,
                    });
                }
            };
            if let Some(next) = state.advanced(n) {
                push(
                    LiftedState::new(state.direction, next),
                    (1.0 - theta) * alpha,
                    MoveKind::Shift,
                );
                push(
                    LiftedState::new(turned, next),
                    theta * alpha,
                    MoveKind::Flip,
                );
            }
            push(
                LiftedState::new(turned, state.position),
                (1.0 - theta) * (1.0 - alpha),
                MoveKind::Jump,
            );
            push(state, theta * (1.0 - alpha), MoveKind::Stationary);
            row
        })
        .collect();
    Ok(TransitionKernel {
        label: KernelLabel::Dhn,
        theta: Some(theta),
        pi: pi.clone(),
        rows,
    })
}

/// The lifted sampler obtained by literally running the proposal stage
/// (move to `(-e, j + e)` with the Metropolis ratio, else stay) and then the
/// sign-change stage (negate `e` with probability `1 - theta`).
pub fn dhn_two_stage_oracle(pi: &ProbabilityVector, theta: f64) -> Result<TransitionKernel> {
    check_theta(theta)?;
    let n = pi.n();
    let rows = (0..2 * n)
        .map(|index| {
            let start = LiftedState::from_index(index, n);
            let mut stage_one: Vec<(LiftedState, f64)> = Vec::new();
            let target = start.position as isize + start.direction.sign();
            let accept = if (1..=n as isize).contains(&target) {
                let target = target as usize;
                let a = (pi.at(target) / pi.at(start.position)).min(1.0);
                stage_one.push((LiftedState::new(start.direction.reversed(), target), a));
                a
            } else {
                0.0
            };
            stage_one.push((start, 1.0 - accept));

            let mut out: BTreeMap<usize, f64> = BTreeMap::new();
            for (mid, p) in stage_one {
                let negated = LiftedState::new(mid.direction.reversed(), mid.position);
                *out.entry(negated.index(n)).or_default() += p * (1.0 - theta);
                *out.entry(mid.index(n)).or_default() += p * theta;
            }
            out.into_iter()
                .filter(|&(_, p)| p > 0.0)
                .map(|(to, p)| Edge {
                    to,
                    p,
                    kind: classify(start, LiftedState::from_index(to, n)),
                })
                .collect()
        })
        .collect();
    Ok(TransitionKernel {
        label: KernelLabel::Dhn,
        theta: Some(theta),
        pi: pi.clone(),
        rows,
    })
}

fn classify(from: LiftedState, to: LiftedState) -> MoveKind {
    match (from.direction == to.direction, from.position == to.position) {
        (true, true) => MoveKind::Stationary,
        (true, false) => MoveKind::Shift,
        (false, true) => MoveKind::Jump,
        (false, false) => MoveKind::Flip,
    }
}

/// `pi~((e, j)) = pi(j) / 2` over the `2n` lifted states.
pub fn lifted_stationary(pi: &ProbabilityVector) -> Vec<f64> {
    let half: Vec<f64> = pi.as_slice().iter().map(|p| p / 2.0).collect();
    half.iter().chain(half.iter()).copied().collect()
}

/// Detailed balance `d(x) P(x, y) = d(y) P(y, x)` on every stored edge.
pub fn is_reversible(k: &TransitionKernel, d: &[f64]) -> Result<bool> {
    if d.len() != k.state_count() {
        return Err(Error::DimensionMismatch {
            expected: k.state_count(),
            found: d.len(),
        });
    }
    let flow = |x: usize, y: usize| -> f64 {
        d[x] * k.rows[x]
            .iter()
            .filter(|e| e.to == y)
            .map(|e| e.p)
            .sum::<f64>()
    };
    for (x, row) in k.rows.iter().enumerate() {
        for e in row {
            if (flow(x, e.to) - flow(e.to, x)).abs() > ROW_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Symbolic or numeric `theta`; `1/n` resolves once `n` is known.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThetaSpec {
    #[default]
    InverseN,
    Value(f64),
}

impl ThetaSpec {
    pub fn resolve(self, n: usize) -> f64 {
        match self {
            ThetaSpec::InverseN => 1.0 / n as f64,
            ThetaSpec::Value(v) => v,
        }
    }
}

impl std::str::FromStr for ThetaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "1/n" {
            return Ok(ThetaSpec::InverseN);
        }
        s.trim()
            .parse::<f64>()
            .map(ThetaSpec::Value)
            .map_err(|_| Error::InvalidParam {
                name: "theta".into(),
                reason: format!("expected a number or \"1/n\", got `{s}`"),
            })
    }
}

impl fmt::Display for ThetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaSpec::InverseN => f.write_str("1/n"),
            ThetaSpec::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for ThetaSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ThetaSpec::InverseN => s.serialize_str("1/n"),
            ThetaSpec::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ThetaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ThetaSpec::Value(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Family, UnimodalWeights};
    use approx::assert_relative_eq;

    fn uniform(n: usize) -> ProbabilityVector {
        UnimodalWeights::from_weights(&vec![1.0; n])
            .unwrap()
            .normalize()
    }

    fn tent() -> ProbabilityVector {
        UnimodalWeights::from_weights(&[1.0, 2.0, 3.0, 2.0, 1.0])
            .unwrap()
            .normalize()
    }

    fn lifted(d: Direction, j: usize, n: usize) -> usize {
        LiftedState::new(d, j).index(n)
    }

    #[test]
    fn index_convention_round_trips() {
        for n in 1..6 {
            for i in 0..2 * n {
                assert_eq!(LiftedState::from_index(i, n).index(n), i);
            }
        }
        assert_eq!(lifted(Direction::Minus, 1, 5), 5);
    }

    #[test]
    fn metropolis_rows() {
        let k = metropolis_kernel(&uniform(5));
        assert_eq!(k.move_probability(2, MoveKind::Step), 1.0);
        assert_eq!(k.move_probability(2, MoveKind::Hold), 0.0);
        assert_eq!(
            k.row(0),
            &[
                Edge {
                    to: 1,
                    p: 0.5,
                    kind: MoveKind::Step
                },
                Edge {
                    to: 0,
                    p: 0.5,
                    kind: MoveKind::Hold
                },
            ]
        );

        let k = metropolis_kernel(&tent());
        let row = k.row(2);
        assert_relative_eq!(row[0].p, 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(row[0].to, 1);
        assert_relative_eq!(row[1].p, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(row[2].p, 1.0 / 3.0, max_relative = 1e-14);
        assert!(k.max_row_defect() < 1e-12);
    }

    #[test]
    fn dhn_rows_uniform() {
        let n = 5;
        let k = dhn_kernel(&uniform(n), 0.2).unwrap();
        let s = lifted(Direction::Plus, 2, n);
        assert_eq!(
            k.row(s),
            &[
                Edge {
                    to: lifted(Direction::Plus, 3, n),
                    p: 0.8,
                    kind: MoveKind::Shift
                },
                Edge {
                    to: lifted(Direction::Minus, 3, n),
                    p: 0.2,
                    kind: MoveKind::Flip
                },
            ]
        );
        let s = lifted(Direction::Plus, 5, n);
        assert_eq!(k.move_probability(s, MoveKind::Shift), 0.0);
        assert_eq!(k.move_probability(s, MoveKind::Flip), 0.0);
        assert_relative_eq!(k.move_probability(s, MoveKind::Jump), 0.8);
        assert_relative_eq!(k.move_probability(s, MoveKind::Stationary), 0.2);
        assert_eq!(k.row(s)[0].to, lifted(Direction::Minus, 5, n));
    }

    #[test]
    fn dhn_rows_tent() {
        let n = 5;
        let k = dhn_kernel(&tent(), 0.2).unwrap();
        let s = lifted(Direction::Plus, 3, n);
        let expect = [
            (
                MoveKind::Shift,
                0.8 * 2.0 / 3.0,
                lifted(Direction::Plus, 4, n),
            ),
            (
                MoveKind::Flip,
                0.2 * 2.0 / 3.0,
                lifted(Direction::Minus, 4, n),
            ),
            (MoveKind::Jump, 0.8 / 3.0, lifted(Direction::Minus, 3, n)),
            (MoveKind::Stationary, 0.2 / 3.0, s),
        ];
        for (kind, p, to) in expect {
            let e = k.row(s).iter().find(|e| e.kind == kind).unwrap();
            assert_eq!(e.to, to);
            assert_relative_eq!(e.p, p, max_relative = 1e-14);
        }
        assert!(k.max_row_defect() < 1e-15);
    }

    #[test]
    fn theta_must_be_open_unit() {
        assert_eq!(
            dhn_kernel(&uniform(3), 0.0),
            Err(Error::ThetaOutOfRange(0.0))
        );
        assert!(dhn_kernel(&uniform(3), 1.0).is_err());
        assert!(dhn_two_stage_oracle(&uniform(3), -0.1).is_err());
    }

    #[test]
    fn two_stage_matches_closed_forms() {
        for family in Family::ALL {
            for n in [2usize, 3, 4, 7, 10] {
                let pi = family.weights(n, &Default::default()).unwrap().normalize();
                for theta in [0.05, 1.0 / n as f64, 0.5] {
                    let a = dhn_kernel(&pi, theta).unwrap();
                    let b = dhn_two_stage_oracle(&pi, theta).unwrap();
                    for s in 0..a.state_count() {
                        let mut ra = a.row(s).to_vec();
                        let mut rb = b.row(s).to_vec();
                        ra.sort_by_key(|e| e.to);
                        rb.sort_by_key(|e| e.to);
                        assert_eq!(ra.len(), rb.len());
                        for (x, y) in ra.iter().zip(&rb) {
                            assert_eq!((x.to, x.kind), (y.to, y.kind));
                            assert!((x.p - y.p).abs() <= 1e-15);
                        }
                    }
                }
            }
        }
        let k = dhn_two_stage_oracle(&uniform(3), 0.25).unwrap();
        let corner = lifted(Direction::Minus, 1, 3);
        assert_relative_eq!(k.move_probability(corner, MoveKind::Jump), 0.75);
        assert_relative_eq!(k.move_probability(corner, MoveKind::Stationary), 0.25);
        assert_relative_eq!(k.move_probability(1, MoveKind::Shift), 0.75);
    }

    #[test]
    fn lifted_stationary_examples() {
        assert!(lifted_stationary(&uniform(5))
            .iter()
            .all(|&p| (p - 0.1).abs() < 1e-16));
        let t = lifted_stationary(&tent());
        assert_relative_eq!(
            t[lifted(Direction::Plus, 3, 5)],
            1.0 / 6.0,
            max_relative = 1e-15
        );
        assert_eq!(lifted_stationary(&uniform(1)), vec![0.5, 0.5]);
    }

    #[test]
    fn reversibility() {
        let pi = uniform(5);
        assert!(is_reversible(&metropolis_kernel(&pi), pi.as_slice()).unwrap());
        let k = dhn_kernel(&pi, 0.2).unwrap();
        assert!(!is_reversible(&k, &lifted_stationary(&pi)).unwrap());
        // (+1,2) -> (+1,3) carries flow, the reverse edge does not exist
        assert_eq!(
            k.move_probability(lifted(Direction::Plus, 3, 5), MoveKind::Shift),
            0.8
        );
        assert!(!k.row(2).iter().any(|e| e.to == 1));
        let mut point = vec![0.0; 10];
        point[3] = 1.0;
        assert!(!is_reversible(&k, &point).unwrap());
        assert!(matches!(
            is_reversible(&k, &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn theta_spec_parsing() {
        assert_eq!("1/n".parse::<ThetaSpec>().unwrap(), ThetaSpec::InverseN);
        assert_eq!("0.25".parse::<ThetaSpec>().unwrap(), ThetaSpec::Value(0.25));
        assert!("abc".parse::<ThetaSpec>().is_err());
        assert_eq!(ThetaSpec::InverseN.resolve(8), 0.125);
        let json = serde_json::to_string(&ThetaSpec::InverseN).unwrap();
        assert_eq!(
            serde_json::from_str::<ThetaSpec>(&json).unwrap(),
            ThetaSpec::InverseN
        );
    }
}
