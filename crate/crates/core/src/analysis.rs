//! Exact distribution evolution and the quantities built on it: total
//! variation distance, worst-start mixing curves, Doeblin minorization and
//! the geometric bound it implies.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::TransitionKernel;

/// Slack allowed when comparing exactly computed curves and bounds.
pub const CURVE_TOL: f64 = 1e-12;

fn check_dim(k: &TransitionKernel, len: usize) -> Result<()> {
    if len == k.state_count() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: k.state_count(),
            found: len,
        })
    }
}

/// `dst = src * P`.
fn apply(k: &TransitionKernel, src: &[f64], dst: &mut [f64]) {
    dst.fill(0.0);
    for (x, row) in k.rows().iter().enumerate() {
        let mass = src[x];
        if mass == 0.0 {
            continue;
        }
        for e in row {
            dst[e.to] += mass * e.p;
        }
    }
}

/// `d * P^steps` by repeated sparse row application.
pub fn evolve(k: &TransitionKernel, d: &[f64], steps: usize) -> Result<Vec<f64>> {
    check_dim(k, d.len())?;
    let mut cur = d.to_vec();
    let mut next = vec![0.0; d.len()];
    for _ in 0..steps {
        apply(k, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Half the L1 distance.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

fn tv_unchecked(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// All rows of `P^t`, advanced one step at a time.
///
/// Row `y` is the law after `t` steps from the point mass at `y`.
#[derive(Debug, Clone)]
pub struct RowEvolution<'a> {
    kernel: &'a TransitionKernel,
    rows: Vec<Vec<f64>>,
    scratch: Vec<Vec<f64>>,
    time: usize,
}

impl<'a> RowEvolution<'a> {
    pub fn new(kernel: &'a TransitionKernel) -> Self {
        let s = kernel.state_count();
        let rows = (0..s)
            .map(|y| {
                let mut r = vec![0.0; s];
                r[y] = 1.0;
                r
            })
            .collect();
        Self {
            kernel,
            rows,
            scratch: vec![vec![0.0; s]; s],
            time: 0,
        }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn step(&mut self) {
        let k = self.kernel;
        self.rows
            .par_iter()
            .zip(self.scratch.par_iter_mut())
            .for_each(|(src, dst)| apply(k, src, dst));
        std::mem::swap(&mut self.rows, &mut self.scratch);
        self.time += 1;
    }

    pub fn advance(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// `max_y TV(P^t(y, .), target)` with the lowest maximizing start.
    pub fn worst_tv(&self, target: &[f64]) -> (f64, usize) {
        let dists: Vec<f64> = self
            .rows
            .par_iter()
            .map(|r| tv_unchecked(r, target))
            .collect();
        let mut best = (dists[0], 0);
        for (y, &d) in dists.iter().enumerate().skip(1) {
            if d > best.0 {
                best = (d, y);
            }
        }
        best
    }
}

/// `d(t)` and the start state attaining it.
pub fn worst_case_tv(k: &TransitionKernel, target: &[f64], t: usize) -> Result<(f64, usize)> {
    check_dim(k, target.len())?;
    let mut ev = RowEvolution::new(k);
    ev.advance(t);
    Ok(ev.worst_tv(target))
}

/// `d(0), d(1), ..., d(t_max)`.
pub fn worst_case_curve(k: &TransitionKernel, target: &[f64], t_max: usize) -> Result<Vec<f64>> {
    check_dim(k, target.len())?;
    let mut ev = RowEvolution::new(k);
    let mut curve = Vec::with_capacity(t_max + 1);
    curve.push(ev.worst_tv(target).0);
    for _ in 0..t_max {
        ev.step();
        curve.push(ev.worst_tv(target).0);
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingReport {
    pub n: usize,
    pub delta: f64,
    pub t_mix: usize,
    pub worst_start: usize,
    /// `(t, d(t))` for `t = 0..=t_mix`.
    pub curve: Vec<(usize, f64)>,
}

impl MixingReport {
    /// Largest single-step increase along the curve (non-positive when
    /// the curve contracts).
    pub fn max_increase(&self) -> f64 {
        self.curve
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("t,d_t\n");
        for (t, d) in &self.curve {
            out.push_str(&format!("{t},{d:?}\n"));
        }
        out
    }
}

/// Smallest `t <= t_cap` with `d(t) < delta`.
pub fn mixing_time(
    k: &TransitionKernel,
    target: &[f64],
    delta: f64,
    t_cap: usize,
) -> Result<MixingReport> {
    check_dim(k, target.len())?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParam {
            name: "delta".into(),
            reason: format!("must lie in (0, 1], got {delta}"),
        });
    }
    let mut ev = RowEvolution::new(k);
    let mut curve = Vec::new();
    loop {
        let (d, worst) = ev.worst_tv(target);
        curve.push((ev.time(), d));
        if d < delta {
            return Ok(MixingReport {
                n: k.n(),
                delta,
                t_mix: ev.time(),
                worst_start: worst,
                curve,
            });
        }
        if ev.time() >= t_cap {
            return Err(Error::CapExceeded {
                n: k.n(),
                cap: t_cap,
            });
        }
        ev.step();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minorization {
    pub m: usize,
    /// `nu_m(s) = min_x P^m(x, s)`.
    pub nu: Vec<f64>,
    pub nu_mass: f64,
    pub rho: f64,
}

pub fn minorization(k: &TransitionKernel, m: usize) -> Result<Minorization> {
    if m == 0 {
        return Err(Error::InvalidParam {
            name: "m".into(),
            reason: "must be at least 1".into(),
        });
    }
    let mut ev = RowEvolution::new(k);
    ev.advance(m);
    Ok(minorization_from_rows(m, ev.rows()))
}

fn minorization_from_rows(m: usize, rows: &[Vec<f64>]) -> Minorization {
    let s = rows.len();
    let nu: Vec<f64> = (0..s)
        .map(|col| rows.iter().map(|r| r[col]).fold(f64::INFINITY, f64::min))
        .collect();
    let nu_mass: f64 = nu.iter().sum();
    Minorization {
        m,
        nu,
        nu_mass,
        rho: (1.0 - nu_mass).clamp(0.0, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub z: usize,
    pub distance: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeynTweedieReport {
    pub m: usize,
    pub rho: f64,
    pub z_max: usize,
    /// `min_z (rho^floor(z/m) - d(z))`.
    pub min_slack: f64,
    pub violations: Vec<BoundViolation>,
}

impl MeynTweedieReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `d(z) <= rho^floor(z/m)` for `z = 0..=z_max`.
pub fn meyn_tweedie_check(
    k: &TransitionKernel,
    target: &[f64],
    m: usize,
    z_max: usize,
) -> Result<MeynTweedieReport> {
    check_dim(k, target.len())?;
    let minor = minorization(k, m)?;
    if minor.nu_mass <= 0.0 {
        return Err(Error::VacuousMinorization { m });
    }
    let mut ev = RowEvolution::new(k);
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    for z in 0..=z_max {
        if z > 0 {
            ev.step();
        }
        let d = ev.worst_tv(target).0;
        let bound = minor.rho.powi((z / m) as i32);
        let slack = bound - d;
        min_slack = min_slack.min(slack);
        if slack < -CURVE_TOL {
            violations.push(BoundViolation {
                z,
                distance: d,
                bound,
            });
        }
    }
    Ok(MeynTweedieReport {
        m,
        rho: minor.rho,
        z_max,
        min_slack,
        violations,
    })
}

pub fn mean_recurrence_time(target: &[f64], state: usize) -> Result<f64> {
    match target.get(state) {
        None => Err(Error::StateOutOfRange {
            index: state,
            states: target.len(),
        }),
        Some(&p) if p <= 0.0 => Err(Error::ZeroMass(state)),
        Some(&p) => Ok(1.0 / p),
    }
}
