//! `verify-all`: every invariant suite at one `(distribution, n)`, as a
//! deterministic JSON report.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::analysis::{
    evolve, mean_recurrence_time, meyn_tweedie_check, mixing_time, worst_case_tv, CURVE_TOL,
};
use crate::bounds::{
    binom_growth_check, component_bounds, f_double_prime_law, middle_component_minimum,
    occurrence_lower_bound, rho_bound, rho_limit, tv_upper_bound, tv_upper_bound_limit,
};
use crate::config::RunConfig;
use crate::distributions::UnimodalWeights;
use crate::error::{Error, Result};
use crate::experiments::default_cap;
use crate::kernel::{
    dhn_kernel, dhn_two_stage_oracle, is_reversible, lifted_stationary, metropolis_kernel,
    KernelLabel, MoveKind, ThetaSpec, TransitionKernel,
};
use crate::paths::{
    chebyshev_return_count, enumerate_paths, flip_law_exact, no_flip_return_probability,
    ExcursionCatalog,
};
use crate::sampler::excursions;

/// Largest `n` for which the shortening sweep is attempted.
pub const SHORTENING_MAX_N: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    fn compare(
        name: &'static str,
        passed: bool,
        value: f64,
        threshold: f64,
        detail: String,
    ) -> Self {
        Self {
            name,
            status: if passed { Status::Pass } else { Status::Fail },
            value: Some(value),
            threshold: Some(threshold),
            detail,
        }
    }

    fn skipped(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            status: Status::Skipped,
            value: None,
            threshold: None,
            detail: detail.into(),
        }
    }

    fn error(name: &'static str, e: Error) -> Self {
        Self {
            name,
            status: Status::Fail,
            value: None,
            threshold: None,
            detail: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub distribution: String,
    pub n: usize,
    pub theta: f64,
    pub passed: bool,
    pub counts: BTreeMap<&'static str, usize>,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    w: UnimodalWeights,
    n: usize,
    theta: f64,
    dhn: TransitionKernel,
    met: TransitionKernel,
    lifted: Vec<f64>,
}

fn l1_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn rel_ge(value: f64, bound: f64) -> bool {
    value >= bound * (1.0 - 1e-12)
}

/// Groups of related checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Kernel,
    Mixing,
    Radii,
    FlipLaw,
    Recurrence,
    Enumeration,
    Shortening,
    Occurrence,
    Rates,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Kernel,
        Suite::Mixing,
        Suite::Radii,
        Suite::FlipLaw,
        Suite::Recurrence,
        Suite::Enumeration,
        Suite::Shortening,
        Suite::Occurrence,
        Suite::Rates,
    ];
    pub const PATHS: [Suite; 5] = [
        Suite::Radii,
        Suite::FlipLaw,
        Suite::Recurrence,
        Suite::Enumeration,
        Suite::Shortening,
    ];
    pub const BOUNDS: [Suite; 2] = [Suite::Occurrence, Suite::Rates];

    fn run(self, c: &Ctx) -> Vec<Check> {
        match self {
            Suite::Kernel => kernel_checks(c),
            Suite::Mixing => mixing_checks(c),
            Suite::Radii => radii_checks(c),
            Suite::FlipLaw => flip_law_checks(c),
            Suite::Recurrence => recurrence_checks(c),
            Suite::Enumeration => enumeration_checks(c),
            Suite::Shortening => shortening_checks(c),
            Suite::Occurrence => occurrence_checks(c),
            Suite::Rates => rate_checks(c),
        }
    }
}

pub fn verify_all(cfg: &RunConfig) -> Result<VerifyReport> {
    verify_suites(cfg, &Suite::ALL)
}

pub fn verify_suites(cfg: &RunConfig, suites: &[Suite]) -> Result<VerifyReport> {
    let w = cfg.distribution.build()?;
    let n = w.n();
    let pi = w.normalize();
    let theta = cfg.theta.resolve(n);
    let dhn = dhn_kernel(&pi, theta)?;
    let met = metropolis_kernel(&pi);
    let lifted = lifted_stationary(&pi);
    let ctx = Ctx {
        cfg,
        w,
        n,
        theta,
        dhn,
        met,
        lifted,
    };

    let checks: Vec<Check> = suites.iter().flat_map(|s| s.run(&ctx)).collect();
    let mut counts = BTreeMap::from([("pass", 0), ("fail", 0), ("skipped", 0)]);
    for c in &checks {
        let key = match c.status {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        };
        *counts.get_mut(key).unwrap() += 1;
    }
    Ok(VerifyReport {
        distribution: cfg.distribution.label(),
        n,
        theta,
        passed: counts["fail"] == 0,
        counts,
        checks,
    })
}

fn guard(name: &'static str, r: Result<Check>) -> Check {
    r.unwrap_or_else(|e| Check::error(name, e))
}

fn kernel_checks(c: &Ctx) -> Vec<Check> {
    let tol = &c.cfg.tolerances;
    let mut out = Vec::new();
    out.push(guard(
        "lifted-stationarity",
        (|| {
            let gap = l1_gap(&evolve(&c.dhn, &c.lifted, 1)?, &c.lifted);
            Ok(Check::compare(
                "lifted-stationarity",
                gap < tol.stationarity,
                gap,
                tol.stationarity,
                "l1 distance between the half-weight lifted law and one step of it".into(),
            ))
        })(),
    ));
    out.push(guard(
        "metropolis-stationarity",
        (|| {
            let pi = c.met.stationary();
            let gap = l1_gap(&evolve(&c.met, &pi, 1)?, &pi);
            let reversible = is_reversible(&c.met, &pi)?;
            Ok(Check::compare(
                "metropolis-stationarity",
                gap < tol.stationarity && reversible,
                gap,
                tol.stationarity,
                format!("detailed balance holds: {reversible}"),
            ))
        })(),
    ));
    let defect = c.dhn.max_row_defect().max(c.met.max_row_defect());
    out.push(Check::compare(
        "move-completeness",
        defect <= tol.row_sum,
        defect,
        tol.row_sum,
        "largest |row sum - 1| over both kernels".into(),
    ));
    out.push(guard(
        "two-stage-oracle",
        (|| {
            let oracle = dhn_two_stage_oracle(c.dhn.pi(), c.theta)?;
            let gap = max_edge_gap(&c.dhn, &oracle);
            Ok(Check::compare(
                "two-stage-oracle",
                gap <= tol.oracle,
                gap,
                tol.oracle,
                "largest edge difference from the literal two-stage composition".into(),
            ))
        })(),
    ));
    let theta_mass = (0..c.dhn.state_count())
        .map(|s| {
            let p = c.dhn.move_probability(s, MoveKind::Flip)
                + c.dhn.move_probability(s, MoveKind::Stationary);
            (p - c.theta).abs()
        })
        .fold(0.0, f64::max);
    out.push(Check::compare(
        "flip-or-stationary-mass",
        theta_mass <= tol.row_sum,
        theta_mass,
        tol.row_sum,
        "flip plus stationary probability equals theta at every state".into(),
    ));
    out
}

fn max_edge_gap(a: &TransitionKernel, b: &TransitionKernel) -> f64 {
    let table = |k: &TransitionKernel| {
        let mut m = BTreeMap::new();
        for (s, row) in k.rows().iter().enumerate() {
            for e in row {
                *m.entry((s, e.to, e.kind)).or_insert(0.0) += e.p;
            }
        }
        m
    };
    let (ta, tb) = (table(a), table(b));
    ta.keys()
        .chain(tb.keys())
        .map(|key| (ta.get(key).unwrap_or(&0.0) - tb.get(key).unwrap_or(&0.0)).abs())
        .fold(0.0, f64::max)
}

fn mixing_checks(c: &Ctx) -> Vec<Check> {
    let cfg = c.cfg;
    let run = |k: &TransitionKernel, label: KernelLabel| {
        let cap = cfg.t_cap.unwrap_or_else(|| default_cap(label, c.n));
        mixing_time(k, &k.stationary(), cfg.delta, cap)
    };
    let mut out = Vec::new();
    let reports = (
        run(&c.met, KernelLabel::Metropolis),
        run(&c.dhn, KernelLabel::Dhn),
    );
    match &reports {
        (Ok(m), Ok(d)) => {
            let rise = m.max_increase().max(d.max_increase());
            out.push(Check::compare(
                "tv-curve-monotone",
                rise <= cfg.tolerances.curve,
                rise,
                cfg.tolerances.curve,
                "largest one-step increase of d(t) over both samplers".into(),
            ));
            out.push(Check {
                name: "mixing-times",
                status: Status::Pass,
                value: Some(d.t_mix as f64),
                threshold: Some(m.t_mix as f64),
                detail: format!(
                    "delta = {}: lifted {} steps, metropolis {} steps",
                    cfg.delta, d.t_mix, m.t_mix
                ),
            });
            out.push(if c.n >= 21 {
                Check::compare(
                    "lifted-faster",
                    d.t_mix < m.t_mix,
                    d.t_mix as f64,
                    m.t_mix as f64,
                    "lifted mixing time below the metropolis one".into(),
                )
            } else {
                Check::skipped(
                    "lifted-faster",
                    format!(
                        "only asserted for n >= 21; lifted {} vs metropolis {}",
                        d.t_mix, m.t_mix
                    ),
                )
            });
        }
        (m, d) => {
            let e = m.as_ref().err().or(d.as_ref().err()).unwrap().clone();
            out.push(Check::error("mixing-times", e));
        }
    }
    for mult in [2, 4] {
        let name = if mult == 2 {
            "minorization-2n"
        } else {
            "minorization-4n"
        };
        let m = mult * c.n;
        out.push(match meyn_tweedie_check(&c.dhn, &c.lifted, m, 50 * c.n) {
            Ok(r) if r.rho < 1.0 => Check::compare(
                name,
                r.holds(),
                r.min_slack,
                -CURVE_TOL,
                format!(
                    "rho = {:?} at m = {m}, {} violations up to z = {}",
                    r.rho,
                    r.violations.len(),
                    r.z_max
                ),
            ),
            Ok(r) => Check::skipped(name, format!("rho = 1 at m = {}", r.m)),
            Err(Error::VacuousMinorization { m }) => {
                Check::skipped(name, format!("no minorizing mass at m = {m}"))
            }
            Err(e) => Check::error(name, e),
        });
    }
    out
}

fn radii_checks(c: &Ctx) -> Vec<Check> {
    let name = "shortening-radii";
    let r = match c.w.shortening_radii() {
        Ok(r) => r,
        Err(e) => return vec![Check::skipped(name, e.to_string())],
    };
    let w = &c.w;
    let (mode, peak) = (w.mode(), w.peak());
    let term = |t: usize| (2.0 * t.abs_diff(mode) as f64 + 1.0) * (1.0 - w.weight(t) / peak);
    let sum = |lo: usize, hi: usize| (lo..=hi).map(term).sum::<f64>();
    let tol = |x: f64| x.abs() * 1e-12 + 1e-15;
    let right_half = sum(mode, c.n) / 2.0;
    let left_half = sum(1, mode) / 2.0;
    let right_ok = r.d2_fallback
        || mode == c.n
        || (sum(mode, r.d2) <= right_half + tol(right_half)
            && (r.d2 == c.n || sum(mode, r.d2 + 1) > right_half + tol(right_half)));
    let left_ok = r.d1_fallback
        || mode == 1
        || (sum(r.d1, mode) <= left_half + tol(left_half)
            && (r.d1 == 1 || sum(r.d1 - 1, mode) > left_half + tol(left_half)));
    let span_ok = 2 * r.d_double_star >= r.d2 - r.d1;
    vec![Check::compare(
        name,
        right_ok && left_ok && span_ok,
        r.d_double_star as f64,
        (r.d2 - r.d1) as f64 / 2.0,
        format!(
            "d1 = {}, d2 = {}, mode = {mode}, fallbacks = ({}, {})",
            r.d1, r.d2, r.d1_fallback, r.d2_fallback
        ),
    )]
}

fn flip_law_checks(c: &Ctx) -> Vec<Check> {
    let names = ["flip-law-zero", "flip-law-one", "no-flip-first-passage"];
    let law = match flip_law_exact(&c.dhn, c.dhn.basepoint(), c.cfg.l_cap_for(c.n)) {
        Ok(l) => l,
        Err(e) => return names.iter().map(|&n| Check::error(n, e.clone())).collect(),
    };
    let mut out = Vec::new();
    let nf = c.n as f64;
    let q = (nf - 1.0) / nf;
    if c.cfg.theta == ThetaSpec::InverseN && c.n >= 2 {
        let b0 = q.powi(2 * c.n as i32);
        out.push(Check::compare(
            names[0],
            rel_ge(law.prob(0), b0),
            law.prob(0),
            b0,
            format!(
                "exact P(F' = 0) within {} steps, deficiency {:?}",
                law.l_cap, law.deficiency
            ),
        ));
        let exp = 4 * c.n as i32 - 2 * c.w.mode() as i32 - 2;
        let b1 = q.powi(exp) / nf;
        out.push(Check::compare(
            names[1],
            rel_ge(law.prob(1), b1),
            law.prob(1),
            b1,
            "exact P(F' = 1)".into(),
        ));
    } else {
        out.push(Check::skipped(names[0], "bound assumes theta = 1/n"));
        out.push(Check::skipped(names[1], "bound assumes theta = 1/n"));
    }
    out.push(
        match no_flip_return_probability(&c.dhn, c.dhn.basepoint()) {
            Ok(p) => {
                let gap = (p - law.prob(0)).abs();
                Check::compare(
                    names[2],
                    gap <= c.cfg.tolerances.paths,
                    gap,
                    c.cfg.tolerances.paths,
                    format!(
                        "first-passage solve {p:?} vs dynamic programme {:?}",
                        law.prob(0)
                    ),
                )
            }
            Err(e) => Check::error(names[2], e),
        },
    );
    out
}

fn recurrence_checks(c: &Ctx) -> Vec<Check> {
    let base = c.dhn.basepoint();
    let predicted = 2.0 * c.w.normalizer() / c.w.peak();
    let mut out = vec![guard(
        "mean-recurrence-exact",
        (|| {
            let exact = mean_recurrence_time(&c.lifted, base)?;
            let gap = (exact - predicted).abs() / predicted;
            Ok(Check::compare(
                "mean-recurrence-exact",
                gap <= c.cfg.tolerances.recurrence,
                gap,
                c.cfg.tolerances.recurrence,
                format!("1/pi(basepoint) = {exact:?}, 2 z'/m_j* = {predicted:?}"),
            ))
        })(),
    )];
    out.push(guard(
        "mean-recurrence-simulated",
        (|| {
            let stats = excursions(&c.dhn, base, c.cfg.excursions, c.cfg.seed)?;
            let rel = (stats.mean_length() - predicted).abs() / predicted;
            Ok(Check::compare(
                "mean-recurrence-simulated",
                rel <= c.cfg.tolerances.empirical_mean && stats.truncated == 0,
                rel,
                c.cfg.tolerances.empirical_mean,
                format!(
                    "{} excursions, mean length {:?}, truncated {}",
                    stats.count,
                    stats.mean_length(),
                    stats.truncated
                ),
            ))
        })(),
    ));
    out.push(guard(
        "chebyshev-return-count",
        (|| {
            let ch = chebyshev_return_count(&c.w, 5.0)?;
            Ok(Check::compare(
                "chebyshev-return-count",
                ch.pivot <= 0.5 + 1e-12,
                ch.pivot,
                0.5,
                format!(
                    "c~ = 5, threshold {:?}, d** = {}",
                    ch.threshold, ch.d_double_star
                ),
            ))
        })(),
    ));
    out
}

fn enumeration_checks(c: &Ctx) -> Vec<Check> {
    let name = "path-enumeration";
    let len = c.cfg.length;
    let s = c.dhn.state_count();
    let required = (c.dhn.max_row_len() as f64).powi(len as i32) * (s * s) as f64;
    if required > c.cfg.budget as f64 {
        return vec![Check::skipped(
            name,
            format!("{required} paths exceed the budget of {}", c.cfg.budget),
        )];
    }
    vec![guard(
        name,
        (|| {
            let mut worst = 0.0f64;
            for x in 0..s {
                let mut point = vec![0.0; s];
                point[x] = 1.0;
                let row = evolve(&c.dhn, &point, len)?;
                for (y, &p) in row.iter().enumerate() {
                    let e = enumerate_paths(&c.dhn, x, y, len, c.cfg.budget)?;
                    worst = worst.max((e.total_probability - p).abs());
                }
            }
            Ok(Check::compare(
                name,
                worst <= c.cfg.tolerances.paths,
                worst,
                c.cfg.tolerances.paths,
                format!("all {s} x {s} pairs at length {len} against the evolved distribution"),
            ))
        })(),
    )]
}

fn shortening_checks(c: &Ctx) -> Vec<Check> {
    let name = "conditional-shortening";
    if c.n > SHORTENING_MAX_N {
        return vec![Check::skipped(
            name,
            format!("enumerated only for n <= {SHORTENING_MAX_N}"),
        )];
    }
    vec![guard(
        name,
        (|| {
            let sweep = ExcursionCatalog::build(&c.dhn, c.cfg.budget)?.sweep();
            let worst = sweep
                .violations
                .iter()
                .map(|v| v.p_l1_given_a1 - v.p_l2_given_a2)
                .fold(0.0, f64::max);
            let first = sweep.violations.first().map_or(String::new(), |v| {
                format!(
                    ", first at (kf, k0, k') = ({}, {}, {}): {:?} > {:?}",
                    v.kf, v.k0, v.kp, v.p_l1_given_a1, v.p_l2_given_a2
                )
            });
            Ok(Check::compare(name, sweep.violations.is_empty(), worst, 0.0, format!(
            "{} triples under both readings, {} nontrivial, {} with an empty conditioning event, {} violations{first}",
            sweep.checked, sweep.nontrivial, sweep.empty, sweep.violations.len())))
        })(),
    )]
}

fn occurrence_checks(c: &Ctx) -> Vec<Check> {
    let p = c.cfg.bounds;
    let mut out = Vec::new();
    out.push(guard("occurrence-bound", (|| {
        let p = p.with_radii(&c.w)?;
        let unit = crate::bounds::BoundParams { c_tilde_tilde: 1.0, ..p };
        let steps = p.path_length(c.n)? as usize;
        let mut admissible = f64::INFINITY;
        for x in 0..c.dhn.state_count() {
            let mut point = vec![0.0; c.dhn.state_count()];
            point[x] = 1.0;
            let row = evolve(&c.dhn, &point, steps)?;
            for (y, &prob) in row.iter().enumerate() {
                let j = crate::kernel::LiftedState::from_index(y, c.n).position;
                let b = occurrence_lower_bound(&unit, &c.w, j)?.value;
                admissible = admissible.min(prob / b);
            }
        }
        let b = occurrence_lower_bound(&p, &c.w, c.w.mode())?;
        Ok(Check::compare("occurrence-bound", admissible > 0.0, admissible, p.c_tilde_tilde, format!(
            "largest c~~ with the bound below every exact {steps}-step entry; bound at the mode {:?}", b.value)))
    })()));
    out.push(guard(
        "component-bounds",
        (|| {
            let comp = component_bounds(&c.w, 1, p.c, p.f1)?;
            let (min_mid, at) = middle_component_minimum(c.n, p.c, p.f1)?;
            let clean = no_flip_run_probability(&c.dhn, 2 * c.n - 1);
            let passed = rel_ge(clean, comp.opening)
                && min_mid <= comp.middle * (1.0 + 1e-12)
                && comp.closing <= comp.opening;
            Ok(Check::compare(
                "component-bounds",
                passed,
                clean,
                comp.opening,
                format!(
                    "closing {:?}, middle {:?}, middle minimum {min_mid:?} at s = {at}",
                    comp.closing, comp.middle
                ),
            ))
        })(),
    ));
    out.push(guard(
        "added-flip-law",
        (|| {
            let law = f_double_prime_law(&p, c.n)?;
            let total: f64 = (0..=law.trials).map(|k| law.pmf(k)).sum();
            let mean: f64 = (0..=law.trials).map(|k| k as f64 * law.pmf(k)).sum();
            let gap = (total - 1.0).abs().max((mean - law.mean()).abs());
            Ok(Check::compare(
                "added-flip-law",
                gap <= 1e-12,
                gap,
                1e-12,
                format!(
                    "{} trials with success 1/n, mean {:?}",
                    law.trials,
                    law.mean()
                ),
            ))
        })(),
    ));
    let growth: Vec<_> = (0..=3)
        .map(|a| binom_growth_check(c.n.max(50), a, Some(&p)))
        .collect();
    let passed = growth.iter().all(|g| g.passed());
    let last = growth.last().unwrap();
    out.push(Check::compare(
        "binomial-growth",
        passed,
        last.ratios.last().unwrap().1,
        last.limit,
        "C(n, a)/n^a increases to 1/a! for a = 0..3, scaled binomial below its power bound".into(),
    ));
    out
}

/// Probability of taking no flip or stationary move in `steps` steps from
/// the basepoint.
fn no_flip_run_probability(k: &TransitionKernel, steps: usize) -> f64 {
    let mut mass = vec![0.0; k.state_count()];
    mass[k.basepoint()] = 1.0;
    for _ in 0..steps {
        let mut next = vec![0.0; mass.len()];
        for (x, &m) in mass.iter().enumerate() {
            for e in k.row(x).iter().filter(|e| !e.kind.is_flip_like()) {
                next[e.to] += m * e.p;
            }
        }
        mass = next;
    }
    mass.iter().sum()
}

fn rate_checks(c: &Ctx) -> Vec<Check> {
    let p = c.cfg.bounds;
    vec![
        guard(
            "rho-bound",
            (|| {
                let limit = rho_limit(&p)?;
                let gaps = [c.n, 10 * c.n, 100 * c.n]
                    .iter()
                    .map(|&n| rho_bound(&p, n).map(|r| (r - limit).abs()))
                    .collect::<Result<Vec<_>>>()?;
                let passed = gaps[1] <= gaps[0] && gaps[2] <= gaps[0] / 10.0;
                Ok(Check::compare(
                    "rho-bound",
                    passed,
                    rho_bound(&p, c.n)?,
                    limit,
                    format!(
                        "distance to the limit at n, 10n, 100n: {:?}; derived c^ = {:?}",
                        gaps,
                        p.derived_c_hat()
                    ),
                ))
            })(),
        ),
        guard(
            "tv-upper-bound",
            (|| {
                let bound = tv_upper_bound(&p, c.n)?;
                let limit = tv_upper_bound_limit(&p)?;
                let z = (p.c_prime * c.n as f64).floor() as usize;
                let exact = worst_case_tv(&c.dhn, &c.lifted, z)?.0;
                Ok(Check::compare(
                    "tv-upper-bound",
                    (0.0..=1.0).contains(&bound) && (0.0..=1.0).contains(&limit),
                    bound,
                    limit,
                    format!("exact d({z}) = {exact:?}"),
                ))
            })(),
        ),
    ]
}
