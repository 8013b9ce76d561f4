//! Closed-form lower bounds on path occurrence probabilities and the
//! resulting contraction rate and total variation bound, evaluated for
//! explicit values of their free constants.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::distributions::UnimodalWeights;
use crate::error::{Error, Result};

/// Free constants of the bound formulas. None of them has a closed form;
/// callers choose them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Path length multiplier, `x = c n`.
    pub c: f64,
    /// Horizon multiplier, `z = c' n`.
    pub c_prime: f64,
    /// Flips before shortening.
    pub f1: u32,
    /// Flips added while shortening.
    pub f2: u32,
    /// Reciprocal of the shortenable-state fraction.
    pub f_tilde: f64,
    pub c_tilde_tilde: f64,
    /// `c^` in the contraction rate; see [`BoundParams::derived_c_hat`].
    pub c_hat: f64,
    pub d_double_star: usize,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c", self.c),
            ("c_prime", self.c_prime),
            ("f_tilde", self.f_tilde),
            ("c_tilde_tilde", self.c_tilde_tilde),
            ("c_hat", self.c_hat),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam {
                    name: name.into(),
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if self.c_prime < self.c {
            return Err(Error::InvalidParam {
                name: "c_prime".into(),
                reason: format!("must be at least c = {}", self.c),
            });
        }
        if self.d_double_star == 0 {
            return Err(Error::InvalidParam {
                name: "d_double_star".into(),
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// `2 c~~ c^(f1 + f2) / f~^f2`.
    pub fn derived_c_hat(&self) -> f64 {
        2.0 * self.c_tilde_tilde * self.c.powi((self.f1 + self.f2) as i32)
            / self.f_tilde.powi(self.f2 as i32)
    }

    pub fn with_derived_c_hat(mut self) -> Self {
        self.c_hat = self.derived_c_hat();
        self
    }

    /// Takes `d**` from the weights' shortening radii.
    pub fn with_radii(mut self, w: &UnimodalWeights) -> Result<Self> {
        self.d_double_star = w.shortening_radii()?.d_double_star;
        Ok(self)
    }

    /// `x = c n`, which must be a whole number of steps.
    pub fn path_length(&self, n: usize) -> Result<u64> {
        let x = self.c * n as f64;
        if (x - x.round()).abs() > 1e-9 || x < 0.0 {
            return Err(Error::InvalidCombinatorics(format!(
                "c n = {x} is not a whole number of steps"
            )));
        }
        Ok(x.round() as u64)
    }

    /// `floor(c n / f~)`, the trial count of the added-flip law.
    pub fn shortening_trials(&self, n: usize) -> u64 {
        (self.c * n as f64 / self.f_tilde + 1e-9).floor() as u64
    }
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            c: 2.0,
            c_prime: 20.0,
            f1: 0,
            f2: 0,
            f_tilde: 2.0,
            c_tilde_tilde: 1.0,
            c_hat: 2.0,
            d_double_star: 1,
        }
    }
}

fn ratio(n: usize) -> f64 {
    (n as f64 - 1.0) / n as f64
}

fn binomial(trials: u64, k: u64) -> f64 {
    ln_binomial(trials, k).exp()
}

/// Factor-by-factor breakdown of the occurrence lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccurrenceBound {
    /// `c~~ m_j / z'`, which carries the exactly-`cn`-steps multiplier
    /// `c~~ m_{j*} / z'` rescaled to the destination weight.
    pub mass_factor: f64,
    /// `C(cn, f1)`.
    pub pre_shortening_binomial: f64,
    /// `C(floor(cn / f~), f2)`.
    pub shortening_binomial: f64,
    /// `(1/n)^(f1 + f2)`.
    pub flip_factor: f64,
    /// Exponent of `(n-1)/n`: `cn + 4n - f1 - (2 d** + 1) f2 - 2`.
    pub no_flip_exponent: f64,
    /// `((n-1)/n)^exponent`.
    pub no_flip_factor: f64,
    pub value: f64,
}

/// Lower bound on the probability of a length-`cn` path from any start to
/// `(+-1, j)`.
pub fn occurrence_lower_bound(
    p: &BoundParams,
    w: &UnimodalWeights,
    j: usize,
) -> Result<OccurrenceBound> {
    p.validate()?;
    let n = w.n();
    if n.is_multiple_of(2) {
        return Err(Error::EvenN(n));
    }
    if j == 0 || j > n {
        return Err(Error::InvalidParam {
            name: "j".into(),
            reason: format!("position must lie in [1, {n}]"),
        });
    }
    let x = p.path_length(n)?;
    let trials = p.shortening_trials(n);
    if p.f1 as u64 > x {
        return Err(Error::InvalidCombinatorics(format!(
            "f1 = {} exceeds cn = {x}",
            p.f1
        )));
    }
    if p.f2 as u64 > trials {
        return Err(Error::InvalidCombinatorics(format!(
            "f2 = {} exceeds floor(cn / f~) = {trials}",
            p.f2
        )));
    }
    let mass_factor = p.c_tilde_tilde * w.weight(j) / w.normalizer();
    let pre = binomial(x, p.f1 as u64);
    let short = binomial(trials, p.f2 as u64);
    let flip_factor = (1.0 / n as f64).powi((p.f1 + p.f2) as i32);
    let exponent = x as f64 + 4.0 * n as f64
        - p.f1 as f64
        - (2.0 * p.d_double_star as f64 + 1.0) * p.f2 as f64
        - 2.0;
    let no_flip_factor = ratio(n).powf(exponent);
    Ok(OccurrenceBound {
        mass_factor,
        pre_shortening_binomial: pre,
        shortening_binomial: short,
        flip_factor,
        no_flip_exponent: exponent,
        no_flip_factor,
        value: mass_factor * pre * short * flip_factor * no_flip_factor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComponentBounds {
    /// No flip or stationary move in the first `2n - 1` steps:
    /// `((n-1)/n)^(2n-1)`.
    pub opening: f64,
    /// Reaching `(+-1, j)` from the basepoint within `2n - 1` steps:
    /// `(m_j / m_{j*}) ((n-1)/n)^(2n-1)`.
    pub closing: f64,
    /// Exactly `f1` flips among `cn` middle steps:
    /// `C(cn, f1) (1/n)^f1 ((n-1)/n)^(cn - f1)`.
    pub middle: f64,
}

pub fn component_bounds(w: &UnimodalWeights, j: usize, c: f64, f1: u32) -> Result<ComponentBounds> {
    let n = w.n();
    if n.is_multiple_of(2) {
        return Err(Error::EvenN(n));
    }
    if j == 0 || j > n {
        return Err(Error::InvalidParam {
            name: "j".into(),
            reason: format!("position must lie in [1, {n}]"),
        });
    }
    let p = BoundParams {
        c,
        c_prime: c,
        ..BoundParams::default()
    };
    let x = p.path_length(n)?;
    if f1 as u64 > x {
        return Err(Error::InvalidCombinatorics(format!(
            "f1 = {f1} exceeds cn = {x}"
        )));
    }
    let opening = ratio(n).powi(2 * n as i32 - 1);
    Ok(ComponentBounds {
        opening,
        closing: w.weight(j) / w.peak() * opening,
        middle: binomial_pmf(x, f1 as u64, 1.0 / n as f64),
    })
}

fn binomial_pmf(trials: u64, k: u64, p: f64) -> f64 {
    if k > trials {
        return 0.0;
    }
    (ln_binomial(trials, k) + k as f64 * p.ln() + (trials - k) as f64 * (1.0 - p).ln()).exp()
}

/// The minimum of the middle-component pmf over possible middle lengths
/// `s in [cn - 4n + 2, cn]`, and the `s` attaining it.
pub fn middle_component_minimum(n: usize, c: f64, f1: u32) -> Result<(f64, u64)> {
    let p = BoundParams {
        c,
        c_prime: c,
        ..BoundParams::default()
    };
    let x = p.path_length(n)?;
    let lo = (x as i64 - 4 * n as i64 + 2).max(f1 as i64) as u64;
    if lo > x {
        return Err(Error::InvalidCombinatorics(format!(
            "f1 = {f1} exceeds cn = {x}"
        )));
    }
    let q = 1.0 / n as f64;
    Ok((lo..=x).map(|s| (binomial_pmf(s, f1 as u64, q), s)).fold(
        (f64::INFINITY, x),
        |best, cur| if cur.0 < best.0 { cur } else { best },
    ))
}

/// `Binomial(floor(cn / f~), 1/n)`, the law of flips added while shortening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AddedFlipLaw {
    pub trials: u64,
    pub success: f64,
}

impl AddedFlipLaw {
    pub fn mean(&self) -> f64 {
        self.trials as f64 * self.success
    }

    pub fn pmf(&self, k: u64) -> f64 {
        binomial_pmf(self.trials, k, self.success)
    }
}

pub fn f_double_prime_law(p: &BoundParams, n: usize) -> Result<AddedFlipLaw> {
    let trials = p.shortening_trials(n);
    if trials < 1 {
        return Err(Error::InvalidParam {
            name: "f_tilde".into(),
            reason: format!("c n / f~ = {} is below 1", p.c * n as f64 / p.f_tilde),
        });
    }
    Ok(AddedFlipLaw {
        trials,
        success: 1.0 / n as f64,
    })
}

fn check_rho(rho: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&rho) {
        Ok(rho)
    } else {
        Err(Error::RhoOutOfRange(rho))
    }
}

/// `1 - c^ ((n-1)/n)^(cn - f1 - f2)`.
pub fn rho_bound(p: &BoundParams, n: usize) -> Result<f64> {
    p.validate()?;
    let exponent = p.c * n as f64 - p.f1 as f64 - p.f2 as f64;
    check_rho(1.0 - p.c_hat * ratio(n).powf(exponent))
}

/// `1 - c^ e^(-c)`, the `n -> infinity` limit of [`rho_bound`].
pub fn rho_limit(p: &BoundParams) -> Result<f64> {
    p.validate()?;
    check_rho(1.0 - p.c_hat * (-p.c).exp())
}

fn horizon_exponent(p: &BoundParams) -> i32 {
    (p.c_prime / p.c + 1e-12).floor() as i32
}

/// `rho^floor(c'/c)`.
pub fn tv_upper_bound(p: &BoundParams, n: usize) -> Result<f64> {
    Ok(rho_bound(p, n)?.powi(horizon_exponent(p)))
}

pub fn tv_upper_bound_limit(p: &BoundParams) -> Result<f64> {
    Ok(rho_limit(p)?.powi(horizon_exponent(p)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinomGrowthReport {
    pub a: u32,
    pub n_max: usize,
    /// `C(n, a) / n^a` for `n = a.max(1)..=n_max`.
    pub ratios: Vec<(usize, f64)>,
    pub limit: f64,
    pub bounded: bool,
    pub monotone: bool,
    /// `C(floor(cn/f~), f2) <= (cn/f~)^f2` over the same range, when
    /// parameters are supplied.
    pub scaled_ok: Option<bool>,
}

impl BinomGrowthReport {
    pub fn passed(&self) -> bool {
        self.bounded && self.monotone && self.scaled_ok.unwrap_or(true)
    }
}

pub fn binom_growth_check(n_max: usize, a: u32, scaled: Option<&BoundParams>) -> BinomGrowthReport {
    let limit = (1..=a as u64).fold(1.0, |acc, i| acc / i as f64);
    let ratios: Vec<(usize, f64)> = (a.max(1) as usize..=n_max)
        .map(|n| (n, binomial(n as u64, a as u64) / (n as f64).powi(a as i32)))
        .collect();
    let bounded = ratios.iter().all(|&(_, r)| r <= limit * (1.0 + 1e-12));
    let monotone = ratios.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12));
    let scaled_ok = scaled.map(|p| {
        (1..=n_max).all(|n| {
            let trials = p.shortening_trials(n);
            p.f2 as u64 > trials
                || binomial(trials, p.f2 as u64)
                    <= (p.c * n as f64 / p.f_tilde).powi(p.f2 as i32) * (1.0 + 1e-12)
        })
    });
    BinomGrowthReport {
        a,
        n_max,
        ratios,
        limit,
        bounded,
        monotone,
        scaled_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn weights(raw: &[f64]) -> UnimodalWeights {
        UnimodalWeights::from_weights(raw).unwrap()
    }

    /// Exact binomial coefficient by the product formula.
    fn choose(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn occurrence_trivial_binomials() {
        let p = BoundParams {
            c: 2.0,
            ..BoundParams::default()
        };
        let b = occurrence_lower_bound(&p, &weights(&[1.0; 5]), 1).unwrap();
        assert_relative_eq!(b.value, 0.2 * 0.8f64.powi(28), max_relative = 1e-12);
        assert_eq!(b.no_flip_exponent, 28.0);
    }

    #[test]
    fn occurrence_factor_by_factor() {
        let w = weights(&[1.0, 2.0, 3.0, 2.0, 1.0]);
        let p = BoundParams {
            c: 3.0,
            f1: 1,
            ..BoundParams::default()
        }
        .with_radii(&w)
        .unwrap();
        let b = occurrence_lower_bound(&p, &w, 2).unwrap();
        // 1 * (2/9) * C(15,1) * C(7,0) * (1/5) * (4/5)^(15 + 20 - 1 - 0 - 2)
        let oracle = (2.0 / 9.0) * choose(15, 1) * choose(7, 0) * 0.2 * 0.8f64.powi(32);
        assert_relative_eq!(b.value, oracle, max_relative = 1e-12);
        assert_relative_eq!(b.pre_shortening_binomial, 15.0, max_relative = 1e-12);

        let top = occurrence_lower_bound(&p, &w, 3).unwrap();
        assert_relative_eq!(top.value / b.value, 3.0 / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn occurrence_errors() {
        let w = weights(&[1.0; 5]);
        let too_many = BoundParams {
            f1: 11,
            ..BoundParams::default()
        };
        assert!(matches!(
            occurrence_lower_bound(&too_many, &w, 1),
            Err(Error::InvalidCombinatorics(_))
        ));
        let fractional = BoundParams {
            c: 0.3,
            c_prime: 1.0,
            ..BoundParams::default()
        };
        assert!(occurrence_lower_bound(&fractional, &w, 1).is_err());
        assert_eq!(
            occurrence_lower_bound(&BoundParams::default(), &weights(&[1.0; 4]), 1),
            Err(Error::EvenN(4))
        );
    }

    #[test]
    fn components() {
        let uni = component_bounds(&weights(&[1.0; 5]), 1, 2.0, 0).unwrap();
        assert_relative_eq!(uni.opening, 0.8f64.powi(9), max_relative = 1e-14);
        let tent = weights(&[1.0, 2.0, 3.0, 2.0, 1.0]);
        let c = component_bounds(&tent, 1, 2.0, 1).unwrap();
        assert_relative_eq!(c.closing, 0.8f64.powi(9) / 3.0, max_relative = 1e-14);
        assert_relative_eq!(c.middle, 10.0 * 0.2 * 0.8f64.powi(9), max_relative = 1e-12);
        let peak = component_bounds(&tent, 3, 2.0, 0).unwrap();
        assert_eq!(peak.closing, peak.opening);
    }

    #[test]
    fn added_flip_law() {
        let p = BoundParams {
            c: 2.0,
            f_tilde: 2.0,
            ..BoundParams::default()
        };
        let law = f_double_prime_law(&p, 10).unwrap();
        assert_eq!(law.trials, 10);
        assert_relative_eq!(law.mean(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(law.pmf(0), 0.9f64.powi(10), max_relative = 1e-12);
        let total: f64 = (0..=law.trials).map(|k| law.pmf(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let starved = BoundParams {
            f_tilde: 100.0,
            ..p
        };
        assert!(f_double_prime_law(&starved, 10).is_err());
    }

    #[test]
    fn rho_and_tv() {
        let p = BoundParams {
            c: 1.0,
            c_prime: 1.0,
            c_hat: 1.0,
            ..BoundParams::default()
        };
        for n in [5usize, 50, 500] {
            assert_relative_eq!(
                rho_bound(&p, n).unwrap(),
                1.0 - ratio(n).powi(n as i32),
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(
            rho_limit(&p).unwrap(),
            1.0 - (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert!((rho_bound(&p, 100_000).unwrap() - rho_limit(&p).unwrap()).abs() < 1e-5);

        let greedy = BoundParams { c_hat: 10.0, ..p };
        assert!(matches!(rho_limit(&greedy), Err(Error::RhoOutOfRange(_))));
        assert!(matches!(
            rho_bound(&greedy, 5),
            Err(Error::RhoOutOfRange(_))
        ));

        assert_eq!(tv_upper_bound(&p, 7).unwrap(), rho_bound(&p, 7).unwrap());
        // rho = 1/2 exactly when c^ ((n-1)/n)^cn = 1/2
        let n = 5;
        let half = BoundParams {
            c: 1.0,
            c_prime: 10.0,
            c_hat: 0.5 / ratio(n).powi(n as i32),
            ..BoundParams::default()
        };
        assert_relative_eq!(
            tv_upper_bound(&half, n).unwrap(),
            0.5f64.powi(10),
            max_relative = 1e-12
        );
        let lim = tv_upper_bound_limit(&half).unwrap();
        assert_relative_eq!(
            lim,
            (1.0 - half.c_hat * (-1.0f64).exp()).powi(10),
            max_relative = 1e-12
        );
    }

    #[test]
    fn derived_c_hat() {
        let p = BoundParams {
            c: 3.0,
            f1: 2,
            f2: 1,
            f_tilde: 4.0,
            c_tilde_tilde: 0.5,
            ..BoundParams::default()
        };
        assert_relative_eq!(p.derived_c_hat(), 2.0 * 0.5 * 27.0 / 4.0);
    }

    #[test]
    fn binomial_growth() {
        let r = binom_growth_check(60, 2, None);
        assert!(r.passed());
        assert_relative_eq!(r.limit, 0.5);
        for &(n, v) in &r.ratios {
            assert_relative_eq!(v, (n as f64 - 1.0) / (2.0 * n as f64), max_relative = 1e-12);
        }
        let r0 = binom_growth_check(30, 0, None);
        assert!(r0.ratios.iter().all(|&(_, v)| (v - 1.0).abs() < 1e-12));
        assert!(choose(10, 3) <= 1000.0);
        let p = BoundParams {
            c: 3.0,
            f2: 3,
            f_tilde: 2.0,
            ..BoundParams::default()
        };
        assert_eq!(binom_growth_check(50, 3, Some(&p)).scaled_ok, Some(true));
    }
}
