//! Mixing-time scaling studies and log-log exponent fits.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::mixing_time;
use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::kernel::{KernelLabel, ThetaSpec};

/// Step cap for one exact mixing-time computation.
pub fn default_cap(sampler: KernelLabel, n: usize) -> usize {
    match sampler {
        KernelLabel::Metropolis => 200 * n * n,
        KernelLabel::Dhn => 200 * n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `ln t` on `ln n`.
pub fn fit_exponent(points: &[(usize, f64)]) -> Result<ExponentFit> {
    if let Some(&(n, t)) = points.iter().find(|&&(n, t)| n == 0 || !(t >= 1.0)) {
        return Err(Error::DegenerateFit(format!(
            "need n >= 1 and t >= 1, got ({n}, {t})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, t)| t.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if points.len() < 2 || sxx <= 0.0 {
        return Err(Error::DegenerateFit("need at least two distinct n".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(ExponentFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingResult {
    pub family: Family,
    pub sampler: KernelLabel,
    pub delta: f64,
    pub theta: ThetaSpec,
    pub points: Vec<(usize, usize)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ScalingResult {
    pub fn t_mix(&self, n: usize) -> Option<usize> {
        self.points.iter().find(|p| p.0 == n).map(|p| p.1)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("family,sampler,n,t_mix\n");
        for (n, t) in &self.points {
            out.push_str(&format!(
                "{},{},{n},{t}\n",
                self.family.name(),
                self.sampler
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingStudy {
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub sampler: KernelLabel,
    pub n_list: Vec<usize>,
    pub delta: f64,
    pub theta: ThetaSpec,
}

impl ScalingStudy {
    pub fn new(family: Family, sampler: KernelLabel, n_list: Vec<usize>) -> Self {
        Self {
            family,
            params: BTreeMap::new(),
            sampler,
            n_list,
            delta: 0.25,
            theta: ThetaSpec::default(),
        }
    }

    pub fn run(&self) -> Result<ScalingResult> {
        if self.n_list.is_empty() {
            return Err(Error::InvalidParam {
                name: "n_list".into(),
                reason: "empty".into(),
            });
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 3 || n % 2 == 0) {
            return Err(Error::InvalidParam {
                name: "n_list".into(),
                reason: format!("every n must be odd and at least 3, got {n}"),
            });
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParam {
                name: "delta".into(),
                reason: format!("must lie in (0, 1), got {}", self.delta),
            });
        }
        let times: Vec<Result<usize>> = self
            .n_list
            .par_iter()
            .map(|&n| {
                let pi = self.family.weights(n, &self.params)?.normalize();
                let k = self.sampler.build(&pi, self.theta)?;
                let target = k.stationary();
                Ok(mixing_time(&k, &target, self.delta, default_cap(self.sampler, n))?.t_mix)
            })
            .collect();
        let points = self
            .n_list
            .iter()
            .zip(times)
            .map(|(&n, t)| t.map(|t| (n, t)))
            .collect::<Result<Vec<_>>>()?;
        let fit = fit_exponent(
            &points
                .iter()
                .map(|&(n, t)| (n, t as f64))
                .collect::<Vec<_>>(),
        )?;
        Ok(ScalingResult {
            family: self.family,
            sampler: self.sampler,
            delta: self.delta,
            theta: self.theta,
            points,
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
        })
    }
}

pub fn scaling_study(
    family: Family,
    sampler: KernelLabel,
    n_list: &[usize],
    delta: f64,
    theta: ThetaSpec,
) -> Result<ScalingResult> {
    ScalingStudy {
        delta,
        theta,
        ..ScalingStudy::new(family, sampler, n_list.to_vec())
    }
    .run()
}

/// `3, 5, ...` odd values in `[lo, hi]`.
pub fn odd_range(lo: usize, hi: usize) -> Vec<usize> {
    (lo..=hi).filter(|n| n % 2 == 1).collect()
}
