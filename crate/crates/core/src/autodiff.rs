//! Central finite differences and a seeded gradient checker for the
//! analytic adjoints in this crate.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// A deterministic scalar function of a flat parameter vector with an
/// analytic gradient.
pub trait ScalarFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Adapter turning a pair of closures into a [`ScalarFunction`].
pub struct FnScalar<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> FnScalar<V, G>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(value: V, gradient: G) -> Self {
        FnScalar { value, gradient }
    }
}

impl<V, G> ScalarFunction for FnScalar<V, G>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn fd_gradient<F: ScalarFunction + ?Sized>(f: &F, point: &[f64], index: usize, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::OutOfRange(format!("finite-difference step {h} must be positive")));
    }
    let mut x = point.to_vec();
    x[index] = point[index] + h;
    let plus = f.value(&x);
    x[index] = point[index] - h;
    let minus = f.value(&x);
    if !plus.is_finite() || !minus.is_finite() {
        return Err(Error::NonFiniteValue(format!(
            "f(x ± h e_{index}) = ({plus}, {minus})"
        )));
    }
    Ok((plus - minus) / (2.0 * h))
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub samples: usize,
    pub h: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            samples: 100,
            h: 1e-5,
            tol: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradFailure {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub points_checked: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_index: Option<usize>,
    pub failures: Vec<GradFailure>,
    pub excluded: usize,
    pub exclusion_reasons: BTreeMap<String, usize>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.points_checked > 0 && self.max_rel_error <= self.tol
    }
}

/// Compares the analytic gradient with central differences on up to
/// `config.samples` coordinates drawn without replacement.
///
/// `exclude(point, index)` returns a reason when the coordinate sits near a
/// kink of the function and must be skipped.
pub fn grad_check<F, E>(f: &F, point: &[f64], config: &GradCheckConfig, exclude: E) -> Result<GradCheckReport>
where
    F: ScalarFunction + ?Sized,
    E: Fn(&[f64], usize) -> Option<&'static str>,
{
    if config.samples == 0 {
        return Err(Error::OutOfRange("gradient check needs at least one sample".into()));
    }
    let analytic = f.gradient(point);
    if analytic.len() != point.len() {
        return Err(Error::shape("gradient length", analytic.len(), point.len()));
    }
    let mut order: Vec<usize> = (0..point.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));

    let mut chosen = Vec::with_capacity(config.samples);
    let mut reasons = BTreeMap::new();
    let mut excluded = 0;
    for index in order {
        if chosen.len() == config.samples {
            break;
        }
        match exclude(point, index) {
            Some(reason) => {
                excluded += 1;
                *reasons.entry(reason.to_string()).or_insert(0) += 1;
            }
            None => chosen.push(index),
        }
    }
    if chosen.is_empty() {
        return Err(Error::AllPointsExcluded);
    }

    let numeric: Vec<Result<f64>> = chosen
        .par_iter()
        .map(|&i| fd_gradient(f, point, i, config.h))
        .collect();

    let mut report = GradCheckReport {
        points_checked: chosen.len(),
        max_rel_error: 0.0,
        worst_index: None,
        failures: Vec::new(),
        excluded,
        exclusion_reasons: reasons,
        tol: config.tol,
    };
    for (&index, n) in chosen.iter().zip(numeric) {
        let numeric = n?;
        let a = analytic[index];
        let rel = relative_error(a, numeric);
        if rel > report.max_rel_error || report.worst_index.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst_index = Some(index);
        }
        if rel > config.tol {
            report.failures.push(GradFailure {
                index,
                analytic: a,
                numeric,
                rel_error: rel,
            });
        }
    }
    Ok(report)
}
