//! Central finite-difference gradient checking.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Default pass threshold on the max relative error.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Floor on the relative-error denominator.
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// A scalar objective over a flat coordinate vector (parameters followed by
/// input elements) with an analytic gradient.
pub trait GradCheckable {
    fn num_coordinates(&self) -> usize;
    fn get(&self, index: usize) -> f64;
    fn set(&mut self, index: usize, value: f64);
    fn loss(&self) -> f64;
    /// Analytic gradient over every coordinate, in coordinate order.
    fn gradient(&self) -> Vec<f64>;

    /// Named coordinate ranges, used only for reporting.
    fn groups(&self) -> Vec<(String, Range<usize>)> {
        vec![("all".to_string(), 0..self.num_coordinates())]
    }

    /// Loss with coordinate `index` shifted by `delta`. Implementations may
    /// override this with an incremental evaluation; the default mutates,
    /// evaluates and restores.
    fn shifted_loss(&mut self, index: usize, delta: f64) -> f64 {
        let orig = self.get(index);
        self.set(index, orig + delta);
        let l = self.loss();
        self.set(index, orig);
        l
    }

    /// True when some non-differentiable point (ReLU hinge, pooling tie) lies
    /// within `margin` of the current evaluation point.
    fn near_kink(&self, _margin: f64) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupError {
    pub name: String,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    pub groups: Vec<GroupError>,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares the analytic gradient with central differences of step `h` over
/// every coordinate.
pub fn grad_check<M: GradCheckable + ?Sized>(model: &mut M, h: f64, tolerance: f64) -> GradCheckReport {
    let analytic = model.gradient();
    let n = model.num_coordinates();
    let mut errors = Vec::with_capacity(n);
    for i in 0..n {
        let plus = model.shifted_loss(i, h);
        let minus = model.shifted_loss(i, -h);
        let numeric = (plus - minus) / (2.0 * h);
        errors.push(relative_error(analytic[i], numeric));
    }
    let (worst_index, max_relative_error) = errors
        .iter()
        .cloned()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, e)| if e > best.1 || e.is_nan() { (i, e) } else { best });
    let groups = model
        .groups()
        .into_iter()
        .map(|(name, range)| GroupError {
            name,
            max_relative_error: errors[range].iter().cloned().fold(0.0, f64::max),
        })
        .collect();
    GradCheckReport {
        max_relative_error,
        worst_index,
        checked: n,
        groups,
        tolerance,
        pass: max_relative_error < tolerance,
    }
}

/// Builds models from successive seeds until one is not within `margin` of a
/// kink (at most `max_tries` attempts), then gradient-checks it. Returns the
/// seed used with the report.
pub fn grad_check_resampling<M, F>(
    mut build: F,
    first_seed: u64,
    max_tries: u64,
    margin: f64,
    h: f64,
    tolerance: f64,
) -> (u64, GradCheckReport)
where
    M: GradCheckable,
    F: FnMut(u64) -> M,
{
    let mut seed = first_seed;
    let mut model = build(seed);
    for _ in 1..max_tries.max(1) {
        if !model.near_kink(margin) {
            break;
        }
        seed += 1;
        model = build(seed);
    }
    (seed, grad_check(&mut model, h, tolerance))
}
