//! Numeric certification of the scalar inequalities behind the subgaussian
//! bound and the discrepancy estimate.
//!
//! Every `*_gap` function returns "claimed larger side minus claimed smaller
//! side", so a certified inequality shows up as a nonnegative gap.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GswError, Result};

/// Largest exponent argument the gap functions accept.
pub const EXPONENT_GUARD: f64 = 50.0;

fn guard(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite() || v.abs() > EXPONENT_GUARD) {
        return Err(GswError::Domain(format!(
            "{name}: argument magnitude exceeds {EXPONENT_GUARD}: {values:?}"
        )));
    }
    Ok(())
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(GswError::Domain(format!("{name}: {x} outside [-1, 1]")));
    }
    Ok(())
}

/// Mean-zero two-point moment generating function: a variable taking
/// `-(1+x)` with probability `(1-x)/2` and `1-x` with probability `(1+x)/2`,
/// evaluated at `s`.
fn two_point_mgf(x: f64, s: f64) -> f64 {
    0.5 * (1.0 - x) * (-(1.0 + x) * s).exp() + 0.5 * (1.0 + x) * ((1.0 - x) * s).exp()
}

/// `exp(|a||b| + b²/2) − E exp((a+b)·D)` for the two-point variable `D` at `x`.
///
/// This is the inequality exactly as usually stated. It does NOT hold in
/// general: at `b = 0` the right side is `E exp(a D) ≥ 1` with equality only
/// for `a = 0`, so the gap is negative whenever `a ≠ 0` and `|x| < 1`. The
/// normalized form that does hold is [`lemma1_ratio_gap`].
pub fn lemma1_gap(x: f64, a: f64, b: f64) -> Result<f64> {
    check_unit("lemma1_gap", x)?;
    guard("lemma1_gap", &[a, b])?;
    Ok((a.abs() * b.abs() + 0.5 * b * b).exp() - two_point_mgf(x, a + b))
}

/// `exp(|a||b| + b²/2) − E exp((a+b)D) / E exp(a D)`.
///
/// Conditioning on the past fixes `a`; the extra factor `exp((a+b)D)` over
/// `exp(aD)` is what one Bellman step has to control. This ratio form holds
/// for all `x ∈ [−1,1]` and real `a`, `b`.
pub fn lemma1_ratio_gap(x: f64, a: f64, b: f64) -> Result<f64> {
    check_unit("lemma1_ratio_gap", x)?;
    guard("lemma1_ratio_gap", &[a, b])?;
    Ok((a.abs() * b.abs() + 0.5 * b * b).exp() - two_point_mgf(x, a + b) / two_point_mgf(x, a))
}

/// `e^{b²/2} − E exp(b D)`: Hoeffding's lemma for a mean-zero variable
/// with range 2.
pub fn two_point_mgf_gap(z: f64, b: f64) -> Result<f64> {
    check_unit("two_point_mgf_gap", z)?;
    guard("two_point_mgf_gap", &[b])?;
    Ok((0.5 * b * b).exp() - two_point_mgf(z, b))
}

/// `e^y − 1 − y` without cancellation near zero.
fn exp_excess(y: f64) -> f64 {
    if y.abs() < 1e-3 {
        // Taylor series; terms beyond y^7 are below 1e-24 relative.
        let mut term = y * y / 2.0;
        let mut sum = term;
        for k in 3..=8 {
            term *= y / k as f64;
            sum += term;
        }
        sum
    } else {
        y.exp_m1() - y
    }
}

/// Both gaps of the cosh chain for `C ≥ 2`, `λ > 0`:
///
/// 1. `(e^{Cλ} − 1 − Cλ) − λ² e^{Cλ/2}` (claimed strictly positive);
/// 2. `λ²/(e^{Cλ} − 1 − Cλ) − λ²/(2(cosh(Cλ) − 1))` (claimed nonnegative).
pub fn cosh_chain_check(c: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(c >= 2.0) || !(lambda > 0.0) {
        return Err(GswError::Domain(format!(
            "cosh_chain_check needs C >= 2 and lambda > 0, got C={c}, lambda={lambda}"
        )));
    }
    let y = c * lambda;
    if y > 2.0 * EXPONENT_GUARD {
        return Err(GswError::Domain(format!("C*lambda = {y} exceeds {}", 2.0 * EXPONENT_GUARD)));
    }
    let excess = exp_excess(y);
    let first = excess - lambda * lambda * (0.5 * y).exp();
    // 2(cosh y − 1) = excess(y) + excess(−y)
    let two_cosh_minus_one = excess + exp_excess(-y);
    let second = lambda * lambda / excess - lambda * lambda / two_cosh_minus_one;
    Ok((first, second))
}

/// Inputs of the discrepancy bound: estimates of `E max_i Z_{e_i}` and
/// `E T̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    e_max_z: f64,
    e_hat_t: f64,
}

impl BoundInputs {
    pub fn new(e_max_z: f64, e_hat_t: f64) -> Result<Self> {
        if !(0.0..=1.0 + 1e-9).contains(&e_max_z) {
            return Err(GswError::InvalidArgument(format!(
                "E max Z must lie in [0, 1], got {e_max_z}"
            )));
        }
        if !(e_hat_t >= 1.0) {
            return Err(GswError::InvalidArgument(format!(
                "E hat-T must be at least 1, got {e_hat_t}"
            )));
        }
        Ok(BoundInputs { e_max_z, e_hat_t })
    }

    pub fn e_max_z(&self) -> f64 {
        self.e_max_z
    }

    pub fn e_hat_t(&self) -> f64 {
        self.e_hat_t
    }
}

/// `2 max(1, √(2 E max Z) √(ln E T̂))`.
pub fn theorem1_bound(inputs: BoundInputs) -> f64 {
    2.0 * f64::max(1.0, (2.0 * inputs.e_max_z).sqrt() * inputs.e_hat_t.ln().sqrt())
}

/// Minimum of a gap over a grid, with the point where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMinimum {
    pub min_gap: f64,
    pub argmin: [f64; 3],
    pub points: usize,
}

/// Evenly spaced values from `lo` to `hi` inclusive. Built from integer
/// multiples so that e.g. 0 lands exactly on the grid.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|k| lo + k as f64 * step).collect()
}

fn minimize3(xs: &[f64], ys: &[f64], zs: &[f64], f: impl Fn(f64, f64, f64) -> f64 + Sync) -> GridMinimum {
    let (min_gap, argmin) = xs
        .par_iter()
        .map(|&x| {
            let mut best = (f64::INFINITY, [x, 0.0, 0.0]);
            for &y in ys {
                for &z in zs {
                    let g = f(x, y, z);
                    if g < best.0 {
                        best = (g, [x, y, z]);
                    }
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, [0.0; 3]),
            |a, b| if b.0 < a.0 { b } else { a },
        );
    GridMinimum {
        min_gap,
        argmin,
        points: xs.len() * ys.len() * zs.len(),
    }
}

/// Minimum of [`lemma1_gap`] over `x ∈ [−x_max, x_max]`, `a, b ∈ [−ab_max, ab_max]`.
pub fn lemma1_grid(x_max: f64, ab_max: f64, step: f64) -> GridMinimum {
    let xs = grid(-x_max, x_max, step);
    let ab = grid(-ab_max, ab_max, step);
    minimize3(&xs, &ab, &ab, |x, a, b| lemma1_gap(x, a, b).expect("grid within domain"))
}

/// Minimum of [`lemma1_ratio_gap`] over the same kind of grid.
pub fn lemma1_ratio_grid(x_max: f64, ab_max: f64, step: f64) -> GridMinimum {
    let xs = grid(-x_max, x_max, step);
    let ab = grid(-ab_max, ab_max, step);
    minimize3(&xs, &ab, &ab, |x, a, b| lemma1_ratio_gap(x, a, b).expect("grid within domain"))
}

/// Minimum of [`two_point_mgf_gap`] over `z ∈ [−1,1]`, `b ∈ [−b_max, b_max]`.
pub fn hoeffding_grid(b_max: f64, step: f64) -> GridMinimum {
    let zs = grid(-1.0, 1.0, step);
    let bs = grid(-b_max, b_max, step);
    minimize3(&zs, &bs, &[0.0], |z, b, _| two_point_mgf_gap(z, b).expect("grid within domain"))
}

/// Minima of both cosh-chain gaps over `C ∈ [2, c_max]`, `λ ∈ (0, lambda_max]`.
pub fn cosh_grid(c_max: f64, lambda_max: f64, step: f64) -> (GridMinimum, GridMinimum) {
    let cs = grid(2.0, c_max, step);
    let ls: Vec<f64> = grid(0.0, lambda_max, step).into_iter().skip(1).collect();
    let first = minimize3(&cs, &ls, &[0.0], |c, l, _| cosh_chain_check(c, l).expect("grid within domain").0);
    let second = minimize3(&cs, &ls, &[0.0], |c, l, _| cosh_chain_check(c, l).expect("grid within domain").1);
    (first, second)
}
