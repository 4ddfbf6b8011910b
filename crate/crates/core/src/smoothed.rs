//! Smoothed analysis: the walk on `M̄ = (M; Id)/√2`, its tilted law, Gaussian
//! perturbations `M + R`, and the pairwise comparison bound.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::enumeration::LeafDistribution;
use crate::error::{GswError, Result};
use crate::instance::Instance;
use crate::quadrature::{normal_interval_probability, CompositeRule};
use crate::rng::{stream, PERTURBATION_BASE};

/// Two-sided 95% standard normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;
pub const DEFAULT_QUAD_POINTS: usize = 64;
/// Aspect-ratio constant `L` in the admissibility conditions.
pub const ASPECT_L: f64 = 10.0;
/// Constant `c` in the lower bound on ε.
pub const EPSILON_FLOOR_C: f64 = 0.5;

// Half-width, in standard deviations, of the window outside which Gaussian
// mass is ignored by the quadrature.
const WINDOW_SD: f64 = 12.0;
// Widest quadrature panel, in standard deviations.
const PANEL_SD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedConfig {
    pub sigma: f64,
    pub kappa: f64,
    pub cutoff_c: f64,
    pub epsilon: f64,
    pub r_trials: usize,
    pub master_seed: u64,
    /// Slack parameter `δ` of the ε upper bounds.
    pub delta: f64,
}

impl SmoothedConfig {
    pub fn new(
        sigma: f64,
        kappa: f64,
        cutoff_c: f64,
        epsilon: f64,
        r_trials: usize,
        master_seed: u64,
        delta: f64,
    ) -> Result<Self> {
        let bad = |what: &str| Err(GswError::InvalidArgument(what.to_string()));
        if !(sigma >= 1.0 && sigma.is_finite()) {
            return bad("sigma must be a finite number >= 1");
        }
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return bad("kappa must be a finite number >= 1");
        }
        if !(cutoff_c > 1.0 && cutoff_c.is_finite()) {
            return bad("cutoff C must be a finite number > 1");
        }
        if !(epsilon > 0.0) {
            return bad("epsilon must be > 0");
        }
        if r_trials == 0 {
            return bad("r_trials must be >= 1");
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return bad("delta must be a finite number > 0");
        }
        Ok(SmoothedConfig {
            sigma,
            kappa,
            cutoff_c,
            epsilon,
            r_trials,
            master_seed,
            delta,
        })
    }

    /// Defaults for dimension `d`: `ε = epsilon_of(σ, d, κ)`, `C` from
    /// [`default_cutoff`] and `δ` from [`default_delta`].
    pub fn for_dimension(d: usize, sigma: f64, kappa: f64, r_trials: usize, master_seed: u64) -> Result<Self> {
        let epsilon = epsilon_of(sigma, d, kappa)?;
        SmoothedConfig::new(
            sigma,
            kappa,
            default_cutoff(d),
            epsilon,
            r_trials,
            master_seed,
            default_delta(d, kappa),
        )
    }
}

/// `max((ln d)², 2)`.
pub fn default_cutoff(d: usize) -> f64 {
    (d as f64).ln().powi(2).max(2.0)
}

/// `32 d^{1/2 − κ/32}`.
pub fn default_delta(d: usize, kappa: f64) -> f64 {
    32.0 * (d as f64).powf(0.5 - kappa / 32.0)
}

/// `⌈κ d ln d⌉`.
pub fn kappa_n(d: usize, kappa: f64) -> usize {
    (kappa * d as f64 * (d as f64).ln()).ceil() as usize
}

/// `σ √(ln d) d^{−κ/32}`.
pub fn epsilon_of(sigma: f64, d: usize, kappa: f64) -> Result<f64> {
    if d < 2 {
        return Err(GswError::InvalidArgument(format!("epsilon needs d >= 2, got {d}")));
    }
    let df = d as f64;
    Ok(sigma * df.ln().sqrt() * df.powf(-kappa / 32.0))
}

/// `(M; Id_n)/√2`, a `(d+n)×n` instance.
pub fn build_augmented(inst: &Instance) -> Instance {
    let (d, n) = (inst.d(), inst.n());
    let mut m = DMatrix::zeros(d + n, n);
    m.view_mut((0, 0), (d, n)).copy_from(inst.matrix());
    for j in 0..n {
        m[(d + j, j)] = 1.0;
    }
    m *= FRAC_1_SQRT_2;
    Instance::from_matrix(m).expect("augmented columns have norm at most one")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedPoint {
    pub x: Vec<i8>,
    pub base_probability: f64,
    pub tilted_probability: f64,
    /// `‖M x‖₂²` with the original matrix.
    pub norm_sq: f64,
}

/// The reweighted law of the augmented walk, supported on the cutoff set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedDistribution {
    /// Points of the cutoff set, sorted by sign vector.
    pub support: Vec<TiltedPoint>,
    /// Normalizer `W`.
    pub w: f64,
    /// `V = E‖M X̄‖₂² / 2`.
    pub v: f64,
    /// Base probability of the cutoff set.
    pub cutoff_set_mass: f64,
    pub sigma: f64,
    pub cutoff_c: f64,
}

impl TiltedDistribution {
    /// Largest admissible `‖M x‖₂²`, namely `2 C V`.
    pub fn threshold(&self) -> f64 {
        2.0 * self.cutoff_c * self.v
    }
}

/// Reweights the leaves of the walk on `build_augmented(inst)` by
/// `exp(d‖Mx‖²/(2σ²n))` on `B = {‖Mx‖² ≤ 2CV}`.
pub fn tilt_distribution(
    leaves: &LeafDistribution,
    inst: &Instance,
    sigma: f64,
    cutoff_c: f64,
) -> Result<TiltedDistribution> {
    let (d, n) = (inst.d(), inst.n());
    if leaves.n != n || leaves.d != d + n {
        return Err(GswError::DimensionMismatch(format!(
            "leaves are for a {}x{} walk, expected the augmented {}x{n}",
            leaves.d,
            leaves.n,
            d + n
        )));
    }
    if !(sigma >= 1.0) || !(cutoff_c > 1.0) {
        return Err(GswError::InvalidArgument(format!(
            "need sigma >= 1 and C > 1, got sigma = {sigma}, C = {cutoff_c}"
        )));
    }
    let mut merged: BTreeMap<Vec<i8>, f64> = BTreeMap::new();
    for leaf in &leaves.leaves {
        *merged.entry(leaf.x.clone()).or_insert(0.0) += leaf.probability;
    }
    let points: Vec<(Vec<i8>, f64, f64)> = merged
        .into_iter()
        .map(|(x, p)| {
            let mx = inst.apply_signs(&x);
            let nsq = mx.iter().map(|a| a * a).sum::<f64>();
            (x, p, nsq)
        })
        .collect();
    let v = 0.5 * points.iter().map(|(_, p, nsq)| p * nsq).sum::<f64>();
    let threshold = 2.0 * cutoff_c * v;
    let scale = d as f64 / (2.0 * sigma * sigma * n as f64);
    let mut support = Vec::new();
    let mut w = 0.0;
    let mut mass = 0.0;
    for (x, p, nsq) in points {
        if nsq <= threshold {
            let weight = (scale * nsq).exp();
            w += p * weight;
            mass += p;
            support.push(TiltedPoint {
                x,
                base_probability: p,
                tilted_probability: weight,
                norm_sq: nsq,
            });
        }
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(GswError::Domain(format!("tilt normalizer W = {w} is not a positive number")));
    }
    for pt in &mut support {
        pt.tilted_probability *= pt.base_probability / w;
    }
    Ok(TiltedDistribution {
        support,
        w,
        v,
        cutoff_set_mass: mass,
        sigma,
        cutoff_c,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSample {
    pub r: DMatrix<f64>,
    pub seed_index: u64,
}

/// A `d×n` matrix of independent `N(0, σ²/d)` entries, drawn column by column.
pub fn sample_perturbation<R: Rng + ?Sized>(d: usize, n: usize, sigma: f64, rng: &mut R, seed_index: u64) -> PerturbationSample {
    let sd = sigma / (d as f64).sqrt();
    let r = DMatrix::from_iterator(d, n, (0..d * n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)));
    PerturbationSample { r, seed_index }
}

/// The perturbation used by trial `trial` of an experiment seeded with
/// `master_seed`.
pub fn trial_perturbation(d: usize, n: usize, sigma: f64, master_seed: u64, trial: u64) -> PerturbationSample {
    let mut rng = stream(master_seed, PERTURBATION_BASE + trial);
    sample_perturbation(d, n, sigma, &mut rng, trial)
}

/// Tilted probability of `‖(M+R) x‖_∞ ≤ ε`.
pub fn inner_hit_probability(inst: &Instance, sample: &PerturbationSample, tilted: &TiltedDistribution, epsilon: f64) -> Result<f64> {
    if sample.r.shape() != inst.matrix().shape() {
        return Err(GswError::DimensionMismatch(format!(
            "perturbation is {:?}, instance is {:?}",
            sample.r.shape(),
            inst.matrix().shape()
        )));
    }
    let perturbed = inst.matrix() + &sample.r;
    Ok(tilted
        .support
        .iter()
        .filter(|pt| perturbed_sup(&perturbed, &pt.x) <= epsilon)
        .map(|pt| pt.tilted_probability)
        .sum())
}

fn perturbed_sup(m: &DMatrix<f64>, x: &[i8]) -> f64 {
    let mut acc = vec![0.0; m.nrows()];
    for (j, &s) in x.iter().enumerate() {
        let s = f64::from(s);
        for (a, v) in acc.iter_mut().zip(m.column(j).iter()) {
            *a += s * v;
        }
    }
    acc.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let nf = trials as f64;
    let p = successes as f64 / nf;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // The interval touches the boundary exactly when p does.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterEstimate {
    pub trials: usize,
    pub successes: usize,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Inner hit probability per trial, by trial index.
    pub inner: Vec<f64>,
}

/// Fraction of perturbations `R` for which some tilted support point has
/// `‖(M+R) x‖_∞ ≤ ε`.
pub fn outer_success_estimate(inst: &Instance, tilted: &TiltedDistribution, config: &SmoothedConfig) -> Result<OuterEstimate> {
    let (d, n) = (inst.d(), inst.n());
    let inner = (0..config.r_trials as u64)
        .into_par_iter()
        .map(|r| {
            let sample = trial_perturbation(d, n, config.sigma, config.master_seed, r);
            inner_hit_probability(inst, &sample, tilted, config.epsilon)
        })
        .collect::<Result<Vec<f64>>>()?;
    let successes = inner.iter().filter(|&&p| p > 0.0).count();
    let (wilson_low, wilson_high) = wilson_interval(successes, config.r_trials);
    Ok(OuterEstimate {
        trials: config.r_trials,
        successes,
        fraction: successes as f64 / config.r_trials as f64,
        wilson_low,
        wilson_high,
        inner,
    })
}

/// A row `M_i` and two sign vectors, with the quantities shared by the
/// comparison functions.
struct Pair {
    n: usize,
    k: usize,
    m1: f64,
    m2: f64,
}

fn pair(m_i: &[f64], x: &[i8], y: &[i8], n: usize) -> Result<Pair> {
    if m_i.len() != n || x.len() != n || y.len() != n {
        return Err(GswError::DimensionMismatch(format!(
            "row, x and y must all have length n = {n}"
        )));
    }
    let k = x.iter().zip(y).filter(|(a, b)| a == b).count();
    if k == 0 || k == n {
        return Err(GswError::Domain(format!(
            "degenerate pair: overlap k = {k} (x = ±y), the comparison constant diverges"
        )));
    }
    let dot_signs = |s: &[i8]| m_i.iter().zip(s).map(|(a, &b)| a * f64::from(b)).sum::<f64>();
    Ok(Pair {
        n,
        k,
        m1: dot_signs(x),
        m2: dot_signs(y),
    })
}

/// The constant `C_i(x, y)` bounding the joint hit probability of a row by
/// the product of its marginals.
pub fn comparison_constant(m_i: &[f64], x: &[i8], y: &[i8], sigma: f64, d: usize, n: usize, epsilon: f64) -> Result<f64> {
    let p = pair(m_i, x, y, n)?;
    let (nf, kf, df) = (n as f64, p.k as f64, d as f64);
    let big = kf.max(nf - kf);
    let prefactor = nf / (2.0 * (kf * (nf - kf)).sqrt());
    let rate = df / (2.0 * nf * sigma * sigma * big);
    let e1 = rate * (nf - 2.0 * kf).abs() * (epsilon * (p.m1.abs() + p.m2.abs()) + epsilon * epsilon);
    let e2 = -rate * (nf - 2.0 * kf) * p.m1 * p.m2;
    Ok(prefactor * (e1 + e2).exp())
}

/// `P(|σ√(k/d) g₁ − (m₁+m₂)/2| + |σ√((n−k)/d) g₂ − (m₁−m₂)/2| ≤ ε)` by
/// iterated composite Gauss-Legendre quadrature.
pub fn joint_rect_probability(
    m_i: &[f64],
    x: &[i8],
    y: &[i8],
    sigma: f64,
    d: usize,
    n: usize,
    epsilon: f64,
    quad_points: usize,
) -> Result<f64> {
    let p = pair(m_i, x, y, n)?;
    if quad_points < DEFAULT_QUAD_POINTS {
        return Err(GswError::InvalidArgument(format!(
            "need at least {DEFAULT_QUAD_POINTS} quadrature points, got {quad_points}"
        )));
    }
    let s = sigma / (d as f64).sqrt();
    Ok(diamond_probability(
        0.5 * (p.m1 + p.m2),
        s * (p.k as f64).sqrt(),
        0.5 * (p.m1 - p.m2),
        s * ((p.n - p.k) as f64).sqrt(),
        epsilon,
        quad_points,
    ))
}

/// `P(|P| + |Q| ≤ ε)` for independent `P ~ N(μp, sp²)`, `Q ~ N(μq, sq²)`.
pub fn diamond_probability(mu_p: f64, sd_p: f64, mu_q: f64, sd_q: f64, epsilon: f64, quad_points: usize) -> f64 {
    if !(epsilon > 0.0) {
        return 0.0;
    }
    let rule = CompositeRule::new(quad_points);
    let density = |z: f64, mu: f64, sd: f64| {
        let t = (z - mu) / sd;
        (-0.5 * t * t).exp() / (sd * (2.0 * PI).sqrt())
    };
    let inner = |pv: f64| {
        let half = epsilon - pv.abs();
        let lo = (-half).max(mu_q - WINDOW_SD * sd_q);
        let hi = half.min(mu_q + WINDOW_SD * sd_q);
        rule.integrate(lo, hi, PANEL_SD * sd_q, |q| density(q, mu_q, sd_q))
    };
    let lo = (-epsilon).max(mu_p - WINDOW_SD * sd_p);
    let hi = epsilon.min(mu_p + WINDOW_SD * sd_p);
    let outer = |a: f64, b: f64| rule.integrate(a, b, PANEL_SD * sd_p, |pv| density(pv, mu_p, sd_p) * inner(pv));
    // The inner length has a kink at p = 0.
    let total = if lo < 0.0 && hi > 0.0 {
        outer(lo, 0.0) + outer(0.0, hi)
    } else {
        outer(lo, hi)
    };
    total.clamp(0.0, 1.0)
}

/// `P(|σ√(n/d) g₁ − m₁| ≤ ε) · P(|σ√(n/d) g₂ − m₂| ≤ ε)`.
pub fn product_rect_probability(m_i: &[f64], x: &[i8], y: &[i8], sigma: f64, d: usize, n: usize, epsilon: f64) -> Result<f64> {
    let p = pair(m_i, x, y, n)?;
    Ok(product_from_means(p.m1, p.m2, sigma, d, n, epsilon))
}

fn product_from_means(m1: f64, m2: f64, sigma: f64, d: usize, n: usize, epsilon: f64) -> f64 {
    let t = sigma * (n as f64 / d as f64).sqrt();
    let f = |m: f64| normal_interval_probability(0.0, t, m - epsilon, m + epsilon);
    f(m1) * f(m2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonCheck {
    pub k: usize,
    pub constant: f64,
    pub joint: f64,
    pub product: f64,
    /// `constant · product − joint`.
    pub slack: f64,
}

impl ComparisonCheck {
    /// Whether `joint ≤ constant · product · (1 + rel)`.
    pub fn holds(&self, rel: f64) -> bool {
        self.slack >= -rel * self.constant * self.product
    }
}

pub fn verify_comparison(m_i: &[f64], x: &[i8], y: &[i8], sigma: f64, d: usize, n: usize, epsilon: f64) -> Result<ComparisonCheck> {
    let p = pair(m_i, x, y, n)?;
    let constant = comparison_constant(m_i, x, y, sigma, d, n, epsilon)?;
    let joint = joint_rect_probability(m_i, x, y, sigma, d, n, epsilon, DEFAULT_QUAD_POINTS)?;
    let product = product_from_means(p.m1, p.m2, sigma, d, n, epsilon);
    Ok(ComparisonCheck {
        k: p.k,
        constant,
        joint,
        product,
        slack: constant * product - joint,
    })
}

/// One randomized input for the comparison inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTrial {
    pub row: Vec<f64>,
    pub x: Vec<i8>,
    pub y: Vec<i8>,
    pub sigma: f64,
    pub d: usize,
    pub n: usize,
    pub epsilon: f64,
}

impl ComparisonTrial {
    pub fn check(&self) -> Result<ComparisonCheck> {
        verify_comparison(&self.row, &self.x, &self.y, self.sigma, self.d, self.n, self.epsilon)
    }
}

/// Draws a trial with `d ∈ [2, 8]`, `n ∈ [4, 12]`, `σ ∈ [1, 3]`, row
/// entries of order `1/√d`, an overlap `k` with `|⟨x, y⟩| ≤ n/2` and
/// `0 < k < n`, and `ε` log-uniform over three decades of the noise scale.
pub fn random_comparison_trial<R: Rng + ?Sized>(rng: &mut R) -> ComparisonTrial {
    let d = rng.random_range(2..=8usize);
    let n = rng.random_range(4..=12usize);
    let sigma = rng.random_range(1.0..=3.0);
    let row: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt())
        .collect();
    let x: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
    let k_lo = n.div_ceil(4).max(1);
    let k_hi = (3 * n / 4).min(n - 1);
    let k = rng.random_range(k_lo..=k_hi);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..n - k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut y = x.clone();
    for &j in &idx[..n - k] {
        y[j] = -y[j];
    }
    let scale = sigma * (n as f64 / d as f64).sqrt();
    let epsilon = scale * 10f64.powf(rng.random_range(-2.0..=0.5));
    ComparisonTrial {
        row,
        x,
        y,
        sigma,
        d,
        n,
        epsilon,
    }
}

/// Standard Gaussian measure of the cube `[−r, r]^d`.
pub fn cube_gaussian_measure(radius: f64, d: usize) -> f64 {
    libm::erf(radius / SQRT_2).powi(d as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

/// One named inequality `lhs ≥ rhs` or `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    /// Signed distance to the boundary; nonnegative iff the condition holds.
    pub margin: f64,
    pub holds: bool,
}

impl Condition {
    fn new(name: &'static str, lhs: f64, relation: Relation, rhs: f64) -> Self {
        let margin = match relation {
            Relation::AtLeast => lhs - rhs,
            Relation::AtMost => rhs - lhs,
        };
        Condition {
            name,
            lhs,
            relation,
            rhs,
            margin,
            holds: margin >= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub d: usize,
    pub n: usize,
    pub sigma: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub cutoff_c: f64,
    pub delta: f64,
    pub aspect_l: f64,
    pub floor_c: f64,
    pub v: f64,
    /// True when `v` is the a priori bound `V ≤ d` rather than an exact value.
    pub v_is_bound: bool,
    /// Range of ε allowed by the three ε conditions.
    pub epsilon_low: f64,
    pub epsilon_high: f64,
    pub conditions: Vec<Condition>,
    pub all_hold: bool,
}

/// Evaluates the six sufficient conditions on `(d, n, σ, C, V, ε, δ)`.
pub fn admissibility_report(config: &SmoothedConfig, d: usize, n: usize, v: f64, v_is_bound: bool) -> AdmissibilityReport {
    let (df, nf) = (d as f64, n as f64);
    let SmoothedConfig {
        sigma,
        epsilon,
        cutoff_c,
        delta,
        ..
    } = *config;
    let ratio = nf / df;
    let cv = cutoff_c * v;
    let cube = cube_gaussian_measure(df.sqrt() * epsilon / (nf.sqrt() * sigma), d);
    let eps_var_cap = if cv > 0.0 {
        delta / 32.0 * sigma * sigma * ratio.powf(1.5) / cv.sqrt()
    } else {
        f64::INFINITY
    };
    let eps_dim_cap = delta.sqrt() / 4.0 * sigma * ratio * nf.powf(-0.25);
    let eps_floor = (PI / 2.0).sqrt()
        * (EPSILON_FLOOR_C * EPSILON_FLOOR_C / 2.0).exp()
        * sigma
        * ratio.sqrt()
        * (-nf / (32.0 * df)).exp();
    let conditions = vec![
        Condition::new("cube_gaussian_mass", cube, Relation::AtLeast, (-nf / 32.0).exp()),
        Condition::new("n_vs_variance", nf, Relation::AtLeast, 8.0 * df.sqrt() * (2.0 * cv).sqrt()),
        Condition::new(
            "aspect_ratio",
            ratio,
            Relation::AtLeast,
            ASPECT_L.max(ASPECT_L / (sigma * sigma)).max(16.0 * sigma * sigma),
        ),
        Condition::new("epsilon_variance_cap", epsilon, Relation::AtMost, eps_var_cap),
        Condition::new("epsilon_dimension_cap", epsilon, Relation::AtMost, eps_dim_cap),
        Condition::new("epsilon_floor", epsilon, Relation::AtLeast, eps_floor),
    ];
    let all_hold = conditions.iter().all(|c| c.holds);
    AdmissibilityReport {
        d,
        n,
        sigma,
        kappa: config.kappa,
        epsilon,
        cutoff_c,
        delta,
        aspect_l: ASPECT_L,
        floor_c: EPSILON_FLOOR_C,
        v,
        v_is_bound,
        epsilon_low: eps_floor,
        epsilon_high: eps_var_cap.min(eps_dim_cap),
        conditions,
        all_hold,
    }
}

/// [`admissibility_report`] with the exact `V` of a tilted law.
pub fn admissibility_from_tilted(config: &SmoothedConfig, inst: &Instance, tilted: &TiltedDistribution) -> AdmissibilityReport {
    admissibility_report(config, inst.d(), inst.n(), tilted.v, false)
}

/// [`admissibility_report`] with `V` replaced by its bound `d`, for sizes
/// beyond exact enumeration.
pub fn admissibility_with_bound(config: &SmoothedConfig, d: usize, n: usize) -> AdmissibilityReport {
    admissibility_report(config, d, n, d as f64, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::enumerate_walk_default;
    use crate::instance::{generate_instance, InstanceKind};
    use approx::assert_abs_diff_eq;

    fn tilted_for(inst: &Instance, sigma: f64, c: f64) -> (LeafDistribution, TiltedDistribution) {
        let leaves = enumerate_walk_default(&build_augmented(inst)).unwrap();
        let t = tilt_distribution(&leaves, inst, sigma, c).unwrap();
        (leaves, t)
    }

    #[test]
    fn augmented_shapes_and_norms() {
        let zero = Instance::from_matrix(DMatrix::zeros(2, 2)).unwrap();
        let aug = build_augmented(&zero);
        assert_eq!((aug.d(), aug.n()), (4, 2));
        assert_abs_diff_eq!(aug.column(1)[3], FRAC_1_SQRT_2);
        let unit = generate_instance(InstanceKind::RandomUnitSphere, 3, 5, 1).unwrap();
        let aug = build_augmented(&unit);
        assert_eq!((aug.d(), aug.n()), (8, 5));
        for j in 0..5 {
            assert_abs_diff_eq!(crate::linalg::norm(aug.column(j)), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_matrix_tilt_is_base_law() {
        let zero = Instance::from_matrix(DMatrix::zeros(2, 3)).unwrap();
        let (_, t) = tilted_for(&zero, 1.0, 2.0);
        assert_eq!(t.v, 0.0);
        assert_eq!(t.w, 1.0);
        assert_abs_diff_eq!(t.cutoff_set_mass, 1.0, epsilon = 1e-15);
        for pt in &t.support {
            assert_abs_diff_eq!(pt.tilted_probability, pt.base_probability, epsilon = 1e-15);
        }
    }

    #[test]
    fn huge_sigma_conditions_on_b() {
        let m = generate_instance(InstanceKind::RandomInBall, 2, 4, 5).unwrap();
        let (_, t) = tilted_for(&m, 1e9, 1.5);
        let tv: f64 = t
            .support
            .iter()
            .map(|pt| (pt.tilted_probability - pt.base_probability / t.cutoff_set_mass).abs())
            .sum();
        assert!(tv <= 1e-9);
    }

    #[test]
    fn tilt_invariants_and_w_double_entry() {
        let m = generate_instance(InstanceKind::RandomUnitSphere, 2, 4, 9).unwrap();
        let (leaves, t) = tilted_for(&m, 1.0, 2.0);
        assert_abs_diff_eq!(t.support.iter().map(|p| p.tilted_probability).sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(t.support.iter().all(|p| p.norm_sq <= t.threshold() + 1e-9));
        assert!(t.cutoff_set_mass >= 1.0 - 1.0 / 2.0 - 1e-9);
        // Direct leaf-by-leaf sum, without merging sign vectors.
        let mut v2 = 0.0;
        for leaf in &leaves.leaves {
            let mx = m.apply_signs(&leaf.x);
            v2 += leaf.probability * mx.iter().map(|a| a * a).sum::<f64>();
        }
        let mut w = 0.0;
        for leaf in &leaves.leaves {
            let mx = m.apply_signs(&leaf.x);
            let nsq: f64 = mx.iter().map(|a| a * a).sum();
            if nsq <= 2.0 * v2 {
                w += leaf.probability * (2.0 * nsq / (2.0 * 4.0)).exp();
            }
        }
        assert_abs_diff_eq!(t.v, v2 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.w, w, epsilon = 1e-12);
        assert!(t.v <= m.d() as f64 + 1e-12);
    }

    #[test]
    fn tilt_rejects_wrong_leaves() {
        let m = generate_instance(InstanceKind::RandomUnitSphere, 2, 3, 9).unwrap();
        let leaves = enumerate_walk_default(&m).unwrap();
        assert!(tilt_distribution(&leaves, &m, 1.0, 2.0).is_err());
    }

    #[test]
    fn perturbation_moments_and_determinism() {
        let (d, sigma) = (4, 2.0);
        let mut rng = stream(3, 0);
        let s = sample_perturbation(d, 250_000, sigma, &mut rng, 0);
        let k = s.r.len() as f64;
        let mean = s.r.iter().sum::<f64>() / k;
        let var = s.r.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let sd = sigma / 2.0;
        assert!(mean.abs() <= 3.0 * sd / 1e3);
        assert!((var / (sd * sd) - 1.0).abs() <= 0.01);
        assert_eq!(trial_perturbation(3, 4, 1.0, 9, 2), trial_perturbation(3, 4, 1.0, 9, 2));
        assert_ne!(trial_perturbation(3, 4, 1.0, 9, 2), trial_perturbation(3, 4, 1.0, 9, 3));
    }

    #[test]
    fn inner_and_outer_extremes() {
        let m = generate_instance(InstanceKind::RandomUnitSphere, 2, 4, 4).unwrap();
        let (_, t) = tilted_for(&m, 1.0, 2.0);
        let sample = trial_perturbation(2, 4, 1.0, 0, 0);
        assert_abs_diff_eq!(inner_hit_probability(&m, &sample, &t, 4.0 + 2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(inner_hit_probability(&m, &sample, &t, 0.0).unwrap(), 0.0);
        let mut prev = 0.0;
        for e in 0..=20 {
            let p = inner_hit_probability(&m, &sample, &t, 0.2 * e as f64).unwrap();
            assert!(p >= prev);
            prev = p;
        }
        let mut cfg = SmoothedConfig::new(1.0, 1.0, 2.0, 1e6, 30, 1, 1.0).unwrap();
        let big = outer_success_estimate(&m, &t, &cfg).unwrap();
        assert_eq!(big.fraction, 1.0);
        cfg.epsilon = 0.0;
        let zero = outer_success_estimate(&m, &t, &cfg).unwrap();
        assert_eq!(zero.fraction, 0.0);
        assert!(zero.wilson_high > 0.0 && zero.wilson_low == 0.0);
    }

    #[test]
    fn wilson_known_values() {
        let (lo, hi) = wilson_interval(5, 10);
        assert_abs_diff_eq!(lo, 0.236593090512564, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.763406909487436, epsilon = 1e-12);
        assert_eq!(wilson_interval(10, 10).1, 1.0);
    }

    #[test]
    fn epsilon_examples() {
        assert_abs_diff_eq!(epsilon_of(1.0, 10, 32.0).unwrap(), 0.15174271293851463, epsilon = 1e-15);
        assert_eq!(epsilon_of(2.0, 10, 32.0).unwrap(), 2.0 * epsilon_of(1.0, 10, 32.0).unwrap());
        assert!(epsilon_of(1.0, 1, 32.0).is_err());
        assert_eq!(kappa_n(8, 32.0), 533);
        assert_eq!(default_cutoff(2), 2.0);
    }

    #[test]
    fn comparison_constant_examples() {
        let row = [0.3, -0.2, 0.5, 0.1];
        let x = [1, 1, 1, 1];
        let y = [1, 1, -1, -1];
        assert_abs_diff_eq!(comparison_constant(&row, &x, &y, 1.0, 2, 4, 0.3).unwrap(), 1.0, epsilon = 1e-15);
        let y3 = [1, -1, -1, -1];
        let c1 = comparison_constant(&row, &x, &y3, 1.5, 2, 4, 0.3).unwrap();
        let c2 = comparison_constant(&row, &y3, &x, 1.5, 2, 4, 0.3).unwrap();
        assert_abs_diff_eq!(c1, c2, epsilon = 1e-15);
        assert!(comparison_constant(&row, &x, &x, 1.0, 2, 4, 0.3).is_err());
        assert!(comparison_constant(&row, &x, &[-1, -1, -1, -1], 1.0, 2, 4, 0.3).is_err());
    }

    #[test]
    fn product_examples() {
        let row = [0.0; 4];
        let x = [1, 1, 1, 1];
        let y = [1, 1, -1, -1];
        assert_eq!(product_rect_probability(&row, &x, &y, 1.0, 2, 4, 0.0).unwrap(), 0.0);
        let eps = (4.0f64 / 2.0).sqrt();
        let p = product_rect_probability(&row, &x, &y, 1.0, 2, 4, eps).unwrap();
        assert_abs_diff_eq!(p, 0.682689492137086f64.powi(2), epsilon = 1e-14);
    }

    // One-dimensional reduction: integrate the density of P against the
    // closed-form probability that |Q| ≤ ε − |p|.
    fn diamond_by_erf(mu_p: f64, sd_p: f64, mu_q: f64, sd_q: f64, eps: f64) -> f64 {
        let rule = CompositeRule::new(200);
        let f = |p: f64| {
            let t = (p - mu_p) / sd_p;
            let dens = (-0.5 * t * t).exp() / (sd_p * (2.0 * PI).sqrt());
            let h = eps - p.abs();
            dens * normal_interval_probability(mu_q, sd_q, -h, h)
        };
        rule.integrate(-eps, 0.0, sd_p, f) + rule.integrate(0.0, eps, sd_p, f)
    }

    #[test]
    fn joint_matches_one_dimensional_reduction() {
        for &(mp, sp, mq, sq, e) in &[
            (0.0, 1.0, 0.0, 1.0, 1.0),
            (0.4, 0.3, -0.2, 0.8, 0.5),
            (2.0, 0.5, 1.0, 0.2, 0.4),
            (0.0, 3.0, 0.0, 0.1, 20.0),
        ] {
            let a = diamond_probability(mp, sp, mq, sq, e, 64);
            let b = diamond_by_erf(mp, sp, mq, sq, e);
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn joint_limits() {
        let row = [0.2, 0.1, -0.3, 0.4];
        let x = [1, 1, -1, 1];
        let y = [1, -1, -1, 1];
        assert_eq!(joint_rect_probability(&row, &x, &y, 1.0, 2, 4, 0.0, 64).unwrap(), 0.0);
        let huge = 1e3 * (2.0f64).sqrt() + 2.0;
        assert_abs_diff_eq!(joint_rect_probability(&row, &x, &y, 1.0, 2, 4, huge, 64).unwrap(), 1.0, epsilon = 1e-8);
        assert!(joint_rect_probability(&row, &x, &y, 1.0, 2, 4, 0.5, 16).is_err());
    }

    #[test]
    fn comparison_holds_on_examples() {
        let row = [0.2, 0.1, -0.3, 0.4];
        let x = [1, 1, -1, 1];
        for y in [[1, -1, 1, 1], [1, 1, -1, -1], [-1, 1, -1, 1]] {
            for eps in [0.05, 0.5, 2.0] {
                let c = verify_comparison(&row, &x, &y, 1.0, 2, 4, eps).unwrap();
                assert!(c.holds(1e-6), "{c:?}");
            }
        }
    }

    #[test]
    fn random_trials_are_valid_and_hold() {
        let mut rng = stream(11, 0);
        for _ in 0..30 {
            let t = random_comparison_trial(&mut rng);
            let k = t.x.iter().zip(&t.y).filter(|(a, b)| a == b).count();
            let inner: i64 = t.x.iter().zip(&t.y).map(|(&a, &b)| i64::from(a * b)).sum();
            assert!(k > 0 && k < t.n);
            assert!(2 * inner.unsigned_abs() as usize <= t.n);
            let c = t.check().unwrap();
            assert!(c.holds(1e-6), "{t:?} {c:?}");
        }
    }

    #[test]
    fn cube_measure_examples() {
        assert_abs_diff_eq!(cube_gaussian_measure(1.0, 1), 0.682689492137086, epsilon = 1e-15);
        assert_abs_diff_eq!(cube_gaussian_measure(1.3, 2), cube_gaussian_measure(1.3, 1).powi(2), epsilon = 1e-15);
        assert_eq!(cube_gaussian_measure(40.0, 5), 1.0);
    }

    #[test]
    fn admissibility_examples() {
        let cfg = SmoothedConfig::new(1.0, 1.0, 2.0, 1e6, 1, 0, 1.0).unwrap();
        let r = admissibility_report(&cfg, 2, 2, 0.0, false);
        assert_eq!(r.conditions.len(), 6);
        let get = |r: &AdmissibilityReport, name: &str| r.conditions.iter().find(|c| c.name == name).unwrap().clone();
        assert!(get(&r, "epsilon_variance_cap").holds);
        assert!(!get(&r, "epsilon_dimension_cap").holds);
        assert!(!get(&r, "aspect_ratio").holds);

        let d = 8;
        let cfg = SmoothedConfig::for_dimension(d, 1.0, 32.0, 1, 0).unwrap();
        let n = kappa_n(d, 32.0);
        let r = admissibility_with_bound(&cfg, d, n);
        assert!(r.v_is_bound);
        for c in &r.conditions {
            assert!(c.margin.is_finite());
            assert_eq!(c.holds, c.margin >= 0.0);
        }
        assert_eq!(r.all_hold, r.conditions.iter().all(|c| c.holds));
    }

    #[test]
    fn config_validation() {
        assert!(SmoothedConfig::new(0.5, 1.0, 2.0, 0.1, 1, 0, 1.0).is_err());
        assert!(SmoothedConfig::new(1.0, 0.5, 2.0, 0.1, 1, 0, 1.0).is_err());
        assert!(SmoothedConfig::new(1.0, 1.0, 1.0, 0.1, 1, 0, 1.0).is_err());
        assert!(SmoothedConfig::new(1.0, 1.0, 2.0, 0.0, 1, 0, 1.0).is_err());
        assert!(SmoothedConfig::new(1.0, 1.0, 2.0, 0.1, 0, 0, 1.0).is_err());
    }
}
