//! Exact law of the walk on small instances.
//!
//! Both branches of every step are expanded, so the resulting leaves carry
//! the exact probability of each outcome (up to floating point). Expectations
//! over the leaves are exact expectations over the walk, which turns the
//! martingale and subgaussian statements into finite sums.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GswError, Result};
use crate::instance::Instance;
use crate::linalg::dot;
use crate::ortho::{compute_z, OrthoTrace};
use crate::walk::{apply_branch, plan_step, Branch, StepRecord, WalkState, WalkTrace};

pub const DEFAULT_PRUNE_TOL: f64 = 1e-15;
pub const DEFAULT_DEPTH_CAP: usize = 16;
/// Largest n accepted by [`brute_force_min_discrepancy`].
pub const BRUTE_FORCE_MAX_N: usize = 20;

// Subtrees rooted above this depth are expanded in parallel.
const PARALLEL_DEPTH: usize = 4;

/// One complete outcome of the walk.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub x: Vec<i8>,
    pub probability: f64,
    /// Branch taken at each step, root first.
    pub path: Vec<Branch>,
    pub trace: WalkTrace,
    pub ortho: OrthoTrace,
}

/// All outcomes of the walk with their probabilities, in branch order
/// (plus branch first at every step).
#[derive(Debug, Clone)]
pub struct LeafDistribution {
    pub d: usize,
    pub n: usize,
    pub leaves: Vec<Leaf>,
    /// Probability mass of branches dropped for falling below the prune
    /// tolerance.
    pub pruned_mass: f64,
}

impl LeafDistribution {
    pub fn total_probability(&self) -> f64 {
        self.leaves.iter().map(|l| l.probability).sum()
    }
}

struct Expansion {
    leaves: Vec<Leaf>,
    pruned: f64,
}

fn expand(
    inst: &Instance,
    state: WalkState,
    steps: Vec<StepRecord>,
    path: Vec<Branch>,
    probability: f64,
    prune_tol: f64,
) -> Result<Expansion> {
    if state.is_finished() {
        let trace = WalkTrace::from_steps(inst.n(), steps)?;
        let ortho = OrthoTrace::build(inst, &trace)?;
        return Ok(Expansion {
            leaves: vec![Leaf {
                x: trace.final_x.clone(),
                probability,
                path,
                trace,
                ortho,
            }],
            pruned: 0.0,
        });
    }
    let plan = plan_step(inst, &state)?;
    let child = |branch: Branch| -> Result<Expansion> {
        let p = probability * plan.probability(branch);
        if p < prune_tol {
            return Ok(Expansion {
                leaves: Vec::new(),
                pruned: p,
            });
        }
        let (next, record) = apply_branch(&state, &plan, branch);
        let mut steps = steps.clone();
        steps.push(record);
        let mut path = path.clone();
        path.push(branch);
        expand(inst, next, steps, path, p, prune_tol)
    };
    let (plus, minus) = if path.len() < PARALLEL_DEPTH {
        rayon::join(|| child(Branch::Plus), || child(Branch::Minus))
    } else {
        (child(Branch::Plus), child(Branch::Minus))
    };
    let (mut plus, minus) = (plus?, minus?);
    plus.leaves.extend(minus.leaves);
    plus.pruned += minus.pruned;
    Ok(plus)
}

/// Expands every branch of the walk on `inst`.
pub fn enumerate_walk(inst: &Instance, prune_tol: f64, depth_cap: usize) -> Result<LeafDistribution> {
    if inst.n() > depth_cap {
        return Err(GswError::TooLarge(format!(
            "exact enumeration of n = {} exceeds the depth cap {depth_cap} (up to 2^n leaves)",
            inst.n()
        )));
    }
    let root = expand(
        inst,
        WalkState::initial(inst.n()),
        Vec::new(),
        Vec::new(),
        1.0,
        prune_tol,
    )?;
    Ok(LeafDistribution {
        d: inst.d(),
        n: inst.n(),
        leaves: root.leaves,
        pruned_mass: root.pruned,
    })
}

/// [`enumerate_walk`] with the default prune tolerance and depth cap.
pub fn enumerate_walk_default(inst: &Instance) -> Result<LeafDistribution> {
    enumerate_walk(inst, DEFAULT_PRUNE_TOL, DEFAULT_DEPTH_CAP)
}

/// `Σ p(leaf) f(leaf)`, summed from the most to the least likely leaf.
pub fn exact_expectation(dist: &LeafDistribution, f: impl Fn(&Leaf) -> f64) -> f64 {
    let mut order: Vec<usize> = (0..dist.leaves.len()).collect();
    order.sort_by(|&a, &b| dist.leaves[b].probability.total_cmp(&dist.leaves[a].probability));
    order
        .into_iter()
        .map(|i| {
            let leaf = &dist.leaves[i];
            leaf.probability * f(leaf)
        })
        .sum()
}

/// `|E ⟨M X, v⟩|`, which vanishes because the coloring is a martingale
/// started at zero.
pub fn verify_martingale(dist: &LeafDistribution, inst: &Instance, v: &[f64]) -> f64 {
    exact_expectation(dist, |leaf| dot(&inst.apply_signs(&leaf.x), v)).abs()
}

/// `E exp(λ⟨M X, v⟩ − λ² Z_v / 2)` with each leaf's own `Z_v`.
pub fn verify_subgaussian(dist: &LeafDistribution, inst: &Instance, v: &[f64], lambda: f64) -> Result<f64> {
    let mut exponents = Vec::with_capacity(dist.leaves.len());
    for leaf in &dist.leaves {
        let e = lambda * dot(&inst.apply_signs(&leaf.x), v) - 0.5 * lambda * lambda * compute_z(inst, &leaf.ortho, v);
        if !(e.abs() <= 700.0) {
            return Err(GswError::Domain(format!("exponent {e} would overflow")));
        }
        exponents.push(e);
    }
    let by_leaf: HashMap<*const Leaf, f64> = dist
        .leaves
        .iter()
        .zip(exponents)
        .map(|(l, e)| (l as *const Leaf, e))
        .collect();
    Ok(exact_expectation(dist, |leaf| by_leaf[&(leaf as *const Leaf)].exp()))
}

/// Worst deviations found by [`conditional_increment_check`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IncrementDeviation {
    /// Largest `|E[x_p − z | node]|` over internal nodes.
    pub max_mean: f64,
    /// Largest `|P(x_p = +1 | node) − (1+z)/2|` over internal nodes.
    pub max_probability: f64,
    pub nodes: usize,
}

impl IncrementDeviation {
    pub fn max(&self) -> f64 {
        self.max_mean.max(self.max_probability)
    }
}

/// Checks, at every internal node of the tree, that the remaining movement
/// of the current pivot is the two-point law `{−1−z, 1−z}` with
/// probabilities `(1−z)/2` and `(1+z)/2`, where `z` is the pivot's value at
/// the node.
pub fn conditional_increment_check(dist: &LeafDistribution) -> IncrementDeviation {
    struct Node {
        pivot: usize,
        z: f64,
        mass: f64,
        plus_mass: f64,
        weighted_move: f64,
    }
    let mut nodes: HashMap<&[Branch], Node> = HashMap::new();
    for leaf in &dist.leaves {
        let mut x = vec![0.0; dist.n];
        let mut node_prob = 1.0;
        for (depth, step) in leaf.trace.steps.iter().enumerate() {
            let key = &leaf.path[..depth];
            let z = x[step.pivot];
            let final_p = f64::from(leaf.x[step.pivot]);
            let entry = nodes.entry(key).or_insert(Node {
                pivot: step.pivot,
                z,
                mass: node_prob,
                plus_mass: 0.0,
                weighted_move: 0.0,
            });
            debug_assert_eq!(entry.pivot, step.pivot);
            if final_p > 0.0 {
                entry.plus_mass += leaf.probability;
            }
            entry.weighted_move += leaf.probability * (final_p - z);
            for (xi, ui) in x.iter_mut().zip(&step.u) {
                *xi += step.chosen_delta * ui;
            }
            for &j in &step.frozen {
                x[j] = x[j].signum();
            }
            node_prob *= step.choice_probability;
        }
    }
    let mut dev = IncrementDeviation {
        nodes: nodes.len(),
        ..Default::default()
    };
    for node in nodes.values() {
        dev.max_mean = dev.max_mean.max((node.weighted_move / node.mass).abs());
        dev.max_probability = dev
            .max_probability
            .max((node.plus_mass / node.mass - 0.5 * (1.0 + node.z)).abs());
    }
    dev
}

/// Minimum of `‖M x‖_∞` over all sign vectors, with the lexicographically
/// smallest minimizer (−1 before +1).
pub fn brute_force_min_discrepancy(inst: &Instance) -> Result<(f64, Vec<i8>)> {
    let n = inst.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(GswError::TooLarge(format!(
            "brute force over 2^{n} sign vectors refused (limit n <= {BRUTE_FORCE_MAX_N})"
        )));
    }
    let signs = |mask: u64| -> Vec<i8> {
        (0..n)
            .map(|i| if mask >> (n - 1 - i) & 1 == 1 { 1 } else { -1 })
            .collect()
    };
    // Mask order is lexicographic order of the sign vectors; ties keep the
    // smaller mask.
    let (value, mask) = (0..1u64 << n)
        .into_par_iter()
        .map(|mask| (inst.discrepancy(&signs(mask)), mask))
        .reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    Ok((value, signs(mask)))
}
