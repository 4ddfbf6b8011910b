//! The Gram-Schmidt walk.
//!
//! Starting from the all-zero fractional coloring, each step moves along the
//! direction `u` that has `u(pivot) = 1`, is supported on the active (not yet
//! frozen) coordinates, and minimizes `‖M u‖₂`. The step length is one of the
//! two extreme feasible lengths, chosen at random so that the step has mean
//! zero. At least one coordinate reaches ±1 and freezes per step.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GswError, Result};
use crate::instance::Instance;
use crate::linalg;

/// Coordinates within this distance of ±1 are snapped to ±1 and frozen.
pub const FREEZE_TOLERANCE: f64 = 1e-9;

/// Fractional coloring in the middle of a walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    /// 1-based index of the next step.
    pub t: usize,
    pub x: Vec<f64>,
    /// Active coordinates, ascending.
    pub active: Vec<usize>,
}

impl WalkState {
    pub fn initial(n: usize) -> Self {
        WalkState {
            t: 1,
            x: vec![0.0; n],
            active: (0..n).collect(),
        }
    }

    /// The pivot is always the largest active index.
    pub fn pivot(&self) -> Option<usize> {
        self.active.last().copied()
    }

    pub fn is_finished(&self) -> bool {
        self.active.is_empty()
    }
}

/// Which end of the feasible interval a step moves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

/// Everything about a step that does not depend on the random choice.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub pivot: usize,
    pub u: Vec<f64>,
    pub delta_minus: f64,
    pub delta_plus: f64,
}

impl StepPlan {
    /// Probability of taking `branch`. The plus step is taken with
    /// probability `δ⁻/(δ⁻+δ⁺)`, which makes the expected step zero.
    pub fn probability(&self, branch: Branch) -> f64 {
        let total = self.delta_minus + self.delta_plus;
        match branch {
            Branch::Plus => self.delta_minus / total,
            Branch::Minus => self.delta_plus / total,
        }
    }

    pub fn delta(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.delta_plus,
            Branch::Minus => -self.delta_minus,
        }
    }
}

/// One executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub pivot: usize,
    pub u: Vec<f64>,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub chosen_delta: f64,
    pub choice_probability: f64,
    /// Coordinates frozen by this step, in decreasing index order.
    pub frozen: Vec<usize>,
}

impl StepRecord {
    pub fn branch(&self) -> Branch {
        if self.chosen_delta > 0.0 {
            Branch::Plus
        } else {
            Branch::Minus
        }
    }
}

/// Complete record of one walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub steps: Vec<StepRecord>,
    pub final_x: Vec<i8>,
}

impl WalkTrace {
    /// Number of steps `T`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn n(&self) -> usize {
        self.final_x.len()
    }

    /// Rebuilds a trace from its steps by replaying them from zero.
    pub fn from_steps(n: usize, steps: Vec<StepRecord>) -> Result<Self> {
        let state = replay(n, &steps)?;
        if !state.is_finished() {
            return Err(GswError::ContractViolation(format!(
                "{} coordinates still active after the last step",
                state.active.len()
            )));
        }
        let final_x = signs_of(&state.x)?;
        Ok(WalkTrace { steps, final_x })
    }

    /// Checks the structural invariants of a finished walk.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let replayed = replay(n, &self.steps)?;
        if !replayed.is_finished() || signs_of(&replayed.x)? != self.final_x {
            return Err(GswError::ContractViolation(
                "replaying the steps does not reproduce final_x".into(),
            ));
        }
        let mut seen = vec![false; n];
        for step in &self.steps {
            if step.u[step.pivot] != 1.0 {
                return Err(GswError::ContractViolation(format!(
                    "step {}: u(pivot) = {}",
                    step.t, step.u[step.pivot]
                )));
            }
            if !(step.delta_plus > 0.0 && step.delta_minus > 0.0) {
                return Err(GswError::ContractViolation(format!(
                    "step {}: non-positive delta",
                    step.t
                )));
            }
            for &j in &step.frozen {
                if std::mem::replace(&mut seen[j], true) {
                    return Err(GswError::ContractViolation(format!(
                        "coordinate {j} frozen twice"
                    )));
                }
            }
        }
        if self.steps.len() > n || seen.iter().any(|s| !s) {
            return Err(GswError::ContractViolation(
                "frozen sets do not partition the coordinates".into(),
            ));
        }
        Ok(())
    }

    /// Active set before step `t` (1-based), ascending.
    pub fn active_before(&self, t: usize) -> Vec<usize> {
        let mut frozen = vec![false; self.n()];
        for step in &self.steps[..t - 1] {
            for &j in &step.frozen {
                frozen[j] = true;
            }
        }
        (0..self.n()).filter(|&j| !frozen[j]).collect()
    }

    /// Fractional coloring before step `t` (1-based), by replay.
    pub fn state_before(&self, t: usize) -> Result<WalkState> {
        replay(self.n(), &self.steps[..t - 1])
    }
}

fn signs_of(x: &[f64]) -> Result<Vec<i8>> {
    x.iter()
        .map(|&v| {
            if v == 1.0 {
                Ok(1)
            } else if v == -1.0 {
                Ok(-1)
            } else {
                Err(GswError::ContractViolation(format!(
                    "final coordinate {v} is not ±1"
                )))
            }
        })
        .collect()
}

/// Replays recorded steps from the zero coloring.
pub fn replay(n: usize, steps: &[StepRecord]) -> Result<WalkState> {
    let mut state = WalkState::initial(n);
    for step in steps {
        if step.u.len() != n {
            return Err(GswError::DimensionMismatch(format!(
                "step {} has a direction of length {}, expected {n}",
                step.t,
                step.u.len()
            )));
        }
        if state.pivot() != Some(step.pivot) {
            return Err(GswError::ContractViolation(format!(
                "step {}: recorded pivot {} but the largest active index is {:?}",
                step.t,
                step.pivot,
                state.pivot()
            )));
        }
        let (next, frozen) = advance(&state, &step.u, step.chosen_delta);
        if frozen != step.frozen {
            return Err(GswError::ContractViolation(format!(
                "step {}: replay froze {frozen:?}, trace records {:?}",
                step.t, step.frozen
            )));
        }
        state = next;
    }
    Ok(state)
}

/// The minimizer of `‖M u‖₂` subject to `u(pivot) = 1` and `u = 0` off the
/// active set. Ties under linear dependence are broken by minimum norm.
pub fn min_norm_direction(inst: &Instance, active: &[usize], pivot: usize) -> Result<Vec<f64>> {
    if !active.contains(&pivot) {
        return Err(GswError::InvalidArgument(format!(
            "pivot {pivot} is not active"
        )));
    }
    let n = inst.n();
    let d = inst.d();
    let mut u = vec![0.0; n];
    u[pivot] = 1.0;
    let others: Vec<usize> = active.iter().copied().filter(|&i| i != pivot).collect();
    if others.is_empty() {
        return Ok(u);
    }
    let a = DMatrix::from_fn(d, others.len(), |i, k| inst.column(others[k])[i]);
    let b = DVector::from_iterator(d, inst.column(pivot).iter().map(|x| -x));
    let c = linalg::min_norm_least_squares(&a, &b, linalg::RCOND);
    for (&i, &ci) in others.iter().zip(c.iter()) {
        u[i] = ci;
    }
    Ok(u)
}

/// Returns `(δ⁻, δ⁺)`, the distances from 0 to the ends of
/// `{δ : x + δu ∈ [−1,1]ⁿ}`.
pub fn feasible_interval(x: &[f64], u: &[f64]) -> Result<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (i, (&xi, &ui)) in x.iter().zip(u).enumerate() {
        if ui == 0.0 {
            continue;
        }
        if xi.abs() >= 1.0 {
            return Err(GswError::ContractViolation(format!(
                "coordinate {i} is already at {xi} but the direction moves it"
            )));
        }
        let (a, b) = ((-1.0 - xi) / ui, (1.0 - xi) / ui);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if !(lo < 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(GswError::ContractViolation(format!(
            "degenerate feasible interval [{lo}, {hi}]"
        )));
    }
    Ok((-lo, hi))
}

/// Computes the direction and feasible step lengths for the next step.
pub fn plan_step(inst: &Instance, state: &WalkState) -> Result<StepPlan> {
    let pivot = state
        .pivot()
        .ok_or_else(|| GswError::InvalidArgument("walk already finished".into()))?;
    let u = min_norm_direction(inst, &state.active, pivot)?;
    let (delta_minus, delta_plus) = feasible_interval(&state.x, &u)?;
    Ok(StepPlan {
        pivot,
        u,
        delta_minus,
        delta_plus,
    })
}

/// Moves `state` by `delta * u`, snapping and freezing coordinates that reach
/// the boundary. Returns the new state and the frozen coordinates in
/// decreasing order.
fn advance(state: &WalkState, u: &[f64], delta: f64) -> (WalkState, Vec<usize>) {
    let mut x = state.x.clone();
    for &i in &state.active {
        x[i] += delta * u[i];
    }
    let mut frozen: Vec<usize> = state
        .active
        .iter()
        .copied()
        .filter(|&i| x[i].abs() >= 1.0 - FREEZE_TOLERANCE)
        .collect();
    if frozen.is_empty() {
        // Rounding kept the binding coordinate inside the tolerance band;
        // freeze whichever active coordinate got closest to the boundary.
        let closest = state
            .active
            .iter()
            .copied()
            .max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
            .expect("active set is nonempty");
        frozen.push(closest);
    }
    for &i in &frozen {
        x[i] = if x[i] > 0.0 { 1.0 } else { -1.0 };
    }
    frozen.reverse();
    let active = state
        .active
        .iter()
        .copied()
        .filter(|i| !frozen.contains(i))
        .collect();
    (
        WalkState {
            t: state.t + 1,
            x,
            active,
        },
        frozen,
    )
}

/// Executes a planned step along the given branch.
pub fn apply_branch(state: &WalkState, plan: &StepPlan, branch: Branch) -> (WalkState, StepRecord) {
    let delta = plan.delta(branch);
    let (next, frozen) = advance(state, &plan.u, delta);
    let record = StepRecord {
        t: state.t,
        pivot: plan.pivot,
        u: plan.u.clone(),
        delta_plus: plan.delta_plus,
        delta_minus: plan.delta_minus,
        chosen_delta: delta,
        choice_probability: plan.probability(branch),
        frozen,
    };
    (next, record)
}

/// One random step of the walk.
pub fn walk_step<R: Rng + ?Sized>(
    inst: &Instance,
    state: &WalkState,
    rng: &mut R,
) -> Result<(WalkState, StepRecord)> {
    let plan = plan_step(inst, state)?;
    let branch = if rng.random::<f64>() < plan.probability(Branch::Plus) {
        Branch::Plus
    } else {
        Branch::Minus
    };
    Ok(apply_branch(state, &plan, branch))
}

/// Runs the walk to completion.
pub fn run_walk<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<WalkTrace> {
    let mut state = WalkState::initial(inst.n());
    let mut steps = Vec::new();
    while !state.is_finished() {
        let (next, record) = walk_step(inst, &state, rng)?;
        steps.push(record);
        state = next;
    }
    let final_x = signs_of(&state.x)?;
    Ok(WalkTrace { steps, final_x })
}
