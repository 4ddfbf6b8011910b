//! Post-hoc orthogonal decomposition of a finished walk.
//!
//! Coordinates are ranked by the order in which they were fixed: the first
//! pivot takes the top position, coordinates frozen in a step take the next
//! positions in decreasing index order, and a new pivot takes the next free
//! position when it first becomes pivot. Gram-Schmidt over the columns in
//! that order (lowest position first) yields an orthonormal family in which
//! every step direction `M u_t` has a short explicit expansion, and whose
//! blocks (one per pivot and step) define the variance proxy `Z_v`.
//!
//! All positions are 0-based: position `r` here is `r + 1` in one-based
//! notation.

use serde::Serialize;

use crate::error::{GswError, Result};
use crate::instance::Instance;
use crate::linalg::{axpy, dot, norm};
use crate::walk::WalkTrace;

/// Residuals shorter than this fraction of their column norm count as zero.
pub const ZERO_RESIDUAL: f64 = 1e-10;

/// Positions of the coordinates fixed in one step while `pivot` was pivot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    /// 1-based step index; the pivot's own singleton block sits at
    /// `start_step - 1`.
    pub step: usize,
    pub positions: Vec<usize>,
}

/// The block structure attached to one pivot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PivotBlocks {
    pub pivot: usize,
    /// First step at which `pivot` was pivot.
    pub start_step: usize,
    /// Singleton block first, then one block per step in which `pivot` was
    /// pivot (possibly empty).
    pub blocks: Vec<Block>,
}

impl PivotBlocks {
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().flat_map(|b| b.positions.iter().copied())
    }
}

/// The analysis skeleton of one walk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthoTrace {
    /// `sigma[r]` is the coordinate at position `r`.
    pub sigma: Vec<usize>,
    /// Inverse of `sigma`.
    pub position: Vec<usize>,
    /// `w[r]` is the orthonormal direction at position `r`, or exactly zero.
    pub w: Vec<Vec<f64>>,
    pub pivots: Vec<PivotBlocks>,
    /// Number of blocks with a nonzero direction, per entry of `pivots`.
    pub nontrivial: Vec<usize>,
    /// Total count of nontrivial blocks.
    pub hat_t: usize,
}

/// Assigns σ-positions in fixing order, from the top position down.
pub fn build_sigma_order(trace: &WalkTrace) -> Result<Vec<usize>> {
    let n = trace.n();
    let mut order = Vec::with_capacity(n);
    let mut assigned = vec![false; n];
    let mut assign = |j: usize, order: &mut Vec<usize>| -> Result<()> {
        if j >= n || std::mem::replace(&mut assigned[j], true) {
            return Err(GswError::ContractViolation(format!(
                "coordinate {j} ordered twice or out of range"
            )));
        }
        order.push(j);
        Ok(())
    };
    let mut current = None;
    for step in &trace.steps {
        if current != Some(step.pivot) {
            assign(step.pivot, &mut order)?;
            current = Some(step.pivot);
        }
        // Frozen lists are stored in decreasing index order.
        for &j in step.frozen.iter().filter(|&&j| j != step.pivot) {
            assign(j, &mut order)?;
        }
    }
    if order.len() != n {
        return Err(GswError::ContractViolation(format!(
            "frozen sets cover {} of {n} coordinates",
            order.len()
        )));
    }
    order.reverse();
    Ok(order)
}

fn inverse(sigma: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; sigma.len()];
    for (r, &j) in sigma.iter().enumerate() {
        pos[j] = r;
    }
    pos
}

/// Gram-Schmidt over the columns in σ-order.
///
/// Each residual is orthogonalized twice against the accepted directions,
/// which keeps the family orthonormal to working precision.
pub fn gram_schmidt_sequence(inst: &Instance, sigma: &[usize]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::with_capacity(sigma.len());
    for &j in sigma {
        let col = inst.column(j);
        let col_norm = norm(col);
        let mut r = col.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
            }
        }
        let rn = norm(&r);
        if col_norm == 0.0 || rn <= ZERO_RESIDUAL * col_norm {
            out.push(vec![0.0; inst.d()]);
        } else {
            r.iter_mut().for_each(|x| *x /= rn);
            basis.push(r.clone());
            out.push(r);
        }
    }
    out
}

/// Splits the positions into per-pivot, per-step blocks.
pub fn partition_q(trace: &WalkTrace, sigma: &[usize]) -> Result<Vec<PivotBlocks>> {
    let n = trace.n();
    if sigma.len() != n {
        return Err(GswError::ContractViolation(format!(
            "order has {} entries for {n} coordinates",
            sigma.len()
        )));
    }
    let position = inverse(sigma);
    let mut pivots: Vec<PivotBlocks> = Vec::new();
    for step in &trace.steps {
        if pivots.last().map(|p| p.pivot) != Some(step.pivot) {
            if pivots.iter().any(|p| p.pivot == step.pivot) {
                return Err(GswError::ContractViolation(format!(
                    "coordinate {} became pivot twice",
                    step.pivot
                )));
            }
            pivots.push(PivotBlocks {
                pivot: step.pivot,
                start_step: step.t,
                blocks: vec![Block {
                    step: step.t - 1,
                    positions: vec![position[step.pivot]],
                }],
            });
        }
        let current = pivots.last_mut().expect("pushed above");
        current.blocks.push(Block {
            step: step.t,
            positions: step
                .frozen
                .iter()
                .filter(|&&j| j != step.pivot)
                .map(|&j| position[j])
                .collect(),
        });
    }
    let mut covered = vec![false; n];
    for r in pivots.iter().flat_map(PivotBlocks::positions) {
        if std::mem::replace(&mut covered[r], true) {
            return Err(GswError::ContractViolation(format!(
                "position {r} lies in two blocks"
            )));
        }
    }
    if covered.iter().any(|c| !c) {
        return Err(GswError::ContractViolation(
            "blocks do not cover every position".into(),
        ));
    }
    Ok(pivots)
}

fn is_zero(w: &[f64]) -> bool {
    w.iter().all(|&x| x == 0.0)
}

/// Counts, per pivot, the blocks that contribute at least one nonzero
/// direction, and their total.
pub fn count_nontrivial(pivots: &[PivotBlocks], w: &[Vec<f64>]) -> (Vec<usize>, usize) {
    let per_pivot: Vec<usize> = pivots
        .iter()
        .map(|p| {
            p.blocks
                .iter()
                .filter(|b| b.positions.iter().any(|&r| !is_zero(&w[r])))
                .count()
        })
        .collect();
    let total = per_pivot.iter().sum();
    (per_pivot, total)
}

impl OrthoTrace {
    /// Reconstructs the decomposition of `trace`, a walk on `inst`.
    pub fn build(inst: &Instance, trace: &WalkTrace) -> Result<Self> {
        if trace.n() != inst.n() {
            return Err(GswError::DimensionMismatch(format!(
                "trace has {} coordinates, instance has {}",
                trace.n(),
                inst.n()
            )));
        }
        let sigma = build_sigma_order(trace)?;
        let w = gram_schmidt_sequence(inst, &sigma);
        let pivots = partition_q(trace, &sigma)?;
        let (nontrivial, hat_t) = count_nontrivial(&pivots, &w);
        Ok(OrthoTrace {
            position: inverse(&sigma),
            sigma,
            w,
            pivots,
            nontrivial,
            hat_t,
        })
    }

    pub fn pivot_blocks(&self, pivot: usize) -> Option<&PivotBlocks> {
        self.pivots.iter().find(|p| p.pivot == pivot)
    }

    /// Nonzero directions of the family.
    pub fn nonzero_w(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.w.iter().filter(|w| !is_zero(w))
    }
}

/// The variance proxy
/// `Z_v = Σ_p ( Σ_blocks | Σ_{r∈block} ⟨w_r, v_p⟩⟨w_r, v⟩ | )²`.
pub fn compute_z(inst: &Instance, ortho: &OrthoTrace, v: &[f64]) -> f64 {
    ortho
        .pivots
        .iter()
        .map(|p| {
            let vp = inst.column(p.pivot);
            let s: f64 = p
                .blocks
                .iter()
                .map(|b| {
                    b.positions
                        .iter()
                        .map(|&r| dot(&ortho.w[r], vp) * dot(&ortho.w[r], v))
                        .sum::<f64>()
                        .abs()
                })
                .sum();
            s * s
        })
        .sum()
}

/// `Z_{e_i}` for every coordinate direction `i < d`.
pub fn coordinate_z(inst: &Instance, ortho: &OrthoTrace) -> Vec<f64> {
    let d = inst.d();
    // Z_{e_i} only needs the i-th entries of the directions.
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(ortho.pivots.len());
    for p in &ortho.pivots {
        let vp = inst.column(p.pivot);
        alpha.push(p.positions().map(|r| dot(&ortho.w[r], vp)).collect());
    }
    (0..d)
        .map(|i| {
            ortho
                .pivots
                .iter()
                .zip(&alpha)
                .map(|(p, a)| {
                    let mut k = 0;
                    let mut s = 0.0;
                    for b in &p.blocks {
                        let mut inner = 0.0;
                        for &r in &b.positions {
                            inner += a[k] * ortho.w[r][i];
                            k += 1;
                        }
                        s += inner.abs();
                    }
                    s * s
                })
                .sum()
        })
        .collect()
}

/// Largest residual `‖M u_t − Σ_{r=ℓ_t}^{g_t} ⟨w_r, v_{p_t}⟩ w_r‖₂` over the
/// steps of the walk, where `ℓ_t` is the active count before step `t` and
/// `g_t` the pivot's position (both one-based in that formula).
pub fn verify_direction_expansion(inst: &Instance, trace: &WalkTrace, ortho: &OrthoTrace) -> f64 {
    let mut active = inst.n();
    let mut worst = 0.0f64;
    for step in &trace.steps {
        let vp = inst.column(step.pivot);
        let g = ortho.position[step.pivot];
        let mut resid = inst.apply(&step.u);
        for r in (active - 1)..=g {
            let c = dot(&ortho.w[r], vp);
            axpy(-c, &ortho.w[r], &mut resid);
        }
        worst = worst.max(norm(&resid));
        active -= step.frozen.len();
    }
    worst
}

/// Projection of `v` onto the span of the directions in `pivot`'s blocks.
pub fn project_pivot(ortho: &OrthoTrace, pivot: usize, v: &[f64]) -> Result<Vec<f64>> {
    let blocks = ortho
        .pivot_blocks(pivot)
        .ok_or_else(|| GswError::InvalidArgument(format!("{pivot} was never a pivot")))?;
    let mut out = vec![0.0; v.len()];
    for r in blocks.positions() {
        let c = dot(&ortho.w[r], v);
        axpy(c, &ortho.w[r], &mut out);
    }
    Ok(out)
}
