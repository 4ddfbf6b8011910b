//! Problem instances: the d×n matrix whose columns are the vectors to balance.
//!
//! The on-disk format is plain text. Line 1 holds `d n`; each of the next `d`
//! lines holds the `n` entries of one row, so row `i`, column `j` is entry `i`
//! of the vector `v_j`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GswError, Result};
use crate::rng;

/// Slack on the unit-norm hypothesis, so text round-trips never reject a
/// column that was valid before it was written.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// A d×n matrix of column vectors with Euclidean norm at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    matrix: DMatrix<f64>,
}

/// Families accepted by [`generate_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Identity,
    RandomUnitSphere,
    RandomInBall,
    DuplicatedColumn,
    SignColumns,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 5] = [
        InstanceKind::Identity,
        InstanceKind::RandomUnitSphere,
        InstanceKind::RandomInBall,
        InstanceKind::DuplicatedColumn,
        InstanceKind::SignColumns,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InstanceKind::Identity => "identity",
            InstanceKind::RandomUnitSphere => "random_unit_sphere",
            InstanceKind::RandomInBall => "random_in_ball",
            InstanceKind::DuplicatedColumn => "duplicated_column",
            InstanceKind::SignColumns => "sign_columns",
        }
    }
}

impl std::fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstanceKind {
    type Err = GswError;

    fn from_str(s: &str) -> Result<Self> {
        InstanceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s || k.as_str().replace('_', "-") == s)
            .ok_or_else(|| GswError::InvalidArgument(format!("unknown instance kind {s:?}")))
    }
}

impl Instance {
    /// Builds an instance from a d×n matrix, validating every invariant.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let (d, n) = matrix.shape();
        if d == 0 || n == 0 {
            return Err(GswError::DimensionMismatch(format!(
                "instance must have d >= 1 and n >= 1, got d={d}, n={n}"
            )));
        }
        if let Some(pos) = matrix.iter().position(|x| !x.is_finite()) {
            return Err(GswError::InvalidArgument(format!(
                "non-finite entry in column {}",
                pos / d
            )));
        }
        for (j, col) in matrix.column_iter().enumerate() {
            let norm = col.norm();
            if norm > 1.0 + NORM_TOLERANCE {
                return Err(GswError::NormViolation { column: j, norm });
            }
        }
        Ok(Instance { matrix })
    }

    /// Builds an instance from a list of columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.len();
        let d = columns.first().map_or(0, Vec::len);
        if let Some((j, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != d) {
            return Err(GswError::DimensionMismatch(format!(
                "column {j} has {} entries, expected {d}",
                c.len()
            )));
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::from_matrix(DMatrix::from_vec(d, n, flat))
    }

    pub fn d(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// The vector `v_j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.d();
        &self.matrix.as_slice()[j * d..(j + 1) * d]
    }

    /// `M x` for a real coefficient vector of length n.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n());
        let mut out = vec![0.0; self.d()];
        for (j, &c) in x.iter().enumerate() {
            if c != 0.0 {
                for (o, &m) in out.iter_mut().zip(self.column(j)) {
                    *o += c * m;
                }
            }
        }
        out
    }

    /// `M x` for a sign vector.
    pub fn apply_signs(&self, x: &[i8]) -> Vec<f64> {
        let xs: Vec<f64> = x.iter().map(|&s| f64::from(s)).collect();
        self.apply(&xs)
    }

    /// Discrepancy `‖M x‖_∞` of a sign vector.
    pub fn discrepancy(&self, x: &[i8]) -> f64 {
        inf_norm(&self.apply_signs(x))
    }

    /// Row `i` of the matrix (the vector of i-th coordinates of all columns).
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.matrix.row(i).iter().copied().collect()
    }

    /// Dimension of the span of the columns, computed from singular values.
    pub fn rank(&self) -> usize {
        let sv = crate::linalg::singular_values(&self.matrix);
        let max = sv.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > 1e-10 * max).count()
    }
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Generates an instance of the given family. Deterministic in all arguments.
pub fn generate_instance(kind: InstanceKind, d: usize, n: usize, seed: u64) -> Result<Instance> {
    if d == 0 || n == 0 {
        return Err(GswError::DimensionMismatch(format!(
            "need d >= 1 and n >= 1, got d={d}, n={n}"
        )));
    }
    let mut rng = rng::stream(seed, rng::INSTANCE_STREAM);
    let matrix = match kind {
        InstanceKind::Identity => {
            if n > d {
                return Err(GswError::DimensionMismatch(format!(
                    "identity instance needs n <= d, got d={d}, n={n}"
                )));
            }
            DMatrix::from_fn(d, n, |i, j| if i == j { 1.0 } else { 0.0 })
        }
        InstanceKind::DuplicatedColumn => DMatrix::from_fn(d, n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
        InstanceKind::RandomUnitSphere | InstanceKind::RandomInBall => {
            let mut m = DMatrix::zeros(d, n);
            for mut col in m.column_iter_mut() {
                let mut norm = 0.0;
                while norm == 0.0 {
                    for x in col.iter_mut() {
                        *x = rng.sample(StandardNormal);
                    }
                    norm = col.norm();
                }
                let mut scale = 1.0 / norm;
                if kind == InstanceKind::RandomInBall {
                    let u: f64 = rng.random();
                    scale *= u.powf(1.0 / d as f64);
                }
                col *= scale;
                // Renormalization can overshoot 1 by an ulp.
                let nn = col.norm();
                if nn > 1.0 {
                    col /= nn;
                }
            }
            m
        }
        InstanceKind::SignColumns => {
            let entry = 1.0 / (d as f64).sqrt();
            DMatrix::from_fn(d, n, |_, _| if rng.random::<bool>() { entry } else { -entry })
        }
    };
    Instance::from_matrix(matrix)
}

/// Parses the text instance format.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(GswError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(GswError::Parse {
            line: hline + 1,
            message: format!("expected \"d n\", found {header:?}"),
        });
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>().map_err(|e| GswError::Parse {
            line: hline + 1,
            message: format!("bad dimension {s:?}: {e}"),
        })
    };
    let (d, n) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if d == 0 || n == 0 {
        return Err(GswError::DimensionMismatch(format!(
            "header declares d={d}, n={n}"
        )));
    }
    let mut matrix = DMatrix::zeros(d, n);
    let mut rows = 0;
    for (lno, line) in lines {
        if rows == d {
            return Err(GswError::DimensionMismatch(format!(
                "more than {d} rows (extra data at line {})",
                lno + 1
            )));
        }
        let mut count = 0;
        for (j, tok) in line.split_whitespace().enumerate() {
            if j >= n {
                return Err(GswError::DimensionMismatch(format!(
                    "line {} has more than {n} entries",
                    lno + 1
                )));
            }
            matrix[(rows, j)] = tok.parse::<f64>().map_err(|e| GswError::Parse {
                line: lno + 1,
                message: format!("bad number {tok:?}: {e}"),
            })?;
            count += 1;
        }
        if count != n {
            return Err(GswError::DimensionMismatch(format!(
                "line {} has {count} entries, expected {n}",
                lno + 1
            )));
        }
        rows += 1;
    }
    if rows != d {
        return Err(GswError::DimensionMismatch(format!(
            "expected {d} rows, found {rows}"
        )));
    }
    Instance::from_matrix(matrix)
}

/// Renders the text instance format. Floats use the shortest representation
/// that round-trips exactly.
pub fn format_instance(inst: &Instance) -> String {
    let mut out = format!("{} {}\n", inst.d(), inst.n());
    for i in 0..inst.d() {
        let row: Vec<String> = (0..inst.n()).map(|j| format!("{}", inst.matrix[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| GswError::io(path, e))?;
    parse_instance(&text)
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_instance(inst)).map_err(|e| GswError::io(path, e))
}
