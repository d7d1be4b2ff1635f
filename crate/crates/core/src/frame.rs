//! The flat connection family `A^μ = A₀ + μA₁` and its frames.

use rayon::prelude::*;

use crate::algebra::{
    bracket, group_exp, in_group_residual, max_abs, BilinearSpace, Mat, SymmetricSpaceSpec,
};
use crate::error::{Error, Result};
use crate::lax::{GridSolution, GridSpec};
use crate::loops::positive_part;

/// Coefficients of `π₊Ṽ` above this size outside degrees {0, 1} mean the
/// flow is broken.
const CONNECTION_DEGREE_TOL: f64 = 1e-10;

/// Gram–Schmidt pivot below which a frame is declared degenerate.
const FRAME_PIVOT_TOL: f64 = 1e-10;

/// `(A₀(∂ⱼ), A₁(∂ⱼ))` for every node and coordinate direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionForm {
    pub spec: SymmetricSpaceSpec,
    /// `values[node][j] = (A₀ⱼ, A₁ⱼ)`
    pub values: Vec<Vec<(Mat, Mat)>>,
}

impl ConnectionForm {
    pub fn dims(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    /// `A^μ(∂ⱼ)` at a node.
    pub fn at(&self, node: usize, j: usize, mu: f64) -> Mat {
        let (a0, a1) = &self.values[node][j];
        a0 + a1 * mu
    }

    /// Constant connection on every node of `grid`.
    pub fn constant(spec: SymmetricSpaceSpec, grid: &GridSpec, per_dir: Vec<(Mat, Mat)>) -> Self {
        Self {
            spec,
            values: vec![per_dir; grid.len()],
        }
    }

    /// Largest distance of the `A₀` parts from `k` and the `A₁` parts from `p`.
    pub fn splitting_residual(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for node in &self.values {
            for (a0, a1) in node {
                worst = worst
                    .max(self.spec.k_residual(a0)?)
                    .max(self.spec.p_residual(a1)?);
            }
        }
        Ok(worst)
    }
}

/// `A₀ⱼ, A₁ⱼ` = degree-0 and degree-1 coefficients of `π₊Ṽ_{rⱼ}(ξ)`.
pub fn connection_from_state(
    sol: &GridSolution,
    spec: &SymmetricSpaceSpec,
) -> Result<ConnectionForm> {
    if sol.initial().dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: sol.initial().dim(),
        });
    }
    let powers = sol.family.powers();
    let values = sol
        .states
        .par_iter()
        .map(|xi| {
            powers
                .iter()
                .map(|&r| {
                    let m = positive_part(xi, r)?;
                    let stray = m.max_abs_outside(0, 1);
                    if stray > CONNECTION_DEGREE_TOL {
                        return Err(Error::Internal(format!(
                            "connection has a coefficient of size {stray:e} outside degrees 0..=1"
                        )));
                    }
                    Ok((m.coeff_or_zero(0), m.coeff_or_zero(1)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConnectionForm {
        spec: spec.clone(),
        values,
    })
}

/// Central-difference zero-curvature defect
/// `∂ᵢA(∂ⱼ) − ∂ⱼA(∂ᵢ) + [A(∂ᵢ), A(∂ⱼ)]` at `μ₀`, maximised over interior
/// nodes and coordinate pairs.
pub fn mc_residual(conn: &ConnectionForm, mu: f64, grid: &GridSpec) -> Result<f64> {
    let k = grid.dims();
    if k < 2 {
        return Err(Error::Structural(
            "curvature needs at least two directions".into(),
        ));
    }
    if conn.values.len() != grid.len() || conn.dims() != k {
        return Err(Error::Structural(
            "connection does not match the grid".into(),
        ));
    }
    if grid.nodes().iter().any(|&n| n < 3) {
        return Err(Error::Structural(
            "curvature check needs >= 3 nodes per axis".into(),
        ));
    }
    let mut worst = 0.0_f64;
    for i in 0..k {
        for j in (i + 1)..k {
            let (hi, hj) = (grid.step(i), grid.step(j));
            let r = (0..grid.len())
                .into_par_iter()
                .filter_map(|f| {
                    let ip = grid.neighbour(f, i, 1)?;
                    let im = grid.neighbour(f, i, -1)?;
                    let jp = grid.neighbour(f, j, 1)?;
                    let jm = grid.neighbour(f, j, -1)?;
                    let di_aj = (conn.at(ip, j, mu) - conn.at(im, j, mu)) / (2.0 * hi);
                    let dj_ai = (conn.at(jp, i, mu) - conn.at(jm, i, mu)) / (2.0 * hj);
                    let ai = conn.at(f, i, mu);
                    let aj = conn.at(f, j, mu);
                    let curv = di_aj - dj_ai + (&ai * &aj - &aj * &ai);
                    Some(max_abs(&curv))
                })
                .reduce(|| 0.0, f64::max);
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// `max ‖[A₁ᵢ, A₁ⱼ]‖_max` over nodes and direction pairs.
pub fn abelian_residual(conn: &ConnectionForm) -> f64 {
    conn.values
        .iter()
        .map(|node| {
            let mut worst = 0.0_f64;
            for i in 0..node.len() {
                for j in (i + 1)..node.len() {
                    let b = bracket(&node[i].1, &node[j].1).expect("connection is square");
                    worst = worst.max(max_abs(&b));
                }
            }
            worst
        })
        .fold(0.0, f64::max)
}

/// Frames `F` with `F⁻¹dF = A^μ` at one spectral value.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    pub mu: f64,
    pub frames: Vec<Mat>,
}

impl FrameField {
    pub fn max_group_residual(&self, space: &BilinearSpace) -> Result<f64> {
        self.frames
            .iter()
            .map(|f| in_group_residual(f, space))
            .try_fold(0.0_f64, |acc, r| Ok(acc.max(r?)))
    }
}

/// Gram–Schmidt in the `J`-inner product, column by column; restores
/// `FᵀJF = J` after drift.
pub fn j_orthonormalize(f: &Mat, space: &BilinearSpace) -> Result<Mat> {
    let n = space.dim();
    if f.nrows() != n || f.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.nrows(),
        });
    }
    let mut out = f.clone();
    let ip = |a: &Mat, i: usize, b: &Mat, j: usize| -> f64 {
        (0..n).map(|k| space.sign(k) * a[(k, i)] * b[(k, j)]).sum()
    };
    for i in 0..n {
        for j in 0..i {
            let c = ip(&out, i, &out, j) * space.sign(j);
            for k in 0..n {
                let v = out[(k, j)];
                out[(k, i)] -= c * v;
            }
        }
        let norm = ip(&out, i, &out, i);
        if norm.abs() < FRAME_PIVOT_TOL || norm.signum() != space.sign(i) {
            return Err(Error::DegenerateFrame { pivot: norm });
        }
        let s = norm.abs().sqrt();
        for k in 0..n {
            out[(k, i)] /= s;
        }
    }
    Ok(out)
}

/// Midpoint-exponential frame integration along the lexicographic sweep.
pub fn integrate_frame(conn: &ConnectionForm, mu: f64, grid: &GridSpec) -> Result<FrameField> {
    let order: Vec<usize> = (0..grid.dims()).collect();
    integrate_frame_ordered(conn, mu, grid, &order)
}

/// As [`integrate_frame`] with an explicit axis order for the sweep.
pub fn integrate_frame_ordered(
    conn: &ConnectionForm,
    mu: f64,
    grid: &GridSpec,
    order: &[usize],
) -> Result<FrameField> {
    if !mu.is_finite() {
        return Err(Error::Domain("spectral value must be finite".into()));
    }
    if conn.values.len() != grid.len() || conn.dims() != grid.dims() {
        return Err(Error::Structural(
            "connection does not match the grid".into(),
        ));
    }
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..grid.dims()).collect::<Vec<_>>() {
        return Err(Error::Structural(format!(
            "{order:?} is not an axis permutation"
        )));
    }
    let space = *conn.spec.space();
    let n = space.dim();
    let mut frames: Vec<Option<Mat>> = vec![None; grid.len()];
    frames[0] = Some(Mat::identity(n, n));

    for (stage, &axis) in order.iter().enumerate() {
        let h = grid.step(axis);
        let seeds = grid.line_seeds(&order[stage..]);
        let lines: Vec<Result<Vec<(usize, Mat)>>> = seeds
            .par_iter()
            .map(|&seed| {
                let mut out = Vec::with_capacity(grid.nodes()[axis]);
                let mut f = frames[seed].clone().expect("seed filled by earlier stage");
                let mut prev = seed;
                for _ in 1..grid.nodes()[axis] {
                    let next = grid.neighbour(prev, axis, 1).expect("inside grid");
                    let avg = (conn.at(prev, axis, mu) + conn.at(next, axis, mu)) * 0.5;
                    f = j_orthonormalize(&(f * group_exp(&avg, h)?), &space)?;
                    out.push((next, f.clone()));
                    prev = next;
                }
                Ok(out)
            })
            .collect();
        for line in lines {
            for (node, f) in line? {
                frames[node] = Some(f);
            }
        }
    }
    Ok(FrameField {
        mu,
        frames: frames
            .into_iter()
            .map(|f| f.expect("sweep covers every node"))
            .collect(),
    })
}
