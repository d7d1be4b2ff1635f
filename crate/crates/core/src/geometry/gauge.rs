//! Gauge to the Cartan normal form and the developing map.
//!
//! With `p ≅ Hom(V, V⊥)` the tangent directions `A₁ⱼ` are represented by
//! their off-blocks `Bⱼ`. Commuting `A₁ⱼ` have simultaneously diagonalisable
//! `Bⱼ`, so the singular vectors of one generic combination `C = Σ wⱼBⱼ`
//! bring all of them to rectangular-diagonal form. The kernel directions of
//! `C` are ordered first, so for `n₁ = rank + 1` the gauged frame's first
//! column is annihilated by every `Ã₁ⱼ`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::fd;
use crate::algebra::{cartan_diagnostics, invariant_form, max_abs, Mat, SymmetricSpaceSpec};
use crate::error::{Error, Result};
use crate::frame::ConnectionForm;
use crate::lax::GridSpec;

/// Tolerance of the per-node Cartan test.
pub const CARTAN_TOL: f64 = 1e-8;

/// Singular values closer than this are treated as colliding.
pub const SPECTRAL_GAP_TOL: f64 = 1e-8;

/// Gauged `Ã₁ⱼ` must lie in the reference Cartan subspace to this accuracy.
pub const GAUGE_TOL: f64 = 1e-7;

/// Closedness residual that the pipeline regards as converged.
pub const CLOSEDNESS_TOL: f64 = 1e-3;

/// Generic weights `wⱼ = 1/(j + √2)`, `j = 1, 2, …`.
pub fn generic_weight(j: usize) -> f64 {
    1.0 / ((j + 1) as f64 + std::f64::consts::SQRT_2)
}

/// Per-node gauge `H ∈ K` and the gauged connection.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    pub spec: SymmetricSpaceSpec,
    /// `H` at every node.
    pub gauge: Vec<Mat>,
    /// `Ã₀ⱼ = H A₀ⱼ H⁻¹ − (∂ⱼH) H⁻¹`
    pub a0: Vec<Vec<Mat>>,
    /// `Ã₁ⱼ = H A₁ⱼ H⁻¹`
    pub a1: Vec<Vec<Mat>>,
    /// `coords[node][j][i]`: the `i`-th diagonal entry of the off-block of
    /// `Ã₁ⱼ`, i.e. `Ã₁ⱼ` in the diagonal basis of the reference subspace.
    pub coords: Vec<Vec<Vec<f64>>>,
    /// Invariant-form Gram matrix `⟨A₁ᵢ, A₁ⱼ⟩` of the ungauged connection.
    pub ungauged_metric: Vec<Mat>,
    /// Number of leading block-1 directions in the common kernel.
    pub kernel_dim: usize,
    /// Largest distance of any `Ã₁ⱼ` from its diagonal projection.
    pub gauge_residual: f64,
}

impl GaugeField {
    /// Diagonal basis element `X(E_{i, kernel_dim + i})` of the reference
    /// Cartan subspace, embedded in `g`.
    pub fn cartan_basis(&self) -> Vec<Mat> {
        let (n1, n2) = self.spec.split();
        (0..self.spec.rank())
            .map(|i| {
                let mut e = Mat::zeros(n2, n1);
                e[(i, self.kernel_dim + i)] = 1.0;
                self.spec.from_off_block(&e).expect("shape is correct")
            })
            .collect()
    }

    /// `∂ψ/∂x` at a node: entry `(i, j)` is coordinate `i` of `Ã₁ⱼ`.
    pub fn psi_jacobian(&self, node: usize) -> Mat {
        let c = &self.coords[node];
        Mat::from_fn(self.spec.rank(), c.len(), |i, j| c[j][i])
    }
}

struct Svd {
    u: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    v: Vec<Vec<f64>>,
    kernel: Vec<Vec<f64>>,
    cokernel: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the complement of `span(vs)` in `ℝⁿ`.
fn complement(vs: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut proj = DMatrix::<f64>::identity(n, n);
    for v in vs {
        for i in 0..n {
            for j in 0..n {
                proj[(i, j)] -= v[i] * v[j];
            }
        }
    }
    let eig = SymmetricEigen::new(proj);
    let mut out: Vec<(f64, Vec<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.5)
        .map(|(k, &l)| (l, eig.eigenvectors.column(k).iter().cloned().collect()))
        .collect();
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out.into_iter().map(|(_, v)| v).collect()
}

/// Top-`rank` singular triples of `c` (descending) plus orthonormal bases of
/// the kernel and cokernel complements.
fn full_svd(c: &Mat, rank: usize) -> Svd {
    let (rows, cols) = (c.nrows(), c.ncols());
    let n = rows.max(cols);
    let mut padded = DMatrix::<f64>::zeros(n, n);
    padded.view_mut((0, 0), (rows, cols)).copy_from(c);
    let svd = padded.svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let top = &order[..rank];
    let us: Vec<Vec<f64>> = top
        .iter()
        .map(|&k| (0..rows).map(|i| u[(i, k)]).collect())
        .collect();
    let vs: Vec<Vec<f64>> = top
        .iter()
        .map(|&k| (0..cols).map(|i| vt[(k, i)]).collect())
        .collect();
    Svd {
        sigma: top.iter().map(|&k| svd.singular_values[k]).collect(),
        kernel: complement(&vs, cols),
        cokernel: complement(&us, rows),
        u: us,
        v: vs,
    }
}

/// Rotate `basis` onto `reference` by the orthogonal polar factor of the
/// overlap matrix.
fn procrustes_align(basis: &[Vec<f64>], reference: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = basis.len();
    if k == 0 {
        return Vec::new();
    }
    let overlap = DMatrix::from_fn(k, k, |i, j| dot(&basis[i], &reference[j]));
    let svd = overlap.svd(true, true);
    let rot = svd.u.expect("requested") * svd.v_t.expect("requested");
    (0..k)
        .map(|j| {
            let len = basis[0].len();
            (0..len)
                .map(|t| (0..k).map(|i| basis[i][t] * rot[(i, j)]).sum())
                .collect()
        })
        .collect()
}

fn canonical_sign(v: &[f64]) -> f64 {
    let big = v
        .iter()
        .cloned()
        .fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
    if big < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Columns `[kernel…, v₁…v_r]` and `[u₁…u_r, cokernel…]` as block-1 and
/// block-2 orthonormal bases.
struct Bases {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Bases {
    fn from_svd(svd: Svd) -> Self {
        let mut first = svd.kernel;
        first.extend(svd.v);
        let mut second = svd.u;
        second.extend(svd.cokernel);
        Self { first, second }
    }
}

/// Order and sign the singular data to match `reference` (or fix a
/// canonical branch at the origin).
fn continue_branch(svd: Svd, reference: Option<&Bases>, node: &[usize]) -> Result<Bases> {
    let rank = svd.sigma.len();
    let kd = svd.kernel.len();
    let Some(reference) = reference else {
        let mut svd = svd;
        for i in 0..rank {
            let s = canonical_sign(&svd.v[i]);
            svd.v[i].iter_mut().for_each(|x| *x *= s);
            svd.u[i].iter_mut().for_each(|x| *x *= s);
        }
        for w in svd.kernel.iter_mut().chain(svd.cokernel.iter_mut()) {
            let s = canonical_sign(w);
            w.iter_mut().for_each(|x| *x *= s);
        }
        return Ok(Bases::from_svd(svd));
    };

    let ref_v = &reference.first[kd..];
    let ref_u = &reference.second[..rank];
    let mut used = vec![false; rank];
    let mut u = vec![Vec::new(); rank];
    let mut v = vec![Vec::new(); rank];
    for i in 0..rank {
        let (best, score) = (0..rank)
            .map(|j| {
                (
                    j,
                    dot(&svd.v[i], &ref_v[j]).abs() + dot(&svd.u[i], &ref_u[j]).abs(),
                )
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("rank > 0");
        if used[best] || score < 1.0 {
            return Err(Error::DegenerateSpectrum {
                node: node.to_vec(),
                values: svd.sigma.clone(),
            });
        }
        used[best] = true;
        let s = if dot(&svd.v[i], &ref_v[best]) + dot(&svd.u[i], &ref_u[best]) < 0.0 {
            -1.0
        } else {
            1.0
        };
        v[best] = svd.v[i].iter().map(|x| x * s).collect();
        u[best] = svd.u[i].iter().map(|x| x * s).collect();
    }
    let kernel = procrustes_align(&svd.kernel, &reference.first[..kd]);
    let cokernel = procrustes_align(&svd.cokernel, &reference.second[rank..]);
    Ok(Bases::from_svd(Svd {
        u,
        sigma: svd.sigma,
        v,
        kernel,
        cokernel,
    }))
}

/// `H = blockdiag(P̃ᵀ, Q̃ᵀ)` embedded along the spec's block indices.
fn assemble_gauge(spec: &SymmetricSpaceSpec, bases: &Bases) -> Mat {
    let n = spec.dim();
    let mut h = Mat::zeros(n, n);
    for (row, col_vec) in bases.first.iter().enumerate() {
        for (c, &x) in col_vec.iter().enumerate() {
            h[(spec.first_block()[row], spec.first_block()[c])] = x;
        }
    }
    for (row, col_vec) in bases.second.iter().enumerate() {
        for (c, &x) in col_vec.iter().enumerate() {
            h[(spec.second_block()[row], spec.second_block()[c])] = x;
        }
    }
    h
}

/// Gauge every node so that the tangent directions lie in one fixed
/// Cartan subspace in diagonal normal form. Continuation follows the
/// lexicographic sweep; the origin fixes the branch.
pub fn gauge_to_normal_form(conn: &ConnectionForm, grid: &GridSpec) -> Result<GaugeField> {
    let spec = &conn.spec;
    if !spec.space().is_definite() {
        return Err(Error::Structural(
            "normal-form gauge is implemented for definite signature only".into(),
        ));
    }
    if conn.values.len() != grid.len() || conn.dims() != grid.dims() {
        return Err(Error::Structural(
            "connection does not match the grid".into(),
        ));
    }
    let rank = spec.rank();
    let (n1, n2) = spec.split();
    let kernel_dim = n1 - rank;

    let mut bases: Vec<Option<Bases>> = (0..grid.len()).map(|_| None).collect();
    for (node, from) in grid.sweep() {
        let idx = grid.multi(node);
        let a1: Vec<Mat> = conn.values[node].iter().map(|(_, a)| a.clone()).collect();
        let diag = cartan_diagnostics(&a1, spec, CARTAN_TOL)?;
        if !diag.passes(rank, CARTAN_TOL) {
            return Err(Error::NonCartan { node: idx });
        }
        let mut c = Mat::zeros(n2, n1);
        for (j, a) in a1.iter().enumerate() {
            c += spec.off_block(a) * generic_weight(j);
        }
        let svd = full_svd(&c, rank);
        let gaps_ok = svd.sigma.windows(2).all(|w| w[0] - w[1] > SPECTRAL_GAP_TOL)
            && svd.sigma.last().is_some_and(|&s| s > SPECTRAL_GAP_TOL);
        if !gaps_ok {
            return Err(Error::DegenerateSpectrum {
                node: idx,
                values: svd.sigma,
            });
        }
        let reference = from.and_then(|(prev, _)| bases[prev].as_ref());
        bases[node] = Some(continue_branch(svd, reference, &idx)?);
    }

    let gauge: Vec<Mat> = bases
        .iter()
        .map(|b| assemble_gauge(spec, b.as_ref().expect("sweep covers every node")))
        .collect();
    let flat_h: Vec<Vec<f64>> = gauge.iter().map(|h| h.as_slice().to_vec()).collect();

    let n = spec.dim();
    let k = grid.dims();
    let mut a0 = Vec::with_capacity(grid.len());
    let mut a1 = Vec::with_capacity(grid.len());
    let mut coords = Vec::with_capacity(grid.len());
    let mut ungauged_metric = Vec::with_capacity(grid.len());
    let mut gauge_residual = 0.0_f64;
    for node in 0..grid.len() {
        let h = &gauge[node];
        let ht = h.transpose();
        let mut node_a0 = Vec::with_capacity(k);
        let mut node_a1 = Vec::with_capacity(k);
        let mut node_coords = Vec::with_capacity(k);
        for j in 0..k {
            let (b0, b1) = &conn.values[node][j];
            let dh = Mat::from_vec(n, n, fd::d1(grid, &flat_h, node, j));
            node_a0.push(h * b0 * &ht - dh * &ht);
            let g1 = h * b1 * &ht;
            let blk = spec.off_block(&g1);
            let mut diag_part = Mat::zeros(n2, n1);
            let cj: Vec<f64> = (0..rank).map(|i| blk[(i, kernel_dim + i)]).collect();
            for (i, &x) in cj.iter().enumerate() {
                diag_part[(i, kernel_dim + i)] = x;
            }
            let scale = max_abs(b1).max(1.0);
            gauge_residual = gauge_residual.max(max_abs(&(blk - diag_part)) / scale);
            node_coords.push(cj);
            node_a1.push(g1);
        }
        let metric = Mat::from_fn(k, k, |i, j| {
            invariant_form(&conn.values[node][i].1, &conn.values[node][j].1).expect("square")
        });
        a0.push(node_a0);
        a1.push(node_a1);
        coords.push(node_coords);
        ungauged_metric.push(metric);
    }
    if gauge_residual > GAUGE_TOL {
        return Err(Error::Internal(format!(
            "gauged tangent directions leave the reference Cartan subspace by {gauge_residual:e}"
        )));
    }
    Ok(GaugeField {
        spec: spec.clone(),
        gauge,
        a0,
        a1,
        coords,
        ungauged_metric,
        kernel_dim,
        gauge_residual,
    })
}

/// `ψ: grid → 𝔞₀` with `dψ = Ã₁`, in the diagonal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DevelopingMap {
    /// `psi[node][i]`
    pub psi: Vec<Vec<f64>>,
    /// Max over interior nodes of `|∂ᵢÃ₁(∂ⱼ) − ∂ⱼÃ₁(∂ᵢ)|` (0 when `k = 1`).
    pub closedness_residual: f64,
    /// Max over nodes of `|⟨dψ(∂ᵢ), dψ(∂ⱼ)⟩ − ⟨A₁ᵢ, A₁ⱼ⟩|`.
    pub isometry_defect: f64,
}

/// Trapezoid-rule integration of `Ã₁` along the lexicographic sweep.
pub fn developing_map(gf: &GaugeField, grid: &GridSpec) -> Result<DevelopingMap> {
    if gf.coords.len() != grid.len() {
        return Err(Error::Structural(
            "gauge field does not match the grid".into(),
        ));
    }
    let rank = gf.spec.rank();
    let k = grid.dims();
    let mut psi = vec![vec![0.0; rank]; grid.len()];
    for (node, from) in grid.sweep() {
        if let Some((prev, axis)) = from {
            let h = grid.step(axis);
            psi[node] = (0..rank)
                .map(|i| {
                    psi[prev][i] + 0.5 * h * (gf.coords[prev][axis][i] + gf.coords[node][axis][i])
                })
                .collect();
        }
    }

    let mut closedness_residual = 0.0_f64;
    if k >= 2 {
        let per_dir: Vec<Vec<Vec<f64>>> = (0..k)
            .map(|j| gf.coords.iter().map(|c| c[j].clone()).collect())
            .collect();
        for node in 0..grid.len() {
            if !fd::is_interior(grid, node, 1) {
                continue;
            }
            for i in 0..k {
                for j in (i + 1)..k {
                    let di = fd::d1(grid, &per_dir[j], node, i);
                    let dj = fd::d1(grid, &per_dir[i], node, j);
                    for (a, b) in di.iter().zip(&dj) {
                        closedness_residual = closedness_residual.max((a - b).abs());
                    }
                }
            }
        }
    }
    let limit = 100.0 * CLOSEDNESS_TOL;
    if closedness_residual > limit {
        return Err(Error::GaugeContinuity {
            residual: closedness_residual,
            limit,
        });
    }

    let mut isometry_defect = 0.0_f64;
    for node in 0..grid.len() {
        let c = &gf.coords[node];
        for i in 0..k {
            for j in 0..k {
                let via_psi: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum();
                isometry_defect =
                    isometry_defect.max((via_psi - gf.ungauged_metric[node][(i, j)]).abs());
            }
        }
    }

    Ok(DevelopingMap {
        psi,
        closedness_residual,
        isometry_defect,
    })
}
