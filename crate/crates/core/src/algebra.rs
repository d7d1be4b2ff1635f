//! Pseudo-orthogonal Lie algebra kernel.
//!
//! Elements of `g = so(p, q)` are stored as plain `n × n` matrices `X` with
//! `XᵀJ + JX = 0`, where `J = diag(+1 × p, −1 × q)`. A symmetric space
//! `G/K` is fixed by a partition of the index set into two blocks; the
//! involution is conjugation by the diagonal block-sign matrix `S`, so `k`
//! is the block-diagonal part and `p` the off-block part.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Default algebraic tolerance at unit matrix scale.
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn check_square(m: &Mat, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if m.nrows() != n { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

fn check_same(x: &Mat, y: &Mat) -> Result<()> {
    if !x.is_square() {
        return Err(Error::Structural(format!(
            "expected square matrix, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    check_square(y, x.nrows())
}

/// `ℝⁿ` with the diagonal metric `J = diag(+1 × p, −1 × q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilinearSpace {
    positive: usize,
    negative: usize,
}

impl BilinearSpace {
    pub fn new(positive: usize, negative: usize) -> Result<Self> {
        if positive + negative == 0 {
            return Err(Error::Structural(
                "bilinear space must have positive dimension".into(),
            ));
        }
        Ok(Self { positive, negative })
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(n, 0)
    }

    pub fn dim(&self) -> usize {
        self.positive + self.negative
    }

    pub fn signature(&self) -> (usize, usize) {
        (self.positive, self.negative)
    }

    pub fn is_definite(&self) -> bool {
        self.negative == 0
    }

    /// Diagonal entry `J_ii`.
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.positive {
            1.0
        } else {
            -1.0
        }
    }

    pub fn metric(&self) -> Mat {
        Mat::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                self.sign(i)
            } else {
                0.0
            }
        })
    }

    /// `⟨u, v⟩_J = uᵀJv`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter()
            .zip(v)
            .enumerate()
            .map(|(i, (a, b))| self.sign(i) * a * b)
            .sum()
    }

    /// `‖XᵀJ + JX‖_max`, zero exactly on `g`.
    pub fn membership_residual(&self, x: &Mat) -> Result<f64> {
        check_square(x, self.dim())?;
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let v = x[(j, i)] * self.sign(j) + self.sign(i) * x[(i, j)];
                worst = worst.max(v.abs());
            }
        }
        Ok(worst)
    }

    /// Orthogonal projection of an arbitrary matrix onto `g`: `(G − J Gᵀ J)/2`.
    pub fn project_to_algebra(&self, g: &Mat) -> Result<Mat> {
        check_square(g, self.dim())?;
        Ok(Mat::from_fn(self.dim(), self.dim(), |i, j| {
            0.5 * (g[(i, j)] - self.sign(i) * g[(j, i)] * self.sign(j))
        }))
    }

    /// Inverse of a group element: `G⁻¹ = J Gᵀ J`.
    pub fn group_inverse(&self, g: &Mat) -> Mat {
        Mat::from_fn(g.ncols(), g.nrows(), |i, j| {
            self.sign(i) * g[(j, i)] * self.sign(j)
        })
    }
}

/// Symmetric space `O(p, q) / (O(block 1) × O(block 2))` realised by a block
/// partition of the coordinate indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricSpaceSpec {
    space: BilinearSpace,
    first: Vec<usize>,
    second: Vec<usize>,
    rank: usize,
    preset: Option<String>,
}

/// Named rows of the standard table of Grassmannians plus the two extra
/// presets used by the pipeline.
pub const PRESET_NAMES: [&str; 6] = [
    "sphere-grassmannian",
    "sphere",
    "de-sitter",
    "hyperbolic",
    "anti-de-sitter",
    "isothermic",
];

impl SymmetricSpaceSpec {
    /// Contiguous split: the first `n1` coordinates form block 1.
    pub fn new(space: BilinearSpace, split: (usize, usize), rank: usize) -> Result<Self> {
        if split.0 + split.1 != space.dim() {
            return Err(Error::Structural(format!(
                "split {:?} does not add up to dimension {}",
                split,
                space.dim()
            )));
        }
        Self::with_blocks(space, (0..split.0).collect(), rank)
    }

    /// General index partition; `first` lists the indices of block 1.
    pub fn with_blocks(space: BilinearSpace, mut first: Vec<usize>, rank: usize) -> Result<Self> {
        let n = space.dim();
        first.sort_unstable();
        first.dedup();
        if first.is_empty() || first.len() >= n || first.iter().any(|&i| i >= n) {
            return Err(Error::Structural(format!(
                "block partition {first:?} is not a proper subset of 0..{n}"
            )));
        }
        let second: Vec<usize> = (0..n).filter(|i| !first.contains(i)).collect();
        if rank == 0 || rank > first.len().min(second.len()) {
            return Err(Error::Structural(format!(
                "rank {rank} impossible for this split"
            )));
        }
        Ok(Self {
            space,
            first,
            second,
            rank,
            preset: None,
        })
    }

    /// Presets parameterised by the immersion dimension `m` and the target
    /// dimension `n` (ignored where the preset fixes it).
    pub fn preset(name: &str, m: usize, n: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("preset parameter m must be positive".into()));
        }
        let needs_n = |min: usize| -> Result<()> {
            if n < min {
                Err(Error::Config(format!("preset {name} needs n >= {min}")))
            } else {
                Ok(())
            }
        };
        let mut spec = match name {
            "sphere-grassmannian" => {
                Self::new(BilinearSpace::euclidean(2 * m + 1)?, (m + 1, m), m)?
            }
            "sphere" => {
                needs_n(m)?;
                let rank = (m + 1).min(n + 1 - m);
                Self::new(BilinearSpace::euclidean(n + 2)?, (m + 1, n + 1 - m), rank)?
            }
            "de-sitter" => {
                needs_n(m)?;
                let rank = (m + 1).min(n + 1 - m);
                Self::new(BilinearSpace::new(n + 1, 1)?, (m + 1, n + 1 - m), rank)?
            }
            "hyperbolic" => {
                needs_n(m)?;
                // block 1 = O(1, m): m positive directions plus the timelike one
                let mut first: Vec<usize> = (0..m).collect();
                first.push(n + 1);
                let rank = (m + 1).min(n + 1 - m);
                Self::with_blocks(BilinearSpace::new(n + 1, 1)?, first, rank)?
            }
            "anti-de-sitter" => {
                needs_n(m)?;
                // O(2, n) with both blocks of index one
                let mut first: Vec<usize> = (0..m).collect();
                first.push(n);
                let rank = (m + 1).min(n + 1 - m);
                Self::with_blocks(BilinearSpace::new(n, 2)?, first, rank)?
            }
            "isothermic" => Self::new(BilinearSpace::new(4, 1)?, (3, 2), 2)?,
            other => return Err(Error::Config(format!("unknown preset {other:?}"))),
        };
        spec.preset = Some(name.to_string());
        Ok(spec)
    }

    pub fn space(&self) -> &BilinearSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn split(&self) -> (usize, usize) {
        (self.first.len(), self.second.len())
    }

    pub fn first_block(&self) -> &[usize] {
        &self.first
    }

    pub fn second_block(&self) -> &[usize] {
        &self.second
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn preset_name(&self) -> Option<&str> {
        self.preset.as_deref()
    }

    pub fn is_contiguous(&self) -> bool {
        self.first.iter().enumerate().all(|(k, &i)| k == i)
    }

    /// `+1` on block 1, `−1` on block 2.
    pub fn block_sign(&self, i: usize) -> f64 {
        if self.first.binary_search(&i).is_ok() {
            1.0
        } else {
            -1.0
        }
    }

    /// The involution matrix `S`.
    pub fn involution(&self) -> Mat {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| if i == j { self.block_sign(i) } else { 0.0 })
    }

    /// `σ(X) = S X S`.
    pub fn sigma(&self, x: &Mat) -> Result<Mat> {
        check_square(x, self.dim())?;
        Ok(Mat::from_fn(self.dim(), self.dim(), |i, j| {
            self.block_sign(i) * x[(i, j)] * self.block_sign(j)
        }))
    }

    /// `‖σX − X‖_max`: zero on `k`.
    pub fn k_residual(&self, x: &Mat) -> Result<f64> {
        check_square(x, self.dim())?;
        let mut worst = 0.0_f64;
        for (i, j) in self.off_block_pairs() {
            worst = worst.max(x[(i, j)].abs()).max(x[(j, i)].abs());
        }
        Ok(worst)
    }

    /// `‖σX + X‖_max`: zero on `p`.
    pub fn p_residual(&self, x: &Mat) -> Result<f64> {
        check_square(x, self.dim())?;
        let mut worst = 0.0_f64;
        for blk in [&self.first, &self.second] {
            for &i in blk.iter() {
                for &j in blk.iter() {
                    worst = worst.max(x[(i, j)].abs());
                }
            }
        }
        Ok(worst)
    }

    fn off_block_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.second
            .iter()
            .flat_map(move |&i| self.first.iter().map(move |&j| (i, j)))
    }

    /// The `n₂ × n₁` block `B` of `X` mapping block 1 into block 2.
    pub fn off_block(&self, x: &Mat) -> Mat {
        Mat::from_fn(self.second.len(), self.first.len(), |a, b| {
            x[(self.second[a], self.first[b])]
        })
    }

    /// The unique element of `p` whose block-1 → block-2 part is `B`.
    pub fn from_off_block(&self, b: &Mat) -> Result<Mat> {
        let (n1, n2) = self.split();
        if b.nrows() != n2 || b.ncols() != n1 {
            return Err(Error::Structural(format!(
                "off-block must be {n2}x{n1}, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let mut x = Mat::zeros(self.dim(), self.dim());
        for (a, &i) in self.second.iter().enumerate() {
            for (c, &j) in self.first.iter().enumerate() {
                x[(i, j)] = b[(a, c)];
                x[(j, i)] = -self.space.sign(j) * b[(a, c)] * self.space.sign(i);
            }
        }
        Ok(x)
    }

    /// Basis `X(E_ab)` of `p`, ordered row-major in `(a, b)`.
    pub fn p_basis(&self) -> Vec<Mat> {
        let (n1, n2) = self.split();
        let mut out = Vec::with_capacity(n1 * n2);
        for a in 0..n2 {
            for b in 0..n1 {
                let mut e = Mat::zeros(n2, n1);
                e[(a, b)] = 1.0;
                out.push(self.from_off_block(&e).expect("shape is correct"));
            }
        }
        out
    }

    /// Projector onto block 1.
    pub fn base_projector(&self) -> Mat {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| {
            if i == j && self.block_sign(i) > 0.0 {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// `[X, Y] = XY − YX`.
pub fn bracket(x: &Mat, y: &Mat) -> Result<Mat> {
    check_same(x, y)?;
    Ok(x * y - y * x)
}

/// The invariant form `⟨X, Y⟩ = −tr(XY)/2`.
pub fn invariant_form(x: &Mat, y: &Mat) -> Result<f64> {
    check_same(x, y)?;
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += x[(i, j)] * y[(j, i)];
        }
    }
    Ok(-0.5 * acc)
}

/// Split `X` into its `k` and `p` parts.
pub fn decompose(x: &Mat, spec: &SymmetricSpaceSpec) -> Result<(Mat, Mat)> {
    let sx = spec.sigma(x)?;
    Ok(((x + &sx) * 0.5, (x - &sx) * 0.5))
}

pub fn is_abelian(elems: &[Mat], tol: f64) -> Result<bool> {
    Ok(max_pairwise_bracket(elems)? <= tol)
}

/// `max_{i<j} ‖[Xᵢ, Xⱼ]‖_max`.
pub fn max_pairwise_bracket(elems: &[Mat]) -> Result<f64> {
    if elems.is_empty() {
        return Err(Error::Structural(
            "abelian test needs at least one element".into(),
        ));
    }
    let mut worst = 0.0_f64;
    for i in 0..elems.len() {
        for j in (i + 1)..elems.len() {
            worst = worst.max(max_abs(&bracket(&elems[i], &elems[j])?));
        }
    }
    Ok(worst)
}

/// Numerical rank of a set of matrices regarded as vectors.
pub fn span_dimension(elems: &[Mat], tol: f64) -> usize {
    if elems.is_empty() {
        return 0;
    }
    let len = elems[0].len();
    let stacked = DMatrix::from_fn(len, elems.len(), |r, c| elems[c].as_slice()[r]);
    numerical_rank(&stacked, tol)
}

fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let scale = sv.iter().cloned().fold(1.0_f64, f64::max);
    sv.iter().filter(|&&s| s > tol * scale).count()
}

/// Diagnostics behind [`is_cartan`].
#[derive(Debug, Clone, PartialEq)]
pub struct CartanDiagnostics {
    pub bracket_residual: f64,
    pub span_dim: usize,
    pub commutant_dim: usize,
    pub gram_min_abs_eigenvalue: f64,
}

impl CartanDiagnostics {
    pub fn passes(&self, rank: usize, tol: f64) -> bool {
        self.bracket_residual <= tol
            && self.span_dim == rank
            && self.commutant_dim == rank
            && self.gram_min_abs_eigenvalue > tol
    }
}

pub fn cartan_diagnostics(
    basis: &[Mat],
    spec: &SymmetricSpaceSpec,
    tol: f64,
) -> Result<CartanDiagnostics> {
    if basis.is_empty() {
        return Err(Error::Structural(
            "Cartan test needs a nonempty basis".into(),
        ));
    }
    for x in basis {
        check_square(x, spec.dim())?;
        let scale = max_abs(x).max(1.0);
        if spec.p_residual(x)? > tol * scale || spec.space().membership_residual(x)? > tol * scale {
            return Err(Error::Structural("Cartan basis element is not in p".into()));
        }
    }
    let bracket_residual = max_pairwise_bracket(basis)?;
    let span_dim = span_dimension(basis, tol);

    // commutant {Y ∈ p : [Y, Xᵢ] = 0 ∀ i} as the null space of a linear map
    let p_basis = spec.p_basis();
    let n2 = spec.dim() * spec.dim();
    let mut system = DMatrix::zeros(n2 * basis.len(), p_basis.len());
    for (c, y) in p_basis.iter().enumerate() {
        for (k, x) in basis.iter().enumerate() {
            let br = y * x - x * y;
            for (r, v) in br.iter().enumerate() {
                system[(k * n2 + r, c)] = *v;
            }
        }
    }
    let commutant_dim = p_basis.len() - numerical_rank(&system, tol);

    let k = basis.len();
    let mut gram = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = invariant_form(&basis[i], &basis[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let gram_min_abs_eigenvalue = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));

    Ok(CartanDiagnostics {
        bracket_residual,
        span_dim,
        commutant_dim,
        gram_min_abs_eigenvalue,
    })
}

/// Maximal abelian subspace of `p` of dimension `rank` on which the
/// invariant form is nondegenerate.
pub fn is_cartan(basis: &[Mat], spec: &SymmetricSpaceSpec, tol: f64) -> Result<bool> {
    Ok(cartan_diagnostics(basis, spec, tol)?.passes(spec.rank(), tol))
}

const EXP_TAYLOR_ORDER: usize = 16;

/// `exp(tX)` by scaling and squaring around a degree-16 Taylor core; the
/// scaled argument has 1-norm at most 0.5.
pub fn group_exp(x: &Mat, t: f64) -> Result<Mat> {
    if !x.is_square() {
        return Err(Error::Structural("exp needs a square matrix".into()));
    }
    if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("group_exp"));
    }
    let n = x.nrows();
    let a = x * t;
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut squarings = 0u32;
    if norm1 > 0.5 {
        squarings = (norm1 / 0.5).log2().ceil() as u32;
    }
    let scaled = a / 2f64.powi(squarings as i32);

    // Horner: I + A(I + A/2(I + A/3(...)))
    let id = Mat::identity(n, n);
    let mut acc = id.clone();
    for k in (1..=EXP_TAYLOR_ORDER).rev() {
        acc = &id + (&scaled * acc) / k as f64;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    Ok(acc)
}

/// `‖GᵀJG − J‖_max`.
pub fn in_group_residual(g: &Mat, space: &BilinearSpace) -> Result<f64> {
    check_square(g, space.dim())?;
    let n = space.dim();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += g[(k, i)] * space.sign(k) * g[(k, j)];
            }
            if i == j {
                acc -= space.sign(i);
            }
            worst = worst.max(acc.abs());
        }
    }
    Ok(worst)
}

/// Column `j` of a matrix as a vector.
pub fn column(m: &Mat, j: usize) -> DVector<f64> {
    m.column(j).into_owned()
}
