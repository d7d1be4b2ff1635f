//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use curved_flats::algebra::{group_exp, Mat, SymmetricSpaceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Row-echelon rank with partial pivoting, tolerance relative to the
/// largest entry.
pub fn gauss_rank(rows: &[Vec<f64>], rel_tol: f64) -> usize {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let cols = a.first().map_or(0, |r| r.len());
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = rel_tol * scale;
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..a.len()).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
        else {
            break;
        };
        if a[p][c].abs() <= tol {
            continue;
        }
        a.swap(rank, p);
        for i in (rank + 1)..a.len() {
            let f = a[i][c] / a[rank][c];
            for k in c..cols {
                a[i][k] -= f * a[rank][k];
            }
        }
        rank += 1;
        if rank == a.len() {
            break;
        }
    }
    rank
}

/// Off-block generator built entry by entry from the signature, without
/// going through the library's embedding.
pub fn p_generator(spec: &SymmetricSpaceSpec, a: usize, b: usize) -> Mat {
    let n = spec.dim();
    let (fb, sa) = (spec.first_block()[b], spec.second_block()[a]);
    let mut y = Mat::zeros(n, n);
    y[(sa, fb)] = 1.0;
    y[(fb, sa)] = -spec.space().sign(fb) * spec.space().sign(sa);
    y
}

fn flat(m: &Mat) -> Vec<f64> {
    m.iter().cloned().collect()
}

/// Brute-force Cartan test: pairwise brackets, span rank, commutant
/// nullity over the generators of `p`, and rank of the trace-form Gram
/// matrix, all by Gaussian elimination.
pub fn oracle_is_cartan(basis: &[Mat], spec: &SymmetricSpaceSpec, tol: f64) -> bool {
    for (i, x) in basis.iter().enumerate() {
        for y in &basis[i + 1..] {
            if (x * y - y * x).amax() > tol {
                return false;
            }
        }
    }
    let span: Vec<Vec<f64>> = basis.iter().map(flat).collect();
    if gauss_rank(&span, tol) != spec.rank() {
        return false;
    }
    let (n1, n2) = spec.split();
    let gens: Vec<Mat> = (0..n2)
        .flat_map(|a| (0..n1).map(move |b| (a, b)))
        .map(|(a, b)| p_generator(spec, a, b))
        .collect();
    // rows: entries of [Y_c, X_i]; columns: generators c
    let n = spec.dim();
    let mut system = vec![vec![0.0; gens.len()]; n * n * basis.len()];
    for (c, y) in gens.iter().enumerate() {
        for (i, x) in basis.iter().enumerate() {
            let br = y * x - x * y;
            for (r, v) in br.iter().enumerate() {
                system[i * n * n + r][c] = *v;
            }
        }
    }
    if gens.len() - gauss_rank(&system, tol) != spec.rank() {
        return false;
    }
    let gram: Vec<Vec<f64>> = basis
        .iter()
        .map(|x| basis.iter().map(|y| -(x * y).trace() / 2.0).collect())
        .collect();
    gauss_rank(&gram, tol) == basis.len()
}

fn random_k(spec: &SymmetricSpaceSpec, rng: &mut ChaCha8Rng) -> Mat {
    let n = spec.dim();
    let mut x = Mat::zeros(n, n);
    for blk in [spec.first_block(), spec.second_block()] {
        for (i, &a) in blk.iter().enumerate() {
            for &b in &blk[i + 1..] {
                let v: f64 = rng.random_range(-1.0..1.0);
                x[(a, b)] = v;
                x[(b, a)] = -spec.space().sign(a) * spec.space().sign(b) * v;
            }
        }
    }
    x
}

/// 50 conjugated normal-form Cartan subspaces and 50 perturbed ones in
/// so(5) with split (3, 2): `(basis, is_cartan)`.
pub fn cartan_cases(seed: u64) -> Vec<(Vec<Mat>, bool)> {
    let spec = SymmetricSpaceSpec::preset("sphere-grassmannian", 2, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..100 {
        let h = group_exp(&random_k(&spec, &mut rng), 1.0).unwrap();
        let e1 = p_generator(&spec, 0, 1);
        let e2 = p_generator(&spec, 1, 2);
        let m: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let m = if (m[0] * m[3] - m[1] * m[2]).abs() < 0.1 {
            [1.0, 0.3, -0.2, 1.0]
        } else {
            m
        };
        let x1 = &h * (&e1 * m[0] + &e2 * m[1]) * h.transpose();
        let x2 = &h * (&e1 * m[2] + &e2 * m[3]) * h.transpose();
        if i < 50 {
            out.push((vec![x1, x2], true));
            continue;
        }
        let basis = match i % 3 {
            // non-commuting perturbation
            0 => {
                let a = rng.random_range(0..2);
                let b = rng.random_range(0..3);
                let mut x2 = x2;
                x2 += p_generator(&spec, a, b) * 0.05;
                vec![x1, x2]
            }
            // collapsed span
            1 => vec![x1.clone(), x1 * 0.7],
            // single direction
            _ => vec![x1],
        };
        out.push((basis, false));
    }
    out
}

/// Measured convergence order between two refinement levels with ratio 2.
pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

use curved_flats::cli::config::{GridConfig, Resolved, RunConfig};
use curved_flats::cli::seed::seed_initial_state;
use curved_flats::frame::{connection_from_state, ConnectionForm};
use curved_flats::geometry::GaugeField;
use curved_flats::lax::{integrate_grid, GridSolution, GridSpec};

/// The default rank-2 configuration on an `nodes × nodes` grid.
pub fn default_config(nodes: usize) -> RunConfig {
    let mut c = RunConfig::default_rank2();
    c.grid = GridConfig {
        extents: vec![0.4, 0.4],
        nodes: vec![nodes, nodes],
    };
    c
}

pub struct Pipeline {
    pub config: RunConfig,
    pub resolved: Resolved,
    pub sol: GridSolution,
    pub conn: ConnectionForm,
}

pub fn lax_pipeline(config: RunConfig) -> Pipeline {
    let resolved = config.validate().unwrap();
    let seeded = seed_initial_state(&config, &resolved.spec, &resolved.family).unwrap();
    let sol = integrate_grid(
        &seeded.state,
        &resolved.family,
        &resolved.grid,
        config.substeps,
    )
    .unwrap();
    let conn = connection_from_state(&sol, &resolved.spec).unwrap();
    Pipeline {
        config,
        resolved,
        sol,
        conn,
    }
}

/// Rank-2 gauge field on a 2D grid whose diagonal coordinates are
/// `coords(x, y)[j][a]`; everything except the coordinates and the metric
/// is filled with placeholders.
pub fn synthetic_gauge(grid: &GridSpec, coords: impl Fn(f64, f64) -> [[f64; 2]; 2]) -> GaugeField {
    let spec = SymmetricSpaceSpec::preset("sphere-grassmannian", 2, 0).unwrap();
    let mut c = Vec::with_capacity(grid.len());
    let mut metric = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        let x = grid.coord(&grid.multi(node));
        let v = coords(x[0], x[1]);
        metric.push(Mat::from_fn(2, 2, |i, j| {
            v[i][0] * v[j][0] + v[i][1] * v[j][1]
        }));
        c.push(v.iter().map(|r| r.to_vec()).collect());
    }
    let zero = Mat::zeros(5, 5);
    GaugeField {
        spec,
        gauge: vec![Mat::identity(5, 5); grid.len()],
        a0: vec![vec![zero.clone(); 2]; grid.len()],
        a1: vec![vec![zero; 2]; grid.len()],
        coords: c,
        ungauged_metric: metric,
        kernel_dim: 1,
        gauge_residual: 0.0,
    }
}

/// `dψ` of `ψ = (sin(x + 2y) + x²y, eˣ cos y + 3x)`: closed but not constant.
pub fn closed_coords(x: f64, y: f64) -> [[f64; 2]; 2] {
    [
        [(x + 2.0 * y).cos() + 2.0 * x * y, x.exp() * y.cos() + 3.0],
        [2.0 * (x + 2.0 * y).cos() + x * x, -x.exp() * y.sin()],
    ]
}
