//! Integration of the commuting Lax hierarchy over a coordinate grid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loops::{flow_field, spectral_invariants, FlowFamily, LaxState};

/// Default RK4 substeps per grid edge.
pub const DEFAULT_SUBSTEPS: usize = 4;

/// Blow-up threshold relative to the initial state's size.
const BLOWUP_FACTOR: f64 = 1e8;

/// Rectangular grid on `[0, L₁] × … × [0, L_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    extents: Vec<f64>,
    nodes: Vec<usize>,
}

impl GridSpec {
    /// Node counts of 1 collapse an axis onto the origin.
    pub fn new(extents: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        if extents.is_empty() || extents.len() != nodes.len() {
            return Err(Error::Structural(format!(
                "grid needs matching extents and node counts, got {} and {}",
                extents.len(),
                nodes.len()
            )));
        }
        if extents.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::Structural(
                "grid extents must be finite and positive".into(),
            ));
        }
        if nodes.contains(&0) {
            return Err(Error::Structural(
                "every grid axis needs at least one node".into(),
            ));
        }
        Ok(Self { extents, nodes })
    }

    /// Same extents, `N ↦ 2N − 1` nodes per axis (step halved).
    pub fn refined(&self) -> Self {
        Self {
            extents: self.extents.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|&n| if n > 1 { 2 * n - 1 } else { 1 })
                .collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.nodes.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn step(&self, axis: usize) -> f64 {
        if self.nodes[axis] > 1 {
            self.extents[axis] / (self.nodes[axis] - 1) as f64
        } else {
            0.0
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index, axis 0 slowest.
    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.nodes)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims()];
        for a in (0..self.dims()).rev() {
            out[a] = flat % self.nodes[a];
            flat /= self.nodes[a];
        }
        out
    }

    pub fn coord(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(a, &i)| i as f64 * self.step(a))
            .collect()
    }

    /// Flat index of the neighbour shifted by `delta` along `axis`.
    pub fn neighbour(&self, flat: usize, axis: usize, delta: isize) -> Option<usize> {
        let mut idx = self.multi(flat);
        let i = idx[axis] as isize + delta;
        if i < 0 || i as usize >= self.nodes[axis] {
            return None;
        }
        idx[axis] = i as usize;
        Some(self.flat(&idx))
    }

    /// Flat indices in the lexicographic sweep order, each paired with the
    /// already-visited node it is reached from (`None` for the origin).
    pub fn sweep(&self) -> Vec<(usize, Option<(usize, usize)>)> {
        let order: Vec<usize> = (0..self.dims()).collect();
        self.sweep_ordered(&order)
    }

    /// Sweep visiting the axes in the given order.
    pub fn sweep_ordered(&self, order: &[usize]) -> Vec<(usize, Option<(usize, usize)>)> {
        let mut out = vec![(0, None)];
        for (stage, &axis) in order.iter().enumerate() {
            let seeds = self.line_seeds(&order[stage..]);
            for seed in seeds {
                let mut prev = seed;
                for _ in 1..self.nodes[axis] {
                    let next = self.neighbour(prev, axis, 1).expect("inside grid");
                    out.push((next, Some((prev, axis))));
                    prev = next;
                }
            }
        }
        out
    }

    /// Nodes whose indices vanish on every axis in `pending`: the starting
    /// points of the lines swept along `pending[0]`.
    pub fn line_seeds(&self, pending: &[usize]) -> Vec<usize> {
        (0..self.len())
            .filter(|&f| {
                let idx = self.multi(f);
                pending.iter().all(|&a| idx[a] == 0)
            })
            .collect()
    }
}

/// Lax states on every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub grid: GridSpec,
    pub family: FlowFamily,
    pub substeps: usize,
    pub states: Vec<LaxState>,
}

impl GridSolution {
    pub fn initial(&self) -> &LaxState {
        &self.states[0]
    }

    pub fn state(&self, idx: &[usize]) -> &LaxState {
        &self.states[self.grid.flat(idx)]
    }
}

fn rk4_step(xi: &LaxState, r: u32, h: f64) -> Result<LaxState> {
    let k1 = flow_field(xi, r)?;
    let k2 = flow_field(&xi.axpy(0.5 * h, &k1), r)?;
    let k3 = flow_field(&xi.axpy(0.5 * h, &k2), r)?;
    let k4 = flow_field(&xi.axpy(h, &k3), r)?;
    Ok(xi
        .axpy(h / 6.0, &k1)
        .axpy(h / 3.0, &k2)
        .axpy(h / 3.0, &k3)
        .axpy(h / 6.0, &k4))
}

fn blowup_limit(xi0: &LaxState) -> f64 {
    BLOWUP_FACTOR * xi0.max_abs().max(1.0)
}

fn healthy(xi: &LaxState, limit: f64) -> bool {
    xi.is_finite() && xi.max_abs() <= limit
}

/// `steps` classical RK4 steps of `∂ξ/∂t = [ξ, π₊Ṽ_r(ξ)]` up to time `t`.
pub fn integrate_flow(xi0: &LaxState, r: u32, t: f64, steps: usize) -> Result<LaxState> {
    if steps == 0 {
        return Err(Error::Structural(
            "integration needs at least one step".into(),
        ));
    }
    let limit = blowup_limit(xi0);
    advance(xi0, r, t, steps, limit).map_err(|(err, last_t)| match err {
        Error::NonFinite(_) => Error::BlowUp { t: last_t },
        other => other,
    })
}

fn advance(
    xi0: &LaxState,
    r: u32,
    t: f64,
    steps: usize,
    limit: f64,
) -> std::result::Result<LaxState, (Error, f64)> {
    let h = t / steps as f64;
    let mut xi = xi0.clone();
    for s in 0..steps {
        let next = rk4_step(&xi, r, h).map_err(|e| (e, s as f64 * h))?;
        if !healthy(&next, limit) {
            return Err((Error::NonFinite("lax flow"), s as f64 * h));
        }
        xi = next;
    }
    Ok(xi)
}

/// Fill the grid: flow 1 along the first axis from `ξ₀`, then flow 2 along
/// the second axis from every node of the first line, and so on. Lines of
/// one sweep stage are independent and run in parallel; every line is
/// computed identically regardless of scheduling.
pub fn integrate_grid(
    xi0: &LaxState,
    family: &FlowFamily,
    grid: &GridSpec,
    substeps: usize,
) -> Result<GridSolution> {
    if family.len() != grid.dims() {
        return Err(Error::Structural(format!(
            "{} flows for a {}-dimensional grid",
            family.len(),
            grid.dims()
        )));
    }
    if substeps == 0 {
        return Err(Error::Structural("substeps must be positive".into()));
    }
    let limit = blowup_limit(xi0);
    let mut states: Vec<Option<LaxState>> = vec![None; grid.len()];
    states[0] = Some(xi0.clone());

    for axis in 0..grid.dims() {
        let r = family.powers()[axis];
        let h = grid.step(axis);
        let pending: Vec<usize> = (axis..grid.dims()).collect();
        let seeds = grid.line_seeds(&pending);
        let lines: Vec<Result<Vec<(usize, LaxState)>>> = seeds
            .par_iter()
            .map(|&seed| {
                let mut out = Vec::with_capacity(grid.nodes()[axis]);
                let mut xi = states[seed].clone().expect("seed filled by earlier stage");
                let mut prev = seed;
                for _ in 1..grid.nodes()[axis] {
                    let next = grid.neighbour(prev, axis, 1).expect("inside grid");
                    xi = advance(&xi, r, h, substeps, limit).map_err(|_| Error::GridBlowUp {
                        node: grid.multi(next),
                    })?;
                    out.push((next, xi.clone()));
                    prev = next;
                }
                Ok(out)
            })
            .collect();
        for line in lines {
            for (f, s) in line? {
                states[f] = Some(s);
            }
        }
    }

    Ok(GridSolution {
        grid: grid.clone(),
        family: family.clone(),
        substeps,
        states: states
            .into_iter()
            .map(|s| s.expect("sweep covers every node"))
            .collect(),
    })
}

/// Integrate flows one after another, `order` listing the axes.
fn integrate_path(
    xi0: &LaxState,
    family: &FlowFamily,
    target: &[f64],
    steps: usize,
    order: &[usize],
) -> Result<LaxState> {
    let mut xi = xi0.clone();
    for &a in order {
        if target[a] != 0.0 {
            xi = integrate_flow(&xi, family.powers()[a], target[a], steps)?;
        }
    }
    Ok(xi)
}

/// Max-norm gap between reaching `target` via flow 1 then flow 2 and via
/// flow 2 then flow 1 (remaining flows in order), `steps` RK4 steps per leg.
pub fn commutativity_check(
    xi0: &LaxState,
    family: &FlowFamily,
    target: &[f64],
    steps: usize,
) -> Result<f64> {
    if family.len() < 2 {
        return Err(Error::Structural(
            "commutativity needs at least two flows".into(),
        ));
    }
    if target.len() != family.len() {
        return Err(Error::DimensionMismatch {
            expected: family.len(),
            got: target.len(),
        });
    }
    let mut order: Vec<usize> = (0..family.len()).collect();
    let a = integrate_path(xi0, family, target, steps, &order)?;
    order.swap(0, 1);
    let b = integrate_path(xi0, family, target, steps, &order)?;
    Ok(a.distance(&b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservationEntry {
    pub mu: f64,
    pub power: u32,
    pub origin_value: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    pub entries: Vec<ConservationEntry>,
}

impl ConservationReport {
    pub fn max_deviation(&self) -> f64 {
        self.entries.iter().map(|e| e.deviation).fold(0.0, f64::max)
    }
}

/// Relative drift `|inv(node) − inv(origin)| / (1 + |inv(origin)|)` of
/// `tr ξ(μ₀)^{2j}`, maximised over nodes.
pub fn conservation_report(
    sol: &GridSolution,
    mu_samples: &[f64],
    max_power: u32,
) -> Result<ConservationReport> {
    if mu_samples.is_empty() {
        return Err(Error::Structural(
            "need at least one spectral sample".into(),
        ));
    }
    if mu_samples.iter().any(|&m| m == 0.0 || !m.is_finite()) {
        return Err(Error::Domain(
            "spectral samples must be finite and nonzero".into(),
        ));
    }
    let mut entries = Vec::new();
    for &mu in mu_samples {
        let origin = spectral_invariants(sol.initial(), mu, max_power)?;
        let mut worst = vec![0.0_f64; origin.len()];
        for s in &sol.states {
            let inv = spectral_invariants(s, mu, max_power)?;
            for (k, (a, b)) in inv.iter().zip(&origin).enumerate() {
                worst[k] = worst[k].max((a - b).abs() / (1.0 + b.abs()));
            }
        }
        for (k, dev) in worst.into_iter().enumerate() {
            entries.push(ConservationEntry {
                mu,
                power: 2 * (k as u32 + 1),
                origin_value: origin[k],
                deviation: dev,
            });
        }
    }
    Ok(ConservationReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BilinearSpace, Mat, SymmetricSpaceSpec};

    fn so5() -> SymmetricSpaceSpec {
        SymmetricSpaceSpec::new(BilinearSpace::euclidean(5).unwrap(), (3, 2), 2).unwrap()
    }

    fn sample_state() -> LaxState {
        let s = so5();
        let mut k = Mat::zeros(5, 5);
        k[(0, 1)] = 0.4;
        k[(1, 0)] = -0.4;
        k[(3, 4)] = -0.3;
        k[(4, 3)] = 0.3;
        let p = s
            .from_off_block(&Mat::from_row_slice(2, 3, &[0.2, 1.0, -0.3, 0.5, 0.1, 0.7]))
            .unwrap();
        LaxState::new(vec![k, p]).unwrap()
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = GridSpec::new(vec![1.0, 2.0, 0.5], vec![3, 4, 2]).unwrap();
        for f in 0..g.len() {
            assert_eq!(g.flat(&g.multi(f)), f);
        }
        assert_eq!(g.step(1), 2.0 / 3.0);
        assert_eq!(g.refined().nodes(), &[5, 7, 3]);
        let sweep = g.sweep();
        assert_eq!(sweep.len(), g.len());
        let mut seen = vec![false; g.len()];
        for (f, from) in sweep {
            if let Some((p, _)) = from {
                assert!(seen[p]);
            }
            seen[f] = true;
        }
    }

    #[test]
    fn grid_rejects_bad_extents() {
        assert!(GridSpec::new(vec![0.0], vec![3]).is_err());
        assert!(GridSpec::new(vec![1.0], vec![0]).is_err());
        assert!(GridSpec::new(vec![1.0, 1.0], vec![3]).is_err());
    }

    #[test]
    fn zero_time_and_stationary_flow() {
        let xi = sample_state();
        assert_eq!(integrate_flow(&xi, 3, 0.0, 5).unwrap(), xi);
        let moved = integrate_flow(&xi, 1, 0.7, 20).unwrap();
        assert!(moved.distance(&xi) < 1e-14);
    }

    #[test]
    fn single_node_grid() {
        let xi = sample_state();
        let fam = FlowFamily::new(vec![1, 3]).unwrap();
        let g = GridSpec::new(vec![1.0, 1.0], vec![1, 1]).unwrap();
        let sol = integrate_grid(&xi, &fam, &g, 4).unwrap();
        assert_eq!(sol.states, vec![xi]);
    }

    #[test]
    fn stationary_first_axis() {
        let xi = sample_state();
        let fam = FlowFamily::new(vec![1, 3]).unwrap();
        let g = GridSpec::new(vec![0.3, 0.3], vec![5, 4]).unwrap();
        let sol = integrate_grid(&xi, &fam, &g, 2).unwrap();
        for j in 0..4 {
            let base = sol.state(&[0, j]);
            for i in 1..5 {
                assert!(sol.state(&[i, j]).distance(base) < 1e-13);
            }
        }
    }

    #[test]
    fn flow_count_must_match_grid() {
        let xi = sample_state();
        let fam = FlowFamily::new(vec![1]).unwrap();
        let g = GridSpec::new(vec![1.0, 1.0], vec![3, 3]).unwrap();
        assert!(integrate_grid(&xi, &fam, &g, 4).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // the cubic flow of a large state explodes over a long time
        let xi = sample_state();
        let big = xi.axpy(40.0, &xi);
        let d3 = LaxState::new(vec![
            big.coeffs()[0].clone(),
            big.coeffs()[1].clone(),
            big.coeffs()[0].clone(),
            big.coeffs()[1].clone(),
        ])
        .unwrap();
        match integrate_flow(&d3, 3, 50.0, 10) {
            Err(Error::BlowUp { t }) => assert!(t >= 0.0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn commutativity_trivial_cases() {
        let xi = sample_state();
        let fam = FlowFamily::new(vec![1, 3]).unwrap();
        assert_eq!(commutativity_check(&xi, &fam, &[0.0, 0.0], 8).unwrap(), 0.0);
        assert!(commutativity_check(&xi, &fam, &[0.2, 0.3], 8).unwrap() < 1e-12);
        let single = FlowFamily::new(vec![3]).unwrap();
        assert!(commutativity_check(&xi, &single, &[0.2], 8).is_err());
    }

    #[test]
    fn conservation_trivial_cases() {
        let xi = sample_state();
        let fam = FlowFamily::new(vec![1]).unwrap();
        let g = GridSpec::new(vec![0.5], vec![6]).unwrap();
        let sol = integrate_grid(&xi, &fam, &g, 2).unwrap();
        let rep = conservation_report(&sol, &[0.6, 1.0], 4).unwrap();
        assert!(rep.max_deviation() < 1e-14);
        assert!(conservation_report(&sol, &[0.0], 4).is_err());
        assert!(conservation_report(&sol, &[], 4).is_err());
    }
}
