//! Finite differences of node-valued vectors on a [`GridSpec`].

use crate::lax::GridSpec;

/// First derivative along `axis`: central in the interior, one-sided second
/// order on the boundary (first order when the axis has two nodes).
pub fn d1(grid: &GridSpec, data: &[Vec<f64>], flat: usize, axis: usize) -> Vec<f64> {
    let len = data[flat].len();
    let h = grid.step(axis);
    let n = grid.nodes()[axis];
    if n < 2 {
        return vec![0.0; len];
    }
    let i = grid.multi(flat)[axis];
    let at = |delta: isize| {
        &data[grid
            .neighbour(flat, axis, delta)
            .expect("stencil inside grid")]
    };
    if i > 0 && i + 1 < n {
        let (p, m) = (at(1), at(-1));
        return (0..len).map(|k| (p[k] - m[k]) / (2.0 * h)).collect();
    }
    let sign = if i == 0 { 1.0 } else { -1.0 };
    let s = if i == 0 { 1 } else { -1 };
    if n == 2 {
        let (a, b) = (&data[flat], at(s));
        return (0..len).map(|k| sign * (b[k] - a[k]) / h).collect();
    }
    let (a, b, c) = (&data[flat], at(s), at(2 * s));
    (0..len)
        .map(|k| sign * (-3.0 * a[k] + 4.0 * b[k] - c[k]) / (2.0 * h))
        .collect()
}

/// Central second derivative `∂ᵢ∂ⱼ`; `None` unless the node is interior in
/// both axes.
pub fn d2(grid: &GridSpec, data: &[Vec<f64>], flat: usize, i: usize, j: usize) -> Option<Vec<f64>> {
    let len = data[flat].len();
    if i == j {
        let h = grid.step(i);
        let p = grid.neighbour(flat, i, 1)?;
        let m = grid.neighbour(flat, i, -1)?;
        let (p, c, m) = (&data[p], &data[flat], &data[m]);
        return Some(
            (0..len)
                .map(|k| (p[k] - 2.0 * c[k] + m[k]) / (h * h))
                .collect(),
        );
    }
    let (hi, hj) = (grid.step(i), grid.step(j));
    let ip = grid.neighbour(flat, i, 1)?;
    let im = grid.neighbour(flat, i, -1)?;
    let pp = &data[grid.neighbour(ip, j, 1)?];
    let pm = &data[grid.neighbour(ip, j, -1)?];
    let mp = &data[grid.neighbour(im, j, 1)?];
    let mm = &data[grid.neighbour(im, j, -1)?];
    Some(
        (0..len)
            .map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * hi * hj))
            .collect(),
    )
}

/// Is the node at least `margin` nodes away from every boundary?
pub fn is_interior(grid: &GridSpec, flat: usize, margin: usize) -> bool {
    grid.multi(flat)
        .iter()
        .zip(grid.nodes())
        .all(|(&i, &n)| i >= margin && i + margin < n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_differentiated_exactly() {
        let g = GridSpec::new(vec![1.0, 2.0], vec![5, 7]).unwrap();
        let data: Vec<Vec<f64>> = (0..g.len())
            .map(|f| {
                let x = g.coord(&g.multi(f));
                vec![x[0] * x[0] + 3.0 * x[0] * x[1] - x[1] * x[1]]
            })
            .collect();
        for f in 0..g.len() {
            let x = g.coord(&g.multi(f));
            let dx = d1(&g, &data, f, 0)[0];
            let dy = d1(&g, &data, f, 1)[0];
            assert!((dx - (2.0 * x[0] + 3.0 * x[1])).abs() < 1e-12);
            assert!((dy - (3.0 * x[0] - 2.0 * x[1])).abs() < 1e-12);
            if let Some(dxy) = d2(&g, &data, f, 0, 1) {
                assert!((dxy[0] - 3.0).abs() < 1e-12);
                assert!(is_interior(&g, f, 1));
            }
            if let Some(dyy) = d2(&g, &data, f, 1, 1) {
                assert!((dyy[0] + 2.0).abs() < 1e-12);
            }
        }
    }
}
