//! Geometry extracted from frames: the plane field of the curved flat, the
//! normal-form gauge, the developing isometry and the reconstructed
//! immersion.

pub mod fd;
mod gauge;
mod immersion;

pub use gauge::{
    developing_map, gauge_to_normal_form, generic_weight, DevelopingMap, GaugeField, CARTAN_TOL,
    CLOSEDNESS_TOL, GAUGE_TOL, SPECTRAL_GAP_TOL,
};
pub use immersion::{
    gauged_frames, immersion_from_frames, reconstruct_immersion, verify_space_form_geometry,
    GeometryReport, ImmersionData, DEGENERATE_RATIO,
};

use crate::algebra::{Mat, SymmetricSpaceSpec};
use crate::error::{Error, Result};
use crate::frame::FrameField;
use crate::lax::GridSpec;

/// Projector `P = F·Π₀·F⁻¹` onto the image of the base plane at each node.
pub fn curved_flat_planes(frames: &FrameField, spec: &SymmetricSpaceSpec) -> Vec<Mat> {
    let pi0 = spec.base_projector();
    frames
        .frames
        .iter()
        .map(|f| f * &pi0 * spec.space().group_inverse(f))
        .collect()
}

/// `μ = −√c / (2√(1−c)) · (λ − λ⁻¹)`.
pub fn spectral_reparam(lambda: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Domain(format!("c = {c} is outside (0, 1)")));
    }
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Domain("λ must be finite and nonzero".into()));
    }
    Ok(-c.sqrt() / (2.0 * (1.0 - c).sqrt()) * (lambda - 1.0 / lambda))
}

/// Speed and geodesic curvature of the curve `γ = F·e_ν` in S², where `e_ν`
/// is the single block-2 axis of a rank-1 split `(2, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveDiagnostics {
    pub mu: f64,
    pub gamma: Vec<[f64; 3]>,
    /// Sampled at nodes at least two away from either end.
    pub speed: Vec<f64>,
    pub curvature: Vec<f64>,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Fourth-order finite-difference speed and geodesic curvature
/// `det(γ, γ', γ'') / |γ'|³` along a one-dimensional grid.
pub fn curve_diagnostics(
    frames: &FrameField,
    spec: &SymmetricSpaceSpec,
    grid: &GridSpec,
) -> Result<CurveDiagnostics> {
    if spec.dim() != 3 || spec.split() != (2, 1) || !spec.space().is_definite() {
        return Err(Error::Structural(
            "curve diagnostics need the split (2, 1) of ℝ³".into(),
        ));
    }
    if grid.dims() != 1 || grid.nodes()[0] < 5 {
        return Err(Error::Structural(
            "need a 1-dimensional grid with at least 5 nodes".into(),
        ));
    }
    let nu = spec.second_block()[0];
    let gamma: Vec<[f64; 3]> = frames
        .frames
        .iter()
        .map(|f| [f[(0, nu)], f[(1, nu)], f[(2, nu)]])
        .collect();
    let h = grid.step(0);
    let n = gamma.len();
    let mut speed = Vec::with_capacity(n);
    let mut curvature = Vec::with_capacity(n);
    for i in 2..n - 2 {
        let g = |o: isize| gamma[(i as isize + o) as usize];
        let mut d1 = [0.0; 3];
        let mut d2 = [0.0; 3];
        for c in 0..3 {
            let (m2, m1, z, p1, p2) = (g(-2)[c], g(-1)[c], g(0)[c], g(1)[c], g(2)[c]);
            d1[c] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
            d2[c] = (-m2 + 16.0 * m1 - 30.0 * z + 16.0 * p1 - p2) / (12.0 * h * h);
        }
        let s = dot3(d1, d1).sqrt();
        speed.push(s);
        curvature.push(dot3(g(0), cross(d1, d2)) / (s * s * s));
    }
    Ok(CurveDiagnostics {
        mu: frames.mu,
        gamma,
        speed,
        curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{group_exp, max_abs, BilinearSpace};
    use crate::frame::{integrate_frame, ConnectionForm};

    #[test]
    fn identity_frame_gives_base_plane() {
        let spec = SymmetricSpaceSpec::preset("sphere-grassmannian", 2, 0).unwrap();
        let ff = FrameField {
            mu: 1.0,
            frames: vec![Mat::identity(5, 5)],
        };
        let p = curved_flat_planes(&ff, &spec);
        assert!(max_abs(&(&p[0] - spec.base_projector())) < 1e-15);
    }

    #[test]
    fn isotropy_fixes_base_plane() {
        let spec = SymmetricSpaceSpec::preset("sphere-grassmannian", 2, 0).unwrap();
        let mut k = Mat::zeros(5, 5);
        k[(0, 2)] = 0.4;
        k[(2, 0)] = -0.4;
        k[(3, 4)] = 1.3;
        k[(4, 3)] = -1.3;
        let ff = FrameField {
            mu: 1.0,
            frames: vec![group_exp(&k, 1.0).unwrap()],
        };
        let p = curved_flat_planes(&ff, &spec);
        assert!(max_abs(&(&p[0] - spec.base_projector())) < 1e-14);
    }

    #[test]
    fn rotated_plane_is_a_rank_two_projector() {
        let spec =
            SymmetricSpaceSpec::new(BilinearSpace::euclidean(3).unwrap(), (2, 1), 1).unwrap();
        let x = Mat::from_row_slice(3, 3, &[0.0, 0.3, -0.7, -0.3, 0.0, 0.2, 0.7, -0.2, 0.0]);
        let ff = FrameField {
            mu: 1.0,
            frames: vec![group_exp(&x, 1.0).unwrap()],
        };
        let p = &curved_flat_planes(&ff, &spec)[0];
        assert!(max_abs(&(p * p - p)) < 1e-12);
        assert!(max_abs(&(p - p.transpose())) < 1e-12);
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(p.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-10 && (ev[1] - 1.0).abs() < 1e-10 && (ev[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reparam_values() {
        assert_eq!(spectral_reparam(1.0, 0.3).unwrap(), 0.0);
        assert_eq!(spectral_reparam(-1.0, 0.3).unwrap(), 0.0);
        assert!((spectral_reparam(2.0, 0.5).unwrap() + 0.75).abs() < 1e-15);
        assert_eq!(
            spectral_reparam(0.5, 0.7).unwrap(),
            -spectral_reparam(2.0, 0.7).unwrap()
        );
        assert!(spectral_reparam(2.0, 1.0).is_err());
        assert!(spectral_reparam(2.0, 0.0).is_err());
        assert!(spectral_reparam(0.0, 0.5).is_err());
    }

    #[test]
    fn constant_tangent_traces_a_great_circle() {
        let spec =
            SymmetricSpaceSpec::new(BilinearSpace::euclidean(3).unwrap(), (2, 1), 1).unwrap();
        let b = Mat::from_row_slice(1, 2, &[0.6, 0.8]);
        let a1 = spec.from_off_block(&b).unwrap();
        let grid = GridSpec::new(vec![1.0], vec![201]).unwrap();
        let conn = ConnectionForm::constant(spec.clone(), &grid, vec![(Mat::zeros(3, 3), a1)]);
        for mu in [0.5, 2.0] {
            let ff = integrate_frame(&conn, mu, &grid).unwrap();
            let cd = curve_diagnostics(&ff, &spec, &grid).unwrap();
            for s in &cd.speed {
                assert!((s - mu).abs() < 1e-8);
            }
            for k in &cd.curvature {
                assert!(k.abs() < 1e-8);
            }
        }
    }
}
