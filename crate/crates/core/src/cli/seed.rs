//! Initial Lax states: explicit, or rejection-sampled from a seeded stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{rows_to_mat, RunConfig, SeedConfig};
use crate::algebra::{cartan_diagnostics, decompose, Mat, SymmetricSpaceSpec};
use crate::error::{Error, Result};
use crate::frame::connection_from_state;
use crate::geometry::{gauge_to_normal_form, CARTAN_TOL};
use crate::lax::{GridSolution, GridSpec};
use crate::loops::{FlowFamily, LaxState};

pub const MAX_SEED_ATTEMPTS: usize = 1000;

/// Seeded initial state and the number of draws it took.
#[derive(Debug, Clone)]
pub struct Seeded {
    pub state: LaxState,
    pub attempts: usize,
}

/// Would `ξ₀` give Cartan tangent directions (and, for definite signature,
/// an unambiguous normal-form gauge) at the origin?
pub fn acceptable(xi0: &LaxState, spec: &SymmetricSpaceSpec, family: &FlowFamily) -> Result<bool> {
    let k = family.len();
    let grid = GridSpec::new(vec![1.0; k], vec![1; k])?;
    let sol = GridSolution {
        grid: grid.clone(),
        family: family.clone(),
        substeps: 1,
        states: vec![xi0.clone()],
    };
    let conn = connection_from_state(&sol, spec)?;
    let a1: Vec<Mat> = conn.values[0].iter().map(|(_, a)| a.clone()).collect();
    if !cartan_diagnostics(&a1, spec, CARTAN_TOL)?.passes(spec.rank(), CARTAN_TOL) {
        return Ok(false);
    }
    if spec.space().is_definite() {
        return Ok(gauge_to_normal_form(&conn, &grid).is_ok());
    }
    Ok(true)
}

fn draw(
    rng: &mut ChaCha8Rng,
    normal: &Normal<f64>,
    spec: &SymmetricSpaceSpec,
    d: usize,
) -> Result<LaxState> {
    let n = spec.dim();
    let coeffs = (0..=d)
        .map(|k| {
            let g = Mat::from_fn(n, n, |_, _| normal.sample(rng));
            let x = spec.space().project_to_algebra(&g)?;
            let (kp, pp) = decompose(&x, spec)?;
            Ok(if k % 2 == 0 { kp } else { pp })
        })
        .collect::<Result<Vec<_>>>()?;
    LaxState::new(coeffs)
}

/// Explicit coefficients are used verbatim (after the twist check); a
/// numeric seed draws Gaussian coefficients until [`acceptable`] holds.
pub fn seed_initial_state(
    config: &RunConfig,
    spec: &SymmetricSpaceSpec,
    family: &FlowFamily,
) -> Result<Seeded> {
    match &config.seed {
        SeedConfig::Explicit(coeffs) => {
            let mats = coeffs.iter().map(|m| rows_to_mat(m)).collect();
            let state = LaxState::new_twisted(mats, spec, 1e-12)
                .map_err(|e| Error::Config(format!("explicit seed: {e}")))?;
            Ok(Seeded { state, attempts: 0 })
        }
        SeedConfig::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let normal = Normal::new(0.0, config.seed_scale)
                .map_err(|e| Error::Config(format!("seedScale: {e}")))?;
            for attempt in 1..=MAX_SEED_ATTEMPTS {
                let state = draw(&mut rng, &normal, spec, config.d)?;
                if acceptable(&state, spec, family)? {
                    return Ok(Seeded {
                        state,
                        attempts: attempt,
                    });
                }
            }
            Err(Error::Seeding {
                attempts: MAX_SEED_ATTEMPTS,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::mat_to_rows;

    #[test]
    fn default_seed_is_deterministic_and_quick() {
        let c = RunConfig::default_rank2();
        let r = c.validate().unwrap();
        let a = seed_initial_state(&c, &r.spec, &r.family).unwrap();
        let b = seed_initial_state(&c, &r.spec, &r.family).unwrap();
        assert_eq!(a.state, b.state);
        assert!(a.attempts <= 10);
        assert!(a.state.twist_residual(&r.spec).unwrap() < 1e-15);
    }

    #[test]
    fn explicit_normal_form_is_used_verbatim() {
        let mut c = RunConfig::default_rank2();
        let r = c.validate().unwrap();
        let mut b = Mat::zeros(2, 3);
        b[(0, 1)] = 1.0;
        b[(1, 2)] = 0.5;
        let top = r.spec.from_off_block(&b).unwrap();
        let zero = Mat::zeros(5, 5);
        let coeffs = [zero.clone(), zero.clone(), zero, top];
        c.seed = SeedConfig::Explicit(coeffs.iter().map(mat_to_rows).collect());
        let s = seed_initial_state(&c, &r.spec, &r.family).unwrap();
        assert_eq!(s.state.coeffs(), &coeffs[..]);
        assert!(acceptable(&s.state, &r.spec, &r.family).unwrap());
    }

    #[test]
    fn untwisted_explicit_seed_is_a_config_error() {
        let mut c = RunConfig::default_rank2();
        let r = c.validate().unwrap();
        let mut bad = Mat::zeros(5, 5);
        bad[(0, 3)] = 1.0;
        bad[(3, 0)] = -1.0;
        let zero = Mat::zeros(5, 5);
        // an off-block element in even degree violates the twist
        let coeffs = [bad, zero.clone(), zero.clone(), zero];
        c.seed = SeedConfig::Explicit(coeffs.iter().map(mat_to_rows).collect());
        assert!(matches!(
            seed_initial_state(&c, &r.spec, &r.family),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn impossible_rank_exhausts_attempts() {
        // two independent directions never span a rank-1 subspace
        let mut c = RunConfig::default_rank2();
        c.spec = crate::cli::config::SpecConfig::explicit((5, 0), (3, 2), 1);
        let r = c.validate().unwrap();
        assert!(matches!(
            seed_initial_state(&c, &r.spec, &r.family),
            Err(Error::Seeding {
                attempts: MAX_SEED_ATTEMPTS
            })
        ));
    }
}
