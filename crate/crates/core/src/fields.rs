//! Seeded random grid fields for tests and derivative suites.
//!
//! Two flavors:
//!
//! * `smooth_random_field`: a fixed, small number of low-frequency modes
//!   with coefficients drawn from the generator. The construction is
//!   parametric in the continuum coordinates and consumes the same draws
//!   regardless of resolution, so one seed describes one continuum function
//!   across grid refinements (used by the refinement-stability checks).
//! * `rough_random_field`: independent uniform samples per node, for
//!   exercising exact discrete identities (self-adjointness, positivity)
//!   on data with no smoothness at all.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::elliptic::ScalarField;
use crate::manifold::{Discretization, ManifoldSpec};

/// The crate-wide deterministic generator. All test randomness flows from
/// one of these.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const TORUS_MODES: usize = 8;
const SPHERE_MODES: usize = 7;

/// Low-frequency random field with values of order one. Smooth in the
/// continuum sense; refining the grid samples the same function.
pub fn smooth_random_field(d: &Discretization, rng: &mut impl Rng) -> ScalarField {
    match d.spec() {
        ManifoldSpec::Torus4 { lengths, .. } => {
            let lengths = *lengths;
            let mut modes = Vec::with_capacity(TORUS_MODES);
            for _ in 0..TORUS_MODES {
                let k = [
                    rng.gen_range(-2i32..=2),
                    rng.gen_range(-2i32..=2),
                    rng.gen_range(-2i32..=2),
                    rng.gen_range(-2i32..=2),
                ];
                let amp = rng.gen_range(-0.5..0.5);
                let phase = rng.gen_range(0.0..2.0 * PI);
                modes.push((k, amp, phase));
            }
            let vals = d
                .coords()
                .iter()
                .map(|x| {
                    modes
                        .iter()
                        .map(|(k, amp, phase)| {
                            let arg: f64 = (0..4)
                                .map(|j| 2.0 * PI * k[j] as f64 * x[j] / lengths[j])
                                .sum();
                            amp * (arg + phase).cos()
                        })
                        .sum()
                })
                .collect();
            d.scalar_field(vals)
        }
        ManifoldSpec::Sphere4Radial { radius, .. } => {
            let rho = *radius;
            let amps: Vec<f64> = (0..SPHERE_MODES)
                .map(|ell| rng.gen_range(-0.5..0.5) / (1.0 + ell as f64 / 2.0))
                .collect();
            // cos(l t) has vanishing t-derivative at both poles, so the
            // profile is compatible with the radial symmetry.
            let vals = d
                .base_distance()
                .iter()
                .map(|&r| {
                    let t = r / rho;
                    amps.iter()
                        .enumerate()
                        .map(|(ell, a)| a * (ell as f64 * t).cos())
                        .sum()
                })
                .collect();
            d.scalar_field(vals)
        }
    }
}

/// Independent uniform(-1, 1) samples at every node.
pub fn rough_random_field(d: &Discretization, rng: &mut impl Rng) -> ScalarField {
    let vals = (0..d.node_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    d.scalar_field(vals)
}

/// Smooth random field shifted to be pointwise nonnegative (minimum 0).
pub fn nonneg_random_field(d: &Discretization, rng: &mut impl Rng) -> ScalarField {
    let u = smooth_random_field(d, rng);
    let m = u.min_value();
    u.map(|v| v - m)
}

/// Smooth random field shifted and scaled into [lo, hi].
pub fn bounded_random_field(
    d: &Discretization,
    rng: &mut impl Rng,
    lo: f64,
    hi: f64,
) -> ScalarField {
    assert!(lo < hi);
    let u = smooth_random_field(d, rng);
    let (min, max) = (u.min_value(), u.max_value());
    let span = (max - min).max(1e-300);
    u.map(|v| lo + (hi - lo) * (v - min) / span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldSpec;

    fn torus(n: usize) -> Discretization {
        ManifoldSpec::Torus4 {
            lengths: [2.0 * PI; 4],
            nodes: [n; 4],
        }
        .build()
        .unwrap()
    }

    fn sphere(n: usize) -> Discretization {
        ManifoldSpec::Sphere4Radial {
            radius: 1.0,
            radial_nodes: n,
        }
        .build()
        .unwrap()
    }

    #[test]
    fn same_seed_same_field() {
        let d = torus(8);
        let a = smooth_random_field(&d, &mut seeded_rng(5));
        let b = smooth_random_field(&d, &mut seeded_rng(5));
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn smooth_field_is_resolution_independent() {
        // Nodes of the N=8 grid are a subset of the N=16 grid nodes; the
        // same seed must produce the same continuum function on both.
        let d8 = torus(8);
        let d16 = torus(16);
        let u8 = smooth_random_field(&d8, &mut seeded_rng(9));
        let u16 = smooth_random_field(&d16, &mut seeded_rng(9));
        for (idx8, x) in d8.coords().iter().enumerate() {
            let mi: Vec<usize> = x
                .iter()
                .map(|&c| (c / (2.0 * PI / 16.0)).round() as usize)
                .collect();
            let idx16 = ((mi[0] * 16 + mi[1]) * 16 + mi[2]) * 16 + mi[3];
            assert!(
                (u8.values()[idx8] - u16.values()[idx16]).abs() < 1e-12,
                "node {idx8} differs"
            );
        }
    }

    #[test]
    fn sphere_field_is_pole_compatible() {
        let d = sphere(128);
        let u = smooth_random_field(&d, &mut seeded_rng(3));
        let dt = PI / 127.0;
        let v = u.values();
        // Vanishing derivative at the poles: one-sided difference is O(dt^2).
        assert!((v[1] - v[0]).abs() < 30.0 * dt * dt);
        assert!((v[126] - v[127]).abs() < 30.0 * dt * dt);
    }

    #[test]
    fn rough_field_stays_in_unit_band() {
        let d = torus(8);
        let u = rough_random_field(&d, &mut seeded_rng(1));
        assert!(u.max_value() < 1.0 && u.min_value() > -1.0);
    }

    #[test]
    fn nonneg_field_touches_zero() {
        let d = sphere(64);
        let u = nonneg_random_field(&d, &mut seeded_rng(2));
        assert!(u.min_value() == 0.0);
        assert!(u.max_value() > 0.0);
    }

    #[test]
    fn bounded_field_respects_bounds() {
        let d = torus(8);
        let u = bounded_random_field(&d, &mut seeded_rng(4), 1.0, 2.0);
        assert!(u.min_value() >= 1.0 && u.max_value() <= 2.0);
    }
}
