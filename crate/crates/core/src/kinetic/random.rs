//! Smooth random fields for property checks and initial data.
//!
//! Grid-scale oscillations are avoided on purpose: checkerboard modes sit in the
//! near-kernel of the discrete gradient and make macroscopic checks meaningless.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;

use super::field::PhaseField;
use super::grid::Grid;
use crate::elliptic::{remove_gibbs_mean, smooth_plane_field};

const PLANE_MODES: usize = 6;
const PLANE_K_MAX: f64 = 3.0;
const ANGULAR_MODES: usize = 3;

/// `e^{-V} sum_m (u_m cos m alpha + w_m sin m alpha)` with smooth `u_m, w_m`.
pub fn random_field(grid: &Arc<Grid>, rng: &mut impl Rng) -> PhaseField {
    let pl = &grid.plane;
    let na = grid.nalpha;
    let mut values = vec![0.0; grid.len()];
    for m in 0..=ANGULAR_MODES {
        let u = smooth_plane_field(pl, rng, PLANE_MODES, PLANE_K_MAX);
        let w = if m == 0 {
            vec![0.0; pl.len()]
        } else {
            smooth_plane_field(pl, rng, PLANE_MODES, PLANE_K_MAX)
        };
        let scale = 1.0 / (1.0 + m as f64);
        for ij in 0..pl.len() {
            let e = pl.em[ij] * scale;
            for k in 0..na {
                let a = m as f64 * grid.alphas[k];
                values[ij * na + k] += e * (u[ij] * a.cos() + w[ij] * a.sin());
            }
        }
    }
    PhaseField {
        grid: grid.clone(),
        values,
    }
}

/// Zero-mass local equilibrium `e^{-V} u`.
pub fn random_macroscopic(grid: &Arc<Grid>, rng: &mut impl Rng) -> PhaseField {
    let mut u = smooth_plane_field(&grid.plane, rng, PLANE_MODES, PLANE_K_MAX);
    remove_gibbs_mean(&grid.plane, &mut u);
    PhaseField::lift(grid.clone(), &u)
}

/// Positive unit-mass data `e^{-V(x - x0)} (1 + a cos(alpha - alpha0))`.
pub fn random_unit_mass(grid: &Arc<Grid>, rng: &mut impl Rng) -> PhaseField {
    let r0 = rng.random::<f64>().sqrt();
    let th = TAU * rng.random::<f64>();
    let x0 = [r0 * th.cos(), r0 * th.sin()];
    let amp = 0.9 * rng.random::<f64>();
    let a0 = TAU * rng.random::<f64>();
    let p = grid.potential;
    let f = PhaseField::from_fn(grid.clone(), |x, y, a| {
        let v = p.value([x - x0[0], y - x0[1]]);
        (-v).exp() * (1.0 + amp * (a - a0).cos())
    });
    let mass = f.mass();
    f.scaled(1.0 / mass)
}
