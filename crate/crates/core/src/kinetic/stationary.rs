//! Stationary state by Anderson-accelerated time integration.
//!
//! The fixed-point map is `S^k`, `k` IMEX steps spanning `window` time units.
//! Mixing coefficients sum to one, so every iterate keeps the mass of `f0`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::field::PhaseField;
use super::operators::Generator;
use super::stepper::Stepper;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryCfg {
    /// Target for `|f(t + w) - f(t)|_0 / w`.
    pub tol: f64,
    pub tmax: f64,
    pub window: f64,
    pub memory: usize,
    /// The iteration stops at `tol * target_fraction` so that two solves agree
    /// well within `2 tol`.
    pub target_fraction: f64,
}

impl Default for StationaryCfg {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            tmax: 2000.0,
            window: 1.0,
            memory: 10,
            target_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryReport {
    #[serde(skip)]
    pub field: PhaseField,
    /// `|S^k F - F|_0 / (k dt)` at the returned state.
    pub residual: f64,
    /// `|L_h F|_0` with the central generator.
    pub generator_residual: f64,
    pub time: f64,
    pub iterations: usize,
    pub mass: f64,
    pub min_value: f64,
    pub history: Vec<f64>,
}

fn weighted_dot(ev: &[f64], na: usize, a: &[f64], b: &[f64]) -> f64 {
    a.chunks(na)
        .zip(b.chunks(na))
        .zip(ev)
        .map(|((a, b), e)| e * a.iter().zip(b).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// Solves `(G + ridge) x = b` for a small dense symmetric system.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i]).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1e-13 * scale;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= m * a[col][c];
            }
            b[r] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn solve_stationary(stepper: &Stepper, f0: &PhaseField, cfg: &StationaryCfg) -> Result<StationaryReport> {
    if !(cfg.tol > 0.0 && cfg.tmax > 0.0 && cfg.window > 0.0 && cfg.target_fraction > 0.0) {
        return Err(Error::Config("stationary tolerances and horizons must be positive".into()));
    }
    let mass = f0.mass();
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!("initial datum must have unit mass, got {mass}")));
    }
    if f0.min() < -1e-14 * f0.max_abs() {
        return Err(Error::Precondition("initial datum must be non-negative".into()));
    }
    let grid = stepper.grid.clone();
    let na = grid.nalpha;
    let ev = &grid.plane.ev;
    let cw = grid.cell_weight();
    let norm = |v: &[f64]| (weighted_dot(ev, na, v, v) * cw).sqrt();

    let k = ((cfg.window / stepper.dt).ceil() as usize).max(1);
    let span = k as f64 * stepper.dt;
    let target = cfg.tol * cfg.target_fraction;

    let mut x = f0.values.clone();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut dr: VecDeque<Vec<f64>> = VecDeque::new();
    let mut dg: VecDeque<Vec<f64>> = VecDeque::new();
    let mut history = Vec::new();
    let mut time = 0.0;

    loop {
        let mut gx = x.clone();
        for _ in 0..k {
            stepper.step_values(&mut gx);
        }
        time += span;
        let r: Vec<f64> = gx.iter().zip(&x).map(|(g, x)| g - x).collect();
        let res = norm(&r) / span;
        if !res.is_finite() {
            return Err(Error::Numerical(format!("stationary iteration diverged at t = {time}")));
        }
        history.push(res);
        if res <= target {
            let field = PhaseField {
                grid: grid.clone(),
                values: gx,
            };
            let op = Generator::new(grid.clone(), stepper.d, stepper.kappa);
            let generator_residual = op.apply_generator(&field).norm0();
            return Ok(StationaryReport {
                residual: res,
                generator_residual,
                time,
                iterations: history.len(),
                mass: field.mass(),
                min_value: field.min(),
                history,
                field,
            });
        }
        if time >= cfg.tmax {
            return Err(Error::non_convergence(
                "stationary state",
                format!("residual {res:.3e} above {target:.3e} at t = {time:.1}"),
                history,
            ));
        }

        if let Some((rp, gp)) = prev.take() {
            dr.push_back(r.iter().zip(&rp).map(|(a, b)| a - b).collect());
            dg.push_back(gx.iter().zip(&gp).map(|(a, b)| a - b).collect());
            if dr.len() > cfg.memory {
                dr.pop_front();
                dg.pop_front();
            }
        }
        let mut next = gx.clone();
        if !dr.is_empty() {
            let m = dr.len();
            let gram: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|j| weighted_dot(ev, na, &dr[i], &dr[j])).collect())
                .collect();
            let rhs: Vec<f64> = (0..m).map(|i| weighted_dot(ev, na, &dr[i], &r)).collect();
            match solve_small(gram, rhs) {
                Some(gamma) => {
                    for (c, d) in gamma.iter().zip(&dg) {
                        for (n, d) in next.iter_mut().zip(d) {
                            *n -= c * d;
                        }
                    }
                    let max = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if next.iter().any(|v| *v < -1e-10 * max) {
                        next.copy_from_slice(&gx);
                        dr.clear();
                        dg.clear();
                    }
                }
                None => {
                    dr.clear();
                    dg.clear();
                }
            }
        }
        prev = Some((r, gx));
        x = next;
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kinetic::grid::Grid;
    use crate::kinetic::random::random_unit_mass;
    use crate::plane::GridCfg;
    use crate::potential::{normalize_potential, PotentialSpec, QuadratureCfg};

    fn stepper(kappa: f64) -> Stepper {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        let g = Arc::new(Grid::new(&p, &GridCfg::new(24, 24, 16)).unwrap());
        Stepper::with_cfl_fraction(g, 1.0, kappa, 0.9).unwrap()
    }

    #[test]
    fn gibbs_state_is_returned_immediately() {
        let s = stepper(0.0);
        let f0 = PhaseField::equilibrium(s.grid.clone());
        let rep = solve_stationary(&s, &f0, &StationaryCfg::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.field.sub(&f0).norm0() < 1e-12);
        assert!(rep.generator_residual < 1e-12);
    }

    #[test]
    fn two_initial_data_reach_the_same_state() {
        let s = stepper(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = StationaryCfg::default();
        let a = solve_stationary(&s, &random_unit_mass(&s.grid, &mut rng), &cfg).unwrap();
        let b = solve_stationary(&s, &random_unit_mass(&s.grid, &mut rng), &cfg).unwrap();
        let gap = a.field.sub(&b.field).norm0();
        assert!(gap <= 2.0 * cfg.tol, "gap {gap}, iterations {} {}", a.iterations, b.iterations);
        assert!((a.mass - 1.0).abs() < 1e-12);
        assert!(a.min_value >= -1e-10 * a.field.max_abs());
        let step = s.step(&a.field).sub(&a.field).norm0() / s.dt;
        assert!(step <= cfg.tol, "{step}");
    }

    #[test]
    fn short_horizon_reports_history() {
        let s = stepper(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = StationaryCfg {
            tmax: 2.0,
            ..StationaryCfg::default()
        };
        match solve_stationary(&s, &random_unit_mass(&s.grid, &mut rng), &cfg) {
            Err(Error::NonConvergence { history, .. }) => assert_eq!(history.len(), 2),
            other => panic!("expected non-convergence, got {:?}", other.map(|r| r.residual)),
        }
    }
}
