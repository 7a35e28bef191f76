//! Time evolution with recorded diagnostics, and decay-rate fits.

use serde::{Deserialize, Serialize};

use super::auxiliary::{dissipation_terms, Dissipation, GronwallCoefficients};
use super::field::PhaseField;
use super::operators::Generator;
use super::stepper::Stepper;
use crate::elliptic::SolverCfg;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub mass: f64,
    /// `|f - M F|_kappa` when a reference state is given.
    pub e: Option<f64>,
    pub dissipation: Option<Dissipation>,
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub field: PhaseField,
    pub records: Vec<Record>,
}

/// Entropy monitoring attached to an evolution.
#[derive(Debug, Clone, Copy)]
pub struct Monitor {
    pub coefficients: GronwallCoefficients,
    pub solver: SolverCfg,
}

pub struct EvolveOpts<'a> {
    pub horizon: f64,
    pub record_interval: f64,
    pub reference: Option<&'a PhaseField>,
    pub monitor: Option<Monitor>,
    /// Stops once `e / e(0)` falls below this value.
    pub stop_ratio: Option<f64>,
}

pub fn evolve(stepper: &Stepper, f0: &PhaseField, opts: &EvolveOpts) -> Result<Evolution> {
    if !(opts.horizon >= 0.0 && opts.record_interval > 0.0) {
        return Err(Error::Config("horizon and record interval must be positive".into()));
    }
    let mass = f0.mass();
    let op = opts.monitor.map(|_| Generator::new(stepper.grid.clone(), stepper.d, stepper.kappa));
    let stride = ((opts.record_interval / stepper.dt).round() as usize).max(1);
    let total = (opts.horizon / stepper.dt - 1e-9).ceil() as usize;
    let record = |f: &PhaseField, t: f64| -> Result<Record> {
        let e = opts.reference.map(|r| f.axpy(-mass, r).normk());
        let dissipation = match (&op, &opts.monitor) {
            (Some(op), Some(m)) => Some(dissipation_terms(op, f, &m.coefficients, &m.solver)?),
            _ => None,
        };
        Ok(Record {
            t,
            mass: f.mass(),
            e,
            dissipation,
        })
    };
    let mut f = f0.clone();
    let mut records = vec![record(&f, 0.0)?];
    let e0 = records[0].e;
    let mut n = 0;
    while n < total {
        let m = stride.min(total - n);
        stepper.advance(&mut f, m);
        n += m;
        if f.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite density at t = {}", n as f64 * stepper.dt)));
        }
        let r = record(&f, n as f64 * stepper.dt)?;
        let done = matches!((opts.stop_ratio, r.e, e0), (Some(s), Some(e), Some(e0)) if e < s * e0);
        records.push(r);
        if done {
            break;
        }
    }
    Ok(Evolution { field: f, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayCfg {
    pub horizon: f64,
    pub record_interval: f64,
    /// Fit window in `E / E(0)`.
    pub window_hi: f64,
    pub window_lo: f64,
    /// Allowed relative rise of `E` above its running minimum inside the window.
    pub monotone_tol: f64,
    /// `E(0)` at or below this counts as already stationary.
    pub stationary_tol: f64,
}

impl Default for DecayCfg {
    fn default() -> Self {
        Self {
            horizon: 200.0,
            record_interval: 0.1,
            window_hi: 1e-1,
            window_lo: 1e-3,
            monotone_tol: 0.1,
            stationary_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DecayOutcome {
    Fitted {
        lambda: f64,
        r_squared: f64,
        t_start: f64,
        t_end: f64,
        points: usize,
    },
    AlreadyStationary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub outcome: DecayOutcome,
    /// `(t, E)` pairs.
    pub series: Vec<(f64, f64)>,
}

impl DecayReport {
    pub fn lambda(&self) -> Option<f64> {
        match self.outcome {
            DecayOutcome::Fitted { lambda, .. } => Some(lambda),
            DecayOutcome::AlreadyStationary => None,
        }
    }
}

/// Least-squares line through `(t, ln E)`: returns `(slope, r_squared)`.
pub fn log_linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mt, ml) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, e)| (a + t / n, b + e.ln() / n));
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for (t, e) in points {
        let (dt, dl) = (t - mt, e.ln() - ml);
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    let slope = stl / stt;
    let r2 = if sll == 0.0 { 1.0 } else { stl * stl / (stt * sll) };
    (slope, r2)
}

pub fn measure_decay(stepper: &Stepper, f0: &PhaseField, fk: &PhaseField, cfg: &DecayCfg) -> Result<DecayReport> {
    if !(cfg.window_lo > 0.0 && cfg.window_lo < cfg.window_hi && cfg.window_hi <= 1.0) {
        return Err(Error::Config("decay window must satisfy 0 < lo < hi <= 1".into()));
    }
    let e0 = f0.axpy(-f0.mass(), fk).normk();
    if e0 <= cfg.stationary_tol {
        return Ok(DecayReport {
            outcome: DecayOutcome::AlreadyStationary,
            series: vec![(0.0, e0)],
        });
    }
    let ev = evolve(
        stepper,
        f0,
        &EvolveOpts {
            horizon: cfg.horizon,
            record_interval: cfg.record_interval,
            reference: Some(fk),
            monitor: None,
            stop_ratio: Some(0.5 * cfg.window_lo),
        },
    )?;
    let series: Vec<(f64, f64)> = ev.records.iter().map(|r| (r.t, r.e.unwrap_or(f64::NAN))).collect();
    let history: Vec<f64> = series.iter().map(|p| p.1).collect();

    let start = series.iter().position(|p| p.1 <= cfg.window_hi * e0);
    let end = series.iter().position(|p| p.1 < cfg.window_lo * e0);
    let (Some(start), Some(end)) = (start, end) else {
        return Err(Error::non_convergence(
            "decay fit",
            format!("E did not fall below {:.1e} E(0) by t = {}", cfg.window_lo, cfg.horizon),
            history,
        ));
    };
    let window = &series[start..end];
    let mut running = f64::INFINITY;
    for &(t, e) in window {
        if e > running * (1.0 + cfg.monotone_tol) {
            return Err(Error::non_convergence(
                "decay fit",
                format!("E rises to {e:.3e} at t = {t} above its running minimum {running:.3e}"),
                history,
            ));
        }
        running = running.min(e);
    }
    if window.len() < 3 {
        return Err(Error::non_convergence(
            "decay fit",
            format!("only {} samples in the fit window; reduce the record interval", window.len()),
            history,
        ));
    }
    let (slope, r_squared) = log_linear_fit(window);
    Ok(DecayReport {
        outcome: DecayOutcome::Fitted {
            lambda: -slope,
            r_squared,
            t_start: window[0].0,
            t_end: window[window.len() - 1].0,
            points: window.len(),
        },
        series,
    })
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

    #[test]
    fn fit_recovers_exact_exponential() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.5, 3.0 * (-0.7 * i as f64 * 0.5).exp())).collect();
        let (slope, r2) = log_linear_fit(&pts);
        assert!((slope + 0.7).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    fn stepper() -> Stepper {
        let p = normalize_potential(&PotentialSpec::quadratic(1.0).unwrap(), &QuadratureCfg::default()).unwrap();
        let g = Arc::new(Grid::new(&p, &GridCfg::new(24, 24, 16)).unwrap());
        Stepper::with_cfl_fraction(g, 1.0, 0.0, 0.9).unwrap()
    }

    #[test]
    fn stationary_input_skips_the_fit() {
        let s = stepper();
        let f = PhaseField::equilibrium(s.grid.clone());
        let rep = measure_decay(&s, &f, &f, &DecayCfg::default()).unwrap();
        assert_eq!(rep.outcome, DecayOutcome::AlreadyStationary);
    }

    #[test]
    fn perturbation_decays_exponentially() {
        let s = stepper();
        let fk = PhaseField::equilibrium(s.grid.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f0 = random_unit_mass(&s.grid, &mut rng);
        let rep = measure_decay(&s, &f0, &fk, &DecayCfg::default()).unwrap();
        match rep.outcome {
            DecayOutcome::Fitted { lambda, r_squared, .. } => {
                assert!(lambda > 0.0);
                assert!(r_squared > 0.95, "{r_squared}");
            }
            _ => panic!("expected a fit"),
        }
    }
}
