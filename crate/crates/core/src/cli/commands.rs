use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::RunConfig;
use super::output::Emitter;
use crate::constants::{estimate_elliptic_constant, estimate_spectral_gap, hypo_constants, HypoConstants};
use crate::error::{Error, Result};
use crate::kinetic::random::random_unit_mass;
use crate::kinetic::{
    evolve, measure_decay, solve_stationary, DecayReport, EvolveOpts, GronwallCoefficients, Grid, Monitor, PhaseField,
    StationaryReport, Stepper,
};
use crate::potential::{check_hypotheses, normalize_potential, PotentialKind, PotentialSpec};
use crate::sde::{coarsen, compare_distributions, empirical_density, simulate_ensemble, Ensemble};
use crate::weight::weight_params;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimates {
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub gap_iterations: usize,
    #[serde(rename = "C_V")]
    pub c_v: f64,
}

pub struct Session {
    pub cfg: RunConfig,
    pub potential: PotentialSpec,
    pub out: Emitter,
}

impl Session {
    pub fn new(cfg: RunConfig, command: &str, threads: usize) -> Result<Self> {
        let spec = cfg.potential_spec();
        let potential = match spec.kind {
            PotentialKind::Flat => return Err(Error::Config("the flat potential is only available to the SDE".into())),
            _ => normalize_potential(&spec, &cfg.quadrature)?,
        };
        let out = Emitter::new(&cfg, command, threads)?;
        Ok(Self { cfg, potential, out })
    }

    fn estimates(&self) -> Result<Estimates> {
        let g = self.cfg.estimate_grid();
        let gap = estimate_spectral_gap(&self.potential, &g)?;
        let cv = estimate_elliptic_constant(&self.potential, &g, self.cfg.estimates.elliptic_trials, self.cfg.seed)?;
        Ok(Estimates {
            lambda: gap.lambda,
            gap_iterations: gap.iterations,
            c_v: cv.c_v,
        })
    }

    fn chain(&self, est: &Estimates, kappa: f64) -> Result<HypoConstants> {
        hypo_constants(&self.potential, kappa, self.cfg.d, est.lambda, est.c_v, &self.cfg.chain)
    }

    fn grid(&self, hc: Option<&HypoConstants>) -> Result<Arc<Grid>> {
        let g = Grid::new(&self.potential, &self.cfg.grid)?;
        Ok(Arc::new(match hc.and_then(|h| h.weight.map(|w| (w, h.weight_coefficient()))) {
            Some((w, c)) if c > 0.0 => g.with_weight(w, c),
            _ => g,
        }))
    }

    fn stepper(&self, grid: Arc<Grid>) -> Result<Stepper> {
        match self.cfg.stepper.dt {
            Some(dt) => Stepper::new(grid, self.cfg.d, self.cfg.kappa, dt),
            None => Stepper::with_cfl_fraction(grid, self.cfg.d, self.cfg.kappa, self.cfg.stepper.cfl_fraction),
        }
    }

    fn initial_datum(&self, grid: &Arc<Grid>) -> PhaseField {
        random_unit_mass(grid, &mut ChaCha8Rng::seed_from_u64(self.cfg.seed))
    }

    fn stationary_state(&self, stepper: &Stepper) -> Result<StationaryReport> {
        solve_stationary(stepper, &PhaseField::equilibrium(stepper.grid.clone()), &self.cfg.stationary)
    }

    pub fn check_potential(&mut self) -> Result<Value> {
        let radii: Vec<f64> = (0..24).map(|i| 0.5 * 100f64.powf(i as f64 / 23.0)).collect();
        let rep = check_hypotheses(&self.potential, &radii, &self.cfg.quadrature)?;
        self.out.csv(
            "hypotheses.csv",
            &["r", "grad_over_v", "hess_over_grad"],
            rep.h5_ratios.iter().map(|s| vec![Some(s.r), Some(s.grad_over_v), Some(s.hess_over_grad)]),
        )?;
        let v = json!({ "normalization_shift": self.potential.shift, "hypotheses": rep });
        self.out.json("check-potential.json", &v)?;
        Ok(v)
    }

    fn constants_value(&self) -> Result<(Estimates, HypoConstants, Value)> {
        let est = self.estimates()?;
        let hc = self.chain(&est, self.cfg.kappa)?;
        let lambda_0 = if self.cfg.kappa == 0.0 {
            hc.lambda_kappa
        } else {
            self.chain(&est, 0.0)?.lambda_kappa
        };
        let v = json!({
            "estimates": est,
            "constants": hc,
            "lambda_0": lambda_0,
            "decay_prefactor": hc.decay_prefactor(),
        });
        Ok((est, hc, v))
    }

    pub fn constants(&mut self) -> Result<Value> {
        let (_, _, v) = self.constants_value()?;
        self.out.json("constants.json", &v)?;
        Ok(v)
    }

    fn weight_value(&mut self) -> Result<Value> {
        let w = weight_params(self.cfg.kappa, self.cfg.d)?;
        let lyap = w.verify_lyapunov(&self.potential, &self.cfg.chain.search)?;
        self.out.csv(
            "lyapunov_margin.csv",
            &["r", "worst_margin"],
            lyap.profile.iter().map(|s| vec![Some(s.r), Some(s.worst_margin)]),
        )?;
        Ok(json!({ "weight": w, "lyapunov": lyap }))
    }

    pub fn verify_weight(&mut self) -> Result<Value> {
        let v = self.weight_value()?;
        self.out.json("verify-weight.json", &v)?;
        Ok(v)
    }

    fn stationary_value(&mut self, stepper: &Stepper) -> Result<(StationaryReport, Value)> {
        let rep = self.stationary_state(stepper)?;
        let gibbs = PhaseField::equilibrium(stepper.grid.clone());
        self.out.field_csv("stationary_field.csv", &rep.field)?;
        self.out.csv(
            "stationary_residual.csv",
            &["iteration", "residual"],
            rep.history.iter().enumerate().map(|(i, r)| vec![Some((i + 1) as f64), Some(*r)]),
        )?;
        let v = json!({
            "dt": stepper.dt,
            "cfl_bound": stepper.cfl_bound,
            "report": rep,
            "distance_to_gibbs": rep.field.sub(&gibbs).norm0(),
        });
        Ok((rep, v))
    }

    pub fn stationary(&mut self) -> Result<Value> {
        let stepper = self.stepper(self.grid(None)?)?;
        let (_, v) = self.stationary_value(&stepper)?;
        self.out.json("stationary.json", &v)?;
        Ok(v)
    }

    /// Constants when the chain is feasible; the failure message otherwise.
    fn try_constants(&self) -> Result<std::result::Result<HypoConstants, String>> {
        let est = self.estimates()?;
        match self.chain(&est, self.cfg.kappa) {
            Ok(hc) => Ok(Ok(hc)),
            Err(e @ Error::Infeasible(_)) => Ok(Err(e.to_string())),
            Err(e) => Err(e),
        }
    }

    pub fn evolve(&mut self) -> Result<Value> {
        let hc = self.try_constants()?;
        let grid = self.grid(hc.as_ref().ok())?;
        let stepper = self.stepper(grid.clone())?;
        let reference = self.stationary_state(&stepper)?.field;
        let monitor = hc.as_ref().ok().map(|h| Monitor {
            coefficients: GronwallCoefficients {
                eps1: h.eps1,
                gamma1: h.gamma1,
                gamma2: h.gamma2_gronwall,
            },
            solver: self.cfg.solver,
        });
        let f0 = self.initial_datum(&grid);
        let ev = evolve(
            &stepper,
            &f0,
            &EvolveOpts {
                horizon: self.cfg.evolve.horizon,
                record_interval: self.cfg.evolve.record_interval,
                reference: Some(&reference),
                monitor,
                stop_ratio: None,
            },
        )?;
        self.out.csv(
            "evolve.csv",
            &["t", "E", "G", "dGdt", "rhs_gronwall"],
            ev.records.iter().map(|r| {
                let d = r.dissipation;
                vec![Some(r.t), r.e, d.map(|d| d.g), d.map(|d| d.dgdt), d.map(|d| d.rhs_gronwall)]
            }),
        )?;
        self.out.field_csv("evolve_final.csv", &ev.field)?;
        let worst_excess = ev
            .records
            .iter()
            .filter_map(|r| r.dissipation)
            .map(|d| d.excess())
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        let mass_drift = ev.records.iter().map(|r| (r.mass - 1.0).abs()).fold(0.0, f64::max);
        let v = json!({
            "dt": stepper.dt,
            "records": ev.records.len(),
            "final_t": ev.records.last().map(|r| r.t),
            "final_E": ev.records.last().and_then(|r| r.e),
            "max_gronwall_excess": worst_excess,
            "max_mass_drift": mass_drift,
            "constants": hc.as_ref().ok(),
            "constants_error": hc.as_ref().err(),
        });
        self.out.json("evolve.json", &v)?;
        Ok(v)
    }

    fn decay_value(&mut self, stepper: &Stepper, reference: &PhaseField, lambda_kappa: Option<f64>) -> Result<(DecayReport, Value)> {
        let f0 = self.initial_datum(&stepper.grid);
        let rep = measure_decay(stepper, &f0, reference, &self.cfg.decay)?;
        self.out.csv(
            "decay.csv",
            &["t", "E"],
            rep.series.iter().map(|(t, e)| vec![Some(*t), Some(*e)]),
        )?;
        let v = json!({
            "dt": stepper.dt,
            "fit": rep.outcome,
            "lambda_meas": rep.lambda(),
            "lambda_kappa": lambda_kappa,
            "bound_holds": match (rep.lambda(), lambda_kappa) {
                (Some(m), Some(k)) => Some(m >= k),
                _ => None,
            },
        });
        Ok((rep, v))
    }

    pub fn decay(&mut self) -> Result<Value> {
        let hc = self.try_constants()?;
        let grid = self.grid(hc.as_ref().ok())?;
        let stepper = self.stepper(grid)?;
        let reference = self.stationary_state(&stepper)?.field;
        let (_, mut v) = self.decay_value(&stepper, &reference, hc.as_ref().ok().map(|h| h.lambda_kappa))?;
        v["constants_error"] = json!(hc.as_ref().err());
        self.out.json("decay.json", &v)?;
        Ok(v)
    }

    fn sde_run(&mut self) -> Result<(Ensemble, Value)> {
        let scfg = self.cfg.sde_config();
        let e = simulate_ensemble(&scfg, &self.potential)?;
        self.out.csv(
            "sde_states.csv",
            &["x", "y", "alpha"],
            e.states.iter().map(|s| vec![Some(s.x[0]), Some(s.x[1]), Some(s.alpha)]),
        )?;
        if !e.snapshots.is_empty() {
            self.out.csv(
                "sde_snapshots.csv",
                &["t", "x", "y", "alpha"],
                e.snapshots
                    .iter()
                    .flat_map(|(t, ss)| ss.iter().map(move |s| vec![Some(*t), Some(s.x[0]), Some(s.x[1]), Some(s.alpha)])),
            )?;
        }
        let n = e.states.len() as f64;
        let mean = e.states.iter().fold([0.0; 2], |m, s| [m[0] + s.x[0] / n, m[1] + s.x[1] / n]);
        let v = json!({
            "t": e.t,
            "steps": e.steps,
            "n_particles": e.states.len(),
            "mean_position": mean,
        });
        Ok((e, v))
    }

    fn histogram(&mut self, e: &Ensemble, grid: &Arc<Grid>) -> Result<(PhaseField, usize)> {
        let fine = PhaseField::zeros(grid.clone());
        let coarse = coarsen(&fine, self.cfg.sde.coarsen)?.grid;
        let h = empirical_density(&e.states, &coarse);
        self.out.field_csv("sde_histogram.csv", &h.field)?;
        Ok((h.field, h.outside))
    }

    pub fn sde(&mut self) -> Result<Value> {
        let (e, mut v) = self.sde_run()?;
        let grid = self.grid(None)?;
        let (_, outside) = self.histogram(&e, &grid)?;
        v["outside_box"] = json!(outside);
        self.out.json("sde.json", &v)?;
        Ok(v)
    }

    /// Runs every stage. An infeasible constant chain is reported in its
    /// section and returned after the remaining stages have been written.
    pub fn full_report(&mut self) -> Result<(Value, Option<Error>)> {
        let mut deferred = None;
        let potential = self.check_potential()?;
        let (hc, constants) = match self.constants_value() {
            Ok((_, hc, v)) => (Some(hc), v),
            Err(e @ Error::Infeasible(_)) => {
                let v = json!({ "error": e.to_string() });
                deferred = Some(e);
                (None, v)
            }
            Err(e) => return Err(e),
        };
        let weight = if !self.potential.gradient_bounded() {
            self.weight_value()?
        } else {
            Value::Null
        };
        let grid = self.grid(hc.as_ref())?;
        let stepper = self.stepper(grid.clone())?;
        let (st, stationary) = self.stationary_value(&stepper)?;
        let (_, decay) = self.decay_value(&stepper, &st.field, hc.as_ref().map(|h| h.lambda_kappa))?;
        let (e, mut sde) = self.sde_run()?;
        let (hist, outside) = self.histogram(&e, &grid)?;
        let reference = coarsen(&st.field, self.cfg.sde.coarsen)?;
        sde["outside_box"] = json!(outside);
        sde["distance_to_stationary"] = json!(compare_distributions(&hist, &reference)?);
        let v = json!({
            "check_potential": potential,
            "constants": constants,
            "verify_weight": weight,
            "stationary": stationary,
            "decay": decay,
            "sde": sde,
        });
        self.out.json("full-report.json", &v)?;
        Ok((v, deferred))
    }
}
