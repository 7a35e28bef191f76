use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::ChainCfg;
use crate::elliptic::SolverCfg;
use crate::error::{Error, Result};
use crate::kinetic::{DecayCfg, StationaryCfg};
use crate::plane::GridCfg;
use crate::potential::{PotentialKind, PotentialSpec, QuadratureCfg};
use crate::sde::{InitialLaw, SdeConfig};

/// Everything a run depends on. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub potential: PotentialKind,
    pub kappa: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub seed: u64,
    pub output: PathBuf,
    pub grid: GridCfg,
    pub stepper: StepperCfg,
    pub stationary: StationaryCfg,
    pub evolve: EvolveCfg,
    pub decay: DecayCfg,
    pub sde: SdeBlock,
    pub solver: SolverCfg,
    pub chain: ChainCfg,
    pub quadrature: QuadratureCfg,
    pub estimates: EstimateCfg,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: PotentialKind::Family { k: 1.0, s: 2.0 },
            kappa: 0.0,
            d: 1.0,
            seed: 0,
            output: PathBuf::from("laydown-out"),
            grid: GridCfg::default(),
            stepper: StepperCfg::default(),
            stationary: StationaryCfg::default(),
            evolve: EvolveCfg::default(),
            decay: DecayCfg::default(),
            sde: SdeBlock::default(),
            solver: SolverCfg::default(),
            chain: ChainCfg::default(),
            quadrature: QuadratureCfg::default(),
            estimates: EstimateCfg::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperCfg {
    /// Fraction of the CFL bound used when `dt` is not given.
    pub cfl_fraction: f64,
    pub dt: Option<f64>,
}

impl Default for StepperCfg {
    fn default() -> Self {
        Self {
            cfl_fraction: 0.9,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveCfg {
    pub horizon: f64,
    pub record_interval: f64,
}

impl Default for EvolveCfg {
    fn default() -> Self {
        Self {
            horizon: 2.0,
            record_interval: 0.1,
        }
    }
}

/// SDE settings; `kappa`, `D` and `seed` come from the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdeBlock {
    pub dt: f64,
    pub n_particles: usize,
    pub horizon: f64,
    pub initial: InitialLaw,
    pub snapshot_every: Option<usize>,
    /// Histogram cells are blocks of this many PDE cells in `(x, y, alpha)`.
    pub coarsen: [usize; 3],
}

impl Default for SdeBlock {
    fn default() -> Self {
        let s = SdeConfig::default();
        Self {
            dt: s.dt,
            n_particles: s.n_particles,
            horizon: s.horizon,
            initial: s.initial,
            snapshot_every: s.snapshot_every,
            coarsen: [8, 8, 8],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateCfg {
    /// Random right-hand sides for the elliptic regularity constant.
    pub elliptic_trials: usize,
    /// Plane grid for `Lambda` and `C_V`; the run grid when absent.
    pub grid: Option<GridCfg>,
}

impl Default for EstimateCfg {
    fn default() -> Self {
        Self {
            elliptic_trials: 8,
            grid: None,
        }
    }
}

impl RunConfig {
    pub fn potential_spec(&self) -> PotentialSpec {
        PotentialSpec {
            kind: self.potential,
            shift: 0.0,
        }
    }

    pub fn sde_config(&self) -> SdeConfig {
        SdeConfig {
            kappa: self.kappa,
            d: self.d,
            dt: self.sde.dt,
            n_particles: self.sde.n_particles,
            horizon: self.sde.horizon,
            seed: self.seed,
            initial: self.sde.initial,
            snapshot_every: self.sde.snapshot_every,
        }
    }

    pub fn estimate_grid(&self) -> GridCfg {
        self.estimates.grid.unwrap_or(self.grid)
    }

    /// Checks every numeric range and reports all offending keys at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        note(&mut bad, self.potential_spec().validate());
        if !(self.d > 0.0 && self.d.is_finite()) {
            bad.push(format!("D = {} must satisfy D > 0", self.d));
        }
        if !(self.kappa >= 0.0 && self.kappa < 1.0) {
            bad.push(format!("kappa = {} must satisfy 0 <= kappa < 1", self.kappa));
        }
        note(&mut bad, self.grid.validate());
        if let Some(g) = self.estimates.grid {
            note(&mut bad, g.validate());
        }
        if !(self.stepper.cfl_fraction > 0.0 && self.stepper.cfl_fraction <= 1.0) {
            bad.push(format!("stepper.cfl_fraction = {} must lie in (0, 1]", self.stepper.cfl_fraction));
        }
        if let Some(dt) = self.stepper.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bad.push(format!("stepper.dt = {dt} must be positive"));
            }
        }
        let st = &self.stationary;
        if !(st.tol > 0.0 && st.tmax > 0.0 && st.window > 0.0 && st.target_fraction > 0.0 && st.memory >= 1) {
            bad.push("stationary.tol, tmax, window, target_fraction must be positive and memory >= 1".into());
        }
        if !(self.evolve.horizon >= 0.0 && self.evolve.record_interval > 0.0) {
            bad.push("evolve.horizon must be >= 0 and evolve.record_interval > 0".into());
        }
        let dc = &self.decay;
        if !(dc.window_lo > 0.0 && dc.window_lo < dc.window_hi && dc.window_hi <= 1.0) {
            bad.push("decay.window_lo < decay.window_hi must lie in (0, 1]".into());
        }
        if !(dc.horizon > 0.0 && dc.record_interval > 0.0) {
            bad.push("decay.horizon and decay.record_interval must be positive".into());
        }
        note(&mut bad, self.sde_config().validate());
        if self.sde.coarsen.contains(&0) {
            bad.push("sde.coarsen entries must be >= 1".into());
        }
        if !(self.solver.tol > 0.0 && self.solver.max_iter > 0) {
            bad.push("solver.tol and solver.max_iter must be positive".into());
        }
        if self.estimates.elliptic_trials == 0 {
            bad.push("estimates.elliptic_trials must be >= 1".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let key = RunConfig {
            output: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&key).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn note(bad: &mut Vec<String>, r: Result<()>) {
    if let Err(e) = r {
        bad.push(match e {
            Error::Config(m) | Error::Precondition(m) => m,
            other => other.to_string(),
        });
    }
}

/// Reads a TOML config, or the `config` object of a JSON result file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let inner = v.get("config").cloned().unwrap_or(v);
        serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
    };
    cfg.validate()?;
    Ok(cfg)
}
