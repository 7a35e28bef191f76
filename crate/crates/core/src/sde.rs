//! Euler-Maruyama simulation of the lay-down process
//! `dx = (tau(alpha) + kappa e1) dt`, `d alpha = -tau_perp(alpha) . grad V dt + sqrt(2 D) dW`
//! and comparison of its histogram with a grid density.
//!
//! Particle `i` draws from the ChaCha8 stream `i` of the run seed, so results
//! do not depend on how particles are spread over threads.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetic::{wrap_angle, Grid, PhaseField};
use crate::plane::GridCfg;
use crate::potential::{PotentialKind, PotentialSpec};

/// Upper bound on `dt (1 + kappa)`, the distance travelled per step.
pub const STEP_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialLaw {
    Point { x0: [f64; 2], alpha0: f64 },
    /// Isotropic normal positions with standard deviation `sigma`, uniform angles.
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub kappa: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub dt: f64,
    pub n_particles: usize,
    pub horizon: f64,
    pub seed: u64,
    pub initial: InitialLaw,
    /// Keep every `n`-th step as a snapshot.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            d: 1.0,
            dt: 0.01,
            n_particles: 100_000,
            horizon: 10.0,
            seed: 0,
            initial: InitialLaw::Gaussian { sigma: 1.0 },
            snapshot_every: None,
        }
    }
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.d >= 0.0 && self.d.is_finite()) {
            bad.push(format!("D = {} must satisfy D >= 0", self.d));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            bad.push(format!("kappa = {} must satisfy kappa >= 0", self.kappa));
        }
        if !(self.dt > 0.0) || self.dt * (1.0 + self.kappa) > STEP_LIMIT {
            bad.push(format!("dt = {} must satisfy 0 < dt (1 + kappa) <= {STEP_LIMIT}", self.dt));
        }
        if self.n_particles == 0 {
            bad.push("n_particles must be at least 1".into());
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            bad.push(format!("horizon = {} must be finite and non-negative", self.horizon));
        }
        if let InitialLaw::Gaussian { sigma } = self.initial {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                bad.push(format!("sigma = {sigma} must be non-negative"));
            }
        }
        if self.snapshot_every == Some(0) {
            bad.push("snapshot_every must be at least 1".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt - 1e-9).ceil().max(0.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: [f64; 2],
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub seed: u64,
    pub t: f64,
    pub steps: u64,
    pub states: Vec<Particle>,
    /// Word position of every particle's stream, so runs can be continued.
    pub cursors: Vec<u128>,
    pub snapshots: Vec<(f64, Vec<Particle>)>,
}

fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One Euler-Maruyama step.
#[inline]
pub fn em_step(p: &PotentialSpec, kappa: f64, d: f64, dt: f64, s: Particle, xi: f64) -> Particle {
    let (sn, cs) = s.alpha.sin_cos();
    let g = p.grad(s.x);
    let drift = -(-sn * g[0] + cs * g[1]);
    Particle {
        x: [s.x[0] + (cs + kappa) * dt, s.x[1] + sn * dt],
        alpha: wrap_angle(s.alpha + drift * dt + (2.0 * d * dt).sqrt() * xi),
    }
}

struct Track {
    end: Particle,
    cursor: u128,
    snaps: Vec<Particle>,
}

fn run_particle(
    p: &PotentialSpec,
    cfg: &SdeConfig,
    index: usize,
    start: Particle,
    cursor: Option<u128>,
    first_step: u64,
    steps: u64,
) -> std::result::Result<Track, (u64, Particle)> {
    let mut rng = particle_rng(cfg.seed, index);
    if let Some(c) = cursor {
        rng.set_word_pos(c);
    }
    let mut s = start;
    let mut snaps = Vec::new();
    for n in 1..=steps {
        let xi: f64 = StandardNormal.sample(&mut rng);
        s = em_step(p, cfg.kappa, cfg.d, cfg.dt, s, xi);
        if !(s.x[0].is_finite() && s.x[1].is_finite() && s.alpha.is_finite()) {
            return Err((first_step + n, s));
        }
        if let Some(k) = cfg.snapshot_every {
            if (first_step + n).is_multiple_of(k as u64) {
                snaps.push(s);
            }
        }
    }
    Ok(Track {
        end: s,
        cursor: rng.get_word_pos(),
        snaps,
    })
}

fn initial_state(cfg: &SdeConfig, index: usize) -> (Particle, u128) {
    let mut rng = particle_rng(cfg.seed, index);
    let s = match cfg.initial {
        InitialLaw::Point { x0, alpha0 } => Particle {
            x: x0,
            alpha: wrap_angle(alpha0),
        },
        InitialLaw::Gaussian { sigma } => {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let u: f64 = rand::Rng::random(&mut rng);
            Particle {
                x: [sigma * a, sigma * b],
                alpha: wrap_angle(std::f64::consts::TAU * u),
            }
        }
    };
    (s, rng.get_word_pos())
}

fn advance_all(p: &PotentialSpec, cfg: &SdeConfig, e: &mut Ensemble, steps: u64) -> Result<()> {
    let first = e.steps;
    let tracks: Vec<_> = e
        .states
        .par_iter()
        .zip(e.cursors.par_iter())
        .enumerate()
        .map(|(i, (s, c))| run_particle(p, cfg, i, *s, Some(*c), first, steps))
        .collect();
    let mut snap_times: Vec<u64> = Vec::new();
    if let Some(k) = cfg.snapshot_every {
        snap_times = (first + 1..=first + steps).filter(|n| n % k as u64 == 0).collect();
    }
    let mut snaps: Vec<Vec<Particle>> = vec![Vec::with_capacity(e.states.len()); snap_times.len()];
    for (i, tr) in tracks.into_iter().enumerate() {
        match tr {
            Ok(tr) => {
                e.states[i] = tr.end;
                e.cursors[i] = tr.cursor;
                for (slot, s) in snaps.iter_mut().zip(tr.snaps) {
                    slot.push(s);
                }
            }
            Err((step, s)) => {
                return Err(Error::Numerical(format!(
                    "particle {i} left the finite range at step {step}: x = {:?}, alpha = {}",
                    s.x, s.alpha
                )))
            }
        }
    }
    e.steps += steps;
    e.t = e.steps as f64 * cfg.dt;
    for (n, s) in snap_times.into_iter().zip(snaps) {
        e.snapshots.push((n as f64 * cfg.dt, s));
    }
    Ok(())
}

pub fn simulate_ensemble(cfg: &SdeConfig, p: &PotentialSpec) -> Result<Ensemble> {
    cfg.validate()?;
    if p.kind != PotentialKind::Flat {
        p.validate()?;
    }
    let (states, cursors): (Vec<_>, Vec<_>) = (0..cfg.n_particles).into_par_iter().map(|i| initial_state(cfg, i)).unzip();
    let mut e = Ensemble {
        seed: cfg.seed,
        t: 0.0,
        steps: 0,
        states,
        cursors,
        snapshots: Vec::new(),
    };
    advance_all(p, cfg, &mut e, cfg.steps())?;
    Ok(e)
}

/// Continues an ensemble for `horizon` more time units with the same streams.
pub fn continue_ensemble(e: &mut Ensemble, cfg: &SdeConfig, p: &PotentialSpec, horizon: f64) -> Result<()> {
    cfg.validate()?;
    if e.seed != cfg.seed || e.states.len() != cfg.n_particles {
        return Err(Error::Config("ensemble does not match the configuration".into()));
    }
    let steps = (horizon / cfg.dt - 1e-9).ceil().max(0.0) as u64;
    advance_all(p, cfg, e, steps)
}

#[derive(Debug, Clone)]
pub struct EmpiricalDensity {
    pub field: PhaseField,
    /// Particles outside the box, counted in the nearest boundary cell.
    pub outside: usize,
}

/// Histogram on the cells of `grid`, normalized to unit mass.
pub fn empirical_density(states: &[Particle], grid: &Arc<Grid>) -> EmpiricalDensity {
    let pl = &grid.plane;
    let (nx, ny, na) = (grid.nx(), grid.ny(), grid.nalpha);
    let l = pl.half_width;
    let locate = |s: &Particle| -> (usize, bool) {
        let fi = ((s.x[0] + l) / pl.hx).floor();
        let fj = ((s.x[1] + l) / pl.hy).floor();
        let inside = fi >= 0.0 && fi < nx as f64 && fj >= 0.0 && fj < ny as f64;
        let i = fi.clamp(0.0, (nx - 1) as f64) as usize;
        let j = fj.clamp(0.0, (ny - 1) as f64) as usize;
        let k = (wrap_angle(s.alpha) / grid.halpha).round() as usize % na;
        ((i * ny + j) * na + k, inside)
    };
    let (counts, outside) = states
        .par_chunks(4096)
        .map(|chunk| {
            let mut c = vec![0u64; grid.len()];
            let mut out = 0usize;
            for s in chunk {
                let (idx, inside) = locate(s);
                c[idx] += 1;
                out += usize::from(!inside);
            }
            (c, out)
        })
        .reduce(
            || (vec![0u64; grid.len()], 0),
            |(mut a, oa), (b, ob)| {
                for (a, b) in a.iter_mut().zip(&b) {
                    *a += b;
                }
                (a, oa + ob)
            },
        );
    let scale = 1.0 / (states.len() as f64 * grid.cell_weight());
    EmpiricalDensity {
        field: PhaseField {
            grid: grid.clone(),
            values: counts.iter().map(|&c| c as f64 * scale).collect(),
        },
        outside,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distance {
    pub l1: f64,
    pub tv: f64,
}

pub fn compare_distributions(emp: &PhaseField, reference: &PhaseField) -> Result<Distance> {
    emp.same_grid(reference)?;
    let (ma, mb) = (emp.mass(), reference.mass());
    if (ma - mb).abs() > 1e-8 || (ma - 1.0).abs() > 1e-8 {
        return Err(Error::Config(format!("densities must both have unit mass, got {ma} and {mb}")));
    }
    let l1 = emp.values.iter().zip(&reference.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * emp.grid.cell_weight();
    Ok(Distance { l1, tv: 0.5 * l1 })
}

/// Block-averages a field onto a grid coarser by `(fx, fy, fa)`; mass is kept.
pub fn coarsen(f: &PhaseField, factors: [usize; 3]) -> Result<PhaseField> {
    let g = &*f.grid;
    let [fx, fy, fa] = factors;
    let (nx, ny, na) = (g.nx(), g.ny(), g.nalpha);
    if fx == 0 || fy == 0 || fa == 0 || nx % fx != 0 || ny % fy != 0 || na % fa != 0 {
        return Err(Error::Config(format!("coarsening factors {factors:?} must divide {nx}x{ny}x{na}")));
    }
    let cfg = GridCfg {
        nx: nx / fx,
        ny: ny / fy,
        nalpha: na / fa,
        half_width: Some(g.plane.half_width),
        ..g.cfg
    };
    let coarse = Arc::new(Grid::new(&g.potential, &cfg)?);
    let (cy, ca) = (ny / fy, na / fa);
    let mut values = vec![0.0; coarse.len()];
    let norm = 1.0 / (fx * fy * fa) as f64;
    for (c, v) in f.values.iter().enumerate() {
        let k = c % na;
        let ij = c / na;
        let (i, j) = (ij / ny, ij % ny);
        let base = ((i / fx) * cy + j / fy) * ca;
        // Angle cells are centred, so for even `fa` the fine cell on a coarse
        // face is split evenly between its two neighbours.
        if fa % 2 == 0 && k % fa == fa / 2 {
            let lo = k / fa;
            values[base + lo] += 0.5 * v * norm;
            values[base + (lo + 1) % ca] += 0.5 * v * norm;
        } else {
            values[base + ((k + fa / 2) / fa) % ca] += v * norm;
        }
    }
    Ok(PhaseField { grid: coarse, values })
}

/// Slope of `ln y` against `ln x` by least squares.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln() / n, b + y.ln() / n));
    let (sxx, sxy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        let (dx, dy) = (x.ln() - mx, y.ln() - my);
        (a + dx * dx, b + dx * dy)
    });
    sxy / sxx
}
