//! IMEX time stepping: explicit MUSCL transport with SSP-RK2, then backward
//! Euler in `alpha` for the collision part.
//!
//! Transport is reconstructed on `phi = f e^V` with minmod slopes and upwinded
//! on the same face weights as [`Generator`](super::Generator), so `e^{-V}` is an
//! exact fixed point at `kappa = 0`. The implicit step uses the periodic
//! three-point Laplacian, whose inverse is a positive circulant applied by FFT.

use std::sync::Arc;

use rayon::prelude::*;

use super::field::PhaseField;
use super::grid::Grid;
use super::operators::AngularFft;
use crate::error::{Error, Result};

/// Bound `phi_face <= 1.5 phi_c` satisfied by minmod reconstructions.
const RECONSTRUCTION_FACTOR: f64 = 1.5;

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Largest explicit step keeping forward Euler transport positivity preserving.
pub fn cfl_bound(grid: &Grid, kappa: f64) -> f64 {
    let pl = &grid.plane;
    let (nx, ny, na) = (grid.nx(), grid.ny(), grid.nalpha);
    let vol = grid.volume();
    let worst = (0..nx)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in 0..ny {
                let ij = i * ny + j;
                let cap = pl.em[ij] * vol;
                let (ax, ay) = (grid.ax[ij], grid.ay[ij]);
                for k in 0..na {
                    let vx = pl.hy * (grid.s_k[k] + kappa * grid.halpha);
                    let vy = pl.hx * grid.c_k[k];
                    let km = if k == 0 { na - 1 } else { k - 1 };
                    let fp = -grid.sin_face[k] * ax + grid.cos_face[k] * ay;
                    let fm = -grid.sin_face[km] * ax + grid.cos_face[km] * ay;
                    let out = (vx * pl.fx(i + 1, j)).max(0.0)
                        + (-vx * pl.fx(i, j)).max(0.0)
                        + (vy * pl.fy(i, j + 1)).max(0.0)
                        + (-vy * pl.fy(i, j)).max(0.0)
                        + fp.max(0.0)
                        + (-fm).max(0.0);
                    worst = worst.max(RECONSTRUCTION_FACTOR * out / cap);
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    1.0 / worst
}

pub struct Stepper {
    pub grid: Arc<Grid>,
    pub d: f64,
    pub kappa: f64,
    pub dt: f64,
    pub cfl_bound: f64,
    fft: AngularFft,
    implicit_symbol: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: Arc<Grid>, d: f64, kappa: f64, dt: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Config(format!("diffusivity must be positive, got {d}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let bound = cfl_bound(&grid, kappa);
        if dt > bound {
            return Err(Error::Config(format!("time step {dt} exceeds the CFL bound {bound:.6e}")));
        }
        let fft = AngularFft::new(grid.nalpha);
        let h = grid.halpha;
        let implicit_symbol = (0..grid.nalpha)
            .map(|k| {
                let s = (k as f64 * h / 2.0).sin();
                1.0 / (1.0 + dt * d * 4.0 / (h * h) * s * s)
            })
            .collect();
        Ok(Self {
            grid,
            d,
            kappa,
            dt,
            cfl_bound: bound,
            fft,
            implicit_symbol,
        })
    }

    /// Uses `fraction` of the CFL bound.
    pub fn with_cfl_fraction(grid: Arc<Grid>, d: f64, kappa: f64, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!("CFL fraction must lie in (0, 1], got {fraction}")));
        }
        let dt = fraction * cfl_bound(&grid, kappa);
        Self::new(grid, d, kappa, dt)
    }

    /// Explicit transport tendency `-(T - P) f` with limited upwind fluxes.
    fn transport_rate(&self, f: &[f64], out: &mut [f64]) {
        let g = &*self.grid;
        let pl = &g.plane;
        let (nx, ny, na) = (g.nx(), g.ny(), g.nalpha);
        let row = ny * na;
        let mut phi = f.to_vec();
        phi.par_chunks_mut(na).zip(pl.ev.par_iter()).for_each(|(c, e)| {
            for v in c {
                *v *= e;
            }
        });

        let mut sx = vec![0.0; phi.len()];
        let mut sy = vec![0.0; phi.len()];
        let mut sa = vec![0.0; phi.len()];
        sx.par_chunks_mut(row)
            .zip(sy.par_chunks_mut(row))
            .zip(sa.par_chunks_mut(row))
            .enumerate()
            .for_each(|(i, ((sx, sy), sa))| {
                for j in 0..ny {
                    let base = (i * ny + j) * na;
                    for k in 0..na {
                        let c = base + k;
                        let p = phi[c];
                        let l = j * na + k;
                        if i > 0 && i + 1 < nx {
                            sx[l] = minmod(p - phi[c - row], phi[c + row] - p);
                        }
                        if j > 0 && j + 1 < ny {
                            sy[l] = minmod(p - phi[c - na], phi[c + na] - p);
                        }
                        let kp = if k + 1 == na { base } else { c + 1 };
                        let km = if k == 0 { base + na - 1 } else { c - 1 };
                        sa[l] = minmod(p - phi[km], phi[kp] - p);
                    }
                }
            });

        let upwind = |v: f64, lo: usize, hi: usize, s: &[f64]| {
            if v >= 0.0 {
                phi[lo] + 0.5 * s[lo]
            } else {
                phi[hi] - 0.5 * s[hi]
            }
        };
        let inv_vol = 1.0 / g.volume();
        let kh = self.kappa * g.halpha;
        out.par_chunks_mut(row).enumerate().for_each(|(i, orow)| {
            for j in 0..ny {
                let ij = i * ny + j;
                let (mxp, mxm) = (pl.fx(i + 1, j), pl.fx(i, j));
                let (myp, mym) = (pl.fy(i, j + 1), pl.fy(i, j));
                let (ax, ay) = (g.ax[ij], g.ay[ij]);
                let base = ij * na;
                for k in 0..na {
                    let c = base + k;
                    let vx = pl.hy * (g.s_k[k] + kh);
                    let vy = pl.hx * g.c_k[k];
                    let mut flux = 0.0;
                    if i + 1 < nx {
                        flux += vx * mxp * upwind(vx, c, c + row, &sx);
                    }
                    if i > 0 {
                        flux -= vx * mxm * upwind(vx, c - row, c, &sx);
                    }
                    if j + 1 < ny {
                        flux += vy * myp * upwind(vy, c, c + na, &sy);
                    }
                    if j > 0 {
                        flux -= vy * mym * upwind(vy, c - na, c, &sy);
                    }
                    let kp = if k + 1 == na { base } else { c + 1 };
                    let km = if k == 0 { base + na - 1 } else { c - 1 };
                    let km_face = if k == 0 { na - 1 } else { k - 1 };
                    let fp = -g.sin_face[k] * ax + g.cos_face[k] * ay;
                    let fm = -g.sin_face[km_face] * ax + g.cos_face[km_face] * ay;
                    flux += fp * upwind(fp, c, kp, &sa);
                    flux -= fm * upwind(fm, km, c, &sa);
                    orow[j * na + k] = -flux * inv_vol;
                }
            }
        });
    }

    /// One IMEX step.
    pub fn step(&self, f: &PhaseField) -> PhaseField {
        let mut values = f.values.clone();
        self.step_values(&mut values);
        PhaseField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn step_values(&self, f: &mut Vec<f64>) {
        let dt = self.dt;
        let n = f.len();
        let mut rate = vec![0.0; n];
        self.transport_rate(f, &mut rate);
        let stage: Vec<f64> = f.par_iter().zip(&rate).map(|(f, r)| f + dt * r).collect();
        self.transport_rate(&stage, &mut rate);
        f.par_iter_mut()
            .zip(stage.par_iter().zip(rate.par_iter()))
            .for_each(|(f, (s, r))| *f = 0.5 * *f + 0.5 * (s + dt * r));
        let src = std::mem::take(f);
        let mut out = vec![0.0; n];
        self.fft.apply(&src, &self.implicit_symbol, &mut out);
        *f = out;
    }

    /// Advances `steps` steps in place.
    pub fn advance(&self, f: &mut PhaseField, steps: usize) {
        for _ in 0..steps {
            self.step_values(&mut f.values);
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kinetic::random::random_unit_mass;
    use crate::plane::GridCfg;
    use crate::potential::{normalize_potential, PotentialSpec, QuadratureCfg};

    fn grid(n: usize, na: usize) -> Arc<Grid> {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        Arc::new(Grid::new(&p, &GridCfg::new(n, n, na)).unwrap())
    }

    #[test]
    fn oversized_step_is_rejected_with_the_bound() {
        let g = grid(16, 8);
        let bound = cfl_bound(&g, 0.1);
        match Stepper::new(g, 1.0, 0.1, 2.0 * bound) {
            Err(Error::Config(msg)) => assert!(msg.contains("CFL"), "{msg}"),
            other => panic!("expected config error, got {:?}", other.map(|s| s.dt)),
        }
    }

    #[test]
    fn gibbs_state_is_a_fixed_point_without_belt() {
        let g = grid(24, 16);
        let s = Stepper::with_cfl_fraction(g.clone(), 1.0, 0.0, 0.9).unwrap();
        let f = PhaseField::equilibrium(g);
        let next = s.step(&f);
        assert!(next.sub(&f).norm0() / s.dt < 1e-12);
    }

    #[test]
    fn mass_and_positivity_are_preserved() {
        let g = grid(24, 16);
        let s = Stepper::with_cfl_fraction(g.clone(), 0.7, 0.2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut f = random_unit_mass(&g, &mut rng);
        let m0 = f.mass();
        s.advance(&mut f, 50);
        assert!((f.mass() - m0).abs() < 1e-13 * m0);
        assert!(f.min() >= -1e-14 * f.max_abs());
    }

    #[test]
    fn indicator_stays_non_negative() {
        let g = grid(16, 8);
        let s = Stepper::with_cfl_fraction(g.clone(), 1.0, 0.1, 1.0).unwrap();
        let mut f = PhaseField::from_fn(g, |x, y, a| if x.abs() < 1.0 && y > 0.0 && a < 1.0 { 1.0 } else { 0.0 });
        for _ in 0..20 {
            f = s.step(&f);
            assert!(f.min() >= -1e-14 * f.max_abs(), "{}", f.min());
        }
    }
}
