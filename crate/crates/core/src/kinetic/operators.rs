//! Discrete generator `L = Q - T + P` in finite-volume form on `phi = f e^V`.
//!
//! The transport fluxes are exact face integrals of `e^{-V} (tau, -tau_perp . grad V)`
//! with `e^{-V}` frozen at face centres, which makes them divergence free cell by
//! cell. With central face values this gives an exactly skew-symmetric `T`, an
//! exactly conserved mass and `L e^{-V} = 0` at `kappa = 0`.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::PhaseField;
use super::grid::Grid;

/// Fourier multipliers applied along the angular axis of every plane cell.
pub struct AngularFft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl AngularFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Signed mode number of FFT bin `k`.
    pub fn mode(&self, k: usize) -> f64 {
        if k <= self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        }
    }

    /// `out = F^{-1} diag(symbol) F f` per angular column.
    pub fn apply(&self, f: &[f64], symbol: &[f64], out: &mut [f64]) {
        let n = self.n;
        let scale = 1.0 / n as f64;
        out.par_chunks_mut(n * 64)
            .zip(f.par_chunks(n * 64))
            .for_each(|(o, src)| {
                let mut buf: Vec<Complex64> = src.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                let mut scratch = vec![Complex64::default(); self.forward.get_inplace_scratch_len()];
                self.forward.process_with_scratch(&mut buf, &mut scratch);
                for col in buf.chunks_mut(n) {
                    for (c, s) in col.iter_mut().zip(symbol) {
                        *c *= s * scale;
                    }
                }
                self.inverse.process_with_scratch(&mut buf, &mut scratch);
                for (o, c) in o.iter_mut().zip(&buf) {
                    *o = c.re;
                }
            });
    }
}

pub struct Generator {
    pub grid: Arc<Grid>,
    pub d: f64,
    pub kappa: f64,
    fft: AngularFft,
    q_symbol: Vec<f64>,
}

impl Generator {
    pub fn new(grid: Arc<Grid>, d: f64, kappa: f64) -> Self {
        let fft = AngularFft::new(grid.nalpha);
        let q_symbol = (0..grid.nalpha).map(|k| -d * fft.mode(k).powi(2)).collect();
        Self {
            grid,
            d,
            kappa,
            fft,
            q_symbol,
        }
    }

    fn field(&self, values: Vec<f64>) -> PhaseField {
        PhaseField {
            grid: self.grid.clone(),
            values,
        }
    }

    fn phi(&self, f: &PhaseField) -> Vec<f64> {
        let na = self.grid.nalpha;
        let ev = &self.grid.plane.ev;
        let mut phi = f.values.clone();
        phi.par_chunks_mut(na).zip(ev.par_iter()).for_each(|(c, e)| {
            for v in c {
                *v *= e;
            }
        });
        phi
    }

    /// `Q f = D f_aa`, spectral in `alpha`.
    pub fn apply_q(&self, f: &PhaseField) -> PhaseField {
        let mut out = vec![0.0; f.values.len()];
        self.fft.apply(&f.values, &self.q_symbol, &mut out);
        self.field(out)
    }

    /// `T f = tau . grad_x f - d_alpha((tau_perp . grad V) f)`.
    pub fn apply_t(&self, f: &PhaseField) -> PhaseField {
        let g = &*self.grid;
        let (nx, ny, na) = (g.nx(), g.ny(), g.nalpha);
        let pl = &g.plane;
        let phi = self.phi(f);
        let inv_vol = 1.0 / g.volume();
        let row = ny * na;
        let mut out = vec![0.0; f.values.len()];
        out.par_chunks_mut(row).enumerate().for_each(|(i, orow)| {
            for j in 0..ny {
                let ij = i * ny + j;
                let (mxp, mxm) = (pl.fx(i + 1, j), pl.fx(i, j));
                let (myp, mym) = (pl.fy(i, j + 1), pl.fy(i, j));
                let (ax, ay) = (g.ax[ij], g.ay[ij]);
                let base = ij * na;
                for k in 0..na {
                    let c = base + k;
                    let p = phi[c];
                    let mut flux = 0.0;
                    if i + 1 < nx {
                        flux += pl.hy * g.s_k[k] * mxp * 0.5 * (p + phi[c + row]);
                    }
                    if i > 0 {
                        flux -= pl.hy * g.s_k[k] * mxm * 0.5 * (phi[c - row] + p);
                    }
                    if j + 1 < ny {
                        flux += pl.hx * g.c_k[k] * myp * 0.5 * (p + phi[c + na]);
                    }
                    if j > 0 {
                        flux -= pl.hx * g.c_k[k] * mym * 0.5 * (phi[c - na] + p);
                    }
                    let kp = if k + 1 == na { base } else { c + 1 };
                    let km = if k == 0 { base + na - 1 } else { c - 1 };
                    let km_face = if k == 0 { na - 1 } else { k - 1 };
                    let fa_p = -g.sin_face[k] * ax + g.cos_face[k] * ay;
                    let fa_m = -g.sin_face[km_face] * ax + g.cos_face[km_face] * ay;
                    flux += fa_p * 0.5 * (p + phi[kp]) - fa_m * 0.5 * (phi[km] + p);
                    orow[j * na + k] = flux * inv_vol;
                }
            }
        });
        self.field(out)
    }

    /// `P f = -kappa d_x1 f`.
    pub fn apply_p(&self, f: &PhaseField) -> PhaseField {
        let g = &*self.grid;
        let (nx, ny, na) = (g.nx(), g.ny(), g.nalpha);
        let pl = &g.plane;
        let phi = self.phi(f);
        let row = ny * na;
        let scale = -self.kappa / pl.hx;
        let mut out = vec![0.0; f.values.len()];
        if self.kappa == 0.0 {
            return self.field(out);
        }
        out.par_chunks_mut(row).enumerate().for_each(|(i, orow)| {
            for j in 0..ny {
                let (mp, mm) = (pl.fx(i + 1, j), pl.fx(i, j));
                for k in 0..na {
                    let c = (i * ny + j) * na + k;
                    let mut flux = 0.0;
                    if i + 1 < nx {
                        flux += mp * 0.5 * (phi[c] + phi[c + row]);
                    }
                    if i > 0 {
                        flux -= mm * 0.5 * (phi[c - row] + phi[c]);
                    }
                    orow[j * na + k] = scale * flux;
                }
            }
        });
        self.field(out)
    }

    /// Exact adjoint of [`Generator::apply_p`] in `<.,.>_0`:
    /// `P* h = -P h + kappa (d1 V) h`.
    pub fn apply_p_adjoint(&self, h: &PhaseField) -> PhaseField {
        let na = self.grid.nalpha;
        let mut out = self.apply_p(h).values;
        let k = self.kappa;
        for (c, o) in out.iter_mut().enumerate() {
            *o = -*o + k * self.grid.dvx[c / na] * h.values[c];
        }
        self.field(out)
    }

    pub fn apply_generator(&self, f: &PhaseField) -> PhaseField {
        let q = self.apply_q(f);
        let t = self.apply_t(f);
        let p = self.apply_p(f);
        let values = q
            .values
            .iter()
            .zip(&t.values)
            .zip(&p.values)
            .map(|((q, t), p)| q - t + p)
            .collect();
        self.field(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::GridCfg;
    use crate::potential::{normalize_potential, PotentialSpec, QuadratureCfg};

    fn setup(n: usize, na: usize, kappa: f64) -> Generator {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        let g = Arc::new(Grid::new(&p, &GridCfg::new(n, n, na)).unwrap());
        Generator::new(g, 1.3, kappa)
    }

    fn bumpy(g: &Arc<Grid>) -> PhaseField {
        PhaseField::from_fn(g.clone(), |x, y, a| {
            (-(x - 0.3).powi(2) - y * y).exp() * (1.2 + 0.5 * (a - x).cos() + 0.2 * (3.0 * a + y).sin())
        })
    }

    #[test]
    fn gibbs_state_is_stationary_without_belt() {
        let op = setup(32, 16, 0.0);
        let f = PhaseField::equilibrium(op.grid.clone());
        let r = op.apply_generator(&f);
        assert!(r.norm0() < 1e-12, "{}", r.norm0());
    }

    #[test]
    fn collision_on_single_mode() {
        let op = setup(16, 16, 0.0);
        let eps = 0.3;
        let f = PhaseField::from_fn(op.grid.clone(), |_, _, a| eps * a.cos());
        let q = op.apply_q(&f);
        let lifted = f.scaled(-op.d);
        assert!(q.sub(&lifted).max_abs() < 1e-14);
    }

    #[test]
    fn mass_and_skew_symmetry() {
        let op = setup(32, 16, 0.2);
        let f = bumpy(&op.grid);
        let lf = op.apply_generator(&f);
        let scale = f.values.iter().map(|v| v.abs()).sum::<f64>() * op.grid.cell_weight();
        assert!(lf.mass().abs() < 1e-13 * scale);
        let t = op.apply_t(&f);
        assert!(t.inner0(&f).abs() < 1e-13 * f.inner0(&f));
        let h = PhaseField::from_fn(op.grid.clone(), |x, y, a| (-(x * x + y * y)).exp() * (a + y).sin());
        assert!((t.inner0(&h) + f.inner0(&op.apply_t(&h))).abs() < 1e-12 * f.norm0() * h.norm0() * 10.0);
    }

    #[test]
    fn belt_adjoint_identity() {
        let op = setup(32, 16, 0.1);
        let f = bumpy(&op.grid);
        let h = PhaseField::from_fn(op.grid.clone(), |x, y, a| (-(x * x + y * y)).exp() * (2.0 + (a + x).sin()));
        let lhs = op.apply_p(&f).inner0(&h);
        let rhs = f.inner0(&op.apply_p_adjoint(&h));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1e-3));
    }

    #[test]
    fn belt_adjoint_of_lifted_field() {
        // P*(e^{-V} u) = kappa e^{-V} W_x u.
        let op = setup(24, 8, 0.15);
        let g = op.grid.clone();
        let u: Vec<f64> = g.plane.xs.iter().flat_map(|&x| g.plane.ys.iter().map(move |&y| (x + 0.5 * y).sin())).collect();
        let lifted = PhaseField::lift(g.clone(), &u);
        let got = op.apply_p_adjoint(&lifted);
        let mut wx = vec![0.0; u.len()];
        crate::elliptic::apply_wx(&g.plane, &u, &mut wx);
        let expect = PhaseField::lift(g.clone(), &wx.iter().map(|v| op.kappa * v).collect::<Vec<_>>());
        assert!(got.sub(&expect).max_abs() < 1e-12 * expect.max_abs());
    }
}
