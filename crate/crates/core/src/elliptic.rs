//! Weighted elliptic problems on the plane grid.
//!
//! `W_x`, `W_y` are the gradient operators induced by the kinetic transport
//! scheme on `alpha`-independent fields `e^{-V} u`:
//! `(W_x u)_i = e^{V_i} / (2 hx) * (m_{i+1/2} (u_{i+1} - u_i) + m_{i-1/2} (u_i - u_{i-1}))`.
//! The coercive operator
//! `K = diag(m) + s (W_x^T diag(m) W_x + W_y^T diag(m) W_y)`
//! is the discrete form of `e^{-V} u - 1/2 div(e^{-V} grad u)` (with `s = sigma^2 / 2`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::PlaneGrid;

pub fn apply_wx(g: &PlaneGrid, u: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let c = 0.5 / g.hx;
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            let mp = g.fx(i + 1, j);
            let mm = g.fx(i, j);
            let up = if i + 1 < nx { u[k + ny] - u[k] } else { 0.0 };
            let um = if i > 0 { u[k] - u[k - ny] } else { 0.0 };
            out[k] = c * g.ev[k] * (mp * up + mm * um);
        }
    }
}

pub fn apply_wy(g: &PlaneGrid, u: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let c = 0.5 / g.hy;
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            let mp = g.fy(i, j + 1);
            let mm = g.fy(i, j);
            let up = if j + 1 < ny { u[k + 1] - u[k] } else { 0.0 };
            let um = if j > 0 { u[k] - u[k - 1] } else { 0.0 };
            out[k] = c * g.ev[k] * (mp * up + mm * um);
        }
    }
}

pub fn apply_wx_t(g: &PlaneGrid, z: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let c = 0.5 / g.hx;
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            let mp = g.fx(i + 1, j);
            let mm = g.fx(i, j);
            let mut acc = g.ev[k] * (mm - mp) * z[k];
            if i > 0 {
                acc += g.ev[k - ny] * mm * z[k - ny];
            }
            if i + 1 < nx {
                acc -= g.ev[k + ny] * mp * z[k + ny];
            }
            out[k] = c * acc;
        }
    }
}

pub fn apply_wy_t(g: &PlaneGrid, z: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let c = 0.5 / g.hy;
    for i in 0..nx {
        for j in 0..ny {
            let k = i * ny + j;
            let mp = g.fy(i, j + 1);
            let mm = g.fy(i, j);
            let mut acc = g.ev[k] * (mm - mp) * z[k];
            if j > 0 {
                acc += g.ev[k - 1] * mm * z[k - 1];
            }
            if j + 1 < ny {
                acc -= g.ev[k + 1] * mp * z[k + 1];
            }
            out[k] = c * acc;
        }
    }
}

/// The operator `K` with coupling strength `s`, and its Jacobi diagonal.
pub struct CoerciveOperator<'a> {
    pub grid: &'a PlaneGrid,
    pub s: f64,
    diag: Vec<f64>,
}

impl<'a> CoerciveOperator<'a> {
    pub fn new(grid: &'a PlaneGrid, s: f64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut diag = grid.m.clone();
        let (cx, cy) = (0.5 / grid.hx, 0.5 / grid.hy);
        // Column k of W_x has entries in rows k (self), k - ny and k + ny.
        for i in 0..nx {
            for j in 0..ny {
                let k = i * ny + j;
                let (mp, mm) = (grid.fx(i + 1, j), grid.fx(i, j));
                let mut sx = grid.m[k] * (cx * grid.ev[k] * (mm - mp)).powi(2);
                if i > 0 {
                    sx += grid.m[k - ny] * (cx * grid.ev[k - ny] * mm).powi(2);
                }
                if i + 1 < nx {
                    sx += grid.m[k + ny] * (cx * grid.ev[k + ny] * mp).powi(2);
                }
                let (qp, qm) = (grid.fy(i, j + 1), grid.fy(i, j));
                let mut sy = grid.m[k] * (cy * grid.ev[k] * (qm - qp)).powi(2);
                if j > 0 {
                    sy += grid.m[k - 1] * (cy * grid.ev[k - 1] * qm).powi(2);
                }
                if j + 1 < ny {
                    sy += grid.m[k + 1] * (cy * grid.ev[k + 1] * qp).powi(2);
                }
                diag[k] += s * (sx + sy);
            }
        }
        Self { grid, s, diag }
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let n = g.len();
        let mut w = vec![0.0; n];
        let mut t = vec![0.0; n];
        apply_wx(g, u, &mut w);
        for (w, m) in w.iter_mut().zip(&g.m) {
            *w *= m;
        }
        apply_wx_t(g, &w, out);
        apply_wy(g, u, &mut w);
        for (w, m) in w.iter_mut().zip(&g.m) {
            *w *= m;
        }
        apply_wy_t(g, &w, &mut t);
        for k in 0..n {
            out[k] = g.m[k] * u[k] + self.s * (out[k] + t[k]);
        }
    }

    pub fn solve(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<Solve> {
        pcg(|u, o| self.apply(u, o), &self.diag, b, tol, max_iter, None)
    }
}

/// Compact five-point weighted stiffness `sum_faces (h_t / h_n) m_face (u_c - u_nb)^2`,
/// the discrete Dirichlet form of `int |grad u|^2 e^{-V}`.
pub struct Stiffness<'a> {
    pub grid: &'a PlaneGrid,
    diag: Vec<f64>,
}

impl<'a> Stiffness<'a> {
    pub fn new(grid: &'a PlaneGrid) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let (ax, ay) = (grid.hy / grid.hx, grid.hx / grid.hy);
        let mut diag = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                diag[i * ny + j] = ax * (grid.fx(i, j) + grid.fx(i + 1, j))
                    + ay * (grid.fy(i, j) + grid.fy(i, j + 1));
            }
        }
        Self { grid, diag }
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let (ax, ay) = (g.hy / g.hx, g.hx / g.hy);
        for i in 0..nx {
            for j in 0..ny {
                let k = i * ny + j;
                let mut acc = self.diag[k] * u[k];
                if i > 0 {
                    acc -= ax * g.fx(i, j) * u[k - ny];
                }
                if i + 1 < nx {
                    acc -= ax * g.fx(i + 1, j) * u[k + ny];
                }
                if j > 0 {
                    acc -= ay * g.fy(i, j) * u[k - 1];
                }
                if j + 1 < ny {
                    acc -= ay * g.fy(i, j + 1) * u[k + 1];
                }
                out[k] = acc;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solve {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// Jacobi-preconditioned conjugate gradients. Convergence is measured in the
/// preconditioned residual norm `r^T diag^{-1} r`, relative to that of `b`.
/// `project` is applied to every residual, which keeps iterates of consistent
/// singular systems inside the range.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<Solve> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    if let Some(p) = project {
        p(&mut r);
    }
    let inv: Vec<f64> = diag.iter().map(|d| if *d > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, i)| r * i).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let b_norm = rz.sqrt();
    if b_norm == 0.0 {
        return Ok(Solve {
            x,
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numerical(format!(
                "conjugate gradients lost positive definiteness at iteration {it} (p^T A p = {pap:e})"
            )));
        }
        let a = rz / pap;
        for k in 0..n {
            x[k] += a * p[k];
            r[k] -= a * ap[k];
        }
        if let Some(pr) = project {
            pr(&mut r);
        }
        for k in 0..n {
            z[k] = r[k] * inv[k];
        }
        let rz_new = dot(&r, &z);
        let rel = rz_new.max(0.0).sqrt() / b_norm;
        history.push(rel);
        if rel <= tol {
            return Ok(Solve {
                x,
                iterations: it,
                rel_residual: rel,
            });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    let last = history.last().copied().unwrap_or(f64::NAN);
    Err(Error::non_convergence(
        "conjugate gradients",
        format!("relative residual {last:.3e} after {max_iter} iterations (target {tol:e})"),
        history,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverCfg {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverCfg {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

/// Smooth random field on the plane: a sum of plane waves with wave numbers of
/// modulus at most `k_max`.
pub fn smooth_plane_field(g: &PlaneGrid, rng: &mut impl Rng, modes: usize, k_max: f64) -> Vec<f64> {
    let waves: Vec<([f64; 2], f64, f64)> = (0..modes)
        .map(|_| {
            let r = k_max * rng.random::<f64>().sqrt();
            let th = std::f64::consts::TAU * rng.random::<f64>();
            let phase = std::f64::consts::TAU * rng.random::<f64>();
            let amp = rng.random::<f64>() * 2.0 - 1.0;
            ([r * th.cos(), r * th.sin()], phase, amp)
        })
        .collect();
    let mut u = Vec::with_capacity(g.len());
    for &x in &g.xs {
        for &y in &g.ys {
            u.push(waves.iter().map(|(k, ph, a)| a * (k[0] * x + k[1] * y + ph).cos()).sum());
        }
    }
    u
}

/// Removes the Gibbs mean: `u <- u - (sum m u) / (sum m)`.
pub fn remove_gibbs_mean(g: &PlaneGrid, u: &mut [f64]) {
    let total: f64 = g.m.iter().sum();
    let mean = g.weighted_sum(u) / total;
    for v in u.iter_mut() {
        *v -= mean;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenCfg {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenCfg {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 2000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub lambda: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Smallest nonzero eigenvalue of `S u = lambda M u` with `M = diag(m)`, by
/// inverse iteration on Gibbs-mean-free vectors.
pub fn spectral_gap(g: &PlaneGrid, cfg: &EigenCfg, solver: &SolverCfg) -> Result<GapEstimate> {
    let s = Stiffness::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u = smooth_plane_field(g, &mut rng, 12, 2.0);
    remove_gibbs_mean(g, &mut u);
    let total: f64 = g.m.iter().sum();
    // Keeps residuals orthogonal to constants (the kernel of S).
    let orth = |r: &mut [f64]| {
        let mean: f64 = r.iter().sum::<f64>() / total;
        for (r, m) in r.iter_mut().zip(&g.m) {
            *r -= mean * m;
        }
    };
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut su = vec![0.0; g.len()];
    for it in 1..=cfg.max_iter {
        let rhs: Vec<f64> = u.iter().zip(&g.m).map(|(u, m)| u * m).collect();
        let sol = pcg(|a, o| s.apply(a, o), &s.diag, &rhs, solver.tol, solver.max_iter, Some(&orth))?;
        u = sol.x;
        remove_gibbs_mean(g, &mut u);
        let norm = g.weighted_dot(&u, &u).sqrt();
        for v in u.iter_mut() {
            *v /= norm;
        }
        s.apply(&u, &mut su);
        let lambda = dot(&u, &su);
        history.push(lambda);
        if (lambda - prev).abs() <= cfg.tol * lambda {
            return Ok(GapEstimate {
                lambda,
                iterations: it,
                history,
            });
        }
        prev = lambda;
    }
    Err(Error::non_convergence(
        "spectral gap inverse iteration",
        format!("Rayleigh quotient not stationary after {} iterations", cfg.max_iter),
        history,
    ))
}

/// Discrete Hessian energy `sum m (|W_x W_x u|^2 + |W_x W_y u|^2 + |W_y W_x u|^2 + |W_y W_y u|^2)`.
pub fn hessian_energy(g: &PlaneGrid, u: &[f64]) -> f64 {
    let n = g.len();
    let (mut a, mut b, mut c) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    apply_wx(g, u, &mut a);
    apply_wy(g, u, &mut b);
    let mut e = 0.0;
    apply_wx(g, &a, &mut c);
    e += g.weighted_dot(&c, &c);
    apply_wy(g, &a, &mut c);
    e += g.weighted_dot(&c, &c);
    apply_wx(g, &b, &mut c);
    e += g.weighted_dot(&c, &c);
    apply_wy(g, &b, &mut c);
    e += g.weighted_dot(&c, &c);
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticEstimate {
    pub c_v: f64,
    pub ratios: Vec<f64>,
}

/// Max over random smooth right-hand sides `rho` of `||hess u|| / ||e^{-V} rho||_0`
/// where `K u = m rho`.
pub fn elliptic_constant(
    g: &PlaneGrid,
    s: f64,
    trials: usize,
    seed: u64,
    solver: &SolverCfg,
) -> Result<EllipticEstimate> {
    if trials == 0 {
        return Err(Error::Config("elliptic constant needs at least one trial".into()));
    }
    let k = CoerciveOperator::new(g, s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(trials);
    for _ in 0..trials {
        let rho = smooth_plane_field(g, &mut rng, 8, 3.0);
        let rhs: Vec<f64> = rho.iter().zip(&g.m).map(|(r, m)| r * m).collect();
        let u = k.solve(&rhs, solver.tol, solver.max_iter)?.x;
        let denom = g.weighted_dot(&rho, &rho).sqrt();
        ratios.push(hessian_energy(g, &u).sqrt() / denom);
    }
    let c_v = ratios.iter().copied().fold(0.0, f64::max);
    Ok(EllipticEstimate { c_v, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{normalize_potential, PotentialSpec, QuadratureCfg};

    fn grid(p: PotentialSpec, n: usize) -> PlaneGrid {
        let p = normalize_potential(&p, &QuadratureCfg::default()).unwrap();
        let l = p.half_width(1e-12).unwrap();
        PlaneGrid::new(&p, n, n, l).unwrap()
    }

    #[test]
    fn transposes_are_adjoint() {
        let g = grid(PotentialSpec::family(1.0, 2.0).unwrap(), 24);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let z: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut a = vec![0.0; g.len()];
        let mut b = vec![0.0; g.len()];
        apply_wx(&g, &u, &mut a);
        apply_wx_t(&g, &z, &mut b);
        assert!((dot(&a, &z) - dot(&u, &b)).abs() < 1e-10 * dot(&a, &a).sqrt() * dot(&z, &z).sqrt());
        apply_wy(&g, &u, &mut a);
        apply_wy_t(&g, &z, &mut b);
        assert!((dot(&a, &z) - dot(&u, &b)).abs() < 1e-10 * dot(&a, &a).sqrt() * dot(&z, &z).sqrt());
    }

    #[test]
    fn jacobi_diagonal_matches_operator() {
        let g = grid(PotentialSpec::quadratic(1.0).unwrap(), 12);
        let k = CoerciveOperator::new(&g, 0.5);
        let mut e = vec![0.0; g.len()];
        let mut out = vec![0.0; g.len()];
        for c in [0, 5, 70, 143] {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            k.apply(&e, &mut out);
            assert!((out[c] - k.diag[c]).abs() <= 1e-12 * k.diag[c]);
        }
    }

    #[test]
    fn constant_solves_gibbs_right_hand_side() {
        let g = grid(PotentialSpec::family(1.0, 2.0).unwrap(), 32);
        let k = CoerciveOperator::new(&g, 0.5);
        let sol = k.solve(&g.m, 1e-12, 5000).unwrap();
        let dev: Vec<f64> = sol.x.iter().map(|u| u - 1.0).collect();
        assert!(g.weighted_dot(&dev, &dev).sqrt() < 1e-10);
        assert!(hessian_energy(&g, &sol.x) < 1e-20);
    }

    #[test]
    fn gaussian_spectral_gap() {
        for omega in [1.0, 2.0] {
            let g = grid(PotentialSpec::quadratic(omega).unwrap(), 96);
            let gap = spectral_gap(&g, &EigenCfg::default(), &SolverCfg::default()).unwrap();
            assert!((gap.lambda - omega).abs() < 0.03 * omega, "{} vs {omega}", gap.lambda);
        }
    }

    #[test]
    fn elliptic_constant_is_deterministic() {
        let g = grid(PotentialSpec::family(1.0, 2.0).unwrap(), 32);
        let a = elliptic_constant(&g, 0.5, 3, 9, &SolverCfg::default()).unwrap();
        let b = elliptic_constant(&g, 0.5, 3, 9, &SolverCfg::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.c_v > 0.0 && a.c_v.is_finite());
    }
}
