//! Auxiliary operator `A = (1 + (T Pi)^* T Pi)^{-1} (T Pi)^*`, the modified entropy
//! `G[f] = |f|_kappa^2 / 2 + eps1 <A f, f>_0` and its dissipation functionals.
//!
//! `A f = e^{-V} u` where `K u = -hx hy Pi T f`, and on the grid
//! `-hx hy Pi T f = sigma (W_x^T (hx hy <f cos>) + W_y^T (hx hy <f sin>))`.

use serde::{Deserialize, Serialize};

use super::field::PhaseField;
use super::operators::Generator;
use crate::elliptic::{self, CoerciveOperator, SolverCfg};
use crate::error::Result;

impl Generator {
    /// Plane field `u` with `A f = e^{-V} u`.
    pub fn apply_a(&self, f: &PhaseField, solver: &SolverCfg) -> Result<Vec<f64>> {
        let g = &*self.grid;
        let pl = &g.plane;
        let na = g.nalpha;
        let w = pl.hx * pl.hy / na as f64;
        let mut zx = vec![0.0; pl.len()];
        let mut zy = vec![0.0; pl.len()];
        for (ij, col) in f.values.chunks(na).enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for (k, v) in col.iter().enumerate() {
                a += v * g.cos[k];
                b += v * g.sin[k];
            }
            zx[ij] = w * a;
            zy[ij] = w * b;
        }
        let mut rhs = vec![0.0; pl.len()];
        let mut t = vec![0.0; pl.len()];
        elliptic::apply_wx_t(pl, &zx, &mut rhs);
        elliptic::apply_wy_t(pl, &zy, &mut t);
        let sigma = g.sigma();
        for (r, t) in rhs.iter_mut().zip(&t) {
            *r = sigma * (*r + t);
        }
        let k = CoerciveOperator::new(pl, g.cfg.coupling());
        Ok(k.solve(&rhs, solver.tol, solver.max_iter)?.x)
    }

    /// `T Pi (e^{-V} u) = e^{-V} sigma (cos W_x u + sin W_y u)`.
    pub fn apply_t_lifted(&self, u: &[f64]) -> PhaseField {
        let g = &*self.grid;
        let pl = &g.plane;
        let mut wx = vec![0.0; pl.len()];
        let mut wy = vec![0.0; pl.len()];
        elliptic::apply_wx(pl, u, &mut wx);
        elliptic::apply_wy(pl, u, &mut wy);
        let na = g.nalpha;
        let sigma = g.sigma();
        let mut values = Vec::with_capacity(g.len());
        for ij in 0..pl.len() {
            let e = sigma * pl.em[ij];
            for k in 0..na {
                values.push(e * (g.cos[k] * wx[ij] + g.sin[k] * wy[ij]));
            }
        }
        PhaseField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `P* (e^{-V} u) = kappa e^{-V} W_x u`.
    pub fn apply_p_adjoint_lifted(&self, u: &[f64]) -> PhaseField {
        let pl = &self.grid.plane;
        let mut wx = vec![0.0; pl.len()];
        elliptic::apply_wx(pl, u, &mut wx);
        for v in wx.iter_mut() {
            *v *= self.kappa;
        }
        PhaseField::lift(self.grid.clone(), &wx)
    }
}

/// `<e^{-V} u, f>_0 = sum u hx hy (Pi f)`.
pub fn lifted_inner(u: &[f64], f: &PhaseField) -> f64 {
    let pl = &f.grid.plane;
    let avg = f.average();
    u.iter().zip(&avg).map(|(u, a)| u * a).sum::<f64>() * pl.hx * pl.hy
}

/// `|e^{-V} u|_0`.
pub fn lifted_norm(u: &[f64], f: &PhaseField) -> f64 {
    f.grid.plane.weighted_dot(u, u).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryReport {
    #[serde(skip)]
    pub u: Vec<f64>,
    pub inner_af_f: f64,
    pub g: f64,
    pub norm0: f64,
    pub normk: f64,
}

pub fn apply_auxiliary(op: &Generator, f: &PhaseField, eps1: f64, solver: &SolverCfg) -> Result<AuxiliaryReport> {
    let u = op.apply_a(f, solver)?;
    let inner = lifted_inner(&u, f);
    let n = f.norms_and_mass();
    Ok(AuxiliaryReport {
        g: 0.5 * n.normk * n.normk + eps1 * inner,
        inner_af_f: inner,
        norm0: n.norm0,
        normk: n.normk,
        u,
    })
}

/// Constants entering the Gronwall check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallCoefficients {
    pub eps1: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dissipation {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// `D0 + D1 + D2 + D3`.
    pub dgdt: f64,
    /// `dG/dt` computed directly as `<Lf, f>_kappa + eps1 (<A L f, f>_0 + <A f, L f>_0)`.
    pub dgdt_direct: f64,
    pub g: f64,
    pub mass: f64,
    /// `-gamma1 G + gamma2 M^2`.
    pub rhs_gronwall: f64,
}

impl Dissipation {
    /// `dG/dt - rhs`; non-positive when the Gronwall inequality holds.
    pub fn excess(&self) -> f64 {
        self.dgdt - self.rhs_gronwall
    }
}

pub fn dissipation_terms(
    op: &Generator,
    f: &PhaseField,
    coef: &GronwallCoefficients,
    solver: &SolverCfg,
) -> Result<Dissipation> {
    let eps1 = coef.eps1;
    let pf = f.project();
    let qf = f.sub(&pf);
    let af = op.apply_a(f, solver)?;

    let q = op.apply_q(f);
    let t_pi = op.apply_t(&pf);
    let t_perp = op.apply_t(&qf);
    let a_t_pi = op.apply_a(&t_pi, solver)?;
    let a_t_perp = op.apply_a(&t_perp, solver)?;
    let ta = op.apply_t_lifted(&af);
    let aq = op.apply_a(&q, solver)?;
    let d0 = q.inner0(f) - eps1 * lifted_inner(&a_t_pi, f) - eps1 * lifted_inner(&a_t_perp, f)
        + eps1 * ta.inner0(&qf)
        + eps1 * lifted_inner(&aq, f);

    let p = op.apply_p(f);
    let (d1, d2) = if op.kappa == 0.0 {
        (0.0, 0.0)
    } else {
        let ap = op.apply_a(&p, solver)?;
        let pa = op.apply_p_adjoint_lifted(&af);
        (eps1 * lifted_inner(&ap, f) + eps1 * pa.inner0(&pf), p.inner0(f))
    };

    let lf = op.apply_generator(f);
    let d3 = match &f.grid.weight {
        Some(w) if w.coefficient != 0.0 => {
            let s: f64 = lf.values.iter().zip(&f.values).zip(&w.g).map(|((l, f), g)| l * f * g).sum();
            w.coefficient * s * f.grid.cell_weight()
        }
        _ => 0.0,
    };

    let alf = op.apply_a(&lf, solver)?;
    let dgdt_direct = lf.inner0(f) + d3 + eps1 * (lifted_inner(&alf, f) + lifted_inner(&af, &lf));

    let n = f.norms_and_mass();
    let g = 0.5 * n.normk * n.normk + eps1 * lifted_inner(&af, f);
    let dgdt = d0 + d1 + d2 + d3;
    Ok(Dissipation {
        d0,
        d1,
        d2,
        d3,
        dgdt,
        dgdt_direct,
        g,
        mass: n.mass,
        rhs_gronwall: -coef.gamma1 * g + coef.gamma2 * n.mass * n.mass,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::kinetic::grid::Grid;
    use crate::kinetic::random::{random_field, random_macroscopic};
    use crate::plane::GridCfg;
    use crate::potential::{normalize_potential, PotentialSpec, QuadratureCfg};
    use crate::weight::weight_params;

    fn solver() -> SolverCfg {
        SolverCfg {
            tol: 1e-12,
            max_iter: 20000,
        }
    }

    fn grid(n: usize, na: usize) -> Grid {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        Grid::new(&p, &GridCfg::new(n, n, na)).unwrap()
    }

    #[test]
    fn auxiliary_solves_the_defining_equation() {
        let g = Arc::new(grid(32, 16));
        let op = Generator::new(g.clone(), 1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&g, &mut rng);
        let u = op.apply_a(&f, &solver()).unwrap();
        let k = CoerciveOperator::new(&g.plane, g.cfg.coupling());
        let mut ku = vec![0.0; u.len()];
        k.apply(&u, &mut ku);
        let t = op.apply_t(&f).average();
        let area = g.plane.hx * g.plane.hy;
        let err = ku.iter().zip(&t).map(|(a, b)| (a + area * b).abs()).fold(0.0, f64::max);
        let scale = t.iter().fold(0.0f64, |m, v| m.max(v.abs())) * area;
        assert!(err < 1e-9 * scale, "{err} {scale}");
    }

    #[test]
    fn lifted_transport_matches_generic_transport() {
        let g = Arc::new(grid(24, 8));
        let op = Generator::new(g.clone(), 1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_macroscopic(&g, &mut rng);
        let u: Vec<f64> = h.average().iter().zip(&g.plane.ev).map(|(a, e)| a * e).collect();
        let diff = op.apply_t(&h).sub(&op.apply_t_lifted(&u));
        assert!(diff.max_abs() < 1e-12 * op.apply_t(&h).max_abs());
    }

    #[test]
    fn auxiliary_bounds_hold() {
        let g = Arc::new(grid(32, 16));
        let d = 1.7;
        let op = Generator::new(g.clone(), d, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let f = random_field(&g, &mut rng);
            let perp = f.sub(&f.project()).norm0();
            let u = op.apply_a(&f, &solver()).unwrap();
            assert!(lifted_norm(&u, &f) <= 0.5 * perp * (1.0 + 1e-9));
            assert!(lifted_inner(&u, &f).abs() <= 0.5 * f.norm0().powi(2));
            assert!(op.apply_t_lifted(&u).norm0() <= perp * (1.0 + 1e-9));
            let aq = op.apply_a(&op.apply_q(&f), &solver()).unwrap();
            let resid: f64 = aq.iter().zip(&u).map(|(a, b)| (a + d * b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(resid < 1e-9 * norm);
        }
    }

    #[test]
    fn dissipation_splits_the_entropy_derivative() {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        let w = weight_params(0.1, 1.0).unwrap();
        let g = Arc::new(Grid::new(&p, &GridCfg::new(32, 32, 16)).unwrap().with_weight(w, 1e-3));
        let op = Generator::new(g.clone(), 1.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(&g, &mut rng);
        let coef = GronwallCoefficients {
            eps1: 0.25,
            gamma1: 0.1,
            gamma2: 0.0,
        };
        let dis = dissipation_terms(&op, &f, &coef, &solver()).unwrap();
        let scale = dis.d0.abs() + dis.d1.abs() + dis.d2.abs() + dis.d3.abs();
        assert!((dis.dgdt - dis.dgdt_direct).abs() < 1e-9 * scale, "{dis:?}");
        assert!(dis.d0 < 0.0);
        assert!(dis.d3 != 0.0);
    }
}
