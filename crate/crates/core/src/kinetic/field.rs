use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Density `f(x, alpha)` on a phase grid.
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub mass: f64,
    pub norm0: f64,
    pub normk: f64,
}

impl PhaseField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(c) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite field value at cell {c}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|c| {
                let (x, y, a) = grid.coords(c);
                f(x, y, a)
            })
            .collect();
        Self { grid, values }
    }

    /// Lifts an `alpha`-independent plane field `u` to `e^{-V} u`.
    pub fn lift(grid: Arc<Grid>, u: &[f64]) -> Self {
        let na = grid.nalpha;
        let mut values = Vec::with_capacity(grid.len());
        for (u, em) in u.iter().zip(&grid.plane.em) {
            values.extend(std::iter::repeat_n(em * u, na));
        }
        Self { grid, values }
    }

    /// The Gibbs state `e^{-V}` scaled to unit discrete mass.
    pub fn equilibrium(grid: Arc<Grid>) -> Self {
        let total: f64 = grid.plane.m.iter().sum();
        let ones = vec![1.0 / total; grid.plane.len()];
        Self::lift(grid, &ones)
    }

    pub fn same_grid(&self, other: &PhaseField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.len() == other.grid.len() {
            Ok(())
        } else {
            Err(Error::Config("fields live on different grids".into()))
        }
    }

    /// `M_f = sum f hx hy / nalpha`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_weight()
    }

    /// `<f, h>_0 = sum f h e^V hx hy / nalpha`.
    pub fn inner0(&self, other: &PhaseField) -> f64 {
        let na = self.grid.nalpha;
        let ev = &self.grid.plane.ev;
        let mut total = 0.0;
        for (ij, (a, b)) in self.values.chunks(na).zip(other.values.chunks(na)).enumerate() {
            let s: f64 = a.iter().zip(b).map(|(a, b)| a * b).sum();
            total += s * ev[ij];
        }
        total * self.grid.cell_weight()
    }

    pub fn norm0(&self) -> f64 {
        self.inner0(self).sqrt()
    }

    /// `sum f^2 g hx hy / nalpha`, zero when no weight is attached.
    pub fn weight_energy(&self) -> f64 {
        match &self.grid.weight {
            Some(w) => {
                self.values.iter().zip(&w.g).map(|(f, g)| f * f * g).sum::<f64>() * self.grid.cell_weight()
            }
            None => 0.0,
        }
    }

    pub fn normk(&self) -> f64 {
        let coef = self.grid.weight.as_ref().map_or(0.0, |w| w.coefficient);
        (self.inner0(self) + coef * self.weight_energy()).sqrt()
    }

    pub fn norms_and_mass(&self) -> Norms {
        Norms {
            mass: self.mass(),
            norm0: self.norm0(),
            normk: self.normk(),
        }
    }

    /// Angular average, kept on the phase grid.
    pub fn project(&self) -> PhaseField {
        let na = self.grid.nalpha;
        let mut values = Vec::with_capacity(self.values.len());
        for chunk in self.values.chunks(na) {
            let mean = chunk.iter().sum::<f64>() / na as f64;
            values.extend(std::iter::repeat_n(mean, na));
        }
        PhaseField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Angular average as a plane field.
    pub fn average(&self) -> Vec<f64> {
        let na = self.grid.nalpha as f64;
        self.values.chunks(self.grid.nalpha).map(|c| c.iter().sum::<f64>() / na).collect()
    }

    pub fn scaled(&self, a: f64) -> PhaseField {
        self.map(|v| a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PhaseField {
        PhaseField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &PhaseField) -> PhaseField {
        PhaseField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        }
    }

    pub fn sub(&self, other: &PhaseField) -> PhaseField {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plane::GridCfg;
    use crate::potential::{normalize_potential, PotentialSpec, QuadratureCfg};

    fn grid() -> Arc<Grid> {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        Arc::new(Grid::new(&p, &GridCfg::new(32, 32, 16)).unwrap())
    }

    #[test]
    fn gibbs_state_has_unit_norm() {
        let g = grid();
        let raw = PhaseField::lift(g.clone(), &vec![1.0; g.plane.len()]);
        assert!((raw.norm0() - 1.0).abs() < 1e-9);
        assert!((raw.mass() - 1.0).abs() < 1e-9);
        let n = raw.norms_and_mass();
        assert_eq!(n.norm0, n.normk);
    }

    #[test]
    fn projection_facts() {
        let g = grid();
        let f = PhaseField::from_fn(g.clone(), |x, y, a| (-(x * x + y * y)).exp() * (1.0 + x * a.cos() + 0.3 * (2.0 * a).sin()));
        let p = f.project();
        let q = f.sub(&p);
        assert!((p.project().sub(&p)).max_abs() < 1e-15);
        assert!((p.mass() - f.mass()).abs() < 1e-13 * f.mass().abs());
        let lhs = p.inner0(&p) + q.inner0(&q);
        assert!((lhs - f.inner0(&f)).abs() < 1e-12 * lhs);
        let c = PhaseField::from_fn(g, |x, _, a| (-x * x).exp() * a.cos());
        assert!(c.project().max_abs() < 1e-15);
    }

    #[test]
    fn norms_are_homogeneous() {
        let g = grid();
        let f = PhaseField::from_fn(g, |x, y, a| (-(x * x + y * y)).exp() * (2.0 + a.sin()));
        let n = f.norms_and_mass();
        let m = f.scaled(-3.0).norms_and_mass();
        assert!((m.norm0 - 3.0 * n.norm0).abs() < 1e-12 * n.norm0);
        assert!((m.mass + 3.0 * n.mass).abs() < 1e-12 * n.mass.abs());
    }
}
