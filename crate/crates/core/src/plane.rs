//! Cell-centred tensor grid on the square `[-L, L]^2` with the potential tables
//! shared by the elliptic solvers and the kinetic operators.
//!
//! Index `(i, j)` maps to `i * ny + j`. Face weights are `e^{-V}` evaluated at face
//! centres, set to zero on the outer boundary (no flux through it).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Phase-space grid resolution. `half_width = None` picks the smallest `L` with
/// `e^{-V(L, 0)} <= edge_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridCfg {
    pub nx: usize,
    pub ny: usize,
    pub nalpha: usize,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default = "default_edge")]
    pub edge_threshold: f64,
}

fn default_edge() -> f64 {
    1e-12
}

impl Default for GridCfg {
    fn default() -> Self {
        Self::new(128, 128, 64)
    }
}

impl GridCfg {
    pub fn new(nx: usize, ny: usize, nalpha: usize) -> Self {
        Self {
            nx,
            ny,
            nalpha,
            half_width: None,
            edge_threshold: default_edge(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.nx < 4 || self.ny < 4 {
            bad.push(format!("grid.nx, grid.ny = {}, {} must be >= 4", self.nx, self.ny));
        }
        if self.nalpha < 4 || !self.nalpha.is_multiple_of(2) {
            bad.push(format!("grid.nalpha = {} must be even and >= 4", self.nalpha));
        }
        if let Some(l) = self.half_width {
            if !(l > 0.0 && l.is_finite()) {
                bad.push(format!("grid.L = {l} must be positive"));
            }
        }
        if !(self.edge_threshold > 0.0 && self.edge_threshold < 1.0) {
            bad.push(format!("grid.edge_threshold = {} must lie in (0, 1)", self.edge_threshold));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn resolve_half_width(&self, p: &PotentialSpec) -> Result<f64> {
        match self.half_width {
            Some(l) => Ok(l),
            None => p.half_width(self.edge_threshold),
        }
    }

    pub fn plane(&self, p: &PotentialSpec) -> Result<PlaneGrid> {
        self.validate()?;
        PlaneGrid::new(p, self.nx, self.ny, self.resolve_half_width(p)?)
    }

    pub fn halpha(&self) -> f64 {
        std::f64::consts::TAU / self.nalpha as f64
    }

    /// `2 sin(h/2) / h`: the factor by which cell-averaged `cos`, `sin` differ
    /// from point values on the angular grid.
    pub fn sigma(&self) -> f64 {
        let h = self.halpha();
        2.0 * (0.5 * h).sin() / h
    }

    /// Elliptic coupling `sigma^2 / 2`.
    pub fn coupling(&self) -> f64 {
        0.5 * self.sigma().powi(2)
    }
}

#[derive(Debug, Clone)]
pub struct PlaneGrid {
    pub half_width: f64,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `V` at cell centres.
    pub v: Vec<f64>,
    pub ev: Vec<f64>,
    pub em: Vec<f64>,
    /// `e^{-V} hx hy`: mass of the cell under the Gibbs measure.
    pub m: Vec<f64>,
    /// x-face weights, `(nx + 1) * ny`, face `i` sits between cells `i - 1` and `i`.
    pub mfx: Vec<f64>,
    /// y-face weights, `nx * (ny + 1)`.
    pub mfy: Vec<f64>,
}

impl PlaneGrid {
    pub fn new(p: &PotentialSpec, nx: usize, ny: usize, half_width: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::Config(format!("grid needs nx, ny >= 4, got {nx} x {ny}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("half-width L = {half_width} must be positive")));
        }
        let hx = 2.0 * half_width / nx as f64;
        let hy = 2.0 * half_width / ny as f64;
        let xs: Vec<f64> = (0..nx).map(|i| -half_width + (i as f64 + 0.5) * hx).collect();
        let ys: Vec<f64> = (0..ny).map(|j| -half_width + (j as f64 + 0.5) * hy).collect();
        let n = nx * ny;
        let mut v = Vec::with_capacity(n);
        for &x in &xs {
            for &y in &ys {
                v.push(p.value([x, y]));
            }
        }
        let ev: Vec<f64> = v.iter().map(|v| v.exp()).collect();
        let em: Vec<f64> = v.iter().map(|v| (-v).exp()).collect();
        let m = em.iter().map(|e| e * hx * hy).collect();
        let mut mfx = vec![0.0; (nx + 1) * ny];
        for i in 1..nx {
            let x = -half_width + i as f64 * hx;
            for (j, &y) in ys.iter().enumerate() {
                mfx[i * ny + j] = (-p.value([x, y])).exp();
            }
        }
        let mut mfy = vec![0.0; nx * (ny + 1)];
        for (i, &x) in xs.iter().enumerate() {
            for j in 1..ny {
                let y = -half_width + j as f64 * hy;
                mfy[i * (ny + 1) + j] = (-p.value([x, y])).exp();
            }
        }
        Ok(Self {
            half_width,
            nx,
            ny,
            hx,
            hy,
            xs,
            ys,
            v,
            ev,
            em,
            m,
            mfx,
            mfy,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn fx(&self, face_i: usize, j: usize) -> f64 {
        self.mfx[face_i * self.ny + j]
    }

    #[inline]
    pub fn fy(&self, i: usize, face_j: usize) -> f64 {
        self.mfy[i * (self.ny + 1) + face_j]
    }

    /// Discrete `d/dx1 V` and `d/dx2 V` consistent with the face weights:
    /// `-e^{V} (m_{+} - m_{-}) / h`.
    pub fn discrete_grad_v(&self) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut gx = vec![0.0; nx * ny];
        let mut gy = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                let c = i * ny + j;
                gx[c] = -self.ev[c] * (self.fx(i + 1, j) - self.fx(i, j)) / self.hx;
                gy[c] = -self.ev[c] * (self.fy(i, j + 1) - self.fy(i, j)) / self.hy;
            }
        }
        (gx, gy)
    }

    /// `sum_c m_c a_c b_c`.
    pub fn weighted_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.m.iter().zip(a).zip(b).map(|((m, a), b)| m * a * b).sum()
    }

    /// Gibbs mass `sum_c m_c u_c`.
    pub fn weighted_sum(&self, u: &[f64]) -> f64 {
        self.m.iter().zip(u).map(|(m, u)| m * u).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{normalize_potential, QuadratureCfg};

    #[test]
    fn gibbs_mass_is_near_one() {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        let l = p.half_width(1e-12).unwrap();
        let g = PlaneGrid::new(&p, 128, 128, l).unwrap();
        let total: f64 = g.m.iter().sum();
        // The midpoint rule is spectrally accurate for smooth rapidly decaying integrands.
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn discrete_gradient_is_second_order() {
        let p = PotentialSpec::family(1.0, 2.0).unwrap();
        let err = |n: usize| {
            let g = PlaneGrid::new(&p, n, n, 3.0).unwrap();
            let (gx, gy) = g.discrete_grad_v();
            let mut e: f64 = 0.0;
            for i in 1..n - 1 {
                for j in 1..n - 1 {
                    let ex = p.eval([g.xs[i], g.ys[j]]);
                    let scale = ex.grad_norm().max(1.0);
                    e = e.max((gx[i * n + j] - ex.grad[0]).abs() / scale);
                    e = e.max((gy[i * n + j] - ex.grad[1]).abs() / scale);
                }
            }
            e
        };
        let (a, b) = (err(64), err(128));
        assert!((a / b).log2() > 1.9, "{a} {b}");
    }
}
