use std::f64::consts::TAU;

use crate::error::Result;
use crate::plane::{GridCfg, PlaneGrid};
use crate::potential::PotentialSpec;
use crate::weight::WeightParams;

/// `g` sampled on the phase grid together with its coefficient `kappa zeta` in
/// the weighted measure.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub params: WeightParams,
    pub coefficient: f64,
    pub g: Vec<f64>,
}

/// Phase grid `[-L, L]^2 x S^1`, index `(i * ny + j) * nalpha + k`.
/// Angles sit at `alpha_k = k h_alpha`, angular faces at `(k + 1/2) h_alpha`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub cfg: GridCfg,
    pub potential: PotentialSpec,
    pub plane: PlaneGrid,
    pub nalpha: usize,
    pub halpha: f64,
    pub alphas: Vec<f64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    /// `sin a_{k+1/2} - sin a_{k-1/2}`: exact angular integral of `cos` over cell `k`.
    pub s_k: Vec<f64>,
    /// `cos a_{k-1/2} - cos a_{k+1/2}`: exact angular integral of `sin` over cell `k`.
    pub c_k: Vec<f64>,
    pub sin_face: Vec<f64>,
    pub cos_face: Vec<f64>,
    /// `hy (m_{i+1/2} - m_{i-1/2})` per plane cell.
    pub ax: Vec<f64>,
    /// `hx (m_{j+1/2} - m_{j-1/2})` per plane cell.
    pub ay: Vec<f64>,
    /// Discrete `d1 V` consistent with the face weights.
    pub dvx: Vec<f64>,
    pub weight: Option<WeightTable>,
}

impl Grid {
    pub fn new(p: &PotentialSpec, cfg: &GridCfg) -> Result<Self> {
        let plane = cfg.plane(p)?;
        let na = cfg.nalpha;
        let h = cfg.halpha();
        let alphas: Vec<f64> = (0..na).map(|k| k as f64 * h).collect();
        let face = |k: usize| (k as f64 + 0.5) * h;
        let s_k = (0..na).map(|k| face(k).sin() - (face(k) - h).sin()).collect();
        let c_k = (0..na).map(|k| (face(k) - h).cos() - face(k).cos()).collect();
        let (nx, ny) = (plane.nx, plane.ny);
        let mut ax = vec![0.0; nx * ny];
        let mut ay = vec![0.0; nx * ny];
        for i in 0..nx {
            for j in 0..ny {
                ax[i * ny + j] = plane.hy * (plane.fx(i + 1, j) - plane.fx(i, j));
                ay[i * ny + j] = plane.hx * (plane.fy(i, j + 1) - plane.fy(i, j));
            }
        }
        let (dvx, _) = plane.discrete_grad_v();
        Ok(Self {
            cfg: *cfg,
            potential: *p,
            nalpha: na,
            halpha: h,
            cos: alphas.iter().map(|a| a.cos()).collect(),
            sin: alphas.iter().map(|a| a.sin()).collect(),
            alphas,
            s_k,
            c_k,
            sin_face: (0..na).map(|k| face(k).sin()).collect(),
            cos_face: (0..na).map(|k| face(k).cos()).collect(),
            ax,
            ay,
            dvx,
            plane,
            weight: None,
        })
    }

    /// Attaches `g` with coefficient `kappa zeta`. At the critical point of `V`
    /// the weight is replaced by its limit `e^{beta V}`.
    pub fn with_weight(mut self, params: WeightParams, coefficient: f64) -> Self {
        let mut g = Vec::with_capacity(self.len());
        for &x in &self.plane.xs {
            for &y in &self.plane.ys {
                for &a in &self.alphas {
                    g.push(params.log_weight_or_limit(&self.potential, [x, y], a).exp());
                }
            }
        }
        self.weight = Some(WeightTable {
            params,
            coefficient,
            g,
        });
        self
    }

    pub fn len(&self) -> usize {
        self.plane.len() * self.nalpha
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nx(&self) -> usize {
        self.plane.nx
    }

    pub fn ny(&self) -> usize {
        self.plane.ny
    }

    /// Quadrature weight `hx hy / nalpha` (angular average convention).
    pub fn cell_weight(&self) -> f64 {
        self.plane.hx * self.plane.hy / self.nalpha as f64
    }

    /// Cell volume `hx hy h_alpha`.
    pub fn volume(&self) -> f64 {
        self.plane.hx * self.plane.hy * self.halpha
    }

    /// `e^V + kappa zeta g` at a phase cell.
    pub fn mu_weight(&self, c: usize) -> f64 {
        let ev = self.plane.ev[c / self.nalpha];
        match &self.weight {
            Some(w) => ev + w.coefficient * w.g[c],
            None => ev,
        }
    }

    /// `2 sin(h_alpha / 2) / h_alpha`.
    pub fn sigma(&self) -> f64 {
        self.cfg.sigma()
    }

    pub fn coords(&self, c: usize) -> (f64, f64, f64) {
        let k = c % self.nalpha;
        let ij = c / self.nalpha;
        let (i, j) = (ij / self.ny(), ij % self.ny());
        (self.plane.xs[i], self.plane.ys[j], self.alphas[k])
    }
}

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}
