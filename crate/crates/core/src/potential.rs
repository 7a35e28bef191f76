//! External potential `V`, its derivatives, normalization and hypothesis checks.
//!
//! All implemented kinds are radially symmetric, so the asymmetry radius is zero
//! and every radial quantity can be evaluated along the positive `x1` axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which potential to use. `Flat` (`V` constant) is a degenerate test mode:
/// it is not normalizable and is rejected by config validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialKind {
    /// `V(x) = K (1 + |x|^2)^(s/2)`.
    Family {
        #[serde(rename = "K")]
        k: f64,
        s: f64,
    },
    /// `V(x) = omega |x|^2 / 2`.
    Quadratic { omega: f64 },
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Additive constant fixing the normalization of `e^{-V}`.
    pub shift: f64,
}

/// Value, gradient and Hessian of `V` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEval {
    pub v: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl PotentialEval {
    pub fn grad_norm(&self) -> f64 {
        self.grad[0].hypot(self.grad[1])
    }

    /// Spectral norm of the (symmetric) Hessian.
    pub fn hess_norm(&self) -> f64 {
        let [[a, b], [_, d]] = self.hess;
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean + rad).abs().max((mean - rad).abs())
    }
}

impl PotentialSpec {
    pub fn family(k: f64, s: f64) -> Result<Self> {
        let p = Self {
            kind: PotentialKind::Family { k, s },
            shift: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn quadratic(omega: f64) -> Result<Self> {
        let p = Self {
            kind: PotentialKind::Quadratic { omega },
            shift: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn flat() -> Self {
        Self {
            kind: PotentialKind::Flat,
            shift: 0.0,
        }
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// Admissible parameter ranges: `K > 0`, `s >= 1`, `omega > 0`.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PotentialKind::Family { k, s } => {
                let mut bad = Vec::new();
                if !(k > 0.0 && k.is_finite()) {
                    bad.push(format!("K = {k} must satisfy K > 0"));
                }
                if !(s >= 1.0 && s.is_finite()) {
                    bad.push(format!("s = {s} must satisfy s >= 1 (admissible potential family)"));
                }
                if bad.is_empty() {
                    Ok(())
                } else {
                    Err(Error::Config(bad.join("; ")))
                }
            }
            PotentialKind::Quadratic { omega } => {
                if omega > 0.0 && omega.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("omega = {omega} must satisfy omega > 0")))
                }
            }
            PotentialKind::Flat => Err(Error::Config(
                "the flat potential is a test mode and cannot be normalized".into(),
            )),
        }
    }

    /// `true` iff `|grad V|` is bounded on the plane (family with `s = 1`).
    pub fn gradient_bounded(&self) -> bool {
        match self.kind {
            PotentialKind::Family { s, .. } => s == 1.0,
            PotentialKind::Quadratic { .. } => false,
            PotentialKind::Flat => true,
        }
    }

    /// `sup |grad V|` when it is finite.
    pub fn grad_sup(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Family { k, s: 1.0 } => Some(k),
            PotentialKind::Flat => Some(0.0),
            _ => None,
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> PotentialEval {
        let r2 = x[0] * x[0] + x[1] * x[1];
        match self.kind {
            PotentialKind::Family { k, s } => {
                let base = 1.0 + r2;
                let v = k * base.powf(0.5 * s);
                let d1 = k * s * base.powf(0.5 * s - 1.0);
                let d2 = k * s * (s - 2.0) * base.powf(0.5 * s - 2.0);
                PotentialEval {
                    v: v + self.shift,
                    grad: [d1 * x[0], d1 * x[1]],
                    hess: [
                        [d1 + d2 * x[0] * x[0], d2 * x[0] * x[1]],
                        [d2 * x[0] * x[1], d1 + d2 * x[1] * x[1]],
                    ],
                }
            }
            PotentialKind::Quadratic { omega } => PotentialEval {
                v: 0.5 * omega * r2 + self.shift,
                grad: [omega * x[0], omega * x[1]],
                hess: [[omega, 0.0], [0.0, omega]],
            },
            PotentialKind::Flat => PotentialEval {
                v: self.shift,
                grad: [0.0, 0.0],
                hess: [[0.0, 0.0], [0.0, 0.0]],
            },
        }
    }

    /// `grad V` alone, cheaper than [`PotentialSpec::eval`].
    pub fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        match self.kind {
            PotentialKind::Family { k, s } => {
                let d1 = k * s * (1.0 + x[0] * x[0] + x[1] * x[1]).powf(0.5 * s - 1.0);
                [d1 * x[0], d1 * x[1]]
            }
            PotentialKind::Quadratic { omega } => [omega * x[0], omega * x[1]],
            PotentialKind::Flat => [0.0, 0.0],
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.eval(x).v
    }

    /// Radial profile `V(r)`.
    pub fn radial_value(&self, r: f64) -> f64 {
        self.value([r, 0.0])
    }

    /// Radial profile `|grad V|(r)`.
    pub fn radial_grad(&self, r: f64) -> f64 {
        self.eval([r, 0.0]).grad_norm()
    }

    /// Smallest `r >= 0` with `V(r) >= level`. `V` is non-decreasing in `r`
    /// for every implemented kind.
    pub fn radius_for_value(&self, level: f64) -> Result<f64> {
        invert_radial(|r| self.radial_value(r), level, "V")
    }

    /// Smallest `r >= 0` with `|grad V|(r) >= level`; fails when the gradient is
    /// bounded below the requested level.
    pub fn radius_for_grad(&self, level: f64) -> Result<f64> {
        if let Some(sup) = self.grad_sup() {
            if level >= sup {
                return Err(Error::Precondition(format!(
                    "|grad V| <= {sup} never reaches {level}"
                )));
            }
        }
        invert_radial(|r| self.radial_grad(r), level, "|grad V|")
    }

    /// Half-width `L` of the square box such that `e^{-V} < threshold` at `(L, 0)`.
    pub fn half_width(&self, threshold: f64) -> Result<f64> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config(format!("threshold {threshold} not in (0,1)")));
        }
        self.radius_for_value(-threshold.ln())
    }
}

fn invert_radial(f: impl Fn(f64) -> f64, level: f64, name: &str) -> Result<f64> {
    if f(0.0) >= level {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while f(hi) < level {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical(format!("{name} never reaches {level}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Tensor-product trapezoid quadrature on `[-L, L]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureCfg {
    /// Starting number of nodes per axis; doubled until converged.
    pub nodes: usize,
    /// Target absolute accuracy of `int e^{-V}`.
    pub tol: f64,
    /// `e^{-V}` at the box edge must be below this.
    pub edge_threshold: f64,
    pub max_nodes: usize,
}

impl Default for QuadratureCfg {
    fn default() -> Self {
        Self {
            nodes: 64,
            tol: 1e-12,
            edge_threshold: 1e-14,
            max_nodes: 8192,
        }
    }
}

/// `int_{R^2} e^{-V} dx` on the truncated box, refined until two successive
/// node counts agree within `cfg.tol`.
pub fn gibbs_integral(p: &PotentialSpec, cfg: &QuadratureCfg) -> Result<f64> {
    let l = p.half_width(cfg.edge_threshold)?;
    let rule = |n: usize| -> f64 {
        let h = 2.0 * l / n as f64;
        let w = |i: usize| if i == 0 || i == n { 0.5 } else { 1.0 };
        let mut sum = 0.0;
        for i in 0..=n {
            let x = -l + h * i as f64;
            let mut row = 0.0;
            for j in 0..=n {
                let y = -l + h * j as f64;
                row += w(j) * (-p.value([x, y])).exp();
            }
            sum += w(i) * row;
        }
        sum * h * h
    };
    let mut n = cfg.nodes.max(8);
    let mut prev = rule(n);
    let mut history = vec![prev];
    while n * 2 <= cfg.max_nodes {
        n *= 2;
        let cur = rule(n);
        history.push(cur);
        if (cur - prev).abs() <= cfg.tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::non_convergence(
        "gibbs quadrature",
        format!("no agreement within {} up to {} nodes per axis", cfg.tol, cfg.max_nodes),
        history,
    ))
}

/// Returns `p` with `shift` chosen so that `int e^{-V} dx = 1`.
pub fn normalize_potential(p: &PotentialSpec, cfg: &QuadratureCfg) -> Result<PotentialSpec> {
    p.validate()?;
    let z = gibbs_integral(p, cfg)?;
    Ok(p.with_shift(p.shift + z.ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H5Sample {
    pub r: f64,
    pub grad_over_v: f64,
    pub hess_over_grad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h2_integral: f64,
    /// Smallest `c1` with `|hess V| <= c1 (1 + |grad V|)` on the samples.
    pub h4_c1_estimate: f64,
    pub h5_ratios: Vec<H5Sample>,
    /// Both ratios decrease along the sampled radii beyond the first.
    pub h5_decreasing: bool,
    pub gradient_bounded: bool,
    pub grad_inf_norm: Option<f64>,
}

/// Samples the pointwise hypotheses on concentric circles of the given radii.
/// The Poincare inequality is not checked here.
pub fn check_hypotheses(
    p: &PotentialSpec,
    radii: &[f64],
    quad: &QuadratureCfg,
) -> Result<HypothesisReport> {
    const DIRECTIONS: usize = 16;
    let h2_integral = gibbs_integral(p, quad)?;
    let mut c1: f64 = 0.0;
    let mut h5 = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut g_over_v: f64 = 0.0;
        let mut h_over_g: f64 = 0.0;
        for d in 0..DIRECTIONS {
            let th = 2.0 * std::f64::consts::PI * d as f64 / DIRECTIONS as f64;
            let e = p.eval([r * th.cos(), r * th.sin()]);
            let g = e.grad_norm();
            let h = e.hess_norm();
            c1 = c1.max(h / (1.0 + g));
            g_over_v = g_over_v.max(g / e.v.abs());
            if g > 0.0 {
                h_over_g = h_over_g.max(h / g);
            } else {
                h_over_g = f64::INFINITY;
            }
        }
        h5.push(H5Sample {
            r,
            grad_over_v: g_over_v,
            hess_over_grad: h_over_g,
        });
    }
    let h5_decreasing = h5.windows(2).skip(1).all(|w| {
        w[1].grad_over_v <= w[0].grad_over_v && w[1].hess_over_grad <= w[0].hess_over_grad
    });
    Ok(HypothesisReport {
        h2_integral,
        h4_c1_estimate: c1,
        h5_ratios: h5,
        h5_decreasing,
        gradient_bounded: p.gradient_bounded(),
        grad_inf_norm: p.grad_sup(),
    })
}
