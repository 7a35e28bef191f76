//! The explicit hypocoercivity constant chain.
//!
//! Inputs are the Poincare constant `Lambda`, the elliptic regularity constant
//! `C_V`, the diffusivity `D` and the belt speed `kappa`. For potentials with
//! unbounded gradient and `kappa > 0` the Lyapunov weight enters through the
//! suprema `C3`, `C4(R)` and the free parameter `zeta`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic::{self, EigenCfg, GapEstimate, SolverCfg};
use crate::error::{Error, Result};
use crate::plane::GridCfg;
use crate::potential::PotentialSpec;
use crate::weight::{weight_params, SearchCfg, WeightParams};

/// The part of the chain that is pure arithmetic in `(D, kappa, Lambda, C_V)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCore {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma2_mac: f64,
    pub eps1: f64,
    pub xi: f64,
}

pub fn chain_core(d: f64, kappa: f64, lambda: f64, c_v: f64) -> ChainCore {
    let lambda1 = (c_v / 2f64.sqrt() + 2f64.sqrt()) / 2.0;
    let lambda2 = c_v + d / 2.0;
    let gamma2 = (lambda / 2.0) / (1.0 + lambda / 2.0);
    let denom = gamma2 * gamma2 + 2.0 * gamma2 + lambda2 * lambda2;
    let eps1 = 2.0 * d * gamma2 / denom;
    let xi = d * gamma2 * gamma2 / (2.0 * denom) - kappa * lambda1;
    ChainCore {
        lambda1,
        lambda2,
        gamma2_mac: gamma2,
        eps1,
        xi,
    }
}

impl ChainCore {
    /// Largest belt speed with `xi(kappa) > kappa u / 4`.
    pub fn kappa_max(&self, u: f64) -> f64 {
        self.eps1 * self.gamma2_mac / (4.0 * self.lambda1 + u)
    }

    /// `xi` at belt speed zero.
    pub fn xi0(&self, kappa: f64) -> f64 {
        self.xi + kappa * self.lambda1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypoConstants {
    pub kappa: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(rename = "C_V")]
    pub c_v: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma2_mac: f64,
    pub eps1: f64,
    pub xi: f64,
    pub u: f64,
    #[serde(rename = "C3")]
    pub c3: Option<f64>,
    #[serde(rename = "C4")]
    pub c4: Option<f64>,
    /// `ln C4`, kept because `C4` may overflow.
    pub log_c4: Option<f64>,
    pub zeta: Option<f64>,
    pub gamma1: f64,
    pub gamma2_gronwall: f64,
    pub lambda_kappa: f64,
    pub kappa_max: f64,
    /// Weight actually used in the norm (`kappa zeta g`), `None` when inactive.
    pub weight: Option<WeightParams>,
    #[serde(rename = "R")]
    pub lyapunov_radius: Option<f64>,
}

impl HypoConstants {
    /// `kappa zeta`, the coefficient of `g` in the weighted measure.
    pub fn weight_coefficient(&self) -> f64 {
        match (self.weight, self.zeta) {
            (Some(_), Some(z)) => self.kappa * z,
            _ => 0.0,
        }
    }

    /// `sqrt((1 + eps1) / (1 - eps1))`, the prefactor of the decay estimate.
    pub fn decay_prefactor(&self) -> f64 {
        ((1.0 + self.eps1) / (1.0 - self.eps1)).sqrt()
    }
}

/// Sampling of the suprema `C3` and `C4(R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupCfg {
    pub n_radii: usize,
    pub n_directions: usize,
    pub n_angles: usize,
    /// Outer radius of the `C3` sweep.
    pub c3_r_max: f64,
}

impl Default for SupCfg {
    fn default() -> Self {
        Self {
            n_radii: 400,
            n_directions: 8,
            n_angles: 64,
            c3_r_max: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChainCfg {
    #[serde(default)]
    pub search: SearchCfg,
    #[serde(default)]
    pub sup: SupCfg,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} must be positive and finite")))
    }
}

/// Evaluates the whole chain. Errors with [`Error::Infeasible`] when no positive
/// `gamma1` exists, naming the violated branch.
pub fn hypo_constants(
    p: &PotentialSpec,
    kappa: f64,
    d: f64,
    lambda: f64,
    c_v: f64,
    cfg: &ChainCfg,
) -> Result<HypoConstants> {
    check_positive("D", d)?;
    check_positive("Lambda", lambda)?;
    check_positive("C_V", c_v)?;
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::Precondition(format!("kappa = {kappa} must satisfy 0 <= kappa < 1")));
    }
    let core = chain_core(d, kappa, lambda, c_v);
    assert!(core.eps1 < d && core.eps1 < 1.0, "eps1 = {} violates eps1 < min(D, 1)", core.eps1);
    let mut hc = HypoConstants {
        kappa,
        d,
        lambda,
        c_v,
        lambda1: core.lambda1,
        lambda2: core.lambda2,
        gamma2_mac: core.gamma2_mac,
        eps1: core.eps1,
        xi: core.xi,
        u: 0.0,
        c3: None,
        c4: None,
        log_c4: None,
        zeta: None,
        gamma1: 0.0,
        gamma2_gronwall: core.eps1 * core.gamma2_mac,
        lambda_kappa: 0.0,
        kappa_max: 0.0,
        weight: None,
        lyapunov_radius: None,
    };
    let finish = |mut hc: HypoConstants| -> Result<HypoConstants> {
        hc.lambda_kappa = hc.gamma1 / 2.0;
        if !(hc.gamma1 > 0.0) {
            return Err(Error::Infeasible(format!(
                "gamma1 = {} is not positive (kappa = {}, kappa_max = {:e})",
                hc.gamma1, hc.kappa, hc.kappa_max
            )));
        }
        Ok(hc)
    };

    if let Some(u) = p.grad_sup() {
        // Bounded gradient: the weight is not needed.
        hc.u = u;
        hc.kappa_max = core.kappa_max(u);
        if kappa >= hc.kappa_max {
            return Err(Error::Infeasible(format!(
                "Remark 3 bound violated: kappa = {kappa} >= kappa_max = {:.6e} (4 xi - kappa |grad V|_inf <= 0)",
                hc.kappa_max
            )));
        }
        hc.gamma1 = (4.0 * core.xi - kappa * u) / (1.0 + core.eps1);
        return finish(hc);
    }

    let w = weight_params(kappa, d)?;
    let lyap = w.verify_lyapunov(p, &cfg.search)?;
    let r = lyap.r;
    let sup = suprema(&w, p, r, &cfg.sup)?;
    hc.lyapunov_radius = Some(r);
    hc.c3 = Some(sup.c3);
    hc.log_c4 = Some(sup.log_c4);
    hc.c4 = Some(sup.log_c4.exp()).filter(|c| c.is_finite());
    let c4 = sup.log_c4.exp();
    // Smallest admissible u, at the lower end zeta = C3 / c of the feasible interval.
    let u_min = c4 * sup.c3 / w.c;

    if kappa == 0.0 {
        hc.u = u_min;
        hc.kappa_max = core.kappa_max(u_min);
        hc.gamma1 = 4.0 * core.xi / (1.0 + core.eps1);
        return finish(hc);
    }

    let zeta = optimal_zeta(core.xi, kappa, sup.c3, c4, w.c).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!(
            "{msg}; Remark 3 bound kappa_max = {:.6e} with u = C3 C4 / c = {:.6e}",
            core.kappa_max(u_min),
            u_min
        )),
        e => e,
    })?;
    hc.zeta = Some(zeta);
    hc.u = zeta * c4;
    hc.kappa_max = core.kappa_max(hc.u);
    hc.weight = Some(w);
    hc.gamma1 = gamma1_of_zeta(core.xi, kappa, sup.c3, c4, w.c, core.eps1, zeta);
    finish(hc)
}

/// `min{4 xi - kappa zeta C4, c - C3 / zeta} / (1 + eps1)`.
pub fn gamma1_of_zeta(xi: f64, kappa: f64, c3: f64, c4: f64, c: f64, eps1: f64, zeta: f64) -> f64 {
    (4.0 * xi - kappa * zeta * c4).min(c - c3 / zeta) / (1.0 + eps1)
}

/// Intersection of the two monotone branches of `gamma1(zeta)` by bisection on
/// `(C3 / c, 4 xi / (kappa C4))`.
pub fn optimal_zeta(xi: f64, kappa: f64, c3: f64, c4: f64, c: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::Precondition("zeta optimisation needs kappa > 0".into()));
    }
    if !(c4.is_finite()) {
        return Err(Error::Infeasible(format!("C4(R) overflows (kappa = {kappa})")));
    }
    let lo0 = c3 / c;
    let hi0 = 4.0 * xi / (kappa * c4);
    if !(xi > 0.0) || !(hi0 > lo0) {
        return Err(Error::Infeasible(format!(
            "empty zeta interval: need C3/c = {lo0:.6e} < 4 xi/(kappa C4) = {hi0:.6e} (xi = {xi:.6e})"
        )));
    }
    let gap = |z: f64| (4.0 * xi - kappa * z * c4) - (c - c3 / z);
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suprema {
    pub c3: f64,
    pub log_c4: f64,
    /// Radius where the sampled `C3` integrand peaks.
    pub c3_argmax_r: f64,
    /// Per-radius sup of `ln(|grad V| e^V / g)`.
    pub c3_profile: Vec<(f64, f64)>,
}

/// Samples `C3 = sup |grad V| e^V / g` and `C4(R) = sup_{|x| <= R} |L(g) + c g| e^{-V}`
/// in log space. Fails if the `C3` integrand does not decrease over the three
/// outermost radii.
pub fn suprema(w: &WeightParams, p: &PotentialSpec, r: f64, cfg: &SupCfg) -> Result<Suprema> {
    if cfg.n_radii < 4 || cfg.n_directions == 0 || cfg.n_angles == 0 {
        return Err(Error::Config("suprema sampling needs n_radii >= 4 and nonzero angle counts".into()));
    }
    let r3_max = cfg.c3_r_max.max(2.0 * r);
    let tau = std::f64::consts::TAU;
    let points = |rad: f64| {
        (0..cfg.n_directions).flat_map(move |i| {
            let th = tau * i as f64 / cfg.n_directions as f64;
            (0..cfg.n_angles).map(move |k| ([rad * th.cos(), rad * th.sin()], tau * k as f64 / cfg.n_angles as f64))
        })
    };
    let c3_profile: Vec<(f64, f64)> = (1..=cfg.n_radii)
        .into_par_iter()
        .map(|i| {
            let rad = r3_max * i as f64 / cfg.n_radii as f64;
            let mut best = f64::NEG_INFINITY;
            for (x, a) in points(rad) {
                let e = p.eval(x);
                let lg = w.log_weight(p, x, a)?;
                best = best.max(e.grad_norm().ln() + e.v - lg);
            }
            Ok((rad, best))
        })
        .collect::<Result<_>>()?;
    let (imax, &(c3_argmax_r, log_c3)) = c3_profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty profile");
    let tail = &c3_profile[c3_profile.len() - 3..];
    if imax + 3 >= c3_profile.len() || !(tail[0].1 > tail[1].1 && tail[1].1 > tail[2].1) {
        return Err(Error::Numerical(format!(
            "C3 integrand not decreasing at the outer sampled radii up to {r3_max}"
        )));
    }
    let log_c4 = (1..=cfg.n_radii)
        .into_par_iter()
        .map(|i| {
            let rad = r * i as f64 / cfg.n_radii as f64;
            let mut best = f64::NEG_INFINITY;
            for (x, a) in points(rad) {
                let ratio = w.eval_weight_generator(p, x, a)?;
                let lg = w.log_weight(p, x, a)?;
                best = best.max((ratio + w.c).abs().ln() + lg - p.value(x));
            }
            Ok(best)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Suprema {
        c3: log_c3.exp(),
        log_c4,
        c3_argmax_r,
        c3_profile,
    })
}

/// Poincare constant of `e^{-V}` on the truncated plane grid.
pub fn estimate_spectral_gap(p: &PotentialSpec, grid: &GridCfg) -> Result<GapEstimate> {
    let plane = grid.plane(p)?;
    elliptic::spectral_gap(&plane, &EigenCfg::default(), &SolverCfg::default())
}

/// Elliptic regularity constant from `trials` random smooth right-hand sides.
pub fn estimate_elliptic_constant(
    p: &PotentialSpec,
    grid: &GridCfg,
    trials: usize,
    seed: u64,
) -> Result<elliptic::EllipticEstimate> {
    let plane = grid.plane(p)?;
    elliptic::elliptic_constant(&plane, grid.coupling(), trials, seed, &SolverCfg::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{normalize_potential, QuadratureCfg};

    #[test]
    fn regression_point() {
        let c = chain_core(1.0, 0.0, 2.0, 1.0);
        assert!((c.gamma2_mac - 0.5).abs() < 1e-15);
        assert!((c.lambda2 - 1.5).abs() < 1e-15);
        assert!((c.eps1 - 1.0 / 3.5).abs() < 1e-15);
        assert!((c.xi - 1.0 / 28.0).abs() < 1e-15);
        assert!((c.lambda1 - (0.5f64.sqrt() + 2f64.sqrt()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn xi_is_affine_and_matches_kappa_max() {
        let c0 = chain_core(1.3, 0.0, 1.7, 2.1);
        let u = 0.8;
        let kmax = c0.kappa_max(u);
        for i in 0..200 {
            let k = 2.0 * kmax * i as f64 / 200.0;
            let c = chain_core(1.3, k, 1.7, 2.1);
            assert!((c.xi - (c0.xi - k * c0.lambda1)).abs() < 1e-15);
            if (k - kmax).abs() > 1e-12 {
                assert_eq!(c.xi > k * u / 4.0, k < kmax, "k = {k}");
            }
        }
    }

    #[test]
    fn zeta_matches_quadratic_root() {
        let (xi, kappa, c3, c4, c) = (0.05, 0.01, 0.3, 2.0, 0.1);
        let z = optimal_zeta(xi, kappa, c3, c4, c).unwrap();
        // kappa C4 z^2 - (4 xi - c) z - C3 = 0
        let b = 4.0 * xi - c;
        let exact = (b + (b * b + 4.0 * kappa * c4 * c3).sqrt()) / (2.0 * kappa * c4);
        assert!((z - exact).abs() < 1e-9 * exact);
        let g = gamma1_of_zeta(xi, kappa, c3, c4, c, 0.2, z);
        for f in [0.99, 1.01] {
            assert!(gamma1_of_zeta(xi, kappa, c3, c4, c, 0.2, z * f) <= g);
        }
        assert!(z > c3 / c && 4.0 * xi - kappa * z * c4 > 0.0);
    }

    #[test]
    fn empty_zeta_interval_is_infeasible() {
        assert!(matches!(optimal_zeta(0.05, 0.5, 0.3, 2.0, 0.1), Err(Error::Infeasible(_))));
    }

    #[test]
    fn bounded_gradient_chain() {
        let p = normalize_potential(&PotentialSpec::family(1.0, 1.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        let hc = hypo_constants(&p, 0.0, 1.0, 2.0, 1.0, &ChainCfg::default()).unwrap();
        assert!((hc.gamma1 - 4.0 / 28.0 / (1.0 + 1.0 / 3.5)).abs() < 1e-14);
        assert!((hc.lambda_kappa - hc.gamma1 / 2.0).abs() < 1e-16);
        assert_eq!(hc.u, 1.0);
        let over = hypo_constants(&p, 2.0 * hc.kappa_max, 1.0, 2.0, 1.0, &ChainCfg::default());
        assert!(matches!(over, Err(Error::Infeasible(m)) if m.contains("Remark 3")));
        let under = hypo_constants(&p, 0.5 * hc.kappa_max, 1.0, 2.0, 1.0, &ChainCfg::default()).unwrap();
        assert!(under.gamma1 > 0.0 && under.gamma1 < hc.gamma1);
    }

    #[test]
    fn unbounded_gradient_chain_at_rest() {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        let hc = hypo_constants(&p, 0.0, 1.0, 2.0, 1.0, &ChainCfg::default()).unwrap();
        assert!((hc.gamma1 - 4.0 * hc.xi / (1.0 + hc.eps1)).abs() < 1e-15);
        assert_eq!(hc.weight_coefficient(), 0.0);
        assert!(hc.c3.unwrap() > 0.0 && hc.log_c4.unwrap().is_finite());
        assert!(hc.kappa_max > 0.0);
        // kappa just below the reported bound remains feasible only if the bound is honest.
        let err = hypo_constants(&p, 0.02, 1.0, 2.0, 1.0, &ChainCfg::default());
        if hc.kappa_max < 0.02 {
            assert!(matches!(err, Err(Error::Infeasible(_))));
        }
    }

    #[test]
    fn c3_profile_peaks_inside() {
        let p = normalize_potential(&PotentialSpec::family(1.0, 2.0).unwrap(), &QuadratureCfg::default())
            .unwrap();
        let w = weight_params(0.05, 1.0).unwrap();
        let s = suprema(&w, &p, 10.0, &SupCfg::default()).unwrap();
        let i = s.c3_profile.iter().position(|x| x.0 == s.c3_argmax_r).unwrap();
        assert!(s.c3_profile[i..].windows(2).all(|w| w[1].1 <= w[0].1));
    }
}
