//! Lyapunov weight `g(x, alpha) = exp(beta V + |grad V| Gamma(Y))` controlling the
//! belt term when `|grad V|` is unbounded.
//!
//! `Y = tau(alpha) . n` and `Y_perp = tau_perp(alpha) . n` with `n = grad V / |grad V|`,
//! `tau = (cos, sin)` and `tau_perp = (-sin, cos)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;

/// Parameters of the weight for belt speed `kappa` and angular diffusivity `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub kappa: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub eps0: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub c: f64,
    /// `Gamma(-1)`.
    pub gamma0: f64,
}

pub const KAPPA_LIMIT: f64 = 1.0 / 3.0;

pub fn weight_params(kappa: f64, d: f64) -> Result<WeightParams> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Config(format!("D = {d} must satisfy D > 0")));
    }
    if !(0.0..KAPPA_LIMIT).contains(&kappa) {
        return Err(Error::Precondition(format!(
            "kappa = {kappa} violates 0 <= kappa < 1/3 required for the weight construction (Proposition 1)"
        )));
    }
    let k = kappa;
    let delta_plus = 3.0 * (1.0 + k) / (4.0 * d);
    let delta_minus = (1.0 - 3.0 * k) / (4.0 * d);
    let eps0 = (1.0 + 9.0 * k) / (2.0 * (1.0 + 3.0 * k));
    let beta = 0.75 + (1.0 + 9.0 * k) * (7.0 + 3.0 * k) / (8.0 * (6.0 * k * k + 11.0 * k + 1.0));
    let gamma = eps0 * (1.0 + d * delta_plus - beta);
    let gamma_tilde = eps0 * (beta - 1.0 - d * delta_minus);
    let w = WeightParams {
        kappa,
        d,
        delta_plus,
        delta_minus,
        eps0,
        beta,
        gamma,
        gamma_tilde,
        c: 0.5 * (gamma - kappa * beta),
        gamma0: delta_minus,
    };
    w.check()?;
    Ok(w)
}

impl WeightParams {
    /// Lists every violated structural inequality.
    pub fn violations(&self) -> Vec<String> {
        let w = self;
        let mut v = Vec::new();
        let mut need = |ok: bool, what: &str| {
            if !ok {
                v.push(what.to_string());
            }
        };
        need(
            0.0 < w.delta_minus && w.delta_minus < w.delta_plus && w.delta_plus < 1.0 / w.d,
            "0 < delta_minus < delta_plus < 1/D",
        );
        need(w.eps0 > 0.0 && w.eps0 < 1.0, "0 < eps0 < 1");
        need(w.beta > 1.0 && w.beta < 2.0, "1 < beta < 2");
        let lo = 1.0 + w.d * (w.delta_plus + w.delta_minus) / 2.0;
        let hi = w.eps0 / (w.kappa + w.eps0) * (1.0 + w.d * w.delta_plus);
        need(lo < w.beta && w.beta < hi, "beta interval (3.2)");
        need(
            w.kappa < w.d * (w.delta_plus - w.delta_minus) / (2.0 + w.d * (w.delta_plus + w.delta_minus)),
            "kappa < D(delta_plus - delta_minus)/(2 + D(delta_plus + delta_minus))",
        );
        need(w.gamma > w.kappa * w.beta, "gamma > kappa beta");
        need(0.0 < w.gamma && w.gamma < w.gamma_tilde, "0 < gamma < gamma_tilde");
        need(w.c > 0.0, "c > 0");
        need(w.gamma0 > 0.0, "Gamma(-1) > 0");
        v
    }

    pub fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Precondition(format!("weight parameters violate: {}", v.join(", "))))
        }
    }

    fn ramp_slope(&self) -> f64 {
        (self.delta_plus - self.delta_minus) / (2.0 * self.eps0)
    }

    /// `(Gamma(Y), Gamma'(Y))`.
    pub fn gamma_profile(&self, y: f64) -> Result<(f64, f64)> {
        let y = clamp_unit(y)?;
        Ok(self.profile_unchecked(y))
    }

    /// `Gamma''(Y)`; the ramp value is used at the knots.
    pub fn gamma_second(&self, y: f64) -> f64 {
        if y.abs() <= self.eps0 {
            self.ramp_slope()
        } else {
            0.0
        }
    }

    fn profile_unchecked(&self, y: f64) -> (f64, f64) {
        let (dm, dp, e0) = (self.delta_minus, self.delta_plus, self.eps0);
        let a = self.ramp_slope();
        if y < -e0 {
            (self.gamma0 + dm * (y + 1.0), dm)
        } else if y <= e0 {
            let t = y + e0;
            (self.gamma0 + dm * (1.0 - e0) + dm * t + 0.5 * a * t * t, dm + a * t)
        } else {
            let at_knot = self.gamma0 + dm * (1.0 - e0) + 2.0 * e0 * dm + 2.0 * a * e0 * e0;
            (at_knot + dp * (y - e0), dp)
        }
    }

    /// `log g(x, alpha)`; fails where `grad V = 0`.
    pub fn log_weight(&self, p: &PotentialSpec, x: [f64; 2], alpha: f64) -> Result<f64> {
        let e = p.eval(x);
        let n = e.grad_norm();
        if n == 0.0 {
            return Err(Error::Precondition(format!(
                "weight undefined at critical point ({}, {}) of V",
                x[0], x[1]
            )));
        }
        let y = (alpha.cos() * e.grad[0] + alpha.sin() * e.grad[1]) / n;
        let (gam, _) = self.profile_unchecked(y.clamp(-1.0, 1.0));
        Ok(self.beta * e.v + n * gam)
    }

    /// `log g` with the limit value `beta V` at critical points of `V`.
    pub fn log_weight_or_limit(&self, p: &PotentialSpec, x: [f64; 2], alpha: f64) -> f64 {
        self.log_weight(p, x, alpha)
            .unwrap_or_else(|_| self.beta * p.value(x))
    }

    pub fn eval_weight(&self, p: &PotentialSpec, x: [f64; 2], alpha: f64) -> Result<f64> {
        self.log_weight(p, x, alpha).map(f64::exp)
    }

    /// Closed form of `L(g)/g` where
    /// `L h = D h_aa + (tau + kappa e1).grad h - (tau_perp.grad V) h_a - (tau.grad V) h`.
    pub fn eval_weight_generator(&self, p: &PotentialSpec, x: [f64; 2], alpha: f64) -> Result<f64> {
        self.generator_parts(p, x, alpha).map(|g| g.ratio())
    }

    fn generator_parts(&self, p: &PotentialSpec, x: [f64; 2], alpha: f64) -> Result<GeneratorParts> {
        let e = p.eval(x);
        let gn = e.grad_norm();
        if gn == 0.0 {
            return Err(Error::Precondition(format!(
                "weight generator undefined at critical point ({}, {}) of V",
                x[0], x[1]
            )));
        }
        let (s, c) = alpha.sin_cos();
        let n = [e.grad[0] / gn, e.grad[1] / gn];
        let y = (c * n[0] + s * n[1]).clamp(-1.0, 1.0);
        let yp = -s * n[0] + c * n[1];
        let (gam, gp) = self.profile_unchecked(y);
        let gpp = self.gamma_second(y);
        let h = e.hess;
        let hn = [h[0][0] * n[0] + h[0][1] * n[1], h[1][0] * n[0] + h[1][1] * n[1]];
        let ht = [h[0][0] * c + h[0][1] * s, h[1][0] * c + h[1][1] * s];
        // grad(|grad V| Gamma(Y)) = Gamma H n + Gamma' (H tau - Y H n)
        let grad_lift = [
            gam * hn[0] + gp * (ht[0] - y * hn[0]),
            gam * hn[1] + gp * (ht[1] - y * hn[1]),
        ];
        let v = [c + self.kappa, s];
        let d = self.d;
        Ok(GeneratorParts {
            grad_norm: gn,
            core: (self.beta - 1.0 - d * gp) * gn * y
                + yp * yp * (d * gn * gpp + gn * gn * (d * gp * gp - gp)),
            belt: self.kappa * self.beta * e.grad[0],
            lift: v[0] * grad_lift[0] + v[1] * grad_lift[1],
        })
    }

    /// Samples the Lyapunov inequality `L(g) <= -c |grad V| g` on a polar grid and
    /// returns the smallest sampled radius beyond which it holds everywhere.
    pub fn verify_lyapunov(&self, p: &PotentialSpec, search: &SearchCfg) -> Result<LyapunovReport> {
        if p.gradient_bounded() {
            return Err(Error::Precondition(
                "Lyapunov weight requires an unbounded potential gradient; g = 0 is used for bounded gradients".into(),
            ));
        }
        search.validate()?;
        self.check()?;
        let radii = search.radii();
        let rows: Vec<RadiusRow> = radii
            .par_iter()
            .map(|&r| self.sweep_radius(p, r, search))
            .collect::<Result<_>>()?;

        let first_ok = |pred: &dyn Fn(&RadiusRow) -> bool| -> Option<usize> {
            let mut idx = None;
            for (i, row) in rows.iter().enumerate().rev() {
                if pred(row) {
                    idx = Some(i);
                } else {
                    break;
                }
            }
            idx
        };
        let i_r = first_ok(&|row| row.margin >= 0.0).ok_or_else(|| {
            Error::Precondition(format!(
                "Lyapunov inequality fails at the outermost sampled radius {} (margin {:.3e}); kappa too large or r_max too small",
                search.r_max,
                rows.last().map(|r| r.margin).unwrap_or(f64::NAN)
            ))
        })?;
        let r1 = first_ok(&|row| row.core_max <= -self.gamma).map(|i| rows[i].r);
        let r2 = first_ok(&|row| row.lift_max <= self.c).map(|i| rows[i].r);
        let margin_min = rows[i_r..].iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        let per_radius = search.n_directions * search.n_angles;
        Ok(LyapunovReport {
            r: rows[i_r].r,
            c: self.c,
            margin_min,
            samples: rows.len() * per_radius,
            samples_beyond_r: (rows.len() - i_r) * per_radius,
            r1,
            r2,
            profile: rows
                .iter()
                .map(|row| MarginSample {
                    r: row.r,
                    worst_margin: row.margin,
                })
                .collect(),
        })
    }

    fn sweep_radius(&self, p: &PotentialSpec, r: f64, search: &SearchCfg) -> Result<RadiusRow> {
        let mut row = RadiusRow {
            r,
            margin: f64::INFINITY,
            core_max: f64::NEG_INFINITY,
            lift_max: f64::NEG_INFINITY,
        };
        let tau = std::f64::consts::TAU;
        for i in 0..search.n_directions {
            let th = tau * i as f64 / search.n_directions as f64;
            let x = [r * th.cos(), r * th.sin()];
            for k in 0..search.n_angles {
                let alpha = tau * k as f64 / search.n_angles as f64;
                let parts = self.generator_parts(p, x, alpha)?;
                let m = -parts.ratio() / parts.grad_norm - self.c;
                if !m.is_finite() {
                    return Err(Error::Numerical(format!("non-finite Lyapunov margin at r = {r}")));
                }
                row.margin = row.margin.min(m);
                row.core_max = row.core_max.max(parts.core / parts.grad_norm);
                row.lift_max = row.lift_max.max(parts.lift / parts.grad_norm);
            }
        }
        Ok(row)
    }
}

struct GeneratorParts {
    grad_norm: f64,
    core: f64,
    belt: f64,
    lift: f64,
}

impl GeneratorParts {
    fn ratio(&self) -> f64 {
        self.core + self.belt + self.lift
    }
}

struct RadiusRow {
    r: f64,
    margin: f64,
    core_max: f64,
    lift_max: f64,
}

fn clamp_unit(y: f64) -> Result<f64> {
    if y.abs() <= 1.0 {
        Ok(y)
    } else if y.abs() <= 1.0 + 1e-12 {
        Ok(y.clamp(-1.0, 1.0))
    } else {
        Err(Error::Precondition(format!("alignment Y = {y} outside [-1, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchCfg {
    pub r_min: f64,
    pub r_max: f64,
    pub n_radii: usize,
    pub n_directions: usize,
    pub n_angles: usize,
}

impl Default for SearchCfg {
    fn default() -> Self {
        Self {
            r_min: 0.1,
            r_max: 200.0,
            n_radii: 240,
            n_directions: 8,
            n_angles: 128,
        }
    }
}

impl SearchCfg {
    fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min) {
            return Err(Error::Config(format!(
                "search radii need 0 < r_min < r_max, got {} and {}",
                self.r_min, self.r_max
            )));
        }
        if self.n_radii < 2 || self.n_directions == 0 || self.n_angles == 0 {
            return Err(Error::Config("search needs n_radii >= 2 and nonzero angle counts".into()));
        }
        Ok(())
    }

    /// Log-spaced radii from `r_min` to `r_max`.
    pub fn radii(&self) -> Vec<f64> {
        let (a, b) = (self.r_min.ln(), self.r_max.ln());
        let n = self.n_radii - 1;
        (0..=n).map(|i| (a + (b - a) * i as f64 / n as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSample {
    pub r: f64,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    #[serde(rename = "R")]
    pub r: f64,
    pub c: f64,
    pub margin_min: f64,
    pub samples: usize,
    pub samples_beyond_r: usize,
    /// Radius beyond which the weight-independent part is below `-gamma`.
    pub r1: Option<f64>,
    /// Radius beyond which the lifted transport term is below `c`.
    pub r2: Option<f64>,
    pub profile: Vec<MarginSample>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fam(k: f64, s: f64) -> PotentialSpec {
        PotentialSpec::family(k, s).unwrap()
    }

    #[test]
    fn stationary_belt_parameters() {
        let w = weight_params(0.0, 1.0).unwrap();
        assert_eq!(
            (w.delta_plus, w.delta_minus, w.eps0, w.beta),
            (0.75, 0.25, 0.5, 1.625)
        );
        assert!((w.c - w.gamma / 2.0).abs() < 1e-15);
    }

    #[test]
    fn moving_belt_parameters() {
        let w = weight_params(0.1, 0.5).unwrap();
        assert!((w.delta_plus - 1.65).abs() < 1e-14);
        assert!((w.delta_minus - 0.35).abs() < 1e-14);
        assert!((w.eps0 - 1.9 / 2.6).abs() < 1e-14);
        // 3/4 + 1.9 * 7.3 / (8 * 2.16)
        assert!((w.beta - (0.75 + 13.87 / 17.28)).abs() < 1e-14);
        assert!((w.beta - 1.5527).abs() < 1e-4);
    }

    #[test]
    fn kappa_domain() {
        assert!(matches!(weight_params(1.0 / 3.0, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(weight_params(0.5, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(weight_params(-0.1, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(weight_params(0.1, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn profile_knots_and_midpoint() {
        let w = weight_params(0.05, 1.3).unwrap();
        let (_, mid) = w.gamma_profile(0.0).unwrap();
        assert!((mid - 0.5 * (w.delta_plus + w.delta_minus)).abs() < 1e-14);
        let (_, up) = w.gamma_profile(w.eps0).unwrap();
        let (_, dn) = w.gamma_profile(-w.eps0).unwrap();
        assert!((up - w.delta_plus).abs() < 1e-14 && (dn - w.delta_minus).abs() < 1e-14);
        for knot in [-w.eps0, w.eps0] {
            let (a, _) = w.gamma_profile(knot - 1e-12).unwrap();
            let (b, _) = w.gamma_profile(knot + 1e-12).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(w.gamma_profile(-1.0).unwrap().0, w.gamma0);
        assert!(w.gamma_profile(1.5).is_err());
    }

    #[test]
    fn primitive_matches_quadrature_of_slope() {
        let w = weight_params(0.2, 0.7).unwrap();
        let n = 200_000;
        let h = 2.0 / n as f64;
        let mut acc = w.gamma0;
        for i in 0..n {
            let y0 = -1.0 + h * i as f64;
            let (_, a) = w.gamma_profile(y0).unwrap();
            let (_, b) = w.gamma_profile(y0 + h).unwrap();
            acc += 0.5 * h * (a + b);
        }
        assert!((acc - w.gamma_profile(1.0).unwrap().0).abs() < 1e-9);
    }

    #[test]
    fn weight_on_axis_composes_profile() {
        let p = fam(1.0, 2.0);
        let w = weight_params(0.1, 1.0).unwrap();
        let (gam1, _) = w.gamma_profile(1.0).unwrap();
        let e = p.eval([1.0, 0.0]);
        let expect = (w.beta * e.v + e.grad_norm() * gam1).exp();
        let g = w.eval_weight(&p, [1.0, 0.0], 0.0).unwrap();
        assert!((g - expect).abs() <= 1e-14 * expect);
        assert!(w.eval_weight(&p, [0.0, 0.0], 0.3).is_err());
    }

    #[test]
    fn axis_generator_matches_hand_substitution() {
        // kappa = 0, alpha = 0, x on the positive x1 axis: Y = 1, Y_perp = 0.
        let w = weight_params(0.0, 1.0).unwrap();
        let p = fam(1.0, 2.5);
        let x = [1.7, 0.0];
        let e = p.eval(x);
        let gn = e.grad_norm();
        let (gam, gp) = w.gamma_profile(1.0).unwrap();
        // diff = tau . grad(|grad V| Gamma) = Gamma H11 + Gamma' (H11 - H11) on the axis.
        let diff = gam * e.hess[0][0] + gp * 0.0;
        let expect = (w.beta - 1.0 - w.d * w.delta_plus) * gn + diff;
        let got = w.eval_weight_generator(&p, x, 0.0).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    /// Central-difference application of `L` to `g`, divided by `g`.
    fn fd_generator(w: &WeightParams, p: &PotentialSpec, x: [f64; 2], a: f64, h: f64) -> f64 {
        let l0 = w.log_weight(p, x, a).unwrap();
        let g = |xx: [f64; 2], aa: f64| (w.log_weight(p, xx, aa).unwrap() - l0).exp();
        let gaa = (g(x, a + h) - 2.0 + g(x, a - h)) / (h * h);
        let ga = (g(x, a + h) - g(x, a - h)) / (2.0 * h);
        let gx = (g([x[0] + h, x[1]], a) - g([x[0] - h, x[1]], a)) / (2.0 * h);
        let gy = (g([x[0], x[1] + h], a) - g([x[0], x[1] - h], a)) / (2.0 * h);
        let e = p.eval(x);
        let (s, c) = a.sin_cos();
        w.d * gaa + (c + w.kappa) * gx + s * gy - (-s * e.grad[0] + c * e.grad[1]) * ga
            - (c * e.grad[0] + s * e.grad[1])
    }

    #[test]
    fn large_radius_asymptotics() {
        // For Y > eps0, ratio/|grad V| approaches
        // (beta - 1 - D delta_plus) Y + delta_plus (D delta_plus - 1) |grad V| Y_perp^2 < -gamma.
        let w = weight_params(0.0, 1.0).unwrap();
        let p = fam(1.0, 2.0);
        let r = 400.0;
        let a: f64 = 0.3;
        let e = p.eval([r, 0.0]);
        let gn = e.grad_norm();
        let (y, yp) = (a.cos(), a.sin());
        assert!(y > w.eps0);
        let lead = (w.beta - 1.0 - w.d * w.delta_plus) * y
            + w.delta_plus * (w.d * w.delta_plus - 1.0) * gn * yp * yp;
        let got = w.eval_weight_generator(&p, [r, 0.0], a).unwrap() / gn;
        assert!(lead < -w.gamma);
        assert!(got < -w.gamma);
        assert!((got - lead).abs() < 0.05 * lead.abs());
    }

    #[test]
    fn lyapunov_sweep_succeeds_for_growing_gradients() {
        let p = fam(1.0, 2.0);
        let w = weight_params(0.1, 1.0).unwrap();
        let rep = w.verify_lyapunov(&p, &SearchCfg::default()).unwrap();
        assert!(rep.margin_min >= 0.0);
        assert!(rep.samples_beyond_r >= 10_000);
        assert!(rep.profile.iter().filter(|s| s.r >= rep.r).all(|s| s.worst_margin >= 0.0));

        let w0 = weight_params(0.0, 1.0).unwrap();
        let rep = w0.verify_lyapunov(&fam(1.0, 3.0), &SearchCfg::default()).unwrap();
        assert!((rep.c - w0.gamma / 2.0).abs() < 1e-15);
        assert!(rep.margin_min >= 0.0);
    }

    #[test]
    fn lyapunov_sweep_rejects_bounded_gradient() {
        let w = weight_params(0.1, 1.0).unwrap();
        let err = w.verify_lyapunov(&fam(1.0, 1.0), &SearchCfg::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn parameters_satisfy_all_invariants(kappa in 0.0f64..0.33, d in 0.1f64..4.0) {
            let w = weight_params(kappa, d).unwrap();
            prop_assert!(w.violations().is_empty());
        }

        #[test]
        fn profile_is_monotone_and_bounded(kappa in 0.0f64..0.33, d in 0.1f64..4.0, y in -1.0f64..1.0) {
            let w = weight_params(kappa, d).unwrap();
            let (g, gp) = w.gamma_profile(y).unwrap();
            prop_assert!(g > 0.0);
            prop_assert!(gp >= w.delta_minus - 1e-15 && gp <= w.delta_plus + 1e-15);
            let (g2, gp2) = w.gamma_profile((y + 1e-3).min(1.0)).unwrap();
            prop_assert!(gp2 >= gp - 1e-15);
            if y + 1e-3 <= 1.0 { prop_assert!(g2 > g); }
        }

        #[test]
        fn weight_depends_on_angle_through_alignment(
            r in 0.2f64..3.0, th in 0.0f64..std::f64::consts::TAU, a in 0.0f64..std::f64::consts::TAU, rot in 0.0f64..std::f64::consts::TAU
        ) {
            let p = PotentialSpec::family(1.0, 2.0).unwrap();
            let w = weight_params(0.1, 1.0).unwrap();
            let x = [r * th.cos(), r * th.sin()];
            let g = w.log_weight(&p, x, a).unwrap();
            // Reflect alpha about the normal direction: same Y.
            let g_ref = w.log_weight(&p, x, 2.0 * th - a).unwrap();
            prop_assert!((g - g_ref).abs() <= 1e-12 * g.abs());
            let xr = [r * (th + rot).cos(), r * (th + rot).sin()];
            let g_rot = w.log_weight(&p, xr, a + rot).unwrap();
            prop_assert!((g - g_rot).abs() <= 1e-12 * g.abs());
        }

        #[test]
        fn generator_matches_finite_differences(
            kappa in 0.0f64..0.33, s in 1.2f64..3.0,
            r in 0.3f64..2.0, th in 0.0f64..std::f64::consts::TAU, a in 0.0f64..std::f64::consts::TAU
        ) {
            let p = PotentialSpec::family(1.0, s).unwrap();
            let w = weight_params(kappa, 1.0).unwrap();
            let x = [r * th.cos(), r * th.sin()];
            let y = (a - th).cos();
            prop_assume!((y.abs() - w.eps0).abs() > 2e-2);
            let cf = w.eval_weight_generator(&p, x, a).unwrap();
            let fd = fd_generator(&w, &p, x, a, 1e-4);
            prop_assert!((cf - fd).abs() <= 1e-4 * cf.abs().max(1.0), "{} vs {}", cf, fd);
        }
    }
}
