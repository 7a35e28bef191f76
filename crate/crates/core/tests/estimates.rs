use laydown::constants::estimate_spectral_gap;
use laydown::plane::GridCfg;
use laydown::potential::{normalize_potential, PotentialSpec, QuadratureCfg};

#[test]
fn gaussian_gap_converges_to_omega() {
    // e^{-omega |x|^2 / 2} has Poincare constant omega
    for omega in [1.0, 2.0] {
        let p = normalize_potential(&PotentialSpec::quadratic(omega).unwrap(), &QuadratureCfg::default()).unwrap();
        let err: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| (estimate_spectral_gap(&p, &GridCfg::new(n, n, 4)).unwrap().lambda - omega).abs() / omega)
            .collect();
        assert!(err[2] < err[1] && err[1] < err[0], "{err:?}");
        assert!(err[2] < 5e-3, "{err:?}");
    }
}
