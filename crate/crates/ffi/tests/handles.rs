use std::ptr;

use laydown_ffi::*;

fn message() -> String {
    let n = unsafe { ld_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; n + 1];
    unsafe { ld_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn quadratic() -> *mut LdPotential {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ld_potential_quadratic(1.0, &mut p) }, LdStatus::Ok);
    p
}

#[test]
fn status_codes_follow_the_error_kind() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ld_potential_family(1.0, 0.5, &mut p) }, LdStatus::Config);
    assert!(p.is_null());
    assert!(message().contains("s >= 1"), "{}", message());

    let q = quadratic();
    assert_eq!(message(), "");
    let mut c = LdConstants::default();
    let s2 = {
        let mut f = ptr::null_mut();
        assert_eq!(unsafe { ld_potential_family(1.0, 2.0, &mut f) }, LdStatus::Ok);
        f
    };
    assert_eq!(unsafe { ld_constants(s2, 0.5, 1.0, 2.0, 1.3, &mut c) }, LdStatus::Precondition);
    assert!(message().contains("1/3"));
    assert_eq!(unsafe { ld_constants(s2, 0.02, 1.0, 2.0, 1.3, &mut c) }, LdStatus::Infeasible);
    assert_eq!(unsafe { ld_constants(q, 0.0, 1.0, 1.0, 1.0, ptr::null_mut()) }, LdStatus::NullPointer);
    assert_eq!(unsafe { ld_potential_eval(ptr::null(), 0.0, 0.0, &mut 0.0, ptr::null_mut()) }, LdStatus::NullPointer);
    unsafe {
        ld_potential_free(q);
        ld_potential_free(s2);
        ld_potential_free(ptr::null_mut());
    }
}

#[test]
fn constants_agree_with_the_library() {
    let q = quadratic();
    let (mut lambda, mut c_v) = (0.0, 0.0);
    assert_eq!(unsafe { ld_estimate_constants(q, 48, 64, 1, &mut lambda, &mut c_v) }, LdStatus::Ok);
    // e^{-|x|^2/2} has Poincare constant 1
    assert!((lambda - 1.0).abs() < 0.05, "{lambda}");
    let mut c = LdConstants::default();
    assert_eq!(unsafe { ld_constants(q, 0.0, 1.0, lambda, c_v, &mut c) }, LdStatus::Ok);
    assert!(c.gamma1 > 0.0 && (c.lambda_kappa - c.gamma1 / 2.0).abs() < 1e-15);
    assert!(c.zeta.is_nan());
    unsafe { ld_potential_free(q) };
}

#[test]
fn ensemble_continues_deterministically() {
    let q = quadratic();
    let run = |chunks: &[f64]| {
        let mut e = ptr::null_mut();
        assert_eq!(unsafe { ld_ensemble_new(q, 0.1, 1.0, 0.01, 20, 11, 0.5, &mut e) }, LdStatus::Ok);
        for h in chunks {
            assert_eq!(unsafe { ld_ensemble_advance(e, *h) }, LdStatus::Ok);
        }
        let n = unsafe { ld_ensemble_len(e) };
        let mut buf = vec![0.0; 3 * n];
        assert_eq!(unsafe { ld_ensemble_states(e, buf.as_mut_ptr(), 3 * n - 1) }, LdStatus::Config);
        assert_eq!(unsafe { ld_ensemble_states(e, buf.as_mut_ptr(), buf.len()) }, LdStatus::Ok);
        let t = unsafe { ld_ensemble_time(e) };
        unsafe { ld_ensemble_free(e) };
        (t, buf)
    };
    let (ta, a) = run(&[1.0]);
    let (tb, b) = run(&[0.3, 0.7]);
    assert!((ta - 1.0).abs() < 1e-12 && (tb - 1.0).abs() < 1e-12);
    assert_eq!(a, b);
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { ld_ensemble_new(q, 0.0, 1.0, 0.5, 20, 11, 0.5, &mut e) }, LdStatus::Config);
    unsafe { ld_potential_free(q) };
}

#[test]
fn kinetic_handle_round_trip() {
    let q = quadratic();
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { ld_kinetic_new(q, 16, 16, 8, 1.0, 0.1, 0.9, &mut k) }, LdStatus::Ok);
    let n = unsafe { ld_kinetic_len(k) };
    assert_eq!(n, 16 * 16 * 8);
    let mut v = vec![0.0; n];
    assert_eq!(unsafe { ld_kinetic_get_values(k, v.as_mut_ptr(), n) }, LdStatus::Ok);
    let gibbs = v.clone();
    assert_eq!(unsafe { ld_kinetic_set_values(k, v.as_ptr(), n - 1) }, LdStatus::Config);
    assert_eq!(unsafe { ld_kinetic_step(k, 5) }, LdStatus::Ok);
    assert!((unsafe { ld_kinetic_mass(k) } - 1.0).abs() < 1e-12);
    let mut res = f64::NAN;
    assert_eq!(unsafe { ld_kinetic_solve_stationary(k, 1e-6, &mut res) }, LdStatus::Ok);
    assert!(res <= 1e-6);
    assert_eq!(unsafe { ld_kinetic_get_values(k, v.as_mut_ptr(), n) }, LdStatus::Ok);
    // the belt moves the stationary state away from e^{-V}
    assert!(v.iter().zip(&gibbs).any(|(a, b)| (a - b).abs() > 1e-6));
    assert!(unsafe { ld_kinetic_dt(k) } > 0.0);
    unsafe {
        ld_kinetic_free(k);
        ld_potential_free(q);
    }
}
