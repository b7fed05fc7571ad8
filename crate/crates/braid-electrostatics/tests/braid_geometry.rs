//! Braid kinematics: closed forms, constraint identities and frame integration.

use braid_electrostatics::braid_geometry::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn state(r: f64, eta: f64, wa2: f64, wa3: f64) -> BraidState {
    BraidState::new(r, 0.5, eta, wa2, wa3).unwrap()
}

#[test]
fn rotation_matches_elementwise_product() {
    let (a, b, p) = (0.3_f64, 0.2_f64, 0.1_f64);
    let m = rotation_frame(&EulerAngles::new(a, b, p).unwrap());
    let (sa, ca, sb, cb, sp, cp) = (a.sin(), a.cos(), b.sin(), b.cos(), p.sin(), p.cos());
    // Hand-expanded T_β T_α T_φ0.
    let want = [
        [cb * cp - sb * sa * sp, -cb * sp - sb * sa * cp, -sb * ca],
        [ca * sp, ca * cp, -sa],
        [sb * cp + cb * sa * sp, -sb * sp + cb * sa * cp, cb * ca],
    ];
    for i in 0..3 {
        for j in 0..3 {
            assert!((m[i][j] - want[i][j]).abs() < 1e-15, "({i},{j})");
        }
    }
    assert!((determinant(&m) - 1.0).abs() < 1e-12);
}

#[test]
fn sigma_satisfies_both_constraints() {
    let t = TiltPair::new(0.4, 0.2).unwrap();
    let (s1, s2) = sigma_from_tilts(t).unwrap();
    assert!((s1 * t.eta1.cos() + s2 * t.eta2.cos() - 2.0).abs() < 1e-12);
    assert!((s1 * t.eta1.sin() - s2 * t.eta2.sin()).abs() < 1e-12);
}

#[test]
fn degenerate_tilts_rejected() {
    let t = TiltPair::new(1e-14, 0.0).unwrap();
    assert!(sigma_from_tilts(t).is_err());
}

#[test]
fn omega_a1_matches_small_twist_expansion() {
    let (r, eta) = (3.0_f64, 0.6_f64);
    let leading = -2.0 * (1.0 - eta.cos()) / (r * eta.sin());
    let err = |rw: f64| (omega_a1(eta, rw / r, r).unwrap() - leading).abs();
    let (e1, e2) = (err(0.01), err(0.02));
    assert!(e1 / (0.01 * 0.01) < 1.0);
    assert!((e2 / e1 - 4.0).abs() < 0.01, "ratio {}", e2 / e1);
}

#[test]
fn symmetric_straight_braid_frequencies() {
    let f = rod_frequencies(&state(3.0, 0.5, 0.0, 0.0)).unwrap();
    assert_eq!(f.omega[0][1], 0.0);
    assert_eq!(f.omega[1][1], 0.0);
    assert!((f.omega[0][0] - f.omega[1][0]).abs() < 1e-15);
    assert!((f.omega[0][2] + f.omega[1][2]).abs() < 1e-15);
    assert!((f.sigma1 - 1.0 / 0.25f64.cos()).abs() < 1e-14);
}

#[test]
fn tilt_limit_is_continuous() {
    let wa3 = 0.2;
    let f0 = rod_frequencies(&state(3.0, 0.0, 0.0, wa3)).unwrap();
    let f1 = rod_frequencies(&state(3.0, 1e-5, 0.0, wa3)).unwrap();
    assert!((f0.sigma1 - f1.sigma1).abs() < 1e-8);
    assert!((f0.sigma2 - f1.sigma2).abs() < 1e-8);
    assert!((f0.sigma1 - 1.3).abs() < 1e-12);
    for mu in 0..2 {
        for c in 0..3 {
            assert!((f0.omega[mu][c] - f1.omega[mu][c]).abs() < 1e-5);
        }
    }
}

#[test]
fn helix_frequency_examples() {
    let s = state(3.0, 0.4, 0.0, 0.0);
    let f = rod_frequencies(&s).unwrap();
    assert_eq!(helix_frequencies(&s, &f), (f.omega[0][0], f.omega[1][0]));
    let w_xi = 1.3;
    let d = w_xi * 0.2f64.cos();
    let (w1, _) = helix_frequencies(&s.with_helix(0.0, 0.0, d, d), &f);
    assert!((w1 - (f.omega[0][0] + d / f.sigma1)).abs() < 1e-15);
    let (lo, _) = helix_frequencies(&s.with_helix(0.0, 0.0, -1.0, 0.0), &f);
    let (hi, _) = helix_frequencies(&s.with_helix(0.0, 0.0, 1.0, 0.0), &f);
    assert!(lo < hi);
}

/// Independent route to ω_{μ,2}: finite differences of η_μ(s) = (η ± Δη)/2 with
/// sin Δη = -R ω_{A,3} sin η / 2, and the prefactor 1/σ_μ from the tilts.
#[test]
fn twist_rate_matches_finite_differences_of_tilt_asymmetry() {
    let (r, eta0, deta, wa2, wa3, dwa3) = (3.0, 0.7, 0.05, 0.11, 0.15, -0.04);
    let mut s = state(r, eta0, wa2, wa3);
    s.deta_ds = deta;
    s.domega_a3_ds = dwa3;
    let f = rod_frequencies(&s).unwrap();
    let tilt = |h: f64| {
        let e = eta0 + deta * h;
        let d = delta_eta(e, wa3 + dwa3 * h, r).unwrap();
        (0.5 * (e + d), 0.5 * (e - d))
    };
    let h = 1e-5;
    let (p1, p2) = tilt(h);
    let (m1, m2) = tilt(-h);
    let (d1, d2) = ((p1 - m1) / (2.0 * h), (p2 - m2) / (2.0 * h));
    let (s1, s2) = sigma_from_tilts(TiltPair::new(tilt(0.0).0, tilt(0.0).1).unwrap()).unwrap();
    assert!((f.omega[0][1] - (wa2 - d1) / s1).abs() < 1e-9);
    assert!((f.omega[1][1] - (wa2 + d2) / s2).abs() < 1e-9);
}

#[test]
fn small_twist_expansion_is_second_order() {
    let (r, eta) = (3.0, 0.8);
    let mut worst_c = 0.0_f64;
    for &rw in &[0.0125, 0.025, 0.05] {
        let mut s = state(r, eta, 0.07, rw / r);
        s.deta_ds = 0.03;
        let f = rod_frequencies(&s).unwrap();
        let x = small_twist_expansion(&s);
        let t = s.tilts();
        let exact_sin = [t.eta1.sin(), t.eta2.sin()];
        let exact_sigma = [f.sigma1, f.sigma2];
        let mut err = (x.omega_a1 - s.omega_a[0]).abs() * r;
        for mu in 0..2 {
            err = err
                .max((x.sin_eta_mu[mu] - exact_sin[mu]).abs())
                .max((x.sigma[mu] - exact_sigma[mu]).abs())
                .max((x.omega_mu1[mu] - f.omega[mu][0]).abs() * r)
                .max((x.omega_mu2[mu] - f.omega[mu][1]).abs() * r)
                .max((x.omega_mu3[mu] - f.omega[mu][2]).abs() * r);
        }
        worst_c = worst_c.max(err / (rw * rw));
    }
    assert!(worst_c < 2.0, "error / (R ω3)² reached {worst_c}");
}

proptest! {
    #[test]
    fn delta_eta_residual(r in 0.5f64..5.0, eta in 0.0f64..3.0, u in -1.0f64..1.0) {
        let w = u * 2.0 / r;
        let d = delta_eta(eta, w, r).unwrap();
        prop_assert!((d.sin() + r * w * eta.sin() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn frequency_constraints(r in 2.0f64..5.0, eta in 0.01f64..1.4, wa2 in -0.3f64..0.3, u in -0.9f64..0.9) {
        let s = state(r, eta, wa2, u / r);
        let f = rod_frequencies(&s).unwrap();
        let t = s.tilts();
        // constraint relations between σ_μ and the tilts
        prop_assert!((f.sigma1 * t.eta1.cos() + f.sigma2 * t.eta2.cos() - 2.0).abs() < 1e-10);
        prop_assert!((f.sigma1 * t.eta1.sin() - f.sigma2 * t.eta2.sin()).abs() < 1e-10);
        // σ from the rod frequencies equals σ from the tilts
        let (s1, s2) = sigma_from_tilts(t).unwrap();
        prop_assert!((f.sigma1 - s1).abs() < 1e-10 && (f.sigma2 - s2).abs() < 1e-10);
        // ratio identity: sin η1 / sin η2 = σ2 / σ1 written through the rod frequencies
        let lhs = t.eta1.sin() / t.eta2.sin();
        let root1 = ((r * f.omega[0][0] / 2.0).powi(2) + (1.0 - r * f.omega[0][2] / 2.0).powi(2)).sqrt();
        let root2 = ((r * f.omega[1][0] / 2.0).powi(2) + (1.0 + r * f.omega[1][2] / 2.0).powi(2)).sqrt();
        prop_assert!((lhs - root1 / root2).abs() < 1e-9 * lhs);
        // tilt-angle form: ω_{μ,1} = (cos η_μ ω_A1 + δ sin η_μ ω_A3)/σ_μ
        let [wa1, _, wa3] = s.omega_a;
        let w11 = (t.eta1.cos() * wa1 + t.eta1.sin() * wa3) / s1;
        let w23 = (t.eta2.cos() * wa3 + t.eta2.sin() * wa1) / s2;
        prop_assert!((f.omega[0][0] - w11).abs() < 1e-12);
        prop_assert!((f.omega[1][2] - w23).abs() < 1e-12);
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> BraidState {
    let r = rng.gen_range(2.5..4.0);
    let eta = rng.gen_range(0.1..1.0);
    let wa2 = rng.gen_range(-0.2..0.2);
    let wa3 = rng.gen_range(-0.3..0.3) / r;
    state(r, eta, wa2, wa3)
}

#[test]
fn separation_is_preserved_over_ten_debye_lengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let s = random_state(&mut rng);
        let f = rod_frequencies(&s).unwrap();
        let frame = FrameSet::from_angles(&EulerAngles::new(0.4, -0.3, 1.1).unwrap(), s.tilts());
        let traj = integrate_frames(&frame, s.r, |_| f, 10.0, 1e-3).unwrap();
        assert!(traj.max_separation_drift < 1e-6 * s.r, "{s:?}: {}", traj.max_separation_drift);
        assert!(traj.max_frame_defect < 1e-12, "frame defect {}", traj.max_frame_defect);
    }
}

#[test]
fn separator_derivative_agrees_with_second_rod() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = random_state(&mut rng);
    let f = rod_frequencies(&s).unwrap();
    let frame = FrameSet::from_angles(&EulerAngles::new(0.0, 0.0, 0.0).unwrap(), s.tilts());
    let mut errs = Vec::new();
    for &h in &[2e-3, 1e-3] {
        let traj = integrate_frames(&frame, s.r, |_| f, 1.0, h).unwrap();
        let i = traj.s.len() / 2;
        let fd = scale(1.0 / (2.0 * h), sub(traj.frames[i + 1].d_hat, traj.frames[i - 1].d_hat));
        let fr = &traj.frames[i];
        let w2 = f.omega[1];
        let want = scale(f.sigma2, axpy(w2[0], fr.n2_hat, scale(-w2[2], fr.t2_hat)));
        errs.push(norm(sub(fd, want)));
    }
    assert!(errs[0] < 1e-5);
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn symmetric_braid_closes_after_one_turn() {
    let s = state(3.0, 0.5, 0.0, 0.0);
    let f = rod_frequencies(&s).unwrap();
    let frame = FrameSet::from_angles(&EulerAngles::new(0.0, 0.0, 0.0).unwrap(), s.tilts());
    let period = 2.0 * std::f64::consts::PI / s.omega_a[0].abs();
    let traj = integrate_frames(&frame, s.r, |_| f, period, 1e-3).unwrap();
    let last = traj.frames.last().unwrap();
    assert!(norm(sub(last.d_hat, frame.d_hat)) < 1e-9);
    assert!(norm(sub(last.t1_hat, frame.t1_hat)) < 1e-9);
    // the midpoint has advanced straight along the axis
    let mid = scale(0.5, axpy(1.0, *traj.r1.last().unwrap(), *traj.r2.last().unwrap()));
    assert!((mid[0].hypot(mid[1])) < 1e-8);
    assert!((mid[2] - period).abs() < 1e-8);
}

#[test]
fn untilted_rods_are_parallel_lines() {
    let s = state(3.0, 0.0, 0.0, 0.0);
    let f = rod_frequencies(&s).unwrap();
    let frame = FrameSet::from_angles(&EulerAngles::new(0.0, 0.0, 0.0).unwrap(), s.tilts());
    let traj = integrate_frames(&frame, s.r, |_| f, 5.0, 1e-2).unwrap();
    for fr in &traj.frames {
        assert_eq!(fr.t1_hat, frame.t1_hat);
        assert_eq!(fr.t2_hat, frame.t2_hat);
    }
    assert!((traj.r1.last().unwrap()[2] - 5.0).abs() < 1e-12);
}

#[test]
fn oversized_step_rejected() {
    let s = state(3.0, 1.0, 0.0, 0.0);
    let f = rod_frequencies(&s).unwrap();
    let frame = FrameSet::from_angles(&EulerAngles::new(0.0, 0.0, 0.0).unwrap(), s.tilts());
    assert!(integrate_frames(&frame, s.r, |_| f, 1.0, 0.5).is_err());
}
