//! Acceptance suite: eleven criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test --release --test acceptance`. The process exits
//! non-zero when any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use braid_electrostatics::braid_geometry::{rod_frequencies, BraidState, EulerAngles, FrameSet};
use braid_electrostatics::braid_geometry::integrate_frames;
use braid_electrostatics::charge_model::{coefficients_from_radial, dna_coefficients, single_helix, DnaParams};
use braid_electrostatics::energy_dielectric::*;
use braid_electrostatics::energy_nocore::{energy_density_nocore, energy_density_nocore_with_charge};
use braid_electrostatics::oracle::oracle_energy;
use braid_electrostatics::params::{PhysicalParams, Truncation};
use braid_electrostatics::scan_cli::fig1_curves;
use braid_electrostatics::special_functions::*;
use braid_electrostatics::surface_response::{ResponseCache, Rod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn phys(kappa: f64) -> PhysicalParams {
    PhysicalParams::new(kappa).unwrap()
}

fn line_charge_limit() -> Outcome {
    let st = BraidState::symmetric(3.0, 0.0, 0.0).unwrap();
    let e = energy_density_nocore(&st, &phys(1.0), &Truncation::default()).unwrap().value;
    let expect = 2.0 * bessel_k(0, 3.0);
    let rel = (e - expect).abs() / expect;
    outcome(rel < 1e-8, format!("E = {e:.15e}, 2K0(3) = {expect:.15e}, rel {rel:.2e}"))
}

fn oracle_grid() -> Outcome {
    let tr = Truncation { n_max: 16, m_max: 16, j_max: 8, ..Truncation::default() };
    let mut worst = (0.0_f64, String::new());
    let mut failures = Vec::new();
    for kr in [2.5, 3.0, 4.0] {
        for ka in [0.5, 1.0] {
            for deg in [10.0f64, 20.0, 30.0] {
                let st = BraidState::symmetric(kr, ka, deg.to_radians()).unwrap().with_helix(0.3, 0.3, 0.0, 0.0);
                let modes = energy_density_nocore(&st, &phys(1.0), &tr).unwrap().value;
                let oracle = oracle_energy(&st, 1.0, 60.0, 0.01).unwrap().energy;
                let rel = (modes - oracle).abs() / oracle.abs();
                let tag = format!("κR={kr} κa={ka} η={deg}°");
                if rel > 1e-2 {
                    failures.push(format!("{tag}: {:.2}%", 100.0 * rel));
                }
                if rel > worst.0 {
                    worst = (rel, tag);
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("worst {:.3}% at {}", 100.0 * worst.0, worst.1)
    } else {
        format!("{} of 18 above 1%: {}", failures.len(), failures.join("; "))
    };
    outcome(failures.is_empty(), detail)
}

fn addition_formulas(rng: &mut ChaCha8Rng) -> Outcome {
    let tol = SeriesTolerance::new(1e-10, 40).unwrap();
    let mut worst = 0.0_f64;
    let mut errors = 0;
    for _ in 0..100 {
        let a_k = rng.gen_range(0.05..8.0);
        let eta = rng.gen_range(0.0..1.5);
        let xi = rng.gen_range(-PI..PI);
        let m = rng.gen_range(-4..=4);
        match graf_addition_check(a_k, eta, xi, m, tol) {
            Ok(r) => worst = worst.max(r),
            Err(_) => errors += 1,
        }
        worst = worst.max(jacobi_anger_residual(a_k, xi, 40));
    }
    outcome(errors == 0 && worst < 1e-10, format!("100 draws, max residual {worst:.2e}, {errors} over tolerance"))
}

fn wronskian_recurrence(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let n = rng.gen_range(-40..=40);
        let x = rng.gen_range(0.01..150.0);
        let (ri, rk) = recurrence_residuals(n, x);
        worst = worst.max(wronskian_residual(n, x).abs()).max(ri).max(rk);
    }
    outcome(worst < 1e-10, format!("1000 draws, max residual {worst:.2e}"))
}

fn bessel_product_identity(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let n = rng.gen_range(-5..=5);
        let n_p = rng.gen_range(-5..=5);
        let a = rng.gen_range(0.3..1.5);
        let r = rng.gen_range(2.0 * a + 0.1..6.0);
        let kappa = rng.gen_range(0.3..2.0);
        worst = worst.max(identity_10_13_check(n, n_p, a, r, kappa));
    }
    let mut omega = 0.0_f64;
    let mut errors = 0;
    for n in 0..=3 {
        for x in [3.0, 5.0, 8.0] {
            for y in [1.0, 2.0, 4.0] {
                match omega_tilde_table(n, x, y) {
                    Ok(o) => omega = omega.max(o.residual),
                    Err(_) => errors += 1,
                }
            }
        }
    }
    outcome(
        worst < 1e-10 && omega < 1e-9 && errors == 0,
        format!("product identity max {worst:.2e}; Ω̃ forms max {omega:.2e} over 36 points, {errors} errors"),
    )
}

fn frame_drift(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let r = rng.gen_range(2.5..4.0);
        let eta = rng.gen_range(0.1..1.0);
        let wa2 = rng.gen_range(-0.2..0.2);
        let wa3 = rng.gen_range(-0.3..0.3) / r;
        let s = BraidState::new(r, 1.0, eta, wa2, wa3).unwrap();
        let f = rod_frequencies(&s).unwrap();
        let frame = FrameSet::from_angles(&EulerAngles::new(0.4, -0.3, 1.1).unwrap(), s.tilts());
        let traj = integrate_frames(&frame, s.r, |_| f, 10.0, 1e-3).unwrap();
        worst = worst.max(traj.max_separation_drift / s.r);
    }
    outcome(worst < 1e-6, format!("5 states over 10 Debye lengths, max drift {worst:.2e} R"))
}

fn ladder() -> Outcome {
    let ch = single_helix();
    let cache = ResponseCache::new();
    let p = phys(1.0);
    let caps = |n| Truncation { n_max: n, m_max: n, n_image_max: n, ..Truncation::default() };

    let tr = caps(6);
    let opts = SumOptions { response: ResponseModel::Dielectric, restriction: ModeRestriction::Diagonal };
    let mut worst_diag = 0.0_f64;
    for (eta, rate) in [(0.2, 0.2), (0.35, -0.1)] {
        let st = BraidState::new(2.5, 1.0, eta, 0.0, 0.0).unwrap().with_helix(0.3, 0.9, rate, rate);
        let mut full = e_dir_full(&st, &ch, &p, &tr, opts).unwrap().total();
        let mut diag = e_dir_diagonal(&st, &ch, &p, &tr, ResponseModel::Dielectric).unwrap().total();
        for rod in [Rod::One, Rod::Two] {
            full += e_img_full(rod, &st, &ch, &p, &tr, opts, &cache).unwrap().total();
            diag += e_img_diagonal(rod, &st, &ch, &p, &tr, ResponseModel::Dielectric, &cache).unwrap().total();
        }
        worst_diag = worst_diag.max((diag - full).abs() / full.abs());
    }

    let tr = caps(12);
    let etas = [0.05, 0.1, 0.2];
    let mut exponents = Vec::new();
    for w3r in [0.0, 0.02] {
        let gaps: Vec<f64> = etas
            .iter()
            .map(|&eta| {
                let st = BraidState::new(2.5, 1.0, eta, 0.0, w3r / 2.5).unwrap().with_helix(0.3, 0.3, 0.2, 0.2);
                let d = energy_breakdown(&st, &ch, &p, &tr, ApproxLevel::Diagonal, ResponseModel::Dielectric, &cache)
                    .unwrap()
                    .total();
                let s = energy_breakdown(&st, &ch, &p, &tr, ApproxLevel::SmallAngle, ResponseModel::Dielectric, &cache)
                    .unwrap()
                    .total();
                ((d - s) / d).abs()
            })
            .collect();
        let xs: Vec<f64> = etas.iter().map(|e| e.sin().ln()).collect();
        let ys: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        exponents.push(num / den);
    }
    let pass = worst_diag < 1e-10 && exponents.iter().all(|p| (1.8..=2.2).contains(p));
    outcome(
        pass,
        format!(
            "diagonal vs full rel {worst_diag:.2e}; small-angle gap exponents {:.3} (Rω3 = 0), {:.3} (Rω3 = 0.02)",
            exponents[0], exponents[1]
        ),
    )
}

fn uniform_collapse() -> Outcome {
    let ch = single_helix();
    let tr = Truncation::default();
    let cache = ResponseCache::new();
    let p = phys(1.0);
    let uniform = SumOptions { response: ResponseModel::Uniform, restriction: ModeRestriction::All };
    let mut worst = 0.0_f64;
    let mut images_zero = true;
    for st in [
        BraidState::new(2.5, 1.0, 0.3, 0.0, 0.0).unwrap().with_helix(0.3, 0.7, 0.0, 0.0),
        BraidState::new(2.5, 1.0, 0.15, 0.0, 0.02).unwrap().with_helix(0.0, 1.2, 0.1, 0.1),
    ] {
        let bare = energy_density_nocore_with_charge(&st, &p, &tr, &ch).unwrap().value;
        let d = e_dir_full(&st, &ch, &p, &tr, uniform).unwrap().total();
        worst = worst.max((d - bare).abs() / bare.abs());
        for rod in [Rod::One, Rod::Two] {
            images_zero &= e_img_full(rod, &st, &ch, &p, &tr, uniform, &cache).unwrap().values == [0.0; 4];
        }
    }
    outcome(worst < 1e-10 && images_zero, format!("E_dir vs no-core rel {worst:.2e}; image parts exactly zero: {images_zero}"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("braid-acceptance-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn fig1() -> Outcome {
    let dir = scratch("fig1");
    let status = Command::new(env!("CARGO_BIN_EXE_braid-scan"))
        .args(["fig1", "--a-kappa", "2", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    if !status.status.success() {
        return outcome(false, format!("fig1 subcommand failed: {}", String::from_utf8_lossy(&status.stderr)));
    }
    let csv = fs::read_to_string(dir.join("fig1.csv")).unwrap();
    let centre = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .find(|row| row[0] == 0.0)
        .unwrap();
    let expect = 1.0 / (2.0 * bessel_i(0, 2.0) * bessel_k(1, 2.0));
    let centre_err = (centre[1] - expect).abs();
    let tail = fig1_curves(2.0, 50.0, 2).unwrap();
    let gap = tail.curves.iter().map(|c| (2.0 - c[1]).abs()).fold(0.0, f64::max);
    let _ = fs::remove_dir_all(dir);
    outcome(
        centre_err < 1e-6 && gap < 1e-3,
        format!(
            "ζ(0,0) = {:.10} vs 1/(2 I0(2) K1(2)) = {expect:.10} (err {centre_err:.1e}); max |2 − ζ| at ak_z = 50 is {gap:.3e} (needs < 1e-3)",
            centre[1]
        ),
    )
}

fn dna_spectrum() -> Outcome {
    let mut exact = true;
    let mut worst = 0.0_f64;
    for (theta, f1, f2, phi) in [(0.0, 0.3, 0.3, 1.1), (0.7, 0.3, 0.3, 0.4 * PI), (0.76, 0.4, 0.2, 2.0), (1.0, 0.0, 1.0, 0.9)] {
        let p = DnaParams::new(theta, f1, f2, phi).unwrap();
        exact &= dna_coefficients(&p, 0) == theta - 1.0;
        let quad = coefficients_from_radial(&p.radial(), 8).unwrap();
        for n in -8..=8 {
            worst = worst.max((quad.zeta(n) - dna_coefficients(&p, n)).abs());
        }
    }
    outcome(exact && worst < 1e-10, format!("ζ0 = θ − 1 exactly: {exact}; quadrature vs closed form max {worst:.2e}"))
}

fn determinism() -> Outcome {
    let dir = scratch("determinism");
    let cfg = dir.join("sweep.txt");
    fs::write(
        &cfg,
        format!(
            "geometry.R = 3\ngeometry.a = 1\ngeometry.dxi1 = 0.2\ngeometry.dxi2 = 0.2\n\
             charge.model = dna\ncharge.theta = 0.7\ncharge.f1 = 0.3\ncharge.f2 = 0.1\ncharge.n_max = 6\n\
             truncation.n_max = 4\ntruncation.m_max = 3\ntruncation.j_max = 3\ntruncation.n_image_max = 4\n\
             sweep.parameter = eta\nsweep.min = 0\nsweep.max = 0.4\nsweep.count = 3\noutput_dir = {}\n",
            dir.join("runs").display()
        ),
    )
    .unwrap();
    for _ in 0..2 {
        let out = Command::new(env!("CARGO_BIN_EXE_braid-scan")).arg("sweep").arg(&cfg).output().unwrap();
        if !out.status.success() {
            return outcome(false, format!("sweep failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    let mut runs: Vec<PathBuf> = fs::read_dir(dir.join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    runs.sort();
    let csv: Vec<Vec<u8>> = runs.iter().map(|r| fs::read(r.join("sweep.csv")).unwrap()).collect();
    let same = csv.len() == 2 && csv[0] == csv[1];
    let _ = fs::remove_dir_all(dir);
    outcome(same, format!("{} runs, {} bytes each, identical: {same}", csv.len(), csv.first().map_or(0, Vec::len)))
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let criteria: Vec<(&str, Duration, Box<dyn FnOnce(&mut ChaCha8Rng) -> Outcome>)> = vec![
        ("line-charge limit", Duration::from_secs(1), Box::new(|_| line_charge_limit())),
        ("oracle equivalence", Duration::from_secs(300), Box::new(|_| oracle_grid())),
        ("addition formulas", Duration::from_secs(10), Box::new(addition_formulas)),
        ("Wronskian and recurrences", Duration::from_secs(5), Box::new(wronskian_recurrence)),
        ("Bessel product identity and Ω̃ forms", Duration::from_secs(10), Box::new(bessel_product_identity)),
        ("frame reconstruction", Duration::from_secs(10), Box::new(frame_drift)),
        ("approximation ladder", Duration::from_secs(120), Box::new(|_| ladder())),
        ("uniform-response collapse", Duration::from_secs(60), Box::new(|_| uniform_collapse())),
        ("fig1 reproduction", Duration::from_secs(60), Box::new(|_| fig1())),
        ("DNA spectrum", Duration::from_secs(10), Box::new(|_| dna_spectrum())),
        ("determinism", Duration::from_secs(120), Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let t0 = Instant::now();
        let o = run(&mut rng);
        let took = t0.elapsed();
        let pass = o.pass && took <= budget;
        failed += usize::from(!pass);
        let timing = if took <= budget { String::new() } else { format!(" [over budget {budget:?}]") };
        println!(
            "{} {:>2}. {name}: {} ({:.2} s){timing}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            took.as_secs_f64()
        );
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
