//! Bessel functions against high-precision reference values and the
//! standard identities.

use braid_electrostatics::special_functions::*;
use proptest::prelude::*;

// Reference values computed with 40-digit arithmetic.
// (n, x, J_n(x))
const J_REF: &[(i32, f64, f64)] = &[
    (0, 0.001, 0.999999750000015625),
    (0, 0.5, 0.938469807240812904),
    (0, 1.0, 0.765197686557966551),
    (0, 3.7, -0.399230203371191115),
    (0, 10.0, -0.245935764451348335),
    (0, 25.0, 0.0962667832759581162),
    (0, 50.0, 0.055812327669251815),
    (0, 99.5, -0.0195430664074407836),
    (1, 0.001, 0.000499999937500002615),
    (1, 0.5, 0.242268457674873886),
    (1, 1.0, 0.440050585744933516),
    (1, 3.7, 0.0538339877454617905),
    (1, 10.0, 0.0434727461688614367),
    (1, 25.0, -0.125350249580289905),
    (1, 50.0, -0.0975118281251751377),
    (1, 99.5, -0.0776631982430769354),
    (2, 0.001, 1.24999989583333664e-7),
    (2, 0.5, 0.0306040234586826413),
    (2, 1.0, 0.11490348493190048),
    (2, 3.7, 0.428329656206575866),
    (2, 10.0, 0.254630313685120623),
    (2, 25.0, -0.106294803242381309),
    (2, 50.0, -0.0597128007942588205),
    (2, 99.5, 0.0179819970960221517),
    (5, 0.001, 2.60416655815972443e-19),
    (5, 0.5, 8.05362724135747409e-6),
    (5, 1.0, 0.000249757730211234431),
    (5, 3.7, 0.0994854170083339096),
    (5, 10.0, -0.23406152818679364),
    (5, 25.0, -0.0660079953984229934),
    (5, 50.0, -0.0814002476965696396),
    (5, 99.5, -0.0794518371247125553),
    (10, 0.001, 2.69114439430499934e-40),
    (10, 0.5, 2.61317736082280309e-13),
    (10, 1.0, 2.63061512368745321e-10),
    (10, 3.7, 0.0000944102820078722676),
    (10, 10.0, 0.207486106633358858),
    (10, 25.0, -0.0751798439485232838),
    (10, 50.0, -0.113847849149469386),
    (10, 99.5, -0.0203121744845617894),
    (30, 0.001, 3.51107455642221689e-132),
    (30, 0.5, 3.2633568289139785e-51),
    (30, 1.0, 3.4828697942514829e-42),
    (30, 3.7, 3.49511268520152071e-25),
    (30, 10.0, 1.55109607825746701e-12),
    (30, 25.0, 0.0118090261242690162),
    (30, 50.0, 0.0484342572455094175),
    (30, 99.5, 0.0753975567679876145),
    (64, 0.5, 2.31380131619419384e-128),
    (64, 1.0, 4.25591522094896608e-109),
    (64, 3.7, 9.39068589925382018e-73),
    (64, 10.0, 2.90493602872910926e-45),
    (64, 25.0, 1.08357714053006498e-20),
    (64, 50.0, 0.0000635838330067520586),
    (64, 99.5, 0.0679671739003135762),
];
const I_REF: &[(i32, f64, f64)] = &[
    (0, 0.001, 1.00000025000001563),
    (0, 0.1, 1.0025015629340956),
    (0, 1.0, 1.26606587775200834),
    (0, 2.0, 2.27958530233606727),
    (0, 5.0, 27.2398718236044469),
    (0, 11.9, 17219.2402762680272),
    (0, 12.1, 20853.1174038806975),
    (0, 20.0, 43558282.5595535333),
    (0, 50.0, 2.93255378384933633e+20),
    (0, 100.0, 1.07375170713107382e+42),
    (0, 200.0, 2.03968717340972462e+85),
    (1, 0.001, 0.000500000062500002615),
    (1, 0.1, 0.0500625260470926949),
    (1, 1.0, 0.565159103992485027),
    (1, 2.0, 1.59063685463732906),
    (1, 5.0, 24.3356421424505272),
    (1, 11.9, 16479.0601923975036),
    (1, 12.1, 19971.9110479601269),
    (1, 20.0, 42454973.3851277702),
    (1, 50.0, 2.9030785901035568e+20),
    (1, 100.0, 1.06836939033816248e+42),
    (1, 200.0, 2.0345815493320627e+85),
    (2, 0.001, 1.25000010416666997e-7),
    (2, 0.1, 0.00125104199224175926),
    (2, 1.0, 0.135747669767038281),
    (2, 2.0, 0.688948447698738204),
    (2, 5.0, 17.505614966624236),
    (2, 11.9, 14449.6503279659259),
    (2, 12.1, 17551.9750819038169),
    (2, 20.0, 39312785.2210407563),
    (2, 50.0, 2.81643064024519405e+20),
    (2, 100.0, 1.05238431932431057e+42),
    (2, 200.0, 2.01934135791640399e+85),
    (5, 0.001, 2.60416677517361332e-19),
    (5, 0.1, 2.60525192989369761e-9),
    (5, 1.0, 0.000271463155956971875),
    (5, 2.0, 0.00982567932313170232),
    (5, 5.0, 2.15797454732254647),
    (5, 11.9, 5847.37886357864409),
    (5, 12.1, 7210.44850731447849),
    (5, 20.0, 23018392.2134136707),
    (5, 50.0, 2.2785483079112819e+20),
    (5, 100.0, 9.47009387303558125e+41),
    (5, 200.0, 1.91581410152368695e+85),
    (10, 0.001, 2.69114451662974732e-40),
    (10, 0.1, 2.69175614292214302e-20),
    (10, 1.0, 2.75294803983687363e-10),
    (10, 2.0, 3.01696387935068437e-7),
    (10, 5.0, 0.00458004441917605126),
    (10, 11.9, 275.005792536349096),
    (10, 12.1, 355.067808364519434),
    (10, 20.0, 3540200.2090195211),
    (10, 50.0, 1.07159715947763705e+20),
    (10, 100.0, 6.4989755247201478e+41),
    (10, 200.0, 1.58759592049007982e+85),
    (20, 0.001, 3.91990439629032088e-85),
    (20, 0.1, 3.92037103141997782e-45),
    (20, 1.0, 3.96683598581902006e-25),
    (20, 2.0, 4.31056057610954833e-19),
    (20, 5.0, 5.02423935797180599e-11),
    (20, 11.9, 0.00646749914494696711),
    (20, 12.1, 0.00951989836792150618),
    (20, 20.0, 3188.7503288536148),
    (20, 50.0, 5.44200840275299753e+18),
    (20, 100.0, 1.44834612564271716e+41),
    (20, 200.0, 7.49106766376833839e+84),
    (40, 0.001, 1.11469257408467816e-180),
    (40, 0.1, 1.11476053836968262e-100),
    (40, 1.0, 1.12150974133148596e-60),
    (40, 2.0, 1.25586919216541631e-48),
    (40, 5.0, 1.18042698035956254e-32),
    (40, 11.9, 2.75601119634701076e-17),
    (40, 12.1, 5.52424558041736902e-17),
    (40, 20.0, 1.31511192503022724e-7),
    (40, 50.0, 60071789743211.1494),
    (40, 100.0, 3.84170549968042762e+38),
    (40, 200.0, 3.74823763058590176e+83),
    (64, 0.1, 4.2724804464910407e-173),
    (64, 1.0, 4.28877926854588228e-109),
    (64, 2.0, 8.00320198460487126e-90),
    (64, 5.0, 2.54960194404560005e-64),
    (64, 11.9, 5.02624307317790447e-40),
    (64, 12.1, 1.48748709617167798e-39),
    (64, 20.0, 3.60719792280301282e-25),
    (64, 50.0, 19178.7491591033601),
    (64, 100.0, 2.34886690166406123e+33),
    (64, 200.0, 7.73720097177078185e+80),
];
const K_REF: &[(i32, f64, f64)] = &[
    (0, 0.001, 7.02368880056238132),
    (0, 0.1, 2.42706902470201656),
    (0, 1.0, 0.421024438240708333),
    (0, 2.0, 0.113893872749533436),
    (0, 5.0, 0.00369109833404259427),
    (0, 11.9, 2.442288637172271e-6),
    (0, 12.1, 1.98330135439853607e-6),
    (0, 20.0, 5.74123781533652429e-10),
    (0, 50.0, 3.41016774978949551e-23),
    (0, 100.0, 4.65662822917590202e-45),
    (0, 200.0, 1.22568197977653345e-88),
    (1, 0.001, 999.996238156085553),
    (1, 0.1, 9.85384478087060557),
    (1, 1.0, 0.601907230197234575),
    (1, 2.0, 0.139865881816522427),
    (1, 5.0, 0.00404461344545216421),
    (1, 11.9, 2.54291079534769704e-6),
    (1, 12.1, 2.06368712333718531e-6),
    (1, 20.0, 5.88305796955703818e-10),
    (1, 50.0, 3.44410222671755561e-23),
    (1, 100.0, 4.67985373563690929e-45),
    (1, 200.0, 1.22874237347298581e-88),
    (2, 0.001, 1999999.50000097163),
    (2, 0.1, 199.503964642114117),
    (2, 1.0, 1.62483889863517748),
    (2, 2.0, 0.253759754566055863),
    (2, 5.0, 0.00530894371222345996),
    (2, 11.9, 2.86966860277692595e-6),
    (2, 12.1, 2.32440666404104605e-6),
    (2, 20.0, 6.32954361229222811e-10),
    (2, 50.0, 3.54793183885819774e-23),
    (2, 100.0, 4.7502253038886402e-45),
    (2, 200.0, 1.23796940351126331e-88),
    (5, 0.001, 383999976000000960.0),
    (5, 0.1, 38376009.9958359176),
    (5, 1.0, 360.960589601240701),
    (5, 2.0, 9.43104910059646744),
    (5, 5.0, 0.0327062737120318579),
    (5, 11.9, 6.62559514033037219e-6),
    (5, 12.1, 5.2973731871628808e-6),
    (5, 20.0, 1.05386601399742331e-9),
    (5, 50.0, 4.36718225410098633e-23),
    (5, 100.0, 5.27325611329294989e-45),
    (5, 200.0, 1.30452473979751346e-88),
    (10, 0.001, 1.85794554839040042e+38),
    (10, 0.1, 1.85742958463039997e+18),
    (10, 1.0, 180713289.901029455),
    (10, 2.0, 162482.403979559149),
    (10, 5.0, 9.75856282917781013),
    (10, 11.9, 0.000116930992007153436),
    (10, 12.1, 0.0000896797816265217018),
    (10, 20.0, 6.31621452832157976e-9),
    (10, 50.0, 9.15098820998799611e-23),
    (10, 100.0, 7.65542797738810061e-45),
    (10, 200.0, 1.57274812964509916e-88),
    (20, 0.001, 6.37770655639737645e+82),
    (20, 0.1, 6.37686752666117857e+42),
    (20, 1.0, 6.29436936042453517e+22),
    (20, 2.0, 57708568527002410.0),
    (20, 5.0, 482700052.062148469),
    (20, 11.9, 3.32138959418347783),
    (20, 12.1, 2.24650637770569548),
    (20, 20.0, 5.54311163612581626e-6),
    (20, 50.0, 1.70614837972203507e-21),
    (20, 100.0, 3.38520541489017006e-44),
    (20, 200.0, 3.32075523908556136e-88),
    (40, 0.001, 1.12138541932564615e+178),
    (40, 0.1, 1.12131354519736741e+98),
    (40, 1.0, 1.11422065117878283e+58),
    (40, 2.0, 9.94083988474411193e+45),
    (40, 5.0, 1.05075672194749834e+30),
    (40, 11.9, 434714837183539.491),
    (40, 12.1, 216578125233943.706),
    (40, 20.0, 85011.1730773633434),
    (40, 50.0, 1.29986970919508074e-16),
    (40, 100.0, 1.20842079998270059e-41),
    (40, 200.0, 6.54029347033513995e-87),
    (64, 0.1, 1.82856084627883788e+170),
    (64, 1.0, 1.82139153788750094e+106),
    (64, 2.0, 9.75695375589368345e+86),
    (64, 5.0, 3.05489296349823563e+61),
    (64, 11.9, 1.52814436112573164e+37),
    (64, 12.1, 5.16070207280302938e+36),
    (64, 20.0, 2.06720269074594838e+22),
    (64, 50.0, 3.20998377021953203e-7),
    (64, 100.0, 1.79292619711430226e-36),
    (64, 200.0, 3.07742251447994816e-84),
];

fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

#[test]
fn j_matches_reference() {
    let mut worst = 0.0_f64;
    for &(n, x, want) in J_REF {
        let got = bessel_j(n, x);
        let err = (got - want).abs() / want.abs().max(1e-3);
        worst = worst.max(err);
        assert!(err < 1e-12, "J_{n}({x}) = {got}, want {want}");
    }
    eprintln!("worst J error {worst:e}");
}

#[test]
fn i_matches_reference() {
    let mut worst = 0.0_f64;
    for &(n, x, want) in I_REF {
        let got = bessel_i(n, x);
        worst = worst.max(rel_err(got, want));
        assert!(rel_err(got, want) < 1e-10, "I_{n}({x}) = {got}, want {want}");
    }
    eprintln!("worst I error {worst:e}");
}

#[test]
fn k_matches_reference() {
    let mut worst = 0.0_f64;
    for &(n, x, want) in K_REF {
        let got = bessel_k(n, x);
        worst = worst.max(rel_err(got, want));
        assert!(rel_err(got, want) < 1e-10, "K_{n}({x}) = {got}, want {want}");
    }
    eprintln!("worst K error {worst:e}");
}

#[test]
fn wronskian_at_one() {
    let w = bessel_i_prime(0, 1.0) * bessel_k(0, 1.0) - bessel_i(0, 1.0) * bessel_k_prime(0, 1.0);
    assert!((w - 1.0).abs() < 1e-12);
}

#[test]
fn j1_of_one() {
    assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-12);
}

#[test]
fn j_agrees_with_ascending_series() {
    fn series(n: i32, x: f64) -> f64 {
        let h = 0.5 * x;
        let mut lead = 1.0;
        for k in 1..=n {
            lead *= h / k as f64;
        }
        let (mut term, mut sum) = (1.0, 1.0);
        for k in 1..80 {
            term *= -h * h / (k as f64 * (k + n) as f64);
            sum += term;
        }
        lead * sum
    }
    for n in 0..12 {
        for &x in &[0.05, 0.7, 1.9, 3.3, 6.0] {
            assert!((bessel_j(n, x) - series(n, x)).abs() < 1e-14, "n={n} x={x}");
        }
    }
}

#[test]
fn addition_formula_examples() {
    let tol = SeriesTolerance::new(1e-10, 30).unwrap();
    for m in 0..3 {
        let r = graf_addition_check(2.5, 0.4, 0.7, m, tol).unwrap();
        assert!(r < 1e-10);
        // cos eta = 1 collapses the sum to a single term
        assert!(graf_addition_check(2.5, 0.0, 0.7, m, tol).unwrap() < 1e-14);
    }
}

#[test]
fn addition_residual_does_not_grow_with_terms() {
    let mut prev = f64::INFINITY;
    for terms in [2, 4, 8, 16, 32] {
        let r = graf_j_residual(6.0, 0.9, 1.1, 2, terms);
        assert!(r <= prev * (1.0 + 1e-9) + 1e-15, "terms={terms}: {r} > {prev}");
        prev = r;
    }
}

#[test]
fn addition_phase_shift() {
    // Shifting xi by pi flips each term by (-1)^m on both sides.
    let tol = SeriesTolerance::default();
    for m in 0..4 {
        assert!(graf_addition_check(3.0, 0.5, 0.2 + std::f64::consts::PI, m, tol).unwrap() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn wronskian_holds(n in -30i32..=30, x in 1e-2f64..150.0) {
        prop_assert!(wronskian_residual(n, x).abs() < 1e-10);
    }

    #[test]
    fn recurrences_hold(n in -40i32..=40, x in 1e-2f64..150.0) {
        let (ri, rk) = recurrence_residuals(n, x);
        prop_assert!(ri < 1e-10, "I recurrence {}", ri);
        prop_assert!(rk < 1e-10, "K recurrence {}", rk);
    }

    #[test]
    fn order_symmetry(n in 0i32..=64, x in 1e-3f64..200.0) {
        prop_assert_eq!(bessel_i(-n, x), bessel_i(n, x));
        prop_assert_eq!(bessel_k(-n, x), bessel_k(n, x));
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert_eq!(bessel_j(-n, x.min(100.0)), sign * bessel_j(n, x.min(100.0)));
    }

    #[test]
    fn k_positive_and_decreasing(n in 0i32..=40, x in 1e-2f64..150.0) {
        let k0 = bessel_k(n, x);
        let k1 = bessel_k(n, x * 1.01);
        prop_assert!(k0 > 0.0 && k1 > 0.0 && k1 < k0);
    }

    #[test]
    fn derivatives_match_finite_differences(n in -10i32..=10, x in 0.5f64..40.0) {
        let h = 1e-5 * x;
        let fd_i = (bessel_i(n, x + h) - bessel_i(n, x - h)) / (2.0 * h);
        let fd_k = (bessel_k(n, x + h) - bessel_k(n, x - h)) / (2.0 * h);
        let fd_kp = (bessel_k_prime(n, x + h) - bessel_k_prime(n, x - h)) / (2.0 * h);
        prop_assert!(((bessel_i_prime(n, x) - fd_i) / fd_i).abs() < 1e-6);
        prop_assert!(((bessel_k_prime(n, x) - fd_k) / fd_k).abs() < 1e-6);
        prop_assert!(((bessel_k_second(n, x) - fd_kp) / fd_kp).abs() < 1e-6);
    }

    #[test]
    fn j_squares_sum_to_one(x in 0.0f64..30.0) {
        let t = BesselJTable::new(64, x);
        let s: f64 = (-64..=64).map(|m| t.j(m).powi(2)).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_anger(z in 0.0f64..5.0, t in -7.0f64..7.0) {
        prop_assert!(jacobi_anger_residual(z, t, 40) < 1e-10);
    }

    #[test]
    fn addition_formulas(a_k in 0.05f64..8.0, eta in 0.0f64..1.5, xi in -3.2f64..3.2, m in -3i32..=3) {
        prop_assert!(graf_j_residual(a_k, eta, xi, m, 40) < 1e-10);
        prop_assert!(graf_i_residual(a_k, eta, xi, m, 40) < 1e-10);
    }
}
