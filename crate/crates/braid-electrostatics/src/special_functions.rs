//! Integer-order Bessel functions J_n, I_n, K_n and the identities the mode
//! sums rely on.
//!
//! Method summary:
//!
//! * `I_n`: ascending series for x <= 12; above the crossover the Hankel
//!   expansion of I_0 (truncated at its smallest term) times ratios
//!   I_k/I_{k-1} from backward recurrence of the continued fraction.
//! * `K_n`: K_0 and K_1 from the logarithmic ascending series for x <= 2, from
//!   Steed's continued fraction (Temme's form) on (2, 12], and from the Hankel
//!   expansion above 12. Higher orders by upward recurrence, which is stable
//!   for K.
//! * `J_n`: Miller's downward recurrence normalised with
//!   J_0 + 2 sum J_2k = 1, with a two-term series for |x| < 1e-8.
//!
//! Orders are capped at |n| <= 64. Arrays of consecutive orders are available
//! through [`BesselITable`], [`BesselKTable`] and [`BesselJTable`]; the mode sums
//! use those.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported |order|.
pub const MAX_ORDER: usize = 64;

/// Crossover between ascending series and large-argument expansions.
pub const ASYMPTOTIC_CROSSOVER: f64 = 12.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Truncation control for the identity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTolerance {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl SeriesTolerance {
    pub fn new(abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::Domain(format!("abs_tol must be positive, got {abs_tol}")));
        }
        if max_terms < 8 {
            return Err(Error::Domain(format!("max_terms must be at least 8, got {max_terms}")));
        }
        Ok(Self { abs_tol, max_terms })
    }
}

impl Default for SeriesTolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_terms: 30 }
    }
}

#[inline]
fn parity(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_order(n: i32) -> Result<()> {
    if n.unsigned_abs() as usize > MAX_ORDER {
        Err(Error::Domain(format!("Bessel order {n} exceeds the cap of {MAX_ORDER}")))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------- I_n

/// Ascending series sum_k (x/2)^(2k+n) / (k! (n+k)!), all terms positive.
fn i_series(n: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut lead = 1.0;
    for k in 1..=n {
        lead *= h / k as f64;
    }
    if lead == 0.0 {
        return 0.0;
    }
    let q = h * h;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n as f64));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    lead * sum
}

/// Hankel coefficients a_k(nu) / x^k, summed with sign s^k up to the smallest term.
fn hankel_sum(nu: f64, x: f64, sign: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term: f64 = 1.0;
    let mut sum: f64 = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = term * sign * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
    sum
}

fn i0_asymptotic(x: f64) -> f64 {
    x.exp() / (2.0 * std::f64::consts::PI * x).sqrt() * hankel_sum(0.0, x, -1.0)
}

/// Ratios r_k = I_k / I_{k-1} for k = 1..=n, by backward recurrence of the
/// continued fraction r_k = 1 / (2k/x + r_{k+1}).
fn i_ratios(n: usize, x: f64) -> Vec<f64> {
    let start = n + 2 * x.ceil() as usize + 40;
    let mut ratios = vec![0.0; n + 1];
    let mut r = 0.0;
    for k in (1..=start).rev() {
        r = 1.0 / (2.0 * k as f64 / x + r);
        if k <= n {
            ratios[k] = r;
        }
    }
    ratios
}

fn i_nonneg(n: usize, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= ASYMPTOTIC_CROSSOVER {
        i_series(n, x)
    } else {
        let ratios = i_ratios(n, x);
        ratios[1..].iter().fold(i0_asymptotic(x), |acc, r| acc * r)
    }
}

/// Modified Bessel function of the first kind, I_n(x), for real x.
pub fn bessel_i(n: i32, x: f64) -> f64 {
    let v = i_nonneg(n.unsigned_abs() as usize, x.abs());
    if x < 0.0 {
        v * parity(n as i64)
    } else {
        v
    }
}

/// Checked form of [`bessel_i`].
pub fn try_bessel_i(n: i32, x: f64) -> Result<f64> {
    check_order(n)?;
    if !x.is_finite() {
        return Err(Error::Domain(format!("I_n argument must be finite, got {x}")));
    }
    let v = bessel_i(n, x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("I_{n}({x}) overflows")))
    }
}

// ---------------------------------------------------------------- K_n

fn k01_series(x: f64) -> (f64, f64) {
    let h = 0.5 * x;
    let q = h * h;
    let ln_h = h.ln();
    // K_0: -(ln(x/2) + gamma) I_0 + sum_k q^k / (k!)^2 H_k
    // K_1: 1/x + ln(x/2) I_1 - (x/4) sum_k (psi(k+1) + psi(k+2)) q^k / (k! (k+1)!)
    let mut i0 = 1.0;
    let mut i1 = h;
    let mut s0 = 0.0;
    let mut s1 = 1.0 - 2.0 * EULER_GAMMA;
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut harmonic = 0.0;
    let mut k = 1.0;
    loop {
        t0 *= q / (k * k);
        t1 *= q / (k * (k + 1.0));
        let psi_k1 = harmonic + 1.0 / k - EULER_GAMMA;
        let psi_k2 = psi_k1 + 1.0 / (k + 1.0);
        harmonic += 1.0 / k;
        i0 += t0;
        i1 += h * t1;
        s0 += t0 * harmonic;
        s1 += t1 * (psi_k1 + psi_k2);
        if t0 < 1e-18 && t1 < 1e-18 {
            break;
        }
        k += 1.0;
    }
    let k0 = -(ln_h + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + ln_h * i1 - 0.5 * h * s1;
    (k0, k1)
}

/// Steed's method for K_0 and K_1 (second continued fraction, order zero).
fn k01_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn k01_asymptotic(x: f64) -> (f64, f64) {
    let pref = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
    (pref * hankel_sum(0.0, x, 1.0), pref * hankel_sum(1.0, x, 1.0))
}

fn k01(x: f64) -> (f64, f64) {
    if x <= 2.0 {
        k01_series(x)
    } else if x <= ASYMPTOTIC_CROSSOVER {
        k01_steed(x)
    } else {
        k01_asymptotic(x)
    }
}

/// Modified Bessel function of the second kind, K_n(x), x > 0.
///
/// Returns NaN for x <= 0; use [`try_bessel_k`] for a checked call.
pub fn bessel_k(n: i32, x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let n = n.unsigned_abs() as usize;
    let (mut km, mut k) = k01(x);
    if n == 0 {
        return km;
    }
    for j in 1..n {
        let next = km + 2.0 * j as f64 / x * k;
        km = k;
        k = next;
    }
    k
}

/// Checked form of [`bessel_k`].
pub fn try_bessel_k(n: i32, x: f64) -> Result<f64> {
    check_order(n)?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("K_n requires a positive finite argument, got {x}")));
    }
    Ok(bessel_k(n, x))
}

// ---------------------------------------------------------------- J_n

/// J_0..=J_n_max at x >= 0.
fn j_miller(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if x < 1e-8 {
        let h = 0.5 * x;
        let mut lead = 1.0;
        for (n, slot) in out.iter_mut().enumerate() {
            if n > 0 {
                lead *= h / n as f64;
            }
            *slot = lead * (1.0 - h * h / (n as f64 + 1.0));
        }
        return out;
    }
    let top = n_max.max(x.ceil() as usize);
    let mut start = top + 30 + (40.0 * top as f64).sqrt() as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut jp = 0.0;
    let mut j = 1e-30;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        // j now holds the unnormalised J_{k-1}
        if k - 1 <= n_max {
            out[k - 1] = j;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e200 {
            j *= 1e-200;
            jp *= 1e-200;
            norm *= 1e-200;
            for v in out.iter_mut() {
                *v *= 1e-200;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Bessel function of the first kind, J_n(x).
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = j_miller(m, x.abs())[m];
    let mut sign = 1.0;
    if n < 0 {
        sign *= parity(n as i64);
    }
    if x < 0.0 {
        sign *= parity(n as i64);
    }
    sign * v
}

/// Checked form of [`bessel_j`]: rejects orders above the cap and |x| >= 1e6.
pub fn try_bessel_j(n: i32, x: f64) -> Result<f64> {
    check_order(n)?;
    if !(x.abs() < 1e6) {
        return Err(Error::Domain(format!("J_n argument {x} outside |x| < 1e6")));
    }
    Ok(bessel_j(n, x))
}

// ---------------------------------------------------------------- tables

/// I_n(x) for 0 <= n <= n_max at a fixed argument; negative orders by symmetry.
#[derive(Debug, Clone)]
pub struct BesselITable {
    x: f64,
    values: Vec<f64>,
}

impl BesselITable {
    pub fn new(n_max: usize, x: f64) -> Self {
        let ax = x.abs();
        let mut values = vec![0.0; n_max + 1];
        if ax == 0.0 {
            values[0] = 1.0;
        } else if ax <= ASYMPTOTIC_CROSSOVER {
            let top = i_series(n_max + 1, ax);
            let below = i_series(n_max, ax);
            if top > 1e-280 {
                // Downward recurrence I_{k-1} = I_{k+1} + (2k/x) I_k is stable.
                values[n_max] = below;
                let mut ip = top;
                let mut i = below;
                for k in (1..=n_max).rev() {
                    let im = ip + 2.0 * k as f64 / ax * i;
                    ip = i;
                    i = im;
                    values[k - 1] = i;
                }
            } else {
                for (n, v) in values.iter_mut().enumerate() {
                    *v = i_series(n, ax);
                }
            }
        } else {
            let ratios = i_ratios(n_max, ax);
            values[0] = i0_asymptotic(ax);
            for k in 1..=n_max {
                values[k] = values[k - 1] * ratios[k];
            }
        }
        if x < 0.0 {
            for (n, v) in values.iter_mut().enumerate() {
                *v *= parity(n as i64);
            }
        }
        Self { x, values }
    }

    pub fn arg(&self) -> f64 {
        self.x
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn i(&self, n: i32) -> f64 {
        self.values[n.unsigned_abs() as usize]
    }

    /// dI_n/dx = (I_{n-1} + I_{n+1}) / 2. Needs |n| + 1 <= n_max.
    #[inline]
    pub fn i_prime(&self, n: i32) -> f64 {
        0.5 * (self.i(n - 1) + self.i(n + 1))
    }

    /// d²I_n/dx² = (I_{n-2} + 2 I_n + I_{n+2}) / 4. Needs |n| + 2 <= n_max.
    #[inline]
    pub fn i_second(&self, n: i32) -> f64 {
        0.25 * (self.i(n - 2) + 2.0 * self.i(n) + self.i(n + 2))
    }
}

/// K_n(x) for 0 <= n <= n_max at a fixed positive argument.
#[derive(Debug, Clone)]
pub struct BesselKTable {
    x: f64,
    values: Vec<f64>,
}

impl BesselKTable {
    /// Panics in debug builds if x <= 0.
    pub fn new(n_max: usize, x: f64) -> Self {
        debug_assert!(x > 0.0, "K_n needs x > 0, got {x}");
        let mut values = vec![0.0; n_max + 1];
        let (k0, k1) = k01(x);
        values[0] = k0;
        if n_max >= 1 {
            values[1] = k1;
        }
        for n in 2..=n_max {
            values[n] = values[n - 2] + 2.0 * (n - 1) as f64 / x * values[n - 1];
        }
        Self { x, values }
    }

    pub fn arg(&self) -> f64 {
        self.x
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn k(&self, n: i32) -> f64 {
        self.values[n.unsigned_abs() as usize]
    }

    /// dK_n/dx = -(K_{n-1} + K_{n+1}) / 2.
    #[inline]
    pub fn k_prime(&self, n: i32) -> f64 {
        -0.5 * (self.k(n - 1) + self.k(n + 1))
    }

    /// d²K_n/dx² = (K_{n-2} + 2 K_n + K_{n+2}) / 4.
    #[inline]
    pub fn k_second(&self, n: i32) -> f64 {
        0.25 * (self.k(n - 2) + 2.0 * self.k(n) + self.k(n + 2))
    }
}

/// J_n(x) for |n| <= n_max at a fixed real argument.
#[derive(Debug, Clone)]
pub struct BesselJTable {
    x: f64,
    values: Vec<f64>,
}

impl BesselJTable {
    pub fn new(n_max: usize, x: f64) -> Self {
        let mut values = j_miller(n_max, x.abs());
        if x < 0.0 {
            for (n, v) in values.iter_mut().enumerate() {
                *v *= parity(n as i64);
            }
        }
        Self { x, values }
    }

    pub fn arg(&self) -> f64 {
        self.x
    }

    pub fn n_max(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn j(&self, n: i32) -> f64 {
        let v = self.values[n.unsigned_abs() as usize];
        if n < 0 {
            v * parity(n as i64)
        } else {
            v
        }
    }
}

// ---------------------------------------------------------------- derivatives

/// dI_n/dx.
pub fn bessel_i_prime(n: i32, x: f64) -> f64 {
    0.5 * (bessel_i(n - 1, x) + bessel_i(n + 1, x))
}

/// dK_n/dx.
pub fn bessel_k_prime(n: i32, x: f64) -> f64 {
    -0.5 * (bessel_k(n - 1, x) + bessel_k(n + 1, x))
}

/// d²K_n/dx², from differentiating the derivative recurrence twice.
pub fn bessel_k_second(n: i32, x: f64) -> f64 {
    0.25 * (bessel_k(n - 2, x) + 2.0 * bessel_k(n, x) + bessel_k(n + 2, x))
}

/// dJ_n/dx.
pub fn bessel_j_prime(n: i32, x: f64) -> f64 {
    0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
}

// ---------------------------------------------------------------- identities

/// x (I_n' K_n - I_n K_n') - 1, which vanishes identically.
pub fn wronskian_residual(n: i32, x: f64) -> f64 {
    let it = BesselITable::new(n.unsigned_abs() as usize + 1, x);
    let kt = BesselKTable::new(n.unsigned_abs() as usize + 1, x);
    x * (it.i_prime(n) * kt.k(n) - it.i(n) * kt.k_prime(n)) - 1.0
}

/// Relative residuals of the three-term recurrences at order n:
/// I_{n-1} - I_{n+1} = (2n/x) I_n and K_{n+1} - K_{n-1} = (2n/x) K_n,
/// evaluated with independent single-order calls.
pub fn recurrence_residuals(n: i32, x: f64) -> (f64, f64) {
    let (im, i0, ip) = (bessel_i(n - 1, x), bessel_i(n, x), bessel_i(n + 1, x));
    let (km, k0, kp) = (bessel_k(n - 1, x), bessel_k(n, x), bessel_k(n + 1, x));
    let c = 2.0 * n as f64 / x;
    let ri = (im - ip - c * i0).abs() / im.abs().max(ip.abs()).max(f64::MIN_POSITIVE);
    let rk = (kp - km - c * k0).abs() / kp.abs().max(km.abs());
    (ri, rk)
}

fn helix_projection(eta: f64, xi: f64) -> (f64, f64) {
    let c = eta.cos();
    let rh = (xi.cos().powi(2) + c * c * xi.sin().powi(2)).sqrt();
    let xi_t = (c * xi.sin()).atan2(xi.cos());
    (rh, xi_t)
}

/// |LHS - RHS| of the ordinary addition formula
/// J_m(aK R_H) e^{-i m xi~} = sum_n J_{m-n}(aK(1-cos eta)/2) J_n(aK(1+cos eta)/2) e^{-2i n xi} e^{i m xi}
/// with R_H = sqrt(cos² xi + cos² eta sin² xi), xi~ = atan(cos eta tan xi),
/// truncated at |n| <= max_terms.
pub fn graf_j_residual(a_k: f64, eta: f64, xi: f64, m: i32, max_terms: usize) -> f64 {
    let (rh, xi_t) = helix_projection(eta, xi);
    let c = eta.cos();
    let lhs = Complex64::from_polar(bessel_j(m, a_k * rh), -(m as f64) * xi_t);
    let lo = BesselJTable::new(max_terms + m.unsigned_abs() as usize, 0.5 * a_k * (1.0 - c));
    let hi = BesselJTable::new(max_terms, 0.5 * a_k * (1.0 + c));
    let mut rhs = crate::sum::ComplexSum::new();
    let nt = max_terms as i32;
    for n in -nt..=nt {
        let w = lo.j(m - n) * hi.j(n);
        rhs.add(Complex64::from_polar(w, (m - 2 * n) as f64 * xi));
    }
    (lhs - rhs.value()).norm()
}

/// Residual of the modified-Bessel analogue of [`graf_j_residual`],
/// I_m(x R_H) e^{-i m xi~} = sum_n I_{m-n}(x(1-cos eta)/2) I_n(x(1+cos eta)/2) e^{-2i n xi} e^{i m xi},
/// normalised by I_m(x R_H).
pub fn graf_i_residual(x: f64, eta: f64, xi: f64, m: i32, max_terms: usize) -> f64 {
    let (rh, xi_t) = helix_projection(eta, xi);
    let c = eta.cos();
    let scale = bessel_i(m, x * rh);
    let lhs = Complex64::from_polar(scale, -(m as f64) * xi_t);
    let lo = BesselITable::new(max_terms + m.unsigned_abs() as usize, 0.5 * x * (1.0 - c));
    let hi = BesselITable::new(max_terms, 0.5 * x * (1.0 + c));
    let mut rhs = crate::sum::ComplexSum::new();
    let nt = max_terms as i32;
    for n in -nt..=nt {
        let w = lo.i(m - n) * hi.i(n);
        rhs.add(Complex64::from_polar(w, (m - 2 * n) as f64 * xi));
    }
    (lhs - rhs.value()).norm() / scale.abs().max(1.0)
}

/// Checks both addition formulas at the given parameters and returns the
/// larger residual. Fails when the residual exceeds `tol.abs_tol` with
/// `tol.max_terms` terms on each side of zero.
pub fn graf_addition_check(a_k: f64, eta2: f64, xi2: f64, m: i32, tol: SeriesTolerance) -> Result<f64> {
    if !(a_k > 0.0) {
        return Err(Error::Domain(format!("addition check needs aK > 0, got {a_k}")));
    }
    check_order(m)?;
    let r = graf_j_residual(a_k, eta2, xi2, m, tol.max_terms)
        .max(graf_i_residual(a_k, eta2, xi2, m, tol.max_terms));
    if r > tol.abs_tol {
        Err(Error::NonConvergence(format!(
            "addition formula residual {r:e} above {:e} with {} terms",
            tol.abs_tol, tol.max_terms
        )))
    } else {
        Ok(r)
    }
}

/// |e^{-i z sin t} - sum_{|j| <= j_max} J_j(z) e^{-i j t}|.
pub fn jacobi_anger_residual(z: f64, t: f64, j_max: usize) -> f64 {
    let table = BesselJTable::new(j_max, z);
    let mut acc = crate::sum::ComplexSum::new();
    let jm = j_max as i32;
    for j in -jm..=jm {
        acc.add(Complex64::from_polar(table.j(j), -(j as f64) * t));
    }
    (Complex64::from_polar(1.0, -z * t.sin()) - acc.value()).norm()
}
