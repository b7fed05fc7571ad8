//! Image-charge response of a low-dielectric rod core.
//!
//! A helix charge mode of azimuthal order n and axial wavenumber k_z on a rod
//! of radius a is dressed by its own image to ζ_surf,0(n, k_z) times the bare
//! mode. The field of that dressed charge in turn induces images on the other
//! rod; their mode-n content per source mode l is ζ̃_surf,1,0(n, l, k_z) and the
//! tilt-derivative part ζ̃_surf,1,1(n, l, k_z). Lengths are in any unit
//! consistent with κ_D.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::special_functions::{BesselITable, BesselJTable, BesselKTable};

/// Truncation of the (n', m') double sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingTruncation {
    /// A ring is negligible when its summed |terms| fall below
    /// `rel_tol` times the |partial sum|.
    pub rel_tol: f64,
    /// Last ring tried before reporting non-convergence; raised to
    /// |n| + |l| + 40 for high orders.
    pub max_ring: usize,
}

impl Default for RingTruncation {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_ring: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseParams {
    pub a: f64,
    pub r: f64,
    pub kappa_d: f64,
    /// Total inter-rod tilt η.
    pub eta: f64,
    pub trunc: RingTruncation,
}

impl ResponseParams {
    pub fn new(a: f64, r: f64, kappa_d: f64, eta: f64) -> Result<Self> {
        let p = Self { a, r, kappa_d, eta, trunc: RingTruncation::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.r.is_finite() && self.kappa_d > 0.0 && self.eta.is_finite()) {
            return Err(Error::Domain(format!("response parameters out of range: {self:?}")));
        }
        if self.r < 2.0 * self.a {
            return Err(Error::NonPenetrating { r: self.r, two_a: 2.0 * self.a });
        }
        if self.kappa_d * self.r <= 1.0 {
            return Err(Error::Domain(format!(
                "image expansion needs κ_D R > 1, got {}",
                self.kappa_d * self.r
            )));
        }
        Ok(())
    }

    /// Non-fatal validity remarks.
    pub fn warnings(&self) -> Vec<String> {
        let kr = self.kappa_d * self.r;
        if kr < 2.0 {
            vec![format!("κ_D R = {kr:.3} < 2: the image expansion is marginal")]
        } else {
            Vec::new()
        }
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for v in [self.a, self.r, self.kappa_d, self.eta, self.trunc.rel_tol] {
            v.to_bits().hash(&mut h);
        }
        self.trunc.max_ring.hash(&mut h);
        h.finish()
    }
}

/// Which rod carries the induced charge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rod {
    One,
    Two,
}

#[inline]
fn kappa_of(k_z: f64, kappa_d: f64) -> f64 {
    k_z.hypot(kappa_d)
}

/// ζ_img0(n, k_z) = -K_n(x) I_n'(x) / (I_n(x) K_n'(x)), x = a sqrt(k_z² + κ_D²).
pub fn zeta_img0(n: i32, k_z: f64, a: f64, kappa_d: f64) -> f64 {
    let x = a * kappa_of(k_z, kappa_d);
    let order = n.unsigned_abs() as usize + 1;
    let it = BesselITable::new(order, x);
    let kt = BesselKTable::new(order, x);
    -kt.k(n) * it.i_prime(n) / (it.i(n) * kt.k_prime(n))
}

/// ζ_surf,0 = 1 + ζ_img0 = -1 / (x I_n(x) K_n'(x)).
pub fn zeta_surf0(n: i32, k_z: f64, a: f64, kappa_d: f64) -> f64 {
    let x = a * kappa_of(k_z, kappa_d);
    let order = n.unsigned_abs() as usize + 1;
    let it = BesselITable::new(order, x);
    let kt = BesselKTable::new(order, x);
    -1.0 / (x * it.i(n) * kt.k_prime(n))
}

/// dζ_surf,0/dk_z from the chain rule:
/// dζ/dx = [I_n' K_n' + I_n K_n (1 + n²/x²)] / (x I_n² K_n'²), dx/dk_z = a² k_z / x.
pub fn zeta_surf0_slope(n: i32, k_z: f64, a: f64, kappa_d: f64) -> f64 {
    let x = a * kappa_of(k_z, kappa_d);
    let order = n.unsigned_abs() as usize + 1;
    let it = BesselITable::new(order, x);
    let kt = BesselKTable::new(order, x);
    surf0_from_tables(n, x, &it, &kt).d * a * a * k_z / x
}

/// ζ_surf,0 and dζ_surf,0/dx from tables at x.
fn surf0_from_tables(n: i32, x: f64, it: &BesselITable, kt: &BesselKTable) -> Dual {
    let (i, ip) = (it.i(n), it.i_prime(n));
    let (k, kp) = (kt.k(n), kt.k_prime(n));
    let nx = n as f64 / x;
    Dual {
        v: -1.0 / (x * i * kp),
        d: (ip * kp + i * k * (1.0 + nx * nx)) / (x * i * i * kp * kp),
    }
}

/// ζ_surf,0 and its k_z-derivative together.
pub(crate) fn surf0_dual(n: i32, k_z: f64, a: f64, kappa_d: f64) -> Dual {
    let x = a * kappa_of(k_z, kappa_d);
    let order = n.unsigned_abs() as usize + 1;
    let s = surf0_from_tables(n, x, &BesselITable::new(order, x), &BesselKTable::new(order, x));
    Dual { v: s.v, d: s.d * a * a * k_z / x }
}

/// Largest |dζ_surf,0/dk_z| over the given orders and wavenumbers. The image
/// treatment assumes this is small.
pub fn max_surf0_slope(orders: &[i32], k_grid: &[f64], a: f64, kappa_d: f64) -> f64 {
    let mut worst = 0.0_f64;
    for &n in orders {
        for &k in k_grid {
            worst = worst.max(zeta_surf0_slope(n, k, a, kappa_d).abs());
        }
    }
    worst
}

/// A value and its derivative with respect to k_z.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    fn new(v: f64, d: f64) -> Self {
        Self { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.v * o.d + self.d * o.v)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, s: f64) -> Dual {
        Dual::new(self.v * s, self.d * s)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

/// Next-order image coefficients with their k_z-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResponsePair {
    pub zeta10: f64,
    pub zeta11: f64,
    pub dzeta10: f64,
    pub dzeta11: f64,
    /// Rings summed before the stopping rule was met.
    pub rings: usize,
}

fn parity(n: i32) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// (ζ̃_surf,1,0, ζ̃_surf,1,1) for the image on `rod` of mode n induced by
/// source mode l on the other rod.
pub fn zeta_surf1(rod: Rod, n: i32, l: i32, k_z: f64, p: &ResponseParams) -> Result<(f64, f64)> {
    let r = zeta_surf1_with_slope(rod, n, l, k_z, p)?;
    Ok((r.zeta10, r.zeta11))
}

/// As [`zeta_surf1`], also returning the k_z-derivatives.
///
/// Rod 2 (image of rod-1 mode l):
///   ζ̃_1,0 = -P Σ_{n',m'} (-1)^n I_{n'-m'}(x(1-c)/2) I_{m'}(x(1+c)/2) K_{n-n'}(Rκ) J_{2m'-n'-l}(a k_z s) ζ_surf,0(l, k_z c)
/// Rod 1 (image of rod-2 mode l):
///   ζ̃_1,0 = -P Σ_{n',m'} (-1)^{n'} I_{n'-m'} I_{m'} K_{n'-n}(Rκ) J_{n'+l-2m'}(a k_z s) ζ_surf,0(l, k_z c)
/// with P = I_n'(x)/(K_n'(x) I_n(x)), x = aκ, c = cos η, s = sin η.
/// ζ̃_1,1 is the same sum with prefactor +P and an extra (n - n')/R.
pub fn zeta_surf1_with_slope(rod: Rod, n: i32, l: i32, k_z: f64, p: &ResponseParams) -> Result<ResponsePair> {
    let kappa = kappa_of(k_z, p.kappa_d);
    let dkappa = k_z / kappa;
    let x = p.a * kappa;
    let (s, c) = p.eta.sin_cos();
    let na = n.abs();
    let la = l.abs();
    let cap = (p.trunc.max_ring as i32).max(na + la + 40);

    let i_order = (2 * cap + 2) as usize;
    let x_minus = 0.5 * x * (1.0 - c);
    let x_plus = 0.5 * x * (1.0 + c);
    let im = BesselITable::new(i_order, x_minus);
    let ip = BesselITable::new(i_order, x_plus);
    let kr = BesselKTable::new((na + cap + 2) as usize, p.r * kappa);
    let j_arg = p.a * k_z * s;
    let jt = BesselJTable::new((3 * cap + la + 2) as usize, j_arg);
    let source = surf0_dual(l, k_z * c, p.a, p.kappa_d);
    let source = Dual::new(source.v, source.d * c);

    // Each factor as a dual number in k_z.
    let i_minus = |o: i32| Dual::new(im.i(o), im.i_prime(o) * 0.5 * p.a * (1.0 - c) * dkappa);
    let i_plus = |o: i32| Dual::new(ip.i(o), ip.i_prime(o) * 0.5 * p.a * (1.0 + c) * dkappa);
    let k_fac = |o: i32| Dual::new(kr.k(o), kr.k_prime(o) * p.r * dkappa);
    let j_fac = |o: i32| Dual::new(jt.j(o), 0.5 * (jt.j(o - 1) - jt.j(o + 1)) * p.a * s);

    let mut sum0 = Dual::default();
    let mut sum1 = Dual::default();
    let mut quiet_rings = 0;
    let mut rings = 0;
    let min_ring = na.max(la) + 2;
    let mut converged = false;
    for ring in 0..=cap {
        let mut ring_abs = 0.0;
        let mut ring0 = Dual::default();
        let mut ring1 = Dual::default();
        for (np, mp) in ring_points(ring) {
            let (sign, k_order, j_order) = match rod {
                Rod::Two => (parity(n), n - np, 2 * mp - np - l),
                Rod::One => (parity(np), np - n, np + l - 2 * mp),
            };
            let jv = jt.j(j_order);
            if jv == 0.0 && s == 0.0 {
                continue;
            }
            let term = i_minus(np - mp) * i_plus(mp) * k_fac(k_order) * j_fac(j_order) * sign;
            ring0 = ring0 + term;
            ring1 = ring1 + term * ((n - np) as f64 / p.r);
            ring_abs += term.v.abs() * (1.0 + ((n - np) as f64 / p.r).abs());
        }
        sum0 = sum0 + ring0;
        sum1 = sum1 + ring1;
        rings = ring as usize + 1;
        let scale = sum0.v.abs() + sum1.v.abs();
        if ring >= min_ring && ring_abs <= p.trunc.rel_tol * scale.max(f64::MIN_POSITIVE) {
            quiet_rings += 1;
            if quiet_rings >= 2 {
                converged = true;
                break;
            }
        } else {
            quiet_rings = 0;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "image coefficient (rod {rod:?}, n = {n}, l = {l}, k_z = {k_z}) not settled after {cap} rings"
        )));
    }

    let pref = prefactor(n, x, p.a * dkappa);
    let z10 = -(pref * sum0 * source);
    let z11 = pref * sum1 * source;
    Ok(ResponsePair { zeta10: z10.v, zeta11: z11.v, dzeta10: z10.d, dzeta11: z11.d, rings })
}

/// P = I_n'(x)/(K_n'(x) I_n(x)) with its k_z-derivative (dx/dk_z supplied).
fn prefactor(n: i32, x: f64, dx: f64) -> Dual {
    let order = n.unsigned_abs() as usize + 2;
    let it = BesselITable::new(order, x);
    let kt = BesselKTable::new(order, x);
    let (i, i1, i2) = (it.i(n), it.i_prime(n), it.i_second(n));
    let (k1, k2) = (kt.k_prime(n), kt.k_second(n));
    let v = i1 / (k1 * i);
    let dv = i2 / (k1 * i) - i1 * (k2 * i + k1 * i1) / (k1 * i).powi(2);
    Dual::new(v, dv * dx)
}

/// Lattice points with max(|n'|, |m'|) = ring, in a fixed order.
fn ring_points(ring: i32) -> Vec<(i32, i32)> {
    if ring == 0 {
        return vec![(0, 0)];
    }
    let mut pts = Vec::with_capacity(8 * ring as usize);
    for np in -ring..=ring {
        for mp in -ring..=ring {
            if np.abs() == ring || mp.abs() == ring {
                pts.push((np, mp));
            }
        }
    }
    pts
}

/// Small-angle forms (ζ̃_1,0,0, ζ̃_1,0,1, ζ̃_1,1): leading term, coefficient of
/// sin η in ζ̃_1,0, and the tilt-derivative coefficient, all single terms.
pub fn zeta_surf1_small_angle(rod: Rod, n: i32, l: i32, k_z: f64, p: &ResponseParams) -> (f64, f64, f64) {
    let kappa = kappa_of(k_z, p.kappa_d);
    let x = p.a * kappa;
    let order = (n.abs() + l.abs() + 3) as usize;
    let it = BesselITable::new(order, x);
    let kt = BesselKTable::new(order, x);
    let kr = BesselKTable::new(order, p.r * kappa);
    let pref = it.i_prime(n) / (kt.k_prime(n) * it.i(n));
    let source = zeta_surf0(l, k_z * p.eta.cos(), p.a, p.kappa_d);
    let sign = match rod {
        Rod::Two => parity(n),
        Rod::One => parity(l),
    };
    let z100 = -pref * sign * it.i(l) * kr.k(n - l) * source;
    let half_ak = 0.5 * p.a * k_z;
    let z101 = match rod {
        Rod::Two => pref * half_ak * sign * (it.i(l - 1) * kr.k(n - l + 1) - it.i(l + 1) * kr.k(n - l - 1)) * source,
        Rod::One => -pref * half_ak * sign * (kr.k(n - l - 1) * it.i(l + 1) - kr.k(n - l + 1) * it.i(l - 1)) * source,
    };
    let z11 = pref * sign * (n - l) as f64 * it.i(l) * kr.k(n - l) * source / p.r;
    (z100, z101, z11)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    rod: Rod,
    n: i32,
    l: i32,
    k_bits: u64,
    params: u64,
}

/// Memo table for [`zeta_surf1_with_slope`], keyed on the exact bit pattern of
/// k_z and a fingerprint of the parameters. Readers share the lock; a writer
/// inserts only if the key is still absent, so every reader sees one value.
#[derive(Debug, Default)]
pub struct ResponseCache {
    map: RwLock<HashMap<CacheKey, ResponsePair>>,
}

impl ResponseCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_compute(&self, rod: Rod, n: i32, l: i32, k_z: f64, p: &ResponseParams) -> Result<ResponsePair> {
        let key = CacheKey { rod, n, l, k_bits: k_z.to_bits(), params: p.fingerprint() };
        if let Some(v) = self.map.read().ok().and_then(|m| m.get(&key).copied()) {
            return Ok(v);
        }
        let value = zeta_surf1_with_slope(rod, n, l, k_z, p)?;
        if let Ok(mut m) = self.map.write() {
            return Ok(*m.entry(key).or_insert(value));
        }
        Ok(value)
    }
}
