//! Interaction energy of two helically charged rods with low-dielectric cores.
//!
//! Three levels of description are provided. The full mode sums dress every
//! helix mode with its own image (ζ_surf,0) and add the image charge each rod
//! induces on the other (ζ̃). The diagonal approximation keeps only the modes
//! that stay phase-locked along a near-ideal braid and uses the kinematics
//! expanded to first order in R ω_{A,3}. The small-angle forms are closed
//! single and double sums over the azimuthal order.
//!
//! Every energy is per unit braid length, in units of `PhysicalParams::prefactor`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::braid_geometry::{helix_frequencies, rod_frequencies, small_twist_expansion, BraidState};
use crate::charge_model::ChargeModel;
use crate::energy_nocore::{direct_mode_sum, ModeTables, SumGeometry};
use crate::error::{Error, Result};
use crate::params::{PhysicalParams, Truncation};
use crate::special_functions::{BesselITable, BesselKTable, MAX_ORDER};
use crate::sum::{ComplexSum, NeumaierSum};
use crate::surface_response::{surf0_dual, Dual, ResponseCache, ResponsePair, ResponseParams, Rod};

/// Level of approximation for the dielectric-core energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApproxLevel {
    Full,
    Diagonal,
    SmallAngle,
}

impl fmt::Display for ApproxLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApproxLevel::Full => "full",
            ApproxLevel::Diagonal => "diagonal",
            ApproxLevel::SmallAngle => "small_angle",
        })
    }
}

impl FromStr for ApproxLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(ApproxLevel::Full),
            "diagonal" => Ok(ApproxLevel::Diagonal),
            "small_angle" | "smallangle" => Ok(ApproxLevel::SmallAngle),
            other => Err(Error::Domain(format!("unknown approximation level '{other}'"))),
        }
    }
}

/// How the rod surfaces respond to the external field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseModel {
    /// Low-dielectric cores: ζ_surf,0 and ζ̃ from the Bessel forms.
    #[default]
    Dielectric,
    /// No core: ζ_surf,0 ≡ 1, no slope and no induced charge.
    Uniform,
}

/// Which (l, l') pairs enter the sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeRestriction {
    #[default]
    All,
    /// Only l' = -l (and j' = -l, j' = -l' in the image sums).
    Diagonal,
}

/// Options shared by the full and diagonal sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SumOptions {
    pub response: ResponseModel,
    pub restriction: ModeRestriction,
}

/// Real parts of C weighted channels with their diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components<const C: usize> {
    pub values: [f64; C],
    pub imag_residual: f64,
    pub truncation_estimate: f64,
}

impl<const C: usize> Components<C> {
    pub fn zero() -> Self {
        Self { values: [0.0; C], imag_residual: 0.0, truncation_estimate: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn from_sums(sums: &[ComplexSum; C], trunc: f64, scale: f64) -> Self {
        let mut values = [0.0; C];
        let mut imag = 0.0_f64;
        for c in 0..C {
            let v = sums[c].value();
            values[c] = scale * v.re;
            imag = imag.max((scale * v.im).abs());
        }
        Self { values, imag_residual: imag, truncation_estimate: (scale * trunc).abs() }
    }
}

/// Energy density split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub approx_level: ApproxLevel,
    /// Full and diagonal: (E_dir,0, E_dir,1, E_dir,2).
    /// Small-angle: (Ē_dir,0, Ē_dir,η, Ē_dir,ω).
    pub e_dir: [f64; 3],
    /// Image terms for charge induced on rod 2 by rod 1. Full and diagonal:
    /// the four components. Small-angle: (Ē_0, Ē_η, Ē_ω, 0).
    pub e_img1: [f64; 4],
    /// Image terms for charge induced on rod 1 by rod 2.
    pub e_img2: [f64; 4],
    pub imag_residual: f64,
    pub truncation_estimate: f64,
    /// Set when ω_{A,3} ≠ 0: the twist corrections to the image terms are
    /// known to be incomplete at this order.
    pub omega_terms_incomplete: bool,
    pub warnings: Vec<String>,
}

impl EnergyBreakdown {
    pub fn direct(&self) -> f64 {
        self.e_dir.iter().sum()
    }

    pub fn image(&self) -> f64 {
        self.e_img1.iter().chain(self.e_img2.iter()).sum()
    }

    pub fn total(&self) -> f64 {
        self.direct() + self.image()
    }
}

/// Phase-locking data for the diagonal approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalModeParams {
    pub omega_xi: f64,
    pub dxi_deviation_1: f64,
    pub dxi_deviation_2: f64,
}

impl DiagonalModeParams {
    /// Uses `omega_xi` when nonzero, otherwise the mean of ξ1' and ξ2'.
    pub fn new(state: &BraidState, omega_xi: f64) -> Self {
        let w = if omega_xi != 0.0 { omega_xi } else { 0.5 * (state.dxi1_ds + state.dxi2_ds) };
        Self { omega_xi: w, dxi_deviation_1: state.dxi1_ds - w, dxi_deviation_2: state.dxi2_ds - w }
    }

    /// max |ξ_μ' - ω_ξ| / |ω_ξ|; the diagonal sums assume this is small.
    pub fn validity_ratio(&self) -> f64 {
        let dev = self.dxi_deviation_1.abs().max(self.dxi_deviation_2.abs());
        if dev == 0.0 {
            0.0
        } else if self.omega_xi == 0.0 {
            f64::INFINITY
        } else {
            dev / self.omega_xi.abs()
        }
    }
}

const DIAGONAL_VALIDITY_LIMIT: f64 = 0.1;

#[inline]
fn parity(n: i32) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// ζ_surf,0 and its slope, memoised on (order, k_z).
struct Surf0Lookup {
    model: ResponseModel,
    a: f64,
    kappa_d: f64,
    memo: HashMap<(i32, u64), Dual>,
}

impl Surf0Lookup {
    fn new(model: ResponseModel, a: f64, kappa_d: f64) -> Self {
        Self { model, a, kappa_d, memo: HashMap::new() }
    }

    fn get(&mut self, n: i32, k_z: f64) -> Dual {
        match self.model {
            ResponseModel::Uniform => Dual { v: 1.0, d: 0.0 },
            ResponseModel::Dielectric => {
                let (a, kd) = (self.a, self.kappa_d);
                *self.memo.entry((n, k_z.to_bits())).or_insert_with(|| surf0_dual(n, k_z, a, kd))
            }
        }
    }
}

/// Geometry with the kinematics replaced by their small-twist expansion.
fn diagonal_geometry(state: &BraidState, kappa_d: f64, trunc: &Truncation) -> Result<SumGeometry> {
    let mut geo = SumGeometry::new(state, kappa_d, trunc)?;
    let e = small_twist_expansion(state);
    let (sh, ch) = (0.5 * state.eta).sin_cos();
    let shift = 0.25 * state.r * state.omega_a[2] * state.eta.sin() * sh;
    geo.cos_eta = [ch + shift, ch - shift];
    geo.sin_eta = e.sin_eta_mu;
    geo.sigma = e.sigma;
    geo.omega_a1 = e.omega_a1;
    Ok(geo)
}

fn direct_components(
    state: &BraidState,
    geo: &SumGeometry,
    charge: &ChargeModel,
    phys: &PhysicalParams,
    opts: SumOptions,
) -> Result<Components<3>> {
    let mut surf = Surf0Lookup::new(opts.response, geo.a, geo.kappa_d);
    let [c1, c2] = geo.cos_eta;
    let [s1, s2] = geo.sin_eta;
    let r = geo.r;
    let diag = opts.restriction == ModeRestriction::Diagonal;
    let s = direct_mode_sum::<3, _>(state, geo, charge, diag, |g| {
        let z1 = surf.get(g.l, g.k * c1);
        let z2 = surf.get(g.l_p, g.k * c2);
        let dn = (g.n - g.n_p) as f64 / r;
        [z1.v * z2.v, dn * s1 * z1.d * z2.v, -dn * s2 * z1.v * z2.d]
    })?;
    let scale = phys.prefactor * charge.line_density_scale.powi(2);
    let mut out = Components::<3>::zero();
    for c in 0..3 {
        out.values[c] = scale * s.values[c].re;
        out.imag_residual = out.imag_residual.max((scale * s.values[c].im).abs());
        out.truncation_estimate += (scale * s.truncation_estimate[c]).abs();
    }
    Ok(out)
}

/// Direct interaction E_dir,0 + E_dir,1 + E_dir,2 from the full mode sum.
pub fn e_dir_full(
    state: &BraidState,
    charge: &ChargeModel,
    phys: &PhysicalParams,
    trunc: &Truncation,
    opts: SumOptions,
) -> Result<Components<3>> {
    phys.validate()?;
    let geo = SumGeometry::new(state, phys.kappa_d, trunc)?;
    direct_components(state, &geo, charge, phys, opts)
}

/// Direct interaction in the diagonal approximation.
pub fn e_dir_diagonal(
    state: &BraidState,
    charge: &ChargeModel,
    phys: &PhysicalParams,
    trunc: &Truncation,
    response: ResponseModel,
) -> Result<Components<3>> {
    phys.validate()?;
    let geo = diagonal_geometry(state, phys.kappa_d, trunc)?;
    let opts = SumOptions { response, restriction: ModeRestriction::Diagonal };
    direct_components(state, &geo, charge, phys, opts)
}

/// ζ̃ for every image order l ∈ [-N', N'] at one (j', k_z).
type ImageRow = Arc<Vec<ResponsePair>>;

struct ImageRows<'a> {
    cache: &'a ResponseCache,
    params: ResponseParams,
    rod: Rod,
    n_image: i32,
    rows: HashMap<(i32, u64), ImageRow>,
}

impl<'a> ImageRows<'a> {
    fn row(&mut self, j_p: i32, k_z: f64) -> Result<ImageRow> {
        if let Some(r) = self.rows.get(&(j_p, k_z.to_bits())) {
            return Ok(r.clone());
        }
        let ni = self.n_image;
        let mut row = Vec::with_capacity((2 * ni + 1) as usize);
        for l in -ni..=ni {
            row.push(self.cache.get_or_compute(self.rod, l, j_p, k_z, &self.params)?);
        }
        let row = Arc::new(row);
        self.rows.insert((j_p, k_z.to_bits()), row.clone());
        Ok(row)
    }
}

/// Image terms for the charge induced on the partner of `source`.
///
/// Channels: leading term, rod-1 tilt slope, rod-2 tilt slope, and the
/// sin η · ζ̃_1,1 term.
/// ζ̃ carries the source rod's own dressing ζ_surf,0(j'); the k_z-slope of
/// that factor is grouped with the source rod's tilt, like the explicit
/// ζ_surf,0(l) factor, and only the remainder of dζ̃/dk_z goes with the
/// image rod's tilt.
fn image_components(
    source: Rod,
    state: &BraidState,
    geo: &SumGeometry,
    charge: &ChargeModel,
    phys: &PhysicalParams,
    opts: SumOptions,
    cache: &ResponseCache,
) -> Result<Components<4>> {
    if opts.response == ResponseModel::Uniform {
        return Ok(Components::zero());
    }
    let params = ResponseParams::new(geo.a, geo.r, geo.kappa_d, state.eta)?;
    let trunc = &geo.trunc;
    let nn = trunc.n_max as i32;
    let ni = trunc.n_image_max as i32;
    let pq = (2 * trunc.m_max + trunc.j_max) as i32;
    let diag = opts.restriction == ModeRestriction::Diagonal;
    let [c1, c2] = geo.cos_eta;
    let [s1, s2] = geo.sin_eta;
    let (sin_eta, cos_eta) = state.eta.sin_cos();
    let w = geo.omega_a1;
    let r = geo.r;
    let induced_on = match source {
        Rod::One => Rod::Two,
        Rod::Two => Rod::One,
    };
    let mut rows = ImageRows { cache, params, rod: induced_on, n_image: ni, rows: HashMap::new() };
    let mut surf = Surf0Lookup::new(opts.response, geo.a, geo.kappa_d);
    let mut tables: HashMap<u64, Arc<ModeTables>> = HashMap::new();
    let mut sums = [ComplexSum::new(); 4];
    let mut trunc_est = 0.0_f64;

    for n in -nn..=nn {
        for n_p in -nn..=nn {
            let sign = parity(n_p);
            let ring = n.abs() == nn || n_p.abs() == nn;
            let dn = (n - n_p) as f64 / r;
            // Order of the source helix mode.
            let (s_lo, s_hi) = match source {
                Rod::One => (-pq - n, pq - n),
                Rod::Two => (n_p - pq, n_p + pq),
            };
            for s_ord in s_lo..=s_hi {
                let zs = charge.zeta(s_ord);
                if zs == 0.0 {
                    continue;
                }
                let j_range = if diag {
                    if s_ord.abs() > ni {
                        continue;
                    }
                    -s_ord..=-s_ord
                } else {
                    -ni..=ni
                };
                for j_p in j_range {
                    let zj = charge.zeta(j_p);
                    if zj == 0.0 {
                        continue;
                    }
                    let (xi_rate, xi, c_src, c_img) = match source {
                        Rod::One => (geo.dxi[0], state.xi1, c1, c2),
                        Rod::Two => (geo.dxi[1], state.xi2, c2, c1),
                    };
                    let k = match source {
                        Rod::One => -0.5 * (s_ord - j_p) as f64 * xi_rate,
                        Rod::Two => -0.5 * (j_p - s_ord) as f64 * xi_rate,
                    } - 0.5 * (n + n_p) as f64 * w;
                    let kappa = k.hypot(geo.kappa_d);
                    let tab = tables.entry(k.to_bits()).or_insert_with(|| Arc::new(geo.tables(k, kappa))).clone();
                    let kv = tab.k_r.k(n_p - n);
                    let phase = Complex64::from_polar(1.0, (j_p + s_ord) as f64 * xi);
                    let base = sign * kv * zs * zj;
                    if !base.is_finite() {
                        return Err(Error::NonConvergence(format!("K_{}(Rκ) overflowed at κ = {kappa}", n_p - n)));
                    }
                    match source {
                        Rod::One => {
                            let (a1, _) = geo.addition_factor(&tab, 1, n, n + s_ord);
                            if a1 == 0.0 {
                                continue;
                            }
                            let src = surf.get(s_ord, -k * c_src);
                            let dress = surf.get(j_p, -k * c_img * cos_eta);
                            let row = rows.row(j_p, -k * c_img)?;
                            for l_p in -ni..=ni {
                                let q = n_p - l_p;
                                if q.abs() > pq {
                                    continue;
                                }
                                let (a2, _) = geo.addition_factor(&tab, 2, n_p, q);
                                if a2 == 0.0 {
                                    continue;
                                }
                                let img = &row[(l_p + ni) as usize];
                                let t = base * a1 * a2;
                                let own = img.dzeta10 - img.zeta10 * cos_eta * dress.d / dress.v;
                                let terms = [
                                    t * src.v * img.zeta10,
                                    -t * dn * s1 * img.zeta10 * (src.d + src.v * dress.d / dress.v),
                                    t * dn * s2 * src.v * own,
                                    t * sin_eta * src.v * img.zeta11,
                                ];
                                accumulate(&mut sums, &mut trunc_est, phase, &terms, ring || l_p.abs() == ni);
                            }
                        }
                        Rod::Two => {
                            let (a2, _) = geo.addition_factor(&tab, 2, n_p, n_p - s_ord);
                            if a2 == 0.0 {
                                continue;
                            }
                            let src = surf.get(s_ord, k * c_src);
                            let dress = surf.get(j_p, k * c_img * cos_eta);
                            let row = rows.row(j_p, k * c_img)?;
                            for l in -ni..=ni {
                                let p = n + l;
                                if p.abs() > pq {
                                    continue;
                                }
                                let (a1, _) = geo.addition_factor(&tab, 1, n, p);
                                if a1 == 0.0 {
                                    continue;
                                }
                                let img = &row[(l + ni) as usize];
                                let t = base * a1 * a2;
                                let own = img.dzeta10 - img.zeta10 * cos_eta * dress.d / dress.v;
                                let terms = [
                                    t * img.zeta10 * src.v,
                                    t * dn * s1 * own * src.v,
                                    -t * dn * s2 * img.zeta10 * (src.d + src.v * dress.d / dress.v),
                                    t * sin_eta * img.zeta11 * src.v,
                                ];
                                accumulate(&mut sums, &mut trunc_est, phase, &terms, ring || l.abs() == ni);
                            }
                        }
                    }
                }
            }
        }
    }
    let sigma = match source {
        Rod::One => geo.sigma[0],
        Rod::Two => geo.sigma[1],
    };
    let scale = phys.prefactor * charge.line_density_scale.powi(2) * sigma * sigma;
    Ok(Components::from_sums(&sums, trunc_est, scale))
}

#[inline]
/// The ζ̃_1,1 channel stems from an azimuthal derivative, so its weight
/// (n − n') carries a factor i.
fn accumulate(sums: &mut [ComplexSum; 4], trunc_est: &mut f64, phase: Complex64, terms: &[f64; 4], edge: bool) {
    for (c, (s, &t)) in sums.iter_mut().zip(terms).enumerate() {
        if t != 0.0 {
            let p = if c == 3 { phase * Complex64::i() } else { phase };
            s.add(p * t);
            if edge {
                *trunc_est += t.abs();
            }
        }
    }
}

/// Image terms from the full mode sum. `source` is the rod whose charge
/// induces the image on its partner.
pub fn e_img_full(
    source: Rod,
    state: &BraidState,
    charge: &ChargeModel,
    phys: &PhysicalParams,
    trunc: &Truncation,
    opts: SumOptions,
    cache: &ResponseCache,
) -> Result<Components<4>> {
    phys.validate()?;
    let geo = SumGeometry::new(state, phys.kappa_d, trunc)?;
    image_components(source, state, &geo, charge, phys, opts, cache)
}

/// Image terms in the diagonal approximation.
pub fn e_img_diagonal(
    source: Rod,
    state: &BraidState,
    charge: &ChargeModel,
    phys: &PhysicalParams,
    trunc: &Truncation,
    response: ResponseModel,
    cache: &ResponseCache,
) -> Result<Components<4>> {
    phys.validate()?;
    let geo = diagonal_geometry(state, phys.kappa_d, trunc)?;
    let opts = SumOptions { response, restriction: ModeRestriction::Diagonal };
    image_components(source, state, &geo, charge, phys, opts, cache)
}

/// Closed single and double sums valid for small η and small R ω_{A,3}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallAngleEnergy {
    /// (Ē_dir,0, Ē_dir,η, Ē_dir,ω).
    pub dir: [f64; 3],
    /// (Ē_img,0, Ē_img,η, Ē_img,ω) for images on rod 2 and on rod 1.
    pub img: [[f64; 3]; 2],
}

impl SmallAngleEnergy {
    pub fn total(&self) -> f64 {
        self.dir.iter().sum::<f64>() + self.img.iter().flatten().sum::<f64>()
    }
}

/// Small-angle energy forms. The image double sums run over |n'| ≤ n_image_max.
pub fn e_small_angle(
    state: &BraidState,
    charge: &ChargeModel,
    phys: &PhysicalParams,
    trunc: &Truncation,
) -> Result<SmallAngleEnergy> {
    phys.validate()?;
    trunc.validate()?;
    let freqs = rod_frequencies(state)?;
    let (w11, w21) = helix_frequencies(state, &freqs);
    let (a, r, kd) = (state.a, state.r, phys.kappa_d);
    if !(a > 0.0) {
        return Err(Error::Domain(format!("core radius must be positive, got {a}")));
    }
    let w3 = state.omega_a[2];
    let s = state.eta.sin();
    let dxi = state.xi1 - state.xi2;
    let xi_rate_diff = state.dxi1_ds - state.dxi2_ds;
    let nn = trunc.n_max as i32;
    let ni = trunc.n_image_max as i32;
    let sum_w = w11 + w21;

    let mut dir = [NeumaierSum::new(); 3];
    for n in -nn..=nn {
        let zz = charge.zeta(n) * charge.zeta(-n);
        if zz == 0.0 {
            continue;
        }
        let nf = n as f64;
        let kbar = -0.5 * nf * sum_w - 0.25 * nf * r * w3 * xi_rate_diff;
        let kap = kbar.hypot(kd);
        let x = a * kap;
        let kr = BesselKTable::new(1, r * kap);
        let ka = BesselKTable::new(n.unsigned_abs() as usize + 2, x);
        let kp = ka.k_prime(n);
        let base = zz * parity(n) * (nf * dxi).cos() / (x * x * kp * kp);
        dir[0].add(2.0 * base * kr.k(0));
        dir[1].add(s * nf * nf * sum_w * kr.k(1) * base / kap);
        let bracket = r * kr.k(1) + 2.0 * kr.k(0) * (1.0 / kap + a * ka.k_second(n) / kp);
        dir[2].add(-0.25 * r * w3 * xi_rate_diff * nf * nf * sum_w / kap * base * bracket);
    }

    let mut img = [[0.0; 3]; 2];
    for (mu, (&w_mu, &xi_rate, delta)) in
        [(&w11, &state.dxi1_ds, 1.0), (&w21, &state.dxi2_ds, -1.0)].into_iter().enumerate()
    {
        let mut acc = [NeumaierSum::new(); 3];
        for n in -nn..=nn {
            let zz = charge.zeta(n) * charge.zeta(-n);
            if zz == 0.0 {
                continue;
            }
            let nf = n as f64;
            let kap = (nf * w_mu).hypot(kd);
            let x = a * kap;
            let y = r * kap;
            let order_a = (n.unsigned_abs() as usize).max(ni as usize) + 3;
            let ia = BesselITable::new(ni as usize + 2, x);
            let ka = BesselKTable::new(order_a, x);
            let kr = BesselKTable::new(n.unsigned_abs() as usize + ni as usize + 2, y);
            let knp = ka.k_prime(n);
            let knpp = ka.k_second(n);
            let denom = x * x * knp * knp;
            let mut s0 = NeumaierSum::new();
            let mut sw = NeumaierSum::new();
            for np in -ni..=ni {
                let kk = kr.k(np - n);
                let kkp = kr.k_prime(np - n);
                let u = ia.i_prime(np);
                let up = ia.i_second(np);
                let kn = ka.k_prime(np);
                let knd = ka.k_second(np);
                s0.add(u * kk * kk / (kn * denom));
                let v = kn * denom;
                let vp = knd * denom + kn * (2.0 * x * knp * knp + 2.0 * x * x * knp * knpp);
                let g = u / v;
                let gp = (up * v - u * vp) / (v * v);
                sw.add(2.0 * r * kk * kkp * g + a * kk * kk * gp);
            }
            acc[0].add(-(1.0 + delta * r * w3) * zz * s0.value());
            if n != 0 && s != 0.0 {
                let om = omega_tilde_table(n, y, x)?;
                acc[1].add(a * w_mu * s * zz * nf * om.value / denom);
            }
            acc[2].add(-delta * 0.5 * r * w3 * xi_rate * zz * nf * nf * w_mu / kap * sw.value());
        }
        for c in 0..3 {
            img[mu][c] = acc[c].value();
        }
    }

    let scale = phys.prefactor * charge.line_density_scale.powi(2);
    let mut out = SmallAngleEnergy { dir: [0.0; 3], img: [[0.0; 3]; 2] };
    for c in 0..3 {
        out.dir[c] = scale * dir[c].value();
        out.img[0][c] = scale * img[0][c];
        out.img[1][c] = scale * img[1][c];
    }
    Ok(out)
}

/// Energy breakdown at the requested level.
pub fn energy_breakdown(
    state: &BraidState,
    charge: &ChargeModel,
    phys: &PhysicalParams,
    trunc: &Truncation,
    level: ApproxLevel,
    response: ResponseModel,
    cache: &ResponseCache,
) -> Result<EnergyBreakdown> {
    let mut warnings = Vec::new();
    if response == ResponseModel::Dielectric {
        warnings.extend(ResponseParams::new(state.a, state.r, phys.kappa_d, state.eta)?.warnings());
    }
    let incomplete = state.omega_a[2] != 0.0;
    match level {
        ApproxLevel::Full | ApproxLevel::Diagonal => {
            let (d, i1, i2) = if level == ApproxLevel::Full {
                let opts = SumOptions { response, restriction: ModeRestriction::All };
                (
                    e_dir_full(state, charge, phys, trunc, opts)?,
                    e_img_full(Rod::One, state, charge, phys, trunc, opts, cache)?,
                    e_img_full(Rod::Two, state, charge, phys, trunc, opts, cache)?,
                )
            } else {
                let dm = DiagonalModeParams::new(state, phys.omega_xi);
                let ratio = dm.validity_ratio();
                if ratio >= DIAGONAL_VALIDITY_LIMIT {
                    warnings.push(format!(
                        "helix phase rates differ from ω_ξ = {} by a fraction {ratio:.3}; diagonal modes may not dominate",
                        dm.omega_xi
                    ));
                }
                (
                    e_dir_diagonal(state, charge, phys, trunc, response)?,
                    e_img_diagonal(Rod::One, state, charge, phys, trunc, response, cache)?,
                    e_img_diagonal(Rod::Two, state, charge, phys, trunc, response, cache)?,
                )
            };
            Ok(EnergyBreakdown {
                approx_level: level,
                e_dir: d.values,
                e_img1: i1.values,
                e_img2: i2.values,
                imag_residual: d.imag_residual.max(i1.imag_residual).max(i2.imag_residual),
                truncation_estimate: d.truncation_estimate + i1.truncation_estimate + i2.truncation_estimate,
                omega_terms_incomplete: incomplete,
                warnings,
            })
        }
        ApproxLevel::SmallAngle => {
            let e = e_small_angle(state, charge, phys, trunc)?;
            let (img1, img2) = if response == ResponseModel::Uniform {
                ([0.0; 4], [0.0; 4])
            } else {
                (
                    [e.img[0][0], e.img[0][1], e.img[0][2], 0.0],
                    [e.img[1][0], e.img[1][1], e.img[1][2], 0.0],
                )
            };
            Ok(EnergyBreakdown {
                approx_level: level,
                e_dir: e.dir,
                e_img1: img1,
                e_img2: img2,
                imag_residual: 0.0,
                truncation_estimate: 0.0,
                omega_terms_incomplete: incomplete,
                warnings,
            })
        }
    }
}

/// The series Ω̃_n(x, y) evaluated in two algebraically equivalent forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaTilde {
    /// Σ_j K_{n+j+1}(x) K_{n+j}(x) / (y K_j'(y)²) [1 + 2j I_j'(y) K_j'(y) + j²/y²].
    pub value: f64,
    /// Σ_j K_{n+j+1}(x) K_{n+j}(x) [2 (j/y) I_j'/K_j' - d/dy (I_j'/K_j')].
    pub alternate: f64,
    /// |Σ (a_j - b_j)| / Σ |a_j|.
    pub residual: f64,
    pub terms: usize,
    /// Whether the tail fell below the relative tolerance before the order cap.
    pub converged: bool,
}

const OMEGA_REL_TOL: f64 = 1e-16;
const OMEGA_IDENTITY_TOL: f64 = 1e-9;

/// Ω̃_n(x, y) with x = Rκ, y = aκ. Terms are taken in reflected pairs
/// j = -n + t, j = -n - 1 - t so that the K products at x stay small.
/// The series converges for y < x; otherwise it is a partial sum at the
/// largest order the tables reach.
pub fn omega_tilde_table(n: i32, x: f64, y: f64) -> Result<OmegaTilde> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::Domain(format!("Ω̃ needs positive arguments, got x = {x}, y = {y}")));
    }
    let top = MAX_ORDER - 1;
    let iy = BesselITable::new(top, y);
    let ky = BesselKTable::new(top, y);
    let kx = BesselKTable::new(top, x);
    let term = |j: i32| -> (f64, f64) {
        let kk = kx.k(n + j + 1) * kx.k(n + j);
        let (ip, ipp) = (iy.i_prime(j), iy.i_second(j));
        let (kp, kpp) = (ky.k_prime(j), ky.k_second(j));
        let jf = j as f64;
        let a = kk / (y * kp * kp) * (1.0 + 2.0 * jf * ip * kp + jf * jf / (y * y));
        let b = kk * (2.0 * jf / y * ip / kp - (ipp * kp - ip * kpp) / (kp * kp));
        (a, b)
    };
    let mut va = NeumaierSum::new();
    let mut vb = NeumaierSum::new();
    let mut diff = NeumaierSum::new();
    let mut mag = 0.0;
    let mut terms = 0;
    let mut converged = false;
    let mut quiet = 0;
    let mut t = 0;
    loop {
        let js = [-n + t, -n - 1 - t];
        if js.iter().any(|j| j.unsigned_abs() as usize + 2 > top) {
            break;
        }
        let mut pair = 0.0;
        for &j in &js {
            let (a, b) = term(j);
            va.add(a);
            vb.add(b);
            diff.add(a - b);
            mag += a.abs();
            pair += a.abs();
            terms += 1;
        }
        if !pair.is_finite() {
            break;
        }
        if t >= 2 && pair <= OMEGA_REL_TOL * va.value().abs() {
            quiet += 1;
            if quiet >= 2 {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
        t += 1;
    }
    let residual = if mag > 0.0 { diff.value().abs() / mag } else { 0.0 };
    if !(residual <= OMEGA_IDENTITY_TOL) {
        return Err(Error::Identity(format!(
            "Ω̃_{n}({x}, {y}): forms differ by {residual:e} relative"
        )));
    }
    Ok(OmegaTilde { value: va.value(), alternate: vb.value(), residual, terms, converged })
}

/// |LHS - RHS| of the identity that turns the (n - n') weighted image product
/// into a difference of shifted Bessel products.
pub fn identity_10_13_check(n: i32, n_p: i32, a: f64, r: f64, kappa: f64) -> f64 {
    let x = a * kappa;
    let y = r * kappa;
    let top = (n.unsigned_abs().max(n_p.unsigned_abs()) as usize) + 2;
    let ia = BesselITable::new(top, x);
    let ky = BesselKTable::new((n_p - n).unsigned_abs() as usize + 2, y);
    let d = n_p - n;
    let lhs = (n - n_p) as f64 / y
        * (a * (ia.i_prime(n) * ia.i(n_p) + ia.i(n) * ia.i_prime(n_p)) * ky.k(d)
            + r * ia.i(n_p) * ia.i(n) * ky.k_prime(d));
    let rhs = 0.5
        * a
        * (ia.i(n) * (ia.i(n_p - 1) * ky.k(d - 1) - ia.i(n_p + 1) * ky.k(d + 1))
            + ia.i(n_p) * (ia.i(n + 1) * ky.k(d - 1) - ia.i(n - 1) * ky.k(d + 1)));
    (lhs - rhs).abs()
}
