//! Interaction energy of two helical line charges in a uniform screened medium.
//!
//! The six-fold sum over (n, n', m, m', j, j') depends on (m, j) only through
//! p = 2m - j and on (m', j') only through q = 2m' + j' as far as the axial
//! wavenumber and the phase are concerned. The sum is therefore evaluated as
//! an outer loop over (n, n', p, q), each group carrying one wavenumber k and
//! one phase e^{i(l ξ_1 + l' ξ_2)} with l = p - n and l' = n' - q, times two
//! short inner sums over m and m'.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::braid_geometry::{rod_frequencies, BraidState};
use crate::charge_model::{single_helix, ChargeModel};
use crate::error::{Error, Result};
use crate::params::{PhysicalParams, Truncation};
use crate::special_functions::{BesselITable, BesselJTable, BesselKTable};
use crate::sum::ComplexSum;

/// The six summation indices of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub n: i32,
    pub n_p: i32,
    pub m: i32,
    pub m_p: i32,
    pub j: i32,
    pub j_p: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeWavenumber {
    pub k: f64,
    pub kappa: f64,
}

/// Axial wavenumber picked out by the τ' integration, in terms of the grouped
/// indices p = 2m - j and q = 2m' + j'.
#[inline]
pub(crate) fn grouped_wavenumber(state: &BraidState, n: i32, n_p: i32, p: i32, q: i32) -> f64 {
    let w = state.omega_a[0];
    let (x1, x2) = (state.dxi1_ds, state.dxi2_ds);
    -0.5 * (n as f64 * (w - x1) + n_p as f64 * (w - x2) + p as f64 * x1 + q as f64 * x2)
}

/// k of a mode and κ = sqrt(k² + κ_D²).
pub fn mode_wavenumber(idx: &ModeIndex, state: &BraidState, kappa_d: f64) -> ModeWavenumber {
    let k = grouped_wavenumber(state, idx.n, idx.n_p, 2 * idx.m - idx.j, 2 * idx.m_p + idx.j_p);
    ModeWavenumber { k, kappa: k.hypot(kappa_d) }
}

/// Indices shared by every term of one (n, n', p, q) group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGroup {
    pub n: i32,
    pub n_p: i32,
    /// Azimuthal order of the rod-1 helix mode, p - n.
    pub l: i32,
    /// Azimuthal order of the rod-2 helix mode, n' - q.
    pub l_p: i32,
    pub k: f64,
    pub kappa: f64,
}

/// Bessel values needed by all groups sharing one wavenumber.
pub(crate) struct ModeTables {
    pub k_r: BesselKTable,
    i1_minus: BesselITable,
    i1_plus: BesselITable,
    i2_minus: BesselITable,
    i2_plus: BesselITable,
    j1: BesselJTable,
    j2: BesselJTable,
}

/// Per-evaluation geometry constants.
pub(crate) struct SumGeometry {
    pub r: f64,
    pub a: f64,
    pub kappa_d: f64,
    pub cos_eta: [f64; 2],
    pub sin_eta: [f64; 2],
    pub sigma: [f64; 2],
    /// ω_{A,1} entering the wavenumbers.
    pub omega_a1: f64,
    /// (dξ1/dτ, dξ2/dτ).
    pub dxi: [f64; 2],
    pub trunc: Truncation,
}

impl SumGeometry {
    pub fn new(state: &BraidState, kappa_d: f64, trunc: &Truncation) -> Result<Self> {
        trunc.validate()?;
        let freqs = rod_frequencies(state)?;
        let tilts = state.tilts();
        Ok(Self {
            r: state.r,
            a: state.a,
            kappa_d,
            cos_eta: [tilts.eta1.cos(), tilts.eta2.cos()],
            sin_eta: [tilts.eta1.sin(), tilts.eta2.sin()],
            sigma: [freqs.sigma1, freqs.sigma2],
            omega_a1: state.omega_a[0],
            dxi: [state.dxi1_ds, state.dxi2_ds],
            trunc: *trunc,
        })
    }

    /// k of the (n, n', p, q) group.
    #[inline]
    pub fn wavenumber(&self, n: i32, n_p: i32, p: i32, q: i32) -> f64 {
        let w = self.omega_a1;
        let [x1, x2] = self.dxi;
        -0.5 * (n as f64 * (w - x1) + n_p as f64 * (w - x2) + p as f64 * x1 + q as f64 * x2)
    }

    pub fn tables(&self, k: f64, kappa: f64) -> ModeTables {
        let t = &self.trunc;
        let i_order = t.n_max + t.m_max;
        let ak = 0.5 * self.a * kappa;
        ModeTables {
            k_r: BesselKTable::new(2 * t.n_max.max(t.n_image_max) + 2, self.r * kappa),
            i1_minus: BesselITable::new(i_order, ak * (1.0 - self.cos_eta[0])),
            i1_plus: BesselITable::new(i_order, ak * (1.0 + self.cos_eta[0])),
            i2_minus: BesselITable::new(i_order, ak * (1.0 - self.cos_eta[1])),
            i2_plus: BesselITable::new(i_order, ak * (1.0 + self.cos_eta[1])),
            j1: BesselJTable::new(t.j_max, self.a * k * self.sin_eta[0]),
            j2: BesselJTable::new(t.j_max, self.a * k * self.sin_eta[1]),
        }
    }

    /// Σ_m I_{n-m} I_m J_{2m-p} for rod 1 (sign = +1) or
    /// Σ_m' I_{n'-m'} I_{m'} J_{q-2m'} for rod 2 (sign = -1).
    /// Returns (sum, contribution of terms on the m or j cap).
    pub fn addition_factor(&self, tab: &ModeTables, rod: usize, n: i32, pq: i32) -> (f64, f64) {
        let (im, ip, jt) = if rod == 1 {
            (&tab.i1_minus, &tab.i1_plus, &tab.j1)
        } else {
            (&tab.i2_minus, &tab.i2_plus, &tab.j2)
        };
        let mm = self.trunc.m_max as i32;
        let jm = self.trunc.j_max as i32;
        let mut total = 0.0;
        let mut edge = 0.0;
        for m in -mm..=mm {
            let j = if rod == 1 { 2 * m - pq } else { pq - 2 * m };
            if j.abs() > jm {
                continue;
            }
            let jv = jt.j(j);
            if jv == 0.0 {
                continue;
            }
            let term = im.i(n - m) * ip.i(m) * jv;
            total += term;
            if m.abs() == mm || j.abs() == jm {
                edge += term.abs();
            }
        }
        (total, edge)
    }
}

/// Result of one weighted pass over the direct mode sum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DirectSum<const C: usize> {
    pub values: [Complex64; C],
    pub truncation_estimate: [f64; C],
}

/// 2 σ1 σ2 Σ (-1)^{n'} K_{n'-n}(Rκ) A_1 A_2 ζ_l ζ_{l'} e^{i(l ξ1 + l' ξ2)} × w(group),
/// with C independent weight channels. Loop order n, n', p, q is fixed.
/// With `diagonal_only` only groups with l' = -l are kept.
pub(crate) fn direct_mode_sum<const C: usize, W>(
    state: &BraidState,
    geo: &SumGeometry,
    charge: &ChargeModel,
    diagonal_only: bool,
    mut weight: W,
) -> Result<DirectSum<C>>
where
    W: FnMut(&ModeGroup) -> [f64; C],
{
    let trunc = &geo.trunc;
    let kappa_d = geo.kappa_d;
    let nn = trunc.n_max as i32;
    let pq_max = (2 * trunc.m_max + trunc.j_max) as i32;
    let mut cache: HashMap<u64, Arc<ModeTables>> = HashMap::new();
    let mut sums = [ComplexSum::new(); C];
    let mut trunc_est = [0.0_f64; C];
    let pref = 2.0 * geo.sigma[0] * geo.sigma[1];

    for n in -nn..=nn {
        for n_p in -nn..=nn {
            let sign = if n_p % 2 == 0 { 1.0 } else { -1.0 };
            let ring = n.abs() == nn || n_p.abs() == nn;
            for p in -pq_max..=pq_max {
                let l = p - n;
                let zl = charge.zeta(l);
                if zl == 0.0 {
                    continue;
                }
                for q in -pq_max..=pq_max {
                    let l_p = n_p - q;
                    if diagonal_only && l_p != -l {
                        continue;
                    }
                    let zlp = charge.zeta(l_p);
                    if zlp == 0.0 {
                        continue;
                    }
                    let k = geo.wavenumber(n, n_p, p, q);
                    let kappa = k.hypot(kappa_d);
                    let tab = cache.entry(k.to_bits()).or_insert_with(|| Arc::new(geo.tables(k, kappa))).clone();
                    let (a1, e1) = geo.addition_factor(&tab, 1, n, p);
                    if a1 == 0.0 {
                        continue;
                    }
                    let (a2, e2) = geo.addition_factor(&tab, 2, n_p, q);
                    if a2 == 0.0 {
                        continue;
                    }
                    let kv = tab.k_r.k(n_p - n);
                    let base = pref * sign * kv * zl * zlp;
                    if !base.is_finite() {
                        return Err(Error::NonConvergence(format!(
                            "K_{}(Rκ) overflowed at κ = {kappa}",
                            n_p - n
                        )));
                    }
                    let phase = Complex64::from_polar(1.0, l as f64 * state.xi1 + l_p as f64 * state.xi2);
                    let group = ModeGroup { n, n_p, l, l_p, k, kappa };
                    let w = weight(&group);
                    let term = base * a1 * a2;
                    let edge = base.abs() * (e1 * a2.abs() + e2 * a1.abs() + e1 * e2);
                    for c in 0..C {
                        if w[c] == 0.0 {
                            continue;
                        }
                        sums[c].add(phase * (term * w[c]));
                        trunc_est[c] += edge * w[c].abs();
                        if ring {
                            trunc_est[c] += (term * w[c]).abs();
                        }
                    }
                }
            }
        }
    }
    let mut values = [Complex64::new(0.0, 0.0); C];
    for c in 0..C {
        values[c] = sums[c].value();
    }
    Ok(DirectSum { values, truncation_estimate: trunc_est })
}

/// Energy per unit braid length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDensity {
    pub value: f64,
    /// |Im| of the complex mode sum before the real part was taken.
    pub imag_residual: f64,
    /// Sum of |terms| on the outer index caps.
    pub truncation_estimate: f64,
}

impl EnergyDensity {
    /// True when the discarded imaginary part is below 1e-10 of the value.
    pub fn is_real(&self) -> bool {
        self.imag_residual <= 1e-10 * self.value.abs().max(f64::MIN_POSITIVE)
    }
}

/// Energy density for a single helical line of charge on each rod.
pub fn energy_density_nocore(state: &BraidState, phys: &PhysicalParams, trunc: &Truncation) -> Result<EnergyDensity> {
    energy_density_nocore_with_charge(state, phys, trunc, &single_helix())
}

/// Energy density with a general helical charge spectrum on both rods.
pub fn energy_density_nocore_with_charge(
    state: &BraidState,
    phys: &PhysicalParams,
    trunc: &Truncation,
    charge: &ChargeModel,
) -> Result<EnergyDensity> {
    phys.validate()?;
    let geo = SumGeometry::new(state, phys.kappa_d, trunc)?;
    let s = direct_mode_sum::<1, _>(state, &geo, charge, false, |_| [1.0])?;
    let scale = phys.prefactor * charge.line_density_scale.powi(2);
    Ok(EnergyDensity {
        value: scale * s.values[0].re,
        imag_residual: (scale * s.values[0].im).abs(),
        truncation_estimate: (scale * s.truncation_estimate[0]).abs(),
    })
}

/// Integrated energy over a τ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalEnergy {
    pub value: f64,
    pub densities: Vec<EnergyDensity>,
    /// Grid-resolution diagnostics (density jumps above 10% between nodes).
    pub warnings: Vec<String>,
}

/// Trapezoidal integral of a density over strictly increasing nodes.
pub(crate) fn trapezoid(taus: &[f64], values: &[f64]) -> f64 {
    let mut acc = crate::sum::NeumaierSum::new();
    for i in 1..taus.len() {
        acc.add(0.5 * (taus[i] - taus[i - 1]) * (values[i] + values[i - 1]));
    }
    acc.value()
}

pub(crate) fn resolution_warnings(taus: &[f64], values: &[f64]) -> Vec<String> {
    let mut out = Vec::new();
    for i in 1..values.len() {
        let (a, b) = (values[i - 1], values[i]);
        let scale = a.abs().max(b.abs());
        if scale > 0.0 && (b - a).abs() > 0.1 * scale {
            out.push(format!(
                "density changes by {:.1}% between τ = {} and τ = {}; refine the grid",
                100.0 * (b - a).abs() / scale,
                taus[i - 1],
                taus[i]
            ));
        }
    }
    out
}

pub(crate) fn check_grid(taus: &[f64], n_states: usize) -> Result<()> {
    if taus.len() != n_states {
        return Err(Error::Domain(format!("{} τ nodes for {n_states} states", taus.len())));
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("τ nodes must be strictly increasing".into()));
    }
    Ok(())
}

/// ∫ dτ of the no-core density by the trapezoid rule. Nodes are evaluated in
/// parallel; the reduction runs in node order.
pub fn total_energy_nocore(
    taus: &[f64],
    states: &[BraidState],
    phys: &PhysicalParams,
    trunc: &Truncation,
) -> Result<TotalEnergy> {
    check_grid(taus, states.len())?;
    let densities = states
        .par_iter()
        .map(|s| energy_density_nocore(s, phys, trunc))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = densities.iter().map(|d| d.value).collect();
    Ok(TotalEnergy {
        value: trapezoid(taus, &values),
        warnings: resolution_warnings(taus, &values),
        densities,
    })
}
