//! Real-space check of the mode sums: both helices of a straight, regular,
//! symmetric braid are sampled as point charges and the screened Coulomb
//! energy is summed pair by pair.

use rayon::prelude::*;

use crate::braid_geometry::{axpy, norm, rod_frequencies, scale, sub, BraidState, Vec3};
use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Largest sample spacing accepted, in units of 1/κ_D.
pub const MAX_SPACING: f64 = 0.02;
/// Length trimmed from each end before forming the per-length energy, in 1/κ_D.
pub const EDGE_LENGTH: f64 = 8.0;
/// Pair separations beyond this (in 1/κ_D) are skipped.
pub const CUTOFF: f64 = 40.0;

/// Point samples of one helix at uniform braid-axis spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedHelix {
    pub points: Vec<Vec3>,
    /// Axial position of each sample.
    pub s: Vec<f64>,
    /// Charge per sample, σ_μ Δs (unit line density along the rod centreline).
    pub weight: f64,
    /// Rod centreline point at each sample, for diagnostics.
    pub centreline: Vec<Vec3>,
}

/// Frame of a straight regular braid: the axis is ẑ and d̂ turns about it at
/// the constant rate ω_{A,1}. Returns (d̂, ê_2, n̂_1, n̂_2).
fn closed_form_frame(state: &BraidState, s: f64) -> (Vec3, Vec3, Vec3, Vec3) {
    let (sn, cs) = (state.omega_a[0] * s).sin_cos();
    let d = [cs, sn, 0.0];
    let e2 = [-sn, cs, 0.0];
    let t = state.tilts();
    let (s1, c1) = t.eta1.sin_cos();
    let (s2, c2) = t.eta2.sin_cos();
    let n1 = axpy(c1, e2, [0.0, 0.0, -s1]);
    let n2 = axpy(c2, e2, [0.0, 0.0, s2]);
    (d, e2, n1, n2)
}

/// Sample both helices over [0, length] with braid-axis spacing ds.
///
/// Only straight regular braids are supported: constant η, ω_{A,2} = ω_{A,3} = 0,
/// constant helix rates. Lengths are in the same units as 1/κ_D.
pub fn discretize_braid(
    state: &BraidState,
    kappa_d: f64,
    length: f64,
    ds: f64,
) -> Result<(DiscretizedHelix, DiscretizedHelix)> {
    state.validate()?;
    if !(ds > 0.0) || ds * kappa_d > MAX_SPACING + 1e-12 {
        return Err(Error::StepSize(format!("sample spacing {ds} must be in (0, {MAX_SPACING}/κ_D]")));
    }
    if state.omega_a[1] != 0.0 || state.omega_a[2] != 0.0 || state.deta_ds != 0.0 {
        return Err(Error::Domain("the oracle needs a straight, regular, symmetric braid".into()));
    }
    if !(length > 0.0) {
        return Err(Error::Domain(format!("braid length must be positive, got {length}")));
    }
    let freqs = rod_frequencies(state)?;
    let count = (length / ds).round() as usize;
    let mut h1 = DiscretizedHelix { points: Vec::with_capacity(count), s: Vec::with_capacity(count), weight: freqs.sigma1 * ds, centreline: Vec::with_capacity(count) };
    let mut h2 = DiscretizedHelix { points: Vec::with_capacity(count), s: Vec::with_capacity(count), weight: freqs.sigma2 * ds, centreline: Vec::with_capacity(count) };
    let half_r = 0.5 * state.r;
    for i in 0..count {
        let s = (i as f64 + 0.5) * ds;
        let (d, _, n1, n2) = closed_form_frame(state, s);
        let axis = [0.0, 0.0, s];
        let c1 = axpy(-half_r, d, axis);
        let c2 = axpy(half_r, d, axis);
        let xi1 = state.xi1 + state.dxi1_ds * s;
        let xi2 = state.xi2 + state.dxi2_ds * s;
        let v1 = axpy(xi1.cos(), d, scale(xi1.sin(), n1));
        let v2 = axpy(xi2.cos(), d, scale(xi2.sin(), n2));
        h1.points.push(axpy(state.a, v1, c1));
        h2.points.push(axpy(state.a, v2, c2));
        h1.centreline.push(c1);
        h2.centreline.push(c2);
        h1.s.push(s);
        h2.s.push(s);
    }
    Ok((h1, h2))
}

/// Block size of the parallel reduction; fixed so that results do not depend
/// on the thread count.
const BLOCK: usize = 256;

/// Screened Coulomb energy per unit axial length.
///
/// Sums w_i w_j e^{-κ r}/r over pairs whose rod-1 sample lies in the central
/// span (8/κ_D trimmed from each end) and divides by the span length. Pairs
/// beyond 40/κ_D are skipped.
pub fn yukawa_energy(h1: &DiscretizedHelix, h2: &DiscretizedHelix, kappa_d: f64) -> Result<f64> {
    let (Some(&first), Some(&last)) = (h1.s.first(), h1.s.last()) else {
        return Err(Error::Domain("empty helix".into()));
    };
    let lo = first + EDGE_LENGTH / kappa_d;
    let hi = last - EDGE_LENGTH / kappa_d;
    if !(hi > lo) {
        return Err(Error::Domain(format!(
            "helix of length {} too short for the {EDGE_LENGTH}/κ_D end trim",
            last - first
        )));
    }
    let central: Vec<usize> = (0..h1.points.len()).filter(|&i| h1.s[i] >= lo && h1.s[i] <= hi).collect();
    let cutoff = CUTOFF / kappa_d;
    let ds = if h1.s.len() > 1 { h1.s[1] - h1.s[0] } else { 1.0 };
    let reach = (cutoff / ds).ceil() as usize + 1;
    let partials: Vec<Result<f64>> = central
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut acc = NeumaierSum::new();
            for &i in chunk {
                let p = h1.points[i];
                let j_lo = i.saturating_sub(reach);
                let j_hi = (i + reach + 1).min(h2.points.len());
                for j in j_lo..j_hi {
                    let r = norm(sub(p, h2.points[j]));
                    if r < 1e-9 {
                        return Err(Error::Domain(format!("helices overlap: sample pair ({i}, {j}) at distance {r:e}")));
                    }
                    if r > cutoff {
                        continue;
                    }
                    acc.add((-kappa_d * r).exp() / r);
                }
            }
            Ok(acc.value())
        })
        .collect();
    let mut total = NeumaierSum::new();
    for p in partials {
        total.add(p?);
    }
    let span = central.len() as f64 * ds;
    Ok(total.value() * h1.weight * h2.weight / span)
}

/// Oracle per-length energy of a straight regular braid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub energy: f64,
    pub samples_per_rod: usize,
}

/// Discretise and sum in one call.
pub fn oracle_energy(state: &BraidState, kappa_d: f64, length: f64, ds: f64) -> Result<OracleResult> {
    let (h1, h2) = discretize_braid(state, kappa_d, length, ds)?;
    Ok(OracleResult { energy: yukawa_energy(&h1, &h2, kappa_d)?, samples_per_rod: h1.points.len() })
}
