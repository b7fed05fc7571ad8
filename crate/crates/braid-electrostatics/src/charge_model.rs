//! Azimuthal Fourier description of the surface charge carried by each rod.
//!
//! A radial distribution σ_rad(t) around the rod, measured from the helix
//! direction v̂_μ, is expanded as σ_rad(t) = (1/2π) Σ_n ζ_n e^{-i n t}, so that
//! ζ_n = ∫_0^{2π} σ_rad(t) e^{i n t} dt. A single helical line (a delta
//! function at t = 0) has ζ_n = 1 for every n and a uniformly smeared charge
//! of the same total has ζ_n = δ_{n,0}.
//!
//! In the mode sums the rod-1 term with phase e^{i l ξ_1} is weighted by ζ_l and
//! the rod-2 term with phase e^{i l' ξ_2} by ζ_{l'}.

use crate::error::{Error, Result};
use crate::special_functions::MAX_ORDER;

/// Fourier coefficients ζ_n for |n| <= n_max; zero beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargeModel {
    zeta: Vec<f64>,
    n_max: usize,
    /// Charge per unit length in units of e/l_c (1 in reduced units).
    pub line_density_scale: f64,
}

impl ChargeModel {
    /// Build from ζ_{-n_max}, ..., ζ_{n_max} in order.
    pub fn from_symmetric_range(values: Vec<f64>) -> Result<Self> {
        if values.len() % 2 != 1 {
            return Err(Error::Domain("coefficient range must have odd length".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("charge coefficients must be finite".into()));
        }
        let n_max = values.len() / 2;
        if n_max > MAX_ORDER {
            return Err(Error::Domain(format!("charge spectrum order {n_max} exceeds {MAX_ORDER}")));
        }
        Ok(Self { zeta: values, n_max, line_density_scale: 1.0 })
    }

    /// Build from explicit (n, ζ_n) pairs; unspecified orders are zero.
    pub fn from_table(entries: &[(i32, f64)]) -> Result<Self> {
        let n_max = entries.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0);
        let mut values = vec![0.0; 2 * n_max + 1];
        for &(n, z) in entries {
            values[(n + n_max as i32) as usize] = z;
        }
        Self::from_symmetric_range(values)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    #[inline]
    pub fn zeta(&self, n: i32) -> f64 {
        if n.unsigned_abs() as usize > self.n_max {
            0.0
        } else {
            self.zeta[(n + self.n_max as i32) as usize]
        }
    }

    /// max |ζ_n|.
    pub fn max_abs(&self) -> f64 {
        self.zeta.iter().fold(0.0_f64, |m, z| m.max(z.abs()))
    }

    /// True when ζ_{-n} = ζ_n for all stored orders.
    pub fn is_even(&self) -> bool {
        (1..=self.n_max as i32).all(|n| self.zeta(n) == self.zeta(-n))
    }

    /// True when only ζ_0 is nonzero, i.e. the charge is azimuthally uniform.
    pub fn is_uniform(&self) -> bool {
        (1..=self.n_max as i32).all(|n| self.zeta(n) == 0.0 && self.zeta(-n) == 0.0)
    }
}

/// One helical line of charge: ζ_n = 1 for |n| <= 64.
pub fn single_helix() -> ChargeModel {
    ChargeModel { zeta: vec![1.0; 2 * MAX_ORDER + 1], n_max: MAX_ORDER, line_density_scale: 1.0 }
}

/// Partially neutralised phosphate backbone.
///
/// Two phosphate strands at ±φ̃_s carry -1/2 each. A fraction θ of that charge
/// is compensated by counterions: θ f1 in the minor groove (at v̂_μ), θ f2 in
/// the major groove (opposite it), the rest smeared uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DnaParams {
    pub theta: f64,
    pub f1: f64,
    pub f2: f64,
    pub phi_s: f64,
}

impl DnaParams {
    pub fn new(theta: f64, f1: f64, f2: f64, phi_s: f64) -> Result<Self> {
        let p = Self { theta, f1, f2, phi_s };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.theta) || !unit(self.f1) || !unit(self.f2) || self.f1 + self.f2 > 1.0 {
            return Err(Error::Domain(format!(
                "DNA parameters need θ, f1, f2 in [0, 1] and f1 + f2 <= 1, got {self:?}"
            )));
        }
        if !self.phi_s.is_finite() {
            return Err(Error::Domain("φ̃_s must be finite".into()));
        }
        Ok(())
    }

    /// Bound on |ζ_n|: 1 + θ(1 + f1 + f2).
    pub fn zeta_bound(&self) -> f64 {
        1.0 + self.theta * (1.0 + self.f1 + self.f2)
    }

    /// The distribution as point lines plus a uniform background.
    pub fn radial(&self) -> RadialDistribution {
        let smeared = self.theta * (1.0 - self.f1 - self.f2);
        RadialDistribution {
            uniform: smeared,
            smooth: None,
            lines: vec![
                (-0.5, self.phi_s),
                (-0.5, -self.phi_s),
                (self.theta * self.f1, 0.0),
                (self.theta * self.f2, std::f64::consts::PI),
            ],
        }
    }
}

/// ζ_n = δ_{n,0} θ(1 - f1 - f2) + θ f1 + (-1)^n θ f2 - cos(n φ̃_s).
/// At n = 0 the groove terms recombine with the smeared charge, so the
/// monopole is returned as θ − 1 without the rounding of the three parts.
pub fn dna_coefficients(p: &DnaParams, n: i32) -> f64 {
    if n == 0 {
        return p.theta - 1.0;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    p.theta * p.f1 + sign * p.theta * p.f2 - (n as f64 * p.phi_s).cos()
}

/// DNA charge model for |n| <= n_max.
pub fn dna_model(p: &DnaParams, n_max: usize) -> Result<ChargeModel> {
    p.validate()?;
    let n = n_max as i32;
    ChargeModel::from_symmetric_range((-n..=n).map(|k| dna_coefficients(p, k)).collect())
}

/// A radial charge profile: a uniform part with total charge `uniform`,
/// delta-function lines (weight, angle), and an optional smooth density.
pub struct RadialDistribution {
    pub uniform: f64,
    pub lines: Vec<(f64, f64)>,
    pub smooth: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for RadialDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialDistribution")
            .field("uniform", &self.uniform)
            .field("lines", &self.lines)
            .field("smooth", &self.smooth.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl RadialDistribution {
    pub fn uniform(total: f64) -> Self {
        Self { uniform: total, lines: Vec::new(), smooth: None }
    }

    pub fn line(weight: f64, angle: f64) -> Self {
        Self { uniform: 0.0, lines: vec![(weight, angle)], smooth: None }
    }

    pub fn smooth<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self { uniform: 0.0, lines: Vec::new(), smooth: Some(Box::new(f)) }
    }
}

/// Periodic trapezoid rule for ∫_0^{2π} f(t) cos(n t) dt and ∫ f(t) sin(n t) dt,
/// doubling the node count until both stabilise.
fn smooth_coefficient(f: &dyn Fn(f64) -> f64, n: i32) -> Result<(f64, f64)> {
    use std::f64::consts::TAU;
    let eval = |nodes: usize| {
        let h = TAU / nodes as f64;
        let mut c = crate::sum::NeumaierSum::new();
        let mut s = crate::sum::NeumaierSum::new();
        for k in 0..nodes {
            let t = k as f64 * h;
            let v = f(t);
            c.add(v * (n as f64 * t).cos());
            s.add(v * (n as f64 * t).sin());
        }
        (h * c.value(), h * s.value())
    };
    let mut nodes = 64;
    let mut prev = eval(nodes);
    while nodes < 1 << 20 {
        nodes *= 2;
        let next = eval(nodes);
        let change = (next.0 - prev.0).abs().max((next.1 - prev.1).abs());
        if change <= 1e-13 * (1.0 + next.0.abs().max(next.1.abs())) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConvergence(format!("Fourier quadrature of order {n} did not settle")))
}

/// ζ_n for |n| <= n_max. Lines and the uniform part enter in closed form;
/// only the smooth part is integrated numerically. The coefficients must be
/// real (imaginary parts above 1e-12 are rejected).
pub fn coefficients_from_radial(dist: &RadialDistribution, n_max: usize) -> Result<ChargeModel> {
    let nm = n_max as i32;
    let mut values = Vec::with_capacity(2 * n_max + 1);
    for n in -nm..=nm {
        let mut re = if n == 0 { dist.uniform } else { 0.0 };
        let mut im = 0.0;
        for &(w, angle) in &dist.lines {
            re += w * (n as f64 * angle).cos();
            im += w * (n as f64 * angle).sin();
        }
        if let Some(f) = &dist.smooth {
            let (c, s) = smooth_coefficient(f.as_ref(), n)?;
            re += c;
            im += s;
        }
        if im.abs() > 1e-12 * (1.0 + re.abs()) {
            return Err(Error::Domain(format!("distribution has complex coefficient at n = {n} (Im = {im:e})")));
        }
        values.push(re);
    }
    ChargeModel::from_symmetric_range(values)
}
