//! Local kinematics of a two-rod braid.
//!
//! The braid axis r_A(s) is parameterised by its own arc length s. The rods
//! sit at r_1 = r_A - (R/2) d̂ and r_2 = r_A + (R/2) d̂, tilted by η_1 and η_2
//! away from the axis tangent t̂_A in opposite senses. Rod 1 carries
//! δ = +1 and rod 2 carries δ = -1 throughout.
//!
//! Every vector lives in the lab frame; `T = T_β T_α T_φ0` maps the local
//! basis (d̂, ·, t̂_A) onto it.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Below this value of sin η the per-rod formulas switch to their η → 0 limits.
pub const SMALL_TILT: f64 = 1e-6;

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn axpy(alpha: f64, x: Vec3, y: Vec3) -> Vec3 {
    [alpha * x[0] + y[0], alpha * x[1] + y[1], alpha * x[2] + y[2]]
}

#[inline]
pub fn scale(alpha: f64, x: Vec3) -> Vec3 {
    [alpha * x[0], alpha * x[1], alpha * x[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn determinant(m: &Mat3) -> f64 {
    dot(m[0], cross(m[1], m[2]))
}

/// Reduce an angle to (-π, π].
pub fn reduce_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let r = (x + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

/// Orientation of the braid axis (α, β) and of d̂ about it (φ_0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub alpha: f64,
    pub beta: f64,
    pub phi0: f64,
}

impl EulerAngles {
    pub fn new(alpha: f64, beta: f64, phi0: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && phi0.is_finite()) {
            return Err(Error::Domain("Euler angles must be finite".into()));
        }
        Ok(Self { alpha: reduce_angle(alpha), beta: reduce_angle(beta), phi0: reduce_angle(phi0) })
    }
}

/// T_β T_α T_φ0.
pub fn rotation_frame(angles: &EulerAngles) -> Mat3 {
    let (sa, ca) = angles.alpha.sin_cos();
    let (sb, cb) = angles.beta.sin_cos();
    let (sp, cp) = angles.phi0.sin_cos();
    let t_alpha = [[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]];
    let t_beta = [[cb, 0.0, -sb], [0.0, 1.0, 0.0], [sb, 0.0, cb]];
    let t_phi = [[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(&t_beta, &mat_mul(&t_alpha, &t_phi))
}

/// Tilt of each rod tangent away from the braid axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltPair {
    pub eta1: f64,
    pub eta2: f64,
}

impl TiltPair {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        use std::f64::consts::FRAC_PI_2;
        if !(0.0..FRAC_PI_2).contains(&eta1) || !(0.0..FRAC_PI_2).contains(&eta2) {
            return Err(Error::Domain(format!("tilts must lie in [0, π/2), got ({eta1}, {eta2})")));
        }
        Ok(Self { eta1, eta2 })
    }

    pub fn eta(&self) -> f64 {
        self.eta1 + self.eta2
    }

    pub fn delta_eta(&self) -> f64 {
        self.eta1 - self.eta2
    }
}

/// Arc-length factors σ_μ = |dr_μ/ds| from the tilts alone.
pub fn sigma_from_tilts(tilts: TiltPair) -> Result<(f64, f64)> {
    let s = tilts.eta().sin();
    if s.abs() < 1e-12 {
        if tilts.eta1 == tilts.eta2 {
            return Ok((1.0, 1.0));
        }
        return Err(Error::Degenerate(format!(
            "η1 + η2 vanishes with η1 ≠ η2 ({}, {})",
            tilts.eta1, tilts.eta2
        )));
    }
    Ok((2.0 * tilts.eta2.sin() / s, 2.0 * tilts.eta1.sin() / s))
}

/// Tilt asymmetry Δη = η1 - η2 = arcsin(-R ω_{A,3} sin η / 2).
pub fn delta_eta(eta: f64, omega_a3: f64, r: f64) -> Result<f64> {
    let arg = -0.5 * r * omega_a3 * eta.sin();
    if !(arg.abs() <= 1.0) {
        return Err(Error::Domain(format!("|R ω_A3 sin η / 2| = {} exceeds 1", arg.abs())));
    }
    Ok(arg.asin())
}

/// Rotation rate of d̂ about the braid axis, fixed by η and ω_{A,3}.
///
/// Written as -(2/R)[tan(η/2) - R² ω3² sin η / (4 (1 + sqrt(1 - y²/4)))], y = R ω3 sin η,
/// which is algebraically the same as -(2/(R sin η))(sqrt(1 - y²/4) - cos η) but has
/// no cancellation as η → 0.
pub fn omega_a1(eta: f64, omega_a3: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("R must be positive, got {r}")));
    }
    if !(0.0..std::f64::consts::PI).contains(&eta) {
        return Err(Error::Domain(format!("η must lie in [0, π), got {eta}")));
    }
    let y = r * omega_a3 * eta.sin();
    let disc = 1.0 - 0.25 * y * y;
    if disc < 0.0 {
        return Err(Error::Domain(format!("negative discriminant 1 - (R ω_A3 sin η)²/4 = {disc}")));
    }
    let root = disc.sqrt();
    Ok(-(2.0 / r) * ((0.5 * eta).tan() - r * r * omega_a3 * omega_a3 * eta.sin() / (4.0 * (1.0 + root))))
}

/// The half-angle pair (C, S) = (cos(Δη/2), sin(Δη/2)) with sin Δη = -x/2.
///
/// For x >= 0 this is C = sqrt((sqrt(1 - x²/4) + 1)/2), S = -sqrt((1 - sqrt(1 - x²/4))/2);
/// S is continued as an odd function for x < 0 so that it stays equal to sin(Δη/2).
pub fn half_angle_cs(x: f64) -> (f64, f64) {
    let root = (1.0 - 0.25 * x * x).max(0.0).sqrt();
    let c = (0.5 * (root + 1.0)).sqrt();
    // 1 - root computed without cancellation
    let one_minus_root = 0.25 * x * x / (1.0 + root);
    let s = -(0.5 * one_minus_root).sqrt();
    (c, if x < 0.0 { -s } else { s })
}

/// Local braid configuration at one axial station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BraidState {
    /// Inter-axial distance.
    pub r: f64,
    /// Rod radius.
    pub a: f64,
    /// Total tilt η = η1 + η2.
    pub eta: f64,
    pub deta_ds: f64,
    /// (ω_{A,1}, ω_{A,2}, ω_{A,3}); ω_{A,1} must satisfy [`omega_a1`].
    pub omega_a: [f64; 3],
    pub domega_a3_ds: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub dxi1_ds: f64,
    pub dxi2_ds: f64,
}

impl BraidState {
    /// Regular braid with the given tilt and axis frequencies; ω_{A,1} is
    /// derived, helix phases start at zero.
    pub fn new(r: f64, a: f64, eta: f64, omega_a2: f64, omega_a3: f64) -> Result<Self> {
        let state = Self {
            r,
            a,
            eta,
            deta_ds: 0.0,
            omega_a: [omega_a1(eta, omega_a3, r)?, omega_a2, omega_a3],
            domega_a3_ds: 0.0,
            xi1: 0.0,
            xi2: 0.0,
            dxi1_ds: 0.0,
            dxi2_ds: 0.0,
        };
        state.validate()?;
        Ok(state)
    }

    /// Symmetric, regular, straight braid (ω_{A,2} = ω_{A,3} = 0).
    pub fn symmetric(r: f64, a: f64, eta: f64) -> Result<Self> {
        Self::new(r, a, eta, 0.0, 0.0)
    }

    pub fn with_helix(mut self, xi1: f64, xi2: f64, dxi1_ds: f64, dxi2_ds: f64) -> Self {
        self.xi1 = xi1;
        self.xi2 = xi2;
        self.dxi1_ds = dxi1_ds;
        self.dxi2_ds = dxi2_ds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.r, self.a, self.eta, self.deta_ds, self.domega_a3_ds, self.xi1, self.xi2, self.dxi1_ds, self.dxi2_ds]
            .iter()
            .chain(self.omega_a.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("braid state contains non-finite values".into()));
        }
        if !(self.a >= 0.0) {
            return Err(Error::Domain(format!("rod radius must be non-negative, got {}", self.a)));
        }
        if !(self.r > 2.0 * self.a) {
            return Err(Error::NonPenetrating { r: self.r, two_a: 2.0 * self.a });
        }
        if !(0.0..std::f64::consts::PI).contains(&self.eta) {
            return Err(Error::Domain(format!("η must lie in [0, π), got {}", self.eta)));
        }
        if (self.r * self.omega_a[2] * self.eta.sin()).abs() > 2.0 {
            return Err(Error::Domain("|R ω_A3 sin η| must not exceed 2".into()));
        }
        let expected = omega_a1(self.eta, self.omega_a[2], self.r)?;
        if (expected - self.omega_a[0]).abs() > 1e-12 * (1.0 + expected.abs()) {
            return Err(Error::Domain(format!(
                "ω_A1 = {} inconsistent with η and ω_A3 (expected {expected})",
                self.omega_a[0]
            )));
        }
        Ok(())
    }

    pub fn delta_eta(&self) -> f64 {
        (-0.5 * self.r * self.omega_a[2] * self.eta.sin()).clamp(-1.0, 1.0).asin()
    }

    pub fn tilts(&self) -> TiltPair {
        let d = self.delta_eta();
        TiltPair { eta1: 0.5 * (self.eta + d), eta2: 0.5 * (self.eta - d) }
    }
}

/// Per-rod frequencies (index 0 = rod 1, 1 = rod 2, 2 = axis) and arc-length factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BraidFrequencies {
    pub omega: [[f64; 3]; 3],
    pub sigma1: f64,
    pub sigma2: f64,
}

impl BraidFrequencies {
    pub fn sigma(&self, rod: usize) -> f64 {
        match rod {
            1 => self.sigma1,
            2 => self.sigma2,
            _ => 1.0,
        }
    }

    /// Max |ω| over all components.
    pub fn max_rate(&self) -> f64 {
        self.omega.iter().flatten().fold(0.0_f64, |m, w| m.max(w.abs()))
    }
}

const DELTA: [f64; 2] = [1.0, -1.0];

/// ω_{μ,1..3} for both rods, and σ_μ from the rod frequencies.
pub fn rod_frequencies(state: &BraidState) -> Result<BraidFrequencies> {
    state.validate()?;
    let [wa1, wa2, wa3] = state.omega_a;
    let r = state.r;
    let eta = state.eta;
    let sin_eta = eta.sin();
    let h = 0.5 * eta;
    let (sh, ch) = h.sin_cos();
    let x = r * sin_eta * wa3;
    let (c, s) = half_angle_cs(x);
    let cos_delta_eta = (1.0 - 0.25 * x * x).max(0.0).sqrt();
    let deta_term = r * (wa3 * state.deta_ds * eta.cos() + state.domega_a3_ds * sin_eta) / (4.0 * cos_delta_eta);

    let mut omega = [[0.0; 3]; 3];
    omega[2] = state.omega_a;
    for (mu, &d) in DELTA.iter().enumerate() {
        // prefactor sin η / (2 sin(η/2) C - 2δ cos(η/2) S) = 1/σ_μ
        let inv_sigma = if sin_eta < SMALL_TILT {
            1.0 / (1.0 + 0.5 * d * r * wa3)
        } else {
            sin_eta / (2.0 * sh * c - 2.0 * d * ch * s)
        };
        let cos_mu = c * ch - d * s * sh;
        let sin_mu = d * sh * c + s * ch;
        omega[mu][0] = inv_sigma * (cos_mu * wa1 + sin_mu * wa3);
        omega[mu][2] = inv_sigma * (cos_mu * wa3 - sin_mu * wa1);
        omega[mu][1] = inv_sigma * (wa2 - 0.5 * d * state.deta_ds + deta_term);
    }
    let sigma1 = 1.0 / (0.25 * (r * omega[0][0]).powi(2) + (1.0 - 0.5 * r * omega[0][2]).powi(2)).sqrt();
    let sigma2 = 1.0 / (0.25 * (r * omega[1][0]).powi(2) + (1.0 + 0.5 * r * omega[1][2]).powi(2)).sqrt();
    Ok(BraidFrequencies { omega, sigma1, sigma2 })
}

/// Rates ω̃_{μ,1} = ω_{μ,1} + ξ_μ'/σ_μ at which each helix turns about its rod.
pub fn helix_frequencies(state: &BraidState, freqs: &BraidFrequencies) -> (f64, f64) {
    (
        freqs.omega[0][0] + state.dxi1_ds / freqs.sigma1,
        freqs.omega[1][0] + state.dxi2_ds / freqs.sigma2,
    )
}

/// First-order expansion in R ω_{A,3} of the quantities above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallTwistExpansion {
    pub omega_a1: f64,
    pub sin_eta_mu: [f64; 2],
    pub sigma: [f64; 2],
    pub omega_mu1: [f64; 2],
    pub omega_mu2: [f64; 2],
    pub omega_mu3: [f64; 2],
}

/// Expansion of the exact kinematics to first order in R ω_{A,3}.
pub fn small_twist_expansion(state: &BraidState) -> SmallTwistExpansion {
    let [_, wa2, wa3] = state.omega_a;
    let r = state.r;
    let eta = state.eta;
    let (sh, ch) = (0.5 * eta).sin_cos();
    let sin_eta = eta.sin();
    let tan_h = (0.5 * eta).tan();
    let omega_a1 = -2.0 * tan_h / r;
    let mut out = SmallTwistExpansion {
        omega_a1,
        sin_eta_mu: [0.0; 2],
        sigma: [0.0; 2],
        omega_mu1: [0.0; 2],
        omega_mu2: [0.0; 2],
        omega_mu3: [0.0; 2],
    };
    for (mu, &d) in DELTA.iter().enumerate() {
        let damp = 1.0 - 0.5 * d * r * wa3 * ch * ch;
        out.sin_eta_mu[mu] = sh - 0.25 * d * r * wa3 * ch * sin_eta;
        out.sigma[mu] = 1.0 / ch + 0.5 * d * r * wa3 * ch;
        out.omega_mu1[mu] = ch * (d * sh * wa3 + omega_a1 * (damp * ch + 0.25 * d * r * sin_eta * wa3 * sh));
        out.omega_mu3[mu] = ch * (ch * wa3 - omega_a1 * (damp * sh * d - 0.25 * r * sin_eta * wa3 * ch));
        out.omega_mu2[mu] = ch
            * ((wa2 - 0.5 * d * state.deta_ds) * damp
                + 0.25 * r * (wa3 * state.deta_ds * eta.cos() + state.domega_a3_ds * sin_eta));
    }
    out
}

/// Braid frame at one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSet {
    pub d_hat: Vec3,
    pub t1_hat: Vec3,
    pub t2_hat: Vec3,
    pub ta_hat: Vec3,
    pub n1_hat: Vec3,
    pub n2_hat: Vec3,
}

impl FrameSet {
    /// Frame from the axis orientation and the rod tilts.
    pub fn from_angles(angles: &EulerAngles, tilts: TiltPair) -> Self {
        let t = rotation_frame(angles);
        let (s1, c1) = tilts.eta1.sin_cos();
        let (s2, c2) = tilts.eta2.sin_cos();
        Self {
            d_hat: mat_vec(&t, [1.0, 0.0, 0.0]),
            ta_hat: mat_vec(&t, [0.0, 0.0, 1.0]),
            t1_hat: mat_vec(&t, [0.0, s1, c1]),
            t2_hat: mat_vec(&t, [0.0, -s2, c2]),
            n1_hat: mat_vec(&t, [0.0, c1, -s1]),
            n2_hat: mat_vec(&t, [0.0, c2, s2]),
        }
    }

    /// Rebuild t̂_A and n̂_μ from d̂, t̂_1, t̂_2 and the arc-length factors.
    pub fn from_core(d_hat: Vec3, t1_hat: Vec3, t2_hat: Vec3, sigma1: f64, sigma2: f64) -> Self {
        let ta = axpy(0.5 * sigma1, t1_hat, scale(0.5 * sigma2, t2_hat));
        Self {
            d_hat,
            t1_hat,
            t2_hat,
            ta_hat: scale(1.0 / norm(ta), ta),
            n1_hat: cross(t1_hat, d_hat),
            n2_hat: cross(t2_hat, d_hat),
        }
    }

    /// Helix direction v̂_μ = cos ξ d̂ + sin ξ n̂_μ.
    pub fn helix_direction(&self, rod: usize, xi: f64) -> Vec3 {
        let n = if rod == 1 { self.n1_hat } else { self.n2_hat };
        axpy(xi.cos(), self.d_hat, scale(xi.sin(), n))
    }

    /// Largest deviation from unit norms, mutual orthogonality of each rod
    /// triad, and n̂_μ = t̂_μ × d̂.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for v in [self.d_hat, self.t1_hat, self.t2_hat, self.ta_hat, self.n1_hat, self.n2_hat] {
            worst = worst.max((norm(v) - 1.0).abs());
        }
        for (t, n) in [(self.t1_hat, self.n1_hat), (self.t2_hat, self.n2_hat)] {
            worst = worst.max(dot(t, self.d_hat).abs()).max(dot(n, self.d_hat).abs()).max(dot(n, t).abs());
            worst = worst.max(norm(sub(n, cross(t, self.d_hat))));
        }
        worst = worst.max(dot(self.ta_hat, self.d_hat).abs());
        worst
    }
}

/// Output of [`integrate_frames`].
#[derive(Debug, Clone)]
pub struct FrameTrajectory {
    pub s: Vec<f64>,
    pub frames: Vec<FrameSet>,
    pub r1: Vec<Vec3>,
    pub r2: Vec<Vec3>,
    /// max_s | |r_1 - r_2| - R |.
    pub max_separation_drift: f64,
    /// Largest [`FrameSet::orthonormality_defect`] along the path.
    pub max_frame_defect: f64,
}

/// Relative separation drift above which [`integrate_frames`] rejects the step size.
pub const SEPARATION_DRIFT_TOL: f64 = 1e-6;

type State15 = [f64; 15];

fn rhs(y: &State15, f: &BraidFrequencies) -> State15 {
    let d = [y[0], y[1], y[2]];
    let t1 = [y[3], y[4], y[5]];
    let t2 = [y[6], y[7], y[8]];
    let n1 = cross(t1, d);
    let n2 = cross(t2, d);
    let [w1, w2] = [f.omega[0], f.omega[1]];
    let (s1, s2) = (f.sigma1, f.sigma2);
    let dd = scale(s1, axpy(w1[0], n1, scale(-w1[2], t1)));
    let dt1 = scale(s1, axpy(w1[2], d, scale(-w1[1], n1)));
    let dt2 = scale(s2, axpy(w2[2], d, scale(-w2[1], n2)));
    let dr1 = scale(s1, t1);
    let dr2 = scale(s2, t2);
    let mut out = [0.0; 15];
    for (k, v) in [dd, dt1, dt2, dr1, dr2].iter().enumerate() {
        out[3 * k..3 * k + 3].copy_from_slice(v);
    }
    out
}

fn add_scaled(y: &State15, h: f64, k: &State15) -> State15 {
    let mut out = *y;
    for (o, kk) in out.iter_mut().zip(k) {
        *o += h * kk;
    }
    out
}

/// Integrate the frame equations dd̂/ds = σ_1(ω_{1,1} n̂_1 - ω_{1,3} t̂_1),
/// dt̂_μ/ds = σ_μ(ω_{μ,3} d̂ - ω_{μ,2} n̂_μ), dr_μ/ds = σ_μ t̂_μ with classical RK4.
///
/// The rods start at ∓(R/2) d̂. No projection is applied; the separation
/// drift is monitored and reported.
pub fn integrate_frames<F>(initial: &FrameSet, r: f64, freqs: F, length: f64, step: f64) -> Result<FrameTrajectory>
where
    F: Fn(f64) -> BraidFrequencies,
{
    if !(step > 0.0) || !(length >= 0.0) {
        return Err(Error::Domain(format!("need step > 0 and length >= 0, got {step}, {length}")));
    }
    let f0 = freqs(0.0);
    let max_rate = f0.max_rate() * f0.sigma1.max(f0.sigma2);
    if step * max_rate >= 0.01 {
        return Err(Error::StepSize(format!(
            "step {step} too large for rate {max_rate}; need step < 0.01/max|ω|"
        )));
    }
    let n_steps = (length / step).ceil() as usize;
    let h = if n_steps == 0 { 0.0 } else { length / n_steps as f64 };

    let mut y: State15 = [0.0; 15];
    y[0..3].copy_from_slice(&initial.d_hat);
    y[3..6].copy_from_slice(&initial.t1_hat);
    y[6..9].copy_from_slice(&initial.t2_hat);
    y[9..12].copy_from_slice(&scale(-0.5 * r, initial.d_hat));
    y[12..15].copy_from_slice(&scale(0.5 * r, initial.d_hat));

    let mut traj = FrameTrajectory {
        s: Vec::with_capacity(n_steps + 1),
        frames: Vec::with_capacity(n_steps + 1),
        r1: Vec::with_capacity(n_steps + 1),
        r2: Vec::with_capacity(n_steps + 1),
        max_separation_drift: 0.0,
        max_frame_defect: 0.0,
    };
    let record = |s: f64, y: &State15, f: &BraidFrequencies, traj: &mut FrameTrajectory| {
        let frame = FrameSet::from_core(
            [y[0], y[1], y[2]],
            [y[3], y[4], y[5]],
            [y[6], y[7], y[8]],
            f.sigma1,
            f.sigma2,
        );
        let r1 = [y[9], y[10], y[11]];
        let r2 = [y[12], y[13], y[14]];
        traj.max_separation_drift = traj.max_separation_drift.max((norm(sub(r1, r2)) - r).abs());
        traj.max_frame_defect = traj.max_frame_defect.max(frame.orthonormality_defect());
        traj.s.push(s);
        traj.frames.push(frame);
        traj.r1.push(r1);
        traj.r2.push(r2);
    };
    record(0.0, &y, &f0, &mut traj);
    for i in 0..n_steps {
        let s = i as f64 * h;
        let fa = freqs(s);
        let fm = freqs(s + 0.5 * h);
        let fb = freqs(s + h);
        let k1 = rhs(&y, &fa);
        let k2 = rhs(&add_scaled(&y, 0.5 * h, &k1), &fm);
        let k3 = rhs(&add_scaled(&y, 0.5 * h, &k2), &fm);
        let k4 = rhs(&add_scaled(&y, h, &k3), &fb);
        for j in 0..15 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        record(s + h, &y, &fb, &mut traj);
    }
    if traj.max_separation_drift > SEPARATION_DRIFT_TOL * r {
        return Err(Error::StepSize(format!(
            "separation drift {:e} exceeds {:e} R",
            traj.max_separation_drift, SEPARATION_DRIFT_TOL
        )));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn identity_rotation() {
        let m = rotation_frame(&EulerAngles::new(0.0, 0.0, 0.0).unwrap());
        assert_eq!(m, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn quarter_turn_about_axis() {
        let m = rotation_frame(&EulerAngles::new(0.0, 0.0, FRAC_PI_2).unwrap());
        let v = mat_vec(&m, [1.0, 0.0, 0.0]);
        assert!(norm(sub(v, [0.0, 1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn angles_are_reduced() {
        let a = EulerAngles::new(3.0 * PI, -PI, 7.0).unwrap();
        assert_eq!(a.alpha, PI);
        assert_eq!(a.beta, PI);
        assert!((a.phi0 - (7.0 - 2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_sigma() {
        let t = TiltPair::new(15f64.to_radians(), 15f64.to_radians()).unwrap();
        let (s1, s2) = sigma_from_tilts(t).unwrap();
        assert!((s1 - 1.035_276_180_410_083).abs() < 1e-12);
        assert_eq!(s1, s2);
        assert_eq!(sigma_from_tilts(TiltPair::new(0.0, 0.0).unwrap()).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn delta_eta_examples() {
        assert_eq!(delta_eta(0.7, 0.0, 2.0).unwrap(), 0.0);
        assert!((delta_eta(FRAC_PI_2, 0.2, 1.0).unwrap() - (-0.1f64).asin()).abs() < 1e-15);
        assert!(delta_eta(FRAC_PI_2, 3.0, 1.0).is_err());
    }

    #[test]
    fn omega_a1_examples() {
        assert!((omega_a1(FRAC_PI_2, 0.0, 2.0).unwrap() + 1.0).abs() < 1e-15);
        let eta = 1e-4;
        assert!((omega_a1(eta, 0.0, 3.0).unwrap() + eta / 3.0).abs() < 1e-12);
        assert_eq!(omega_a1(0.0, 0.3, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn half_angle_pair_is_unit() {
        for &x in &[-1.9, -0.3, 0.0, 0.5, 2.0] {
            let (c, s) = half_angle_cs(x);
            assert!((c * c + s * s - 1.0).abs() < 1e-15);
            let d = (-0.5 * x).asin();
            assert!((s - (0.5 * d).sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_overlapping_rods() {
        assert!(matches!(BraidState::symmetric(1.0, 0.6, 0.2), Err(Error::NonPenetrating { .. })));
    }
}
