//! Run front end: config files, parameter sweeps, landscape minimisation and
//! the report writers behind the `braid-scan` binary.
//!
//! Configs are `key = value` lines with dotted section prefixes. `#` starts a
//! comment. Angles are in radians.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::braid_geometry::BraidState;
use crate::charge_model::{dna_model, single_helix, ChargeModel, DnaParams};
use crate::energy_dielectric::{
    energy_breakdown, identity_10_13_check, omega_tilde_table, ApproxLevel, DiagonalModeParams, EnergyBreakdown,
    ResponseModel,
};
use crate::energy_nocore::energy_density_nocore;
use crate::error::{Error, Result};
use crate::oracle::oracle_energy;
use crate::params::{PhysicalParams, Truncation};
use crate::special_functions::{
    graf_i_residual, graf_j_residual, jacobi_anger_residual, recurrence_residuals, wronskian_residual,
};
use crate::surface_response::{zeta_surf0, ResponseCache, ResponseParams};

/// Quantity varied along a sweep axis or by the minimiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameter {
    Eta,
    R,
    KappaD,
    OmegaA3,
    /// ξ1 − ξ2, applied by moving ξ1 with ξ2 held at its configured value.
    XiPhase,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Eta => "eta",
            Parameter::R => "R",
            Parameter::KappaD => "kappa_D",
            Parameter::OmegaA3 => "omega_A3",
            Parameter::XiPhase => "xi_phase",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eta" => Ok(Parameter::Eta),
            "R" => Ok(Parameter::R),
            "kappa_D" => Ok(Parameter::KappaD),
            "omega_A3" => Ok(Parameter::OmegaA3),
            "xi_phase" => Ok(Parameter::XiPhase),
            other => Err(Error::Domain(format!(
                "unknown parameter '{other}' (expected eta, R, kappa_D, omega_A3 or xi_phase)"
            ))),
        }
    }
}

/// Evenly spaced values of one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    pub parameter: Parameter,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChargeSpec {
    SingleHelix,
    Dna { params: DnaParams, n_max: usize },
    Table(Vec<(i32, f64)>),
}

impl ChargeSpec {
    pub fn build(&self) -> Result<ChargeModel> {
        match self {
            ChargeSpec::SingleHelix => Ok(single_helix()),
            ChargeSpec::Dna { params, n_max } => dna_model(params, *n_max),
            ChargeSpec::Table(t) => ChargeModel::from_table(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub length: f64,
    pub ds: f64,
    /// Relative difference reported as agreement.
    pub tolerance: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { length: 60.0, ds: 0.01, tolerance: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeSettings {
    pub bounds: BTreeMap<&'static str, (f64, f64)>,
    pub max_iterations: usize,
    /// Simplex diameter (or bracket width) relative to the bounds span.
    pub tolerance: f64,
    /// Relative spread of evaluated energies below which the landscape is flat.
    pub flat_tolerance: f64,
}

impl MinimizeSettings {
    pub fn bounds_of(&self, p: Parameter) -> Result<(f64, f64)> {
        self.bounds
            .get(p.name())
            .copied()
            .ok_or_else(|| Error::Domain(format!("no minimisation bounds for {p}")))
    }
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub physical: PhysicalParams,
    pub geometry: BraidState,
    pub charge: ChargeSpec,
    pub sweep: SweepAxis,
    pub approx_level: ApproxLevel,
    pub response: ResponseModel,
    pub truncation: Truncation,
    pub output_dir: PathBuf,
    pub oracle: OracleSettings,
    pub minimize: MinimizeSettings,
    /// The text the config was parsed from.
    pub source: String,
}

// ------------------------------------------------------------------ parsing

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::Config { line, msg: format!("expected 'key = value', got '{body}'") })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(Error::Config { line, msg: format!("empty key or value in '{body}'") });
            }
            if let Some((first, _)) = map.insert(k.to_string(), (line, v.to_string())) {
                return Err(Error::Config { line, msg: format!("key '{k}' already set on line {first}") });
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn line_of(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |e| e.0)
    }

    fn parsed<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config { line, msg: format!("cannot parse '{v}' for {key}") }),
        }
    }

    fn float(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((k, (line, _))) => Err(Error::Config { line, msg: format!("unknown key '{k}'") }),
        }
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::Config { line, msg: other.to_string() },
    }
}

fn parse_table(line: usize, v: &str) -> Result<Vec<(i32, f64)>> {
    v.split(',')
        .map(|item| {
            let (n, z) = item
                .split_once(':')
                .ok_or_else(|| Error::Config { line, msg: format!("table entry '{item}' is not 'n:zeta'") })?;
            let n = n.trim().parse().map_err(|_| Error::Config { line, msg: format!("bad order '{n}'") })?;
            let z = z.trim().parse().map_err(|_| Error::Config { line, msg: format!("bad coefficient '{z}'") })?;
            Ok((n, z))
        })
        .collect()
}

/// Read and validate a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parse and validate config text. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut e = Entries::parse(text)?;

    let mut physical = PhysicalParams::new(e.float("physical.kappa_d", 1.0)?).map_err(|x| at_line(0, x))?;
    physical.prefactor = e.float("physical.prefactor", 1.0)?;
    physical.omega_xi = e.float("physical.omega_xi", 0.0)?;
    physical.validate()?;

    let geometry_line = e.line_of("geometry.R");
    let r = e.float("geometry.R", 3.0)?;
    let a = e.float("geometry.a", 1.0)?;
    let eta = e.float("geometry.eta", 0.0)?;
    let w2 = e.float("geometry.omega_A2", 0.0)?;
    let w3 = e.float("geometry.omega_A3", 0.0)?;
    let helix = [
        e.float("geometry.xi1", 0.0)?,
        e.float("geometry.xi2", 0.0)?,
        e.float("geometry.dxi1", 0.0)?,
        e.float("geometry.dxi2", 0.0)?,
    ];
    let geometry = BraidState::new(r, a, eta, w2, w3)
        .map_err(|x| at_line(geometry_line, x))?
        .with_helix(helix[0], helix[1], helix[2], helix[3]);

    let charge_line = e.line_of("charge.model");
    let model = e.take("charge.model").map_or("single_helix".to_string(), |x| x.1);
    let charge = match model.as_str() {
        "single_helix" => ChargeSpec::SingleHelix,
        "dna" => {
            let params = DnaParams::new(
                e.float("charge.theta", 0.0)?,
                e.float("charge.f1", 0.0)?,
                e.float("charge.f2", 0.0)?,
                e.float("charge.phi_s", 0.4 * std::f64::consts::PI)?,
            )
            .map_err(|x| at_line(charge_line, x))?;
            ChargeSpec::Dna { params, n_max: e.parsed("charge.n_max")?.unwrap_or(16) }
        }
        "table" => {
            let (line, v) = e
                .take("charge.zeta")
                .ok_or_else(|| Error::Config { line: charge_line, msg: "table model needs charge.zeta".into() })?;
            ChargeSpec::Table(parse_table(line, &v)?)
        }
        other => {
            return Err(Error::Config {
                line: charge_line,
                msg: format!("unknown charge model '{other}' (single_helix, dna or table)"),
            })
        }
    };
    charge.build().map_err(|x| at_line(charge_line, x))?;

    let approx_level = match e.take("approx_level") {
        None => ApproxLevel::Full,
        Some((line, v)) => v.parse().map_err(|x| at_line(line, x))?,
    };
    let response = match e.take("response") {
        None => ResponseModel::Dielectric,
        Some((_, v)) if v == "dielectric" => ResponseModel::Dielectric,
        Some((_, v)) if v == "uniform" => ResponseModel::Uniform,
        Some((line, v)) => {
            return Err(Error::Config { line, msg: format!("unknown response '{v}' (dielectric or uniform)") })
        }
    };

    let defaults = Truncation::default();
    let truncation = Truncation {
        n_max: e.parsed("truncation.n_max")?.unwrap_or(defaults.n_max),
        m_max: e.parsed("truncation.m_max")?.unwrap_or(defaults.m_max),
        j_max: e.parsed("truncation.j_max")?.unwrap_or(defaults.j_max),
        n_image_max: e.parsed("truncation.n_image_max")?.unwrap_or(defaults.n_image_max),
        series: defaults.series,
    };
    truncation.validate()?;

    let sweep_line = e.line_of("sweep.parameter");
    let sweep = match e.take("sweep.parameter") {
        None => SweepAxis { parameter: Parameter::Eta, min: eta, max: eta, count: 1 },
        Some((line, v)) => {
            let parameter: Parameter = v.parse().map_err(|x| at_line(line, x))?;
            let min = e.parsed("sweep.min")?.ok_or(Error::Config { line, msg: "sweep needs sweep.min".into() })?;
            let max = e.parsed("sweep.max")?.ok_or(Error::Config { line, msg: "sweep needs sweep.max".into() })?;
            let count = e.parsed("sweep.count")?.unwrap_or(1);
            if count == 0 || !(max >= min) {
                return Err(Error::Config { line, msg: format!("need count >= 1 and max >= min, got {count}, [{min}, {max}]") });
            }
            SweepAxis { parameter, min, max, count }
        }
    };

    let output_dir = PathBuf::from(e.take("output_dir").map_or("runs".to_string(), |x| x.1));
    let oracle = OracleSettings {
        length: e.float("oracle.length", OracleSettings::default().length)?,
        ds: e.float("oracle.ds", OracleSettings::default().ds)?,
        tolerance: e.float("oracle.tolerance", OracleSettings::default().tolerance)?,
    };

    let mut bounds = BTreeMap::new();
    let r_lo = (2.0 * a).max(1.0 / physical.kappa_d) * 1.05;
    for (p, lo, hi) in [
        (Parameter::Eta, 0.0, 1.2),
        (Parameter::R, r_lo, (3.0 * r).max(2.0 * r_lo)),
        (Parameter::XiPhase, 0.0, 2.0 * std::f64::consts::PI),
    ] {
        let line = e.line_of(&format!("minimize.{p}_min"));
        let lo = e.float(&format!("minimize.{p}_min"), lo)?;
        let hi = e.float(&format!("minimize.{p}_max"), hi)?;
        if !(hi > lo) {
            return Err(Error::Config { line, msg: format!("minimisation bounds for {p} need max > min") });
        }
        bounds.insert(p.name(), (lo, hi));
    }
    let minimize = MinimizeSettings {
        bounds,
        max_iterations: e.parsed("minimize.max_iterations")?.unwrap_or(500),
        tolerance: e.float("minimize.tolerance", 1e-6)?,
        flat_tolerance: e.float("minimize.flat_tolerance", 1e-9)?,
    };
    e.finish()?;

    let cfg = RunConfig {
        physical,
        geometry,
        charge,
        sweep,
        approx_level,
        response,
        truncation,
        output_dir,
        oracle,
        minimize,
        source: text.to_string(),
    };
    for v in cfg.sweep.values() {
        cfg.point(&[(cfg.sweep.parameter, v)]).map_err(|x| at_line(sweep_line, x))?;
    }
    Ok(cfg)
}

impl RunConfig {
    /// Geometry and physical parameters with the given overrides applied,
    /// validated for the configured response model.
    pub fn point(&self, overrides: &[(Parameter, f64)]) -> Result<(BraidState, PhysicalParams)> {
        let g = &self.geometry;
        let (mut r, mut eta, mut w3, mut xi1) = (g.r, g.eta, g.omega_a[2], g.xi1);
        let mut phys = self.physical;
        for &(p, v) in overrides {
            match p {
                Parameter::Eta => eta = v,
                Parameter::R => r = v,
                Parameter::KappaD => phys.kappa_d = v,
                Parameter::OmegaA3 => w3 = v,
                Parameter::XiPhase => xi1 = g.xi2 + v,
            }
        }
        phys.validate()?;
        let state = BraidState::new(r, g.a, eta, g.omega_a[1], w3)?.with_helix(xi1, g.xi2, g.dxi1_ds, g.dxi2_ds);
        if self.response == ResponseModel::Dielectric {
            ResponseParams::new(state.a, state.r, phys.kappa_d, state.eta)?;
        }
        Ok((state, phys))
    }

    /// Energy breakdown at one parameter point.
    pub fn evaluate(&self, charge: &ChargeModel, overrides: &[(Parameter, f64)]) -> Result<EnergyBreakdown> {
        let (state, phys) = self.point(overrides)?;
        energy_breakdown(&state, charge, &phys, &self.truncation, self.approx_level, self.response, &ResponseCache::new())
    }

    /// 64-bit FNV-1a of the config text.
    pub fn hash(&self) -> u64 {
        self.source.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
    }
}

fn annotate(e: Error, what: &str) -> Error {
    match e {
        Error::Domain(m) => Error::Domain(format!("{what}: {m}")),
        Error::Degenerate(m) => Error::Degenerate(format!("{what}: {m}")),
        Error::NonConvergence(m) => Error::NonConvergence(format!("{what}: {m}")),
        Error::Identity(m) => Error::Identity(format!("{what}: {m}")),
        Error::StepSize(m) => Error::StepSize(format!("{what}: {m}")),
        other => other,
    }
}

// -------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub breakdown: EnergyBreakdown,
    /// Spread of helix phase rates about ω_ξ (diagonal-mode validity).
    pub diagonal_ratio: f64,
    pub kappa_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: u64,
    pub parameter: Parameter,
    pub points: Vec<SweepPoint>,
    /// Seconds since the Unix epoch at completion; not part of the CSV.
    pub timestamp: u64,
}

/// Evaluate every sweep point on the worker pool, keeping sweep order.
pub fn run_sweep(cfg: &RunConfig) -> Result<RunRecord> {
    let charge = cfg.charge.build()?;
    let param = cfg.sweep.parameter;
    let points = cfg
        .sweep
        .values()
        .into_par_iter()
        .enumerate()
        .map(|(i, v)| {
            let what = format!("sweep point {i} ({param} = {v})");
            let (state, phys) = cfg.point(&[(param, v)]).map_err(|e| annotate(e, &what))?;
            let breakdown = cfg.evaluate(&charge, &[(param, v)]).map_err(|e| annotate(e, &what))?;
            Ok(SweepPoint {
                value: v,
                breakdown,
                diagonal_ratio: DiagonalModeParams::new(&state, phys.omega_xi).validity_ratio(),
                kappa_r: phys.kappa_d * state.r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunRecord { config_hash: cfg.hash(), parameter: param, points, timestamp: unix_time() })
}

fn unix_time() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub const CSV_HEADER: &str = "index,parameter,value,e_dir_0,e_dir_1,e_dir_2,\
e_img1_0,e_img1_1,e_img1_2,e_img1_3,e_img2_0,e_img2_1,e_img2_2,e_img2_3,\
direct,image,total,imag_residual,truncation_estimate,diagonal_ratio,kappa_r,omega_terms_incomplete,warnings";

fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// The sweep CSV: fixed header, one row per point, 17 significant digits.
pub fn sweep_csv(record: &RunRecord) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, p) in record.points.iter().enumerate() {
        let b = &p.breakdown;
        let mut cols = vec![i.to_string(), record.parameter.to_string(), g17(p.value)];
        cols.extend(b.e_dir.iter().chain(&b.e_img1).chain(&b.e_img2).map(|&x| g17(x)));
        cols.extend(
            [b.direct(), b.image(), b.total(), b.imag_residual, b.truncation_estimate, p.diagonal_ratio, p.kappa_r]
                .map(g17),
        );
        cols.push(u8::from(b.omega_terms_incomplete).to_string());
        cols.push(b.warnings.len().to_string());
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Gnuplot data: one two-column block per energy component.
pub fn sweep_dat(record: &RunRecord) -> String {
    let mut out = String::new();
    let parts: [(&str, fn(&EnergyBreakdown) -> f64); 5] = [
        ("direct", |b| b.direct()),
        ("image_1", |b| b.e_img1.iter().sum()),
        ("image_2", |b| b.e_img2.iter().sum()),
        ("image", |b| b.image()),
        ("total", |b| b.total()),
    ];
    for (k, (name, f)) in parts.iter().enumerate() {
        if k > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {} {name}", record.parameter);
        for p in &record.points {
            let _ = writeln!(out, "{} {}", g17(p.value), g17(f(&p.breakdown)));
        }
    }
    out
}

/// Fresh directory `run-<hash>-<k>` under the output directory.
pub fn create_run_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    for k in 0.. {
        let dir = cfg.output_dir.join(format!("run-{:016x}-{k}", cfg.hash()));
        match fs::create_dir(&dir) {
            Ok(()) => {
                fs::write(dir.join("config.txt"), &cfg.source)?;
                return Ok(dir);
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

/// Write config copy, CSV, plot data and metadata; returns the run directory.
pub fn persist_sweep(cfg: &RunConfig, record: &RunRecord) -> Result<PathBuf> {
    let dir = create_run_dir(cfg)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(record))?;
    fs::write(dir.join("sweep.dat"), sweep_dat(record))?;
    let worst = |f: fn(&SweepPoint) -> f64| record.points.iter().map(f).fold(0.0, f64::max);
    let mut meta = String::new();
    let _ = writeln!(meta, "config_hash = {:016x}", record.config_hash);
    let _ = writeln!(meta, "timestamp = {}", record.timestamp);
    let _ = writeln!(meta, "parameter = {}", record.parameter);
    let _ = writeln!(meta, "points = {}", record.points.len());
    let _ = writeln!(meta, "approx_level = {}", cfg.approx_level);
    let _ = writeln!(meta, "max_truncation_estimate = {}", g17(worst(|p| p.breakdown.truncation_estimate)));
    let _ = writeln!(meta, "max_imag_residual = {}", g17(worst(|p| p.breakdown.imag_residual)));
    let _ = writeln!(meta, "max_diagonal_ratio = {}", g17(worst(|p| p.diagonal_ratio)));
    for (i, p) in record.points.iter().enumerate() {
        for w in &p.breakdown.warnings {
            let _ = writeln!(meta, "warning.{i} = {w}");
        }
    }
    fs::write(dir.join("metadata.txt"), meta)?;
    Ok(dir)
}

// ----------------------------------------------------------------- minimise

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub free: Vec<Parameter>,
    pub argmin: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// max − min over every evaluated energy.
    pub spread: f64,
    pub flat: bool,
    /// Best point after each iteration, in parameter units.
    pub trace: Vec<TraceEntry>,
}

/// Parse `eta,R` style lists of free parameters.
pub fn parse_free(list: &str) -> Result<Vec<Parameter>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let p: Parameter = item.parse()?;
        if !matches!(p, Parameter::Eta | Parameter::R | Parameter::XiPhase) {
            return Err(Error::Domain(format!("{p} cannot be minimised over (eta, R or xi_phase)")));
        }
        if out.contains(&p) {
            return Err(Error::Domain(format!("{p} listed twice")));
        }
        out.push(p);
    }
    if out.is_empty() || out.len() > 3 {
        return Err(Error::Domain("between one and three free parameters required".into()));
    }
    Ok(out)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimise the total energy over the free parameters inside their bounds.
///
/// Coordinates are normalised to the unit cube. One parameter uses
/// golden-section search, more use Nelder–Mead with vertices clamped to the
/// cube; both start from the bounds midpoint and stop when the bracket or
/// simplex diameter drops below `tolerance`.
pub fn minimize(cfg: &RunConfig, free: &[Parameter]) -> Result<MinimizeResult> {
    if free.is_empty() || free.len() > 3 {
        return Err(Error::Domain("between one and three free parameters required".into()));
    }
    let bounds: Vec<(f64, f64)> = free.iter().map(|&p| cfg.minimize.bounds_of(p)).collect::<Result<_>>()?;
    let charge = cfg.charge.build()?;
    let to_params = |u: &[f64]| -> Vec<f64> {
        u.iter().zip(&bounds).map(|(&t, &(lo, hi))| lo + t.clamp(0.0, 1.0) * (hi - lo)).collect()
    };
    let mut evals: Vec<f64> = Vec::new();
    let mut objective = |u: &[f64]| -> Result<f64> {
        let x = to_params(u);
        let overrides: Vec<(Parameter, f64)> = free.iter().copied().zip(x.iter().copied()).collect();
        let v = cfg
            .evaluate(&charge, &overrides)
            .map_err(|e| annotate(e, &format!("minimiser at {x:?}")))?
            .total();
        evals.push(v);
        Ok(v)
    };
    let tol = cfg.minimize.tolerance;
    let cap = cfg.minimize.max_iterations;
    let (best_u, best, iterations, converged, trace_u) = if free.len() == 1 {
        golden_section(&mut objective, tol, cap)?
    } else {
        nelder_mead(&mut objective, free.len(), tol, cap)?
    };
    let lo = evals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = evals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    let scale = lo.abs().max(hi.abs());
    Ok(MinimizeResult {
        free: free.to_vec(),
        argmin: to_params(&best_u),
        value: best,
        iterations,
        evaluations: evals.len(),
        converged,
        spread,
        flat: spread <= cfg.minimize.flat_tolerance * scale,
        trace: trace_u
            .into_iter()
            .map(|(iteration, u, value)| TraceEntry { iteration, point: to_params(&u), value })
            .collect(),
    })
}

type Search = (Vec<f64>, f64, usize, bool, Vec<(usize, Vec<f64>, f64)>);

fn golden_section(f: &mut dyn FnMut(&[f64]) -> Result<f64>, tol: f64, cap: usize) -> Result<Search> {
    let mut best = (0.5, f(&[0.5])?);
    let mut trace = vec![(0, vec![best.0], best.1)];
    for t in [0.0, 1.0] {
        let v = f(&[t])?;
        if v < best.1 {
            best = (t, v);
        }
    }
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(&[c])?, f(&[d])?);
    let mut it = 0;
    while b - a >= tol && it < cap {
        it += 1;
        if fc <= fd {
            b = d;
            (d, fd) = (c, fc);
            c = b - GOLDEN * (b - a);
            fc = f(&[c])?;
        } else {
            a = c;
            (c, fc) = (d, fd);
            d = a + GOLDEN * (b - a);
            fd = f(&[d])?;
        }
        for (t, v) in [(c, fc), (d, fd)] {
            if v < best.1 {
                best = (t, v);
            }
        }
        trace.push((it, vec![best.0], best.1));
    }
    Ok((vec![best.0], best.1, it, b - a < tol, trace))
}

fn nelder_mead(f: &mut dyn FnMut(&[f64]) -> Result<f64>, dim: usize, tol: f64, cap: usize) -> Result<Search> {
    let start = vec![0.5; dim];
    let f0 = f(&start)?;
    let mut best = (start, f0);
    let mut trace = vec![(0, best.0.clone(), best.1)];
    let mut it = 0;
    // Clamping to the box can collapse the simplex against a face; restart
    // around the best point until a restart brings no improvement.
    loop {
        let (x, v, converged) = simplex_descent(f, &best, tol, cap, &mut it, &mut trace)?;
        let improved = v < best.1;
        if improved {
            best = (x, v);
        }
        if !converged {
            return Ok((best.0, best.1, it, false, trace));
        }
        if !improved {
            return Ok((best.0, best.1, it, true, trace));
        }
    }
}

fn simplex_descent(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    start: &(Vec<f64>, f64),
    tol: f64,
    cap: usize,
    it: &mut usize,
    trace: &mut Vec<(usize, Vec<f64>, f64)>,
) -> Result<(Vec<f64>, f64, bool)> {
    let dim = start.0.len();
    let clamp = |v: Vec<f64>| v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect::<Vec<_>>();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push(start.clone());
    for i in 0..dim {
        let mut v = start.0.clone();
        v[i] += if v[i] > 0.5 { -0.25 } else { 0.25 };
        let fv = f(&v)?;
        simplex.push((v, fv));
    }
    let diameter = |s: &[(Vec<f64>, f64)]| {
        let mut d = 0.0_f64;
        for (i, p) in s.iter().enumerate() {
            for q in &s[i + 1..] {
                d = d.max(p.0.iter().zip(&q.0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
            }
        }
        d
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < tol {
            return Ok((simplex[0].0.clone(), simplex[0].1, true));
        }
        if *it >= cap {
            return Ok((simplex[0].0.clone(), simplex[0].1, false));
        }
        *it += 1;
        let worst = simplex[dim].clone();
        let centroid: Vec<f64> =
            (0..dim).map(|k| simplex[..dim].iter().map(|p| p.0[k]).sum::<f64>() / dim as f64).collect();
        let along = |t: f64| clamp(centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect());
        let xr = along(1.0);
        let fr = f(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe)?;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let xc = along(if fr < worst.1 { 0.5 } else { -0.5 });
            let fc = f(&xc)?;
            if fc < fr.min(worst.1) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&p.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fx = f(&x)?;
                    *p = (x, fx);
                }
            }
        }
        let lead = simplex.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        if trace.last().map_or(true, |t| lead.1 < t.2) {
            trace.push((*it, lead.0.clone(), lead.1));
        } else {
            let last = trace.last().unwrap().clone();
            trace.push((*it, last.1, last.2));
        }
    }
}

/// Trace CSV for a minimisation.
pub fn minimize_csv(res: &MinimizeResult) -> String {
    let mut out = String::from("iteration");
    for p in &res.free {
        let _ = write!(out, ",{p}");
    }
    out.push_str(",total\n");
    for t in &res.trace {
        let _ = write!(out, "{}", t.iteration);
        for x in &t.point {
            let _ = write!(out, ",{}", g17(*x));
        }
        let _ = writeln!(out, ",{}", g17(t.value));
    }
    out
}

pub fn persist_minimize(cfg: &RunConfig, res: &MinimizeResult) -> Result<PathBuf> {
    let dir = create_run_dir(cfg)?;
    fs::write(dir.join("minimize_trace.csv"), minimize_csv(res))?;
    let mut meta = String::new();
    let _ = writeln!(meta, "config_hash = {:016x}", cfg.hash());
    let _ = writeln!(meta, "timestamp = {}", unix_time());
    for (p, x) in res.free.iter().zip(&res.argmin) {
        let _ = writeln!(meta, "argmin.{p} = {}", g17(*x));
    }
    let _ = writeln!(meta, "total = {}", g17(res.value));
    let _ = writeln!(meta, "iterations = {}", res.iterations);
    let _ = writeln!(meta, "evaluations = {}", res.evaluations);
    let _ = writeln!(meta, "converged = {}", res.converged);
    let _ = writeln!(meta, "spread = {}", g17(res.spread));
    let _ = writeln!(meta, "flat = {}", res.flat);
    fs::write(dir.join("metadata.txt"), meta)?;
    Ok(dir)
}

// ------------------------------------------------------------------- oracle

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub value: f64,
    pub mode_sum: f64,
    pub oracle: f64,
    pub relative_difference: f64,
    pub samples_per_rod: usize,
}

/// No-core mode sum against the real-space sum at every sweep point.
/// Both describe one helical line of charge per rod.
pub fn oracle_comparison(cfg: &RunConfig) -> Result<Vec<OracleRow>> {
    if cfg.charge != ChargeSpec::SingleHelix {
        return Err(Error::Domain("the oracle sums point charges on single helical lines; set charge.model = single_helix".into()));
    }
    let param = cfg.sweep.parameter;
    cfg.sweep
        .values()
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let what = format!("oracle point {i} ({param} = {v})");
            let (state, phys) = cfg.point(&[(param, v)]).map_err(|e| annotate(e, &what))?;
            let modes = energy_density_nocore(&state, &phys, &cfg.truncation).map_err(|e| annotate(e, &what))?;
            let o = oracle_energy(&state, phys.kappa_d, cfg.oracle.length, cfg.oracle.ds)
                .map_err(|e| annotate(e, &what))?;
            let oracle = phys.prefactor * o.energy;
            Ok(OracleRow {
                value: v,
                mode_sum: modes.value,
                oracle,
                relative_difference: (modes.value - oracle).abs() / oracle.abs(),
                samples_per_rod: o.samples_per_rod,
            })
        })
        .collect()
}

pub fn oracle_csv(param: Parameter, rows: &[OracleRow]) -> String {
    let mut out = String::from("index,parameter,value,mode_sum,oracle,relative_difference,samples_per_rod\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{param},{},{},{},{},{}",
            g17(r.value),
            g17(r.mode_sum),
            g17(r.oracle),
            g17(r.relative_difference),
            r.samples_per_rod
        );
    }
    out
}

// --------------------------------------------------------------------- fig1

/// ζ_surf,0(l, k_z) for l = 0..3 on a grid of a k_z, with a = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Fig1 {
    pub a_kappa: f64,
    pub ak_z: Vec<f64>,
    pub curves: [Vec<f64>; 4],
}

pub fn fig1_curves(a_kappa: f64, half_width: f64, count: usize) -> Result<Fig1> {
    if !(a_kappa > 0.0) || !(half_width > 0.0) || count < 2 {
        return Err(Error::Domain(format!("fig1 needs aκ > 0, a width > 0 and two points, got {a_kappa}, {half_width}, {count}")));
    }
    let axis = SweepAxis { parameter: Parameter::KappaD, min: -half_width, max: half_width, count };
    let ak_z = axis.values();
    let curves = [0, 1, 2, 3].map(|l| ak_z.iter().map(|&k| zeta_surf0(l, k, 1.0, a_kappa)).collect());
    Ok(Fig1 { a_kappa, ak_z, curves })
}

pub fn fig1_csv(fig: &Fig1) -> String {
    let mut out = String::from("ak_z,l0,l1,l2,l3\n");
    for (i, k) in fig.ak_z.iter().enumerate() {
        let _ = write!(out, "{}", g17(*k));
        for c in &fig.curves {
            let _ = write!(out, ",{}", g17(c[i]));
        }
        out.push('\n');
    }
    out
}

pub fn fig1_dat(fig: &Fig1) -> String {
    let mut out = String::new();
    for (l, c) in fig.curves.iter().enumerate() {
        if l > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# l = {l}, a kappa_D = {}", fig.a_kappa);
        for (k, v) in fig.ak_z.iter().zip(c) {
            let _ = writeln!(out, "{} {}", g17(*k), g17(*v));
        }
    }
    out
}

// --------------------------------------------------------------- identities

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn passed(&self) -> bool {
        self.max_residual < self.tolerance
    }
}

/// Bessel and mode-sum identities on fixed parameter grids.
pub fn identity_suite() -> Result<Vec<IdentityCheck>> {
    let mut out = Vec::new();
    let mut check = |name, it: &mut dyn Iterator<Item = f64>, tolerance| {
        let (cases, worst) = it.fold((0, 0.0_f64), |(c, w), r| (c + 1, w.max(r)));
        out.push(IdentityCheck { name, cases, max_residual: worst, tolerance });
    };
    let xs = [0.01, 0.3, 1.0, 2.5, 7.0, 11.9, 12.1, 30.0, 80.0, 150.0];
    let orders = -30..=30;
    check(
        "wronskian x(I_n' K_n - I_n K_n') = 1",
        &mut orders.clone().flat_map(|n| xs.iter().map(move |&x| wronskian_residual(n, x).abs())),
        1e-10,
    );
    check(
        "three-term recurrences of I_n and K_n",
        &mut orders.flat_map(|n| xs.iter().map(move |&x| {
            let (a, b) = recurrence_residuals(n, x);
            a.max(b)
        })),
        1e-10,
    );
    let angles = [0.0, 0.3, 0.8, 1.2, 1.5];
    let phases = [-3.0, -1.1, 0.4, 2.2];
    let args = [0.1, 1.0, 3.5, 7.5];
    let mut graf = Vec::new();
    for &x in &args {
        for &eta in &angles {
            for &xi in &phases {
                for m in -3..=3 {
                    graf.push(graf_j_residual(x, eta, xi, m, 40).max(graf_i_residual(x, eta, xi, m, 40)));
                }
            }
        }
    }
    check("addition formulas for J_m and I_m", &mut graf.into_iter(), 1e-10);
    check(
        "Jacobi-Anger expansion",
        &mut args.iter().flat_map(|&z| phases.iter().map(move |&t| jacobi_anger_residual(z, t, 40))),
        1e-10,
    );
    let mut weighted = Vec::new();
    for n in -4..=4 {
        for n_p in -4..=4 {
            for &(a, r, k) in &[(0.5, 2.0, 1.0), (1.0, 3.0, 0.7), (0.8, 4.0, 1.6)] {
                weighted.push(identity_10_13_check(n, n_p, a, r, k));
            }
        }
    }
    check("weighted image product as shifted Bessel products", &mut weighted.into_iter(), 1e-10);
    let mut omega = Vec::new();
    for n in 0..=3 {
        for &x in &[3.0, 5.0, 8.0] {
            for &y in &[1.0, 2.0, 4.0] {
                if y < x {
                    omega.push(omega_tilde_table(n, x, y)?.residual);
                }
            }
        }
    }
    check("two forms of the Omega series", &mut omega.into_iter(), 1e-9);
    Ok(out)
}

/// Process exit status for an error: 2 for invalid input, 3 for numerical
/// failure, 1 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence(_) | Error::Identity(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}
