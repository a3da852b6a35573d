//! Run configuration, channel construction and the batch experiments behind
//! the CLI: single measures, reference tables, sweeps, qubit scaling and
//! trajectories.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use ini::Ini;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bec::{self, BecParams, SeparationReading, TabulationConfig, A_RB, BOHR_RADIUS};
use crate::channel::{ChannelEvolution, TimeGrid};
use crate::damping::{self, DampingParams, PseudomodeConfig};
use crate::dephasing::{self, DephasingParams};
use crate::error::{Error, Result};
use crate::measures::{
    self, blp_optimize, lfs_n0, lfs_optimize, reevaluate, structured_pairs, ArgmaxState, Candidate, EntangledChoice, Interval,
    MeasureResult, SearchConfig, SearchMode,
};
use crate::numerics::{OdeConfig, QuadConfig};
use crate::quantum::{tensor_states, DensityMatrix, PureState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Flag attached to the common-dephasing row of the two-qubit common table.
pub const COMMON_PD_FLAG: &str = "exact propagator disagrees with the published reference value; see README";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Pd,
    Ad,
    Bec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Independent,
    Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Lfs,
    Blp,
    Lfs0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdSection {
    pub s: f64,
    pub eta: f64,
    pub omega_c: f64,
    pub exponent_scale: f64,
}

impl Default for PdSection {
    fn default() -> Self {
        let p = DephasingParams::default();
        PdSection { s: p.s, eta: p.eta, omega_c: p.omega_c, exponent_scale: p.exponent_scale }
    }
}

impl PdSection {
    pub fn params(&self) -> DephasingParams {
        DephasingParams { s: self.s, eta: self.eta, omega_c: self.omega_c, exponent_scale: self.exponent_scale, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdSection {
    pub gamma0: f64,
    pub lambda: f64,
}

impl Default for AdSection {
    fn default() -> Self {
        let p = DampingParams::default();
        AdSection { gamma0: p.gamma0, lambda: p.lambda }
    }
}

impl AdSection {
    pub fn params(&self) -> DampingParams {
        DampingParams { gamma0: self.gamma0, lambda: self.lambda, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct BecSection {
    pub sigma_nm: f64,
    pub D_nm: f64,
    /// `true` when `D_nm` is the full separation `2D`.
    pub D_is_separation: bool,
    pub n0: f64,
    pub a_E_over_aRb: f64,
    pub a_SE_a0: f64,
    pub lattice_wavelength_nm: f64,
}

impl Default for BecSection {
    fn default() -> Self {
        let p = BecParams::default();
        BecSection {
            sigma_nm: p.sigma * 1e9,
            D_nm: p.separation * 1e9,
            D_is_separation: p.reading == SeparationReading::Doubled,
            n0: p.n0,
            a_E_over_aRb: p.a_e / A_RB,
            a_SE_a0: p.a_se / BOHR_RADIUS,
            lattice_wavelength_nm: p.lattice_wavelength * 1e9,
        }
    }
}

impl BecSection {
    pub fn params(&self) -> BecParams {
        BecParams {
            lattice_wavelength: self.lattice_wavelength_nm * 1e-9,
            sigma: self.sigma_nm * 1e-9,
            separation: self.D_nm * 1e-9,
            reading: if self.D_is_separation { SeparationReading::Doubled } else { SeparationReading::Direct },
            n0: self.n0,
            a_e: self.a_E_over_aRb * A_RB,
            a_se: self.a_SE_a0 * BOHR_RADIUS,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericsSection {
    /// Base horizon; channel default when absent.
    pub horizon: Option<f64>,
    /// Grid intervals over the base horizon; channel default when absent.
    pub samples: Option<usize>,
    pub ode_tol: f64,
    pub quad_tol: f64,
    pub fock_cutoff: usize,
    /// Horizon doublings allowed after the search; channel default when absent.
    pub max_doublings: Option<usize>,
    /// Relative change of the value below which a doubling is converged.
    pub doubling_tol: f64,
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection {
            horizon: None,
            samples: None,
            ode_tol: 1e-8,
            quad_tol: 1e-11,
            fock_cutoff: 6,
            max_doublings: None,
            doubling_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSection {
    /// Measure-dependent default when absent.
    pub mode: Option<SearchMode>,
    pub grid_step: f64,
    pub joint_grid_step: f64,
    pub random_samples: usize,
    pub seed: u64,
    pub refine_iterations: usize,
    pub screen_stride: usize,
    pub mixed_pairs: bool,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = SearchConfig::default();
        SearchSection {
            mode: None,
            grid_step: s.grid_step,
            joint_grid_step: s.joint_grid_step,
            random_samples: s.random_samples,
            seed: s.seed,
            refine_iterations: s.refine_iterations,
            screen_stride: s.screen_stride,
            mixed_pairs: s.mixed_pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub channel: ChannelKind,
    pub env: EnvKind,
    pub measure: MeasureKind,
    pub n_qubits: usize,
    pub entangled: EntangledChoice,
    pub pd: PdSection,
    pub ad: AdSection,
    pub bec: BecSection,
    pub numerics: NumericsSection,
    pub search: SearchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            channel: ChannelKind::Pd,
            env: EnvKind::Independent,
            measure: MeasureKind::Blp,
            n_qubits: 1,
            entangled: EntangledChoice::Ghz,
            pd: PdSection::default(),
            ad: AdSection::default(),
            bec: BecSection::default(),
            numerics: NumericsSection::default(),
            search: SearchSection::default(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(field: &str, raw: &str) -> Result<T> {
    raw.trim().parse::<T>().map_err(|_| Error::config(field, format!("cannot parse '{raw}'")))
}

fn parse_bool(field: &str, raw: &str) -> Result<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(field, format!("expected a boolean, got '{raw}'"))),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_ini_str(&text)
    }

    /// Parses a key/value file; every key is optional and unknown sections or
    /// keys are rejected.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        let mut cfg = RunConfig::default();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, raw) in props.iter() {
                cfg.set(section, key, raw)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one `section.key` from its text form.
    pub fn set(&mut self, section: &str, key: &str, raw: &str) -> Result<()> {
        let field = format!("{section}.{key}");
        let f = field.as_str();
        match (section, key) {
            ("run", "channel") => {
                self.channel = match raw.trim() {
                    "pd" => ChannelKind::Pd,
                    "ad" => ChannelKind::Ad,
                    "bec" => ChannelKind::Bec,
                    other => return Err(Error::config(f, format!("unknown channel '{other}'"))),
                }
            }
            ("run", "env") => {
                self.env = match raw.trim() {
                    "independent" => EnvKind::Independent,
                    "common" => EnvKind::Common,
                    other => return Err(Error::config(f, format!("unknown environment '{other}'"))),
                }
            }
            ("run", "measure") => {
                self.measure = match raw.trim() {
                    "lfs" => MeasureKind::Lfs,
                    "blp" => MeasureKind::Blp,
                    "lfs0" => MeasureKind::Lfs0,
                    other => return Err(Error::config(f, format!("unknown measure '{other}'"))),
                }
            }
            ("run", "n_qubits") => self.n_qubits = parse_value(f, raw)?,
            ("run", "entangled") => self.entangled = EntangledChoice::parse(raw.trim())?,
            ("pd", "s") => self.pd.s = parse_value(f, raw)?,
            ("pd", "eta") => self.pd.eta = parse_value(f, raw)?,
            ("pd", "omega_c") => self.pd.omega_c = parse_value(f, raw)?,
            ("pd", "exponent_scale") => self.pd.exponent_scale = parse_value(f, raw)?,
            ("ad", "gamma0") => self.ad.gamma0 = parse_value(f, raw)?,
            ("ad", "lambda") => self.ad.lambda = parse_value(f, raw)?,
            ("bec", "sigma_nm") => self.bec.sigma_nm = parse_value(f, raw)?,
            ("bec", "D_nm") => self.bec.D_nm = parse_value(f, raw)?,
            ("bec", "D_is_separation") => self.bec.D_is_separation = parse_bool(f, raw)?,
            ("bec", "n0") => self.bec.n0 = parse_value(f, raw)?,
            ("bec", "a_E_over_aRb") => self.bec.a_E_over_aRb = parse_value(f, raw)?,
            ("bec", "a_SE_a0") => self.bec.a_SE_a0 = parse_value(f, raw)?,
            ("bec", "lattice_wavelength_nm") => self.bec.lattice_wavelength_nm = parse_value(f, raw)?,
            ("numerics", "horizon") => self.numerics.horizon = Some(parse_value(f, raw)?),
            ("numerics", "samples") => self.numerics.samples = Some(parse_value(f, raw)?),
            ("numerics", "ode_tol") => self.numerics.ode_tol = parse_value(f, raw)?,
            ("numerics", "quad_tol") => self.numerics.quad_tol = parse_value(f, raw)?,
            ("numerics", "fock_cutoff") => self.numerics.fock_cutoff = parse_value(f, raw)?,
            ("numerics", "max_doublings") => self.numerics.max_doublings = Some(parse_value(f, raw)?),
            ("numerics", "doubling_tol") => self.numerics.doubling_tol = parse_value(f, raw)?,
            ("search", "mode") => self.search.mode = Some(SearchMode::parse(raw.trim())?),
            ("search", "grid_step") => self.search.grid_step = parse_value(f, raw)?,
            ("search", "joint_grid_step") => self.search.joint_grid_step = parse_value(f, raw)?,
            ("search", "random_samples") => self.search.random_samples = parse_value(f, raw)?,
            ("search", "seed") => self.search.seed = parse_value(f, raw)?,
            ("search", "refine_iterations") => self.search.refine_iterations = parse_value(f, raw)?,
            ("search", "screen_stride") => self.search.screen_stride = parse_value(f, raw)?,
            ("search", "mixed_pairs") => self.search.mixed_pairs = parse_bool(f, raw)?,
            _ => return Err(Error::config(f, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > measures::MAX_N0_QUBITS {
            return Err(Error::config("run.n_qubits", format!("{} outside 1..=4", self.n_qubits)));
        }
        if self.env == EnvKind::Common && self.n_qubits != 2 {
            return Err(Error::config("run.n_qubits", "common environments are two-qubit models"));
        }
        if self.measure == MeasureKind::Blp && self.n_qubits > 2 {
            return Err(Error::config("run.n_qubits", "pair searches support at most 2 qubits"));
        }
        match self.channel {
            ChannelKind::Pd => {
                self.pd.params().validate()?;
                if !(self.pd.exponent_scale > 0.0) {
                    return Err(Error::config("pd.exponent_scale", "must be positive"));
                }
            }
            ChannelKind::Ad => self.ad.params().validate()?,
            ChannelKind::Bec => {
                let p = self.bec.params();
                if self.env == EnvKind::Common {
                    p.validate_common()?
                } else {
                    p.validate()?
                }
            }
        }
        let n = &self.numerics;
        if let Some(h) = n.horizon {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::config("numerics.horizon", format!("{h} is not a positive horizon")));
            }
        }
        if let Some(s) = n.samples {
            if s < 4 {
                return Err(Error::config("numerics.samples", format!("need at least 4 samples, got {s}")));
            }
        }
        if !(n.ode_tol > 0.0) {
            return Err(Error::config("numerics.ode_tol", "must be positive"));
        }
        if !(n.quad_tol > 0.0) {
            return Err(Error::config("numerics.quad_tol", "must be positive"));
        }
        if n.fock_cutoff < 3 {
            return Err(Error::config("numerics.fock_cutoff", "need at least 3 levels"));
        }
        if !(n.doubling_tol > 0.0) {
            return Err(Error::config("numerics.doubling_tol", "must be positive"));
        }
        let search = self.search_config();
        search.validate()?;
        match (self.measure, search.mode) {
            (MeasureKind::Blp, m) if !m.is_pair_search() => {
                return Err(Error::config("search.mode", format!("{} is not a pair search", m.as_str())))
            }
            (MeasureKind::Lfs, m) if m.is_pair_search() => {
                return Err(Error::config("search.mode", format!("{} is a pair search", m.as_str())))
            }
            (MeasureKind::Lfs, SearchMode::SingleQubitFull) if self.n_qubits != 1 => {
                return Err(Error::config("search.mode", "single-qubit-full needs n_qubits = 1"))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn search_config(&self) -> SearchConfig {
        let s = &self.search;
        let mode = s.mode.unwrap_or(match (self.measure, self.env, self.n_qubits) {
            (MeasureKind::Blp, _, _) => SearchMode::PairRandom,
            (_, EnvKind::Common, _) => SearchMode::DiagonalJoint,
            (_, _, 1) => SearchMode::SingleQubitFull,
            _ => SearchMode::DiagonalProduct,
        });
        SearchConfig {
            mode,
            grid_step: s.grid_step,
            joint_grid_step: s.joint_grid_step,
            random_samples: s.random_samples,
            seed: s.seed,
            refine_iterations: s.refine_iterations,
            screen_stride: s.screen_stride,
            mixed_pairs: s.mixed_pairs,
        }
    }

    /// Default `(horizon, step)` of the channel.
    fn default_grid(&self) -> (f64, f64) {
        match self.channel {
            ChannelKind::Pd => (40.0 / self.pd.omega_c, 0.01 / self.pd.omega_c),
            ChannelKind::Ad => ((150.0 / self.ad.gamma0).max(15.0 / self.ad.lambda), 0.025 / self.ad.gamma0),
            ChannelKind::Bec => (1e-3, 2e-6),
        }
    }

    /// Base grid before any horizon doubling.
    pub fn base_grid(&self) -> Result<TimeGrid> {
        let (h0, step) = self.default_grid();
        let horizon = self.numerics.horizon.unwrap_or(h0);
        let samples = self.numerics.samples.unwrap_or_else(|| (horizon / step).round().max(4.0) as usize);
        TimeGrid::uniform(horizon, samples)
    }

    pub fn max_doublings(&self) -> usize {
        self.numerics.max_doublings.unwrap_or(match self.channel {
            ChannelKind::Pd => 4,
            ChannelKind::Ad => 2,
            ChannelKind::Bec => 3,
        })
    }

    pub fn quad(&self) -> QuadConfig {
        QuadConfig { abs_tol: 1e-2 * self.numerics.quad_tol, rel_tol: self.numerics.quad_tol, ..Default::default() }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Builds the channel on `grid`.
    pub fn build_channel(&self, grid: TimeGrid) -> Result<Box<dyn ChannelEvolution>> {
        let n = self.n_qubits;
        let quad = self.quad();
        Ok(match (self.channel, self.env) {
            (ChannelKind::Pd, EnvKind::Independent) => Box::new(dephasing::independent_channel(&self.pd.params(), n, grid, &quad)?),
            (ChannelKind::Pd, EnvKind::Common) => Box::new(dephasing::common_channel(&self.pd.params(), grid, &quad)?),
            (ChannelKind::Ad, EnvKind::Independent) => Box::new(damping::independent_channel(&self.ad.params(), n, grid)?),
            (ChannelKind::Ad, EnvKind::Common) => {
                let ode = OdeConfig::new(grid.step(), self.numerics.ode_tol, 4)?;
                let cfg = PseudomodeConfig::new(self.numerics.fock_cutoff, ode)?;
                Box::new(damping::pseudomode_channel(&self.ad.params(), 2, grid, &cfg)?)
            }
            (ChannelKind::Bec, env) => {
                let p = self.bec.params();
                let rates = bec::rates_for_grid(&p, &grid, &TabulationConfig::default())?;
                match env {
                    EnvKind::Independent => Box::new(bec::independent_channel(&rates, n, grid)?),
                    EnvKind::Common => {
                        let ode = OdeConfig::new(0.5 * grid.step(), self.numerics.ode_tol, 5)?;
                        Box::new(bec::two_qubit_channel(&rates, grid, &ode)?)
                    }
                }
            }
        })
    }
}

/// A measure value together with the configuration that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub channel: ChannelKind,
    pub env: EnvKind,
    pub measure: MeasureKind,
    pub n_qubits: usize,
    pub value: f64,
    pub intervals: Vec<Interval>,
    pub argmax_state: ArgmaxState,
    pub params: RunConfig,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub config_hash: String,
    pub evaluations: usize,
    /// Horizon of the grid the value was taken on.
    pub horizon: f64,
    /// Whether the last horizon doubling changed the value by less than the
    /// doubling tolerance.
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
    #[serde(skip)]
    pub result: MeasureResult,
}

impl ResultRecord {
    fn new(cfg: &RunConfig, result: MeasureResult, horizon: f64, converged: bool, wall_time_s: f64) -> Self {
        ResultRecord {
            channel: cfg.channel,
            env: cfg.env,
            measure: cfg.measure,
            n_qubits: cfg.n_qubits,
            value: result.value,
            intervals: result.intervals.clone(),
            argmax_state: result.argmax_state.clone(),
            params: cfg.clone(),
            seed: cfg.search.seed,
            version: VERSION.to_string(),
            wall_time_s,
            config_hash: cfg.hash(),
            evaluations: result.evaluations,
            horizon,
            converged,
            flag: None,
            extras: BTreeMap::new(),
            result,
        }
    }

    /// Zeroes timing so repeated runs compare byte for byte.
    pub fn without_timing(mut self) -> Self {
        self.wall_time_s = 0.0;
        self.result.wall_time_s = 0.0;
        self
    }
}

/// Whether `new` is within `tol` relative of `old`.
fn doubling_converged(old: f64, new: f64, tol: f64) -> bool {
    (new - old).abs() <= tol * new.abs().max(old.abs()) || (new - old).abs() < 1e-12
}

/// Re-evaluates the optimiser of `result` on doubled horizons until the value
/// settles. Returns the last result, its horizon and the convergence state.
pub fn extend_horizon(cfg: &RunConfig, grid: TimeGrid, mut result: MeasureResult) -> Result<(MeasureResult, f64, bool)> {
    let mut horizon = grid.horizon();
    let mut converged = cfg.max_doublings() == 0;
    for k in 1..=cfg.max_doublings() {
        let longer = grid.extended(1 << k);
        let channel = cfg.build_channel(longer)?;
        let next = reevaluate(channel.as_ref(), &result)?;
        let done = doubling_converged(result.value, next.value, cfg.numerics.doubling_tol);
        horizon = longer.horizon();
        result = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok((result, horizon, converged))
}

/// Runs the configured search on the base grid, then extends the horizon on
/// the optimiser.
pub fn run_measure(cfg: &RunConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cfg.base_grid()?;
    let channel = cfg.build_channel(grid)?;
    let search = cfg.search_config();
    let result = match cfg.measure {
        MeasureKind::Lfs => lfs_optimize(channel.as_ref(), &search)?,
        MeasureKind::Blp => blp_optimize(channel.as_ref(), &search)?,
        MeasureKind::Lfs0 => lfs_n0(channel.as_ref(), cfg.entangled)?,
    };
    drop(channel);
    let (mut result, horizon, converged) = extend_horizon(cfg, grid, result)?;
    let wall = start.elapsed().as_secs_f64();
    result.config_hash = cfg.hash();
    result.wall_time_s = wall;
    let mut rec = ResultRecord::new(cfg, result, horizon, converged, wall);
    if cfg.channel == ChannelKind::Pd && cfg.env == EnvKind::Common {
        rec.flag = Some(COMMON_PD_FLAG.to_string());
    }
    Ok(rec)
}

/// Evaluates a fixed input on the configured channel with horizon doubling.
pub fn run_fixed(cfg: &RunConfig, candidate: Candidate, label: &str) -> Result<ResultRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cfg.base_grid()?;
    let channel = cfg.build_channel(grid)?;
    let seed = MeasureResult {
        value: 0.0,
        intervals: Vec::new(),
        argmax_state: ArgmaxState { label: label.to_string(), parameters: Vec::new() },
        config_hash: String::new(),
        evaluations: 0,
        wall_time_s: 0.0,
        candidate: Some(candidate),
    };
    let first = reevaluate(channel.as_ref(), &seed)?;
    drop(channel);
    let (mut result, horizon, converged) = extend_horizon(cfg, grid, first)?;
    let wall = start.elapsed().as_secs_f64();
    result.config_hash = cfg.hash();
    result.wall_time_s = wall;
    Ok(ResultRecord::new(cfg, result, horizon, converged, wall))
}

/// Reference value of each table row, in row order pd, ad, bec.
pub fn table_references(which: u8) -> Result<[f64; 3]> {
    match which {
        1 => Ok([0.0432, 0.9463, 0.0019]),
        2 => Ok([0.0432, 1.2489, 0.0038]),
        3 => Ok([0.0002, 7.8320, 0.0106]),
        _ => Err(Error::config("table", format!("unknown table {which}, expected 1, 2 or 3"))),
    }
}

/// The configuration of one table row derived from `base`.
pub fn table_config(base: &RunConfig, which: u8, channel: ChannelKind) -> Result<RunConfig> {
    table_references(which)?;
    let mut cfg = base.clone();
    cfg.channel = channel;
    cfg.measure = MeasureKind::Blp;
    cfg.n_qubits = if which == 1 { 1 } else { 2 };
    cfg.env = if which == 3 { EnvKind::Common } else { EnvKind::Independent };
    cfg.validate()?;
    Ok(cfg)
}

/// BLP rows for PD, AD and BEC: one qubit (1), two qubits in independent
/// environments (2) or in a common environment (3).
pub fn run_table(base: &RunConfig, which: u8) -> Result<Vec<ResultRecord>> {
    let refs = table_references(which)?;
    let mut rows = Vec::new();
    for (i, channel) in [ChannelKind::Pd, ChannelKind::Ad, ChannelKind::Bec].into_iter().enumerate() {
        let cfg = table_config(base, which, channel)?;
        let mut rec = run_measure(&cfg)?;
        rec.extras.insert("reference".into(), refs[i]);
        if which == 3 && channel == ChannelKind::Pd {
            let (a, b) = spectator_pair();
            let spectator = run_fixed(&cfg, Candidate::Pair(a, b), "|0+>,|0->")?;
            rec.extras.insert("spectator_pair_value".into(), spectator.value);
        }
        rows.push(rec);
    }
    Ok(rows)
}

/// `{|0+>, |0->}` on two qubits.
pub fn spectator_pair() -> (DensityMatrix, DensityMatrix) {
    let p = structured_pairs(2).expect("two-qubit families exist").into_iter().find(|p| p.label == "|0+>,|0->").expect("spectator pair");
    let a = PureState::normalized(p.first, vec![2, 2]).expect("normalised").density();
    let b = PureState::normalized(p.second, vec![2, 2]).expect("normalised").density();
    (a, b)
}

/// Product of identical single-qubit diagonal states with `rho11` ground
/// population.
pub fn diagonal_product(rho11: f64, n: usize) -> Result<DensityMatrix> {
    let one = DensityMatrix::diagonal(&[rho11, 1.0 - rho11], vec![2])?;
    Ok((1..n).fold(one.clone(), |acc, _| tensor_states(&acc, &one)))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub param: f64,
    pub value: f64,
    /// Ground population of the optimiser, for bath sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_rho11: Option<f64>,
    pub horizon: f64,
    pub converged: bool,
}

/// LFS value of `diag(rho11, 1 - rho11)^{⊗n}` for each `rho11`.
pub fn run_sweep_initial(cfg: &RunConfig, values: &[f64]) -> Result<Vec<SweepPoint>> {
    let mut cfg = cfg.clone();
    cfg.measure = MeasureKind::Lfs;
    if cfg.env == EnvKind::Common {
        return Err(Error::config("run.env", "initial-state sweeps use independent environments"));
    }
    let mut out = Vec::new();
    for &p in values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config("sweep.rho11", format!("{p} outside [0, 1]")));
        }
        let rec = run_fixed(&cfg, Candidate::State(diagonal_product(p, cfg.n_qubits)?), &format!("rho11={p}"))?;
        out.push(SweepPoint { param: p, value: rec.value, argmax_rho11: None, horizon: rec.horizon, converged: rec.converged });
    }
    Ok(out)
}

/// Optimised measure for each value of the bath parameter `param`
/// (`section.key`, e.g. `ad.lambda`).
pub fn run_sweep_bath(cfg: &RunConfig, param: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    let (section, key) =
        param.split_once('.').ok_or_else(|| Error::config("sweep.param", format!("expected section.key, got '{param}'")))?;
    if !matches!(section, "pd" | "ad" | "bec") {
        return Err(Error::config("sweep.param", format!("'{param}' is not a bath parameter")));
    }
    let mut out = Vec::new();
    for &v in values {
        let mut c = cfg.clone();
        c.set(section, key, &v.to_string())?;
        let rec = run_measure(&c)?;
        let argmax = match rec.result.candidate.as_ref() {
            Some(Candidate::State(rho)) => Some(rho.matrix()[(0, 0)].re),
            _ => None,
        };
        out.push(SweepPoint { param: v, value: rec.value, argmax_rho11: argmax, horizon: rec.horizon, converged: rec.converged });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub value: f64,
    pub horizon: f64,
}

/// LFS versus qubit number. For `lfs` the single-qubit optimiser `rho0` is
/// found first and `rho0^{⊗n}` is evaluated on its final grid; for `lfs0` the
/// fixed entangled input is run for each `n`.
pub fn run_scaling(cfg: &RunConfig, max_qubits: usize) -> Result<Vec<ScalingPoint>> {
    if max_qubits == 0 || max_qubits > measures::MAX_N0_QUBITS {
        return Err(Error::config("scale.max_qubits", format!("{max_qubits} outside 1..=4")));
    }
    if cfg.env == EnvKind::Common {
        return Err(Error::config("run.env", "scaling uses independent environments"));
    }
    let mut out = Vec::new();
    match cfg.measure {
        MeasureKind::Lfs => {
            let mut one = cfg.clone();
            one.n_qubits = 1;
            one.search.mode = None;
            let rec = run_measure(&one)?;
            let Some(Candidate::State(rho0)) = rec.result.candidate.clone() else {
                return Err(Error::Search("single-qubit search returned no state".into()));
            };
            out.push(ScalingPoint { n: 1, value: rec.value, horizon: rec.horizon });
            let base = cfg.base_grid()?;
            let grid = TimeGrid::uniform(rec.horizon, base.samples() * (rec.horizon / base.horizon()).round() as usize)?;
            for n in 2..=max_qubits {
                let mut c = cfg.clone();
                c.n_qubits = n;
                let channel = c.build_channel(grid)?;
                let rho = (1..n).fold(rho0.clone(), |acc, _| tensor_states(&acc, &rho0));
                let value = measures::lfs_value(channel.as_ref(), &rho)?.value;
                out.push(ScalingPoint { n, value, horizon: rec.horizon });
            }
        }
        MeasureKind::Lfs0 => {
            for n in 1..=max_qubits {
                let mut c = cfg.clone();
                c.n_qubits = n;
                let rec = run_measure(&c)?;
                out.push(ScalingPoint { n, value: rec.value, horizon: rec.horizon });
            }
        }
        MeasureKind::Blp => return Err(Error::config("run.measure", "scaling is defined for lfs and lfs0")),
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `|rho_01|` of the first qubit.
    Coherence,
    MutualInformation,
    TraceDistance,
}

impl Observable {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "coherence" => Ok(Observable::Coherence),
            "mutual_information" => Ok(Observable::MutualInformation),
            "trace_distance" => Ok(Observable::TraceDistance),
            _ => Err(Error::config("trajectory.observable", format!("unknown observable '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub value: f64,
}

/// Time series on the base grid. `rho11` selects the diagonal product input
/// of the mutual information; `pair` names a structured pair for the trace
/// distance. The coherence starts from `|+>` on the first qubit and `|0>` on
/// the others.
pub fn run_trajectory(cfg: &RunConfig, observable: Observable, rho11: Option<f64>, pair: Option<&str>) -> Result<Vec<TrajectoryPoint>> {
    cfg.validate()?;
    let n = cfg.n_qubits;
    let grid = cfg.base_grid()?;
    let channel = cfg.build_channel(grid)?;
    let traj = match observable {
        Observable::Coherence => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut amps = nalgebra::DVector::from_element(1 << n, Complex64::new(0.0, 0.0));
            amps[0] = Complex64::new(h, 0.0);
            amps[1 << (n - 1)] = Complex64::new(h, 0.0);
            let rho = PureState::new(amps, vec![2; n])?.density();
            let mut values = Vec::with_capacity(grid.points());
            for j in 0..grid.points() {
                let m = channel.evolve(j, &rho)?;
                let first = crate::quantum::partial_trace(&m, &[0])?;
                values.push(first.matrix()[(0, 1)].norm());
            }
            measures::Trajectory::new(grid.times(), values)?
        }
        Observable::MutualInformation => {
            let rho = match rho11 {
                Some(p) => diagonal_product(p, n)?,
                None => DensityMatrix::maximally_mixed(vec![2; n]),
            };
            measures::lfs_trajectory(channel.as_ref(), &rho)?
        }
        Observable::TraceDistance => {
            let label = pair.unwrap_or(if n == 1 { "|+>,|->" } else { "|0+>,|0->" });
            let p = structured_pairs(n)?
                .into_iter()
                .find(|p| p.label == label)
                .ok_or_else(|| Error::config("trajectory.pair", format!("unknown pair '{label}'")))?;
            let a = PureState::normalized(p.first, vec![2; n])?.density();
            let b = PureState::normalized(p.second, vec![2; n])?.density();
            measures::trace_distance_trajectory(channel.as_ref(), &a, &b)?
        }
    };
    Ok(traj.times().iter().zip(traj.values()).map(|(&t, &value)| TrajectoryPoint { t, value }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ini_parsing_and_validation() {
        let cfg = RunConfig::from_ini_str("[run]\nchannel = ad\nmeasure = lfs\n[ad]\nlambda = 0.2\n[search]\nseed = 9\n").unwrap();
        assert_eq!(cfg.channel, ChannelKind::Ad);
        assert_eq!(cfg.ad.lambda, 0.2);
        assert_eq!(cfg.search_config().mode, SearchMode::SingleQubitFull);
        assert_eq!(cfg.search.seed, 9);
        let err = RunConfig::from_ini_str("[pd]\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("pd.foo"));
        assert_eq!(err.exit_code(), 2);
        assert!(RunConfig::from_ini_str("[run]\nenv = common\n").is_err());
        assert!(RunConfig::from_ini_str("[pd]\ns = -1\n").is_err());
        assert!(RunConfig::from_ini_str("[run]\nchannel = bec\nenv = common\nn_qubits = 2\n[bec]\nD_nm = 100\n").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.search.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn default_grids() {
        let mut cfg = RunConfig::default();
        let g = cfg.base_grid().unwrap();
        assert_eq!(g.samples(), 4000);
        assert!((g.horizon() - 40.0).abs() < 1e-12);
        cfg.channel = ChannelKind::Ad;
        assert_eq!(cfg.base_grid().unwrap().samples(), 6000);
        cfg.ad.lambda = 0.05;
        assert!((cfg.base_grid().unwrap().horizon() - 300.0).abs() < 1e-9);
        cfg.channel = ChannelKind::Bec;
        assert_eq!(cfg.base_grid().unwrap().samples(), 500);
    }

    #[test]
    fn markovian_ohmic_dephasing_gives_zero() {
        let mut cfg = RunConfig::default();
        cfg.pd.s = 1.0;
        cfg.measure = MeasureKind::Lfs;
        cfg.numerics.max_doublings = Some(1);
        let rec = run_measure(&cfg).unwrap();
        assert_eq!(rec.value, 0.0);
        assert!(rec.converged);
    }

    #[test]
    fn coherence_trajectory_is_half_the_factor() {
        let cfg = RunConfig::default();
        let pts = run_trajectory(&cfg, Observable::Coherence, None, None).unwrap();
        let p = cfg.pd.params();
        for pt in pts.iter().step_by(500) {
            let r = dephasing::dephasing_factor(pt.t, &p, &QuadConfig::default()).unwrap();
            assert!((pt.value - 0.5 * r).abs() < 1e-10);
        }
    }
}
