//! Pure dephasing by an Ohmic-family bath.
//!
//! The qubit frequency only adds a local unitary common to every compared
//! state, so it never enters the dynamics here.

use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::channel::{apply_collective_dephasing, apply_independent, CollectiveDephasingChannel, KrausSet, LocalKrausChannel, TimeGrid};
use crate::error::{Error, Result};
use crate::numerics::{quad_adaptive, QuadConfig};
use crate::quantum::DensityMatrix;
use crate::rate::{RateClosure, RateFunction};

/// Spectral density `J(w) ∝ eta w^s wc^(1-s) e^(-w/wc)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingParams {
    pub s: f64,
    pub eta: f64,
    pub omega_c: f64,
    /// Recorded only.
    pub omega_0: f64,
    /// Coherences decay as `exp(-exponent_scale * Lambda(t))`.
    pub exponent_scale: f64,
}

pub const DEFAULT_EXPONENT_SCALE: f64 = 0.5;

impl Default for DephasingParams {
    fn default() -> Self {
        DephasingParams { s: 3.0, eta: 2.0, omega_c: 1.0, omega_0: 1.0, exponent_scale: DEFAULT_EXPONENT_SCALE }
    }
}

impl DephasingParams {
    pub fn new(s: f64, eta: f64, omega_c: f64) -> Result<Self> {
        let p = DephasingParams { s, eta, omega_c, ..Default::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pd.s", self.s), ("pd.eta", self.eta), ("pd.omega_c", self.omega_c)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.exponent_scale > 0.0) || !self.exponent_scale.is_finite() {
            return Err(Error::config("pd.exponent_scale", format!("must be positive, got {}", self.exponent_scale)));
        }
        Ok(())
    }

    /// `gamma(t) >= 0` for every `t` exactly when `s <= 1`.
    pub fn is_markovian(&self) -> bool {
        self.s <= 1.0
    }
}

/// `eta wc (1+(wc t)^2)^(-s/2) Gamma(s) sin(s arctan(wc t))`.
pub fn dephasing_rate(t: f64, p: &DephasingParams) -> f64 {
    let x = p.omega_c * t;
    p.eta * p.omega_c * (1.0 + x * x).powf(-0.5 * p.s) * gamma(p.s) * (p.s * x.atan()).sin()
}

/// `Lambda(t) = int_0^t gamma` by adaptive quadrature.
pub fn decoherence_exponent(t: f64, p: &DephasingParams, quad: &QuadConfig) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidState(format!("negative time {t}")));
    }
    // split at the sign changes of sin(s arctan x) to keep panels smooth
    let mut cuts = vec![0.0];
    let mut m = 1.0;
    while m * std::f64::consts::PI < p.s * std::f64::consts::FRAC_PI_2 {
        let tc = (m * std::f64::consts::PI / p.s).tan() / p.omega_c;
        if tc < t {
            cuts.push(tc);
        }
        m += 1.0;
    }
    cuts.push(t);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += quad_adaptive(|u| dephasing_rate(u, p), w[0], w[1], quad)?;
    }
    Ok(acc)
}

/// `r(t) = exp(-exponent_scale * Lambda(t))`.
pub fn dephasing_factor(t: f64, p: &DephasingParams, quad: &QuadConfig) -> Result<f64> {
    Ok((-p.exponent_scale * decoherence_exponent(t, p, quad)?).exp())
}

/// The rate tabulated on a grid with cached cumulative integral.
pub fn tabulate_rate(p: &DephasingParams, grid: &TimeGrid, quad: &QuadConfig) -> Result<RateFunction> {
    let pc = *p;
    let f: RateClosure = Arc::new(move |t| dephasing_rate(t, &pc));
    RateFunction::tabulate(f, grid.step(), grid.points(), *quad)
}

/// `r(t_j)` at every grid point.
pub fn factors_on_grid(p: &DephasingParams, grid: &TimeGrid, quad: &QuadConfig) -> Result<Vec<f64>> {
    let table = tabulate_rate(p, grid, quad)?;
    Ok(table.cumulative_values().iter().map(|l| (-p.exponent_scale * l).exp()).collect())
}

/// `K1 = diag(1, r)`, `K2 = diag(0, sqrt(1 - r^2))`.
pub fn pd_kraus_from_factor(r: f64) -> KrausSet {
    let c = |x: f64| Complex64::new(x, 0.0);
    let z = c(0.0);
    KrausSet::new(vec![Matrix2::new(c(1.0), z, z, c(r)), Matrix2::new(z, z, z, c((1.0 - r * r).max(0.0).sqrt()))])
}

pub fn pd_kraus(t: f64, p: &DephasingParams, quad: &QuadConfig) -> Result<KrausSet> {
    Ok(pd_kraus_from_factor(dephasing_factor(t, p, quad)?))
}

fn check_qubits(rho: &DensityMatrix, n: usize) -> Result<usize> {
    let dims = rho.dims();
    if n == 0 || dims.len() < n || dims[..n].iter().any(|&d| d != 2) {
        return Err(Error::Dimension(format!("state dims {dims:?} do not start with {n} qubits")));
    }
    Ok(rho.dim() >> n)
}

/// Every word of Kraus operators on the first `n` qubits, ancilla untouched.
pub fn pd_apply_independent(rho_sa: &DensityMatrix, n: usize, t: f64, p: &DephasingParams, quad: &QuadConfig) -> Result<DensityMatrix> {
    let da = check_qubits(rho_sa, n)?;
    let set = pd_kraus(t, p, quad)?;
    DensityMatrix::from_parts(apply_independent(&set, n, rho_sa.matrix(), da), rho_sa.dims().to_vec())
}

/// Exact collective-dephasing propagator on two qubits (bath phase dropped).
pub fn pd_apply_common(rho: &DensityMatrix, t: f64, p: &DephasingParams, quad: &QuadConfig) -> Result<DensityMatrix> {
    let da = check_qubits(rho, 2)?;
    let r = dephasing_factor(t, p, quad)?;
    DensityMatrix::from_parts(apply_collective_dephasing(rho.matrix(), r, da), rho.dims().to_vec())
}

pub fn independent_channel(p: &DephasingParams, n: usize, grid: TimeGrid, quad: &QuadConfig) -> Result<LocalKrausChannel> {
    let factors = factors_on_grid(p, &grid, quad)?;
    let sets = factors.iter().map(|&r| pd_kraus_from_factor(r)).collect();
    LocalKrausChannel::new(n, grid, sets, format!("pure dephasing s={}", p.s))
}

pub fn common_channel(p: &DephasingParams, grid: TimeGrid, quad: &QuadConfig) -> Result<CollectiveDephasingChannel> {
    CollectiveDephasingChannel::new(grid, factors_on_grid(p, &grid, quad)?)
}
