//! Impurity qubits dephased by the Bogoliubov modes of a condensate.
//!
//! Wave numbers are measured in units of `1/sigma` (`x = k sigma`), time in
//! seconds and rates in 1/s. All unit conversions happen in [`BecParams`].

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::{apply_independent, LocalKrausChannel, SampledSuperoperator, TimeGrid};
use crate::dephasing::pd_kraus_from_factor;
use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, gaussian_cutoff, ode_evolve, quad_gaussian_damped_panels, OdeConfig, QuadConfig};
use crate::quantum::{CMatrix, DensityMatrix};
use crate::rate::RateFunction;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// 87Rb
pub const MASS_ENVIRONMENT_U: f64 = 86.909;
/// 23Na
pub const MASS_SYSTEM_U: f64 = 22.990;
pub const A_RB: f64 = 99.0 * BOHR_RADIUS;

/// How the configured separation maps onto the distance parameter `D` of the
/// correlated rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationReading {
    /// `D` equals the configured separation.
    Direct,
    /// The configured separation is `2D`.
    Doubled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BecParams {
    pub lattice_wavelength: f64,
    pub sigma: f64,
    pub separation: f64,
    pub reading: SeparationReading,
    pub n0: f64,
    pub a_e: f64,
    pub a_se: f64,
    pub m_e: f64,
    pub m_s: f64,
}

impl Default for BecParams {
    fn default() -> Self {
        BecParams {
            lattice_wavelength: 600e-9,
            sigma: 45e-9,
            separation: 600e-9,
            reading: SeparationReading::Direct,
            n0: 1e20,
            a_e: 0.5 * A_RB,
            a_se: 55.0 * BOHR_RADIUS,
            m_e: MASS_ENVIRONMENT_U * ATOMIC_MASS_UNIT,
            m_s: MASS_SYSTEM_U * ATOMIC_MASS_UNIT,
        }
    }
}

impl BecParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("bec.lattice_wavelength_nm", self.lattice_wavelength),
            ("bec.sigma_nm", self.sigma),
            ("bec.D_nm", self.separation),
            ("bec.n0", self.n0),
            ("bec.a_E_over_aRb", self.a_e),
            ("bec.a_SE_a0", self.a_se),
            ("bec.m_E", self.m_e),
            ("bec.m_S", self.m_s),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Additionally requires `2D >= 8L` for correlated runs.
    pub fn validate_common(&self) -> Result<()> {
        self.validate()?;
        if 2.0 * self.distance_parameter() < 8.0 * self.site_width() - 1e-18 {
            return Err(Error::config(
                "bec.D_nm",
                format!("2D = {:e} m is below 8L = {:e} m", 2.0 * self.distance_parameter(), 8.0 * self.site_width()),
            ));
        }
        Ok(())
    }

    /// `L = lattice_wavelength / 4`.
    pub fn site_width(&self) -> f64 {
        0.25 * self.lattice_wavelength
    }

    pub fn distance_parameter(&self) -> f64 {
        match self.reading {
            SeparationReading::Direct => self.separation,
            SeparationReading::Doubled => 0.5 * self.separation,
        }
    }

    pub fn reduced_mass(&self) -> f64 {
        self.m_s * self.m_e / (self.m_s + self.m_e)
    }

    pub fn g_e(&self) -> f64 {
        4.0 * PI * HBAR * HBAR * self.a_e / self.m_e
    }

    pub fn g_se(&self) -> f64 {
        2.0 * PI * HBAR * HBAR * self.a_se / self.reduced_mass()
    }

    /// `eps_k` at `k = 1/sigma`.
    pub fn energy_scale(&self) -> f64 {
        HBAR * HBAR / (2.0 * self.m_e * self.sigma * self.sigma)
    }

    /// `b = 2 g_E n0 / e_sigma`, so that `E = e_sigma x sqrt(x^2 + b)`.
    pub fn gap_ratio(&self) -> f64 {
        2.0 * self.g_e() * self.n0 / self.energy_scale()
    }

    /// `E_k / hbar` at `x = k sigma`.
    pub fn frequency(&self, x: f64) -> f64 {
        self.energy_scale() / HBAR * x * (x * x + self.gap_ratio()).sqrt()
    }

    fn frequency_slope(&self, x: f64) -> f64 {
        let b = self.gap_ratio();
        let r = (x * x + b).sqrt();
        self.energy_scale() / HBAR * (r + x * x / r)
    }

    /// Overall factor of the local rate in x units, including the 1/2 from
    /// `sin(a) cos(a) = sin(2a)/2`.
    fn prefactor(&self) -> f64 {
        let g = self.g_se();
        0.5 * g * g * self.n0 / (HBAR * PI * PI * self.sigma.powi(3) * self.energy_scale())
    }

    /// `x^2 e^{-x^2/2} (1 - sinc(2kL)) / (x^2 + b)`.
    pub fn local_amplitude(&self, x: f64) -> f64 {
        let c = 2.0 * self.site_width() / self.sigma;
        x * x * (-0.5 * x * x).exp() * one_minus_sinc(c * x) / (x * x + self.gap_ratio())
    }

    /// As [`Self::local_amplitude`] with the geometric factor
    /// `sinc(2k(D+L)) + sinc(2k(D-L)) - 2 sinc(2kD)` and half the prefactor.
    pub fn correlated_amplitude(&self, x: f64) -> f64 {
        let a = 2.0 * self.distance_parameter() / self.sigma * x;
        let c = 2.0 * self.site_width() / self.sigma * x;
        0.5 * x * x * (-0.5 * x * x).exp() * sinc_second_difference(a, c) / (x * x + self.gap_ratio())
    }
}

/// `1 - sin(z)/z` without cancellation near zero.
pub fn one_minus_sinc(z: f64) -> f64 {
    if z.abs() < 0.5 {
        let z2 = z * z;
        let mut term = 1.0;
        let mut acc = 0.0;
        for n in 1..12 {
            term *= -z2 / ((2 * n) as f64 * (2 * n + 1) as f64);
            acc -= term;
        }
        acc
    } else {
        1.0 - z.sin() / z
    }
}

fn sinc(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        z.sin() / z
    }
}

/// `sinc(a+c) + sinc(a-c) - 2 sinc(a)` by its even power series when the
/// arguments are small.
pub fn sinc_second_difference(a: f64, c: f64) -> f64 {
    if (a.abs() + c.abs()) < 1.0 {
        let mut acc = 0.0;
        let mut fact = 1.0;
        for n in 1..16 {
            fact *= (2 * n) as f64 * (2 * n + 1) as f64;
            let k = 2 * n;
            let bracket = (a + c).powi(k) + (a - c).powi(k) - 2.0 * a.powi(k);
            let sign = if n % 2 == 1 { -1.0 } else { 1.0 };
            acc += sign * bracket / fact;
        }
        acc
    } else {
        sinc(a + c) + sinc(a - c) - 2.0 * sinc(a)
    }
}

/// Panel boundaries on `[0, x_max]` keeping the phase change `t w'(x) dx`
/// across each panel below `max_phase` and the width below `max_width`.
pub fn phase_panels(p: &BecParams, t_max: f64, max_phase: f64, max_width: f64) -> Vec<f64> {
    let x_max = gaussian_cutoff(1.0);
    let mut cuts = vec![0.0];
    let mut x: f64 = 0.0;
    while x < x_max {
        // w' grows with x, so the slope at the far end of a full-width panel bounds it
        let slope = p.frequency_slope((x + max_width).min(x_max)) * t_max;
        let w = if slope > 0.0 { (max_phase / slope).min(max_width) } else { max_width };
        x = (x + w).min(x_max);
        cuts.push(x);
    }
    cuts
}

fn rate_integral(t: f64, p: &BecParams, quad: &QuadConfig, amplitude: impl Fn(f64) -> f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidState(format!("negative time {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let x_max = gaussian_cutoff(1.0);
    let panels = (t * p.frequency_slope(x_max) * x_max / PI).ceil() as usize + 1;
    // the amplitudes already carry e^{-x^2/2}
    let f = |x: f64| amplitude(x) * (p.frequency(x) * t).sin();
    Ok(p.prefactor() * quad_gaussian_damped_panels(f, 1.0, panels, quad)?)
}

/// `gamma1(t)`: local dephasing rate of one impurity.
pub fn bec_gamma1(t: f64, p: &BecParams, quad: &QuadConfig) -> Result<f64> {
    rate_integral(t, p, quad, |x| p.local_amplitude(x))
}

/// `gamma2(t)`: correlated rate of a pair at distance parameter `D`.
pub fn bec_gamma2(t: f64, p: &BecParams, quad: &QuadConfig) -> Result<f64> {
    rate_integral(t, p, quad, |x| p.correlated_amplitude(x))
}

/// Both rates tabulated on `t_j = j * step` with exact cumulative integrals.
#[derive(Debug, Clone)]
pub struct BecRates {
    pub gamma1: RateFunction,
    pub gamma2: RateFunction,
}

/// Tabulation options: composite Gauss–Legendre nodes per panel and the
/// phase budget per panel at the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabulationConfig {
    pub nodes_per_panel: usize,
    pub max_phase: f64,
    pub max_width: f64,
}

impl Default for TabulationConfig {
    fn default() -> Self {
        TabulationConfig { nodes_per_panel: 16, max_phase: PI, max_width: 0.05 }
    }
}

impl TabulationConfig {
    /// Half the panel phase and width.
    pub fn tightened(&self) -> Self {
        TabulationConfig { max_phase: 0.5 * self.max_phase, max_width: 0.5 * self.max_width, ..*self }
    }
}

impl BecRates {
    /// Evaluates `gamma_i(t) = C int A_i sin(w t)` and
    /// `Lambda_i(t) = C int A_i (1 - cos(w t))/w` on the whole table with one
    /// phasor per quadrature node, advanced by `exp(i w step)` per row.
    pub fn tabulate(p: &BecParams, step: f64, nodes: usize, cfg: &TabulationConfig) -> Result<Self> {
        p.validate()?;
        if nodes < 4 || !(step > 0.0) {
            return Err(Error::config("numerics.samples", "rate table needs a positive step and at least 4 nodes"));
        }
        let t_max = step * (nodes - 1) as f64;
        let cuts = phase_panels(p, t_max, cfg.max_phase, cfg.max_width);
        let (gx, gw) = gauss_legendre(cfg.nodes_per_panel);
        let c = p.prefactor();
        let mut omega = Vec::new();
        let mut w1 = Vec::new();
        let mut w2 = Vec::new();
        for pair in cuts.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (z, w) in gx.iter().zip(&gw) {
                let x = mid + half * z;
                omega.push(p.frequency(x));
                w1.push(c * w * half * p.local_amplitude(x));
                w2.push(c * w * half * p.correlated_amplitude(x));
            }
        }
        let m = omega.len();
        // half-angle phasors u = exp(i w t / 2): sin(w t) = 2 Re u Im u and
        // 1 - cos(w t) = 2 (Im u)^2 without cancellation
        let rot: Vec<Complex64> = omega.iter().map(|&o| Complex64::from_polar(1.0, 0.5 * o * step)).collect();
        let inv_omega: Vec<f64> = omega.iter().map(|&o| if o > 0.0 { 1.0 / o } else { 0.0 }).collect();
        let mut u = vec![Complex64::new(1.0, 0.0); m];
        let mut g1 = Vec::with_capacity(nodes);
        let mut g2 = Vec::with_capacity(nodes);
        let mut l1 = Vec::with_capacity(nodes);
        let mut l2 = Vec::with_capacity(nodes);
        const RESEED: usize = 256;
        for j in 0..nodes {
            if j % RESEED == 0 && j > 0 {
                let t = j as f64 * step;
                for i in 0..m {
                    u[i] = Complex64::from_polar(1.0, 0.5 * omega[i] * t);
                }
            }
            let (mut s1, mut s2, mut c1, mut c2) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..m {
                let ui = u[i];
                let sn = 2.0 * ui.re * ui.im;
                let k = 2.0 * ui.im * ui.im * inv_omega[i];
                s1 += w1[i] * sn;
                s2 += w2[i] * sn;
                c1 += w1[i] * k;
                c2 += w2[i] * k;
                u[i] = ui * rot[i];
            }
            g1.push(s1);
            g2.push(s2);
            l1.push(c1);
            l2.push(c2);
        }
        Ok(BecRates { gamma1: RateFunction::from_tables(step, g1, l1)?, gamma2: RateFunction::from_tables(step, g2, l2)? })
    }

    /// The same local rate with the correlated rate switched off.
    pub fn independent(&self) -> Result<Self> {
        Ok(BecRates { gamma1: self.gamma1.clone(), gamma2: RateFunction::zero(self.gamma1.step(), self.gamma1.nodes())? })
    }

    /// `gamma2 = gamma1` (perfectly correlated baths).
    pub fn perfectly_correlated(&self) -> Self {
        BecRates { gamma1: self.gamma1.clone(), gamma2: self.gamma1.clone() }
    }
}

/// Rate-table refinement relative to the trajectory grid.
pub const RATE_REFINEMENT: usize = 4;

pub fn rates_for_grid(p: &BecParams, grid: &TimeGrid, cfg: &TabulationConfig) -> Result<BecRates> {
    let step = grid.step() / RATE_REFINEMENT as f64;
    BecRates::tabulate(p, step, grid.samples() * RATE_REFINEMENT + 1, cfg)
}

/// `r_BEC(t) = exp(-2 int_0^t gamma1)`.
pub fn bec_single_qubit_factor(t: f64, rates: &BecRates) -> Result<f64> {
    Ok((-2.0 * rates.gamma1.cumulative(t)?).exp())
}

pub fn factors_on_grid(rates: &BecRates, grid: &TimeGrid) -> Result<Vec<f64>> {
    (0..grid.points()).map(|j| bec_single_qubit_factor(grid.time(j), rates)).collect()
}

pub fn bec_apply_independent(rho_sa: &DensityMatrix, n: usize, t: f64, rates: &BecRates) -> Result<DensityMatrix> {
    let dims = rho_sa.dims();
    if n == 0 || n > 4 || dims.len() < n || dims[..n].iter().any(|&d| d != 2) {
        return Err(Error::Dimension(format!("state dims {dims:?} do not start with {n} qubits (at most 4)")));
    }
    let set = pd_kraus_from_factor(bec_single_qubit_factor(t, rates)?);
    DensityMatrix::from_parts(apply_independent(&set, n, rho_sa.matrix(), rho_sa.dim() >> n), dims.to_vec())
}

pub fn independent_channel(rates: &BecRates, n: usize, grid: TimeGrid) -> Result<LocalKrausChannel> {
    let factors = factors_on_grid(rates, &grid)?;
    LocalKrausChannel::new(n, grid, factors.into_iter().map(pd_kraus_from_factor).collect(), "BEC dephasing")
}

/// Eigenvalues of `sigma_z1 - sigma_z2` and `sigma_z1 + sigma_z2` on the
/// two-qubit basis, `sigma_z|0> = +|0>`.
const L_MINUS: [f64; 4] = [0.0, 2.0, -2.0, 0.0];
const L_PLUS: [f64; 4] = [2.0, 0.0, 0.0, -2.0];

/// Right-hand side of the two-qubit master equation for one 4×4 block:
/// `(g1-g2)/2 D[L-] + (g1+g2)/2 D[L+]` with `D[L]rho = L rho L - {L^2, rho}/2`.
fn two_qubit_rhs(g1: f64, g2: f64, rho: &[Complex64], out: &mut [Complex64]) {
    let cm = 0.5 * (g1 - g2);
    let cp = 0.5 * (g1 + g2);
    for a in 0..4 {
        for b in 0..4 {
            let dm = L_MINUS[a] * L_MINUS[b] - 0.5 * (L_MINUS[a] * L_MINUS[a] + L_MINUS[b] * L_MINUS[b]);
            let dp = L_PLUS[a] * L_PLUS[b] - 0.5 * (L_PLUS[a] * L_PLUS[a] + L_PLUS[b] * L_PLUS[b]);
            out[a * 4 + b] = rho[a * 4 + b] * (cm * dm + cp * dp);
        }
    }
}

/// RK4 configuration used for the two-qubit equation on `grid`.
pub fn default_ode(grid: &TimeGrid) -> OdeConfig {
    OdeConfig { step: 0.5 * grid.step(), tolerance: 1e-8, max_halvings: 5 }
}

/// Integrates the two-qubit master equation for all 16 basis operators and
/// returns the sampled map.
pub fn two_qubit_channel(rates: &BecRates, grid: TimeGrid, ode: &OdeConfig) -> Result<SampledSuperoperator> {
    if rates.gamma1.horizon() < grid.horizon() * (1.0 - 1e-12) {
        return Err(Error::Dimension("rate table shorter than the trajectory grid".into()));
    }
    let mut y0 = vec![Complex64::default(); 256];
    for col in 0..16 {
        y0[col * 16 + col] = Complex64::new(1.0, 0.0);
    }
    let g1 = &rates.gamma1;
    let g2 = &rates.gamma2;
    let horizon = g1.horizon();
    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let t = t.min(horizon);
        let a = g1.rate(t).expect("time within the checked table range");
        let b = g2.rate(t).expect("time within the checked table range");
        for col in 0..16 {
            two_qubit_rhs(a, b, &y[col * 16..(col + 1) * 16], &mut dy[col * 16..(col + 1) * 16]);
        }
    };
    let outputs = ode_evolve(rhs, &y0, &grid.times(), ode)?;
    let images = outputs.iter().map(|y| (0..16).map(|col| CMatrix::from_fn(4, 4, |i, j| y[col * 16 + i * 4 + j])).collect()).collect();
    SampledSuperoperator::from_basis_images(2, grid, images, "BEC two-qubit master equation")
}

pub fn bec_evolve_two_qubit(rho_sa0: &DensityMatrix, grid: TimeGrid, rates: &BecRates, ode: &OdeConfig) -> Result<Vec<DensityMatrix>> {
    use crate::channel::ChannelEvolution;
    let ch = two_qubit_channel(rates, grid, ode)?;
    (0..grid.points()).map(|j| ch.evolve(j, rho_sa0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelEvolution;
    use crate::numerics::quad_adaptive;
    use crate::quantum::{random_density_matrix, tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn q() -> QuadConfig {
        QuadConfig { abs_tol: 1e-14, rel_tol: 1e-11, max_depth: 48 }
    }

    fn grid() -> TimeGrid {
        TimeGrid::uniform(1e-3, 500).unwrap()
    }

    fn rates() -> &'static BecRates {
        static R: OnceLock<BecRates> = OnceLock::new();
        R.get_or_init(|| rates_for_grid(&BecParams::default(), &grid(), &TabulationConfig::default()).unwrap())
    }

    /// 10^6-point trapezoid rule on `[0, x_max]` for `C int A sin(w t)`.
    fn trapezoid(t: f64, p: &BecParams, amp: impl Fn(f64) -> f64) -> f64 {
        let n = 1_000_000;
        let xm = gaussian_cutoff(1.0);
        let h = xm / n as f64;
        let f = |x: f64| amp(x) * (p.frequency(x) * t).sin();
        let mut s = 0.5 * (f(0.0) + f(xm));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        p.prefactor() * s * h
    }

    #[test]
    fn derived_constants() {
        let p = BecParams::default();
        assert!((p.site_width() - 150e-9).abs() < 1e-20);
        assert!((p.gap_ratio() - 0.0267).abs() < 2e-4);
        assert!((p.energy_scale() / HBAR - 1.804e5).abs() < 1e3);
        assert!(p.validate_common().is_ok());
        let close = BecParams { separation: 500e-9, ..p };
        assert!(close.validate_common().is_err());
        let doubled = BecParams { reading: SeparationReading::Doubled, separation: 1200e-9, ..p };
        assert!((doubled.distance_parameter() - 600e-9).abs() < 1e-20);
    }

    #[test]
    fn series_branches_match_direct_formulas() {
        for z in [0.1, 0.3, 0.49] {
            assert!((one_minus_sinc(z) - (1.0 - z.sin() / z)).abs() < 1e-15);
        }
        for (a, c) in [(0.3, 0.1), (0.6, 0.3), (0.05, 0.02)] {
            let direct = sinc(a + c) + sinc(a - c) - 2.0 * sinc(a);
            assert!((sinc_second_difference(a, c) - direct).abs() < 1e-14);
        }
        // leading terms: (2kL)^2/6 and -(c^2)/3 + (a^2 c^2 + c^4/6)/10 ...
        let z = 1e-5;
        assert!((one_minus_sinc(z) / (z * z / 6.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn integrand_is_finite_at_small_k() {
        let p = BecParams::default();
        let x: f64 = 1e-5;
        let c = 2.0 * p.site_width() / p.sigma;
        let series = x.powi(4) * c * c / 6.0 / p.gap_ratio();
        assert!((p.local_amplitude(x) / series - 1.0).abs() < 1e-6);
        // (a+c)^2 + (a-c)^2 - 2a^2 = 2c^2 at lowest order, times -1/6
        let series2 = 0.5 * x.powi(4) * (-(c * c) / 3.0) / p.gap_ratio();
        assert!((p.correlated_amplitude(x) / series2 - 1.0).abs() < 1e-6);
        assert!(p.local_amplitude(0.0) == 0.0);
    }

    #[test]
    fn rates_vanish_at_zero_and_match_trapezoid() {
        let p = BecParams::default();
        assert_eq!(bec_gamma1(0.0, &p, &q()).unwrap(), 0.0);
        assert_eq!(bec_gamma2(0.0, &p, &q()).unwrap(), 0.0);
        for t in [2e-6, 1e-5, 5e-5, 2e-4, 1e-3] {
            let a = bec_gamma1(t, &p, &q()).unwrap();
            let b = trapezoid(t, &p, |x| p.local_amplitude(x));
            assert!((a - b).abs() < 1e-6 * b.abs(), "gamma1 t={t}: {a} vs {b}");
            let a = bec_gamma2(t, &p, &q()).unwrap();
            let b = trapezoid(t, &p, |x| p.correlated_amplitude(x));
            assert!((a - b).abs() < 1e-6 * b.abs(), "gamma2 t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn correlated_rate_decays_with_distance() {
        let p = BecParams::default();
        let far = BecParams { separation: 100.0 * p.lattice_wavelength, ..p };
        let mid = BecParams { separation: 10.0 * p.lattice_wavelength, ..p };
        let ts: Vec<f64> = (1..=20).map(|i| i as f64 * 5e-6).collect();
        let max_g1 = ts.iter().map(|&t| bec_gamma1(t, &p, &q()).unwrap().abs()).fold(0.0, f64::max);
        for &t in &ts {
            let g_far = bec_gamma2(t, &far, &q()).unwrap().abs();
            let g_mid = bec_gamma2(t, &mid, &q()).unwrap().abs();
            assert!(g_far < 1e-3 * max_g1, "t={t}");
            assert!(g_mid > g_far, "t={t}");
        }
    }

    #[test]
    fn batch_table_matches_pointwise_rates() {
        let p = BecParams::default();
        let r = rates();
        let step = r.gamma1.step();
        for j in [1usize, 3, 17, 250, 1001, 1999, 2000] {
            let t = j as f64 * step;
            let a = r.gamma1.values()[j];
            let b = bec_gamma1(t, &p, &q()).unwrap();
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "gamma1 j={j}: {a} vs {b}");
            let a = r.gamma2.values()[j];
            let b = bec_gamma2(t, &p, &q()).unwrap();
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "gamma2 j={j}: {a} vs {b}");
        }
    }

    #[test]
    fn cumulative_table_matches_time_quadrature() {
        // time-domain route: adaptive quadrature of the pointwise rate
        let p = BecParams::default();
        let r = rates();
        let step = r.gamma1.step();
        let coarse = QuadConfig { abs_tol: 1e-10, rel_tol: 1e-8, max_depth: 30 };
        for j in [40usize, 400] {
            let mut acc = 0.0;
            for k in 0..j / 4 {
                let (a, b) = (4.0 * k as f64 * step, 4.0 * (k + 1) as f64 * step);
                acc += quad_adaptive(|s| bec_gamma1(s, &p, &coarse).unwrap(), a, b, &coarse).unwrap();
            }
            let tab = r.gamma1.cumulative_values()[j];
            assert!((acc - tab).abs() < 1e-8 * tab.abs().max(1e-3), "j={j}: {acc} vs {tab}");
        }
    }

    #[test]
    fn single_qubit_factor_recoheres() {
        let r = rates();
        let f = factors_on_grid(r, &grid()).unwrap();
        assert_eq!(f[0], 1.0);
        assert!(f.windows(2).any(|w| w[1] > w[0] + 1e-12));
        assert!(f.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-12));
        assert!(r.gamma1.values().iter().any(|&g| g < 0.0));
    }

    #[test]
    fn uncorrelated_master_equation_reduces_to_local_factor() {
        let g = grid();
        let ind = rates().independent().unwrap();
        let ch = two_qubit_channel(&ind, g, &default_ode(&g)).unwrap();
        let local = independent_channel(rates(), 2, g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rho = random_density_matrix(&mut rng, vec![2, 2, 2]);
        let mut worst: f64 = 0.0;
        for j in (0..g.points()).step_by(5) {
            let a = ch.evolve(j, &rho).unwrap();
            let b = local.evolve(j, &rho).unwrap();
            worst = worst.max((a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max));
            let r = bec_single_qubit_factor(g.time(j), rates()).unwrap();
            let e = CMatrix::from_fn(4, 4, |i, k| if (i, k) == (0, 2) { Complex64::new(1.0, 0.0) } else { Complex64::default() });
            let out = ch.apply(j, &e, 1).unwrap();
            assert!((out[(0, 2)].re - r).abs() < 1e-6);
        }
        assert!(worst < 1e-6, "worst {worst:e}");
    }

    /// `L ρ L - {L², ρ}/2` as a 16×16 matrix on row-major `vec(ρ)`.
    fn dissipator(l: &[f64; 4]) -> CMatrix {
        let lm = CMatrix::from_fn(4, 4, |i, j| if i == j { Complex64::new(l[i], 0.0) } else { Complex64::default() });
        let l2 = &lm * &lm;
        let id = CMatrix::identity(4, 4);
        tensor(&lm, &lm.transpose()) - (tensor(&l2, &id) + tensor(&id, &l2.transpose())) * Complex64::new(0.5, 0.0)
    }

    /// The generators commute at all times, so the propagator is the matrix
    /// exponential of the integrated generator.
    fn dense_propagator(r: &BecRates, t: f64) -> CMatrix {
        let l1 = r.gamma1.cumulative(t).unwrap();
        let l2 = r.gamma2.cumulative(t).unwrap();
        let gen = dissipator(&L_MINUS) * Complex64::new(0.5 * (l1 - l2), 0.0) + dissipator(&L_PLUS) * Complex64::new(0.5 * (l1 + l2), 0.0);
        gen.exp()
    }

    #[test]
    fn master_equation_matches_dense_propagator() {
        let g = grid();
        let r = rates();
        let ch = two_qubit_channel(r, g, &default_ode(&g)).unwrap();
        let rho = DensityMatrix::diagonal(&[0.1, 0.2, 0.3, 0.4], vec![2, 2]).unwrap();
        for j in (0..g.points()).step_by(50) {
            assert!((ch.evolve(j, &rho).unwrap().matrix() - rho.matrix()).norm() < 1e-14);
        }
        for rates in [r.clone(), r.perfectly_correlated()] {
            let ch = two_qubit_channel(&rates, g, &default_ode(&g)).unwrap();
            let mut worst: f64 = 0.0;
            for j in (0..g.points()).step_by(25) {
                let diff = ch.dense(j) - dense_propagator(&rates, g.time(j));
                worst = worst.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
            assert!(worst < 1e-7, "worst {worst:e}");
        }
        // |01><10| is invariant when the baths are perfectly correlated
        let ch = two_qubit_channel(&r.perfectly_correlated(), g, &default_ode(&g)).unwrap();
        for j in (0..g.points()).step_by(25) {
            assert!((ch.dense(j)[(6, 6)].re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn correlations_change_the_antisymmetric_coherence() {
        let g = grid();
        let full = two_qubit_channel(rates(), g, &default_ode(&g)).unwrap();
        let ind = two_qubit_channel(&rates().independent().unwrap(), g, &default_ode(&g)).unwrap();
        let mut e = CMatrix::zeros(4, 4);
        e[(1, 2)] = Complex64::new(1.0, 0.0);
        let diff = (0..g.points())
            .map(|j| (full.apply(j, &e, 1).unwrap()[(1, 2)].norm() - ind.apply(j, &e, 1).unwrap()[(1, 2)].norm()).abs())
            .fold(0.0, f64::max);
        assert!(diff > 1e-6);
    }

    #[test]
    fn independent_extension_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_density_matrix(&mut rng, vec![2]);
        let t = 7e-4;
        let one = bec_apply_independent(&a, 1, t, rates()).unwrap();
        let r = bec_single_qubit_factor(t, rates()).unwrap();
        assert!((one.matrix()[(0, 1)] - a.matrix()[(0, 1)] * r).norm() < 1e-15);
        let two = bec_apply_independent(&crate::quantum::tensor_states(&a, &a), 2, t, rates()).unwrap();
        assert!((two.matrix() - tensor(one.matrix(), one.matrix())).norm() < 1e-14);
    }
}
