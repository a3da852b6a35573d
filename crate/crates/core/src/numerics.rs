//! Numerical kernels shared by the channel models: adaptive quadrature,
//! Gaussian-damped semi-infinite integrals, fixed-grid RK4 with step-halving
//! verification, extremum refinement and a small Nelder–Mead polisher.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerances for [`quad_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { abs_tol: 1e-13, rel_tol: 1e-11, max_depth: 48 }
    }
}

impl QuadConfig {
    pub fn new(abs_tol: f64, rel_tol: f64, max_depth: usize) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::config("abs_tol", "must be > 0"));
        }
        if !(rel_tol > 0.0) {
            return Err(Error::config("rel_tol", "must be > 0"));
        }
        if max_depth < 1 {
            return Err(Error::config("max_depth", "must be >= 1"));
        }
        Ok(QuadConfig { abs_tol, rel_tol, max_depth })
    }

    /// Both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        QuadConfig { abs_tol: self.abs_tol * factor, rel_tol: self.rel_tol * factor, ..*self }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// 7-point Gauss / 15-point Kronrod pair on `[a, b]`: (estimate, |K - G|).
fn gauss_kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    estimate: f64,
    error: f64,
    depth: usize,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn quad_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
    quad_adaptive_panels(f, a, b, 1, cfg)
}

/// As [`quad_adaptive`], starting from `panels` equal subintervals. Useful
/// when the integrand oscillates many times across the range.
pub fn quad_adaptive_panels<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, cfg: &QuadConfig) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::Dimension(format!("quadrature bounds out of order: [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels * 2);
    let mut total = 0.0;
    let mut total_err = 0.0;
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { a + width * (i + 1) as f64 };
        let (estimate, error) = gauss_kronrod15(&f, lo, hi);
        total += estimate;
        total_err += error;
        heap.push(Segment { a: lo, b: hi, estimate, error, depth: 0 });
    }
    // Segments that hit max_depth; their error still counts.
    let mut frozen_est = 0.0;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        let Some(seg) = heap.pop() else {
            return Err(Error::QuadNonConvergence { estimate: total, error_bound: total_err });
        };
        if seg.depth >= cfg.max_depth {
            frozen_est += seg.estimate;
            continue;
        }
        let mid = 0.5 * (seg.a + seg.b);
        let (e1, r1) = gauss_kronrod15(&f, seg.a, mid);
        let (e2, r2) = gauss_kronrod15(&f, mid, seg.b);
        total += e1 + e2 - seg.estimate;
        total_err += r1 + r2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, estimate: e1, error: r1, depth: seg.depth + 1 });
        heap.push(Segment { a: mid, b: seg.b, estimate: e2, error: r2, depth: seg.depth + 1 });
    }
    // Resum to shed the drift of the running totals.
    Ok(heap.iter().map(|s| s.estimate).sum::<f64>() + frozen_est)
}

/// Relative size of the Gaussian weight at the truncation point.
pub const GAUSSIAN_TRUNCATION: f64 = 1e-12;

/// Wavenumber beyond which `exp(-k^2 sigma^2 / 2)` drops below the truncation threshold.
pub fn gaussian_cutoff(sigma_scale: f64) -> f64 {
    (2.0 * (1.0 / GAUSSIAN_TRUNCATION).ln()).sqrt() / sigma_scale
}

/// `∫_0^∞ f(k) dk` for integrands carrying a `exp(-k^2 sigma^2 / 2)` envelope.
pub fn quad_gaussian_damped<F: Fn(f64) -> f64>(f: F, sigma_scale: f64, cfg: &QuadConfig) -> Result<f64> {
    quad_gaussian_damped_panels(f, sigma_scale, 1, cfg)
}

pub fn quad_gaussian_damped_panels<F: Fn(f64) -> f64>(f: F, sigma_scale: f64, panels: usize, cfg: &QuadConfig) -> Result<f64> {
    if !(sigma_scale > 0.0) {
        return Err(Error::config("sigma_scale", "must be > 0"));
    }
    quad_adaptive_panels(f, 0.0, gaussian_cutoff(sigma_scale), panels, cfg)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed-grid RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    /// Largest internal step before any halving.
    pub step: f64,
    /// Max-norm change allowed between successive halvings.
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl OdeConfig {
    pub fn new(step: f64, tolerance: f64, max_halvings: usize) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::config("ode.step", "must be > 0"));
        }
        if !(tolerance > 0.0) {
            return Err(Error::config("ode.tolerance", "must be > 0"));
        }
        if max_halvings == 0 {
            return Err(Error::config("ode.max_halvings", "must be >= 1"));
        }
        Ok(OdeConfig { step, tolerance, max_halvings })
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::Dimension("time grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Dimension("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// One pass of RK4 over the grid with `2^level` times the base substep
/// count; `project` maps the state at every grid point to the outputs
/// that are kept.
fn rk4_pass<R, P>(rhs: &R, y0: &[Complex64], grid: &[f64], base_step: f64, level: usize, project: &P) -> Vec<Vec<Complex64>>
where
    R: Fn(f64, &[Complex64], &mut [Complex64]),
    P: Fn(f64, &[Complex64]) -> Vec<Complex64>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k1 = vec![Complex64::default(); n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut out = Vec::with_capacity(grid.len());
    out.push(project(grid[0], &y));
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let sub = ((span / base_step).ceil().max(1.0) as usize) << level;
        let h = span / sub as f64;
        for s in 0..sub {
            let t = w[0] + h * s as f64;
            rhs(t, &y, &mut k1);
            for i in 0..n {
                tmp[i] = y[i] + k1[i] * (0.5 * h);
            }
            rhs(t + 0.5 * h, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + k2[i] * (0.5 * h);
            }
            rhs(t + 0.5 * h, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + k3[i] * h;
            }
            rhs(t + h, &tmp, &mut k4);
            for i in 0..n {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        out.push(project(w[1], &y));
    }
    out
}

fn max_deviation(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).norm())).fold(0.0, f64::max)
}

/// Integrates `dy/dt = rhs(t, y)` on `grid` with classical RK4, halving the
/// internal step until two successive passes agree to `cfg.tolerance` in
/// max-norm at every grid point. Returns the state at every grid point.
pub fn ode_evolve<R>(rhs: R, y0: &[Complex64], grid: &[f64], cfg: &OdeConfig) -> Result<Vec<Vec<Complex64>>>
where
    R: Fn(f64, &[Complex64], &mut [Complex64]),
{
    ode_evolve_projected(rhs, y0, grid, cfg, |_, y| y.to_vec())
}

/// As [`ode_evolve`], but only the projection of each state is stored and
/// compared. Used when the full state is much larger than what is needed.
pub fn ode_evolve_projected<R, P>(rhs: R, y0: &[Complex64], grid: &[f64], cfg: &OdeConfig, project: P) -> Result<Vec<Vec<Complex64>>>
where
    R: Fn(f64, &[Complex64], &mut [Complex64]),
    P: Fn(f64, &[Complex64]) -> Vec<Complex64>,
{
    check_grid(grid)?;
    let mut previous = rk4_pass(&rhs, y0, grid, cfg.step, 0, &project);
    let mut deviation = f64::INFINITY;
    for level in 1..=cfg.max_halvings {
        let current = rk4_pass(&rhs, y0, grid, cfg.step, level, &project);
        deviation = max_deviation(&previous, &current);
        if deviation < cfg.tolerance {
            return Ok(current);
        }
        if level == cfg.max_halvings {
            return Err(Error::OdeNonConvergence {
                halvings: level,
                deviation,
                coarse: previous.last().cloned().unwrap_or_default(),
                fine: current.last().cloned().unwrap_or_default(),
            });
        }
        previous = current;
    }
    Err(Error::OdeNonConvergence { halvings: 0, deviation, coarse: Vec::new(), fine: previous.last().cloned().unwrap_or_default() })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section refinement of the single interior extremum of `f` in
/// `bracket`. Minima and maxima are both accepted; the kind is decided by
/// comparing the interior samples with the endpoints.
pub fn refine_extremum<F: Fn(f64) -> f64>(f: F, bracket: (f64, f64), tol: f64) -> Result<(f64, f64)> {
    let (lo, hi) = bracket;
    let fail = |reason: &str| Error::Refinement { lo, hi, reason: reason.to_string() };
    if !(hi > lo) || !(tol > 0.0) {
        return Err(fail("empty bracket or non-positive tolerance"));
    }
    let probes: Vec<f64> = (0..=8).map(|i| f(lo + (hi - lo) * i as f64 / 8.0)).collect();
    let (imin, _) = probes.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let (imax, _) = probes.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let interior = |i: usize| i > 0 && i < 8;
    let sign = if interior(imin) && !interior(imax) {
        1.0
    } else if interior(imax) && !interior(imin) {
        -1.0
    } else if interior(imin) && interior(imax) {
        // both interior: the extremum farther from the endpoint values wins
        let ends = 0.5 * (probes[0] + probes[8]);
        if (ends - probes[imin]).abs() >= (probes[imax] - ends).abs() {
            1.0
        } else {
            -1.0
        }
    } else {
        return Err(fail("no interior extremum in bracket"));
    };
    let g = |t: f64| sign * f(t);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    let mut width = b - a;
    while b - a > tol {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
        let w = b - a;
        if !(w < width) {
            return Err(fail(&format!("bracket stopped shrinking at width {w:e}")));
        }
        width = w;
    }
    let t = 0.5 * (a + b);
    Ok((t, f(t)))
}

/// Result of [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Derivative-free Nelder–Mead minimisation with an axis-aligned initial simplex.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], scale: f64, max_iter: usize, ftol: f64) -> Minimum {
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        f(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = eval(x0, &mut evaluations);
    simplex.push((x0.to_vec(), v0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += scale;
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= ftol * (best.abs() + worst.abs()).max(1e-300) || (worst - best).abs() < 1e-300 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |coef: f64, worst: &[f64]| -> Vec<f64> { centroid.iter().zip(worst).map(|(c, w)| c + coef * (w - c)).collect() };
        let xw = simplex[n].0.clone();
        let xr = along(-1.0, &xw);
        let fr = eval(&xr, &mut evaluations);
        if fr < simplex[0].1 {
            let xe = along(-2.0, &xw);
            let fe = eval(&xe, &mut evaluations);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5, &xw);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            } else {
                let xc = along(0.5, &xw);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x_best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let v = eval(&x, &mut evaluations);
                    *entry = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for i in 1..n {
            s += f(a + h * i as f64);
        }
        s * h
    }

    #[test]
    fn quad_constant_and_sine() {
        let cfg = QuadConfig::default();
        assert!((quad_adaptive(|_| 1.0, 0.0, 1.0, &cfg).unwrap() - 1.0).abs() < 1e-15);
        assert!((quad_adaptive(f64::sin, 0.0, PI, &cfg).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quad_cubic_exact() {
        let cfg = QuadConfig::default();
        let v = quad_adaptive(|x| 4.0 * x * x * x - 3.0 * x * x + x - 7.0, -1.5, 2.25, &cfg).unwrap();
        let antider = |x: f64| x.powi(4) - x.powi(3) + 0.5 * x * x - 7.0 * x;
        let exact = antider(2.25) - antider(-1.5);
        assert!((v - exact).abs() < 1e-13 * exact.abs().max(1.0));
    }

    #[test]
    fn quad_rejects_reversed_bounds() {
        assert!(quad_adaptive(|x| x, 1.0, 0.0, &QuadConfig::default()).is_err());
    }

    #[test]
    fn quad_reports_nonconvergence() {
        let cfg = QuadConfig { abs_tol: 1e-14, rel_tol: 1e-14, max_depth: 2 };
        let err = quad_adaptive(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &cfg).unwrap_err();
        match err {
            Error::QuadNonConvergence { estimate, error_bound } => {
                assert!(estimate.is_finite());
                assert!(error_bound > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gaussian_damped_moments() {
        let cfg = QuadConfig::default();
        let v = quad_gaussian_damped(|k| k * (-k * k / 2.0).exp(), 1.0, &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
        let sigma: f64 = 2.5;
        let v = quad_gaussian_damped(|k| k * (-k * k * sigma * sigma / 2.0).exp(), sigma, &cfg).unwrap();
        assert!((v - 1.0 / (sigma * sigma)).abs() < 1e-11);
        let v = quad_gaussian_damped(|k| (-k * k / 2.0).exp(), 1.0, &cfg).unwrap();
        assert!((v - (PI / 2.0).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn quad_matches_trapezoid_oracle_on_dephasing_rate() {
        // gamma(t) for s = 3, eta = 2, omega_c = 1 on [0, sqrt 3]
        let gamma = |t: f64| 2.0 * (1.0 + t * t).powf(-1.5) * 2.0 * (3.0 * t.atan()).sin();
        let b = 3f64.sqrt();
        let oracle = trapezoid(gamma, 0.0, b, 1_000_000);
        let v = quad_adaptive(gamma, 0.0, b, &QuadConfig::default()).unwrap();
        assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((m - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn ode_constant_and_decay() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let cfg = OdeConfig::new(0.05, 1e-10, 8).unwrap();
        let y0 = [Complex64::new(0.3, -0.7)];
        let traj = ode_evolve(|_, _, dy| dy[0] = Complex64::default(), &y0, &grid, &cfg).unwrap();
        assert!(traj.iter().all(|y| y[0] == y0[0]));
        let traj = ode_evolve(|_, y, dy| dy[0] = -y[0], &[Complex64::new(1.0, 0.0)], &grid, &cfg).unwrap();
        assert!((traj[10][0].re - (-1f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn ode_preserves_norm_of_rotation() {
        // dy/dt = -i H y with H = [[0, 1], [1, 0]]
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let cfg = OdeConfig::new(0.05, 1e-9, 10).unwrap();
        let i = Complex64::i();
        let traj = ode_evolve(
            |_, y, dy| {
                dy[0] = -i * y[1];
                dy[1] = -i * y[0];
            },
            &[Complex64::new(1.0, 0.0), Complex64::default()],
            &grid,
            &cfg,
        )
        .unwrap();
        for y in &traj {
            let norm = y[0].norm_sqr() + y[1].norm_sqr();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ode_time_dependent_rhs() {
        // dy/dt = cos(t) y  =>  y = exp(sin t)
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let cfg = OdeConfig::new(0.25, 1e-10, 10).unwrap();
        let traj = ode_evolve(|t, y, dy| dy[0] = y[0] * t.cos(), &[Complex64::new(1.0, 0.0)], &grid, &cfg).unwrap();
        for (t, y) in grid.iter().zip(&traj) {
            assert!((y[0].re - t.sin().exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn ode_reports_nonconvergence() {
        let grid = [0.0, 1.0];
        let cfg = OdeConfig::new(1.0, 1e-30, 2).unwrap();
        let err = ode_evolve(|_, y, dy| dy[0] = -50.0 * y[0], &[Complex64::new(1.0, 0.0)], &grid, &cfg).unwrap_err();
        match err {
            Error::OdeNonConvergence { halvings, coarse, fine, .. } => {
                assert_eq!(halvings, 2);
                assert_eq!(coarse.len(), 1);
                assert_eq!(fine.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ode_rejects_bad_grid() {
        let cfg = OdeConfig::new(0.1, 1e-6, 3).unwrap();
        assert!(ode_evolve(|_, _, _| {}, &[Complex64::default()], &[0.0, 0.5, 0.5], &cfg).is_err());
        assert!(ode_evolve(|_, _, _| {}, &[Complex64::default()], &[0.1, 0.5], &cfg).is_err());
    }

    #[test]
    fn refine_parabola_and_cosine() {
        let (t, v) = refine_extremum(|t| (t - 1.0) * (t - 1.0), (0.0, 2.0), 1e-10).unwrap();
        assert!((t - 1.0).abs() < 1e-8 && v.abs() < 1e-15);
        // position resolution near a quadratic extremum is ~sqrt(eps)
        let (t, v) = refine_extremum(|t: f64| -t.cos(), (2.0, 4.0), 1e-10).unwrap();
        assert!((t - PI).abs() < 1e-7 && (v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn refine_rejects_monotone_bracket() {
        assert!(refine_extremum(|t| t, (0.0, 1.0), 1e-8).is_err());
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let m = nelder_mead(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), &[-1.2, 1.0], 0.5, 5000, 1e-16);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }
}
