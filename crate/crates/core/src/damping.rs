//! Amplitude damping through a Lorentzian bath (damped Jaynes–Cummings),
//! in the resonant interaction picture. Basis: |0> ground, |1> excited.
//!
//! The common-bath case is integrated with one leaky pseudomode.

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::channel::{apply_independent, KrausSet, LocalKrausChannel, SampledSuperoperator, TimeGrid};
use crate::error::{Error, Result};
use crate::numerics::{ode_evolve_projected, OdeConfig};
use crate::quantum::{CMatrix, DensityMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingParams {
    pub gamma0: f64,
    pub lambda: f64,
    /// Recorded only.
    pub omega_0: f64,
}

impl Default for DampingParams {
    fn default() -> Self {
        DampingParams { gamma0: 1.0, lambda: 0.1, omega_0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingRegime {
    /// `lambda < 2 gamma0`
    Strong,
    /// `lambda = 2 gamma0`
    Critical,
    /// `lambda > 2 gamma0`
    Weak,
}

impl DampingParams {
    pub fn new(gamma0: f64, lambda: f64) -> Result<Self> {
        let p = DampingParams { gamma0, lambda, ..Default::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ad.gamma0", self.gamma0), ("ad.lambda", self.lambda)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> CouplingRegime {
        let d2 = self.lambda * (2.0 * self.gamma0 - self.lambda);
        if d2 > 0.0 {
            CouplingRegime::Strong
        } else if d2 < 0.0 {
            CouplingRegime::Weak
        } else {
            CouplingRegime::Critical
        }
    }

    /// `|d| = sqrt(|2 gamma0 lambda - lambda^2|)`.
    pub fn d(&self) -> f64 {
        (self.lambda * (2.0 * self.gamma0 - self.lambda)).abs().sqrt()
    }

    pub fn is_markovian(&self) -> bool {
        self.lambda >= 2.0 * self.gamma0
    }

    /// Pseudomode coupling `g = sqrt(gamma0 lambda / 2)`.
    pub fn coupling(&self) -> f64 {
        (0.5 * self.gamma0 * self.lambda).sqrt()
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// Excited-state amplitude `G(t)` with `p(t) = G(t)^2`.
fn amplitude(t: f64, p: &DampingParams) -> f64 {
    let l = p.lambda;
    let d = p.d();
    let half = 0.5 * l * t;
    let x = 0.5 * d * t;
    match p.regime() {
        CouplingRegime::Critical => (-half).exp() * (1.0 + half),
        // (lambda/d) sin(dt/2) = (lambda t/2) sinc(dt/2) stays finite as d -> 0
        CouplingRegime::Strong => (-half).exp() * (x.cos() + half * sinc(x)),
        CouplingRegime::Weak if x < 1.0 => (-half).exp() * (x.cosh() + half * sinhc(x)),
        CouplingRegime::Weak => {
            let ratio = l / d;
            0.5 * ((1.0 + ratio) * (0.5 * (d - l) * t).exp() + (1.0 - ratio) * (-0.5 * (d + l) * t).exp())
        }
    }
}

/// `p(t)`, the excited population at `t` starting from the excited state.
pub fn damping_parameter(t: f64, p: &DampingParams) -> f64 {
    let a = amplitude(t, p);
    a * a
}

/// `M1 = diag(1, sqrt(p))`, `M2 = sqrt(1 - p) |0><1|`.
pub fn ad_kraus_from_parameter(pt: f64) -> KrausSet {
    let c = |x: f64| Complex64::new(x, 0.0);
    let z = c(0.0);
    let pt = pt.clamp(0.0, 1.0);
    KrausSet::new(vec![Matrix2::new(c(1.0), z, z, c(pt.sqrt())), Matrix2::new(z, c((1.0 - pt).sqrt()), z, z)])
}

pub fn ad_kraus(t: f64, p: &DampingParams) -> KrausSet {
    ad_kraus_from_parameter(damping_parameter(t, p))
}

pub fn ad_apply_independent(rho_sa: &DensityMatrix, n: usize, t: f64, p: &DampingParams) -> Result<DensityMatrix> {
    let dims = rho_sa.dims();
    if n == 0 || dims.len() < n || dims[..n].iter().any(|&d| d != 2) {
        return Err(Error::Dimension(format!("state dims {dims:?} do not start with {n} qubits")));
    }
    let da = rho_sa.dim() >> n;
    DensityMatrix::from_parts(apply_independent(&ad_kraus(t, p), n, rho_sa.matrix(), da), dims.to_vec())
}

pub fn independent_channel(p: &DampingParams, n: usize, grid: TimeGrid) -> Result<LocalKrausChannel> {
    LocalKrausChannel::from_family(n, grid, |_, t| Ok(ad_kraus(t, p)), format!("amplitude damping lambda={}", p.lambda))
}

/// Largest population allowed in the top Fock level.
pub const FOCK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudomodeConfig {
    pub n_fock: usize,
    pub ode: OdeConfig,
}

impl PseudomodeConfig {
    pub fn new(n_fock: usize, ode: OdeConfig) -> Result<Self> {
        if n_fock < 3 {
            return Err(Error::config("numerics.fock_cutoff", format!("need at least 3 levels, got {n_fock}")));
        }
        Ok(PseudomodeConfig { n_fock, ode })
    }

    /// Cutoff 6, RK4 base step equal to the grid step, tolerance 1e-8.
    pub fn for_grid(grid: &TimeGrid) -> Self {
        PseudomodeConfig { n_fock: 6, ode: OdeConfig { step: grid.step(), tolerance: 1e-8, max_halvings: 4 } }
    }
}

/// Qubits plus one bosonic mode, index `s * n_fock + m`. The mode field
/// decays at `lambda`, i.e. its Lindblad rate is `2 lambda`.
struct PseudomodeGenerator {
    dim: usize,
    hamiltonian: Vec<(usize, usize, f64)>,
    lowering: Vec<(usize, usize, f64)>,
    number: Vec<f64>,
    kappa: f64,
}

impl PseudomodeGenerator {
    fn new(n: usize, n_fock: usize, p: &DampingParams) -> Self {
        let g = p.coupling();
        let dim = (1 << n) * n_fock;
        let idx = |s: usize, m: usize| s * n_fock + m;
        let mut hamiltonian = Vec::new();
        let mut lowering = Vec::new();
        let mut number = vec![0.0; dim];
        for s in 0..(1 << n) {
            for m in 0..n_fock {
                number[idx(s, m)] = m as f64;
                if m >= 1 {
                    lowering.push((idx(s, m - 1), idx(s, m), (m as f64).sqrt()));
                }
                for q in 0..n {
                    let bit = 1 << (n - 1 - q);
                    if s & bit == 0 && m >= 1 {
                        // sigma_+ a
                        hamiltonian.push((idx(s | bit, m - 1), idx(s, m), g * (m as f64).sqrt()));
                    } else if s & bit != 0 && m + 1 < n_fock {
                        // sigma_- a^dagger
                        hamiltonian.push((idx(s & !bit, m + 1), idx(s, m), g * ((m + 1) as f64).sqrt()));
                    }
                }
            }
        }
        PseudomodeGenerator { dim, hamiltonian, lowering, number, kappa: 2.0 * p.lambda }
    }

    /// `drho/dt` for one column-major `dim × dim` block.
    fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        let mi = Complex64::new(0.0, -1.0);
        for j in 0..d {
            for i in 0..d {
                out[i + j * d] = rho[i + j * d] * (-0.5 * self.kappa * (self.number[i] + self.number[j]));
            }
        }
        for &(r, c, v) in &self.hamiltonian {
            let hv = mi * v;
            for j in 0..d {
                out[r + j * d] += hv * rho[c + j * d];
            }
            // rho H: column c of the product picks up rho[:, r] H[r, c]
            let col_src = r * d;
            let col_dst = c * d;
            for i in 0..d {
                out[i + col_dst] -= hv * rho[i + col_src];
            }
        }
        for &(i, k, va) in &self.lowering {
            for &(j, l, vb) in &self.lowering {
                out[i + j * d] += rho[k + l * d] * (self.kappa * va * vb);
            }
        }
    }
}

/// The reduced qubit dynamics as a sampled superoperator, built by evolving
/// every system basis operator `|k><l| ⊗ |0><0|`.
pub fn pseudomode_channel(p: &DampingParams, n: usize, grid: TimeGrid, cfg: &PseudomodeConfig) -> Result<SampledSuperoperator> {
    if !(1..=2).contains(&n) {
        return Err(Error::Dimension(format!("pseudomode model supports 1 or 2 qubits, got {n}")));
    }
    let nf = cfg.n_fock;
    let gen = PseudomodeGenerator::new(n, nf, p);
    let ds = 1usize << n;
    let dd = gen.dim * gen.dim;
    // Only blocks with k <= l are integrated; the rest follow by adjoint.
    let blocks: Vec<(usize, usize)> = (0..ds).flat_map(|k| (k..ds).map(move |l| (k, l))).collect();
    let mut y0 = vec![Complex64::default(); blocks.len() * dd];
    for (b, &(k, l)) in blocks.iter().enumerate() {
        y0[b * dd + (k * nf) + (l * nf) * gen.dim] = Complex64::new(1.0, 0.0);
    }
    let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        for b in 0..blocks.len() {
            gen.apply(&y[b * dd..(b + 1) * dd], &mut dy[b * dd..(b + 1) * dd]);
        }
    };
    let top = nf - 1;
    let project = |_t: f64, y: &[Complex64]| {
        let mut out = Vec::with_capacity(blocks.len() * (ds * ds + 1));
        for (b, &(k, l)) in blocks.iter().enumerate() {
            let rho = &y[b * dd..(b + 1) * dd];
            for s in 0..ds {
                for s2 in 0..ds {
                    let mut acc = Complex64::default();
                    for m in 0..nf {
                        acc += rho[(s * nf + m) + (s2 * nf + m) * gen.dim];
                    }
                    out.push(acc);
                }
            }
            let mut top_pop = Complex64::default();
            if k == l {
                for s in 0..ds {
                    top_pop += rho[(s * nf + top) * (gen.dim + 1)];
                }
            }
            out.push(top_pop);
        }
        out
    };
    let times = grid.times();
    let outputs = ode_evolve_projected(rhs, &y0, &times, &cfg.ode, project)?;
    let stride = ds * ds + 1;
    let mut images = Vec::with_capacity(outputs.len());
    for (j, out) in outputs.iter().enumerate() {
        let mut per_time = vec![CMatrix::zeros(ds, ds); ds * ds];
        for (b, &(k, l)) in blocks.iter().enumerate() {
            let chunk = &out[b * stride..(b + 1) * stride];
            let top_pop = chunk[ds * ds].norm();
            if top_pop > FOCK_TOLERANCE {
                return Err(Error::FockTruncation { population: top_pop, time: times[j] });
            }
            let m = CMatrix::from_fn(ds, ds, |s, s2| chunk[s * ds + s2]);
            if k != l {
                per_time[l * ds + k] = m.adjoint();
            }
            per_time[k * ds + l] = m;
        }
        images.push(per_time);
    }
    SampledSuperoperator::from_basis_images(n, grid, images, format!("common amplitude damping (pseudomode) x{n}"))
}

/// Trajectory of `rho_sa0` under the common bath, pseudomode traced out.
pub fn pseudomode_common_ad(
    rho_sa0: &DensityMatrix,
    grid: TimeGrid,
    p: &DampingParams,
    cfg: &PseudomodeConfig,
) -> Result<Vec<DensityMatrix>> {
    use crate::channel::ChannelEvolution;
    let ch = pseudomode_channel(p, 2, grid, cfg)?;
    (0..grid.points()).map(|j| ch.evolve(j, rho_sa0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelEvolution;
    use crate::numerics::refine_extremum;
    use crate::quantum::{mutual_information, purify, random_density_matrix, tensor, tensor_states, PureState};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn strong() -> DampingParams {
        DampingParams::new(1.0, 0.1).unwrap()
    }

    #[test]
    fn parameter_regimes() {
        for p in [strong(), DampingParams::new(1.0, 2.0).unwrap(), DampingParams::new(1.0, 3.0).unwrap()] {
            assert_eq!(damping_parameter(0.0, &p), 1.0);
        }
        assert_eq!(strong().regime(), CouplingRegime::Strong);
        assert_eq!(DampingParams::new(1.0, 2.0).unwrap().regime(), CouplingRegime::Critical);
        let d = strong().d();
        assert!((d - 0.19f64.sqrt()).abs() < 1e-15);
        let t_star = (2.0 / d) * (std::f64::consts::PI - (d / 0.1).atan());
        assert!((t_star - 8.242).abs() < 1e-3);
        let (t, v) = refine_extremum(|t| damping_parameter(t, &strong()), (7.0, 9.0), 1e-10).unwrap();
        assert!((t - t_star).abs() < 1e-6 && v < 1e-12);
        let weak = DampingParams::new(1.0, 3.0).unwrap();
        let samples: Vec<f64> = (0..=1000).map(|i| damping_parameter(20.0 * i as f64 / 1000.0, &weak)).collect();
        assert!(samples.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn branches_agree_with_direct_formulas() {
        let p = strong();
        let d = p.d();
        for t in [0.5, 3.0, 20.0, 77.0] {
            let direct = (-p.lambda * t).exp() * ((0.5 * d * t).cos() + p.lambda / d * (0.5 * d * t).sin()).powi(2);
            assert!((damping_parameter(t, &p) - direct).abs() < 1e-14);
        }
        let w = DampingParams::new(1.0, 3.0).unwrap();
        let d = w.d();
        for t in [0.1, 0.6, 2.0, 10.0] {
            let direct = (-w.lambda * t).exp() * ((0.5 * d * t).cosh() + w.lambda / d * (0.5 * d * t).sinh()).powi(2);
            assert!((damping_parameter(t, &w) - direct).abs() < 1e-13 * direct.max(1e-300).max(1e-12));
        }
        let cr = DampingParams::new(1.0, 2.0).unwrap();
        let near = DampingParams::new(1.0, 2.0 - 1e-9).unwrap();
        for t in [0.5, 4.0] {
            assert!((damping_parameter(t, &cr) - (-2.0 * t).exp() * (1.0 + t).powi(2)).abs() < 1e-15);
            assert!((damping_parameter(t, &near) - damping_parameter(t, &cr)).abs() < 1e-8);
        }
    }

    #[test]
    fn kraus_action() {
        let s = ad_kraus(0.0, &strong());
        assert_eq!(s.ops()[0], Matrix2::identity());
        assert_eq!(s.ops()[1], Matrix2::zeros());
        let excited = PureState::basis(1, 1).density();
        let plus = PureState::normalized(DVector::from_vec(vec![c(1.0), c(1.0)]), vec![2]).unwrap().density();
        for t in [1.0, 5.0, 8.0, 12.0] {
            let pt = damping_parameter(t, &strong());
            let e = ad_apply_independent(&excited, 1, t, &strong()).unwrap();
            assert!((e.matrix()[(1, 1)].re - pt).abs() < 1e-15);
            let q = ad_apply_independent(&plus, 1, t, &strong()).unwrap();
            assert!((q.matrix()[(0, 1)].norm() - 0.5 * pt.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn independent_map_factorizes_and_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_density_matrix(&mut rng, vec![2]);
        let t = 6.0;
        let one = ad_apply_independent(&a, 1, t, &strong()).unwrap();
        let two = ad_apply_independent(&tensor_states(&a, &a), 2, t, &strong()).unwrap();
        assert!((two.matrix() - tensor(one.matrix(), one.matrix())).norm() < 1e-14);

        // dense oracle: sum over words (M_i ⊗ M_j ⊗ I_4) rho (.)†
        let rho0 = DensityMatrix::diagonal(&[0.4, 0.1, 0.3, 0.2], vec![2, 2]).unwrap();
        let psi = purify(&rho0).unwrap().density();
        let set = ad_kraus(t, &strong());
        let ops: Vec<CMatrix> = set.ops().iter().map(|k| CMatrix::from_fn(2, 2, |i, j| k[(i, j)])).collect();
        let mut dense = CMatrix::zeros(16, 16);
        for x in &ops {
            for y in &ops {
                let w = tensor(&tensor(x, y), &CMatrix::identity(4, 4));
                dense += &w * psi.matrix() * w.adjoint();
            }
        }
        let fast = ad_apply_independent(&psi, 2, t, &strong()).unwrap();
        let dense = DensityMatrix::from_parts(dense, psi.dims().to_vec()).unwrap();
        let a = mutual_information(&fast, &[0, 1]).unwrap();
        let b = mutual_information(&dense, &[0, 1]).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn pseudomode_single_qubit_reproduces_damping_parameter() {
        let p = strong();
        let grid = TimeGrid::uniform(150.0, 6000).unwrap();
        let ch = pseudomode_channel(&p, 1, grid, &PseudomodeConfig::for_grid(&grid)).unwrap();
        let excited = PureState::basis(1, 1).density();
        let mut worst: f64 = 0.0;
        for j in (0..grid.points()).step_by(7) {
            let out = ch.evolve(j, &excited).unwrap();
            worst = worst.max((out.matrix()[(1, 1)].re - damping_parameter(grid.time(j), &p)).abs());
        }
        assert!(worst < 1e-6, "max deviation {worst:e}");
    }

    #[test]
    fn pseudomode_dark_state_and_ground_fixed_point() {
        let p = strong();
        let grid = TimeGrid::uniform(150.0, 6000).unwrap();
        let ch = pseudomode_channel(&p, 2, grid, &PseudomodeConfig::for_grid(&grid)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let singlet = PureState::new(DVector::from_vec(vec![c(0.0), c(s), c(-s), c(0.0)]), vec![2, 2]).unwrap().density();
        let ground = PureState::basis(2, 0).density();
        for j in (0..grid.points()).step_by(50) {
            let out = ch.evolve(j, &singlet).unwrap();
            for i in 0..4 {
                assert!((out.matrix()[(i, i)] - singlet.matrix()[(i, i)]).norm() < 1e-6);
            }
            let g = ch.evolve(j, &ground).unwrap();
            assert!((g.matrix() - ground.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn pseudomode_states_stay_physical() {
        let p = strong();
        let grid = TimeGrid::uniform(150.0, 6000).unwrap();
        let ch = pseudomode_channel(&p, 2, grid, &PseudomodeConfig::for_grid(&grid)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let rho = purify(&random_density_matrix(&mut rng, vec![2, 2])).unwrap().density();
        for j in (0..grid.points()).step_by(111) {
            let out = ch.evolve(j, &rho).unwrap();
            assert!((out.trace().re - 1.0).abs() < 1e-8);
            out.validate(1e-8).unwrap();
        }
    }

    #[test]
    fn fock_truncation_is_detected() {
        let p = DampingParams::new(5.0, 0.1).unwrap();
        let grid = TimeGrid::uniform(2.0, 200).unwrap();
        let cfg = PseudomodeConfig::new(3, OdeConfig::new(0.01, 1e-8, 4).unwrap()).unwrap();
        // two excitations reach level 2 of a three-level mode
        assert!(matches!(pseudomode_channel(&p, 2, grid, &cfg), Err(Error::FockTruncation { .. })));
        assert!(PseudomodeConfig::new(2, cfg.ode).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn completeness_range_and_envelope(t in 0.0f64..150.0, lambda in 0.01f64..4.0) {
            let p = DampingParams::new(1.0, lambda).unwrap();
            let pt = damping_parameter(t, &p);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&pt));
            prop_assert!(ad_kraus(t, &p).completeness_error() < 1e-12);
            if p.regime() == CouplingRegime::Strong {
                let d = p.d();
                prop_assert!(pt <= (-lambda * t).exp() * (1.0 + lambda * lambda / (d * d)) * (1.0 + 1e-12));
            }
        }
    }
}
