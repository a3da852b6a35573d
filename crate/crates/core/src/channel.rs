//! Time grids, Kraus families and the evolution maps the measures consume.
//!
//! Every map is sampled on a uniform grid and applied directly at each grid
//! point to an operator on `system ⊗ ancilla`, with the ancilla untouched.

use std::sync::Arc;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::{CMatrix, DensityMatrix};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Uniform grid `t_j = j * step`, `j = 0..=samples`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    step: f64,
    samples: usize,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, samples: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config("numerics.horizon", format!("{horizon} is not a positive horizon")));
        }
        if samples < 2 {
            return Err(Error::config("numerics.samples", format!("need at least 2 samples, got {samples}")));
        }
        Ok(TimeGrid { step: horizon / samples as f64, samples })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of intervals.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Number of grid points, `samples + 1`.
    pub fn points(&self) -> usize {
        self.samples + 1
    }

    pub fn horizon(&self) -> f64 {
        self.step * self.samples as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.points()).map(|j| self.time(j)).collect()
    }

    /// Same horizon, `factor` times denser.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid { step: self.step / factor as f64, samples: self.samples * factor }
    }

    /// Same step, `factor` times longer.
    pub fn extended(&self, factor: usize) -> TimeGrid {
        TimeGrid { step: self.step, samples: self.samples * factor }
    }
}

pub type Kraus2 = Matrix2<Complex64>;

/// Single-qubit Kraus operators together with the sparse transfer matrix
/// `sum_k K ⊗ conj(K)` acting on 2×2 blocks in the order (00, 01, 10, 11).
#[derive(Debug, Clone)]
pub struct KrausSet {
    ops: Vec<Kraus2>,
    transfer: Vec<(usize, usize, Complex64)>,
}

impl KrausSet {
    pub fn new(ops: Vec<Kraus2>) -> Self {
        let mut transfer = Vec::new();
        for row in 0..4 {
            for col in 0..4 {
                let (a, b) = (row / 2, row % 2);
                let (c, e) = (col / 2, col % 2);
                let v: Complex64 = ops.iter().map(|k| k[(a, c)] * k[(b, e)].conj()).sum();
                if v != C0 {
                    transfer.push((row, col, v));
                }
            }
        }
        KrausSet { ops, transfer }
    }

    pub fn ops(&self) -> &[Kraus2] {
        &self.ops
    }

    /// `‖sum K†K − I‖_∞` (max entry).
    pub fn completeness_error(&self) -> f64 {
        let s: Kraus2 = self.ops.iter().map(|k| k.adjoint() * k).sum();
        (s - Kraus2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Applies the map to one qubit whose index has place value `stride`.
    pub fn apply_local(&self, x: &CMatrix, stride: usize) -> CMatrix {
        let d = x.nrows();
        let src = x.as_slice();
        let mut out = vec![C0; d * d];
        let lows: Vec<usize> = (0..d).filter(|i| (i / stride).is_multiple_of(2)).collect();
        for &j0 in &lows {
            let j1 = j0 + stride;
            for &i0 in &lows {
                let i1 = i0 + stride;
                let idx = [i0 + j0 * d, i0 + j1 * d, i1 + j0 * d, i1 + j1 * d];
                let b = [src[idx[0]], src[idx[1]], src[idx[2]], src[idx[3]]];
                if b.iter().all(|z| *z == C0) {
                    continue;
                }
                for &(row, col, v) in &self.transfer {
                    out[idx[row]] += v * b[col];
                }
            }
        }
        CMatrix::from_vec(d, d, out)
    }
}

/// Applies `set` to each of the `n` leading qubits of `op`.
pub fn apply_independent(set: &KrausSet, n: usize, op: &CMatrix, ancilla_dim: usize) -> CMatrix {
    let mut x = set.apply_local(op, (1 << (n - 1)) * ancilla_dim);
    for q in 1..n {
        x = set.apply_local(&x, (1 << (n - 1 - q)) * ancilla_dim);
    }
    x
}

/// A family of maps sampled on a time grid.
pub trait ChannelEvolution: Send + Sync {
    fn system_qubits(&self) -> usize;

    fn grid(&self) -> &TimeGrid;

    /// The evolved operator at grid index `step` for an operator on
    /// `system ⊗ ancilla` with ancilla dimension `ancilla_dim`.
    fn apply(&self, step: usize, op: &CMatrix, ancilla_dim: usize) -> Result<CMatrix>;

    /// Short human-readable description.
    fn label(&self) -> String;

    /// Evolves a state whose leading subsystems are the system qubits.
    fn evolve(&self, step: usize, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let n = self.system_qubits();
        let dims = rho.dims();
        if dims.len() < n || dims[..n].iter().any(|&d| d != 2) {
            return Err(Error::Dimension(format!("state dims {dims:?} do not start with {n} qubits")));
        }
        let ancilla_dim = rho.dim() >> n;
        let m = self.apply(step, rho.matrix(), ancilla_dim)?;
        DensityMatrix::from_parts(m, dims.to_vec())
    }
}

fn check_operand(n: usize, grid: &TimeGrid, step: usize, op: &CMatrix, ancilla_dim: usize) -> Result<()> {
    let d = (1usize << n) * ancilla_dim;
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, expected {d}x{d} for {n} qubits and ancilla {ancilla_dim}",
            op.nrows(),
            op.ncols()
        )));
    }
    if step >= grid.points() {
        return Err(Error::Dimension(format!("grid index {step} beyond {} points", grid.points())));
    }
    Ok(())
}

/// The same single-qubit map applied independently to each of `n` qubits.
#[derive(Clone)]
pub struct LocalKrausChannel {
    n: usize,
    grid: TimeGrid,
    sets: Arc<Vec<KrausSet>>,
    label: String,
}

impl LocalKrausChannel {
    pub fn new(n: usize, grid: TimeGrid, sets: Vec<KrausSet>, label: impl Into<String>) -> Result<Self> {
        if sets.len() != grid.points() {
            return Err(Error::Dimension(format!("{} Kraus sets for {} grid points", sets.len(), grid.points())));
        }
        if n == 0 {
            return Err(Error::Dimension("channel needs at least one qubit".into()));
        }
        Ok(LocalKrausChannel { n, grid, sets: Arc::new(sets), label: label.into() })
    }

    /// Builds the sets from a family evaluated at each grid time.
    pub fn from_family<F>(n: usize, grid: TimeGrid, family: F, label: impl Into<String>) -> Result<Self>
    where
        F: Fn(usize, f64) -> Result<KrausSet>,
    {
        let sets = (0..grid.points()).map(|j| family(j, grid.time(j))).collect::<Result<Vec<_>>>()?;
        Self::new(n, grid, sets, label)
    }

    /// The same family on a different number of qubits.
    pub fn with_qubits(&self, n: usize) -> Self {
        LocalKrausChannel { n, grid: self.grid, sets: Arc::clone(&self.sets), label: self.label.clone() }
    }

    pub fn kraus_at(&self, step: usize) -> &KrausSet {
        &self.sets[step]
    }
}

impl ChannelEvolution for LocalKrausChannel {
    fn system_qubits(&self) -> usize {
        self.n
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn apply(&self, step: usize, op: &CMatrix, ancilla_dim: usize) -> Result<CMatrix> {
        check_operand(self.n, &self.grid, step, op, ancilla_dim)?;
        Ok(apply_independent(&self.sets[step], self.n, op, ancilla_dim))
    }

    fn label(&self) -> String {
        format!("{} x{}", self.label, self.n)
    }
}

/// Two qubits under collective dephasing: the element between system basis
/// states with collective-σz eigenvalues μ, μ' is multiplied by
/// `r^(((μ−μ')/2)^2)`. The bath-induced phase is a diagonal unitary common to
/// every state and is dropped.
#[derive(Clone)]
pub struct CollectiveDephasingChannel {
    grid: TimeGrid,
    factors: Arc<Vec<f64>>,
}

impl CollectiveDephasingChannel {
    pub fn new(grid: TimeGrid, factors: Vec<f64>) -> Result<Self> {
        if factors.len() != grid.points() {
            return Err(Error::Dimension(format!("{} factors for {} grid points", factors.len(), grid.points())));
        }
        Ok(CollectiveDephasingChannel { grid, factors: Arc::new(factors) })
    }

    pub fn factor_at(&self, step: usize) -> f64 {
        self.factors[step]
    }

    /// `((μ_a − μ_b)/2)^2` for two-qubit basis indices, σz|0> = +|0>.
    pub fn weight(a: usize, b: usize) -> i32 {
        let mu = |i: usize| 2 - 2 * (i.count_ones() as i32);
        let h = (mu(a) - mu(b)) / 2;
        h * h
    }
}

/// Element-wise collective-dephasing action with factor `r`.
pub fn apply_collective_dephasing(op: &CMatrix, r: f64, ancilla_dim: usize) -> CMatrix {
    let pow = [1.0, r, r * r, r * r * r, r.powi(4)];
    CMatrix::from_fn(op.nrows(), op.ncols(), |i, j| {
        let w = CollectiveDephasingChannel::weight(i / ancilla_dim, j / ancilla_dim) as usize;
        op[(i, j)] * pow[w]
    })
}

impl ChannelEvolution for CollectiveDephasingChannel {
    fn system_qubits(&self) -> usize {
        2
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn apply(&self, step: usize, op: &CMatrix, ancilla_dim: usize) -> Result<CMatrix> {
        check_operand(2, &self.grid, step, op, ancilla_dim)?;
        Ok(apply_collective_dephasing(op, self.factors[step], ancilla_dim))
    }

    fn label(&self) -> String {
        "collective dephasing x2".into()
    }
}

/// Superoperator on the system factor stored per grid point as sparse
/// entries of `S[(i,j),(k,l)]` with flat index `i * d + j` for `|i><j|`.
#[derive(Clone)]
pub struct SampledSuperoperator {
    n: usize,
    grid: TimeGrid,
    maps: Arc<Vec<Vec<(usize, usize, Complex64)>>>,
    label: String,
}

impl SampledSuperoperator {
    /// `images[j][k * d + l]` is the evolved system operator of `|k><l|` at
    /// grid point `j`.
    pub fn from_basis_images(n: usize, grid: TimeGrid, images: Vec<Vec<CMatrix>>, label: impl Into<String>) -> Result<Self> {
        let d = 1usize << n;
        if images.len() != grid.points() {
            return Err(Error::Dimension(format!("{} samples for {} grid points", images.len(), grid.points())));
        }
        let mut maps = Vec::with_capacity(images.len());
        for per_time in &images {
            if per_time.len() != d * d {
                return Err(Error::Dimension(format!("{} basis images, expected {}", per_time.len(), d * d)));
            }
            let mut entries = Vec::new();
            for (col, img) in per_time.iter().enumerate() {
                if img.nrows() != d || img.ncols() != d {
                    return Err(Error::Dimension("basis image has wrong shape".into()));
                }
                for i in 0..d {
                    for j in 0..d {
                        let v = img[(i, j)];
                        if v != C0 {
                            entries.push((i * d + j, col, v));
                        }
                    }
                }
            }
            maps.push(entries);
        }
        Ok(SampledSuperoperator { n, grid, maps: Arc::new(maps), label: label.into() })
    }

    /// Dense `d^2 × d^2` matrix at grid point `step`.
    pub fn dense(&self, step: usize) -> CMatrix {
        let dd = 1usize << (2 * self.n);
        let mut m = CMatrix::zeros(dd, dd);
        for &(r, c, v) in &self.maps[step] {
            m[(r, c)] += v;
        }
        m
    }
}

impl ChannelEvolution for SampledSuperoperator {
    fn system_qubits(&self) -> usize {
        self.n
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn apply(&self, step: usize, op: &CMatrix, ancilla_dim: usize) -> Result<CMatrix> {
        check_operand(self.n, &self.grid, step, op, ancilla_dim)?;
        let d = 1usize << self.n;
        let da = ancilla_dim;
        let total = d * da;
        let mut out = CMatrix::zeros(total, total);
        let mut x = vec![C0; d * d];
        for alpha in 0..da {
            for beta in 0..da {
                let mut any = false;
                for k in 0..d {
                    for l in 0..d {
                        let v = op[(k * da + alpha, l * da + beta)];
                        any |= v != C0;
                        x[k * d + l] = v;
                    }
                }
                if !any {
                    continue;
                }
                for &(r, c, v) in &self.maps[step] {
                    let (i, j) = (r / d, r % d);
                    out[(i * da + alpha, j * da + beta)] += v * x[c];
                }
            }
        }
        Ok(out)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{random_density_matrix, tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn ad_like(p: f64) -> KrausSet {
        KrausSet::new(vec![Kraus2::new(c(1.0), C0, C0, c(p.sqrt())), Kraus2::new(C0, c((1.0 - p).sqrt()), C0, C0)])
    }

    fn embed(k: &Kraus2) -> CMatrix {
        CMatrix::from_fn(2, 2, |i, j| k[(i, j)])
    }

    /// Sum over Kraus words K_{i1} ⊗ ... ⊗ K_{in} ⊗ I.
    fn kraus_word_oracle(set: &KrausSet, n: usize, da: usize, x: &CMatrix) -> CMatrix {
        let m = set.ops().len();
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for word in 0..m.pow(n as u32) {
            let mut w = CMatrix::identity(1, 1);
            let mut rem = word;
            for _ in 0..n {
                w = tensor(&w, &embed(&set.ops()[rem % m]));
                rem /= m;
            }
            w = tensor(&w, &CMatrix::identity(da, da));
            out += &w * x * w.adjoint();
        }
        out
    }

    #[test]
    fn grid_shapes() {
        let g = TimeGrid::uniform(40.0, 4000).unwrap();
        assert_eq!(g.points(), 4001);
        assert!((g.step() - 0.01).abs() < 1e-15);
        assert!((g.time(4000) - 40.0).abs() < 1e-12);
        assert_eq!(g.refined(2).samples(), 8000);
        assert!((g.extended(2).horizon() - 80.0).abs() < 1e-12);
        assert!(TimeGrid::uniform(0.0, 10).is_err());
        assert!(TimeGrid::uniform(1.0, 1).is_err());
    }

    #[test]
    fn local_application_matches_kraus_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = ad_like(0.3);
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let ch = LocalKrausChannel::new(1, grid, vec![set.clone(); 3], "ad").unwrap();
        for (n, da) in [(1usize, 1usize), (1, 2), (2, 1), (2, 4), (3, 2)] {
            let rho = random_density_matrix(&mut rng, vec![2; n + da.trailing_zeros() as usize]);
            let fast = ch.with_qubits(n).apply(1, rho.matrix(), da).unwrap();
            let oracle = kraus_word_oracle(&set, n, da, rho.matrix());
            assert!((fast - oracle).norm() < 1e-13, "n={n} da={da}");
        }
    }

    #[test]
    fn completeness_of_test_sets() {
        for p in [0.0, 0.2, 1.0] {
            assert!(ad_like(p).completeness_error() < 1e-15);
        }
    }

    #[test]
    fn collective_weights() {
        assert_eq!(CollectiveDephasingChannel::weight(0b01, 0b10), 0);
        assert_eq!(CollectiveDephasingChannel::weight(0b00, 0b11), 4);
        assert_eq!(CollectiveDephasingChannel::weight(0b00, 0b01), 1);
        assert_eq!(CollectiveDephasingChannel::weight(0b11, 0b11), 0);
    }

    #[test]
    fn superoperator_from_local_images_matches_local_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = ad_like(0.6);
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let local = LocalKrausChannel::new(2, grid, vec![set.clone(); 3], "ad").unwrap();
        let images: Vec<Vec<CMatrix>> = (0..3)
            .map(|j| {
                (0..16)
                    .map(|col| {
                        let mut e = CMatrix::zeros(4, 4);
                        e[(col / 4, col % 4)] = c(1.0);
                        local.apply(j, &e, 1).unwrap()
                    })
                    .collect()
            })
            .collect();
        let sup = SampledSuperoperator::from_basis_images(2, grid, images, "sampled").unwrap();
        let rho = random_density_matrix(&mut rng, vec![2, 2, 2, 2]);
        let a = sup.apply(2, rho.matrix(), 4).unwrap();
        let b = local.apply(2, rho.matrix(), 4).unwrap();
        assert!((a - b).norm() < 1e-13);
        assert!(sup.apply(2, rho.matrix(), 2).is_err());
        assert!(sup.apply(3, rho.matrix(), 4).is_err());
    }
}
