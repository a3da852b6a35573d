//! Density-matrix algebra: states, partial traces, entropies, trace distance
//! and purification. Subsystems are ordered most-significant first, system
//! qubits before the ancilla.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenvalues in `[-CLAMP_WINDOW, 0)` are treated as zero; anything lower is a
/// positivity violation.
pub const CLAMP_WINDOW: f64 = 1e-9;

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Hermitian, unit-trace, positive operator with explicit subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates the state invariants at the default tolerance (1e-10 for
    /// Hermiticity and trace).
    pub fn new(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let rho = Self::from_parts(matrix, dims)?;
        rho.validate(1e-10)?;
        Ok(rho)
    }

    /// Checks shapes only.
    pub fn from_parts(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if dims.is_empty() || matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension(format!("{}x{} matrix does not match subsystem dims {:?}", matrix.nrows(), matrix.ncols(), dims)));
        }
        Ok(DensityMatrix { matrix, dims })
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = &psi.amplitudes;
        DensityMatrix { matrix: v * v.adjoint(), dims: psi.dims.clone() }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        DensityMatrix { matrix: CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0), dims }
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[f64], dims: Vec<usize>) -> Result<Self> {
        let diag = CVector::from_iterator(populations.len(), populations.iter().map(|&p| Complex64::new(p, 0.0)));
        Self::new(CMatrix::from_diagonal(&diag), dims)
    }

    /// Single-qubit state from its population of |0>, and the |0><1| coherence.
    pub fn qubit(rho00: f64, coherence: Complex64) -> Result<Self> {
        let m = CMatrix::from_row_slice(2, 2, &[Complex64::new(rho00, 0.0), coherence, coherence.conj(), Complex64::new(1.0 - rho00, 0.0)]);
        Self::new(m, vec![2])
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Hermiticity and trace within `tol`, smallest eigenvalue above `-CLAMP_WINDOW`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = hermiticity_error(&self.matrix);
        if herm > tol {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigenvalues(&self.matrix).into_iter().fold(f64::INFINITY, f64::min);
        if min < -CLAMP_WINDOW {
            return Err(Error::Positivity(min));
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }
}

/// Unit-norm state vector with explicit subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    dims: Vec<usize>,
}

impl PureState {
    pub fn new(amplitudes: CVector, dims: Vec<usize>) -> Result<Self> {
        let dim: usize = dims.iter().product();
        if amplitudes.len() != dim {
            return Err(Error::Dimension(format!("{} amplitudes for dims {:?}", amplitudes.len(), dims)));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("norm {norm} differs from 1")));
        }
        Ok(PureState { amplitudes, dims })
    }

    /// Normalises `amplitudes` before validating.
    pub fn normalized(amplitudes: CVector, dims: Vec<usize>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::new(amplitudes / Complex64::new(norm, 0.0), dims)
    }

    /// Computational basis state `index` of an `n`-qubit register.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let d = 1 << n_qubits;
        let mut v = CVector::zeros(d);
        v[index] = C1;
        PureState { amplitudes: v, dims: vec![2; n_qubits] }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        PureState { amplitudes, dims }
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// Kronecker product, first factor most significant.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn tensor_states(a: &DensityMatrix, b: &DensityMatrix) -> DensityMatrix {
    let mut dims = a.dims.clone();
    dims.extend_from_slice(&b.dims);
    DensityMatrix { matrix: a.matrix.kronecker(&b.matrix), dims }
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Reduced operator on the subsystems listed in `keep` (ascending, distinct).
pub fn partial_trace_matrix(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    if keep.is_empty() || keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Subsystem(format!("cannot keep {keep:?} of {} subsystems", dims.len())));
    }
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::Dimension(format!("matrix is {}x{}, dims {:?}", m.nrows(), m.ncols(), dims)));
    }
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    // Split every flat index into (kept, traced) flat indices.
    let mut kept_idx = vec![0usize; total];
    let mut traced_idx = vec![0usize; total];
    for (flat, (ki, ti)) in kept_idx.iter_mut().zip(traced_idx.iter_mut()).enumerate() {
        let mut rem = flat;
        let mut digits = vec![0usize; dims.len()];
        for s in (0..dims.len()).rev() {
            digits[s] = rem % dims[s];
            rem /= dims[s];
        }
        let (mut k, mut t) = (0, 0);
        for (s, &dg) in digits.iter().enumerate() {
            if keep.contains(&s) {
                k = k * dims[s] + dg;
            } else {
                t = t * dims[s] + dg;
            }
        }
        *ki = k;
        *ti = t;
    }
    let traced_dim = total / kept_dim;
    // Group flat indices by traced index.
    let mut by_traced: Vec<Vec<usize>> = vec![Vec::new(); traced_dim];
    for flat in 0..total {
        by_traced[traced_idx[flat]].push(flat);
    }
    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for group in &by_traced {
        for &c in group {
            for &r in group {
                out[(kept_idx[r], kept_idx[c])] += m[(r, c)];
            }
        }
    }
    Ok(out)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let m = partial_trace_matrix(&rho.matrix, &rho.dims, keep)?;
    Ok(DensityMatrix { matrix: m, dims: keep.iter().map(|&k| rho.dims[k]).collect() })
}

/// Eigenvalues of a Hermitian matrix. The sparsity pattern is split into
/// connected blocks first and real blocks use the real symmetric solver.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    match n {
        0 => return Vec::new(),
        1 => return vec![m[(0, 0)].re],
        2 => return eig2(m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]).to_vec(),
        _ => {}
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for j in 0..n {
        for i in 0..j {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if block_of[r] == usize::MAX {
            block_of[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[block_of[r]].push(i);
    }
    let mut out = Vec::with_capacity(n);
    for block in blocks {
        match block.len() {
            1 => out.push(m[(block[0], block[0])].re),
            2 => {
                let (a, b) = (block[0], block[1]);
                out.extend(eig2(m[(a, a)].re, m[(b, b)].re, m[(a, b)]));
            }
            k => {
                let real = block.iter().all(|&i| block.iter().all(|&j| m[(i, j)].im == 0.0));
                if real {
                    let sub = DMatrix::<f64>::from_fn(k, k, |i, j| m[(block[i], block[j])].re);
                    out.extend(sub.symmetric_eigenvalues().iter());
                } else {
                    let sub = CMatrix::from_fn(k, k, |i, j| m[(block[i], block[j])]);
                    out.extend(sub.symmetric_eigenvalues().iter());
                }
            }
        }
    }
    out
}

fn eig2(a: f64, d: f64, b: Complex64) -> [f64; 2] {
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    [mean + r, mean - r]
}

/// Shannon entropy in bits of a spectrum, with the clamping window applied.
pub fn entropy_of_spectrum(eigs: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigs {
        if l < -CLAMP_WINDOW {
            return Err(Error::Positivity(l));
        }
        if l > 0.0 {
            s -= l * l.log2();
        }
    }
    Ok(s)
}

/// `-tr rho log2 rho`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_of_spectrum(&hermitian_eigenvalues(&rho.matrix))
}

pub fn matrix_entropy(m: &CMatrix) -> Result<f64> {
    entropy_of_spectrum(&hermitian_eigenvalues(m))
}

/// Sum of absolute eigenvalues of a Hermitian operator.
pub fn trace_norm(x: &CMatrix) -> f64 {
    hermitian_eigenvalues(x).iter().map(|l| l.abs()).sum()
}

pub fn trace_distance(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::Dimension(format!("trace distance of {}- and {}-dim states", rho1.dim(), rho2.dim())));
    }
    Ok(0.5 * trace_norm(&(&rho1.matrix - &rho2.matrix)))
}

fn complement(n: usize, part: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !part.contains(i)).collect()
}

/// `S(rho_s) + S(rho_a) - S(rho_sa)` for the cut that puts the subsystems in
/// `system` on one side and all others on the other.
pub fn mutual_information(rho_sa: &DensityMatrix, system: &[usize]) -> Result<f64> {
    mutual_information_matrix(&rho_sa.matrix, &rho_sa.dims, system)
}

pub fn mutual_information_matrix(m: &CMatrix, dims: &[usize], system: &[usize]) -> Result<f64> {
    let ancilla = complement(dims.len(), system);
    if ancilla.is_empty() {
        return Err(Error::Subsystem("cut leaves the ancilla side empty".into()));
    }
    let rs = partial_trace_matrix(m, dims, system)?;
    let ra = partial_trace_matrix(m, dims, &ancilla)?;
    Ok(matrix_entropy(&rs)? + matrix_entropy(&ra)? - matrix_entropy(m)?)
}

/// `sum_i sqrt(l_i) |v_i>|i>` with ancilla dims equal to the system dims.
pub fn purify(rho: &DensityMatrix) -> Result<PureState> {
    let d = rho.dim();
    let m = &rho.matrix;
    let is_diagonal = (0..d).all(|j| (0..d).all(|i| i == j || m[(i, j)] == C0));
    let (values, vectors): (Vec<f64>, CMatrix) = if is_diagonal {
        ((0..d).map(|i| m[(i, i)].re).collect(), CMatrix::identity(d, d))
    } else {
        let eig = m.clone().symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut psi = CVector::zeros(d * d);
    for (k, &l) in values.iter().enumerate() {
        if l < -CLAMP_WINDOW {
            return Err(Error::Positivity(l));
        }
        let w = l.max(0.0).sqrt();
        if w == 0.0 {
            continue;
        }
        for i in 0..d {
            psi[i * d + k] += vectors[(i, k)] * w;
        }
    }
    let mut dims = rho.dims.clone();
    dims.extend_from_slice(&rho.dims);
    PureState::normalized(psi, dims)
}

/// Haar-random pure state from a normalised complex Gaussian vector.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>) -> PureState {
    let d: usize = dims.iter().product();
    let v = CVector::from_fn(d, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    PureState::normalized(v, dims).expect("gaussian vector is non-zero")
}

/// Random full-rank state `G G† / tr(G G†)` with Gaussian `G`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, dims: Vec<usize>) -> DensityMatrix {
    let d: usize = dims.iter().product();
    let g = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let m = &g * g.adjoint();
    let tr = m.trace();
    DensityMatrix { matrix: m / tr, dims }
}

/// Haar-random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let phases = CMatrix::from_diagonal(&CVector::from_fn(d, |i, _| {
        let z = r[(i, i)];
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            C1
        }
    }));
    q * phases
}

pub mod pauli {
    use super::{CMatrix, C0, C1};
    use num_complex::Complex64;

    pub fn identity() -> CMatrix {
        CMatrix::identity(2, 2)
    }
    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C0, C1, C1, C0])
    }
    pub fn y() -> CMatrix {
        let i = Complex64::i();
        CMatrix::from_row_slice(2, 2, &[C0, -i, i, C0])
    }
    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[C1, C0, C0, -C1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell() -> PureState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        PureState::new(CVector::from_vec(vec![c(s), C0, C0, c(s)]), vec![2, 2]).unwrap()
    }

    /// Explicit multi-index summation over the traced subsystems.
    fn trace_out_oracle(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
        let total: usize = dims.iter().product();
        let kd: usize = keep.iter().map(|&k| dims[k]).product();
        let digits = |mut f: usize| {
            let mut d = vec![0; dims.len()];
            for s in (0..dims.len()).rev() {
                d[s] = f % dims[s];
                f /= dims[s];
            }
            d
        };
        let mut out = CMatrix::zeros(kd, kd);
        for r in 0..total {
            for col in 0..total {
                let (dr, dc) = (digits(r), digits(col));
                let traced_equal = (0..dims.len()).filter(|s| !keep.contains(s)).all(|s| dr[s] == dc[s]);
                if !traced_equal {
                    continue;
                }
                let fold = |d: &[usize]| keep.iter().fold(0, |acc, &s| acc * dims[s] + d[s]);
                out[(fold(&dr), fold(&dc))] += m[(r, col)];
            }
        }
        out
    }

    #[test]
    fn tensor_identities() {
        let i4 = tensor(&pauli::identity(), &pauli::identity());
        assert_eq!(i4, CMatrix::identity(4, 4));
        // sigma_z (x) I on |0 1>
        let ket = PureState::basis(2, 0b01);
        let out = tensor(&pauli::z(), &pauli::identity()) * ket.amplitudes();
        assert_eq!(&out, ket.amplitudes());
        let r = 0.5;
        let k1 = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(r)]));
        let kk = tensor(&k1, &k1);
        let expect = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(0.5), c(0.5), c(0.25)]));
        assert_eq!(kk, expect);
    }

    #[test]
    fn partial_trace_product_and_bell() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_density_matrix(&mut rng, vec![2]);
        let b = random_density_matrix(&mut rng, vec![2]);
        let ab = tensor_states(&a, &b);
        let ra = partial_trace(&ab, &[0]).unwrap();
        assert!((ra.matrix() - a.matrix()).norm() < 1e-14);
        let rb = partial_trace(&ab, &[1]).unwrap();
        assert!((rb.matrix() - b.matrix()).norm() < 1e-14);
        let half = partial_trace(&bell().density(), &[1]).unwrap();
        assert!((half.matrix() - CMatrix::identity(2, 2) * c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_matches_index_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_density_matrix(&mut rng, vec![2, 2, 2]);
        for keep in [vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]] {
            let red = partial_trace(&rho, &keep).unwrap();
            assert!((red.trace().re - 1.0).abs() < 1e-12);
            let oracle = trace_out_oracle(rho.matrix(), rho.dims(), &keep);
            assert!((red.matrix() - oracle).norm() < 1e-13, "keep {keep:?}");
        }
    }

    #[test]
    fn partial_trace_rejects_bad_selection() {
        let rho = DensityMatrix::maximally_mixed(vec![2, 2]);
        assert!(partial_trace(&rho, &[]).is_err());
        assert!(partial_trace(&rho, &[2]).is_err());
        assert!(partial_trace(&rho, &[1, 0]).is_err());
    }

    #[test]
    fn entropy_values() {
        let pure = PureState::basis(1, 1).density();
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-15);
        assert!((von_neumann_entropy(&DensityMatrix::maximally_mixed(vec![2])).unwrap() - 1.0).abs() < 1e-14);
        let quarter = DensityMatrix::diagonal(&[0.25; 4], vec![2, 2]).unwrap();
        assert!((von_neumann_entropy(&quarter).unwrap() - 2.0).abs() < 1e-14);
        assert!(von_neumann_entropy(&bell().density()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn entropy_clamps_and_rejects() {
        assert_eq!(entropy_of_spectrum(&[1.0, -5e-10]).unwrap(), 0.0);
        assert!(matches!(entropy_of_spectrum(&[1.0, -1e-6]), Err(Error::Positivity(_))));
    }

    #[test]
    fn trace_distance_basics() {
        let up = PureState::basis(1, 0).density();
        let down = PureState::basis(1, 1).density();
        assert!(trace_distance(&up, &up).unwrap().abs() < 1e-15);
        assert!((trace_distance(&up, &down).unwrap() - 1.0).abs() < 1e-15);
        // |+>, |-> with coherences scaled by r: difference [[0, r], [r, 0]]
        let r = 0.37;
        let p = DensityMatrix::qubit(0.5, c(0.5 * r)).unwrap();
        let m = DensityMatrix::qubit(0.5, c(-0.5 * r)).unwrap();
        assert!((trace_distance(&p, &m).unwrap() - r).abs() < 1e-15);
        let q = DensityMatrix::maximally_mixed(vec![2, 2]);
        assert!(trace_distance(&p, &q).is_err());
    }

    #[test]
    fn mutual_information_values() {
        let prod = tensor_states(&DensityMatrix::maximally_mixed(vec![2]), &PureState::basis(1, 0).density());
        assert!(mutual_information(&prod, &[0]).unwrap().abs() < 1e-14);
        assert!((mutual_information(&bell().density(), &[0]).unwrap() - 2.0).abs() < 1e-12);
        for q in [0.1, 0.3, 0.45] {
            let rho = DensityMatrix::diagonal(&[q, 1.0 - q], vec![2]).unwrap();
            let psi = purify(&rho).unwrap();
            let h2 = -q * q.log2() - (1.0 - q) * (1.0 - q).log2();
            let i = mutual_information(&psi.density(), &[0]).unwrap();
            assert!((i - 2.0 * h2).abs() < 1e-12);
        }
    }

    #[test]
    fn purification_reduces_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dims in [vec![2], vec![2, 2]] {
            let rho = random_density_matrix(&mut rng, dims.clone());
            let psi = purify(&rho).unwrap();
            let n = dims.len();
            let keep: Vec<usize> = (0..n).collect();
            let back = partial_trace(&psi.density(), &keep).unwrap();
            assert!((back.matrix() - rho.matrix()).norm() < 1e-10);
        }
        let rho = DensityMatrix::diagonal(&[0.3, 0.7], vec![2]).unwrap();
        let psi = purify(&rho).unwrap();
        let a = psi.amplitudes();
        assert!((a[0].re - 0.3f64.sqrt()).abs() < 1e-15 && (a[3].re - 0.7f64.sqrt()).abs() < 1e-15);
        let pure = PureState::basis(1, 1).density();
        let psi = purify(&pure).unwrap();
        assert!(mutual_information(&psi.density(), &[0]).unwrap().abs() < 1e-12);
        let mixed = purify(&DensityMatrix::maximally_mixed(vec![2])).unwrap();
        assert!((mutual_information(&mixed.density(), &[0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn block_eigensolver_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_density_matrix(&mut rng, vec![3]);
        let b = random_density_matrix(&mut rng, vec![4]);
        // Interleave two blocks through a permutation.
        let perm = [0, 3, 1, 4, 6, 2, 5];
        let mut m = CMatrix::zeros(7, 7);
        for i in 0..3 {
            for j in 0..3 {
                m[(perm[i], perm[j])] = a.matrix()[(i, j)];
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                m[(perm[3 + i], perm[3 + j])] = b.matrix()[(i, j)];
            }
        }
        let mut fast = hermitian_eigenvalues(&m);
        let mut dense: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        fast.sort_by(f64::total_cmp);
        dense.sort_by(f64::total_cmp);
        for (x, y) in fast.iter().zip(&dense) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn validation_rejects_bad_states() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.2), C0, C0, c(-0.2)]);
        assert!(matches!(DensityMatrix::new(m, vec![2]), Err(Error::Positivity(_))));
        let m = CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.1), C0, c(0.5)]);
        assert!(DensityMatrix::new(m, vec![2]).is_err());
        let m = CMatrix::identity(2, 2);
        assert!(DensityMatrix::new(m, vec![2]).is_err());
        assert!(DensityMatrix::new(CMatrix::identity(2, 2) * c(0.5), vec![2, 2]).is_err());
    }
}
