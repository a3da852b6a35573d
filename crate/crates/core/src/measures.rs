//! LFS (mutual information) and BLP (trace distance) non-Markovianity
//! measures: trajectories, rising-run sums and the searches over initial
//! states and state pairs.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelEvolution;
use crate::error::{Error, Result};
use crate::numerics::{nelder_mead, refine_extremum};
use crate::quantum::{hermitian_eigenvalues, mutual_information_matrix, purify, trace_norm, CMatrix, CVector, DensityMatrix, PureState};

/// Successive differences above this count as a rise.
pub const RISE_EPSILON: f64 = 1e-12;

/// Two candidates closer than this are tied; the earlier one wins.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Largest system the fixed-input LFS variant accepts.
pub const MAX_N0_QUBITS: usize = 4;

const TRACE_TOLERANCE: f64 = 1e-8;

/// Screened candidates re-evaluated on the full grid.
const FINALISTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension(format!("{} times but {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Dimension("trajectory times are not strictly increasing".into()));
        }
        Ok(Trajectory { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
    pub rise: f64,
}

/// Printable description of the optimising input. `parameters` holds the
/// search coordinates (populations, coherences or flattened amplitudes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxState {
    pub label: String,
    pub parameters: Vec<f64>,
}

/// The input that produced a result, kept so a run can be repeated on a
/// longer or denser grid.
#[derive(Debug, Clone)]
pub enum Candidate {
    /// Mixed system state, purified with an ancilla copy.
    State(DensityMatrix),
    /// Pure system-ancilla state with `system` leading qubits.
    Joint {
        psi: PureState,
        system: usize,
    },
    Pair(DensityMatrix, DensityMatrix),
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureResult {
    pub value: f64,
    pub intervals: Vec<Interval>,
    pub argmax_state: ArgmaxState,
    /// Filled in by the runner.
    pub config_hash: String,
    pub evaluations: usize,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub candidate: Option<Candidate>,
}

impl MeasureResult {
    fn from_trajectory(traj: &Trajectory, argmax_state: ArgmaxState, candidate: Candidate, evaluations: usize) -> Self {
        let (value, intervals) = rising_sum(traj);
        MeasureResult {
            value,
            intervals,
            argmax_state,
            config_hash: String::new(),
            evaluations,
            wall_time_s: 0.0,
            candidate: Some(candidate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    SingleQubitFull,
    DiagonalProduct,
    DiagonalJoint,
    PairStructured,
    PairRandom,
}

impl SearchMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "single-qubit-full" => Ok(SearchMode::SingleQubitFull),
            "diagonal-product" => Ok(SearchMode::DiagonalProduct),
            "diagonal-joint" => Ok(SearchMode::DiagonalJoint),
            "pair-structured" => Ok(SearchMode::PairStructured),
            "pair-random" => Ok(SearchMode::PairRandom),
            _ => Err(Error::config("search.mode", format!("unknown search mode '{s}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SearchMode::SingleQubitFull => "single-qubit-full",
            SearchMode::DiagonalProduct => "diagonal-product",
            SearchMode::DiagonalJoint => "diagonal-joint",
            SearchMode::PairStructured => "pair-structured",
            SearchMode::PairRandom => "pair-random",
        }
    }

    pub fn is_pair_search(&self) -> bool {
        matches!(self, SearchMode::PairStructured | SearchMode::PairRandom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Population grid spacing of the state searches.
    pub grid_step: f64,
    /// Population grid spacing of the diagonal-joint search.
    pub joint_grid_step: f64,
    pub random_samples: usize,
    pub seed: u64,
    /// Nelder-Mead iterations of the final polish; 0 disables it.
    pub refine_iterations: usize,
    /// Every `screen_stride`-th grid point is used while screening.
    pub screen_stride: usize,
    /// Adds a grid of mixed single-qubit pairs to the BLP search.
    pub mixed_pairs: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            mode: SearchMode::SingleQubitFull,
            grid_step: 0.02,
            joint_grid_step: 0.1,
            random_samples: 10_000,
            seed: 0,
            refine_iterations: 200,
            screen_stride: 4,
            mixed_pairs: false,
        }
    }
}

impl SearchConfig {
    pub fn with_mode(mode: SearchMode) -> Self {
        SearchConfig { mode, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("search.grid_step", self.grid_step), ("search.joint_grid_step", self.joint_grid_step)] {
            if !(v > 0.0 && v <= 0.5) {
                return Err(Error::config(field, format!("{v} is outside (0, 0.5]")));
            }
        }
        if self.screen_stride == 0 {
            return Err(Error::config("search.screen_stride", "must be at least 1"));
        }
        Ok(())
    }

    fn population_grid(step: f64) -> Vec<f64> {
        let m = (1.0 / step).round().max(1.0) as usize;
        let mut out: Vec<f64> = (0..=m).map(|i| (i as f64 * step).min(1.0)).collect();
        if *out.last().unwrap() < 1.0 {
            out.push(1.0);
        }
        out
    }
}

/// Sum of `v(b) - v(a)` over maximal runs of successive differences above
/// [`RISE_EPSILON`].
pub fn rising_sum(traj: &Trajectory) -> (f64, Vec<Interval>) {
    let (v, t) = (&traj.values, &traj.times);
    let mut intervals = Vec::new();
    let mut start: Option<usize> = None;
    for i in 1..v.len() {
        let rising = v[i] - v[i - 1] > RISE_EPSILON;
        match (rising, start) {
            (true, None) => start = Some(i - 1),
            (false, Some(a)) => {
                intervals.push(Interval { a: t[a], b: t[i - 1], rise: v[i - 1] - v[a] });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        let last = v.len() - 1;
        intervals.push(Interval { a: t[a], b: t[last], rise: v[last] - v[a] });
    }
    (intervals.iter().map(|i| i.rise).sum(), intervals)
}

/// As [`rising_sum`], with interior run endpoints moved to the extrema of the
/// continuous `f` inside the neighbouring grid cells. Endpoints whose
/// refinement fails keep their grid values.
pub fn rising_sum_refined<F: Fn(f64) -> f64>(traj: &Trajectory, f: F, tol: f64) -> (f64, Vec<Interval>) {
    let (_, coarse) = rising_sum(traj);
    let t = &traj.times;
    let v = &traj.values;
    let index = |x: f64| t.iter().position(|&s| s == x).expect("interval endpoint is a grid time");
    let sharpen = |i: usize, want_max: bool| -> (f64, f64) {
        if i == 0 || i + 1 >= t.len() {
            return (t[i], v[i]);
        }
        match refine_extremum(&f, (t[i - 1], t[i + 1]), tol) {
            Ok((x, fx)) if (want_max && fx >= v[i]) || (!want_max && fx <= v[i]) => (x, fx),
            _ => (t[i], v[i]),
        }
    };
    let intervals: Vec<Interval> = coarse
        .iter()
        .map(|iv| {
            let (a, fa) = sharpen(index(iv.a), false);
            let (b, fb) = sharpen(index(iv.b), true);
            Interval { a, b, rise: fb - fa }
        })
        .collect();
    (intervals.iter().map(|i| i.rise).sum(), intervals)
}

fn check_system(channel: &dyn ChannelEvolution, dims: &[usize], what: &str) -> Result<()> {
    let n = channel.system_qubits();
    if dims.len() < n || dims[..n].iter().any(|&d| d != 2) {
        return Err(Error::Dimension(format!("{what} dims {dims:?} do not start with {n} qubits")));
    }
    Ok(())
}

fn sample_indices(channel: &dyn ChannelEvolution, stride: usize) -> Vec<usize> {
    let last = channel.grid().samples();
    let mut idx: Vec<usize> = (0..=last).step_by(stride.max(1)).collect();
    if *idx.last().unwrap() != last {
        idx.push(last);
    }
    idx
}

fn mi_series(channel: &dyn ChannelEvolution, psi: &PureState, stride: usize) -> Result<Trajectory> {
    let dims = psi.dims().to_vec();
    check_system(channel, &dims, "joint state")?;
    let n = channel.system_qubits();
    if dims.len() == n {
        return Err(Error::Subsystem("joint state has no ancilla".into()));
    }
    let da: usize = dims[n..].iter().product();
    let amp = psi.amplitudes();
    let op: CMatrix = amp * amp.adjoint();
    let system: Vec<usize> = (0..n).collect();
    let grid = *channel.grid();
    let idx = sample_indices(channel, stride);
    let mut values = Vec::with_capacity(idx.len());
    for &j in &idx {
        let m = channel.apply(j, &op, da)?;
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOLERANCE || tr.im.abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} at t = {}", grid.time(j))));
        }
        values.push(mutual_information_matrix(&m, &dims, &system)?);
    }
    Trajectory::new(idx.iter().map(|&j| grid.time(j)).collect(), values)
}

fn td_series(channel: &dyn ChannelEvolution, rho1: &DensityMatrix, rho2: &DensityMatrix, stride: usize) -> Result<Trajectory> {
    if rho1.dims() != rho2.dims() {
        return Err(Error::Dimension(format!("pair dims {:?} and {:?} differ", rho1.dims(), rho2.dims())));
    }
    check_system(channel, rho1.dims(), "pair")?;
    let n = channel.system_qubits();
    let da = rho1.dim() >> n;
    // the map is linear, so only the difference is propagated
    let delta = rho1.matrix() - rho2.matrix();
    let grid = *channel.grid();
    let idx = sample_indices(channel, stride);
    let mut values = Vec::with_capacity(idx.len());
    for &j in &idx {
        values.push(0.5 * trace_norm(&channel.apply(j, &delta, da)?));
    }
    Trajectory::new(idx.iter().map(|&j| grid.time(j)).collect(), values)
}

/// System-ancilla mutual information in bits along the channel grid, with
/// `rho_s0` purified on an ancilla copy of the system.
pub fn lfs_trajectory(channel: &dyn ChannelEvolution, rho_s0: &DensityMatrix) -> Result<Trajectory> {
    check_system(channel, rho_s0.dims(), "state")?;
    mi_series(channel, &purify(rho_s0)?, 1)
}

/// Mutual-information trajectory from a given pure system-ancilla input.
pub fn lfs_joint_trajectory(channel: &dyn ChannelEvolution, psi: &PureState) -> Result<Trajectory> {
    mi_series(channel, psi, 1)
}

pub fn trace_distance_trajectory(channel: &dyn ChannelEvolution, rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<Trajectory> {
    td_series(channel, rho1, rho2, 1)
}

fn describe_state(rho: &DensityMatrix) -> ArgmaxState {
    let m = rho.matrix();
    if rho.dim() == 2 {
        let c = m[(0, 1)];
        return ArgmaxState {
            label: format!("rho11={:.6}, rho12={:.6}{:+.6}i", m[(0, 0)].re, c.re, c.im),
            parameters: vec![m[(0, 0)].re, c.re, c.im],
        };
    }
    let diag: Vec<f64> = (0..rho.dim()).map(|i| m[(i, i)].re).collect();
    let text: Vec<String> = diag.iter().map(|p| format!("{p:.6}")).collect();
    ArgmaxState { label: format!("diag({})", text.join(", ")), parameters: diag }
}

fn flatten(psi: &CVector) -> Vec<f64> {
    psi.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// LFS value of the purification of `rho_s0`.
pub fn lfs_value(channel: &dyn ChannelEvolution, rho_s0: &DensityMatrix) -> Result<MeasureResult> {
    let traj = lfs_trajectory(channel, rho_s0)?;
    Ok(MeasureResult::from_trajectory(&traj, describe_state(rho_s0), Candidate::State(rho_s0.clone()), 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntangledChoice {
    /// `(|0…0>|0…0> + |1…1>|1…1>)/√2`.
    Ghz,
    /// A maximally entangled pair per qubit.
    FullMaxent,
}

impl EntangledChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ghz" => Ok(EntangledChoice::Ghz),
            "full-maxent" => Ok(EntangledChoice::FullMaxent),
            _ => Err(Error::config("run.entangled", format!("unknown entangled input '{s}'"))),
        }
    }
}

pub fn entangled_input(n: usize, choice: EntangledChoice) -> Result<PureState> {
    if n == 0 || n > MAX_N0_QUBITS {
        return Err(Error::Dimension(format!("{n} qubits outside 1..={MAX_N0_QUBITS}")));
    }
    let d = 1usize << n;
    let dims = vec![2; 2 * n];
    match choice {
        EntangledChoice::Ghz => {
            let mut v = CVector::zeros(d * d);
            v[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
            v[d * d - 1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
            PureState::new(v, dims)
        }
        EntangledChoice::FullMaxent => purify(&DensityMatrix::maximally_mixed(vec![2; n])),
    }
}

/// LFS accumulated from a fixed maximally entangled input, no optimisation.
pub fn lfs_n0(channel: &dyn ChannelEvolution, choice: EntangledChoice) -> Result<MeasureResult> {
    let n = channel.system_qubits();
    let psi = entangled_input(n, choice)?;
    let traj = mi_series(channel, &psi, 1)?;
    let label = match choice {
        EntangledChoice::Ghz => format!("GHZ on {n}+{n} qubits"),
        EntangledChoice::FullMaxent => format!("{n} maximally entangled pairs"),
    };
    let argmax = ArgmaxState { label, parameters: Vec::new() };
    Ok(MeasureResult::from_trajectory(&traj, argmax, Candidate::Joint { psi, system: n }, 1))
}

/// BLP value of a fixed pair.
pub fn blp_value(channel: &dyn ChannelEvolution, rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<MeasureResult> {
    let traj = trace_distance_trajectory(channel, rho1, rho2)?;
    let argmax = ArgmaxState { label: "given pair".into(), parameters: Vec::new() };
    Ok(MeasureResult::from_trajectory(&traj, argmax, Candidate::Pair(rho1.clone(), rho2.clone()), 1))
}

/// Index of the largest value; ties within [`TIE_TOLERANCE`] go to the
/// earliest index.
fn first_best(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] + TIE_TOLERANCE {
            best = i;
        }
    }
    best
}

/// Screens `candidates` on a strided grid, re-evaluates the best few on the
/// full grid and returns the winner's index, full value and the number of
/// evaluations.
fn screen<T: Sync>(candidates: &[T], stride: usize, eval: impl Fn(&T, usize) -> Result<f64> + Sync) -> Result<(usize, f64, usize)> {
    let screened: Vec<f64> = candidates.par_iter().map(|c| eval(c, stride)).collect::<Result<Vec<_>>>()?;
    let mut evaluations = candidates.len();
    let finalists: Vec<usize> = if stride == 1 {
        vec![first_best(&screened)]
    } else {
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        // stable sort keeps index order among equal screened values
        order.sort_by(|&a, &b| screened[b].total_cmp(&screened[a]));
        let mut top: Vec<usize> = order.into_iter().take(FINALISTS).collect();
        top.sort_unstable();
        top
    };
    let full: Vec<f64> = if stride == 1 {
        vec![screened[finalists[0]]]
    } else {
        evaluations += finalists.len();
        finalists.par_iter().map(|&i| eval(&candidates[i], 1)).collect::<Result<Vec<_>>>()?
    };
    let k = first_best(&full);
    Ok((finalists[k], full[k], evaluations))
}

fn qubit_from_parameters(x: &[f64]) -> DensityMatrix {
    let p = x[0].clamp(0.0, 1.0);
    let bound = (p * (1.0 - p)).sqrt();
    let mut c = Complex64::new(x[1], x[2]);
    if c.norm() > bound {
        c *= bound / c.norm();
    }
    DensityMatrix::qubit(p, c).expect("clamped parameters give a valid state")
}

fn dephased(rho: &DensityMatrix) -> DensityMatrix {
    let pops: Vec<f64> = (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re).collect();
    DensityMatrix::diagonal(&pops, rho.dims().to_vec()).expect("diagonal of a state is a state")
}

fn product_diagonal(p: f64, n: usize) -> DensityMatrix {
    let p = p.clamp(0.0, 1.0);
    let pops: Vec<f64> =
        (0..1usize << n).map(|k| (0..n).map(|q| if (k >> (n - 1 - q)) & 1 == 0 { p } else { 1.0 - p }).product()).collect();
    DensityMatrix::diagonal(&pops, vec![2; n]).expect("product populations are valid")
}

fn joint_from_parameters(x: &[f64], n: usize) -> DensityMatrix {
    let w: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let s: f64 = w.iter().sum();
    let pops: Vec<f64> = if s > 0.0 { w.iter().map(|v| v / s).collect() } else { vec![1.0 / w.len() as f64; w.len()] };
    DensityMatrix::diagonal(&pops, vec![2; n]).expect("normalised populations are valid")
}

/// All compositions of 1 into `parts` multiples of `1/m`, lexicographic.
fn simplex_grid(parts: usize, m: usize) -> Vec<Vec<f64>> {
    fn rec(parts: usize, left: usize, m: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&k| k as f64 / m as f64).collect());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(parts - 1, left - k, m, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(parts, m, m, &mut Vec::new(), &mut out);
    out
}

/// Parameter-to-state map of a search mode.
type StateMap = Box<dyn Fn(&[f64]) -> DensityMatrix + Sync>;

/// Maximises the LFS value over initial system states.
pub fn lfs_optimize(channel: &dyn ChannelEvolution, search: &SearchConfig) -> Result<MeasureResult> {
    search.validate()?;
    let n = channel.system_qubits();
    let stride = search.screen_stride;
    let value_of = |rho: &DensityMatrix, stride: usize| -> Result<f64> { Ok(rising_sum(&mi_series(channel, &purify(rho)?, stride)?).0) };
    // (start parameters, parameter-to-state map, polish scale)
    let (start, to_state, scale, mut evaluations): (Vec<f64>, StateMap, f64, usize) = match search.mode {
        SearchMode::SingleQubitFull => {
            if n != 1 {
                return Err(Error::config("search.mode", format!("single-qubit-full needs 1 qubit, channel has {n}")));
            }
            let mut cands: Vec<[f64; 3]> = Vec::new();
            for p in SearchConfig::population_grid(search.grid_step) {
                let bound = (p * (1.0 - p)).sqrt();
                cands.push([p, 0.0, 0.0]);
                for f in [0.25, 0.5, 0.75, 1.0] {
                    if bound > 0.0 {
                        for phase in [0.0, FRAC_PI_2] {
                            cands.push([p, f * bound * f64::cos(phase), f * bound * f64::sin(phase)]);
                        }
                    }
                }
            }
            cands.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
            let (k, _, ev) = screen(&cands, stride, |c, s| value_of(&qubit_from_parameters(c), s))?;
            (cands[k].to_vec(), Box::new(qubit_from_parameters), search.grid_step, ev)
        }
        SearchMode::DiagonalProduct => {
            let grid = SearchConfig::population_grid(search.grid_step);
            let (k, _, ev) = screen(&grid, stride, |&p, s| value_of(&product_diagonal(p, n), s))?;
            (vec![grid[k]], Box::new(move |x: &[f64]| product_diagonal(x[0], n)), search.grid_step, ev)
        }
        SearchMode::DiagonalJoint => {
            let m = (1.0 / search.joint_grid_step).round().max(1.0) as usize;
            let grid = simplex_grid(1 << n, m);
            let (k, _, ev) = screen(&grid, stride, |c, s| value_of(&joint_from_parameters(c, n), s))?;
            (grid[k].clone(), Box::new(move |x: &[f64]| joint_from_parameters(x, n)), search.joint_grid_step, ev)
        }
        mode => return Err(Error::config("search.mode", format!("{} is a pair search", mode.as_str()))),
    };
    let start_state = to_state(&start);
    let start_value = value_of(&start_state, 1)?;
    evaluations += 1;
    let mut best = (start_state, start_value);
    if search.refine_iterations > 0 {
        let mut failure = None;
        let min = nelder_mead(
            |x| match value_of(&to_state(x), 1) {
                Ok(v) => -v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            },
            &start,
            0.5 * scale,
            search.refine_iterations,
            1e-12,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        evaluations += min.evaluations;
        if -min.value > best.1 + TIE_TOLERANCE {
            best = (to_state(&min.x), -min.value);
        }
    }
    // a tie with the dephased optimiser goes to the diagonal state
    let diagonal = dephased(&best.0);
    if diagonal.matrix() != best.0.matrix() {
        let v = value_of(&diagonal, 1)?;
        evaluations += 1;
        if v >= best.1 - TIE_TOLERANCE {
            best = (diagonal, v);
        }
    }
    let mut result = lfs_value(channel, &best.0)?;
    result.evaluations = evaluations + 1;
    Ok(result)
}

/// A candidate pair of pure states with a label.
#[derive(Debug, Clone)]
pub struct StatePair {
    pub label: String,
    pub first: CVector,
    pub second: CVector,
}

impl StatePair {
    fn densities(&self, dims: &[usize]) -> Result<(DensityMatrix, DensityMatrix)> {
        let a = PureState::normalized(self.first.clone(), dims.to_vec())?.density();
        let b = PureState::normalized(self.second.clone(), dims.to_vec())?.density();
        Ok((a, b))
    }

    fn parameters(&self) -> Vec<f64> {
        let mut p = flatten(&self.first);
        p.extend(flatten(&self.second));
        p
    }
}

fn ket(amps: &[(usize, Complex64)], d: usize) -> CVector {
    let mut v = CVector::zeros(d);
    for &(i, a) in amps {
        v[i] += a;
    }
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// Single-qubit kets by name: 0, 1, +, -, +i, -i.
fn qubit_ket(name: &str) -> CVector {
    let h = FRAC_1_SQRT_2;
    let (a, b) = match name {
        "0" => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
        "1" => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        "+" => (Complex64::new(h, 0.0), Complex64::new(h, 0.0)),
        "-" => (Complex64::new(h, 0.0), Complex64::new(-h, 0.0)),
        "+i" => (Complex64::new(h, 0.0), Complex64::new(0.0, h)),
        "-i" => (Complex64::new(h, 0.0), Complex64::new(0.0, -h)),
        _ => unreachable!("unknown qubit ket {name}"),
    };
    CVector::from_vec(vec![a, b])
}

fn kron(a: &CVector, b: &CVector) -> CVector {
    CVector::from_fn(a.len() * b.len(), |i, _| a[i / b.len()] * b[i % b.len()])
}

/// The structured pair families for one or two qubits.
pub fn structured_pairs(n: usize) -> Result<Vec<StatePair>> {
    let axes = [("0", "1"), ("+", "-"), ("+i", "-i")];
    let mut out = Vec::new();
    match n {
        1 => {
            for (a, b) in axes {
                out.push(StatePair { label: format!("|{a}>,|{b}>"), first: qubit_ket(a), second: qubit_ket(b) });
            }
        }
        2 => {
            let c = |x: f64| Complex64::new(x, 0.0);
            for i in 0..4 {
                for j in i + 1..4 {
                    out.push(StatePair {
                        label: format!("|{i:02b}>,|{j:02b}>"),
                        first: ket(&[(i, c(1.0))], 4),
                        second: ket(&[(j, c(1.0))], 4),
                    });
                }
            }
            // one spectator in a basis state, the other qubit on an axis pair
            for s in ["0", "1"] {
                for (a, b) in axes {
                    out.push(StatePair {
                        label: format!("|{s}{a}>,|{s}{b}>"),
                        first: kron(&qubit_ket(s), &qubit_ket(a)),
                        second: kron(&qubit_ket(s), &qubit_ket(b)),
                    });
                    out.push(StatePair {
                        label: format!("|{a}{s}>,|{b}{s}>"),
                        first: kron(&qubit_ket(a), &qubit_ket(s)),
                        second: kron(&qubit_ket(b), &qubit_ket(s)),
                    });
                }
            }
            // both qubits on the same axis
            for (a, b) in axes {
                for (x1, x2, y1, y2) in [(a, a, b, b), (a, b, b, a)] {
                    out.push(StatePair {
                        label: format!("|{x1}{x2}>,|{y1}{y2}>"),
                        first: kron(&qubit_ket(x1), &qubit_ket(x2)),
                        second: kron(&qubit_ket(y1), &qubit_ket(y2)),
                    });
                }
            }
            let bell = [
                ("Phi+", ket(&[(0, c(1.0)), (3, c(1.0))], 4)),
                ("Phi-", ket(&[(0, c(1.0)), (3, c(-1.0))], 4)),
                ("Psi+", ket(&[(1, c(1.0)), (2, c(1.0))], 4)),
                ("Psi-", ket(&[(1, c(1.0)), (2, c(-1.0))], 4)),
            ];
            for i in 0..4 {
                for j in i + 1..4 {
                    out.push(StatePair {
                        label: format!("{},{}", bell[i].0, bell[j].0),
                        first: bell[i].1.clone(),
                        second: bell[j].1.clone(),
                    });
                }
            }
        }
        _ => return Err(Error::config("run.n_qubits", format!("pair searches support 1 or 2 qubits, got {n}"))),
    }
    Ok(out)
}

fn gaussian_vector(rng: &mut ChaCha8Rng, d: usize) -> CVector {
    CVector::from_fn(d, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// `(first, second)` normalised with `second` orthogonalised against `first`.
fn orthonormal_pair(first: &CVector, second: &CVector) -> Option<(CVector, CVector)> {
    let n1 = first.norm();
    if !(n1 > 1e-12) {
        return None;
    }
    let a = first / Complex64::new(n1, 0.0);
    let b = second - &a * a.dotc(second);
    let n2 = b.norm();
    if !(n2 > 1e-12) {
        return None;
    }
    Some((a, b / Complex64::new(n2, 0.0)))
}

/// Random orthogonal pure pair number `index`, drawn from its own stream so
/// the pair does not depend on evaluation order.
pub fn random_pair(seed: u64, index: u64, n: usize) -> StatePair {
    let d = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    loop {
        let (u, v) = (gaussian_vector(&mut rng, d), gaussian_vector(&mut rng, d));
        if let Some((first, second)) = orthonormal_pair(&u, &v) {
            return StatePair { label: format!("random pair {index} (seed {seed})"), first, second };
        }
    }
}

/// Bloch-ball pairs on the coordinate axes at two radii.
fn mixed_qubit_pairs() -> Vec<(String, [f64; 3], [f64; 3])> {
    let dirs: [[f64; 3]; 6] = [[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    let radii = [0.5, 1.0];
    let mut out = Vec::new();
    for (i, u) in dirs.iter().enumerate() {
        for (j, v) in dirs.iter().enumerate() {
            for &r1 in &radii {
                for &r2 in &radii {
                    if i == j && r1 == r2 {
                        continue;
                    }
                    let a = [r1 * u[0], r1 * u[1], r1 * u[2]];
                    let b = [r2 * v[0], r2 * v[1], r2 * v[2]];
                    out.push((format!("Bloch {a:?},{b:?}"), a, b));
                }
            }
        }
    }
    out
}

fn bloch_state(r: &[f64; 3]) -> DensityMatrix {
    let rho00 = 0.5 * (1.0 + r[2]);
    DensityMatrix::qubit(rho00, Complex64::new(0.5 * r[0], -0.5 * r[1])).expect("Bloch vector inside the ball")
}

fn pair_from_parameters(x: &[f64], d: usize) -> Option<(CVector, CVector)> {
    let u = CVector::from_fn(d, |i, _| Complex64::new(x[2 * i], x[2 * i + 1]));
    let v = CVector::from_fn(d, |i, _| Complex64::new(x[2 * (d + i)], x[2 * (d + i) + 1]));
    orthonormal_pair(&u, &v)
}

/// Maximises the BLP value over pairs: structured families, seeded random
/// orthogonal pure pairs, optional mixed single-qubit pairs, then a
/// Nelder-Mead polish of the best pure pair.
pub fn blp_optimize(channel: &dyn ChannelEvolution, search: &SearchConfig) -> Result<MeasureResult> {
    search.validate()?;
    if !search.mode.is_pair_search() {
        return Err(Error::config("search.mode", format!("{} is not a pair search", search.mode.as_str())));
    }
    let n = channel.system_qubits();
    let d = 1usize << n;
    let dims = vec![2; n];
    let mut pairs = structured_pairs(n)?;
    let structured = pairs.len();
    let eval_pair = |p: &StatePair, stride: usize| -> Result<f64> {
        let (a, b) = p.densities(&dims)?;
        Ok(rising_sum(&td_series(channel, &a, &b, stride)?).0)
    };
    // structured families on the full grid
    let values: Vec<f64> = pairs.par_iter().map(|p| eval_pair(p, 1)).collect::<Result<Vec<_>>>()?;
    let mut evaluations = structured;
    let mut best_index = first_best(&values);
    let mut best_value = values[best_index];
    if search.mode == SearchMode::PairRandom && search.random_samples > 0 {
        let random: Vec<StatePair> = (0..search.random_samples as u64).map(|i| random_pair(search.seed, i, n)).collect();
        let (k, v, ev) = screen(&random, search.screen_stride, |p, s| eval_pair(p, s))?;
        evaluations += ev;
        pairs.push(random[k].clone());
        if v > best_value + TIE_TOLERANCE {
            best_index = pairs.len() - 1;
            best_value = v;
        }
    }
    let mut mixed_best: Option<(String, [f64; 3], [f64; 3], f64)> = None;
    if search.mixed_pairs && n == 1 {
        let mixed = mixed_qubit_pairs();
        let vals: Vec<f64> = mixed
            .par_iter()
            .map(|(_, a, b)| Ok(rising_sum(&td_series(channel, &bloch_state(a), &bloch_state(b), 1)?).0))
            .collect::<Result<Vec<_>>>()?;
        evaluations += mixed.len();
        let k = first_best(&vals);
        if vals[k] > best_value + TIE_TOLERANCE {
            let (label, a, b) = mixed[k].clone();
            mixed_best = Some((label, a, b, vals[k]));
        }
    }
    if let Some((label, a, b, _)) = mixed_best {
        let (ra, rb) = (bloch_state(&a), bloch_state(&b));
        let traj = trace_distance_trajectory(channel, &ra, &rb)?;
        let params = a.iter().chain(b.iter()).copied().collect();
        let mut r = MeasureResult::from_trajectory(&traj, ArgmaxState { label, parameters: params }, Candidate::Pair(ra, rb), 0);
        r.evaluations = evaluations + 1;
        return Ok(r);
    }
    let mut best = pairs[best_index].clone();
    if search.refine_iterations > 0 {
        let start = best.parameters();
        let mut failure = None;
        let min = nelder_mead(
            |x| {
                let Some((a, b)) = pair_from_parameters(x, d) else { return f64::INFINITY };
                let p = StatePair { label: String::new(), first: a, second: b };
                match eval_pair(&p, 1) {
                    Ok(v) => -v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                }
            },
            &start,
            0.1,
            search.refine_iterations,
            1e-12,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        evaluations += min.evaluations;
        if -min.value > best_value + TIE_TOLERANCE {
            if let Some((a, b)) = pair_from_parameters(&min.x, d) {
                best = StatePair { label: format!("polished from {}", best.label), first: a, second: b };
            }
        }
    }
    let (ra, rb) = best.densities(&dims)?;
    let traj = trace_distance_trajectory(channel, &ra, &rb)?;
    let argmax = ArgmaxState { label: best.label.clone(), parameters: best.parameters() };
    let mut r = MeasureResult::from_trajectory(&traj, argmax, Candidate::Pair(ra, rb), 0);
    r.evaluations = evaluations + 1;
    Ok(r)
}

/// Re-evaluates the input of `result` on another channel, typically the same
/// map on a longer or denser grid.
pub fn reevaluate(channel: &dyn ChannelEvolution, result: &MeasureResult) -> Result<MeasureResult> {
    let candidate = result.candidate.as_ref().ok_or_else(|| Error::Search("result carries no input to re-evaluate".into()))?;
    let traj = match candidate {
        Candidate::State(rho) => lfs_trajectory(channel, rho)?,
        Candidate::Joint { psi, .. } => lfs_joint_trajectory(channel, psi)?,
        Candidate::Pair(a, b) => trace_distance_trajectory(channel, a, b)?,
    };
    let mut r = MeasureResult::from_trajectory(&traj, result.argmax_state.clone(), candidate.clone(), 1);
    r.evaluations = result.evaluations + 1;
    Ok(r)
}

/// Largest eigenvalue deviation below zero of an evolved state, for
/// positivity checks along trajectories.
pub fn negativity(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).into_iter().fold(0.0, |acc, l| acc.max(-l))
}
