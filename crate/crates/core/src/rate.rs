//! Tabulated scalar rate functions with a cached cumulative integral.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{quad_adaptive, QuadConfig};

pub type RateClosure = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Rate `gamma(t)` sampled at `t_j = j * step` together with
/// `Lambda(t_j) = int_0^{t_j} gamma`.
#[derive(Clone)]
pub struct RateFunction {
    step: f64,
    values: Vec<f64>,
    cumulative: Vec<f64>,
    exact: Option<RateClosure>,
    quad: QuadConfig,
}

impl std::fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateFunction")
            .field("step", &self.step)
            .field("nodes", &self.values.len())
            .field("has_closure", &self.exact.is_some())
            .finish()
    }
}

impl RateFunction {
    /// Samples `rate` on `nodes` points and accumulates prefix sums of
    /// adaptive quadratures over each subinterval.
    pub fn tabulate(rate: RateClosure, step: f64, nodes: usize, quad: QuadConfig) -> Result<Self> {
        check_table(step, nodes)?;
        let values: Vec<f64> = (0..nodes).map(|j| rate(j as f64 * step)).collect();
        let mut cumulative = Vec::with_capacity(nodes);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for j in 1..nodes {
            let (a, b) = ((j - 1) as f64 * step, j as f64 * step);
            acc += quad_adaptive(|t| rate(t), a, b, &quad)?;
            cumulative.push(acc);
        }
        Ok(RateFunction { step, values, cumulative, exact: Some(rate), quad })
    }

    /// Wraps precomputed rate and cumulative tables.
    pub fn from_tables(step: f64, values: Vec<f64>, cumulative: Vec<f64>) -> Result<Self> {
        check_table(step, values.len())?;
        if cumulative.len() != values.len() {
            return Err(Error::Dimension(format!("{} rate samples but {} cumulative samples", values.len(), cumulative.len())));
        }
        Ok(RateFunction { step, values, cumulative, exact: None, quad: QuadConfig::default() })
    }

    /// A rate that vanishes identically.
    pub fn zero(step: f64, nodes: usize) -> Result<Self> {
        Self::from_tables(step, vec![0.0; nodes], vec![0.0; nodes])
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> usize {
        self.values.len()
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cumulative_values(&self) -> &[f64] {
        &self.cumulative
    }

    /// Rate and cumulative integral multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RateFunction {
        let exact = self.exact.clone().map(|f| Arc::new(move |t| factor * f(t)) as RateClosure);
        RateFunction {
            step: self.step,
            values: self.values.iter().map(|v| factor * v).collect(),
            cumulative: self.cumulative.iter().map(|v| factor * v).collect(),
            exact,
            quad: self.quad,
        }
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let h = self.horizon();
        if !(t >= 0.0) || t > h * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Dimension(format!("time {t} outside tabulated range [0, {h}]")));
        }
        let x = t / self.step;
        let j = x.round();
        if (x - j).abs() < 1e-9 {
            return Ok(((j as usize).min(self.values.len() - 1), 0.0));
        }
        let j = (x.floor() as usize).min(self.values.len() - 2);
        Ok((j, x - j as f64))
    }

    /// Rate at `t`: table value on nodes, closure or four-point Lagrange
    /// interpolation between nodes.
    pub fn rate(&self, t: f64) -> Result<f64> {
        let (j, frac) = self.locate(t)?;
        if frac == 0.0 {
            return Ok(self.values[j]);
        }
        if let Some(f) = &self.exact {
            return Ok(f(t));
        }
        Ok(lagrange4(&self.values, j, frac))
    }

    /// `int_0^t gamma`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        let (j, frac) = self.locate(t)?;
        if frac == 0.0 {
            return Ok(self.cumulative[j]);
        }
        let a = j as f64 * self.step;
        let partial = match &self.exact {
            Some(f) => quad_adaptive(|s| f(s), a, t, &self.quad)?,
            None => integrate_lagrange4(&self.values, j, frac) * self.step,
        };
        Ok(self.cumulative[j] + partial)
    }
}

fn check_table(step: f64, nodes: usize) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::config("rate.step", format!("{step} is not a positive step")));
    }
    if nodes < 4 {
        return Err(Error::config("rate.nodes", format!("need at least 4 nodes, got {nodes}")));
    }
    Ok(())
}

/// Stencil start for four points around the interval `[j, j+1]`.
fn stencil(len: usize, j: usize) -> usize {
    j.saturating_sub(1).min(len - 4)
}

fn lagrange_weights(x: f64) -> [f64; 4] {
    // nodes at 0, 1, 2, 3
    [
        -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0,
        x * (x - 2.0) * (x - 3.0) / 2.0,
        -x * (x - 1.0) * (x - 3.0) / 2.0,
        x * (x - 1.0) * (x - 2.0) / 6.0,
    ]
}

fn lagrange4(v: &[f64], j: usize, frac: f64) -> f64 {
    let s = stencil(v.len(), j);
    let x = (j - s) as f64 + frac;
    let w = lagrange_weights(x);
    (0..4).map(|k| w[k] * v[s + k]).sum()
}

/// `int_j^{j+frac}` of the cubic through the stencil, in units of the step.
fn integrate_lagrange4(v: &[f64], j: usize, frac: f64) -> f64 {
    let s = stencil(v.len(), j);
    let x0 = (j - s) as f64;
    // three-point Gauss-Legendre is exact for cubics
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let half = 0.5 * frac;
    let mut acc = 0.0;
    for (z, w) in nodes.iter().zip(weights) {
        let lw = lagrange_weights(x0 + half * (1.0 + z));
        acc += w * (0..4).map(|k| lw[k] * v[s + k]).sum::<f64>();
    }
    acc * half
}
