//! Inverse temperature at which the factorized (all-uniform) fixed point
//! loses stability, for weighted multilayer networks.
//!
//! With `eta(x) = (e^x - 1) / (e^x + q - 1)`, the threshold `beta*` solves
//! `c_hat * <eta(beta w)^2>_w = 1`, the average running over every nonzero
//! supra-edge weight (interlayer ones scaled by `omega`).

use crate::error::{Error, Result};
use crate::graph::{excess_degree, MultilayerNetwork};

const MAX_ITERS: usize = 200;

/// Inputs of the stability criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySpec {
    pub q: usize,
    pub omega: f64,
    pub weights: Vec<f64>,
    pub c_hat: f64,
}

impl StabilitySpec {
    /// Weight population of `net`: every intralayer edge once, plus every
    /// interlayer edge once with weight `omega * C_ij` when `omega > 0`.
    pub fn from_network(net: &MultilayerNetwork, q: usize, omega: f64) -> Result<Self> {
        let mut weights: Vec<f64> = net.intra().upper_triangle().map(|(_, _, w)| w).collect();
        if omega > 0.0 {
            weights.extend(net.inter().upper_triangle().map(|(_, _, c)| omega * c));
        }
        Ok(Self {
            q,
            omega,
            weights,
            c_hat: excess_degree(net)?,
        })
    }

    /// Unweighted population of a single weight `1`.
    pub fn unweighted(q: usize, c_hat: f64) -> Self {
        Self {
            q,
            omega: 0.0,
            weights: vec![1.0],
            c_hat,
        }
    }

    /// `c_hat * <eta(beta w)^2> - 1` and its derivative in `beta`.
    pub fn residual(&self, beta: f64) -> (f64, f64) {
        let q = self.q as f64;
        let n = self.weights.len() as f64;
        let (mut s, mut ds) = (0.0, 0.0);
        for &w in &self.weights {
            let e = (-beta * w).exp();
            let den = 1.0 + (q - 1.0) * e;
            let eta = (1.0 - e) / den;
            let deta = q * e / (den * den);
            s += eta * eta;
            ds += 2.0 * eta * deta * w;
        }
        (self.c_hat * s / n - 1.0, self.c_hat * ds / n)
    }

    fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidParameter(format!(
                "community count must be at least 2, got {}",
                self.q
            )));
        }
        if self.weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(&w) = self.weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeight(w));
        }
        if self.c_hat.is_nan() || self.c_hat <= 1.0 {
            return Err(Error::NoThreshold(self.c_hat));
        }
        Ok(())
    }
}

/// `beta* w` for a single weight `w`: `e^{beta* w} = 1 + q / (sqrt(c_hat) - 1)`.
pub fn closed_form(q: usize, c_hat: f64) -> f64 {
    (q as f64 / (c_hat.sqrt() - 1.0)).ln_1p()
}

/// Newton's method from the mean-weight closed form, falling back to
/// bisection whenever a step leaves the current bracket.
pub fn solve_beta_star(spec: &StabilitySpec, tol: f64) -> Result<f64> {
    spec.validate()?;
    let x0 = closed_form(spec.q, spec.c_hat);
    let (w_min, w_max, w_sum) = spec
        .weights
        .iter()
        .fold((f64::INFINITY, 0.0f64, 0.0), |(lo, hi, s), &w| (lo.min(w), hi.max(w), s + w));
    let w_mean = w_sum / spec.weights.len() as f64;
    // eta is increasing, so the single-weight roots at the extreme weights
    // bracket the averaged root.
    let (mut lo, mut hi) = (x0 / w_max, x0 / w_min);
    let mut beta = (x0 / w_mean).clamp(lo, hi);
    let mut last = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let (r, dr) = spec.residual(beta);
        last = r;
        if r.abs() < tol {
            return Ok(beta);
        }
        if r < 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let step = beta - r / dr;
        beta = if dr > 0.0 && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            let (r, _) = spec.residual(beta);
            if r.abs() < tol {
                return Ok(beta);
            }
            last = r;
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "beta* solver",
        iterations: MAX_ITERS,
        residual: last,
    })
}

/// `[beta*(2), ..., beta*(q_max)]` for the weight population of `net`.
pub fn beta_grid(net: &MultilayerNetwork, omega: f64, q_max: usize) -> Result<Vec<f64>> {
    if q_max < 2 {
        return Err(Error::InvalidParameter(format!(
            "q_max must be at least 2, got {q_max}"
        )));
    }
    let mut spec = StabilitySpec::from_network(net, 2, omega)?;
    (2..=q_max)
        .map(|q| {
            spec.q = q;
            solve_beta_star(&spec, 1e-12)
        })
        .collect()
}
