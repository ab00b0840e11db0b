use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{project_box_in_place, BoxBounds, Lbfgs, ParametricProblem, SolverConfig, SolverError};

/// Step size is kept at `GAMMA_L_COEFF / L`.
const GAMMA_L_COEFF: f64 = 0.95;
/// Fraction of the guaranteed envelope decrease demanded by the line search.
const SIGMA_COEFF: f64 = 0.5;
const LIPSCHITZ_PROBE: f64 = 1e-6;
const MIN_LIPSCHITZ: f64 = 1e-6;
const MAX_LINE_SEARCH: usize = 10;
const PROBE_SEED: u64 = 0x5eed_1234;

/// Result of one inner solve at a fixed penalty weight.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerReport {
    pub iterations: usize,
    /// `|z - T(z)|_inf / gamma` at the last iterate.
    pub fpr_norm: f64,
    pub converged: bool,
    pub gamma: f64,
    pub cost: f64,
}

/// Envelope value and step size at an accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub envelope: f64,
    pub gamma: f64,
}

/// PANOC inner solver. Owns its quasi-Newton buffers; not shareable across threads
/// while solving.
#[derive(Debug, Clone)]
pub struct Panoc {
    cfg: SolverConfig,
    lbfgs: Lbfgs,
    trace: Option<Vec<TraceEntry>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Forward-backward step: `z_bar = proj(z - gamma grad)`, `r = z - z_bar`.
fn forward_backward(
    z: &[f64],
    grad: &[f64],
    gamma: f64,
    bounds: &BoxBounds,
    z_bar: &mut [f64],
    r: &mut [f64],
) {
    for i in 0..z.len() {
        z_bar[i] = z[i] - gamma * grad[i];
    }
    project_box_in_place(z_bar, bounds);
    for i in 0..z.len() {
        r[i] = z[i] - z_bar[i];
    }
}

fn envelope(cost: f64, grad: &[f64], r: &[f64], gamma: f64) -> f64 {
    cost - dot(grad, r) + dot(r, r) / (2.0 * gamma)
}

impl Panoc {
    pub fn new(cfg: SolverConfig) -> Self {
        let lbfgs = Lbfgs::new(cfg.lbfgs_memory);
        Self {
            cfg,
            lbfgs,
            trace: None,
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Records the envelope value of every accepted iterate.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn trace(&self) -> &[TraceEntry] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn estimate_lipschitz<P: ParametricProblem>(
        problem: &P,
        z: &[f64],
        grad: &[f64],
        c: f64,
    ) -> Result<f64, SolverError> {
        let n = z.len();
        let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
        let mut dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dot(&dir, &dir).sqrt().max(f64::MIN_POSITIVE);
        dir.iter_mut().for_each(|d| *d /= norm);
        let h = LIPSCHITZ_PROBE * inf_norm(z).max(1.0);
        let probe: Vec<f64> = z.iter().zip(&dir).map(|(zi, di)| zi + h * di).collect();
        let mut g2 = vec![0.0; n];
        problem.cost_gradient(&probe, c, &mut g2);
        if !all_finite(&g2) {
            return Err(SolverError::NonFinite {
                what: "gradient at Lipschitz probe",
                iteration: 0,
            });
        }
        let diff: f64 = g2.iter().zip(grad).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Ok((diff / h).max(MIN_LIPSCHITZ))
    }

    /// Minimises `f + c |F|^2` over the box starting from `z`. On return `z`
    /// holds the last projected iterate, which always lies in the box.
    pub fn solve<P: ParametricProblem>(
        &mut self,
        problem: &P,
        c: f64,
        z: &mut [f64],
    ) -> Result<InnerReport, SolverError> {
        let n = problem.dim();
        if z.len() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                got: z.len(),
            });
        }
        let bounds = problem.bounds();
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }
        self.lbfgs.reset();

        let mut grad = vec![0.0; n];
        let mut cost = problem.cost_gradient(z, c, &mut grad);
        if !cost.is_finite() || !all_finite(&grad) {
            return Err(SolverError::NonFinite {
                what: "cost or gradient at initial guess",
                iteration: 0,
            });
        }
        let mut lipschitz = Self::estimate_lipschitz(problem, z, &grad, c)?;
        let mut gamma = GAMMA_L_COEFF / lipschitz;

        let mut z_bar = vec![0.0; n];
        let mut r = vec![0.0; n];
        forward_backward(z, &grad, gamma, bounds, &mut z_bar, &mut r);

        let mut z_plus = vec![0.0; n];
        let mut grad_plus = vec![0.0; n];
        let mut z_bar_plus = vec![0.0; n];
        let mut r_plus = vec![0.0; n];
        let mut direction = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];

        let mut iterations = 0;
        let mut fpr;
        let converged;
        loop {
            // Shrink the step until the descent lemma holds at z_bar.
            loop {
                let cost_bar = problem.cost(&z_bar, c);
                if !cost_bar.is_finite() {
                    return Err(SolverError::NonFinite {
                        what: "cost at forward-backward point",
                        iteration: iterations,
                    });
                }
                let rr = dot(&r, &r);
                let bound = cost - dot(&grad, &r) + 0.5 * lipschitz * rr;
                if cost_bar <= bound + 1e-12 * (1.0 + cost.abs()) || rr == 0.0 {
                    break;
                }
                lipschitz *= 2.0;
                gamma /= 2.0;
                self.lbfgs.reset();
                forward_backward(z, &grad, gamma, bounds, &mut z_bar, &mut r);
            }

            fpr = inf_norm(&r) / gamma;
            let phi = envelope(cost, &grad, &r, gamma);
            if let Some(t) = self.trace.as_mut() {
                t.push(TraceEntry {
                    envelope: phi,
                    gamma,
                });
            }
            if fpr <= self.cfg.inner_tolerance {
                converged = true;
                break;
            }
            if iterations >= self.cfg.max_inner_iterations {
                converged = false;
                break;
            }

            // Quasi-Newton direction on the fixed-point residual.
            direction.copy_from_slice(&r);
            self.lbfgs.apply(&mut direction);
            direction.iter_mut().for_each(|d| *d = -*d);

            let rr = dot(&r, &r);
            let sigma = SIGMA_COEFF * (1.0 - GAMMA_L_COEFF) / (2.0 * gamma);
            let mut tau = 1.0;
            let mut attempt = 0;
            loop {
                let fallback = attempt >= MAX_LINE_SEARCH;
                if fallback {
                    z_plus.copy_from_slice(&z_bar);
                } else {
                    for i in 0..n {
                        z_plus[i] = z[i] - (1.0 - tau) * r[i] + tau * direction[i];
                    }
                }
                let cost_plus = problem.cost_gradient(&z_plus, c, &mut grad_plus);
                let finite = cost_plus.is_finite() && all_finite(&grad_plus);
                if !finite && fallback {
                    return Err(SolverError::NonFinite {
                        what: "cost or gradient at projected-gradient step",
                        iteration: iterations,
                    });
                }
                if finite {
                    forward_backward(&z_plus, &grad_plus, gamma, bounds, &mut z_bar_plus, &mut r_plus);
                    let phi_plus = envelope(cost_plus, &grad_plus, &r_plus, gamma);
                    if fallback || phi_plus <= phi - sigma * rr {
                        cost = cost_plus;
                        break;
                    }
                }
                tau *= 0.5;
                attempt += 1;
            }

            for i in 0..n {
                s[i] = z_plus[i] - z[i];
                y[i] = r_plus[i] - r[i];
            }
            self.lbfgs.update(&s, &y);

            z.copy_from_slice(&z_plus);
            std::mem::swap(&mut grad, &mut grad_plus);
            std::mem::swap(&mut z_bar, &mut z_bar_plus);
            std::mem::swap(&mut r, &mut r_plus);
            iterations += 1;
        }

        z.copy_from_slice(&z_bar);
        Ok(InnerReport {
            iterations,
            fpr_norm: fpr,
            converged,
            gamma,
            cost: problem.cost(z, c),
        })
    }
}
