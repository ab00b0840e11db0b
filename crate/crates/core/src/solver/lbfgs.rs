use std::collections::VecDeque;

/// Limited-memory inverse-Hessian approximation applied by the two-loop recursion.
#[derive(Debug, Clone)]
pub struct Lbfgs {
    memory: usize,
    pairs: VecDeque<Pair>,
    alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Lbfgs {
    pub fn new(memory: usize) -> Self {
        Self {
            memory,
            pairs: VecDeque::with_capacity(memory),
            alpha: vec![0.0; memory],
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn reset(&mut self) {
        self.pairs.clear();
    }

    /// Stores `(s, y)` if it passes the curvature check. Returns whether it was kept.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        if self.memory == 0 {
            return false;
        }
        let sy = dot(s, y);
        let ss = dot(s, s);
        if !(sy > 1e-12 * ss) || !sy.is_finite() || ss == 0.0 {
            return false;
        }
        let pair = if self.pairs.len() == self.memory {
            let mut old = self.pairs.pop_front().expect("full buffer");
            old.s.copy_from_slice(s);
            old.y.copy_from_slice(y);
            old.rho = 1.0 / sy;
            old
        } else {
            Pair {
                s: s.to_vec(),
                y: y.to_vec(),
                rho: 1.0 / sy,
            }
        };
        self.pairs.push_back(pair);
        true
    }

    /// Overwrites `q` with `H q`. With no stored pairs `H` is the identity.
    pub fn apply(&mut self, q: &mut [f64]) {
        let k = self.pairs.len();
        if k == 0 {
            return;
        }
        for (i, pair) in self.pairs.iter().enumerate().rev() {
            let a = pair.rho * dot(&pair.s, q);
            self.alpha[i] = a;
            for (qi, yi) in q.iter_mut().zip(&pair.y) {
                *qi -= a * yi;
            }
        }
        let newest = &self.pairs[k - 1];
        let scale = 1.0 / (newest.rho * dot(&newest.y, &newest.y));
        for qi in q.iter_mut() {
            *qi *= scale;
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            let b = pair.rho * dot(&pair.y, q);
            let coef = self.alpha[i] - b;
            for (qi, si) in q.iter_mut().zip(&pair.s) {
                *qi += coef * si;
            }
        }
    }
}
