//! Exact floating-point expansions (Shewchuk) for reference residuals.

use super::dd::{two_prod, two_sum, DoubleDouble};

/// A nonoverlapping sequence of doubles whose exact sum is the value,
/// ordered by increasing magnitude.
#[derive(Debug, Clone, Default)]
pub struct Expansion {
    terms: Vec<f64>,
}

impl Expansion {
    pub fn new() -> Self {
        Self { terms: Vec::with_capacity(16) }
    }

    /// Adds `b` exactly.
    pub fn add(&mut self, b: f64) {
        if b == 0.0 {
            return;
        }
        let mut q = b;
        let mut out = 0;
        for i in 0..self.terms.len() {
            let (s, h) = two_sum(q, self.terms[i]);
            q = s;
            if h != 0.0 {
                self.terms[out] = h;
                out += 1;
            }
        }
        self.terms.truncate(out);
        if q != 0.0 {
            self.terms.push(q);
        }
    }

    /// Adds the exact product `a * b`.
    pub fn add_prod(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add(e);
        self.add(p);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Double-double approximation of the exact sum, accurate to ~2^-106.
    pub fn to_dd(&self) -> DoubleDouble {
        let mut acc = DoubleDouble::ZERO;
        for &t in &self.terms {
            acc = acc.add_f64(t);
        }
        acc
    }
}

/// Exact-then-rounded `b - sum_j a_j * (x_hi_j + x_lo_j)`.
pub fn exact_dot_residual(b: f64, a: &[f64], x: &[DoubleDouble]) -> DoubleDouble {
    let mut e = Expansion::new();
    e.add(b);
    for (aj, xj) in a.iter().zip(x) {
        e.add_prod(-aj, xj.hi);
        e.add_prod(-aj, xj.lo);
    }
    e.to_dd()
}
