//! Vector kernels in a simulated working precision: every operation rounds.

use crate::precision::Scalar;

pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mut s = T::zero();
    for (a, b) in x.iter().zip(y) {
        s = s + *a * *b;
    }
    s
}

pub fn nrm2<T: Scalar>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

/// `y -= alpha * x`
pub fn axmy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi - alpha * *xi;
    }
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

pub fn scale<T: Scalar>(x: &[T], inv: T) -> Vec<T> {
    x.iter().map(|v| *v / inv).collect()
}

pub fn to_scalar<T: Scalar>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::from_f64(v)).collect()
}

pub fn to_f64<T: Scalar>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64()).collect()
}

/// Plane rotation `(c, s)` annihilating `b` in `(a, b)`.
pub fn givens<T: Scalar>(a: T, b: T) -> (T, T) {
    let one = T::one();
    if b == T::zero() {
        (one, T::zero())
    } else if b.abs() > a.abs() {
        let t = a / b;
        let s = one / (one + t * t).sqrt();
        (t * s, s)
    } else {
        let t = b / a;
        let c = one / (one + t * t).sqrt();
        (c, t * c)
    }
}
