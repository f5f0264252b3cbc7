//! Small dense nonsymmetric eigensolver.
//!
//! Householder reduction to Hessenberg form, Francis double-shift QR to real
//! Schur form and eigenvectors by back-substitution on the quasi-triangular
//! factor. This follows the EISPACK `orthes`/`hqr2` procedures.

use super::{cond_inf, lu_factor, lu_solve, DenseMatrix};
use crate::error::{Error, Result};
use crate::precision::Format;
use num_complex::Complex64;

/// Eigenvalues and unit-norm eigenvectors, sorted by ascending `|value|`.
/// Complex conjugate pairs are adjacent, the one with positive imaginary
/// part first.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<Complex64>,
    pub vectors: Vec<Vec<Complex64>>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Real basis for the leading `k` pairs. A real eigenvector contributes
    /// one column; a complex pair contributes its real and imaginary parts.
    /// When `k` would split a conjugate pair, the pair is kept whole if that
    /// stays within `max_cols`, otherwise it is dropped.
    pub fn real_basis(&self, k: usize, max_cols: usize) -> DenseMatrix {
        let n = self.vectors.first().map_or(0, |v| v.len());
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut i = 0;
        while i < self.len() && cols.len() < k {
            let v = &self.vectors[i];
            if self.values[i].im == 0.0 || i + 1 >= self.len() {
                cols.push(v.iter().map(|z| z.re).collect());
                i += 1;
            } else {
                if cols.len() + 2 > k && cols.len() + 2 > max_cols {
                    break;
                }
                cols.push(v.iter().map(|z| z.re).collect());
                cols.push(v.iter().map(|z| z.im).collect());
                i += 2;
            }
        }
        DenseMatrix::from_columns(n, &cols)
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

struct RealSchur {
    n: usize,
    h: DenseMatrix,
    v: DenseMatrix,
    d: Vec<f64>,
    e: Vec<f64>,
}

impl RealSchur {
    fn orthes(&mut self) {
        let n = self.n;
        let (h, v) = (&mut self.h, &mut self.v);
        let high = n - 1;
        let mut ort = vec![0.0; n];
        for m in 1..high {
            let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
            if scale == 0.0 {
                continue;
            }
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;
            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f /= hh;
                for i in m..=high {
                    h[(i, j)] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f /= hh;
                for j in m..=high {
                    h[(i, j)] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[(m, m - 1)] = scale * g;
        }
        *v = DenseMatrix::identity(n);
        for m in (1..high).rev() {
            if h[(m, m - 1)] == 0.0 {
                continue;
            }
            for i in m + 1..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
    }

    #[allow(clippy::many_single_char_names, unused_assignments)]
    fn hqr2(&mut self) -> Result<()> {
        let nn = self.n;
        let (h, v, d, e) = (&mut self.h, &mut self.v, &mut self.d, &mut self.e);
        let high = nn - 1;
        let eps = f64::EPSILON;
        let mut exshift = 0.0;
        let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        let (mut t, mut w, mut x, mut y);

        let mut norm = 0.0;
        for i in 0..nn {
            for j in i.saturating_sub(1)..nn {
                norm += h[(i, j)].abs();
            }
        }

        let max_sweeps = 30 * nn.max(1);
        let mut sweeps = 0usize;
        let mut iter = 0;
        let mut n = nn as isize - 1;
        while n >= 0 {
            let nu = n as usize;
            let mut l = nu;
            while l > 0 {
                s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
                if s == 0.0 {
                    s = norm;
                }
                if h[(l, l - 1)].abs() < eps * s {
                    break;
                }
                l -= 1;
            }

            if l == nu {
                h[(nu, nu)] += exshift;
                d[nu] = h[(nu, nu)];
                e[nu] = 0.0;
                n -= 1;
                iter = 0;
            } else if l + 1 == nu {
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
                p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
                q = p * p + w;
                z = q.abs().sqrt();
                h[(nu, nu)] += exshift;
                h[(nu - 1, nu - 1)] += exshift;
                x = h[(nu, nu)];
                if q >= 0.0 {
                    z = if p >= 0.0 { p + z } else { p - z };
                    d[nu - 1] = x + z;
                    d[nu] = d[nu - 1];
                    if z != 0.0 {
                        d[nu] = x - w / z;
                    }
                    e[nu - 1] = 0.0;
                    e[nu] = 0.0;
                    x = h[(nu, nu - 1)];
                    s = x.abs() + z.abs();
                    p = x / s;
                    q = z / s;
                    r = (p * p + q * q).sqrt();
                    p /= r;
                    q /= r;
                    for j in nu - 1..nn {
                        z = h[(nu - 1, j)];
                        h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                        h[(nu, j)] = q * h[(nu, j)] - p * z;
                    }
                    for i in 0..=nu {
                        z = h[(i, nu - 1)];
                        h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                        h[(i, nu)] = q * h[(i, nu)] - p * z;
                    }
                    for i in 0..=high {
                        z = v[(i, nu - 1)];
                        v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                        v[(i, nu)] = q * v[(i, nu)] - p * z;
                    }
                } else {
                    d[nu - 1] = x + p;
                    d[nu] = x + p;
                    e[nu - 1] = z;
                    e[nu] = -z;
                }
                n -= 2;
                iter = 0;
            } else {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::NoConvergence { sweeps: max_sweeps });
                }
                x = h[(nu, nu)];
                y = 0.0;
                w = 0.0;
                if l < nu {
                    y = h[(nu - 1, nu - 1)];
                    w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
                }
                if iter == 10 {
                    exshift += x;
                    for i in 0..=nu {
                        h[(i, i)] -= x;
                    }
                    s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }
                if iter == 30 {
                    s = (y - x) / 2.0;
                    s = s * s + w;
                    if s > 0.0 {
                        s = s.sqrt();
                        if y < x {
                            s = -s;
                        }
                        s = x - w / ((y - x) / 2.0 + s);
                        for i in 0..=nu {
                            h[(i, i)] -= s;
                        }
                        exshift += s;
                        x = 0.964;
                        y = x;
                        w = x;
                    }
                }
                iter += 1;

                let mut m = nu - 2;
                loop {
                    z = h[(m, m)];
                    r = x - z;
                    s = y - z;
                    p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                    q = h[(m + 1, m + 1)] - z - r - s;
                    r = h[(m + 2, m + 1)];
                    s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                        < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                    {
                        break;
                    }
                    m -= 1;
                }

                for i in m + 2..=nu {
                    h[(i, i - 2)] = 0.0;
                    if i > m + 2 {
                        h[(i, i - 3)] = 0.0;
                    }
                }

                for k in m..nu {
                    let notlast = k != nu - 1;
                    if k != m {
                        p = h[(k, k - 1)];
                        q = h[(k + 1, k - 1)];
                        r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                        x = p.abs() + q.abs() + r.abs();
                        if x == 0.0 {
                            continue;
                        }
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                    s = (p * p + q * q + r * r).sqrt();
                    if p < 0.0 {
                        s = -s;
                    }
                    if s != 0.0 {
                        if k != m {
                            h[(k, k - 1)] = -s * x;
                        } else if l != m {
                            h[(k, k - 1)] = -h[(k, k - 1)];
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for j in k..nn {
                            p = h[(k, j)] + q * h[(k + 1, j)];
                            if notlast {
                                p += r * h[(k + 2, j)];
                                h[(k + 2, j)] -= p * z;
                            }
                            h[(k, j)] -= p * x;
                            h[(k + 1, j)] -= p * y;
                        }
                        for i in 0..=nu.min(k + 3) {
                            p = x * h[(i, k)] + y * h[(i, k + 1)];
                            if notlast {
                                p += z * h[(i, k + 2)];
                                h[(i, k + 2)] -= p * r;
                            }
                            h[(i, k)] -= p;
                            h[(i, k + 1)] -= p * q;
                        }
                        for i in 0..=high {
                            p = x * v[(i, k)] + y * v[(i, k + 1)];
                            if notlast {
                                p += z * v[(i, k + 2)];
                                v[(i, k + 2)] -= p * r;
                            }
                            v[(i, k)] -= p;
                            v[(i, k + 1)] -= p * q;
                        }
                    }
                }
            }
        }

        if norm == 0.0 {
            return Ok(());
        }

        for nu in (0..nn).rev() {
            p = d[nu];
            q = e[nu];
            if q == 0.0 {
                let mut l = nu;
                h[(nu, nu)] = 1.0;
                for i in (0..nu).rev() {
                    w = h[(i, i)] - p;
                    r = 0.0;
                    for j in l..=nu {
                        r += h[(i, j)] * h[(j, nu)];
                    }
                    if e[i] < 0.0 {
                        z = w;
                        s = r;
                    } else {
                        l = i;
                        if e[i] == 0.0 {
                            h[(i, nu)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                        } else {
                            x = h[(i, i + 1)];
                            y = h[(i + 1, i)];
                            q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                            t = (x * s - z * r) / q;
                            h[(i, nu)] = t;
                            h[(i + 1, nu)] = if x.abs() > z.abs() { (-r - w * t) / x } else { (-s - y * t) / z };
                        }
                        t = h[(i, nu)].abs();
                        if (eps * t) * t > 1.0 {
                            for j in i..=nu {
                                h[(j, nu)] /= t;
                            }
                        }
                    }
                }
            } else if q < 0.0 {
                let mut l = nu - 1;
                if h[(nu, nu - 1)].abs() > h[(nu - 1, nu)].abs() {
                    h[(nu - 1, nu - 1)] = q / h[(nu, nu - 1)];
                    h[(nu - 1, nu)] = -(h[(nu, nu)] - p) / h[(nu, nu - 1)];
                } else {
                    let (cr, ci) = cdiv(0.0, -h[(nu - 1, nu)], h[(nu - 1, nu - 1)] - p, q);
                    h[(nu - 1, nu - 1)] = cr;
                    h[(nu - 1, nu)] = ci;
                }
                h[(nu, nu - 1)] = 0.0;
                h[(nu, nu)] = 1.0;
                for i in (0..nu.saturating_sub(1)).rev() {
                    let mut ra = 0.0;
                    let mut sa = 0.0;
                    for j in l..=nu {
                        ra += h[(i, j)] * h[(j, nu - 1)];
                        sa += h[(i, j)] * h[(j, nu)];
                    }
                    w = h[(i, i)] - p;
                    if e[i] < 0.0 {
                        z = w;
                        r = ra;
                        s = sa;
                    } else {
                        l = i;
                        if e[i] == 0.0 {
                            let (cr, ci) = cdiv(-ra, -sa, w, q);
                            h[(i, nu - 1)] = cr;
                            h[(i, nu)] = ci;
                        } else {
                            x = h[(i, i + 1)];
                            y = h[(i + 1, i)];
                            let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                            let vi = (d[i] - p) * 2.0 * q;
                            if vr == 0.0 && vi == 0.0 {
                                vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                            }
                            let (cr, ci) =
                                cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                            h[(i, nu - 1)] = cr;
                            h[(i, nu)] = ci;
                            if x.abs() > z.abs() + q.abs() {
                                h[(i + 1, nu - 1)] = (-ra - w * h[(i, nu - 1)] + q * h[(i, nu)]) / x;
                                h[(i + 1, nu)] = (-sa - w * h[(i, nu)] - q * h[(i, nu - 1)]) / x;
                            } else {
                                let (cr, ci) = cdiv(-r - y * h[(i, nu - 1)], -s - y * h[(i, nu)], z, q);
                                h[(i + 1, nu - 1)] = cr;
                                h[(i + 1, nu)] = ci;
                            }
                        }
                        t = h[(i, nu - 1)].abs().max(h[(i, nu)].abs());
                        if (eps * t) * t > 1.0 {
                            for j in i..=nu {
                                h[(j, nu - 1)] /= t;
                                h[(j, nu)] /= t;
                            }
                        }
                    }
                }
            }
        }

        for j in (0..nn).rev() {
            for i in 0..=high {
                let mut acc = 0.0;
                for k in 0..=j.min(high) {
                    acc += v[(i, k)] * h[(k, j)];
                }
                v[(i, j)] = acc;
            }
        }
        Ok(())
    }
}

fn normalise(v: &mut [Complex64]) {
    let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm > 0.0 {
        for z in v.iter_mut() {
            *z /= nrm;
        }
    }
}

/// All eigenpairs of a small dense matrix, sorted by ascending magnitude.
pub fn eig_small(m: &DenseMatrix) -> Result<EigenPairs> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), cols: m.cols() });
    }
    let n = m.rows();
    if n == 0 {
        return Ok(EigenPairs { values: vec![], vectors: vec![] });
    }
    if !m.is_finite() {
        return Err(Error::NoConvergence { sweeps: 0 });
    }
    let mut s = RealSchur {
        n,
        h: m.clone(),
        v: DenseMatrix::identity(n),
        d: vec![0.0; n],
        e: vec![0.0; n],
    };
    s.orthes();
    s.hqr2()?;

    let mut pairs: Vec<(Complex64, Vec<Complex64>)> = Vec::with_capacity(n);
    let mut j = 0;
    while j < n {
        if s.e[j] == 0.0 || j + 1 == n {
            let mut vec: Vec<Complex64> = s.v.col(j).iter().map(|&x| Complex64::new(x, 0.0)).collect();
            normalise(&mut vec);
            pairs.push((Complex64::new(s.d[j], 0.0), vec));
            j += 1;
        } else {
            // columns j, j+1 hold re/im parts for d[j] + i e[j]
            let (re, im) = (s.v.col(j), s.v.col(j + 1));
            let mut vec: Vec<Complex64> = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
            normalise(&mut vec);
            let conj: Vec<Complex64> = vec.iter().map(|z| z.conj()).collect();
            let lam = Complex64::new(s.d[j], s.e[j].abs());
            let (first, second) = if s.e[j] > 0.0 { (vec, conj) } else { (conj, vec) };
            pairs.push((lam, first));
            pairs.push((lam.conj(), second));
            j += 2;
        }
    }
    pairs.sort_by(|a, b| {
        let ka = (a.0.norm(), a.0.re, -a.0.im);
        let kb = (b.0.norm(), b.0.re, -b.0.im);
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(EigenPairs { values, vectors })
}

/// Solves `A z = theta B z` by reduction to `B^{-1} A`.
///
/// Returns [`Error::SingularB`] when `B` cannot be factored or its
/// condition number exceeds `1/u` for binary64.
pub fn eig_generalized(a: &DenseMatrix, b: &DenseMatrix) -> Result<EigenPairs> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(Error::DimensionMismatch { what: "eig_generalized", expected: a.rows(), found: b.rows() });
    }
    let n = a.rows();
    let ctx = Format::Double.context();
    let f = lu_factor(b, ctx).map_err(|_| Error::SingularB)?;
    match cond_inf(b) {
        Ok(c) if c.is_finite() && c <= 1.0 / Format::Double.unit_roundoff() => {}
        _ => return Err(Error::SingularB),
    }
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        cols.push(lu_solve(&f, a.col(j), ctx, Format::Double).map_err(|_| Error::SingularB)?);
    }
    eig_small(&DenseMatrix::from_columns(n, &cols))
}
