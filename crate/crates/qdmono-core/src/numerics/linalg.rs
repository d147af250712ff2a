//! Dense complex matrices and the handful of factorizations the engine needs.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};
use num_traits::Zero;

use super::{c, C64};

#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    Singular,
    RankDeficient,
    NoConvergence,
    Shape,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::Singular => write!(f, "matrix is numerically singular"),
            LinalgError::RankDeficient => write!(f, "least-squares system is rank deficient"),
            LinalgError::NoConvergence => write!(f, "QR iteration did not converge"),
            LinalgError::Shape => write!(f, "incompatible matrix shapes"),
        }
    }
}

impl core::error::Error for LinalgError {}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { rows, cols, data: vec![C64::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let cc = if r == 0 { 0 } else { rows[0].len() };
        Self::from_fn(r, cc, |i, j| c(rows[i][j], 0.0))
    }

    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        let n = cols.first().map_or(0, |v| v.len());
        Self::from_fn(n, cols.len(), |i, j| cols[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v).fold(C64::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn trace(&self) -> C64 {
        self.diag().into_iter().fold(C64::zero(), |a, b| a + b)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    /// Max-norm distance to another matrix of the same shape.
    pub fn dist(&self, other: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn commutator(&self, other: &CMat) -> CMat {
        &(self * other) - &(other * self)
    }

    pub fn vstack(blocks: &[CMat]) -> CMat {
        let cols = blocks[0].cols;
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for b in blocks {
            assert_eq!(b.cols, cols);
            data.extend_from_slice(&b.data);
        }
        CMat { rows, cols, data }
    }

    /// Columns reordered so that column k of the result is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> CMat {
        Self::from_fn(self.rows, perm.len(), |i, k| self[(i, perm[k])])
    }

    pub fn permute_rows(&self, perm: &[usize]) -> CMat {
        Self::from_fn(perm.len(), self.cols, |k, j| self[(perm[k], j)])
    }

    pub fn pow(&self, k: usize) -> CMat {
        let mut r = CMat::identity(self.rows);
        for _ in 0..k {
            r = &r * self;
        }
        r
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl<'a> Add<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn add(self, o: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn sub(self, o: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        CMat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect() }
    }
}

impl<'a> Neg for &'a CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.map(|x| -x)
    }
}

impl<'a> Mul<&'a CMat> for &'a CMat {
    type Output = CMat;
    fn mul(self, o: &CMat) -> CMat {
        assert_eq!(self.cols, o.rows, "matrix product shape mismatch");
        let mut r = CMat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let orow = &o.data[k * o.cols..(k + 1) * o.cols];
                let rrow = &mut r.data[i * o.cols..(i + 1) * o.cols];
                for (x, &b) in rrow.iter_mut().zip(orow) {
                    *x += a * b;
                }
            }
        }
        r
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<CMat> for CMat {
            type Output = CMat;
            fn $m(self, o: CMat) -> CMat {
                (&self).$m(&o)
            }
        }
        impl<'a> $tr<&'a CMat> for CMat {
            type Output = CMat;
            fn $m(self, o: &CMat) -> CMat {
                (&self).$m(o)
            }
        }
        impl<'a> $tr<CMat> for &'a CMat {
            type Output = CMat;
            fn $m(self, o: CMat) -> CMat {
                self.$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::zero(), |s, (&x, &y)| s + x * y)
}

/// Hermitian inner product, conjugate-linear in the first slot.
pub fn hdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(C64::zero(), |s, (&x, &y)| s + x.conj() * y)
}

pub fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vmax_dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMat,
    piv: Vec<usize>,
    sign: f64,
}

pub fn lu(a: &CMat) -> Result<Lu, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Shape);
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut p = k;
        let mut best = m[(k, k)].norm();
        for i in k + 1..n {
            let v = m[(i, k)].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best <= 1e-300 || best <= scale * 1e-15 * f64::EPSILON {
            return Err(LinalgError::Singular);
        }
        if p != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = t;
            }
            piv.swap(k, p);
            sign = -sign;
        }
        let d = m[(k, k)];
        for i in k + 1..n {
            let f = m[(i, k)] / d;
            m[(i, k)] = f;
            if f.is_zero() {
                continue;
            }
            for j in k + 1..n {
                let t = m[(k, j)];
                m[(i, j)] -= f * t;
            }
        }
    }
    Ok(Lu { lu: m, piv, sign })
}

impl Lu {
    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.rows;
        let mut x: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[(i, j)] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let t = self.lu[(i, j)] * x[j];
                x[i] -= t;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        let cols: Vec<Vec<C64>> = (0..b.cols).map(|j| self.solve_vec(&b.column(j))).collect();
        CMat::from_columns(&cols)
    }

    pub fn det(&self) -> C64 {
        self.lu.diag().into_iter().fold(c(self.sign, 0.0), |a, b| a * b)
    }

    /// Reciprocal condition estimate from the diagonal of U (cheap, order-of-magnitude only).
    pub fn rcond_estimate(&self) -> f64 {
        let d = self.lu.diag();
        let mx = d.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let mn = d.iter().fold(f64::INFINITY, |m, z| m.min(z.norm()));
        if mx == 0.0 {
            0.0
        } else {
            mn / mx
        }
    }
}

pub fn solve(a: &CMat, b: &CMat) -> Result<CMat, LinalgError> {
    Ok(lu(a)?.solve(b))
}

pub fn inverse(a: &CMat) -> Result<CMat, LinalgError> {
    Ok(lu(a)?.solve(&CMat::identity(a.rows)))
}

pub fn det(a: &CMat) -> C64 {
    match lu(a) {
        Ok(f) => f.det(),
        Err(_) => C64::zero(),
    }
}

/// Least-squares solution of `a x = b` by Householder QR (`a` tall, full column rank).
pub fn lstsq(a: &CMat, b: &CMat) -> Result<CMat, LinalgError> {
    let (m, n) = (a.rows, a.cols);
    if m < n || b.rows != m {
        return Err(LinalgError::Shape);
    }
    let mut r = a.clone();
    let mut y = b.clone();
    let scale = a.max_abs();
    for k in 0..n {
        let x: Vec<C64> = (k..m).map(|i| r[(i, k)]).collect();
        let nx = vnorm(&x);
        if nx <= scale * 1e-14 {
            return Err(LinalgError::RankDeficient);
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { c(1.0, 0.0) };
        let alpha = -phase * nx;
        let mut v = x.clone();
        v[0] -= alpha;
        let nv = vnorm(&v);
        if nv == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= nv;
        }
        let reflect = |mat: &mut CMat, from_col: usize| {
            for j in from_col..mat.cols {
                let mut s = C64::zero();
                for (t, vi) in v.iter().enumerate() {
                    s += vi.conj() * mat[(k + t, j)];
                }
                for (t, vi) in v.iter().enumerate() {
                    mat[(k + t, j)] -= *vi * s * 2.0;
                }
            }
        };
        reflect(&mut r, k);
        reflect(&mut y, 0);
    }
    let mut x = CMat::zeros(n, b.cols);
    for j in 0..b.cols {
        for i in (0..n).rev() {
            let mut s = y[(i, j)];
            for l in i + 1..n {
                s -= r[(i, l)] * x[(l, j)];
            }
            x[(i, j)] = s / r[(i, i)];
        }
    }
    Ok(x)
}

/// Complex Schur form `a = z t z^H` via Hessenberg reduction and shifted QR.
pub fn schur(a: &CMat) -> Result<(CMat, CMat), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Shape);
    }
    let n = a.rows;
    let mut h = a.clone();
    let mut z = CMat::identity(n);
    // Householder reduction to Hessenberg form.
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let nx = vnorm(&x);
        if nx == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { c(1.0, 0.0) };
        let mut v = x.clone();
        v[0] += phase * nx;
        let nv = vnorm(&v);
        for t in v.iter_mut() {
            *t /= nv;
        }
        // h <- P h P, z <- z P with P = I - 2 v v^H acting on indices k+1..n
        for j in 0..n {
            let mut s = C64::zero();
            for (t, vi) in v.iter().enumerate() {
                s += vi.conj() * h[(k + 1 + t, j)];
            }
            for (t, vi) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= *vi * s * 2.0;
            }
        }
        for mat in [&mut h, &mut z] {
            for i in 0..n {
                let mut s = C64::zero();
                for (t, vi) in v.iter().enumerate() {
                    s += mat[(i, k + 1 + t)] * *vi;
                }
                for (t, vi) in v.iter().enumerate() {
                    mat[(i, k + 1 + t)] -= s * vi.conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = C64::zero();
        }
    }
    let norm = h.max_abs().max(f64::MIN_POSITIVE);
    let mut hi = n;
    let mut iter = 0usize;
    let mut since_deflation = 0usize;
    while hi > 1 {
        // find active window [lo, hi)
        let mut lo = hi - 1;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let d = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            if sub <= f64::EPSILON * if d > 0.0 { d } else { norm } {
                h[(lo, lo - 1)] = C64::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        iter += 1;
        since_deflation += 1;
        if iter > 100 * n {
            return Err(LinalgError::NoConvergence);
        }
        let mu = if since_deflation % 11 == 10 {
            h[(hi - 1, hi - 1)] + c(h[(hi - 1, hi - 2)].norm() * 0.75, 0.0)
        } else {
            let (p, q, r, s) = (h[(hi - 2, hi - 2)], h[(hi - 2, hi - 1)], h[(hi - 1, hi - 2)], h[(hi - 1, hi - 1)]);
            let tr = p + s;
            let dt = p * s - q * r;
            let disc = (tr * tr * 0.25 - dt).sqrt();
            let l1 = tr * 0.5 + disc;
            let l2 = tr * 0.5 - disc;
            if (l1 - s).norm() < (l2 - s).norm() {
                l1
            } else {
                l2
            }
        };
        for i in lo..hi {
            h[(i, i)] -= mu;
        }
        let mut rots: Vec<(f64, C64)> = Vec::with_capacity(hi - lo);
        for k in lo..hi - 1 {
            let (cs, sn) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in 0..n {
                let a = h[(k, j)];
                let b = h[(k + 1, j)];
                h[(k, j)] = a * cs + sn * b;
                h[(k + 1, j)] = -sn.conj() * a + b * cs;
            }
            h[(k + 1, k)] = C64::zero();
            rots.push((cs, sn));
        }
        for (idx, k) in (lo..hi - 1).enumerate() {
            let (cs, sn) = rots[idx];
            for mat in [&mut h, &mut z] {
                for i in 0..n {
                    let a = mat[(i, k)];
                    let b = mat[(i, k + 1)];
                    mat[(i, k)] = a * cs + b * sn.conj();
                    mat[(i, k + 1)] = -a * sn + b * cs;
                }
            }
        }
        for i in lo..hi {
            h[(i, i)] += mu;
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = C64::zero();
        }
    }
    Ok((h, z))
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let r = (na * na + b.norm_sqr()).sqrt();
    if r == 0.0 {
        return (1.0, C64::zero());
    }
    if na == 0.0 {
        return (0.0, c(1.0, 0.0));
    }
    let phase = a / na;
    (na / r, phase * b.conj() / r)
}

/// Eigenvalues and unit-norm eigenvectors (as columns).
pub fn eig(a: &CMat) -> Result<(Vec<C64>, CMat), LinalgError> {
    let (t, z) = schur(a)?;
    let n = a.rows;
    let vals = t.diag();
    let small = t.max_abs().max(f64::MIN_POSITIVE) * f64::EPSILON;
    let mut vecs = CMat::zeros(n, n);
    for k in 0..n {
        let mut x = vec![C64::zero(); n];
        x[k] = c(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C64::zero();
            for j in i + 1..=k {
                s += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - t[(k, k)];
            if d.norm() < small {
                d = c(small, 0.0);
            }
            x[i] = -s / d;
        }
        let v = z.mul_vec(&x);
        let nv = vnorm(&v);
        for i in 0..n {
            vecs[(i, k)] = v[i] / nv;
        }
    }
    Ok((vals, vecs))
}

/// Matrix exponential by scaling and squaring of a Taylor polynomial.
pub fn expm(a: &CMat) -> CMat {
    let n = a.rows;
    let norm: f64 = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0i32;
    while norm / (2f64).powi(s) > 0.5 {
        s += 1;
    }
    let b = a.scale(c((2f64).powi(-s), 0.0));
    let mut term = CMat::identity(n);
    let mut sum = CMat::identity(n);
    for k in 1..=20 {
        term = (&term * &b).scale(c(1.0 / k as f64, 0.0));
        sum = &sum + &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(a)` for nilpotent `a`, as the finite sum. Errors if `a^n != 0`.
pub fn exp_nilpotent(a: &CMat) -> Result<CMat, LinalgError> {
    let n = a.rows;
    let scale = a.max_abs().max(1.0);
    let mut term = CMat::identity(n);
    let mut sum = CMat::identity(n);
    for k in 1..=n {
        term = (&term * a).scale(c(1.0 / k as f64, 0.0));
        if k == n {
            if term.max_abs() > 1e-12 * scale {
                return Err(LinalgError::Shape);
            }
            break;
        }
        sum = &sum + &term;
    }
    Ok(sum)
}

/// Smallest `k` with `a^k = 0` (within tolerance), if at most `dim`.
pub fn nilpotency_index(a: &CMat, tol: f64) -> Option<usize> {
    let n = a.rows;
    let mut p = CMat::identity(n);
    for k in 0..=n {
        if p.max_abs() <= tol {
            return Some(k);
        }
        p = &p * a;
    }
    None
}
