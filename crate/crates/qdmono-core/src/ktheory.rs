//! Exact K-theory of `P^n`: classes in the basis `[O], [O(1)], …, [O(n)]`, the Euler form,
//! mutations, Koszul duals and helices, and the characteristic maps into cohomology.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use num_rational::Ratio;

use crate::numerics::{c, CMat, C64};
use crate::paths::Side;

pub type Q128 = Ratio<i128>;

/// Mutations `(slot, side)` applied left to right.
pub type BraidWord = Vec<(usize, Side)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KError {
    IndexOutOfRange { index: usize, len: usize },
    DimensionMismatch,
    NotExceptional { i: usize, j: usize, value: i64 },
}

impl fmt::Display for KError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KError::IndexOutOfRange { index, len } => write!(f, "mutation index {index} outside 1..{len}"),
            KError::DimensionMismatch => write!(f, "classes live on different projective spaces"),
            KError::NotExceptional { i, j, value } => write!(f, "chi(E_{i}, E_{j}) = {value} breaks exceptionality"),
        }
    }
}

impl core::error::Error for KError {}

/// `binom(x, k)` as the polynomial `x(x-1)…(x-k+1)/k!`, valid for negative `x`.
pub fn binom_poly(x: i64, k: usize) -> i64 {
    let mut num: i128 = 1;
    let mut den: i128 = 1;
    for j in 0..k as i128 {
        num *= x as i128 - j;
        den *= j + 1;
    }
    (num / den) as i64
}

/// A class in `K_0(P^n)`, coordinates in the basis `[O(k)]`, `0 ≤ k ≤ n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KClass {
    pub n: usize,
    pub coeffs: Vec<i64>,
}

impl KClass {
    pub fn zero(n: usize) -> Self {
        KClass { n, coeffs: vec![0; n + 1] }
    }

    pub fn from_coeffs(coeffs: Vec<i64>) -> Self {
        KClass { n: coeffs.len() - 1, coeffs }
    }

    /// `[O(a)]`, reduced with `(1 - [O(1)])^{n+1} = 0`.
    pub fn line_bundle(n: usize, a: i64) -> Self {
        // x^a = (1 - y)^a = Σ_j binom(a, j) (-y)^j with y = 1 - x nilpotent of order n+1
        let mut coeffs = vec![0i64; n + 1];
        for j in 0..=n {
            let b = binom_poly(a, j) * if j % 2 == 0 { 1 } else { -1 };
            // y^j = Σ_i binom(j, i) (-x)^i
            for i in 0..=j {
                let s = if i % 2 == 0 { 1 } else { -1 };
                coeffs[i] += b * binom_poly(j as i64, i) * s;
            }
        }
        KClass { n, coeffs }
    }

    pub fn scaled(&self, k: i64) -> Self {
        KClass { n: self.n, coeffs: self.coeffs.iter().map(|x| x * k).collect() }
    }

    pub fn add(&self, other: &KClass) -> Self {
        KClass { n: self.n, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &KClass) -> Self {
        self.add(&other.scaled(-1))
    }

    /// Shift `E[k]`, acting as `(-1)^k`.
    pub fn shifted(&self, k: i64) -> Self {
        self.scaled(if k.rem_euclid(2) == 0 { 1 } else { -1 })
    }

    /// `E^∨`, using `[O(a)]^∨ = [O(-a)]`.
    pub fn dual(&self) -> Self {
        let mut out = KClass::zero(self.n);
        for (a, &k) in self.coeffs.iter().enumerate() {
            if k != 0 {
                out = out.add(&KClass::line_bundle(self.n, -(a as i64)).scaled(k));
            }
        }
        out
    }

    pub fn tensor(&self, other: &KClass) -> Self {
        let mut out = KClass::zero(self.n);
        for (a, &x) in self.coeffs.iter().enumerate() {
            for (b, &y) in other.coeffs.iter().enumerate() {
                if x != 0 && y != 0 {
                    out = out.add(&KClass::line_bundle(self.n, (a + b) as i64).scaled(x * y));
                }
            }
        }
        out
    }

    /// `E ⊗ O(k)`.
    pub fn twisted(&self, k: i64) -> Self {
        self.tensor(&KClass::line_bundle(self.n, k))
    }

    /// If the class is `±[O(a)]` for some `a` in `window`, returns `(sign, a)`.
    pub fn as_signed_line_bundle(&self, window: core::ops::RangeInclusive<i64>) -> Option<(i64, i64)> {
        for a in window {
            let l = KClass::line_bundle(self.n, a);
            if *self == l {
                return Some((1, a));
            }
            if *self == l.scaled(-1) {
                return Some((-1, a));
            }
        }
        None
    }
}

/// `χ(O(a), O(b))` on `P^n`.
pub fn chi_line(n: usize, a: i64, b: i64) -> i64 {
    binom_poly(n as i64 + b - a, n)
}

/// Euler form `χ(E, F) = Σ (-1)^i dim Ext^i(E, F)`, bilinear on the lattice.
pub fn euler_chi(e: &KClass, f: &KClass) -> i64 {
    let n = e.n;
    let mut s = 0;
    for (a, &x) in e.coeffs.iter().enumerate() {
        for (b, &y) in f.coeffs.iter().enumerate() {
            s += x * y * chi_line(n, a as i64, b as i64);
        }
    }
    s
}

pub fn gram(classes: &[KClass]) -> Vec<Vec<i64>> {
    classes.iter().map(|e| classes.iter().map(|f| euler_chi(e, f)).collect()).collect()
}

/// Exact rational series in `h` truncated at `h^n`.
fn series_mul(a: &[Q128], b: &[Q128]) -> Vec<Q128> {
    let n = a.len();
    let mut out = vec![Q128::from_integer(0); n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

fn exp_kh(n: usize, k: i64) -> Vec<Q128> {
    let mut out = Vec::with_capacity(n + 1);
    let mut t = Q128::from_integer(1);
    for j in 0..=n {
        out.push(t);
        t = t * Q128::from_integer(k as i128) / Q128::from_integer(j as i128 + 1);
    }
    out
}

/// Classical `ch(E) = Σ E_a e^{a h}` with exact rational coefficients.
pub fn ch_exact(e: &KClass) -> Vec<Q128> {
    let n = e.n;
    let mut out = vec![Q128::from_integer(0); n + 1];
    for (a, &k) in e.coeffs.iter().enumerate() {
        for (o, t) in out.iter_mut().zip(exp_kh(n, a as i64)) {
            *o += t * Q128::from_integer(k as i128);
        }
    }
    out
}

/// `Td(P^n) = (h/(1 - e^{-h}))^{n+1}` truncated at `h^n`.
pub fn todd_exact(n: usize) -> Vec<Q128> {
    // (1 - e^{-h})/h = Σ (-1)^j h^j/(j+1)!
    let mut d = Vec::with_capacity(n + 1);
    let mut fact = Q128::from_integer(1);
    for j in 0..=n {
        fact *= Q128::from_integer(j as i128 + 1);
        let s = if j % 2 == 0 { 1 } else { -1 };
        d.push(Q128::from_integer(s) / fact);
    }
    let mut inv = vec![Q128::from_integer(0); n + 1];
    inv[0] = Q128::from_integer(1) / d[0];
    for k in 1..=n {
        let mut s = Q128::from_integer(0);
        for j in 1..=k {
            s += d[j] * inv[k - j];
        }
        inv[k] = -s / d[0];
    }
    let mut out = vec![Q128::from_integer(0); n + 1];
    out[0] = Q128::from_integer(1);
    for _ in 0..=n {
        out = series_mul(&out, &inv);
    }
    out
}

/// `∫ ch(E^∨) ch(F) Td(P^n)`, the coefficient of `h^n`.
pub fn chi_hrr(e: &KClass, f: &KClass) -> Q128 {
    let n = e.n;
    let p = series_mul(&series_mul(&ch_exact(&e.dual()), &ch_exact(f)), &todd_exact(n));
    p[n]
}

/// An ordered list of classes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExceptionalCollection {
    pub classes: Vec<KClass>,
}

impl ExceptionalCollection {
    /// Checks that the Gram matrix is upper unitriangular.
    pub fn new(classes: Vec<KClass>) -> Result<Self, KError> {
        let c = ExceptionalCollection { classes };
        c.check()?;
        Ok(c)
    }

    pub fn beilinson(n: usize, a: i64) -> Self {
        ExceptionalCollection { classes: (0..=n as i64).map(|k| KClass::line_bundle(n, a + k)).collect() }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn gram(&self) -> Vec<Vec<i64>> {
        gram(&self.classes)
    }

    pub fn check(&self) -> Result<(), KError> {
        let n = self.classes.first().map_or(0, |c| c.n);
        if self.classes.iter().any(|c| c.n != n) {
            return Err(KError::DimensionMismatch);
        }
        let g = self.gram();
        for i in 0..g.len() {
            for j in 0..=i {
                let want = if i == j { 1 } else { 0 };
                if g[i][j] != want {
                    return Err(KError::NotExceptional { i: i + 1, j: j + 1, value: g[i][j] });
                }
            }
        }
        Ok(())
    }
}

/// `[L_E F] = F - χ(E, F) E`.
pub fn left_mutation(e: &KClass, f: &KClass) -> KClass {
    f.sub(&e.scaled(euler_chi(e, f)))
}

/// `[R_F E] = E - χ(E, F) F`.
pub fn right_mutation(f: &KClass, e: &KClass) -> KClass {
    e.sub(&f.scaled(euler_chi(e, f)))
}

/// Mutation of the pair in slots `i, i+1` (`i` 1-based): `L_i` gives `(L_{E_i} E_{i+1}, E_i)`,
/// `R_i` gives `(E_{i+1}, R_{E_{i+1}} E_i)`. The result is re-checked for exceptionality.
pub fn mutate(coll: &ExceptionalCollection, i: usize, side: Side) -> Result<ExceptionalCollection, KError> {
    let out = mutate_unchecked(coll, i, side)?;
    out.check()?;
    Ok(out)
}

fn mutate_unchecked(coll: &ExceptionalCollection, i: usize, side: Side) -> Result<ExceptionalCollection, KError> {
    let len = coll.len();
    if i == 0 || i >= len {
        return Err(KError::IndexOutOfRange { index: i, len: len.saturating_sub(1) });
    }
    let k = i - 1;
    let (e, f) = (&coll.classes[k], &coll.classes[k + 1]);
    let mut out = coll.clone();
    match side {
        Side::L => {
            out.classes[k] = left_mutation(e, f);
            out.classes[k + 1] = e.clone();
        }
        Side::R => {
            out.classes[k] = f.clone();
            out.classes[k + 1] = right_mutation(f, e);
        }
    }
    Ok(out)
}

/// Applies a word of mutations left to right.
pub fn apply_word(coll: &ExceptionalCollection, word: &[(usize, Side)]) -> Result<ExceptionalCollection, KError> {
    let mut c = coll.clone();
    for &(i, s) in word {
        c = mutate(&c, i, s)?;
    }
    Ok(c)
}

/// `(Ẽ_N, …, Ẽ_1)` with `Ẽ_i = L_{E_1} ⋯ L_{E_{i-1}} E_i`.
pub fn left_koszul_dual(coll: &ExceptionalCollection) -> ExceptionalCollection {
    let e = &coll.classes;
    let mut out: Vec<KClass> = (0..e.len())
        .map(|i| {
            let mut v = e[i].clone();
            for j in (0..i).rev() {
                v = left_mutation(&e[j], &v);
            }
            v
        })
        .collect();
    out.reverse();
    ExceptionalCollection { classes: out }
}

/// The braid word whose action on slots produces the left Koszul dual:
/// blocks `(L_{N-1} ⋯ L_j)` for `j = N-1, …, 1`, applied in that order.
pub fn koszul_word(len: usize) -> Vec<(usize, Side)> {
    let mut w = Vec::new();
    for j in (1..len).rev() {
        for i in j..len {
            w.push((i, Side::L));
        }
    }
    w
}

/// Shift of the foundation of the helix by `k` steps: one step maps `(E_1, …, E_N)` to
/// `(E_2, …, E_N, R_{E_N} ⋯ R_{E_2} E_1)`; negative steps use left mutations.
pub fn helix_shift(coll: &ExceptionalCollection, k: i64) -> ExceptionalCollection {
    let mut c = coll.clone();
    let len = c.len();
    if len == 0 {
        return c;
    }
    for _ in 0..k.unsigned_abs() {
        let e = &c.classes;
        if k > 0 {
            let mut v = e[0].clone();
            for f in &e[1..] {
                v = right_mutation(f, &v);
            }
            let mut next: Vec<KClass> = e[1..].to_vec();
            next.push(v);
            c = ExceptionalCollection { classes: next };
        } else {
            let mut v = e[len - 1].clone();
            for f in e[..len - 1].iter().rev() {
                v = left_mutation(f, &v);
            }
            let mut next = vec![v];
            next.extend_from_slice(&e[..len - 1]);
            c = ExceptionalCollection { classes: next };
        }
    }
    c
}

/// If the collection is `(±O(a), ±O(a+1), …, ±O(a+N-1))` with `|a| ≤ window`, returns `(a, signs)`.
pub fn as_signed_beilinson(coll: &ExceptionalCollection, window: i64) -> Option<(i64, Vec<i64>)> {
    let first = coll.classes.first()?;
    let (_, a) = first.as_signed_line_bundle(-window..=window)?;
    let mut signs = Vec::with_capacity(coll.len());
    for (k, e) in coll.classes.iter().enumerate() {
        let l = KClass::line_bundle(e.n, a + k as i64);
        if *e == l {
            signs.push(1);
        } else if *e == l.scaled(-1) {
            signs.push(-1);
        } else {
            return None;
        }
    }
    Some((a, signs))
}

/// Shortest mutation word of length at most `max_len` taking `coll` to a signed Beilinson
/// collection, breadth first with words ordered by slot then `L` before `R`.
pub fn braid_to_beilinson(coll: &ExceptionalCollection, max_len: usize) -> Option<(BraidWord, i64, Vec<i64>)> {
    let slots = coll.len().saturating_sub(1);
    let mut frontier: Vec<(Vec<(usize, Side)>, ExceptionalCollection)> = vec![(Vec::new(), coll.clone())];
    for depth in 0..=max_len {
        for (w, c) in &frontier {
            if let Some((a, signs)) = as_signed_beilinson(c, 64) {
                return Some((w.clone(), a, signs));
            }
        }
        if depth == max_len {
            break;
        }
        let mut next = Vec::new();
        for (w, c) in &frontier {
            for i in 1..=slots {
                for side in [Side::L, Side::R] {
                    // skip immediate inverses
                    if let Some(&(j, s)) = w.last() {
                        if j == i && s != side {
                            continue;
                        }
                    }
                    if let Ok(m) = mutate(c, i, side) {
                        let mut v = w.clone();
                        v.push((i, side));
                        next.push((v, m));
                    }
                }
            }
        }
        frontier = next;
    }
    None
}

/// Truncated power series in the hyperplane class `h` (`h^{n+1} = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct CohClass {
    pub coeffs: Vec<C64>,
}

impl CohClass {
    pub fn one(n: usize) -> Self {
        let mut v = vec![c(0.0, 0.0); n + 1];
        v[0] = c(1.0, 0.0);
        CohClass { coeffs: v }
    }

    pub fn mul(&self, other: &CohClass) -> CohClass {
        let n = self.coeffs.len();
        let mut out = vec![c(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n - i {
                out[i + j] += self.coeffs[i] * other.coeffs[j];
            }
        }
        CohClass { coeffs: out }
    }

    pub fn scale(&self, s: C64) -> CohClass {
        CohClass { coeffs: self.coeffs.iter().map(|x| x * s).collect() }
    }

    /// `exp(s h)`.
    pub fn exp_h(n: usize, s: C64) -> CohClass {
        let mut v = Vec::with_capacity(n + 1);
        let mut t = c(1.0, 0.0);
        for j in 0..=n {
            v.push(t);
            t = t * s / (j as f64 + 1.0);
        }
        CohClass { coeffs: v }
    }

    /// `exp` of a nilpotent series (zero constant term).
    pub fn exp_nilpotent(&self) -> CohClass {
        let n = self.coeffs.len() - 1;
        let mut out = CohClass::one(n);
        let mut term = CohClass::one(n);
        for k in 1..=n {
            term = term.mul(self).scale(c(1.0 / k as f64, 0.0));
            for (o, t) in out.coeffs.iter_mut().zip(&term.coeffs) {
                *o += t;
            }
        }
        out
    }
}

/// `Ch(E) = Σ E_a e^{2πi a h}` (rescaled) or `ch(E) = Σ E_a e^{a h}`.
pub fn chern_character(e: &KClass, rescaled: bool) -> CohClass {
    let n = e.n;
    let mut out = CohClass { coeffs: vec![c(0.0, 0.0); n + 1] };
    for (a, &k) in e.coeffs.iter().enumerate() {
        let s = if rescaled { c(0.0, 2.0 * PI * a as f64) } else { c(a as f64, 0.0) };
        for (o, t) in out.coeffs.iter_mut().zip(CohClass::exp_h(n, s).coeffs) {
            *o += t * k as f64;
        }
    }
    out
}

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `ζ(k)` for `2 ≤ k ≤ 12`.
#[allow(clippy::excessive_precision)]
pub const ZETA: [f64; 11] = [
    1.644_934_066_848_226_4,
    1.202_056_903_159_594_3,
    1.082_323_233_711_138_2,
    1.036_927_755_143_37,
    1.017_343_061_984_449_1,
    1.008_349_277_381_922_8,
    1.004_077_356_197_944_3,
    1.002_008_392_826_082_2,
    1.000_994_575_127_818_1,
    1.000_494_188_604_119_5,
    1.000_246_086_553_308,
];

/// `Γ(1 ± h)^{n+1}` from `log Γ(1+x) = -γx + Σ_{k≥2} ζ(k)(-x)^k/k`.
pub fn gamma_class(n: usize, plus: bool) -> CohClass {
    assert!(n <= 12, "gamma class tabulated for n ≤ 12");
    let s = if plus { 1.0 } else { -1.0 };
    let mut l = vec![c(0.0, 0.0); n + 1];
    if n >= 1 {
        l[1] = c(-EULER_GAMMA * s, 0.0);
    }
    for k in 2..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        l[k] = c(ZETA[k - 2] * sign * s.powi(k as i32) / k as f64, 0.0);
    }
    let scaled = CohClass { coeffs: l }.scale(c((n + 1) as f64, 0.0));
    scaled.exp_nilpotent()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntegralStructure {
    /// `Ψ_Q(E) = (2π)^{(1-n)/2} Γ̂⁺ e^{-h log q} Ch(E)`.
    PsiQ { q: C64 },
    /// `𝔄⁻(E) = i^{n mod 2} (2π)^{-n/2} Γ̂⁻ e^{-πi c_1} Ch(E)`.
    AMinus,
}

pub fn integral_structure_map(e: &KClass, variant: IntegralStructure) -> CohClass {
    let n = e.n;
    let ch = chern_character(e, true);
    match variant {
        IntegralStructure::PsiQ { q } => {
            let pre = (2.0 * PI).powf((1.0 - n as f64) / 2.0);
            gamma_class(n, true).mul(&CohClass::exp_h(n, -q.ln())).mul(&ch).scale(c(pre, 0.0))
        }
        IntegralStructure::AMinus => {
            let pre = if n % 2 == 1 { c(0.0, 1.0) } else { c(1.0, 0.0) } / (2.0 * PI).powf(n as f64 / 2.0);
            gamma_class(n, false).mul(&CohClass::exp_h(n, c(0.0, -PI * (n + 1) as f64))).mul(&ch).scale(pre)
        }
    }
}

/// Matrix whose column `k` is the image of `[O(k)]`.
pub fn integral_structure_matrix(n: usize, variant: IntegralStructure) -> CMat {
    let cols: Vec<Vec<C64>> = (0..=n).map(|k| integral_structure_map(&KClass::line_bundle(n, k as i64), variant).coeffs).collect();
    CMat::from_columns(&cols)
}

/// Complex coordinates of `v` in the basis `Ψ_Q([O(k)])`.
pub fn lattice_coordinates(n: usize, q: C64, v: &[C64]) -> Option<Vec<C64>> {
    if v.len() != n + 1 {
        return None;
    }
    let a = integral_structure_matrix(n, IntegralStructure::PsiQ { q });
    let x = crate::numerics::linalg::solve(&a, &CMat::from_columns(&[v.to_vec()])).ok()?;
    Some(x.column(0))
}

/// Integer coordinates of `v` in the image lattice of `Ψ_Q`, if every coordinate is within `tol`
/// of an integer of modulus at most `bound`. Returns the class and the rounding error.
pub fn match_integer_class(n: usize, q: C64, v: &[C64], tol: f64, bound: i64) -> Option<(KClass, f64)> {
    let x = lattice_coordinates(n, q, v)?;
    let mut err: f64 = 0.0;
    let mut coeffs = Vec::with_capacity(n + 1);
    for &z in &x {
        let r = z.re.round();
        err = err.max((z - c(r, 0.0)).norm());
        if r.abs() > bound as f64 {
            return None;
        }
        coeffs.push(r as i64);
    }
    if err > tol {
        return None;
    }
    Some((KClass { n, coeffs }, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_bundles_reduce_by_euler_relation() {
        for n in 1..=3usize {
            for a in 0..=n as i64 {
                let mut want = vec![0; n + 1];
                want[a as usize] = 1;
                assert_eq!(KClass::line_bundle(n, a).coeffs, want);
            }
            // Σ_k (-1)^k binom(n+1,k) [O(a+k)] = 0
            for a in -4..4 {
                let mut s = KClass::zero(n);
                for k in 0..=n + 1 {
                    let t = KClass::line_bundle(n, a + k as i64).scaled(binom_poly((n + 1) as i64, k));
                    s = if k % 2 == 0 { s.add(&t) } else { s.sub(&t) };
                }
                assert_eq!(s, KClass::zero(n));
            }
        }
        assert_eq!(KClass::line_bundle(1, -1).coeffs, vec![2, -1]);
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi_line(1, 0, 1), 2);
        assert_eq!(ExceptionalCollection::beilinson(2, 0).gram(), vec![vec![1, 3, 6], vec![0, 1, 3], vec![0, 0, 1]]);
        for n in 1..=4 {
            for a in -3..3 {
                assert_eq!(chi_line(n, a, a), 1);
            }
        }
        assert_eq!(chi_line(2, 0, -3), 1);
    }

    #[test]
    fn hrr_matches_closed_form() {
        for n in 1..=3usize {
            for a in -4..=4 {
                for b in -4..=4 {
                    let e = KClass::line_bundle(n, a);
                    let f = KClass::line_bundle(n, b);
                    assert_eq!(chi_hrr(&e, &f), Q128::from_integer(euler_chi(&e, &f) as i128), "n={n} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn serre_identity() {
        for n in 1..=3usize {
            let k = KClass::line_bundle(n, -(n as i64) - 1);
            let o = KClass::line_bundle(n, 0);
            for a in 0..=n as i64 {
                let e = KClass::line_bundle(n, a);
                let lhs = euler_chi(&o, &e.tensor(&k));
                let sign = if n % 2 == 0 { 1 } else { -1 };
                assert_eq!(lhs, sign * euler_chi(&o, &e.dual()));
            }
        }
    }

    #[test]
    fn mutation_examples() {
        let b = ExceptionalCollection::beilinson(1, 0);
        let l = mutate(&b, 1, Side::L).unwrap();
        assert_eq!(l.classes[0], KClass::line_bundle(1, 1).sub(&KClass::line_bundle(1, 0).scaled(2)));
        assert_eq!(mutate(&l, 1, Side::R).unwrap(), b);
        assert!(mutate(&b, 2, Side::L).is_err());
    }

    #[test]
    fn koszul_dual_is_dual_basis() {
        for n in 1..=3usize {
            let b = ExceptionalCollection::beilinson(n, 0);
            let d = left_koszul_dual(&b);
            let len = n + 1;
            for i in 0..len {
                for j in 0..len {
                    // d lists (Ẽ_N, …, Ẽ_1)
                    let v = euler_chi(&b.classes[i], &d.classes[len - 1 - j]);
                    assert_eq!(v, (i == j) as i64);
                }
            }
            assert_eq!(apply_word(&b, &koszul_word(len)).unwrap(), d);
        }
        let single = ExceptionalCollection { classes: vec![KClass::line_bundle(0, 0)] };
        assert_eq!(left_koszul_dual(&single), single);
    }

    #[test]
    fn helix_shift_examples() {
        let b = ExceptionalCollection::beilinson(1, 0);
        assert_eq!(helix_shift(&b, 0), b);
        let s = helix_shift(&b, 1);
        assert_eq!(s.classes[0], KClass::line_bundle(1, 1));
        assert_eq!(s.classes[1], KClass::line_bundle(1, 2).scaled(-1));
        for n in 1..=3 {
            let b = ExceptionalCollection::beilinson(n, 0);
            let len = (n + 1) as i64;
            assert_eq!(helix_shift(&helix_shift(&b, len), -len), b);
            // a full turn twists by the anticanonical bundle, up to the sign (-1)^{N-1}
            let full = helix_shift(&b, len);
            let sign = if (len - 1) % 2 == 0 { 1 } else { -1 };
            for (x, y) in full.classes.iter().zip(&b.classes) {
                assert_eq!(*x, y.twisted(len).scaled(sign));
            }
        }
    }

    #[test]
    fn beilinson_search() {
        let n = 2;
        let o = |a| KClass::line_bundle(n, a);
        let f = ExceptionalCollection::new(vec![o(-1).scaled(-1), o(0).scaled(3).sub(&o(1)), o(0)]).unwrap();
        let (w, a, signs) = braid_to_beilinson(&f, 4).unwrap();
        let b = apply_word(&f, &w).unwrap();
        assert_eq!(as_signed_beilinson(&b, 8), Some((a, signs.clone())));
        let fixed: Vec<KClass> = b.classes.iter().zip(&signs).map(|(c, s)| c.scaled(*s)).collect();
        assert_eq!(gram(&fixed), vec![vec![1, 3, 6], vec![0, 1, 3], vec![0, 0, 1]]);
        assert_eq!(braid_to_beilinson(&ExceptionalCollection::beilinson(3, 2), 0).map(|x| x.1), Some(2));
    }

    #[test]
    fn chern_character_examples() {
        let ch = chern_character(&KClass::line_bundle(1, 1), true);
        assert!((ch.coeffs[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((ch.coeffs[1] - c(0.0, 2.0 * PI)).norm() < 1e-14);
        let rel = KClass::line_bundle(1, -1).sub(&KClass::line_bundle(1, 0).scaled(2)).add(&KClass::line_bundle(1, 1));
        assert_eq!(rel, KClass::zero(1));
        let z = chern_character(&rel, true);
        assert!(z.coeffs.iter().all(|x| x.norm() < 1e-14));
    }

    #[test]
    fn gamma_class_examples() {
        let g = gamma_class(1, true);
        assert!((g.coeffs[1] - c(-2.0 * EULER_GAMMA, 0.0)).norm() < 1e-15);
        // Γ(1+h)Γ(1-h) = πh/sin(πh) = 1 + π²h²/6 + 7π⁴h⁴/360 + …, raised to n+1 = 5 for n = 4
        let n = 4;
        let p = gamma_class(n, true).mul(&gamma_class(n, false));
        let base = CohClass { coeffs: vec![c(1.0, 0.0), c(0.0, 0.0), c(PI * PI / 6.0, 0.0), c(0.0, 0.0), c(7.0 * PI.powi(4) / 360.0, 0.0)] };
        let mut want = CohClass::one(n);
        for _ in 0..=n {
            want = want.mul(&base);
        }
        for (a, b) in p.coeffs.iter().zip(&want.coeffs) {
            assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
        }
        let gm = gamma_class(3, false);
        let gp = gamma_class(3, true);
        for k in 0..4 {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((gm.coeffs[k] - gp.coeffs[k] * s).norm() < 1e-15);
        }
    }

    #[test]
    fn integral_structure_on_structure_sheaf() {
        let v = integral_structure_map(&KClass::line_bundle(1, 0), IntegralStructure::PsiQ { q: c(1.0, 0.0) });
        assert!((v.coeffs[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((v.coeffs[1] - c(-2.0 * EULER_GAMMA, 0.0)).norm() < 1e-15);
        // 𝔄⁻(O) on P^1: i/(2π)^{1/2} (1 + 2γh)(1 - 2πi h)
        let a = integral_structure_map(&KClass::line_bundle(1, 0), IntegralStructure::AMinus);
        let pre = c(0.0, 1.0) / (2.0 * PI).sqrt();
        assert!((a.coeffs[0] - pre).norm() < 1e-15);
        assert!((a.coeffs[1] - pre * c(2.0 * EULER_GAMMA, -2.0 * PI)).norm() < 1e-14);
    }
}
