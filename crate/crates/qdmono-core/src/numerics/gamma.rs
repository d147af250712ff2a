//! Reciprocal gamma (the primitive), gamma, and truncated Taylor jets.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Zero;

use super::{c, NumericsError, C64};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// B_{2j} / (2j (2j-1)) for j = 1..=10.
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
];

const SHIFT_TO: f64 = 15.0;

/// Truncated Taylor series `c[0] + c[1] e + ... + c[k] e^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub c: Vec<C64>,
}

impl Jet {
    pub fn constant(x: C64, order: usize) -> Jet {
        let mut v = vec![C64::zero(); order + 1];
        v[0] = x;
        Jet { c: v }
    }

    /// `x + e`.
    pub fn variable(x: C64, order: usize) -> Jet {
        let mut j = Jet::constant(x, order);
        if order >= 1 {
            j.c[1] = c(1.0, 0.0);
        }
        j
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet { c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn add_const(&self, s: C64) -> Jet {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let n = self.c.len();
        let mut r = vec![C64::zero(); n];
        for i in 0..n {
            for j in 0..n - i {
                r[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c: r }
    }

    pub fn recip(&self) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut b = vec![C64::zero(); n];
        b[0] = a0.inv();
        for k in 1..n {
            let mut s = C64::zero();
            for j in 1..=k {
                s += self.c[j] * b[k - j];
            }
            b[k] = -s / a0;
        }
        Jet { c: b }
    }

    pub fn exp(&self) -> Jet {
        let n = self.c.len();
        let mut b = vec![C64::zero(); n];
        b[0] = self.c[0].exp();
        for k in 1..n {
            let mut s = C64::zero();
            for j in 1..=k {
                s += self.c[j] * b[k - j] * (j as f64);
            }
            b[k] = s / (k as f64);
        }
        Jet { c: b }
    }

    pub fn ln(&self) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut b = vec![C64::zero(); n];
        b[0] = a0.ln();
        for k in 1..n {
            let mut s = C64::zero();
            for j in 1..k {
                s += b[j] * self.c[k - j] * (j as f64);
            }
            b[k] = (self.c[k] - s / (k as f64)) / a0;
        }
        Jet { c: b }
    }

    /// Jet of `f(-e)` from the jet of `f(e)`.
    pub fn reflect(&self) -> Jet {
        Jet { c: self.c.iter().enumerate().map(|(k, &x)| if k % 2 == 1 { -x } else { x }).collect() }
    }
}

/// Stirling series for log Γ(w + e), valid for Re w ≥ SHIFT_TO.
fn ln_gamma_stirling(w: &Jet) -> Jet {
    let order = w.order();
    let lnw = w.ln();
    let mut s = w.add_const(c(-0.5, 0.0)).mul(&lnw).sub(w).add_const(c(LN_SQRT_2PI, 0.0));
    let r = w.recip();
    let r2 = r.mul(&r);
    let mut p = r.clone();
    for &b in STIRLING.iter() {
        s = s.add(&p.scale(c(b, 0.0)));
        p = p.mul(&r2);
    }
    debug_assert_eq!(s.order(), order);
    s
}

/// Taylor coefficients of `e ↦ 1/Γ(s + e)` up to `order`. Entire in `s`, no poles.
pub fn rgamma_jet(s: C64, order: usize) -> Jet {
    let mut shift = 0usize;
    while s.re + (shift as f64) < SHIFT_TO {
        shift += 1;
    }
    let w = Jet::variable(s + c(shift as f64, 0.0), order);
    let mut r = ln_gamma_stirling(&w).scale(c(-1.0, 0.0)).exp();
    // 1/Γ(s) = (s)(s+1)...(s+shift-1) / Γ(s+shift)
    for j in 0..shift {
        r = r.mul(&Jet::variable(s + c(j as f64, 0.0), order));
    }
    r
}

/// `sin(πz)` with exact reduction of the real part.
pub fn sin_pi(z: C64) -> C64 {
    let n = z.re.round();
    let r = z.re - n;
    let sign = if (n as i64) % 2 == 0 { 1.0 } else { -1.0 };
    let (s, co) = ((PI * r).sin(), (PI * r).cos());
    let y = PI * z.im;
    c(sign * s * y.cosh(), sign * co * y.sinh())
}

/// Reciprocal gamma function, entire.
pub fn rgamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // 1/Γ(z) = sin(πz) Γ(1-z) / π
        let g1 = rgamma(c(1.0, 0.0) - z);
        return sin_pi(z) / (g1 * PI);
    }
    rgamma_jet(z, 0).c[0]
}

/// Γ(z) for |z| ≤ 50. Errors within 1e-14 of a pole.
pub fn complex_gamma(z: C64) -> Result<C64, NumericsError> {
    if z.re <= 0.5 {
        let k = (-z.re).round();
        if k >= 0.0 && (z + c(k, 0.0)).norm() < 1e-14 {
            return Err(NumericsError::GammaPole { k: k as i64 });
        }
    }
    Ok(rgamma(z).inv())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_and_half() {
        assert!((complex_gamma(c(2.0, 0.0)).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        assert!((complex_gamma(c(6.0, 0.0)).unwrap() - c(120.0, 0.0)).norm() < 1e-12);
        let h = complex_gamma(c(0.5, 0.0)).unwrap();
        assert!((h.re - 1.772_453_850_905_516).abs() < 1e-14);
    }

    #[test]
    fn poles_error_and_rgamma_vanishes() {
        assert_eq!(complex_gamma(c(-3.0, 0.0)), Err(NumericsError::GammaPole { k: 3 }));
        assert_eq!(complex_gamma(c(0.0, 0.0)), Err(NumericsError::GammaPole { k: 0 }));
        assert!(rgamma(c(-3.0, 0.0)).norm() < 1e-15);
    }

    // Oracle values: mpmath.gamma at 30 digits.
    #[test]
    fn frozen_oracle_values() {
        let cases = [
            ((1.0, 1.0), (0.498_015_668_118_356_04, -0.154_949_828_301_810_69)),
            ((-2.5, 0.3), (-0.613_822_997_437_741_49, -0.211_232_614_937_041_78)),
            ((0.1, -7.0), (1.847_258_471_388_663_3e-5, 5.625_609_535_565_904_5e-6)),
            ((20.5, 3.0), (-3.934_436_444_941_265_6e17, 1.785_880_305_714_104_5e17)),
        ];
        for ((a, b), (re, im)) in cases {
            let g = complex_gamma(c(a, b)).unwrap();
            let want = c(re, im);
            assert!(((g - want) / want).norm() < 1e-12, "Γ({a}+{b}i) = {g} want {want}");
        }
    }

    #[test]
    fn jet_matches_digamma() {
        // d/ds 1/Γ(s) at s = 1 equals -ψ(1) = γ.
        let j = rgamma_jet(c(1.0, 0.0), 3);
        assert!((j.c[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((j.c[1].re - 0.577_215_664_901_532_9).abs() < 1e-13);
        // Near a pole the jet is finite and its value vanishes.
        let j = rgamma_jet(c(-2.0, 0.0), 2);
        assert!(j.c[0].norm() < 1e-14);
        assert!((j.c[1].re - 2.0).abs() < 1e-12); // (1/Γ)'(-2) = (-1)^2 2!
    }

    #[test]
    fn reflection_identity_grid() {
        let mut s: u64 = 42;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut count = 0;
        while count < 100 {
            let z = c(20.0 * next() - 10.0, 20.0 * next() - 10.0);
            if z.norm() > 10.0 || (z.re - z.re.round()).abs() < 0.1 && z.im.abs() < 0.1 {
                continue;
            }
            count += 1;
            let g = complex_gamma(z).unwrap() * complex_gamma(c(1.0, 0.0) - z).unwrap() * sin_pi(z) / PI;
            assert!((g - c(1.0, 0.0)).norm() < 1e-10, "z = {z}, product {g}");
        }
    }
}
