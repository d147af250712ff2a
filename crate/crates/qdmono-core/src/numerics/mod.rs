//! Complex special functions, operator powers, calibrated periods and ODE transport.

pub mod gamma;
pub mod linalg;
pub mod ode;
pub mod quad;

use alloc::vec::Vec;
use core::fmt;

pub use gamma::{complex_gamma, rgamma, rgamma_jet, sin_pi, Jet};
pub use linalg::{CMat, LinalgError};
pub use ode::{arc_points, continue_linear_ode, OdeOptions};

pub type C64 = num_complex::Complex64;

#[inline]
pub const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

#[derive(Debug, Clone, PartialEq)]
pub enum NumericsError {
    GammaPole { k: i64 },
    Linalg(LinalgError),
    StepUnderflow { at: C64 },
    Clearance { point: C64, distance: f64 },
    NonDiagonalTheta,
    NotNilpotent,
    GradingRelation { residual: f64 },
    NonFinite,
}

impl fmt::Display for NumericsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericsError::GammaPole { k } => write!(f, "gamma has a pole at -{k}"),
            NumericsError::Linalg(e) => write!(f, "{e}"),
            NumericsError::StepUnderflow { at } => write!(f, "ODE step size underflow near {at}"),
            NumericsError::Clearance { point, distance } => {
                write!(f, "path passes within {distance:.3e} of singular point {point}")
            }
            NumericsError::NonDiagonalTheta => write!(f, "grading operator must be diagonal in the flat basis"),
            NumericsError::NotNilpotent => write!(f, "rho is not nilpotent"),
            NumericsError::GradingRelation { residual } => write!(f, "[theta, rho] = -rho fails (residual {residual:.3e})"),
            NumericsError::NonFinite => write!(f, "non-finite value produced"),
        }
    }
}

impl core::error::Error for NumericsError {}

impl From<LinalgError> for NumericsError {
    fn from(e: LinalgError) -> Self {
        NumericsError::Linalg(e)
    }
}

/// A point together with a chosen value of the relevant logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogBranchPoint {
    pub lambda: C64,
    pub log_value: C64,
}

impl LogBranchPoint {
    /// Principal branch of `log lambda`.
    pub fn principal(lambda: C64) -> Self {
        LogBranchPoint { lambda, log_value: lambda.ln() }
    }

    pub fn new(lambda: C64, log_value: C64) -> Self {
        LogBranchPoint { lambda, log_value }
    }

    /// Same point, logarithm shifted by `2πi k`.
    pub fn turned(&self, k: i64) -> Self {
        LogBranchPoint { lambda: self.lambda, log_value: self.log_value + c(0.0, 2.0 * core::f64::consts::PI * k as f64) }
    }

    /// Relative mismatch between `exp(log_value)` and the stored point.
    pub fn consistency(&self) -> f64 {
        (self.log_value.exp() - self.lambda).norm() / self.lambda.norm().max(f64::MIN_POSITIVE)
    }
}

/// Diagonal of a grading operator that must be diagonal in the flat basis.
pub fn diagonal_of(theta: &CMat) -> Result<Vec<C64>, NumericsError> {
    if !theta.is_diagonal(1e-14 * theta.max_abs().max(1.0)) {
        return Err(NumericsError::NonDiagonalTheta);
    }
    Ok(theta.diag())
}

fn check_grading(theta: &CMat, rho: &CMat) -> Result<(), NumericsError> {
    let r = (&theta.commutator(rho) + rho).max_abs();
    if r > 1e-12 * rho.max_abs().max(1.0) {
        return Err(NumericsError::GradingRelation { residual: r });
    }
    Ok(())
}

/// `λ^θ λ^{-ρ}` on the branch carried by `at`.
pub fn operator_power(at: &LogBranchPoint, theta: &CMat, rho: &CMat) -> Result<CMat, NumericsError> {
    let d = diagonal_of(theta)?;
    check_grading(theta, rho)?;
    let l = at.log_value;
    let lt = CMat::from_diag(&d.iter().map(|&t| (t * l).exp()).collect::<Vec<_>>());
    let e = linalg::exp_nilpotent(&rho.scale(-l)).map_err(|_| NumericsError::NotNilpotent)?;
    Ok(&lt * &e)
}

/// `Ĩ^(m)(λ) = e^{-ρ ∂_λ ∂_m}(λ^{θ-m-1/2} / Γ(θ-m+1/2))` as a finite nilpotent sum.
pub fn calibrated_period(theta: &CMat, rho: &CMat, m: C64, at: &LogBranchPoint) -> Result<CMat, NumericsError> {
    let d = diagonal_of(theta)?;
    let nil = linalg::nilpotency_index(rho, 1e-12 * rho.max_abs().max(1.0)).ok_or(NumericsError::NotNilpotent)?;
    Ok(calibrated_period_diag(&d, rho, nil, m, at.log_value))
}

/// Core of [`calibrated_period`] with validated inputs: `nil` is the nilpotency index of `rho`.
pub fn calibrated_period_diag(theta: &[C64], rho: &CMat, nil: usize, m: C64, log_lambda: C64) -> CMat {
    let n = theta.len();
    let order = nil.saturating_sub(1);
    let mut out = CMat::zeros(n, n);
    let mut rho_pow = CMat::identity(n);
    for l in 0..nil.max(1) {
        let lf = l as f64;
        let diag: Vec<C64> = theta
            .iter()
            .map(|&t| {
                let s = t - m - c(lf, 0.0);
                // jet in e of exp((s - 1/2 - e) L) / Γ(s + 1/2 - e)
                let mut ex = Jet::constant(((s - c(0.5, 0.0)) * log_lambda).exp(), order);
                let mut pw = c(1.0, 0.0);
                for j in 1..=order {
                    pw = pw * (-log_lambda) / (j as f64);
                    ex.c[j] = ex.c[0] * pw;
                }
                let rg = rgamma_jet(s + c(0.5, 0.0), order).reflect();
                ex.mul(&rg).c[l]
            })
            .collect();
        let term = &rho_pow * &CMat::from_diag(&diag);
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        out = &out + &term.scale(c(sign, 0.0));
        rho_pow = &rho_pow * rho;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> (CMat, CMat) {
        let theta = CMat::from_real_rows(&[&[0.5, 0.0], &[0.0, -0.5]]);
        let rho = CMat::from_real_rows(&[&[0.0, 0.0], &[2.0, 0.0]]);
        (theta, rho)
    }

    #[test]
    fn operator_power_trivial_cases() {
        let (theta, rho) = p1();
        let id = operator_power(&LogBranchPoint::principal(c(1.0, 0.0)), &theta, &rho).unwrap();
        assert!(id.dist(&CMat::identity(2)) < 1e-15);
        let z = operator_power(&LogBranchPoint::principal(c(4.0, 0.0)), &theta, &CMat::zeros(2, 2)).unwrap();
        assert!(z.dist(&CMat::from_diag(&[c(2.0, 0.0), c(0.5, 0.0)])) < 1e-14);
    }

    #[test]
    fn operator_power_p1_at_e() {
        let (theta, rho) = p1();
        let e = core::f64::consts::E;
        let got = operator_power(&LogBranchPoint::principal(c(e, 0.0)), &theta, &rho).unwrap();
        // exp(θ)(1 - ρ) since log λ = 1 and ρ² = 0
        let want = &linalg::expm(&theta) * &(&CMat::identity(2) - &rho);
        assert!(got.dist(&want) < 1e-14);
    }

    #[test]
    fn operator_power_group_law() {
        let (theta, rho) = p1();
        let at = LogBranchPoint::principal(c(0.7, 1.3));
        let a = operator_power(&at, &theta, &rho).unwrap();
        let b = operator_power(&at.turned(1), &theta, &rho).unwrap();
        let tw = LogBranchPoint::new(c(1.0, 0.0), c(0.0, 2.0 * core::f64::consts::PI));
        let g = operator_power(&tw, &theta, &rho).unwrap();
        assert!(b.dist(&(&a * &g)) < 1e-10);
    }

    #[test]
    fn calibrated_period_without_rho_is_scalar() {
        let theta = CMat::from_diag(&[c(0.5, 0.0), c(-0.5, 0.0)]);
        let m = c(0.3, 0.1);
        let at = LogBranchPoint::principal(c(2.0, 1.0));
        let got = calibrated_period(&theta, &CMat::zeros(2, 2), m, &at).unwrap();
        for a in 0..2 {
            let s = theta[(a, a)] - m;
            let want = ((s - c(0.5, 0.0)) * at.log_value).exp() * rgamma(s + c(0.5, 0.0));
            assert!((got[(a, a)] - want).norm() < 1e-14);
        }
    }

    // Hand expansion for ρ² = 0: Ĩ = D_0 - ρ ∂_m D_1 where D_1 = λ^{θ-m-3/2}/Γ(θ-m-1/2).
    #[test]
    fn calibrated_period_p1_first_order_oracle() {
        let (theta, rho) = p1();
        let at = LogBranchPoint::principal(c(2.0, 0.0));
        let got = calibrated_period(&theta, &rho, c(0.0, 0.0), &at).unwrap();
        let l = at.log_value;
        let f = |t: f64, m: f64, shift: f64| -> C64 {
            (c(t - m - shift - 0.5, 0.0) * l).exp() * rgamma(c(t - m - shift + 0.5, 0.0))
        };
        let h = 1e-5;
        let dm = |t: f64| (f(t, h, 1.0) - f(t, -h, 1.0)) / (2.0 * h);
        let want = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => f(0.5, 0.0, 0.0),
            (1, 1) => f(-0.5, 0.0, 0.0),
            (1, 0) => -rho[(1, 0)] * dm(0.5),
            _ => c(0.0, 0.0),
        });
        assert!(got.dist(&want) < 1e-8, "{got:?} vs {want:?}");
    }

    #[test]
    fn calibrated_period_translation_invariance() {
        let theta = CMat::from_diag(&[c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let rho = CMat::from_real_rows(&[&[0.0, 0.0, 0.0], &[3.0, 0.0, 0.0], &[0.0, 3.0, 0.0]]);
        let mut s: u64 = 9;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let m = c(2.0 * next() - 1.0, 0.5 * next() - 0.25);
            let lam = c(1.0 + 3.0 * next(), 4.0 * next() - 2.0);
            let h = 1e-5 * lam.norm();
            let at = |x: C64| LogBranchPoint::principal(x);
            let fd = &calibrated_period(&theta, &rho, m, &at(lam + h)).unwrap()
                - &calibrated_period(&theta, &rho, m, &at(lam - h)).unwrap();
            let fd = fd.scale(c(1.0 / (2.0 * h), 0.0));
            let shifted = calibrated_period(&theta, &rho, m + c(1.0, 0.0), &at(lam)).unwrap();
            assert!(fd.dist(&shifted) < 1e-8 * shifted.max_abs().max(1.0));
        }
    }
}
