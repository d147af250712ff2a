//! Twisted periods of the second structure connection: fundamental frames, continuation,
//! local monodromy, reflection vectors and the `h_m` and Euler pairings.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::frobenius::{canonical_data, rmatrix_series, FrobeniusModel, ModelError, SemisimpleData};
use crate::numerics::linalg::{self, eig, hdot, lu, vnorm, LinalgError};
use crate::numerics::ode::{arc_points, continue_linear_ode, OdeOptions};
use crate::numerics::{c, calibrated_period_diag, rgamma, CMat, LogBranchPoint, NumericsError, C64, SQRT_2PI};
use crate::paths::{default_lambda0, DistinguishedSystem, PathError, PathPlan, ARC_STEP};

#[derive(Clone, Debug, PartialEq)]
pub enum PeriodError {
    Model(ModelError),
    Numerics(NumericsError),
    Path(PathError),
    TailNotConverged { lambda0: f64, tail: f64 },
    LogarithmicCase { m: C64 },
    EigenvalueCluster { separation: f64 },
    LeadingCoefficientMisfit { misfit: f64 },
    PairingNotConstant { difference: f64 },
    SingularPairing,
    UntargetedPath,
}

impl fmt::Display for PeriodError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodError::Model(e) => write!(f, "{e}"),
            PeriodError::Numerics(e) => write!(f, "{e}"),
            PeriodError::Path(e) => write!(f, "{e}"),
            PeriodError::TailNotConverged { lambda0, tail } => {
                write!(f, "period series at λ° = {lambda0} does not converge (tail {tail:.3e})")
            }
            PeriodError::LogarithmicCase { m } => write!(f, "m = {m} lies in 1/2 + Z (logarithmic case)"),
            PeriodError::EigenvalueCluster { separation } => {
                write!(f, "reflection eigenvalue not separated from the rest (gap {separation:.3e})")
            }
            PeriodError::LeadingCoefficientMisfit { misfit } => {
                write!(f, "local expansion does not fit the continued period (relative misfit {misfit:.3e})")
            }
            PeriodError::PairingNotConstant { difference } => {
                write!(f, "h_m differs between two base values by {difference:.3e}")
            }
            PeriodError::SingularPairing => write!(f, "h_m is degenerate at this m"),
            PeriodError::UntargetedPath => write!(f, "path has no target point"),
        }
    }
}

impl core::error::Error for PeriodError {}

impl From<ModelError> for PeriodError {
    fn from(e: ModelError) -> Self {
        PeriodError::Model(e)
    }
}
impl From<NumericsError> for PeriodError {
    fn from(e: NumericsError) -> Self {
        PeriodError::Numerics(e)
    }
}
impl From<LinalgError> for PeriodError {
    fn from(e: LinalgError) -> Self {
        PeriodError::Numerics(e.into())
    }
}
impl From<PathError> for PeriodError {
    fn from(e: PathError) -> Self {
        PeriodError::Path(e)
    }
}

/// A value of the fundamental solution `I^(m)` at a point, with the branch of `log λ` reached.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodFrame {
    pub value: CMat,
    pub at: LogBranchPoint,
    pub m: C64,
    pub provenance: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionVector {
    pub beta: Vec<C64>,
    pub path: PathPlan,
    pub m_tag: C64,
    pub spiral_exponent: i64,
    /// Canonical index of the point the path ends at.
    pub target: usize,
    /// Distance from the reflection eigenvalue to the rest of the spectrum.
    pub eigen_separation: f64,
    /// Worst relative misfit of the local expansion over the fit radii.
    pub fit_misfit: f64,
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    /// ODE local tolerance.
    pub tol: f64,
    /// Base value; `None` picks `3 max|u_i|`.
    pub lambda0: Option<f64>,
    /// Largest calibration order tried for the base frame.
    pub max_series_order: usize,
    /// Order of the local expansion used in the leading-coefficient fit.
    pub local_order: usize,
    /// Order of the R-series kept by the engine.
    pub r_order: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { tol: 1e-11, lambda0: None, max_series_order: 160, local_order: 8, r_order: 48 }
    }
}

/// Model data prepared once for all period computations.
#[derive(Clone, Debug)]
pub struct PeriodEngine {
    pub model: FrobeniusModel,
    pub sd: SemisimpleData,
    pub rmat: Vec<CMat>,
    pub lambda0: f64,
    pub opts: EngineOptions,
    calibration: Vec<CMat>,
    nil: usize,
    psi_inv: CMat,
}

fn is_half_integer(m: C64) -> bool {
    m.im.abs() < 1e-12 && ((m.re - 0.5) - (m.re - 0.5).round()).abs() < 1e-9
}

impl PeriodEngine {
    pub fn new(model: FrobeniusModel, opts: EngineOptions) -> Result<Self, PeriodError> {
        model.validate()?;
        let sd = canonical_data(&model)?;
        let rmat = rmatrix_series(&model, &sd, opts.r_order.max(opts.local_order))?;
        let lambda0 = opts.lambda0.unwrap_or_else(|| default_lambda0(&sd.u));
        let calibration = match model.calibration_series(opts.max_series_order) {
            Ok(s) => s,
            Err(ModelError::CalibrationTooShort { .. }) => match &model.calibration {
                crate::frobenius::Calibration::Table { terms, .. } => terms.clone(),
                _ => unreachable!(),
            },
            Err(e) => return Err(e.into()),
        };
        let nil = model.nilpotency()?;
        let psi_inv = linalg::inverse(&sd.psi)?;
        Ok(PeriodEngine { model, sd, rmat, lambda0, opts, calibration, nil, psi_inv })
    }

    /// Calibration terms `S_0, S_1, …` available to the engine.
    pub fn calibration(&self) -> &[CMat] {
        &self.calibration
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn u(&self) -> &[C64] {
        &self.sd.u
    }

    pub fn min_gap(&self) -> f64 {
        self.sd.min_gap()
    }

    pub fn ode_options(&self) -> OdeOptions {
        let mut maxgap: f64 = 0.0;
        for a in &self.sd.u {
            for b in &self.sd.u {
                maxgap = maxgap.max((a - b).norm());
            }
        }
        OdeOptions { tol: self.opts.tol, min_clearance: 1e-3 * maxgap, ..OdeOptions::default() }
    }

    /// `m - k` with the smallest `k ≥ 0` such that every `θ_a - m + k + 1/2` has real part above 0.2,
    /// where the frame `I^(m-k)` is invertible. Monodromy and reflection vectors do not see the shift.
    pub fn working_m(&self, m: C64) -> (C64, usize) {
        let tmin = self.model.theta.iter().fold(f64::INFINITY, |a, t| a.min(t.re));
        let mut k = 0usize;
        let mut mw = m;
        while mw.re > tmin + 0.5 - 0.2 {
            mw -= c(1.0, 0.0);
            k += 1;
        }
        (mw, k)
    }

    /// `I^(m)(λ) = Σ_k (-1)^k S_k Ĩ^(m+k)(λ)` at `at`, summed until the terms are negligible.
    pub fn frame_series(&self, m: C64, at: LogBranchPoint) -> Result<CMat, PeriodError> {
        let n = self.dim();
        let mut sum = CMat::zeros(n, n);
        let mut small = 0;
        let mut last = f64::INFINITY;
        for (k, sk) in self.calibration.iter().enumerate() {
            let ti = calibrated_period_diag(&self.model.theta, &self.model.rho, self.nil, m + c(k as f64, 0.0), at.log_value);
            let term = sk * &ti;
            sum = if k % 2 == 0 { &sum + &term } else { &sum - &term };
            last = term.max_abs();
            if k > 2 && last <= 1e-15 * sum.max_abs() {
                small += 1;
                if small >= 3 {
                    return Ok(sum);
                }
            } else {
                small = 0;
            }
        }
        let tail = last / sum.max_abs().max(f64::MIN_POSITIVE);
        if tail <= 1e-10 {
            return Ok(sum);
        }
        Err(PeriodError::TailNotConverged { lambda0: at.lambda.norm(), tail })
    }

    /// The frame at the base value `λ°` on the principal branch.
    pub fn base_frame(&self, m: C64) -> Result<PeriodFrame, PeriodError> {
        let at = LogBranchPoint::principal(c(self.lambda0, 0.0));
        Ok(PeriodFrame { value: self.frame_series(m, at)?, at, m, provenance: vec![at.lambda] })
    }

    /// `dI/dλ = A(λ) I` with `A(λ) = (λ - E•)^{-1}(θ - m - 1/2)`.
    pub fn connection(&self, m: C64, lambda: C64) -> CMat {
        let n = self.dim();
        let shift = m + c(0.5, 0.0);
        let b = CMat::from_fn(n, n, |i, j| self.psi_inv[(i, j)] * (self.model.theta[j] - shift));
        let scaled = CMat::from_fn(n, n, |i, j| b[(i, j)] / (lambda - self.sd.u[i]));
        &self.sd.psi * &scaled
    }

    /// Relative residual of the λ-equation for a frame on the principal branch, using `∂_λ I^(m) = I^(m+1)`.
    pub fn frame_residual(&self, frame: &PeriodFrame) -> Result<f64, PeriodError> {
        let d = self.frame_series(frame.m + c(1.0, 0.0), frame.at)?;
        let r = &d - &(&self.connection(frame.m, frame.at.lambda) * &frame.value);
        Ok(r.max_abs() / d.max_abs().max(f64::MIN_POSITIVE))
    }

    /// Transports a frame along `waypoints` (which must start at the frame's point).
    pub fn continue_frame(&self, frame: &PeriodFrame, waypoints: &[C64]) -> Result<PeriodFrame, PeriodError> {
        if waypoints.len() < 2 {
            return Ok(frame.clone());
        }
        let m = frame.m;
        let value = continue_linear_ode(|l| self.connection(m, l), &frame.value, waypoints, &self.sd.u, &self.ode_options())?;
        let mut log = frame.at.log_value;
        for w in waypoints.windows(2) {
            log += c(0.0, (w[1] / w[0]).arg());
        }
        let end = *waypoints.last().unwrap();
        let mut provenance = frame.provenance.clone();
        provenance.extend_from_slice(&waypoints[1..]);
        Ok(PeriodFrame { value, at: LogBranchPoint::new(end, c(end.norm().ln(), log.im)), m, provenance })
    }

    /// `M` with `continued = base · M` for a loop starting and ending at the frame's point.
    pub fn loop_monodromy(&self, frame: &PeriodFrame, lp: &[C64]) -> Result<CMat, PeriodError> {
        let after = self.continue_frame(frame, lp)?;
        Ok(linalg::solve(&frame.value, &after.value)?)
    }

    /// Monodromy of the loop that runs out along `path`, once counter-clockwise around its target, and back.
    pub fn path_loop_monodromy(&self, m: C64, path: &PathPlan) -> Result<CMat, PeriodError> {
        let (mw, _) = self.working_m(m);
        let f0 = self.base_frame(mw)?;
        let lp = crate::paths::loop_around(path, &self.sd.u, true);
        self.loop_monodromy(&f0, &lp.waypoints)
    }

    /// Reflection vector along `path` with the end branch of `log(λ - u_i)` turned by `turns` full circles.
    pub fn reflection_vector_on_branch(&self, m: C64, path: &PathPlan, turns: i64) -> Result<ReflectionVector, PeriodError> {
        if is_half_integer(m) {
            return Err(PeriodError::LogarithmicCase { m });
        }
        let i = path.target.ok_or(PeriodError::UntargetedPath)?;
        let ui = self.sd.u[i];
        let (mw, _) = self.working_m(m);
        let f0 = self.base_frame(mw)?;
        let f1 = self.continue_frame(&f0, &path.waypoints)?;
        let p = path.end();
        let r = (p - ui).norm();
        let a0 = (p - ui).arg();
        let mut circle = arc_points(ui, r, a0, a0 + 2.0 * PI, ARC_STEP);
        *circle.last_mut().unwrap() = p;
        let f2 = self.continue_frame(&f1, &circle)?;
        let mono = linalg::solve(&f1.value, &f2.value)?;
        let q = (c(0.0, PI) * m).exp();
        let mu = -q.powi(-2);
        let (vals, vecs) = eig(&mono)?;
        let (jbest, _) = vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (j, v)| {
            let d = (v - mu).norm();
            if d < acc.1 {
                (j, d)
            } else {
                acc
            }
        });
        let separation = vals
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != jbest)
            .map(|(_, v)| (v - vals[jbest]).norm())
            .fold(f64::INFINITY, f64::min);
        if separation < 1e-4 || (vals[jbest] - mu).norm() > 1e-4 {
            return Err(PeriodError::EigenvalueCluster { separation: separation.min((vals[jbest] - mu).norm()) });
        }
        let b = vecs.column(jbest);
        // Fit the leading coefficient on radii r0/2^t along the approach direction.
        let end_branch = path.end_log_branch.ok_or(PeriodError::UntargetedPath)?;
        let dir_angle = end_branch.log_value.im + 2.0 * PI * turns as f64;
        let dir = C64::from_polar(1.0, end_branch.log_value.im);
        let r0 = 0.05 * self.min_gap();
        let local = self.local_laurent(i, mw, self.opts.local_order);
        let mut cur = f1.clone();
        let mut coeffs = Vec::new();
        let mut misfit: f64 = 0.0;
        for t in 0..4 {
            let s = r0 / (1u32 << t) as f64;
            let pt = ui + dir * s;
            cur = self.continue_frame(&cur, &[cur.at.lambda, pt])?;
            let log_diff = c(s.ln(), dir_angle);
            let v: Vec<C64> = cur.value.mul_vec(&b).iter().map(|&x| x * ((mw + c(0.5, 0.0)) * log_diff).exp()).collect();
            let pred = local.eval_normalized(s * dir);
            let coef = hdot(&pred, &v) / hdot(&pred, &pred);
            let resid: Vec<C64> = v.iter().zip(&pred).map(|(a, b)| a - b * coef).collect();
            misfit = misfit.max(vnorm(&resid) / vnorm(&v));
            coeffs.push(coef);
        }
        if misfit > 1e-5 {
            return Err(PeriodError::LeadingCoefficientMisfit { misfit });
        }
        let coef = richardson(&coeffs);
        Ok(ReflectionVector {
            beta: b.iter().map(|x| x / coef).collect(),
            path: path.clone(),
            m_tag: m,
            spiral_exponent: turns,
            target: i,
            eigen_separation: separation,
            fit_misfit: misfit,
        })
    }

    pub fn reflection_vector(&self, m: C64, path: &PathPlan) -> Result<ReflectionVector, PeriodError> {
        self.reflection_vector_on_branch(m, path, 0)
    }

    /// Reflection vectors for every slot of a system, in slot order.
    pub fn reflection_vectors(&self, m: C64, system: &DistinguishedSystem) -> Result<Vec<ReflectionVector>, PeriodError> {
        system.paths.iter().map(|p| self.reflection_vector(m, p)).collect()
    }

    /// Matrix `H` with `h_m(a, b) = a^t H b`, checked for independence of λ.
    pub fn hm_matrix(&self, m: C64) -> Result<CMat, PeriodError> {
        let h1 = self.hm_at(m, self.lambda0)?;
        let h2 = self.hm_at(m, 1.5 * self.lambda0)?;
        let diff = h1.dist(&h2) / h1.max_abs().max(1.0);
        if diff > 1e-8 {
            return Err(PeriodError::PairingNotConstant { difference: diff });
        }
        Ok(h1)
    }

    fn hm_at(&self, m: C64, lambda: f64) -> Result<CMat, PeriodError> {
        let at = LogBranchPoint::principal(c(lambda, 0.0));
        let fm = self.frame_series(m, at)?;
        let fmm = self.frame_series(-m, at)?;
        let shifted = &CMat::identity(self.dim()).scale(c(lambda, 0.0)) - &self.model.euler;
        Ok(&(&(&fm.transpose() * &self.model.pairing) * &shifted) * &fmm)
    }

    pub fn hm_pairing(&self, m: C64, a: &[C64], b: &[C64]) -> Result<C64, PeriodError> {
        let h = self.hm_matrix(m)?;
        Ok(linalg::dot(a, &h.mul_vec(b)))
    }

    /// `E` with `⟨a, b⟩ = a^t E b = (1/2π)(a, e^{πiθ} e^{πiρ} b)`.
    pub fn euler_matrix(&self) -> CMat {
        euler_matrix(&self.model)
    }

    pub fn euler_pairing_coh(&self, a: &[C64], b: &[C64]) -> C64 {
        linalg::dot(a, &self.euler_matrix().mul_vec(b))
    }

    /// `β_i^*` with `h_m(β_i^*, β_j(-m)) = δ_ij`.
    pub fn dual_reflection_basis(&self, m: C64, betas_minus: &[Vec<C64>]) -> Result<Vec<Vec<C64>>, PeriodError> {
        let h = self.hm_matrix(m)?;
        let bm = CMat::from_columns(betas_minus);
        let hb = &h * &bm;
        let f = lu(&hb.transpose()).map_err(|_| PeriodError::SingularPairing)?;
        if f.rcond_estimate() < 1e-12 {
            return Err(PeriodError::SingularPairing);
        }
        let dual = f.solve(&CMat::identity(self.dim()));
        let resid = (&dual.transpose() * &hb).dist(&CMat::identity(self.dim()));
        if resid > 1e-8 {
            return Err(PeriodError::SingularPairing);
        }
        Ok((0..self.dim()).map(|j| dual.column(j)).collect())
    }

    pub fn local_laurent(&self, i: usize, m: C64, order: usize) -> LocalLaurent {
        let order = order.min(self.rmat.len() - 1);
        let coeffs = (0..=order).map(|k| self.sd.psi.mul_vec(&self.rmat[k].column(i))).collect();
        LocalLaurent { u: self.sd.u[i], m, coeffs }
    }
}

/// `⟨a, b⟩ = a^t E b` with `E = g e^{πiθ} e^{πiρ} / 2π`.
pub fn euler_matrix(model: &FrobeniusModel) -> CMat {
    let et = CMat::from_diag(&model.theta.iter().map(|t| (c(0.0, PI) * t).exp()).collect::<Vec<_>>());
    let er = linalg::exp_nilpotent(&model.rho.scale(c(0.0, PI))).expect("rho nilpotent");
    (&(&model.pairing * &et) * &er).scale(c(1.0 / (2.0 * PI), 0.0))
}

/// Richardson extrapolation of values sampled at `s, s/2, s/4, …` assuming integer powers of `s`.
fn richardson(v: &[C64]) -> C64 {
    let mut t: Vec<C64> = v.to_vec();
    for j in 1..v.len() {
        let f = (1u32 << j) as f64;
        let next: Vec<C64> = (1..t.len()).map(|k| (t[k] * f - t[k - 1]) / (f - 1.0)).collect();
        t = next;
    }
    t[0]
}

/// Truncated local solution `√(2π) Σ_k (-1)^k Ψ R_k e_i (λ-u_i)^{k-m-1/2} / Γ(k-m+1/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalLaurent {
    pub u: C64,
    pub m: C64,
    /// `Ψ R_k e_i`.
    pub coeffs: Vec<Vec<C64>>,
}

impl LocalLaurent {
    /// Value at `λ` with `log_diff` a chosen `log(λ - u_i)`.
    pub fn eval(&self, log_diff: C64) -> Vec<C64> {
        let n = self.coeffs[0].len();
        let mut out = vec![c(0.0, 0.0); n];
        for (k, v) in self.coeffs.iter().enumerate() {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let w = ((c(kf - 0.5, 0.0) - self.m) * log_diff).exp() * rgamma(c(kf + 0.5, 0.0) - self.m) * (SQRT_2PI * sign);
            for (o, x) in out.iter_mut().zip(v) {
                *o += x * w;
            }
        }
        out
    }

    /// `(λ - u_i)^{m+1/2}` times the series, a power series in `d = λ - u_i`.
    pub fn eval_normalized(&self, d: C64) -> Vec<C64> {
        let n = self.coeffs[0].len();
        let mut out = vec![c(0.0, 0.0); n];
        let mut p = c(1.0, 0.0);
        for (k, v) in self.coeffs.iter().enumerate() {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let w = p * rgamma(c(kf + 0.5, 0.0) - self.m) * (SQRT_2PI * sign);
            for (o, x) in out.iter_mut().zip(v) {
                *o += x * w;
            }
            p *= d;
        }
        out
    }
}
