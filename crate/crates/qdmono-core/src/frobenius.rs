//! Frobenius structures at a semisimple point: quantum cohomology of `P^n`, user models,
//! canonical coordinates, the calibration series and the R-series.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_traits::Zero;

use crate::numerics::linalg::{self, eig, inverse, vnorm};
use crate::numerics::{c, CMat, NumericsError, C64};

#[derive(Clone, Debug, PartialEq)]
pub enum ModelDescriptor {
    ProjectiveSpace { n: usize, q: C64 },
    Custom { name: String },
}

/// How `S_k` is obtained beyond what is stored.
#[derive(Clone, Debug, PartialEq)]
pub enum Calibration {
    /// Generated by the homogeneity recursion with kernel entries pinned to zero.
    Homogeneous,
    /// Stored terms `S_0..S_K`; optionally continued by the homogeneity recursion.
    Table { terms: Vec<CMat>, extend: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrobeniusModel {
    pub dim: usize,
    pub conformal_dim: f64,
    pub pairing: CMat,
    /// Eigenvalues of the grading operator, which is diagonal in the flat basis.
    pub theta: Vec<C64>,
    pub rho: CMat,
    /// `structure[i]` is the operator of multiplication by `φ_i`: entry `(k, j)` is `c_ij^k`.
    pub structure: Vec<CMat>,
    pub euler: CMat,
    pub calibration: Calibration,
    pub base_point: Vec<C64>,
    pub descriptor: ModelDescriptor,
}

/// Axioms and structural identities a model is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axiom {
    PairingSymmetric,
    PairingNondegenerate,
    FrobeniusProperty,
    Unit,
    Commutativity,
    Associativity,
    EulerCommutes,
    GradingRelation,
    ThetaSkew,
    RhoNilpotent,
    CalibrationUnit,
    CalibrationSymplectic,
    CalibrationQde,
}

impl Axiom {
    pub fn label(self) -> &'static str {
        match self {
            Axiom::PairingSymmetric => "(F1) pairing is symmetric",
            Axiom::PairingNondegenerate => "(F1) pairing is nondegenerate",
            Axiom::FrobeniusProperty => "(F2) Frobenius property g(a•b, c) = g(a, b•c)",
            Axiom::Unit => "(F3) multiplication by the first basis vector is the identity",
            Axiom::Commutativity => "commutativity of the product",
            Axiom::Associativity => "associativity of the product",
            Axiom::EulerCommutes => "(F4) Euler multiplication commutes with the product",
            Axiom::GradingRelation => "[theta, rho] = -rho",
            Axiom::ThetaSkew => "theta is skew with respect to the pairing",
            Axiom::RhoNilpotent => "rho is nilpotent",
            Axiom::CalibrationUnit => "S_0 is the identity",
            Axiom::CalibrationSymplectic => "symplectic condition on S",
            Axiom::CalibrationQde => "S z^theta z^-rho solves the z-equation",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    Shape(String),
    Axiom { axiom: Axiom, residual: f64 },
    EigenvalueCollision { separation: f64 },
    IsotropicIdempotent { index: usize },
    RecursionBreakdown { order: usize, residual: f64 },
    CalibrationTooShort { have: usize, need: usize },
    Numerics(NumericsError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Shape(s) => write!(f, "shape error: {s}"),
            ModelError::Axiom { axiom, residual } => write!(f, "{} violated (residual {residual:.3e})", axiom.label()),
            ModelError::EigenvalueCollision { separation } => {
                write!(f, "Euler multiplication has nearly coincident eigenvalues (separation {separation:.3e})")
            }
            ModelError::IsotropicIdempotent { index } => write!(f, "idempotent {index} is isotropic; point is not semisimple"),
            ModelError::RecursionBreakdown { order, residual } => {
                write!(f, "calibration recursion breaks down at order {order} (kernel residual {residual:.3e})")
            }
            ModelError::CalibrationTooShort { have, need } => {
                write!(f, "calibration has {have} terms, {need} needed and extension is disabled")
            }
            ModelError::Numerics(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<NumericsError> for ModelError {
    fn from(e: NumericsError) -> Self {
        ModelError::Numerics(e)
    }
}

impl From<linalg::LinalgError> for ModelError {
    fn from(e: linalg::LinalgError) -> Self {
        ModelError::Numerics(e.into())
    }
}

/// Small quantum cohomology of `P^n` at the origin of `H^2`, Novikov variable `q`.
pub fn qh_projective_space(n: usize, q: C64) -> FrobeniusModel {
    assert!(n >= 1, "P^n needs n >= 1");
    assert!(q.norm() > 0.0, "q must be nonzero");
    let dim = n + 1;
    let pairing = CMat::from_fn(dim, dim, |i, j| if i + j == n { c(1.0, 0.0) } else { C64::zero() });
    let theta = (0..dim).map(|k| c(n as f64 / 2.0 - k as f64, 0.0)).collect();
    let cup = CMat::from_fn(dim, dim, |i, j| if i == j + 1 { c(1.0, 0.0) } else { C64::zero() });
    let rho = cup.scale(c(dim as f64, 0.0));
    let mut ap = cup.clone();
    ap[(0, n)] = q;
    let structure = (0..dim).map(|k| ap.pow(k)).collect();
    let euler = ap.scale(c(dim as f64, 0.0));
    FrobeniusModel {
        dim,
        conformal_dim: n as f64,
        pairing,
        theta,
        rho,
        structure,
        euler,
        calibration: Calibration::Homogeneous,
        base_point: vec![C64::zero(); dim],
        descriptor: ModelDescriptor::ProjectiveSpace { n, q },
    }
}

/// Default Novikov variable for built-in models: `1` for `P^1`, `e^{0.2i}` otherwise.
pub fn default_q(n: usize) -> C64 {
    if n == 1 {
        c(1.0, 0.0)
    } else {
        C64::from_polar(1.0, 0.2)
    }
}

impl FrobeniusModel {
    pub fn theta_matrix(&self) -> CMat {
        CMat::from_diag(&self.theta)
    }

    /// Operator of multiplication by `φ_i`.
    pub fn mult(&self, i: usize) -> &CMat {
        &self.structure[i]
    }

    pub fn euler_mult(&self) -> &CMat {
        &self.euler
    }

    pub fn novikov(&self) -> Option<C64> {
        match self.descriptor {
            ModelDescriptor::ProjectiveSpace { q, .. } => Some(q),
            ModelDescriptor::Custom { .. } => None,
        }
    }

    /// `g^{-1} a^t g`, the adjoint with respect to the pairing.
    pub fn adjoint(&self, a: &CMat) -> Result<CMat, ModelError> {
        let gi = inverse(&self.pairing)?;
        Ok(&(&gi * &a.transpose()) * &self.pairing)
    }

    pub fn nilpotency(&self) -> Result<usize, ModelError> {
        linalg::nilpotency_index(&self.rho, 1e-12 * self.rho.max_abs().max(1.0))
            .ok_or(ModelError::Axiom { axiom: Axiom::RhoNilpotent, residual: f64::NAN })
    }

    /// Checks (F1)–(F4), the grading identities and, for stored calibrations, the calibration checks.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.dim;
        let shape_ok = self.pairing.rows() == n
            && self.pairing.is_square()
            && self.theta.len() == n
            && self.rho.rows() == n
            && self.rho.is_square()
            && self.structure.len() == n
            && self.structure.iter().all(|a| a.rows() == n && a.is_square())
            && self.euler.rows() == n
            && self.euler.is_square()
            && self.base_point.len() == n;
        if !shape_ok {
            return Err(ModelError::Shape(alloc::format!("all operators must be {n}x{n} and vectors of length {n}")));
        }
        let tol = 1e-12;
        let check = |axiom: Axiom, residual: f64, scale: f64| -> Result<(), ModelError> {
            if residual > tol * scale.max(1.0) || !residual.is_finite() {
                Err(ModelError::Axiom { axiom, residual })
            } else {
                Ok(())
            }
        };
        let g = &self.pairing;
        check(Axiom::PairingSymmetric, g.dist(&g.transpose()), g.max_abs())?;
        let lu = linalg::lu(g).map_err(|_| ModelError::Axiom { axiom: Axiom::PairingNondegenerate, residual: 0.0 })?;
        if lu.rcond_estimate() < 1e-12 {
            return Err(ModelError::Axiom { axiom: Axiom::PairingNondegenerate, residual: lu.rcond_estimate() });
        }
        check(Axiom::Unit, self.structure[0].dist(&CMat::identity(n)), 1.0)?;
        for a in &self.structure {
            let ga = g * a;
            check(Axiom::FrobeniusProperty, ga.dist(&ga.transpose()), ga.max_abs())?;
        }
        for i in 0..n {
            for j in 0..n {
                let (ai, aj) = (&self.structure[i], &self.structure[j]);
                check(Axiom::Commutativity, ai.commutator(aj).max_abs(), ai.max_abs() * aj.max_abs())?;
                // φ_i • φ_j = Σ_k c_ij^k φ_k, so A_i A_j must equal Σ_k c_ij^k A_k.
                let col = ai.column(j);
                let mut combo = CMat::zeros(n, n);
                for (k, &ck) in col.iter().enumerate() {
                    combo = &combo + &self.structure[k].scale(ck);
                }
                check(Axiom::Associativity, (ai * aj).dist(&combo), ai.max_abs() * aj.max_abs())?;
            }
            check(Axiom::EulerCommutes, self.euler.commutator(&self.structure[i]).max_abs(), self.euler.max_abs())?;
        }
        let th = self.theta_matrix();
        check(Axiom::GradingRelation, (&th.commutator(&self.rho) + &self.rho).max_abs(), self.rho.max_abs())?;
        check(Axiom::ThetaSkew, (&(g * &th) + &(&th.transpose() * g)).max_abs(), g.max_abs())?;
        self.nilpotency()?;
        if let Calibration::Table { terms, .. } = &self.calibration {
            if terms.iter().any(|s| s.rows() != n || !s.is_square()) {
                return Err(ModelError::Shape(alloc::format!("calibration terms must be {n}x{n}")));
            }
            if let Some(s0) = terms.first() {
                check(Axiom::CalibrationUnit, s0.dist(&CMat::identity(n)), 1.0)?;
            }
            let k = terms.len().saturating_sub(1);
            let r = symplectic_residual(self, terms, k)?;
            if r > 1e-10 {
                return Err(ModelError::Axiom { axiom: Axiom::CalibrationSymplectic, residual: r });
            }
            for r in recursion_residuals(self, terms) {
                if r > 1e-8 {
                    return Err(ModelError::Axiom { axiom: Axiom::CalibrationQde, residual: r });
                }
            }
        }
        Ok(())
    }

    /// `[S_0, …, S_K]`.
    pub fn calibration_series(&self, order: usize) -> Result<Vec<CMat>, ModelError> {
        let (mut terms, extend) = match &self.calibration {
            Calibration::Homogeneous => (vec![CMat::identity(self.dim)], true),
            Calibration::Table { terms, extend } => {
                let t = if terms.is_empty() { vec![CMat::identity(self.dim)] } else { terms.clone() };
                (t, *extend)
            }
        };
        if terms.len() > order {
            terms.truncate(order + 1);
            return Ok(terms);
        }
        if !extend {
            return Err(ModelError::CalibrationTooShort { have: terms.len(), need: order + 1 });
        }
        let th = &self.theta;
        let scale = self.euler.max_abs().max(1.0);
        for k in terms.len()..=order {
            let prev = &terms[k - 1];
            let rhs = &(&self.euler * prev) - &(prev * &self.rho);
            let mut sk = CMat::zeros(self.dim, self.dim);
            let size = rhs.max_abs().max(1.0);
            for a in 0..self.dim {
                for b in 0..self.dim {
                    let d = th[a] - th[b] + c(k as f64, 0.0);
                    if d.norm() > 1e-10 {
                        sk[(a, b)] = rhs[(a, b)] / d;
                    } else if rhs[(a, b)].norm() > 1e-9 * size * scale {
                        return Err(ModelError::RecursionBreakdown { order: k, residual: rhs[(a, b)].norm() });
                    }
                }
            }
            terms.push(sk);
        }
        Ok(terms)
    }
}

/// Largest entry of `Σ_{a+b=k} (-1)^a S_a^T S_b` over `1 ≤ k ≤ K` (adjoint with respect to the pairing).
pub fn symplectic_residual(model: &FrobeniusModel, s: &[CMat], order: usize) -> Result<f64, ModelError> {
    let adj: Vec<CMat> = s.iter().take(order + 1).map(|x| model.adjoint(x)).collect::<Result<_, _>>()?;
    let mut worst: f64 = 0.0;
    for k in 1..=order.min(s.len().saturating_sub(1)) {
        let mut tot = CMat::zeros(model.dim, model.dim);
        for a in 0..=k {
            let t = &adj[a] * &s[k - a];
            tot = if a % 2 == 0 { &tot + &t } else { &tot - &t };
        }
        worst = worst.max(tot.max_abs());
    }
    Ok(worst)
}

/// Residual of `(ad θ + k) S_k = E• S_{k-1} - S_{k-1} ρ` for each stored `k ≥ 1`.
fn recursion_residuals(model: &FrobeniusModel, s: &[CMat]) -> Vec<f64> {
    let th = model.theta_matrix();
    (1..s.len())
        .map(|k| {
            let lhs = &th.commutator(&s[k]) + &s[k].scale(c(k as f64, 0.0));
            let rhs = &(&model.euler * &s[k - 1]) - &(&s[k - 1] * &model.rho);
            lhs.dist(&rhs) / rhs.max_abs().max(1.0)
        })
        .collect()
}

/// Relative residual of `z ∂_z X + z^{-1} E• X - θ X = 0` for `X = S z^θ z^{-ρ}` truncated at `S_K`.
pub fn qde_residual(model: &FrobeniusModel, s: &[CMat], z: C64) -> f64 {
    let n = model.dim;
    let th = model.theta_matrix();
    let zi = z.inv();
    // z S'(z) + S θ - S ρ / z - θ S + E S / z, where S(z) = Σ S_k z^{-k}
    let mut sz = CMat::zeros(n, n);
    let mut zsp = CMat::zeros(n, n);
    let mut p = c(1.0, 0.0);
    for (k, sk) in s.iter().enumerate() {
        sz = &sz + &sk.scale(p);
        zsp = &zsp + &sk.scale(p * (-(k as f64)));
        p *= zi;
    }
    let res = &(&(&(&zsp + &(&sz * &th)) - &(&sz * &model.rho).scale(zi)) - &(&th * &sz)) + &(&model.euler * &sz).scale(zi);
    res.max_abs() / sz.max_abs().max(1.0)
}

/// Canonical coordinates and the normalized idempotent frame at the base point.
#[derive(Clone, Debug, PartialEq)]
pub struct SemisimpleData {
    pub u: Vec<C64>,
    pub delta: Vec<C64>,
    /// Column `i` is `√Δ_i ∂/∂u_i` in flat coordinates.
    pub psi: CMat,
    /// `order_tag[i]` is the eigen-solver index that became canonical index `i`.
    pub order_tag: Vec<usize>,
}

impl SemisimpleData {
    pub fn min_gap(&self) -> f64 {
        min_gap(&self.u)
    }

    pub fn max_abs_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

pub fn min_gap(u: &[C64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            g = g.min((u[i] - u[j]).norm());
        }
    }
    g
}

/// Eigen-decomposition of `E•` with canonical indices sorted by `(Re u, Im u)`.
pub fn canonical_data(model: &FrobeniusModel) -> Result<SemisimpleData, ModelError> {
    let n = model.dim;
    let (vals, vecs) = eig(&model.euler)?;
    let scale = vals.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let sep = min_gap(&vals);
    if sep <= 1e-8 * scale {
        return Err(ModelError::EigenvalueCollision { separation: sep });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        vals[a].re.partial_cmp(&vals[b].re).unwrap().then(vals[a].im.partial_cmp(&vals[b].im).unwrap())
    });
    let g = &model.pairing;
    let v_sorted = vecs.permute_columns(&order);
    // unit = Σ c_i v_i; the idempotent is c_i v_i
    let mut unit = vec![C64::zero(); n];
    unit[0] = c(1.0, 0.0);
    let coeffs = linalg::lu(&v_sorted)?.solve_vec(&unit);
    let mut psi = CMat::zeros(n, n);
    let mut delta = Vec::with_capacity(n);
    for i in 0..n {
        let e: Vec<C64> = v_sorted.column(i).iter().map(|&x| x * coeffs[i]).collect();
        let ge = linalg::dot(&e, &g.mul_vec(&e));
        if ge.norm() < 1e-12 * vnorm(&e).powi(2) * g.max_abs() {
            return Err(ModelError::IsotropicIdempotent { index: i });
        }
        delta.push(ge.inv());
        let mut col: Vec<C64> = e.iter().map(|&x| x / ge.sqrt()).collect();
        let big = col.iter().fold(C64::zero(), |m, &z| if z.norm() > m.norm() * (1.0 + 1e-12) { z } else { m });
        let arg = big.arg();
        if !(arg > -core::f64::consts::FRAC_PI_2 && arg <= core::f64::consts::FRAC_PI_2) {
            for x in col.iter_mut() {
                *x = -*x;
            }
        }
        psi.set_column(i, &col);
    }
    let u: Vec<C64> = order.iter().map(|&k| vals[k]).collect();
    let sd = SemisimpleData { u, delta, psi, order_tag: order };
    let (r1, r2) = semisimple_residuals(model, &sd);
    if r1 > 1e-10 || r2 > 1e-10 {
        return Err(ModelError::Numerics(NumericsError::Linalg(linalg::LinalgError::NoConvergence)));
    }
    Ok(sd)
}

/// `(‖E•Ψ - ΨU‖, ‖Ψ^t g Ψ - 1‖)`, both relative to the size of `E•`.
pub fn semisimple_residuals(model: &FrobeniusModel, sd: &SemisimpleData) -> (f64, f64) {
    let ep = &model.euler * &sd.psi;
    let pu = &sd.psi * &CMat::from_diag(&sd.u);
    let scale = model.euler.max_abs().max(1.0) * sd.psi.max_abs().max(1.0);
    let gram = &(&sd.psi.transpose() * &model.pairing) * &sd.psi;
    (ep.dist(&pu) / scale, gram.dist(&CMat::identity(model.dim)))
}

/// `Ψ^{-1} θ Ψ`, antisymmetric with zero diagonal.
pub fn theta_canonical(model: &FrobeniusModel, sd: &SemisimpleData) -> Result<CMat, ModelError> {
    Ok(linalg::solve(&sd.psi, &(&model.theta_matrix() * &sd.psi))?)
}

/// `[R_0, …, R_K]` with `Ψ R(z) e^{U/z}` the formal solution at `z = 0`.
///
/// Off-diagonal entries come from the commutator recursion; the diagonal of `R_k` from the
/// diagonal part of the next order of the z-equation, `k (R_k)_{aa} = Σ_{c≠a} Θ_{ac} (R_k)_{ca}`.
pub fn rmatrix_series(model: &FrobeniusModel, sd: &SemisimpleData, order: usize) -> Result<Vec<CMat>, ModelError> {
    let n = model.dim;
    let th = theta_canonical(model, sd)?;
    let u = &sd.u;
    let sep = min_gap(u);
    if sep <= 1e-8 * sd.max_abs_u().max(f64::MIN_POSITIVE) {
        return Err(ModelError::EigenvalueCollision { separation: sep });
    }
    let mut r = vec![CMat::identity(n)];
    for k in 1..=order {
        let rhs = &(&th - &CMat::identity(n).scale(c((k - 1) as f64, 0.0))) * &r[k - 1];
        let mut rk = CMat::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    rk[(a, b)] = rhs[(a, b)] / (u[a] - u[b]);
                }
            }
        }
        for a in 0..n {
            let mut s = C64::zero();
            for cc in 0..n {
                if cc != a {
                    s += th[(a, cc)] * rk[(cc, a)];
                }
            }
            rk[(a, a)] = s / (k as f64);
        }
        r.push(rk);
    }
    Ok(r)
}

/// Largest entry of `Σ_{a+b=k} (-1)^a R_a^t R_b`, `1 ≤ k ≤ K`.
pub fn rmatrix_symplectic_residual(r: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 1..r.len() {
        let mut tot = CMat::zeros(r[0].rows(), r[0].rows());
        for a in 0..=k {
            let t = &r[a].transpose() * &r[k - a];
            tot = if a % 2 == 0 { &tot + &t } else { &tot - &t };
        }
        worst = worst.max(tot.max_abs());
    }
    worst
}

/// Relative residual of the z-equation for `Ψ R(z) e^{U/z}` truncated at `R_K`.
pub fn rmatrix_qde_residual(model: &FrobeniusModel, sd: &SemisimpleData, r: &[CMat], z: C64) -> f64 {
    let n = model.dim;
    let mut rz = CMat::zeros(n, n);
    let mut drz = CMat::zeros(n, n);
    let mut p = c(1.0, 0.0);
    for (k, rk) in r.iter().enumerate() {
        rz = &rz + &rk.scale(p);
        if k + 1 < r.len() {
            drz = &drz + &r[k + 1].scale(p * ((k + 1) as f64));
        }
        p *= z;
    }
    let uu = CMat::from_diag(&sd.u);
    let zi = z.inv();
    // Ψ (R' - R U / z^2) - (θ/z - E/z^2) Ψ R
    let lhs = &sd.psi * &(&drz - &(&rz * &uu).scale(zi * zi));
    let a = &model.theta_matrix().scale(zi) - &model.euler.scale(zi * zi);
    let rhs = &a * &(&sd.psi * &rz);
    lhs.dist(&rhs) / (&sd.psi * &rz).max_abs().max(1.0) / (zi * zi).norm()
}

/// Coefficients of `z^{-k}` in `Σ_d q^d / Π_{j=1..d} (p + j z)^{n+1}` in the basis `p^a`,
/// expanded directly. Serves as an oracle for `S_k^t 1` on `P^n`.
pub fn j_series(n: usize, q: C64, order: usize) -> Vec<Vec<C64>> {
    let dim = n + 1;
    let mut out = vec![vec![C64::zero(); dim]; order + 1];
    let mut d = 0;
    while dim * d <= order {
        // poly in p (degree ≤ n) times w^{dim d}, where w = 1/z, then further powers of (p w)
        // coefficient table indexed by power of p (which equals the extra power of w)
        let mut poly = vec![0.0f64; dim];
        poly[0] = 1.0;
        for j in 1..=d {
            // (1 + p w / j)^{-(n+1)} / j^{n+1}
            let mut factor = vec![0.0f64; dim];
            let mut binom = 1.0f64;
            for t in 0..dim {
                factor[t] = binom / (j as f64).powi(t as i32) / (j as f64).powi(dim as i32);
                binom *= -((dim + t) as f64) / ((t + 1) as f64);
            }
            let mut next = vec![0.0f64; dim];
            for a in 0..dim {
                for b in 0..dim - a {
                    next[a + b] += poly[a] * factor[b];
                }
            }
            poly = next;
        }
        for (a, &v) in poly.iter().enumerate() {
            let k = dim * d + a;
            if k <= order {
                out[k][a] += q.powu(d as u32) * v;
            }
        }
        d += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p1_basic_data() {
        let m = qh_projective_space(1, c(1.0, 0.0));
        m.validate().unwrap();
        assert_eq!(m.structure[1], CMat::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert_eq!(m.euler, CMat::from_real_rows(&[&[0.0, 2.0], &[2.0, 0.0]]));
        let th = m.theta_matrix();
        assert_eq!(th.commutator(&m.rho), m.rho.scale(c(-1.0, 0.0)));
        let sd = canonical_data(&m).unwrap();
        assert!((sd.u[0] - c(-2.0, 0.0)).norm() < 1e-12 && (sd.u[1] - c(2.0, 0.0)).norm() < 1e-12);
        let (r1, r2) = semisimple_residuals(&m, &sd);
        assert!(r1 < 1e-12 && r2 < 1e-12);
    }

    #[test]
    fn p2_eigenvalues_are_cube_roots() {
        let m = qh_projective_space(2, c(1.0, 0.0));
        let sd = canonical_data(&m).unwrap();
        for u in &sd.u {
            assert!((u.norm() - 3.0).abs() < 1e-12);
            assert!((u * u * u - c(27.0, 0.0)).norm() < 1e-10);
        }
        let m = qh_projective_space(2, default_q(2));
        let sd = canonical_data(&m).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                assert!((sd.u[i].re - sd.u[j].re).abs() > 0.1);
            }
        }
    }

    #[test]
    fn quantum_serre_relation() {
        for n in 1..=8 {
            let q = c(0.3, 1.1);
            let m = qh_projective_space(n, q);
            let ap = &m.structure[1];
            assert_eq!(ap.pow(n + 1), CMat::identity(n + 1).scale(q));
            m.validate().unwrap();
        }
    }

    #[test]
    fn calibration_symplectic_and_first_order() {
        for n in 1..=4 {
            let m = qh_projective_space(n, default_q(n));
            let s = m.calibration_series(6).unwrap();
            assert_eq!(s[0], CMat::identity(n + 1));
            assert!(symplectic_residual(&m, &s, 6).unwrap() < 1e-10);
            // k = 1 of the symplectic sum: S_1 - S_1^T = 0
            let s1t = m.adjoint(&s[1]).unwrap();
            assert!((&s[1] - &s1t).max_abs() < 1e-14);
        }
    }

    #[test]
    fn calibration_matches_j_series() {
        for (n, q) in [(1, c(1.0, 0.0)), (2, default_q(2)), (3, default_q(3))] {
            let m = qh_projective_space(n, q);
            let s = m.calibration_series(8).unwrap();
            let j = j_series(n, q, 8);
            let mut one = vec![C64::zero(); n + 1];
            one[0] = c(1.0, 0.0);
            for k in 0..=8 {
                let v = m.adjoint(&s[k]).unwrap().mul_vec(&one);
                assert!(linalg::vmax_dist(&v, &j[k]) < 1e-12, "n={n} k={k}: {v:?} vs {:?}", j[k]);
            }
        }
    }

    #[test]
    fn qde_residual_small_on_ring() {
        let m = qh_projective_space(2, default_q(2));
        let s = m.calibration_series(60).unwrap();
        for k in 0..5 {
            let z = C64::from_polar(1.0 + 2.0 * k as f64, 0.7 * k as f64 + 0.2);
            assert!(qde_residual(&m, &s, z) < 1e-8);
        }
    }

    #[test]
    fn rmatrix_first_order_and_symplectic() {
        let m = qh_projective_space(1, c(1.0, 0.0));
        let sd = canonical_data(&m).unwrap();
        let r = rmatrix_series(&m, &sd, 6).unwrap();
        assert_eq!(r[0], CMat::identity(2));
        let th = theta_canonical(&m, &sd).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                if a != b {
                    let want = th[(a, b)] / (sd.u[a] - sd.u[b]);
                    assert!((r[1][(a, b)] - want).norm() < 1e-14);
                }
            }
        }
        assert!(rmatrix_symplectic_residual(&r) < 1e-10);
        for n in 2..=4 {
            let m = qh_projective_space(n, default_q(n));
            let sd = canonical_data(&m).unwrap();
            let r = rmatrix_series(&m, &sd, 8).unwrap();
            assert!(rmatrix_symplectic_residual(&r) < 1e-10);
        }
    }

    #[test]
    fn rmatrix_asymptotic_order() {
        let m = qh_projective_space(2, default_q(2));
        let sd = canonical_data(&m).unwrap();
        let r = rmatrix_series(&m, &sd, 4).unwrap();
        let ray = C64::from_polar(1.0, 0.3);
        let r1 = rmatrix_qde_residual(&m, &sd, &r, ray * 0.1);
        let r2 = rmatrix_qde_residual(&m, &sd, &r, ray * 0.05);
        assert!(r1 > 10.0 * r2, "{r1} vs {r2}");
    }

    #[test]
    fn rejects_broken_models() {
        let mut m = qh_projective_space(1, c(1.0, 0.0));
        m.pairing[(0, 1)] = c(2.0, 0.0);
        let e = m.validate().unwrap_err();
        assert!(alloc::format!("{e}").contains("(F1)"));
        let mut m = qh_projective_space(1, c(1.0, 0.0));
        m.structure[0][(0, 0)] = c(2.0, 0.0);
        let e = m.validate().unwrap_err();
        assert!(alloc::format!("{e}").contains("(F3)"));
    }
}
