//! λ-plane combinatorics: admissible and critical directions, the lexicographic order,
//! reference paths, braid moves and sequences of points on critical lines.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use crate::frobenius::min_gap;
use crate::numerics::ode::{arc_points, segment_distance};
use crate::numerics::{c, LogBranchPoint, C64};

/// Largest turning angle of one polyline segment on an arc.
pub const ARC_STEP: f64 = 5.0 * PI / 180.0;
/// Loops around `u_i` and path endpoints sit at this fraction of the minimal gap.
pub const LOOP_RADIUS_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum PathError {
    CoincidentPoints,
    InadmissibleDirection,
    NotCritical,
    IndexOutOfRange { index: usize, len: usize },
    BaseTooSmall { lambda0: f64, needed: f64 },
}

impl fmt::Display for PathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathError::CoincidentPoints => write!(f, "canonical coordinates are not pairwise distinct"),
            PathError::InadmissibleDirection => write!(f, "direction is parallel to some u_i - u_j"),
            PathError::NotCritical => write!(f, "direction is not critical"),
            PathError::IndexOutOfRange { index, len } => write!(f, "braid index {index} out of range 1..{len}"),
            PathError::BaseTooSmall { lambda0, needed } => {
                write!(f, "base value {lambda0} must exceed {needed}")
            }
        }
    }
}

impl core::error::Error for PathError {}

/// A unit direction together with a chosen logarithm, deformed continuously from `log i = πi/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    pub eta: C64,
    pub log_eta: C64,
}

impl Direction {
    /// `η = e^{iθ}` with `log η = iθ`.
    pub fn from_angle(theta: f64) -> Self {
        Direction { eta: C64::from_polar(1.0, theta), log_eta: c(0.0, theta) }
    }

    pub fn reference() -> Self {
        Self::from_angle(FRAC_PI_2)
    }

    /// The chosen argument `Im log η`.
    pub fn angle(&self) -> f64 {
        self.log_eta.im
    }

    pub fn rotated(&self, delta: f64) -> Self {
        Self::from_angle(self.angle() + delta)
    }

    /// `-η` reached by turning clockwise (`log η - πi`).
    pub fn opposite_cw(&self) -> Self {
        self.rotated(-PI)
    }

    /// `-η` reached by turning counter-clockwise (`log η + πi`).
    pub fn opposite_ccw(&self) -> Self {
        self.rotated(PI)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathPlan {
    pub waypoints: Vec<C64>,
    pub target: Option<usize>,
    /// `log(λ - u_i)` at the last waypoint.
    pub end_log_branch: Option<LogBranchPoint>,
    pub base_value: f64,
}

impl PathPlan {
    pub fn end(&self) -> C64 {
        *self.waypoints.last().expect("empty path")
    }

    /// The same polyline traversed backwards (no target).
    pub fn reversed(&self) -> PathPlan {
        let mut w = self.waypoints.clone();
        w.reverse();
        PathPlan { waypoints: w, target: None, end_log_branch: None, base_value: self.base_value }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistinguishedSystem {
    pub paths: Vec<PathPlan>,
    /// `permutation[k]` is the index of the canonical coordinate reached by path slot `k`.
    pub permutation: Vec<usize>,
    pub eta: Direction,
    pub lambda0: f64,
}

fn check_distinct(u: &[C64]) -> Result<f64, PathError> {
    let g = min_gap(u);
    let scale = u.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    if !(g > 1e-12 * scale) {
        return Err(PathError::CoincidentPoints);
    }
    Ok(g)
}

/// Argument reduced to the window `(-π/2, 3π/2]`.
fn window_arg(z: C64) -> f64 {
    let mut a = z.arg();
    if a <= -FRAC_PI_2 {
        a += 2.0 * PI;
    }
    a
}

/// The `2μ` critical directions, clockwise: `Arg η_0 ≤ 3π/2` is the largest argument in `(-π/2, 3π/2]`.
pub fn critical_directions(u: &[C64]) -> Result<Vec<Direction>, PathError> {
    check_distinct(u)?;
    let mut args: Vec<f64> = Vec::new();
    for i in 0..u.len() {
        for j in 0..u.len() {
            if i != j {
                let d = u[i] - u[j];
                args.push(window_arg(d / d.norm()));
            }
        }
    }
    args.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut out: Vec<f64> = Vec::new();
    for a in args {
        if out.last().map_or(true, |&l: &f64| (l - a).abs() > 1e-12) {
            out.push(a);
        }
    }
    Ok(out.into_iter().map(Direction::from_angle).collect())
}

/// Whether `η` is parallel to no difference `u_i - u_j` (angular tolerance `tol`).
pub fn is_admissible(u: &[C64], eta: &Direction, tol: f64) -> bool {
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            let d = u[i] - u[j];
            let s = (d * eta.eta.conj()).im / d.norm();
            if s.abs() < tol.sin() {
                return false;
            }
        }
    }
    true
}

/// Sort key: the component along `-iη`, which points to the right of `η`.
pub fn lex_key(u: C64, eta: &Direction) -> f64 {
    (u * (c(0.0, -1.0) * eta.eta).conj()).re
}

/// `order[k]` is the index of the `k`-th smallest point: `u_a < u_b` iff `u_b` lies to the right
/// of the line through `u_a` with direction `η`.
pub fn lexicographic_order(u: &[C64], eta: &Direction) -> Result<Vec<usize>, PathError> {
    check_distinct(u)?;
    if !is_admissible(u, eta, 1e-9) {
        return Err(PathError::InadmissibleDirection);
    }
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| lex_key(u[a], eta).partial_cmp(&lex_key(u[b], eta)).unwrap());
    Ok(order)
}

/// Point `u + sη` with `s > 0` on the circle of radius `r` about the origin.
fn ray_hit(ui: C64, eta: C64, r: f64) -> C64 {
    let b = (ui * eta.conj()).re;
    let cc = ui.norm_sqr() - r * r;
    let s = -b + (b * b - cc).sqrt();
    ui + eta * s
}

/// Default base value `λ° = 3 max|u_i|` (at least 1).
pub fn default_lambda0(u: &[C64]) -> f64 {
    (3.0 * u.iter().fold(0.0f64, |m, z| m.max(z.norm()))).max(1.0)
}

/// Reference paths for `η`: from `λ°` along the deformation arc to `λ°(η) = -iηλ°`, counter-clockwise
/// around to the exit point of the ray `u_i + sη`, then straight down the ray to `u_i`.
///
/// Arcs are run on nested radii so that the paths are disjoint; each path stops at
/// `u_i + r η` with `r` a tenth of the minimal gap. Slot `k` targets the `k`-th point in the
/// lexicographic order.
pub fn reference_system(u: &[C64], eta: &Direction, lambda0: f64) -> Result<DistinguishedSystem, PathError> {
    let gap = check_distinct(u)?;
    let rmax = u.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if lambda0 <= 1.1 * rmax {
        return Err(PathError::BaseTooSmall { lambda0, needed: 1.1 * rmax });
    }
    let order = lexicographic_order(u, eta)?;
    let n = u.len();
    let phi = eta.angle() - FRAC_PI_2;
    let base_dir = C64::from_polar(1.0, phi);
    // exit angle measured counter-clockwise from λ°(η), lifted around φ
    let psi_at = |i: usize, r: f64| -> f64 {
        let p = ray_hit(u[i], eta.eta, r);
        let mut a = (p / base_dir).arg();
        if a < 0.0 {
            a += 2.0 * PI;
        }
        phi + a
    };
    let r_in = rmax + 0.5 * (lambda0 - rmax);
    let psi0: Vec<f64> = (0..n).map(|i| psi_at(i, lambda0)).collect();
    let (mut upper, mut lower): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| psi0[i] >= 0.0);
    upper.sort_by(|&a, &b| psi0[b].partial_cmp(&psi0[a]).unwrap());
    lower.sort_by(|&a, &b| psi0[a].partial_cmp(&psi0[b]).unwrap());
    let mut radius = vec![0.0; n];
    for group in [&upper, &lower] {
        let m = group.len();
        for (k, &i) in group.iter().enumerate() {
            radius[i] = lambda0 - (lambda0 - r_in) * ((k + 1) as f64) / ((m + 1) as f64);
        }
    }
    let psi: Vec<f64> = (0..n).map(|i| psi_at(i, radius[i])).collect();
    let offset = |group: &Vec<usize>| -> f64 {
        let smallest = group.iter().map(|&i| psi[i].abs()).fold(f64::INFINITY, f64::min);
        (3.0 * PI / 180.0).min(0.5 * smallest)
    };
    let eps_up = offset(&upper);
    let eps_low = -offset(&lower);
    let r_end = LOOP_RADIUS_FRACTION * gap;
    let mut paths = Vec::with_capacity(n);
    for &i in &order {
        let eps = if psi0[i] >= 0.0 { eps_up } else { eps_low };
        let mut w = vec![c(lambda0, 0.0)];
        let mut arc = arc_points(c(0.0, 0.0), radius[i], eps, psi[i], ARC_STEP);
        w.append(&mut arc);
        let end = u[i] + eta.eta * r_end;
        w.push(end);
        paths.push(PathPlan {
            waypoints: w,
            target: Some(i),
            end_log_branch: Some(LogBranchPoint::new(end, c(r_end.ln(), 0.0) + eta.log_eta)),
            base_value: lambda0,
        });
    }
    Ok(DistinguishedSystem { paths, permutation: order, eta: *eta, lambda0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    L,
    R,
}

/// Loop from `λ°` along `path`, once around its target (counter-clockwise if `ccw`), and back.
pub fn loop_around(path: &PathPlan, u: &[C64], ccw: bool) -> PathPlan {
    let t = path.target.expect("loop needs a targeted path");
    let end = path.end();
    let r = (end - u[t]).norm();
    let a0 = (end - u[t]).arg();
    let a1 = if ccw { a0 + 2.0 * PI } else { a0 - 2.0 * PI };
    let mut w = path.waypoints.clone();
    let circle = arc_points(u[t], r, a0, a1, ARC_STEP);
    w.extend_from_slice(&circle[1..]);
    // close exactly on the entry point
    *w.last_mut().unwrap() = end;
    let mut back = path.waypoints.clone();
    back.reverse();
    w.extend_from_slice(&back[1..]);
    PathPlan { waypoints: w, target: None, end_log_branch: None, base_value: path.base_value }
}

/// Loop followed by `path`; the result keeps `path`'s target and end branch.
fn compose(lp: &PathPlan, path: &PathPlan) -> PathPlan {
    let mut w = lp.waypoints.clone();
    w.extend_from_slice(&path.waypoints[1..]);
    PathPlan { waypoints: w, target: path.target, end_log_branch: path.end_log_branch, base_value: path.base_value }
}

/// Elementary braid move on slots `i, i+1` (`i` is 1-based).
///
/// `L_i`: slot `i` becomes the loop around the old slot-`i` target followed by the old path `i+1`,
/// slot `i+1` becomes the old path `i`. `R_i` is its inverse.
pub fn braid_move(system: &DistinguishedSystem, u: &[C64], i: usize, side: Side) -> Result<DistinguishedSystem, PathError> {
    let n = system.paths.len();
    if i == 0 || i >= n {
        return Err(PathError::IndexOutOfRange { index: i, len: n.saturating_sub(1) });
    }
    let k = i - 1;
    let mut out = system.clone();
    let (a, b) = (&system.paths[k], &system.paths[k + 1]);
    match side {
        Side::L => {
            out.paths[k] = compose(&loop_around(a, u, true), b);
            out.paths[k + 1] = a.clone();
        }
        Side::R => {
            out.paths[k] = b.clone();
            out.paths[k + 1] = compose(&loop_around(b, u, false), a);
        }
    }
    out.permutation.swap(k, k + 1);
    Ok(out)
}

/// Groups of indices lying on common lines parallel to `η_ν`, each sorted with the farthest point
/// (largest `s` in `u_{j_a} = u_{j_k} + s_a η_ν`) first.
pub fn eta_sequences(u: &[C64], eta_nu: &Direction) -> Result<Vec<Vec<usize>>, PathError> {
    let gap = check_distinct(u)?;
    let e = eta_nu.eta;
    let tol = 1e-9 * gap.max(1.0);
    let offset = |z: C64| (z * e.conj()).im;
    let along = |z: C64| (z * e.conj()).re;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..u.len() {
        match groups.iter_mut().find(|g| (offset(u[g[0]]) - offset(u[i])).abs() < tol) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    if groups.iter().all(|g| g.len() == 1) {
        return Err(PathError::NotCritical);
    }
    for g in groups.iter_mut() {
        g.sort_by(|&a, &b| along(u[b]).partial_cmp(&along(u[a])).unwrap());
    }
    groups.sort_by_key(|g| g[0]);
    Ok(groups)
}

fn segments_cross(p1: C64, p2: C64, q1: C64, q2: C64, tol: f64) -> bool {
    let cross = |a: C64, b: C64| a.re * b.im - a.im * b.re;
    let r = p2 - p1;
    let s = q2 - q1;
    let den = cross(r, s);
    if den.abs() < 1e-300 {
        // parallel: treat as crossing only if overlapping collinear pieces
        let d = segment_distance(q1, p1, p2).min(segment_distance(q2, p1, p2));
        return d < tol && cross(q1 - p1, r).abs() < tol * r.norm();
    }
    let t = cross(q1 - p1, s) / den;
    let v = cross(q1 - p1, r) / den;
    t > -1e-12 && t < 1.0 + 1e-12 && v > -1e-12 && v < 1.0 + 1e-12
}

/// Whether paths are pairwise disjoint away from `λ°` and leave `λ°` in counter-clockwise order
/// (slot 1 closest to the upward tangent).
pub fn check_distinguished(system: &DistinguishedSystem) -> Result<(), &'static str> {
    let l0 = c(system.lambda0, 0.0);
    let tol = 1e-9 * system.lambda0;
    let n = system.paths.len();
    for a in 0..n {
        for b in a + 1..n {
            let pa = &system.paths[a].waypoints;
            let pb = &system.paths[b].waypoints;
            for (ia, sa) in pa.windows(2).enumerate() {
                for (ib, sb) in pb.windows(2).enumerate() {
                    if ia == 0 && ib == 0 {
                        // both leave λ°: they may only share that point
                        let da = sa[1] - l0;
                        let db = sb[1] - l0;
                        if (da / da.norm() - db / db.norm()).norm() < 1e-12 {
                            return Err("paths leave the base point in the same direction");
                        }
                        continue;
                    }
                    if segments_cross(sa[0], sa[1], sb[0], sb[1], tol) {
                        return Err("paths intersect");
                    }
                }
            }
        }
    }
    let exit: Vec<f64> = system
        .paths
        .iter()
        .map(|p| {
            let d = p.waypoints[1] - l0;
            let mut a = d.arg();
            if a < FRAC_PI_2 - 1e-12 {
                a += 2.0 * PI;
            }
            a
        })
        .collect();
    if exit.windows(2).any(|w| w[0] >= w[1]) {
        return Err("exit order at the base point is not counter-clockwise");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frobenius::{canonical_data, default_q, qh_projective_space};

    fn p2_u() -> Vec<C64> {
        canonical_data(&qh_projective_space(2, default_q(2))).unwrap().u
    }

    #[test]
    fn critical_directions_of_two_points() {
        let d = critical_directions(&[c(-2.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d[0].eta - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((d[1].eta - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn critical_directions_of_cube_roots() {
        let u: Vec<C64> = (0..3).map(|k| C64::from_polar(3.0, 2.0 * PI * k as f64 / 3.0)).collect();
        let d = critical_directions(&u).unwrap();
        assert_eq!(d.len(), 6);
        for (i, a) in u.iter().enumerate() {
            for (j, b) in u.iter().enumerate() {
                if i != j {
                    let e = (a - b) / (a - b).norm();
                    assert!(d.iter().any(|x| (x.eta - e).norm() < 1e-12));
                }
            }
        }
        let mu = d.len() / 2;
        for nu in 0..mu {
            assert!((d[nu + mu].eta + d[nu].eta).norm() < 1e-12);
        }
        for w in d.windows(2) {
            assert!(w[0].angle() > w[1].angle());
        }
    }

    #[test]
    fn lex_order_examples() {
        let o = lexicographic_order(&[c(2.0, 0.0), c(-2.0, 0.0)], &Direction::reference()).unwrap();
        assert_eq!(o, vec![1, 0]);
        // for η = 1 the right-hand side is -Im, so i precedes -i
        let o = lexicographic_order(&[c(0.0, 1.0), c(0.0, -1.0)], &Direction::from_angle(0.0)).unwrap();
        assert_eq!(o, vec![0, 1]);
        assert!(lexicographic_order(&[c(0.0, 1.0), c(0.0, -1.0)], &Direction::reference()).is_err());
    }

    /// Brute-force half-plane test: `u_b` right of the line through `u_a` with direction `η`.
    fn right_of(a: C64, b: C64, eta: C64) -> bool {
        let d = b - a;
        eta.re * d.im - eta.im * d.re < 0.0
    }

    #[test]
    fn lex_order_matches_half_plane_test() {
        let u = p2_u();
        for k in 0..24 {
            let eta = Direction::from_angle(0.1 + k as f64 * 0.27);
            if !is_admissible(&u, &eta, 1e-6) {
                continue;
            }
            let o = lexicographic_order(&u, &eta).unwrap();
            for x in 0..3 {
                for y in x + 1..3 {
                    assert!(right_of(u[o[x]], u[o[y]], eta.eta));
                }
            }
            let mut rev = lexicographic_order(&u, &eta.opposite_ccw()).unwrap();
            rev.reverse();
            assert_eq!(rev, o);
        }
    }

    #[test]
    fn reference_systems_are_distinguished() {
        let u1 = vec![c(-2.0, 0.0), c(2.0, 0.0)];
        let s = reference_system(&u1, &Direction::reference(), 6.0).unwrap();
        assert_eq!(s.paths.len(), 2);
        check_distinguished(&s).unwrap();
        assert_eq!(s.permutation, vec![0, 1]);
        let u = p2_u();
        for k in 0..40 {
            let eta = Direction::from_angle(-1.4 + k as f64 * 0.113);
            if !is_admissible(&u, &eta, 0.02) {
                continue;
            }
            let s = reference_system(&u, &eta, default_lambda0(&u)).unwrap();
            check_distinguished(&s).unwrap_or_else(|e| panic!("angle {}: {e}", eta.angle()));
            for p in &s.paths {
                assert_eq!(p.waypoints[0], c(s.lambda0, 0.0));
                let b = p.end_log_branch.unwrap();
                assert!(((b.log_value.exp() + u[p.target.unwrap()]) - b.lambda).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_direction_has_no_deformation_arc() {
        let u1 = vec![c(-2.0, 0.0), c(2.0, 0.0)];
        let s = reference_system(&u1, &Direction::reference(), 6.0).unwrap();
        // the arcs start at angle ±ε next to λ°(i) = λ°
        for p in &s.paths {
            assert!(p.waypoints[1].arg().abs() <= 3.0 * PI / 180.0 + 1e-12);
        }
    }

    #[test]
    fn braid_move_on_two_points() {
        let u1 = vec![c(-2.0, 0.0), c(2.0, 0.0)];
        let s = reference_system(&u1, &Direction::reference(), 6.0).unwrap();
        let l = braid_move(&s, &u1, 1, Side::L).unwrap();
        assert_eq!(l.permutation, vec![1, 0]);
        assert_eq!(l.paths[0].target, Some(1));
        assert_eq!(l.paths[1], s.paths[0]);
        assert!(l.paths[0].waypoints.len() > s.paths[0].waypoints.len() + s.paths[1].waypoints.len());
        assert!(braid_move(&s, &u1, 2, Side::L).is_err());
        assert!(braid_move(&s, &u1, 0, Side::R).is_err());
    }

    #[test]
    fn eta_sequence_examples() {
        let u1 = vec![c(-2.0, 0.0), c(2.0, 0.0)];
        assert_eq!(eta_sequences(&u1, &Direction::from_angle(0.0)).unwrap(), vec![vec![1, 0]]);
        let u = p2_u();
        for d in critical_directions(&u).unwrap() {
            let seqs = eta_sequences(&u, &d).unwrap();
            let mut lens: Vec<usize> = seqs.iter().map(|g| g.len()).collect();
            lens.sort();
            assert_eq!(lens, vec![1, 2]);
        }
        assert_eq!(eta_sequences(&u, &Direction::from_angle(0.123)), Err(PathError::NotCritical));
    }
}
