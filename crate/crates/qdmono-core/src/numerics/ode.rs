//! Adaptive Dormand–Prince 5(4) transport of matrix solutions of `y' = A(λ) y` along polylines.

use alloc::vec::Vec;

use super::linalg::CMat;
use super::{NumericsError, C64};

#[derive(Clone, Debug)]
pub struct OdeOptions {
    /// Local relative error per step.
    pub tol: f64,
    /// Minimum allowed distance from the path to any singular point.
    pub min_clearance: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { tol: 1e-10, min_clearance: 0.0, max_steps: 2_000_000 }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin(y: &CMat, terms: &[(f64, &CMat)], h: C64) -> CMat {
    let mut r = y.clone();
    for &(w, k) in terms {
        if w != 0.0 {
            r = &r + &k.scale(h * w);
        }
    }
    r
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a) * d.conj()).re / l2;
    let t = t.clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Transports `y0` along the polyline `path` for `y' = rhs(λ) y`.
///
/// `singular` lists the poles of `rhs`; steps are capped at half the distance to the nearest one.
pub fn continue_linear_ode<F>(
    mut rhs: F,
    y0: &CMat,
    path: &[C64],
    singular: &[C64],
    opts: &OdeOptions,
) -> Result<CMat, NumericsError>
where
    F: FnMut(C64) -> CMat,
{
    let mut y = y0.clone();
    let mut steps = 0usize;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        for &u in singular {
            let d = segment_distance(u, a, b);
            if d < opts.min_clearance {
                return Err(NumericsError::Clearance { point: u, distance: d });
            }
        }
        let len = (b - a).norm();
        if len == 0.0 {
            continue;
        }
        let dir = (b - a) / len;
        let cap = |s: f64| -> f64 {
            let p = a + dir * s;
            singular.iter().map(|&u| 0.5 * (p - u).norm()).fold(f64::INFINITY, f64::min)
        };
        let mut s = 0.0;
        let mut h = len.min(cap(0.0));
        let mut k1 = rhs(a) * &y;
        while s < len {
            steps += 1;
            if steps > opts.max_steps {
                return Err(NumericsError::StepUnderflow { at: a + dir * s });
            }
            h = h.min(len - s).min(cap(s));
            if h < 1e-14 * (len + a.norm()) {
                return Err(NumericsError::StepUnderflow { at: a + dir * s });
            }
            let hc = dir * h;
            let p = |f: f64| a + dir * (s + f * h);
            let k2 = rhs(p(1.0 / 5.0)) * lin(&y, &[(A21, &k1)], hc);
            let k3 = rhs(p(3.0 / 10.0)) * lin(&y, &[(A31, &k1), (A32, &k2)], hc);
            let k4 = rhs(p(4.0 / 5.0)) * lin(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hc);
            let k5 = rhs(p(8.0 / 9.0)) * lin(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hc);
            let k6 = rhs(p(1.0)) * lin(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hc);
            let y5 = lin(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], hc);
            let k7 = rhs(p(1.0)) * &y5;
            let err = lin(
                &CMat::zeros(y.rows(), y.cols()),
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
                hc,
            );
            // per-column relative error
            let mut ratio: f64 = 0.0;
            for j in 0..y.cols() {
                let mut scale: f64 = 0.0;
                let mut e: f64 = 0.0;
                for i in 0..y.rows() {
                    scale = scale.max(y[(i, j)].norm()).max(y5[(i, j)].norm());
                    e = e.max(err[(i, j)].norm());
                }
                let scale = scale.max(1e-300);
                ratio = ratio.max(e / (opts.tol * scale));
            }
            if !ratio.is_finite() {
                return Err(NumericsError::NonFinite);
            }
            if ratio <= 1.0 {
                s += h;
                y = y5;
                k1 = k7;
            }
            let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        }
    }
    if !y.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    Ok(y)
}

/// Polyline approximating the arc `center + r e^{iφ}` for φ from `phi0` to `phi1`, turning ≤ `max_step` per segment.
/// The starting point is included.
pub fn arc_points(center: C64, r: f64, phi0: f64, phi1: f64, max_step: f64) -> Vec<C64> {
    let n = (((phi1 - phi0).abs() / max_step).ceil() as usize).max(1);
    (0..=n)
        .map(|k| {
            let phi = phi0 + (phi1 - phi0) * (k as f64) / (n as f64);
            center + C64::from_polar(r, phi)
        })
        .collect()
}
