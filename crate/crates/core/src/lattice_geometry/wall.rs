//! Wall-thickness probing along surface normals.

use crate::scalar::Scalar;
use crate::tpms_field::{Point3, TpmsField};

/// Newton-projects `start` onto the zero level set of `F`.
///
/// Returns `None` if the iteration hits a vanishing gradient or fails to converge.
pub fn project_to_surface<T: Scalar>(field: &TpmsField<T>, start: Point3<T>) -> Option<Point3<T>> {
    let mut p = start;
    let tol = T::epsilon().sqrt() * T::lit(1e-2);
    for _ in 0..50 {
        let (f, g) = field.value_and_gradient(&p);
        let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        if g2 < T::lit(1e-12) {
            return None;
        }
        if f.abs() < tol {
            return Some(p);
        }
        let step = f / g2;
        for k in 0..3 {
            p[k] = p[k] - step * g[k];
        }
    }
    None
}

/// Thickness of the solid wall through `surface_point`, measured along the unit
/// normal in both directions until the membership margin turns positive.
///
/// Returns `None` when the probe stays inside the wall for `max_reach` on either side.
pub fn measure_wall_thickness<T: Scalar>(field: &TpmsField<T>, surface_point: Point3<T>, max_reach: T) -> Option<T> {
    let g = field.gradient(&surface_point);
    let len = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if len <= T::zero() {
        return None;
    }
    let n = g.map(|c| c / len);
    let at = |s: T| -> Point3<T> {
        [
            surface_point[0] + s * n[0],
            surface_point[1] + s * n[1],
            surface_point[2] + s * n[2],
        ]
    };
    let mut total = T::zero();
    for dir in [T::one(), -T::one()] {
        let steps = 400;
        let ds = max_reach / T::from_usize_lossy(steps);
        let mut inside = T::zero();
        let mut found = None;
        for s in 1..=steps {
            let d = ds * T::from_usize_lossy(s);
            if field.margin(&at(dir * d)) > T::zero() {
                found = Some(d);
                break;
            }
            inside = d;
        }
        let mut hi = found?;
        let mut lo = inside;
        for _ in 0..60 {
            let mid = (lo + hi) * T::lit(0.5);
            if field.margin(&at(dir * mid)) > T::zero() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        total = total + (lo + hi) * T::lit(0.5);
    }
    Some(total)
}
