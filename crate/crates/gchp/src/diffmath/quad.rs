//! Adaptive Simpson quadrature.

use crate::scalar::Real;

const MAX_DEPTH: usize = 60;

/// Integrates `f` over `[a, b]` to the requested absolute tolerance.
///
/// Adaptive Simpson with Richardson correction; exact for cubics, so
/// constant and polynomial integrands converge immediately.
pub fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let half = T::of(0.5);
    let c = half * (a + b);
    let fa = f(a);
    let fb = f(b);
    let fc = f(c);
    let whole = simpson(a, b, fa, fc, fb);
    recurse(f, a, b, c, fa, fb, fc, whole, tol, MAX_DEPTH)
}

fn simpson<T: Real>(a: T, b: T, fa: T, fc: T, fb: T) -> T {
    (b - a) / T::of(6.0) * (fa + T::of(4.0) * fc + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    c: T,
    fa: T,
    fb: T,
    fc: T,
    whole: T,
    tol: T,
    depth: usize,
) -> T {
    let half = T::of(0.5);
    let d = half * (a + c);
    let e = half * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = simpson(a, c, fa, fd, fc);
    let right = simpson(c, b, fc, fe, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::of(15.0) * tol {
        return left + right + delta / T::of(15.0);
    }
    let half_tol = half * tol;
    recurse(f, a, c, d, fa, fc, fd, left, half_tol, depth - 1)
        + recurse(f, c, b, e, fc, fb, fe, right, half_tol, depth - 1)
}
