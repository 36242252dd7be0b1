//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEPTH: u32 = 20;

/// Integrates `f` over `[lo, hi]` to absolute tolerance `tol`.
///
/// Fails when some panel still misses its share of the tolerance after
/// `max_depth` bisections.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64> {
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = simpson(lo, hi, flo, fmid, fhi);
    recurse(f, lo, hi, flo, fmid, fhi, whole, tol, max_depth)
        .ok_or(Error::Quadrature { lo, hi, tol })
}

fn simpson(lo: f64, hi: f64, flo: f64, fmid: f64, fhi: f64) -> f64 {
    (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let mid = 0.5 * (lo + hi);
    let (lm, rm) = (0.5 * (lo + mid), 0.5 * (mid + hi));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(lo, mid, flo, flm, fmid);
    let right = simpson(mid, hi, fmid, frm, fhi);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 || !delta.is_finite() {
        return None;
    }
    let l = recurse(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1)?;
    let r = recurse(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1)?;
    Some(l + r)
}
