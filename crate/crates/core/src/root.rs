//! Scalar root bracketing and refinement helpers used across the crate.
//!
//! Everything here works on plain closures; no state is kept between calls.

/// Bisect `f` on `[lo, hi]` assuming `f(lo)` and `f(hi)` have opposite signs.
///
/// Returns the midpoint of the final bracket once its width is below `xtol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return hi;
    }
    debug_assert!(
        flo.signum() != fhi.signum(),
        "bisect requires a sign change: f({lo})={flo}, f({hi})={fhi}"
    );
    for _ in 0..200 {
        if hi - lo <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest `x` in `[lo, hi]` with `pred(x)` true, assuming `pred` is
/// monotone false→true. Returns `None` when `pred(hi)` is false; returns
/// `lo` when already true there.
pub fn first_true<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64, xtol: f64) -> Option<f64> {
    if pred(lo) {
        return Some(lo);
    }
    if !pred(hi) {
        return None;
    }
    for _ in 0..200 {
        if hi - lo <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Brent's method: root of `f` inside a sign-change bracket `[a, b]`.
///
/// Combines bisection with inverse quadratic interpolation / secant steps;
/// superlinear on smooth functions, never worse than bisection.
pub fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(
        fa.signum() != fb.signum(),
        "brent requires a sign change: f({a})={fa}, f({b})={fb}"
    );
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..200 {
        if fb == 0.0 || (b - a).abs() <= xtol {
            return b;
        }
        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let (lo, hi) = if lo < b { (lo, b) } else { (b, lo) };
        let cond = !(lo < s && s < hi)
            || (mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!mflag && (s - b).abs() >= (c - d).abs() / 2.0)
            || (mflag && (b - c).abs() < xtol)
            || (!mflag && (c - d).abs() < xtol);
        if cond {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    b
}

/// Scan `f` on `n` evenly spaced points over `[lo, hi]` and return every
/// bracket `(x_i, x_{i+1})` across which the sign changes (zeros included).
pub fn scan_sign_changes<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2);
    let mut brackets = Vec::new();
    let step = (hi - lo) / (n - 1) as f64;
    let mut prev_x = lo;
    let mut prev_f = f(lo);
    for i in 1..n {
        let x = lo + step * i as f64;
        let fx = f(x);
        if prev_f == 0.0 || prev_f.signum() != fx.signum() {
            brackets.push((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    brackets
}

/// Golden-section search for the maximizer of `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if b - a <= xtol {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Invert a monotone non-decreasing CDF-like function: smallest `x` with
/// `cdf(x) >= p`, refined by safeguarded Newton when a derivative is
/// supplied, falling back to bisection on the predicate.
pub fn invert_cdf<C, D>(cdf: C, pdf: Option<D>, lo: f64, hi: f64, p: f64, ptol: f64) -> f64
where
    C: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut a = lo;
    let mut b = hi;
    if cdf(a) >= p {
        return a;
    }
    if cdf(b) < p {
        return b;
    }
    let mut x = 0.5 * (a + b);
    if let Some(pdf) = pdf {
        for _ in 0..80 {
            let c = cdf(x);
            if (c - p).abs() <= ptol {
                break;
            }
            if c >= p {
                b = x;
            } else {
                a = x;
            }
            let d = pdf(x);
            let newton = if d > 0.0 { x - (c - p) / d } else { f64::NAN };
            x = if newton.is_finite() && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= f64::EPSILON * (1.0 + b.abs() + a.abs()) {
                break;
            }
        }
        if pdf(x) > 1e-12 {
            return x;
        }
        // Zero density at the solution: a flat CDF stretch. Walk the
        // bracket left so the smallest admissible x is returned.
        return first_true(|t| cdf(t) >= p - ptol, lo, x.max(a), 1e-13 * (1.0 + x.abs()))
            .unwrap_or(x);
    }
    first_true(|t| cdf(t) >= p, lo, hi, 1e-13 * (1.0 + hi.abs() + lo.abs())).unwrap_or(x)
}
