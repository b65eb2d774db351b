//! Scalar kernels: bracketed root finding and adaptive quadrature.
//!
//! Everything here is a pure function of its inputs. The root finder is
//! Brent's method (bisection safeguarding inverse quadratic / secant steps).
//! Quadrature is a globally adaptive 15-point Gauss–Kronrod scheme with the
//! QUADPACK error heuristic; the semi-infinite variant maps `[a, ∞)` onto
//! `(0, 1]` with `x = a + (1 - t) / t` before integrating.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("iteration limit reached (best estimate {estimate}, error {error})")]
    MaxIterExceeded { estimate: f64, error: f64 },
    #[error("integrand does not decay on [{from}, inf)")]
    Divergent { from: f64 },
    #[error("function returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(&'static str),
}

/// Stopping rule shared by the root finder and the integrators.
///
/// For root finding `max_iter` caps function evaluations after the bracket
/// check; for quadrature it caps the number of interval bisections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self, NumericsError> {
        if !(abs_tol > 0.0) || !abs_tol.is_finite() {
            return Err(NumericsError::InvalidTolerance("abs_tol must be positive"));
        }
        if !(rel_tol >= 0.0) || !rel_tol.is_finite() {
            return Err(NumericsError::InvalidTolerance("rel_tol must be non-negative"));
        }
        if max_iter == 0 {
            return Err(NumericsError::InvalidTolerance("max_iter must be at least 1"));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_iter,
        })
    }

    /// Same relative and absolute tolerance, default iteration cap.
    pub fn with_abs(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    fn target(&self, magnitude: f64) -> f64 {
        self.abs_tol + self.rel_tol * magnitude.abs()
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 200,
        }
    }
}

/// Finds a root of `f` inside `[lo, hi]` with Brent's method.
///
/// The endpoints must have strictly opposite signs. The returned point lies
/// in `[lo, hi]` and the final bracket around it is no wider than
/// `abs_tol + rel_tol * |x|` (up to a few ulps).
pub fn find_root_bracketed<F>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(NumericsError::InvalidInterval { a: lo, b: hi });
    }
    let eval = |x: f64| {
        let y = f(x);
        if y.is_nan() {
            Err(NumericsError::NonFinite { x })
        } else {
            Ok(y)
        }
    };

    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (eval(a)?, eval(b)?);
    if fa == 0.0 || fb == 0.0 || (fa > 0.0) == (fb > 0.0) {
        return Err(NumericsError::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let (mut c, mut fc) = (b, fb);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.target(b);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = eval(b)?;
    }
    Err(NumericsError::MaxIterExceeded {
        estimate: b,
        error: (c - b).abs(),
    })
}

// 15-point Kronrod abscissae and weights with the embedded 7-point Gauss
// weights (QUADPACK qk15). Abscissae are listed from the right end inwards.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F>(f: &F, a: f64, b: f64) -> Result<Segment, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let eval = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(NumericsError::NonFinite { x })
        }
    };
    let centr = 0.5 * (a + b);
    let hlgth = 0.5 * (b - a);
    let fc = eval(centr)?;
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let absc = hlgth * XGK[j];
        let f1 = eval(centr - absc)?;
        let f2 = eval(centr + absc)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * hlgth;
    resabs *= hlgth.abs();
    resasc *= hlgth.abs();
    let mut error = ((resk - resg) * hlgth).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Segment { a, b, value, error })
}

/// Integrates `f` over `[a, b]` by globally adaptive Gauss–Kronrod bisection.
///
/// Jump discontinuities are usually detected, but a jump that both rules
/// happen to integrate alike can slip through; split the range at known
/// jumps instead.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    adaptive(&f, a, b, tol)
}

fn adaptive<F>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let first = kronrod15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    let (left, right) = split(f, &first)?;
    let mut total = left.value + right.value;
    let mut total_err = left.error + right.error;
    heap.push(left);
    heap.push(right);
    // Segments too narrow to split are parked here; their error still counts.
    let mut settled_value = 0.0;
    let mut settled_err = 0.0;

    for _ in 0..tol.max_iter {
        if total_err <= tol.target(total) {
            return Ok(total);
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e3 * f64::EPSILON * mid.abs() {
            settled_value += worst.value;
            settled_err += worst.error;
            continue;
        }
        let (left, right) = split(f, &worst)?;
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed accumulated cancellation from the incremental updates.
    let total = heap.iter().map(|s| s.value).sum::<f64>() + settled_value;
    let err = heap.iter().map(|s| s.error).sum::<f64>() + settled_err;
    if err <= tol.target(total) {
        return Ok(total);
    }
    Err(NumericsError::MaxIterExceeded {
        estimate: total,
        error: err,
    })
}

// Bisects a segment. When the children disagree with the parent by more
// than the parent's own error estimate (a jump hiding between Kronrod
// nodes), that disagreement becomes the children's error floor.
fn split<F>(f: &F, parent: &Segment) -> Result<(Segment, Segment), NumericsError>
where
    F: Fn(f64) -> f64,
{
    let mid = 0.5 * (parent.a + parent.b);
    let mut left = kronrod15(f, parent.a, mid)?;
    let mut right = kronrod15(f, mid, parent.b)?;
    let gap = (left.value + right.value - parent.value).abs();
    if gap > parent.error {
        left.error = left.error.max(0.5 * gap);
        right.error = right.error.max(0.5 * gap);
    }
    Ok((left, right))
}

/// Integrates `f` over `[a, ∞)`.
///
/// The integrand is first probed at geometrically spaced points beyond `a`;
/// if `x·|f(x)|` fails to fall off, the integral is reported as divergent.
/// The probe is a heuristic: it rejects obvious non-decay (constants, `1/x`)
/// but cannot certify convergence.
pub fn integrate_semi_infinite<F>(f: F, a: f64, tol: Tolerance) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if !a.is_finite() {
        return Err(NumericsError::InvalidInterval { a, b: f64::INFINITY });
    }
    probe_decay(&f, a)?;
    let mapped = |t: f64| {
        let x = a + (1.0 - t) / t;
        if x.is_infinite() {
            return 0.0;
        }
        let y = f(x);
        if y == 0.0 {
            0.0
        } else {
            y / (t * t)
        }
    };
    adaptive(&mapped, 0.0, 1.0, tol)
}

fn probe_decay<F>(f: &F, a: f64) -> Result<(), NumericsError>
where
    F: Fn(f64) -> f64,
{
    let scale = a.abs().max(1.0);
    let mut peak: f64 = 0.0;
    let mut last = 0.0;
    for k in 0..=40 {
        let x = a + scale * 2f64.powi(k);
        let y = f(x);
        if !y.is_finite() {
            return Err(NumericsError::Divergent { from: a });
        }
        last = x * y.abs();
        peak = peak.max(last);
    }
    if peak > 0.0 && last > 0.5 * peak {
        return Err(NumericsError::Divergent { from: a });
    }
    Ok(())
}
