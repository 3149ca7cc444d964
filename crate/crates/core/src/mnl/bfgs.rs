//! Quasi-Newton minimization with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when the gradient max-norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the relative objective change of an accepted step falls below
    /// this; a stall guard, the gradient test is the main criterion.
    pub relative_tolerance: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iterations: 1000,
            gradient_tolerance: 1e-6,
            relative_tolerance: 1e-15,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

struct Counter<'a, F> {
    f: &'a mut F,
    calls: usize,
}

impl<F: FnMut(&[f64]) -> (f64, Vec<f64>)> Counter<'_, F> {
    fn eval(&mut self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self.calls += 1;
        let (v, g) = (self.f)(x.as_slice());
        (v, DVector::from_vec(g))
    }
}

/// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), clamped
/// to the interior of the bracket.
fn interpolate(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut t = if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
    } else {
        f64::NAN
    };
    let margin = 0.1 * (hi - lo);
    if !t.is_finite() || t < lo + margin || t > hi - margin {
        t = 0.5 * (lo + hi);
    }
    t
}

/// Step length satisfying the strong Wolfe conditions, or `None`.
fn line_search<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(
    f: &mut Counter<'_, F>,
    x: &DVector<f64>,
    fx: f64,
    gx: &DVector<f64>,
    dir: &DVector<f64>,
    initial: f64,
) -> Option<(f64, f64, DVector<f64>)> {
    let d0 = gx.dot(dir);
    if d0 >= 0.0 {
        return None;
    }
    let phi = |f: &mut Counter<'_, F>, a: f64| {
        let (v, g) = f.eval(&(x + dir * a));
        let d = g.dot(dir);
        (v, d, g)
    };
    let mut a_prev = 0.0;
    let (mut f_prev, mut d_prev) = (fx, d0);
    let mut a = initial;
    for i in 0..40 {
        let (fa, da, ga) = phi(f, a);
        if !fa.is_finite() {
            // Backtrack out of overflow.
            a = 0.5 * (a_prev + a);
            continue;
        }
        if fa > fx + C1 * a * d0 || (i > 0 && fa >= f_prev) {
            return zoom(f, x, fx, d0, dir, (a_prev, f_prev, d_prev), (a, fa, da));
        }
        if da.abs() <= -C2 * d0 {
            return Some((a, fa, ga));
        }
        if da >= 0.0 {
            return zoom(f, x, fx, d0, dir, (a, fa, da), (a_prev, f_prev, d_prev));
        }
        a_prev = a;
        f_prev = fa;
        d_prev = da;
        a *= 2.0;
    }
    None
}

fn zoom<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(
    f: &mut Counter<'_, F>,
    x: &DVector<f64>,
    fx: f64,
    d0: f64,
    dir: &DVector<f64>,
    mut lo: (f64, f64, f64),
    mut hi: (f64, f64, f64),
) -> Option<(f64, f64, DVector<f64>)> {
    let mut best: Option<(f64, f64, DVector<f64>)> = None;
    for _ in 0..60 {
        let a = interpolate(lo.0, lo.1, lo.2, hi.0, hi.1, hi.2);
        let (fa, g) = f.eval(&(x + dir * a));
        let da = g.dot(dir);
        if fa <= fx + C1 * a * d0 && best.as_ref().is_none_or(|b| fa < b.1) {
            best = Some((a, fa, g.clone()));
        }
        if !fa.is_finite() || fa > fx + C1 * a * d0 || fa >= lo.1 {
            hi = (a, fa, da);
        } else {
            if da.abs() <= -C2 * d0 {
                return Some((a, fa, g));
            }
            if da * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (a, fa, da);
        }
        if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1.0) {
            break;
        }
    }
    // Accept a sufficient-decrease point even if curvature was not reached.
    best
}

/// Minimize `f` from `x0`; `f` returns the value and gradient.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, options: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut counter = Counter { f: &mut f, calls: 0 };
    let mut x = DVector::from_vec(x0);
    let (mut fx, mut g) = counter.eval(&x);
    let mut trace = vec![fx];
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut converged = n == 0 || g.amax() < options.gradient_tolerance;
    let mut iterations = 0;

    while !converged && iterations < options.max_iterations {
        let mut dir = -(&h * &g);
        if dir.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -g.clone();
        }
        let initial = if first { (1.0 / g.amax()).min(1.0) } else { 1.0 };
        let Some((alpha, f_new, g_new)) = line_search(&mut counter, &x, fx, &g, &dir, initial) else {
            if first {
                break;
            }
            // Restart from steepest descent once before giving up.
            h = DMatrix::identity(n, n);
            first = true;
            iterations += 1;
            continue;
        };
        let s = &dir * alpha;
        let y = &g_new - &g;
        x += &s;
        let change = (fx - f_new).abs() / fx.abs().max(1e-300);
        fx = f_new;
        g = g_new;
        trace.push(fx);
        iterations += 1;

        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H += ρ²(yᵀHy)ssᵀ + ρ ssᵀ − ρ(Hy sᵀ + s yᵀH)
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        first = false;

        if g.amax() < options.gradient_tolerance || change < options.relative_tolerance {
            converged = true;
        }
    }
    BfgsResult {
        x: x.as_slice().to_vec(),
        value: fx,
        gradient: g.as_slice().to_vec(),
        iterations,
        converged,
        trace,
        evaluations: counter.calls,
    }
}
