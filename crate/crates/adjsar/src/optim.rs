//! Scalar root finding and maximization (Brent's methods).

use crate::error::{Error, Result};

/// Brent root of `f` on `[a, b]` with `f(a)·f(b) ≤ 0`, to absolute tolerance `xtol`.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() && !fb.is_finite() {
        return Err(Error::Root(format!("root not bracketed on [{a}, {b}] (f = {fa:e}, {fb:e})")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::Root(format!("Brent root did not converge in {max_iter} iterations")))
}

/// Brent maximization of `f` on `[a, b]`; returns `(argmax, max)`.
pub fn brent_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105;
    let mut g = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    let (mut a, mut b) = if a < b { (a, b) } else { (b, a) };
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = g(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = f64::EPSILON.sqrt() * 1e-3 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = g(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, -fx)
}

/// Safeguarded Newton for an increasing function `f` with derivative `df`,
/// bracketed by `[lo, hi]` with `f(lo) < 0 < f(hi)`.
pub fn newton_increasing<F, D>(mut f: F, mut df: D, lo: f64, hi: f64, x0: f64, ftol: f64, max_iter: usize) -> Result<(f64, usize)>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut x = x0.clamp(lo, hi);
    for it in 0..max_iter {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::Root(format!("non-finite function value at {x}")));
        }
        if fx.abs() <= ftol {
            return Ok((x, it));
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dx = df(x);
        let mut nx = x - fx / dx;
        if !(dx > 0.0) || !nx.is_finite() || nx <= lo || nx >= hi {
            nx = 0.5 * (lo + hi);
        }
        if (nx - x).abs() <= f64::EPSILON * x.abs().max(1e-300) && (hi - lo) <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            return Ok((nx, it));
        }
        x = nx;
    }
    Err(Error::Root(format!("Newton did not converge in {max_iter} iterations")))
}

/// `n` equally spaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Uniform grid on `[a, b]` refined geometrically towards both ends.
pub fn refined_grid(a: f64, b: f64, n: usize, levels: usize) -> Vec<f64> {
    let mut g = linspace(a, b, n);
    let step = (b - a) / (n.max(2) - 1) as f64;
    for j in 1..=levels {
        let off = step * 10f64.powi(-(j as i32));
        if off <= 0.0 {
            break;
        }
        g.push(a + off);
        g.push(b - off);
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_cubic() {
        let r = brent_root(|x| x * x * x - 2.0 * x - 5.0, 2.0, 3.0, 1e-14, 100).unwrap();
        assert!((r - 2.094_551_481_542_326_5).abs() < 1e-12);
    }

    #[test]
    fn root_requires_bracket() {
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-10, 50).is_err());
    }

    #[test]
    fn max_of_concave() {
        let (x, fx) = brent_max(|x| -(x - 0.3).powi(2) + 2.0, -1.0, 1.0, 1e-12, 200);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn newton_sqrt2() {
        let (x, _) = newton_increasing(|x| x * x - 2.0, |x| 2.0 * x, 0.0, 2.0, 1.0, 1e-14, 100).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grids() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let g = refined_grid(0.0, 1.0, 11, 3);
        assert_eq!(g.len(), 17);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
