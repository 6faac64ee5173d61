//! Gauss–Legendre rules and adaptive interval quadrature.

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, dp)
}

/// Fixed rule mapped to [a, b].
pub fn integrate_fixed<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Adaptive bisection with a 10-point Gauss rule; `breaks` are interior
/// points where the integrand is known to peak or kink.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, breaks: &[f64], rel_tol: f64, abs_tol: f64) -> f64 {
    let rule = gauss_legendre(10);
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    cuts.extend(inner);
    cuts.push(b);
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let whole = integrate_fixed(&mut f, seg[0], seg[1], &rule);
        total += refine(&mut f, seg[0], seg[1], whole, &rule, rel_tol, abs_tol / (cuts.len() as f64), 0);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn refine<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    rule: &(Vec<f64>, Vec<f64>),
    rel_tol: f64,
    abs_tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = integrate_fixed(&mut *f, a, m, rule);
    let right = integrate_fixed(&mut *f, m, b, rule);
    let both = left + right;
    let err = (both - whole).abs();
    if depth >= 40 || err <= abs_tol.max(rel_tol * both.abs()) {
        return both;
    }
    refine(f, a, m, left, rule, rel_tol, 0.5 * abs_tol, depth + 1)
        + refine(f, m, b, right, rule, rel_tol, 0.5 * abs_tol, depth + 1)
}

/// Iterated adaptive integration over a box; `breaks[k]` are the break
/// points along axis k.
pub fn integrate_box(
    lo: &[f64],
    hi: &[f64],
    breaks: &[Vec<f64>],
    f: &mut dyn FnMut(&[f64]) -> f64,
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        k: usize,
        lo: &[f64],
        hi: &[f64],
        breaks: &[Vec<f64>],
        y: &mut [f64],
        f: &mut dyn FnMut(&[f64]) -> f64,
        rel_tol: f64,
        abs_tol: f64,
    ) -> f64 {
        if k == lo.len() {
            return f(y);
        }
        let br = breaks.get(k).map(|v| v.as_slice()).unwrap_or(&[]);
        adaptive(
            |s| {
                y[k] = s;
                rec(k + 1, lo, hi, breaks, y, f, rel_tol, abs_tol)
            },
            lo[k],
            hi[k],
            br,
            rel_tol,
            abs_tol,
        )
    }
    let mut y = vec![0.0; lo.len()];
    rec(0, lo, hi, breaks, &mut y, f, rel_tol, abs_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 8, 16] {
            let rule = gauss_legendre(n);
            let wsum: f64 = rule.1.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let v = integrate_fixed(|x| x.powi(deg as i32 - 1), 0.0, 1.0, &rule);
            assert!((v - 1.0 / deg as f64).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn box_integral_of_gaussian() {
        let v = integrate_box(
            &[-1.0, -1.0],
            &[1.0, 2.0],
            &[vec![0.2], vec![0.3]],
            &mut |y| (-(y[0] - 0.2).powi(2) * 50.0 - (y[1] - 0.3).powi(2) * 50.0).exp(),
            1e-10,
            1e-14,
        );
        assert!((v - std::f64::consts::PI / 50.0).abs() < 1e-9);
    }

    #[test]
    fn nodes_symmetric() {
        let (x, _) = gauss_legendre(16);
        for i in 0..16 {
            assert!((x[i] + x[15 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let t = 1e-4;
        let v = adaptive(|x| (-(x - 0.3) * (x - 0.3) / t).exp(), 0.0, 1.0, &[0.3], 1e-10, 1e-14);
        assert!((v - (PI * t).sqrt()).abs() < 1e-10);
        let s = adaptive(|x| x.abs().sqrt(), -1.0, 1.0, &[0.0], 1e-10, 1e-14);
        assert!((s - 4.0 / 3.0).abs() < 1e-9);
    }
}
