//! One-dimensional quadrature rules shared by the potential, certificate and
//! tube modules.

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule: each interval between consecutive
/// `breaks` is split into `panels` equal panels carrying an `order`-point rule.
pub fn composite_gauss<F>(f: F, breaks: &[f64], panels: usize, order: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let (xs, ws) = gauss_legendre(order);
    let mut sum = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let mut s = 0.0;
            for (x, wt) in xs.iter().zip(&ws) {
                s += wt * f(mid + 0.5 * h * x);
            }
            sum += 0.5 * h * s;
        }
    }
    sum
}

/// Composite Simpson rule on uniformly spaced samples; needs an odd sample count.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3 && n % 2 == 1, "Simpson needs an odd number (>= 3) of samples");
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

/// Result of an adaptive integration: value and an a-posteriori error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Adaptive Simpson with Richardson correction. `rel_tol` is relative to the
/// magnitude of the running integral, with `abs_floor` as an absolute floor.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> Integral
where
    F: Fn(f64) -> f64,
{
    // Seed with a coarse composite estimate so the relative target is meaningful.
    let seed_n = 64;
    let h = (b - a) / seed_n as f64;
    let mut total = Integral { value: 0.0, error: 0.0 };
    let coarse: f64 = {
        let vals: Vec<f64> = (0..=seed_n).map(|i| f(a + i as f64 * h)).collect();
        simpson_uniform(&vals, h)
    };
    let tol = (rel_tol * coarse.abs()).max(abs_floor);
    for i in 0..seed_n / 2 {
        let lo = a + 2.0 * i as f64 * h;
        let hi = lo + 2.0 * h;
        let fa = f(lo);
        let fm = f(0.5 * (lo + hi));
        let fb = f(hi);
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        let part = recurse(&f, lo, hi, fa, fm, fb, whole, tol / (seed_n / 2) as f64, 48);
        total.value += part.value;
        total.error += part.error;
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Integral {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Integral { value: left + right + delta / 15.0, error: (delta / 15.0).abs() };
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    Integral { value: l.value + r.value, error: l.error + r.error }
}

/// Several integrals of one vector-valued integrand, each break interval split
/// into panels no wider than `max_panel` with an 8-point Gauss rule. The error
/// of each component is estimated against the rule on half as many panels.
pub fn gauss_components<const K: usize, F>(f: F, breaks: &[f64], max_panel: f64) -> [Integral; K]
where
    F: Fn(f64) -> [f64; K],
{
    let (xs, ws) = gauss_legendre(8);
    let mut fine = [0.0; K];
    let mut coarse = [0.0; K];
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let panels = (((b - a) / max_panel).ceil() as usize).max(1) * 2;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let mut acc = [0.0; K];
            for (x, wt) in xs.iter().zip(&ws) {
                let v = f(mid + 0.5 * h * x);
                for k in 0..K {
                    acc[k] += 0.5 * h * wt * v[k];
                }
            }
            for k in 0..K {
                fine[k] += acc[k];
            }
            if p % 2 == 1 {
                let lo = a + (p as f64 - 1.0) * h;
                let mid2 = lo + h;
                let mut acc2 = [0.0; K];
                for (x, wt) in xs.iter().zip(&ws) {
                    let v = f(mid2 + h * x);
                    for k in 0..K {
                        acc2[k] += h * wt * v[k];
                    }
                }
                for k in 0..K {
                    coarse[k] += acc2[k];
                }
            }
        }
    }
    std::array::from_fn(|k| Integral { value: fine[k], error: (fine[k] - coarse[k]).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rules_integrate_polynomials_exactly() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_integrals() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let v = composite_gauss(|x| (-x * x).exp(), &[-10.0, 10.0], 40, 6);
        assert!((v - sqrt_pi).abs() < 1e-13);
        let r = adaptive_simpson(|x| (-x * x).exp(), -10.0, 10.0, 1e-10, 1e-14);
        assert!((r.value - sqrt_pi).abs() < 1e-10);
        assert!(r.error < 1e-9);
        let h = 0.01;
        let vals: Vec<f64> = (0..=2000).map(|i| (-(i as f64 * h - 10.0).powi(2)).exp()).collect();
        assert!((simpson_uniform(&vals, h) - sqrt_pi).abs() < 1e-10);
        let [g, x2] = gauss_components(|x| [(-x * x).exp(), x * x * (-x * x).exp()], &[-10.0, 0.0, 10.0], 0.5);
        assert!((g.value - sqrt_pi).abs() < 1e-13 && g.error < 1e-10);
        assert!((x2.value - 0.5 * sqrt_pi).abs() < 1e-13);
    }
}
