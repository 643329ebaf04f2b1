/// Real symmetric tridiagonal matrix: diagonal `d`, off-diagonal `e`
/// (`e[i]` couples `i` and `i+1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        assert_eq!(e.len() + 1, d.len().max(1));
        SymTridiagonal { d, e }
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0f64;
        for i in 0..self.d.len() {
            let off = if i == 0 { 0.0 } else { self.e[i - 1] * self.e[i - 1] / q };
            q = self.d[i] - x - off;
            if q == 0.0 {
                q = -f64::EPSILON * (self.d[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based), by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k < self.dim());
        let (mut lo, mut hi) = self.gershgorin();
        let width = (hi - lo).max(f64::MIN_POSITIVE);
        lo -= 1e-12 * width;
        hi += 1e-12 * width;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.d[i] * x[i];
                if i > 0 {
                    s += self.e[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.e[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `(T − σI) y = b` with Gaussian elimination and partial pivoting.
    pub fn solve_shifted(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        // Rows hold up to three entries after pivoting: u0 (diag), u1, u2.
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut y = b.to_vec();
        let (glo, ghi) = self.gershgorin();
        let tiny = f64::EPSILON * glo.abs().max(ghi.abs()).max(1.0);
        let mut cur0 = self.d[0] - sigma;
        let mut cur1 = if n > 1 { self.e[0] } else { 0.0 };
        let mut cur2 = 0.0;
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if cur0 == 0.0 { tiny } else { cur0 };
                u1[i] = 0.0;
                u2[i] = 0.0;
                break;
            }
            let sub = self.e[i];
            let nd = self.d[i + 1] - sigma;
            let ne = if i + 2 < n { self.e[i + 1] } else { 0.0 };
            if sub.abs() > cur0.abs() {
                // swap rows i and i+1
                u0[i] = sub;
                u1[i] = nd;
                u2[i] = ne;
                let m = cur0 / sub;
                y.swap(i, i + 1);
                y[i + 1] -= m * y[i];
                cur0 = cur1 - m * nd;
                cur1 = cur2 - m * ne;
                cur2 = 0.0;
            } else {
                let piv = if cur0 == 0.0 { tiny } else { cur0 };
                u0[i] = piv;
                u1[i] = cur1;
                u2[i] = cur2;
                let m = sub / piv;
                y[i + 1] -= m * y[i];
                cur0 = nd - m * cur1;
                cur1 = ne - m * cur2;
                cur2 = 0.0;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / u0[i];
        }
        x
    }

    /// Unit eigenvector for an eigenvalue approximation `lambda`, by inverse
    /// iteration.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.dim();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.7).sin()).collect();
        for _ in 0..4 {
            let y = self.solve_shifted(lambda, &x);
            let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y.into_iter().map(|v| v / nrm).collect();
        }
        x
    }
}
