use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ldl::Factorization;
use super::sparse::{axpy, dot, norm2, CsrMatrix, Scalar};
use super::LinalgError;

/// Solver selection for [`solve_gevp_smallest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Dense below `EigOptions::dense_threshold`, shift-invert Lanczos above.
    Auto,
    Sparse,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigOptions {
    pub tol: f64,
    /// Initial shift guess. It is lowered until the inertia shows no
    /// eigenvalue below it.
    pub shift: f64,
    pub max_restarts: usize,
    pub method: Method,
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions {
            tol: 1e-10,
            shift: 0.0,
            max_restarts: 200,
            method: Method::Auto,
            dense_threshold: 300,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigResult<T> {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal.
    pub eigenvectors: Vec<Vec<T>>,
    /// `‖Kx − λMx‖ / ‖Kx‖`
    pub residuals: Vec<f64>,
    /// Operator applications (Krylov) or 1 for the dense path.
    pub iterations: usize,
    pub shift: f64,
    pub method: Method,
}

pub fn relative_residual<T: Scalar>(k: &CsrMatrix<T>, m: &CsrMatrix<T>, lambda: f64, x: &[T]) -> f64 {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let mut r = kx.clone();
    axpy(T::of(-lambda), &mx, &mut r);
    let denom = norm2(&kx).max(f64::MIN_POSITIVE);
    norm2(&r) / denom
}

/// `k` smallest eigenpairs of `K x = λ M x` with `K` Hermitian and `M`
/// Hermitian positive definite.
pub fn solve_gevp_smallest<T: Scalar>(
    k: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    nev: usize,
    opts: &EigOptions,
) -> Result<EigResult<T>, LinalgError> {
    let n = k.dim();
    if nev == 0 || nev > n {
        return Err(LinalgError::BadRequest(format!("asked for {nev} eigenpairs of a {n}-dimensional problem")));
    }
    if m.dim() != n {
        return Err(LinalgError::BadRequest("K and M dimensions differ".into()));
    }
    let dense = match opts.method {
        Method::Dense => true,
        Method::Sparse => false,
        Method::Auto => n <= opts.dense_threshold || nev * 4 + 20 >= n,
    };
    if dense {
        dense_gevp(&k.to_dense(), &m.to_dense(), nev).map(|(vals, vecs)| {
            let residuals = vals.iter().zip(&vecs).map(|(&l, x)| relative_residual(k, m, l, x)).collect();
            EigResult {
                eigenvalues: vals,
                eigenvectors: vecs,
                residuals,
                iterations: 1,
                shift: f64::NAN,
                method: Method::Dense,
            }
        })
    } else {
        shift_invert_lanczos(k, m, nev, opts)
    }
}

/// Dense reference: Cholesky of `M`, then the Hermitian eigenproblem of
/// `L⁻¹ K L⁻ᴴ`. Returns the `nev` smallest pairs.
pub fn dense_gevp<T: Scalar>(
    k: &DMatrix<T>,
    m: &DMatrix<T>,
    nev: usize,
) -> Result<(Vec<f64>, Vec<Vec<T>>), LinalgError> {
    let n = k.nrows();
    let chol = m.clone().cholesky().ok_or(LinalgError::NotPositiveDefinite)?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(LinalgError::NotPositiveDefinite)?;
    let mut c = &linv * k * linv.adjoint();
    // symmetrize against rounding
    let ct = c.adjoint();
    c = (c + ct).scale(0.5);
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let linv_h = linv.adjoint();
    let mut vals = Vec::with_capacity(nev);
    let mut vecs = Vec::with_capacity(nev);
    for &j in idx.iter().take(nev) {
        vals.push(eig.eigenvalues[j]);
        let y = eig.eigenvectors.column(j).into_owned();
        let x = &linv_h * y;
        vecs.push(x.iter().copied().collect());
    }
    Ok((vals, vecs))
}

/// All eigenvalues of a dense Hermitian pencil, ascending.
pub fn dense_eigenvalues<T: Scalar>(k: &DMatrix<T>, m: &DMatrix<T>) -> Result<Vec<f64>, LinalgError> {
    dense_gevp(k, m, k.nrows()).map(|(v, _)| v)
}

/// Finds `σ` below the smallest eigenvalue of the pencil: the factorization of
/// `K − σM` must succeed with no negative pivot. Starts from `guess`.
pub fn shift_below_spectrum<T: Scalar>(
    k: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    guess: f64,
) -> Result<(f64, Factorization<T>), LinalgError> {
    let scale = k.max_abs().max(1.0) / m.max_abs().max(f64::MIN_POSITIVE);
    let mut sigma = guess;
    let mut step = 1e-3 * scale.max(guess.abs());
    for _ in 0..200 {
        let a = CsrMatrix::linear_combination(&[(T::of(1.0), k), (T::of(-sigma), m)]);
        match Factorization::new(&a) {
            Ok(f) if f.negative_count() == 0 => return Ok((sigma, f)),
            _ => {
                sigma -= step;
                step *= 2.0;
            }
        }
    }
    Err(LinalgError::NoShift)
}

fn orthogonalize<T: Scalar>(w: &mut [T], basis: &[Vec<T>], mbasis: &[Vec<T>], coeffs: &mut [T]) {
    for (c, (v, mv)) in coeffs.iter_mut().zip(basis.iter().zip(mbasis)) {
        let h = dot(mv, w);
        axpy(-h, v, w);
        *c += h;
    }
}

fn m_norm<T: Scalar>(m: &CsrMatrix<T>, w: &[T]) -> (f64, Vec<T>) {
    let mw = m.mul_vec(w);
    (dot(w, &mw).re().max(0.0).sqrt(), mw)
}

fn random_vector<T: Scalar>(n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    (0..n).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect()
}

struct Locked<T> {
    x: Vec<Vec<T>>,
    mx: Vec<Vec<T>>,
}

impl<T: Scalar> Locked<T> {
    /// Random unit vector M-orthogonal to the locked set.
    fn fresh(&self, m: &CsrMatrix<T>, n: usize, rng: &mut ChaCha8Rng) -> (Vec<T>, Vec<T>, f64) {
        let mut r = random_vector::<T>(n, rng);
        let mut scratch = vec![T::of(0.0); self.x.len()];
        for _ in 0..2 {
            orthogonalize(&mut r, &self.x, &self.mx, &mut scratch);
        }
        let (nrm, mr) = m_norm(m, &r);
        (r, mr, nrm)
    }
}

/// Shift-invert eigensolver: Lanczos sweeps with locking, followed by an
/// inertia count that catches eigenvalues a single Krylov sequence misses
/// (exact multiplicities).
fn shift_invert_lanczos<T: Scalar>(
    k: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    nev: usize,
    opts: &EigOptions,
) -> Result<EigResult<T>, LinalgError> {
    let n = k.dim();
    let (sigma, fact) = shift_below_spectrum(k, m, opts.shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked = Locked { x: Vec::new(), mx: Vec::new() };
    let mut values: Vec<f64> = Vec::new();
    let mut applications = 0usize;
    let mut need = nev;
    for _round in 0..8 {
        let found = lanczos_sweep(&fact, k, m, sigma, need, &locked, opts, &mut rng, &mut applications)?;
        for (lambda, x) in found {
            let (nrm, mx) = m_norm(m, &x);
            locked.x.push(x.iter().map(|v| v.mul_re(1.0 / nrm)).collect());
            locked.mx.push(mx.iter().map(|v| v.mul_re(1.0 / nrm)).collect());
            values.push(lambda);
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let top = sorted[nev - 1];
        let below = count_below(k, m, top)?;
        let have = sorted.iter().filter(|&&l| l <= top * (1.0 + 1e-9) + 1e-12).count();
        if below <= have || locked.x.len() >= n {
            let pairs: Vec<(f64, Vec<T>)> = values.into_iter().zip(locked.x).collect();
            return finalize(k, m, pairs, nev, applications, sigma);
        }
        need = below - have;
    }
    Err(LinalgError::NoConvergence { iterations: applications })
}

/// Number of eigenvalues not exceeding `mu` (with a relative margin).
fn count_below<T: Scalar>(k: &CsrMatrix<T>, m: &CsrMatrix<T>, mu: f64) -> Result<usize, LinalgError> {
    let mut margin = 1e-9;
    for _ in 0..6 {
        let s = mu + margin * mu.abs().max(1e-3);
        let a = CsrMatrix::linear_combination(&[(T::of(1.0), k), (T::of(-s), m)]);
        if let Ok(f) = Factorization::new(&a) {
            return Ok(f.negative_count());
        }
        margin *= 10.0;
    }
    Err(LinalgError::NoShift)
}

#[allow(clippy::too_many_arguments)]
fn lanczos_sweep<T: Scalar>(
    fact: &Factorization<T>,
    k: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    sigma: f64,
    nev: usize,
    locked: &Locked<T>,
    opts: &EigOptions,
    rng: &mut ChaCha8Rng,
    applications: &mut usize,
) -> Result<Vec<(f64, Vec<T>)>, LinalgError> {
    let n = k.dim();
    let room = n - locked.x.len();
    let ncv = (2 * nev + 20).min(room);
    if nev > room {
        return Err(LinalgError::BadRequest("not enough dimensions left".into()));
    }
    let keep = (nev + (ncv - nev) / 2).min(ncv - 1);
    let mut v: Vec<Vec<T>> = Vec::with_capacity(ncv + 1);
    let mut mv: Vec<Vec<T>> = Vec::with_capacity(ncv + 1);
    let mut h = DMatrix::<T>::from_element(ncv, ncv, T::of(0.0));
    let (s, ms, nrm) = locked.fresh(m, n, rng);
    v.push(s.iter().map(|x| x.mul_re(1.0 / nrm)).collect());
    mv.push(ms.iter().map(|x| x.mul_re(1.0 / nrm)).collect());
    let mut strictness = 0.1;
    let mut scratch = vec![T::of(0.0); locked.x.len()];

    for _restart in 0..opts.max_restarts {
        let j0 = v.len() - 1;
        let mut tail: Option<(Vec<T>, Vec<T>, f64)> = None;
        for j in j0..ncv {
            let mut w = fact.solve(&mv[j]);
            *applications += 1;
            let mut coeffs = vec![T::of(0.0); j + 1];
            for _ in 0..2 {
                orthogonalize(&mut w, &locked.x, &locked.mx, &mut scratch);
                orthogonalize(&mut w, &v[..=j], &mv[..=j], &mut coeffs);
            }
            for (i, &c) in coeffs.iter().enumerate() {
                if i == j {
                    h[(j, j)] = T::of(c.re());
                } else {
                    h[(i, j)] = c;
                    h[(j, i)] = c.conj();
                }
            }
            let (mut beta, mut mw) = m_norm(m, &w);
            let scale = coeffs.iter().map(|c| c.abs2()).sum::<f64>().sqrt();
            let mut coupling = beta;
            if beta <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                // Invariant subspace reached: continue with a fresh direction.
                let (mut r, _, _) = locked.fresh(m, n, rng);
                let mut dummy = vec![T::of(0.0); j + 1];
                for _ in 0..2 {
                    orthogonalize(&mut r, &v[..=j], &mv[..=j], &mut dummy);
                    orthogonalize(&mut r, &locked.x, &locked.mx, &mut scratch);
                }
                let (b2, mr) = m_norm(m, &r);
                w = r;
                mw = mr;
                beta = b2;
                coupling = 0.0;
            }
            let inv = 1.0 / beta;
            let wn: Vec<T> = w.iter().map(|x| x.mul_re(inv)).collect();
            let mwn: Vec<T> = mw.iter().map(|x| x.mul_re(inv)).collect();
            if j + 1 < ncv {
                v.push(wn);
                mv.push(mwn);
                h[(j + 1, j)] = T::of(coupling);
                h[(j, j + 1)] = T::of(coupling);
            } else {
                tail = Some((wn, mwn, coupling));
            }
        }
        let (vnext, mvnext, beta) = tail.expect("Krylov basis filled");
        let hs = {
            let ht = h.adjoint();
            (h.clone() + ht).scale(0.5)
        };
        let eig = SymmetricEigen::new(hs);
        let mut idx: Vec<usize> = (0..ncv).collect();
        // Largest θ corresponds to the smallest λ = σ + 1/θ.
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let ritz_vec = |i: usize, basis: &[Vec<T>]| -> Vec<T> {
            let mut x = vec![T::of(0.0); n];
            for (c, b) in eig.eigenvectors.column(i).iter().zip(basis) {
                axpy(*c, b, &mut x);
            }
            x
        };
        let cheap_ok = idx.iter().take(nev).all(|&i| {
            let theta = eig.eigenvalues[i];
            let bound = beta * eig.eigenvectors[(ncv - 1, i)].abs2().sqrt();
            theta > 0.0 && bound <= strictness * opts.tol * theta
        });
        if cheap_ok {
            let pairs: Vec<(f64, Vec<T>)> =
                idx.iter().take(nev).map(|&i| (sigma + 1.0 / eig.eigenvalues[i], ritz_vec(i, &v))).collect();
            let ok = pairs.iter().all(|(l, x)| {
                let (nrm, _) = m_norm(m, x);
                let xn: Vec<T> = x.iter().map(|v| v.mul_re(1.0 / nrm)).collect();
                let rq = dot(&xn, &k.mul_vec(&xn)).re();
                relative_residual(k, m, rq, &xn) <= opts.tol && (rq - l).abs() <= 1e-6 * l.abs().max(1.0)
            });
            if ok {
                return Ok(pairs);
            }
            strictness *= 0.1;
            if strictness < 1e-8 {
                return Err(LinalgError::NoConvergence { iterations: *applications });
            }
        }
        let mut nv = Vec::with_capacity(ncv + 1);
        let mut nmv = Vec::with_capacity(ncv + 1);
        let mut nh = DMatrix::<T>::from_element(ncv, ncv, T::of(0.0));
        for (slot, &i) in idx.iter().take(keep).enumerate() {
            nv.push(ritz_vec(i, &v));
            nmv.push(ritz_vec(i, &mv));
            nh[(slot, slot)] = T::of(eig.eigenvalues[i]);
            let c = eig.eigenvectors[(ncv - 1, i)].conj().mul_re(beta);
            nh[(keep, slot)] = c;
            nh[(slot, keep)] = c.conj();
        }
        nv.push(vnext);
        nmv.push(mvnext);
        v = nv;
        mv = nmv;
        h = nh;
    }
    Err(LinalgError::NoConvergence { iterations: *applications })
}

fn finalize<T: Scalar>(
    k: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    mut pairs: Vec<(f64, Vec<T>)>,
    nev: usize,
    iterations: usize,
    shift: f64,
) -> Result<EigResult<T>, LinalgError> {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(nev);
    // Rayleigh-Ritz on the collected vectors restores M-orthogonality inside
    // clusters of (nearly) equal eigenvalues.
    let p = pairs.len();
    let xs: Vec<Vec<T>> = pairs.into_iter().map(|(_, x)| x).collect();
    let kx: Vec<Vec<T>> = xs.iter().map(|x| k.mul_vec(x)).collect();
    let mx: Vec<Vec<T>> = xs.iter().map(|x| m.mul_vec(x)).collect();
    let kp = DMatrix::from_fn(p, p, |i, j| dot(&xs[i], &kx[j]));
    let mp = DMatrix::from_fn(p, p, |i, j| dot(&xs[i], &mx[j]));
    let (vals, coefs) = dense_gevp(&kp, &mp, p)?;
    let mut eigenvalues = Vec::with_capacity(p);
    let mut eigenvectors = Vec::with_capacity(p);
    let mut residuals = Vec::with_capacity(p);
    for (lambda, c) in vals.into_iter().zip(coefs) {
        let mut x = vec![T::of(0.0); k.dim()];
        for (ci, xi) in c.iter().zip(&xs) {
            axpy(*ci, xi, &mut x);
        }
        residuals.push(relative_residual(k, m, lambda, &x));
        eigenvalues.push(lambda);
        eigenvectors.push(x);
    }
    Ok(EigResult { eigenvalues, eigenvectors, residuals, iterations, shift, method: Method::Sparse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn fd_laplace(n: usize) -> CsrMatrix<f64> {
        let h = 1.0 / (n as f64 + 1.0);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / (h * h)));
            if i + 1 < n {
                t.push((i, i + 1, -1.0 / (h * h)));
                t.push((i + 1, i, -1.0 / (h * h)));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn diagonal_problem() {
        let k = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let m = CsrMatrix::identity(3);
        let r = solve_gevp_smallest(&k, &m, 2, &EigOptions::default()).unwrap();
        assert!((r.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((r.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fd_laplacian_closed_form() {
        let n = 400;
        let h = 1.0 / (n as f64 + 1.0);
        let k = fd_laplace(n);
        let m = CsrMatrix::identity(n);
        let opts = EigOptions { method: Method::Sparse, ..Default::default() };
        let r = solve_gevp_smallest(&k, &m, 4, &opts).unwrap();
        for (j, &l) in r.eigenvalues.iter().enumerate() {
            let exact = (2.0 - 2.0 * ((j + 1) as f64 * PI * h).cos()) / (h * h);
            assert!((l - exact).abs() < 1e-9 * exact, "{j}: {l} vs {exact}");
        }
        assert!(r.residuals.iter().all(|&x| x < 1e-9));
    }

    #[test]
    fn sparse_matches_dense_complex() {
        let n = 120;
        let mut t = Vec::new();
        let mut tm = Vec::new();
        for i in 0..n {
            t.push((i, i, Complex64::new(4.0 + (i % 7) as f64 * 0.1, 0.0)));
            tm.push((i, i, Complex64::new(2.0, 0.0)));
            if i + 1 < n {
                let z = Complex64::new(-1.0, 0.3);
                t.push((i, i + 1, z));
                t.push((i + 1, i, z.conj()));
                tm.push((i, i + 1, Complex64::new(0.5, 0.0)));
                tm.push((i + 1, i, Complex64::new(0.5, 0.0)));
            }
        }
        let k = CsrMatrix::from_triplets(n, &t);
        let m = CsrMatrix::from_triplets(n, &tm);
        let opts = EigOptions { method: Method::Sparse, ..Default::default() };
        let s = solve_gevp_smallest(&k, &m, 5, &opts).unwrap();
        let d = dense_eigenvalues(&k.to_dense(), &m.to_dense()).unwrap();
        for j in 0..5 {
            assert!((s.eigenvalues[j] - d[j]).abs() <= 1e-9 * d[j].abs());
        }
        for a in 0..5 {
            for b in 0..5 {
                let g = m.form(&s.eigenvectors[a], &s.eigenvectors[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g - Complex64::new(want, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn repeated_eigenvalues_are_all_found() {
        let d: Vec<f64> = (0..300).map(|i| 1.0 + (i / 3) as f64).collect();
        let k = CsrMatrix::from_diagonal(&d);
        let m = CsrMatrix::identity(300);
        let opts = EigOptions { method: Method::Sparse, ..Default::default() };
        let r = solve_gevp_smallest(&k, &m, 6, &opts).unwrap();
        let want = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        for (a, b) in r.eigenvalues.iter().zip(want) {
            assert!((a - b).abs() < 1e-10, "{:?}", r.eigenvalues);
        }
    }
}
