use std::collections::VecDeque;

use super::sparse::{CsrMatrix, Scalar};
use super::LinalgError;

/// Reverse Cuthill-McKee ordering of the (symmetrized) pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn rcm_ordering<T: Scalar>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.dim();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut start_candidates: Vec<usize> = (0..n).collect();
    start_candidates.sort_by_key(|&v| (degree[v], v));
    for &seed in &start_candidates {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(seed, &adj, &degree);
        let mut queue = VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (degree[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> (Vec<usize>, usize, Vec<usize>) {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut reached = Vec::new();
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        reached.push(v);
        depth = depth.max(level[v]);
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (level, depth, reached)
}

/// George-Liu search for a node of near-maximal eccentricity.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = seed;
    let (mut level, mut depth, mut reached) = bfs_levels(root, adj);
    loop {
        let candidate = reached
            .iter()
            .copied()
            .filter(|&v| level[v] == depth)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(root);
        let (l2, d2, r2) = bfs_levels(candidate, adj);
        if d2 > depth {
            root = candidate;
            level = l2;
            depth = d2;
            reached = r2;
        } else {
            return root;
        }
    }
}

/// Number of stored entries an envelope factorization of `a` under `perm`
/// would need (lower triangle including the diagonal).
pub fn envelope_size<T: Scalar>(a: &CsrMatrix<T>, perm: &[usize]) -> usize {
    first_columns(a, perm).iter().enumerate().map(|(i, &f)| i - f + 1).sum()
}

fn first_columns<T: Scalar>(a: &CsrMatrix<T>, perm: &[usize]) -> Vec<usize> {
    let n = a.dim();
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut first: Vec<usize> = (0..n).collect();
    for old_i in 0..n {
        let i = inv[old_i];
        for &old_j in a.row(old_i).0 {
            let j = inv[old_j];
            // The pattern is treated as symmetric.
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            if c < first[r] {
                first[r] = c;
            }
        }
    }
    first
}

/// `P A Pᵀ = L D Lᴴ` in envelope (skyline) storage, without pivoting.
/// The count of negative pivots equals the number of negative eigenvalues of
/// `A` (Sylvester's law of inertia).
#[derive(Debug, Clone)]
pub struct Factorization<T> {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    offsets: Vec<usize>,
    lower: Vec<T>,
    diag: Vec<f64>,
}

impl<T: Scalar> Factorization<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self, LinalgError> {
        let perm = rcm_ordering(a);
        Self::with_ordering(a, perm)
    }

    pub fn with_ordering(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self, LinalgError> {
        let n = a.dim();
        let first = first_columns(a, &perm);
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i]));
        }
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut lower = vec![T::of(0.0); offsets[n]];
        let mut diag = vec![0.0; n];
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for old_i in 0..n {
            let i = inv[old_i];
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = inv[old_j];
                if j < i {
                    lower[offsets[i] + (j - first[i])] = v;
                } else if j == i {
                    diag[i] = v.re();
                }
            }
        }
        // Row-oriented elimination. On entry row i of `lower` holds A's lower
        // entries; it is overwritten first by u_ij = L_ij d_j, then by L_ij.
        let mut u: Vec<T> = Vec::new();
        for i in 0..n {
            let fi = first[i];
            let oi = offsets[i];
            let len = i - fi;
            u.clear();
            u.extend_from_slice(&lower[oi..oi + len]);
            for jj in 0..len {
                let j = fi + jj;
                let fj = first[j];
                let k0 = fi.max(fj);
                let oj = offsets[j];
                let mut s = u[jj];
                let ui = &u[(k0 - fi)..jj];
                let lj = &lower[oj + (k0 - fj)..oj + (j - fj)];
                for (a, b) in ui.iter().zip(lj) {
                    s -= *a * b.conj();
                }
                u[jj] = s;
            }
            let mut d = diag[i];
            for jj in 0..len {
                let j = fi + jj;
                let l = u[jj].mul_re(1.0 / diag[j]);
                d -= (u[jj] * l.conj()).re();
                lower[oi + jj] = l;
            }
            if !d.is_finite() {
                return Err(LinalgError::Breakdown { index: i });
            }
            if d == 0.0 {
                return Err(LinalgError::Singular { index: i });
            }
            if d.abs() <= 1e-14 * scale {
                return Err(LinalgError::Breakdown { index: i });
            }
            diag[i] = d;
        }
        Ok(Factorization { n, perm, first, offsets, lower, diag })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of negative pivots.
    pub fn negative_count(&self) -> usize {
        self.diag.iter().filter(|&&d| d < 0.0).count()
    }

    pub fn stored_entries(&self) -> usize {
        self.lower.len() + self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = vec![T::of(0.0); self.n];
        self.solve_into(b, &mut x);
        x
    }

    pub fn solve_into(&self, b: &[T], x: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offsets[i]..self.offsets[i + 1]];
            let mut s = y[i];
            for (l, yk) in row.iter().zip(&y[fi..i]) {
                s -= *l * *yk;
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] = y[i].mul_re(1.0 / self.diag[i]);
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.lower[self.offsets[i]..self.offsets[i + 1]];
            let yi = y[i];
            for (l, yk) in row.iter().zip(y[fi..i].iter_mut()) {
                *yk -= l.conj() * yi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::norm2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplace_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn identity_and_two_by_two() {
        let f = Factorization::new(&CsrMatrix::<f64>::identity(3)).unwrap();
        assert_eq!(f.solve(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let x = Factorization::new(&a).unwrap().solve(&[3.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inertia_counts_negative_eigenvalues() {
        let n = 50;
        let a = laplace_1d(n);
        // eigenvalues 2 - 2cos(k pi/(n+1)); shift between the 3rd and 4th
        let l = |k: usize| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let sigma = 0.5 * (l(3) + l(4));
        let shifted = CsrMatrix::linear_combination(&[(1.0, &a), (-sigma, &CsrMatrix::identity(n))]);
        let f = Factorization::new(&shifted).unwrap();
        assert_eq!(f.negative_count(), 3);
    }

    #[test]
    fn exact_singularity_is_reported() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(Factorization::new(&a).is_err());
    }

    #[test]
    fn complex_hermitian_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, Complex64::new(6.0, 0.0)));
            for j in [i + 1, i + 3] {
                if j < n {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    t.push((i, j, v));
                    t.push((j, i, v.conj()));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = Factorization::new(&a).unwrap().solve(&b);
        let r: Vec<Complex64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-12 * norm2(&b));
    }

    #[test]
    fn rcm_keeps_band_of_shuffled_path() {
        let n = 30;
        let a = laplace_1d(n);
        let mut p: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for i in (1..n).rev() {
            p.swap(i, rng.gen_range(0..=i));
        }
        let t: Vec<_> = a.triplets().into_iter().map(|(i, j, v)| (p[i], p[j], v)).collect();
        let shuffled = CsrMatrix::from_triplets(n, &t);
        let perm = rcm_ordering(&shuffled);
        assert_eq!(envelope_size(&shuffled, &perm), 2 * n - 1);
    }
}
