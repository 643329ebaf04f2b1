use nalgebra::{DMatrix, SymmetricEigen};

use super::LinalgError;

/// Real symmetric operator applied to blocks of column vectors.
pub trait BlockOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct LobpcgOptions {
    /// Target for `‖Ax − λBx‖ / ‖Ax‖`.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct LobpcgResult {
    pub eigenvalues: Vec<f64>,
    /// Columns are B-orthonormal.
    pub eigenvectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// B-orthonormalizes the columns of `u` (with `bu = B u`) by SVQB, dropping
/// numerically dependent directions. Returns the transformation applied.
fn svqb(u: &DMatrix<f64>, bu: &DMatrix<f64>, drop_tol: f64) -> Option<DMatrix<f64>> {
    let g = u.transpose() * bu;
    let k = g.ncols();
    let d: Vec<f64> = (0..k).map(|i| g[(i, i)].max(f64::MIN_POSITIVE).sqrt().recip()).collect();
    let scaled = DMatrix::from_fn(k, k, |i, j| d[i] * g[(i, j)] * d[j]);
    let scaled = (&scaled + scaled.transpose()) * 0.5;
    let eig = SymmetricEigen::new(scaled);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cols: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] > drop_tol * max).collect();
    if cols.is_empty() {
        return None;
    }
    let t = DMatrix::from_fn(k, cols.len(), |i, c| {
        let j = cols[c];
        d[i] * eig.eigenvectors[(i, j)] / eig.eigenvalues[j].sqrt()
    });
    Some(t)
}

/// Generalized eigenvalues of the small pencil `(a, b)` with `b` SPD, ascending.
fn small_gevp(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let bs = (b + b.transpose()) * 0.5;
    let chol = bs.cholesky()?;
    let linv = chol.l().try_inverse()?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let n = a.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    Some((vals, linv.transpose() * y))
}

/// `aᵀ b` through the blocked product (tall-skinny operands).
fn gram(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * b
}

/// `Σ blocks[i] · coefs[i]`, skipping empty blocks.
fn combine(blocks: &[(&DMatrix<f64>, DMatrix<f64>)]) -> DMatrix<f64> {
    let mut out: Option<DMatrix<f64>> = None;
    for (m, c) in blocks {
        if m.ncols() == 0 {
            continue;
        }
        match out.as_mut() {
            None => out = Some(*m * c),
            Some(o) => o.gemm(1.0, m, c, 1.0),
        }
    }
    out.expect("at least one block")
}

/// Assembles the symmetric block matrix `[Gᵢⱼ]` from its upper blocks.
fn block_sym(blocks: &[Vec<DMatrix<f64>>]) -> DMatrix<f64> {
    let sizes: Vec<usize> = blocks.iter().map(|row| row[0].nrows()).collect();
    let n: usize = sizes.iter().sum();
    let mut out = DMatrix::zeros(n, n);
    let mut r0 = 0;
    for (i, row) in blocks.iter().enumerate() {
        let mut c0 = r0;
        for (k, blk) in row.iter().enumerate() {
            let j = i + k;
            out.view_mut((r0, c0), (sizes[i], sizes[j])).copy_from(blk);
            out.view_mut((c0, r0), (sizes[j], sizes[i])).copy_from(&blk.transpose());
            c0 += sizes[j];
        }
        r0 += sizes[i];
    }
    (&out + out.transpose()) * 0.5
}

struct Block {
    v: DMatrix<f64>,
    av: DMatrix<f64>,
    bv: DMatrix<f64>,
}

impl Block {
    fn times(&self, t: &DMatrix<f64>) -> Block {
        Block { v: &self.v * t, av: &self.av * t, bv: &self.bv * t }
    }
}

/// Smallest eigenpairs of `A x = λ B x` by locally optimal block
/// preconditioned conjugate gradients. The block size is the column count of
/// `x0`; the first `nev` columns must meet the tolerance.
pub fn lobpcg(
    a: &dyn BlockOperator,
    b: &dyn BlockOperator,
    precond: &dyn BlockOperator,
    x0: DMatrix<f64>,
    nev: usize,
    opts: &LobpcgOptions,
) -> Result<LobpcgResult, LinalgError> {
    let bs = x0.ncols();
    if nev == 0 || nev > bs || bs >= a.dim() {
        return Err(LinalgError::BadRequest(format!("block size {bs} cannot deliver {nev} pairs")));
    }
    let bx0 = b.apply(&x0);
    let t = svqb(&x0, &bx0, 1e-14).ok_or(LinalgError::BadRequest("degenerate start block".into()))?;
    let x = &x0 * &t;
    drop(x0);
    let ax = a.apply(&x);
    let bx = &bx0 * &t;
    drop(bx0);
    // Initial Rayleigh-Ritz.
    let (vals, c) = small_gevp(&gram(&x, &ax), &gram(&x, &bx)).ok_or(LinalgError::NotPositiveDefinite)?;
    let c = c.columns(0, bs).into_owned();
    let mut xb = Block { v: x, av: ax, bv: bx }.times(&c);
    let mut lambda: Vec<f64> = vals[..bs].to_vec();
    let mut p: Option<Block> = None;
    let mut residuals = vec![f64::INFINITY; bs];

    for iter in 0..opts.max_iter {
        let mut r = xb.av.clone();
        for j in 0..bs {
            let mut col = r.column_mut(j);
            col.axpy(-lambda[j], &xb.bv.column(j), 1.0);
        }
        for j in 0..bs {
            residuals[j] = r.column(j).norm() / xb.av.column(j).norm().max(f64::MIN_POSITIVE);
        }
        if residuals[..nev].iter().all(|&res| res <= opts.tol) {
            return Ok(LobpcgResult {
                eigenvalues: lambda[..nev].to_vec(),
                eigenvectors: xb.v.columns(0, nev).into_owned(),
                residuals: residuals[..nev].to_vec(),
                iterations: iter,
            });
        }
        let active: Vec<usize> = (0..bs).filter(|&j| residuals[j] > opts.tol * 0.1).collect();
        let ra = r.select_columns(&active);
        drop(r);
        let mut w = precond.apply(&ra);
        drop(ra);
        // Project out the current iterate in the B inner product.
        let coef = gram(&xb.bv, &w);
        w.gemm(-1.0, &xb.v, &coef, 1.0);
        let bw0 = b.apply(&w);
        let Some(tw) = svqb(&w, &bw0, 1e-12) else {
            return Err(LinalgError::NoConvergence { iterations: iter });
        };
        let w = &w * &tw;
        let bw = &bw0 * &tw;
        drop(bw0);
        let aw = a.apply(&w);
        let wb = Block { v: w, av: aw, bv: bw };

        let rr = |with_p: bool| -> Option<(Vec<f64>, DMatrix<f64>)> {
            let mut ga = vec![vec![gram(&xb.v, &xb.av), gram(&xb.v, &wb.av)], vec![gram(&wb.v, &wb.av)]];
            let mut gb = vec![vec![gram(&xb.v, &xb.bv), gram(&xb.v, &wb.bv)], vec![gram(&wb.v, &wb.bv)]];
            if with_p {
                let pb = p.as_ref()?;
                ga[0].push(gram(&xb.v, &pb.av));
                ga[1].push(gram(&wb.v, &pb.av));
                ga.push(vec![gram(&pb.v, &pb.av)]);
                gb[0].push(gram(&xb.v, &pb.bv));
                gb[1].push(gram(&wb.v, &pb.bv));
                gb.push(vec![gram(&pb.v, &pb.bv)]);
            }
            small_gevp(&block_sym(&ga), &block_sym(&gb))
        };
        let (vals, coefs, used_p) = match rr(true) {
            Some((v, c)) => (v, c, true),
            None => {
                let (v, c) = rr(false).ok_or(LinalgError::NotPositiveDefinite)?;
                (v, c, false)
            }
        };
        let nw = wb.v.ncols();
        let cx = coefs.view((0, 0), (bs, bs)).into_owned();
        let cw = coefs.view((bs, 0), (nw, bs)).into_owned();
        let empty = DMatrix::<f64>::zeros(0, 0);
        let (pv, pav, pbv, cp) = match (&p, used_p) {
            (Some(pb), true) => {
                let np = pb.v.ncols();
                (&pb.v, &pb.av, &pb.bv, coefs.view((bs + nw, 0), (np, bs)).into_owned())
            }
            _ => (&empty, &empty, &empty, DMatrix::zeros(0, bs)),
        };
        // Directions: the part of the new iterate outside the old X.
        let np_ = Block {
            v: combine(&[(&wb.v, cw.clone()), (pv, cp.clone())]),
            av: combine(&[(&wb.av, cw.clone()), (pav, cp.clone())]),
            bv: combine(&[(&wb.bv, cw), (pbv, cp)]),
        };
        drop(wb);
        let mut nx = xb.times(&cx);
        nx.v += &np_.v;
        nx.av += &np_.av;
        nx.bv += &np_.bv;
        xb = nx;
        lambda = vals[..bs].to_vec();
        // Keep P well conditioned.
        p = svqb(&np_.v, &np_.bv, 1e-12).map(|t| np_.times(&t));
    }
    Err(LinalgError::NoConvergence { iterations: opts.max_iter })
}
