//! Truncated straightened tube `(−L, L) × S` with Dirichlet ends.
//!
//! The form `∫ |∂ₓψ − a ∂₁ψ − c ∂₂ψ|² + ε⁻²|∇_yψ|²` with `a = f'/ε`,
//! `c = g'/ε` is discretized by P1 elements in `x` tensored with the P1
//! section space. Degrees of freedom are ordered slice by slice:
//! `(i_x, s) ↦ i_x·n_s + s`.

use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use serde::Serialize;
use thiserror::Error;

use crate::expr::ExprError;
use crate::fiber::threshold_from_fem;
use crate::linalg::{dense_gevp, lobpcg, solve_gevp_smallest, BlockOperator, CsrMatrix, EigOptions, LinalgError, LobpcgOptions};
use crate::mesh::FemMatrices;
use crate::profile::Profile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TubeError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("truncation too short: slope deviation {deviation:.3e} at x = ±{l} exceeds {tol:.1e}")]
    TruncationTooShort { l: f64, deviation: f64, tol: f64 },
    #[error("λ{index}(L) increases from {from} at L = {l_from} to {to} at L = {l_to}")]
    NonMonotone { index: usize, l_from: f64, l_to: f64, from: f64, to: f64 },
    #[error("invalid input: {0}")]
    BadInput(String),
}

/// `G = (∇𝓛)ᵀ∇𝓛` for `𝓛(x, y) = (x, f(x) + y₁, g(x) + y₂)`.
pub fn metric_tensor(fp: f64, gp: f64) -> [[f64; 3]; 3] {
    [[1.0 + fp * fp + gp * gp, fp, gp], [fp, 1.0, 0.0], [gp, 0.0, 1.0]]
}

pub fn det3(g: &[[f64; 3]; 3]) -> f64 {
    g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSample {
    pub x: f64,
    pub g: [[f64; 3]; 3],
    pub det: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub samples: Vec<MetricSample>,
    pub max_det_error: f64,
    /// `|det G − 1| ≤ 1e-12` at every sample.
    pub pass: bool,
}

pub fn metric_check(profile: &Profile, xs: &[f64]) -> Result<MetricReport, ExprError> {
    let mut samples = Vec::with_capacity(xs.len());
    let mut max_det_error = 0.0f64;
    for &x in xs {
        let (f, g) = profile.slopes(x)?;
        let gm = metric_tensor(f, g);
        let det = det3(&gm);
        max_det_error = max_det_error.max((det - 1.0).abs());
        samples.push(MetricSample { x, g: gm, det });
    }
    Ok(MetricReport { samples, max_det_error, pass: max_det_error <= 1e-12 })
}

/// Tridiagonal matrix: `lower[i] = T[i+1][i]`, `upper[i] = T[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tri {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tri {
    fn zeros(n: usize) -> Self {
        let m = n.saturating_sub(1);
        Tri { lower: vec![0.0; m], diag: vec![0.0; n], upper: vec![0.0; m] }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if j == i + 1 {
            self.upper[i]
        } else if i == j + 1 {
            self.lower[j]
        } else {
            0.0
        }
    }

    pub fn transpose(&self) -> Self {
        Tri { lower: self.upper.clone(), diag: self.diag.clone(), upper: self.lower.clone() }
    }

    fn is_zero(&self) -> bool {
        self.lower.iter().chain(&self.diag).chain(&self.upper).all(|&v| v == 0.0)
    }

    fn entries(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(3 * n);
        for i in 0..n {
            if i > 0 {
                out.push((i, i - 1, self.lower[i - 1]));
            }
            out.push((i, i, self.diag[i]));
            if i + 1 < n {
                out.push((i, i + 1, self.upper[i]));
            }
        }
        out
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.diag[i] += v;
        } else if j == i + 1 {
            self.upper[i] += v;
        } else {
            self.lower[j] += v;
        }
    }
}

/// Section operators shared by every truncation length.
#[derive(Debug)]
pub struct SectionData {
    pub fem: FemMatrices,
    pub c1t: CsrMatrix<f64>,
    pub c2t: CsrMatrix<f64>,
    /// `D12 + D12ᵀ`
    pub d12s: CsrMatrix<f64>,
}

impl SectionData {
    pub fn new(fem: FemMatrices) -> Arc<Self> {
        let c1t = fem.c1.transpose();
        let c2t = fem.c2.transpose();
        let d12s = CsrMatrix::linear_combination(&[(1.0, &fem.d12), (1.0, &fem.d12.transpose())]);
        Arc::new(SectionData { fem, c1t, c2t, d12s })
    }

    pub fn dim(&self) -> usize {
        self.fem.dim()
    }
}

/// Tensor-product discretization of the tube form.
#[derive(Debug, Clone)]
pub struct TubeDiscretization {
    pub l: f64,
    pub nx: usize,
    pub hx: f64,
    pub epsilon: f64,
    pub beta: [f64; 2],
    /// Interior longitudinal nodes.
    pub x_nodes: Vec<f64>,
    /// Longitudinal Gauss points with `(f', g')` there.
    pub gauss: Vec<(f64, f64, f64)>,
    pub section: Arc<SectionData>,
    /// `∫ χᵢ' χⱼ'`
    pub sx: Tri,
    /// `∫ χᵢ χⱼ`
    pub mx: Tri,
    /// `∫ a² χᵢ χⱼ`, `∫ a c χᵢ χⱼ`, `∫ c² χᵢ χⱼ`
    pub mx_aa: Tri,
    pub mx_ac: Tri,
    pub mx_cc: Tri,
    /// `∫ a χᵢ' χⱼ`, `∫ c χᵢ' χⱼ`
    pub gx_a: Tri,
    pub gx_c: Tri,
}

/// Assembles the tube form on `(−L, L)` with `nx` longitudinal intervals.
/// Slopes enter through the two-point Gauss rule on each interval.
pub fn assemble_tube(
    profile: &Profile,
    section: Arc<SectionData>,
    l: f64,
    nx: usize,
    epsilon: f64,
    tail_tol: f64,
) -> Result<TubeDiscretization, TubeError> {
    if !(l > 0.0) || nx < 2 || !(epsilon > 0.0) {
        return Err(TubeError::BadInput(format!("need L > 0, nx ≥ 2, ε > 0 (got {l}, {nx}, {epsilon})")));
    }
    let deviation = profile.end_deviation(l)?;
    if deviation > tail_tol {
        return Err(TubeError::TruncationTooShort { l, deviation, tol: tail_tol });
    }
    let hx = 2.0 * l / nx as f64;
    let n = nx - 1;
    let x_nodes: Vec<f64> = (1..nx).map(|k| -l + k as f64 * hx).collect();
    let mut sx = Tri::zeros(n);
    let mut mx = Tri::zeros(n);
    let mut mx_aa = Tri::zeros(n);
    let mut mx_ac = Tri::zeros(n);
    let mut mx_cc = Tri::zeros(n);
    let mut gx_a = Tri::zeros(n);
    let mut gx_c = Tri::zeros(n);
    let mut gauss = Vec::with_capacity(2 * nx);
    let off = hx / (2.0 * 3f64.sqrt());
    let w = hx / 2.0;
    for e in 0..nx {
        let x0 = -l + e as f64 * hx;
        let mid = x0 + hx / 2.0;
        // Local basis: node e (left) and e+1 (right); interior index is node − 1.
        let nodes = [e.checked_sub(1).filter(|&i| i < n), (e < n).then_some(e)];
        let dphi = [-1.0 / hx, 1.0 / hx];
        for xq in [mid - off, mid + off] {
            let (fp, gp) = profile.slopes(xq)?;
            gauss.push((xq, fp, gp));
            let (a, c) = (fp / epsilon, gp / epsilon);
            let phi = [(x0 + hx - xq) / hx, (xq - x0) / hx];
            for p in 0..2 {
                let Some(i) = nodes[p] else { continue };
                for q in 0..2 {
                    let Some(j) = nodes[q] else { continue };
                    let mm = w * phi[p] * phi[q];
                    mx.add(i, j, mm);
                    mx_aa.add(i, j, a * a * mm);
                    mx_ac.add(i, j, a * c * mm);
                    mx_cc.add(i, j, c * c * mm);
                    sx.add(i, j, w * dphi[p] * dphi[q]);
                    gx_a.add(i, j, w * a * dphi[p] * phi[q]);
                    gx_c.add(i, j, w * c * dphi[p] * phi[q]);
                }
            }
        }
    }
    Ok(TubeDiscretization {
        l,
        nx,
        hx,
        epsilon,
        beta: [profile.beta1, profile.beta2],
        x_nodes,
        gauss,
        section,
        sx,
        mx,
        mx_aa,
        mx_ac,
        mx_cc,
        gx_a,
        gx_c,
    })
}

fn kron(t: &Tri, s: &CsrMatrix<f64>, scale: f64, out: &mut Vec<(usize, usize, f64)>) {
    let ns = s.dim();
    let st = s.triplets();
    for (i, j, tv) in t.entries() {
        if tv == 0.0 {
            continue;
        }
        for &(r, c, sv) in &st {
            out.push((i * ns + r, j * ns + c, scale * tv * sv));
        }
    }
}

impl TubeDiscretization {
    pub fn section_dim(&self) -> usize {
        self.section.dim()
    }

    pub fn dim(&self) -> usize {
        (self.nx - 1) * self.section_dim()
    }

    pub fn index(&self, ix: usize, s: usize) -> usize {
        ix * self.section_dim() + s
    }

    fn has_c(&self) -> bool {
        !(self.gx_c.is_zero() && self.mx_cc.is_zero())
    }

    /// Global stiffness and mass matrices.
    pub fn to_csr(&self) -> (CsrMatrix<f64>, CsrMatrix<f64>) {
        let sec = &self.section;
        let f = &sec.fem;
        let ie2 = self.epsilon.powi(-2);
        let mut t = Vec::new();
        kron(&self.sx, &f.m, 1.0, &mut t);
        kron(&self.gx_a, &f.c1, -1.0, &mut t);
        kron(&self.gx_a.transpose(), &sec.c1t, -1.0, &mut t);
        kron(&self.gx_c, &f.c2, -1.0, &mut t);
        kron(&self.gx_c.transpose(), &sec.c2t, -1.0, &mut t);
        kron(&self.mx_aa, &f.d11, 1.0, &mut t);
        kron(&self.mx_ac, &sec.d12s, 1.0, &mut t);
        kron(&self.mx_cc, &f.d22, 1.0, &mut t);
        kron(&self.mx, &f.s, ie2, &mut t);
        let k = CsrMatrix::from_triplets(self.dim(), &t);
        let mut tm = Vec::new();
        kron(&self.mx, &f.m, 1.0, &mut tm);
        (k, CsrMatrix::from_triplets(self.dim(), &tm))
    }

    /// `y = K u` without forming `K`.
    pub fn apply_k(&self, u: &[f64], y: &mut [f64]) {
        let ns = self.section_dim();
        let n = self.nx - 1;
        let sec = &self.section;
        let f = &sec.fem;
        let ie2 = self.epsilon.powi(-2);
        let with_c = self.has_c();
        let mats: Vec<&CsrMatrix<f64>> = if with_c {
            vec![&f.m, &f.c1, &sec.c1t, &f.d11, &f.s, &f.c2, &sec.c2t, &sec.d12s, &f.d22]
        } else {
            vec![&f.m, &f.c1, &sec.c1t, &f.d11, &f.s]
        };
        // products[m][j*ns..] = mats[m] · u_j
        let mut products = vec![vec![0.0; n * ns]; mats.len()];
        for (m, a) in mats.iter().enumerate() {
            for j in 0..n {
                a.mul_vec_into(&u[j * ns..(j + 1) * ns], &mut products[m][j * ns..(j + 1) * ns]);
            }
        }
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let yi = &mut y[i * ns..(i + 1) * ns];
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                let mut coef = vec![
                    self.sx.get(i, j),
                    -self.gx_a.get(i, j),
                    -self.gx_a.get(j, i),
                    self.mx_aa.get(i, j),
                    self.mx.get(i, j) * ie2,
                ];
                if with_c {
                    coef.extend([-self.gx_c.get(i, j), -self.gx_c.get(j, i), self.mx_ac.get(i, j), self.mx_cc.get(i, j)]);
                }
                for (m, &cf) in coef.iter().enumerate() {
                    if cf == 0.0 {
                        continue;
                    }
                    let pj = &products[m][j * ns..(j + 1) * ns];
                    for (a, b) in yi.iter_mut().zip(pj) {
                        *a += cf * b;
                    }
                }
            }
        }
    }

    /// `y = M u` without forming `M`.
    pub fn apply_m(&self, u: &[f64], y: &mut [f64]) {
        let ns = self.section_dim();
        let n = self.nx - 1;
        let mut mu = vec![0.0; n * ns];
        for j in 0..n {
            self.section.fem.m.mul_vec_into(&u[j * ns..(j + 1) * ns], &mut mu[j * ns..(j + 1) * ns]);
        }
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            for j in i.saturating_sub(1)..(i + 2).min(n) {
                let c = self.mx.get(i, j);
                for (a, b) in y[i * ns..(i + 1) * ns].iter_mut().zip(&mu[j * ns..(j + 1) * ns]) {
                    *a += c * b;
                }
            }
        }
    }
}

/// Operator adapters for the block eigensolver.
struct KOp<'a>(&'a TubeDiscretization);
struct MOp<'a>(&'a TubeDiscretization);

fn apply_columns(x: &DMatrix<f64>, f: impl Fn(&[f64], &mut [f64])) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for c in 0..x.ncols() {
        f(x.column(c).as_slice(), out.column_mut(c).as_mut_slice());
    }
    out
}

impl BlockOperator for KOp<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        apply_columns(x, |u, y| self.0.apply_k(u, y))
    }
}

impl BlockOperator for MOp<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        apply_columns(x, |u, y| self.0.apply_m(u, y))
    }
}

/// Section eigenbasis of `K_∞ = (S + (β·∇)²-part)/ε²` against `M`: the
/// `x`-independent part of the tube form at the tails.
#[derive(Debug, Clone)]
pub struct SectionBasis {
    /// M-orthonormal eigenvectors as columns.
    pub phi: DMatrix<f64>,
    pub phi_t: DMatrix<f64>,
    /// Eigenvalues, ascending.
    pub mu: Vec<f64>,
}

impl SectionBasis {
    pub fn new(section: &SectionData, beta: [f64; 2], epsilon: f64) -> Result<Self, LinalgError> {
        let f = &section.fem;
        let [b1, b2] = beta;
        let k = CsrMatrix::linear_combination(&[
            (1.0 + b1 * b1, &f.d11),
            (1.0 + b2 * b2, &f.d22),
            (b1 * b2, &section.d12s),
        ]);
        let ns = f.dim();
        let (mu, vecs) = dense_gevp(&k.to_dense(), &f.m.to_dense(), ns)?;
        let ie2 = epsilon.powi(-2);
        let phi = DMatrix::from_fn(ns, ns, |r, c| vecs[c][r]);
        Ok(SectionBasis { phi_t: phi.transpose(), phi, mu: mu.into_iter().map(|v| v * ie2).collect() })
    }
}

/// Inverse of `Sx ⊗ M + Mx ⊗ (K_∞ − σM)`, applied through the section
/// eigenbasis and one tridiagonal solve per section mode.
pub struct SeparablePreconditioner {
    basis: Arc<SectionBasis>,
    n: usize,
    /// `l[i·ns + m]`, `dinv[i·ns + m]`: LDLᵀ factors of `Sx + (μ_m − σ)Mx`.
    l: Vec<f64>,
    dinv: Vec<f64>,
}

impl SeparablePreconditioner {
    pub fn new(td: &TubeDiscretization, basis: Arc<SectionBasis>, sigma: f64) -> Result<Self, LinalgError> {
        let ns = basis.mu.len();
        let n = td.nx - 1;
        let mut l = vec![0.0; n * ns];
        let mut dinv = vec![0.0; n * ns];
        for (m, &mu) in basis.mu.iter().enumerate() {
            let s = mu - sigma;
            let mut dprev = 0.0;
            for i in 0..n {
                let diag = td.sx.diag[i] + s * td.mx.diag[i];
                let d = if i == 0 {
                    diag
                } else {
                    let e = td.sx.upper[i - 1] + s * td.mx.upper[i - 1];
                    let li = e / dprev;
                    l[i * ns + m] = li;
                    diag - li * e
                };
                if !(d > 0.0) {
                    return Err(LinalgError::NotPositiveDefinite);
                }
                dinv[i * ns + m] = 1.0 / d;
                dprev = d;
            }
        }
        Ok(SeparablePreconditioner { basis, n, l, dinv })
    }
}

impl BlockOperator for SeparablePreconditioner {
    fn dim(&self) -> usize {
        self.n * self.basis.mu.len()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let ns = self.basis.mu.len();
        let n = self.n;
        let cols = n * x.ncols();
        let xv = DMatrixView::from_slice(x.as_slice(), ns, cols);
        let mut r = DMatrix::zeros(ns, cols);
        r.gemm(1.0, &self.basis.phi_t, &xv, 0.0);
        let data = r.as_mut_slice();
        for c in 0..x.ncols() {
            let blk = &mut data[c * n * ns..(c + 1) * n * ns];
            for i in 1..n {
                let (prev, cur) = blk.split_at_mut(i * ns);
                let prev = &prev[(i - 1) * ns..];
                let li = &self.l[i * ns..(i + 1) * ns];
                for m in 0..ns {
                    cur[m] -= li[m] * prev[m];
                }
            }
            for (v, d) in blk.iter_mut().zip(&self.dinv) {
                *v *= d;
            }
            for i in (0..n.saturating_sub(1)).rev() {
                let (cur, next) = blk.split_at_mut((i + 1) * ns);
                let cur = &mut cur[i * ns..];
                let ln = &self.l[(i + 1) * ns..(i + 2) * ns];
                for m in 0..ns {
                    cur[m] -= ln[m] * next[m];
                }
            }
        }
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        let mut ov = DMatrixViewMut::from_slice(out.as_mut_slice(), ns, cols);
        ov.gemm(1.0, &self.basis.phi, &r, 0.0);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TubeMethod {
    /// Global sparse matrices with shift-invert Lanczos.
    Sparse,
    /// Matrix-free block iteration with the separable preconditioner.
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TubeSolveOptions {
    /// Target relative residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    /// Largest dimension solved through global sparse matrices.
    pub sparse_limit: usize,
    pub eig: EigOptions,
}

impl Default for TubeSolveOptions {
    fn default() -> Self {
        TubeSolveOptions { tol: 1e-8, max_iter: 2000, guard: 3, sparse_limit: 20_000, eig: EigOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    DiscreteCandidate,
    Inconclusive,
    AboveThreshold,
    /// Not yet compared across truncation lengths.
    Pending,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub l: f64,
    pub nx: usize,
    pub hx: f64,
    pub epsilon: f64,
    pub dofs: usize,
    pub section_dofs: usize,
    pub method: TubeMethod,
    pub iterations: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `E₁(0)/ε²` on the same section mesh.
    pub threshold: f64,
    pub classifications: Vec<Classification>,
}

/// Eigenvectors of a tube solve, columns M-orthonormal.
#[derive(Debug, Clone)]
pub struct TubeModes {
    pub report: SpectralReport,
    pub vectors: DMatrix<f64>,
}

/// Context shared by solves on one section: threshold and section basis.
pub struct TubeContext {
    pub section: Arc<SectionData>,
    pub threshold: f64,
    pub e1: f64,
    pub basis: Option<Arc<SectionBasis>>,
    pub beta: [f64; 2],
    pub epsilon: f64,
}

impl TubeContext {
    pub fn new(section: Arc<SectionData>, beta: [f64; 2], epsilon: f64, eig: &EigOptions) -> Result<Self, TubeError> {
        let gd = threshold_from_fem(beta[0], beta[1], &section.fem, eig)?;
        Ok(TubeContext { threshold: gd.e1 / (epsilon * epsilon), e1: gd.e1, section, basis: None, beta, epsilon })
    }

    fn basis(&mut self) -> Result<Arc<SectionBasis>, LinalgError> {
        if self.basis.is_none() {
            self.basis = Some(Arc::new(SectionBasis::new(&self.section, self.beta, self.epsilon)?));
        }
        Ok(self.basis.clone().expect("basis set above"))
    }
}

/// Default start block: `x`-profiles times the section ground mode.
fn start_block(td: &TubeDiscretization, v1: &[f64], bs: usize) -> DMatrix<f64> {
    let ns = td.section_dim();
    let n = td.nx - 1;
    let l = td.l;
    DMatrix::from_fn(n * ns, bs, |r, c| {
        let (i, s) = (r / ns, r % ns);
        let x = td.x_nodes[i];
        let t = (x + l) / (2.0 * l);
        let env = if c % 2 == 0 {
            (std::f64::consts::PI * t * (c / 2 + 1) as f64).sin()
        } else {
            x.powi((c / 2) as i32) * (-x * x / 4.0).exp() * (1.0 - (x / l).powi(2))
        };
        env * v1[s]
    })
}

/// The `k` lowest eigenpairs of the tube, with an optional start block.
pub fn lowest_modes(
    td: &TubeDiscretization,
    ctx: &mut TubeContext,
    k: usize,
    opts: &TubeSolveOptions,
    start: Option<&DMatrix<f64>>,
) -> Result<TubeModes, TubeError> {
    let n = td.dim();
    if k == 0 || k >= n {
        return Err(TubeError::BadInput(format!("cannot compute {k} modes of a {n}-dimensional tube")));
    }
    let (eigenvalues, residuals, vectors, iterations, method) = if n <= opts.sparse_limit {
        let (kk, mm) = td.to_csr();
        let mut eig = opts.eig;
        eig.tol = eig.tol.min(opts.tol);
        eig.shift = 0.99 * ctx.threshold;
        let r = solve_gevp_smallest(&kk, &mm, k, &eig)?;
        let v = DMatrix::from_fn(n, k, |i, c| r.eigenvectors[c][i]);
        (r.eigenvalues, r.residuals, v, r.iterations, TubeMethod::Sparse)
    } else {
        let basis = ctx.basis()?;
        let sigma = basis.mu[0] - 0.1 * basis.mu[0].abs().max(1.0);
        let pre = SeparablePreconditioner::new(td, basis.clone(), sigma)?;
        let bs = k + opts.guard;
        let v1: Vec<f64> = basis.phi.column(0).iter().copied().collect();
        let mut x0 = start_block(td, &v1, bs);
        if let Some(s) = start {
            let c = s.ncols().min(bs);
            x0.columns_mut(0, c).copy_from(&s.columns(0, c));
        }
        let r = lobpcg(&KOp(td), &MOp(td), &pre, x0, k, &LobpcgOptions { tol: opts.tol, max_iter: opts.max_iter })?;
        (r.eigenvalues, r.residuals, r.eigenvectors, r.iterations, TubeMethod::Block)
    };
    let report = SpectralReport {
        l: td.l,
        nx: td.nx,
        hx: td.hx,
        epsilon: td.epsilon,
        dofs: n,
        section_dofs: td.section_dim(),
        method,
        iterations,
        classifications: vec![Classification::Pending; eigenvalues.len()],
        eigenvalues,
        residuals,
        threshold: ctx.threshold,
    };
    Ok(TubeModes { report, vectors })
}

/// Zero-extends slice-ordered vectors from a shorter tube onto a longer one
/// with the same spacing. Returns `None` when the grids are not nested.
pub fn extend_by_zero(v: &DMatrix<f64>, from: &TubeDiscretization, to: &TubeDiscretization) -> Option<DMatrix<f64>> {
    let ns = from.section_dim();
    if ns != to.section_dim() || (from.hx - to.hx).abs() > 1e-12 * to.hx || to.l < from.l {
        return None;
    }
    let shift = (to.l - from.l) / to.hx;
    let offset = shift.round();
    if (shift - offset).abs() > 1e-9 {
        return None;
    }
    let offset = offset as usize;
    let mut out = DMatrix::zeros(to.dim(), v.ncols());
    for c in 0..v.ncols() {
        out.column_mut(c).rows_mut(offset * ns, from.dim()).copy_from(&v.column(c));
    }
    Some(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CandidateRow {
    pub index: usize,
    pub value: f64,
    pub margin: f64,
    pub residual_abs: f64,
    /// `|λ(L_last) − λ(L_prev)| / |λ(L_last)|`.
    pub relative_change: f64,
    pub classification: Classification,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub epsilon: f64,
    pub threshold: f64,
    pub e1: f64,
    pub l_list: Vec<f64>,
    pub reports: Vec<SpectralReport>,
    pub candidates: Vec<CandidateRow>,
    pub n_candidates: usize,
    /// Whether every `λ_j(L)` is nonincreasing in `L`.
    pub monotone: bool,
}

impl DetectionReport {
    /// CSV `L,nx,dofs,lambda1..,residual1..` in `L` order.
    pub fn to_csv(&self) -> String {
        let k = self.reports.iter().map(|r| r.eigenvalues.len()).max().unwrap_or(0);
        let mut s = String::from("epsilon,L,nx,dofs,threshold");
        for j in 1..=k {
            s.push_str(&format!(",lambda{j}"));
        }
        for j in 1..=k {
            s.push_str(&format!(",residual{j}"));
        }
        s.push_str("\r\n");
        let f = crate::fiber::fmt_num;
        for r in &self.reports {
            s.push_str(&format!("{},{},{},{},{}", f(r.epsilon), f(r.l), r.nx, r.dofs, f(r.threshold)));
            for j in 0..k {
                s.push(',');
                if let Some(v) = r.eigenvalues.get(j) {
                    s.push_str(&f(*v));
                }
            }
            for j in 0..k {
                s.push(',');
                if let Some(v) = r.residuals.get(j) {
                    s.push_str(&f(*v));
                }
            }
            s.push_str("\r\n");
        }
        s
    }
}

/// Solves the tube for each truncation length (spacing `hx`, ascending
/// `l_list`) and classifies the eigenvalues of the longest tube.
#[allow(clippy::too_many_arguments)]
pub fn detect_discrete(
    profile: &Profile,
    section: Arc<SectionData>,
    epsilon: f64,
    l_list: &[f64],
    hx: f64,
    k: usize,
    tail_tol: f64,
    opts: &TubeSolveOptions,
) -> Result<DetectionReport, TubeError> {
    if l_list.len() < 3 || l_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TubeError::BadInput("L list must be ascending with at least 3 entries".into()));
    }
    let mut ctx = TubeContext::new(section.clone(), [profile.beta1, profile.beta2], epsilon, &opts.eig)?;
    let mut reports: Vec<SpectralReport> = Vec::with_capacity(l_list.len());
    let mut prev: Option<(TubeDiscretization, DMatrix<f64>)> = None;
    for &l in l_list {
        let nx = ((2.0 * l / hx).round() as usize).max(2);
        let td = assemble_tube(profile, section.clone(), l, nx, epsilon, tail_tol)?;
        let start = prev.as_ref().and_then(|(p, v)| extend_by_zero(v, p, &td));
        let modes = lowest_modes(&td, &mut ctx, k, opts, start.as_ref())?;
        reports.push(modes.report);
        prev = Some((td, modes.vectors));
    }
    let mut monotone = true;
    for w in reports.windows(2) {
        for j in 0..k.min(w[0].eigenvalues.len()).min(w[1].eigenvalues.len()) {
            let (a, b) = (w[0].eigenvalues[j], w[1].eigenvalues[j]);
            let tol = 1e-10 * a.abs().max(1.0) + 10.0 * (w[0].residuals[j] + w[1].residuals[j]).powi(2) * a.abs();
            if b > a + tol {
                monotone = false;
                if j == 0 {
                    return Err(TubeError::NonMonotone { index: 1, l_from: w[0].l, l_to: w[1].l, from: a, to: b });
                }
            }
        }
    }
    let last = reports.last().expect("three reports");
    let before = &reports[reports.len() - 2];
    let threshold = ctx.threshold;
    let candidates: Vec<CandidateRow> = last
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(j, &value)| {
            let margin = threshold - value;
            let residual_abs = last.residuals[j] * value.abs();
            let relative_change = before.eigenvalues.get(j).map_or(f64::INFINITY, |&p| (value - p).abs() / value.abs());
            let classification = if margin <= 0.0 {
                Classification::AboveThreshold
            } else if margin >= 10.0 * residual_abs && relative_change <= 1e-4 {
                Classification::DiscreteCandidate
            } else {
                Classification::Inconclusive
            };
            CandidateRow { index: j + 1, value, margin, residual_abs, relative_change, classification }
        })
        .collect();
    let classes: Vec<Classification> = candidates.iter().map(|c| c.classification).collect();
    if let Some(r) = reports.last_mut() {
        r.classifications = classes;
    }
    let n_candidates = candidates.iter().filter(|c| c.classification == Classification::DiscreteCandidate).count();
    Ok(DetectionReport {
        epsilon,
        threshold,
        e1: ctx.e1,
        l_list: l_list.to_vec(),
        reports,
        candidates,
        n_candidates,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense_eigenvalues, Method};
    use crate::mesh::{make_rectangle, FemMatrices};

    fn square_section(h: f64) -> Arc<SectionData> {
        SectionData::new(FemMatrices::assemble(&make_rectangle(1.0, 1.0, h).unwrap()))
    }

    #[test]
    fn metric_examples() {
        let g = metric_tensor(0.0, 0.0);
        assert_eq!(g, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let g = metric_tensor(0.2, 0.0);
        assert!((g[0][0] - 1.04).abs() < 1e-15 && g[0][1] == 0.2);
        let p = Profile::new("sin(3*x) + 0.5*tanh(x)", "exp(-x^2)*cos(x)", 0.0, 0.0).unwrap();
        let xs: Vec<f64> = (0..100).map(|i| -5.0 + 0.1 * i as f64).collect();
        assert!(metric_check(&p, &xs).unwrap().pass);
    }

    #[test]
    fn matrix_free_products_match_csr() {
        let sec = square_section(0.25);
        let p = Profile::new("1 - 0.8*exp(-x^2)", "0.3*x*exp(-x^2)", 1.0, 0.0).unwrap();
        let td = assemble_tube(&p, sec, 3.0, 12, 0.7, 1e-2).unwrap();
        let (k, m) = td.to_csr();
        assert!(k.is_hermitian(1e-12 * k.max_abs()));
        let u: Vec<f64> = (0..td.dim()).map(|i| ((i * 7 + 3) as f64 * 0.31).sin()).collect();
        let mut y = vec![0.0; td.dim()];
        td.apply_k(&u, &mut y);
        let want = k.mul_vec(&u);
        for (a, b) in y.iter().zip(&want) {
            assert!((a - b).abs() < 1e-11 * k.max_abs());
        }
        td.apply_m(&u, &mut y);
        for (a, b) in y.iter().zip(m.mul_vec(&u)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn straight_tube_is_a_tensor_sum() {
        let sec = square_section(0.25);
        let td = assemble_tube(&Profile::straight(0.0, 0.0), sec.clone(), 1.0, 8, 1.0, 1e-12).unwrap();
        let (k, m) = td.to_csr();
        let tube = dense_eigenvalues(&k.to_dense(), &m.to_dense()).unwrap();
        let f = &sec.fem;
        let secv = dense_eigenvalues(&f.s.to_dense(), &f.m.to_dense()).unwrap();
        let n = td.nx - 1;
        let sxd = DMatrix::from_fn(n, n, |i, j| td.sx.get(i, j));
        let mxd = DMatrix::from_fn(n, n, |i, j| td.mx.get(i, j));
        let xv = dense_eigenvalues(&sxd, &mxd).unwrap();
        let mut sums: Vec<f64> = secv.iter().flat_map(|a| xv.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        for (a, b) in tube.iter().zip(&sums) {
            assert!((a - b).abs() < 1e-9 * b, "{a} {b}");
        }
    }

    #[test]
    fn thin_scaling_identity() {
        // x = εx̃ maps the ε-form with slope f' on (−L, L) onto ε⁻¹ times the
        // unit form with slope f'(ε·) on (−L/ε, L/ε); the mass scales by ε.
        let sec = square_section(0.25);
        let eps = 0.5;
        let p = Profile::new("1 - 0.8*exp(-x^2)", "0.2*exp(-x^2)", 1.0, 0.0).unwrap();
        let q = Profile::new("1 - 0.8*exp(-(0.5*x)^2)", "0.2*exp(-(0.5*x)^2)", 1.0, 0.0).unwrap();
        let a = assemble_tube(&p, sec.clone(), 4.0, 16, eps, 1e-3).unwrap();
        let b = assemble_tube(&q, sec, 8.0, 16, 1.0, 1e-3).unwrap();
        let (ka, ma) = a.to_csr();
        let (kb, mb) = b.to_csr();
        let dk = ka.to_dense() - kb.to_dense() / eps;
        assert!(dk.amax() < 1e-12 * ka.max_abs());
        let dm = ma.to_dense() - mb.to_dense() * eps;
        assert!(dm.amax() < 1e-15);
    }

    #[test]
    fn longitudinal_part_uses_scaled_slopes() {
        // Apart from the transverse weight, the ε-form equals the unit form
        // with slopes f'/ε, g'/ε.
        let sec = square_section(0.25);
        let eps = 0.25;
        let p = Profile::new("1 - 0.8*exp(-x^2)", "0.3*exp(-x^2)", 1.0, 0.0).unwrap();
        let q = Profile::new("4*(1 - 0.8*exp(-x^2))", "4*0.3*exp(-x^2)", 4.0, 0.0).unwrap();
        let a = assemble_tube(&p, sec.clone(), 3.0, 12, eps, 1e-3).unwrap();
        let b = assemble_tube(&q, sec, 3.0, 12, 1.0, 1e-2).unwrap();
        let (ka, _) = a.to_csr();
        let (kb, _) = b.to_csr();
        let mx = DMatrix::from_fn(11, 11, |i, j| a.mx.get(i, j));
        let tr = mx.kronecker(&a.section.fem.s.to_dense());
        let diff = ka.to_dense() - kb.to_dense() - &tr * (1.0 / (eps * eps) - 1.0);
        assert!(diff.amax() < 1e-12 * ka.max_abs());
    }

    #[test]
    fn block_solver_matches_sparse_solver() {
        let sec = square_section(1.0 / 8.0);
        let p = Profile::new("1 - 0.8*exp(-x^2)", "0", 1.0, 0.0).unwrap();
        let td = assemble_tube(&p, sec.clone(), 4.0, 64, 1.0, 1e-6).unwrap();
        let mut ctx = TubeContext::new(sec, [1.0, 0.0], 1.0, &EigOptions::default()).unwrap();
        let sparse = lowest_modes(&td, &mut ctx, 2, &TubeSolveOptions::default(), None).unwrap();
        assert_eq!(sparse.report.method, TubeMethod::Sparse);
        let opts = TubeSolveOptions { sparse_limit: 0, ..Default::default() };
        let block = lowest_modes(&td, &mut ctx, 2, &opts, None).unwrap();
        assert_eq!(block.report.method, TubeMethod::Block);
        for j in 0..2 {
            let (a, b) = (sparse.report.eigenvalues[j], block.report.eigenvalues[j]);
            assert!((a - b).abs() < 1e-9 * a, "{a} {b}");
            assert!(block.report.residuals[j] <= 1e-8);
        }
        assert!(sparse.report.eigenvalues[0] < ctx.threshold);
    }

    #[test]
    fn straight_tube_has_no_candidates() {
        let sec = square_section(0.25);
        let opts = TubeSolveOptions { eig: EigOptions { method: Method::Sparse, ..Default::default() }, ..Default::default() };
        let r = detect_discrete(&Profile::straight(0.0, 0.0), sec, 1.0, &[2.0, 3.0, 4.0], 0.125, 2, 1e-12, &opts).unwrap();
        assert_eq!(r.n_candidates, 0);
        assert!(r.monotone);
        // λ₁ = E₁ + (π/2L)² up to the longitudinal discretization.
        let want = r.e1 + (std::f64::consts::PI / 8.0).powi(2);
        assert!((r.reports[2].eigenvalues[0] - want).abs() < 0.02 * (want - r.e1));
    }
}
