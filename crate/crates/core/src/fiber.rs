//! Fiber operators `H(p)` of the straightened waveguide: band functions,
//! the threshold `E₁(0)` with its ground state, and the section constants
//! `A`, `B`, `C`, `Ã`.

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{solve_gevp_smallest, CsrMatrix, EigOptions, LinalgError};
use crate::mesh::{FemMatrices, Mesh};

/// Discretized fiber form
/// `ψ ↦ ∫ |ipψ − β₁∂₁ψ − β₂∂₂ψ|² + |∇ψ|²` at one momentum `p`.
#[derive(Debug, Clone)]
pub struct FiberProblem {
    pub p: f64,
    pub beta: [f64; 2],
    /// Real part of `K(p)`.
    pub k_re: CsrMatrix<f64>,
    /// Imaginary part of `K(p)`, absent when it vanishes identically.
    pub k_im: Option<CsrMatrix<f64>>,
    pub m: CsrMatrix<f64>,
}

impl FiberProblem {
    pub fn is_real(&self) -> bool {
        self.k_im.is_none()
    }

    pub fn k_complex(&self) -> CsrMatrix<Complex64> {
        match &self.k_im {
            None => self.k_re.to_complex(),
            Some(im) => CsrMatrix::linear_combination(&[
                (Complex64::new(1.0, 0.0), &self.k_re.to_complex()),
                (Complex64::new(0.0, 1.0), &im.to_complex()),
            ]),
        }
    }
}

/// `K(p) = p²M + (1+β₁²)D11 + (1+β₂²)D22 + β₁β₂(D12 + D12ᵀ) + ip(Cβ − Cβᵀ)`
/// with `Cβ = β₁C1 + β₂C2`, so that the form value is `xᴴ K(p) x`.
pub fn assemble_fiber(p: f64, beta1: f64, beta2: f64, fem: &FemMatrices) -> FiberProblem {
    let d12t = fem.d12.transpose();
    let k_re = CsrMatrix::linear_combination(&[
        (p * p, &fem.m),
        (1.0 + beta1 * beta1, &fem.d11),
        (1.0 + beta2 * beta2, &fem.d22),
        (beta1 * beta2, &fem.d12),
        (beta1 * beta2, &d12t),
    ]);
    let k_im = if p != 0.0 && (beta1 != 0.0 || beta2 != 0.0) {
        let c1t = fem.c1.transpose();
        let c2t = fem.c2.transpose();
        Some(CsrMatrix::linear_combination(&[
            (p * beta1, &fem.c1),
            (-p * beta1, &c1t),
            (p * beta2, &fem.c2),
            (-p * beta2, &c2t),
        ]))
    } else {
        None
    };
    FiberProblem { p, beta: [beta1, beta2], k_re, k_im, m: fem.m.clone() }
}

/// Eigenpairs of one fiber problem; vectors are M-orthonormal.
#[derive(Debug, Clone)]
pub struct FiberSolution {
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
}

pub fn solve_fiber(fp: &FiberProblem, nbands: usize, opts: &EigOptions) -> Result<FiberSolution, LinalgError> {
    if fp.is_real() {
        let r = solve_gevp_smallest(&fp.k_re, &fp.m, nbands, opts)?;
        Ok(FiberSolution {
            eigenvalues: r.eigenvalues,
            residuals: r.residuals,
            vectors: r
                .eigenvectors
                .into_iter()
                .map(|v| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect())
                .collect(),
        })
    } else {
        let r = solve_gevp_smallest(&fp.k_complex(), &fp.m.to_complex(), nbands, opts)?;
        Ok(FiberSolution { eigenvalues: r.eigenvalues, residuals: r.residuals, vectors: r.eigenvectors })
    }
}

/// Section constants built from the ground state `v₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    /// `∫ (∂₁v₁)²`
    pub a: f64,
    /// `∫ ∂₁v₁ ∂₂v₁`
    pub b: f64,
    /// `∫ (∂₂v₁)²`
    pub c: f64,
    /// `∫ y₁ (∂₁v₁)²`
    pub a_tilde: f64,
}

pub fn coefficients(v1: &[f64], fem: &FemMatrices) -> Coefficients {
    let q = |a: &CsrMatrix<f64>| a.form(v1, v1);
    Coefficients { a: q(&fem.d11), b: q(&fem.d12), c: q(&fem.d22), a_tilde: q(&fem.y1d11) }
}

/// Threshold data at `p = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct GroundData {
    pub beta: [f64; 2],
    /// `E₁(0)`, bottom of the essential spectrum.
    pub e1: f64,
    pub e2: f64,
    pub residual: f64,
    /// M-normalized ground state on the interior degrees of freedom.
    #[serde(skip)]
    pub v1: Vec<f64>,
    /// Whether every interior entry of `v₁` is strictly positive.
    pub positive: bool,
    pub coefficients: Coefficients,
    /// Set when `E₂(0) − E₁(0) ≤ 1e-8·E₁(0)`.
    pub degeneracy_warning: Option<String>,
}

pub fn threshold_from_fem(beta1: f64, beta2: f64, fem: &FemMatrices, opts: &EigOptions) -> Result<GroundData, LinalgError> {
    let fp = assemble_fiber(0.0, beta1, beta2, fem);
    let r = solve_gevp_smallest(&fp.k_re, &fp.m, 2.min(fem.dim()), opts)?;
    let mut v1 = r.eigenvectors[0].clone();
    let pivot = v1.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v1.iter_mut().for_each(|x| *x = -*x);
    }
    let e1 = r.eigenvalues[0];
    let e2 = r.eigenvalues.get(1).copied().unwrap_or(f64::INFINITY);
    let degeneracy_warning = (e2 - e1 <= 1e-8 * e1.abs())
        .then(|| format!("ground state not resolved as simple: E2 - E1 = {:e}", e2 - e1));
    Ok(GroundData {
        beta: [beta1, beta2],
        e1,
        e2,
        residual: r.residuals[0],
        positive: v1.iter().all(|&x| x > 0.0),
        coefficients: coefficients(&v1, fem),
        v1,
        degeneracy_warning,
    })
}

pub fn threshold(beta1: f64, beta2: f64, mesh: &Mesh, opts: &EigOptions) -> Result<GroundData, LinalgError> {
    threshold_from_fem(beta1, beta2, &FemMatrices::assemble(mesh), opts)
}

/// The default diagnostic momentum grid `{−3, −2.8, …, 3}`.
pub fn default_p_grid() -> Vec<f64> {
    (-15..=15).map(|k| k as f64 / 5.0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BandRow {
    pub p: f64,
    pub valid: bool,
    pub bands: Vec<f64>,
    pub residuals: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BandTable {
    pub beta: [f64; 2],
    pub nbands: usize,
    pub rows: Vec<BandRow>,
    /// Ground eigenvector at each grid point (empty for invalid rows).
    #[serde(skip)]
    pub ground_vectors: Vec<Vec<Complex64>>,
    /// `max |E_n(p) − E_n(−p)| / (1 + |E_n(p)|)` over mirrored grid pairs.
    pub symmetry_defect: f64,
    /// `min_p E₁(p) − E₁(0)`; negative values beyond solver tolerance would
    /// contradict the continuum lower bound.
    pub lower_bound_margin: Option<f64>,
    /// `E₁(p_max) > E₁(0) + 0.5 p_max²/(1+β₁²+β₂²)`
    pub growth_ok: Option<bool>,
}

impl BandTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p");
        for n in 1..=self.nbands {
            s.push_str(&format!(",E{n}"));
        }
        for n in 1..=self.nbands {
            s.push_str(&format!(",residual{n}"));
        }
        s.push_str("\r\n");
        for r in &self.rows {
            s.push_str(&fmt_num(r.p));
            for n in 0..self.nbands {
                s.push(',');
                if let Some(v) = r.bands.get(n) {
                    s.push_str(&fmt_num(*v));
                }
            }
            for n in 0..self.nbands {
                s.push(',');
                if let Some(v) = r.residuals.get(n) {
                    s.push_str(&fmt_num(*v));
                }
            }
            s.push_str("\r\n");
        }
        s
    }
}

/// Shortest representation that round-trips.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

pub fn band_structure(
    beta1: f64,
    beta2: f64,
    fem: &FemMatrices,
    p_grid: &[f64],
    nbands: usize,
    opts: &EigOptions,
) -> BandTable {
    let mut rows = Vec::with_capacity(p_grid.len());
    let mut ground_vectors = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let fp = assemble_fiber(p, beta1, beta2, fem);
        match solve_fiber(&fp, nbands, opts) {
            Ok(sol) => {
                ground_vectors.push(sol.vectors[0].clone());
                rows.push(BandRow { p, valid: true, bands: sol.eigenvalues, residuals: sol.residuals, error: None });
            }
            Err(e) => {
                ground_vectors.push(Vec::new());
                rows.push(BandRow { p, valid: false, bands: vec![], residuals: vec![], error: Some(e.to_string()) });
            }
        }
    }
    let mut symmetry_defect = 0.0f64;
    for a in rows.iter().filter(|r| r.valid) {
        if let Some(b) = rows.iter().find(|r| r.valid && r.p == -a.p) {
            for (x, y) in a.bands.iter().zip(&b.bands) {
                symmetry_defect = symmetry_defect.max((x - y).abs() / (1.0 + x.abs()));
            }
        }
    }
    let at_zero = rows.iter().find(|r| r.valid && r.p == 0.0).map(|r| r.bands[0]);
    let lower_bound_margin = at_zero.map(|e0| {
        rows.iter().filter(|r| r.valid).map(|r| r.bands[0] - e0).fold(f64::INFINITY, f64::min)
    });
    let growth_ok = at_zero.and_then(|e0| {
        let top = rows.iter().filter(|r| r.valid).max_by(|a, b| a.p.abs().total_cmp(&b.p.abs()))?;
        let pm = top.p;
        Some(top.bands[0] > e0 + 0.5 * pm * pm / (1.0 + beta1 * beta1 + beta2 * beta2))
    });
    BandTable { beta: [beta1, beta2], nbands, rows, ground_vectors, symmetry_defect, lower_bound_margin, growth_ok }
}

#[derive(Debug, Clone, Serialize)]
pub struct GaugeReport {
    pub beta1: f64,
    pub e1_zero: f64,
    /// `(p, E₁(p) − E₁(0) − p²/(1+β₁²))`
    pub deviations: Vec<(f64, f64)>,
    pub max_deviation: f64,
    /// `max |dev(p)| / (1 + p²)`
    pub max_scaled_deviation: f64,
}

/// Compares `E₁(p)` with the shifted threshold `E₁(0) + p²/(1+β₁²)`, which is
/// exact for `β₂ = 0` in the continuum.
pub fn gauge_check(beta1: f64, fem: &FemMatrices, p_grid: &[f64], opts: &EigOptions) -> Result<GaugeReport, LinalgError> {
    let e0 = solve_fiber(&assemble_fiber(0.0, beta1, 0.0, fem), 1, opts)?.eigenvalues[0];
    let mut deviations = Vec::with_capacity(p_grid.len());
    let mut max_deviation = 0.0f64;
    let mut max_scaled = 0.0f64;
    for &p in p_grid {
        let e = solve_fiber(&assemble_fiber(p, beta1, 0.0, fem), 1, opts)?.eigenvalues[0];
        let d = e - e0 - p * p / (1.0 + beta1 * beta1);
        max_deviation = max_deviation.max(d.abs());
        max_scaled = max_scaled.max(d.abs() / (1.0 + p * p));
        deviations.push((p, d));
    }
    Ok(GaugeReport { beta1, e1_zero: e0, deviations, max_deviation, max_scaled_deviation: max_scaled })
}

/// Least-squares slope of `log|value − exact|` against `log h`.
pub fn convergence_order(hs: &[f64], values: &[f64], exact: f64) -> f64 {
    let pts: Vec<(f64, f64)> = hs.iter().zip(values).map(|(h, v)| (h.ln(), (v - exact).abs().ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_disk, make_rectangle};
    use std::f64::consts::PI;

    fn square(h: f64) -> FemMatrices {
        FemMatrices::assemble(&make_rectangle(1.0, 1.0, h).unwrap())
    }

    /// Direct evaluation of the fiber form with the 3-point edge-midpoint
    /// rule, which is exact for the quadratic integrands of P1 functions.
    fn form_by_quadrature(mesh: &Mesh, p: f64, beta: [f64; 2], x: &[Complex64]) -> f64 {
        let map = mesh.dof_map();
        let val = |v: usize| map[v].map_or(Complex64::new(0.0, 0.0), |d| x[d]);
        let mut total = 0.0;
        for tri in mesh.triangles() {
            let pts = tri.map(|v| mesh.vertices()[v]);
            let area = 0.5
                * ((pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1]) - (pts[2][0] - pts[0][0]) * (pts[1][1] - pts[0][1]));
            let u = tri.map(val);
            // Gradient of the linear interpolant.
            let det = 2.0 * area;
            let g1 = (u[0] * (pts[1][1] - pts[2][1]) + u[1] * (pts[2][1] - pts[0][1]) + u[2] * (pts[0][1] - pts[1][1])) / det;
            let g2 = (u[0] * (pts[2][0] - pts[1][0]) + u[1] * (pts[0][0] - pts[2][0]) + u[2] * (pts[1][0] - pts[0][0])) / det;
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                let psi = (u[a] + u[b]) * 0.5;
                let w = Complex64::new(0.0, p) * psi - g1 * beta[0] - g2 * beta[1];
                total += area / 3.0 * (w.norm_sqr() + g1.norm_sqr() + g2.norm_sqr());
            }
        }
        total
    }

    #[test]
    fn matrix_matches_quadratic_form() {
        let mesh = make_rectangle(1.0, 1.5, 0.25).unwrap();
        let fem = FemMatrices::assemble(&mesh);
        let n = fem.dim();
        let x: Vec<Complex64> =
            (0..n).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.91).cos())).collect();
        for (p, beta) in [(0.0, [0.0, 0.0]), (1.3, [0.7, -0.4]), (-2.0, [1.0, 0.0])] {
            let k = assemble_fiber(p, beta[0], beta[1], &fem).k_complex();
            let got = k.form(&x, &x);
            let want = form_by_quadrature(&mesh, p, beta, &x);
            assert!((got.re - want).abs() < 1e-12 * want, "{p} {beta:?} {got} {want}");
            assert!(got.im.abs() < 1e-12 * want);
        }
    }

    #[test]
    fn structural_examples() {
        let fem = square(0.25);
        let k0 = assemble_fiber(0.0, 0.0, 0.0, &fem);
        assert!(k0.is_real());
        let diff = CsrMatrix::linear_combination(&[(1.0, &k0.k_re), (-1.0, &fem.s)]);
        assert_eq!(diff.max_abs(), 0.0);
        let k1 = assemble_fiber(1.0, 0.0, 0.0, &fem);
        let diff = CsrMatrix::linear_combination(&[(1.0, &k1.k_re), (-1.0, &fem.s), (-1.0, &fem.m)]);
        assert!(diff.max_abs() < 1e-15);
        let kp = assemble_fiber(1.0, 1.0, 0.0, &fem).k_complex();
        let km = assemble_fiber(-1.0, 1.0, 0.0, &fem).k_complex();
        assert!(kp.is_hermitian(1e-14));
        assert!(kp.values().iter().any(|v| v.im != 0.0));
        let conj = km.map(|v| v.conj());
        let d = CsrMatrix::linear_combination(&[(Complex64::new(1.0, 0.0), &kp), (Complex64::new(-1.0, 0.0), &conj)]);
        assert!(d.max_abs() < 1e-15);
    }

    #[test]
    fn square_thresholds_and_coefficients() {
        let fem = square(1.0 / 64.0);
        let opts = EigOptions::default();
        let sol = solve_fiber(&assemble_fiber(0.0, 0.0, 0.0, &fem), 3, &opts).unwrap();
        let pi2 = PI * PI;
        assert!((sol.eigenvalues[0] - 2.0 * pi2).abs() < 0.005 * 2.0 * pi2);
        assert!((sol.eigenvalues[1] - 5.0 * pi2).abs() < 0.005 * 5.0 * pi2);
        assert!((sol.eigenvalues[2] - 5.0 * pi2).abs() < 0.005 * 5.0 * pi2);
        let gd = threshold_from_fem(0.0, 0.0, &fem, &opts).unwrap();
        assert!(gd.positive);
        assert!(gd.degeneracy_warning.is_none());
        let c = gd.coefficients;
        assert!((c.a - pi2).abs() < 0.01 * pi2);
        assert!((c.c - pi2).abs() < 0.01 * pi2);
        assert!(c.b.abs() <= 1e-6 * c.a);
        assert!((c.a_tilde - pi2 / 2.0).abs() < 0.01 * pi2 / 2.0);
        assert!(c.b * c.b <= c.a * c.c);
        let s = fem.s.form(&gd.v1, &gd.v1);
        assert!((c.a + c.c - s).abs() <= 1e-12 * s);
        let gd1 = threshold_from_fem(1.0, 0.0, &fem, &opts).unwrap();
        assert!((gd1.e1 - 3.0 * pi2).abs() < 0.005 * 3.0 * pi2);
        assert!(gd1.positive);
        // The discrete identity E = (1+β₁²)A + 2β₁β₂B + (1+β₂²)C.
        let c1 = gd1.coefficients;
        assert!((2.0 * c1.a + c1.c - gd1.e1).abs() < 1e-9 * gd1.e1);
    }

    #[test]
    fn centered_square_has_vanishing_a_tilde() {
        let mesh = make_rectangle(1.0, 1.0, 1.0 / 32.0).unwrap().translated(-0.5, -0.5);
        let gd = threshold(0.0, 0.0, &mesh, &EigOptions::default()).unwrap();
        assert!(gd.coefficients.a_tilde.abs() <= 1e-6 * gd.coefficients.a);
    }

    #[test]
    fn disk_threshold() {
        let mesh = make_disk(1.0, 0.05).unwrap();
        let gd = threshold(0.0, 0.0, &mesh, &EigOptions::default()).unwrap();
        let j01_sq = 2.404_825_557_695_773f64.powi(2);
        assert!((gd.e1 - j01_sq).abs() < 0.01 * j01_sq, "{}", gd.e1);
        assert!(gd.positive);
    }

    #[test]
    fn bands_without_shear_are_exact_shifts() {
        let fem = square(1.0 / 16.0);
        let t = band_structure(0.0, 0.0, &fem, &[-1.0, 0.0, 0.5, 1.0], 2, &EigOptions::default());
        let e0 = t.rows[1].bands[0];
        for r in &t.rows {
            assert!((r.bands[0] - e0 - r.p * r.p).abs() < 1e-10);
        }
        assert!(t.symmetry_defect < 1e-9);
        let csv = t.to_csv();
        assert!(csv.starts_with("p,E1,E2,residual1,residual2\r\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn gauge_identity() {
        let fem = square(1.0 / 32.0);
        let grid = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0];
        let opts = EigOptions::default();
        let g0 = gauge_check(0.0, &fem, &grid, &opts).unwrap();
        assert!(g0.max_deviation < 1e-9);
        let g = gauge_check(1.0, &fem, &grid, &opts).unwrap();
        assert!(g.max_scaled_deviation < 0.01);
        let t = band_structure(1.0, 0.0, &fem, &grid, 2, &opts);
        assert!(t.symmetry_defect < 1e-9);
        assert!(t.lower_bound_margin.unwrap() > -1e-8);
        assert!(t.growth_ok.unwrap());
    }

    #[test]
    fn order_fit_recovers_slope() {
        let hs = [0.1, 0.05, 0.025];
        let vals: Vec<f64> = hs.iter().map(|h| 1.0 + 3.0 * h * h).collect();
        assert!((convergence_order(&hs, &vals, 1.0) - 2.0).abs() < 1e-12);
    }
}
