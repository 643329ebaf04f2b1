//! Reduced longitudinal problems: the effective potential `V`, the operator
//! `−d²/dx² + V/ε²` on a Dirichlet box, and the large-coupling sweep of
//! `−d²/dx² + μW`.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::fiber::Coefficients;
use crate::linalg::SymTridiagonal;
use crate::profile::Profile;
use crate::quad::simpson_uniform;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffectiveError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("grid too short: slope deviation {deviation:.3e} at x = ±{x_max} exceeds {tol:.1e}")]
    GridTooShort { x_max: f64, deviation: f64, tol: f64 },
    #[error("box too small: |V(±{x_max})|/ε² = {value:.3e} exceeds the edge tolerance {tol:.1e}")]
    BoxTooSmall { x_max: f64, value: f64, tol: f64 },
    #[error("grid under-resolved: {0}")]
    UnderResolved(String),
    #[error("invalid input: {0}")]
    BadInput(String),
}

/// Uniform sampling grid on `[−x_max, x_max]` with an odd number of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub x_max: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(x_max: f64, points: usize) -> Self {
        Grid { x_max, points: points | 1 }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.x_max / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| -self.x_max + i as f64 * h).collect()
    }
}

/// Effective potential of a profile over a given cross-section.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveModel {
    #[serde(skip)]
    pub profile: Profile,
    pub coefficients: Coefficients,
    pub epsilon: f64,
    pub grid: Grid,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `∫V` by composite Simpson on the grid.
    pub integral: f64,
    pub v_min: f64,
    pub argmin: f64,
    pub v_max_abs: f64,
}

/// `V = A(f'² − β₁²) + 2B(f'g' − β₁β₂) + C(g'² − β₂²)`.
pub fn potential_value(profile: &Profile, c: &Coefficients, x: f64) -> Result<f64, ExprError> {
    let (f, g) = profile.slopes(x)?;
    let (b1, b2) = (profile.beta1, profile.beta2);
    Ok(c.a * (f * f - b1 * b1) + 2.0 * c.b * (f * g - b1 * b2) + c.c * (g * g - b2 * b2))
}

impl EffectiveModel {
    pub fn potential(&self, x: f64) -> Result<f64, ExprError> {
        potential_value(&self.profile, &self.coefficients, x)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        EffectiveModel { epsilon, ..self.clone() }
    }

    /// CSV table `x,V`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,V\r\n");
        for (x, v) in self.x.iter().zip(&self.v) {
            s.push_str(&format!("{},{}\r\n", fmt_num(*x), fmt_num(*v)));
        }
        s
    }
}

fn fmt_num(x: f64) -> String {
    crate::fiber::fmt_num(x)
}

pub fn build_effective(
    profile: &Profile,
    coefficients: Coefficients,
    grid: Grid,
    epsilon: f64,
    tail_tol: f64,
) -> Result<EffectiveModel, EffectiveError> {
    if !(grid.x_max > 0.0) || grid.points < 3 || !(epsilon > 0.0) {
        return Err(EffectiveError::BadInput("need x_max > 0, at least 3 points and ε > 0".into()));
    }
    let deviation = profile.end_deviation(grid.x_max)?;
    if deviation > tail_tol {
        return Err(EffectiveError::GridTooShort { x_max: grid.x_max, deviation, tol: tail_tol });
    }
    let x = grid.nodes();
    let v = x.iter().map(|&t| potential_value(profile, &coefficients, t)).collect::<Result<Vec<_>, _>>()?;
    let integral = simpson_uniform(&v, grid.step());
    let (imin, &v_min) = v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty grid");
    let v_max_abs = v.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    Ok(EffectiveModel {
        profile: profile.clone(),
        coefficients,
        epsilon,
        grid,
        argmin: x[imin],
        x,
        v,
        integral,
        v_min,
        v_max_abs,
    })
}

/// Negative spectrum of `−d²/dx² + U` on `(−x_max, x_max)` with Dirichlet ends,
/// discretized by second-order central differences.
#[derive(Debug, Clone, Serialize)]
pub struct Schrodinger1D {
    pub x_max: f64,
    pub hx: f64,
    pub interior_points: usize,
    pub tol_edge: f64,
    /// Eigenvalues below `−tol_edge`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues within `tol_edge` of the continuum edge 0.
    pub marginal: Vec<f64>,
    /// Grid-normalized eigenvectors (`Σ v² hx = 1`) matching `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
}

impl Schrodinger1D {
    pub fn count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Count with every marginal eigenvalue included.
    pub fn count_upper(&self) -> usize {
        self.eigenvalues.len() + self.marginal.len()
    }
}

fn fd_operator(u: &[f64], hx: f64) -> SymTridiagonal {
    let n = u.len();
    let ih2 = 1.0 / (hx * hx);
    SymTridiagonal::new(u.iter().map(|&v| 2.0 * ih2 + v).collect(), vec![-ih2; n.saturating_sub(1)])
}

/// Interior nodes of the box for spacing close to `hx` (rounded so the
/// spacing divides `2·x_max`).
pub fn box_nodes(x_max: f64, hx: f64) -> (Vec<f64>, f64) {
    let cells = ((2.0 * x_max / hx).ceil() as usize).max(2);
    let h = 2.0 * x_max / cells as f64;
    ((1..cells).map(|i| -x_max + i as f64 * h).collect(), h)
}

/// FD matrix of `−d²/dx² + u(x)` on the interior box nodes.
pub fn fd_matrix<F>(u: F, x_max: f64, hx: f64) -> Result<(SymTridiagonal, Vec<f64>, f64), ExprError>
where
    F: Fn(f64) -> Result<f64, ExprError>,
{
    let (x, h) = box_nodes(x_max, hx);
    let vals = x.iter().map(|&t| u(t)).collect::<Result<Vec<_>, _>>()?;
    Ok((fd_operator(&vals, h), x, h))
}

/// Eigenvalues of `−d²/dx² + u` below `−tol_edge`, plus the marginal ones.
pub fn solve_schrodinger<F>(u: F, x_max: f64, hx: f64, tol_edge: f64) -> Result<Schrodinger1D, ExprError>
where
    F: Fn(f64) -> Result<f64, ExprError>,
{
    let (t, _, h) = fd_matrix(u, x_max, hx)?;
    let count = t.count_below(-tol_edge);
    let upper = t.count_below(tol_edge);
    let eigenvalues: Vec<f64> = (0..count).map(|k| t.eigenvalue(k)).collect();
    let marginal: Vec<f64> = (count..upper).map(|k| t.eigenvalue(k)).collect();
    let eigenvectors = eigenvalues
        .iter()
        .map(|&lam| {
            let v = t.eigenvector(lam);
            let s = h.sqrt().recip();
            v.into_iter().map(|c| c * s).collect()
        })
        .collect();
    Ok(Schrodinger1D { x_max, hx: h, interior_points: t.dim(), tol_edge, eigenvalues, marginal, eigenvectors })
}

/// Measure of the sublevel set `{V ≤ V_min/2}` on the model grid.
pub fn well_width(em: &EffectiveModel) -> f64 {
    if em.v_min >= 0.0 {
        return 0.0;
    }
    em.v.iter().filter(|&&v| v <= 0.5 * em.v_min).count() as f64 * em.grid.step()
}

/// Bound states of `−d²/dx² + V/ε²` with `tol_edge = 1e-6·max|V|/ε²`.
pub fn solve_bound_states(em: &EffectiveModel, x_max: f64, hx: f64) -> Result<Schrodinger1D, EffectiveError> {
    if !(x_max > 0.0 && hx > 0.0 && hx < x_max) {
        return Err(EffectiveError::BadInput(format!("box x_max = {x_max}, hx = {hx}")));
    }
    let width = well_width(em);
    if width > 0.0 && hx > width / 20.0 {
        return Err(EffectiveError::UnderResolved(format!("hx = {hx} exceeds well width / 20 = {}", width / 20.0)));
    }
    let scale = em.epsilon.powi(-2);
    let tol_edge = 1e-6 * em.v_max_abs * scale;
    let edge = em.potential(-x_max)?.abs().max(em.potential(x_max)?.abs()) * scale;
    if edge > tol_edge && tol_edge > 0.0 {
        return Err(EffectiveError::BoxTooSmall { x_max, value: edge, tol: tol_edge });
    }
    Ok(solve_schrodinger(|x| Ok(em.potential(x)? * scale), x_max, hx, tol_edge)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CountRow {
    pub epsilon: f64,
    pub count: usize,
    /// Equal to `count` unless marginal eigenvalues exist.
    pub count_upper: usize,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountSweep {
    pub rows: Vec<CountRow>,
    /// Counts never decrease as ε decreases.
    pub nondecreasing: bool,
}

impl CountSweep {
    /// CSV `epsilon,count,count_upper,lambda1..lambdaK` padded to the widest row.
    pub fn to_csv(&self) -> String {
        let width = self.rows.iter().map(|r| r.eigenvalues.len()).max().unwrap_or(0);
        let mut s = String::from("epsilon,count,count_upper");
        for k in 1..=width {
            s.push_str(&format!(",lambda{k}"));
        }
        s.push_str("\r\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}", fmt_num(r.epsilon), r.count, r.count_upper));
            for k in 0..width {
                s.push(',');
                if let Some(v) = r.eigenvalues.get(k) {
                    s.push_str(&fmt_num(*v));
                }
            }
            s.push_str("\r\n");
        }
        s
    }
}

pub fn count_vs_epsilon(em: &EffectiveModel, eps_list: &[f64], x_max: f64, hx: f64) -> Result<CountSweep, EffectiveError> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(EffectiveError::BadInput("ε list must be positive and strictly descending".into()));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let s = solve_bound_states(&em.with_epsilon(eps), x_max, hx)?;
        rows.push(CountRow { epsilon: eps, count: s.count(), count_upper: s.count_upper(), eigenvalues: s.eigenvalues });
    }
    let nondecreasing = rows.windows(2).all(|w| w[1].count >= w[0].count);
    Ok(CountSweep { rows, nondecreasing })
}

/// Minimum of `w` over `[−x_max, x_max]`: dense sampling, then golden-section
/// refinement around the best sample.
pub fn minimize_on_interval(w: &Expr, x_max: f64, samples: usize) -> Result<(f64, f64), ExprError> {
    let n = samples.max(3);
    let h = 2.0 * x_max / (n - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..n {
        let v = w.eval(-x_max + i as f64 * h)?;
        if v < best.1 {
            best = (i, v);
        }
    }
    let centre = -x_max + best.0 as f64 * h;
    let (mut a, mut b) = ((centre - h).max(-x_max), (centre + h).min(x_max));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (w.eval(c)?, w.eval(d)?);
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + centre.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = w.eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = w.eval(d)?;
        }
    }
    let xm = 0.5 * (a + b);
    let fm = w.eval(xm)?;
    Ok(if fm < best.1 { (xm, fm) } else { (centre, best.1) })
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticRow {
    pub mu: f64,
    pub hx: f64,
    pub lambda: f64,
    /// `λ_j(N_μ)/μ`.
    pub ratio: f64,
    /// `|λ_j/μ − W_min|`.
    pub gap: f64,
    /// `|λ_j(hx) − λ_j(hx/2)|`.
    pub drift: f64,
    /// `λ₁(N_μ) ≥ μ·W_min − 1e-9`.
    pub lower_bound_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticTable {
    pub j: usize,
    pub x_max: f64,
    pub w_min: f64,
    pub w_argmin: f64,
    pub rows: Vec<AsymptoticRow>,
    pub gap_decreasing: bool,
}

impl AsymptoticTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mu,hx,lambda,ratio,gap,drift,lower_bound_ok\r\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\r\n",
                fmt_num(r.mu),
                fmt_num(r.hx),
                fmt_num(r.lambda),
                fmt_num(r.ratio),
                fmt_num(r.gap),
                fmt_num(r.drift),
                r.lower_bound_ok
            ));
        }
        s
    }
}

/// Sweep of `λ_j(N_μ)/μ` for `N_μ = −d²/dx² + μW` on `(−x_max, x_max)`.
/// The spacing follows `hx ≤ (2μ·max|W|)^{-1/2}/10` (and at most `x_max/500`);
/// a second solve at `hx/2` guards against under-resolution.
pub fn asymptotic_slope(w: &Expr, mus: &[f64], j: usize, x_max: f64) -> Result<AsymptoticTable, EffectiveError> {
    if j == 0 || mus.is_empty() || mus.iter().any(|&m| !(m > 0.0)) || mus.windows(2).any(|p| p[1] <= p[0]) {
        return Err(EffectiveError::BadInput("need j ≥ 1 and ascending positive μ".into()));
    }
    let (w_argmin, w_min) = minimize_on_interval(w, x_max, 20_001)?;
    let (_, samples) = {
        let g = Grid::new(x_max, 20_001);
        let v = g.nodes().iter().map(|&t| w.eval(t)).collect::<Result<Vec<_>, _>>()?;
        (g, v)
    };
    let w_abs = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rows = Vec::with_capacity(mus.len());
    for &mu in mus {
        let mut hx = x_max / 500.0;
        if w_abs > 0.0 {
            hx = hx.min((2.0 * mu * w_abs).powf(-0.5) / 10.0);
        }
        let eig = |h: f64| -> Result<(f64, f64, f64), EffectiveError> {
            let (t, _, h_used) = fd_matrix(|x| Ok(mu * w.eval(x)?), x_max, h)?;
            if t.dim() < j {
                return Err(EffectiveError::BadInput(format!("box has fewer than {j} nodes")));
            }
            Ok((t.eigenvalue(j - 1), t.eigenvalue(0), h_used))
        };
        let (lam, lam1, h_used) = eig(hx)?;
        let (lam_fine, _, _) = eig(hx / 2.0)?;
        let drift = (lam - lam_fine).abs();
        if drift > 1e-3 * lam_fine.abs().max(1.0) {
            return Err(EffectiveError::UnderResolved(format!("μ = {mu}: eigenvalue drift {drift:.3e} between hx and hx/2")));
        }
        let ratio = lam / mu;
        rows.push(AsymptoticRow {
            mu,
            hx: h_used,
            lambda: lam,
            ratio,
            gap: (ratio - w_min).abs(),
            drift,
            lower_bound_ok: lam1 >= mu * w_min - 1e-9,
        });
    }
    let gap_decreasing = rows.windows(2).all(|p| p[1].gap < p[0].gap);
    Ok(AsymptoticTable { j, x_max, w_min, w_argmin, rows, gap_decreasing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn square_coefficients() -> Coefficients {
        Coefficients { a: PI * PI, b: 0.0, c: PI * PI, a_tilde: PI * PI / 2.0 }
    }

    fn gaussian_model(eps: f64) -> EffectiveModel {
        let p = Profile::new("1 - 0.8*exp(-x^2)", "0", 1.0, 0.0).unwrap();
        build_effective(&p, square_coefficients(), Grid::new(10.0, 4001), eps, 1e-10).unwrap()
    }

    fn dense_negative(t: &SymTridiagonal) -> Vec<f64> {
        let n = t.dim();
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t.d[i]
            } else if i + 1 == j {
                t.e[i]
            } else if j + 1 == i {
                t.e[j]
            } else {
                0.0
            }
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().filter(|&v| v < 0.0).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn straight_profile_has_no_potential() {
        let p = Profile::straight(0.7, -0.2);
        let c = Coefficients { a: 3.0, b: 0.4, c: 2.0, a_tilde: 0.0 };
        let em = build_effective(&p, c, Grid::new(5.0, 101), 1.0, 1e-12).unwrap();
        assert!(em.v.iter().all(|v| v.abs() < 1e-14));
        assert_eq!(em.integral, 0.0);
        assert_eq!(solve_bound_states(&em, 5.0, 0.01).unwrap().count(), 0);
    }

    #[test]
    fn gaussian_well_integral_and_minimum() {
        let em = gaussian_model(1.0);
        let exact = PI * PI * (-1.6 * PI.sqrt() + 0.64 * (PI / 2.0).sqrt());
        assert!((em.integral - exact).abs() < 1e-9 * exact.abs());
        assert!((exact + 20.073).abs() < 1e-3);
        assert!((em.v_min - PI * PI * (0.04 - 1.0)).abs() < 1e-12);
        assert_eq!(em.argmin, 0.0);
    }

    #[test]
    fn cross_term_vanishes_at_the_tails() {
        let p = Profile::new("1 + exp(-x^2)", "0.5 + 0.3*exp(-x^2)", 1.0, 0.5).unwrap();
        let c = Coefficients { a: 2.0, b: 0.7, c: 3.0, a_tilde: 0.0 };
        assert!(potential_value(&p, &c, 30.0).unwrap().abs() < 1e-14);
        let x: f64 = 0.3;
        let (f, g) = (1.0 + (-x * x).exp(), 0.5 + 0.3 * (-x * x).exp());
        let want = 2.0 * (f * f - 1.0) + 1.4 * (f * g - 0.5) + 3.0 * (g * g - 0.25);
        assert!((potential_value(&p, &c, x).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn short_grid_is_rejected() {
        let p = Profile::new("1 - 0.8*exp(-x^2)", "0", 1.0, 0.0).unwrap();
        let e = build_effective(&p, square_coefficients(), Grid::new(2.0, 101), 1.0, 1e-8).unwrap_err();
        assert!(matches!(e, EffectiveError::GridTooShort { .. }));
    }

    #[test]
    fn counts_match_dense_reference() {
        let base = gaussian_model(1.0);
        let sweep = count_vs_epsilon(&base, &[1.0, 0.5, 0.25, 0.125], 10.0, 0.02).unwrap();
        assert!(sweep.nondecreasing);
        assert!(sweep.rows[3].count >= 4);
        for row in &sweep.rows {
            let em = base.with_epsilon(row.epsilon);
            let s = 1.0 / (row.epsilon * row.epsilon);
            let (t, _, _) = fd_matrix(|x| Ok(em.potential(x)? * s), 10.0, 0.02).unwrap();
            assert!(t.dim() <= 2000);
            let dense = dense_negative(&t);
            assert_eq!(dense.len(), row.count);
            for (a, b) in dense.iter().zip(&row.eigenvalues) {
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} {b}");
            }
        }
    }

    #[test]
    fn square_well_matches_matching_condition() {
        // Even ground state of V = −1 on (−1, 1): k tan k = √(1 − k²), E = k² − 1.
        let g = |k: f64| k * k.tan() - (1.0 - k * k).sqrt();
        let (mut lo, mut hi) = (0.1, 0.99);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let exact = lo * lo - 1.0;
        // Grid nodes straddle the jumps at cell midpoints.
        let hx = 2.0 / 2001.0;
        let well = |x: f64| Ok(if x.abs() < 1.0 { -1.0 } else { 0.0 });
        let s = solve_schrodinger(well, 2001.0 * hx * 5.0, hx, 1e-8).unwrap();
        assert!((s.eigenvalues[0] - exact).abs() < 1e-4, "{} {exact}", s.eigenvalues[0]);
        let norm: f64 = s.eigenvectors[0].iter().map(|v| v * v).sum::<f64>() * s.hx;
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigenvalues_decrease_with_box_size() {
        let em = gaussian_model(0.5);
        let mut prev: Option<Vec<f64>> = None;
        for x in [10.0, 20.0, 40.0] {
            let s = solve_schrodinger(|t| Ok(em.potential(t)? * 4.0), x, 0.01, 0.0).unwrap();
            if let Some(p) = &prev {
                for (a, b) in s.eigenvalues.iter().zip(p) {
                    assert!(*a <= *b + 1e-10);
                }
            }
            prev = Some(s.eigenvalues);
        }
    }

    #[test]
    fn constant_w_gives_box_shift() {
        let w = parse("-0.7").unwrap();
        let t = asymptotic_slope(&w, &[100.0], 1, 20.0).unwrap();
        let r = &t.rows[0];
        assert!((r.ratio + 0.7 - PI * PI / (100.0 * 1600.0)).abs() < 1e-6);
        assert!(r.gap < 1e-3);
        assert!(r.lower_bound_ok);
    }

    #[test]
    fn gaussian_w_approaches_minimum() {
        let w = parse("-exp(-x^2)").unwrap();
        let t = asymptotic_slope(&w, &[1e2, 1e3, 1e4], 1, 20.0).unwrap();
        assert!((t.w_min + 1.0).abs() < 1e-12);
        assert!(t.gap_decreasing);
        assert!(t.rows[2].gap <= 0.02);
        assert!(t.rows.iter().all(|r| r.lower_bound_ok));
        // Harmonic approximation: λ₁ ≈ −μ + √μ.
        for r in &t.rows {
            assert!((r.lambda - (-r.mu + r.mu.sqrt())).abs() < 0.05 * r.mu.sqrt());
        }
        let t2 = asymptotic_slope(&w, &[1e2, 1e3, 1e4], 2, 20.0).unwrap();
        assert!(t2.gap_decreasing);
        for (a, b) in t.rows.iter().zip(&t2.rows) {
            assert!(b.gap > a.gap);
        }
    }

    #[test]
    fn golden_section_finds_offset_minimum() {
        let w = parse("(x - 0.123)^2 - 2").unwrap();
        let (x, v) = minimize_on_interval(&w, 5.0, 101).unwrap();
        assert!((x - 0.123).abs() < 1e-6);
        assert!((v + 2.0).abs() < 1e-12);
    }
}
