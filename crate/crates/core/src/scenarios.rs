//! Bundled end-to-end scenarios with closed-form or cross-module oracles,
//! shared by the acceptance suite and the `verify-all` command.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::certificates::{
    ode_family_residual, thm12_certificate, thm13_certificate, thm14_trial_count, Details, SignClass, Thm13Options,
};
use crate::effective1d::{asymptotic_slope, build_effective, count_vs_epsilon, fd_matrix, solve_bound_states, Grid};
use crate::expr::parse;
use crate::fiber::{assemble_fiber, convergence_order, gauge_check, threshold, threshold_from_fem};
use crate::full3d::{assemble_tube, detect_discrete, metric_check, SectionData, TubeSolveOptions};
use crate::linalg::{dense_eigenvalues, solve_gevp_smallest, EigOptions, Method};
use crate::mesh::{make_disk, make_rectangle, refine_uniform, FemMatrices};
use crate::profile::Profile;

/// `j₀,₁`, first zero of the Bessel function `J₀`.
pub const BESSEL_J01: f64 = 2.404_825_557_695_773;

/// Balanced slope offset: smallest root of `∫(f'² − 1) = 0` for
/// `f' = 1 + x e^{−x²} − c₀ e^{−x²}`.
pub fn balanced_offset() -> f64 {
    2f64.sqrt() - 7f64.sqrt() / 2.0
}

pub fn gaussian_profile() -> Profile {
    Profile::new("1 - 0.8*exp(-x^2)", "0", 1.0, 0.0).expect("bundled profile")
}

pub fn balanced_profile() -> Profile {
    Profile::new(&format!("1 + x*exp(-x^2) - {:?}*exp(-x^2)", balanced_offset()), "0", 1.0, 0.0)
        .expect("bundled profile")
}

/// Closed form of `∫V` for the Gaussian profile with coefficient `A`:
/// `A(−1.6√π + 0.64√(π/2))`.
pub fn gaussian_integral(a: f64) -> f64 {
    a * (-1.6 * PI.sqrt() + 0.64 * (PI / 2.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    /// Resolutions stated in the acceptance criteria.
    Full,
    /// Coarser tube resolution for quick checks.
    Quick,
}

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<24} {}  {}  [{:.1} s]",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.detail,
            self.seconds
        )
    }
}

type Outcome = Result<(bool, String), String>;

fn timed(id: usize, name: &'static str, f: impl FnOnce() -> Outcome) -> Criterion {
    let t = Instant::now();
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    Criterion { id, name, pass, detail, seconds: t.elapsed().as_secs_f64() }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn square_fem(h: f64) -> Result<FemMatrices, String> {
    Ok(FemMatrices::assemble(&make_rectangle(1.0, 1.0, h).map_err(err)?))
}

pub fn threshold_oracle() -> Criterion {
    timed(1, "threshold-oracle", || {
        let opts = EigOptions::default();
        let exact = 2.0 * PI * PI;
        let mut mesh = make_rectangle(1.0, 1.0, 1.0 / 16.0).map_err(err)?;
        let mut hs = vec![1.0 / 16.0];
        let mut es = vec![threshold(0.0, 0.0, &mesh, &opts).map_err(err)?.e1];
        for _ in 0..2 {
            mesh = refine_uniform(&mesh);
            hs.push(hs.last().unwrap() / 2.0);
            es.push(threshold(0.0, 0.0, &mesh, &opts).map_err(err)?.e1);
        }
        let order = convergence_order(&hs, &es, exact);
        let e = *es.last().unwrap();
        let pass = rel(e, exact) <= 0.005 && (1.8..=2.2).contains(&order);
        Ok((pass, format!("E1(h=1/64) = {e:.6} (rel err {:.2e} vs 2pi^2), order {order:.3}", rel(e, exact))))
    })
}

pub fn anisotropic_oracle() -> Criterion {
    timed(2, "anisotropic-oracle", || {
        let opts = EigOptions::default();
        let sq = threshold_from_fem(1.0, 0.0, &square_fem(1.0 / 64.0)?, &opts).map_err(err)?.e1;
        let disk = threshold(0.0, 0.0, &make_disk(1.0, 0.05).map_err(err)?, &opts).map_err(err)?.e1;
        let (r1, r2) = (rel(sq, 3.0 * PI * PI), rel(disk, BESSEL_J01 * BESSEL_J01));
        Ok((
            r1 <= 0.005 && r2 <= 0.01,
            format!("square beta=(1,0): {sq:.6} (rel {r1:.2e} vs 3pi^2); disk: {disk:.6} (rel {r2:.2e} vs j01^2)"),
        ))
    })
}

pub fn gauge_identity() -> Criterion {
    timed(3, "gauge-identity", || {
        let opts = EigOptions::default();
        let grid = [0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0];
        let coarse = gauge_check(1.0, &square_fem(1.0 / 32.0)?, &grid, &opts).map_err(err)?;
        let fine = gauge_check(1.0, &square_fem(1.0 / 64.0)?, &grid, &opts).map_err(err)?;
        let ratio = coarse.max_deviation / fine.max_deviation;
        let pass = fine.max_scaled_deviation <= 0.01 && coarse.max_scaled_deviation <= 0.01 && (3.0..=5.0).contains(&ratio);
        Ok((
            pass,
            format!(
                "max |dev|/(1+p^2): {:.2e} (h=1/32), {:.2e} (h=1/64); refinement ratio {ratio:.2}",
                coarse.max_scaled_deviation, fine.max_scaled_deviation
            ),
        ))
    })
}

pub fn coefficients() -> Criterion {
    timed(4, "coefficients", || {
        let opts = EigOptions::default();
        let mesh = make_rectangle(1.0, 1.0, 1.0 / 64.0).map_err(err)?;
        let c = threshold(0.0, 0.0, &mesh, &opts).map_err(err)?.coefficients;
        let centred = threshold(0.0, 0.0, &mesh.translated(-0.5, -0.5), &opts).map_err(err)?.coefficients;
        let pi2 = PI * PI;
        let pass = rel(c.a, pi2) <= 0.01
            && rel(c.c, pi2) <= 0.01
            && c.b.abs() <= 1e-6 * c.a
            && rel(c.a_tilde, pi2 / 2.0) <= 0.01
            && centred.a_tilde.abs() <= 1e-6 * centred.a;
        Ok((
            pass,
            format!(
                "A={:.5} C={:.5} |B|/A={:.1e} A~={:.5}; centred |A~|/A={:.1e}",
                c.a,
                c.c,
                c.b.abs() / c.a,
                c.a_tilde,
                centred.a_tilde.abs() / centred.a
            ),
        ))
    })
}

/// Settings of the full tube scenario.
fn tube_resolution(res: Resolution) -> f64 {
    match res {
        Resolution::Full => 1.0 / 32.0,
        Resolution::Quick => 1.0 / 16.0,
    }
}

pub fn single_well(res: Resolution) -> Criterion {
    timed(5, "single-well-end-to-end", || {
        let opts = EigOptions::default();
        let profile = gaussian_profile();
        // ∫V against the closed form with the section coefficient A.
        let fine = threshold_from_fem(1.0, 0.0, &square_fem(1.0 / 64.0)?, &opts).map_err(err)?;
        let em_fine = build_effective(&profile, fine.coefficients, Grid::new(128.0, 64001), 1.0, 1e-6).map_err(err)?;
        let closed = gaussian_integral(PI * PI);
        let int_ok = rel(em_fine.integral, closed) <= 0.001;

        let h = tube_resolution(res);
        let fem = square_fem(h)?;
        let ground = threshold_from_fem(1.0, 0.0, &fem, &opts).map_err(err)?;
        let em = build_effective(&profile, ground.coefficients, Grid::new(128.0, 64001), 1.0, 1e-6).map_err(err)?;
        let cert = thm12_certificate(&em, 64).map_err(err)?;
        let cert_ok = cert.certified() && cert.parameters.n == Some(1);
        let oned = solve_bound_states(&em, 10.0, 0.01).map_err(err)?;
        let lam1d = *oned.eigenvalues.first().ok_or("no 1D bound state")?;

        let report = detect_discrete(
            &profile,
            SectionData::new(fem),
            1.0,
            &[10.0, 15.0, 20.0],
            h,
            2,
            1e-6,
            &TubeSolveOptions::default(),
        )
        .map_err(err)?;
        let lam = report.candidates[0].value;
        let gap = lam - report.threshold;
        let bound_ok = report.n_candidates >= 1 && gap <= lam1d + 0.02 * lam1d.abs();
        let pass = int_ok && cert_ok && bound_ok;
        Ok((
            pass,
            format!(
                "intV={:.4} (closed {closed:.4}); q(1)={:.4}; 1D lambda1={lam1d:.4}; tube lambda1-E1={gap:.4} ({} candidates, h=1/{})",
                em_fine.integral,
                cert.energy.unwrap_or(f64::NAN),
                report.n_candidates,
                (1.0 / h).round()
            ),
        ))
    })
}

pub fn balanced_certificate() -> Criterion {
    timed(6, "perturbed-certificate", || {
        let mesh = make_rectangle(1.0, 1.0, 1.0 / 32.0).map_err(err)?;
        let fem = FemMatrices::assemble(&mesh);
        let ground = threshold_from_fem(1.0, 0.0, &fem, &EigOptions::default()).map_err(err)?;
        let c = thm13_certificate(&balanced_profile(), &mesh, &fem, &ground, &Thm13Options::default()).map_err(err)?;
        let Details::Perturbed { j_table, balance, .. } = &c.details else {
            return Err("unexpected certificate layout".into());
        };
        let j_ok = j_table.iter().any(|r| r.value.abs() > 10.0 * r.error);
        let n_ok = c.parameters.n.is_some_and(|n| n <= 64);
        Ok((
            j_ok && n_ok && c.certified(),
            format!(
                "balance {:.1e}; form value {:.4} at n={} (error {:.1e}), xi={}",
                balance.value,
                c.energy.unwrap_or(f64::NAN),
                c.parameters.n.map_or("-".into(), |n| n.to_string()),
                c.error_estimate,
                c.parameters.xi.as_deref().unwrap_or("-")
            ),
        ))
    })
}

pub fn thin_limit() -> Criterion {
    timed(7, "thin-limit-counts", || {
        let ground = threshold_from_fem(1.0, 0.0, &square_fem(1.0 / 32.0)?, &EigOptions::default()).map_err(err)?;
        let em = build_effective(&gaussian_profile(), ground.coefficients, Grid::new(20.0, 8001), 1.0, 1e-6).map_err(err)?;
        let eps = [1.0, 0.5, 0.25, 0.125];
        let (x_max, hx) = (10.0, 0.02);
        let sweep = count_vs_epsilon(&em, &eps, x_max, hx).map_err(err)?;
        let mut oracle_ok = true;
        for row in &sweep.rows {
            let e = em.with_epsilon(row.epsilon);
            let s = row.epsilon.powi(-2);
            let (t, _, _) = fd_matrix(|x| Ok(e.potential(x)? * s), x_max, hx).map_err(err)?;
            let n = t.dim();
            let dense = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
                0 => t.d[i],
                1 => t.e[i.min(j)],
                _ => 0.0,
            });
            let tol_edge = 1e-6 * e.v_max_abs * s;
            let count = dense.symmetric_eigenvalues().iter().filter(|&&l| l < -tol_edge).count();
            oracle_ok &= count == row.count;
        }
        let counts: Vec<usize> = sweep.rows.iter().map(|r| r.count).collect();
        let bumps = thm14_trial_count(&em, 0.125, 4).map_err(err)?;
        let pass = sweep.nondecreasing && counts[3] >= 4 && oracle_ok && bumps.certified();
        Ok((
            pass,
            format!(
                "counts {counts:?} (dense oracle {}); 4 bumps at eps=0.125: {}",
                if oracle_ok { "agrees" } else { "disagrees" },
                if bumps.certified() { "certified" } else { "not certified" }
            ),
        ))
    })
}

pub fn semiclassical_sweep() -> Criterion {
    timed(8, "semiclassical-sweep", || {
        let w = parse("-exp(-x^2)").map_err(err)?;
        let t = asymptotic_slope(&w, &[1e2, 1e3, 1e4], 1, 20.0).map_err(err)?;
        let last = t.rows.last().ok_or("empty table")?;
        let pass = t.gap_decreasing && last.gap <= 0.02 && t.rows.iter().all(|r| r.lower_bound_ok);
        let gaps: Vec<String> = t.rows.iter().map(|r| format!("{:.2e}", r.gap)).collect();
        Ok((pass, format!("|lambda1/mu + 1| = [{}], lower bound holds: {}", gaps.join(", "), t.rows.iter().all(|r| r.lower_bound_ok))))
    })
}

pub fn ode_family() -> Criterion {
    timed(9, "ode-family", || {
        let grid: Vec<f64> = (0..=400).map(|i| -2.0 + 0.01 * i as f64).collect();
        let mut worst = 0.0f64;
        for c in [-1.0, -0.5] {
            for b in [0.5, 1.0] {
                for a in [1.0, PI * PI / 2.0] {
                    let cert = ode_family_residual(c, b, a, &grid).map_err(err)?;
                    worst = worst.max(cert.error_estimate);
                }
            }
        }
        let zero = ode_family_residual(0.0, 1.0, 1.0, &grid).map_err(err)?;
        let constant = matches!(zero.details, Details::Ode { classification: SignClass::ConstantSlope, .. });
        Ok((worst <= 1e-10 && constant, format!("max residual {worst:.2e}; c=0 constant-slope: {constant}")))
    })
}

pub fn structural() -> Criterion {
    timed(10, "structural-invariants", || {
        let profile = gaussian_profile();
        let sec = SectionData::new(square_fem(0.125)?);
        let opts = TubeSolveOptions::default();
        // det G at the longitudinal quadrature samples of an assembled tube.
        let td = assemble_tube(&profile, sec.clone(), 6.0, 96, 1.0, 1e-6).map_err(err)?;
        let xs: Vec<f64> = td.gauss.iter().map(|g| g.0).collect();
        let metric = metric_check(&profile, &xs).map_err(err)?;
        let mono = detect_discrete(&profile, sec.clone(), 1.0, &[4.0, 6.0, 8.0, 10.0], 0.125, 2, 1e-6, &opts).map_err(err)?;
        let lam: Vec<f64> = mono.reports.iter().map(|r| r.eigenvalues[0]).collect();
        let nonincreasing = lam.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0));
        let straight =
            detect_discrete(&Profile::straight(0.0, 0.0), sec.clone(), 1.0, &[4.0, 6.0, 8.0], 0.125, 2, 1e-12, &opts)
                .map_err(err)?;
        let agree = dense_agreement(&sec)?;
        let pass = metric.pass && nonincreasing && mono.monotone && straight.n_candidates == 0 && agree <= 1e-9;
        Ok((
            pass,
            format!(
                "max |det G - 1| {:.1e}; lambda1(L) nonincreasing: {nonincreasing}; straight candidates {}; sparse/dense max rel diff {agree:.1e}",
                metric.max_det_error, straight.n_candidates
            ),
        ))
    })
}

/// Largest relative gap between the sparse and dense solvers on small
/// section and fiber problems.
fn dense_agreement(sec: &Arc<SectionData>) -> Result<f64, String> {
    let sparse = EigOptions { method: Method::Sparse, ..Default::default() };
    let mut worst = 0.0f64;
    let fem = &sec.fem;
    let r = solve_gevp_smallest(&fem.s, &fem.m, 4, &sparse).map_err(err)?;
    let d = dense_eigenvalues(&fem.s.to_dense(), &fem.m.to_dense()).map_err(err)?;
    for (a, b) in r.eigenvalues.iter().zip(&d) {
        worst = worst.max(rel(*a, *b));
    }
    let fp = assemble_fiber(0.7, 1.0, 0.5, fem);
    let kc = fp.k_complex();
    let mc = fp.m.to_complex();
    let r = solve_gevp_smallest(&kc, &mc, 4, &sparse).map_err(err)?;
    let d = dense_eigenvalues(&kc.to_dense(), &mc.to_dense()).map_err(err)?;
    for (a, b) in r.eigenvalues.iter().zip(&d) {
        worst = worst.max(rel(*a, *b));
    }
    Ok(worst)
}

/// Every criterion in order.
pub fn run_all(res: Resolution) -> Vec<Criterion> {
    vec![
        threshold_oracle(),
        anisotropic_oracle(),
        gauge_identity(),
        coefficients(),
        single_well(res),
        balanced_certificate(),
        thin_limit(),
        semiclassical_sweep(),
        ode_family(),
        structural(),
    ]
}
