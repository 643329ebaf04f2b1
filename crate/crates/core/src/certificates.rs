//! Constructive variational certificates: explicit trial functions whose
//! form value lies below the essential-spectrum threshold, plus the explicit
//! solution family that annihilates the first-order functional.

use serde::Serialize;
use thiserror::Error;

use crate::effective1d::EffectiveModel;
use crate::expr::{parse, Expr, ExprError};
use crate::fiber::GroundData;
use crate::mesh::{FemMatrices, Mesh};
use crate::profile::Profile;
use crate::quad::{adaptive_simpson, gauss_components, Integral};

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error("potential grid half-width {x_max} is shorter than 2*n_max = {needed}")]
    GridTooShort { x_max: f64, needed: f64 },
    #[error("xi tails too large: |xi| = {value:e} at x = ±{x}")]
    XiTails { x: f64, value: f64 },
    #[error("no negative interval found: min V = {v_min}")]
    NoNegativeInterval { v_min: f64 },
    #[error("grid hits the singularity at x = {singularity} (closest node {node})")]
    Singularity { singularity: f64, node: f64 },
    #[error("non-finite integrand in {0}")]
    NonFinite(&'static str),
    #[error("{0}")]
    BadInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Thm12,
    Thm13,
    Thm14,
    OdeFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    Inconclusive,
}

/// Trial parameters of the reported witness.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Parameters {
    pub n: Option<usize>,
    pub delta: Option<f64>,
    pub xi: Option<String>,
    pub epsilon: Option<f64>,
    pub interval: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauRow {
    pub n: usize,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JRow {
    pub xi: String,
    pub shift: f64,
    pub width: f64,
    pub value: f64,
    pub error: f64,
}

/// Section integrals of `v = v₁` and `u = y₁v₁` (P1 interpolant).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionPairing {
    pub m_vv: f64,
    pub c_vv: f64,
    pub d_vv: f64,
    pub s_vv: f64,
    pub m_vu: f64,
    pub c_vu: f64,
    pub c_uv: f64,
    pub d_vu: f64,
    pub s_vu: f64,
    pub m_uu: f64,
    pub c_uu: f64,
    pub d_uu: f64,
    pub s_uu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedRow {
    pub n: usize,
    /// Form value of the unperturbed `ψ_n` relative to the threshold.
    pub q: f64,
    /// Mixed form `b(ψ_n, ξu) − E₁⟨ψ_n, ξu⟩`.
    pub cross: f64,
    pub value: f64,
    /// Same trial with `δ ↦ −δ`.
    pub flipped: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpRow {
    pub start: f64,
    pub rayleigh: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignClass {
    /// `f'² − β₁² > 0`
    Positive,
    /// `f'² − β₁² < 0`
    Negative,
    ConstantSlope,
}

/// Intermediate scalars, one variant per certificate kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Details {
    Plateau {
        integral_v: f64,
        q_sequence: Vec<PlateauRow>,
    },
    Perturbed {
        balance: Integral,
        e1: f64,
        a_tilde: f64,
        j_table: Vec<JRow>,
        pairing: SectionPairing,
        q_form: Integral,
        sequence: Vec<PerturbedRow>,
    },
    Bumps {
        width: f64,
        window: [f64; 2],
        widths_tried: usize,
        bumps: Vec<BumpRow>,
    },
    Ode {
        c: f64,
        beta1: f64,
        a_tilde: f64,
        max_residual: f64,
        classification: SignClass,
        sign_consistent: bool,
        singularity: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub verdict: Verdict,
    pub parameters: Parameters,
    /// Form value of the witness relative to the threshold.
    pub energy: Option<f64>,
    pub error_estimate: f64,
    pub details: Details,
}

impl Certificate {
    pub fn certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

fn clears(value: f64, error: f64) -> bool {
    value < -10.0 * error
}

fn ev(e: &Expr, x: f64) -> f64 {
    e.eval(x).unwrap_or(f64::NAN)
}

fn check_finite<const K: usize>(r: &[Integral; K], what: &'static str) -> Result<(), CertificateError> {
    if r.iter().all(|i| i.value.is_finite() && i.error.is_finite()) {
        Ok(())
    } else {
        Err(CertificateError::NonFinite(what))
    }
}

/// Plateau cutoff: 1 on `[−n, n]`, linear down to 0 at `±2n`.
pub fn plateau(n: f64, x: f64) -> f64 {
    let a = x.abs();
    if a <= n {
        1.0
    } else if a < 2.0 * n {
        (2.0 * n - a) / n
    } else {
        0.0
    }
}

/// Derivative of [`plateau`] away from its kinks.
pub fn plateau_slope(n: f64, x: f64) -> f64 {
    let a = x.abs();
    if a > n && a < 2.0 * n {
        -x.signum() / n
    } else {
        0.0
    }
}

fn plateau_breaks(n: f64) -> [f64; 4] {
    [-2.0 * n, -n, n, 2.0 * n]
}

/// Plateau certificate: `q(n) = 2/n + ε⁻²∫Vφ_n²`, smallest certified `n`.
pub fn thm12_certificate(em: &EffectiveModel, n_max: usize) -> Result<Certificate, CertificateError> {
    if n_max == 0 {
        return Err(CertificateError::BadInput("n_max must be positive".into()));
    }
    let needed = 2.0 * n_max as f64;
    if em.grid.x_max < needed {
        return Err(CertificateError::GridTooShort { x_max: em.grid.x_max, needed });
    }
    let eps2 = em.epsilon * em.epsilon;
    let mut rows = Vec::new();
    let mut found = None;
    for n in 1..=n_max {
        let nf = n as f64;
        let [iv] = gauss_components(
            |x| {
                let phi = plateau(nf, x);
                [em.potential(x).unwrap_or(f64::NAN) * phi * phi]
            },
            &plateau_breaks(nf),
            0.125,
        );
        check_finite(&[iv], "plateau integral")?;
        let value = 2.0 / nf + iv.value / eps2;
        let error = iv.error / eps2 + 1e-15 * (2.0 / nf + iv.value.abs() / eps2);
        rows.push(PlateauRow { n, value, error });
        if clears(value, error) {
            found = Some(n);
            break;
        }
    }
    let witness = found.map(|n| &rows[n - 1]);
    Ok(Certificate {
        kind: CertificateKind::Thm12,
        verdict: if found.is_some() { Verdict::Certified } else { Verdict::Inconclusive },
        parameters: Parameters { n: found, epsilon: Some(em.epsilon), ..Default::default() },
        energy: witness.map(|r| r.value),
        error_estimate: witness.map_or(rows.last().map_or(0.0, |r| r.error), |r| r.error),
        details: Details::Plateau { integral_v: em.integral, q_sequence: rows },
    })
}

/// Dictionary element `ξ(x) = exp(−((x − s)/w)²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiSpec {
    pub shift: f64,
    pub width: f64,
}

impl XiSpec {
    pub fn expr(&self) -> Expr {
        parse(&format!("exp(-((x - ({:?}))/{:?})^2)", self.shift, self.width)).expect("dictionary expression")
    }

    pub fn describe(&self) -> String {
        self.expr().print()
    }
}

/// Gaussians with shifts `{−2, …, 2}` and widths `{0.5, 1, 2}`.
pub fn xi_dictionary() -> Vec<XiSpec> {
    let mut out = Vec::new();
    for width in [0.5, 1.0, 2.0] {
        for s in -2..=2 {
            out.push(XiSpec { shift: s as f64, width });
        }
    }
    out
}

/// Half-width beyond which `|ξ| < 1e-12` on both sides.
pub fn xi_support(xi: &Expr) -> Result<f64, CertificateError> {
    let mut r = 1.0;
    loop {
        let worst = ev(xi, -r).abs().max(ev(xi, r).abs());
        if worst < 1e-12 {
            return Ok(r);
        }
        if r >= 1024.0 || !worst.is_finite() {
            return Err(CertificateError::XiTails { x: r, value: worst });
        }
        r *= 2.0;
    }
}

fn require_straight_g(profile: &Profile) -> Result<(), CertificateError> {
    let zero = profile.beta2 == 0.0 && profile.gprime.is_constant() && profile.gp(0.0)? == 0.0;
    if zero {
        Ok(())
    } else {
        Err(CertificateError::Hypothesis("g' = 0".into()))
    }
}

/// `J(ξ) = ∫ ξ (−f''/2 + Ã(f'² − β₁²))` by adaptive Simpson to relative 1e-8.
pub fn thm13_functional(profile: &Profile, a_tilde: f64, xi: &Expr) -> Result<Integral, CertificateError> {
    require_straight_g(profile)?;
    let r = xi_support(xi)?;
    let b2 = profile.beta1 * profile.beta1;
    let j = adaptive_simpson(
        |x| {
            let f = ev(&profile.fprime, x);
            ev(xi, x) * (-0.5 * ev(&profile.fpp, x) + a_tilde * (f * f - b2))
        },
        -r,
        r,
        1e-8,
        1e-14,
    );
    if !j.value.is_finite() {
        return Err(CertificateError::NonFinite("J functional"));
    }
    Ok(j)
}

/// Section pairings of `v₁` and the interpolant of `y₁v₁`.
pub fn section_pairing(mesh: &Mesh, fem: &FemMatrices, v1: &[f64]) -> SectionPairing {
    let verts = mesh.vertices();
    let u: Vec<f64> = fem.dof_vertex.iter().zip(v1).map(|(&k, &v)| verts[k][0] * v).collect();
    let v = v1;
    SectionPairing {
        m_vv: fem.m.form(v, v),
        c_vv: fem.c1.form(v, v),
        d_vv: fem.d11.form(v, v),
        s_vv: fem.s.form(v, v),
        m_vu: fem.m.form(v, &u),
        c_vu: fem.c1.form(v, &u),
        c_uv: fem.c1.form(&u, v),
        d_vu: fem.d11.form(v, &u),
        s_vu: fem.s.form(v, &u),
        m_uu: fem.m.form(&u, &u),
        c_uu: fem.c1.form(&u, &u),
        d_uu: fem.d11.form(&u, &u),
        s_uu: fem.s.form(&u, &u),
    }
}

/// Options of the perturbed-plateau certificate.
#[derive(Debug, Clone)]
pub struct Thm13Options {
    pub dictionary: Vec<XiSpec>,
    pub n_max: usize,
    pub tail_x: f64,
    pub tail_tol: f64,
}

impl Default for Thm13Options {
    fn default() -> Self {
        Thm13Options { dictionary: xi_dictionary(), n_max: 64, tail_x: 10.0, tail_tol: 1e-6 }
    }
}

/// Checks the hypotheses on the profile, returning `∫(f'² − β₁²)`.
pub fn thm13_gates(profile: &Profile, tail_x: f64, tail_tol: f64) -> Result<Integral, CertificateError> {
    require_straight_g(profile)?;
    let tails = profile.check_tails(tail_x, tail_tol)?;
    if let Some(name) = tails.failure() {
        return Err(CertificateError::Hypothesis(format!("tail limit check failed for {name}")));
    }
    let samples: Vec<f64> = (0..=2000).map(|i| ev(&profile.fprime, tail_x * (i as f64 / 1000.0 - 1.0))).collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    if profile.fprime.is_constant() || !(var > 0.0) {
        return Err(CertificateError::Hypothesis("f' is not constant".into()));
    }
    let b2 = profile.beta1 * profile.beta1;
    let r = 4.0 * tail_x;
    let g = |x: f64| {
        let f = ev(&profile.fprime, x);
        f * f - b2
    };
    let balance = adaptive_simpson(g, -r, r, 1e-12, 1e-15);
    let scale = adaptive_simpson(|x| g(x).abs(), -r, r, 1e-10, 1e-15).value.max(1.0);
    if !balance.value.is_finite() || balance.value.abs() > 1e-8 * scale {
        return Err(CertificateError::Hypothesis(format!(
            "balance check failed: integral of f'^2 - beta1^2 is {:e}, not 0",
            balance.value
        )));
    }
    Ok(balance)
}

/// Perturbed plateau certificate `ψ_{n,δ} = φ_n v₁ + δ ξ y₁ v₁` with the
/// section discretized by P1 elements and exact-in-x quadrature.
pub fn thm13_certificate(
    profile: &Profile,
    mesh: &Mesh,
    fem: &FemMatrices,
    ground: &GroundData,
    opts: &Thm13Options,
) -> Result<Certificate, CertificateError> {
    if ground.beta != [profile.beta1, profile.beta2] {
        return Err(CertificateError::BadInput("ground state computed for a different beta".into()));
    }
    if opts.dictionary.is_empty() || opts.n_max == 0 {
        return Err(CertificateError::BadInput("empty dictionary or n_max = 0".into()));
    }
    let balance = thm13_gates(profile, opts.tail_x, opts.tail_tol)?;
    let a_tilde = ground.coefficients.a_tilde;
    let e1 = ground.e1;
    let pairing = section_pairing(mesh, fem, &ground.v1);

    let mut j_table = Vec::new();
    for spec in &opts.dictionary {
        let j = thm13_functional(profile, a_tilde, &spec.expr())?;
        j_table.push(JRow { xi: spec.describe(), shift: spec.shift, width: spec.width, value: j.value, error: j.error });
    }
    let best = j_table
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.value.abs().total_cmp(&b.1.value.abs()))
        .map(|(i, _)| i)
        .unwrap();
    let inconclusive = |j_table, q_form, sequence, delta: Option<f64>, xi: Option<String>| Certificate {
        kind: CertificateKind::Thm13,
        verdict: Verdict::Inconclusive,
        parameters: Parameters { delta, xi, ..Default::default() },
        energy: None,
        error_estimate: 0.0,
        details: Details::Perturbed { balance, e1, a_tilde, j_table, pairing, q_form, sequence },
    };
    let zero = Integral { value: 0.0, error: 0.0 };
    let jb = j_table[best].clone();
    if jb.value.abs() <= 10.0 * jb.error {
        return Ok(inconclusive(j_table, zero, Vec::new(), None, None));
    }

    let spec = opts.dictionary[best];
    let xi = spec.expr();
    let dxi = xi.differentiate();
    let r = xi_support(&xi)?;
    let panel = (spec.width / 8.0).min(0.125);
    let p = &pairing;
    let fp = |x: f64| ev(&profile.fprime, x);
    let [t1, t2, t3, t4] = gauss_components(
        |x| {
            let (z, dz, f) = (ev(&xi, x), ev(&dxi, x), fp(x));
            [dz * dz, f * z * dz, f * f * z * z, z * z]
        },
        &[-r, 0.0, r],
        panel,
    );
    check_finite(&[t1, t2, t3, t4], "Q integrals")?;
    let coef = [p.m_uu, -2.0 * p.c_uu, p.d_uu, p.s_uu - e1 * p.m_uu];
    let q_form = combine(&[t1, t2, t3, t4], &coef);
    let xi_desc = spec.describe();
    if q_form.value <= 0.0 {
        // ξu alone already lies below the threshold.
        let verdict = if clears(q_form.value, q_form.error) { Verdict::Certified } else { Verdict::Inconclusive };
        return Ok(Certificate {
            kind: CertificateKind::Thm13,
            verdict,
            parameters: Parameters { xi: Some(xi_desc), ..Default::default() },
            energy: Some(q_form.value),
            error_estimate: q_form.error,
            details: Details::Perturbed { balance, e1, a_tilde, j_table, pairing, q_form, sequence: Vec::new() },
        });
    }
    let delta = -jb.value / q_form.value;

    let mut sequence = Vec::new();
    let mut found = None;
    for n in 1..=opts.n_max {
        let nf = n as f64;
        let breaks = plateau_breaks(nf);
        let [a1, a2, a3] = gauss_components(
            |x| {
                let (phi, dphi, f) = (plateau(nf, x), plateau_slope(nf, x), fp(x));
                [f * phi * dphi, f * f * phi * phi, phi * phi]
            },
            &breaks,
            0.125,
        );
        let q = combine(&[Integral { value: 2.0 / nf, error: 0.0 }, a1, a2, a3], &[
            p.m_vv,
            -2.0 * p.c_vv,
            p.d_vv,
            p.s_vv - e1 * p.m_vv,
        ]);
        // ξ-weighted integrals only see the overlap of both supports.
        let lo = (-2.0 * nf).max(-r);
        let hi = (2.0 * nf).min(r);
        let mut xb = vec![lo];
        xb.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        xb.push(hi);
        let [b1, b2, b3, b4, b5] = gauss_components(
            |x| {
                let (phi, dphi, f) = (plateau(nf, x), plateau_slope(nf, x), fp(x));
                let (z, dz) = (ev(&xi, x), ev(&dxi, x));
                [dphi * dz, f * dphi * z, f * phi * dz, f * f * phi * z, phi * z]
            },
            &xb,
            panel,
        );
        check_finite(&[a1, a2, a3, b1, b2, b3, b4, b5], "plateau integrals")?;
        let cross = combine(&[b1, b2, b3, b4, b5], &[p.m_vu, -p.c_vu, -p.c_uv, p.d_vu, p.s_vu - e1 * p.m_vu]);
        let value = q.value + 2.0 * delta * cross.value + delta * delta * q_form.value;
        let flipped = q.value - 2.0 * delta * cross.value + delta * delta * q_form.value;
        let error = q.error
            + 2.0 * delta.abs() * cross.error
            + delta * delta * q_form.error
            + 1e-14 * (q.value.abs() + (2.0 * delta * cross.value).abs() + delta * delta * q_form.value);
        sequence.push(PerturbedRow { n, q: q.value, cross: cross.value, value, flipped, error });
        if clears(value, error) {
            found = Some(n);
            break;
        }
    }
    let Some(n) = found else {
        return Ok(inconclusive(j_table, q_form, sequence, Some(delta), Some(xi_desc)));
    };
    let w = &sequence[n - 1];
    Ok(Certificate {
        kind: CertificateKind::Thm13,
        verdict: Verdict::Certified,
        parameters: Parameters { n: Some(n), delta: Some(delta), xi: Some(xi_desc), ..Default::default() },
        energy: Some(w.value),
        error_estimate: w.error,
        details: Details::Perturbed { balance, e1, a_tilde, j_table, pairing, q_form, sequence },
    })
}

fn combine(parts: &[Integral], coef: &[f64]) -> Integral {
    let mut out = Integral { value: 0.0, error: 0.0 };
    for (i, c) in parts.iter().zip(coef) {
        out.value += c * i.value;
        out.error += (c * i.error).abs();
    }
    out
}

/// Rayleigh value `π²/(2w) + ε⁻²∫ V sin²(π(x−a)/w)` of one bump and its
/// quadrature error.
fn bump_value(em: &EffectiveModel, eps2: f64, a: f64, w: f64) -> Integral {
    let k = std::f64::consts::PI / w;
    let [v] = gauss_components(
        |x| {
            let s = (k * (x - a)).sin();
            [em.potential(x).unwrap_or(f64::NAN) * s * s]
        },
        &[a, a + w],
        w / 4.0,
    );
    Integral {
        value: k * k * w / 2.0 + v.value / eps2,
        error: v.error / eps2 + 1e-15 * (k * k * w / 2.0 + v.value.abs() / eps2),
    }
}

/// Threshold on `V/V_min` that delimits the search window around the well.
const WINDOW_LEVEL: f64 = 1e-3;
/// Ratio between successive bump widths.
const WIDTH_RATIO: f64 = 0.9;
/// Start positions per bump width.
const STARTS_PER_WIDTH: usize = 8;

/// Window `[lo, hi]` around the minimum of `V` on which `V ≤ 1e-3·V_min < 0`.
pub fn negative_window(em: &EffectiveModel) -> Result<[f64; 2], CertificateError> {
    if !(em.v_min < 0.0) {
        return Err(CertificateError::NoNegativeInterval { v_min: em.v_min });
    }
    let level = WINDOW_LEVEL * em.v_min;
    let i0 = em.v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap();
    let mut lo = i0;
    while lo > 0 && em.v[lo - 1] <= level {
        lo -= 1;
    }
    let mut hi = i0;
    while hi + 1 < em.v.len() && em.v[hi + 1] <= level {
        hi += 1;
    }
    if hi == lo {
        return Err(CertificateError::NoNegativeInterval { v_min: em.v_min });
    }
    Ok([em.x[lo], em.x[hi]])
}

/// Disjoint `sin²` bumps of a common width `w`, translated by `w`, inside the
/// window where `V < 0`. The search runs over widths `len·0.9^k` and starts on
/// a grid of step `w/8`; both grids are independent of `n`, so passing for
/// `n` implies passing for `n − 1`.
pub fn thm14_trial_count(em: &EffectiveModel, epsilon: f64, n: usize) -> Result<Certificate, CertificateError> {
    if !(epsilon > 0.0) || n == 0 {
        return Err(CertificateError::BadInput("need epsilon > 0 and n >= 1".into()));
    }
    let window = negative_window(em)?;
    let len = window[1] - window[0];
    let eps2 = epsilon * epsilon;
    let pi2 = std::f64::consts::PI.powi(2);
    let mut best: Option<(f64, f64, usize, Vec<BumpRow>)> = None;
    let mut widths_tried = 0;
    let mut w = len;
    while w >= 1e-3 * len {
        let wk = w;
        w *= WIDTH_RATIO;
        // A bump can only be negative when π²/(2w) + (w/2)V_min/ε² < 0.
        if n as f64 * wk > len * (1.0 + 1e-12) || pi2 / (2.0 * wk) + 0.5 * wk * em.v_min / eps2 >= 0.0 {
            continue;
        }
        widths_tried += 1;
        let step = wk / STARTS_PER_WIDTH as f64;
        let count = ((len - wk) / step + 1e-9).floor() as usize + 1;
        let vals: Vec<Integral> =
            (0..count).map(|j| bump_value(em, eps2, window[0] + j as f64 * step, wk)).collect();
        let span = (n - 1) * STARTS_PER_WIDTH;
        for j in 0..count.saturating_sub(span) {
            let score = (0..n)
                .map(|i| {
                    let v = vals[j + i * STARTS_PER_WIDTH];
                    v.value + 10.0 * v.error
                })
                .fold(f64::NEG_INFINITY, f64::max);
            if !score.is_finite() {
                return Err(CertificateError::NonFinite("bump integrals"));
            }
            if best.as_ref().is_none_or(|b| score < b.0) {
                let a = window[0] + j as f64 * step;
                let rows = (0..n)
                    .map(|i| {
                        let v = vals[j + i * STARTS_PER_WIDTH];
                        BumpRow { start: a + i as f64 * wk, rayleigh: v.value, error: v.error }
                    })
                    .collect();
                best = Some((score, wk, j, rows));
            }
        }
    }
    let Some((score, width, _, bumps)) = best else {
        return Ok(Certificate {
            kind: CertificateKind::Thm14,
            verdict: Verdict::Inconclusive,
            parameters: Parameters { n: Some(n), epsilon: Some(epsilon), ..Default::default() },
            energy: None,
            error_estimate: 0.0,
            details: Details::Bumps { width: 0.0, window, widths_tried, bumps: Vec::new() },
        });
    };
    let energy = bumps.iter().map(|b| b.rayleigh).fold(f64::NEG_INFINITY, f64::max);
    let error = bumps.iter().map(|b| b.error).fold(0.0, f64::max);
    let a = bumps[0].start;
    Ok(Certificate {
        kind: CertificateKind::Thm14,
        verdict: if score < 0.0 { Verdict::Certified } else { Verdict::Inconclusive },
        parameters: Parameters {
            n: Some(n),
            epsilon: Some(epsilon),
            interval: Some([a, a + n as f64 * width]),
            ..Default::default()
        },
        energy: Some(energy),
        error_estimate: error,
        details: Details::Bumps { width, window, widths_tried, bumps },
    })
}

/// Largest `n` for which [`thm14_trial_count`] passes, scanning upwards.
pub fn thm14_max_count(em: &EffectiveModel, epsilon: f64, n_cap: usize) -> Result<usize, CertificateError> {
    let mut n = 0;
    while n < n_cap && thm14_trial_count(em, epsilon, n + 1)?.certified() {
        n += 1;
    }
    Ok(n)
}

/// The explicit solution `τ(x) = 2β₁/(c e^{−4Ãβ₁x} − 1)` as an expression.
pub fn ode_solution(c: f64, beta1: f64, a_tilde: f64) -> Expr {
    parse(&format!("2*({beta1:?})/(({c:?})*exp(-4*({a_tilde:?})*({beta1:?})*x) - 1)")).expect("ode family expression")
}

/// Residual of `−τ' + 2Ã(τ² + 2β₁τ) = 0` for `τ = τ_{1,c}` on `grid`, with
/// the derivative taken symbolically.
pub fn ode_family_residual(c: f64, beta1: f64, a_tilde: f64, grid: &[f64]) -> Result<Certificate, CertificateError> {
    if beta1 == 0.0 || a_tilde == 0.0 {
        return Err(CertificateError::BadInput("need beta1 != 0 and a_tilde != 0".into()));
    }
    if grid.is_empty() {
        return Err(CertificateError::BadInput("empty grid".into()));
    }
    let details = |max_residual, classification, sign_consistent, singularity| Details::Ode {
        c,
        beta1,
        a_tilde,
        max_residual,
        classification,
        sign_consistent,
        singularity,
    };
    if c == 0.0 {
        return Ok(Certificate {
            kind: CertificateKind::OdeFamily,
            verdict: Verdict::Certified,
            parameters: Parameters::default(),
            energy: None,
            error_estimate: 0.0,
            details: details(0.0, SignClass::ConstantSlope, true, None),
        });
    }
    let singularity = (c > 0.0).then(|| c.ln() / (4.0 * a_tilde * beta1));
    if let Some(s) = singularity {
        if let Some(&node) = grid.iter().find(|&&x| (x - s).abs() < 0.1) {
            return Err(CertificateError::Singularity { singularity: s, node });
        }
    }
    let tau = ode_solution(c, beta1, a_tilde);
    let dtau = tau.differentiate();
    let classification = if c > 0.0 { SignClass::Positive } else { SignClass::Negative };
    let mut max_residual = 0.0f64;
    let mut sign_consistent = true;
    for &x in grid {
        let t = tau.eval(x)?;
        let gap = t * t + 2.0 * beta1 * t;
        let res = -dtau.eval(x)? + 2.0 * a_tilde * gap;
        if !res.is_finite() {
            return Err(CertificateError::NonFinite("ode residual"));
        }
        max_residual = max_residual.max(res.abs());
        let expected = if c > 0.0 { gap > 0.0 } else { gap < 0.0 };
        sign_consistent &= expected || gap == 0.0;
    }
    let verdict = if max_residual <= 1e-10 { Verdict::Certified } else { Verdict::Inconclusive };
    Ok(Certificate {
        kind: CertificateKind::OdeFamily,
        verdict,
        parameters: Parameters::default(),
        energy: None,
        error_estimate: max_residual,
        details: details(max_residual, classification, sign_consistent, singularity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective1d::{build_effective, Grid};
    use crate::fiber::{threshold_from_fem, Coefficients};
    use crate::full3d::{assemble_tube, SectionData};
    use crate::linalg::EigOptions;
    use crate::mesh::make_rectangle;
    use std::f64::consts::PI;

    fn square_coeffs() -> Coefficients {
        Coefficients { a: PI * PI, b: 0.0, c: PI * PI, a_tilde: PI * PI / 2.0 }
    }

    fn gaussian_model(x_max: f64) -> EffectiveModel {
        let p = Profile::new("1 - 0.8*exp(-x^2)", "0", 1.0, 0.0).unwrap();
        build_effective(&p, square_coeffs(), Grid::new(x_max, 32001), 1.0, 1e-6).unwrap()
    }

    fn balanced() -> Profile {
        let c0 = 2f64.sqrt() - 7f64.sqrt() / 2.0;
        Profile::new(&format!("1 + x*exp(-x^2) - {c0:?}*exp(-x^2)"), "0", 1.0, 0.0).unwrap()
    }

    #[test]
    fn plateau_shape() {
        let n = 3.0;
        let [d2] = gauss_components(|x| [plateau_slope(n, x).powi(2)], &plateau_breaks(n), 0.5);
        assert!((d2.value - 2.0 / n).abs() < 1e-14);
        assert_eq!(plateau(n, 4.5), 0.5);
    }

    #[test]
    fn gaussian_well_certified_at_one() {
        let em = gaussian_model(128.0);
        let c = thm12_certificate(&em, 64).unwrap();
        assert!(c.certified());
        assert_eq!(c.parameters.n, Some(1));
        // Independent value: the well has width ~1 so most of ∫V falls in [−1, 1].
        let e = c.energy.unwrap();
        assert!(e < -10.0 && e > 2.0 + em.integral, "{e}");
        assert!(matches!(thm12_certificate(&gaussian_model(100.0), 64), Err(CertificateError::GridTooShort { .. })));
    }

    #[test]
    fn flat_potential_inconclusive() {
        let p = Profile::straight(1.0, 0.0);
        let em = build_effective(&p, square_coeffs(), Grid::new(20.0, 2001), 1.0, 1e-6).unwrap();
        let c = thm12_certificate(&em, 10).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
        if let Details::Plateau { q_sequence, .. } = &c.details {
            for r in q_sequence {
                assert!((r.value - 2.0 / r.n as f64).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shallow_well_needs_larger_plateau() {
        // V = −0.11·e^{−x²}/√π integrates to −0.11; q(n) ≈ 2/n − 0.11.
        let p = Profile::new(&format!("sqrt(1 - 0.11*exp(-x^2)/{:?})", PI.sqrt() * PI * PI), "0", 1.0, 0.0).unwrap();
        let em = build_effective(&p, square_coeffs(), Grid::new(128.0, 64001), 1.0, 1e-6).unwrap();
        assert!((em.integral + 0.11).abs() < 1e-9);
        let c = thm12_certificate(&em, 64).unwrap();
        let n = c.parameters.n.unwrap();
        // Oracle: ∫Vφ_n² = −0.11 up to O(e^{−n²}), so the first n with 2/n < 0.11 is 19.
        assert_eq!(n, 19);
    }

    #[test]
    fn functional_vanishes_for_constant_slope_and_ode_family() {
        let xi = parse("exp(-x^2)").unwrap();
        let flat = Profile::straight(1.0, 0.0);
        assert_eq!(thm13_functional(&flat, 3.0, &xi).unwrap().value, 0.0);
        let a = PI * PI / 2.0;
        let tau = ode_solution(-1.0, 1.0, a);
        let fp = Expr::Add(Box::new(Expr::Num(1.0)), Box::new(tau));
        let p = Profile::from_exprs(fp, Expr::Num(0.0), 1.0, 0.0);
        for spec in xi_dictionary() {
            let j = thm13_functional(&p, a, &spec.expr()).unwrap();
            assert!(j.value.abs() < 1e-8, "{:?}: {}", spec, j.value);
        }
        let wide = parse("1/(1 + x^2)").unwrap();
        assert!(matches!(thm13_functional(&flat, 1.0, &wide), Err(CertificateError::XiTails { .. })));
        let bent = Profile::new("1", "exp(-x^2)", 1.0, 0.0).unwrap();
        assert!(matches!(thm13_functional(&bent, 1.0, &xi), Err(CertificateError::Hypothesis(_))));
    }

    #[test]
    fn balanced_profile_gates_and_functional() {
        let p = balanced();
        let bal = thm13_gates(&p, 10.0, 1e-6).unwrap();
        assert!(bal.value.abs() < 1e-10);
        // Closed form with ξ = e^{−x²}: ∫ξ·(−f''/2) and ∫ξ(f'²−1) by hand.
        let c0 = 2f64.sqrt() - 7f64.sqrt() / 2.0;
        // f'' = e^{−x²}(1 − 2x² + 2c₀x); ∫e^{−2x²}(1−2x²) = √(π/2)/2, odd part vanishes.
        let half_fpp = 0.5 * (PI / 2.0).sqrt() * 0.5;
        // f'²−1 = 2(x−c₀)e^{−x²} + (x−c₀)²e^{−2x²}; against e^{−x²}:
        // −2c₀∫e^{−2x²} + ∫(x²+c₀²)e^{−3x²}.
        let s3 = (PI / 3.0).sqrt();
        let gap = -2.0 * c0 * (PI / 2.0).sqrt() + s3 / 6.0 + c0 * c0 * s3;
        let a = PI * PI / 2.0;
        let want = -half_fpp + a * gap;
        let got = thm13_functional(&p, a, &parse("exp(-x^2)").unwrap()).unwrap();
        assert!((got.value - want).abs() < 1e-8 * want.abs(), "{} vs {want}", got.value);
        assert!(got.value.abs() > 0.1);
        let flat = Profile::straight(1.0, 0.0);
        match thm13_gates(&flat, 10.0, 1e-6) {
            Err(CertificateError::Hypothesis(m)) => assert_eq!(m, "f' is not constant"),
            other => panic!("{other:?}"),
        }
        let unbalanced = Profile::new("1 + x*exp(-x^2)", "0", 1.0, 0.0).unwrap();
        assert!(matches!(thm13_gates(&unbalanced, 10.0, 1e-6), Err(CertificateError::Hypothesis(_))));
        let slow = Profile::new("1 + exp(-x^2/400)", "0", 1.0, 0.0).unwrap();
        match thm13_gates(&slow, 10.0, 1e-6) {
            Err(CertificateError::Hypothesis(m)) => assert_eq!(m, "tail limit check failed for fprime"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn balanced_profile_certified_on_square() {
        let mesh = make_rectangle(1.0, 1.0, 1.0 / 16.0).unwrap();
        let fem = FemMatrices::assemble(&mesh);
        let ground = threshold_from_fem(1.0, 0.0, &fem, &EigOptions::default()).unwrap();
        let c = thm13_certificate(&balanced(), &mesh, &fem, &ground, &Thm13Options::default()).unwrap();
        assert!(c.certified(), "{c:?}");
        let Details::Perturbed { sequence, pairing, q_form, j_table, .. } = &c.details else { panic!() };
        // ∫ v₁ ∂₁(y₁v₁) = 1/2 and ∫ y₁v₁ ∂₁v₁ = −1/2 after integrating by parts.
        // ∫ v₁ ∂₁(y₁v₁) = 1/2 up to interpolation error; C₁ is antisymmetric.
        assert!((pairing.c_vu - 0.5).abs() < 0.02 && (pairing.c_uv + pairing.c_vu).abs() < 1e-12);
        assert!(pairing.c_uu.abs() < 1e-12 && pairing.c_vv.abs() < 1e-12);
        assert!(q_form.value > 0.0);
        assert_eq!(j_table.len(), 15);
        let last = sequence.last().unwrap();
        assert!(last.value < last.flipped);

        // Oracle: the same trial function as nodal data of the assembled tube form.
        let n = c.parameters.n.unwrap() as f64;
        let delta = c.parameters.delta.unwrap();
        let xi = parse(c.parameters.xi.as_deref().unwrap()).unwrap();
        let td = assemble_tube(&balanced(), SectionData::new(fem.clone()), 8.0, 1024, 1.0, 1e-6).unwrap();
        let ns = td.section_dim();
        let u: Vec<f64> =
            fem.dof_vertex.iter().zip(&ground.v1).map(|(&k, &v)| mesh.vertices()[k][0] * v).collect();
        let mut psi = vec![0.0; td.dim()];
        for (ix, &x) in td.x_nodes.iter().enumerate() {
            let (a, b) = (plateau(n, x), delta * xi.eval(x).unwrap());
            for s in 0..ns {
                psi[td.index(ix, s)] = a * ground.v1[s] + b * u[s];
            }
        }
        let (mut kp, mut mp) = (vec![0.0; psi.len()], vec![0.0; psi.len()]);
        td.apply_k(&psi, &mut kp);
        td.apply_m(&psi, &mut mp);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let want = dot(&psi, &kp) - ground.e1 * dot(&psi, &mp);
        assert!((last.value - want).abs() < 1e-3 * want.abs(), "{} vs {want}", last.value);
    }

    #[test]
    fn bumps_on_gaussian_well() {
        let em = gaussian_model(20.0);
        let c = thm14_trial_count(&em, 0.125, 4).unwrap();
        assert!(c.certified(), "{c:?}");
        let Details::Bumps { bumps, width, .. } = &c.details else { panic!() };
        for (i, b) in bumps.iter().enumerate() {
            assert!(b.rayleigh < 0.0);
            // Oracle: recompute the bump by midpoint quadrature.
            let m = 20000;
            let h = width / m as f64;
            let mut s = 0.0;
            for k in 0..m {
                let x = b.start + (k as f64 + 0.5) * h;
                s += em.potential(x).unwrap() * (PI * (x - b.start) / width).sin().powi(2) * h;
            }
            let want = PI * PI / (2.0 * width) + s / 0.015625;
            assert!((b.rayleigh - want).abs() < 1e-6 * want.abs(), "bump {i}");
        }
        let flat = Profile::new("1 + 0.5*exp(-x^2)", "0", 1.0, 0.0).unwrap();
        let pos = build_effective(&flat, square_coeffs(), Grid::new(20.0, 2001), 1.0, 1e-6).unwrap();
        assert!(matches!(thm14_trial_count(&pos, 1.0, 1), Err(CertificateError::NoNegativeInterval { .. })));
    }

    #[test]
    fn ode_family_examples() {
        let grid: Vec<f64> = (0..=400).map(|i| -2.0 + i as f64 * 0.01).collect();
        let a = PI * PI / 2.0;
        let c = ode_family_residual(-1.0, 1.0, a, &grid).unwrap();
        let Details::Ode { max_residual, classification, sign_consistent, .. } = c.details else { panic!() };
        assert!(max_residual <= 1e-10 && sign_consistent);
        assert_eq!(classification, SignClass::Negative);
        let c0 = ode_family_residual(0.0, 1.0, a, &grid).unwrap();
        assert!(matches!(c0.details, Details::Ode { classification: SignClass::ConstantSlope, .. }));
        match ode_family_residual(2.0, 1.0, a, &grid) {
            Err(CertificateError::Singularity { singularity, .. }) => {
                assert!((singularity - 2f64.ln() / (4.0 * a)).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
        let away: Vec<f64> = grid.iter().copied().filter(|x| (x - 2f64.ln() / (4.0 * a)).abs() >= 0.1).collect();
        let pos = ode_family_residual(2.0, 1.0, a, &away).unwrap();
        assert!(matches!(pos.details, Details::Ode { classification: SignClass::Positive, sign_consistent: true, .. }));
    }
}
