use wgspec_core::certificates::{thm12_certificate, thm13_certificate, thm14_max_count, thm14_trial_count, Thm13Options};
use wgspec_core::effective1d::{build_effective, count_vs_epsilon, EffectiveModel, Grid};
use wgspec_core::fiber::{threshold_from_fem, GroundData};
use wgspec_core::full3d::{detect_discrete, SectionData, TubeSolveOptions};
use wgspec_core::linalg::EigOptions;
use wgspec_core::mesh::{make_rectangle, FemMatrices, Mesh};
use wgspec_core::profile::Profile;

fn section(h: f64) -> (Mesh, FemMatrices, GroundData) {
    let mesh = make_rectangle(1.0, 1.0, h).unwrap();
    let fem = FemMatrices::assemble(&mesh);
    let ground = threshold_from_fem(1.0, 0.0, &fem, &EigOptions::default()).unwrap();
    (mesh, fem, ground)
}

fn gaussian() -> Profile {
    Profile::new("1 - 0.8*exp(-x^2)", "0", 1.0, 0.0).unwrap()
}

fn balanced() -> Profile {
    let c0 = 2f64.sqrt() - 7f64.sqrt() / 2.0;
    Profile::new(&format!("1 + x*exp(-x^2) - {c0:?}*exp(-x^2)"), "0", 1.0, 0.0).unwrap()
}

fn detector_candidates(profile: &Profile, fem: FemMatrices, h: f64) -> usize {
    let r = detect_discrete(profile, SectionData::new(fem), 1.0, &[6.0, 8.0, 10.0], h, 2, 1e-6, &TubeSolveOptions::default())
        .unwrap();
    assert!(r.monotone);
    r.n_candidates
}

#[test]
fn plateau_certificate_is_backed_by_tube_candidates() {
    let h = 0.125;
    let (_, fem, ground) = section(h);
    let em = build_effective(&gaussian(), ground.coefficients, Grid::new(128.0, 64001), 1.0, 1e-6).unwrap();
    assert!(thm12_certificate(&em, 64).unwrap().certified());
    assert!(detector_candidates(&gaussian(), fem, h) >= 1);
}

#[test]
fn perturbed_certificate_is_backed_by_tube_candidates() {
    let h = 0.125;
    let (mesh, fem, ground) = section(h);
    let c = thm13_certificate(&balanced(), &mesh, &fem, &ground, &Thm13Options::default()).unwrap();
    assert!(c.certified());
    assert!(detector_candidates(&balanced(), fem, h) >= 1);
}

fn gaussian_model() -> EffectiveModel {
    let (_, _, ground) = section(1.0 / 32.0);
    build_effective(&gaussian(), ground.coefficients, Grid::new(20.0, 8001), 1.0, 1e-6).unwrap()
}

#[test]
fn bump_counts_never_exceed_the_bound_state_count() {
    let em = gaussian_model();
    let eps = [1.0, 0.5, 0.25, 0.125];
    let sweep = count_vs_epsilon(&em, &eps, 12.0, 0.005).unwrap();
    for (row, &e) in sweep.rows.iter().zip(&eps) {
        let bumps = thm14_max_count(&em, e, 60).unwrap();
        assert!(bumps >= 1 && bumps <= row.count, "eps {e}: {bumps} bumps, {} bound states", row.count);
    }
    assert!(thm14_trial_count(&em, 0.125, 4).unwrap().certified());
}
