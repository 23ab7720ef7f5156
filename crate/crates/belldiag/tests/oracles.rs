//! Cross-module oracle checks: quantities computed along two independent
//! routes must agree, and known-separable inputs must never trigger an
//! entanglement criterion.

use belldiag::criteria::{self, MubSet};
use belldiag::mat;
use belldiag::sampling::{self, Region, SampleSpec};
use belldiag::separability::{self, KernelStore};
use belldiag::symmetry::SymmetryGroup;
use belldiag::weyl::{self, SimplexCoords, WeylIndex};
use belldiag::witness;
use num_complex::Complex64;
use rand::Rng;

fn random_coords(d: usize, rng: &mut impl Rng) -> SimplexCoords {
    let mut c: Vec<f64> = (0..d * d).map(|_| -rng.random::<f64>().ln()).collect();
    let s: f64 = c.iter().sum();
    c.iter_mut().for_each(|x| *x /= s);
    SimplexCoords::new(d, c).unwrap()
}

#[test]
fn partial_transpose_spectra_agree_between_routes() {
    // route A: structural density construction, then matrix PT
    // route B: sum of partially transposed Bell projectors
    let mut rng = belldiag::rng::stream(201, &[0]);
    for d in [2usize, 3] {
        for _ in 0..10 {
            let coords = random_coords(d, &mut rng);
            let pt_a = mat::partial_transpose(&weyl::density_from_coords(&coords), d);
            let mut pt_b = mat::CMat::zeros(d * d, d * d);
            for k in 0..d {
                for l in 0..d {
                    let proj = weyl::bell_projector(WeylIndex::new(d, k as i64, l as i64));
                    pt_b += mat::partial_transpose(&proj, d)
                        * Complex64::new(coords.get(k, l), 0.0);
                }
            }
            let eig_a = mat::hermitian_eigenvalues(&pt_a);
            let eig_b = mat::hermitian_eigenvalues(&pt_b);
            for (a, b) in eig_a.iter().zip(&eig_b) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn entanglement_criteria_never_fire_on_kernel_vertices() {
    let group = SymmetryGroup::generate(3).unwrap();
    let mubs = MubSet::qutrit();
    let base = KernelStore::from_line_states(3).unwrap();
    let config = separability::KernelExtensionConfig {
        candidates: 8,
        seed: 23,
        mode: separability::CandidateMode::SupportPoint,
        prune: false,
        support_restarts: 4,
    };
    let store = separability::extend_kernel(&base, &config, &group, Some(&mubs))
        .unwrap()
        .store;
    assert!(store.len() > 500);
    for v in store.vertices() {
        let coords = SimplexCoords::new(3, v.clone()).unwrap();
        assert!(!criteria::e1_ppt(&coords).detected);
        assert!(!criteria::e2_realignment(&coords).detected);
        assert!(!criteria::e3_quasipure(&coords).detected);
        assert!(!criteria::e4_mub(&coords, &mubs).unwrap().detected);
    }
}

#[test]
fn witnesses_do_not_detect_known_separable_states() {
    let gen = witness::generate_witness_set(3, 24, 25, 321, None).unwrap();
    assert_eq!(gen.failed, 0);
    let mm = SimplexCoords::uniform(3);
    let (verdict, _) = witness::e5_detect(&mm, &gen.witnesses);
    assert!(!verdict.detected);
    for line in separability::line_states(3).unwrap() {
        let (v, _) = witness::e5_detect(&line, &gen.witnesses);
        assert!(!v.detected, "witness fired on a line state: {}", v.score);
    }
    let mut rng = belldiag::rng::stream(322, &[0]);
    for _ in 0..500 {
        let c = witness::random_twirled_product(3, &mut rng);
        let (v, _) = witness::e5_detect(&c, &gen.witnesses);
        assert!(!v.detected, "witness fired on a twirled product: {}", v.score);
    }
}

#[test]
fn e3_orbit_verdict_is_stable_under_tie_breaking() {
    // a state with a degenerate maximum: the per-element score may depend on
    // which index argmax picks, but the orbit-level maximum may not
    let group = SymmetryGroup::generate(3).unwrap();
    let mut c = vec![0.02; 9];
    c[0] = 0.42;
    c[4] = 0.42;
    let rest: f64 = 1.0 - c.iter().sum::<f64>();
    c[8] += rest;
    let coords = SimplexCoords::new(3, c).unwrap();
    let orbit = belldiag::symmetry::orbit(&coords, &group);
    let orbit_max = |start: &SimplexCoords| -> f64 {
        belldiag::symmetry::orbit(start, &group)
            .iter()
            .map(|e| criteria::e3_quasipure(e).score)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let reference = orbit_max(&coords);
    for element in orbit.iter().take(12) {
        assert!((orbit_max(element) - reference).abs() < 1e-12);
    }
}

#[test]
fn small_lattice_npt_fractions_match_enumeration() {
    // d=2, 2 steps over the full simplex: 10 nodes, 4 of them NPT;
    // 3 steps: 20 nodes, 16 NPT (hand-enumerated)
    let spec2 = SampleSpec::lattice(2, 2, Some(1.0));
    let pts2 = sampling::sample_lattice(&spec2).unwrap();
    assert_eq!(pts2.len(), 10);
    let npt2 = pts2
        .iter()
        .filter(|c| criteria::e1_ppt(c).detected)
        .count();
    assert_eq!(npt2, 4);

    let spec3 = SampleSpec::lattice(2, 3, Some(1.0));
    let pts3 = sampling::sample_lattice(&spec3).unwrap();
    assert_eq!(pts3.len(), 20);
    let npt3 = pts3
        .iter()
        .filter(|c| criteria::e1_ppt(c).detected)
        .count();
    assert_eq!(npt3, 16);
}

#[test]
fn d2_ppt_fraction_mirrors_binomial_expectation_at_reduced_scale() {
    // three sample sets; the PPT fraction of the d=2 simplex is exactly 1/2
    let mut fractions = Vec::new();
    for seed in [100u64, 101, 102] {
        let spec = SampleSpec::random(2, Region::Simplex, 4000, seed);
        let states = sampling::sample(&spec).unwrap();
        let ppt = states
            .iter()
            .filter(|c| !criteria::e1_ppt(c).detected)
            .count();
        fractions.push(ppt as f64 / 4000.0);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    assert!((mean - 0.5).abs() < 0.03, "mean PPT fraction {mean}");
}

#[test]
fn family_a_free_share_tracks_expected_value_at_reduced_scale() {
    let spec = SampleSpec::random(3, Region::FamilyA, 3000, 55);
    let states = sampling::sample_family_a(&spec).unwrap();
    let free = states
        .iter()
        .filter(|(_, _, _, c)| criteria::e1_ppt(c).detected)
        .count();
    let share = free as f64 / 3000.0;
    assert!((share - 0.817).abs() < 0.03, "family-A free share {share}");
}

#[test]
fn s2_detections_imply_s1_membership_on_line_state_hull_interior() {
    // states with small Weyl coefficient sums sit deep inside the separable
    // body; the line-state hull alone must already certify them
    let store = KernelStore::from_line_states(3).unwrap();
    let mut rng = belldiag::rng::stream(202, &[0]);
    let mut tested = 0;
    for _ in 0..300 {
        // mixtures toward the maximally mixed state have scores near 1
        let t = 0.3 * rng.random::<f64>();
        let noise = random_coords(3, &mut rng);
        let c: Vec<f64> = noise
            .as_slice()
            .iter()
            .map(|x| (1.0 - t) / 9.0 + t * x)
            .collect();
        let coords = SimplexCoords::new(3, c).unwrap();
        let s2 = separability::s2_weyl_criterion(&coords);
        if s2.detected {
            let s1 = separability::s1_hull_membership(&coords, &store);
            assert!(s1.verdict.detected, "S2 score {} but S1 missed", s2.score);
            tested += 1;
        }
    }
    assert!(tested > 100, "too few deeply separable states sampled: {tested}");
}
