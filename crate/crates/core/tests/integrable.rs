use blendlab::ifs::{minimality_experiment, recurrence_experiment, Ifs};
use blendlab::integrable::{
    bump_eta, chain_of_tori_search, conjugate, conjugating_shear, flow_h_epsilon, linear_twist, minimal_generator_pack,
    moved_circle_distance, shadow_chain, twist_map, PackMode,
};
use blendlab::map::check_symplectic;
use blendlab::space::{Region, StateSpace};
use blendlab::SmoothMap;
use proptest::prelude::*;

fn annulus_box() -> Region {
    Region::new(vec![0.0, 0.0], vec![1.0, 1.0])
}

#[test]
fn pack_fills_annulus_and_single_twist_does_not() {
    // Rotation bounded away from zero at the boundary circles.
    let t = twist_map(StateSpace::annulus(0.0, 1.0), |i| i + 0.3, |_| 1.0);
    let pack = minimal_generator_pack(&t, PackMode::Three, 7).unwrap();
    let ifs = Ifs::new(pack, annulus_box()).unwrap();
    let seeds = vec![vec![0.3, 0.2], vec![0.71, 0.9]];
    let rep = minimality_experiment(&ifs, &seeds, 1.0 / 64.0, 1_000_000, 4).unwrap();
    assert!(rep.min_coverage >= 0.99, "{:?}", rep.per_seed_coverage);

    let single = Ifs::new(vec![t.map.clone()], annulus_box()).unwrap();
    let rep = minimality_experiment(&single, &seeds, 1.0 / 64.0, 1_000_000, 4).unwrap();
    assert!(rep.min_coverage <= 0.05);
}

#[test]
fn h_eps_flow_properties() {
    let f = flow_h_epsilon(0.1, 1.0, None).unwrap();
    let samples: Vec<Vec<f64>> = (0..12).map(|k| vec![0.1 + 0.07 * k as f64, (0.29 * k as f64) % 1.0]).collect();
    let rep = check_symplectic(&f, &samples, 1e-6).unwrap();
    assert!(rep.pass, "{rep:?}");
    // Oracle: every image point's radial offset bounds the Hausdorff distance from below.
    let radial = (0..64)
        .map(|k| (f.apply(&[0.5, k as f64 / 64.0])[0] - 0.5).abs())
        .fold(0.0, f64::max);
    assert!(radial > 1e-3);
    assert!(moved_circle_distance(&f, 0.5, 64) >= radial - 1e-15);
    let back = f.inverse().unwrap();
    for x in &samples {
        let y = back.apply(&f.apply(x));
        assert!(StateSpace::annulus(0.0, 2.0).distance(&y, x) < 1e-8);
    }
}

#[test]
fn bump_normalization() {
    let oracle = 4f64.exp() * (-1.0f64 / 0.25).exp();
    assert!((bump_eta(0.5) - oracle).abs() < 1e-15);
    // Flat at both ends: third differences vanish to working precision.
    for x0 in [0.0, 1.0] {
        let h = 1e-3;
        let d3 = (bump_eta(x0 + 2.0 * h) - 3.0 * bump_eta(x0 + h) + 3.0 * bump_eta(x0) - bump_eta(x0 - h)) / h.powi(3);
        assert!(d3.abs() < 1e-100);
    }
}

#[test]
fn twist_recurrence() {
    let t = linear_twist(StateSpace::annulus(0.0, 1.0));
    let samples: Vec<Vec<f64>> = (0..200).map(|k| vec![(k as f64 * 0.618_033_988_7) % 1.0, (k as f64 * 0.414_213_56) % 1.0]).collect();
    let rep = recurrence_experiment(&t.map, &samples, 0.02, 500);
    assert!(rep.recurrent_fraction >= 0.95);
    let line = SmoothMap::endo("shift", StateSpace::line(), |x| vec![x[0] + 1.0]);
    let pts: Vec<Vec<f64>> = (0..20).map(|k| vec![k as f64 * 0.1]).collect();
    assert_eq!(recurrence_experiment(&line, &pts, 0.02, 500).recurrent_fraction, 0.0);
}

#[test]
fn chain_and_shadow_across_annulus() {
    let space = StateSpace::annulus(0.0, 1.0);
    let t1 = linear_twist(space.clone());
    let phi = conjugating_shear(space, 0.1).unwrap();
    let t2 = conjugate(&t1.map, &phi).unwrap();
    let ifs = Ifs::new(vec![t1.map.clone(), t2], annulus_box()).unwrap();
    let u = Region::new(vec![0.09, 0.0], vec![0.11, 1.0]);
    let v = Region::new(vec![0.89, 0.0], vec![0.91, 1.0]);
    let chain = chain_of_tori_search(&t1, 0.1, &u, &v, 0.1 / (2.0 * 2f64.sqrt())).unwrap();
    assert!(chain.len() <= 22);
    let w = shadow_chain(&ifs, &chain, &chain.start_point, 0.01).unwrap();
    assert!(w.replay_check(&ifs, &chain, &chain.start_point));
}

proptest! {
    #[test]
    fn twist_preserves_action(i in 0.0f64..1.0, th in 0.0f64..1.0, n in 1usize..50) {
        let t = linear_twist(StateSpace::annulus(0.0, 1.0));
        let mut p = vec![i, th];
        for _ in 0..n {
            p = t.map.apply(&p);
        }
        prop_assert_eq!(p[0], i);
    }

    #[test]
    fn shear_round_trip(i in 0.2f64..0.8, th in 0.0f64..1.0, eps in -0.15f64..0.15) {
        let s = conjugating_shear(StateSpace::annulus(0.0, 1.0), eps).unwrap();
        let y = s.inverse().unwrap().apply(&s.apply(&[i, th]));
        prop_assert!((y[0] - i).abs() < 1e-14 && (y[1] - th).abs() < 1e-14);
    }
}
