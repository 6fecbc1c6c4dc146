use blendlab::blender::*;
use blendlab::map::check_symplectic;
use blendlab::space::{Region, StateSpace};
use blendlab::SmoothMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn triple(symplectic: bool) -> GeometricBlenderModel {
    let sp = StateSpace::cube(1, -1.0, 2.0);
    let gens = [0.0, 0.25, 0.5].iter().map(|c| SmoothMap::affine_1d(sp.clone(), 0.5, *c)).collect();
    let base = HorseshoeBase::affine(3, 0.1, 10.0).unwrap();
    build_geometric_model(base, gens, None, Region::interval(0.125, 0.875), None, symplectic).unwrap()
}

fn desk(mu: f64) -> DeskModel {
    desk_model(&DeskParams { mu, ..DeskParams::default() }).unwrap()
}

#[test]
fn symplectic_product_passes_checker() {
    let m = triple(true);
    let samples = m.region_samples(5);
    let r = check_symplectic(m.map(), &samples, 1e-8).unwrap();
    assert!(r.pass, "{}", r.max_residual);
}

#[test]
fn perturbed_verdicts_persist_across_seeds() {
    let m = triple(true);
    let cov = verify_covering_geometric(&m, 1.0 / 64.0).unwrap();
    let margin = cov.cs.margin.unwrap();
    let eta = 0.3 * margin;
    let s = sample_strips(&m, StripKind::S, 10, 1.0 / 32.0, 11).unwrap();
    let u = sample_strips(&m, StripKind::U, 10, 1.0 / 32.0, 12).unwrap();
    for seed in 0..20 {
        let p = m.perturbed(eta, seed).unwrap();
        assert!(verify_strips(&p, &s, None, 10, 1e-9).unwrap().pass, "seed {seed}");
        assert!(verify_double_blender(&p, &s, &u, 10, 1e-9).unwrap().pass, "seed {seed}");
    }
}

#[test]
fn cones_survive_small_perturbation() {
    let m = triple(true);
    let samples = m.region_samples(4);
    assert!(verify_cone_invariance(m.map(), &m.cones, &samples).pass);
    let p = m.perturbed(0.01, 3).unwrap();
    assert!(verify_cone_invariance(p.map(), &p.cones, &samples).pass);
}

#[test]
fn witnesses_shrink_onto_nested_balls() {
    let m = triple(false);
    let z = vec![0.61];
    let leaf = m.base.left[1] + 0.5 * m.base.width();
    let mut last = f64::INFINITY;
    for r in [1.0 / 32.0, 1.0 / 128.0, 1.0 / 512.0] {
        let strip = Strip::new(StripKind::S, 1, leaf, z.clone(), r, vec![]);
        let rep = verify_strip_intersection(&m, &strip, default_anchor(&m, StripKind::S).unwrap(), 16, 1e-9).unwrap();
        assert!(rep.hit);
        assert!(rep.strip_distance <= r + 1e-9);
        let fiber_gap = (rep.witness_point[2] - z[0]).abs();
        assert!(fiber_gap <= r + 1e-9 && fiber_gap <= last);
        last = r;
    }
}

#[test]
fn sweep_is_flat_at_small_eta() {
    let m = triple(false);
    let cfg = SweepConfig::default();
    let t = robustness_sweep(&m, &cfg, &[0.0, 0.005, 0.01], 20, 5).unwrap();
    for row in &t.rows {
        assert_eq!(row.pass_rate, 1.0, "{row:?}");
    }
    let single = robustness_sweep(&m, &cfg, &[0.0], 1, 5).unwrap();
    assert_eq!(single.rows[0].passes, 1);
}

#[test]
fn sweep_rejects_failing_baseline() {
    let sp = StateSpace::cube(1, -1.0, 2.0);
    let gens = [0.0, 0.6].iter().map(|c| SmoothMap::affine_1d(sp.clone(), 0.4, *c)).collect();
    let base = HorseshoeBase::affine(2, 0.1, 10.0).unwrap();
    let m = build_geometric_model(base, gens, None, Region::interval(0.0, 1.0), None, false).unwrap();
    assert!(robustness_sweep(&m, &SweepConfig::default(), &[0.0], 2, 1).is_err());
}

#[test]
fn f_mu_is_product_at_zero() {
    let d = desk(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let p = d.fmu.map().domain().sample(&mut rng);
        assert_eq!(d.fmu.apply(&p), d.fmu.unperturbed(&p));
    }
}

#[test]
fn f_mu_untouched_blocks_are_product() {
    let d = desk(1.0);
    let blocks = d.fmu.schedule.blocks(&d.fmu.base).unwrap();
    let y = [0.33, 0.81];
    for b in blocks.iter().filter(|b| b.group == BlockGroup::Untouched).take(40) {
        let p = d.fmu.block_point(b.i, b.j, 0.5);
        let q = [p[0], p[1], y[0], y[1]];
        assert_eq!(d.fmu.apply(&q), d.fmu.unperturbed(&q), "block ({}, {})", b.i, b.j);
    }
}

/// Central differences at step `h`; the collars are narrow, so the default
/// step is too coarse there.
fn jacobian_fd(f: &SmoothMap, p: &[f64], h: f64) -> nalgebra::DMatrix<f64> {
    let n = p.len();
    let mut j = nalgebra::DMatrix::zeros(n, n);
    for c in 0..n {
        let (mut a, mut b) = (p.to_vec(), p.to_vec());
        a[c] += h;
        b[c] -= h;
        let (fa, fb) = (f.apply(&a), f.apply(&b));
        for r in 0..n {
            let mut d = fa[r] - fb[r];
            if r == 3 {
                d -= d.round();
            }
            j[(r, c)] = d / (2.0 * h);
        }
    }
    j
}

#[test]
fn f_mu_is_symplectic_in_collars() {
    let d = desk(1.0);
    let base = &d.fmu.base;
    let mut omega = nalgebra::DMatrix::zeros(4, 4);
    for k in 0..2 {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    for (i, j) in [(1, 0), (0, 5), (7, 7), (0, 9), (9, 9), (2, 6)] {
        let c = base.cylinder(i, j);
        for t in [-0.1, 0.5, 1.1] {
            let p = vec![c.lo[0] + t * (c.hi[0] - c.lo[0]), base.lower[i] / (1.0 - base.mu_ss) + 1e-3, 0.66, 0.47];
            let jac = jacobian_fd(d.fmu.map(), &p, 1e-8);
            let res = (jac.transpose() * &omega * &jac - &omega).abs().max();
            let scale = jac.abs().max().powi(2);
            assert!(res <= 1e-5 * scale.max(1.0), "({i}, {j}) at {t}: {res} vs {scale}");
        }
    }
}

#[test]
fn desk_blender_is_a_double_blender() {
    let d = desk(1.0);
    let s = sample_strips(&d.blender, StripKind::S, 20, 1.0 / 32.0, 2).unwrap();
    let u = sample_strips(&d.blender, StripKind::U, 20, 1.0 / 32.0, 3).unwrap();
    assert!(verify_double_blender(&d.blender, &s, &u, 12, 1e-9).unwrap().pass);
}

#[test]
fn almost_minimality_on_desk_model() {
    let d = desk(1.0);
    let r = almost_minimality_experiment(&d, true, 64, 12, d.fmu.base.width(), 7);
    assert!(r.connected_fraction >= 0.95, "{}", r.connected_fraction);
    for o in r.outcomes.iter().filter(|o| o.connected()) {
        assert!(o.forward_reach.unwrap() <= r.leaf_bound && o.backward_reach.unwrap() <= r.leaf_bound);
    }
}

#[test]
fn unperturbed_minimality_matches_direct_orbits() {
    let d = desk(0.0);
    let r = almost_minimality_experiment(&d, true, 64, 12, d.fmu.base.width(), 7);
    let f2 = &d.twist.map;
    let inv = f2.inverse().unwrap();
    let orbit_hits = |q: &[f64], g: &SmoothMap| {
        let mut y = q.to_vec();
        for _ in 0..=12 {
            if d.blender_box.contains(&y) {
                return true;
            }
            y = g.apply(&y);
        }
        false
    };
    let mut both = 0;
    for o in &r.outcomes {
        let f = orbit_hits(&o.q, f2);
        let b = orbit_hits(&o.q, &inv);
        assert_eq!(o.forward.is_some(), f, "{:?}", o.q);
        assert_eq!(o.backward.is_some(), b, "{:?}", o.q);
        both += (f && b) as usize;
    }
    assert_eq!(r.connected_fraction, both as f64 / 64.0);
    assert!(r.connected_fraction < 0.5);
}

#[test]
fn sample_in_blender_connects_at_depth_zero() {
    let d = desk(1.0);
    let q = d.chart(0.5, 0.5);
    let f = itinerary_search(&d.fmu, Direction::Forward, &q, 0, &d.blender_box, 12, 1.0 / 512.0, false);
    assert_eq!(f, Some(vec![]));
}

#[test]
fn uu_segments_stay_connected_under_iteration() {
    let d = desk(1.0);
    let r = almost_minimality_experiment(&d, true, 20, 12, d.fmu.base.width(), 21);
    let f2 = &d.twist.map;
    let inv = f2.inverse().unwrap();
    let witnesses: Vec<&SampleOutcome> = r.outcomes.iter().filter(|o| o.forward.is_some()).collect();
    assert_eq!(witnesses.len(), 20);
    for o in witnesses {
        // The fixed point's block (0, 0) acts on the fiber by f₂.
        let (mut fwd, mut bwd) = (o.q.clone(), o.q.clone());
        for n in 1..=5 {
            fwd = f2.apply(&fwd);
            bwd = inv.apply(&bwd);
            for y in [&fwd, &bwd] {
                let w = itinerary_search(&d.fmu, Direction::Forward, y, 0, &d.blender_box, 12, 1.0 / 512.0, false);
                assert!(w.is_some(), "{:?} after {n}", o.q);
            }
        }
    }
}

#[test]
fn schedule_needs_enough_symbols() {
    let r = desk_model(&DeskParams { l: 4, ..DeskParams::default() });
    assert!(r.is_ok());
    let rows = vec![(vec![0.1], vec![0.0]); 3];
    let cols = vec![(vec![0.0], vec![0.1]); 3];
    assert!(BlockSchedule::standard(10, rows, cols, 25.0).is_err());
}

#[test]
fn weak_power_feasibility() {
    assert!(check_weak_power(0.01, 60).is_ok());
    let e = check_weak_power(0.01, 80).unwrap_err().to_string();
    assert!(e.contains("68"), "{e}");
}

#[test]
fn bump_translation_is_symplectic() {
    let inner = Region::new(vec![0.4, 0.4], vec![0.6, 0.6]);
    let outer = Region::new(vec![0.2, 0.2], vec![0.8, 0.8]);
    let g = hamiltonian_bump_translation(&[0.05], &[-0.03], &inner, &outer).unwrap();
    let samples: Vec<Vec<f64>> = (0..40).map(|k| vec![0.22 + 0.014 * k as f64, 0.25 + 0.0125 * k as f64]).collect();
    let r = check_symplectic(&g, &samples, 1e-8).unwrap();
    assert!(r.pass, "{}", r.max_residual);
}
