use faframe::geometry::{
    apply_transform, build_radius_graph, pbc_edge_vector, random_reflection, random_transform,
    AtomicSystem, EuclideanTransform, Group, Matrix3, Vector3,
};
use faframe::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

fn random_system(n: usize, seed: u64) -> AtomicSystem {
    let mut rng = seeded_rng(seed);
    let pos = (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0)))
        .collect();
    let z = (0..n).map(|_| rng.random_range(1..=20)).collect();
    AtomicSystem::new(pos, z).unwrap()
}

fn random_periodic(n: usize, seed: u64) -> AtomicSystem {
    let mut rng = seeded_rng(seed);
    let cell = Matrix3::new(
        rng.random_range(7.0..9.0),
        rng.random_range(-0.5..0.5),
        0.0,
        rng.random_range(-0.5..0.5),
        rng.random_range(7.0..9.0),
        0.0,
        0.0,
        rng.random_range(-0.5..0.5),
        rng.random_range(7.0..9.0),
    );
    let pos = (0..n)
        .map(|_| {
            let f = Vector3::from_fn(|_, _| rng.random_range(0.0..1.0));
            cell.transpose() * f
        })
        .collect();
    let z = (0..n).map(|_| rng.random_range(1..=20)).collect();
    AtomicSystem::periodic(pos, z, cell, [true; 3]).unwrap()
}

/// Every edge within `cutoff` over all 27 neighbouring images, written
/// without the graph builder's helpers.
fn brute_force_edges(s: &AtomicSystem, cutoff: f64) -> Vec<(usize, usize, [i32; 3], f64)> {
    let cell = s.cell().copied().unwrap_or_else(Matrix3::zeros);
    let range = |p: bool| if p { -1..=1 } else { 0..=0 };
    let mut out = Vec::new();
    for i in 0..s.len() {
        for j in 0..s.len() {
            for a in range(s.pbc()[0]) {
                for b in range(s.pbc()[1]) {
                    for c in range(s.pbc()[2]) {
                        if i == j && (a, b, c) == (0, 0, 0) {
                            continue;
                        }
                        let shift = cell.row(0) * a as f64 + cell.row(1) * b as f64 + cell.row(2) * c as f64;
                        let v = s.positions()[i] - s.positions()[j] + shift.transpose();
                        let d = v.norm();
                        if d < cutoff {
                            out.push((j, i, [a, b, c], d));
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));
    out
}

#[test]
fn identity_transform_is_bitwise_noop() {
    let s = random_periodic(5, 1);
    assert_eq!(apply_transform(&s, &EuclideanTransform::identity()), s);
}

#[test]
fn translation_moves_positions_and_keeps_lattice() {
    let s = random_periodic(4, 2);
    let shift = Vector3::new(1.0, 2.0, 3.0);
    let out = apply_transform(&s, &EuclideanTransform::translation_only(shift));
    for (p, q) in out.positions().iter().zip(s.positions()) {
        assert!((p - (q + shift)).amax() < 1e-12);
    }
    assert_eq!(out.cell(), s.cell());
}

#[test]
fn composition_matches_sequential_application() {
    let mut rng = seeded_rng(3);
    let s = random_periodic(6, 3);
    let g = random_transform(Group::E3, &mut rng);
    let h = random_transform(Group::E3, &mut rng);
    let seq = apply_transform(&apply_transform(&s, &g), &h);
    let once = apply_transform(&s, &h.compose(&g));
    for (p, q) in seq.positions().iter().zip(once.positions()) {
        assert!((p - q).amax() < 1e-12);
    }
    assert!((seq.cell().unwrap() - once.cell().unwrap()).amax() < 1e-12);
}

#[test]
fn group_samples_have_the_right_shape() {
    let mut rng = seeded_rng(4);
    for _ in 0..200 {
        let g = random_transform(Group::SO3, &mut rng);
        assert!((g.determinant() - 1.0).abs() < 1e-10);
        assert_eq!(*g.translation(), Vector3::zeros());
        let t = random_transform(Group::T3, &mut rng);
        assert_eq!(*t.rotation(), Matrix3::identity());
        assert!(t.translation().amax() <= 10.0);
        let r = random_reflection(&mut rng);
        assert!((r.determinant() + 1.0).abs() < 1e-10);
    }
}

#[test]
fn e3_reflection_share_is_about_half() {
    let mut rng = seeded_rng(5);
    let n = 4000;
    let neg = (0..n)
        .filter(|_| random_transform(Group::E3, &mut rng).determinant() < 0.0)
        .count();
    // binomial(4000, 0.5): 4.5 standard deviations either side
    let sd = (n as f64 * 0.25).sqrt();
    assert!((neg as f64 - n as f64 / 2.0).abs() < 4.5 * sd, "{neg}");
}

#[test]
fn haar_rotations_have_no_preferred_axis() {
    // E[R] = 0 for Haar measure on SO(3).
    let mut rng = seeded_rng(6);
    let n = 4000;
    let mean: Matrix3<f64> = (0..n)
        .map(|_| *random_transform(Group::SO3, &mut rng).rotation())
        .sum::<Matrix3<f64>>()
        / n as f64;
    // each entry has variance 1/3
    assert!(mean.amax() < 4.5 * (1.0 / 3.0 / n as f64).sqrt(), "{mean}");
}

#[test]
fn image_vector_across_the_boundary() {
    let cell = Matrix3::identity() * 10.0;
    let v = pbc_edge_vector(&Vector3::new(1.0, 0.0, 0.0), &Vector3::new(9.0, 0.0, 0.0), [1, 0, 0], &cell);
    assert!((v - Vector3::new(2.0, 0.0, 0.0)).amax() < 1e-12);
}

#[test]
fn two_atoms_edges_depend_on_cutoff() {
    let s = AtomicSystem::new(vec![Vector3::zeros(), Vector3::new(3.0, 0.0, 0.0)], vec![8, 8]).unwrap();
    assert_eq!(build_radius_graph(&s, 5.0, 32).unwrap().len(), 2);
    assert_eq!(build_radius_graph(&s, 1.0, 32).unwrap().len(), 0);
}

#[test]
fn radius_graph_matches_brute_force() {
    for seed in 0..20 {
        let s = if seed % 2 == 0 {
            random_periodic(7, seed)
        } else {
            random_system(9, seed)
        };
        let cutoff = 3.5;
        let g = build_radius_graph(&s, cutoff, 1000).unwrap();
        let mut got: Vec<_> = g
            .edges
            .iter()
            .zip(&g.distances)
            .map(|(e, &d)| (e.src, e.dst, e.offset, d))
            .collect();
        got.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)));
        let want = brute_force_edges(&s, cutoff);
        assert_eq!(got.len(), want.len(), "seed {seed}");
        for (a, b) in got.iter().zip(&want) {
            assert_eq!((a.0, a.1, a.2), (b.0, b.1, b.2));
            assert!((a.3 - b.3).abs() < 1e-12);
        }
    }
}

#[test]
fn max_neighbors_keeps_the_nearest() {
    let s = random_system(12, 7);
    let full = build_radius_graph(&s, 100.0, 1000).unwrap();
    let capped = build_radius_graph(&s, 100.0, 3).unwrap();
    for dst in 0..s.len() {
        let mut all: Vec<f64> = full
            .edges
            .iter()
            .zip(&full.distances)
            .filter(|(e, _)| e.dst == dst)
            .map(|(_, &d)| d)
            .collect();
        all.sort_by(f64::total_cmp);
        let mut kept: Vec<f64> = capped
            .edges
            .iter()
            .zip(&capped.distances)
            .filter(|(e, _)| e.dst == dst)
            .map(|(_, &d)| d)
            .collect();
        kept.sort_by(f64::total_cmp);
        assert_eq!(kept, all[..3]);
    }
}

#[test]
fn oversized_cutoff_is_rejected() {
    let s = random_periodic(3, 8);
    assert!(build_radius_graph(&s, 20.0, 32).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_rigid_invariants(seed in any::<u64>(), n in 2usize..8) {
        let s = random_periodic(n, seed);
        let mut rng = seeded_rng(seed ^ 0xabc);
        let g = random_transform(Group::E3, &mut rng);
        let moved = apply_transform(&s, &g);
        let a = build_radius_graph(&s, 3.0, 1000).unwrap();
        let b = build_radius_graph(&moved, 3.0, 1000).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for k in 0..a.len() {
            prop_assert_eq!(a.edges[k], b.edges[k]);
            prop_assert!((a.distances[k] - b.distances[k]).abs() < 1e-9);
            let rotated = g.apply_vector(&a.rel_vectors[k]);
            prop_assert!((rotated - b.rel_vectors[k]).amax() < 1e-9);
        }
    }

    #[test]
    fn inverse_undoes_transform(seed in any::<u64>()) {
        let s = random_system(5, seed);
        let mut rng = seeded_rng(seed);
        let g = random_transform(Group::E3, &mut rng);
        let back = apply_transform(&apply_transform(&s, &g), &g.inverse());
        for (p, q) in back.positions().iter().zip(s.positions()) {
            prop_assert!((p - q).amax() < 1e-10);
        }
    }

    #[test]
    fn sampled_rotations_are_orthogonal(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        for group in [Group::E3, Group::SE3, Group::SO3, Group::ZAxis2D] {
            let g = random_transform(group, &mut rng);
            let u = g.rotation();
            prop_assert!((u.transpose() * u - Matrix3::identity()).amax() < 1e-10);
        }
    }

    #[test]
    fn permutation_preserves_edge_multiset(seed in any::<u64>()) {
        let s = random_system(6, seed);
        let mut order: Vec<usize> = (0..6).collect();
        let mut rng = seeded_rng(seed);
        for i in (1..6).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let p = s.permuted(&order).unwrap();
        let mut a = build_radius_graph(&s, 4.0, 1000).unwrap().distances;
        let mut b = build_radius_graph(&p, 4.0, 1000).unwrap().distances;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
