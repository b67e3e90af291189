mod common;

use common::{gift_wrap, hausdorff, random_convex_points, vertex_sum_hull};
use pathgame::geometry::{collision_volume, AgentShape, Polytope};
use pathgame::Vec2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64) -> (Vec<Vec2>, Vec<Vec2>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (random_convex_points(&mut rng), random_convex_points(&mut rng))
}

proptest! {
    #[test]
    fn collision_volume_is_vertex_sum_hull(seed in any::<u64>()) {
        let (c, p) = pair(seed);
        let body = Polytope::from_points(&c).unwrap();
        let shape = AgentShape::region(body.translate(&-body.centroid())).unwrap();
        let AgentShape::Region(body) = &shape else { unreachable!() };
        let obstacle = Polytope::from_points(&p).unwrap();
        let neg: Vec<Vec2> = body.vertices().iter().map(|v| -v).collect();
        let oracle = vertex_sum_hull(&neg, &p);
        let got = collision_volume(&shape, &obstacle);
        prop_assert!(hausdorff(got.vertices(), &oracle) <= 1e-9);
    }

    #[test]
    fn minkowski_sum_commutes_and_is_convex(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let pa = Polytope::from_points(&a).unwrap();
        let pb = Polytope::from_points(&b).unwrap();
        let ab = pa.minkowski_sum(&pb);
        let ba = pb.minkowski_sum(&pa);
        prop_assert!(hausdorff(ab.vertices(), ba.vertices()) <= 1e-9);
        // the output is already its own hull
        let rewrapped = gift_wrap(ab.vertices());
        prop_assert_eq!(rewrapped.len(), ab.vertices().len());
        prop_assert!(ab.vertices().len() <= a.len() + b.len());
    }

    #[test]
    fn translated_body_overlaps_exactly_inside_volume(seed in any::<u64>(), x in -40.0..40.0f64, y in -40.0..40.0f64) {
        let (c, p) = pair(seed);
        let body = Polytope::from_points(&c).unwrap();
        let body = body.translate(&-body.centroid());
        let shape = AgentShape::region(body.clone()).unwrap();
        let obstacle = Polytope::from_points(&p).unwrap();
        let r = Vec2::new(x, y);
        let volume = collision_volume(&shape, &obstacle);
        // placed body meets P iff r ∈ P − C; skip points on the boundary
        let neg: Vec<Vec2> = body.vertices().iter().map(|v| -v).collect();
        let oracle = Polytope::from_points(&vertex_sum_hull(&neg, &p)).unwrap();
        let margin = oracle.faces().iter().map(|f| f.violation(&r)).fold(f64::NEG_INFINITY, f64::max);
        if margin.abs() > 1e-7 {
            prop_assert_eq!(volume.contains(&r), oracle.contains(&r));
        }
    }
}

#[test]
fn hundred_seeded_pairs() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (c, p) = pair(seed);
        let body = Polytope::from_points(&c).unwrap();
        let shape = AgentShape::region(body.translate(&-body.centroid())).unwrap();
        let AgentShape::Region(b) = &shape else { unreachable!() };
        let neg: Vec<Vec2> = b.vertices().iter().map(|v| -v).collect();
        let oracle = vertex_sum_hull(&neg, &p);
        let got = collision_volume(&shape, &Polytope::from_points(&p).unwrap());
        worst = worst.max(hausdorff(got.vertices(), &oracle));
    }
    assert!(worst <= 1e-9, "{worst}");
}
