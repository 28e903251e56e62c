mod common;

use common::random_rectilinear;
use hazard_heterophily::geo::validate_geometry;
use hazard_heterophily::overlay::{
    compute_fp_rates, monte_carlo_area_estimate, polygon_area, polygon_intersection,
    polygon_intersection_area, polygon_union, union_layers,
};
use hazard_heterophily::{FloodLayer, MultiPolygon, Parallelism, Zone};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64) -> (MultiPolygon, MultiPolygon) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        random_rectilinear(&mut rng, 4),
        random_rectilinear(&mut rng, 4),
    )
}

fn layer(g: MultiPolygon) -> FloodLayer {
    FloodLayer {
        label: "l".into(),
        geometry: g,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn inclusion_exclusion(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let (aa, ab) = (polygon_area(&a).unwrap(), polygon_area(&b).unwrap());
        let union = polygon_area(&polygon_union(&a, &b).unwrap()).unwrap();
        let inter = polygon_intersection_area(&a, &b).unwrap();
        prop_assert!((union + inter - aa - ab).abs() < 1e-9 * (aa + ab));
        prop_assert!(inter <= aa.min(ab) + 1e-12);
    }

    #[test]
    fn overlay_geometry_is_valid_and_consistent(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let u = polygon_union(&a, &b).unwrap();
        let i = polygon_intersection(&a, &b).unwrap();
        prop_assert!(validate_geometry(&u).is_ok(), "{}", validate_geometry(&u));
        prop_assert!(validate_geometry(&i).is_ok(), "{}", validate_geometry(&i));
        let ia = polygon_area(&i).unwrap();
        prop_assert!((ia - polygon_intersection_area(&a, &b).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn union_commutative_and_idempotent(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let ab = polygon_area(&union_layers(&[layer(a.clone()), layer(b.clone())]).unwrap()).unwrap();
        let ba = polygon_area(&union_layers(&[layer(b.clone()), layer(a.clone())]).unwrap()).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        let aa = polygon_area(&union_layers(&[layer(a.clone()), layer(a.clone())]).unwrap()).unwrap();
        prop_assert!((aa - polygon_area(&a).unwrap()).abs() <= 1e-12 * aa.max(1.0));
    }

    #[test]
    fn fp_rates_bounded_monotone_and_mode_independent(seed in any::<u64>()) {
        let (a, b) = pair(seed);
        let zones: Vec<Zone> = (0..5)
            .flat_map(|x| (0..5).map(move |y| (x, y)))
            .map(|(x, y)| {
                let (x, y) = (x as f64 * 2.0, y as f64 * 2.0);
                Zone::new(format!("{x}-{y}"), MultiPolygon::rectangle(x, y, x + 2.0, y + 2.0))
            })
            .collect();
        let one = union_layers(&[layer(a.clone())]).unwrap();
        let two = union_layers(&[layer(a), layer(b)]).unwrap();
        let r1 = compute_fp_rates(&zones, &one, Parallelism::Sequential).unwrap();
        let r2 = compute_fp_rates(&zones, &two, Parallelism::Sequential).unwrap();
        let r2p = compute_fp_rates(&zones, &two, Parallelism::Parallel).unwrap();
        for ((x, y), z) in r1.iter().zip(&r2).zip(&r2p) {
            prop_assert!((0.0..=100.0).contains(&x.fp_rate));
            prop_assert!(y.fp_rate >= x.fp_rate - 1e-9, "{} -> {}", x.fp_rate, y.fp_rate);
            prop_assert_eq!(y.fp_rate.to_bits(), z.fp_rate.to_bits());
        }
        // Zone order does not change per-zone values.
        let mut rev = zones.clone();
        rev.reverse();
        let rr = compute_fp_rates(&rev, &two, Parallelism::Parallel).unwrap();
        for (x, y) in r2.iter().zip(rr.iter().rev()) {
            prop_assert_eq!(x.fp_rate.to_bits(), y.fp_rate.to_bits());
        }
    }
}

#[test]
fn exact_overlay_agrees_with_monte_carlo() {
    let mut within = 0;
    let cases = 40;
    for seed in 0..cases {
        let (a, b) = pair(1000 + seed);
        let exact = polygon_intersection_area(&a, &b).unwrap();
        let est = monte_carlo_area_estimate(&a, &b, 100_000, seed).unwrap();
        if (exact - est.estimate).abs() <= 4.0 * est.std_error.max(1e-12) {
            within += 1;
        }
    }
    assert!(within >= cases - 1, "{within}/{cases}");
}

#[test]
fn near_degenerate_offsets_snap_cleanly() {
    let a = MultiPolygon::rectangle(0.0, 0.0, 1.0, 1.0);
    let b = MultiPolygon::rectangle(1.0 + 1e-13, 0.0, 2.0, 1.0);
    assert_eq!(polygon_intersection_area(&a, &b).unwrap(), 0.0);
    let u = polygon_union(&a, &b).unwrap();
    assert_eq!(u.polygons.len(), 1);
    assert!((polygon_area(&u).unwrap() - 2.0).abs() < 1e-12);
}
