use hazard_heterophily::geo::validate_geometry;
use hazard_heterophily::overlay::{compute_fp_rates, union_layers};
use hazard_heterophily::synth::{generate_community, SynthParams, SyntheticCommunity};
use hazard_heterophily::Parallelism;

fn small(seed: u64) -> SynthParams {
    SynthParams {
        grid_w: 12,
        grid_h: 10,
        seed,
        ..Default::default()
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

fn incomes(c: &SyntheticCommunity) -> Vec<f64> {
    c.zones
        .iter()
        .map(|z| z.median_household_income.unwrap())
        .collect()
}

/// Weighted mean absolute income difference across ties.
fn tie_income_gap(c: &SyntheticCommunity) -> f64 {
    let inc: std::collections::HashMap<&str, f64> = c
        .zones
        .iter()
        .map(|z| (z.zone_id.as_str(), z.median_household_income.unwrap()))
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for r in c.edges.records() {
        let w = r.weight as f64;
        num += w * (inc[r.loc_a.as_str()] - inc[r.loc_b.as_str()]).abs();
        den += w;
    }
    num / den
}

#[test]
fn same_seed_same_community_and_different_seed_differs() {
    for seed in 0..5 {
        let a = generate_community(&small(seed)).unwrap();
        let b = generate_community(&small(seed)).unwrap();
        assert_eq!(a, b);
        let c = generate_community(&small(seed + 100)).unwrap();
        assert_ne!(a.edges.edges(), c.edges.edges());
    }
}

#[test]
fn generated_inputs_are_valid_and_consistent() {
    for seed in 0..10 {
        let p = SynthParams {
            flood_income_corr: (seed as f64 / 10.0) - 0.5,
            homophily_strength: seed as f64,
            ..small(seed)
        };
        let c = generate_community(&p).unwrap();
        assert_eq!(c.zones.len(), 120);
        for z in &c.zones {
            assert!(validate_geometry(&z.geometry).is_ok());
            let inc = z.median_household_income.unwrap();
            assert!((p.income_range.0..=p.income_range.1).contains(&inc));
            assert!((500..=5000).contains(&z.population.unwrap()));
        }
        for l in &c.flood_layers {
            assert!(validate_geometry(&l.geometry).is_ok(), "{}", l.label);
        }
        // The overlay recovers the generated flood fraction.
        let flood = union_layers(&c.flood_layers).unwrap();
        let rates = compute_fp_rates(&c.zones, &flood, Parallelism::Parallel).unwrap();
        for (r, f) in rates.iter().zip(&c.flood_fraction) {
            assert!(
                (r.fp_rate - 100.0 * f).abs() < 1e-6,
                "{} vs {}",
                r.fp_rate,
                f
            );
        }
        let expected_edges = (120.0 * p.edges_per_zone / 2.0_f64).round() as usize;
        assert_eq!(c.edges.len(), expected_edges);
        assert!(c.edges.edges().iter().all(|e| e.weight >= 1 && e.a != e.b));
    }
}

#[test]
fn uncorrelated_flood_and_income_average_out() {
    let seeds = 50;
    let mut total = 0.0;
    for seed in 0..seeds {
        let c = generate_community(&small(seed)).unwrap();
        total += pearson(&incomes(&c), &c.flood_fraction);
    }
    let mean = total / seeds as f64;
    assert!(mean.abs() < 0.1, "mean correlation {mean}");
}

#[test]
fn correlation_parameter_sets_the_sign() {
    for seed in 0..10 {
        let pos = generate_community(&SynthParams {
            flood_income_corr: 0.9,
            ..small(seed)
        })
        .unwrap();
        let neg = generate_community(&SynthParams {
            flood_income_corr: -0.9,
            ..small(seed)
        })
        .unwrap();
        // Positive values tie flooding to lower incomes.
        assert!(pearson(&incomes(&pos), &pos.flood_fraction) < -0.5);
        assert!(pearson(&incomes(&neg), &neg.flood_fraction) > 0.5);
    }
}

#[test]
fn homophily_narrows_the_income_gap_of_ties() {
    for seed in 0..20 {
        let flat = generate_community(&small(seed)).unwrap();
        let homo = generate_community(&SynthParams {
            homophily_strength: 10.0,
            ..small(seed)
        })
        .unwrap();
        let (g0, g10) = (tie_income_gap(&flat), tie_income_gap(&homo));
        assert!(g10 < g0, "seed {seed}: {g10} !< {g0}");
    }
}
