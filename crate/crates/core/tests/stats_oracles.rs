use hazard_heterophily::stats::{
    median, median_split, skewness, student_t_two_sided, welch_t_test, Histogram, SkewnessVariant,
};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma as oracle_ln_gamma;

const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Two-sided tail of Student's t by composite Gauss-Legendre integration of
/// the density over [0, |t|].
fn quadrature_two_sided(t: f64, df: f64) -> f64 {
    let log_c = oracle_ln_gamma((df + 1.0) / 2.0)
        - oracle_ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |x: f64| (log_c - (df + 1.0) / 2.0 * (x * x / df).ln_1p()).exp();
    let upper = t.abs();
    let panels = 4000;
    let h = upper / panels as f64;
    let mut central = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            central += w * density(mid + 0.5 * h * x);
        }
    }
    1.0 - central * h
}

#[test]
fn student_t_matches_quadrature() {
    for df in [1.0, 2.0, 4.411_764_705_882_353, 30.0, 100.0] {
        for step in 0..=80 {
            let t = -10.0 + 0.25 * step as f64;
            let ours = student_t_two_sided(t, df);
            let oracle = quadrature_two_sided(t, df);
            assert!(
                (ours - oracle).abs() < 1e-9,
                "df={df} t={t}: {ours} vs {oracle}"
            );
        }
    }
}

#[test]
fn student_t_matches_statrs() {
    for df in [1.0, 1.5, 3.0, 4.411_764_705_882_353, 12.0, 250.0] {
        let dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for step in 0..=40 {
            let t = 0.2 * step as f64;
            let oracle = 2.0 * dist.sf(t);
            let ours = student_t_two_sided(t, df);
            assert!(
                (ours - oracle).abs() < 1e-10,
                "df={df} t={t}: {ours} vs {oracle}"
            );
        }
    }
}

#[test]
fn ln_gamma_matches_statrs() {
    for i in 1..400 {
        let x = i as f64 * 0.137;
        let a = hazard_heterophily::stats::ln_gamma(x);
        let b = oracle_ln_gamma(x);
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{x}: {a} vs {b}");
    }
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 3..60).prop_filter("needs spread", |v| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() > 1e-3
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn skewness_affine_invariance(v in sample(), a in -50.0f64..50.0, b in 0.1f64..20.0) {
        for variant in [SkewnessVariant::Adjusted, SkewnessVariant::Biased] {
            let base = skewness(&v, variant).unwrap();
            let moved: Vec<f64> = v.iter().map(|x| a + b * x).collect();
            let neg: Vec<f64> = v.iter().map(|x| -x).collect();
            let tol = 1e-8 * base.abs().max(1.0);
            prop_assert!((skewness(&moved, variant).unwrap() - base).abs() < tol);
            prop_assert!((skewness(&neg, variant).unwrap() + base).abs() < tol);
        }
    }

    #[test]
    fn skewness_zero_for_symmetric_samples(v in prop::collection::vec(0.1f64..100.0, 2..30)) {
        let mut sym: Vec<f64> = v.clone();
        sym.extend(v.iter().map(|x| -x));
        let g = skewness(&sym, SkewnessVariant::Adjusted).unwrap();
        prop_assert!(g.abs() < 1e-9, "{g}");
    }

    #[test]
    fn welch_is_antisymmetric(a in sample(), b in sample()) {
        let ab = welch_t_test(&a, &b, 0.05).unwrap();
        let ba = welch_t_test(&b, &a, 0.05).unwrap();
        prop_assert!((ab.t_statistic + ba.t_statistic).abs() <= 1e-12 * ab.t_statistic.abs().max(1.0));
        prop_assert!((ab.degrees_of_freedom - ba.degrees_of_freedom).abs() <= 1e-9 * ab.degrees_of_freedom);
        prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        let lo = (a.len().min(b.len()) - 1) as f64;
        let hi = (a.len() + b.len() - 2) as f64;
        prop_assert!(ab.degrees_of_freedom >= lo - 1e-9 && ab.degrees_of_freedom <= hi + 1e-9);
    }

    #[test]
    fn p_value_decreases_with_abs_t(df in 0.5f64..200.0, t1 in 0.0f64..20.0, dt in 0.01f64..5.0) {
        let p1 = student_t_two_sided(t1, df);
        let p2 = student_t_two_sided(t1 + dt, df);
        prop_assert!(p2 <= p1);
        prop_assert_eq!(student_t_two_sided(-t1, df).to_bits(), p1.to_bits());
    }

    #[test]
    fn median_split_halves(v in prop::collection::vec(-100.0f64..100.0, 1..80)) {
        let split = median_split(&v).unwrap();
        prop_assert_eq!(split.median.to_bits(), median(&v).unwrap().to_bits());
        let high = split.high.iter().filter(|&&h| h).count();
        let low = v.len() - high;
        // With distinct values the split is as even as possible.
        let mut d = v.clone();
        d.sort_by(f64::total_cmp);
        d.dedup();
        if d.len() == v.len() {
            prop_assert_eq!(high, v.len().div_ceil(2));
            prop_assert_eq!(low, v.len() / 2);
        }
        for (x, h) in v.iter().zip(&split.high) {
            if *h { prop_assert!(*x >= split.median); } else { prop_assert!(*x < split.median); }
        }
    }

    #[test]
    fn histogram_counts_everything_in_range(v in prop::collection::vec(-5.0f64..105.0, 0..200), bins in 1usize..40) {
        let h = Histogram::new(&v, bins, Some((0.0, 100.0))).unwrap();
        prop_assert_eq!(h.counts.len(), bins);
        prop_assert_eq!(h.edges.len(), bins + 1);
        let inside = v.iter().filter(|x| (0.0..=100.0).contains(*x)).count() as u64;
        prop_assert_eq!(h.total(), inside);
        if !v.is_empty() {
            let auto = Histogram::new(&v, bins, None).unwrap();
            prop_assert_eq!(auto.total(), v.len() as u64);
        }
    }
}
