mod common;

use common::fixture_dir;
use hazard_heterophily::report::{
    emit_outputs, run_pipeline, EdgeSource, InputPaths, PipelineConfig, OUTPUT_FILES,
};
use hazard_heterophily::{ExposureClass, Group, Parallelism};

fn inputs() -> InputPaths {
    let dir = fixture_dir();
    InputPaths {
        zones: dir.join("zones.geojson"),
        flood: vec![
            dir.join("flood_100yr.geojson"),
            dir.join("flood_500yr.geojson"),
        ],
        flood_labels: vec!["100yr".into(), "500yr".into()],
        edges: EdgeSource::Sci {
            path: dir.join("sci.tsv"),
        },
    }
}

#[test]
fn pocket_county_matches_hand_computation() {
    let out = run_pipeline(&inputs(), &PipelineConfig::default()).unwrap();
    let expected = [
        (
            "A",
            0.0,
            ExposureClass::Low,
            16,
            100.0 * 5.0 / 16.0,
            Group::G1,
        ),
        ("B", 10.0, ExposureClass::Low, 9, 100.0, Group::G2),
        (
            "C",
            10.0,
            ExposureClass::Low,
            12,
            100.0 * 4.0 / 12.0,
            Group::G1,
        ),
        ("D", 100.0, ExposureClass::High, 20, 50.0, Group::G3),
        (
            "E",
            76.0,
            ExposureClass::High,
            15,
            100.0 * 2.0 / 15.0,
            Group::G4,
        ),
        ("F", 40.0, ExposureClass::High, 10, 70.0, Group::G3),
    ];
    for (id, fp, class, sum, rho, group) in expected {
        let m = out.metric(id).unwrap();
        assert!((m.fp_rate - fp).abs() < 1e-9, "{id} fp {}", m.fp_rate);
        assert_eq!(m.exposure_class, class, "{id}");
        assert_eq!(m.sum_of_sc, sum, "{id}");
        assert!((m.res_tie_rate.unwrap() - rho).abs() < 1e-12, "{id}");
        assert_eq!(m.group, Some(group), "{id}");
    }
    assert!((out.median_fp_rate - 25.0).abs() < 1e-9);
    assert!((out.median_res_tie_rate - 125.0 / 3.0).abs() < 1e-12);
    assert_eq!(out.ingest.rows_read, 13);
    assert_eq!(out.ingest.rows_kept, 11);
    assert_eq!(out.ingest.rows_dropped_unknown_zone, 2);

    let means: Vec<Option<f64>> = out.group_summaries.iter().map(|g| g.mean_income).collect();
    assert_eq!(
        means,
        vec![
            Some(60_000.0),
            Some(90_000.0),
            Some(90_000.0),
            Some(40_000.0)
        ]
    );
    assert!(out.t_test.result.is_none());
    assert!(out.t_test.note.is_some());
}

#[test]
fn emitted_files_do_not_depend_on_parallelism() {
    let mut dirs = Vec::new();
    for mode in [Parallelism::Sequential, Parallelism::Parallel] {
        let config = PipelineConfig {
            parallelism: mode,
            ..Default::default()
        };
        let out = run_pipeline(&inputs(), &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_outputs(&out, dir.path()).unwrap();
        dirs.push(dir);
    }
    for name in OUTPUT_FILES {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty(), "{name}");
        assert_eq!(a, b, "{name}");
    }
}
