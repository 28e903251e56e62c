use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::{AnalysisOutputs, PipelineError};
use crate::geo::geojson::{geometry_json, write_feature_collection, zone_properties};
use crate::network::{ExposureClass, Group};
use crate::overlay::HazardExposure;
use crate::stats::Histogram;

pub const OUTPUT_FILES: [&str; 6] = [
    "metrics.csv",
    "groups.csv",
    "summary.json",
    "zones_enriched.geojson",
    "hist_sum_of_sc.csv",
    "hist_res_tie_rate.csv",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    f(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Writes every result file into `out_dir`, creating it if needed.
/// Identical outputs always produce byte-identical files.
pub fn emit_outputs(
    outputs: &AnalysisOutputs,
    out_dir: impl AsRef<Path>,
) -> Result<(), PipelineError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write_file(&dir.join("metrics.csv"), |w| write_metrics(outputs, w))?;
    write_file(&dir.join("groups.csv"), |w| write_groups(outputs, w))?;
    write_file(&dir.join("summary.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary(outputs))?;
        w.write_all(b"\n")
    })?;
    write_file(&dir.join("zones_enriched.geojson"), |w| {
        write_enriched(outputs, w)
    })?;
    write_file(&dir.join("hist_sum_of_sc.csv"), |w| {
        write_histogram(&outputs.hist_sum_of_sc, w)
    })?;
    write_file(&dir.join("hist_res_tie_rate.csv"), |w| {
        write_histogram(&outputs.hist_res_tie_rate, w)
    })
}

fn write_metrics(o: &AnalysisOutputs, w: &mut impl Write) -> io::Result<()> {
    writeln!(
        w,
        "zone_id,fp_rate,exposure_class,sum_of_sc,low_exposure_sc,res_tie_rate,group,\
         zone_area,flood_area,median_household_income,population"
    )?;
    for ((m, e), z) in o.metrics.iter().zip(&o.exposures).zip(&o.zones) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&m.zone_id),
            m.fp_rate,
            m.exposure_class,
            m.sum_of_sc,
            m.low_exposure_sc,
            opt(m.res_tie_rate),
            opt(m.group),
            e.zone_area,
            e.flood_area,
            opt(z.median_household_income),
            opt(z.population),
        )?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_groups(o: &AnalysisOutputs, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "group,count,mean_income,income_missing")?;
    for g in &o.group_summaries {
        writeln!(
            w,
            "{},{},{},{}",
            g.group,
            g.count,
            opt(g.mean_income),
            g.income_missing
        )?;
    }
    Ok(())
}

fn write_histogram(h: &Histogram, w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "bin_lower,bin_upper,count")?;
    for (k, c) in h.counts.iter().enumerate() {
        writeln!(w, "{},{},{}", h.edges[k], h.edges[k + 1], c)?;
    }
    Ok(())
}

fn write_enriched(o: &AnalysisOutputs, w: &mut impl Write) -> io::Result<()> {
    write_feature_collection(
        o.zones.iter().zip(&o.metrics).map(|(z, m)| {
            let mut props = zone_properties(z);
            props.insert("fp_rate".into(), json!(m.fp_rate));
            props.insert("exposure_class".into(), json!(m.exposure_class));
            props.insert("sum_of_sc".into(), json!(m.sum_of_sc));
            props.insert("res_tie_rate".into(), json!(m.res_tie_rate));
            props.insert("group".into(), json!(m.group));
            (props, geometry_json(&z.geometry))
        }),
        w,
    )
}

#[derive(Serialize)]
struct Summary<'a> {
    zones: usize,
    edges: usize,
    median_fp_rate: f64,
    median_res_tie_rate: f64,
    exposure_counts: BTreeMap<ExposureClass, usize>,
    group_counts: BTreeMap<Group, usize>,
    unassigned: &'a [String],
    skewness: Value,
    t_test: &'a super::TTestReport,
    group_summaries: &'a [crate::stats::GroupSummary],
    ingest: &'a crate::sci::IngestStats,
    network: &'a crate::network::NetworkBuildStats,
    population_filter: &'a super::PopulationFilter,
    config: &'a super::ConfigEcho,
}

fn summary(o: &AnalysisOutputs) -> Summary<'_> {
    let mut exposure_counts = BTreeMap::new();
    for class in [ExposureClass::Low, ExposureClass::High] {
        exposure_counts.insert(class, o.count(class));
    }
    let mut group_counts = BTreeMap::new();
    for g in Group::ALL {
        group_counts.insert(g, o.metrics.iter().filter(|m| m.group == Some(g)).count());
    }
    Summary {
        zones: o.metrics.len(),
        edges: o.network.edges_kept,
        median_fp_rate: o.median_fp_rate,
        median_res_tie_rate: o.median_res_tie_rate,
        exposure_counts,
        group_counts,
        unassigned: &o.unassigned,
        skewness: json!({
            "variant": o.config.settings.analysis.skewness_variant,
            "sum_of_sc": o.skewness.sum_of_sc,
            "res_tie_rate": o.skewness.res_tie_rate,
            "notes": o.skewness.notes,
        }),
        t_test: &o.t_test,
        group_summaries: &o.group_summaries,
        ingest: &o.ingest,
        network: &o.network,
        population_filter: &o.population_filter,
        config: &o.config,
    }
}

/// Writes `zone_id,zone_area,flood_area,fp_rate` rows.
pub fn write_fp_rates(exposures: &[HazardExposure], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "zone_id,zone_area,flood_area,fp_rate")?;
    for e in exposures {
        writeln!(
            w,
            "{},{},{},{}",
            csv_field(&e.zone_id),
            e.zone_area,
            e.flood_area,
            e.fp_rate
        )?;
    }
    Ok(())
}
