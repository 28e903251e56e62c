//! `heterophily`: flood-exposure overlay, social-connectedness network
//! metrics and group statistics from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 numerical failure.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use hazard_heterophily::network::Group;
use hazard_heterophily::report::{
    check_inputs, emit_outputs, overlay_only, run_pipeline, write_fp_rates, EdgeSource, InputPaths,
    PipelineConfig, PipelineError, DEFAULT_ALPHA, DEFAULT_BINS,
};
use hazard_heterophily::stats::SkewnessVariant;
use hazard_heterophily::synth::{generate_community, SynthParams};
use hazard_heterophily::{AnalysisConfig, CrsMode, Parallelism};

#[derive(Parser)]
#[command(
    name = "heterophily",
    version,
    about = "Hazard-exposure heterophily in socio-spatial networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis and write result files.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic community in the input file formats.
    Synth(SynthArgs),
    /// Compute floodplain percentages only.
    Overlay(OverlayArgs),
    /// Validate inputs and print ingest statistics without analysis.
    Check(InputArgs),
}

#[derive(Args)]
struct FloodArgs {
    /// Zone polygons (GeoJSON FeatureCollection with a "zone_id" property).
    #[arg(long)]
    zones: PathBuf,
    /// Flood-hazard layer; repeat for several layers.
    #[arg(long, required = true)]
    flood: Vec<PathBuf>,
    /// Label for each --flood, in order. Defaults to the file stems.
    #[arg(long = "flood-label")]
    flood_label: Vec<String>,
    /// How input coordinates are interpreted.
    #[arg(long, default_value = "planar")]
    crs: CrsMode,
}

#[derive(Args)]
struct InputArgs {
    #[command(flatten)]
    flood: FloodArgs,
    /// Scaled SCI file (user_loc, fr_loc, scaled_sci).
    #[arg(long, conflicts_with_all = ["raw", "users"], required_unless_present = "raw")]
    sci: Option<PathBuf>,
    /// Raw friendship counts (loc_a, loc_b, friend_count); needs --users.
    #[arg(long, requires = "users")]
    raw: Option<PathBuf>,
    /// Per-zone user counts (zone_id,users).
    #[arg(long, requires = "raw")]
    users: Option<PathBuf>,
    /// Exclude zones whose population is known and below this value.
    #[arg(long)]
    min_population: Option<u64>,
    /// Run every stage on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Drop edges lighter than this (0 keeps all).
    #[arg(long, default_value_t = 0)]
    min_edge_weight: u64,
    /// Keep an edge only if it is among the k heaviest of an endpoint.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    top_k: Option<u64>,
    /// Count self-pairs in connectedness sums and tie rates.
    #[arg(long)]
    include_self_loops: bool,
    #[arg(long, default_value = "adjusted")]
    skewness: SkewnessVariant,
    /// Pair of groups compared by the income t-test, e.g. G3,G4.
    #[arg(long, default_value = "G3,G4", value_parser = parse_group_pair)]
    ttest_groups: (Group, Group),
    /// Significance level of the t-test.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Histogram bin count.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OverlayArgs {
    #[command(flatten)]
    flood: FloodArgs,
    /// Directory for fp_rates.csv; prints to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    grid_w: usize,
    #[arg(long, default_value_t = 20)]
    grid_h: usize,
    #[arg(long, default_value_t = 25_000.0)]
    income_low: f64,
    #[arg(long, default_value_t = 150_000.0)]
    income_high: f64,
    /// Box-filter radius of the income field, in cells.
    #[arg(long, default_value_t = 2.0)]
    income_smoothness: f64,
    /// Tendency of flood coverage toward low-income zones, in [-1, 1].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    flood_income_corr: f64,
    /// Preference for ties between zones of similar income.
    #[arg(long, default_value_t = 0.0)]
    homophily_strength: f64,
    /// Decay of tie affinity per cell of distance.
    #[arg(long, default_value_t = 0.3)]
    distance_decay: f64,
    /// Target mean degree.
    #[arg(long, default_value_t = 10.0)]
    edges_per_zone: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn parse_group_pair(s: &str) -> Result<(Group, Group), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts[..] {
        [a, b] => Ok((a.parse()?, b.parse()?)),
        _ => Err(format!("expected two comma-separated groups, got {s:?}")),
    }
}

fn mode(sequential: bool) -> Parallelism {
    if sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

fn labels(args: &FloodArgs) -> Vec<String> {
    if !args.flood_label.is_empty() {
        return args.flood_label.clone();
    }
    args.flood
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        })
        .collect()
}

fn inputs(args: &InputArgs) -> InputPaths {
    let edges = match (&args.sci, &args.raw, &args.users) {
        (Some(path), _, _) => EdgeSource::Sci { path: path.clone() },
        (None, Some(raw), Some(users)) => EdgeSource::Raw {
            raw: raw.clone(),
            users: users.clone(),
        },
        _ => unreachable!("clap enforces --sci or --raw with --users"),
    };
    InputPaths {
        zones: args.flood.zones.clone(),
        flood: args.flood.flood.clone(),
        flood_labels: labels(&args.flood),
        edges,
    }
}

fn base_config(args: &InputArgs) -> PipelineConfig {
    PipelineConfig {
        crs: args.flood.crs,
        min_population: args.min_population,
        parallelism: mode(args.sequential),
        ..Default::default()
    }
}

fn analyze(args: AnalyzeArgs) -> Result<(), PipelineError> {
    let config = PipelineConfig {
        analysis: AnalysisConfig {
            include_self_loops: args.include_self_loops,
            min_edge_weight: args.min_edge_weight,
            top_k_per_node: args.top_k.map(|k| k as usize),
            skewness_variant: args.skewness,
            ..Default::default()
        },
        ttest_groups: args.ttest_groups,
        alpha: args.alpha,
        bins: args.bins,
        ..base_config(&args.input)
    };
    let outputs = run_pipeline(&inputs(&args.input), &config)?;
    emit_outputs(&outputs, &args.out)?;
    let mut out = io::stdout().lock();
    let _ = writeln!(
        out,
        "{} zones, {} edges; median fp_rate {}, median res_tie_rate {}; results in {}",
        outputs.metrics.len(),
        outputs.network.edges_kept,
        outputs.median_fp_rate,
        outputs.median_res_tie_rate,
        args.out.display()
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), PipelineError> {
    let params = SynthParams {
        grid_w: args.grid_w,
        grid_h: args.grid_h,
        income_range: (args.income_low, args.income_high),
        income_smoothness: args.income_smoothness,
        flood_income_corr: args.flood_income_corr,
        homophily_strength: args.homophily_strength,
        distance_decay: args.distance_decay,
        edges_per_zone: args.edges_per_zone,
        seed: args.seed,
    };
    let community = generate_community(&params)?;
    community.write(&args.out)?;
    let _ = writeln!(
        io::stdout().lock(),
        "{} zones, {} edges written to {}",
        community.zones.len(),
        community.edges.len(),
        args.out.display()
    );
    Ok(())
}

fn overlay(args: OverlayArgs) -> Result<(), PipelineError> {
    let exposures = overlay_only(
        &args.flood.zones,
        &args.flood.flood,
        &labels(&args.flood),
        args.flood.crs,
        mode(args.sequential),
    )?;
    match &args.out {
        Some(dir) => {
            let io_err = |path: &Path| {
                let path = path.to_path_buf();
                move |source| PipelineError::Io { path, source }
            };
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join("fp_rates.csv");
            let file = std::fs::File::create(&path).map_err(io_err(&path))?;
            write_fp_rates(&exposures, io::BufWriter::new(file)).map_err(io_err(&path))
        }
        None => {
            write_fp_rates(&exposures, io::stdout().lock()).map_err(|source| PipelineError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn check(args: InputArgs) -> Result<(), PipelineError> {
    let report = check_inputs(&inputs(&args), &base_config(&args))?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    let _ = writeln!(io::stdout().lock(), "{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Synth(a) => synth(a),
        Command::Overlay(a) => overlay(a),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
