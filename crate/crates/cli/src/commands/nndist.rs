//! `nndist`: median nearest-neighbor distance against training set size,
//! with the intrinsic-dimension estimate from the log-log slope.

use crate::config::{param, runtime, usage, CliError, ParamKind, ParamSpec, RunConfig};
use crate::data::load_named;
use crate::output::OutputDir;
use lipbench::datasets::subsample;
use lipbench::experiments::{
    estimate_intrinsic_dim, nn_distance_profile, simple_csv, svg_line_chart, CsvValue,
    ExperimentError, ProfileMetric,
};
use serde_json::json;

pub const SPECS: &[ParamSpec] = &[
    param("data", ParamKind::Str, Some("toy"), "toy | mnist | mnist32 | cifar10 | cache:A,B"),
    param("data-root", ParamKind::Str, Some(""), "data directory (default $LIPBENCH_DATA)"),
    param("sizes", ParamKind::Str, Some("256,512,1024,2048,4096"), "training prefix sizes"),
    param("test-n", ParamKind::Int, Some("500"), "test points measured"),
    param("metric", ParamKind::Str, Some("l2"), "l2 | linf | angular"),
    param("seed", ParamKind::Int, Some("0"), "root seed"),
    param("out", ParamKind::Str, Some("lipbench_out/nndist"), "output directory"),
];

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let out = OutputDir::create(cfg)?;
    let data = load_named(cfg.get_str("data"), cfg.get_str("data-root"))?;
    let sizes = cfg.get_int_list("sizes")?;
    let metric = ProfileMetric::parse(cfg.get_str("metric"))
        .ok_or_else(|| usage(format!("unknown metric {:?}", cfg.get_str("metric"))))?;
    let seed = cfg.get_int("seed") as u64;
    let test_n = cfg.get_usize("test-n")?.min(data.test.len());
    if test_n == 0 {
        return Err(usage("test-n must be >= 1"));
    }
    let test = subsample(&data.test, test_n, seed ^ 0x1357).map_err(usage)?;

    let profile = nn_distance_profile(&data.train, &test, &sizes, metric, seed)
        .map_err(|e| match e {
            ExperimentError::BadPlan(_) => usage(e),
            other => runtime(other),
        })?;

    let rows: Vec<Vec<CsvValue>> = profile
        .iter()
        .map(|p| vec![CsvValue::Int(p.n as i64), CsvValue::Float(p.median_distance)])
        .collect();
    out.write("rows.csv", simple_csv("n,median_distance", &rows).as_bytes())?;

    let points: Vec<(f64, f64)> =
        profile.iter().map(|p| (p.n as f64, p.median_distance)).collect();
    out.write(
        "plot.svg",
        svg_line_chart("median 1-NN distance vs training size", &points, "median distance")
            .as_bytes(),
    )?;

    let intrinsic = estimate_intrinsic_dim(&profile);
    out.write_summary(
        cfg,
        json!({
            "metric": cfg.get_str("metric"),
            "test_points": test_n,
            "profile": profile.iter().map(|p| json!({
                "n": p.n, "median_distance": p.median_distance
            })).collect::<Vec<_>>(),
            "intrinsic_dimension": match &intrinsic {
                Ok(d) => json!(d),
                Err(e) => json!({"error": e.to_string()}),
            },
        }),
    )?;
    for p in &profile {
        println!("nndist: n={:>8} median={:.6}", p.n, p.median_distance);
    }
    match intrinsic {
        Ok(d) => println!("nndist: intrinsic dimension d* = {d:.2}"),
        Err(e) => println!("nndist: intrinsic dimension unavailable: {e}"),
    }
    Ok(())
}
