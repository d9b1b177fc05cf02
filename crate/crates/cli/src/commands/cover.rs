//! `cover`: 1-NN robust accuracy on a margin distribution, instantiating
//! the box-covering sample-complexity bound. When `n` is 0 it defaults to
//! the bound's `37 * ceil(1/delta)^d`.

use crate::config::{param, runtime, usage, CliError, ParamKind, ParamSpec, RunConfig};
use crate::output::OutputDir;
use lipbench::cover::{required_samples, run_cover_experiment, CoverError, MarginDistribution};
use lipbench::experiments::{simple_csv, CsvValue};
use lipbench::numerics::RandomSource;
use serde_json::json;

pub const SPECS: &[ParamSpec] = &[
    param("d", ParamKind::Int, Some("2"), "data dimension"),
    param("delta", ParamKind::Float, Some("0.125"), "margin of the distribution"),
    param("cell", ParamKind::Float, Some("0.5"), "grid cell width of the labeling"),
    param("n", ParamKind::Int, Some("0"), "training points per trial (0 = the sample-complexity bound)"),
    param("trials", ParamKind::Int, Some("20"), "independent trials"),
    param("test", ParamKind::Int, Some("1000"), "test draws per trial"),
    param("seed", ParamKind::Int, Some("0"), "root seed"),
    param("out", ParamKind::Str, Some("lipbench_out/cover"), "output directory"),
];

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let d = cfg.get_usize("d")?;
    let delta = cfg.get_float("delta");
    let cell = cfg.get_float("cell");
    let trials = cfg.get_usize("trials")?;
    let test = cfg.get_usize("test")?;
    if trials == 0 || test == 0 {
        return Err(usage("trials and test must be >= 1"));
    }
    // resolve the sample count first so the bound is reported even when
    // the margin configuration itself turns out to be infeasible
    let n = match cfg.get_usize("n")? {
        0 => {
            let required = required_samples(delta, d).map_err(usage)?;
            usize::try_from(required)
                .map_err(|_| usage(format!("sample-complexity bound {required} exceeds usize")))?
        }
        explicit => explicit,
    };
    let dist = MarginDistribution::new(d, delta, cell)
        .map_err(|e| usage(format!("{e} (sample count would be {n})")))?;
    let out = OutputDir::create(cfg)?;
    let root = RandomSource::new(cfg.get_int("seed") as u64);
    let outcome = run_cover_experiment(&dist, n, trials, test, &root).map_err(|e| match e {
        CoverError::MarginTooWide { .. } | CoverError::AcceptanceTooLow(_) => usage(e),
        other => runtime(other),
    })?;

    let rows: Vec<Vec<CsvValue>> = outcome
        .rows
        .iter()
        .map(|r| {
            vec![
                CsvValue::Int(d as i64),
                CsvValue::Float(delta),
                CsvValue::Int(n as i64),
                CsvValue::Int(r.trial as i64),
                CsvValue::Float(r.robust_acc),
                CsvValue::Float(r.occupancy),
            ]
        })
        .collect();
    out.write(
        "rows.csv",
        simple_csv("d,delta,n,trial,robust_acc,occupancy", &rows).as_bytes(),
    )?;
    out.write_summary(
        cfg,
        json!({
            "d": d,
            "delta": delta,
            "cell_width": cell,
            "n": n,
            "margin_tested": delta / 2.0,
            "mean_robust_acc": outcome.mean_robust_acc,
            "coverage_bound": outcome.coverage_bound,
            "required_samples": required_samples(delta, d).map_err(usage)?,
        }),
    )?;
    println!(
        "cover: d={d} delta={delta} n={n} mean_robust_acc={:.4} (bound {:.4})",
        outcome.mean_robust_acc, outcome.coverage_bound
    );
    Ok(())
}
