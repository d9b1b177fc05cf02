//! `scale`: the data-scaling harness (and compute scaling when an epoch
//! list is supplied). Writes the harness CSV, a summary with per-row wall
//! times, and an SVG of certified accuracy against training set size.

use super::model_params::{augment_config, loss_spec, model_config, MODEL_SPECS};
use crate::config::{param, runtime, usage, CliError, ParamKind, ParamSpec, RunConfig};
use crate::data::load_named;
use crate::output::OutputDir;
use lipbench::experiments::{
    records_to_csv, run_compute_scaling, run_scaling, svg_line_chart, ExperimentRecord,
    ScalingPlan,
};
use serde_json::json;

pub fn specs() -> Vec<ParamSpec> {
    let mut s = vec![
        param("data", ParamKind::Str, Some("toy"), "toy | mnist32 | cifar10 | cache:A,B"),
        param("data-root", ParamKind::Str, Some(""), "data directory (default $LIPBENCH_DATA)"),
        param("sizes", ParamKind::Str, Some("512,2048,8192"), "ascending subsample sizes"),
        param("seeds", ParamKind::Str, Some("0,1,2,3,4"), "one run per (size, seed)"),
        param("base-epochs", ParamKind::Int, Some("40"), "epochs at the largest size"),
        param("epoch-scaling", ParamKind::Bool, Some("on"), "subsample by k => epochs x k"),
        param("epoch-list", ParamKind::Str, Some(""), "fixed-n compute scaling epochs (empty = off)"),
        param("compute-n", ParamKind::Int, Some("0"), "subsample size for compute scaling"),
        param("seed", ParamKind::Int, Some("0"), "unused root (seeds come from --seeds)"),
        param("out", ParamKind::Str, Some("lipbench_out/scale"), "output directory"),
    ];
    s.extend_from_slice(MODEL_SPECS);
    s
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let out = OutputDir::create(cfg)?;
    let data = load_named(cfg.get_str("data"), cfg.get_str("data-root"))?;
    let plan = ScalingPlan {
        experiment: cfg.get_str("data").to_string(),
        sizes: cfg.get_int_list("sizes")?,
        base_epochs: cfg.get_usize("base-epochs")?,
        epoch_scaling: cfg.get_bool("epoch-scaling"),
        model: model_config(cfg)?,
        loss: loss_spec(cfg)?,
        epsilon: cfg.get_float("epsilon"),
        seeds: cfg.get_u64_list("seeds")?,
        batch_size: cfg.get_usize("batch")?,
        peak_lr: cfg.get_float("peak-lr"),
        augment: augment_config(cfg)?,
        threads: cfg.get_usize("threads")?.max(1),
    };

    let epoch_list_raw = cfg.get_str("epoch-list");
    let records: Vec<ExperimentRecord> = if epoch_list_raw.is_empty() {
        run_scaling(&plan, &data.train, &data.test).map_err(|e| {
            if matches!(e, lipbench::experiments::ExperimentError::BadPlan(_)) {
                usage(e)
            } else {
                runtime(e)
            }
        })?
    } else {
        let epochs: Vec<usize> = epoch_list_raw
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| usage(format!("bad epoch {t:?}"))))
            .collect::<Result<_, _>>()?;
        let n = cfg.get_usize("compute-n")?;
        if n == 0 {
            return Err(usage("--compute-n is required with --epoch-list"));
        }
        run_compute_scaling(&plan, &epochs, n, &data.train, &data.test).map_err(runtime)?
    };

    out.write("rows.csv", records_to_csv(&records, true).as_bytes())?;

    // mean test CRA per size for the chart
    let mut by_n: Vec<(usize, f64, usize)> = Vec::new();
    for r in &records {
        match by_n.iter_mut().find(|(n, _, _)| *n == r.n) {
            Some((_, sum, count)) => {
                *sum += r.cra;
                *count += 1;
            }
            None => by_n.push((r.n, r.cra, 1)),
        }
    }
    let chart_points: Vec<(f64, f64)> =
        by_n.iter().map(|(n, sum, c)| (*n as f64, sum / *c as f64)).collect();
    out.write(
        "plot.svg",
        svg_line_chart("certified robust accuracy vs training size", &chart_points, "test CRA")
            .as_bytes(),
    )?;

    let diverged: Vec<_> =
        records.iter().filter(|r| r.diverged).map(|r| json!({"n": r.n, "seed": r.seed})).collect();
    out.write_summary(
        cfg,
        json!({
            "rows": records.iter().map(|r| json!({
                "experiment": r.experiment,
                "n": r.n,
                "seed": r.seed,
                "clean_acc": r.clean_acc,
                "cra": r.cra,
                "train_acc": r.train_acc,
                "train_cra": r.train_cra,
                "wall_seconds": r.wall_seconds,
                "diverged": r.diverged,
            })).collect::<Vec<_>>(),
            "mean_cra_by_n": chart_points.iter().map(|(n, c)| json!({"n": n, "mean_cra": c})).collect::<Vec<_>>(),
            "diverged_runs": diverged,
        }),
    )?;
    for (n, cra) in &chart_points {
        println!("scale: n={n:>8} mean_test_cra={cra:.4}");
    }
    Ok(())
}
