//! `pca`: variance fractions of principal-component sets, with optional
//! projected-dataset emission in the cache format for downstream training.
//!
//! Component sets are written as 1-based ranges: `--ranges "1-16;513-3072"`
//! evaluates two sets, and commas union ranges within one set
//! (`"1-16,513-3072"` is a single union set).

use crate::config::{param, runtime, usage, CliError, ParamKind, ParamSpec, RunConfig};
use crate::data::load_named;
use crate::output::OutputDir;
use lipbench::experiments::{simple_csv, CsvValue};
use lipbench::pca::{build_pca_datasets, parse_component_ranges};
use serde_json::json;

pub const SPECS: &[ParamSpec] = &[
    param("data", ParamKind::Str, Some("cifar10"), "toy | mnist32 | cifar10 | cache:A,B"),
    param("data-root", ParamKind::Str, Some(""), "data directory (default $LIPBENCH_DATA)"),
    param("ranges", ParamKind::Str, Some("1-16"), "semicolon-separated component sets"),
    param("emit", ParamKind::Bool, Some("off"), "write projected datasets as cache files"),
    param("threads", ParamKind::Int, Some("0"), "worker cap for matrix products (0 = all CPUs)"),
    param("seed", ParamKind::Int, Some("0"), "unused; kept for config uniformity"),
    param("out", ParamKind::Str, Some("lipbench_out/pca"), "output directory"),
];

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let out = OutputDir::create(cfg)?;
    lipbench::numerics::set_matmul_workers(cfg.get_usize("threads")?);
    let data = load_named(cfg.get_str("data"), cfg.get_str("data-root"))?;
    let mut sets = Vec::new();
    let mut set_names = Vec::new();
    for part in cfg.get_str("ranges").split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        sets.push(parse_component_ranges(part).map_err(usage)?);
        set_names.push(part.to_string());
    }
    if sets.is_empty() {
        return Err(usage("--ranges must name at least one component set"));
    }

    let (model, pairs) = build_pca_datasets(&data.train, &data.test, &sets).map_err(runtime)?;

    let rows: Vec<Vec<CsvValue>> = pairs
        .iter()
        .zip(&set_names)
        .map(|(p, name)| {
            vec![
                CsvValue::Str(name.clone()),
                CsvValue::Int(p.index_set.len() as i64),
                CsvValue::Float(p.variance_fraction),
            ]
        })
        .collect();
    out.write("rows.csv", simple_csv("range,component_count,variance_fraction", &rows).as_bytes())?;

    if cfg.get_bool("emit") {
        for (p, name) in pairs.iter().zip(&set_names) {
            let tag = name.replace([',', ' '], "_");
            out.write(&format!("proj_{tag}_train.lbds"), &lipbench::datasets::write_cache(&p.train))?;
            out.write(&format!("proj_{tag}_test.lbds"), &lipbench::datasets::write_cache(&p.test))?;
        }
    }

    out.write_summary(
        cfg,
        json!({
            "dim": model.dim(),
            "total_variance": model.eigenvalues.iter().sum::<f64>(),
            "sets": pairs.iter().zip(&set_names).map(|(p, name)| json!({
                "range": name,
                "component_count": p.index_set.len(),
                "variance_fraction": p.variance_fraction,
            })).collect::<Vec<_>>(),
        }),
    )?;
    for (p, name) in pairs.iter().zip(&set_names) {
        println!(
            "pca: range {name} ({} components) variance_fraction={:.4}",
            p.index_set.len(),
            p.variance_fraction
        );
    }
    Ok(())
}
