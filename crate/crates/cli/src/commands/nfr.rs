//! `nfr`: averaged adversarial evaluation on the hypercube family.
//!
//! Runs the requested learner across fresh labelings and training draws,
//! and always reports the two exact reference points alongside it: the
//! last-feature learner's clean accuracy (1.0) and the oracle classifier's
//! adversarial accuracy (1.0).

use crate::config::{param, runtime, usage, CliError, ParamKind, ParamSpec, RunConfig};
use crate::output::OutputDir;
use lipbench::experiments::{simple_csv, CsvValue};
use lipbench::hypercube::{run_no_free_robustness, LearnerKind, NfrOutcome};
use lipbench::numerics::RandomSource;
use serde_json::json;

pub const SPECS: &[ParamSpec] = &[
    param("n", ParamKind::Int, Some("16"), "training set size per trial"),
    param("trials", ParamKind::Int, Some("200"), "independent (labeling, sample) trials"),
    param("test", ParamKind::Int, Some("1000"), "test draws per trial"),
    param("learner", ParamKind::Str, Some("memorizing"), "memorizing | sign | oracle"),
    param("seed", ParamKind::Int, Some("0"), "root seed"),
    param("out", ParamKind::Str, Some("lipbench_out/nfr"), "output directory"),
];

fn trial_csv(outcome: &NfrOutcome) -> String {
    let rows: Vec<Vec<CsvValue>> = outcome
        .rows
        .iter()
        .map(|r| {
            vec![
                CsvValue::Int(outcome.n as i64),
                CsvValue::Int(outcome.d as i64),
                CsvValue::Int(r.trial as i64),
                CsvValue::Float(r.clean_acc),
                CsvValue::Float(r.adv_acc),
            ]
        })
        .collect();
    simple_csv("n,d,trial,clean_acc,adv_acc", &rows)
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let n = cfg.get_usize("n")?;
    let trials = cfg.get_usize("trials")?;
    let test = cfg.get_usize("test")?;
    let learner = LearnerKind::parse(cfg.get_str("learner"))
        .ok_or_else(|| usage(format!("unknown learner {:?}", cfg.get_str("learner"))))?;
    if n == 0 || trials == 0 || test == 0 {
        return Err(usage("n, trials and test must be >= 1"));
    }
    let out = OutputDir::create(cfg)?;
    let root = RandomSource::new(cfg.get_int("seed") as u64);

    let main = run_no_free_robustness(n, trials, test, learner, &root).map_err(runtime)?;
    // exact reference points for the other two constructions, on fewer
    // trials: both are exact by construction, not statistical
    let ref_trials = trials.min(20).max(1);
    let sign_ref = run_no_free_robustness(n, ref_trials, test, LearnerKind::SignFeature, &root)
        .map_err(runtime)?;
    let oracle_ref = run_no_free_robustness(n, ref_trials, test, LearnerKind::Oracle, &root)
        .map_err(runtime)?;

    out.write("rows.csv", trial_csv(&main).as_bytes())?;
    out.write_summary(
        cfg,
        json!({
            "n": main.n,
            "d": main.d,
            "delta": main.delta,
            "learner": main.learner,
            "mean_adv_acc": main.mean_adv,
            "mean_clean_acc": main.mean_clean,
            "ci_half_width_95": main.ci_half_width,
            "analytic_ceiling": main.analytic_ceiling,
            "sign_learner_clean_acc": sign_ref.mean_clean,
            "oracle_adv_acc": oracle_ref.mean_adv,
        }),
    )?;
    println!(
        "nfr: n={} d={} learner={} mean_adv={:.4} (ci ±{:.4}, ceiling {:.4}) sign_clean={:.4} oracle_adv={:.4}",
        main.n,
        main.d,
        main.learner,
        main.mean_adv,
        main.ci_half_width,
        main.analytic_ceiling,
        sign_ref.mean_clean,
        oracle_ref.mean_adv,
    );
    Ok(())
}
