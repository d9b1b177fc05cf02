//! `train`: one training run with per-epoch history, final evaluation, and
//! an optional checkpoint and peak-learning-rate grid search.

use super::model_params::{augment_config, loss_spec, model_config, noise_sigma, MODEL_SPECS};
use crate::config::{param, runtime, usage, CliError, ParamKind, ParamSpec, RunConfig};
use crate::data::load_named;
use crate::output::OutputDir;
use lipbench::datasets::subsample;
use lipbench::experiments::{records_to_csv, ExperimentRecord};
use lipbench::lipnet::{
    build_mlp, default_lr_grid, evaluate, save_checkpoint, train, tune_peak_lr, LipnetError,
    TrainConfig,
};
use lipbench::numerics::RandomSource;
use serde_json::json;
use std::time::Instant;

pub fn specs() -> Vec<ParamSpec> {
    let mut s = vec![
        param("data", ParamKind::Str, Some("toy"), "toy | mnist | mnist32 | cifar10 | cache:A,B"),
        param("data-root", ParamKind::Str, Some(""), "data directory (default $LIPBENCH_DATA)"),
        param("n", ParamKind::Int, Some("0"), "training subsample size (0 = all)"),
        param("epochs", ParamKind::Int, Some("40"), "training epochs"),
        param("seed", ParamKind::Int, Some("0"), "root seed"),
        param("tune-lr", ParamKind::Bool, Some("off"), "grid-search the peak learning rate"),
        param("save-model", ParamKind::Bool, Some("off"), "write model.lnet checkpoint"),
        param("out", ParamKind::Str, Some("lipbench_out/train"), "output directory"),
    ];
    s.extend_from_slice(MODEL_SPECS);
    s
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let out = OutputDir::create(cfg)?;
    let data = load_named(cfg.get_str("data"), cfg.get_str("data-root"))?;
    let seed = cfg.get_int("seed") as u64;
    let n = cfg.get_usize("n")?;
    let train_ds = if n == 0 || n == data.train.len() {
        data.train.clone()
    } else {
        subsample(&data.train, n, seed).map_err(usage)?
    };

    let model = model_config(cfg)?;
    let loss = loss_spec(cfg)?;
    let augment = augment_config(cfg)?;
    let mut train_cfg = TrainConfig {
        peak_lr: cfg.get_float("peak-lr"),
        epochs: cfg.get_usize("epochs")?,
        batch_size: cfg.get_usize("batch")?,
        momentum: 0.9,
        loss,
        augment,
        noise_sigma: noise_sigma(cfg),
        epsilon: cfg.get_float("epsilon"),
        seed: RandomSource::new(seed).split("train").seed(),
        threads: cfg.get_usize("threads")?.max(1),
    };

    let build = || {
        let mut init_rng = RandomSource::new(seed).split("init");
        build_mlp(train_ds.dim(), train_ds.class_count, &model, &mut init_rng)
            .expect("validated model config")
    };

    let mut lr_grid_results = json!(null);
    if cfg.get_bool("tune-lr") {
        // hold out 10% of the training subsample for validation
        let val_size = (train_ds.len() / 10).max(1);
        let holdout = subsample(&train_ds, train_ds.len(), seed ^ 0x5A5A).map_err(usage)?;
        let val = lipbench::datasets::select(&holdout, &(0..val_size).collect::<Vec<_>>());
        let fit = lipbench::datasets::select(
            &holdout,
            &(val_size..holdout.len()).collect::<Vec<_>>(),
        );
        let short_cfg = TrainConfig { epochs: train_cfg.epochs.min(10), ..train_cfg.clone() };
        let (best, points) =
            tune_peak_lr(&build, &fit, &val, &short_cfg, &default_lr_grid()).map_err(runtime)?;
        train_cfg.peak_lr = best;
        lr_grid_results = json!(points
            .iter()
            .map(|p| json!({"peak_lr": p.peak_lr, "val_cra": p.val_cra, "val_acc": p.val_accuracy}))
            .collect::<Vec<_>>());
    }

    let start = Instant::now();
    let mut net = build();
    let result = match train(&mut net, &train_ds, &train_cfg) {
        Ok(r) => r,
        Err(LipnetError::Diverged { epoch, step }) => {
            out.write_summary(
                cfg,
                json!({"diverged": true, "epoch": epoch, "step": step}),
            )?;
            return Err(runtime(format!("training diverged at epoch {epoch}, step {step}")));
        }
        Err(e) => return Err(runtime(e)),
    };
    let wall = start.elapsed().as_secs_f64();

    let compiled = net.compile();
    let test_stats = evaluate(&compiled, &data.test, train_cfg.epsilon).map_err(runtime)?;
    let train_stats = evaluate(&compiled, &train_ds, train_cfg.epsilon).map_err(runtime)?;

    // per-epoch history rows in the harness schema (train-side metrics),
    // then a final row carrying the held-out evaluation
    let mut records: Vec<ExperimentRecord> = result
        .history
        .iter()
        .map(|h| ExperimentRecord {
            experiment: format!("epoch{:04}", h.epoch),
            n: train_ds.len(),
            seed,
            clean_acc: 0.0,
            cra: 0.0,
            train_acc: h.accuracy,
            train_cra: h.cra,
            wall_seconds: 0.0,
            diverged: false,
        })
        .collect();
    records.push(ExperimentRecord {
        experiment: "final".into(),
        n: train_ds.len(),
        seed,
        clean_acc: test_stats.accuracy,
        cra: test_stats.cra,
        train_acc: train_stats.accuracy,
        train_cra: train_stats.cra,
        wall_seconds: wall,
        diverged: false,
    });
    out.write("rows.csv", records_to_csv(&records, true).as_bytes())?;

    if cfg.get_bool("save-model") {
        out.write("model.lnet", &save_checkpoint(&net))?;
    }

    out.write_summary(
        cfg,
        json!({
            "n_train": train_ds.len(),
            "epochs": train_cfg.epochs,
            "peak_lr": train_cfg.peak_lr,
            "lr_grid": lr_grid_results,
            "test_accuracy": test_stats.accuracy,
            "test_cra": test_stats.cra,
            "train_accuracy": train_stats.accuracy,
            "train_cra": train_stats.cra,
            "epsilon": train_cfg.epsilon,
            "wall_seconds": wall,
            "total_steps": result.total_steps,
            "channel_means": data.channel_means,
            "history_loss": result.history.iter().map(|h| h.loss).collect::<Vec<_>>(),
        }),
    )?;
    println!(
        "train: n={} acc={:.4} cra={:.4} (train acc={:.4} cra={:.4}) in {:.1}s",
        train_ds.len(),
        test_stats.accuracy,
        test_stats.cra,
        train_stats.accuracy,
        train_stats.cra,
        wall
    );
    Ok(())
}
