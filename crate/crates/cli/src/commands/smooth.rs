//! `smooth`: randomized-smoothing estimation. Trains a base classifier with
//! Gaussian input noise (a Lipschitz MLP or a 1-NN model), then reports
//! smoothed predictions and plug-in certified radii over test samples.

use super::model_params::{augment_config, loss_spec, model_config, MODEL_SPECS};
use crate::config::{param, runtime, usage, CliError, ParamKind, ParamSpec, RunConfig};
use crate::data::load_named;
use crate::output::OutputDir;
use lipbench::cover::{nn_predict, Metric, OneNNModel};
use lipbench::datasets::subsample;
use lipbench::experiments::{simple_csv, CsvValue};
use lipbench::lipnet::{build_mlp, train, CompiledNet, TrainConfig};
use lipbench::numerics::RandomSource;
use lipbench::smoothing::{smooth_dataset, SmoothingConfig};
use lipbench::Classifier;
use serde_json::json;

pub fn specs() -> Vec<ParamSpec> {
    let mut s = vec![
        param("data", ParamKind::Str, Some("toy"), "toy | mnist32 | cifar10 | cache:A,B"),
        param("data-root", ParamKind::Str, Some(""), "data directory (default $LIPBENCH_DATA)"),
        param("base", ParamKind::Str, Some("net"), "net | 1nn"),
        param("n", ParamKind::Int, Some("2048"), "training subsample size (0 = all)"),
        param("eval-n", ParamKind::Int, Some("200"), "test samples to smooth"),
        param("sigma", ParamKind::Float, Some("0.125"), "smoothing noise std"),
        param("samples", ParamKind::Int, Some("1000"), "noise draws per sample"),
        param("epochs", ParamKind::Int, Some("20"), "base training epochs"),
        param("seed", ParamKind::Int, Some("0"), "root seed"),
        param("out", ParamKind::Str, Some("lipbench_out/smooth"), "output directory"),
    ];
    s.extend_from_slice(MODEL_SPECS);
    s
}

struct NetClassifier {
    net: CompiledNet,
    classes: usize,
}

impl Classifier for NetClassifier {
    fn class_count(&self) -> usize {
        self.classes
    }
    fn classify(&self, x: &[f64]) -> usize {
        let scores = self.net.forward(x).expect("dimension fixed by dataset");
        lipbench::lipnet::argmax_lowest(&scores)
    }
}

struct NnClassifier {
    model: OneNNModel,
    classes: usize,
}

impl Classifier for NnClassifier {
    fn class_count(&self) -> usize {
        self.classes
    }
    fn classify(&self, x: &[f64]) -> usize {
        nn_predict(&self.model, x)
    }
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let out = OutputDir::create(cfg)?;
    let data = load_named(cfg.get_str("data"), cfg.get_str("data-root"))?;
    let seed = cfg.get_int("seed") as u64;
    let sigma = cfg.get_float("sigma");
    let n = cfg.get_usize("n")?;
    let train_ds = if n == 0 || n >= data.train.len() {
        data.train.clone()
    } else {
        subsample(&data.train, n, seed).map_err(usage)?
    };
    let eval_n = cfg.get_usize("eval-n")?.min(data.test.len());
    if eval_n == 0 {
        return Err(usage("eval-n must be >= 1"));
    }
    let eval = subsample(&data.test, eval_n, seed ^ 0x7357).map_err(usage)?;

    let base: Box<dyn Classifier> = match cfg.get_str("base") {
        "1nn" => Box::new(NnClassifier {
            model: OneNNModel::fit(&train_ds, Metric::L2).map_err(usage)?,
            classes: train_ds.class_count,
        }),
        "net" => {
            let model = model_config(cfg)?;
            let mut init_rng = RandomSource::new(seed).split("init");
            let mut net = build_mlp(train_ds.dim(), train_ds.class_count, &model, &mut init_rng)
                .map_err(usage)?;
            let train_cfg = TrainConfig {
                peak_lr: cfg.get_float("peak-lr"),
                epochs: cfg.get_usize("epochs")?,
                batch_size: cfg.get_usize("batch")?,
                momentum: 0.9,
                loss: loss_spec(cfg)?,
                augment: augment_config(cfg)?,
                // gaussian noise during training matches the smoothing noise
                noise_sigma: Some(sigma),
                epsilon: cfg.get_float("epsilon"),
                seed: RandomSource::new(seed).split("train").seed(),
                threads: cfg.get_usize("threads")?.max(1),
            };
            train(&mut net, &train_ds, &train_cfg).map_err(runtime)?;
            Box::new(NetClassifier { net: net.compile(), classes: train_ds.class_count })
        }
        other => return Err(usage(format!("unknown base classifier {other:?}"))),
    };

    let smoothing = SmoothingConfig {
        sigma,
        samples: cfg.get_int("samples") as u64,
        seed: RandomSource::new(seed).split("smoothing").seed(),
    };
    smoothing.validate().map_err(usage)?;
    let rows = smooth_dataset(base.as_ref(), &eval.features, &eval.labels, &smoothing)
        .map_err(runtime)?;

    let csv_rows: Vec<Vec<CsvValue>> = rows
        .iter()
        .map(|r| {
            vec![
                CsvValue::Int(r.sample_id as i64),
                CsvValue::Int(r.top_class as i64),
                CsvValue::Int(i64::from(r.correct)),
                CsvValue::Float(r.radius),
            ]
        })
        .collect();
    out.write("rows.csv", simple_csv("sample_id,top_class,correct,radius", &csv_rows).as_bytes())?;

    let accuracy = rows.iter().filter(|r| r.correct).count() as f64 / rows.len() as f64;
    let mean_radius = rows.iter().map(|r| r.radius).sum::<f64>() / rows.len() as f64;
    let cert_at = |eps: f64| {
        rows.iter().filter(|r| r.correct && r.radius >= eps).count() as f64 / rows.len() as f64
    };
    out.write_summary(
        cfg,
        json!({
            "sigma": smoothing.sigma,
            "samples": smoothing.samples,
            "evaluated": rows.len(),
            "smoothed_accuracy": accuracy,
            "mean_radius": mean_radius,
            "certified_at_36_255": cert_at(36.0 / 255.0),
        }),
    )?;
    println!(
        "smooth: sigma={} samples={} acc={:.4} mean_radius={:.4} cert@36/255={:.4}",
        smoothing.sigma,
        smoothing.samples,
        accuracy,
        mean_radius,
        cert_at(36.0 / 255.0)
    );
    Ok(())
}
