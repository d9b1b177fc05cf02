//! Model/loss/augmentation keys shared by the training-based commands.

use crate::config::{param, usage, CliError, ParamKind, ParamSpec, RunConfig};
use lipbench::datasets::AugmentConfig;
use lipbench::lipnet::{InitKind, LayerKind, LossSpec, MlpConfig};

pub const MODEL_SPECS: &[ParamSpec] = &[
    param("width", ParamKind::Int, Some("256"), "hidden width"),
    param("depth", ParamKind::Int, Some("8"), "dense layer count"),
    param("layer", ParamKind::Str, Some("aol"), "aol | cpl | standard"),
    param("init", ParamKind::Str, Some("identity"), "identity | orthogonal | uniform"),
    param("loss", ParamKind::Str, Some("offset-ce"), "offset-ce | temp-ce | selfnorm-ce"),
    param("offset", ParamKind::Float, Some("0.25"), "offset of offset-ce"),
    param("temperature", ParamKind::Float, Some("0.25"), "softmax temperature"),
    param("tradeoff", ParamKind::Float, Some("0.1"), "t of selfnorm-ce"),
    param("batch", ParamKind::Int, Some("256"), "batch size"),
    param("peak-lr", ParamKind::Float, Some("0.05"), "one-cycle peak learning rate"),
    param("epsilon", ParamKind::Float, Some("0.1411764705882353"), "certification radius (36/255)"),
    param("augment", ParamKind::Str, Some("none"), "none | crop | crop-flip | full"),
    param("noise-sigma", ParamKind::Float, Some("0"), "gaussian train noise (0 = off)"),
    param("threads", ParamKind::Int, Some("2"), "worker cap for batch gradients"),
];

pub fn model_config(cfg: &RunConfig) -> Result<MlpConfig, CliError> {
    let layer_kind = match cfg.get_str("layer") {
        "aol" => LayerKind::Aol,
        "cpl" => LayerKind::Cpl,
        "standard" => LayerKind::Standard,
        other => return Err(usage(format!("unknown layer kind {other:?}"))),
    };
    let init = match cfg.get_str("init") {
        "identity" => InitKind::Identity,
        "orthogonal" => InitKind::Orthogonal,
        "uniform" => InitKind::ScaledUniform,
        other => return Err(usage(format!("unknown init {other:?}"))),
    };
    let width = cfg.get_usize("width")?;
    let depth = cfg.get_usize("depth")?;
    if width == 0 || width % 2 != 0 {
        return Err(usage(format!("width must be even and positive, got {width}")));
    }
    if depth < 2 {
        return Err(usage("depth must be at least 2"));
    }
    Ok(MlpConfig { layer_kind, width, depth, init })
}

pub fn loss_spec(cfg: &RunConfig) -> Result<LossSpec, CliError> {
    match cfg.get_str("loss") {
        "offset-ce" => LossSpec::offset_ce(cfg.get_float("offset"), cfg.get_float("temperature")),
        "temp-ce" => LossSpec::temperature_ce(cfg.get_float("temperature")),
        "selfnorm-ce" => LossSpec::self_norm_ce(cfg.get_float("tradeoff")),
        other => return Err(usage(format!("unknown loss {other:?}"))),
    }
    .map_err(usage)
}

pub fn augment_config(cfg: &RunConfig) -> Result<AugmentConfig, CliError> {
    Ok(match cfg.get_str("augment") {
        "none" => AugmentConfig::none(),
        "crop" => AugmentConfig::crop_only(),
        "crop-flip" => AugmentConfig {
            crop_padding: 4,
            horizontal_flip: true,
            random_erase: None,
        },
        "full" => AugmentConfig {
            crop_padding: 4,
            horizontal_flip: true,
            random_erase: Some((4, 8)),
        },
        other => return Err(usage(format!("unknown augment preset {other:?}"))),
    })
}

pub fn noise_sigma(cfg: &RunConfig) -> Option<f64> {
    let sigma = cfg.get_float("noise-sigma");
    (sigma > 0.0).then_some(sigma)
}
