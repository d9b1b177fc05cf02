//! The three training losses.
//!
//! All of them are cross-entropy on transformed logits:
//!
//! - temperature CE:   `CE(softmax(s / T), y)`
//! - offset CE:        `CE(softmax((s - o * onehot(y)) / T), y)`
//! - self-normalizing: `CE(softmax(s / (std(s) + t) - onehot(y)), y)`
//!
//! where `std` is the population standard deviation over the K scores. The
//! offset forces a score margin before the loss saturates; the trade-off
//! parameter `t` interpolates between accuracy-seeking (`t = 0`, scores are
//! renormalized freely) and margin-seeking behavior.

use super::LipnetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    TemperatureCe,
    OffsetCe,
    SelfNormCe,
}

#[derive(Debug, Clone, Copy)]
pub struct LossSpec {
    pub kind: LossKind,
    pub offset: f64,
    pub temperature: f64,
    pub tradeoff: f64,
}

/// Floor for the self-normalizing denominator when both `std(s)` and `t`
/// vanish.
const STD_FLOOR: f64 = 1e-12;

impl LossSpec {
    pub fn temperature_ce(temperature: f64) -> Result<Self, LipnetError> {
        if temperature <= 0.0 {
            return Err(LipnetError::BadLoss(format!("temperature {temperature} must be > 0")));
        }
        Ok(Self { kind: LossKind::TemperatureCe, offset: 0.0, temperature, tradeoff: 0.0 })
    }

    pub fn offset_ce(offset: f64, temperature: f64) -> Result<Self, LipnetError> {
        if temperature <= 0.0 {
            return Err(LipnetError::BadLoss(format!("temperature {temperature} must be > 0")));
        }
        Ok(Self { kind: LossKind::OffsetCe, offset, temperature, tradeoff: 0.0 })
    }

    pub fn self_norm_ce(tradeoff: f64) -> Result<Self, LipnetError> {
        if tradeoff < 0.0 {
            return Err(LipnetError::BadLoss(format!("tradeoff {tradeoff} must be >= 0")));
        }
        Ok(Self { kind: LossKind::SelfNormCe, offset: 0.0, temperature: 1.0, tradeoff })
    }
}

fn softmax_ce(logits: &[f64], y: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[y];
    let mut grad: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    grad[y] -= 1.0;
    (loss, grad)
}

fn population_std(s: &[f64]) -> (f64, f64) {
    let k = s.len() as f64;
    let mean = s.iter().sum::<f64>() / k;
    let var = s.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / k;
    (var.sqrt(), mean)
}

/// Loss value for one score vector.
pub fn loss_value(spec: &LossSpec, s: &[f64], y: usize) -> Result<f64, LipnetError> {
    loss_and_grad(spec, s, y).map(|(v, _)| v)
}

/// Loss value together with the exact gradient with respect to the scores.
pub fn loss_and_grad(spec: &LossSpec, s: &[f64], y: usize) -> Result<(f64, Vec<f64>), LipnetError> {
    if y >= s.len() {
        return Err(LipnetError::BadLoss(format!("label {y} out of range for {} scores", s.len())));
    }
    match spec.kind {
        LossKind::TemperatureCe => {
            let logits: Vec<f64> = s.iter().map(|&v| v / spec.temperature).collect();
            let (loss, g_logits) = softmax_ce(&logits, y);
            let grad = g_logits.iter().map(|&g| g / spec.temperature).collect();
            Ok((loss, grad))
        }
        LossKind::OffsetCe => {
            let logits: Vec<f64> = s
                .iter()
                .enumerate()
                .map(|(i, &v)| (v - if i == y { spec.offset } else { 0.0 }) / spec.temperature)
                .collect();
            let (loss, g_logits) = softmax_ce(&logits, y);
            let grad = g_logits.iter().map(|&g| g / spec.temperature).collect();
            Ok((loss, grad))
        }
        LossKind::SelfNormCe => {
            let (std, mean) = population_std(s);
            let denom = (std + spec.tradeoff).max(STD_FLOOR);
            let logits: Vec<f64> = s
                .iter()
                .enumerate()
                .map(|(i, &v)| v / denom - if i == y { 1.0 } else { 0.0 })
                .collect();
            let (loss, g_logits) = softmax_ce(&logits, y);
            // d logits_i / d s_j = delta_ij / denom - s_i (s_j - mean) / (K std denom^2)
            let k = s.len() as f64;
            let dot_gs: f64 = g_logits.iter().zip(s).map(|(&g, &v)| g * v).sum();
            let grad = s
                .iter()
                .zip(&g_logits)
                .map(|(&sj, &gj)| {
                    let mut g = gj / denom;
                    if std > STD_FLOOR {
                        g -= dot_gs * (sj - mean) / (k * std * denom * denom);
                    }
                    g
                })
                .collect();
            Ok((loss, grad))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_scores_give_ln2() {
        for spec in [
            LossSpec::temperature_ce(0.125).unwrap(),
            LossSpec::temperature_ce(4.0).unwrap(),
        ] {
            let l = loss_value(&spec, &[0.0, 0.0], 0).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-14);
        }
    }

    #[test]
    fn offset_cancels_margin() {
        // s = (o, 0), y = 0: logits become (0, 0) after the offset, CE = ln 2
        for (o, t) in [(0.25, 0.25), (std::f64::consts::SQRT_2, 0.5)] {
            let spec = LossSpec::offset_ce(o, t).unwrap();
            let l = loss_value(&spec, &[o, 0.0], 0).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-12, "o={o} t={t}: {l}");
        }
    }

    #[test]
    fn self_norm_hand_value() {
        // s = (1, -1), y = 0, t = 0: std = 1, logits (0, -1), CE = ln(1 + e^-1)
        let spec = LossSpec::self_norm_ce(0.0).unwrap();
        let l = loss_value(&spec, &[1.0, -1.0], 0).unwrap();
        let expect = (1.0 + (-1.0f64).exp()).ln();
        assert!((l - expect).abs() < 1e-14, "{l} vs {expect}");
        assert!((expect - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn self_norm_constant_scores_use_floor() {
        let spec = LossSpec::self_norm_ce(0.0).unwrap();
        let l = loss_value(&spec, &[0.5, 0.5, 0.5], 1).unwrap();
        assert!(l.is_finite());
        assert!(l >= 0.0);
    }

    #[test]
    fn losses_nonnegative_and_finite() {
        let specs = [
            LossSpec::temperature_ce(0.25).unwrap(),
            LossSpec::offset_ce(0.25, 0.25).unwrap(),
            LossSpec::self_norm_ce(0.1).unwrap(),
        ];
        let cases: &[&[f64]] = &[&[3.0, -1.0, 0.5], &[-4.0, -4.0, -4.0], &[100.0, -100.0, 0.0]];
        for spec in &specs {
            for s in cases {
                for y in 0..s.len() {
                    let l = loss_value(spec, s, y).unwrap();
                    assert!(l.is_finite() && l >= -1e-12, "{spec:?} {s:?} {y}: {l}");
                }
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(LossSpec::temperature_ce(0.0).is_err());
        assert!(LossSpec::offset_ce(0.1, -1.0).is_err());
        assert!(LossSpec::self_norm_ce(-0.1).is_err());
    }

    fn fd_grad(spec: &LossSpec, s: &[f64], y: usize) -> Vec<f64> {
        let h = 1e-6;
        (0..s.len())
            .map(|j| {
                let mut plus = s.to_vec();
                plus[j] += h;
                let mut minus = s.to_vec();
                minus[j] -= h;
                (loss_value(spec, &plus, y).unwrap() - loss_value(spec, &minus, y).unwrap())
                    / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let specs = [
            LossSpec::temperature_ce(0.25).unwrap(),
            LossSpec::offset_ce(0.25, 0.25).unwrap(),
            LossSpec::self_norm_ce(0.1).unwrap(),
            LossSpec::self_norm_ce(0.0).unwrap(),
        ];
        let s = [0.7, -0.3, 1.2, 0.05];
        for spec in &specs {
            for y in 0..s.len() {
                let (_, grad) = loss_and_grad(spec, &s, y).unwrap();
                let fd = fd_grad(spec, &s, y);
                for (a, f) in grad.iter().zip(&fd) {
                    assert!(
                        (a - f).abs() <= 1e-6 * (1.0 + a.abs().max(f.abs())),
                        "{spec:?} y={y}: {a} vs {f}"
                    );
                }
            }
        }
    }
}
