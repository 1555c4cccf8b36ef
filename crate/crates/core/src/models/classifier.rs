//! Bona fide / synthetic classifier: a residual convolutional backbone with
//! squeeze-excitation channel gating, global average pooling into an
//! embedding, and a 2-way output layer trained with an annealed angular
//! margin.

use crate::error::{Error, Result};
use crate::models::params::{Bound, ParamSet};
use crate::tensor::{init, Graph, Tensor, TensorId};

/// One backbone stage: `blocks` residual blocks at `channels` width, the
/// first entered with `stride` along both axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageSpec {
    pub channels: usize,
    pub stride: usize,
    pub blocks: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassifierConfig {
    pub stages: Vec<StageSpec>,
    pub embed: usize,
    /// Squeeze-excitation bottleneck divisor.
    pub se_reduction: usize,
}

impl ClassifierConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let stage = |channels, stride, blocks| StageSpec { channels, stride, blocks };
        let stages = match name {
            "micro" => vec![stage(16, 1, 1)],
            "tiny" => vec![stage(16, 1, 1), stage(32, 2, 1)],
            "default" => vec![stage(16, 1, 1), stage(32, 2, 1), stage(64, 2, 1)],
            "deep" => {
                vec![stage(16, 1, 3), stage(32, 2, 4), stage(64, 2, 6), stage(128, 2, 3)]
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown classifier preset {other:?} (micro, tiny, default, deep)"
                )))
            }
        };
        Ok(ClassifierConfig { stages, embed: 128, se_reduction: 4 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidArgument("classifier needs at least one stage".into()));
        }
        if self.embed == 0 || self.se_reduction == 0 {
            return Err(Error::InvalidArgument(
                "embedding width and reduction must be positive".into(),
            ));
        }
        for s in &self.stages {
            if s.channels == 0 || s.stride == 0 || s.blocks == 0 {
                return Err(Error::InvalidArgument(format!("degenerate stage {s:?}")));
            }
        }
        Ok(())
    }

    /// Channel width the incoming feature map must have (the stem and the
    /// fusion block are both sized to produce it).
    pub fn entry_channels(&self) -> usize {
        self.stages[0].channels
    }
}

#[derive(Clone, Debug)]
pub struct Classifier {
    ns: String,
    cfg: ClassifierConfig,
}

impl Classifier {
    pub fn new(ns: impl Into<String>, cfg: ClassifierConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Classifier { ns: ns.into(), cfg })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.cfg
    }

    fn name(&self, suffix: &str) -> String {
        format!("{}.{suffix}", self.ns)
    }

    fn conv_init(master: u64, name: &str, co: usize, ci: usize, k: usize) -> Tensor {
        init::kaiming_uniform(&mut init::substream(master, name, 0), vec![co, ci, k, k], ci * k * k)
    }

    pub fn register(&self, ps: &mut ParamSet, master_seed: u64) -> Result<()> {
        let mut cin = self.cfg.stages[0].channels;
        for (si, stage) in self.cfg.stages.iter().enumerate() {
            for bi in 0..stage.blocks {
                let cout = stage.channels;
                let stride = if bi == 0 { stage.stride } else { 1 };
                let p = |part: &str| self.name(&format!("s{si}.b{bi}.{part}"));
                let w1 = p("conv1.w");
                ps.insert(w1.clone(), Self::conv_init(master_seed, &w1, cout, cin, 3))?;
                ps.insert(p("conv1.b"), Tensor::zeros(vec![cout]))?;
                let w2 = p("conv2.w");
                ps.insert(w2.clone(), Self::conv_init(master_seed, &w2, cout, cout, 3))?;
                ps.insert(p("conv2.b"), Tensor::zeros(vec![cout]))?;
                let red = (cout / self.cfg.se_reduction).max(1);
                let f1 = p("se.fc1.w");
                ps.insert(
                    f1.clone(),
                    init::kaiming_uniform(
                        &mut init::substream(master_seed, &f1, 0),
                        vec![cout, red],
                        cout,
                    ),
                )?;
                ps.insert(p("se.fc1.b"), Tensor::zeros(vec![1, red]))?;
                let f2 = p("se.fc2.w");
                ps.insert(
                    f2.clone(),
                    init::kaiming_uniform(
                        &mut init::substream(master_seed, &f2, 0),
                        vec![red, cout],
                        red,
                    ),
                )?;
                ps.insert(p("se.fc2.b"), Tensor::zeros(vec![1, cout]))?;
                if stride != 1 || cin != cout {
                    let pw = p("proj.w");
                    ps.insert(pw.clone(), Self::conv_init(master_seed, &pw, cout, cin, 1))?;
                    ps.insert(p("proj.b"), Tensor::zeros(vec![cout]))?;
                }
                cin = cout;
            }
        }

        let h1 = self.name("head.fc1.w");
        ps.insert(
            h1.clone(),
            init::kaiming_uniform(
                &mut init::substream(master_seed, &h1, 0),
                vec![cin, self.cfg.embed],
                cin,
            ),
        )?;
        ps.insert(self.name("head.fc1.b"), Tensor::zeros(vec![1, self.cfg.embed]))?;
        let ho = self.name("head.out.w");
        ps.insert(
            ho.clone(),
            init::kaiming_uniform(
                &mut init::substream(master_seed, &ho, 0),
                vec![self.cfg.embed, 2],
                self.cfg.embed,
            ),
        )?;
        Ok(())
    }

    /// Classify a multichannel feature map `[entry_channels, F, T]` (from a
    /// stem or from the fusion block). Returns logits `[1, 2]`.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, mut x: TensorId) -> Result<TensorId> {
        let s = g.value(x).shape().to_vec();
        if s.len() != 3 || s[0] != self.cfg.entry_channels() {
            return Err(Error::Shape(format!(
                "classifier input must be [{}, F, T], got {s:?}",
                self.cfg.entry_channels()
            )));
        }
        let mut cin = self.cfg.entry_channels();
        for (si, stage) in self.cfg.stages.iter().enumerate() {
            for bi in 0..stage.blocks {
                let stride = if bi == 0 { stage.stride } else { 1 };
                x = self.block(g, bound, x, si, bi, cin, stage.channels, stride)?;
                cin = stage.channels;
            }
        }
        let pooled = g.spatial_mean(x)?;
        let flat = g.reshape(pooled, vec![1, cin])?;
        let e1 = g.matmul(flat, bound.id(&self.name("head.fc1.w")))?;
        let e1b = g.add(e1, bound.id(&self.name("head.fc1.b")))?;
        let embed = g.relu(e1b);
        g.matmul(embed, bound.id(&self.name("head.out.w")))
    }

    #[allow(clippy::too_many_arguments)]
    fn block(
        &self,
        g: &mut Graph,
        bound: &Bound,
        x: TensorId,
        si: usize,
        bi: usize,
        cin: usize,
        cout: usize,
        stride: usize,
    ) -> Result<TensorId> {
        let p = |part: &str| self.name(&format!("s{si}.b{bi}.{part}"));
        let c1 = g.conv2d(
            x,
            bound.id(&p("conv1.w")),
            Some(bound.id(&p("conv1.b"))),
            (stride, stride),
            (1, 1),
        )?;
        let a1 = g.relu(c1);
        let c2 = g.conv2d(a1, bound.id(&p("conv2.w")), Some(bound.id(&p("conv2.b"))), (1, 1), (1, 1))?;

        // Squeeze-excitation: global pool, bottleneck, sigmoid gate.
        let squeezed = g.spatial_mean(c2)?;
        let sq_row = g.reshape(squeezed, vec![1, cout])?;
        let b1 = g.matmul(sq_row, bound.id(&p("se.fc1.w")))?;
        let b1b = g.add(b1, bound.id(&p("se.fc1.b")))?;
        let b1a = g.relu(b1b);
        let b2 = g.matmul(b1a, bound.id(&p("se.fc2.w")))?;
        let b2b = g.add(b2, bound.id(&p("se.fc2.b")))?;
        let gate_row = g.sigmoid(b2b);
        let gate = g.reshape(gate_row, vec![cout])?;
        let gated = g.scale_channels(c2, gate)?;

        let shortcut = if stride != 1 || cin != cout {
            g.conv2d(
                x,
                bound.id(&p("proj.w")),
                Some(bound.id(&p("proj.b"))),
                (stride, stride),
                (0, 0),
            )?
        } else {
            x
        };
        let sum = g.add(gated, shortcut)?;
        Ok(g.relu(sum))
    }
}

/// Annealed angular-margin cross-entropy on 2-way logits.
///
/// The logit vector is read geometrically: its norm is the feature radius
/// and each coordinate over the norm is a class cosine. The target cosine
/// is warped by the margin rule psi(theta) = (-1)^k cos(m theta) - 2k with
/// k = floor(m theta / pi), blended with the unwarped cosine by the
/// annealing weight: (lambda cos + psi) / (1 + lambda). cos(m theta) is
/// expanded as a Chebyshev polynomial of cos(theta), so everything stays on
/// the tape; k is piecewise constant, so treating it as a constant leaves
/// gradients exact away from the (measure-zero) fold boundaries. With m = 1
/// the rule collapses to ordinary softmax cross-entropy for any lambda.
pub fn margin_loss(
    g: &mut Graph,
    logits: TensorId,
    label: usize,
    margin: u32,
    lambda: f64,
) -> Result<TensorId> {
    if g.value(logits).shape() != [1, 2] {
        return Err(Error::Shape(format!(
            "margin loss wants logits [1, 2], got {:?}",
            g.value(logits).shape()
        )));
    }
    if label > 1 {
        return Err(Error::InvalidArgument(format!("label {label} out of range for 2 classes")));
    }
    if !(1..=4).contains(&margin) {
        return Err(Error::InvalidArgument(format!("margin {margin} outside the supported 1..=4")));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("negative annealing weight {lambda}")));
    }
    let y = g.reshape(logits, vec![2])?;
    let sq = g.mul(y, y)?;
    let ssq = g.sum(sq);
    let guard = g.scalar(1e-24);
    let ssq_g = g.add(ssq, guard)?;
    let r = g.sqrt(ssq_g);
    let y_t = g.slice(y, 0, label, 1)?;
    let cos = g.div(y_t, r)?;

    // k from the current cosine value, outside the tape.
    let cval = g.value(cos).data()[0].clamp(-1.0, 1.0);
    let theta = cval.acos();
    let k = ((margin as f64 * theta) / std::f64::consts::PI)
        .floor()
        .min(margin as f64 - 1.0)
        .max(0.0);
    let sign = if (k as i64) % 2 == 0 { 1.0 } else { -1.0 };

    // cos(m theta) as a polynomial in cos(theta).
    let cos_m = match margin {
        1 => cos,
        2 => {
            // 2c^2 - 1
            let c2 = g.mul(cos, cos)?;
            let t = g.scale(c2, 2.0);
            let one = g.scalar(1.0);
            g.sub(t, one)?
        }
        3 => {
            // 4c^3 - 3c
            let c2 = g.mul(cos, cos)?;
            let c3 = g.mul(c2, cos)?;
            let a = g.scale(c3, 4.0);
            let b = g.scale(cos, 3.0);
            g.sub(a, b)?
        }
        4 => {
            // 8c^4 - 8c^2 + 1
            let c2 = g.mul(cos, cos)?;
            let c4 = g.mul(c2, c2)?;
            let a = g.scale(c4, 8.0);
            let b = g.scale(c2, 8.0);
            let d = g.sub(a, b)?;
            let one = g.scalar(1.0);
            g.add(d, one)?
        }
        _ => unreachable!("validated above"),
    };
    let signed = g.scale(cos_m, sign);
    let shift = g.scalar(-2.0 * k);
    let psi = g.add(signed, shift)?;

    let lam_cos = g.scale(cos, lambda);
    let blend_num = g.add(lam_cos, psi)?;
    let blend = g.scale(blend_num, 1.0 / (1.0 + lambda));
    let warped_target = g.mul(r, blend)?;

    let other = 1 - label;
    let y_other = g.slice(y, 0, other, 1)?;
    let warped = if label == 0 {
        g.concat(0, &[warped_target, y_other])?
    } else {
        g.concat(0, &[y_other, warped_target])?
    };
    let probs = g.softmax(warped, 0)?;
    let p_t = g.slice(probs, 0, label, 1)?;
    let logp = g.log_clamped(p_t, 1e-300);
    Ok(g.scale(logp, -1.0))
}

/// Plain softmax cross-entropy on `[1, 2]` logits (the teacher's own loss
/// and the margin loss's m = 1 reference).
pub fn cross_entropy(g: &mut Graph, logits: TensorId, label: usize) -> Result<TensorId> {
    if label > 1 {
        return Err(Error::InvalidArgument(format!("label {label} out of range for 2 classes")));
    }
    let y = g.reshape(logits, vec![2])?;
    let probs = g.softmax(y, 0)?;
    let p_t = g.slice(probs, 0, label, 1)?;
    let logp = g.log_clamped(p_t, 1e-300);
    Ok(g.scale(logp, -1.0))
}

/// Detection score from logits: bona fide evidence minus spoof evidence.
/// Higher means more confidently bona fide.
pub fn detection_score(logits: &[f64]) -> f64 {
    logits[0] - logits[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(c: usize, f: usize, t: usize, seed: u64) -> Tensor {
        init::uniform(&mut init::substream(seed, "feat", 0), vec![c, f, t], 1.0)
    }

    #[test]
    fn presets_build_and_produce_two_logits() {
        for preset in ["micro", "tiny", "default", "deep"] {
            let cfg = ClassifierConfig::preset(preset).unwrap();
            let entry = cfg.entry_channels();
            let cls = Classifier::new("cls", cfg).unwrap();
            let mut ps = ParamSet::new();
            cls.register(&mut ps, 11).unwrap();
            let mut g = Graph::new();
            let bound = ps.bind(&mut g, false);
            let x = g.constant(feat(entry, 16, 12, 3));
            let logits = cls.forward(&mut g, &bound, x).unwrap();
            assert_eq!(g.value(logits).shape(), &[1, 2], "{preset}");
            assert!(g.value(logits).all_finite(), "{preset}");
        }
        assert!(ClassifierConfig::preset("resnet9000").is_err());
    }

    #[test]
    fn deep_preset_has_the_expected_depth() {
        let cfg = ClassifierConfig::preset("deep").unwrap();
        let blocks: usize = cfg.stages.iter().map(|s| s.blocks).sum();
        assert_eq!(blocks, 16, "3+4+6+3 residual blocks");
        // Two convolutions per block plus the (external) stem convolution
        // and two head layers: the canonical 34-layer residual arrangement.
        assert_eq!(2 * blocks + 1 + 2, 35);
    }

    #[test]
    fn zero_weight_se_gate_is_one_half() {
        let cfg = ClassifierConfig::preset("micro").unwrap();
        let cls = Classifier::new("cls", cfg).unwrap();
        let mut ps = ParamSet::new();
        cls.register(&mut ps, 5).unwrap();
        // Zeroing fc2 makes the gate sigmoid(0) = 0.5 regardless of input.
        ps.data_mut("cls.s0.b0.se.fc2.w").unwrap().fill(0.0);
        let mut g = Graph::new();
        let bound = ps.bind(&mut g, false);
        let x = g.constant(feat(16, 8, 8, 7));
        let logits = cls.forward(&mut g, &bound, x).unwrap();
        assert!(g.value(logits).all_finite());
    }

    #[test]
    fn margin_one_equals_plain_cross_entropy_with_gradients() {
        for seed in 0..10 {
            let raw = init::uniform(&mut init::substream(seed, "lg", 0), vec![1, 2], 2.0);
            for label in [0usize, 1] {
                let mut g1 = Graph::new();
                let l1 = g1.leaf(raw.clone(), true);
                let loss1 = margin_loss(&mut g1, l1, label, 1, 3.7).unwrap();
                g1.backward(loss1).unwrap();
                let mut g2 = Graph::new();
                let l2 = g2.leaf(raw.clone(), true);
                let loss2 = cross_entropy(&mut g2, l2, label).unwrap();
                g2.backward(loss2).unwrap();
                let d = (g1.value(loss1).data()[0] - g2.value(loss2).data()[0]).abs();
                assert!(d < 1e-9, "seed {seed} label {label}: loss differs by {d}");
                for (a, b) in g1.grad(l1).unwrap().iter().zip(g2.grad(l2).unwrap()) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn margin_loss_matches_the_reference_formula() {
        for seed in 0..20 {
            let raw = init::uniform(&mut init::substream(seed, "ml", 0), vec![1, 2], 2.0);
            for margin in 1..=4u32 {
                for lambda in [0.0, 1.0, 5.0, 500.0] {
                    for label in [0usize, 1] {
                        let mut g = Graph::new();
                        let l = g.constant(raw.clone());
                        let loss = margin_loss(&mut g, l, label, margin, lambda).unwrap();
                        let want = spoofdet_oracles::asoftmax_naive(raw.data(), label, margin, lambda);
                        let got = g.value(loss).data()[0];
                        assert!(
                            (got - want).abs() < 1e-9,
                            "seed {seed} m={margin} lambda={lambda} label={label}: {got} vs {want}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn margin_increases_the_loss_on_confident_correct_predictions() {
        // A confidently correct logit pair: larger margins demand more.
        let raw = Tensor::new(vec![1, 2], vec![2.0, -1.0]).unwrap();
        let mut prev = 0.0;
        for margin in 1..=4u32 {
            let mut g = Graph::new();
            let l = g.constant(raw.clone());
            let loss = margin_loss(&mut g, l, 0, margin, 0.0).unwrap();
            let v = g.value(loss).data()[0];
            assert!(v >= prev - 1e-12, "margin {margin} loss {v} < previous {prev}");
            prev = v;
        }
    }

    #[test]
    fn invalid_margin_label_and_shape_are_rejected() {
        let mut g = Graph::new();
        let l = g.constant(Tensor::new(vec![1, 2], vec![0.3, -0.2]).unwrap());
        assert!(margin_loss(&mut g, l, 0, 0, 1.0).is_err());
        assert!(margin_loss(&mut g, l, 0, 5, 1.0).is_err());
        assert!(margin_loss(&mut g, l, 2, 2, 1.0).is_err());
        assert!(margin_loss(&mut g, l, 0, 2, -1.0).is_err());
        let bad = g.constant(Tensor::new(vec![3], vec![0.0; 3]).unwrap());
        assert!(margin_loss(&mut g, bad, 0, 2, 1.0).is_err());
        assert!(cross_entropy(&mut g, l, 7).is_err());
    }

    #[test]
    fn detection_score_prefers_bona_fide_logits() {
        assert!(detection_score(&[2.0, -1.0]) > 0.0);
        assert!(detection_score(&[-0.5, 1.5]) < 0.0);
    }
}
