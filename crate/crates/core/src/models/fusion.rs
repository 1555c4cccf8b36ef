//! Interactive fusion of the enhanced and noisy feature branches.
//!
//! Both branches enter as `[C, F, T]` stem outputs. A shared 3x3 convolution
//! over their concatenation produces a joint feature and a sigmoid gate; the
//! gate modulates each branch, and the joint feature is added back to both.
//! A spatial attention step then pools the modulated noisy branch across
//! channels (max and mean), derives a single-channel sigmoid mask through a
//! wide 7x7 convolution, and blends the two branches per position: mask
//! weight on the noisy branch, complement on the enhanced branch. The mask
//! is returned alongside the blend so it can be logged and audited —
//! a mask that stays near 1 means the system trusts the original noisy
//! feature over the enhanced one.

use crate::error::{Error, Result};
use crate::models::params::{Bound, ParamSet};
use crate::tensor::{init, Graph, PoolMode, Tensor, TensorId};

/// Feature stem shared by every classifier path: a wide 7x7 convolution
/// expands the single-channel log-magnitude grid to `channels` feature maps,
/// and a 2x2 max pool halves both axes. Teacher, single-branch student, and
/// the two fusion branches each own an instance under their own namespace.
#[derive(Clone, Debug)]
pub struct Stem {
    ns: String,
    channels: usize,
}

impl Stem {
    pub fn new(ns: impl Into<String>, channels: usize) -> Self {
        Stem { ns: ns.into(), channels }
    }

    fn name(&self, suffix: &str) -> String {
        format!("{}.{suffix}", self.ns)
    }

    pub fn register(&self, ps: &mut ParamSet, master_seed: u64) -> Result<()> {
        let wname = self.name("w");
        let w = init::kaiming_uniform(
            &mut init::substream(master_seed, &wname, 0),
            vec![self.channels, 1, 7, 7],
            49,
        );
        ps.insert(wname, w)?;
        ps.insert(self.name("b"), Tensor::zeros(vec![self.channels]))?;
        Ok(())
    }

    /// `[1, F, T]` grid in, `[channels, F/2, T/2]` feature map out.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, grid: TensorId) -> Result<TensorId> {
        let s = g.value(grid).shape().to_vec();
        if s.len() != 3 || s[0] != 1 || s[1] < 2 || s[2] < 2 {
            return Err(Error::Shape(format!(
                "stem input must be [1, F>=2, T>=2], got {s:?}"
            )));
        }
        let conv = g.conv2d(
            grid,
            bound.id(&self.name("w")),
            Some(bound.id(&self.name("b"))),
            (1, 1),
            (3, 3),
        )?;
        g.pool2d(conv, PoolMode::Max, (2, 2), (2, 2))
    }
}

/// Fusion block over `channels`-deep feature stems.
#[derive(Clone, Debug)]
pub struct Fusion {
    ns: String,
    channels: usize,
}

pub struct FusionOutput {
    /// Blended feature `[C, F, T]` feeding the classifier backbone.
    pub x_inter: TensorId,
    /// Spatial blend mask `[1, F, T]`, sigmoid-range.
    pub mask: TensorId,
}

impl Fusion {
    pub fn new(ns: impl Into<String>, channels: usize) -> Self {
        Fusion { ns: ns.into(), channels }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn name(&self, suffix: &str) -> String {
        format!("{}.{suffix}", self.ns)
    }

    /// Register parameters: two 3x3 convolutions over the concatenated
    /// branches (joint feature and gate) and one 7x7 mask convolution over
    /// the pooled pair.
    pub fn register(&self, ps: &mut ParamSet, master_seed: u64) -> Result<()> {
        let c = self.channels;
        for conv in ["mix", "gate"] {
            let wname = self.name(&format!("{conv}.w"));
            let w = init::kaiming_uniform(
                &mut init::substream(master_seed, &wname, 0),
                vec![c, 2 * c, 3, 3],
                2 * c * 9,
            );
            ps.insert(wname, w)?;
            ps.insert(self.name(&format!("{conv}.b")), Tensor::zeros(vec![c]))?;
        }
        let mname = self.name("mask.w");
        let mw = init::kaiming_uniform(
            &mut init::substream(master_seed, &mname, 0),
            vec![1, 2, 7, 7],
            2 * 49,
        );
        ps.insert(mname, mw)?;
        ps.insert(self.name("mask.b"), Tensor::zeros(vec![1]))?;
        Ok(())
    }

    /// Fuse enhanced-branch and noisy-branch stems (both `[C, F, T]`).
    pub fn forward(
        &self,
        g: &mut Graph,
        bound: &Bound,
        xe: TensorId,
        xn: TensorId,
    ) -> Result<FusionOutput> {
        let cat = g.concat(0, &[xe, xn])?;
        let joint = g.conv2d(
            cat,
            bound.id(&self.name("mix.w")),
            Some(bound.id(&self.name("mix.b"))),
            (1, 1),
            (1, 1),
        )?;
        let gate_raw = g.conv2d(
            cat,
            bound.id(&self.name("gate.w")),
            Some(bound.id(&self.name("gate.b"))),
            (1, 1),
            (1, 1),
        )?;
        let gate = g.sigmoid(gate_raw);

        let ge = g.mul(gate, xe)?;
        let xe_mod = g.add(joint, ge)?;
        let gn = g.mul(gate, xn)?;
        let xn_mod = g.add(joint, gn)?;

        let pooled_max = g.channel_max(xn_mod)?;
        let pooled_mean = g.channel_mean(xn_mod)?;
        let pooled = g.concat(0, &[pooled_max, pooled_mean])?;
        let mask_raw = g.conv2d(
            pooled,
            bound.id(&self.name("mask.w")),
            Some(bound.id(&self.name("mask.b"))),
            (1, 1),
            (3, 3),
        )?;
        let mask = g.sigmoid(mask_raw);

        let one = g.scalar(1.0);
        let inv_mask = g.sub(one, mask)?;
        let from_enh = g.mul_spatial(xe_mod, inv_mask)?;
        let from_noisy = g.mul_spatial(xn_mod, mask)?;
        let x_inter = g.add(from_enh, from_noisy)?;
        Ok(FusionOutput { x_inter, mask })
    }
}

/// Summary statistics of one utterance's blend mask.
#[derive(Clone, Copy, Debug)]
pub struct MaskStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Fraction of positions preferring the noisy branch (mask > 0.5).
    pub frac_above_half: f64,
}

pub fn mask_stats(values: &[f64]) -> MaskStats {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let median =
        if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    MaskStats {
        mean: values.iter().sum::<f64>() / n as f64,
        median,
        min: sorted[0],
        max: sorted[n - 1],
        frac_above_half: values.iter().filter(|&&v| v > 0.5).count() as f64 / n as f64,
    }
}
