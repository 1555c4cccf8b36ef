//! Denoising enhancer over magnitude spectrograms.
//!
//! Encoder: two 3x3 convolutions striding 2 along frequency only, so the
//! frame rate is preserved. Bottleneck: each frame's encoded column is
//! flattened and run through a gated recurrent cell across time, then
//! projected back per frame. Decoder: two transposed convolutions mirroring
//! the encoder, finishing in softplus so the output is a valid (nonnegative)
//! magnitude. Frequency sizes must satisfy F = 1 (mod 4) so the
//! stride-2 halvings invert exactly.

use crate::error::{Error, Result};
use crate::models::params::{Bound, ParamSet};
use crate::tensor::{init, Graph, Tensor, TensorId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnhancerConfig {
    /// Channels after the first encoder convolution.
    pub ch1: usize,
    /// Channels after the second encoder convolution (bottleneck depth).
    pub ch2: usize,
    /// Recurrent state width.
    pub hidden: usize,
}

impl EnhancerConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "micro" => Ok(EnhancerConfig { ch1: 2, ch2: 4, hidden: 4 }),
            "small" => Ok(EnhancerConfig { ch1: 4, ch2: 8, hidden: 16 }),
            "default" => Ok(EnhancerConfig { ch1: 8, ch2: 16, hidden: 32 }),
            other => Err(Error::InvalidArgument(format!(
                "unknown enhancer preset {other:?} (micro, small, default)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ch1 == 0 || self.ch2 == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument("enhancer widths must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Enhancer {
    ns: String,
    cfg: EnhancerConfig,
}

impl Enhancer {
    pub fn new(ns: impl Into<String>, cfg: EnhancerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Enhancer { ns: ns.into(), cfg })
    }

    pub fn config(&self) -> &EnhancerConfig {
        &self.cfg
    }

    fn name(&self, suffix: &str) -> String {
        format!("{}.{suffix}", self.ns)
    }

    /// Encoded frequency size after the two stride-2 halvings of `f`.
    fn bottleneck_bins(f: usize) -> Result<usize> {
        if f < 5 || f % 4 != 1 {
            return Err(Error::Shape(format!(
                "enhancer needs a frequency size of 4k+1 (got {f}); choose a transform length \
                 divisible by 8"
            )));
        }
        Ok((f - 1) / 4 + 1)
    }

    /// Parameters are sized for a fixed input frequency count `f` (the
    /// analysis bin count of the enhancement branch).
    pub fn register(&self, ps: &mut ParamSet, master_seed: u64, f: usize) -> Result<()> {
        let EnhancerConfig { ch1, ch2, hidden } = self.cfg;
        let f2 = Self::bottleneck_bins(f)?;
        let d = ch2 * f2;

        let conv =
            |master: u64, name: &str, shape: Vec<usize>, fan_in: usize| -> Tensor {
                init::kaiming_uniform(&mut init::substream(master, name, 0), shape, fan_in)
            };
        let e1 = self.name("enc1.w");
        ps.insert(e1.clone(), conv(master_seed, &e1, vec![ch1, 1, 3, 3], 9))?;
        ps.insert(self.name("enc1.b"), Tensor::zeros(vec![ch1]))?;
        let e2 = self.name("enc2.w");
        ps.insert(e2.clone(), conv(master_seed, &e2, vec![ch2, ch1, 3, 3], ch1 * 9))?;
        ps.insert(self.name("enc2.b"), Tensor::zeros(vec![ch2]))?;

        for gate in ["z", "r", "n"] {
            let wname = self.name(&format!("gru.w{gate}"));
            ps.insert(
                wname.clone(),
                init::kaiming_uniform(&mut init::substream(master_seed, &wname, 0), vec![hidden, d], d),
            )?;
            let uname = self.name(&format!("gru.u{gate}"));
            ps.insert(
                uname.clone(),
                init::orthogonal(&mut init::substream(master_seed, &uname, 0), hidden, hidden),
            )?;
            ps.insert(self.name(&format!("gru.b{gate}")), Tensor::zeros(vec![hidden, 1]))?;
        }

        let pw = self.name("proj.w");
        ps.insert(
            pw.clone(),
            init::kaiming_uniform(&mut init::substream(master_seed, &pw, 0), vec![d, hidden], hidden),
        )?;
        ps.insert(self.name("proj.b"), Tensor::zeros(vec![d, 1]))?;

        // Transposed-convolution kernels are stored [ci, co, kf, kt].
        let d1 = self.name("dec1.w");
        ps.insert(d1.clone(), conv(master_seed, &d1, vec![ch2, ch1, 3, 3], ch2 * 9))?;
        ps.insert(self.name("dec1.b"), Tensor::zeros(vec![ch1]))?;
        let d2 = self.name("dec2.w");
        ps.insert(d2.clone(), conv(master_seed, &d2, vec![ch1, 1, 3, 3], ch1 * 9))?;
        ps.insert(self.name("dec2.b"), Tensor::zeros(vec![1]))?;
        Ok(())
    }

    /// Denoise a magnitude grid `[1, F, T]` into `[1, F, T]`, nonnegative.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, mag: TensorId) -> Result<TensorId> {
        let s = g.value(mag).shape().to_vec();
        if s.len() != 3 || s[0] != 1 {
            return Err(Error::Shape(format!("enhancer input must be [1, F, T], got {s:?}")));
        }
        let (f, t) = (s[1], s[2]);
        let f2 = Self::bottleneck_bins(f)?;
        let EnhancerConfig { ch1: _, ch2, hidden } = self.cfg;
        let d = ch2 * f2;
        let id = |suffix: &str| bound.id(&self.name(suffix));

        let c1 = g.conv2d(mag, id("enc1.w"), Some(id("enc1.b")), (2, 1), (1, 1))?;
        let a1 = g.relu(c1);
        let c2 = g.conv2d(a1, id("enc2.w"), Some(id("enc2.b")), (2, 1), (1, 1))?;
        let a2 = g.relu(c2); // [ch2, f2, t]

        // Flatten to per-frame columns and precompute every gate's input
        // contribution for all frames in one multiplication.
        let cols = g.reshape(a2, vec![d, t])?;
        let wz_x = g.matmul(id("gru.wz"), cols)?;
        let wr_x = g.matmul(id("gru.wr"), cols)?;
        let wn_x = g.matmul(id("gru.wn"), cols)?;

        let mut h = g.constant(Tensor::zeros(vec![hidden, 1]));
        let one = g.scalar(1.0);
        let mut outputs = Vec::with_capacity(t);
        for step in 0..t {
            let xz = g.slice(wz_x, 1, step, 1)?;
            let xr = g.slice(wr_x, 1, step, 1)?;
            let xn = g.slice(wn_x, 1, step, 1)?;

            let uz_h = g.matmul(id("gru.uz"), h)?;
            let z_pre = g.add(xz, uz_h)?;
            let z_pre_b = g.add(z_pre, id("gru.bz"))?;
            let z = g.sigmoid(z_pre_b);

            let ur_h = g.matmul(id("gru.ur"), h)?;
            let r_pre = g.add(xr, ur_h)?;
            let r_pre_b = g.add(r_pre, id("gru.br"))?;
            let r = g.sigmoid(r_pre_b);

            let un_h = g.matmul(id("gru.un"), h)?;
            let gated_mem = g.mul(r, un_h)?;
            let n_pre = g.add(xn, gated_mem)?;
            let n_pre_b = g.add(n_pre, id("gru.bn"))?;
            let cand = g.tanh(n_pre_b);

            let keep = g.mul(z, h)?;
            let inv_z = g.sub(one, z)?;
            let fresh = g.mul(inv_z, cand)?;
            h = g.add(keep, fresh)?;

            let proj = g.matmul(id("proj.w"), h)?;
            let proj_b = g.add(proj, id("proj.b"))?;
            outputs.push(g.reshape(proj_b, vec![ch2, f2, 1])?);
        }
        let bottleneck = g.concat(2, &outputs)?; // [ch2, f2, t]

        let d1 = g.conv_transpose2d(bottleneck, id("dec1.w"), Some(id("dec1.b")), (2, 1), (1, 1))?;
        let a3 = g.relu(d1);
        let d2 = g.conv_transpose2d(a3, id("dec2.w"), Some(id("dec2.b")), (2, 1), (1, 1))?;
        Ok(g.softplus(d2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mag(f: usize, t: usize, seed: u64) -> Tensor {
        let raw = init::uniform(&mut init::substream(seed, "mag", 0), vec![1, f, t], 1.0);
        Tensor::new(vec![1, f, t], raw.data().iter().map(|v| v.abs()).collect()).unwrap()
    }

    #[test]
    fn output_shape_matches_input_and_is_nonnegative() {
        for (f, t) in [(9, 5), (17, 8), (33, 3)] {
            let enh = Enhancer::new("enh", EnhancerConfig::preset("micro").unwrap()).unwrap();
            let mut ps = ParamSet::new();
            enh.register(&mut ps, 3, f).unwrap();
            let mut g = Graph::new();
            let bound = ps.bind(&mut g, false);
            let x = g.constant(mag(f, t, 1));
            let y = enh.forward(&mut g, &bound, x).unwrap();
            assert_eq!(g.value(y).shape(), &[1, f, t]);
            assert!(g.value(y).data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn even_or_misaligned_frequency_sizes_are_rejected() {
        let enh = Enhancer::new("enh", EnhancerConfig::preset("micro").unwrap()).unwrap();
        let mut ps = ParamSet::new();
        assert!(enh.register(&mut ps, 3, 8).is_err());
        let mut ps2 = ParamSet::new();
        assert!(enh.register(&mut ps2, 3, 11).is_err());
        let mut ps3 = ParamSet::new();
        assert!(enh.register(&mut ps3, 3, 9).is_ok());
    }

    #[test]
    fn zero_parameters_give_the_softplus_of_zero_everywhere() {
        let enh = Enhancer::new("enh", EnhancerConfig::preset("micro").unwrap()).unwrap();
        let mut ps = ParamSet::new();
        enh.register(&mut ps, 3, 9).unwrap();
        let names: Vec<String> = ps.iter().map(|(n, _)| n.to_string()).collect();
        for n in names {
            ps.data_mut(&n).unwrap().fill(0.0);
        }
        let mut g = Graph::new();
        let bound = ps.bind(&mut g, false);
        let x = g.constant(mag(9, 4, 2));
        let y = enh.forward(&mut g, &bound, x).unwrap();
        let ln2 = 2f64.ln();
        for &v in g.value(y).data() {
            assert!((v - ln2).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_reach_every_parameter_through_time() {
        let enh = Enhancer::new("enh", EnhancerConfig::preset("micro").unwrap()).unwrap();
        let mut ps = ParamSet::new();
        enh.register(&mut ps, 7, 9).unwrap();
        let mut g = Graph::new();
        let bound = ps.bind(&mut g, true);
        let x = g.constant(mag(9, 6, 3));
        let y = enh.forward(&mut g, &bound, x).unwrap();
        let target = g.constant(mag(9, 6, 4));
        let diff = g.sub(y, target).unwrap();
        let sq = g.mul(diff, diff).unwrap();
        let loss = g.mean(sq);
        g.backward(loss).unwrap();
        for (name, _) in ps.iter() {
            let grad = g.grad(bound.id(name)).unwrap();
            assert!(
                grad.iter().any(|&v| v != 0.0),
                "parameter {name} receives no gradient"
            );
        }
    }

    #[test]
    fn recurrence_carries_information_forward_in_time() {
        // An impulse in an early frame must influence a later frame's
        // output (the recurrent path is the only time-wise connection
        // beyond the convolution halo).
        let enh = Enhancer::new("enh", EnhancerConfig::preset("micro").unwrap()).unwrap();
        let mut ps = ParamSet::new();
        enh.register(&mut ps, 13, 9).unwrap();
        let t = 8;
        let base = mag(9, t, 5);
        let mut spiked = base.clone();
        spiked.data_mut()[1] += 2.0; // frequency 0, frame 1 of channel 0

        let run = |input: Tensor, ps: &ParamSet| {
            let mut g = Graph::new();
            let bound = ps.bind(&mut g, false);
            let x = g.constant(input);
            let y = enh.forward(&mut g, &bound, x).unwrap();
            g.value(y).data().to_vec()
        };
        let a = run(base, &ps);
        let b = run(spiked, &ps);
        // Compare the final frame (index t-1 across all frequencies).
        let changed = (0..9).any(|f| (a[f * t + t - 1] - b[f * t + t - 1]).abs() > 1e-9);
        assert!(changed, "early-frame impulse never reached the final frame");
    }
}
