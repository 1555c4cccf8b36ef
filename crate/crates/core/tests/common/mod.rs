//! Shared machinery for gradient checking graph ops against central
//! differences.

use spoofdet_core::tensor::{init, Graph, Tensor, TensorId};
use spoofdet_oracles as oracle;

/// Relative-error denominator floor: below this magnitude the comparison
/// degrades to an absolute one, keeping near-zero gradients from amplifying
/// finite-difference noise.
pub const REL_FLOOR: f64 = 1e-3;

/// Builds the op under test from bound input leaves. The seed lets a case
/// derive deterministic per-seed context (e.g. a phase grid) that is not
/// part of the differentiated inputs.
pub type BuildOp<'a> = &'a dyn Fn(u64, &mut Graph, &[TensorId]) -> TensorId;

/// Check analytic gradients of `build` against central differences.
///
/// For each seed: draw every input uniformly from [-2, 2), map it through
/// `domain` (input index, raw value), reduce the op output to a scalar by a
/// fixed random positive weighting, and compare `Graph::backward` gradients
/// with finite differences for every component of every input. If `min_gap`
/// is set, inputs are redrawn until all pairwise value gaps within one input
/// exceed it (keeps finite differences off argmax switching boundaries).
/// Returns the worst relative error seen; asserts it stays below `tol`.
pub fn fd_check(
    name: &str,
    seeds: u64,
    shapes: &[&[usize]],
    min_gap: Option<f64>,
    tol: f64,
    domain: &dyn Fn(usize, f64) -> f64,
    build: BuildOp,
) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let inputs = draw_inputs(name, seed, shapes, min_gap, domain);

        // Forward + backward once for the analytic gradients.
        let mut g = Graph::new();
        let ids: Vec<TensorId> = inputs.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let y = build(seed, &mut g, &ids);
        let loss = weighted_sum(&mut g, y, name, seed);
        g.backward(loss).unwrap();

        for (j, input) in inputs.iter().enumerate() {
            let analytic = g.grad(ids[j]).expect("input should receive gradient").to_vec();
            let mut probe = inputs.clone();
            let fd = oracle::central_difference(
                |x: &[f64]| {
                    probe[j] = Tensor::new(shapes[j].to_vec(), x.to_vec()).unwrap();
                    let mut pg = Graph::new();
                    let pids: Vec<TensorId> =
                        probe.iter().map(|t| pg.leaf(t.clone(), true)).collect();
                    let py = build(seed, &mut pg, &pids);
                    let pl = weighted_sum(&mut pg, py, name, seed);
                    pg.value(pl).data()[0]
                },
                input.data(),
                1e-5,
            );
            let err = oracle::max_rel_err(&analytic, &fd, REL_FLOOR);
            assert!(
                err < tol,
                "{name}: seed {seed}, input {j}: gradient mismatch {err:.3e} (tol {tol:.1e})"
            );
            worst = worst.max(err);
        }
    }
    worst
}

fn draw_inputs(
    name: &str,
    seed: u64,
    shapes: &[&[usize]],
    min_gap: Option<f64>,
    domain: &dyn Fn(usize, f64) -> f64,
) -> Vec<Tensor> {
    let mut salt_base = 0u64;
    loop {
        let inputs: Vec<Tensor> = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = init::substream(seed, name, salt_base + i as u64);
                let raw = init::uniform(&mut rng, s.to_vec(), 2.0);
                Tensor::new(s.to_vec(), raw.data().iter().map(|&v| domain(i, v)).collect())
                    .unwrap()
            })
            .collect();
        let Some(gap) = min_gap else {
            return inputs;
        };
        let ok = inputs.iter().all(|t| {
            let d = t.data();
            d.iter().enumerate().all(|(a, &va)| {
                d.iter().skip(a + 1).all(|&vb| (va - vb).abs() > gap)
            })
        });
        if ok {
            return inputs;
        }
        salt_base += 1000;
        assert!(salt_base < 50_000, "{name}: could not draw gap-separated inputs");
    }
}

/// Reduce `y` to a scalar via elementwise product with a fixed positive
/// weight grid in [0.5, 1.5), so every output component reaches the loss
/// with a distinct coefficient.
fn weighted_sum(g: &mut Graph, y: TensorId, name: &str, seed: u64) -> TensorId {
    let shape = g.value(y).shape().to_vec();
    let mut rng = init::substream(seed ^ 0x5eed_cafe, name, 999);
    let raw = init::uniform(&mut rng, shape, 1.0);
    let w = Tensor::new(
        raw.shape().to_vec(),
        raw.data().iter().map(|&v| 1.0 + 0.25 * v).collect(),
    )
    .unwrap();
    let wid = g.constant(w);
    let prod = g.mul(y, wid).unwrap();
    g.sum(prod)
}
