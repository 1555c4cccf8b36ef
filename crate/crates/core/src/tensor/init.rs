//! Deterministic parameter initialization.
//!
//! Every weight tensor draws from its own named substream: a stable FNV-1a
//! hash of (master seed, tag, salt) seeds a ChaCha8 generator, so adding or
//! reordering parameters never shifts anyone else's draws, and two models
//! sharing a tag (and master seed) get bitwise-identical values.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

fn fnv1a(master: u64, tag: &str, salt: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let eat = |h: &mut u64, b: u8| {
        *h ^= b as u64;
        *h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for b in master.to_le_bytes() {
        eat(&mut h, b);
    }
    for &b in tag.as_bytes() {
        eat(&mut h, b);
    }
    for b in salt.to_le_bytes() {
        eat(&mut h, b);
    }
    h
}

/// Named substream generator.
pub fn substream(master: u64, tag: &str, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a(master, tag, salt))
}

/// Uniform draw in `[-bound, bound)`.
pub fn uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, bound: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| bound * (2.0 * rng.random::<f64>() - 1.0)).collect();
    Tensor::new(shape, data).expect("shape/data constructed together")
}

/// Fan-in scaled uniform init, bound `sqrt(6 / fan_in)`, suited to layers
/// followed by rectifiers.
pub fn kaiming_uniform(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    assert!(fan_in > 0, "fan_in must be positive");
    uniform(rng, shape, (6.0 / fan_in as f64).sqrt())
}

/// Standard normal draws via Box-Muller.
fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let u2: f64 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        out.push(r * th.cos());
        if out.len() < n {
            out.push(r * th.sin());
        }
    }
    out
}

/// Matrix with orthonormal rows (rows <= cols) or columns (rows >= cols),
/// from modified Gram-Schmidt on a Gaussian draw. Used for recurrent
/// weights, where orthogonality keeps long products well conditioned.
pub fn orthogonal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    assert!(rows > 0 && cols > 0);
    // Orthonormalize the shorter side, transpose back if needed.
    let (r, c, transposed) = if rows < cols { (cols, rows, true) } else { (rows, cols, false) };
    // r >= c: build r x c with orthonormal columns.
    let mut m = gaussian(rng, r * c);
    for j in 0..c {
        for k in 0..j {
            let mut dot = 0.0;
            for i in 0..r {
                dot += m[i * c + j] * m[i * c + k];
            }
            for i in 0..r {
                m[i * c + j] -= dot * m[i * c + k];
            }
        }
        let norm = (0..r).map(|i| m[i * c + j] * m[i * c + j]).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "Gram-Schmidt degenerated; astronomically unlikely draw");
        for i in 0..r {
            m[i * c + j] /= norm;
        }
    }
    if transposed {
        let mut t = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = m[i * c + j];
            }
        }
        Tensor::new(vec![rows, cols], t).expect("transposed dims")
    } else {
        Tensor::new(vec![rows, cols], m).expect("dims")
    }
}
