//! Finite-difference gradient checking.
//!
//! Compares analytic gradients against central differences on a flat
//! parameter vector, reporting the worst relative error per named parameter
//! block. Blocks larger than `samples_per_block` are checked on a seeded
//! random subset of coordinates so that big models stay cheap to verify.

use crate::scalar::Scalar;

/// A named contiguous slice of the flat parameter vector.
#[derive(Clone, Debug)]
pub struct BlockSpec {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl BlockSpec {
    pub fn new(name: impl Into<String>, start: usize, len: usize) -> Self {
        BlockSpec { name: name.into(), start, len }
    }
}

#[derive(Clone, Debug)]
pub struct BlockResult {
    pub name: String,
    pub max_rel_error: f64,
    pub coords_checked: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockResult>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_error < self.tolerance)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }
}

/// Checks `analytic` against central differences of `f` at `theta`.
///
/// The relative error denominator is floored at a small multiple of the
/// gradient's RMS so coordinates with near-zero derivatives do not produce
/// spurious failures from floating-point cancellation.
pub fn gradient_check<T: Scalar, F: FnMut(&[T]) -> T>(
    mut f: F,
    theta: &[T],
    analytic: &[T],
    blocks: &[BlockSpec],
    eps: T,
    tolerance: f64,
    samples_per_block: Option<usize>,
    seed: u64,
) -> GradCheckReport {
    assert_eq!(theta.len(), analytic.len());

    let rms = {
        let ss: f64 = analytic.iter().map(|&g| g.f64() * g.f64()).sum();
        (ss / analytic.len().max(1) as f64).sqrt()
    };
    let floor = (1e-3 * rms).max(1e-8);

    let mut work = theta.to_vec();
    let mut results = Vec::with_capacity(blocks.len());
    for block in blocks {
        let coords: Vec<usize> = match samples_per_block {
            Some(k) if block.len > k => {
                use rand::seq::SliceRandom;
                let mut rng = crate::rng::SeedStream::root(seed)
                    .tag("gradcheck")
                    .tag(&block.name)
                    .rng();
                let mut all: Vec<usize> = (block.start..block.start + block.len).collect();
                all.shuffle(&mut rng);
                all.truncate(k);
                all
            }
            _ => (block.start..block.start + block.len).collect(),
        };

        let mut max_rel = 0.0f64;
        for &k in &coords {
            let orig = work[k];
            work[k] = orig + eps;
            let plus = f(&work).f64();
            work[k] = orig - eps;
            let minus = f(&work).f64();
            work[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps.f64());
            let a = analytic[k].f64();
            let denom = a.abs().max(numeric.abs()).max(floor);
            let rel = (a - numeric).abs() / denom;
            if rel > max_rel {
                max_rel = rel;
            }
        }
        results.push(BlockResult {
            name: block.name.clone(),
            max_rel_error: max_rel,
            coords_checked: coords.len(),
        });
    }
    GradCheckReport { blocks: results, tolerance }
}
