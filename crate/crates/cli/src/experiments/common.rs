//! Shared pieces of the experiment suites.

use std::sync::Arc;

use anyhow::Result;
use freefield::domain::Grid;
use freefield::fields::{TestFn, TestFnKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Replica stream: one base seed, one stream per replica. Deterministic
/// regardless of scheduling because results are collected in index order.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Run `f` over `replicas` independent streams in parallel, collecting in
/// replica order.
pub fn par_replicas<T: Send>(
    replicas: usize,
    seed: u64,
    f: impl Fn(usize, &mut ChaCha8Rng) -> T + Sync,
) -> Vec<T> {
    (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut rng = replica_rng(seed, k as u64);
            f(k, &mut rng)
        })
        .collect()
}

/// Observable battery for dynamics/covariance suites: three Gaussian bumps
/// of different centres/widths plus the two lowest sine modes.
pub fn observable_battery(grid: &Arc<Grid>) -> Result<Vec<TestFn>> {
    let mut out = Vec::new();
    let bumps = [
        (vec![0.50, 0.50], 0.14, 1.0),
        (vec![0.38, 0.58], 0.10, 0.8),
        (vec![0.62, 0.40], 0.12, 1.2),
    ];
    for (center, width, amplitude) in bumps {
        out.push(TestFn::new(grid, TestFnKind::GaussianBump { center, width, amplitude })?);
    }
    out.push(TestFn::new(grid, TestFnKind::ProductSine { index: [1, 1, 0] })?);
    out.push(TestFn::new(grid, TestFnKind::ProductSine { index: [2, 1, 0] })?);
    Ok(out)
}

/// Deterministic interior evaluation points with collar margin, row-major
/// over a coarse sub-lattice.
pub fn interior_points(grid: &Arc<Grid>, margin: f64, count: usize) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let (lo, hi) = grid.spec.bounding_box();
    let per_axis = (count as f64).powf(1.0 / d as f64).ceil() as usize + 1;
    let mut pts = Vec::new();
    let mut idx = vec![0usize; d];
    'outer: loop {
        let mut p = vec![0.0; d];
        for a in 0..d {
            let span = hi[a] - lo[a] - 2.0 * margin;
            p[a] = lo[a] + margin + span * (idx[a] as f64 + 0.73) / per_axis as f64;
        }
        if grid.spec.boundary_distance(&p) > margin {
            pts.push(p);
            if pts.len() == count {
                return pts;
            }
        }
        for a in 0..d {
            idx[a] += 1;
            if idx[a] < per_axis {
                continue 'outer;
            }
            idx[a] = 0;
        }
        break;
    }
    pts
}
