use freefield::domain::*;
use freefield::fields::*;
use freefield::kernels::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn main() {
    // c_profile at small r
    for r in [0.01, 0.05, 0.2, 0.5, 0.9] {
        println!("c({r}) = {:?}", c_profile(r, 0.5, 2));
    }
    // zero-boundary variance
    let grid = build_grid(&DomainSpec::unit_square(), 64).unwrap();
    let center = [0.5, 0.5];
    let decomp = BallDecomposition::new(&grid, &center, 0.12, 1.0).unwrap();
    let cov = decomp.covariance();
    let crow = decomp.stencil.nodes.iter().position(|&i| {
        let p = grid.points[i];
        ((p[0]-0.5).powi(2)+(p[1]-0.5).powi(2)).sqrt() < 1e-9
    });
    println!("center row: {:?} of {}", crow, decomp.len());
    if let Some(row) = crow {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let d = decomp.sample_fluctuation(&mut rng);
            s2 += d[row]*d[row];
        }
        println!("mc var = {} target {}", s2 / n as f64, cov[(row, row)]);
    }
    let _ = Arc::clone(&grid);
}
