//! Green-function identities: ball integral normalization, symmetry,
//! spectral self-consistency, fractional positivity.

use anyhow::Result;
use freefield::domain::{
    build_grid, fractional_green_ball, green, green_ball_integral, DomainKind, DomainSpec,
};
use freefield::quad;
use rand::Rng;

use crate::config::ExperimentConfig;
use crate::report::{fmt, CheckResult, Csv, ExperimentReport};
use crate::RunError;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let mut report = ExperimentReport::new(cfg);

    // 1. ∫_{B(0,ε)} G_{0,ε}(0,·) · 2d/ε² = 1 for ε ∈ {1, 1/2, 1/4}, d ∈ {2,3}
    let mut table = Csv::new(&["d", "eps", "integral", "ratio"]);
    let mut worst: f64 = 0.0;
    for d in [2usize, 3] {
        for eps in [1.0, 0.5, 0.25] {
            let v = green_ball_integral(eps, d).map_err(anyhow::Error::from)?;
            let ratio = v * 2.0 * d as f64 / (eps * eps);
            worst = worst.max((ratio - 1.0).abs());
            table.row(&[d.to_string(), fmt(eps), fmt(v), fmt(ratio)]);
        }
    }
    report.table("green_ball_integral", table.finish());
    report.push(CheckResult::abs_within("green_ball_integral_ratio_dev", worst, 1e-5));

    // 2. disk Green at the center: (1/2π) ln 2
    let spec = DomainSpec::unit_disk();
    let g = green(&spec, &[0.0, 0.0], &[0.5, 0.0], None).map_err(anyhow::Error::from)?;
    let target = (2.0f64).ln() / (2.0 * std::f64::consts::PI);
    report.push(CheckResult::abs_within("disk_green_center_dev", g - target, 1e-9));

    // 3. symmetry over 100 random interior pairs (square + disk)
    let mut rng = crate::experiments::common::replica_rng(cfg.seed, 0);
    let mut worst_sym: f64 = 0.0;
    for spec in [DomainSpec::unit_square(), DomainSpec::unit_disk()] {
        for _ in 0..50 {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| loop {
                let p = [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
                let p = match spec.kind {
                    DomainKind::Rectangle => [0.5 * (p[0] + 1.0), 0.5 * (p[1] + 1.0)],
                    DomainKind::Ball => p,
                };
                if spec.boundary_distance(&p) > 0.05 {
                    return p;
                }
            };
            let x = draw(&mut rng);
            let mut y = draw(&mut rng);
            if quad::dist(&x, &y) < 1e-3 {
                y[0] = if y[0] < 0.0 { y[0] + 0.4 } else { y[0] - 0.4 };
            }
            let gxy = green(&spec, &x, &y, Some(1024)).map_err(anyhow::Error::from)?;
            let gyx = green(&spec, &y, &x, Some(1024)).map_err(anyhow::Error::from)?;
            worst_sym = worst_sym.max((gxy - gyx).abs() / (1.0 + gxy.abs()));
        }
    }
    report.push(CheckResult::abs_within("green_symmetry_dev", worst_sym, 1e-10));

    // 4. spectral self-consistency at doubled cutoff
    let sq = DomainSpec::unit_square();
    let far = (
        green(&sq, &[0.3, 0.4], &[0.6, 0.7], Some(2000)).map_err(anyhow::Error::from)?,
        green(&sq, &[0.3, 0.4], &[0.6, 0.7], Some(4000)).map_err(anyhow::Error::from)?,
    );
    report.push(CheckResult::abs_within("spectral_far_pair_dev", far.0 - far.1, 1e-4));
    let near = (
        green(&sq, &[0.45, 0.5], &[0.55, 0.5], Some(2000)).map_err(anyhow::Error::from)?,
        green(&sq, &[0.45, 0.5], &[0.55, 0.5], Some(4000)).map_err(anyhow::Error::from)?,
    );
    report.push(CheckResult::abs_within(
        "spectral_near_pair_rel_dev",
        (near.0 - near.1) / near.1,
        1e-3,
    ));

    // 5. fractional Green: positive and symmetric on 100 random pairs
    let alpha = if (0.0..1.0).contains(&cfg.alpha) && cfg.alpha > 0.0 { cfg.alpha } else { 0.5 };
    let mut min_val = f64::INFINITY;
    let mut worst_fsym: f64 = 0.0;
    for _ in 0..100 {
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| loop {
            let p = [rng.gen_range(-0.95..0.95), rng.gen_range(-0.95..0.95)];
            if quad::norm(&p) < 0.95 {
                return p;
            }
        };
        let x = draw(&mut rng);
        let mut y = draw(&mut rng);
        if quad::dist(&x, &y) < 1e-3 {
            y[0] = if y[0] < 0.0 { y[0] + 0.3 } else { y[0] - 0.3 };
        }
        let gxy = fractional_green_ball(alpha, &x, &y).map_err(anyhow::Error::from)?;
        let gyx = fractional_green_ball(alpha, &y, &x).map_err(anyhow::Error::from)?;
        min_val = min_val.min(gxy);
        worst_fsym = worst_fsym.max((gxy - gyx).abs() / (1.0 + gxy.abs()));
    }
    report.push(CheckResult::boolean("fractional_green_positive", min_val > 0.0));
    report.push(CheckResult::abs_within("fractional_green_symmetry_dev", worst_fsym, 1e-8));

    // 6. grid weight normalization on the disk (boundary-cell correction)
    let grid = build_grid(&DomainSpec::unit_disk(), cfg.grid_n).map_err(anyhow::Error::from)?;
    report.push(CheckResult::abs_within(
        "disk_raw_weight_sum_dev",
        grid.raw_weight_sum - std::f64::consts::PI,
        1e-3,
    ));
    let total: f64 = grid.weights.iter().sum();
    report.push(CheckResult::abs_within(
        "disk_weight_sum_rel_dev",
        (total - std::f64::consts::PI) / std::f64::consts::PI,
        1e-12,
    ));

    Ok(report)
}
