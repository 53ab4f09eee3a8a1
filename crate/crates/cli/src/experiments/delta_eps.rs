//! Δ_ε convergence suite. With α = 1 it measures sup|Δ_ε g - Δg| over a
//! bump battery against the analytic Laplacian (slope, exactness on |z|²,
//! and the constant-policy ratio); with α < 1 it measures the relative
//! error of Δ_ε^α against the Riesz quadrature across the ε list.

use anyhow::Result;
use freefield::domain::build_grid;
use freefield::fields::{TestFn, TestFnKind};
use freefield::operators::{
    calibrate_constant, calibrated_constant, delta_eps, delta_eps_frac, exit_time_constant,
    fractional_constant, riesz_laplacian, CalibrationMode, CenterRule, OperatorConfig,
};
use freefield::stats::trend_fit;

use crate::config::{ConstantPolicy, ExperimentConfig};
use crate::experiments::common::interior_points;
use crate::report::{fmt, CheckResult, Csv, ExperimentReport};
use crate::svg::{line_plot, Series};
use crate::RunError;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let classical = (cfg.alpha - 1.0).abs() < 1e-12;
    if classical {
        run_classical(cfg)
    } else {
        run_fractional(cfg)
    }
}

fn default_eps(cfg: &ExperimentConfig, classical: bool) -> Vec<f64> {
    if cfg.eps_list.len() >= 2 {
        cfg.eps_list.clone()
    } else if classical {
        vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
    } else {
        vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0]
    }
}

fn run_classical(cfg: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let mut report = ExperimentReport::new(cfg);
    let spec = cfg.domain_spec()?;
    let grid = build_grid(&spec, cfg.grid_n).map_err(anyhow::Error::from)?;
    let d = grid.dim();
    let volume = spec.volume();
    let eps_list = default_eps(cfg, true);
    let eps_min = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);

    let constant = match cfg.constant {
        ConstantPolicy::Analytic => calibrated_constant(d, volume),
        ConstantPolicy::Paper => exit_time_constant(d, volume),
        ConstantPolicy::Empirical => {
            let cal = calibrate_constant(&grid, 1.0, CalibrationMode::Empirical, eps_min)
                .map_err(anyhow::Error::from)?;
            report.push(CheckResult::abs_within(
                "empirical_vs_analytic_rel_dev",
                cal.constant / calibrated_constant(d, volume) - 1.0,
                0.02,
            ));
            report.push(CheckResult::at_most("empirical_fit_residual", cal.residual, 0.05));
            cal.constant
        }
    };

    // battery: three Gaussian bumps, fifty interior evaluation points
    let bumps = [
        (vec![0.5; d], 0.13, 1.0),
        (vec![0.45; d], 0.10, 0.8),
        (vec![0.55; d], 0.16, 1.3),
    ];
    let battery: Vec<TestFn> = bumps
        .iter()
        .map(|(c, w, a)| {
            TestFn::new(&grid, TestFnKind::GaussianBump {
                center: c.clone(),
                width: *w,
                amplitude: *a,
            })
        })
        .collect::<std::result::Result<_, _>>()
        .map_err(anyhow::Error::from)?;
    let margin = 2.0 * eps_list.iter().cloned().fold(0.0f64, f64::max) + 0.05;
    let points = interior_points(&grid, margin, 50);

    let mut table = Csv::new(&["eps", "sup_error", "mean_ratio"]);
    let mut sup_errors = Vec::new();
    let mut ratios = Vec::new();
    for &eps in &eps_list {
        let opcfg = OperatorConfig::new(eps, constant, 1.0, CenterRule::default())
            .map_err(anyhow::Error::from)?;
        let mut sup = 0.0f64;
        let (mut rnum, mut rden) = (0.0, 0.0);
        for g in &battery {
            for z in &points {
                let approx = delta_eps(g, z, &opcfg).map_err(anyhow::Error::from)?;
                let exact = g.laplacian(z);
                sup = sup.max((approx - exact).abs());
                rnum += exact * approx;
                rden += approx * approx;
            }
        }
        let ratio = rnum / rden;
        sup_errors.push(sup);
        ratios.push(ratio);
        table.row(&[fmt(eps), fmt(sup), fmt(ratio)]);
    }
    report.table("delta_eps_convergence", table.finish());

    // log2 slope of the sup error across the ε ladder
    let xs: Vec<f64> = eps_list.iter().map(|e| e.log2()).collect();
    let ys: Vec<f64> = sup_errors.iter().map(|e| e.log2()).collect();
    let fit = trend_fit(&xs, &ys, None).map_err(anyhow::Error::from)?;
    report.push(CheckResult::at_least("sup_error_log2_slope", fit.slope, 0.9));

    // exactness on |z|² at the smallest ε (holds only for the calibrated
    // constant; under the paper policy this is the documented failure)
    let q = TestFn::new(&grid, TestFnKind::Quadratic).map_err(anyhow::Error::from)?;
    let opcfg = OperatorConfig::new(eps_min, constant, 1.0, CenterRule::default())
        .map_err(anyhow::Error::from)?;
    let z = &points[0];
    let v = delta_eps(&q, z, &opcfg).map_err(anyhow::Error::from)?;
    report.push(CheckResult::abs_within(
        "quadratic_exactness_dev",
        v - 2.0 * d as f64,
        1e-6,
    ));

    // measured ratio Δg / Δ_ε g
    let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    match cfg.constant {
        ConstantPolicy::Paper => {
            // documentation check: the swap heuristic is off by (d+2)/2
            let expected = (d as f64 + 2.0) / 2.0;
            report.push(CheckResult::abs_within(
                "paper_constant_ratio_dev_from_half_d_plus_2",
                mean_ratio / expected - 1.0,
                0.05,
            ));
            // the convergence criterion itself fails by design under this
            // policy; record the measured ratio for the report
            report.push(CheckResult::abs_within(
                "mean_ratio_dev_from_one",
                mean_ratio - 1.0,
                0.02,
            ));
        }
        _ => {
            report.push(CheckResult::abs_within(
                "mean_ratio_dev_from_one",
                mean_ratio - 1.0,
                0.02,
            ));
        }
    }

    if cfg.plots {
        let pts: Vec<(f64, f64)> = xs.iter().cloned().zip(ys.iter().cloned()).collect();
        report.figure(
            "delta_eps_convergence",
            line_plot(
                "sup |Δ_ε g - Δg| vs ε",
                "log2 ε",
                "log2 sup error",
                &[Series { label: "sup error", points: pts }],
            ),
        );
    }
    Ok(report)
}

fn run_fractional(cfg: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let mut report = ExperimentReport::new(cfg);
    let spec = cfg.domain_spec()?;
    let grid = build_grid(&spec, cfg.grid_n).map_err(anyhow::Error::from)?;
    let d = grid.dim();
    let alpha = cfg.alpha;
    let eps_list = default_eps(cfg, false);

    let constant = match cfg.constant {
        ConstantPolicy::Empirical => {
            let cal = calibrate_constant(
                &grid,
                alpha,
                CalibrationMode::Empirical,
                *eps_list.last().unwrap(),
            )
            .map_err(anyhow::Error::from)?;
            report.push(CheckResult::at_most("empirical_fit_residual", cal.residual, 0.05));
            cal.constant
        }
        _ => fractional_constant(d, alpha).map_err(anyhow::Error::from)?,
    };

    // compactly supported battery for the Riesz quadrature
    let g = TestFn::new(&grid, TestFnKind::StandardBump {
        center: vec![0.5; d],
        radius: 0.22,
        amplitude: 1.0,
    })
    .map_err(anyhow::Error::from)?;
    let margin = 2.0 * eps_list.iter().cloned().fold(0.0f64, f64::max) + 0.02;
    let points: Vec<Vec<f64>> = interior_points(&grid, margin, 30)
        .into_iter()
        .filter(|p| {
            // keep points where the bump actually has curvature
            let r = freefield::quad::dist(p, &vec![0.5; d]);
            r < 0.18
        })
        .take(10)
        .collect();

    let mut table = Csv::new(&["eps", "mean_rel_error"]);
    let mut rel_errors = Vec::new();
    for &eps in &eps_list {
        let opcfg = OperatorConfig::new(eps, constant, alpha, CenterRule::default())
            .map_err(anyhow::Error::from)?;
        let mut rel = 0.0;
        for z in &points {
            let exact = riesz_laplacian(&g, z, alpha, None).map_err(anyhow::Error::from)?;
            let approx = delta_eps_frac(&g, z, &opcfg).map_err(anyhow::Error::from)?;
            rel += ((approx - exact) / exact).abs();
        }
        rel /= points.len() as f64;
        rel_errors.push(rel);
        table.row(&[fmt(eps), fmt(rel)]);
    }
    report.table("delta_eps_frac_convergence", table.finish());

    let mut monotone = true;
    for w in rel_errors.windows(2) {
        monotone &= w[1] < w[0];
    }
    report.push(CheckResult::boolean("frac_rel_error_monotone_decreasing", monotone));
    report.push(CheckResult::at_most(
        "frac_rel_error_at_finest",
        *rel_errors.last().unwrap(),
        0.25,
    ));

    if cfg.plots {
        let pts: Vec<(f64, f64)> = eps_list
            .iter()
            .zip(&rel_errors)
            .map(|(e, r)| (e.log2(), r.log2()))
            .collect();
        report.figure(
            "delta_eps_frac_convergence",
            line_plot(
                "relative error of Δ_ε^α vs Riesz",
                "log2 ε",
                "log2 rel error",
                &[Series { label: "mean rel error", points: pts }],
            ),
        );
    }
    Ok(report)
}
