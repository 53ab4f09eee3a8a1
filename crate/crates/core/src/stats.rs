//! Statistical verdicts: two-sample tests, moment/Wick reports,
//! boundary-decay checks and trend fits. Everything is seeded, so rerunning
//! with identical inputs reproduces identical reports.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::fields::{pair, Field, TestFn, TestFnKind};

/// Scalar observations with a provenance tag.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub provenance: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::DegenerateInput("sample set needs at least 2 values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("sample set contains non-finite values".into()));
        }
        Ok(SampleSet { values, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Outcome of a hypothesis test against a configured threshold.
#[derive(Debug, Clone, Serialize)]
pub struct TestVerdict {
    pub statistic: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Asymptotic Kolmogorov distribution tail Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_statistic(xs: &[f64], ys: &[f64]) -> f64 {
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let t = xs[i].min(ys[j]);
        while i < n && xs[i] <= t {
            i += 1;
        }
        while j < m && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// (Stephens' small-sample correction on the effective size).
pub fn two_sample_test(a: &SampleSet, b: &SampleSet, threshold: f64) -> Result<TestVerdict> {
    if a.len() < 50 || b.len() < 50 {
        return Err(Error::DegenerateInput(format!(
            "KS test needs at least 50 samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = ks_statistic(&a.values, &b.values);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p = kolmogorov_tail(lambda);
    Ok(TestVerdict { statistic: d, p_value: p, threshold, pass: p > threshold })
}

/// One-sample KS test against an analytic CDF (used to check event-time
/// exponentials and similar).
pub fn one_sample_test(xs: &[f64], cdf: impl Fn(f64) -> f64, threshold: f64) -> Result<TestVerdict> {
    if xs.len() < 50 {
        return Err(Error::DegenerateInput("one-sample KS needs at least 50 samples".into()));
    }
    let mut s = xs.to_vec();
    s.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let c = cdf(*x);
        d = d.max((c - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - c).abs());
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let p = kolmogorov_tail(lambda);
    Ok(TestVerdict { statistic: d, p_value: p, threshold, pass: p > threshold })
}

/// Holm step-down correction: returns the family verdict (no rejections)
/// and the per-test rejection flags, at family level `alpha`.
pub fn holm_family(p_values: &[f64], alpha: f64) -> (bool, Vec<bool>) {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());
    let mut rejected = vec![false; m];
    for (rank, &idx) in order.iter().enumerate() {
        let level = alpha / (m - rank) as f64;
        if p_values[idx] < level {
            rejected[idx] = true;
        } else {
            break; // step-down stops at the first acceptance
        }
    }
    (!rejected.iter().any(|r| *r), rejected)
}

/// Moments with bootstrap confidence intervals.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub fourth_moment: f64,
    /// m4 / (3 m2²); `None` when the sample is degenerate.
    pub wick_ratio: Option<f64>,
    pub wick_ci: Option<(f64, f64)>,
    pub variance_ci: (f64, f64),
    pub degenerate: bool,
    pub seed: u64,
}

/// Central moments and the Wick ratio, with seeded bootstrap CIs
/// (10³ resamples, 2.5%/97.5% percentiles).
pub fn moment_report(s: &SampleSet, seed: u64) -> Result<MomentReport> {
    let n = s.len();
    if n < 1000 {
        return Err(Error::DegenerateInput(format!(
            "moment report needs at least 1000 samples, got {n}"
        )));
    }
    let mean = s.values.iter().sum::<f64>() / n as f64;
    let m2 = s.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let m4 = s.values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n as f64;
    let degenerate = m2 <= 1e-300;
    let wick = (!degenerate).then(|| m4 / (3.0 * m2 * m2));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = 1000;
    let mut boot_var = Vec::with_capacity(b);
    let mut boot_wick = Vec::with_capacity(b);
    if !degenerate {
        let mut resample = vec![0.0; n];
        for _ in 0..b {
            let mut bm = 0.0;
            for slot in resample.iter_mut() {
                *slot = s.values[rng.gen_range(0..n)];
                bm += *slot;
            }
            bm /= n as f64;
            let mut v2 = 0.0;
            let mut c4 = 0.0;
            for v in &resample {
                let c = v - bm;
                v2 += c * c;
                c4 += c * c * c * c;
            }
            v2 /= n as f64;
            c4 /= n as f64;
            boot_var.push(v2);
            if v2 > 0.0 {
                boot_wick.push(c4 / (3.0 * v2 * v2));
            }
        }
    }
    let pct = |vals: &mut Vec<f64>, q: f64| -> f64 {
        if vals.is_empty() {
            return f64::NAN;
        }
        vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((vals.len() as f64 - 1.0) * q).round() as usize;
        vals[idx]
    };
    let variance_ci = if degenerate {
        (0.0, 0.0)
    } else {
        (pct(&mut boot_var, 0.025), pct(&mut boot_var, 0.975))
    };
    let wick_ci = (!degenerate && !boot_wick.is_empty())
        .then(|| (pct(&mut boot_wick, 0.025), pct(&mut boot_wick, 0.975)));

    Ok(MomentReport {
        n,
        mean,
        variance: m2,
        fourth_moment: m4,
        wick_ratio: wick,
        wick_ci,
        variance_ci,
        degenerate,
        seed,
    })
}

/// One scale of the boundary-decay series.
#[derive(Debug, Clone, Serialize)]
pub struct DecayPoint {
    pub scale: f64,
    pub estimate: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecaySeries {
    pub points: Vec<DecayPoint>,
    pub strictly_decreasing: bool,
    /// Adjacent decrements separated by more than 3σ.
    pub separated: Vec<bool>,
    pub pass: bool,
}

/// Monte Carlo series E[(h, g_k)²] for unit-mass collar profiles g_k
/// centred at boundary distance r_k with width r_k/2. The verdict passes
/// iff the point estimates decrease strictly in k.
pub fn boundary_decay_series(
    grid: &Arc<Grid>,
    scales: &[f64],
    replicas: usize,
    seed: u64,
    mut sampler: impl FnMut(&mut ChaCha8Rng) -> Result<Field>,
) -> Result<DecaySeries> {
    if scales.len() < 2 {
        return Err(Error::DegenerateInput("need at least two collar scales".into()));
    }
    let profiles: Result<Vec<TestFn>> = scales
        .iter()
        .map(|&r| TestFn::new(grid, TestFnKind::CollarRing { distance: r }))
        .collect();
    let profiles = profiles?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc2 = vec![0.0; scales.len()];
    let mut acc4 = vec![0.0; scales.len()];
    for _ in 0..replicas {
        let h = sampler(&mut rng)?;
        for (k, g) in profiles.iter().enumerate() {
            let v = pair(&h, g)?;
            acc2[k] += v * v;
            acc4[k] += v * v * v * v;
        }
    }
    let mut points = Vec::with_capacity(scales.len());
    for k in 0..scales.len() {
        let est = acc2[k] / replicas as f64;
        let var_of_sq = (acc4[k] / replicas as f64 - est * est).max(0.0);
        points.push(DecayPoint {
            scale: scales[k],
            estimate: est,
            std_err: (var_of_sq / replicas as f64).sqrt(),
        });
    }
    let mut strictly_decreasing = true;
    let mut separated = Vec::new();
    for w in points.windows(2) {
        let diff = w[0].estimate - w[1].estimate;
        let sd = (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt();
        strictly_decreasing &= diff > 0.0;
        separated.push(diff > 3.0 * sd);
    }
    Ok(DecaySeries { pass: strictly_decreasing, points, strictly_decreasing, separated })
}

/// Weighted least-squares line fit.
#[derive(Debug, Clone, Serialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_std_err: f64,
    /// ±2 SE interval.
    pub slope_ci: (f64, f64),
}

pub fn trend_fit(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<TrendFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::DegenerateInput("trend fit needs at least 3 (x, y) points".into()));
    }
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n || w.iter().any(|v| *v <= 0.0) {
                return Err(Error::DegenerateInput("bad weights".into()));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let mx: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my: f64 = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - mx) * (a - mx)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateInput("degenerate abscissae".into()));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((a, c), b)| b * (a - mx) * (c - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for ((a, c), b) in x.iter().zip(y).zip(&w) {
        ss_res += b * (c - intercept - slope * a).powi(2);
        ss_tot += b * (c - my).powi(2);
    }
    let r_squared = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let dof = (n as f64 - 2.0).max(1.0);
    let slope_std_err = (ss_res / dof / sxx).sqrt();
    Ok(TrendFit {
        slope,
        intercept,
        r_squared,
        slope_std_err,
        slope_ci: (slope - 2.0 * slope_std_err, slope + 2.0 * slope_std_err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};
    use crate::fields::{sample_lattice_gff, sample_white_noise, Field};
    use approx::assert_relative_eq;
    use rand_distr::StandardNormal;

    #[test]
    fn ks_identical_sets_pass() {
        let v: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let a = SampleSet::new(v.clone(), "a").unwrap();
        let b = SampleSet::new(v, "b").unwrap();
        let t = two_sample_test(&a, &b, 0.01).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!(t.p_value > 0.99 && t.pass);
    }

    #[test]
    fn ks_calibration_under_null() {
        let mut pass = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let ys: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let t = two_sample_test(
                &SampleSet::new(xs, "x").unwrap(),
                &SampleSet::new(ys, "y").unwrap(),
                0.01,
            )
            .unwrap();
            if t.pass {
                pass += 1;
            }
        }
        assert!(pass >= 98, "only {pass}/100 null cases passed at p > 0.01");
    }

    #[test]
    fn ks_power_against_mean_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let ys: Vec<f64> = (0..10_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal) + 0.5)
            .collect();
        let t = two_sample_test(
            &SampleSet::new(xs, "x").unwrap(),
            &SampleSet::new(ys, "y").unwrap(),
            0.01,
        )
        .unwrap();
        assert!(t.p_value < 1e-6 && !t.pass);
    }

    #[test]
    fn ks_rejects_undersized() {
        let a = SampleSet::new(vec![0.0; 10], "a").unwrap();
        let b = SampleSet::new(vec![0.0; 100], "b").unwrap();
        assert!(two_sample_test(&a, &b, 0.01).is_err());
    }

    #[test]
    fn moment_report_on_gaussians_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let rep = moment_report(&SampleSet::new(xs, "normal").unwrap(), 7).unwrap();
        let (lo, hi) = rep.wick_ci.unwrap();
        assert!(lo <= 1.0 && 1.0 <= hi, "Wick CI ({lo}, {hi})");
        assert!((rep.wick_ratio.unwrap() - 1.0).abs() < 0.05);

        let cst = SampleSet::new(vec![3.5; 2000], "const").unwrap();
        let rep = moment_report(&cst, 7).unwrap();
        assert!(rep.degenerate);
        assert!(rep.wick_ratio.is_none());
        assert_eq!(rep.variance, 0.0);
    }

    #[test]
    fn holm_family_logic() {
        let (pass, rej) = holm_family(&[0.5, 0.2, 0.9], 0.01);
        assert!(pass && rej.iter().all(|r| !r));
        let (pass, rej) = holm_family(&[1e-9, 0.2, 0.9], 0.01);
        assert!(!pass);
        assert_eq!(rej, vec![true, false, false]);
    }

    #[test]
    fn trend_fit_exact_line_and_degenerate() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = trend_fit(&x, &y, None).unwrap();
        assert_relative_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(trend_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], None).is_err());

        // constant series: slope 0 within CI
        let y = [2.0, 2.1, 1.9, 2.0];
        let fit = trend_fit(&x, &y, None).unwrap();
        assert!(fit.slope_ci.0 <= 0.0 && 0.0 <= fit.slope_ci.1);
    }

    #[test]
    fn boundary_decay_gff_vs_white_noise() {
        let grid = build_grid(&DomainSpec::unit_square(), 96).unwrap();
        let scales = [0.25, 0.125, 0.0625, 0.03125];
        let gff = boundary_decay_series(&grid, &scales, 600, 3, |rng| {
            sample_lattice_gff(&grid, rng)
        })
        .unwrap();
        assert!(gff.pass, "GFF series should decrease: {:?}", gff.points);

        let wn = boundary_decay_series(&grid, &scales, 300, 4, |rng| {
            Ok(sample_white_noise(&grid, rng))
        })
        .unwrap();
        assert!(!wn.pass, "white-noise control must fail: {:?}", wn.points);

        // deterministic zero field → all zeros
        let z = boundary_decay_series(&grid, &scales, 10, 5, |_| Ok(Field::zeros(&grid)))
            .unwrap();
        assert!(z.points.iter().all(|p| p.estimate == 0.0));
    }
}
