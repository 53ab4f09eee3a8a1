//! Poissonian ball-resampling dynamics.
//!
//! At rate τ = C ε^{-(2+d)} (or C ε^{-(2α+d)} in the fractional case) a
//! uniform center U in D_ε = {x : d(x, ∂D) > 2ε} is drawn and the field in
//! B(U, ε) is replaced by its (discrete or fractional) harmonic extension
//! plus a fresh zero-boundary sample; the path is piecewise constant
//! between events. With the lattice-exact decomposition each resampling
//! preserves the lattice GFF law exactly, so stationarity tests are pure
//! statistics.
//!
//! Center measure: the compensators computed here use the uniform law on
//! D_ε that actually drives the simulation, i.e. the normalization is
//! τ/|D_ε| rather than the boundary-blind τ/|D|.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{DomainKind, Grid};
use crate::error::{Error, Result};
use crate::fields::{BallDecomposition, Field, TestFn};
use crate::operators::sample_center;

#[derive(Debug, Clone)]
pub struct DynamicsConfig {
    pub eps: f64,
    /// Clock constant C; τ = C ε^{-(2+d)} classically, C ε^{-(2α+d)} for α < 1.
    pub clock_constant: f64,
    pub horizon: f64,
    pub alpha: f64,
    /// Record per-event observable rows (pre/post pairings, jumps,
    /// conditional variances). Without it only snapshots are kept.
    pub record_events: bool,
    /// Monte Carlo centers per inter-event interval for the martingale
    /// drift integral; 0 disables drift recording.
    pub drift_mc_centers: usize,
    /// Wall times at which observable values are recorded.
    pub snapshot_times: Vec<f64>,
    pub event_budget: usize,
    pub seed: u64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            eps: 0.1,
            clock_constant: 1.0,
            horizon: 1.0,
            alpha: 1.0,
            record_events: true,
            drift_mc_centers: 0,
            snapshot_times: Vec::new(),
            event_budget: 10_000_000,
            seed: 0,
        }
    }
}

impl DynamicsConfig {
    pub fn tau(&self, d: usize) -> f64 {
        let exp = if (self.alpha - 1.0).abs() < 1e-12 {
            2.0 + d as f64
        } else {
            2.0 * self.alpha + d as f64
        };
        self.clock_constant * self.eps.powf(-exp)
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.eps <= 0.0 || self.clock_constant <= 0.0 || self.horizon < 0.0 {
            return Err(Error::InvalidParameter("bad dynamics parameters".into()));
        }
        let max_collar = grid.collar.iter().cloned().fold(0.0f64, f64::max);
        if max_collar <= 2.0 * self.eps {
            return Err(Error::DomainViolation("D_ε is empty at this ε".into()));
        }
        let expected = self.tau(grid.dim()) * self.horizon;
        if expected > self.event_budget as f64 {
            return Err(Error::InvalidParameter(format!(
                "expected event count {expected:.2e} exceeds the budget {}",
                self.event_budget
            )));
        }
        Ok(())
    }
}

/// Lebesgue measure of D_ε for the supported geometries.
pub fn collar_volume(grid: &Grid, eps: f64) -> f64 {
    let spec = &grid.spec;
    let margin = 2.0 * eps;
    match spec.kind {
        DomainKind::Rectangle => spec
            .extent
            .iter()
            .map(|l| (l - 2.0 * margin).max(0.0))
            .product(),
        DomainKind::Ball => {
            let r = (spec.radius() - margin).max(0.0);
            crate::quad::unit_ball_volume(spec.dim) * r.powi(spec.dim as i32)
        }
    }
}

/// Per-event bookkeeping for one trajectory.
#[derive(Debug, Clone)]
pub struct EventRecord {
    pub time: f64,
    pub center: Vec<f64>,
    /// (h, f_i) just before the event.
    pub pre: Vec<f64>,
    /// (h, f_i) just after.
    pub post: Vec<f64>,
    /// (h̃, f_i): zero-boundary part of the pre-field in the event ball.
    pub tilde_pre: Vec<f64>,
    /// (ĥ, f_i): the fresh zero-boundary draw.
    pub tilde_post: Vec<f64>,
    /// Var((h̃, f_i) | φ), exact from the stencil covariance.
    pub cond_var: Vec<f64>,
}

/// Drift-rate record for one inter-event interval [t0, t1):
/// rate_i ≈ τ E_x[(φ^{B(x,ε)} - h, f_i)] with x uniform on D_ε.
#[derive(Debug, Clone)]
pub struct DriftInterval {
    pub t0: f64,
    pub t1: f64,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EventLog {
    pub eps: f64,
    pub alpha: f64,
    pub tau: f64,
    pub horizon: f64,
    pub seed: u64,
    /// (h_0, f_i).
    pub initial: Vec<f64>,
    pub events: Vec<EventRecord>,
    /// Present iff drift recording was enabled; covers every interval
    /// including the final partial one, so it has events.len() + 1 entries.
    pub intervals: Vec<DriftInterval>,
    /// Observable values at the requested wall times.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_field: Field,
    pub truncated: bool,
    pub num_observables: usize,
    /// Total number of resampling events (also when per-event records are
    /// not kept).
    pub num_events: usize,
}

impl EventLog {
    /// (h_t, f_i) at the end of the run.
    pub fn final_obs(&self) -> Vec<f64> {
        self.events
            .last()
            .map(|e| e.post.clone())
            .unwrap_or_else(|| self.initial.clone())
    }
}

/// Outcome of a single ball resampling.
pub struct ResampleOutcome {
    pub field: Field,
    pub stencil_nodes: Vec<usize>,
    pub harmonic: Vec<f64>,
    pub fluctuation: Vec<f64>,
}

/// Resample the field in B(center, ε): harmonic extension of the current
/// field plus an independent zero-boundary draw; nodes outside the ball
/// are untouched.
pub fn resample_ball(
    state: &Field,
    center: &[f64],
    eps: f64,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ResampleOutcome> {
    if state.grid.spec.boundary_distance(center) <= 2.0 * eps {
        return Err(Error::DomainViolation("resampling center too close to ∂D".into()));
    }
    let decomp = BallDecomposition::new(&state.grid, center, eps, alpha)?;
    let harmonic = decomp.harmonic_part(state)?;
    let fluctuation = decomp.sample_fluctuation(rng);
    let mut field = state.clone();
    for ((&i, u), z) in decomp.stencil.nodes.iter().zip(&harmonic).zip(&fluctuation) {
        field.values[i] = u + z;
    }
    Ok(ResampleOutcome {
        field,
        stencil_nodes: decomp.stencil.nodes.clone(),
        harmonic,
        fluctuation,
    })
}

/// Run the event-driven dynamics from `h0` (which stationarity tests assume
/// is a lattice GFF/FGF sample).
pub fn run_dynamics(h0: &Field, observables: &[TestFn], cfg: &DynamicsConfig) -> Result<EventLog> {
    let grid = h0.grid.clone();
    cfg.validate(&grid)?;
    let d = grid.dim();
    let tau = cfg.tau(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut field = h0.clone();
    let mut obs: Vec<f64> = observables
        .iter()
        .map(|f| crate::fields::pair(&field, f))
        .collect::<Result<_>>()?;
    let initial = obs.clone();

    let mut snapshot_times = cfg.snapshot_times.clone();
    snapshot_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut snap_idx = 0;
    let mut snapshots = Vec::new();

    let mut events = Vec::new();
    let mut intervals = Vec::new();
    let mut t = 0.0;
    let mut truncated = false;
    let mut num_events = 0usize;

    loop {
        let dt = if tau > 0.0 {
            -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / tau
        } else {
            f64::INFINITY
        };
        let t_next = t + dt;
        let seg_end = t_next.min(cfg.horizon);

        // snapshots falling inside the constant segment [t, seg_end)
        while snap_idx < snapshot_times.len() && snapshot_times[snap_idx] <= seg_end {
            if snapshot_times[snap_idx] <= cfg.horizon {
                snapshots.push((snapshot_times[snap_idx], obs.clone()));
            }
            snap_idx += 1;
        }

        if cfg.drift_mc_centers > 0 {
            let rates = drift_rates(&field, observables, cfg, tau, &mut rng)?;
            intervals.push(DriftInterval { t0: t, t1: seg_end, rates });
        }

        if t_next > cfg.horizon {
            break;
        }
        if num_events >= cfg.event_budget {
            truncated = true;
            break;
        }
        num_events += 1;

        // event at t_next
        let center = sample_center(&grid, cfg.eps, &mut rng)?;
        let decomp = BallDecomposition::new(&grid, &center, cfg.eps, cfg.alpha)?;
        let harmonic = decomp.harmonic_part(&field)?;
        let fluct = decomp.sample_fluctuation(&mut rng);

        let pre = obs.clone();
        let mut tilde_pre = vec![0.0; observables.len()];
        let mut tilde_post = vec![0.0; observables.len()];
        let mut delta = vec![0.0; observables.len()];
        for (k, f) in observables.iter().enumerate() {
            let mut tp = 0.0;
            let mut tq = 0.0;
            let mut dl = 0.0;
            for ((&i, u), z) in decomp.stencil.nodes.iter().zip(&harmonic).zip(&fluct) {
                let fw = f.values[i] * grid.weights[i];
                tp += (field.values[i] - u) * fw;
                tq += z * fw;
                dl += (u + z - field.values[i]) * fw;
            }
            tilde_pre[k] = tp;
            tilde_post[k] = tq;
            delta[k] = dl;
        }
        for ((&i, u), z) in decomp.stencil.nodes.iter().zip(&harmonic).zip(&fluct) {
            field.values[i] = u + z;
        }
        for (o, dl) in obs.iter_mut().zip(&delta) {
            *o += dl;
        }
        t = t_next;

        if cfg.record_events {
            let cond_var = observables.iter().map(|f| decomp.pairing_variance(f)).collect();
            events.push(EventRecord {
                time: t,
                center,
                pre,
                post: obs.clone(),
                tilde_pre,
                tilde_post,
                cond_var,
            });
        }
    }

    Ok(EventLog {
        eps: cfg.eps,
        alpha: cfg.alpha,
        tau,
        horizon: cfg.horizon,
        seed: cfg.seed,
        initial,
        events,
        intervals,
        snapshots,
        final_field: field,
        truncated,
        num_observables: observables.len(),
        num_events,
    })
}

/// Unbiased MC estimate of the drift rates τ E_x[(φ^{B(x,ε)} - h, f_i)].
fn drift_rates(
    field: &Field,
    observables: &[TestFn],
    cfg: &DynamicsConfig,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let grid = &field.grid;
    let mut acc = vec![0.0; observables.len()];
    for _ in 0..cfg.drift_mc_centers {
        let x = sample_center(grid, cfg.eps, rng)?;
        let decomp = BallDecomposition::new(grid, &x, cfg.eps, cfg.alpha)?;
        let ext = decomp.harmonic_part(field)?;
        for (k, f) in observables.iter().enumerate() {
            let mut v = 0.0;
            for (&i, u) in decomp.stencil.nodes.iter().zip(&ext) {
                v += (u - field.values[i]) * f.values[i] * grid.weights[i];
            }
            acc[k] += v;
        }
    }
    Ok(acc
        .into_iter()
        .map(|a| tau * a / cfg.drift_mc_centers as f64)
        .collect())
}

/// Martingale path M_t = (h_t, f) - ∫_0^t (drift rate) ds sampled at the
/// event times (and the horizon). Needs drift recording.
pub fn martingale_path(log: &EventLog, obs: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if log.intervals.is_empty() {
        return Err(Error::MissingRecords(
            "martingale path needs drift-rate records (drift_mc_centers > 0)".into(),
        ));
    }
    if obs >= log.num_observables {
        return Err(Error::InvalidParameter("observable index out of range".into()));
    }
    let mut times = vec![0.0];
    let mut values = vec![log.initial[obs]];
    let mut drift_acc = 0.0;
    for (k, ev) in log.events.iter().enumerate() {
        let iv = &log.intervals[k];
        drift_acc += iv.rates[obs] * (iv.t1 - iv.t0);
        times.push(ev.time);
        values.push(ev.post[obs] - drift_acc);
    }
    // final partial interval up to the horizon
    if log.intervals.len() == log.events.len() + 1 {
        let iv = log.intervals.last().unwrap();
        drift_acc += iv.rates[obs] * (iv.t1 - iv.t0);
        let last_obs = log.final_obs()[obs];
        times.push(log.horizon);
        values.push(last_obs - drift_acc);
    }
    Ok((times, values))
}

/// Realized quadratic variation and its compensator estimate.
#[derive(Debug, Clone)]
pub struct QvPath {
    pub times: Vec<f64>,
    /// Σ_{events ≤ t} (ΔM)².
    pub realized: Vec<f64>,
    /// (τ/|D_ε|) ∫∫ [E((h̃,f)²|φ) + (h̃,f)²], MC-estimated per interval from
    /// the event's own uniform center.
    pub compensator: Vec<f64>,
    pub max_jump_sq: f64,
}

pub fn quadratic_variation_path(log: &EventLog, obs: usize) -> Result<QvPath> {
    if obs >= log.num_observables {
        return Err(Error::InvalidParameter("observable index out of range".into()));
    }
    if log.events.is_empty() && log.horizon > 0.0 && log.tau > 0.0 {
        // legitimate: no events happened
    }
    let mut times = vec![0.0];
    let mut realized = vec![0.0];
    let mut compensator = vec![0.0];
    let mut acc_r = 0.0;
    let mut acc_c = 0.0;
    let mut prev_t = 0.0;
    let mut max_jump_sq = 0.0f64;
    for ev in &log.events {
        let jump = ev.tilde_post[obs] - ev.tilde_pre[obs];
        acc_r += jump * jump;
        max_jump_sq = max_jump_sq.max(jump * jump);
        acc_c += log.tau * (ev.time - prev_t) * (ev.cond_var[obs] + ev.tilde_pre[obs].powi(2));
        prev_t = ev.time;
        times.push(ev.time);
        realized.push(acc_r);
        compensator.push(acc_c);
    }
    Ok(QvPath { times, realized, compensator, max_jump_sq })
}

/// Deterministic quadrature of the stationary QV rate
/// 2 (τ/|D_ε|) ∫_{D_ε} Var((h̃^{B(x,ε)}, f)) dx over a midpoint center
/// lattice. This is the exact expected realized-QV slope of the lattice
/// dynamics (the spec's f·G_B·f quadrature with the self-consistent,
/// i.e. discrete, ball Green function).
pub fn qv_rate_oracle(
    grid: &Arc<Grid>,
    eps: f64,
    tau: f64,
    f: &TestFn,
    resolution: usize,
) -> Result<f64> {
    let d = grid.dim();
    let (lo, hi) = grid.spec.bounding_box();
    let margin = 2.0 * eps;
    let steps = resolution.max(8);
    let mut acc = 0.0;
    let mut count = 0usize;
    let mut idx = vec![0usize; d];
    'outer: loop {
        let mut x = vec![0.0; d];
        for a in 0..d {
            let span = hi[a] - lo[a] - 2.0 * margin;
            x[a] = lo[a] + margin + span * (idx[a] as f64 + 0.5) / steps as f64;
        }
        if grid.spec.boundary_distance(&x) > margin {
            let decomp = BallDecomposition::new(grid, &x, eps, 1.0)?;
            acc += decomp.pairing_variance(f);
            count += 1;
        }
        for a in 0..d {
            idx[a] += 1;
            if idx[a] < steps {
                continue 'outer;
            }
            idx[a] = 0;
        }
        break;
    }
    if count == 0 {
        return Err(Error::DomainViolation("no centers in D_ε".into()));
    }
    // midpoint average over D_ε equals (1/|D_ε|) ∫ to quadrature accuracy
    Ok(2.0 * tau * acc / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};
    use crate::fields::{pair, sample_lattice_gff, TestFnKind};
    use crate::operators::calibrated_constant;
    use rand::SeedableRng;

    fn grid64() -> Arc<Grid> {
        build_grid(&DomainSpec::unit_square(), 64).unwrap()
    }

    fn bump(grid: &Arc<Grid>, c: [f64; 2], w: f64) -> TestFn {
        TestFn::new(grid, TestFnKind::GaussianBump {
            center: c.to_vec(),
            width: w,
            amplitude: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn resample_touches_only_the_ball() {
        let grid = grid64();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = sample_lattice_gff(&grid, &mut rng).unwrap();
        let out = resample_ball(&h, &[0.5, 0.5], 0.1, 1.0, &mut rng).unwrap();
        let mut inside = vec![false; grid.num_interior()];
        for &i in &out.stencil_nodes {
            inside[i] = true;
        }
        for i in 0..grid.num_interior() {
            if !inside[i] {
                assert_eq!(out.field.values[i], h.values[i], "node {i} changed");
            }
        }
        // with the draw forced to zero the interior is exactly the extension
        for (&i, u) in out.stencil_nodes.iter().zip(&out.harmonic) {
            let reconstructed = out.field.values[i] - out.fluctuation[out
                .stencil_nodes
                .iter()
                .position(|&j| j == i)
                .unwrap()];
            assert!((reconstructed - u).abs() < 1e-12);
        }
        // too close to the boundary
        assert!(resample_ball(&h, &[0.05, 0.5], 0.1, 1.0, &mut rng).is_err());
    }

    #[test]
    fn resample_conditional_mean_is_harmonic_extension() {
        let grid = grid64();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = sample_lattice_gff(&grid, &mut rng).unwrap();
        let center = [0.45, 0.55];
        let eps = 0.1;
        let decomp = BallDecomposition::new(&grid, &center, eps, 1.0).unwrap();
        let ext = decomp.harmonic_part(&h).unwrap();
        let m = decomp.len();
        let n = 1000;
        let mut mean = vec![0.0; m];
        let mut var = vec![0.0; m];
        for _ in 0..n {
            let out = resample_ball(&h, &center, eps, 1.0, &mut rng).unwrap();
            for (k, &i) in out.stencil_nodes.iter().enumerate() {
                mean[k] += out.field.values[i];
                var[k] += (out.field.values[i] - ext[k]).powi(2);
            }
        }
        let cov = decomp.covariance();
        for k in 0..m {
            mean[k] /= n as f64;
            var[k] /= n as f64;
            let sigma = (cov[(k, k)] / n as f64).sqrt();
            assert!(
                (mean[k] - ext[k]).abs() <= 3.5 * sigma,
                "node {k}: {} vs {} (σ = {sigma})",
                mean[k],
                ext[k]
            );
        }
    }

    #[test]
    fn zero_horizon_yields_initial_snapshot_only() {
        let grid = grid64();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = sample_lattice_gff(&grid, &mut rng).unwrap();
        let f = bump(&grid, [0.5, 0.5], 0.12);
        let cfg = DynamicsConfig {
            eps: 0.1,
            clock_constant: calibrated_constant(2, 1.0),
            horizon: 0.0,
            snapshot_times: vec![0.0],
            seed: 9,
            ..Default::default()
        };
        let log = run_dynamics(&h, &[f.clone()], &cfg).unwrap();
        assert!(log.events.is_empty());
        assert_eq!(log.snapshots.len(), 1);
        assert_eq!(log.snapshots[0].1[0], pair(&h, &f).unwrap());
        assert_eq!(log.final_obs(), log.initial);
    }

    #[test]
    fn event_count_matches_poisson_mean() {
        let grid = build_grid(&DomainSpec::unit_square(), 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = sample_lattice_gff(&grid, &mut rng).unwrap();
        let runs = 400;
        let cfg0 = DynamicsConfig {
            eps: 0.12,
            clock_constant: 1.0,
            horizon: 0.002,
            record_events: false,
            ..Default::default()
        };
        let tau = cfg0.tau(2);
        let expect = tau * cfg0.horizon;
        let mut total = 0usize;
        for k in 0..runs {
            let cfg = DynamicsConfig { seed: 1000 + k as u64, ..cfg0.clone() };
            let log = run_dynamics(&h, &[], &cfg).unwrap();
            total += log.num_events;
        }
        let mean = total as f64 / runs as f64;
        let sigma = (expect / runs as f64).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * sigma,
            "mean events {mean} vs τT = {expect}"
        );
    }

    #[test]
    fn inter_arrival_times_are_exponential() {
        // One long run: the fixed-horizon censoring bias on complete gaps
        // is O(1/N) and invisible at this scale.
        let grid = build_grid(&DomainSpec::unit_square(), 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let h = sample_lattice_gff(&grid, &mut rng).unwrap();
        let cfg = DynamicsConfig {
            eps: 0.12,
            clock_constant: 1.0,
            horizon: 2.0,
            record_events: true,
            seed: 21,
            ..Default::default()
        };
        let tau = cfg.tau(2);
        let log = run_dynamics(&h, &[], &cfg).unwrap();
        assert!(log.events.len() > 5000);
        let mut gaps = Vec::with_capacity(log.events.len());
        let mut prev = 0.0;
        for e in &log.events {
            gaps.push(e.time - prev);
            prev = e.time;
        }
        let v = crate::stats::one_sample_test(&gaps, |x| 1.0 - (-tau * x).exp(), 0.01).unwrap();
        assert!(v.p_value > 0.01, "exponential KS p = {}", v.p_value);
    }

    #[test]
    fn martingale_without_events_is_flat() {
        let grid = grid64();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = sample_lattice_gff(&grid, &mut rng).unwrap();
        let f = bump(&grid, [0.5, 0.5], 0.12);
        let cfg = DynamicsConfig {
            eps: 0.1,
            clock_constant: 1e-9, // essentially no events
            horizon: 0.5,
            drift_mc_centers: 16,
            seed: 11,
            ..Default::default()
        };
        let log = run_dynamics(&h, &[f.clone()], &cfg).unwrap();
        assert!(log.events.is_empty());
        let (times, m) = martingale_path(&log, 0).unwrap();
        assert_eq!(times.len(), 2);
        // drift of one interval only; with τ ≈ 0 the correction is ≈ 0
        assert!((m[1] - m[0]).abs() < 1e-6 * (1.0 + m[0].abs()));
    }

    #[test]
    fn martingale_mean_is_conserved() {
        let grid = build_grid(&DomainSpec::unit_square(), 48).unwrap();
        let f = bump(&grid, [0.5, 0.5], 0.15);
        let replicas = 160;
        let mut finals = Vec::new();
        let mut initials = Vec::new();
        for k in 0..replicas {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            rng.set_stream(k as u64);
            let h = sample_lattice_gff(&grid, &mut rng).unwrap();
            let cfg = DynamicsConfig {
                eps: 0.1,
                clock_constant: calibrated_constant(2, 1.0),
                horizon: 30.0 / (calibrated_constant(2, 1.0) * 1e4),
                drift_mc_centers: 16,
                seed: 5000 + k as u64,
                ..Default::default()
            };
            let log = run_dynamics(&h, &[f.clone()], &cfg).unwrap();
            let (_, m) = martingale_path(&log, 0).unwrap();
            initials.push(m[0]);
            finals.push(*m.last().unwrap());
        }
        let n = replicas as f64;
        let dm: Vec<f64> = finals.iter().zip(&initials).map(|(a, b)| a - b).collect();
        let mean = dm.iter().sum::<f64>() / n;
        let var = dm.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let sigma = (var / n).sqrt();
        assert!(
            mean.abs() <= 3.0 * sigma.max(1e-12),
            "E[M_T - M_0] = {mean} (3σ = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn qv_paths_monotone_and_compensated() {
        let grid = grid64();
        let f = bump(&grid, [0.5, 0.5], 0.15);
        let replicas = 60;
        let mut total_r = 0.0;
        let mut total_c = 0.0;
        for k in 0..replicas {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            rng.set_stream(k);
            let h = sample_lattice_gff(&grid, &mut rng).unwrap();
            let cfg = DynamicsConfig {
                eps: 0.1,
                clock_constant: calibrated_constant(2, 1.0),
                horizon: 50.0 / (calibrated_constant(2, 1.0) * 1e4),
                seed: 400 + k,
                ..Default::default()
            };
            let log = run_dynamics(&h, &[f.clone()], &cfg).unwrap();
            let qv = quadratic_variation_path(&log, 0).unwrap();
            for w in qv.realized.windows(2) {
                assert!(w[1] >= w[0]);
            }
            total_r += qv.realized.last().copied().unwrap_or(0.0);
            total_c += qv.compensator.last().copied().unwrap_or(0.0);
        }
        // realized and compensator agree in the mean (same martingale)
        let rel = (total_r - total_c).abs() / total_c;
        assert!(rel < 0.25, "realized {total_r} vs compensator {total_c}");
    }

    #[test]
    fn budget_truncation_flag() {
        let grid = build_grid(&DomainSpec::unit_square(), 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = sample_lattice_gff(&grid, &mut rng).unwrap();
        let cfg = DynamicsConfig {
            eps: 0.12,
            clock_constant: 1.0,
            horizon: 0.01,
            event_budget: 3,
            record_events: false,
            seed: 8,
            ..Default::default()
        };
        // expected events ~ tau*T = 1/0.12^4*0.01 ≈ 48 > 3: validate refuses
        assert!(cfg.validate(&grid).is_err());
        // with a budget just above the validation bound we still truncate
        // when the Poisson count overshoots
        let cfg = DynamicsConfig { event_budget: 50, ..cfg };
        let log = run_dynamics(&h, &[], &cfg).unwrap();
        assert!(log.truncated || log.num_events <= 50);
    }

    #[test]
    fn mtd_orthogonality_on_lattice() {
        // Cov((h̃, f), (φ, g)) = 0: the fluctuation is independent of the
        // outside field, hence of the harmonic part.
        let grid = grid64();
        let f = bump(&grid, [0.5, 0.5], 0.08);
        let g = bump(&grid, [0.52, 0.47], 0.1);
        let center = [0.5, 0.5];
        let eps = 0.11;
        let decomp = BallDecomposition::new(&grid, &center, eps, 1.0).unwrap();
        let n = 4000;
        let (mut s_tf, mut s_pg, mut s_tf2, mut s_pg2, mut s_prod) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(313);
            rng.set_stream(k);
            let h = sample_lattice_gff(&grid, &mut rng).unwrap();
            let ext = decomp.harmonic_part(&h).unwrap();
            let mut tf = 0.0; // (h̃, f)
            let mut pg = 0.0; // (φ, g) restricted to the ball part
            for (&i, u) in decomp.stencil.nodes.iter().zip(&ext) {
                tf += (h.values[i] - u) * f.values[i] * grid.weights[i];
                pg += u * g.values[i] * grid.weights[i];
            }
            s_tf += tf;
            s_pg += pg;
            s_tf2 += tf * tf;
            s_pg2 += pg * pg;
            s_prod += tf * pg;
        }
        let nf = n as f64;
        let cov = s_prod / nf - (s_tf / nf) * (s_pg / nf);
        let var_tf = s_tf2 / nf - (s_tf / nf).powi(2);
        let var_pg = s_pg2 / nf - (s_pg / nf).powi(2);
        let sigma = (var_tf * var_pg / nf).sqrt();
        assert!(
            cov.abs() < 3.5 * sigma,
            "MTD orthogonality violated: cov = {cov} (3.5σ = {})",
            3.5 * sigma
        );
    }
}
