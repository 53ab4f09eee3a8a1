//! Spectral solver for the additive (fractional) stochastic heat equation.
//!
//! In the eigenbasis the solution is a family of Ornstein–Uhlenbeck modes
//! `dA_n = -μ_n A_n dt + dB^n` with mode noises of covariation
//! `⟨B^n, B^m⟩_t = t ⟨a f_n | a f_m⟩`. Transitions are sampled exactly from
//! the integrated covariance, so no time-discretization error enters any
//! test: for a dt-step,
//! `A ← e^{-μ dt} A + G`, `Cov(G_n, G_m) = Σ_{nm} (1 - e^{-(μ_n+μ_m) dt})/(μ_n+μ_m)`,
//! which diagonalizes to `a²(1-e^{-2μ_n dt})/(2μ_n)` for constant a.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{DomainKind, Grid, Mode, SpectralBasis};
use crate::error::{Error, Result};
use crate::fields::{Field, LawTag, TestFn};

/// Mode-noise covariance Σ_{nm} = ⟨a f_n | a f_m⟩ and a symmetric factor.
#[derive(Debug, Clone)]
pub struct NoiseFactor {
    pub sigma: DMatrix<f64>,
    pub factor: DMatrix<f64>,
    /// Set when a is constant: Σ = a² I and everything diagonalizes.
    pub constant_a: Option<f64>,
}

/// Σ from grid samples of the weight a(x), by the basis inner product.
pub fn mode_noise_factor(basis: &SpectralBasis, a: &[f64]) -> Result<NoiseFactor> {
    let k = basis.grid.num_interior();
    if a.len() != k {
        return Err(Error::GridMismatch);
    }
    if a.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidParameter("a(x) must be positive and bounded".into()));
    }
    let a0 = a[0];
    let constant_a = a.iter().all(|v| (v - a0).abs() <= 1e-12 * a0.abs()).then_some(a0);
    let m = basis.len();
    let a2: Vec<f64> = a.iter().map(|v| v * v).collect();
    let mut sigma = DMatrix::zeros(m, m);
    for i in 0..m {
        let fi = basis.mode_values(i);
        for j in i..m {
            let fj = basis.mode_values(j);
            let mut acc = 0.0;
            for (((x, y), w), aa) in fi.iter().zip(fj).zip(&basis.inner_weights).zip(&a2) {
                acc += x * y * w * aa;
            }
            sigma[(i, j)] = acc;
            sigma[(j, i)] = acc;
        }
    }
    let factor = factor_spd(sigma.clone())?;
    Ok(NoiseFactor { sigma, factor, constant_a })
}

fn factor_spd(mut m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let jitter = 1e-12 * m.trace().abs().max(1e-300) / n as f64;
    for i in 0..n {
        m[(i, i)] += jitter;
    }
    match nalgebra::Cholesky::new(m.clone()) {
        Some(c) => Ok(c.unpack()),
        None => {
            let eig = nalgebra::SymmetricEigen::new(m);
            let min = eig.eigenvalues.min();
            let max = eig.eigenvalues.max();
            if min < -1e-10 * max.abs() {
                return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
            }
            let mut q = eig.eigenvectors;
            for (j, mut col) in q.column_iter_mut().enumerate() {
                col *= eig.eigenvalues[j].max(0.0).sqrt();
            }
            Ok(q)
        }
    }
}

/// Spectral state of the SHE solution: coefficients of the eigenmodes.
#[derive(Clone)]
pub struct ModeState {
    pub basis: Arc<SpectralBasis>,
    pub noise: Arc<NoiseFactor>,
    pub coeffs: Vec<f64>,
    pub time: f64,
}

impl ModeState {
    pub fn zero(basis: &Arc<SpectralBasis>, noise: &Arc<NoiseFactor>) -> ModeState {
        ModeState {
            basis: basis.clone(),
            noise: noise.clone(),
            coeffs: vec![0.0; basis.len()],
            time: 0.0,
        }
    }

    /// Reconstruct the lattice field Σ A_n f_n.
    pub fn to_field(&self) -> Field {
        let k = self.basis.grid.num_interior();
        let mut values = vec![0.0; k];
        for m in 0..self.basis.len() {
            let a = self.coeffs[m];
            if a == 0.0 {
                continue;
            }
            for (v, fm) in values.iter_mut().zip(self.basis.mode_values(m)) {
                *v += a * fm;
            }
        }
        Field { grid: self.basis.grid.clone(), values, law: LawTag::SheState, seed: 0 }
    }
}

/// One exact Ornstein–Uhlenbeck transition of length dt.
pub fn she_step(state: &mut ModeState, dt: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let m = state.basis.len();
    match state.noise.constant_a {
        Some(a) => {
            for n in 0..m {
                let mu = state.basis.eigenvalue(n);
                let decay = (-mu * dt).exp();
                let var = a * a * (1.0 - decay * decay) / (2.0 * mu);
                let xi: f64 = rng.sample(StandardNormal);
                state.coeffs[n] = decay * state.coeffs[n] + var.sqrt() * xi;
            }
        }
        None => {
            // V(dt)_{nm} = Σ_{nm} (1 - e^{-(μ_n+μ_m) dt}) / (μ_n + μ_m)
            let mut v = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    let s = state.basis.eigenvalue(i) + state.basis.eigenvalue(j);
                    v[(i, j)] = state.noise.sigma[(i, j)] * (1.0 - (-s * dt).exp()) / s;
                }
            }
            let l = factor_spd(v)?;
            let xi: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            for n in 0..m {
                let mu = state.basis.eigenvalue(n);
                let mut g = 0.0;
                for (j, x) in xi.iter().enumerate() {
                    g += l[(n, j)] * x;
                }
                state.coeffs[n] = (-mu * dt).exp() * state.coeffs[n] + g;
            }
        }
    }
    state.time += dt;
    Ok(())
}

/// Draw from the stationary law. Constant a diagonalizes to independent
/// N(0, a²/(2μ_n)); non-constant a needs the Lyapunov solve
/// P_{nm} = Σ_{nm}/(μ_n + μ_m), which must be requested explicitly.
pub fn she_stationary_sample(
    basis: &Arc<SpectralBasis>,
    noise: &Arc<NoiseFactor>,
    lyapunov: bool,
    rng: &mut ChaCha8Rng,
) -> Result<ModeState> {
    let m = basis.len();
    let coeffs = match noise.constant_a {
        Some(a) => (0..m)
            .map(|n| {
                let xi: f64 = rng.sample(StandardNormal);
                xi * (a * a / (2.0 * basis.eigenvalue(n))).sqrt()
            })
            .collect(),
        None => {
            if !lyapunov {
                return Err(Error::UnsupportedConfiguration(
                    "non-constant a needs the Lyapunov stationary mode".into(),
                ));
            }
            let mut p = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    p[(i, j)] =
                        noise.sigma[(i, j)] / (basis.eigenvalue(i) + basis.eigenvalue(j));
                }
            }
            let l = factor_spd(p)?;
            let xi: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            (0..m)
                .map(|n| {
                    let mut acc = 0.0;
                    for (j, x) in xi.iter().enumerate() {
                        acc += l[(n, j)] * x;
                    }
                    acc
                })
                .collect()
        }
    };
    Ok(ModeState { basis: basis.clone(), noise: noise.clone(), coeffs, time: 0.0 })
}

/// Stationary two-time covariance Σ_n e^{-μ_n t} ⟨f, f_n⟩² / (2 μ_n)
/// (unit noise weight; scale by a² for constant a).
pub fn she_two_time_cov(basis: &SpectralBasis, f: &TestFn, gap: f64) -> f64 {
    let proj = basis.project(&f.values);
    proj.iter()
        .enumerate()
        .map(|(n, c)| {
            let mu = basis.eigenvalue(n);
            (-mu * gap).exp() * c * c / (2.0 * mu)
        })
        .sum()
}

/// Numeric eigenbasis of the fractional Laplacian on a ball grid, from the
/// eigendecomposition of the quadrature-weighted fractional Green matrix.
/// Eigenvalues below 1e-12 of the largest are discarded (count reported);
/// `cutoff` then truncates to the leading modes (smallest μ first).
pub fn frac_spectral_basis(
    grid: &Arc<Grid>,
    alpha: f64,
    cutoff: usize,
) -> Result<(SpectralBasis, usize)> {
    if grid.spec.kind != DomainKind::Ball {
        return Err(Error::UnsupportedConfiguration(
            "fractional basis is built on ball grids".into(),
        ));
    }
    let d = grid.dim();
    let radius = grid.spec.radius();
    let k = grid.num_interior();
    let pts: Vec<[f64; 3]> = grid
        .points
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            for a in 0..d {
                q[a] = p[a] / radius;
            }
            q
        })
        .collect();
    let cell_rel = grid.spacing() / radius;
    let mut green = crate::domain::frac_green_matrix(alpha, d, &pts, cell_rel)?;
    green *= radius.powf(2.0 * alpha - d as f64);
    // Weighted symmetric problem M = W^{1/2} G W^{1/2}.
    let sqrt_w: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    for i in 0..k {
        for j in 0..k {
            green[(i, j)] *= sqrt_w[i] * sqrt_w[j];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(green);
    let lam_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let kept: Vec<usize> = order
        .iter()
        .cloned()
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * lam_max)
        .collect();
    let discarded = k - kept.len();
    let kept = &kept[..kept.len().min(cutoff)];

    let mut modes = Vec::with_capacity(kept.len());
    let mut values = vec![0.0; kept.len() * k];
    for (rank, &ei) in kept.iter().enumerate() {
        modes.push(Mode { index: [rank + 1, 0, 0], eigenvalue: 1.0 / eig.eigenvalues[ei] });
        let col = eig.eigenvectors.column(ei);
        // Deterministic sign: largest-magnitude component positive.
        let mut sign = 1.0;
        let mut best = 0.0;
        for p in 0..k {
            if col[p].abs() > best {
                best = col[p].abs();
                sign = col[p].signum();
            }
        }
        let row = &mut values[rank * k..(rank + 1) * k];
        for p in 0..k {
            row[p] = sign * col[p] / sqrt_w[p];
        }
    }
    let basis = SpectralBasis::from_parts(grid.clone(), modes, values, grid.weights.clone());
    Ok((basis, discarded))
}
