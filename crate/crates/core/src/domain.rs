//! Geometry, lattices, Laplacian eigenbases and Green functions.
//!
//! Conventions used throughout the crate:
//!
//! * Rectangles are boxes `[0, L_1] x ... x [0, L_d]`, balls are centred at
//!   the origin.
//! * Green functions solve `-ΔG(., y) = δ_y` with zero boundary data, so in
//!   particular `∫_{B(0,ε)} G_{B(0,ε)}(0, y) dy = ε²/(2d)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quad::{self, gauss_legendre_on, unit_ball_volume, unit_sphere_area, SphereRule};
use crate::special;

/// A point padded to three components; trailing entries are zero when the
/// dimension is lower.
pub type Point3 = [f64; 3];

#[inline]
pub fn pad_point(p: &[f64]) -> Point3 {
    let mut out = [0.0; 3];
    out[..p.len()].copy_from_slice(p);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Rectangle,
    Ball,
}

/// Geometry of the ambient domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub dim: usize,
    /// Side lengths for rectangles, `[radius]` for balls.
    pub extent: Vec<f64>,
}

impl DomainSpec {
    pub fn rectangle(sides: &[f64]) -> Result<Self> {
        let dim = sides.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} not supported (need 1..=3)"
            )));
        }
        if sides.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidParameter("extents must be strictly positive".into()));
        }
        Ok(DomainSpec { kind: DomainKind::Rectangle, dim, extent: sides.to_vec() })
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "dimension {dim} not supported (need 1..=3)"
            )));
        }
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::InvalidParameter("radius must be strictly positive".into()));
        }
        Ok(DomainSpec { kind: DomainKind::Ball, dim, extent: vec![radius] })
    }

    pub fn unit_square() -> Self {
        Self::rectangle(&[1.0, 1.0]).unwrap()
    }

    pub fn unit_cube() -> Self {
        Self::rectangle(&[1.0, 1.0, 1.0]).unwrap()
    }

    pub fn unit_disk() -> Self {
        Self::ball(2, 1.0).unwrap()
    }

    pub fn radius(&self) -> f64 {
        debug_assert_eq!(self.kind, DomainKind::Ball);
        self.extent[0]
    }

    /// Lebesgue measure |D|.
    pub fn volume(&self) -> f64 {
        match self.kind {
            DomainKind::Rectangle => self.extent.iter().product(),
            DomainKind::Ball => unit_ball_volume(self.dim) * self.radius().powi(self.dim as i32),
        }
    }

    /// Distance to the boundary; negative outside the domain.
    pub fn boundary_distance(&self, p: &[f64]) -> f64 {
        match self.kind {
            DomainKind::Rectangle => {
                let mut d = f64::INFINITY;
                for (i, &x) in p.iter().take(self.dim).enumerate() {
                    d = d.min(x).min(self.extent[i] - x);
                }
                d
            }
            DomainKind::Ball => self.radius() - quad::norm(&p[..self.dim]),
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.boundary_distance(p) > 0.0
    }

    /// Axis-aligned bounding box as (lower, upper) per axis.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self.kind {
            DomainKind::Rectangle => (vec![0.0; self.dim], self.extent.clone()),
            DomainKind::Ball => {
                let r = self.radius();
                (vec![-r; self.dim], vec![r; self.dim])
            }
        }
    }
}

/// Uniform lattice over a domain with per-node quadrature weights.
///
/// Nodes sit on a tensor grid with `n` nodes per axis, including nodes on
/// the bounding box boundary; only strictly interior nodes are retained.
/// Quadrature weights sum to |D| exactly: for rectangles the boundary
/// half-cells are folded into the adjacent interior nodes, for balls the
/// cell/ball intersection measures are computed exactly and then rescaled.
#[derive(Debug)]
pub struct Grid {
    pub spec: DomainSpec,
    pub n: usize,
    hs: [f64; 3],
    origin: [f64; 3],
    /// Flattened lattice index per interior node.
    pub interior: Vec<usize>,
    lattice_to_interior: Vec<i32>,
    /// Coordinates of interior nodes.
    pub points: Vec<Point3>,
    /// Quadrature weight per interior node; sums to |D|.
    pub weights: Vec<f64>,
    /// Distance to the boundary per interior node.
    pub collar: Vec<f64>,
    /// Sum of the geometric cell measures before the final rescale
    /// (diagnostic for the ball boundary-cell correction).
    pub raw_weight_sum: f64,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn num_interior(&self) -> usize {
        self.interior.len()
    }

    /// Uniform lattice spacing. Panics if the axes disagree (non-square
    /// rectangles with incommensurate sides).
    pub fn spacing(&self) -> f64 {
        let h = self.hs[0];
        for a in 1..self.dim() {
            assert!(
                (self.hs[a] - h).abs() < 1e-12 * h,
                "grid spacing is not uniform across axes"
            );
        }
        h
    }

    pub fn spacing_on_axis(&self, axis: usize) -> f64 {
        self.hs[axis]
    }

    /// Volume element h^d of one lattice cell.
    pub fn cell_volume(&self) -> f64 {
        self.hs[..self.dim()].iter().product()
    }

    #[inline]
    pub fn lattice_flat(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.n * (idx[1] + self.n * idx[2])
    }

    #[inline]
    pub fn lattice_point(&self, idx: [usize; 3]) -> Point3 {
        let mut p = [0.0; 3];
        for a in 0..self.dim() {
            p[a] = self.origin[a] + idx[a] as f64 * self.hs[a];
        }
        p
    }

    /// Interior index of a flattened lattice index, if interior.
    #[inline]
    pub fn interior_of_flat(&self, flat: usize) -> Option<usize> {
        let v = self.lattice_to_interior[flat];
        (v >= 0).then_some(v as usize)
    }

    /// Lattice multi-index of an interior node.
    pub fn lattice_index(&self, interior: usize) -> [usize; 3] {
        let mut f = self.interior[interior];
        let i0 = f % self.n;
        f /= self.n;
        [i0, f % self.n, f / self.n]
    }

    /// Nearest lattice multi-index to a point (clamped to the lattice).
    pub fn nearest_lattice(&self, p: &[f64]) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in 0..self.dim() {
            let t = ((p[a] - self.origin[a]) / self.hs[a]).round();
            idx[a] = t.clamp(0.0, (self.n - 1) as f64) as usize;
        }
        idx
    }

    /// Interior node indices within distance `radius` of `center`.
    pub fn nodes_within(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let c = pad_point(center);
        let d = self.dim();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            if a < d {
                let l = ((c[a] - radius - self.origin[a]) / self.hs[a]).floor();
                let u = ((c[a] + radius - self.origin[a]) / self.hs[a]).ceil();
                lo[a] = l.max(0.0) as usize;
                hi[a] = (u.min((self.n - 1) as f64)).max(0.0) as usize;
            } else {
                lo[a] = 0;
                hi[a] = 0;
            }
        }
        let r2 = radius * radius;
        let mut out = Vec::new();
        for i2 in lo[2]..=hi[2] {
            for i1 in lo[1]..=hi[1] {
                for i0 in lo[0]..=hi[0] {
                    let idx = [i0, i1, i2];
                    let flat = self.lattice_flat(idx);
                    if let Some(int) = self.interior_of_flat(flat) {
                        let p = self.points[int];
                        let mut s = 0.0;
                        for a in 0..d {
                            let t = p[a] - c[a];
                            s += t * t;
                        }
                        if s < r2 {
                            out.push(int);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Build a uniform grid with `n` nodes per side.
pub fn build_grid(spec: &DomainSpec, n: usize) -> Result<Arc<Grid>> {
    if n < 8 {
        return Err(Error::GridTooCoarse(n));
    }
    let d = spec.dim;
    let (lo, hi) = spec.bounding_box();
    let mut hs = [1.0; 3];
    let mut origin = [0.0; 3];
    for a in 0..d {
        hs[a] = (hi[a] - lo[a]) / (n - 1) as f64;
        origin[a] = lo[a];
    }
    let total = n.pow(d as u32);
    let mut lattice_to_interior = vec![-1i32; total];
    let mut interior = Vec::new();
    let mut points = Vec::new();
    let mut collar = Vec::new();

    let nd = |a: usize| if a < d { n } else { 1 };
    for i2 in 0..nd(2) {
        for i1 in 0..nd(1) {
            for i0 in 0..nd(0) {
                let idx = [i0, i1, i2];
                let mut p = [0.0; 3];
                for a in 0..d {
                    p[a] = origin[a] + idx[a] as f64 * hs[a];
                }
                let dist = spec.boundary_distance(&p[..d]);
                if dist > 1e-12 * hs[0] {
                    let flat = i0 + n * (i1 + n * i2);
                    lattice_to_interior[flat] = interior.len() as i32;
                    interior.push(flat);
                    points.push(p);
                    collar.push(dist);
                }
            }
        }
    }

    let (weights, raw_weight_sum) = match spec.kind {
        DomainKind::Rectangle => {
            // Per-axis folded weights: boundary half-cells are attached to
            // the first/last interior node so the total is exactly L.
            let mut axis_w = Vec::new();
            for a in 0..d {
                let h = hs[a];
                let mut w = vec![0.0; n];
                for item in w.iter_mut().take(n - 1).skip(1) {
                    *item = h;
                }
                w[1] += 0.5 * h;
                w[n - 2] += 0.5 * h;
                axis_w.push(w);
            }
            let mut weights = Vec::with_capacity(interior.len());
            for &flat in &interior {
                let mut f = flat;
                let mut w = 1.0;
                for aw in axis_w.iter().take(d) {
                    w *= aw[f % n];
                    f /= n;
                }
                weights.push(w);
            }
            let s: f64 = weights.iter().sum();
            (weights, s)
        }
        DomainKind::Ball => {
            let r = spec.radius();
            let h = hs[0];
            let mut weights = Vec::with_capacity(interior.len());
            for p in &points {
                weights.push(cell_ball_measure(p, h, r, d));
            }
            // Cells of non-interior lattice nodes can still overlap the
            // ball; fold those slivers into the nearest interior node so
            // the raw measures tile the ball.
            for i2 in 0..nd(2) {
                for i1 in 0..nd(1) {
                    for i0 in 0..nd(0) {
                        let idx = [i0, i1, i2];
                        let flat = i0 + n * (i1 + n * i2);
                        if lattice_to_interior[flat] >= 0 {
                            continue;
                        }
                        let mut p = [0.0; 3];
                        for a in 0..d {
                            p[a] = origin[a] + idx[a] as f64 * hs[a];
                        }
                        let m = cell_ball_measure(&p, h, r, d);
                        if m <= 0.0 {
                            continue;
                        }
                        // nearest interior node in a small neighborhood
                        let mut best: Option<(f64, usize)> = None;
                        let lo = |v: usize| v.saturating_sub(2);
                        let hi = |v: usize, axis: usize| (v + 2).min(nd(axis) - 1);
                        for j2 in lo(i2)..=hi(i2, 2) {
                            for j1 in lo(i1)..=hi(i1, 1) {
                                for j0 in lo(i0)..=hi(i0, 0) {
                                    let nflat = j0 + n * (j1 + n * j2);
                                    let t = lattice_to_interior[nflat];
                                    if t >= 0 {
                                        let q = &points[t as usize];
                                        let mut dist2 = 0.0;
                                        for a in 0..d {
                                            let dd = q[a] - p[a];
                                            dist2 += dd * dd;
                                        }
                                        if best.map(|(b, _)| dist2 < b).unwrap_or(true) {
                                            best = Some((dist2, t as usize));
                                        }
                                    }
                                }
                            }
                        }
                        if let Some((_, t)) = best {
                            weights[t] += m;
                        }
                    }
                }
            }
            let raw: f64 = weights.iter().sum();
            let scale = spec.volume() / raw;
            for w in &mut weights {
                *w *= scale;
            }
            (weights, raw)
        }
    };

    Ok(Arc::new(Grid {
        spec: spec.clone(),
        n,
        hs,
        origin,
        interior,
        lattice_to_interior,
        points,
        weights,
        collar,
        raw_weight_sum,
    }))
}

/// Measure of the lattice cell centred at `p` intersected with B(0, r).
fn cell_ball_measure(p: &Point3, h: f64, r: f64, d: usize) -> f64 {
    // Fast paths: cell fully inside / outside.
    let half = 0.5 * h;
    let mut near2 = 0.0;
    let mut far2 = 0.0;
    for a in 0..d {
        let lo = p[a] - half;
        let hi = p[a] + half;
        let near = if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            -hi
        } else {
            0.0
        };
        let far = lo.abs().max(hi.abs());
        near2 += near * near;
        far2 += far * far;
    }
    if far2 <= r * r {
        return h.powi(d as i32);
    }
    if near2 >= r * r {
        return 0.0;
    }
    match d {
        1 => {
            let lo = (p[0] - half).max(-r);
            let hi = (p[0] + half).min(r);
            (hi - lo).max(0.0)
        }
        2 => disk_rect_area(p[0] - half, p[0] + half, p[1] - half, p[1] + half, r),
        3 => {
            // Integrate disk/rectangle areas over the z-extent of the cell.
            let z0 = (p[2] - half).max(-r);
            let z1 = (p[2] + half).min(r);
            if z1 <= z0 {
                return 0.0;
            }
            gauss_legendre_on(z0, z1, 24)
                .into_iter()
                .map(|(z, w)| {
                    let rz2 = r * r - z * z;
                    if rz2 <= 0.0 {
                        0.0
                    } else {
                        w * disk_rect_area(
                            p[0] - half,
                            p[0] + half,
                            p[1] - half,
                            p[1] + half,
                            rz2.sqrt(),
                        )
                    }
                })
                .sum()
        }
        _ => unreachable!(),
    }
}

/// Exact area of [x0,x1] x [y0,y1] ∩ B(0, r).
fn disk_rect_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    // Quadrant area of [0,a] x [0,b] ∩ disk, extended to signed corners.
    fn quadrant(a: f64, b: f64, r: f64) -> f64 {
        if a <= 0.0 || b <= 0.0 {
            return 0.0;
        }
        if a * a + b * b <= r * r {
            return a * b;
        }
        let prim = |t: f64| 0.5 * (t * (r * r - t * t).sqrt() + r * r * (t / r).asin());
        let a = a.min(r);
        let c = (r * r - b * b).max(0.0).sqrt();
        if a <= c {
            return a * b;
        }
        b * c + prim(a) - prim(c)
    }
    fn signed(a: f64, b: f64, r: f64) -> f64 {
        a.signum() * b.signum() * quadrant(a.abs(), b.abs(), r)
    }
    signed(x1, y1, r) - signed(x0, y1, r) - signed(x1, y0, r) + signed(x0, y0, r)
}

/// One eigenpair of the analytic rectangle basis (or of a numerically
/// diagonalized fractional operator, where `index = [rank, 0, 0]`).
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    pub index: [usize; 3],
    pub eigenvalue: f64,
}

/// Eigenpairs sampled on a grid, with the discrete inner product that makes
/// them orthonormal.
#[derive(Debug)]
pub struct SpectralBasis {
    pub grid: Arc<Grid>,
    pub modes: Vec<Mode>,
    values: Vec<f64>,
    /// Weights of the inner product under which the basis is orthonormal.
    /// The rectangle sine basis uses the plain lattice rule h^d; numeric
    /// ball bases use the grid quadrature weights.
    pub inner_weights: Vec<f64>,
}

impl SpectralBasis {
    pub(crate) fn from_parts(
        grid: Arc<Grid>,
        modes: Vec<Mode>,
        values: Vec<f64>,
        inner_weights: Vec<f64>,
    ) -> Self {
        SpectralBasis { grid, modes, values, inner_weights }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode_values(&self, m: usize) -> &[f64] {
        let k = self.grid.num_interior();
        &self.values[m * k..(m + 1) * k]
    }

    pub fn eigenvalue(&self, m: usize) -> f64 {
        self.modes[m].eigenvalue
    }

    /// Discrete inner product of two node vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.inner_weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Projections ⟨v, f_m⟩ onto every mode.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|m| self.inner(v, self.mode_values(m))).collect()
    }

    /// Matrix of pairwise discrete inner products.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let m = self.len();
        let mut mat = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.inner(self.mode_values(i), self.mode_values(j));
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        mat
    }
}

/// Enumerate rectangle sine modes ordered by eigenvalue, ties broken by
/// index, truncated to `count`.
fn enumerate_rect_modes(sides: &[f64], count: usize) -> Vec<Mode> {
    let d = sides.len();
    let l_min = sides.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut base = match d {
        1 => count + 1,
        2 => (1.8 * (count as f64).sqrt()).ceil() as usize + 4,
        _ => (1.7 * (count as f64).cbrt()).ceil() as usize + 4,
    };
    loop {
        let caps: Vec<usize> = sides
            .iter()
            .map(|&l| ((base as f64) * l / l_min).ceil() as usize)
            .collect();
        let mut modes = Vec::new();
        let cap = |a: usize| if a < d { caps[a] } else { 1 };
        for j2 in 1..=cap(2) {
            for j1 in 1..=cap(1) {
                for j0 in 1..=cap(0) {
                    let mut idx = [j0, j1, j2];
                    for slot in idx.iter_mut().skip(d) {
                        *slot = 0;
                    }
                    let mut mu = 0.0;
                    for a in 0..d {
                        let t = idx[a] as f64 / sides[a];
                        mu += t * t;
                    }
                    mu *= std::f64::consts::PI * std::f64::consts::PI;
                    modes.push(Mode { index: idx, eigenvalue: mu });
                }
            }
        }
        modes.sort_by(|a, b| {
            a.eigenvalue
                .partial_cmp(&b.eigenvalue)
                .unwrap()
                .then(a.index.cmp(&b.index))
        });
        if modes.len() >= count {
            let mu_cut = modes[count - 1].eigenvalue;
            // Completeness: every mode with eigenvalue <= mu_cut must fit in
            // the enumeration box.
            let ok = (0..d).all(|a| {
                let jmax = sides[a] * mu_cut.sqrt() / std::f64::consts::PI;
                jmax < caps[a] as f64
            });
            if ok {
                modes.truncate(count);
                return modes;
            }
        }
        base *= 2;
    }
}

/// Zero-boundary Laplacian eigenbasis of a rectangle, sampled on `grid`.
///
/// On the unit square the modes are `f_{jk}(x, y) = 2 sin(jπx) sin(kπy)`
/// with `μ_{jk} = π²(j² + k²)`, enumerated with `j² + k²` ascending. The
/// basis is exactly orthonormal under the plain lattice inner product
/// `h^d Σ`, which is what `inner_weights` holds.
pub fn laplacian_eigenbasis(grid: &Arc<Grid>, cutoff: usize) -> Result<SpectralBasis> {
    if grid.spec.kind != DomainKind::Rectangle {
        return Err(Error::RectangleBasisOnly);
    }
    if cutoff == 0 {
        return Err(Error::InvalidParameter("cutoff must be positive".into()));
    }
    let d = grid.dim();
    let sides = &grid.spec.extent;
    let modes = enumerate_rect_modes(sides, cutoff);
    let k = grid.num_interior();
    let mut values = vec![0.0; modes.len() * k];
    let amp: f64 = (0..d).map(|a| (2.0 / sides[a]).sqrt()).product();
    for (m, mode) in modes.iter().enumerate() {
        let row = &mut values[m * k..(m + 1) * k];
        for (i, p) in grid.points.iter().enumerate() {
            let mut v = amp;
            for a in 0..d {
                v *= (mode.index[a] as f64 * std::f64::consts::PI * p[a] / sides[a]).sin();
            }
            row[i] = v;
        }
    }
    let cell = grid.cell_volume();
    let inner_weights = vec![cell; k];
    Ok(SpectralBasis::from_parts(grid.clone(), modes, values, inner_weights))
}

/// Evaluate a rectangle eigenfunction analytically at a point.
pub fn rect_mode_value(sides: &[f64], index: &[usize; 3], p: &[f64]) -> f64 {
    let d = sides.len();
    let mut v: f64 = (0..d).map(|a| (2.0 / sides[a]).sqrt()).product();
    for a in 0..d {
        v *= (index[a] as f64 * std::f64::consts::PI * p[a] / sides[a]).sin();
    }
    v
}

const DEFAULT_GREEN_CUTOFF: usize = 4096;

/// Dirichlet Green function of -Δ on the domain.
///
/// Balls use image formulas; rectangles use the spectral sum over the sine
/// basis with a second-order Riesz eigenvalue filter (same basis, same
/// limit, but without the oscillation a sharp cutoff produces) truncated at
/// `cutoff` (default 4096) modes.
pub fn green(spec: &DomainSpec, x: &[f64], y: &[f64], cutoff: Option<usize>) -> Result<f64> {
    let d = spec.dim;
    if x.len() != d || y.len() != d {
        return Err(Error::InvalidParameter("point dimension mismatch".into()));
    }
    if spec.boundary_distance(x) <= 0.0 || spec.boundary_distance(y) <= 0.0 {
        return Err(Error::OutsideDomain("Green function needs interior points".into()));
    }
    let scale: f64 = spec.extent.iter().cloned().fold(0.0, f64::max);
    if quad::dist(x, y) < 1e-12 * scale {
        return Err(Error::DiagonalSingularity);
    }
    match spec.kind {
        DomainKind::Ball => Ok(green_ball(spec, x, y)),
        DomainKind::Rectangle => {
            Ok(green_rectangle(&spec.extent, x, y, cutoff.unwrap_or(DEFAULT_GREEN_CUTOFF)))
        }
    }
}

fn green_ball(spec: &DomainSpec, x: &[f64], y: &[f64]) -> f64 {
    let r = spec.radius();
    let d = spec.dim;
    match d {
        1 => {
            // Interval [-r, r]: G(x,y) = (r - max)(min + r)/(2r).
            let (a, b) = (x[0].min(y[0]), x[0].max(y[0]));
            (r - b) * (a + r) / (2.0 * r)
        }
        2 | 3 => {
            // rho* = |y| |x - y*| / r with y* = r² y/|y|², written in the
            // symmetric form sqrt(|x|²|y|²/r² - 2x·y + r²).
            let rho_star = (quad::norm_sq(x) * quad::norm_sq(y) / (r * r) - 2.0 * quad::dot(x, y)
                + r * r)
                .sqrt();
            let dist = quad::dist(x, y);
            if d == 2 {
                (rho_star / dist).ln() / (2.0 * std::f64::consts::PI)
            } else {
                (1.0 / dist - 1.0 / rho_star) / (4.0 * std::f64::consts::PI)
            }
        }
        _ => unreachable!(),
    }
}

fn green_rectangle(sides: &[f64], x: &[f64], y: &[f64], cutoff: usize) -> f64 {
    let d = sides.len();
    let modes = enumerate_rect_modes(sides, cutoff);
    let mu_last = modes.last().unwrap().eigenvalue;
    let gap = (std::f64::consts::PI / sides.iter().cloned().fold(f64::INFINITY, f64::min)).powi(2);
    let mu_edge = mu_last + gap;
    let amp2: f64 = (0..d).map(|a| 2.0 / sides[a]).product();
    let mut sum = 0.0;
    for mode in &modes {
        let mut t = amp2;
        for a in 0..d {
            let arg = mode.index[a] as f64 * std::f64::consts::PI / sides[a];
            t *= (arg * x[a]).sin() * (arg * y[a]).sin();
        }
        let w = 1.0 - mode.eigenvalue / mu_edge;
        sum += w * w * t / mode.eigenvalue;
    }
    sum
}

/// ∫_{B(0,ε)} G_{B(0,ε)}(0, y) dy by radial quadrature of the ball Green
/// function. Under the -Δ convention this equals ε²/(2d).
pub fn green_ball_integral(eps: f64, d: usize) -> Result<f64> {
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidParameter(format!("dimension {d} not supported")));
    }
    let spec = DomainSpec::ball(d, eps)?;
    let origin = vec![0.0; d];
    let area = unit_sphere_area(d);
    // Substitute r = eps s^2 to tame the endpoint of the d=2 logarithm.
    let rule = gauss_legendre_on(0.0, 1.0, 96);
    let mut total = 0.0;
    for &(s, w) in &rule {
        let r = eps * s * s;
        if r == 0.0 {
            continue;
        }
        let mut y = vec![0.0; d];
        y[0] = r;
        let g = green(&spec, &origin, &y, None)?;
        total += w * (2.0 * eps * s) * area * r.powi(d as i32 - 1) * g;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Fractional Green function of the unit ball
// ---------------------------------------------------------------------------

/// Normalization constant of the ball Green function for the Riesz
/// fractional Laplacian `(-Δ)^α`: Γ(d/2) / (4^α π^{d/2} Γ(α)²).
pub fn riesz_green_constant(alpha: f64, d: usize) -> f64 {
    let g = special::gamma(alpha);
    special::gamma(d as f64 / 2.0)
        / (4.0f64.powf(alpha) * std::f64::consts::PI.powf(d as f64 / 2.0) * g * g)
}

/// Incomplete integral I(z0) = ∫_0^{z0} w^{α-1} (1+w)^{-d/2} dw.
///
/// The substitution u = w^α removes the endpoint singularity; the remaining
/// smooth integrand is handled by segmented Gauss–Legendre panels growing
/// geometrically, so very large z0 (nearly coincident points) stays
/// accurate.
fn frac_green_integral(z0: f64, alpha: f64, d: usize) -> f64 {
    if z0 <= 0.0 {
        return 0.0;
    }
    let u_max = z0.powf(alpha);
    let f = |u: f64| (1.0 + u.powf(1.0 / alpha)).powf(-(d as f64) / 2.0);
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut hi = u_max.min(2.0);
    loop {
        for (u, w) in gauss_legendre_on(lo, hi, 64) {
            total += w * f(u);
        }
        if hi >= u_max {
            break;
        }
        lo = hi;
        hi = (hi * 8.0).min(u_max);
    }
    total / alpha
}

/// Fractional Green function of the unit ball for the Riesz fractional
/// Laplacian, `α ∈ (0,1)`:
///
/// `G(x,y) = k_{α,d} |x-y|^{2α-d} ∫_0^{z0} w^{α-1}(1+w)^{-d/2} dw`
///
/// with `z0 = (1-|x|²)(1-|y|²)/|x-y|²`. The expression is symmetric in
/// (x, y) by construction.
pub fn fractional_green_ball(alpha: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = x.len();
    if y.len() != d {
        return Err(Error::InvalidParameter("point dimension mismatch".into()));
    }
    if !(2..=3).contains(&d) {
        return Err(Error::InvalidParameter(
            "fractional Green function implemented for d in {2, 3}".into(),
        ));
    }
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} outside (0, 1)")));
    }
    let nx = quad::norm_sq(x);
    let ny = quad::norm_sq(y);
    if nx >= 1.0 || ny >= 1.0 {
        return Err(Error::OutsideDomain("points must lie inside the unit ball".into()));
    }
    let r2 = quad::dist_sq(x, y);
    if r2 < 1e-28 {
        return Err(Error::DiagonalSingularity);
    }
    let z0 = (1.0 - nx) * (1.0 - ny) / r2;
    let k = riesz_green_constant(alpha, d);
    Ok(k * r2.powf(alpha - d as f64 / 2.0) * frac_green_integral(z0, alpha, d))
}

/// ∫ over the unit cell [-1/2,1/2]^d of |u|^{2α-d}, used to regularize the
/// diagonal of sampled fractional Green matrices.
pub(crate) fn unit_cell_riesz_integral(alpha: f64, d: usize) -> f64 {
    match d {
        2 => {
            // 8 ∫_0^{π/4} (2 cos φ)^{-2α} / (2α) dφ
            gauss_legendre_on(0.0, std::f64::consts::FRAC_PI_4, 64)
                .into_iter()
                .map(|(phi, w)| w * (2.0 * phi.cos()).powf(-2.0 * alpha) / (2.0 * alpha))
                .sum::<f64>()
                * 8.0
        }
        3 => {
            // ∫_{S²} ρ_max(ω)^{2α} / (2α) dω with ρ_max = 1/(2 max |ω_i|).
            let rule = SphereRule::new(3, 4096);
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(om, w)| {
                    let m = om[0].abs().max(om[1].abs()).max(om[2].abs());
                    w * (2.0 * m).powf(-2.0 * alpha) / (2.0 * alpha)
                })
                .sum()
        }
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Dense fractional Green matrix of the unit ball sampled at `pts` (unit
/// ball coordinates), with a Nyström-style cell-averaged diagonal for cell
/// size `cell` (in unit-ball units).
pub(crate) fn frac_green_matrix(alpha: f64, d: usize, pts: &[Point3], cell: f64) -> Result<DMatrix<f64>> {
    let m = pts.len();
    let k = riesz_green_constant(alpha, d);
    let b_near = special::beta(alpha, d as f64 / 2.0 - alpha);
    let j_cell = unit_cell_riesz_integral(alpha, d);
    let mut mat = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let g = fractional_green_ball(alpha, &pts[i][..d], &pts[j][..d])?;
            mat[(i, j)] = g;
            mat[(j, i)] = g;
        }
        // Cell average of the near-field k B(α, d/2-α) |u|^{2α-d} plus the
        // finite remainder -k (1-|x|²)^{2α-d} / (d/2-α) of the exact kernel
        // at coinciding points.
        let rho = 1.0 - quad::norm_sq(&pts[i][..d]);
        mat[(i, i)] = k * b_near * cell.powf(2.0 * alpha - d as f64) * j_cell
            - k * rho.powf(2.0 * alpha - d as f64) / (d as f64 / 2.0 - alpha);
    }
    Ok(mat)
}
