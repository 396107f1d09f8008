//! Plancherel-domain model of the band-limited space and numerical
//! verification of the lattice analysis transform: isometry, intertwining
//! with the natural actions, Parseval-frame sums, and reconstruction.
//!
//! Functions live on a rectangular grid over box x [-T, T)^m with midpoint
//! nodes and the spectral density folded into the quadrature weights. The
//! transform maps a grid function to a sequence indexed by (k, l) in
//! Z^p x Z^m, windowed to ||k||_max <= k_max and an l-range covering the
//! grid support; truncation tails are always reported, never hidden.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::AlgebraSpec;
use crate::error::{Error, Result};
use crate::orbit::OrbitMap;
use crate::rational::to_f64;
use crate::sampling::{check_containment, SpectralBox};

const TWO_PI: f64 = std::f64::consts::TAU;

/// Fixed number of parallel reduction blocks; partial sums are combined in
/// block order, so results do not depend on the thread count.
const REDUCE_BLOCKS: usize = 8;

/// Everything the frame machinery needs about one algebra.
pub struct FrameContext {
    pub spec: AlgebraSpec,
    pub map: OrbitMap,
    /// exp(ad A_k) restricted to the ideal, as integer matrices; present
    /// only when the lattice condition holds.
    pub exp_ad: Option<Vec<Vec<Vec<i64>>>>,
}

/// Builds the context from an algebra whose generic orbit data is square.
pub fn frame_context(spec: &AlgebraSpec, trials: usize, seed: u64) -> Result<FrameContext> {
    let map = crate::orbit::orbit_map(spec, trials, seed)?;
    let mut mats = Vec::new();
    let mut integral = true;
    for k in 1..=spec.m_dim {
        let e = spec.exp_ad_complement_generator(k)?;
        if !e.is_integer_matrix() {
            integral = false;
            break;
        }
        let as_i64: Vec<Vec<i64>> = (0..e.rows)
            .map(|i| {
                (0..e.cols)
                    .map(|j| to_f64(&e[(i, j)]).round() as i64)
                    .collect()
            })
            .collect();
        mats.push(as_i64);
    }
    Ok(FrameContext {
        spec: spec.clone(),
        map,
        exp_ad: if integral { Some(mats) } else { None },
    })
}

/// One spectral grid axis with midpoint nodes.
#[derive(Debug, Clone, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn node(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * (self.hi - self.lo) / self.n as f64
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }
}

/// Grid geometry: spectral axes plus a t-grid of `nt` nodes per unit
/// length on [-T, T)^m.
#[derive(Debug, Clone, Serialize)]
pub struct GridShape {
    pub lam_axes: Vec<Axis>,
    pub t_half: i64,
    pub nt: usize,
    pub m: usize,
}

impl GridShape {
    pub fn lam_total(&self) -> usize {
        self.lam_axes.iter().map(|a| a.n).product()
    }

    pub fn t_len(&self) -> usize {
        2 * self.t_half as usize * self.nt
    }

    pub fn t_total(&self) -> usize {
        (0..self.m).map(|_| self.t_len()).product()
    }

    pub fn lam_coords(&self, mut flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.lam_axes.len()];
        for (d, axis) in self.lam_axes.iter().enumerate().rev() {
            out[d] = axis.node(flat % axis.n);
            flat /= axis.n;
        }
        out
    }

    pub fn t_coords(&self, mut flat: usize) -> Vec<f64> {
        let len = self.t_len();
        let mut out = vec![0.0; self.m];
        for d in (0..self.m).rev() {
            let j = flat % len;
            flat /= len;
            out[d] = -(self.t_half as f64) + (j as f64 + 0.5) / self.nt as f64;
        }
        out
    }

    /// Integer cell of each t-axis index (the floor of the node).
    pub fn t_cells(&self, mut flat: usize) -> Vec<i64> {
        let len = self.t_len();
        let mut out = vec![0i64; self.m];
        for d in (0..self.m).rev() {
            let j = flat % len;
            flat /= len;
            out[d] = (j / self.nt) as i64 - self.t_half;
        }
        out
    }

    /// Local node index within the unit cell, for a flat t index.
    pub fn t_local(&self, mut flat: usize) -> usize {
        let len = self.t_len();
        let mut locals = vec![0usize; self.m];
        for d in (0..self.m).rev() {
            let j = flat % len;
            flat /= len;
            locals[d] = j % self.nt;
        }
        locals.into_iter().fold(0usize, |acc, j| acc * self.nt + j)
    }

    /// Volume element of one t-node.
    pub fn dtm(&self) -> f64 {
        (1.0 / self.nt as f64).powi(self.m as i32)
    }
}

/// Sampled representative of a band-limited function on the grid, with
/// per-spectral-node quadrature weights carrying the density factor.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub shape: GridShape,
    /// lam-major, then t: values[lam * t_total + t]
    pub values: Vec<Complex64>,
    /// per lam node: axis steps times the spectral density |det J|
    pub lam_weights: Vec<f64>,
}

impl GridFunction {
    pub fn norm_sq(&self) -> f64 {
        let t_total = self.shape.t_total();
        let dtm = self.shape.dtm();
        let mut acc = 0.0;
        for (lam, w) in self.lam_weights.iter().enumerate() {
            let mut s = 0.0;
            for v in &self.values[lam * t_total..(lam + 1) * t_total] {
                s += v.norm_sqr();
            }
            acc += w * s * dtm;
        }
        acc
    }

    /// Cells of the t-grid that carry any nonzero sample.
    fn occupied_cells(&self) -> Vec<Vec<i64>> {
        let t_total = self.shape.t_total();
        let mut seen = std::collections::BTreeSet::new();
        for lam in 0..self.lam_weights.len() {
            for t in 0..t_total {
                if self.values[lam * t_total + t].norm_sqr() > 0.0 {
                    seen.insert(self.shape.t_cells(t));
                }
            }
        }
        seen.into_iter().collect()
    }
}

/// Resolution of a verification run.
#[derive(Debug, Clone, Serialize)]
pub struct Resolution {
    /// Spectral nodes per free axis.
    pub lam_nodes: usize,
    /// Half-width T of the t-grid (integer).
    pub t_half: i64,
    /// t-nodes per unit length.
    pub nt: usize,
    pub k_max: i64,
}

impl Resolution {
    /// Reference resolution; spectral nodes shrink with the number of free
    /// axes and the lattice window with the ideal dimension.
    pub fn reference(nfree: usize, p_dim: usize) -> Self {
        Resolution {
            lam_nodes: match nfree {
                1 => 256,
                2 => 64,
                _ => 16,
            },
            t_half: 4,
            nt: 128,
            k_max: match p_dim {
                0..=2 => 48,
                3 => 12,
                _ => 6,
            },
        }
    }

    pub fn doubled(&self) -> Self {
        Resolution {
            lam_nodes: self.lam_nodes * 2,
            t_half: self.t_half,
            nt: self.nt * 2,
            k_max: self.k_max * 2,
        }
    }
}

/// Builds the grid geometry and density weights over a spectral box.
pub fn make_shape(
    ctx: &FrameContext,
    box_: &SpectralBox,
    res: &Resolution,
) -> (GridShape, Vec<f64>) {
    let lam_axes: Vec<Axis> = box_
        .f64_bounds()
        .iter()
        .map(|&(lo, hi)| Axis {
            lo,
            hi,
            n: res.lam_nodes,
        })
        .collect();
    let shape = GridShape {
        lam_axes,
        t_half: res.t_half,
        nt: res.nt,
        m: ctx.spec.m_dim,
    };
    let steps: f64 = shape.lam_axes.iter().map(Axis::step).product();
    let weights: Vec<f64> = (0..shape.lam_total())
        .map(|flat| steps * ctx.map.density_f64(&shape.lam_coords(flat)))
        .collect();
    (shape, weights)
}

/// The compactly supported smooth profile exp(1 - 1/(1 - u^2)).
pub fn bump_profile(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Tensor-product bump test function: centers and half-widths per spectral
/// axis and per t-axis, in absolute coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct BumpSpec {
    pub lam_center: Vec<f64>,
    pub lam_halfwidth: Vec<f64>,
    pub t_center: Vec<f64>,
    pub t_halfwidth: Vec<f64>,
}

/// Three reference bumps for a box.
///
/// Spectral supports avoid both the box boundary and a neighbourhood of
/// the density's zero set at the origin: fibers with tiny |lambda| need
/// lattice frequencies beyond any fixed window to resolve their t-content,
/// so mass there shows up as pure window-truncation error. The t-supports
/// sit inside single unit cells, where the cell restriction of the
/// transform introduces no boundary jumps.
pub fn reference_bumps(box_: &SpectralBox, m: usize) -> Vec<BumpSpec> {
    let bounds = box_.f64_bounds();
    let mids: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let halves: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.5 * (hi - lo)).collect();
    let place = |c_rel: f64, w_rel: f64| -> (Vec<f64>, Vec<f64>) {
        (
            mids.iter().zip(&halves).map(|(m, h)| m + c_rel * h).collect(),
            halves.iter().map(|h| w_rel * h).collect(),
        )
    };
    let (c1, w1) = place(0.52, 0.44);
    let (c2, w2) = place(-0.52, 0.44);
    let (c3, w3) = place(0.50, 0.30);
    vec![
        BumpSpec {
            lam_center: c1,
            lam_halfwidth: w1,
            t_center: vec![0.5; m],
            t_halfwidth: vec![0.5; m],
        },
        BumpSpec {
            lam_center: c2,
            lam_halfwidth: w2,
            t_center: vec![-1.5; m],
            t_halfwidth: vec![0.5; m],
        },
        BumpSpec {
            lam_center: c3,
            lam_halfwidth: w3,
            t_center: vec![1.5; m],
            t_halfwidth: vec![0.5; m],
        },
    ]
}

/// Centered even bump filling most of the box; suited to boxes whose image
/// tiles, where the grid pieces glue across cell boundaries.
pub fn centered_bump(box_: &SpectralBox, m: usize) -> BumpSpec {
    let bounds = box_.f64_bounds();
    BumpSpec {
        lam_center: bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
        lam_halfwidth: bounds.iter().map(|(lo, hi)| 0.475 * (hi - lo)).collect(),
        t_center: vec![0.5; m],
        t_halfwidth: vec![0.5; m],
    }
}

/// Samples a bump onto the grid.
pub fn bump_grid(
    ctx: &FrameContext,
    box_: &SpectralBox,
    res: &Resolution,
    bump: &BumpSpec,
) -> GridFunction {
    let (shape, lam_weights) = make_shape(ctx, box_, res);
    let t_total = shape.t_total();
    let lam_total = shape.lam_total();
    let mut values = vec![Complex64::new(0.0, 0.0); lam_total * t_total];
    let t_profiles: Vec<f64> = (0..t_total)
        .map(|t| {
            shape
                .t_coords(t)
                .iter()
                .zip(&bump.t_center)
                .zip(&bump.t_halfwidth)
                .map(|((x, c), w)| bump_profile((x - c) / w))
                .product()
        })
        .collect();
    for lam in 0..lam_total {
        let lam_profile: f64 = shape
            .lam_coords(lam)
            .iter()
            .zip(&bump.lam_center)
            .zip(&bump.lam_halfwidth)
            .map(|((x, c), w)| bump_profile((x - c) / w))
            .product();
        if lam_profile == 0.0 {
            continue;
        }
        for (t, tp) in t_profiles.iter().enumerate() {
            if *tp != 0.0 {
                values[lam * t_total + t] = Complex64::new(lam_profile * tp, 0.0);
            }
        }
    }
    GridFunction {
        shape,
        values,
        lam_weights,
    }
}

/// Window variant for the model frame generator: the sharp indicator of
/// box x [0,1)^m, or a raised-cosine mollification of its edges sized to
/// the lattice window resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EtaVariant {
    Sharp,
    Mollified,
}

fn raised_cosine_edge(x: f64, lo: f64, hi: f64, ramp: f64) -> f64 {
    if x < lo || x > hi {
        return 0.0;
    }
    if ramp <= 0.0 {
        return 1.0;
    }
    if x < lo + ramp {
        0.5 - 0.5 * (std::f64::consts::PI * (x - lo) / ramp).cos()
    } else if x > hi - ramp {
        0.5 - 0.5 * (std::f64::consts::PI * (hi - x) / ramp).cos()
    } else {
        1.0
    }
}

/// The frame generator in grid form: the image of the identity-point
/// sequence under the adjoint of the analysis transform, which is the
/// indicator of box x [0,1)^m.
pub fn eta_hat(
    ctx: &FrameContext,
    box_: &SpectralBox,
    res: &Resolution,
    variant: EtaVariant,
) -> GridFunction {
    let (shape, lam_weights) = make_shape(ctx, box_, res);
    let t_total = shape.t_total();
    let lam_total = shape.lam_total();
    let bounds = box_.f64_bounds();
    let lam_ramp = 1.0 / res.k_max as f64;
    let t_ramp = 3.0 / res.k_max as f64;
    let mut values = vec![Complex64::new(0.0, 0.0); lam_total * t_total];
    for lam in 0..lam_total {
        let coords = shape.lam_coords(lam);
        let lam_factor: f64 = match variant {
            EtaVariant::Sharp => 1.0,
            EtaVariant::Mollified => coords
                .iter()
                .zip(&bounds)
                .map(|(x, (lo, hi))| raised_cosine_edge(*x, *lo, *hi, lam_ramp.min(0.25 * (hi - lo))))
                .product(),
        };
        if lam_factor == 0.0 {
            continue;
        }
        for t in 0..t_total {
            let tc = shape.t_coords(t);
            if !tc.iter().all(|x| (0.0..1.0).contains(x)) {
                continue;
            }
            let t_factor: f64 = match variant {
                EtaVariant::Sharp => 1.0,
                EtaVariant::Mollified => tc
                    .iter()
                    .map(|x| raised_cosine_edge(*x, 0.0, 1.0, t_ramp.min(0.25)))
                    .product(),
            };
            values[lam * t_total + t] = Complex64::new(lam_factor * t_factor, 0.0);
        }
    }
    GridFunction {
        shape,
        values,
        lam_weights,
    }
}

/// Truncation window: ||k||_max <= k_max and l in [-l_half, l_half]^m.
#[derive(Debug, Clone, Serialize)]
pub struct LatticeWindow {
    pub k_max: i64,
    pub l_half: i64,
}

impl LatticeWindow {
    pub fn for_grid(shape: &GridShape, k_max: i64) -> Self {
        LatticeWindow {
            k_max,
            l_half: shape.t_half,
        }
    }

    pub fn k_len(&self) -> usize {
        (2 * self.k_max + 1) as usize
    }

    pub fn l_len(&self) -> usize {
        (2 * self.l_half + 1) as usize
    }
}

/// Windowed sequence over the lattice, indexed by (k, l).
pub struct SampleSequence {
    pub p: usize,
    pub m: usize,
    pub window: LatticeWindow,
    /// layout: l-major (odometer over m axes), then k (odometer over p axes)
    pub data: Vec<Complex64>,
}

impl SampleSequence {
    fn zeros(p: usize, m: usize, window: LatticeWindow) -> Self {
        let total = window.k_len().pow(p as u32) * window.l_len().pow(m as u32);
        SampleSequence {
            p,
            m,
            window,
            data: vec![Complex64::new(0.0, 0.0); total],
        }
    }

    pub fn k_stride(&self) -> usize {
        self.window.k_len().pow(self.p as u32)
    }

    pub fn l_flat(&self, l: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for &c in l {
            if c.abs() > self.window.l_half {
                return None;
            }
            flat = flat * self.window.l_len() + (c + self.window.l_half) as usize;
        }
        Some(flat)
    }

    pub fn k_flat(&self, k: &[i64]) -> Option<usize> {
        let mut flat = 0usize;
        for &c in k {
            if c.abs() > self.window.k_max {
                return None;
            }
            flat = flat * self.window.k_len() + (c + self.window.k_max) as usize;
        }
        Some(flat)
    }

    pub fn get(&self, k: &[i64], l: &[i64]) -> Option<Complex64> {
        let lf = self.l_flat(l)?;
        let kf = self.k_flat(k)?;
        Some(self.data[lf * self.k_stride() + kf])
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Mass on the outermost k-shell, as a fraction of the total.
    pub fn tail_shell_fraction(&self) -> f64 {
        let total = self.l2_norm_sq();
        if total == 0.0 {
            return 0.0;
        }
        let klen = self.window.k_len();
        let kmax = self.window.k_max;
        let mut shell = 0.0;
        for lf in 0..self.data.len() / self.k_stride() {
            for kf in 0..self.k_stride() {
                let mut rem = kf;
                let mut on_shell = false;
                for _ in 0..self.p {
                    let c = (rem % klen) as i64 - kmax;
                    rem /= klen;
                    if c.abs() == kmax {
                        on_shell = true;
                    }
                }
                if on_shell {
                    shell += self.data[lf * self.k_stride() + kf].norm_sqr();
                }
            }
        }
        shell / total
    }

    /// Entries as (k, l, value) triples.
    pub fn entries(&self) -> Vec<(Vec<i64>, Vec<i64>, Complex64)> {
        let klen = self.window.k_len();
        let llen = self.window.l_len();
        let mut out = Vec::with_capacity(self.data.len());
        for (flat, v) in self.data.iter().enumerate() {
            let kf = flat % self.k_stride();
            let mut lf = flat / self.k_stride();
            let mut l = vec![0i64; self.m];
            for d in (0..self.m).rev() {
                l[d] = (lf % llen) as i64 - self.window.l_half;
                lf /= llen;
            }
            let mut k = vec![0i64; self.p];
            let mut rem = kf;
            for d in (0..self.p).rev() {
                k[d] = (rem % klen) as i64 - self.window.k_max;
                rem /= klen;
            }
            out.push((k, l, *v));
        }
        out
    }
}

/// Integer power of a unit-modulus complex number by binary exponentiation.
fn cpow(z: Complex64, n: i64) -> Complex64 {
    let mut base = if n < 0 { z.conj() } else { z };
    let mut e = n.unsigned_abs();
    let mut acc = Complex64::new(1.0, 0.0);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

/// Per-grid phase data shared by the transform kernels.
struct PhaseData {
    /// t-dependent orbit-map component indices (0-based, within 0..p).
    dep: Vec<usize>,
    /// t-independent component indices.
    indep: Vec<usize>,
    /// phases of the t-independent components per lam node
    u: Vec<Vec<Complex64>>,
    /// action matrix at each unit-cell t-node (row-major p x p)
    pa_at: Vec<Vec<f64>>,
    /// embedded ideal coordinates per lam node
    f_embed: Vec<Vec<f64>>,
}

fn phase_data(ctx: &FrameContext, shape: &GridShape) -> PhaseData {
    let p = ctx.spec.p_dim;
    let nfree = ctx.map.nfree();
    let m = shape.m;
    let dep: Vec<usize> = (0..p)
        .filter(|&a| (nfree..nfree + m).any(|v| ctx.map.beta[a].degree_in(v) > 0))
        .collect();
    let indep: Vec<usize> = (0..p).filter(|a| !dep.contains(a)).collect();
    let lam_total = shape.lam_total();
    let mut f_embed = Vec::with_capacity(lam_total);
    let mut u = Vec::with_capacity(lam_total);
    for lam in 0..lam_total {
        let sigma = shape.lam_coords(lam);
        let mut f = vec![0.0; p];
        for (j, &idx) in ctx.map.cross.free.iter().enumerate() {
            f[idx - 1] = sigma[j];
        }
        u.push(
            indep
                .iter()
                .map(|&a| Complex64::from_polar(1.0, TWO_PI * f[a]))
                .collect(),
        );
        f_embed.push(f);
    }
    // action matrix on the t-nodes of the unit cell [0,1)^m
    let cell_nodes = shape.nt.pow(m as u32);
    let mut pa_at = Vec::with_capacity(cell_nodes);
    let mut tq = vec![0.0; m];
    for flat in 0..cell_nodes {
        let mut rem = flat;
        for d in (0..m).rev() {
            let j = rem % shape.nt;
            rem /= shape.nt;
            tq[d] = (j as f64 + 0.5) / shape.nt as f64;
        }
        pa_at.push(ctx.map.pa.eval_f64(&tq));
    }
    PhaseData {
        dep,
        indep,
        u,
        pa_at,
        f_embed,
    }
}

/// beta at (lam node, unit-cell t-node) from the precomputed action matrix.
fn beta_at(pd: &PhaseData, p: usize, lam: usize, cell_node: usize) -> Vec<f64> {
    let f = &pd.f_embed[lam];
    let pa = &pd.pa_at[cell_node];
    (0..p)
        .map(|i| (0..p).map(|j| pa[i * p + j] * f[j]).sum())
        .collect()
}

/// Flat index into the grid values for (lam, cell c, local cell node).
fn grid_index(shape: &GridShape, lam: usize, cells: &[i64], local: usize) -> usize {
    let len = shape.t_len();
    let mut t_flat = 0usize;
    for d in 0..shape.m {
        let div = shape.nt.pow((shape.m - 1 - d) as u32);
        let jq = (local / div) % shape.nt;
        let j_global = ((cells[d] + shape.t_half) as usize) * shape.nt + jq;
        t_flat = t_flat * len + j_global;
    }
    lam * shape.t_total() + t_flat
}

/// Odometer over l in [-l_half, l_half]^m.
fn l_values(window: &LatticeWindow, m: usize) -> Vec<Vec<i64>> {
    let llen = window.l_len();
    let total = llen.pow(m as u32);
    (0..total)
        .map(|mut flat| {
            let mut l = vec![0i64; m];
            for d in (0..m).rev() {
                l[d] = (flat % llen) as i64 - window.l_half;
                flat /= llen;
            }
            l
        })
        .collect()
}

/// Phase table z^k for k = -k_max..k_max, built by incremental products.
fn power_row(z: Complex64, klen: usize, kmax: i64) -> Vec<Complex64> {
    let mut row = Vec::with_capacity(klen);
    let mut pw = cpow(z, -kmax);
    for _ in 0..klen {
        row.push(pw);
        pw *= z;
    }
    row
}

/// The analysis transform: for each (k, l) in the window, the quadrature of
/// the integral over box x [0,1)^m of F(lam, t - l) e^(2 pi i <beta(lam,t), k>)
/// against the spectral measure. Deterministic given the grids.
pub fn j_transform(
    ctx: &FrameContext,
    grid: &GridFunction,
    window: &LatticeWindow,
) -> Result<SampleSequence> {
    let shape = &grid.shape;
    let p = ctx.spec.p_dim;
    let m = shape.m;
    // refuse windows that would silently drop occupied cells
    for cell in grid.occupied_cells() {
        if cell.iter().any(|c| c.abs() > window.l_half) {
            return Err(Error::input(format!(
                "window l-range {} is smaller than the grid support (cell {:?} occupied)",
                window.l_half, cell
            )));
        }
    }
    let pd = phase_data(ctx, shape);
    let dtm = shape.dtm();
    let cell_nodes = shape.nt.pow(m as u32);
    let ls = l_values(window, m);
    let klen = window.k_len();
    let kmax = window.k_max;
    let kernel = |lam_range: std::ops::Range<usize>| -> SampleSequence {
        let mut out = SampleSequence::zeros(p, m, window.clone());
        if pd.dep.len() <= 1 {
            // factored path: t-sum per dependent frequency, then the
            // independent axes by phase tables
            let a_dep = pd.dep.first().copied();
            for lam in lam_range {
                let w = grid.lam_weights[lam];
                if w == 0.0 {
                    continue;
                }
                let zdep: Vec<Complex64> = (0..cell_nodes)
                    .map(|cn| match a_dep {
                        Some(a) => Complex64::from_polar(1.0, TWO_PI * beta_at(&pd, p, lam, cn)[a]),
                        None => Complex64::new(1.0, 0.0),
                    })
                    .collect();
                for (lf, l) in ls.iter().enumerate() {
                    // F(lam, t - l) for t in the unit cell: cell at -l
                    let cells: Vec<i64> = l.iter().map(|&x| -x).collect();
                    if cells.iter().any(|c| *c < -shape.t_half || *c >= shape.t_half) {
                        continue;
                    }
                    let mut tsum = vec![Complex64::new(0.0, 0.0); klen];
                    let mut any = false;
                    for cn in 0..cell_nodes {
                        let fv = grid.values[grid_index(shape, lam, &cells, cn)];
                        if fv.norm_sqr() == 0.0 {
                            continue;
                        }
                        any = true;
                        let z = zdep[cn];
                        let mut pw = cpow(z, -kmax);
                        for slot in tsum.iter_mut() {
                            *slot += fv * pw;
                            pw *= z;
                        }
                    }
                    if !any {
                        continue;
                    }
                    for v in tsum.iter_mut() {
                        *v *= dtm * w;
                    }
                    accumulate_factored(&mut out, &pd, lam, lf, &tsum, a_dep, false);
                }
            }
        } else {
            // generic path: all phases per node, full k odometer
            for lam in lam_range {
                let w = grid.lam_weights[lam];
                if w == 0.0 {
                    continue;
                }
                for cn in 0..cell_nodes {
                    let beta = beta_at(&pd, p, lam, cn);
                    let tabs: Vec<Vec<Complex64>> = (0..p)
                        .map(|a| power_row(Complex64::from_polar(1.0, TWO_PI * beta[a]), klen, kmax))
                        .collect();
                    for (lf, l) in ls.iter().enumerate() {
                        let cells: Vec<i64> = l.iter().map(|&x| -x).collect();
                        if cells.iter().any(|c| *c < -shape.t_half || *c >= shape.t_half) {
                            continue;
                        }
                        let fv = grid.values[grid_index(shape, lam, &cells, cn)];
                        if fv.norm_sqr() == 0.0 {
                            continue;
                        }
                        accumulate_generic(&mut out, lf, &tabs, fv * (dtm * w));
                    }
                }
            }
        }
        out
    };
    Ok(run_blocks(shape.lam_total(), p, m, window, kernel))
}

/// Adds `tsum[k_dep]` spread over the independent k axes at fixed (lam, l);
/// `conj` conjugates the independent phases (adjoint-side kernels).
fn accumulate_factored(
    out: &mut SampleSequence,
    pd: &PhaseData,
    lam: usize,
    lf: usize,
    tsum: &[Complex64],
    a_dep: Option<usize>,
    conj: bool,
) {
    let p = out.p;
    let klen = out.window.k_len();
    let kmax = out.window.k_max;
    let base = lf * out.k_stride();
    let phases: Vec<Vec<Complex64>> = (0..p)
        .map(|a| {
            if Some(a) == a_dep {
                Vec::new()
            } else {
                let pos = pd.indep.iter().position(|&b| b == a).unwrap();
                let z = if conj { pd.u[lam][pos].conj() } else { pd.u[lam][pos] };
                power_row(z, klen, kmax)
            }
        })
        .collect();
    let total = klen.pow(p as u32);
    let mut idx = vec![0usize; p];
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..p).rev() {
            idx[d] = rem % klen;
            rem /= klen;
        }
        let mut val = Complex64::new(1.0, 0.0);
        let mut tval = tsum[kmax as usize];
        for a in 0..p {
            if Some(a) == a_dep {
                tval = tsum[idx[a]];
            } else {
                val *= phases[a][idx[a]];
            }
        }
        out.data[base + flat] += val * tval;
    }
}

/// Adds `scaled * prod_a tabs[a][k_a]` over the full k odometer at fixed l.
fn accumulate_generic(
    out: &mut SampleSequence,
    lf: usize,
    tabs: &[Vec<Complex64>],
    scaled: Complex64,
) {
    let p = out.p;
    let klen = out.window.k_len();
    let base = lf * out.k_stride();
    let total = klen.pow(p as u32);
    let mut idx = vec![0usize; p];
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..p).rev() {
            idx[d] = rem % klen;
            rem /= klen;
        }
        let mut val = scaled;
        for a in 0..p {
            val *= tabs[a][idx[a]];
        }
        out.data[base + flat] += val;
    }
}

/// Runs `kernel` over fixed contiguous lam blocks in parallel and combines
/// the partial sequences in block order.
fn run_blocks(
    lam_total: usize,
    p: usize,
    m: usize,
    window: &LatticeWindow,
    kernel: impl Fn(std::ops::Range<usize>) -> SampleSequence + Sync,
) -> SampleSequence {
    let blocks = REDUCE_BLOCKS.min(lam_total.max(1));
    let chunk = lam_total.div_ceil(blocks);
    let ranges: Vec<std::ops::Range<usize>> = (0..blocks)
        .map(|b| (b * chunk).min(lam_total)..((b + 1) * chunk).min(lam_total))
        .collect();
    let partials: Vec<SampleSequence> = ranges.into_par_iter().map(&kernel).collect();
    let mut out = SampleSequence::zeros(p, m, window.clone());
    for part in partials {
        for (o, v) in out.data.iter_mut().zip(part.data) {
            *o += v;
        }
    }
    out
}

/// Applies the fiber action of a lattice element exp Z(k) exp A(a) to one
/// spectral slice: the multiplier e^(2 pi i <beta(lam, x), k>) composed
/// with the t-shift by a.
///
/// Shifts must be grid-aligned (no interpolation); the action preserves
/// the slice norm up to mass shifted off the grid edge, which is checked.
pub fn sigma_action(
    ctx: &FrameContext,
    shape: &GridShape,
    sigma: &[f64],
    k: &[f64],
    a: &[f64],
    h: &[Complex64],
) -> Result<Vec<Complex64>> {
    let p = ctx.spec.p_dim;
    if k.len() != p {
        return Err(Error::input(format!("k must have {p} components")));
    }
    if a.len() != shape.m {
        return Err(Error::input(format!("a must have {} components", shape.m)));
    }
    let t_total = shape.t_total();
    if h.len() != t_total {
        return Err(Error::input(
            "slice length does not match the t-grid".to_string(),
        ));
    }
    let mut steps = vec![0i64; shape.m];
    for (d, &ad) in a.iter().enumerate() {
        let s = ad * shape.nt as f64;
        if (s - s.round()).abs() > 1e-9 {
            return Err(Error::input(format!(
                "shift {ad} is not aligned to the t-grid (multiples of 1/{})",
                shape.nt
            )));
        }
        steps[d] = s.round() as i64;
    }
    let nfree = ctx.map.nfree();
    let len = shape.t_len();
    let mut out = vec![Complex64::new(0.0, 0.0); t_total];
    let mut out_norm = 0.0;
    for t in 0..t_total {
        // shifted source index: value of h at node - a
        let mut rem = t;
        let mut src = 0usize;
        let mut valid = true;
        for d in 0..shape.m {
            let div = len.pow((shape.m - 1 - d) as u32);
            let j = (rem / div) as i64;
            rem %= div;
            let shifted = j - steps[d];
            if shifted < 0 || shifted >= len as i64 {
                valid = false;
                break;
            }
            src = src * len + shifted as usize;
        }
        if !valid {
            continue;
        }
        let hv = h[src];
        if hv.norm_sqr() == 0.0 {
            continue;
        }
        let x = shape.t_coords(t);
        let point: Vec<f64> = sigma[..nfree].iter().chain(x.iter()).copied().collect();
        let phase: f64 = (0..p)
            .map(|i| ctx.map.beta[i].eval_f64(&point) * k[i])
            .sum();
        out[t] = hv * Complex64::from_polar(1.0, TWO_PI * phase);
        out_norm += out[t].norm_sqr();
    }
    let in_norm: f64 = h.iter().map(|v| v.norm_sqr()).sum();
    if in_norm > 0.0 && ((out_norm - in_norm).abs() / in_norm) > 1e-9 {
        return Err(Error::input(
            "action moved mass off the grid edge; enlarge the t-grid".to_string(),
        ));
    }
    Ok(out)
}

/// Lattice generator for the fiber action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Identity,
    /// exp A_j (1-based)
    Complement(usize),
    /// exp Z_i (1-based)
    Ideal(usize),
}

/// Applies the fiber action of a generator to a whole grid function.
pub fn tau_action(
    ctx: &FrameContext,
    grid: &GridFunction,
    gamma: Generator,
) -> Result<GridFunction> {
    let shape = grid.shape.clone();
    let p = ctx.spec.p_dim;
    let t_total = shape.t_total();
    let lam_total = shape.lam_total();
    let mut values = vec![Complex64::new(0.0, 0.0); lam_total * t_total];
    let (k, a) = match gamma {
        Generator::Identity => {
            values.copy_from_slice(&grid.values);
            return Ok(GridFunction {
                shape,
                values,
                lam_weights: grid.lam_weights.clone(),
            });
        }
        Generator::Complement(j) => {
            if j == 0 || j > shape.m {
                return Err(Error::input(format!("no complement generator {j}")));
            }
            let mut a = vec![0.0; shape.m];
            a[j - 1] = 1.0;
            (vec![0.0; p], a)
        }
        Generator::Ideal(i) => {
            if i == 0 || i > p {
                return Err(Error::input(format!("no ideal generator {i}")));
            }
            let mut k = vec![0.0; p];
            k[i - 1] = 1.0;
            (k, vec![0.0; shape.m])
        }
    };
    for lam in 0..lam_total {
        let sigma = shape.lam_coords(lam);
        let slice = &grid.values[lam * t_total..(lam + 1) * t_total];
        let acted = sigma_action(ctx, &shape, &sigma, &k, &a, slice)?;
        values[lam * t_total..(lam + 1) * t_total].copy_from_slice(&acted);
    }
    Ok(GridFunction {
        shape,
        values,
        lam_weights: grid.lam_weights.clone(),
    })
}

/// exp(ad A(l)) restricted to the ideal as an integer matrix.
fn exp_ad_at(ctx: &FrameContext, l: &[i64]) -> Result<Vec<Vec<i64>>> {
    let p = ctx.spec.p_dim;
    let mats = ctx.exp_ad.as_ref().ok_or_else(|| {
        Error::rejection("lattice condition fails: the action is not integral".to_string())
    })?;
    let identity = || -> Vec<Vec<i64>> {
        (0..p)
            .map(|i| (0..p).map(|j| i64::from(i == j)).collect())
            .collect()
    };
    let mul = |a: &[Vec<i64>], b: &[Vec<i64>]| -> Vec<Vec<i64>> {
        (0..p)
            .map(|i| {
                (0..p)
                    .map(|j| (0..p).map(|t| a[i][t] * b[t][j]).sum())
                    .collect()
            })
            .collect()
    };
    let mut acc = identity();
    for (idx, &lk) in l.iter().enumerate() {
        if lk == 0 {
            continue;
        }
        let base = &mats[idx];
        let step = if lk > 0 {
            base.clone()
        } else {
            // inverse of a unipotent integer matrix: alternating geometric
            // series of its nilpotent part, still integral
            let mut n = base.clone();
            for (i, row) in n.iter_mut().enumerate() {
                row[i] -= 1;
            }
            let mut inv = identity();
            let mut pow = identity();
            let mut sign = -1i64;
            for _ in 0..p {
                pow = mul(&pow, &n);
                if pow.iter().all(|r| r.iter().all(|&x| x == 0)) {
                    break;
                }
                for i in 0..p {
                    for j in 0..p {
                        inv[i][j] += sign * pow[i][j];
                    }
                }
                sign = -sign;
            }
            inv
        };
        for _ in 0..lk.unsigned_abs() {
            acc = mul(&acc, &step);
        }
    }
    Ok(acc)
}

/// Outcome of the isometry check.
#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub norm_ratio: f64,
    pub tail_estimate: f64,
    pub f_norm_sq: f64,
    pub seq_norm_sq: f64,
    pub zero_norm: bool,
    pub containment_tier: String,
    pub forced: bool,
}

/// Verifies that the analysis transform preserves the norm of `grid`.
///
/// Refuses when containment of the box is not established, unless `force`
/// is set (negative controls).
pub fn isometry_test(
    ctx: &FrameContext,
    box_: &SpectralBox,
    grid: &GridFunction,
    window: &LatticeWindow,
    force: bool,
    seed: u64,
) -> Result<IsometryReport> {
    let check = check_containment(&ctx.spec, &ctx.map, box_, 20_000, seed)?;
    if !check.contained && !force {
        return Err(Error::rejection(format!(
            "containment of {} not established; the isometry claim is unsupported \
             (pass force to run as a negative control)",
            box_.describe()
        )));
    }
    let f_norm_sq = grid.norm_sq();
    if f_norm_sq == 0.0 {
        return Ok(IsometryReport {
            norm_ratio: 1.0,
            tail_estimate: 0.0,
            f_norm_sq,
            seq_norm_sq: 0.0,
            zero_norm: true,
            containment_tier: check.tier,
            forced: force && !check.contained,
        });
    }
    let seq = j_transform(ctx, grid, window)?;
    let seq_norm_sq = seq.l2_norm_sq();
    Ok(IsometryReport {
        norm_ratio: seq_norm_sq / f_norm_sq,
        tail_estimate: seq.tail_shell_fraction(),
        f_norm_sq,
        seq_norm_sq,
        zero_norm: false,
        containment_tier: check.tier,
        forced: force && !check.contained,
    })
}

/// Maximum deviation between transforming the acted function and acting on
/// the transformed sequence, over the window interior where both sides are
/// defined.
pub fn intertwining_test(
    ctx: &FrameContext,
    grid: &GridFunction,
    window: &LatticeWindow,
    gamma: Generator,
) -> Result<f64> {
    let acted = tau_action(ctx, grid, gamma)?;
    let lhs = j_transform(ctx, &acted, window)?;
    let rhs = j_transform(ctx, grid, window)?;
    let mut dev: f64 = 0.0;
    match gamma {
        Generator::Identity => {
            for (a, b) in lhs.data.iter().zip(rhs.data.iter()) {
                dev = dev.max((a - b).norm());
            }
        }
        Generator::Complement(j) => {
            // right action shifts l by the generator
            for (k, l, v) in lhs.entries() {
                let mut l2 = l.clone();
                l2[j - 1] += 1;
                if let Some(r) = rhs.get(&k, &l2) {
                    dev = dev.max((v - r).norm());
                }
            }
        }
        Generator::Ideal(i) => {
            // right action maps k to k + exp(ad A(l)) e_i at each l
            for (k, l, v) in lhs.entries() {
                let e = exp_ad_at(ctx, &l)?;
                let mut k2 = k.clone();
                for (row, slot) in k2.iter_mut().enumerate() {
                    *slot += e[row][i - 1];
                }
                if let Some(r) = rhs.get(&k2, &l) {
                    dev = dev.max((v - r).norm());
                }
            }
        }
    }
    Ok(dev)
}

/// Outcome of the frame-sum check.
#[derive(Debug, Clone, Serialize)]
pub struct ParsevalReport {
    pub frame_sum_ratio: f64,
    pub zero_norm: bool,
    pub eta: EtaVariant,
}

/// Frame coefficients of `grid` against the lattice orbit of the frame
/// generator: c(k, l) = <F, tau(gamma) eta>.
///
/// Computed by direct grid inner products; this is an independent route
/// from the analysis transform (the two are adjoint-related entrywise).
pub fn frame_coefficients(
    ctx: &FrameContext,
    box_: &SpectralBox,
    grid: &GridFunction,
    window: &LatticeWindow,
    variant: EtaVariant,
) -> Result<SampleSequence> {
    let shape = &grid.shape;
    let p = ctx.spec.p_dim;
    let m = shape.m;
    let pd = phase_data(ctx, shape);
    let (eta_lam, eta_t) = eta_factors(shape, box_, window.k_max, variant);
    let dtm = shape.dtm();
    let cell_nodes = shape.nt.pow(m as u32);
    let ls = l_values(window, m);
    let klen = window.k_len();
    let kmax = window.k_max;
    let kernel = |lam_range: std::ops::Range<usize>| -> SampleSequence {
        let mut out = SampleSequence::zeros(p, m, window.clone());
        for lam in lam_range {
            let w = grid.lam_weights[lam] * eta_lam[lam];
            if w == 0.0 {
                continue;
            }
            if pd.dep.len() <= 1 {
                let a_dep = pd.dep.first().copied();
                // conjugated phases: the coefficients pair F against the
                // generator's multiplier
                let zdep: Vec<Complex64> = (0..cell_nodes)
                    .map(|cn| match a_dep {
                        Some(a) => {
                            Complex64::from_polar(1.0, -TWO_PI * beta_at(&pd, p, lam, cn)[a])
                        }
                        None => Complex64::new(1.0, 0.0),
                    })
                    .collect();
                for (lf, l) in ls.iter().enumerate() {
                    // F sampled on the cell at +l (support of the shifted
                    // generator)
                    if l.iter().any(|c| *c < -shape.t_half || *c >= shape.t_half) {
                        continue;
                    }
                    let mut tsum = vec![Complex64::new(0.0, 0.0); klen];
                    let mut any = false;
                    for cn in 0..cell_nodes {
                        if eta_t[cn] == 0.0 {
                            continue;
                        }
                        let fv = grid.values[grid_index(shape, lam, l, cn)];
                        if fv.norm_sqr() == 0.0 {
                            continue;
                        }
                        any = true;
                        let z = zdep[cn];
                        let mut pw = cpow(z, -kmax);
                        let scaled = fv * eta_t[cn];
                        for slot in tsum.iter_mut() {
                            *slot += scaled * pw;
                            pw *= z;
                        }
                    }
                    if !any {
                        continue;
                    }
                    for v in tsum.iter_mut() {
                        *v *= dtm * w;
                    }
                    accumulate_factored(&mut out, &pd, lam, lf, &tsum, a_dep, true);
                }
            } else {
                for cn in 0..cell_nodes {
                    if eta_t[cn] == 0.0 {
                        continue;
                    }
                    let beta = beta_at(&pd, p, lam, cn);
                    let tabs: Vec<Vec<Complex64>> = (0..p)
                        .map(|a| {
                            power_row(Complex64::from_polar(1.0, -TWO_PI * beta[a]), klen, kmax)
                        })
                        .collect();
                    for (lf, l) in ls.iter().enumerate() {
                        if l.iter().any(|c| *c < -shape.t_half || *c >= shape.t_half) {
                            continue;
                        }
                        let fv = grid.values[grid_index(shape, lam, l, cn)];
                        if fv.norm_sqr() == 0.0 {
                            continue;
                        }
                        accumulate_generic(&mut out, lf, &tabs, fv * (dtm * w * eta_t[cn]));
                    }
                }
            }
        }
        out
    };
    Ok(run_blocks(shape.lam_total(), p, m, window, kernel))
}

/// Generator window factors on the lam nodes and the unit-cell t-nodes.
fn eta_factors(
    shape: &GridShape,
    box_: &SpectralBox,
    k_max: i64,
    variant: EtaVariant,
) -> (Vec<f64>, Vec<f64>) {
    let bounds = box_.f64_bounds();
    let lam_ramp = 1.0 / k_max as f64;
    let t_ramp = 3.0 / k_max as f64;
    let eta_lam: Vec<f64> = (0..shape.lam_total())
        .map(|lam| match variant {
            EtaVariant::Sharp => 1.0,
            EtaVariant::Mollified => shape
                .lam_coords(lam)
                .iter()
                .zip(&bounds)
                .map(|(x, (lo, hi))| raised_cosine_edge(*x, *lo, *hi, lam_ramp.min(0.25 * (hi - lo))))
                .product(),
        })
        .collect();
    let cell_nodes = shape.nt.pow(shape.m as u32);
    let eta_t: Vec<f64> = (0..cell_nodes)
        .map(|flat| {
            let mut rem = flat;
            let mut val = 1.0;
            for _ in 0..shape.m {
                let j = rem % shape.nt;
                rem /= shape.nt;
                let x = (j as f64 + 0.5) / shape.nt as f64;
                val *= match variant {
                    EtaVariant::Sharp => 1.0,
                    EtaVariant::Mollified => raised_cosine_edge(x, 0.0, 1.0, t_ramp.min(0.25)),
                };
            }
            val
        })
        .collect();
    (eta_lam, eta_t)
}

/// Frame-sum ratio: the sum over the window of |<F, tau(gamma) eta>|^2
/// divided by ||F||^2.
pub fn parseval_check(
    ctx: &FrameContext,
    box_: &SpectralBox,
    grid: &GridFunction,
    window: &LatticeWindow,
    variant: EtaVariant,
    force: bool,
    seed: u64,
) -> Result<ParsevalReport> {
    let check = check_containment(&ctx.spec, &ctx.map, box_, 20_000, seed)?;
    if !check.contained && !force {
        return Err(Error::rejection(format!(
            "containment of {} not established; the frame claim is unsupported",
            box_.describe()
        )));
    }
    let f_norm_sq = grid.norm_sq();
    if f_norm_sq == 0.0 {
        return Ok(ParsevalReport {
            frame_sum_ratio: 0.0,
            zero_norm: true,
            eta: variant,
        });
    }
    let coeffs = frame_coefficients(ctx, box_, grid, window, variant)?;
    Ok(ParsevalReport {
        frame_sum_ratio: coeffs.l2_norm_sq() / f_norm_sq,
        zero_norm: false,
        eta: variant,
    })
}

/// Outcome of the reconstruction check.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructReport {
    pub rel_l2_error: f64,
    pub zero_norm: bool,
    pub eta: EtaVariant,
}

/// Synthesizes from the window's frame coefficients and reports the
/// relative L2 distance to the input.
pub fn reconstruct(
    ctx: &FrameContext,
    box_: &SpectralBox,
    grid: &GridFunction,
    window: &LatticeWindow,
    variant: EtaVariant,
    force: bool,
    seed: u64,
) -> Result<ReconstructReport> {
    let check = check_containment(&ctx.spec, &ctx.map, box_, 20_000, seed)?;
    if !check.contained && !force {
        return Err(Error::rejection(format!(
            "containment of {} not established; reconstruction is unsupported",
            box_.describe()
        )));
    }
    let f_norm_sq = grid.norm_sq();
    if f_norm_sq == 0.0 {
        return Ok(ReconstructReport {
            rel_l2_error: 0.0,
            zero_norm: true,
            eta: variant,
        });
    }
    let coeffs = frame_coefficients(ctx, box_, grid, window, variant)?;
    let synth = synthesize(ctx, box_, &grid.shape, &coeffs, variant);
    let t_total = grid.shape.t_total();
    let dtm = grid.shape.dtm();
    let mut err = 0.0;
    for (lam, w) in grid.lam_weights.iter().enumerate() {
        let mut s = 0.0;
        for (a, b) in grid.values[lam * t_total..(lam + 1) * t_total]
            .iter()
            .zip(&synth[lam * t_total..(lam + 1) * t_total])
        {
            s += (a - b).norm_sqr();
        }
        err += w * s * dtm;
    }
    Ok(ReconstructReport {
        rel_l2_error: (err / f_norm_sq).sqrt(),
        zero_norm: false,
        eta: variant,
    })
}

/// Frame synthesis: sum over window entries of c(k, l) tau(gamma) eta,
/// evaluated on the grid. At a node (lam, t) only l = cell(t) contributes.
fn synthesize(
    ctx: &FrameContext,
    box_: &SpectralBox,
    shape: &GridShape,
    coeffs: &SampleSequence,
    variant: EtaVariant,
) -> Vec<Complex64> {
    let p = ctx.spec.p_dim;
    let pd = phase_data(ctx, shape);
    let lam_total = shape.lam_total();
    let t_total = shape.t_total();
    let klen = coeffs.window.k_len();
    let kmax = coeffs.window.k_max;
    let (eta_lam, eta_t) = eta_factors(shape, box_, kmax, variant);
    let slices: Vec<Vec<Complex64>> = (0..lam_total)
        .into_par_iter()
        .map(|lam| {
            let mut slice = vec![Complex64::new(0.0, 0.0); t_total];
            if eta_lam[lam] == 0.0 {
                return slice;
            }
            if pd.dep.len() <= 1 {
                let a_dep = pd.dep.first().copied();
                // contract the independent axes first: A[l][k_dep]
                let llen_total = coeffs.data.len() / coeffs.k_stride();
                let mut contracted = vec![Complex64::new(0.0, 0.0); llen_total * klen];
                let phases: Vec<Vec<Complex64>> = (0..p)
                    .map(|a| {
                        if Some(a) == a_dep {
                            Vec::new()
                        } else {
                            let pos = pd.indep.iter().position(|&b| b == a).unwrap();
                            power_row(pd.u[lam][pos], klen, kmax)
                        }
                    })
                    .collect();
                let mut idx = vec![0usize; p];
                for lf in 0..llen_total {
                    let base = lf * coeffs.k_stride();
                    for flat in 0..coeffs.k_stride() {
                        let c = coeffs.data[base + flat];
                        if c.norm_sqr() == 0.0 {
                            continue;
                        }
                        let mut rem = flat;
                        for d in (0..p).rev() {
                            idx[d] = rem % klen;
                            rem /= klen;
                        }
                        let mut val = c;
                        let mut kd = kmax as usize;
                        for a in 0..p {
                            if Some(a) == a_dep {
                                kd = idx[a];
                            } else {
                                val *= phases[a][idx[a]];
                            }
                        }
                        contracted[lf * klen + kd] += val;
                    }
                }
                for t in 0..t_total {
                    let cells = shape.t_cells(t);
                    let Some(lf) = coeffs.l_flat(&cells) else {
                        continue;
                    };
                    let local = shape.t_local(t);
                    let etf = eta_t[local];
                    if etf == 0.0 {
                        continue;
                    }
                    let acc = match a_dep {
                        Some(a) => {
                            let z =
                                Complex64::from_polar(1.0, TWO_PI * beta_at(&pd, p, lam, local)[a]);
                            let mut pw = cpow(z, -kmax);
                            let mut acc = Complex64::new(0.0, 0.0);
                            for kd in 0..klen {
                                acc += contracted[lf * klen + kd] * pw;
                                pw *= z;
                            }
                            acc
                        }
                        None => contracted[lf * klen + kmax as usize],
                    };
                    slice[t] = acc * (eta_lam[lam] * etf);
                }
            } else {
                for t in 0..t_total {
                    let cells = shape.t_cells(t);
                    let Some(lf) = coeffs.l_flat(&cells) else {
                        continue;
                    };
                    let local = shape.t_local(t);
                    let etf = eta_t[local];
                    if etf == 0.0 {
                        continue;
                    }
                    let beta = beta_at(&pd, p, lam, local);
                    let tabs: Vec<Vec<Complex64>> = (0..p)
                        .map(|a| power_row(Complex64::from_polar(1.0, TWO_PI * beta[a]), klen, kmax))
                        .collect();
                    let base = lf * coeffs.k_stride();
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut idx = vec![0usize; p];
                    for flat in 0..coeffs.k_stride() {
                        let c = coeffs.data[base + flat];
                        if c.norm_sqr() == 0.0 {
                            continue;
                        }
                        let mut rem = flat;
                        for d in (0..p).rev() {
                            idx[d] = rem % klen;
                            rem /= klen;
                        }
                        let mut val = c;
                        for a in 0..p {
                            val *= tabs[a][idx[a]];
                        }
                        acc += val;
                    }
                    slice[t] = acc * (eta_lam[lam] * etf);
                }
            }
            slice
        })
        .collect();
    let mut out = vec![Complex64::new(0.0, 0.0); lam_total * t_total];
    for (lam, slice) in slices.into_iter().enumerate() {
        out[lam * t_total..(lam + 1) * t_total].copy_from_slice(&slice);
    }
    out
}

/// Writes a grid function as CSV: one row per node, spectral coordinates,
/// t coordinates, then real and imaginary parts.
pub fn grid_to_csv(grid: &GridFunction, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let nfree = grid.shape.lam_axes.len();
    let m = grid.shape.m;
    let mut header: Vec<String> = (1..=nfree).map(|i| format!("l{i}")).collect();
    header.extend((1..=m).map(|i| format!("t{i}")));
    header.push("re".to_string());
    header.push("im".to_string());
    writeln!(f, "{}", header.join(","))?;
    let t_total = grid.shape.t_total();
    for lam in 0..grid.shape.lam_total() {
        let lc = grid.shape.lam_coords(lam);
        for t in 0..t_total {
            let tc = grid.shape.t_coords(t);
            let v = grid.values[lam * t_total + t];
            let mut row: Vec<String> = lc.iter().map(|x| format!("{x}")).collect();
            row.extend(tc.iter().map(|x| format!("{x}")));
            row.push(format!("{}", v.re));
            row.push(format!("{}", v.im));
            writeln!(f, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// Writes a sequence as CSV: k indices, l indices, real and imaginary parts.
pub fn seq_to_csv(seq: &SampleSequence, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<String> = (1..=seq.p).map(|i| format!("k{i}")).collect();
    header.extend((1..=seq.m).map(|i| format!("l{i}")));
    header.push("re".to_string());
    header.push("im".to_string());
    writeln!(f, "{}", header.join(","))?;
    for (k, l, v) in seq.entries() {
        let mut row: Vec<String> = k.iter().map(|x| x.to_string()).collect();
        row.extend(l.iter().map(|x| x.to_string()));
        row.push(format!("{}", v.re));
        row.push(format!("{}", v.im));
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes the raw values as little-endian f64 pairs (re, im) in index
/// order (spectral-major, then t).
pub fn grid_to_binary(grid: &GridFunction, path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in &grid.values {
        f.write_all(&v.re.to_le_bytes())?;
        f.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::rational::rat;

    fn heis_ctx() -> FrameContext {
        frame_context(&corpus::get("heisenberg").unwrap(), 25, 0xC0FFEE).unwrap()
    }

    fn small_res() -> Resolution {
        Resolution {
            lam_nodes: 64,
            t_half: 2,
            nt: 32,
            k_max: 16,
        }
    }

    fn quarter_box() -> SpectralBox {
        SpectralBox::symmetric(&rat(1, 4), 1)
    }

    #[test]
    fn zero_function_maps_to_zero() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let (shape, lam_weights) = make_shape(&ctx, &box_, &res);
        let values = vec![Complex64::new(0.0, 0.0); shape.lam_total() * shape.t_total()];
        let grid = GridFunction {
            shape,
            values,
            lam_weights,
        };
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let seq = j_transform(&ctx, &grid, &window).unwrap();
        assert_eq!(seq.l2_norm_sq(), 0.0);
        let rep = isometry_test(&ctx, &box_, &grid, &window, false, 1).unwrap();
        assert!(rep.zero_norm);
        assert_eq!(rep.norm_ratio, 1.0);
    }

    #[test]
    fn entry_at_origin_is_the_plain_integral() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let bump = &reference_bumps(&box_, 1)[0];
        let grid = bump_grid(&ctx, &box_, &res, bump);
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let seq = j_transform(&ctx, &grid, &window).unwrap();
        // direct quadrature of F over box x [0,1)
        let t_total = grid.shape.t_total();
        let mut direct = Complex64::new(0.0, 0.0);
        for lam in 0..grid.shape.lam_total() {
            for t in 0..t_total {
                if grid.shape.t_cells(t) == vec![0] {
                    direct +=
                        grid.values[lam * t_total + t] * grid.lam_weights[lam] * grid.shape.dtm();
                }
            }
        }
        let got = seq.get(&[0, 0], &[0]).unwrap();
        assert!((got - direct).norm() < 1e-12, "{got} vs {direct}");
    }

    #[test]
    fn transform_is_linear() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let bumps = reference_bumps(&box_, 1);
        let f = bump_grid(&ctx, &box_, &res, &bumps[0]);
        let g = bump_grid(&ctx, &box_, &res, &bumps[1]);
        let window = LatticeWindow::for_grid(&f.shape, res.k_max);
        let a = Complex64::new(0.7, -0.3);
        let b = Complex64::new(-1.2, 0.4);
        let mut combo = f.clone();
        for (c, (x, y)) in combo.values.iter_mut().zip(f.values.iter().zip(&g.values)) {
            *c = a * x + b * y;
        }
        let sf = j_transform(&ctx, &f, &window).unwrap();
        let sg = j_transform(&ctx, &g, &window).unwrap();
        let sc = j_transform(&ctx, &combo, &window).unwrap();
        let mut dev: f64 = 0.0;
        for ((x, y), z) in sf.data.iter().zip(&sg.data).zip(&sc.data) {
            dev = dev.max((a * x + b * y - z).norm());
        }
        assert!(dev < 1e-12, "linearity deviation {dev}");
    }

    #[test]
    fn factored_path_matches_brute_force() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = Resolution {
            lam_nodes: 16,
            t_half: 2,
            nt: 16,
            k_max: 6,
        };
        let grid = bump_grid(&ctx, &box_, &res, &reference_bumps(&box_, 1)[0]);
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let fast = j_transform(&ctx, &grid, &window).unwrap();
        // brute-force triple loop over nodes and the full k grid
        let shape = &grid.shape;
        let p = 2;
        let mut brute = SampleSequence::zeros(p, 1, window.clone());
        let pdd = phase_data(&ctx, shape);
        let dtm = shape.dtm();
        for lam in 0..shape.lam_total() {
            let w = grid.lam_weights[lam];
            for cn in 0..shape.nt {
                let beta = beta_at(&pdd, p, lam, cn);
                for (lf, l) in l_values(&window, 1).iter().enumerate() {
                    let cells = vec![-l[0]];
                    if cells[0] < -shape.t_half || cells[0] >= shape.t_half {
                        continue;
                    }
                    let fv = grid.values[grid_index(shape, lam, &cells, cn)];
                    if fv.norm_sqr() == 0.0 {
                        continue;
                    }
                    for k1 in -window.k_max..=window.k_max {
                        for k2 in -window.k_max..=window.k_max {
                            let phase = TWO_PI * (beta[0] * k1 as f64 + beta[1] * k2 as f64);
                            let kf = brute.k_flat(&[k1, k2]).unwrap();
                            let slot = lf * brute.k_stride() + kf;
                            brute.data[slot] += fv * Complex64::from_polar(1.0, phase) * (dtm * w);
                        }
                    }
                }
            }
        }
        let mut dev: f64 = 0.0;
        for (a, b) in fast.data.iter().zip(&brute.data) {
            dev = dev.max((a - b).norm());
        }
        assert!(dev < 1e-10, "fast vs brute deviation {dev}");
    }

    #[test]
    fn sigma_action_identity_shift_and_multiplier() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let grid = bump_grid(&ctx, &box_, &res, &reference_bumps(&box_, 1)[0]);
        let shape = grid.shape.clone();
        let t_total = shape.t_total();
        let slice = &grid.values[5 * t_total..6 * t_total];
        let sigma = [shape.lam_axes[0].node(5)];
        // identity leaves the slice unchanged
        let same = sigma_action(&ctx, &shape, &sigma, &[0.0, 0.0], &[0.0], slice).unwrap();
        assert_eq!(&same, slice);
        // pure shift preserves the norm exactly (support stays inside)
        let shifted = sigma_action(&ctx, &shape, &sigma, &[0.0, 0.0], &[1.0], slice).unwrap();
        let n0: f64 = slice.iter().map(|v| v.norm_sqr()).sum();
        let n1: f64 = shifted.iter().map(|v| v.norm_sqr()).sum();
        assert!((n0 - n1).abs() <= 1e-12 * n0.max(1.0));
        // misaligned shift is refused
        assert!(sigma_action(&ctx, &shape, &sigma, &[0.0, 0.0], &[0.3 / 7.0], slice).is_err());
        // central generator: multiplier exp(2 pi i lambda), x-independent
        let acted = sigma_action(&ctx, &shape, &sigma, &[1.0, 0.0], &[0.0], slice).unwrap();
        let expect = Complex64::from_polar(1.0, TWO_PI * sigma[0]);
        for (a, h) in acted.iter().zip(slice) {
            if h.norm_sqr() > 0.0 {
                assert!((a - h * expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn window_smaller_than_support_is_refused() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let grid = bump_grid(&ctx, &box_, &res, &reference_bumps(&box_, 1)[1]);
        // bump 2 occupies the cell at -2; a window with l_half = 1 drops it
        let window = LatticeWindow {
            k_max: 8,
            l_half: 1,
        };
        assert!(j_transform(&ctx, &grid, &window).is_err());
    }

    #[test]
    fn isometry_refused_without_containment() {
        let ctx = heis_ctx();
        let box_ = SpectralBox::symmetric(&rat(9, 5), 1);
        let res = small_res();
        let grid = bump_grid(&ctx, &box_, &res, &centered_bump(&box_, 1));
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let err = isometry_test(&ctx, &box_, &grid, &window, false, 1).unwrap_err();
        assert!(matches!(err, Error::Rejection(_)));
        // forced run labels itself
        let rep = isometry_test(&ctx, &box_, &grid, &window, true, 1).unwrap();
        assert!(rep.forced);
    }

    #[test]
    fn intertwining_identity_is_exact() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let grid = bump_grid(&ctx, &box_, &res, &reference_bumps(&box_, 1)[0]);
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let dev = intertwining_test(&ctx, &grid, &window, Generator::Identity).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn intertwining_generators_at_small_resolution() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let grid = bump_grid(&ctx, &box_, &res, &reference_bumps(&box_, 1)[0]);
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let dev_a = intertwining_test(&ctx, &grid, &window, Generator::Complement(1)).unwrap();
        assert!(dev_a < 1e-9, "complement generator deviation {dev_a}");
        for i in 1..=2 {
            let dev_z = intertwining_test(&ctx, &grid, &window, Generator::Ideal(i)).unwrap();
            assert!(dev_z < 1e-9, "ideal generator {i} deviation {dev_z}");
        }
    }

    #[test]
    fn parseval_agrees_with_isometry() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let grid = bump_grid(&ctx, &box_, &res, &reference_bumps(&box_, 1)[0]);
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let iso = isometry_test(&ctx, &box_, &grid, &window, false, 1).unwrap();
        let par = parseval_check(&ctx, &box_, &grid, &window, EtaVariant::Sharp, false, 1).unwrap();
        assert!(
            (iso.norm_ratio - par.frame_sum_ratio).abs() < 1e-9,
            "{} vs {}",
            iso.norm_ratio,
            par.frame_sum_ratio
        );
    }

    #[test]
    fn parseval_zero_overlap_is_flagged_zero() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        // bump centered far outside the box: zero grid overlap
        let bump = BumpSpec {
            lam_center: vec![10.0],
            lam_halfwidth: vec![0.05],
            t_center: vec![0.5],
            t_halfwidth: vec![0.5],
        };
        let grid = bump_grid(&ctx, &box_, &res, &bump);
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let par = parseval_check(&ctx, &box_, &grid, &window, EtaVariant::Sharp, false, 1).unwrap();
        assert!(par.zero_norm);
        assert_eq!(par.frame_sum_ratio, 0.0);
    }

    #[test]
    fn reconstruction_zero_function() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let (shape, lam_weights) = make_shape(&ctx, &box_, &res);
        let values = vec![Complex64::new(0.0, 0.0); shape.lam_total() * shape.t_total()];
        let grid = GridFunction {
            shape,
            values,
            lam_weights,
        };
        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let rep = reconstruct(&ctx, &box_, &grid, &window, EtaVariant::Sharp, false, 1).unwrap();
        assert!(rep.zero_norm);
        assert_eq!(rep.rel_l2_error, 0.0);
    }

    #[test]
    fn reconstruction_improves_with_window() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = small_res();
        let grid = bump_grid(&ctx, &box_, &res, &reference_bumps(&box_, 1)[0]);
        let wide = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let narrow = LatticeWindow::for_grid(&grid.shape, 4);
        let e_wide = reconstruct(&ctx, &box_, &grid, &wide, EtaVariant::Sharp, false, 1)
            .unwrap()
            .rel_l2_error;
        let e_narrow = reconstruct(&ctx, &box_, &grid, &narrow, EtaVariant::Sharp, false, 1)
            .unwrap()
            .rel_l2_error;
        assert!(
            e_narrow > e_wide,
            "narrow {e_narrow} should exceed wide {e_wide}"
        );
    }

    #[test]
    fn csv_export_shapes() {
        let ctx = heis_ctx();
        let box_ = quarter_box();
        let res = Resolution {
            lam_nodes: 4,
            t_half: 1,
            nt: 4,
            k_max: 2,
        };
        let grid = bump_grid(&ctx, &box_, &res, &centered_bump(&box_, 1));
        let dir = tempfile::tempdir().unwrap();
        let gpath = dir.path().join("grid.csv");
        grid_to_csv(&grid, &gpath).unwrap();
        let text = std::fs::read_to_string(&gpath).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 8);
        assert!(text.lines().next().unwrap().starts_with("l1,t1,re,im"));

        let window = LatticeWindow::for_grid(&grid.shape, res.k_max);
        let seq = j_transform(&ctx, &grid, &window).unwrap();
        let spath = dir.path().join("seq.csv");
        seq_to_csv(&seq, &spath).unwrap();
        let text = std::fs::read_to_string(&spath).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 * 5 * 3);

        let bpath = dir.path().join("grid.f64");
        grid_to_binary(&grid, &bpath).unwrap();
        let bytes = std::fs::metadata(&bpath).unwrap().len();
        assert_eq!(bytes, (4 * 8 * 16) as u64);
    }
}
