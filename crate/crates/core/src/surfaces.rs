//! Oriented 7-surfaces in the octonions (spheres and tubes around compact
//! cores) and their quadrature nodes.
//!
//! Every surface is a union of patches, each parametrised over a 7-box.
//! Nodes carry the vector surface element `n dS` scaled by the quadrature
//! weight, oriented away from the nearest core point.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::matrix::{Lu, RealMatrix8, Tangents};
use crate::octonion::Octonion;
use crate::quadrature::gauss_legendre_on;

/// Nodes handled by one unit of parallel work. Fixed so that reductions are
/// bit-for-bit reproducible regardless of thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurfaceError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("tube thickness must be positive, got {0}")]
    NonPositiveThickness(f64),
    #[error("tube self-intersects: eps = {eps} is not below the core reach {reach}")]
    SelfIntersecting { eps: f64, reach: f64 },
    #[error("invalid core: {0}")]
    InvalidCore(String),
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("orientation check failed on {bad} of {total} nodes (parametrization bug)")]
    Orientation { bad: usize, total: usize },
    #[error("cannot parse surface {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

/// Quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    GaussLegendreTensor,
    MonteCarlo,
}

/// Resolution and rule for surface integration.
///
/// The tensor rule uses Gauss-Legendre nodes on every bounded parameter and
/// the (offset) trapezoid rule on full-turn angles, which are periodic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rule: Rule,
    /// Nodes per parameter for the tensor rule.
    pub nodes_per_dim: usize,
    /// Per-parameter override of `nodes_per_dim`, in patch parameter order.
    pub per_parameter: Option<[usize; 7]>,
    /// Total samples for Monte Carlo.
    pub total_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rule: Rule::GaussLegendreTensor,
            nodes_per_dim: 8,
            per_parameter: None,
            total_samples: 1 << 20,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn tensor(nodes_per_dim: usize) -> Self {
        QuadratureSpec { rule: Rule::GaussLegendreTensor, nodes_per_dim, ..Default::default() }
    }

    /// Tensor rule with its own node count for each of the seven parameters.
    pub fn anisotropic(counts: [usize; 7]) -> Self {
        QuadratureSpec {
            rule: Rule::GaussLegendreTensor,
            nodes_per_dim: counts.iter().copied().max().unwrap_or(0),
            per_parameter: Some(counts),
            ..Default::default()
        }
    }

    pub fn monte_carlo(total_samples: usize, seed: u64) -> Self {
        QuadratureSpec { rule: Rule::MonteCarlo, total_samples, seed, ..Default::default() }
    }

    /// Tensor node counts per parameter.
    pub fn counts(&self) -> [usize; 7] {
        self.per_parameter.unwrap_or([self.nodes_per_dim; 7])
    }

    /// Next resolution level: one more node per parameter (8 -> 9 slightly
    /// more than doubles the node total), or twice the Monte Carlo samples.
    pub fn refined(&self) -> Self {
        let mut s = *self;
        s.nodes_per_dim += 1;
        s.per_parameter = self.per_parameter.map(|c| c.map(|n| n + 1));
        s.total_samples *= 2;
        s
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        match self.rule {
            Rule::GaussLegendreTensor if self.counts().iter().any(|&n| n < 2) => {
                Err(SurfaceError::InvalidSpec("nodes_per_dim must be at least 2".into()))
            }
            Rule::GaussLegendreTensor if self.counts().iter().map(|&n| n as f64).product::<f64>() > 1e10 => {
                Err(SurfaceError::InvalidSpec("tensor rule exceeds 1e10 nodes per patch".into()))
            }
            Rule::MonteCarlo if self.total_samples < 1000 => {
                Err(SurfaceError::InvalidSpec("total_samples must be at least 1000".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Compact core manifold around which tubes are built.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreManifold {
    Point(Octonion),
    Segment { a: Octonion, b: Octonion },
    /// Circle of `radius` about `center` in the plane spanned by units `e_i`, `e_j`.
    Circle { center: Octonion, radius: f64, plane: (usize, usize) },
    /// `dim`-sphere of `radius` about `center` in `span(e1, ..., e_{dim+1})`.
    KSphere { center: Octonion, radius: f64, dim: usize },
}

impl CoreManifold {
    pub fn dimension(&self) -> usize {
        match self {
            CoreManifold::Point(_) => 0,
            CoreManifold::Segment { .. } => 1,
            CoreManifold::Circle { .. } => 1,
            CoreManifold::KSphere { dim, .. } => *dim,
        }
    }

    /// Largest tube thickness that keeps the tube embedded.
    pub fn reach(&self) -> f64 {
        match self {
            CoreManifold::Point(_) | CoreManifold::Segment { .. } => f64::INFINITY,
            CoreManifold::Circle { radius, .. } | CoreManifold::KSphere { radius, .. } => *radius,
        }
    }

    /// Euclidean distance from `z` to the core.
    pub fn distance(&self, z: &Octonion) -> f64 {
        match self {
            CoreManifold::Point(c) => (*z - *c).norm(),
            CoreManifold::Segment { a, b } => {
                let d = *b - *a;
                let t = ((*z - *a).dot(&d) / d.norm_sqr()).clamp(0.0, 1.0);
                (*z - (*a + d * t)).norm()
            }
            CoreManifold::Circle { .. } | CoreManifold::KSphere { .. } => {
                let (center, radius, span) = self.sphere_frame();
                let rel = *z - center;
                let inside: f64 = span.iter().map(|e| rel.dot(e).powi(2)).sum::<f64>();
                let outside = rel.norm_sqr() - inside;
                ((inside.sqrt() - radius).powi(2) + outside.max(0.0)).sqrt()
            }
        }
    }

    fn sphere_frame(&self) -> (Octonion, f64, Vec<Octonion>) {
        match self {
            CoreManifold::Circle { center, radius, plane } => {
                (*center, *radius, vec![Octonion::unit(plane.0), Octonion::unit(plane.1)])
            }
            CoreManifold::KSphere { center, radius, dim } => {
                (*center, *radius, (1..=dim + 1).map(Octonion::unit).collect())
            }
            _ => unreachable!("only sphere-like cores have a sphere frame"),
        }
    }

    fn validate(&self) -> Result<(), SurfaceError> {
        let bad = |s: &str| Err(SurfaceError::InvalidCore(s.to_string()));
        match self {
            CoreManifold::Point(c) if !c.is_finite() => bad("non-finite point"),
            CoreManifold::Segment { a, b } if (*b - *a).norm() == 0.0 => bad("segment endpoints coincide"),
            CoreManifold::Circle { radius, plane, .. } => {
                if !(*radius > 0.0) {
                    bad("circle radius must be positive")
                } else if plane.0 == plane.1 || plane.0 > 7 || plane.1 > 7 {
                    bad("circle plane needs two distinct units e0..e7")
                } else {
                    Ok(())
                }
            }
            CoreManifold::KSphere { radius, dim, .. } => {
                if !(*radius > 0.0) {
                    bad("sphere radius must be positive")
                } else if !(1..=6).contains(dim) {
                    bad("k-sphere dimension must be in 1..=6")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Sphere,
    Tube,
}

/// A quadrature node on a surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSample {
    pub point: Octonion,
    /// Oriented `n dS` including the quadrature weight.
    pub weighted_normal: Octonion,
    /// Nearest core point; the normal points away from it.
    pub core_point: Octonion,
    /// Partial derivatives of the parametrisation (columns).
    pub tangents: Tangents,
    /// Quadrature weight (parameter measure only).
    pub weight: f64,
    /// `+1` or `-1`: sign applied to the raw element to make it outward.
    pub orientation: f64,
}

/// Hyperspherical coordinates on `S^d` in `R^{d+1}` and their partials.
///
/// `y_j = sin(t_0)...sin(t_{j-1}) cos(t_j)` for `j < d`, and
/// `y_d = sin(t_0)...sin(t_{d-1})`.
fn hypersphere(angles: &[f64]) -> ([f64; 8], [[f64; 7]; 8]) {
    let d = angles.len();
    let (s, c): (Vec<f64>, Vec<f64>) = angles.iter().map(|t| t.sin_cos()).unzip();
    let mut y = [0.0; 8];
    let mut dy = [[0.0; 7]; 8];
    for j in 0..=d {
        // y_j = prod_{i<j} s_i * (c_j if j < d else 1)
        let last = if j < d { c[j] } else { 1.0 };
        let prefix: f64 = s[..j].iter().product();
        y[j] = prefix * last;
        for k in 0..j {
            let mut p = c[k] * last;
            for (i, si) in s[..j].iter().enumerate() {
                if i != k {
                    p *= si;
                }
            }
            dy[j][k] = p;
        }
        if j < d {
            dy[j][j] = -prefix * s[j];
        }
    }
    (y, dy)
}

fn sphere_angle_bounds(d: usize) -> (Vec<f64>, Vec<f64>) {
    let lo = vec![0.0; d];
    let mut hi = vec![PI; d];
    hi[d - 1] = 2.0 * PI;
    (lo, hi)
}

#[derive(Debug, Clone)]
enum PatchMap {
    /// `center + radius * sum_i y_i frame_i` over (part of) `S^7`.
    Sphere { center: Octonion, radius: f64, frame: [Octonion; 8] },
    /// Tube of thickness `eps` around a `dim`-sphere spanned by `core`.
    SphereTube { center: Octonion, radius: f64, eps: f64, core: Vec<Octonion>, normal: Vec<Octonion> },
    /// Cylinder of thickness `eps` around `a + t dir`, `t` in `[0, len]`.
    Cylinder { a: Octonion, dir: Octonion, eps: f64, normal: [Octonion; 7] },
}

#[derive(Debug, Clone)]
struct Patch {
    lo: [f64; 7],
    hi: [f64; 7],
    map: PatchMap,
}

impl Patch {
    fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Full-turn angles are periodic; everything else is a bounded interval.
    fn periodic(&self, k: usize) -> bool {
        (self.hi[k] - self.lo[k] - 2.0 * PI).abs() < 1e-12
    }

    /// Point, tangents and nearest core point at parameters `t`.
    fn eval(&self, t: &[f64; 7]) -> (Octonion, Tangents, Octonion) {
        let mut tan = [[0.0; 7]; 8];
        match &self.map {
            PatchMap::Sphere { center, radius, frame } => {
                let (y, dy) = hypersphere(t);
                let mut p = *center;
                for (i, f) in frame.iter().enumerate() {
                    p += *f * (radius * y[i]);
                    for k in 0..7 {
                        let g = radius * dy[i][k];
                        if g != 0.0 {
                            for r in 0..8 {
                                tan[r][k] += g * f[r];
                            }
                        }
                    }
                }
                (p, tan, *center)
            }
            PatchMap::SphereTube { center, radius, eps, core, normal } => {
                let m = core.len() - 1;
                let (cy, cdy) = hypersphere(&t[..m]);
                let (ny, ndy) = hypersphere(&t[m..]);
                let mut u = Octonion::ZERO;
                for (i, e) in core.iter().enumerate() {
                    u += *e * cy[i];
                }
                let mut n = u * ny[0];
                for (j, f) in normal.iter().enumerate() {
                    n += *f * ny[j + 1];
                }
                let core_point = *center + u * *radius;
                let point = core_point + n * *eps;
                let stretch = radius + eps * ny[0];
                for k in 0..m {
                    let mut du = Octonion::ZERO;
                    for (i, e) in core.iter().enumerate() {
                        du += *e * cdy[i][k];
                    }
                    for r in 0..8 {
                        tan[r][k] = stretch * du[r];
                    }
                }
                for l in 0..7 - m {
                    let mut dn = u * ndy[0][l];
                    for (j, f) in normal.iter().enumerate() {
                        dn += *f * ndy[j + 1][l];
                    }
                    for r in 0..8 {
                        tan[r][m + l] = eps * dn[r];
                    }
                }
                (point, tan, core_point)
            }
            PatchMap::Cylinder { a, dir, eps, normal } => {
                let (ny, ndy) = hypersphere(&t[1..]);
                let core_point = *a + *dir * t[0];
                let mut n = Octonion::ZERO;
                for (j, f) in normal.iter().enumerate() {
                    n += *f * ny[j];
                }
                for r in 0..8 {
                    tan[r][0] = dir[r];
                }
                for l in 0..6 {
                    let mut dn = Octonion::ZERO;
                    for (j, f) in normal.iter().enumerate() {
                        dn += *f * ndy[j][l];
                    }
                    for r in 0..8 {
                        tan[r][l + 1] = eps * dn[r];
                    }
                }
                (core_point + n * *eps, tan, core_point)
            }
        }
    }
}

/// An oriented closed 7-surface given by parametrised patches.
#[derive(Debug, Clone)]
pub struct ParamSurface {
    kind: SurfaceKind,
    patches: Vec<Patch>,
    core: CoreManifold,
    eps: f64,
}

impl ParamSurface {
    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn core(&self) -> &CoreManifold {
        &self.core
    }

    /// Sphere radius or tube thickness.
    pub fn thickness(&self) -> f64 {
        self.eps
    }

    /// Whether `z` lies in the bounded component cut out by the surface.
    pub fn encloses(&self, z: &Octonion) -> bool {
        self.core.distance(z) < self.eps
    }

    pub fn patch_count(&self) -> usize {
        self.patches.len()
    }

    /// Point and tangent frame at parameters `t` of patch `patch`.
    pub fn chart(&self, patch: usize, t: &[f64; 7]) -> (Octonion, Tangents) {
        let (p, tan, _) = self.patches[patch].eval(t);
        (p, tan)
    }

    /// Parameter box of a patch.
    pub fn domain(&self, patch: usize) -> ([f64; 7], [f64; 7]) {
        (self.patches[patch].lo, self.patches[patch].hi)
    }

    /// Number of nodes `spec` produces on this surface.
    pub fn node_count(&self, spec: &QuadratureSpec) -> usize {
        self.layout(spec).iter().map(|l| l.count).sum()
    }

    fn layout(&self, spec: &QuadratureSpec) -> Vec<PatchLayout> {
        match spec.rule {
            Rule::GaussLegendreTensor => {
                let count = spec.counts().iter().product();
                self.patches.iter().map(|_| PatchLayout { count }).collect()
            }
            Rule::MonteCarlo => {
                let total: f64 = self.patches.iter().map(Patch::volume).sum();
                self.patches
                    .iter()
                    .map(|p| PatchLayout {
                        count: ((spec.total_samples as f64) * p.volume() / total).round().max(1.0) as usize,
                    })
                    .collect()
            }
        }
    }

    /// Deterministic stream of quadrature nodes.
    pub fn nodes(&self, spec: &QuadratureSpec) -> Result<Vec<SurfaceSample>, SurfaceError> {
        self.fold_nodes(spec, Vec::new, |mut v, s| {
            v.push(*s);
            v
        }, |mut a, b| {
            a.extend(b);
            a
        })
    }

    /// Parallel fold over all nodes with a fixed chunk decomposition, so the
    /// result does not depend on scheduling. Fails if any node's orientation
    /// disagrees with its patch's.
    pub fn fold_nodes<A, I, F, C>(
        &self,
        spec: &QuadratureSpec,
        init: I,
        fold: F,
        combine: C,
    ) -> Result<A, SurfaceError>
    where
        A: Send,
        I: Fn() -> A + Sync,
        F: Fn(A, &SurfaceSample) -> A + Sync,
        C: Fn(A, A) -> A,
    {
        spec.validate()?;
        let layout = self.layout(spec);
        let tensors: Vec<TensorNodes> = self.patches.iter().map(|p| TensorNodes::new(&spec.counts(), p)).collect();
        let signs: Vec<f64> = self.patches.iter().map(|p| reference_orientation(p)).collect();
        let mut jobs = Vec::new();
        for (pi, l) in layout.iter().enumerate() {
            let mut start = 0;
            while start < l.count {
                let end = (start + CHUNK).min(l.count);
                jobs.push((pi, start, end));
                start = end;
            }
        }
        let total: usize = layout.iter().map(|l| l.count).sum();
        let partials: Vec<(A, usize)> = jobs
            .par_iter()
            .map(|&(pi, start, end)| {
                let patch = &self.patches[pi];
                let mut acc = init();
                let mut bad = 0;
                let mut rng = match spec.rule {
                    Rule::MonteCarlo => {
                        let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
                        r.set_stream(((pi as u64) << 40) | (start / CHUNK) as u64);
                        Some(r)
                    }
                    Rule::GaussLegendreTensor => None,
                };
                let mc_weight = patch.volume() / layout[pi].count as f64;
                for idx in start..end {
                    let (t, w) = match rng.as_mut() {
                        Some(r) => {
                            let mut t = [0.0; 7];
                            for (k, tk) in t.iter_mut().enumerate() {
                                *tk = patch.lo[k] + (patch.hi[k] - patch.lo[k]) * r.gen::<f64>();
                            }
                            (t, mc_weight)
                        }
                        None => tensors[pi].node(patch, idx),
                    };
                    let (sample, ok) = make_sample(patch, &t, w, signs[pi]);
                    if !ok {
                        bad += 1;
                    }
                    acc = fold(acc, &sample);
                }
                (acc, bad)
            })
            .collect();
        let mut bad = 0;
        let mut acc = init();
        for (a, b) in partials {
            acc = combine(acc, a);
            bad += b;
        }
        if bad > 0 {
            return Err(SurfaceError::Orientation { bad, total });
        }
        Ok(acc)
    }
}

struct PatchLayout {
    count: usize,
}

struct TensorNodes {
    counts: [usize; 7],
    // per parameter: nodes as fractions of the interval, weights summing to 1
    rules: Vec<(Vec<f64>, Vec<f64>)>,
}

impl TensorNodes {
    fn new(counts: &[usize; 7], patch: &Patch) -> Self {
        let rules = (0..7)
            .map(|k| {
                let n = counts[k].max(1);
                if patch.periodic(k) {
                    ((0..n).map(|i| (i as f64 + 0.5) / n as f64).collect(), vec![1.0 / n as f64; n])
                } else {
                    gauss_legendre_on(n, 0.0, 1.0)
                }
            })
            .collect();
        TensorNodes { counts: counts.map(|n| n.max(1)), rules }
    }

    fn node(&self, patch: &Patch, mut idx: usize) -> ([f64; 7], f64) {
        let mut t = [0.0; 7];
        let mut weight = 1.0;
        for k in (0..7).rev() {
            let i = idx % self.counts[k];
            idx /= self.counts[k];
            let span = patch.hi[k] - patch.lo[k];
            let (x, w) = &self.rules[k];
            t[k] = patch.lo[k] + span * x[i];
            weight *= w[i] * span;
        }
        (t, weight)
    }
}

/// Raw surface element using a direction `hint` that is transversal to the
/// tangent space: `N = det(A) A^-T e0` with `A = [hint | T]`.
fn element_with_hint(t: &Tangents, hint: &Octonion) -> [f64; 8] {
    let mut a = [[0.0; 8]; 8];
    for r in 0..8 {
        a[r][0] = hint[r];
        a[r][1..].copy_from_slice(&t[r]);
    }
    let lu = Lu::new(a);
    if !lu.is_well_conditioned() {
        return surface_element(t);
    }
    let d = lu.det();
    let mut e0 = [0.0; 8];
    e0[0] = d;
    lu.solve_transpose(&e0)
}

fn make_sample(patch: &Patch, t: &[f64; 7], weight: f64, sign: f64) -> (SurfaceSample, bool) {
    let (point, tangents, core_point) = patch.eval(t);
    let radial = point - core_point;
    let raw = element_with_hint(&tangents, &radial);
    let n = Octonion(raw) * (sign * weight);
    let dot = n.dot(&radial);
    // degenerate parameter points (zero element) are accepted
    let ok = dot >= 0.0 || n.norm() <= 1e-300;
    (
        SurfaceSample { point, weighted_normal: n, core_point, tangents, weight, orientation: sign },
        ok,
    )
}

/// Orientation sign of a patch, read off at the centre of its parameter box.
fn reference_orientation(patch: &Patch) -> f64 {
    let mut t = [0.0; 7];
    for k in 0..7 {
        // off-centre to stay clear of coordinate singularities
        t[k] = patch.lo[k] + 0.4321 * (patch.hi[k] - patch.lo[k]);
    }
    let (point, tangents, core_point) = patch.eval(&t);
    let radial = point - core_point;
    let raw = element_with_hint(&tangents, &radial);
    if Octonion(raw).dot(&radial) < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Vector surface element of a tangent frame: component `i` is
/// `(-1)^i det(T without row i)`.
///
/// The result is orthogonal to every column and its length is the 7-volume of
/// the parallelotope spanned by the columns.
pub fn surface_element(tangents: &Tangents) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (i, o) in out.iter_mut().enumerate() {
        let mut m = [[0.0; 7]; 7];
        for (ri, r) in (0..8).filter(|&r| r != i).enumerate() {
            m[ri] = tangents[r];
        }
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        *o = s * crate::matrix::det(m);
    }
    out
}

fn identity_frame() -> [Octonion; 8] {
    std::array::from_fn(Octonion::unit)
}

fn full_box(lo: &[f64], hi: &[f64]) -> ([f64; 7], [f64; 7]) {
    let mut l = [0.0; 7];
    let mut h = [0.0; 7];
    l.copy_from_slice(lo);
    h.copy_from_slice(hi);
    (l, h)
}

/// The sphere `|z - center| = r`, outward oriented.
pub fn sphere(center: Octonion, r: f64) -> Result<ParamSurface, SurfaceError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(SurfaceError::NonPositiveRadius(r));
    }
    let (lo, hi) = sphere_angle_bounds(7);
    let (lo, hi) = full_box(&lo, &hi);
    Ok(ParamSurface {
        kind: SurfaceKind::Sphere,
        patches: vec![Patch { lo, hi, map: PatchMap::Sphere { center, radius: r, frame: identity_frame() } }],
        core: CoreManifold::Point(center),
        eps: r,
    })
}

/// Orthonormal completion of `given` by Gram-Schmidt over the unit basis.
fn complete_frame(given: &[Octonion]) -> Vec<Octonion> {
    let mut frame: Vec<Octonion> = given.to_vec();
    for k in 0..8 {
        if frame.len() == 8 {
            break;
        }
        let mut v = Octonion::unit(k);
        for f in &frame {
            v -= *f * v.dot(f);
        }
        let n = v.norm();
        if n > 1e-8 {
            frame.push(v / n);
        }
    }
    frame
}

/// The surface at distance exactly `eps` from `core`, oriented away from it.
pub fn tube(core: CoreManifold, eps: f64) -> Result<ParamSurface, SurfaceError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SurfaceError::NonPositiveThickness(eps));
    }
    core.validate()?;
    let reach = core.reach();
    if eps >= reach {
        return Err(SurfaceError::SelfIntersecting { eps, reach });
    }
    let patches = match &core {
        CoreManifold::Point(c) => {
            let mut s = sphere(*c, eps)?;
            s.kind = SurfaceKind::Tube;
            return Ok(s);
        }
        CoreManifold::Circle { .. } | CoreManifold::KSphere { .. } => {
            let (center, radius, span) = core.sphere_frame();
            let m = span.len() - 1;
            let full = complete_frame(&span);
            let normal = full[span.len()..].to_vec();
            let (mut lo, mut hi) = sphere_angle_bounds(m);
            let (nlo, nhi) = sphere_angle_bounds(7 - m);
            lo.extend(nlo);
            hi.extend(nhi);
            let (lo, hi) = full_box(&lo, &hi);
            vec![Patch { lo, hi, map: PatchMap::SphereTube { center, radius, eps, core: span, normal } }]
        }
        CoreManifold::Segment { a, b } => {
            let len = (*b - *a).norm();
            let dir = (*b - *a) / len;
            let full = complete_frame(&[dir]);
            let normal: [Octonion; 7] = std::array::from_fn(|i| full[i + 1]);
            let frame: [Octonion; 8] = std::array::from_fn(|i| full[i]);
            let (slo, shi) = sphere_angle_bounds(7);
            let (mut clo, mut chi) = (vec![0.0], vec![len]);
            let (nlo, nhi) = sphere_angle_bounds(6);
            clo.extend(nlo);
            chi.extend(nhi);
            let (clo, chi) = full_box(&clo, &chi);
            // caps: y0 = cos(theta1) measures the component along dir
            let (blo, mut bhi) = full_box(&slo, &shi);
            bhi[0] = PI / 2.0;
            let (mut alo, ahi) = full_box(&slo, &shi);
            alo[0] = PI / 2.0;
            vec![
                Patch { lo: alo, hi: ahi, map: PatchMap::Sphere { center: *a, radius: eps, frame } },
                Patch { lo: clo, hi: chi, map: PatchMap::Cylinder { a: *a, dir, eps, normal } },
                Patch { lo: blo, hi: bhi, map: PatchMap::Sphere { center: *b, radius: eps, frame } },
            ]
        }
    };
    Ok(ParamSurface { kind: SurfaceKind::Tube, patches, core, eps })
}

/// Sum of `|weighted_normal|` over all nodes: the quadrature estimate of the area.
pub fn area(surface: &ParamSurface, spec: &QuadratureSpec) -> Result<f64, SurfaceError> {
    surface.fold_nodes(spec, || 0.0, |a, s| a + s.weighted_normal.norm(), |a, b| a + b)
}

/// Integrates an octonion-valued function against the vector element:
/// `sum f(point) * n dS` (product order as written).
pub fn integrate_left<F>(surface: &ParamSurface, spec: &QuadratureSpec, f: F) -> Result<Octonion, SurfaceError>
where
    F: Fn(&Octonion) -> Octonion + Sync,
{
    surface.fold_nodes(spec, || Octonion::ZERO, |a, s| a + f(&s.point) * s.weighted_normal, |a, b| a + b)
}

/// Surface Jacobian helper used by the image method: the element of `M T`.
pub fn pushed_element(m: &RealMatrix8, tangents: &Tangents) -> [f64; 8] {
    surface_element(&crate::matrix::map_tangents(m, tangents))
}

/// Parses `sphere(C;r)` or `tube(point;C;eps)`, `tube(circle;e1,e2;R;eps)`,
/// `tube(ksphere;k;R;eps)`, `tube(segment;A;B;eps)` where `C`, `A`, `B` are
/// octonion literals.
pub fn parse_surface(input: &str) -> Result<ParamSurface, SurfaceError> {
    let perr = |reason: String| SurfaceError::Parse { input: input.to_string(), reason };
    let src: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    let open = src.find('(').ok_or_else(|| perr("expected '('".into()))?;
    if !src.ends_with(')') {
        return Err(perr("expected trailing ')'".into()));
    }
    let head = &src[..open];
    let args: Vec<&str> = src[open + 1..src.len() - 1].split(';').collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| perr(format!("bad number {s:?}")));
    let oct = |s: &str| s.parse::<Octonion>().map_err(|e| perr(e.to_string()));
    match (head, args.as_slice()) {
        ("sphere", [c, r]) => sphere(oct(c)?, num(r)?),
        ("tube", ["point", c, eps]) => tube(CoreManifold::Point(oct(c)?), num(eps)?),
        ("tube", ["segment", a, b, eps]) => tube(CoreManifold::Segment { a: oct(a)?, b: oct(b)? }, num(eps)?),
        ("tube", ["circle", plane, r, eps]) => {
            let units: Vec<usize> = plane
                .split(',')
                .map(|u| {
                    u.trim_start_matches('e')
                        .trim_start_matches('_')
                        .parse::<usize>()
                        .map_err(|_| perr(format!("bad unit {u:?}")))
                })
                .collect::<Result<_, _>>()?;
            if units.len() != 2 {
                return Err(perr("circle plane needs two units, e.g. e1,e2".into()));
            }
            tube(
                CoreManifold::Circle { center: Octonion::ZERO, radius: num(r)?, plane: (units[0], units[1]) },
                num(eps)?,
            )
        }
        ("tube", ["ksphere", k, r, eps]) => {
            let dim = k.parse::<usize>().map_err(|_| perr(format!("bad dimension {k:?}")))?;
            tube(CoreManifold::KSphere { center: Octonion::ZERO, radius: num(r)?, dim }, num(eps)?)
        }
        _ => Err(perr(
            "expected sphere(C;r), tube(point;C;eps), tube(circle;ei,ej;R;eps), tube(ksphere;k;R;eps) or tube(segment;A;B;eps)"
                .into(),
        )),
    }
}

/// Parses a core manifold: `point;C`, `circle;e1,e2;R`, `ksphere;k;R`, `segment;A;B`.
pub fn parse_core(input: &str) -> Result<CoreManifold, SurfaceError> {
    // reuse the tube parser with a dummy thickness small enough for any core
    let surface = parse_surface(&format!("tube({input};1e-9)"))?;
    Ok(surface.core)
}
