//! Winding numbers and orders of zeroes as surface integrals of the Cauchy
//! kernel, plus an independent Newton-based Brouwer-degree oracle.
//!
//! Every integral has the shape `(3 / pi^4) * sum K(node) * dS(node)`, where
//! `3 / pi^4` is the reciprocal of the area of the unit 7-sphere. The result
//! is kept as a full octonion in [`DegreeResult::raw`]; a sizeable imaginary
//! part means the quadrature is not resolving the integrand.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::fields::{jacobian, FieldError, OctonionField, Side};
use crate::matrix::{map_tangents, Lu, RealMatrix8};
use crate::octonion::Octonion;
use crate::surfaces::{self, sphere, tube, CoreManifold, ParamSurface, QuadratureSpec, SurfaceError};

/// `3 / pi^4`, the reciprocal area of the unit sphere `S_7`.
pub const NORMALIZATION: f64 = 3.0 / (PI * PI * PI * PI);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Maximum `|raw - rounded|` for a result to count as an integer.
    pub integer_tolerance: f64,
    /// Smallest `|z|` accepted by the Cauchy kernel.
    pub kernel_floor: f64,
    /// Smallest `|f - a|` accepted on an integration surface.
    pub zero_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { integer_tolerance: 0.1, kernel_floor: 1e-12, zero_floor: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DegreeError {
    #[error("Cauchy kernel singularity: |z| = {norm:e} is below the floor {floor:e}")]
    Singularity { norm: f64, floor: f64 },
    #[error("contract violation: |f - a| = {value:e} at node {point} (zero on the integration surface)")]
    ZeroOnSurface { point: Octonion, value: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("oracle inconclusive: {0}")]
    OracleInconclusive(String),
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl DegreeError {
    /// Whether this error is a violated precondition of the integral
    /// (as opposed to bad input).
    pub fn is_contract_violation(&self) -> bool {
        matches!(
            self,
            DegreeError::Singularity { .. }
                | DegreeError::ZeroOnSurface { .. }
                | DegreeError::Contract(_)
                | DegreeError::Surface(SurfaceError::SelfIntersecting { .. })
        )
    }
}

/// Numerical value of a degree integral.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeResult {
    /// The normalised integral, before rounding.
    pub raw: Octonion,
    pub scalar: f64,
    pub rounded: i64,
    /// `|raw - rounded|` as an octonion norm.
    pub residual: f64,
    /// Norm of the imaginary part of `raw`.
    pub non_scalar: f64,
    pub node_count: usize,
    pub method: String,
}

impl DegreeResult {
    pub fn from_raw(raw: Octonion, node_count: usize, method: impl Into<String>) -> Self {
        let scalar = raw.re();
        let rounded = scalar.round() as i64;
        let residual = (raw - Octonion::real(rounded as f64)).norm();
        DegreeResult { raw, scalar, rounded, residual, non_scalar: raw.im().norm(), node_count, method: method.into() }
    }

    /// True when `rounded` is trustworthy at tolerance `tol`.
    pub fn is_integer(&self, tol: f64) -> bool {
        self.residual < tol
    }
}

/// `q0(z) = conj(z) / |z|^8`.
pub fn cauchy_kernel(z: &Octonion, floor: f64) -> Result<Octonion, DegreeError> {
    let n2 = z.norm_sqr();
    let norm = n2.sqrt();
    if !(norm >= floor) || norm == 0.0 {
        return Err(DegreeError::Singularity { norm, floor });
    }
    Ok(kernel_unchecked(z, n2))
}

#[inline]
fn kernel_unchecked(z: &Octonion, n2: f64) -> Octonion {
    let n8 = (n2 * n2) * (n2 * n2);
    z.conjugate() / n8
}

#[inline]
fn side_product(side: Side, kernel: Octonion, element: Octonion) -> Octonion {
    match side {
        Side::Left => kernel * element,
        Side::Right => element * kernel,
    }
}

/// Running sum plus the node where the kernel argument was smallest.
#[derive(Clone, Copy)]
struct KernelAcc {
    sum: Octonion,
    min_norm: f64,
    min_point: Octonion,
}

impl KernelAcc {
    fn new() -> Self {
        KernelAcc { sum: Octonion::ZERO, min_norm: f64::INFINITY, min_point: Octonion::ZERO }
    }

    fn merge(mut self, other: KernelAcc) -> Self {
        self.sum += other.sum;
        if other.min_norm < self.min_norm {
            self.min_norm = other.min_norm;
            self.min_point = other.min_point;
        }
        self
    }
}

/// `(3/pi^4) * integral of q0(w - z) dsigma(w)` (left) or `dsigma(w) q0(w - z)` (right).
pub fn winding_number(
    surface: &ParamSurface,
    z: &Octonion,
    side: Side,
    spec: &QuadratureSpec,
    tol: &Tolerances,
) -> Result<DegreeResult, DegreeError> {
    let acc = surface.fold_nodes(
        spec,
        KernelAcc::new,
        |mut acc, s| {
            let d = s.point - *z;
            let n2 = d.norm_sqr();
            let n = n2.sqrt();
            if n < acc.min_norm {
                acc.min_norm = n;
                acc.min_point = s.point;
            }
            if n > 0.0 {
                acc.sum += side_product(side, kernel_unchecked(&d, n2), s.weighted_normal);
            }
            acc
        },
        KernelAcc::merge,
    )?;
    if !(acc.min_norm > tol.kernel_floor) {
        return Err(DegreeError::Singularity { norm: acc.min_norm, floor: tol.kernel_floor });
    }
    Ok(DegreeResult::from_raw(acc.sum * NORMALIZATION, surface.node_count(spec), format!("winding/{side}")))
}

/// How the image surface element is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// `cof(Jf) * dsigma` on the source surface.
    Pullback,
    /// Tangents pushed through `Jf`, element recomputed from the image frame.
    Image,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pullback" => Ok(Method::Pullback),
            "image" => Ok(Method::Image),
            other => Err(format!("method must be pullback or image, got {other:?}")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Pullback => "pullback",
            Method::Image => "image",
        })
    }
}

/// Knobs shared by the order integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderOptions {
    pub method: Method,
    pub side: Side,
    pub tolerances: Tolerances,
}

impl Default for OrderOptions {
    fn default() -> Self {
        OrderOptions { method: Method::Pullback, side: Side::Left, tolerances: Tolerances::default() }
    }
}

impl OrderOptions {
    pub fn with_method(method: Method) -> Self {
        OrderOptions { method, ..Default::default() }
    }
}

/// `(3/pi^4) * integral over the surface of q0(f - a) * (cof(Jf) dsigma)`,
/// i.e. the winding number of the image surface `(f - a)(surface)` about 0.
pub fn boundary_order(
    f: &OctonionField,
    surface: &ParamSurface,
    a: &Octonion,
    spec: &QuadratureSpec,
    opts: &OrderOptions,
) -> Result<DegreeResult, DegreeError> {
    let side = opts.side;
    let method = opts.method;
    let acc = surface.fold_nodes(
        spec,
        KernelAcc::new,
        |mut acc, s| {
            let w = f.evaluate(&s.point) - *a;
            let n2 = w.norm_sqr();
            let n = n2.sqrt();
            if n < acc.min_norm {
                acc.min_norm = n;
                acc.min_point = s.point;
            }
            if n == 0.0 {
                return acc;
            }
            let jac = jacobian(f, &s.point, crate::fields::default_step(&s.point));
            let element = match method {
                Method::Pullback => Octonion(jac.cofactor_apply(&s.weighted_normal.0)),
                Method::Image => {
                    let raw = surfaces::surface_element(&map_tangents(&jac, &s.tangents));
                    Octonion(raw) * (s.weight * s.orientation)
                }
            };
            acc.sum += side_product(side, kernel_unchecked(&w, n2), element);
            acc
        },
        KernelAcc::merge,
    )?;
    if !(acc.min_norm > opts.tolerances.zero_floor) {
        return Err(DegreeError::ZeroOnSurface { point: acc.min_point, value: acc.min_norm });
    }
    Ok(DegreeResult::from_raw(
        acc.sum * NORMALIZATION,
        surface.node_count(spec),
        format!("{method}/{side}"),
    ))
}

/// Order of an isolated `a`-point of `f` at `c`, integrated over `S_7(c, eps)`.
pub fn order_isolated(
    f: &OctonionField,
    c: &Octonion,
    a: &Octonion,
    eps: f64,
    spec: &QuadratureSpec,
    opts: &OrderOptions,
) -> Result<DegreeResult, DegreeError> {
    let s = sphere(*c, eps)?;
    boundary_order(f, &s, a, spec, opts)
}

/// Order of the zero variety `core` of `f`, integrated over the tube of
/// thickness `eps` around it.
pub fn order_variety(
    f: &OctonionField,
    core: &CoreManifold,
    eps: f64,
    spec: &QuadratureSpec,
    opts: &OrderOptions,
) -> Result<DegreeResult, DegreeError> {
    let t = tube(core.clone(), eps)?;
    boundary_order(f, &t, &Octonion::ZERO, spec, opts)
}

/// A zero (or `a`-point) set together with its enclosing surface.
#[derive(Debug, Clone, PartialEq)]
pub enum ZeroSpec {
    Isolated { point: Octonion, radius: f64 },
    Variety { core: CoreManifold, eps: f64 },
}

impl ZeroSpec {
    pub fn enclosure(&self) -> Result<ParamSurface, SurfaceError> {
        match self {
            ZeroSpec::Isolated { point, radius } => sphere(*point, *radius),
            ZeroSpec::Variety { core, eps } => tube(core.clone(), *eps),
        }
    }

    /// Crude separation test: sample points of one enclosure must stay
    /// outside the other.
    fn disjoint_from(&self, other: &ZeroSpec) -> Result<bool, SurfaceError> {
        let (sa, sb) = (self.enclosure()?, other.enclosure()?);
        let probe = QuadratureSpec::tensor(3);
        for (x, y) in [(&sa, &sb), (&sb, &sa)] {
            let hit = x.fold_nodes(&probe, || false, |h, s| h || y.core().distance(&s.point) <= y.thickness(), |p, q| p || q)?;
            if hit {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Parses `isolated(C;r)` or `variety(CORE;eps)` where `CORE` is a core
    /// spec such as `circle;e1,e2;1` or `ksphere;1;1`.
    pub fn parse(input: &str) -> Result<ZeroSpec, SurfaceError> {
        let perr = |reason: &str| SurfaceError::Parse { input: input.to_string(), reason: reason.to_string() };
        let src: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(body) = src.strip_prefix("isolated(").and_then(|b| b.strip_suffix(')')) {
            let (c, r) = body.rsplit_once(';').ok_or_else(|| perr("expected isolated(C;r)"))?;
            let point = c.parse::<Octonion>().map_err(|e| perr(&e.to_string()))?;
            let radius = r.parse::<f64>().map_err(|_| perr("bad radius"))?;
            if !(radius > 0.0) {
                return Err(SurfaceError::NonPositiveRadius(radius));
            }
            return Ok(ZeroSpec::Isolated { point, radius });
        }
        if let Some(body) = src.strip_prefix("variety(").and_then(|b| b.strip_suffix(')')) {
            let (core, eps) = body.rsplit_once(';').ok_or_else(|| perr("expected variety(CORE;eps)"))?;
            let eps = eps.parse::<f64>().map_err(|_| perr("bad eps"))?;
            let core = surfaces::parse_core(core)?;
            tube(core.clone(), eps)?;
            return Ok(ZeroSpec::Variety { core, eps });
        }
        Err(perr("expected isolated(C;r) or variety(CORE;eps)"))
    }
}

/// Splits a comma-separated list at top level (commas inside parentheses
/// belong to the items).
pub fn split_top_level(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in list.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ArgumentReport {
    /// Boundary integral.
    pub lhs: DegreeResult,
    /// Local orders, one per zero spec, in input order.
    pub terms: Vec<DegreeResult>,
    /// Sum of the raw scalar parts of the local orders.
    pub rhs_sum: f64,
    pub rhs_rounded: i64,
    /// `|lhs.raw - rhs_sum|`.
    pub discrepancy: f64,
}

impl ArgumentReport {
    pub fn agrees(&self, tol: f64) -> bool {
        self.discrepancy < 2.0 * tol && self.lhs.rounded == self.rhs_rounded
    }
}

/// Compares the boundary integral of `f - a` over `boundary` with the sum of
/// local orders of the enclosed zero sets.
pub fn argument_principle(
    f: &OctonionField,
    boundary: &ParamSurface,
    zeros: &[ZeroSpec],
    a: &Octonion,
    spec: &QuadratureSpec,
    opts: &OrderOptions,
) -> Result<ArgumentReport, DegreeError> {
    for (i, z) in zeros.iter().enumerate() {
        let enc = z.enclosure()?;
        let inside = enc.fold_nodes(&QuadratureSpec::tensor(3), || true, |ok, s| ok && boundary.encloses(&s.point), |p, q| p && q)?;
        if !inside {
            return Err(DegreeError::Contract(format!("enclosure {i} is not inside the boundary")));
        }
        for (j, w) in zeros.iter().enumerate().skip(i + 1) {
            if !z.disjoint_from(w)? {
                return Err(DegreeError::Contract(format!("enclosures {i} and {j} overlap")));
            }
        }
    }
    let lhs = boundary_order(f, boundary, a, spec, opts)?;
    let terms = zeros
        .iter()
        .map(|z| boundary_order(f, &z.enclosure()?, a, spec, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let rhs_raw: Octonion = terms.iter().map(|t| t.raw).sum();
    let rhs_sum = rhs_raw.re();
    let rhs_rounded = terms.iter().map(|t| t.rounded).sum();
    let discrepancy = (lhs.raw - rhs_raw).norm();
    Ok(ArgumentReport { lhs, terms, rhs_sum, rhs_rounded, discrepancy })
}

#[derive(Debug, Clone, Serialize)]
pub struct RoucheReport {
    pub max_difference: f64,
    pub min_f: f64,
    /// `min |f| - max |f - g|` over the boundary nodes; positive when the
    /// hypothesis holds.
    pub margin: f64,
    pub hypothesis_holds: bool,
    /// Node with the largest `|f - g| - |f|`.
    pub worst_node: Octonion,
    pub order_f: Option<DegreeResult>,
    pub order_g: Option<DegreeResult>,
    /// Sums of local orders over the given zero lists, when any were given.
    pub local_f: Option<i64>,
    pub local_g: Option<i64>,
    pub equal: bool,
}

/// Checks `|f - g| < |f|` on the boundary nodes and compares the order sums.
pub fn rouche_check(
    f: &OctonionField,
    g: &OctonionField,
    boundary: &ParamSurface,
    zeros_f: &[ZeroSpec],
    zeros_g: &[ZeroSpec],
    spec: &QuadratureSpec,
    opts: &OrderOptions,
) -> Result<RoucheReport, DegreeError> {
    #[derive(Clone, Copy)]
    struct Acc {
        max_diff: f64,
        min_f: f64,
        worst_gap: f64,
        worst: Octonion,
    }
    let acc = boundary.fold_nodes(
        spec,
        || Acc { max_diff: 0.0, min_f: f64::INFINITY, worst_gap: f64::NEG_INFINITY, worst: Octonion::ZERO },
        |mut acc, s| {
            let fv = f.evaluate(&s.point);
            let d = (fv - g.evaluate(&s.point)).norm();
            let nf = fv.norm();
            acc.max_diff = acc.max_diff.max(d);
            acc.min_f = acc.min_f.min(nf);
            if d - nf > acc.worst_gap {
                acc.worst_gap = d - nf;
                acc.worst = s.point;
            }
            acc
        },
        |a, b| Acc {
            max_diff: a.max_diff.max(b.max_diff),
            min_f: a.min_f.min(b.min_f),
            worst_gap: a.worst_gap.max(b.worst_gap),
            worst: if b.worst_gap > a.worst_gap { b.worst } else { a.worst },
        },
    )?;
    let margin = acc.min_f - acc.max_diff;
    let pointwise = acc.worst_gap < 0.0;
    let hypothesis_holds = margin > 0.0 && pointwise;
    let mut report = RoucheReport {
        max_difference: acc.max_diff,
        min_f: acc.min_f,
        margin,
        hypothesis_holds,
        worst_node: acc.worst,
        order_f: None,
        order_g: None,
        local_f: None,
        local_g: None,
        equal: false,
    };
    if !hypothesis_holds {
        return Ok(report);
    }
    let of = boundary_order(f, boundary, &Octonion::ZERO, spec, opts)?;
    let og = boundary_order(g, boundary, &Octonion::ZERO, spec, opts)?;
    let local = |field: &OctonionField, zs: &[ZeroSpec]| -> Result<Option<i64>, DegreeError> {
        if zs.is_empty() {
            return Ok(None);
        }
        let mut sum = 0;
        for z in zs {
            sum += boundary_order(field, &z.enclosure()?, &Octonion::ZERO, spec, opts)?.rounded;
        }
        Ok(Some(sum))
    };
    report.local_f = local(f, zeros_f)?;
    report.local_g = local(g, zeros_g)?;
    let tol = opts.tolerances.integer_tolerance;
    report.equal = of.rounded == og.rounded
        && of.is_integer(tol)
        && og.is_integer(tol)
        && report.local_f.is_none_or(|s| s == of.rounded)
        && report.local_g.is_none_or(|s| s == og.rounded);
    report.order_f = Some(of);
    report.order_g = Some(og);
    Ok(report)
}

/// Indexed family `f_n`, `n >= 1`, with a known limit.
#[derive(Debug, Clone)]
pub enum HurwitzFamily {
    /// `f_n = 1/n`, limit `0`.
    ConstantInverse,
    /// `f_n = 1 + 1/n`, limit `1`.
    ConstantShift,
    /// `f_n = base + c + 1/n`, limit `base + c`.
    Shifted { base: OctonionField, offset: Octonion },
}

impl HurwitzFamily {
    pub fn member(&self, n: usize) -> OctonionField {
        let t = 1.0 / n as f64;
        match self {
            HurwitzFamily::ConstantInverse => OctonionField::constant(Octonion::real(t)),
            HurwitzFamily::ConstantShift => OctonionField::constant(Octonion::real(1.0 + t)),
            HurwitzFamily::Shifted { base, offset } => base.shifted(-(*offset + Octonion::real(t))),
        }
    }

    pub fn limit(&self) -> OctonionField {
        match self {
            HurwitzFamily::ConstantInverse => OctonionField::constant(Octonion::ZERO),
            HurwitzFamily::ConstantShift => OctonionField::constant(Octonion::ONE),
            HurwitzFamily::Shifted { base, offset } => base.shifted(-*offset),
        }
    }

    pub fn label(&self) -> String {
        match self {
            HurwitzFamily::ConstantInverse => "constant_inverse".into(),
            HurwitzFamily::ConstantShift => "constant_shift".into(),
            HurwitzFamily::Shifted { base, offset } => format!("shifted({}; {})", base.label(), offset),
        }
    }

    /// `constant_inverse`, `constant_shift`, or `shifted(FIELD;C)`.
    pub fn parse(input: &str) -> Result<Self, DegreeError> {
        let src: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        match src.as_str() {
            "constant_inverse" => return Ok(HurwitzFamily::ConstantInverse),
            "constant_shift" => return Ok(HurwitzFamily::ConstantShift),
            _ => {}
        }
        let body = src
            .strip_prefix("shifted(")
            .and_then(|b| b.strip_suffix(')'))
            .ok_or_else(|| FieldError::Parse { input: input.into(), reason: "expected constant_inverse, constant_shift or shifted(FIELD;C)".into() })?;
        let (field, c) = body
            .rsplit_once(';')
            .ok_or_else(|| FieldError::Parse { input: input.into(), reason: "expected shifted(FIELD;C)".into() })?;
        let base = crate::fields::parse_field(field)?;
        let offset = c
            .parse::<Octonion>()
            .map_err(|e| FieldError::Parse { input: input.into(), reason: e.to_string() })?;
        Ok(HurwitzFamily::Shifted { base, offset })
    }
}

/// Ball `B(center, radius)` used as the Hurwitz domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub center: Octonion,
    pub radius: f64,
}

impl Ball {
    /// Lattice points with `per_axis` samples per coordinate that lie in the
    /// closed ball.
    pub fn grid(&self, per_axis: usize) -> Vec<Octonion> {
        let per_axis = per_axis.max(2);
        let mut out = Vec::new();
        let total = per_axis.pow(8);
        for mut idx in 0..total {
            let mut c = [0.0; 8];
            for x in c.iter_mut() {
                let i = idx % per_axis;
                idx /= per_axis;
                *x = -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64;
            }
            let p = Octonion(c);
            if p.norm_sqr() <= 1.0 + 1e-12 {
                out.push(self.center + p * self.radius);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum HurwitzVerdict {
    /// A member vanishes somewhere on the grid.
    HypothesisFails { n: usize, point: Octonion, value: f64 },
    /// The limit vanishes on the whole sample grid.
    IdenticallyZero { max_abs: f64 },
    /// The limit is nonzero; its boundary order sum is reported.
    OrderSum { order: DegreeResult },
}

#[derive(Debug, Clone, Serialize)]
pub struct HurwitzReport {
    pub family: String,
    pub n_max: usize,
    pub grid_points: usize,
    /// Smallest `|f_n|` seen over all members and grid points.
    pub min_member_abs: f64,
    pub verdict: HurwitzVerdict,
}

impl HurwitzReport {
    /// Either branch of the limit dichotomy holds.
    pub fn passes(&self, tol: f64) -> bool {
        match &self.verdict {
            HurwitzVerdict::HypothesisFails { .. } => false,
            HurwitzVerdict::IdenticallyZero { .. } => true,
            HurwitzVerdict::OrderSum { order } => order.rounded == 0 && order.is_integer(tol),
        }
    }
}

/// Spot-checks the nonvanishing hypothesis for `f_1..f_{n_max}` on a grid of
/// `region` and classifies the limit.
pub fn hurwitz_check(
    family: &HurwitzFamily,
    n_max: usize,
    region: &Ball,
    grid_per_axis: usize,
    spec: &QuadratureSpec,
    opts: &OrderOptions,
) -> Result<HurwitzReport, DegreeError> {
    let grid = region.grid(grid_per_axis);
    let floor = opts.tolerances.zero_floor;
    let mut min_member_abs = f64::INFINITY;
    for n in 1..=n_max.max(1) {
        let fn_ = family.member(n);
        for p in &grid {
            let v = fn_.evaluate(p).norm();
            min_member_abs = min_member_abs.min(v);
            if !(v > floor) {
                return Ok(HurwitzReport {
                    family: family.label(),
                    n_max,
                    grid_points: grid.len(),
                    min_member_abs,
                    verdict: HurwitzVerdict::HypothesisFails { n, point: *p, value: v },
                });
            }
        }
    }
    let limit = family.limit();
    let max_abs = grid.iter().map(|p| limit.evaluate(p).norm()).fold(0.0, f64::max);
    let verdict = if max_abs < floor {
        HurwitzVerdict::IdenticallyZero { max_abs }
    } else {
        let boundary = sphere(region.center, region.radius)?;
        HurwitzVerdict::OrderSum { order: boundary_order(&limit, &boundary, &Octonion::ZERO, spec, opts)? }
    };
    Ok(HurwitzReport { family: family.label(), n_max, grid_points: grid.len(), min_member_abs, verdict })
}

/// Smallest real offset `c = k * step` (k = 0, 1, ...) for which `base + c`
/// stays above `margin` on the region grid.
pub fn hurwitz_offset_search(
    base: &OctonionField,
    region: &Ball,
    grid_per_axis: usize,
    step: f64,
    max_steps: usize,
    margin: f64,
) -> Option<Octonion> {
    let grid = region.grid(grid_per_axis);
    (0..=max_steps).map(|k| Octonion::real(k as f64 * step)).find(|c| {
        grid.iter().all(|p| (base.evaluate(p) + *c).norm() > margin)
    })
}

/// Settings of the Newton degree oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub starts: usize,
    pub seed: u64,
    pub dedup_radius: f64,
    /// Preimages need `|det Jf|` above this to count as regular.
    pub det_floor: f64,
    /// Preimages closer than `boundary_margin * eps` to the sphere are rejected.
    pub boundary_margin: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Largest perturbation of a critical target value.
    pub perturbation_radius: f64,
    pub residual_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            starts: 200,
            seed: 0,
            dedup_radius: 1e-6,
            det_floor: 1e-8,
            boundary_margin: 0.05,
            max_iterations: 200,
            max_halvings: 30,
            perturbation_radius: 0.1,
            residual_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preimage {
    pub point: Octonion,
    pub det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub degree: i64,
    /// The value whose preimages were counted.
    pub target: Octonion,
    /// True when `target` replaced a critical `a`.
    pub substituted: bool,
    pub preimages: Vec<Preimage>,
    pub converged_starts: usize,
}

/// One damped Newton run for `f(z) = target`; returns the converged point.
fn newton(f: &OctonionField, target: &Octonion, start: Octonion, opts: &OracleOptions) -> Option<Octonion> {
    let mut z = start;
    let mut r = f.evaluate(&z) - *target;
    let mut rn = r.norm();
    for _ in 0..opts.max_iterations {
        if rn <= opts.residual_tol {
            return Some(z);
        }
        let j = jacobian(f, &z, crate::fields::default_step(&z));
        let lu = Lu::new(j.0);
        if lu.det() == 0.0 || !lu.det().is_finite() {
            return None;
        }
        let step = lu.solve(&r.0);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let cand = z - Octonion(step) * t;
            let rc = f.evaluate(&cand) - *target;
            let rcn = rc.norm();
            if rcn < rn {
                z = cand;
                r = rc;
                rn = rcn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return (rn <= opts.residual_tol).then_some(z);
        }
    }
    (rn <= opts.residual_tol).then_some(z)
}

fn random_in_ball(rng: &mut ChaCha8Rng, c: &Octonion, eps: f64) -> Octonion {
    let mut v = [0.0; 8];
    loop {
        for x in &mut v {
            *x = rng.gen_range(-1.0..1.0);
        }
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 <= 1.0 && n2 > 0.0 {
            break;
        }
    }
    *c + Octonion(v) * eps
}

fn random_direction(rng: &mut ChaCha8Rng) -> Octonion {
    let p = random_in_ball(rng, &Octonion::ZERO, 1.0);
    p / p.norm()
}

enum Attempt {
    Regular(Vec<Preimage>, usize),
    Critical,
    NearBoundary(Octonion),
    NoConvergence,
}

fn solve_all(f: &OctonionField, c: &Octonion, eps: f64, target: &Octonion, opts: &OracleOptions, salt: u64) -> Attempt {
    let converged: Vec<Option<Octonion>> = (0..opts.starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream((salt << 32) | i as u64);
            let start = random_in_ball(&mut rng, c, eps);
            newton(f, target, start, opts)
        })
        .collect();
    let n_conv = converged.iter().filter(|z| z.is_some()).count();
    if n_conv == 0 {
        return Attempt::NoConvergence;
    }
    let mut found: Vec<Preimage> = Vec::new();
    for z in converged.into_iter().flatten() {
        let dist = (z - *c).norm();
        if dist >= eps {
            continue;
        }
        if found.iter().any(|p| (p.point - z).norm() < opts.dedup_radius) {
            continue;
        }
        if dist > (1.0 - opts.boundary_margin) * eps {
            return Attempt::NearBoundary(z);
        }
        let det = jacobian(f, &z, crate::fields::default_step(&z)).determinant();
        if !(det.abs() > opts.det_floor) {
            return Attempt::Critical;
        }
        found.push(Preimage { point: z, det });
    }
    Attempt::Regular(found, n_conv)
}

/// Brouwer degree of `f` on `B(c, eps)` at `a`, counted as the signed number
/// of preimages found by multi-start damped Newton.
///
/// When `a` turns out to be a critical value a nearby random target is used
/// instead and reported in the result.
pub fn degree_oracle(
    f: &OctonionField,
    c: &Octonion,
    eps: f64,
    a: &Octonion,
    opts: &OracleOptions,
) -> Result<OracleResult, DegreeError> {
    if !(eps > 0.0) {
        return Err(DegreeError::Surface(SurfaceError::NonPositiveRadius(eps)));
    }
    let finish = |pre: Vec<Preimage>, conv: usize, target: Octonion, substituted: bool| OracleResult {
        degree: pre.iter().map(|p| p.det.signum() as i64).sum(),
        target,
        substituted,
        preimages: pre,
        converged_starts: conv,
    };
    match solve_all(f, c, eps, a, opts, 0) {
        Attempt::Regular(pre, conv) => return Ok(finish(pre, conv, *a, false)),
        Attempt::NoConvergence => {
            return Err(DegreeError::OracleInconclusive("Newton failed to converge from every start".into()))
        }
        Attempt::NearBoundary(z) => {
            return Err(DegreeError::Contract(format!("preimage {z} lies within the boundary margin")))
        }
        Attempt::Critical => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_cafe);
    let scale = a.norm().max(1.0);
    let radii = [1e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1.0];
    let mut salt = 1;
    for r in radii {
        let r = r * opts.perturbation_radius * scale;
        for _ in 0..4 {
            let target = *a + random_direction(&mut rng) * r;
            if let Attempt::Regular(pre, conv) = solve_all(f, c, eps, &target, opts, salt) {
                return Ok(finish(pre, conv, target, true));
            }
            salt += 1;
        }
    }
    Err(DegreeError::OracleInconclusive(format!(
        "no regular value found within {} of {a}",
        opts.perturbation_radius * scale
    )))
}

/// `sign(det Jf(c))` for a nondegenerate point, or 0.
pub fn jacobian_sign(f: &OctonionField, c: &Octonion) -> i64 {
    let d = jacobian(f, c, crate::fields::default_step(c)).determinant();
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

/// Convenience: `cof(M) v` as an octonion.
pub fn pull_element(jac: &RealMatrix8, element: &Octonion) -> Octonion {
    Octonion(jac.cofactor_apply(&element.0))
}
