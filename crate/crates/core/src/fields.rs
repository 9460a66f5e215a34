//! Octonion-valued fields: Fueter polynomials, a catalog of worked examples
//! with hand-coded Jacobians, Cauchy-Riemann residuals and a small builder
//! for real-linear combinations.

use std::fmt;
use std::sync::Arc;

use crate::matrix::RealMatrix8;
use crate::octonion::Octonion;

/// Which side the Cauchy-Riemann operator (or Cauchy kernel) acts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[default]
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            other => Err(format!("side must be left or right, got {other:?}")),
        }
    }
}

/// Declared monogenicity of a field. The residual checker is the arbiter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    Left,
    Right,
    Both,
    None,
}

impl Regularity {
    pub fn claims(self, side: Side) -> bool {
        matches!(
            (self, side),
            (Regularity::Both, _) | (Regularity::Left, Side::Left) | (Regularity::Right, Side::Right)
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("unknown field {name:?}; valid fields: {}", CATALOG_NAMES.join(", "))]
    UnknownField { name: String },
    #[error("bad parameters for {name}: {reason}")]
    BadParams { name: String, reason: String },
    #[error("Fueter index {0} out of range 1..=7")]
    IndexOutOfRange(usize),
    #[error("cannot parse field expression {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

/// Names accepted by [`catalog_get`].
pub const CATALOG_NAMES: &[&str] = &[
    "sum_squares",
    "hempfling",
    "circle_variety",
    "sphere_variety",
    "module_base",
    "module_counterexample",
    "identity",
    "constant",
    "fueter",
];

/// Multi-index `(n1, ..., n7)` of a Fueter polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex(pub [u32; 7]);

impl MultiIndex {
    /// The multi-index with a single 1 in slot `i` (1-based).
    pub fn tau(i: usize) -> Result<Self, FieldError> {
        if !(1..=7).contains(&i) {
            return Err(FieldError::IndexOutOfRange(i));
        }
        let mut n = [0; 7];
        n[i - 1] = 1;
        Ok(MultiIndex(n))
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Sequence of unit indices, each `i` repeated `n_i` times, ascending.
    fn sequence(&self) -> Vec<usize> {
        let mut seq = Vec::with_capacity(self.order() as usize);
        for (slot, &count) in self.0.iter().enumerate() {
            seq.extend(std::iter::repeat(slot + 1).take(count as usize));
        }
        seq
    }
}

/// `Z_i(z) = x_i - x_0 e_i` for `i` in `1..=7`.
pub fn fueter_z(i: usize, z: &Octonion) -> Result<Octonion, FieldError> {
    if !(1..=7).contains(&i) {
        return Err(FieldError::IndexOutOfRange(i));
    }
    Ok(z_unchecked(i, z))
}

#[inline]
fn z_unchecked(i: usize, z: &Octonion) -> Octonion {
    let mut c = [0.0; 8];
    c[0] = z[i];
    c[i] = -z[0];
    Octonion(c)
}

/// Value together with its eight partial derivatives.
#[derive(Clone, Copy)]
struct Jet {
    value: Octonion,
    partials: [Octonion; 8],
}

impl Jet {
    fn fueter_z(i: usize, z: &Octonion) -> Jet {
        let mut partials = [Octonion::ZERO; 8];
        partials[0] = -Octonion::unit(i);
        partials[i] = Octonion::ONE;
        Jet { value: z_unchecked(i, z), partials }
    }

    fn mul(&self, rhs: &Jet) -> Jet {
        let mut partials = [Octonion::ZERO; 8];
        for (k, p) in partials.iter_mut().enumerate() {
            *p = self.partials[k] * rhs.value + self.value * rhs.partials[k];
        }
        Jet { value: self.value * rhs.value, partials }
    }
}

/// Rearranges `seq` into the next lexicographic permutation; false when done.
fn next_permutation(seq: &mut [usize]) -> bool {
    if seq.len() < 2 {
        return false;
    }
    let mut i = seq.len() - 1;
    while i > 0 && seq[i - 1] >= seq[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = seq.len() - 1;
    while seq[j] <= seq[i - 1] {
        j -= 1;
    }
    seq.swap(i - 1, j);
    seq[i..].reverse();
    true
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Sum of right-nested products `Z_p1 (Z_p2 ( ... (Z_pm-1 Z_pm)))` over the
/// distinguishable orderings of the multi-index, weighted so that every
/// ordering of the `|n|` factors counts once and the total is divided by `|n|!`.
fn fueter_jet(n: &MultiIndex, z: &Octonion) -> Jet {
    let mut seq = n.sequence();
    if seq.is_empty() {
        return Jet { value: Octonion::ONE, partials: [Octonion::ZERO; 8] };
    }
    // slot 0 is unused
    let factors: [Jet; 8] = std::array::from_fn(|i| Jet::fueter_z(i.max(1), z));
    let mut total = Jet { value: Octonion::ZERO, partials: [Octonion::ZERO; 8] };
    loop {
        let mut acc = factors[*seq.last().unwrap()];
        for &i in seq.iter().rev().skip(1) {
            acc = factors[i].mul(&acc);
        }
        total.value += acc.value;
        for k in 0..8 {
            total.partials[k] += acc.partials[k];
        }
        if !next_permutation(&mut seq) {
            break;
        }
    }
    let weight = n.0.iter().map(|&c| factorial(c)).product::<f64>() / factorial(n.order());
    total.value = total.value * weight;
    for p in &mut total.partials {
        *p = *p * weight;
    }
    total
}

/// Fueter polynomial `V_n(z)`; `V_0 = 1`.
pub fn fueter_v(n: &MultiIndex, z: &Octonion) -> Octonion {
    fueter_jet(n, z).value
}

type CustomFn = Arc<dyn Fn(&Octonion) -> Octonion + Send + Sync>;

/// One summand of a composite field: `coeff * (inner * e_k)`.
#[derive(Clone)]
pub struct Term {
    pub coeff: f64,
    pub field: OctonionField,
    /// Right multiplication by the unit `e_k` (`k` in `0..=7`), if any.
    pub right_unit: Option<usize>,
}

#[derive(Clone)]
enum FieldKind {
    SumSquares(usize),
    Hempfling,
    SphereVariety { k: usize, radius: f64 },
    ModuleBase,
    ModuleCounterexample,
    Identity,
    Constant(Octonion),
    Fueter(MultiIndex),
    Composite(Vec<Term>),
    Custom(CustomFn),
}

/// An evaluatable map from octonions to octonions.
#[derive(Clone)]
pub struct OctonionField {
    name: String,
    params: Vec<f64>,
    kind: FieldKind,
    regularity: Regularity,
}

impl fmt::Debug for OctonionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OctonionField")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("regularity", &self.regularity)
            .finish()
    }
}

impl OctonionField {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn regularity_claim(&self) -> Regularity {
        self.regularity
    }

    /// Human-readable `name(params)` label.
    pub fn label(&self) -> String {
        if let FieldKind::Composite(_) = self.kind {
            return self.name.clone();
        }
        let ps: Vec<String> = self.params.iter().map(|p| format!("{p}")).collect();
        format!("{}({})", self.name, ps.join(","))
    }

    pub fn identity() -> Self {
        Self::simple("identity", vec![], FieldKind::Identity, Regularity::None)
    }

    pub fn constant(a: Octonion) -> Self {
        let params = if a.im() == Octonion::ZERO { vec![a.re()] } else { a.0.to_vec() };
        Self::simple("constant", params, FieldKind::Constant(a), Regularity::Both)
    }

    pub fn sum_squares(k: usize) -> Result<Self, FieldError> {
        if !(1..=7).contains(&k) {
            return Err(bad("sum_squares", "k must be in 1..=7"));
        }
        Ok(Self::simple("sum_squares", vec![k as f64], FieldKind::SumSquares(k), Regularity::Both))
    }

    pub fn hempfling() -> Self {
        Self::simple("hempfling", vec![], FieldKind::Hempfling, Regularity::Both)
    }

    /// `Z1^2 + Z2^2 - 1 + sum_{j>=3} Z_j e_j`, vanishing on the unit circle
    /// of the `e1 e2` plane.
    pub fn circle_variety() -> Self {
        Self::simple(
            "circle_variety",
            vec![],
            FieldKind::SphereVariety { k: 2, radius: 1.0 },
            Regularity::Both,
        )
    }

    /// `Z1^2 + ... + Zk^2 + sum_{j>k} Z_j e_j - R^2`.
    pub fn sphere_variety(k: usize, radius: f64) -> Result<Self, FieldError> {
        if !(2..=6).contains(&k) {
            return Err(bad("sphere_variety", "k must be in 2..=6"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(bad("sphere_variety", "radius must be positive"));
        }
        Ok(Self::simple(
            "sphere_variety",
            vec![k as f64, radius],
            FieldKind::SphereVariety { k, radius },
            Regularity::Both,
        ))
    }

    /// `x1 - x2 e4`, left but not right regular.
    pub fn module_base() -> Self {
        Self::simple("module_base", vec![], FieldKind::ModuleBase, Regularity::Left)
    }

    /// `(x1 - x2 e4) e3 = x1 e3 - x2 e7`, which is not left regular.
    pub fn module_counterexample() -> Self {
        Self::simple(
            "module_counterexample",
            vec![],
            FieldKind::ModuleCounterexample,
            Regularity::None,
        )
    }

    pub fn fueter(n: MultiIndex) -> Self {
        let params = n.0.iter().map(|&c| c as f64).collect();
        Self::simple("fueter", params, FieldKind::Fueter(n), Regularity::Both)
    }

    /// A user-supplied closure; its Jacobian comes from central differences.
    pub fn custom<F>(name: &str, regularity: Regularity, f: F) -> Self
    where
        F: Fn(&Octonion) -> Octonion + Send + Sync + 'static,
    {
        Self::simple(name, vec![], FieldKind::Custom(Arc::new(f)), regularity)
    }

    /// Real-linear combination of terms. No monogenicity is claimed.
    pub fn composite(name: impl Into<String>, terms: Vec<Term>) -> Self {
        Self::simple(&name.into(), vec![], FieldKind::Composite(terms), Regularity::None)
    }

    /// `self - a`.
    pub fn shifted(&self, a: Octonion) -> Self {
        if a == Octonion::ZERO {
            return self.clone();
        }
        let mut field = Self::composite(
            format!("{} - ({})", self.label(), a),
            vec![
                Term { coeff: 1.0, field: self.clone(), right_unit: None },
                Term { coeff: -1.0, field: OctonionField::constant(a), right_unit: None },
            ],
        );
        field.regularity = self.regularity;
        field
    }

    /// Overrides the declared regularity (used for builder results that are
    /// known to be regular, e.g. sums of regular fields).
    pub fn with_regularity(mut self, regularity: Regularity) -> Self {
        self.regularity = regularity;
        self
    }

    fn simple(name: &str, params: Vec<f64>, kind: FieldKind, regularity: Regularity) -> Self {
        OctonionField { name: name.to_string(), params, kind, regularity }
    }

    pub fn evaluate(&self, z: &Octonion) -> Octonion {
        let x = &z.0;
        match &self.kind {
            FieldKind::SumSquares(k) => {
                let k = *k;
                let mut c = [0.0; 8];
                let mut s = 0.0;
                for i in 1..=k {
                    s += x[i] * x[i];
                    c[i] = -2.0 * x[0] * x[i];
                }
                c[0] = s - k as f64 * x[0] * x[0];
                Octonion(c)
            }
            FieldKind::Hempfling => {
                let mut c = [0.0; 8];
                for (i, ci) in c.iter_mut().enumerate() {
                    let p = product_excluding(x, i, i);
                    *ci = if i == 0 { p - 1.0 } else { -(p - 1.0) };
                }
                Octonion(c)
            }
            FieldKind::SphereVariety { k, radius } => {
                let k = *k;
                let mut c = [0.0; 8];
                let mut s = 0.0;
                for i in 1..=k {
                    s += x[i] * x[i];
                    c[i] = -2.0 * x[0] * x[i];
                }
                for j in k + 1..8 {
                    c[j] = x[j];
                }
                c[0] = s - k as f64 * x[0] * x[0] + (7 - k) as f64 * x[0] - radius * radius;
                Octonion(c)
            }
            FieldKind::ModuleBase => {
                let mut c = [0.0; 8];
                c[0] = x[1];
                c[4] = -x[2];
                Octonion(c)
            }
            FieldKind::ModuleCounterexample => {
                let mut c = [0.0; 8];
                c[3] = x[1];
                c[7] = -x[2];
                Octonion(c)
            }
            FieldKind::Identity => *z,
            FieldKind::Constant(a) => *a,
            FieldKind::Fueter(n) => fueter_v(n, z),
            FieldKind::Composite(terms) => terms
                .iter()
                .map(|t| {
                    let v = t.field.evaluate(z);
                    let v = match t.right_unit {
                        Some(k) => v * Octonion::unit(k),
                        None => v,
                    };
                    v * t.coeff
                })
                .sum(),
            FieldKind::Custom(f) => f(z),
        }
    }

    /// Hand-coded Jacobian `(d f_i / d x_j)`, when the field has one.
    pub fn analytic_jacobian(&self, z: &Octonion) -> Option<RealMatrix8> {
        let x = &z.0;
        let mut m = RealMatrix8::ZERO;
        match &self.kind {
            FieldKind::SumSquares(k) => {
                let k = *k;
                m[(0, 0)] = -2.0 * k as f64 * x[0];
                for i in 1..=k {
                    m[(0, i)] = 2.0 * x[i];
                    m[(i, 0)] = -2.0 * x[i];
                    m[(i, i)] = -2.0 * x[0];
                }
            }
            FieldKind::Hempfling => {
                for i in 0..8 {
                    let sign = if i == 0 { 1.0 } else { -1.0 };
                    for j in 0..8 {
                        if i != j {
                            m[(i, j)] = sign * product_excluding(x, i, j);
                        }
                    }
                }
            }
            FieldKind::SphereVariety { k, .. } => {
                let k = *k;
                m[(0, 0)] = -2.0 * k as f64 * x[0] + (7 - k) as f64;
                for i in 1..=k {
                    m[(0, i)] = 2.0 * x[i];
                    m[(i, 0)] = -2.0 * x[i];
                    m[(i, i)] = -2.0 * x[0];
                }
                for j in k + 1..8 {
                    m[(j, j)] = 1.0;
                }
            }
            FieldKind::ModuleBase => {
                m[(0, 1)] = 1.0;
                m[(4, 2)] = -1.0;
            }
            FieldKind::ModuleCounterexample => {
                m[(3, 1)] = 1.0;
                m[(7, 2)] = -1.0;
            }
            FieldKind::Identity => m = RealMatrix8::identity(),
            FieldKind::Constant(_) => {}
            FieldKind::Fueter(n) => {
                let jet = fueter_jet(n, z);
                for (j, p) in jet.partials.iter().enumerate() {
                    m.set_column(j, p);
                }
            }
            FieldKind::Composite(terms) => {
                for t in terms {
                    let inner = t.field.analytic_jacobian(z)?;
                    for j in 0..8 {
                        let col = inner.column(j);
                        let col = match t.right_unit {
                            Some(k) => col * Octonion::unit(k),
                            None => col,
                        };
                        let acc = m.column(j) + col * t.coeff;
                        m.set_column(j, &acc);
                    }
                }
            }
            FieldKind::Custom(_) => return None,
        }
        Some(m)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.analytic_jacobian(&Octonion::ZERO).is_some()
    }
}

/// Product of all `x_k` with `k` different from `a` and `b`.
#[inline]
fn product_excluding(x: &[f64; 8], a: usize, b: usize) -> f64 {
    let mut p = 1.0;
    for (k, xk) in x.iter().enumerate() {
        if k != a && k != b {
            p *= xk;
        }
    }
    p
}

fn bad(name: &str, reason: &str) -> FieldError {
    FieldError::BadParams { name: name.to_string(), reason: reason.to_string() }
}

/// Default central-difference step: `cbrt(eps) * max(1, |z|)`.
pub fn default_step(z: &Octonion) -> f64 {
    f64::EPSILON.cbrt() * z.norm().max(1.0)
}

/// Central-difference partial derivatives `d f / d x_i`, `i = 0..7`.
pub fn partials_fd(f: &OctonionField, z: &Octonion, h: f64) -> [Octonion; 8] {
    let mut out = [Octonion::ZERO; 8];
    for (i, d) in out.iter_mut().enumerate() {
        let mut plus = *z;
        let mut minus = *z;
        plus[i] += h;
        minus[i] -= h;
        *d = (f.evaluate(&plus) - f.evaluate(&minus)) / (2.0 * h);
    }
    out
}

/// Central-difference approximation of `D f` (left) or `f D` (right), where
/// `D = d/dx0 + sum e_i d/dx_i`.
pub fn cr_residual(f: &OctonionField, z: &Octonion, side: Side, h: f64) -> Octonion {
    let d = partials_fd(f, z, h);
    apply_cr(&d, side)
}

/// Combines partial derivatives into the Cauchy-Riemann expression.
pub fn apply_cr(partials: &[Octonion; 8], side: Side) -> Octonion {
    let mut acc = partials[0];
    for (i, p) in partials.iter().enumerate().skip(1) {
        let e = Octonion::unit(i);
        acc += match side {
            Side::Left => e * *p,
            Side::Right => *p * e,
        };
    }
    acc
}

/// Central-difference Jacobian, entry `(i, j) = d f_i / d x_j`.
pub fn jacobian_fd(f: &OctonionField, z: &Octonion, h: f64) -> RealMatrix8 {
    let d = partials_fd(f, z, h);
    let mut m = RealMatrix8::ZERO;
    for (j, col) in d.iter().enumerate() {
        m.set_column(j, col);
    }
    m
}

/// Analytic Jacobian when available, otherwise central differences with step `h`.
pub fn jacobian(f: &OctonionField, z: &Octonion, h: f64) -> RealMatrix8 {
    f.analytic_jacobian(z).unwrap_or_else(|| jacobian_fd(f, z, h))
}

/// Outcome of a randomized Cauchy-Riemann check.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CrCheck {
    pub side: Side,
    pub points: usize,
    /// Largest `|D f|` over the sample, and where it occurred.
    pub max_residual: f64,
    pub worst_point: Octonion,
    /// Largest ratio of residual to `max(1, max_i |d f / d x_i|)`.
    pub max_relative: f64,
    /// Every point met `residual <= tolerance * scale`.
    pub monogenic: bool,
}

/// Relative residual bound used by [`cr_check`].
pub const CR_TOLERANCE: f64 = 1e-7;

/// Evaluates the CR residual at `points` seeded uniform points of `[-2, 2]^8`.
pub fn cr_check(f: &OctonionField, side: Side, points: usize, seed: u64) -> CrCheck {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = CrCheck {
        side,
        points,
        max_residual: 0.0,
        worst_point: Octonion::ZERO,
        max_relative: 0.0,
        monogenic: true,
    };
    for _ in 0..points {
        let z = Octonion(std::array::from_fn(|_| rng.gen_range(-2.0..=2.0)));
        let d = partials_fd(f, &z, default_step(&z));
        let r = apply_cr(&d, side).norm();
        let scale = d.iter().map(Octonion::norm).fold(1.0, f64::max);
        if r > out.max_residual {
            out.max_residual = r;
            out.worst_point = z;
        }
        out.max_relative = out.max_relative.max(r / scale);
    }
    out.monogenic = out.max_relative <= CR_TOLERANCE;
    out
}

/// Looks up a catalog field by name.
pub fn catalog_get(name: &str, params: &[f64]) -> Result<OctonionField, FieldError> {
    let want = |n: usize| -> Result<(), FieldError> {
        if params.len() == n {
            Ok(())
        } else {
            Err(bad(name, &format!("expected {n} parameter(s), got {}", params.len())))
        }
    };
    let as_index = |p: f64, what: &str| -> Result<usize, FieldError> {
        if p >= 0.0 && p.fract() == 0.0 && p <= 64.0 {
            Ok(p as usize)
        } else {
            Err(bad(name, &format!("{what} must be a nonnegative integer")))
        }
    };
    match name {
        "sum_squares" => {
            want(1)?;
            OctonionField::sum_squares(as_index(params[0], "k")?)
        }
        "hempfling" => want(0).map(|_| OctonionField::hempfling()),
        "circle_variety" => want(0).map(|_| OctonionField::circle_variety()),
        "sphere_variety" => {
            want(2)?;
            OctonionField::sphere_variety(as_index(params[0], "k")?, params[1])
        }
        "module_base" => want(0).map(|_| OctonionField::module_base()),
        "module_counterexample" => want(0).map(|_| OctonionField::module_counterexample()),
        "identity" => want(0).map(|_| OctonionField::identity()),
        "constant" => match params.len() {
            1 => Ok(OctonionField::constant(Octonion::real(params[0]))),
            8 => {
                let mut c = [0.0; 8];
                c.copy_from_slice(params);
                Ok(OctonionField::constant(Octonion(c)))
            }
            n => Err(bad(name, &format!("expected 1 or 8 parameters, got {n}"))),
        },
        "fueter" => {
            want(7)?;
            let mut n = [0u32; 7];
            for (slot, p) in n.iter_mut().zip(params) {
                *slot = as_index(*p, "multi-index entry")? as u32;
            }
            if n.iter().sum::<u32>() > 6 {
                return Err(bad(name, "order above 6 is not supported"));
            }
            Ok(OctonionField::fueter(MultiIndex(n)))
        }
        _ => Err(FieldError::UnknownField { name: name.to_string() }),
    }
}

/// Parses a field expression.
///
/// ```text
/// expr  := term (('+' | '-') term)*
/// term  := [number '*'] atom ['*' 'e' digit]
/// atom  := name ['(' [number (',' number)*] ')']
/// ```
///
/// e.g. `sum_squares(7)`, `sphere_variety(2,1.0)`,
/// `sum_squares(7) + 0.01*fueter(1,0,0,0,0,0,0)`, `module_base()*e3`.
/// A single atom with no coefficient returns the catalog field itself.
pub fn parse_field(input: &str) -> Result<OctonionField, FieldError> {
    let src: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    let perr = |reason: &str| FieldError::Parse { input: input.to_string(), reason: reason.to_string() };
    if src.is_empty() {
        return Err(perr("empty expression"));
    }
    let mut terms = Vec::new();
    let mut rest = src.as_str();
    let mut sign = 1.0;
    if let Some(r) = rest.strip_prefix('-') {
        sign = -1.0;
        rest = r;
    } else if let Some(r) = rest.strip_prefix('+') {
        rest = r;
    }
    loop {
        // coefficient
        let mut coeff = sign;
        let name_start = rest.find(|c: char| c.is_ascii_alphabetic()).ok_or_else(|| perr("expected a field name"))?;
        if name_start > 0 {
            let num = rest[..name_start].strip_suffix('*').ok_or_else(|| perr("expected '*' after coefficient"))?;
            coeff *= num.parse::<f64>().map_err(|_| perr("bad coefficient"))?;
            rest = &rest[name_start..];
        }
        let name_len = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
        let name = &rest[..name_len];
        rest = &rest[name_len..];
        let mut params = Vec::new();
        if let Some(r) = rest.strip_prefix('(') {
            let close = r.find(')').ok_or_else(|| perr("missing ')'"))?;
            let inner = &r[..close];
            if !inner.is_empty() {
                params = inner
                    .split(',')
                    .map(|p| p.parse::<f64>().map_err(|_| perr(&format!("bad number {p:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            rest = &r[close + 1..];
        }
        let field = catalog_get(name, &params)?;
        let mut right_unit = None;
        if let Some(r) = rest.strip_prefix("*e") {
            let digit = r.chars().next().and_then(|c| c.to_digit(10)).ok_or_else(|| perr("expected unit index after '*e'"))?;
            if digit > 7 {
                return Err(perr("unit index must be 0..=7"));
            }
            right_unit = Some(digit as usize);
            rest = &r[1..];
        }
        terms.push(Term { coeff, field, right_unit });
        if rest.is_empty() {
            break;
        }
        sign = match rest.as_bytes()[0] {
            b'+' => 1.0,
            b'-' => -1.0,
            _ => return Err(perr("expected '+' or '-' between terms")),
        };
        rest = &rest[1..];
    }
    if terms.len() == 1 && terms[0].coeff == 1.0 && terms[0].right_unit.is_none() {
        return Ok(terms.pop().unwrap().field);
    }
    Ok(OctonionField::composite(src, terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Octonion {
        let mut c = [0.0; 8];
        for x in &mut c {
            *x = rng.gen_range(-r..r);
        }
        Octonion(c)
    }

    fn e(i: usize) -> Octonion {
        Octonion::unit(i)
    }

    #[test]
    fn fueter_z_values() {
        assert_eq!(fueter_z(1, &Octonion::ONE).unwrap(), -e(1));
        assert_eq!(fueter_z(1, &e(1)).unwrap(), Octonion::ONE);
        assert_eq!(fueter_z(7, &e(2)).unwrap(), Octonion::ZERO);
        assert_eq!(fueter_z(0, &e(2)), Err(FieldError::IndexOutOfRange(0)));
        assert_eq!(fueter_z(8, &e(2)), Err(FieldError::IndexOutOfRange(8)));
    }

    #[test]
    fn fueter_v_small_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_point(&mut rng, 1.0);
        let z1 = fueter_z(1, &z).unwrap();
        let z2 = fueter_z(2, &z).unwrap();
        assert_eq!(fueter_v(&MultiIndex::tau(3).unwrap(), &z), fueter_z(3, &z).unwrap());
        let v20 = fueter_v(&MultiIndex([2, 0, 0, 0, 0, 0, 0]), &z);
        assert!((v20 - z1 * z1).max_abs() < 1e-15);
        let v11 = fueter_v(&MultiIndex([1, 1, 0, 0, 0, 0, 0]), &z);
        assert!((v11 - (z1 * z2 + z2 * z1) * 0.5).max_abs() < 1e-15);
        assert_eq!(fueter_v(&MultiIndex::default(), &z), Octonion::ONE);
    }

    #[test]
    fn multiset_permutations_count() {
        let mut seq = vec![1, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut seq) {
            count += 1;
        }
        assert_eq!(count, 12);
    }

    #[test]
    fn module_counterexample_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = random_point(&mut rng, 2.0);
        let f = OctonionField::module_base();
        assert!(cr_residual(&f, &z, Side::Left, default_step(&z)).norm() <= 1e-8);
        let g = OctonionField::module_counterexample();
        let r = cr_residual(&g, &z, Side::Left, default_step(&z));
        assert!((r - e(5) * 2.0).norm() <= 1e-8);
    }

    #[test]
    fn identity_residual_is_minus_six() {
        let z = Octonion::new([0.3, -0.2, 0.1, 0.5, 0.0, 0.7, -0.4, 0.2]);
        let r = cr_residual(&OctonionField::identity(), &z, Side::Left, 1e-5);
        assert!((r - Octonion::real(-6.0)).norm() < 1e-9);
    }

    #[test]
    fn hempfling_zero_and_jacobian() {
        let zs = Octonion([1.0; 8]);
        let f = OctonionField::hempfling();
        assert_eq!(f.evaluate(&zs), Octonion::ZERO);
        // rows 1..7 carry the minus sign of the e_i terms: diag(1,-1,..,-1)(ones - I)
        let j = f.analytic_jacobian(&zs).unwrap();
        assert!((j.determinant() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn sum_squares_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = OctonionField::sum_squares(7).unwrap();
        let fv = OctonionField::composite(
            "sum V",
            (1..=7)
                .map(|i| {
                    let mut n = [0; 7];
                    n[i - 1] = 2;
                    Term { coeff: 1.0, field: OctonionField::fueter(MultiIndex(n)), right_unit: None }
                })
                .collect(),
        );
        for _ in 0..20 {
            let z = random_point(&mut rng, 2.0);
            let a = f.evaluate(&z);
            let b = fv.evaluate(&z);
            assert!((a - b).max_abs() < 1e-12);
        }
        assert_eq!(f.evaluate(&Octonion::ZERO), Octonion::ZERO);
        assert_eq!(f.analytic_jacobian(&Octonion::ZERO).unwrap(), RealMatrix8::ZERO);
    }

    #[test]
    fn catalog_errors() {
        let err = catalog_get("bogus", &[1.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sum_squares") && msg.contains("hempfling"));
        assert!(catalog_get("sum_squares", &[8.0]).is_err());
        assert!(catalog_get("sum_squares", &[]).is_err());
        assert!(catalog_get("sphere_variety", &[1.0, 1.0]).is_err());
        assert!(catalog_get("sphere_variety", &[2.0, -1.0]).is_err());
        let c = catalog_get("constant", &[1.0]).unwrap();
        assert_eq!(c.evaluate(&e(3)), Octonion::ONE);
    }

    #[test]
    fn parse_expressions() {
        let f = parse_field("sum_squares(7)").unwrap();
        assert_eq!(f.name(), "sum_squares");
        let g = parse_field("sum_squares(7) + 0.01*fueter(1,0,0,0,0,0,0)").unwrap();
        let z = Octonion::new([0.2, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let want = f.evaluate(&z) + fueter_z(1, &z).unwrap() * 0.01;
        assert!((g.evaluate(&z) - want).max_abs() < 1e-15);
        let h = parse_field("module_base()*e3").unwrap();
        let w = Octonion::new([0.0, 1.5, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(h.evaluate(&w), OctonionField::module_counterexample().evaluate(&w));
        assert!(parse_field("bogus(1)").is_err());
        assert!(parse_field("sum_squares(7) +").is_err());
        assert!(parse_field("").is_err());
        let neg = parse_field("-identity()").unwrap();
        assert_eq!(neg.evaluate(&e(1)), -e(1));
        assert_eq!(parse_field("hempfling").unwrap().name(), "hempfling");
        assert!(parse_field("sum_squares").is_err());
    }

    #[test]
    fn composite_jacobian_with_right_unit() {
        let g = parse_field("2*module_base()*e3").unwrap();
        let z = Octonion::new([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        let a = g.analytic_jacobian(&z).unwrap();
        let fd = jacobian_fd(&g, &z, 1e-6);
        assert!(a.max_abs_diff(&fd) < 1e-8);
    }

    #[test]
    fn regularity_claims() {
        assert!(Regularity::Both.claims(Side::Right));
        assert!(Regularity::Left.claims(Side::Left));
        assert!(!Regularity::Left.claims(Side::Right));
        assert!(!Regularity::None.claims(Side::Left));
    }
}
