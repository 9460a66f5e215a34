//! `octodeg` command-line front end.
//!
//! Every command prints one JSON object (or a short text rendering) and maps
//! its outcome onto the exit codes
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, verdict passed |
//! | 1 | verdict failed (non-integer result, hypothesis fails, ...) |
//! | 2 | usage or specification error |
//! | 3 | contract violation (zero on the surface, self-intersecting tube, ...) |

use std::ffi::OsString;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::degree::{
    self, argument_principle, boundary_order, degree_oracle, hurwitz_check, rouche_check, split_top_level,
    winding_number, Ball, DegreeError, DegreeResult, HurwitzFamily, Method, OracleOptions, OrderOptions, Tolerances,
    ZeroSpec,
};
use crate::fields::{cr_check, parse_field, FieldError, Side};
use crate::octonion::{unit_product_label, verify_table, Octonion};
use crate::surfaces::{parse_core, parse_surface, tube, QuadratureSpec, Rule, SurfaceError, SurfaceKind};

pub const SCHEMA: u32 = 1;

const EXAMPLES: &str = "\
Examples:
  octodeg table
  octodeg check-cr --field hempfling --side left --points 100
  octodeg winding --surface \"sphere(0,0,0,0,0,0,0,0;1)\" --point 0
  octodeg order --field hempfling --center 1,1,1,1,1,1,1,1 --radius 0.3 --method image
  octodeg order --field \"sum_squares(7)\" --center 0 --radius 0.5 --nodes 96,6,6,6,6,6,6
  octodeg tube-order --field circle_variety --core \"circle;e1,e2;1\" --eps 0.2 --nodes 4,48,48,4,4,4,4
  octodeg argument --field hempfling --boundary \"sphere(1,1,1,1,1,1,1,1;0.5)\" --zeros \"isolated(1,1,1,1,1,1,1,1;0.3)\"
  octodeg rouche --field \"sum_squares(7)\" --perturbed \"sum_squares(7) + 0.01*fueter(1,0,0,0,0,0,0)\" --boundary \"sphere(0;1)\" --nodes 96,6,6,6,6,6,6
  octodeg hurwitz --family constant_inverse --nmax 10 --region \"sphere(0;0.5)\"
  octodeg oracle --field hempfling --center 1,1,1,1,1,1,1,1 --radius 0.3 --starts 200

Octonions are 8 comma-separated reals or sums such as 1+e1-0.5*e7.
Fields are catalog calls (hempfling, sum_squares(7), sphere_variety(2,1), fueter(1,0,0,0,0,0,0), ...)
combined with +, -, scalar factors and right unit factors (module_base()*e3).";

#[derive(Parser, Debug)]
#[command(name = "octodeg", version, about = "Octonionic winding numbers, orders of zeroes and mapping degrees", after_help = EXAMPLES)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// Tensor nodes per parameter: one count, or seven comma-separated counts
    #[arg(long, global = true, default_value = "8", value_parser = parse_nodes)]
    nodes: NodeCounts,
    /// Quadrature rule
    #[arg(long, global = true, value_enum, default_value_t = RuleArg::Tensor)]
    rule: RuleArg,
    /// Total Monte Carlo samples (with --rule mc)
    #[arg(long, global = true, default_value_t = 1 << 20)]
    samples: usize,
    /// Seed for Monte Carlo, random check points and oracle starts
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Integer tolerance on |raw - rounded|
    #[arg(long, global = true, default_value_t = 0.1)]
    tolerance: f64,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Side of the kernel / Cauchy-Riemann operator
    #[arg(long, global = true, default_value = "left")]
    side: Side,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    Tensor,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeCounts {
    Uniform(usize),
    PerParameter([usize; 7]),
}

fn parse_nodes(s: &str) -> Result<NodeCounts, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums = parts
        .iter()
        .map(|p| p.parse::<usize>().map_err(|_| format!("bad node count {p:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    match nums.as_slice() {
        [n] => Ok(NodeCounts::Uniform(*n)),
        v if v.len() == 7 => Ok(NodeCounts::PerParameter(std::array::from_fn(|i| v[i]))),
        _ => Err("expected one count or seven comma-separated counts".into()),
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print and verify the unit multiplication table
    Table,
    /// Randomized Cauchy-Riemann residual check of a field
    CheckCr {
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Winding number of a surface around a point
    Winding {
        #[arg(long)]
        surface: String,
        #[arg(long)]
        point: String,
    },
    /// Order of an isolated a-point, integrated over S7(center, radius)
    Order {
        #[arg(long)]
        field: String,
        #[arg(long)]
        center: String,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value = "0")]
        a: String,
        #[arg(long, default_value = "pullback")]
        method: Method,
    },
    /// Order of a zero variety, integrated over a tube around its core
    TubeOrder {
        #[arg(long)]
        field: String,
        /// point;C | circle;e1,e2;R | ksphere;k;R | segment;A;B
        #[arg(long)]
        core: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value = "pullback")]
        method: Method,
    },
    /// Compare a boundary integral with the sum of local orders
    Argument {
        #[arg(long)]
        field: String,
        #[arg(long)]
        boundary: String,
        /// Comma-separated isolated(C;r) / variety(CORE;eps) items
        #[arg(long, default_value = "")]
        zeros: String,
        #[arg(long, default_value = "0")]
        a: String,
        #[arg(long, default_value = "pullback")]
        method: Method,
    },
    /// Check the Rouche hypothesis and compare order sums
    Rouche {
        #[arg(long)]
        field: String,
        #[arg(long)]
        perturbed: String,
        #[arg(long)]
        boundary: String,
        #[arg(long, default_value = "")]
        zeros_f: String,
        #[arg(long, default_value = "")]
        zeros_g: String,
    },
    /// Hurwitz harness on a ball
    Hurwitz {
        /// constant_inverse | constant_shift | shifted(FIELD;C)
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 10)]
        nmax: usize,
        /// sphere(C;r) bounding the ball
        #[arg(long)]
        region: String,
        /// Grid points per axis for the nonvanishing spot check
        #[arg(long, default_value_t = 5)]
        grid: usize,
    },
    /// Brouwer degree by multi-start Newton
    Oracle {
        #[arg(long)]
        field: String,
        #[arg(long)]
        center: String,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value = "0")]
        a: String,
        #[arg(long, default_value_t = 200)]
        starts: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Table => "table",
            Command::CheckCr { .. } => "check-cr",
            Command::Winding { .. } => "winding",
            Command::Order { .. } => "order",
            Command::TubeOrder { .. } => "tube-order",
            Command::Argument { .. } => "argument",
            Command::Rouche { .. } => "rouche",
            Command::Hurwitz { .. } => "hurwitz",
            Command::Oracle { .. } => "oracle",
        }
    }
}

/// The JSON object written by every successful command.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub inputs: Value,
    pub raw: Option<Octonion>,
    pub scalar: Option<f64>,
    pub rounded: Option<i64>,
    pub residual: Option<f64>,
    pub node_count: Option<usize>,
    pub runtime_ms: u64,
    pub verdict: String,
    pub details: Value,
}

impl Report {
    fn new(command: &str, inputs: Value) -> Self {
        Report {
            schema: SCHEMA,
            command: command.to_string(),
            inputs,
            raw: None,
            scalar: None,
            rounded: None,
            residual: None,
            node_count: None,
            runtime_ms: 0,
            verdict: String::new(),
            details: Value::Null,
        }
    }

    fn with_result(mut self, r: &DegreeResult) -> Self {
        self.raw = Some(r.raw);
        self.scalar = Some(r.scalar);
        self.rounded = Some(r.rounded);
        self.residual = Some(r.residual);
        self.node_count = Some(r.node_count);
        self
    }

    fn verdict(mut self, pass: bool, pass_word: &str, fail_word: &str) -> (Self, bool) {
        self.verdict = if pass { pass_word } else { fail_word }.to_string();
        (self, pass)
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Contract(String),
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SurfaceError> for CliError {
    fn from(e: SurfaceError) -> Self {
        match e {
            SurfaceError::SelfIntersecting { .. } => CliError::Contract(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DegreeError> for CliError {
    fn from(e: DegreeError) -> Self {
        if e.is_contract_violation() {
            return CliError::Contract(e.to_string());
        }
        match e {
            DegreeError::Surface(s) => s.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn octonion_arg(name: &str, s: &str) -> Result<Octonion, CliError> {
    s.parse::<Octonion>().map_err(|e| CliError::Usage(format!("--{name}: {e}")))
}

fn zero_list(s: &str) -> Result<Vec<ZeroSpec>, CliError> {
    split_top_level(s).iter().map(|z| ZeroSpec::parse(z).map_err(CliError::from)).collect()
}

fn ball_arg(s: &str) -> Result<Ball, CliError> {
    let surf = parse_surface(s)?;
    if surf.kind() != SurfaceKind::Sphere {
        return Err(CliError::Usage("--region must be sphere(C;r)".into()));
    }
    let center = match surf.core() {
        crate::surfaces::CoreManifold::Point(c) => *c,
        _ => unreachable!("spheres have point cores"),
    };
    Ok(Ball { center, radius: surf.thickness() })
}

fn spec_from(g: &GlobalArgs) -> Result<QuadratureSpec, CliError> {
    let spec = match (g.rule, g.nodes) {
        (RuleArg::Mc, _) => QuadratureSpec::monte_carlo(g.samples, g.seed),
        (RuleArg::Tensor, NodeCounts::Uniform(n)) => QuadratureSpec { seed: g.seed, ..QuadratureSpec::tensor(n) },
        (RuleArg::Tensor, NodeCounts::PerParameter(c)) => {
            QuadratureSpec { seed: g.seed, ..QuadratureSpec::anisotropic(c) }
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn spec_json(spec: &QuadratureSpec) -> Value {
    match spec.rule {
        Rule::GaussLegendreTensor => json!({"rule": spec.rule, "nodes": spec.counts()}),
        Rule::MonteCarlo => json!({"rule": spec.rule, "samples": spec.total_samples, "seed": spec.seed}),
    }
}

fn execute(cmd: &Command, g: &GlobalArgs) -> Result<(Report, bool), CliError> {
    if !(g.tolerance > 0.0) {
        return Err(CliError::Usage("--tolerance must be positive".into()));
    }
    let tol = Tolerances { integer_tolerance: g.tolerance, ..Default::default() };
    let name = cmd.name();
    let integer = |report: Report, r: &DegreeResult| {
        report.with_result(r).verdict(r.is_integer(tol.integer_tolerance), "integer", "non_integer")
    };
    match cmd {
        Command::Table => {
            let table: Vec<Vec<String>> =
                (1..8).map(|i| (1..8).map(|j| unit_product_label(i, j)).collect()).collect();
            let defects = verify_table().err().unwrap_or_default();
            let mut r = Report::new(name, json!({}));
            r.details = json!({
                "rows": "e1..e7 (left factor)",
                "columns": "e1..e7 (right factor)",
                "table": table,
                "defects": defects.iter().map(|d| format!("{d:?}")).collect::<Vec<_>>(),
            });
            Ok(r.verdict(defects.is_empty(), "verified", "defective"))
        }
        Command::CheckCr { field, points } => {
            let f = parse_field(field)?;
            let c = cr_check(&f, g.side, *points, g.seed);
            let mut r = Report::new(name, json!({"field": f.label(), "side": g.side, "points": points, "seed": g.seed}));
            r.residual = Some(c.max_residual);
            r.details = json!({
                "max_relative": c.max_relative,
                "worst_point": c.worst_point,
                "regularity_claim": format!("{:?}", f.regularity_claim()).to_lowercase(),
                "claim_consistent": f.regularity_claim().claims(g.side) == c.monogenic,
            });
            Ok(r.verdict(c.monogenic, "monogenic", "not_monogenic"))
        }
        Command::Winding { surface, point } => {
            let s = parse_surface(surface)?;
            let z = octonion_arg("point", point)?;
            let spec = spec_from(g)?;
            let res = winding_number(&s, &z, g.side, &spec, &tol)?;
            let r = Report::new(
                name,
                json!({"surface": surface, "point": z, "side": g.side, "quadrature": spec_json(&spec)}),
            );
            let (mut r, ok) = integer(r, &res);
            r.details = json!({"non_scalar": res.non_scalar, "method": res.method});
            Ok((r, ok))
        }
        Command::Order { field, center, radius, a, method } => {
            let f = parse_field(field)?;
            let c = octonion_arg("center", center)?;
            let a = octonion_arg("a", a)?;
            let spec = spec_from(g)?;
            let opts = OrderOptions { method: *method, side: g.side, tolerances: tol };
            let res = degree::order_isolated(&f, &c, &a, *radius, &spec, &opts)?;
            let r = Report::new(
                name,
                json!({"field": f.label(), "center": c, "radius": radius, "a": a, "method": method, "side": g.side, "quadrature": spec_json(&spec)}),
            );
            let (mut r, ok) = integer(r, &res);
            r.details = json!({"non_scalar": res.non_scalar, "method": res.method});
            Ok((r, ok))
        }
        Command::TubeOrder { field, core, eps, method } => {
            let f = parse_field(field)?;
            let core_m = parse_core(core)?;
            let spec = spec_from(g)?;
            let opts = OrderOptions { method: *method, side: g.side, tolerances: tol };
            let surface = tube(core_m, *eps)?;
            let res = boundary_order(&f, &surface, &Octonion::ZERO, &spec, &opts)?;
            let r = Report::new(
                name,
                json!({"field": f.label(), "core": core, "eps": eps, "method": method, "side": g.side, "quadrature": spec_json(&spec)}),
            );
            let (mut r, ok) = integer(r, &res);
            r.details = json!({"non_scalar": res.non_scalar, "method": res.method});
            Ok((r, ok))
        }
        Command::Argument { field, boundary, zeros, a, method } => {
            let f = parse_field(field)?;
            let b = parse_surface(boundary)?;
            let zs = zero_list(zeros)?;
            let a = octonion_arg("a", a)?;
            let spec = spec_from(g)?;
            let opts = OrderOptions { method: *method, side: g.side, tolerances: tol };
            let rep = argument_principle(&f, &b, &zs, &a, &spec, &opts)?;
            let mut r = Report::new(
                name,
                json!({"field": f.label(), "boundary": boundary, "zeros": split_top_level(zeros), "a": a, "method": method, "side": g.side, "quadrature": spec_json(&spec)}),
            )
            .with_result(&rep.lhs);
            r.details = json!({
                "terms": rep.terms.iter().map(|t| json!({"raw": t.raw, "rounded": t.rounded, "residual": t.residual})).collect::<Vec<_>>(),
                "rhs_sum": rep.rhs_sum,
                "rhs_rounded": rep.rhs_rounded,
                "discrepancy": rep.discrepancy,
            });
            Ok(r.verdict(rep.agrees(tol.integer_tolerance), "agree", "disagree"))
        }
        Command::Rouche { field, perturbed, boundary, zeros_f, zeros_g } => {
            let f = parse_field(field)?;
            let gf = parse_field(perturbed)?;
            let b = parse_surface(boundary)?;
            let (zf, zg) = (zero_list(zeros_f)?, zero_list(zeros_g)?);
            let spec = spec_from(g)?;
            let opts = OrderOptions { side: g.side, tolerances: tol, ..Default::default() };
            let rep = rouche_check(&f, &gf, &b, &zf, &zg, &spec, &opts)?;
            let mut r = Report::new(
                name,
                json!({"field": f.label(), "perturbed": gf.label(), "boundary": boundary, "side": g.side, "quadrature": spec_json(&spec)}),
            );
            if let Some(of) = &rep.order_f {
                r = r.with_result(of);
            }
            r.details = serde_json::to_value(&rep).unwrap_or(Value::Null);
            if !rep.hypothesis_holds {
                return Ok(r.verdict(false, "", "hypothesis_fails"));
            }
            Ok(r.verdict(rep.equal, "equal", "unequal"))
        }
        Command::Hurwitz { family, nmax, region, grid } => {
            let fam = HurwitzFamily::parse(family)?;
            let ball = ball_arg(region)?;
            let spec = spec_from(g)?;
            let opts = OrderOptions { side: g.side, tolerances: tol, ..Default::default() };
            let rep = hurwitz_check(&fam, *nmax, &ball, *grid, &spec, &opts)?;
            let mut r = Report::new(
                name,
                json!({"family": rep.family, "nmax": nmax, "region": ball, "grid": grid, "quadrature": spec_json(&spec)}),
            );
            let word = match &rep.verdict {
                degree::HurwitzVerdict::HypothesisFails { .. } => "hypothesis_fails",
                degree::HurwitzVerdict::IdenticallyZero { .. } => "identically_zero",
                degree::HurwitzVerdict::OrderSum { order } => {
                    r = r.with_result(order);
                    if rep.passes(tol.integer_tolerance) {
                        "order_sum_zero"
                    } else {
                        "order_sum_nonzero"
                    }
                }
            };
            let ok = rep.passes(tol.integer_tolerance);
            r.details = serde_json::to_value(&rep).unwrap_or(Value::Null);
            Ok(r.verdict(ok, word, word))
        }
        Command::Oracle { field, center, radius, a, starts } => {
            let f = parse_field(field)?;
            let c = octonion_arg("center", center)?;
            let a = octonion_arg("a", a)?;
            let opts = OracleOptions { starts: *starts, seed: g.seed, ..Default::default() };
            let res = degree_oracle(&f, &c, *radius, &a, &opts)?;
            let mut r = Report::new(
                name,
                json!({"field": f.label(), "center": c, "radius": radius, "a": a, "starts": starts, "seed": g.seed}),
            );
            r.rounded = Some(res.degree);
            r.details = serde_json::to_value(&res).unwrap_or(Value::Null);
            Ok(r.verdict(true, "conclusive", ""))
        }
    }
}

fn render_text(r: &Report) -> String {
    let mut out = format!("{}: {}\n", r.command, r.verdict);
    if r.command == "table" {
        if let Some(rows) = r.details["table"].as_array() {
            out.push_str("      ");
            for j in 1..8 {
                out.push_str(&format!("{:>5}", format!("e{j}")));
            }
            out.push('\n');
            for (i, row) in rows.iter().enumerate() {
                out.push_str(&format!("{:>5} ", format!("e{}", i + 1)));
                for cell in row.as_array().into_iter().flatten() {
                    out.push_str(&format!("{:>5}", cell.as_str().unwrap_or("?")));
                }
                out.push('\n');
            }
        }
    }
    if let Some(raw) = &r.raw {
        out.push_str(&format!("raw: {raw}\n"));
    }
    for (k, v) in [("scalar", r.scalar), ("residual", r.residual)] {
        if let Some(v) = v {
            out.push_str(&format!("{k}: {v:.6e}\n"));
        }
    }
    if let Some(n) = r.rounded {
        out.push_str(&format!("rounded: {n}\n"));
    }
    if let Some(n) = r.node_count {
        out.push_str(&format!("nodes: {n}\n"));
    }
    if r.command != "table" && !r.details.is_null() {
        out.push_str(&format!("details: {}\n", r.details));
    }
    out.push_str(&format!("runtime: {} ms", r.runtime_ms));
    out
}

fn error_output(command: &str, kind: &str, message: &str, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => json!({"schema": SCHEMA, "command": command, "error": {"kind": kind, "message": message}}).to_string(),
        OutputFormat::Text => format!("error ({kind}): {message}"),
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the exit code and the text to print.
pub fn run<I, T>(argv: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            return (code, e.render().to_string());
        }
    };
    let name = cli.command.name();
    let format = cli.global.output;
    let start = Instant::now();
    let result = match cli.global.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command, &cli.global)),
            Err(e) => Err(CliError::Usage(format!("cannot start thread pool: {e}"))),
        },
        None => execute(&cli.command, &cli.global),
    };
    match result {
        Ok((mut report, pass)) => {
            report.runtime_ms = start.elapsed().as_millis() as u64;
            let text = match format {
                OutputFormat::Json => serde_json::to_string(&report).expect("report serializes"),
                OutputFormat::Text => render_text(&report),
            };
            (if pass { 0 } else { 1 }, text)
        }
        Err(CliError::Usage(m)) => (2, error_output(name, "usage", &m, format)),
        Err(CliError::Contract(m)) => (3, error_output(name, "contract_violation", &m, format)),
    }
}
