//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Criteria run one after another so the
//! runtime bounds are measured without contention.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use octo_degree::cli;
use octo_degree::degree::{
    argument_principle, degree_oracle, hurwitz_check, order_isolated, order_variety, rouche_check, winding_number,
    Ball, DegreeResult, HurwitzFamily, HurwitzVerdict, Method, OracleOptions, OrderOptions, Tolerances, ZeroSpec,
    NORMALIZATION,
};
use octo_degree::fields::{
    catalog_get, cr_check, cr_residual, default_step, jacobian_fd, parse_field, MultiIndex, OctonionField, Side,
};
use octo_degree::octonion::Octonion;
use octo_degree::surfaces::{area, parse_core, sphere, QuadratureSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALGEBRA_TUPLES: usize = 10_000;
const ALGEBRA_TOL: f64 = 1e-12;
const CR_POINTS: usize = 100;
const MODULE_BASE_TOL: f64 = 1e-8;
const MODULE_COUNTER_TOL: f64 = 1e-6;
const DET_FD_TOL: f64 = 1e-4;
const WINDING_TOL: f64 = 1e-3;
const NON_SCALAR_TOL: f64 = 1e-6;
const AREA_TOL: f64 = 1e-3;
const INTEGER_TOL: f64 = 0.1;
const SEED: u64 = 20240607;

/// sum_squares(7) has |f|^-8 peaks about 0.06 rad wide in the polar angle
/// (|f|^2 = r^4 (0.4 + 60 (cos^2 t - 0.1)^2)); the remaining angles only
/// see low-order trigonometric dependence.
const SUM_SQUARES_NODES: [usize; 7] = [96, 6, 6, 6, 6, 6, 6];
/// The circle variety's linearisation has singular values 5.7 and 0.7 on
/// the plane of the first two fibre angles; the core angle and the rest
/// are nearly uniform.
const CIRCLE_NODES: [usize; 7] = [4, 48, 48, 4, 4, 4, 4];

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into(), notes: Vec::new() }
    }
}

fn z_star() -> Octonion {
    Octonion::new([1.0; 8])
}

fn random_octonion(rng: &mut ChaCha8Rng) -> Octonion {
    Octonion(std::array::from_fn(|_| rng.gen_range(-1.0..=1.0)))
}

fn fmt_result(r: &DegreeResult) -> String {
    format!("{:.6} (rounded {}, residual {:.1e})", r.scalar, r.rounded, r.residual)
}

fn reference_table() -> [[(i8, usize); 7]; 7] {
    // (sign, index) with index 0 meaning the real unit
    const ROWS: [&str; 7] = [
        "-1 e4 e5 -e2 -e3 -e7 e6",
        "-e4 -1 e6 e1 e7 -e3 -e5",
        "-e5 -e6 -1 -e7 e1 e2 e4",
        "e2 -e1 e7 -1 -e6 e5 -e3",
        "e3 -e7 -e1 e6 -1 -e4 e2",
        "e7 e3 -e2 -e5 e4 -1 -e1",
        "-e6 e5 -e4 e3 -e2 e1 -1",
    ];
    let mut t = [[(1i8, 0usize); 7]; 7];
    for (i, row) in ROWS.iter().enumerate() {
        for (j, cell) in row.split_whitespace().enumerate() {
            let (sign, body) = match cell.strip_prefix('-') {
                Some(b) => (-1, b),
                None => (1, cell),
            };
            let idx = if body == "1" { 0 } else { body[1..].parse().unwrap() };
            t[i][j] = (sign, idx);
        }
    }
    t
}

fn c1_algebra() -> Outcome {
    let table = reference_table();
    let mut table_ok = 0;
    for i in 1..8 {
        for j in 1..8 {
            let (s, k) = table[i - 1][j - 1];
            if Octonion::unit(i) * Octonion::unit(j) == Octonion::unit(k) * s as f64 {
                table_ok += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut worst_name = "";
    let mut check = |name: &'static str, lhs: Octonion, rhs: Octonion, scale: f64| {
        let err = (lhs - rhs).norm() / scale.max(1.0);
        if err > worst {
            worst = err;
            worst_name = name;
        }
    };
    for _ in 0..ALGEBRA_TUPLES {
        let (a, b, c) = (random_octonion(&mut rng), random_octonion(&mut rng), random_octonion(&mut rng));
        let (na, nb, nc) = (a.norm(), b.norm(), c.norm());
        check("moufang (ab)(ca) = a((bc)a)", (a * b) * (c * a), a * ((b * c) * a), na * na * nb * nc);
        check("moufang c(a(cb)) = ((ca)c)b", c * (a * (c * b)), ((c * a) * c) * b, nc * nc * na * nb);
        check("moufang a(c(bc)) = ((ac)b)c", a * (c * (b * c)), ((a * c) * b) * c, nc * nc * na * nb);
        check("moufang (ca)(bc) = (c(ab))c", (c * a) * (b * c), (c * (a * b)) * c, nc * nc * na * nb);
        check("flexibility", (a * b) * a, a * (b * a), na * na * nb);
        check(
            "norm composition",
            Octonion::real((a * b).norm()),
            Octonion::real(na * nb),
            na * nb,
        );
        check("(a conj b) b = a (conj b b)", (a * b.conjugate()) * b, a * (b.conjugate() * b), na * nb * nb);
        check(
            "Re b(conj(a) a)c = Re (b conj a)(ac)",
            Octonion::real((b * (a.conjugate() * a) * c).re()),
            Octonion::real(((b * a.conjugate()) * (a * c)).re()),
            na * na * nb * nc,
        );
    }
    let pass = table_ok == 49 && worst <= ALGEBRA_TOL;
    Outcome::new(
        pass,
        format!("{table_ok}/49 table products match; worst relative identity error {worst:.1e} ({worst_name}) over {ALGEBRA_TUPLES} tuples"),
    )
}

fn catalog_for_cr() -> Vec<OctonionField> {
    let mut v = Vec::new();
    for k in 1..=7 {
        v.push(catalog_get("sum_squares", &[k as f64]).unwrap());
    }
    for k in 2..=6 {
        v.push(catalog_get("sphere_variety", &[k as f64, 1.0]).unwrap());
    }
    for name in ["hempfling", "circle_variety", "module_base", "module_counterexample", "identity"] {
        v.push(catalog_get(name, &[]).unwrap());
    }
    v.push(catalog_get("constant", &[1.0]).unwrap());
    let mut indices = Vec::new();
    for i in 0..7 {
        indices.push(MultiIndex::tau(i + 1).unwrap());
        for j in i..7 {
            let mut n = [0u32; 7];
            n[i] += 1;
            n[j] += 1;
            indices.push(MultiIndex(n));
        }
    }
    indices.push(MultiIndex([1, 1, 1, 0, 0, 0, 0]));
    indices.push(MultiIndex([0, 2, 0, 0, 0, 1, 0]));
    indices.push(MultiIndex([0, 0, 0, 3, 0, 0, 0]));
    for n in indices {
        v.push(OctonionField::fueter(n));
    }
    v
}

fn c2_cr_fixtures() -> Outcome {
    let base = OctonionField::module_base();
    let counter = OctonionField::module_counterexample();
    let want = Octonion::unit(5) * 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut base_worst, mut counter_worst): (f64, f64) = (0.0, 0.0);
    for _ in 0..CR_POINTS {
        let z = random_octonion(&mut rng) * 2.0;
        base_worst = base_worst.max(cr_residual(&base, &z, Side::Left, default_step(&z)).norm());
        counter_worst = counter_worst.max((cr_residual(&counter, &z, Side::Left, default_step(&z)) - want).norm());
    }
    let mut mismatches = Vec::new();
    let fields = catalog_for_cr();
    for (i, f) in fields.iter().enumerate() {
        for side in [Side::Left, Side::Right] {
            let c = cr_check(f, side, CR_POINTS, SEED + i as u64);
            if c.monogenic != f.regularity_claim().claims(side) {
                mismatches.push(format!("{} {side} (relative residual {:.1e})", f.label(), c.max_relative));
            }
        }
    }
    let pass = base_worst <= MODULE_BASE_TOL && counter_worst <= MODULE_COUNTER_TOL && mismatches.is_empty();
    Outcome::new(
        pass,
        format!(
            "|D(x1 - x2 e4)| <= {base_worst:.1e}; |D((x1 - x2 e4) e3) - 2e5| <= {counter_worst:.1e}; {} fields x 2 sides, mismatches: {}",
            fields.len(),
            if mismatches.is_empty() { "none".to_string() } else { mismatches.join(", ") }
        ),
    )
}

fn c3_jacobian() -> Outcome {
    let f = OctonionField::hempfling();
    let z = z_star();
    let analytic = f.analytic_jacobian(&z).expect("hempfling has an analytic Jacobian").determinant();
    let fd = jacobian_fd(&f, &z, 1e-5).determinant();
    let pass = analytic == -7.0 && (fd + 7.0).abs() <= DET_FD_TOL;
    let mut o = Outcome::new(pass, format!("expected det = -7; analytic det = {analytic}, finite-difference det = {fd:.8}"));
    if !pass {
        o.notes.push(
            "rows 1..7 of the Jacobian carry the minus sign of f_i = -(prod - 1); det = (-1)^7 det(ones - I) = (-1)^7 (-7) = +7"
                .into(),
        );
    }
    o
}

fn timed<T>(run: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = run();
    (v, start.elapsed())
}

fn c4_winding() -> Outcome {
    const EACH: Duration = Duration::from_secs(60);
    let spec = QuadratureSpec::default();
    let tol = Tolerances::default();
    let s = sphere(Octonion::ZERO, 1.0).unwrap();
    let (inside, t1) = timed(|| winding_number(&s, &Octonion::ZERO, Side::Left, &spec, &tol).unwrap());
    let (outside, t2) = timed(|| winding_number(&s, &(Octonion::unit(1) * 2.0), Side::Left, &spec, &tol).unwrap());
    let (normalized_area, t3) = timed(|| NORMALIZATION * area(&s, &spec).unwrap());
    let slowest = t1.max(t2).max(t3);
    let pass = (inside.scalar - 1.0).abs() <= WINDING_TOL
        && inside.non_scalar < NON_SCALAR_TOL
        && outside.scalar.abs() <= WINDING_TOL
        && (normalized_area - 1.0).abs() <= AREA_TOL
        && slowest < EACH;
    Outcome::new(
        pass,
        format!(
            "w(0) = {:.6} (non-scalar {:.1e}), w(2e1) = {:.2e}, 3/pi^4 * area = {normalized_area:.6}, {} nodes, slowest {:.1} s",
            inside.scalar,
            inside.non_scalar,
            outside.scalar,
            inside.node_count,
            slowest.as_secs_f64()
        ),
    )
}

fn c5_order_oracle() -> Outcome {
    let mut parts = Vec::new();
    let mut notes = Vec::new();
    let mut pass = true;
    let oracle_opts = OracleOptions { seed: SEED, ..Default::default() };
    let cases: [(&str, OctonionField, Octonion, f64, QuadratureSpec, Option<i64>); 3] = [
        ("identity at 0", OctonionField::identity(), Octonion::ZERO, 0.5, QuadratureSpec::default(), Some(1)),
        ("hempfling at z*", OctonionField::hempfling(), z_star(), 0.3, QuadratureSpec::default(), Some(-1)),
        (
            "sum_squares(7) at 0",
            OctonionField::sum_squares(7).unwrap(),
            Octonion::ZERO,
            0.5,
            QuadratureSpec::anisotropic(SUM_SQUARES_NODES),
            None,
        ),
    ];
    for (label, f, c, eps, spec, expected) in cases {
        let oracle = degree_oracle(&f, &c, eps, &Octonion::ZERO, &oracle_opts);
        let oracle_degree = match &oracle {
            Ok(o) => {
                if o.substituted {
                    notes.push(format!("{label}: oracle used regular value {} near 0", o.target));
                }
                Some(o.degree)
            }
            Err(e) => {
                notes.push(format!("{label}: oracle failed: {e}"));
                None
            }
        };
        let want = expected.or(oracle_degree);
        let mut line = format!("{label}: oracle {}", oracle_degree.map_or("-".to_string(), |d| d.to_string()));
        for method in [Method::Pullback, Method::Image] {
            match order_isolated(&f, &c, &Octonion::ZERO, eps, &spec, &OrderOptions::with_method(method)) {
                Ok(r) => {
                    let ok = Some(r.rounded) == want && Some(r.rounded) == oracle_degree && r.residual < INTEGER_TOL;
                    pass &= ok;
                    line.push_str(&format!(", {method} {}", fmt_result(&r)));
                }
                Err(e) => {
                    pass = false;
                    line.push_str(&format!(", {method} error: {e}"));
                }
            }
        }
        if let Some(w) = expected {
            line.push_str(&format!(", expected {w}"));
            pass &= oracle_degree == Some(w);
        }
        parts.push(line);
    }
    let ss = OctonionField::sum_squares(7).unwrap();
    if let Ok(r) = order_isolated(&ss, &Octonion::ZERO, &Octonion::ZERO, 0.5, &QuadratureSpec::default(), &OrderOptions::default()) {
        notes.push(format!("sum_squares(7) at the uniform n = 8 rule: {} (under-resolved polar peaks)", fmt_result(&r)));
    }
    let mut o = Outcome::new(pass, parts.join("; "));
    o.notes = notes;
    o
}

fn c6_argument() -> Outcome {
    let f = OctonionField::hempfling();
    let spec = QuadratureSpec::default();
    let opts = OrderOptions::default();
    let boundary = sphere(z_star(), 0.5).unwrap();
    let zeros = [ZeroSpec::Isolated { point: z_star(), radius: 0.3 }];
    let free_boundary = sphere(Octonion::ZERO, 0.5).unwrap();
    match (
        argument_principle(&f, &boundary, &zeros, &Octonion::ZERO, &spec, &opts),
        argument_principle(&f, &free_boundary, &[], &Octonion::ZERO, &spec, &opts),
    ) {
        (Ok(rep), Ok(free)) => {
            let pass = rep.discrepancy < INTEGER_TOL
                && rep.lhs.rounded == rep.rhs_rounded
                && free.lhs.rounded == 0
                && free.lhs.residual < INTEGER_TOL;
            Outcome::new(
                pass,
                format!(
                    "boundary sphere(z*, 0.5) = {}, ord(f; z*) = {}, |difference| = {:.3}; zero-free sphere(0, 0.5) = {}",
                    fmt_result(&rep.lhs),
                    fmt_result(&rep.terms[0]),
                    rep.discrepancy,
                    fmt_result(&free.lhs)
                ),
            )
        }
        (a, b) => Outcome::new(false, format!("errors: {:?} / {:?}", a.err(), b.err())),
    }
}

fn c7_rouche() -> Outcome {
    let f = OctonionField::sum_squares(7).unwrap();
    let g = parse_field("sum_squares(7) + 0.01*fueter(1,0,0,0,0,0,0)").unwrap();
    let boundary = sphere(Octonion::ZERO, 1.0).unwrap();
    let spec = QuadratureSpec::anisotropic(SUM_SQUARES_NODES);
    match rouche_check(&f, &g, &boundary, &[], &[], &spec, &OrderOptions::default()) {
        Ok(rep) => {
            let pass = rep.hypothesis_holds && rep.margin > 0.0 && rep.equal;
            let show = |r: &Option<DegreeResult>| r.as_ref().map_or("-".to_string(), fmt_result);
            Outcome::new(
                pass,
                format!(
                    "margin {:.4} (min |f| {:.4}, max |f - g| {:.4}); ord sum f = {}, g = {}",
                    rep.margin,
                    rep.min_f,
                    rep.max_difference,
                    show(&rep.order_f),
                    show(&rep.order_g)
                ),
            )
        }
        Err(e) => Outcome::new(false, format!("error: {e}")),
    }
}

fn c8_variety() -> Outcome {
    let f = OctonionField::circle_variety();
    let core = parse_core("circle;e1,e2;1").unwrap();
    let opts = OrderOptions::default();
    let base = QuadratureSpec::anisotropic(CIRCLE_NODES);
    let runs = [(0.2, base), (0.1, base), (0.2, base.refined()), (0.1, base.refined())];
    let mut results = Vec::new();
    for (eps, spec) in runs {
        match order_variety(&f, &core, eps, &spec, &opts) {
            Ok(r) => results.push((eps, r)),
            Err(e) => return Outcome::new(false, format!("eps {eps}: {e}")),
        }
    }
    let first = results[0].1.rounded;
    let pass = results.iter().all(|(_, r)| r.rounded == first && r.residual < INTEGER_TOL);
    let mut o = Outcome::new(
        pass,
        results
            .iter()
            .map(|(eps, r)| format!("eps {eps} / {} nodes: {}", r.node_count, fmt_result(r)))
            .collect::<Vec<_>>()
            .join("; "),
    );
    for eps in [0.2, 0.1] {
        if let Ok(r) = order_variety(&f, &core, eps, &QuadratureSpec::default(), &opts) {
            o.notes.push(format!("uniform n = 8 rule at eps {eps}: {}", fmt_result(&r)));
        }
    }
    o
}

fn c9_hurwitz() -> Outcome {
    let ball = Ball { center: Octonion::ZERO, radius: 0.5 };
    let spec = QuadratureSpec::default();
    let opts = OrderOptions::default();
    let zero = hurwitz_check(&HurwitzFamily::ConstantInverse, 20, &ball, 5, &spec, &opts);
    let shift = hurwitz_check(&HurwitzFamily::ConstantShift, 20, &ball, 5, &spec, &opts);
    match (zero, shift) {
        (Ok(z), Ok(s)) => {
            let zero_ok = matches!(z.verdict, HurwitzVerdict::IdenticallyZero { .. });
            let shift_ok = matches!(&s.verdict, HurwitzVerdict::OrderSum { order } if order.rounded == 0 && order.residual < INTEGER_TOL);
            Outcome::new(
                zero_ok && shift_ok,
                format!("1/n -> {:?}; 1 + 1/n -> {:?}", z.verdict, s.verdict),
            )
        }
        (a, b) => Outcome::new(false, format!("errors: {:?} / {:?}", a.err(), b.err())),
    }
}

fn strip_runtime(json: &str) -> String {
    match serde_json::from_str::<serde_json::Value>(json) {
        Ok(mut v) => {
            if let Some(m) = v.as_object_mut() {
                m.remove("runtime_ms");
            }
            v.to_string()
        }
        Err(_) => json.to_string(),
    }
}

fn c10_determinism() -> Outcome {
    let commands: Vec<Vec<&str>> = vec![
        vec!["table"],
        vec!["check-cr", "--field", "hempfling", "--points", "50", "--seed", "3"],
        vec!["winding", "--surface", "sphere(0,0,0,0,0,0,0,0;1)", "--point", "0.3*e2", "--nodes", "5"],
        vec!["winding", "--surface", "sphere(0;1)", "--point", "0", "--rule", "mc", "--samples", "20000", "--seed", "9"],
        vec!["order", "--field", "hempfling", "--center", "1,1,1,1,1,1,1,1", "--radius", "0.3", "--method", "image", "--nodes", "4"],
        vec!["tube-order", "--field", "circle_variety", "--core", "circle;e1,e2;1", "--eps", "0.2", "--nodes", "3,12,12,3,3,3,3"],
        vec!["argument", "--field", "hempfling", "--boundary", "sphere(1,1,1,1,1,1,1,1;0.5)", "--zeros", "isolated(1,1,1,1,1,1,1,1;0.3)", "--nodes", "4"],
        vec!["rouche", "--field", "sum_squares(7)", "--perturbed", "sum_squares(7) + 0.01*fueter(1,0,0,0,0,0,0)", "--boundary", "sphere(0;1)", "--nodes", "4"],
        vec!["hurwitz", "--family", "constant_shift", "--region", "sphere(0;0.5)", "--nodes", "4"],
        vec!["oracle", "--field", "sum_squares(7)", "--center", "0", "--radius", "0.5", "--starts", "64", "--seed", "5"],
    ];
    let mut differing = Vec::new();
    for args in &commands {
        let argv = || std::iter::once("octodeg").chain(args.iter().copied());
        let (c1, o1) = cli::run(argv());
        let (c2, o2) = cli::run(argv());
        if c1 != c2 || strip_runtime(&o1) != strip_runtime(&o2) || c1 >= 2 {
            differing.push(format!("{} (exit {c1}/{c2})", args[0]));
        }
    }
    Outcome::new(
        differing.is_empty(),
        format!(
            "{} commands run twice; differing or failing: {}",
            commands.len(),
            if differing.is_empty() { "none".to_string() } else { differing.join(", ") }
        ),
    )
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, fn() -> Outcome, Option<Duration>);
    let criteria: [Criterion; 10] = [
        (1, "algebra suite", c1_algebra, Some(Duration::from_secs(5))),
        (2, "Cauchy-Riemann fixtures", c2_cr_fixtures, Some(Duration::from_secs(10))),
        (3, "Hempfling Jacobian determinant", c3_jacobian, None),
        (4, "winding integers at n = 8", c4_winding, None),
        (5, "order / oracle equivalence", c5_order_oracle, Some(Duration::from_secs(300))),
        (6, "argument principle", c6_argument, Some(Duration::from_secs(120))),
        (7, "Rouche", c7_rouche, Some(Duration::from_secs(180))),
        (8, "non-isolated order", c8_variety, Some(Duration::from_secs(300))),
        (9, "Hurwitz harness", c9_hurwitz, Some(Duration::from_secs(60))),
        (10, "CLI determinism", c10_determinism, None),
    ];
    println!("acceptance suite ({} rayon threads)", rayon::current_num_threads());
    let mut failed = Vec::new();
    for (id, title, run, limit) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                outcome.pass = false;
                outcome.notes.push(format!("runtime {:.1} s exceeds {} s", elapsed.as_secs_f64(), limit.as_secs()));
            }
        }
        println!(
            "[{}] criterion {id:>2}: {title} ({:.1} s): {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            outcome.detail
        );
        for n in &outcome.notes {
            println!("       note: {n}");
        }
        if !outcome.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} of 10 criteria passed; failed: {:?}", 10 - failed.len(), failed);
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
