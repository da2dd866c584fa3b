//! Acceptance suite. Runs with a plain `main` so that every criterion prints
//! exactly one PASS/FAIL line regardless of output capturing; the process
//! exits non-zero if any criterion fails.

use hscone::catalog::{
    clifford_torus, great_sphere, great_sphere_rotated, iriyeh_torus, non_isotropic_fixture, planted_zero_fixture,
    s3_torus, HomogeneousTorus,
};
use hscone::config::{Config, DEFAULT_SEED};
use hscone::family::HomogeneousTorusParams;
use hscone::hodge::{
    angle_gradient_check, d_alpha_residual, delta_alpha, theta_field, theta_harmonicity, theta_range,
    DEFAULT_PERIOD_NODES,
};
use hscone::hopf::{
    cauchy_riemann_residual, find_legendrian_points, hopf_function, poincare_hopf_audit, winding_number,
    LegendrianScan, DEFAULT_WINDING_SAMPLES,
};
use hscone::immersion::{jet_cross_validation, Domain, Grid, Immersion, SphereChart};
use hscone::isotropy::{isotropy_residual, scan_link};
use hscone::pipeline::run_analysis;
use hscone::report::without_timings;
use hscone::search::{run_trials, RelaxedParams, SearchOptions, Target};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

const RES: [usize; 2] = [128, 128];
const TIME_BUDGET_SECS: f64 = 10.0;
/// Tori whose `Ju` is entirely tangent have `f = 1` exactly, which rounds to
/// a few ulps either side.
const F_ROUNDING: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Folds a list of named sub-checks into one outcome.
fn all(parts: Vec<(bool, String)>) -> Outcome {
    let ok = parts.iter().all(|p| p.0);
    let detail = parts
        .into_iter()
        .map(|(pass, d)| if pass { d } else { format!("FAILED {d}") })
        .collect::<Vec<_>>()
        .join("; ");
    check(ok, detail)
}

fn sphere_charts() -> Vec<Box<dyn Immersion>> {
    vec![
        Box::new(great_sphere(SphereChart::LatLong)),
        Box::new(great_sphere_rotated(SphereChart::LatLong)),
    ]
}

fn catalog() -> Vec<Box<dyn Immersion>> {
    let mut v = sphere_charts();
    v.push(Box::new(clifford_torus()));
    v.push(Box::new(s3_torus()));
    v.push(Box::new(iriyeh_torus().with_name("iriyeh_type_torus")));
    v
}

fn grid_points(imm: &dyn Immersion, res: &[usize]) -> Vec<Vec<f64>> {
    Grid::new(imm.domain(), res).points
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

fn catalog_identity_suite() -> Outcome {
    let mut parts = Vec::new();
    for imm in catalog() {
        let samples = scan_link(imm.as_ref(), &Grid::new(imm.domain(), &RES)).map_err(|e| e.to_string())?;
        let iso = max_of(samples.iter().map(|s| s.isotropy));
        let s1 = max_of(samples.iter().map(|s| s.s1.abs()));
        let s2 = max_of(samples.iter().map(|s| s.s2.abs()));
        let div = max_of(samples.iter().map(|s| s.div_ju.abs()));
        parts.push((
            iso <= 1e-12 && s1 <= 1e-10 && s2 <= 1e-10 && div <= 1e-10,
            format!("{}: iso {iso:.1e} S1 {s1:.1e} S2 {s2:.1e} div {div:.1e}", imm.name()),
        ));
    }
    all(parts)
}

fn random_torus_params(rng: &mut ChaCha8Rng) -> HomogeneousTorusParams {
    loop {
        let q = hscone::search::random_simplex_point(rng);
        let a = [0; 3].map(|_: i64| rng.gen_range(-3..=3));
        let b = [0; 3].map(|_: i64| rng.gen_range(-3..=3));
        let p = HomogeneousTorusParams { q, a, b };
        if p.validate().is_ok() {
            return p;
        }
    }
}

fn deviation_values() -> Outcome {
    let mut parts = Vec::new();
    for imm in catalog() {
        let samples = scan_link(imm.as_ref(), &Grid::new(imm.domain(), &RES)).map_err(|e| e.to_string())?;
        let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.f), hi.max(s.f)));
        let expected = match imm.name() {
            "s3_torus" => Some(1.0),
            "iriyeh_type_torus" => None,
            _ => Some(0.0),
        };
        if let Some(e) = expected {
            let err = (lo - e).abs().max((hi - e).abs());
            parts.push((err <= 1e-12, format!("{}: |f - {e}| {err:.1e}", imm.name())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut violations = 0;
    for _ in 0..100 {
        let torus = HomogeneousTorus::from_params(&random_torus_params(&mut rng)).map_err(|e| e.to_string())?;
        let samples = scan_link(&torus, &Grid::new(torus.domain(), &[16, 16])).map_err(|e| e.to_string())?;
        violations += samples.iter().filter(|s| !(-F_ROUNDING..=1.0 + F_ROUNDING).contains(&s.f)).count();
    }
    parts.push((violations == 0, format!("100 random tori: {violations} samples outside [0, 1] ± {F_ROUNDING:e}")));
    all(parts)
}

fn minimality() -> Outcome {
    let mut parts = Vec::new();
    for imm in catalog() {
        let samples = scan_link(imm.as_ref(), &Grid::new(imm.domain(), &RES)).map_err(|e| e.to_string())?;
        match imm.name() {
            "iriyeh_type_torus" => {
                let err = max_of(samples.iter().map(|s| (s.hbar_norm * s.hbar_norm - 2.0).abs()));
                parts.push((err <= 1e-10, format!("{}: ||Hbar|^2 - 2| {err:.1e}", imm.name())));
            }
            "s3_torus" => {}
            _ => {
                let h = max_of(samples.iter().map(|s| s.hbar_norm));
                parts.push((h <= 1e-10, format!("{}: |Hbar| {h:.1e}", imm.name())));
            }
        }
    }
    all(parts)
}

fn hopf_analysis() -> Outcome {
    let torus = s3_torus();
    let expected = Complex64::new(0.25, -0.25);
    let mut w_err = 0.0_f64;
    let mut cr = 0.0_f64;
    for t in grid_points(&torus, &RES) {
        let jet = torus.jet(&t, 2).map_err(|e| e.to_string())?;
        w_err = w_err.max((hopf_function(&jet) - expected).norm());
        cr = cr.max(cauchy_riemann_residual(&torus, &t, 1e-10).map_err(|e| e.to_string())?.residual);
    }
    let scan = find_legendrian_points(&torus, &RES, 1e-10).map_err(|e| e.to_string())?;
    let empty = matches!(&scan, LegendrianScan::Points(p) if p.is_empty());
    let audit = poincare_hopf_audit(&scan, torus.genus().unwrap_or(1));
    all(vec![
        (w_err <= 1e-12, format!("|w - (1-i)/4| {w_err:.1e}")),
        (cr <= 1e-10, format!("CR {cr:.1e}")),
        (empty, "scan returns no points".into()),
        (audit.pass && audit.genus == 1, audit.summary()),
    ])
}

fn index_machinery() -> Outcome {
    let mut parts = Vec::new();
    for k in 1..=5 {
        let field = |conj: bool| {
            move |x: f64, y: f64| {
                let z = Complex64::new(x, y).powi(k);
                Ok(if conj { (z.re, -z.im) } else { (z.re, z.im) })
            }
        };
        let direct = winding_number(field(false), [0.0, 0.0], 0.5, DEFAULT_WINDING_SAMPLES).map_err(|e| e.to_string())?;
        let conj = winding_number(field(true), [0.0, 0.0], 0.5, DEFAULT_WINDING_SAMPLES).map_err(|e| e.to_string())?;
        parts.push((direct == k && conj == -k, format!("z^{k}: {direct}/{conj}")));
    }
    let centre = [0.1234, -0.2345];
    let fx = planted_zero_fixture(centre);
    let scan = find_legendrian_points(&fx, &[64, 64], 1e-10).map_err(|e| e.to_string())?;
    match scan.points() {
        [p] => {
            let dist = ((p.t[0] - centre[0]).powi(2) + (p.t[1] - centre[1]).powi(2)).sqrt();
            parts.push((
                p.multiplicity == 1 && p.index_prju == -1 && p.refined && dist <= 1e-10,
                format!("fixture: k {} index {} offset {dist:.1e}", p.multiplicity, p.index_prju),
            ));
        }
        other => parts.push((false, format!("fixture: {} points found", other.len()))),
    }
    all(parts)
}

fn hodge_identities() -> Outcome {
    let mut parts = Vec::new();
    let mut imms = catalog();
    imms.push(Box::new(non_isotropic_fixture()));
    for imm in &imms {
        let hs = imm.name() != "non_isotropic_fixture";
        let (mut closed, mut diff, mut size) = (0.0_f64, 0.0_f64, 0.0_f64);
        for t in grid_points(imm.as_ref(), &[32, 32]) {
            let lhs = d_alpha_residual(imm.as_ref(), &t).map_err(|e| e.to_string())?;
            let rhs = 2.0 * isotropy_residual(&imm.jet(&t, 1).map_err(|e| e.to_string())?);
            closed = closed.max((lhs - rhs).abs());
            if hs {
                let d = delta_alpha(imm.as_ref(), &t).map_err(|e| e.to_string())?;
                diff = diff.max(d.difference);
                size = size.max(d.coordinate.abs()).max(d.closed_form.abs());
            }
        }
        let mut ok = closed <= 1e-12;
        let mut detail = format!("{}: |d alpha - 2 iso| {closed:.1e}", imm.name());
        if hs {
            ok &= diff <= 1e-10 && size <= 1e-10;
            detail += &format!(", routes differ {diff:.1e}, |delta alpha| {size:.1e}");
        }
        parts.push((ok, detail));
    }
    all(parts)
}

fn lagrangian_angle_chain() -> Outcome {
    let clifford = clifford_torus();
    let theta = theta_field(&clifford, &RES, 1e-10).map_err(|e| e.to_string())?;
    let range = theta_range(&theta);
    let harm = theta_harmonicity(&clifford, &RES, DEFAULT_PERIOD_NODES).map_err(|e| e.to_string())?;
    let periods = max_of(harm.periods.iter().map(|p| p.abs()));
    let samples = scan_link(&clifford, &Grid::new(clifford.domain(), &RES)).map_err(|e| e.to_string())?;
    let hbar = max_of(samples.iter().map(|s| s.hbar_norm));

    let iriyeh = iriyeh_torus();
    let iharm = theta_harmonicity(&iriyeh, &RES, DEFAULT_PERIOD_NODES).map_err(|e| e.to_string())?;
    let period_err = max_of(iharm.periods.iter().map(|p| (p.abs() - 2.0 * PI).abs()));
    let n_generators = match iriyeh.domain() {
        Domain::Torus { generators } => generators.len(),
        _ => 0,
    };
    all(vec![
        (range <= 1e-8, format!("clifford: theta range {range:.1e}")),
        (harm.periods.len() == 2 && periods <= 1e-10, format!("periods {periods:.1e}")),
        (harm.residual <= 1e-10, format!("harmonicity {:.1e}", harm.residual)),
        (hbar <= 1e-10, format!("|Hbar| {hbar:.1e}")),
        (
            iharm.residual <= 1e-10 && iharm.periods.len() == n_generators && period_err <= 1e-8,
            format!(
                "iriyeh-type: harmonicity {:.1e}, periods {:?} (||p| - 2 pi| {period_err:.1e})",
                iharm.residual, iharm.periods
            ),
        ),
    ])
}

fn angle_gradient() -> Outcome {
    let mut legendrian: Vec<Box<dyn Immersion>> = sphere_charts();
    legendrian.push(Box::new(clifford_torus()));
    legendrian.push(Box::new(iriyeh_torus().with_name("iriyeh_type_torus")));
    let mut parts = Vec::new();
    for imm in &legendrian {
        let err = angle_gradient_check(imm.as_ref(), &[32, 32], 1e-10).map_err(|e| e.to_string())?;
        parts.push((err <= 1e-6, format!("{}: {err:.1e}", imm.name())));
    }
    all(parts)
}

fn search_statistics() -> Outcome {
    let weights: RelaxedParams = (&HomogeneousTorusParams::clifford()).into();
    let opts = SearchOptions::default();
    let results =
        run_trials(&weights, &[Target::Legendrian, Target::Minimal], 100, DEFAULT_SEED, &opts).map_err(|e| e.to_string())?;
    let good = results
        .iter()
        .filter(|r| {
            let q_err = r.best.q.iter().map(|q| (q - 1.0 / 3.0).abs()).fold(0.0, f64::max);
            r.converged && r.residual < 1e-8 && r.iterations <= 1000 && q_err <= 1e-6
        })
        .count();
    let max_iter = results.iter().map(|r| r.iterations).max().unwrap_or(0);
    check(good >= 90, format!("{good}/100 trials reached q = (1/3, 1/3, 1/3); max iterations {max_iter}"))
}

fn cross_validation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut parts = Vec::new();
    for imm in catalog() {
        let mut worst = 0.0_f64;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..imm.dim()).map(|_| rng.gen::<f64>()).collect();
            let t = imm.domain().sample_at(&x, 0.02);
            worst = worst.max(jet_cross_validation(imm.as_ref(), &t, 1e-5).map_err(|e| e.to_string())?);
        }
        parts.push((worst <= 1e-6, format!("{}: {worst:.1e}", imm.name())));
    }
    all(parts)
}

fn determinism() -> Outcome {
    let text = "[immersion]\nname = \"clifford_torus\"\n[grid]\nresolution = 64\n[search]\ntrials = 16\n";
    let cfg = Config::from_toml_str(text).map_err(|e| e.to_string())?;
    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let mut reports = Vec::new();
    for d in &dirs {
        run_analysis(&cfg, d.path()).map_err(|e| e.to_string())?;
        let json = std::fs::read_to_string(d.path().join("report.json")).map_err(|e| e.to_string())?;
        reports.push(without_timings(&json).map_err(|e| e.to_string())?);
    }
    let mut same_csv = true;
    for entry in std::fs::read_dir(dirs[0].path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        if name.to_string_lossy().ends_with(".csv") {
            same_csv &= std::fs::read(dirs[0].path().join(&name)).ok() == std::fs::read(dirs[1].path().join(&name)).ok();
        }
    }
    let a = serde_json::to_string(&reports[0]).map_err(|e| e.to_string())?;
    let b = serde_json::to_string(&reports[1]).map_err(|e| e.to_string())?;
    all(vec![
        (a == b, format!("report.json identical without timings ({} bytes)", a.len())),
        (same_csv, "CSV files identical".into()),
    ])
}

fn main() {
    // `cargo test` forwards filter arguments and flags such as `--list`; this
    // suite always runs in full.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [Criterion; 11] = [
        ("catalog identity suite", catalog_identity_suite),
        ("deviation values", deviation_values),
        ("minimality", minimality),
        ("hopf analysis", hopf_analysis),
        ("index machinery", index_machinery),
        ("hodge identities", hodge_identities),
        ("lagrangian angle chain", lagrangian_angle_chain),
        ("angle gradient", angle_gradient),
        ("search statistics", search_statistics),
        ("cross-validation", cross_validation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(d) => (secs <= TIME_BUDGET_SECS, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name} ({secs:.2}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
