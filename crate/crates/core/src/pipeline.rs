//! Config-driven batch run: analyses in dependency order, one JSON report,
//! CSV dumps, and an exit status (0 all audits pass, 1 an audit failed,
//! 2 configuration error, 3 numerical failure).

use crate::catalog::CatalogImmersion;
use crate::config::{Analysis, Config};
use crate::error::{HsError, Result};
use crate::family::classify_family_member;
use crate::flags::GatedFlag;
use crate::hodge::{angle_gradient_check, beta_periods, d_alpha_residual, delta_alpha, theta_field, theta_harmonicity, theta_range, DEFAULT_PERIOD_NODES};
use crate::hopf::{find_legendrian_points, hopf_sample, isothermal_check, poincare_hopf_audit, HopfSample};
use crate::immersion::{Domain, Grid, Immersion};
use crate::isotropy::{isotropy_residual, scan_link, LinkSample};
use crate::report::{
    fmt_float, theta_rows, trace_rows, write_csv, AngleSection, AuditEntry, Gated, HodgeSection, HopfSection,
    ImmersionMeta, InvariantsSection, Report, SearchSection, StationaritySection, TrialSummary, SCHEMA_VERSION,
};
use crate::search::{run_trials, search_legendrian_hs, snap_to_integers, RelaxedParams};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_AUDIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// `dα = 2·isotropy` is an exact identity; only rounding separates the two.
pub const CLOSEDNESS_IDENTITY_TOL: f64 = 1e-12;
/// Holomorphy of the Hopf function once every hypothesis holds.
pub const CR_AUDIT_TOL: f64 = 1e-8;
/// Period integrals must not move when the quadrature is refined.
pub const PERIOD_STABILITY_TOL: f64 = 1e-8;

pub fn exit_code_for(err: &HsError) -> i32 {
    match err {
        HsError::Config(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

pub fn exit_code_for_report(report: &Report) -> i32 {
    if report.all_audits_pass() {
        EXIT_OK
    } else {
        EXIT_AUDIT_FAILED
    }
}

struct CsvFile {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

struct Run {
    audits: Vec<AuditEntry>,
    csv: Vec<CsvFile>,
    timings: BTreeMap<&'static str, f64>,
}

impl Run {
    fn audit(&mut self, name: &str, pass: bool, detail: String) {
        self.audits.push(AuditEntry {
            name: name.to_string(),
            pass,
            detail,
        });
    }

    fn timed<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(stage, start.elapsed().as_secs_f64());
        out
    }
}

fn domain_label(d: &Domain) -> String {
    match d {
        Domain::Torus { generators } => format!("torus, generators {generators:?}"),
        Domain::Sphere(chart) => format!("sphere chart {chart:?}"),
        Domain::Patch { lo, hi } => format!("patch {lo:?}..{hi:?}"),
    }
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

fn min_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::INFINITY, f64::min)
}

fn invariants_from(samples: &[LinkSample]) -> InvariantsSection {
    let it = || samples.iter();
    InvariantsSection {
        samples: samples.len(),
        max_isotropy: max_of(it().map(|s| s.isotropy)),
        min_f: min_of(it().map(|s| s.f)),
        max_f: max_of(it().map(|s| s.f)),
        max_hbar_norm: max_of(it().map(|s| s.hbar_norm)),
        min_hbar_norm2: min_of(it().map(|s| s.hbar_norm * s.hbar_norm)),
        max_hbar_norm2: max_of(it().map(|s| s.hbar_norm * s.hbar_norm)),
        max_hbar_dot_u: max_of(it().map(|s| s.hbar_dot_u)),
        max_jh_dot_h: max_of(it().map(|s| s.jh_dot_h)),
        max_trace_a_defect: max_of(it().map(|s| s.trace_a_defect)),
        max_unit_defect: max_of(it().map(|s| s.unit_defect)),
        max_tangency_defect: max_of(it().map(|s| s.tangency_defect)),
        max_div_ju: max_of(it().map(|s| s.div_ju.abs())),
    }
}

/// Runs the configured analyses and writes the report and CSV files into
/// `out_dir`. The exit status follows from [`exit_code_for_report`].
pub fn run_analysis(cfg: &Config, out_dir: &Path) -> Result<Report> {
    let imm_owned = cfg.build_immersion()?;
    let imm = imm_owned.as_dyn();
    let audit_charts = imm_owned.audit_charts();
    let res = cfg.grid.clone();
    if imm.dim() != res.len() {
        return Err(HsError::Config(format!(
            "grid has {} axes but `{}` has {} parameters",
            res.len(),
            imm.name(),
            imm.dim()
        )));
    }
    let identity_tol = cfg.tol("identity");
    let mut run = Run {
        audits: Vec::new(),
        csv: Vec::new(),
        timings: BTreeMap::new(),
    };
    let mut skipped = Vec::new();
    let mut flags = BTreeMap::new();

    let needs_samples = [Analysis::Invariants, Analysis::Stationarity, Analysis::Hopf, Analysis::Hodge]
        .iter()
        .any(|a| cfg.wants(*a));

    let (mut invariants, mut stationarity) = (None, None);
    let mut link_samples: Vec<LinkSample> = Vec::new();
    if needs_samples {
        let grid = Grid::new(imm.domain(), &res);
        link_samples = run.timed("invariants", || scan_link(imm, &grid))?;
        let mut all = link_samples.clone();
        for chart in &audit_charts {
            let c = chart.as_dyn();
            all.extend(scan_link(c, &Grid::new(c.domain(), &res))?);
        }
        let inv = invariants_from(&all);
        let max_s1 = max_of(all.iter().map(|s| s.s1.abs()));
        let max_s2 = max_of(all.iter().map(|s| s.s2.abs()));
        let exact_s1 = imm.max_order() >= 3;
        let hs_tol = if exact_s1 { identity_tol } else { cfg.tol("finite_difference") };
        flags.insert("isotropic", GatedFlag::new(inv.max_isotropy, identity_tol));
        flags.insert("legendrian", GatedFlag::new(inv.max_f.sqrt(), cfg.tol("legendrian")));
        flags.insert("hs_cone", GatedFlag::new(max_s1.max(max_s2), hs_tol));
        flags.insert("minimal", GatedFlag::new(inv.max_hbar_norm, identity_tol));

        if cfg.wants(Analysis::Invariants) {
            run.audit(
                "unit_sphere",
                inv.max_unit_defect <= identity_tol,
                format!("max ||u| - 1| = {:e}", inv.max_unit_defect),
            );
            run.audit(
                "tangent_to_sphere",
                inv.max_tangency_defect <= identity_tol,
                format!("max |<u_i, u>| = {:e}", inv.max_tangency_defect),
            );
            run.audit(
                "div_ju_vanishes",
                inv.max_div_ju <= identity_tol,
                format!("max |div(Ju)| = {:e}", inv.max_div_ju),
            );
            run.audit(
                "jh_orthogonal_to_h",
                inv.max_jh_dot_h <= identity_tol,
                format!("max |<JH, H>| = {:e}", inv.max_jh_dot_h),
            );
            run.audit(
                "trace_second_fundamental_form",
                inv.max_trace_a_defect <= identity_tol * (1.0 + inv.max_hbar_norm),
                format!("max |tr A - Hbar| = {:e}", inv.max_trace_a_defect),
            );
            run.audit(
                "deviation_in_unit_interval",
                inv.min_f >= 0.0 && inv.max_f <= 1.0 + identity_tol,
                format!("f in [{:e}, {:e}]", inv.min_f, inv.max_f),
            );
            invariants = Some(inv);
        }
        if cfg.wants(Analysis::Stationarity) {
            stationarity = Some(StationaritySection {
                max_abs_s1: max_s1,
                max_abs_s2: max_s2,
                s1_source: if exact_s1 { "exact" } else { "finite_difference" },
            });
        }
        if cfg.formats.csv && (cfg.wants(Analysis::Invariants) || cfg.wants(Analysis::Stationarity)) {
            run.csv.push(CsvFile {
                name: "fields.csv",
                header: vec!["t1", "t2", "f", "alpha1", "alpha2", "isotropy", "s1", "s2", "hbar_norm", "div_ju"],
                rows: link_samples
                    .iter()
                    .map(|s| {
                        let mut row: Vec<String> = s.t.iter().map(|x| fmt_float(*x)).collect();
                        row.push(fmt_float(s.f));
                        row.extend(s.alpha.iter().map(|x| fmt_float(*x)));
                        row.extend([s.isotropy, s.s1, s.s2, s.hbar_norm, s.div_ju].map(fmt_float));
                        row
                    })
                    .collect(),
            });
        }
    }
    let isotropic = flags.get("isotropic").is_some_and(|f| f.value.is_true());
    let legendrian = flags.get("legendrian").is_some_and(|f| f.value.is_true());
    let max_abs_s2 = max_of(link_samples.iter().map(|s| s.s2.abs()));

    let hopf = if cfg.wants(Analysis::Hopf) {
        Some(run.timed("hopf", || hopf_stage(imm, &res, cfg, isotropic, max_abs_s2))?)
    } else {
        None
    };
    if let Some((section, samples)) = &hopf {
        if let Some(cr) = section.max_cr_residual.value() {
            run.audit(
                "cauchy_riemann",
                *cr <= CR_AUDIT_TOL,
                format!("max |dw/dzbar| = {cr:e}"),
            );
        }
        if let Some(a) = section.audit.value() {
            run.audit("poincare_hopf", a.pass, a.summary());
        }
        if cfg.formats.csv {
            run.csv.push(CsvFile {
                name: "hopf.csv",
                header: vec!["t1", "t2", "w_re", "w_im", "cr_residual"],
                rows: samples
                    .iter()
                    .map(|s| {
                        let mut row: Vec<String> = s.t.iter().map(|x| fmt_float(*x)).collect();
                        row.extend([s.w[0], s.w[1], s.cr_residual].map(fmt_float));
                        row
                    })
                    .collect(),
            });
            if let Some(scan) = section.legendrian_points.value() {
                run.csv.push(CsvFile {
                    name: "legendrian_points.csv",
                    header: vec!["t1", "t2", "multiplicity", "index", "residual", "refined"],
                    rows: scan
                        .points()
                        .iter()
                        .map(|p| {
                            vec![
                                fmt_float(p.t[0]),
                                fmt_float(p.t[1]),
                                p.multiplicity.to_string(),
                                p.index_prju.to_string(),
                                fmt_float(p.residual_at_zero),
                                p.refined.to_string(),
                            ]
                        })
                        .collect(),
                });
            }
        }
    }
    let hopf = hopf.map(|(section, _)| section);

    let hodge = if cfg.wants(Analysis::Hodge) {
        let start = Instant::now();
        let (section, theta) = hodge_stage(imm, &res, cfg, legendrian)?;
        run.timings.insert("hodge", start.elapsed().as_secs_f64());
        run.audit(
            "closedness_identity",
            section.max_d_alpha_identity_defect <= CLOSEDNESS_IDENTITY_TOL,
            format!("max |d_alpha - 2 isotropy| = {:e}", section.max_d_alpha_identity_defect),
        );
        run.audit(
            "codifferential_routes",
            section.max_delta_alpha_difference <= identity_tol,
            format!("max |delta_a - delta_b| = {:e}", section.max_delta_alpha_difference),
        );
        if let Some(angle) = section.angle.value() {
            let tol = cfg.tol("finite_difference");
            run.audit(
                "angle_gradient",
                angle.gradient_check <= tol,
                format!("max |d theta - beta| = {:e}", angle.gradient_check),
            );
        }
        let refined = beta_periods(imm, 2 * DEFAULT_PERIOD_NODES)?;
        let drift = max_of(section.harmonicity.periods.iter().zip(&refined).map(|(a, b)| (a - b).abs()));
        run.audit(
            "period_quadrature_stable",
            drift <= PERIOD_STABILITY_TOL,
            format!("period change on doubling nodes = {drift:e}"),
        );
        if cfg.formats.csv {
            run.csv.push(CsvFile {
                name: "periods.csv",
                header: vec!["generator", "period"],
                rows: section
                    .harmonicity
                    .periods
                    .iter()
                    .enumerate()
                    .map(|(k, p)| vec![k.to_string(), fmt_float(*p)])
                    .collect(),
            });
            if let Some(theta) = &theta {
                run.csv.push(CsvFile {
                    name: "theta.csv",
                    header: vec!["t1", "t2", "theta", "branch", "theta_unwrapped"],
                    rows: theta_rows(theta).collect(),
                });
            }
        }
        Some(section)
    } else {
        None
    };

    let classification = if cfg.wants(Analysis::Classify) {
        match imm_owned.torus_params() {
            Some(p) => {
                let c = run.timed("classify", || classify_family_member(p))?;
                run.audit(
                    "classification_cross_check",
                    c.cross_check.consistent,
                    format!(
                        "closed forms vs grid: f {:e}, |Hbar|^2 {:e}",
                        c.cross_check.max_f_diff, c.cross_check.max_hbar_norm2_diff
                    ),
                );
                Some(c)
            }
            None => {
                skipped.push("classify: not a homogeneous torus".to_string());
                None
            }
        }
    } else {
        None
    };

    let search = if cfg.wants(Analysis::Search) {
        match search_weights(cfg, &imm_owned) {
            Some(weights) => {
                let start = Instant::now();
                let (section, traces) = search_stage(cfg, &weights)?;
                run.timings.insert("search", start.elapsed().as_secs_f64());
                // non-convergence is a reported outcome, not a failed audit
                flags.insert("search_converged", GatedFlag::new(section.best_residual, cfg.tol("search")));
                if cfg.formats.csv {
                    run.csv.push(CsvFile {
                        name: "search_trace.csv",
                        header: vec!["trial", "iteration", "residual", "damping"],
                        rows: trace_rows(&traces).collect(),
                    });
                }
                Some(section)
            }
            None => {
                skipped.push("search: no torus weights".to_string());
                None
            }
        }
    } else {
        None
    };

    let mut files: Vec<String> = run.csv.iter().map(|c| c.name.to_string()).collect();
    if cfg.formats.json {
        files.push("report.json".to_string());
    }
    files.sort();

    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        immersion: ImmersionMeta {
            name: imm.name().to_string(),
            complex_dim: imm.complex_dim(),
            link_dim: imm.dim(),
            genus: imm.genus(),
            domain: domain_label(imm.domain()),
            params: cfg.params.clone(),
            audit_charts: audit_charts.iter().map(|c| c.as_dyn().name().to_string()).collect(),
        },
        grid: res,
        tolerances: cfg.tolerances.clone(),
        analyses: cfg.analyses.iter().map(|a| a.name()).collect(),
        flags,
        invariants,
        stationarity,
        hopf,
        hodge,
        classification,
        search,
        skipped,
        audits: run.audits,
        files,
        timings: run.timings,
    };

    std::fs::create_dir_all(out_dir).map_err(|e| HsError::Io(format!("{}: {e}", out_dir.display())))?;
    for file in &run.csv {
        write_csv(&out_dir.join(file.name), &file.header, file.rows.iter().cloned())?;
    }
    if cfg.formats.json {
        std::fs::write(out_dir.join("report.json"), report.to_json())?;
    }
    Ok(report)
}

type HopfOutput = (HopfSection, Vec<HopfSample>);

fn hopf_stage(imm: &dyn Immersion, res: &[usize], cfg: &Config, isotropic: bool, max_abs_s2: f64) -> Result<HopfOutput> {
    if imm.dim() != 2 {
        return Err(HsError::Config("hopf analysis needs a surface link".into()));
    }
    let iso = isothermal_check(imm, res)?;
    let grid = Grid::new(imm.domain(), res);
    let samples: Vec<HopfSample> = grid.points.par_iter().map(|t| hopf_sample(imm, t)).collect::<Result<_>>()?;
    let abs_w = || samples.iter().map(|s| s.w[0].hypot(s.w[1]));

    let identity_tol = cfg.tol("identity");
    let max_cr_residual = if iso.max_defect > cfg.tol("isothermal") {
        Gated::blocked("not isothermal")
    } else if !isotropic {
        Gated::blocked("not isotropic")
    } else if max_abs_s2 > identity_tol {
        Gated::blocked("S2 does not vanish")
    } else {
        Gated::Value(max_of(samples.iter().map(|s| s.cr_residual)))
    };

    let (legendrian_points, audit) = if isotropic {
        let scan = find_legendrian_points(imm, res, cfg.tol("legendrian"))?;
        let audit = match imm.genus() {
            Some(g) => Gated::Value(poincare_hopf_audit(&scan, g)),
            None => Gated::blocked("genus unknown"),
        };
        (Gated::Value(scan), audit)
    } else {
        (Gated::blocked("not isotropic"), Gated::blocked("not isotropic"))
    };

    Ok((
        HopfSection {
            isothermal: iso,
            max_abs_w: max_of(abs_w()),
            min_abs_w: min_of(abs_w()),
            max_cr_residual,
            legendrian_points,
            audit,
        },
        samples,
    ))
}

fn hodge_stage(
    imm: &dyn Immersion,
    res: &[usize],
    cfg: &Config,
    legendrian: bool,
) -> Result<(HodgeSection, Option<Vec<crate::hodge::AngleSample>>)> {
    let grid = Grid::new(imm.domain(), res);
    let pointwise: Vec<(f64, f64, crate::hodge::DeltaAlpha)> = grid
        .points
        .par_iter()
        .map(|t| {
            let d = d_alpha_residual(imm, t)?;
            let iso = isotropy_residual(&imm.jet(t, 1)?);
            Ok((d, (d - 2.0 * iso).abs(), delta_alpha(imm, t)?))
        })
        .collect::<Result<_>>()?;
    let harmonicity = theta_harmonicity(imm, res, DEFAULT_PERIOD_NODES)?;

    let lagrangian_dim = imm.dim() + 1 == imm.complex_dim();
    let (angle, theta) = if !lagrangian_dim {
        (Gated::blocked("link is not of Legendrian dimension n - 1"), None)
    } else if !legendrian {
        (Gated::blocked("not legendrian"), None)
    } else {
        let tol = cfg.tol("legendrian");
        let field = theta_field(imm, res, tol)?;
        let section = AngleSection {
            theta_range: theta_range(&field),
            gradient_check: angle_gradient_check(imm, res, tol)?,
        };
        (Gated::Value(section), Some(field))
    };

    Ok((
        HodgeSection {
            max_d_alpha: max_of(pointwise.iter().map(|p| p.0)),
            max_d_alpha_identity_defect: max_of(pointwise.iter().map(|p| p.1)),
            max_abs_delta_alpha_coordinate: max_of(pointwise.iter().map(|p| p.2.coordinate.abs())),
            max_abs_delta_alpha_closed_form: max_of(pointwise.iter().map(|p| p.2.closed_form.abs())),
            max_delta_alpha_difference: max_of(pointwise.iter().map(|p| p.2.difference)),
            harmonicity,
            period_nodes: DEFAULT_PERIOD_NODES,
            angle,
        },
        theta,
    ))
}

fn search_weights(cfg: &Config, imm: &CatalogImmersion) -> Option<RelaxedParams> {
    match (cfg.search.a, cfg.search.b) {
        (Some(a), Some(b)) => Some(RelaxedParams { q: [1.0 / 3.0; 3], a, b }),
        _ => imm.torus_params().map(RelaxedParams::from),
    }
}

type Traces = Vec<(usize, Vec<crate::search::TraceEntry>)>;

fn search_stage(cfg: &Config, weights: &RelaxedParams) -> Result<(SearchSection, Traces)> {
    let sc = &cfg.search;
    let results = match sc.q_init {
        Some(q) => {
            let init = RelaxedParams { q, ..*weights };
            let one = search_legendrian_hs(&init, &sc.targets, &sc.options)?;
            vec![one; sc.trials]
        }
        None => run_trials(weights, &sc.targets, sc.trials, cfg.seed, &sc.options)?,
    };
    let tol = cfg.tol("search");
    let converged = results.iter().filter(|r| r.residual < tol).count();
    let (best_trial, best) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.residual.total_cmp(&b.1.residual))
        .expect("at least one trial");
    let section = SearchSection {
        targets: sc.targets.clone(),
        trials: sc.trials,
        free_weights: sc.options.free_weights,
        max_iterations: sc.options.max_iterations,
        converged,
        best_trial,
        best_residual: best.residual,
        best_snapped: snap_to_integers(&best.best),
        results: results
            .iter()
            .enumerate()
            .map(|(trial, r)| TrialSummary {
                trial,
                init_q: r.init.q,
                q: r.best.q,
                a: r.best.a,
                b: r.best.b,
                residual: r.residual,
                iterations: r.iterations,
                converged: r.residual < tol,
            })
            .collect(),
    };
    let traces = results.into_iter().enumerate().map(|(k, r)| (k, r.trace)).collect();
    Ok((section, traces))
}

/// Loads a config, applies command-line overrides, runs it, and returns the
/// report (if any) with the exit status.
pub fn run_from_path(
    path: &Path,
    tol_overrides: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
    only: Option<&[Analysis]>,
) -> (Option<Report>, PathBuf, i32, Option<HsError>) {
    let mut cfg = match Config::from_path(path) {
        Ok(c) => c,
        Err(e) => return (None, PathBuf::new(), exit_code_for(&e), Some(e)),
    };
    for item in tol_overrides {
        if let Err(e) = cfg.override_tolerance(item) {
            return (None, PathBuf::new(), EXIT_CONFIG, Some(e));
        }
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(list) = only {
        cfg.analyses = list.to_vec();
        cfg.analyses_all = false;
        if let Err(e) = cfg.validate() {
            return (None, PathBuf::new(), EXIT_CONFIG, Some(e));
        }
    }
    let dir = cfg.resolve_output_dir(out);
    match run_analysis(&cfg, &dir) {
        Ok(report) => {
            let code = exit_code_for_report(&report);
            (Some(report), dir, code, None)
        }
        Err(e) => (None, dir, exit_code_for(&e), Some(e)),
    }
}
