//! Run configuration: a TOML document with `[immersion]`, `[grid]`,
//! `[tolerances]`, `[analyses]`, `[output]` and `[search]` tables plus a
//! top-level `seed`. Unknown keys are rejected. See the README for the grammar.

use crate::catalog::{make_catalog_immersion, CatalogImmersion, CatalogParams};
use crate::error::{HsError, Result};
use crate::search::{SearchOptions, Target, DEFAULT_MAX_ITERATIONS};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MIN_RESOLUTION: usize = 8;
pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_SEED: u64 = 20_240_611;
pub const DEFAULT_TRIALS: usize = 100;
/// Environment variable naming the output directory when neither the command
/// line nor the config does.
pub const OUTPUT_DIR_ENV: &str = "HSCONE_OUT";
pub const FALLBACK_OUTPUT_DIR: &str = "hscone-out";

/// Named thresholds with their defaults.
pub const TOLERANCE_DEFAULTS: [(&str, f64); 5] = [
    // identities evaluated from exact jets
    ("identity", 1e-10),
    // anything involving finite differences (fallback S1, angle gradient)
    ("finite_difference", 1e-6),
    // Legendrian gate for the Lagrangian angle and the Legendrian flag
    ("legendrian", 1e-10),
    ("isothermal", 1e-10),
    // residual below which a search trial counts as converged
    ("search", 1e-8),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Invariants,
    Stationarity,
    Hopf,
    Hodge,
    Classify,
    Search,
}

impl Analysis {
    /// Dependency order.
    pub const ALL: [Analysis; 6] = [
        Analysis::Invariants,
        Analysis::Stationarity,
        Analysis::Hopf,
        Analysis::Hodge,
        Analysis::Classify,
        Analysis::Search,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Invariants => "invariants",
            Analysis::Stationarity => "stationarity",
            Analysis::Hopf => "hopf",
            Analysis::Hodge => "hodge",
            Analysis::Classify => "classify",
            Analysis::Search => "search",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| HsError::Config(format!("unknown analysis '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Formats {
    pub json: bool,
    pub csv: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub targets: Vec<Target>,
    pub trials: usize,
    pub options: SearchOptions,
    /// Start every trial here instead of at random points of the simplex.
    pub q_init: Option<[f64; 3]>,
    /// Weights to search with; default to the immersion's own.
    pub a: Option<[f64; 3]>,
    pub b: Option<[f64; 3]>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            targets: vec![Target::Legendrian, Target::Minimal],
            trials: DEFAULT_TRIALS,
            options: SearchOptions::default(),
            q_init: None,
            a: None,
            b: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub name: String,
    pub params: CatalogParams,
    pub grid: Vec<usize>,
    pub tolerances: BTreeMap<String, f64>,
    /// Requested analyses in dependency order.
    pub analyses: Vec<Analysis>,
    /// True when the list came from `"all"`: inapplicable analyses are skipped
    /// instead of rejected.
    pub analyses_all: bool,
    pub output_dir: Option<PathBuf>,
    pub formats: Formats,
    pub search: SearchConfig,
    pub seed: u64,
}

// ---- raw serde layer -------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    immersion: RawImmersion,
    grid: Option<RawGrid>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
    analyses: Option<RawAnalyses>,
    output: Option<RawOutput>,
    search: Option<RawSearch>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImmersion {
    name: String,
    q: Option<Vec<Real>>,
    a: Option<[i64; 3]>,
    b: Option<[i64; 3]>,
    chart: Option<String>,
    y_max: Option<Real>,
    #[serde(default)]
    isothermal: bool,
    #[serde(default)]
    rotated: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    resolution: Resolution,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Resolution {
    Uniform(i64),
    PerAxis(Vec<i64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalyses {
    run: RunList,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RunList {
    Keyword(String),
    List(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    formats: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    targets: Option<Vec<String>>,
    trials: Option<usize>,
    max_iterations: Option<usize>,
    #[serde(default)]
    free_weights: bool,
    q_init: Option<Vec<Real>>,
    a: Option<Vec<Real>>,
    b: Option<Vec<Real>>,
}

/// A real given as a TOML float, integer, or `"p/q"` string.
#[derive(Deserialize)]
#[serde(untagged)]
enum Real {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Real {
    fn value(&self) -> Result<f64> {
        match self {
            Real::Float(x) => Ok(*x),
            Real::Int(i) => Ok(*i as f64),
            Real::Text(s) => parse_fraction(s),
        }
    }
}

/// Parses `"p/q"` (or a plain decimal) into a float.
pub fn parse_fraction(s: &str) -> Result<f64> {
    let bad = || HsError::Config(format!("'{s}' is not a number or fraction p/q"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            Ok(p / q)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

fn triple(v: &[Real], what: &str) -> Result<[f64; 3]> {
    if v.len() != 3 {
        return Err(HsError::Config(format!("{what} needs exactly 3 entries, got {}", v.len())));
    }
    Ok([v[0].value()?, v[1].value()?, v[2].value()?])
}

/// Squared radii given as fractions rarely sum to exactly 1 in floating
/// point; the last entry absorbs the rounding when it is small.
fn normalise_simplex(q: [f64; 3]) -> Result<[f64; 3]> {
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(HsError::Config(format!("q must sum to 1, sums to {total}")));
    }
    Ok([q[0], q[1], 1.0 - q[0] - q[1]])
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| HsError::Config(e.to_string()))?;
        Config::from_raw(raw)
    }

    pub fn from_path(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HsError::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::from_toml_str(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Config> {
        let im = raw.immersion;
        let params = CatalogParams {
            q: im.q.as_deref().map(|q| triple(q, "immersion.q").and_then(normalise_simplex)).transpose()?,
            a: im.a,
            b: im.b,
            chart: im.chart,
            y_max: im.y_max.as_ref().map(Real::value).transpose()?,
            isothermal: im.isothermal,
            rotated: im.rotated,
        };

        let grid = match raw.grid.map(|g| g.resolution) {
            None => vec![DEFAULT_RESOLUTION as i64; 2],
            Some(Resolution::Uniform(r)) => vec![r; 2],
            Some(Resolution::PerAxis(v)) => v,
        };
        if grid.len() != 2 {
            return Err(HsError::Config(format!(
                "grid.resolution needs one entry per parameter (2), got {}",
                grid.len()
            )));
        }
        if let Some(bad) = grid.iter().find(|&&r| r < MIN_RESOLUTION as i64) {
            return Err(HsError::Config(format!(
                "grid resolution {bad} is below the minimum of {MIN_RESOLUTION} per dimension"
            )));
        }
        let grid = grid.into_iter().map(|r| r as usize).collect();

        let mut tolerances: BTreeMap<String, f64> =
            TOLERANCE_DEFAULTS.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (name, value) in raw.tolerances {
            set_tolerance(&mut tolerances, &name, value)?;
        }

        let (analyses, analyses_all) = match raw.analyses.map(|a| a.run) {
            None => (Analysis::ALL.to_vec(), true),
            Some(RunList::Keyword(k)) if k == "all" => (Analysis::ALL.to_vec(), true),
            Some(RunList::Keyword(k)) => (vec![Analysis::parse(&k)?], false),
            Some(RunList::List(list)) => {
                let mut v = list.iter().map(|s| Analysis::parse(s)).collect::<Result<Vec<_>>>()?;
                v.sort();
                v.dedup();
                (v, false)
            }
        };

        let (output_dir, formats) = match raw.output {
            None => (None, Formats { json: true, csv: true }),
            Some(o) => {
                let formats = match o.formats {
                    None => Formats { json: true, csv: true },
                    Some(list) => {
                        let mut f = Formats { json: false, csv: false };
                        for s in list {
                            match s.as_str() {
                                "json" => f.json = true,
                                "csv" => f.csv = true,
                                other => return Err(HsError::Config(format!("unknown output format '{other}'"))),
                            }
                        }
                        f
                    }
                };
                (o.dir, formats)
            }
        };

        let mut search = SearchConfig::default();
        if let Some(s) = raw.search {
            if let Some(t) = s.targets {
                search.targets = t.iter().map(|x| x.parse()).collect::<Result<_>>()?;
                search.targets.sort_by_key(|t| *t as u8);
                search.targets.dedup();
            }
            if let Some(n) = s.trials {
                if n == 0 {
                    return Err(HsError::Config("search.trials must be positive".into()));
                }
                search.trials = n;
            }
            search.options.max_iterations = s.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS);
            search.options.free_weights = s.free_weights;
            search.q_init = s
                .q_init
                .as_deref()
                .map(|q| triple(q, "search.q_init").and_then(normalise_simplex))
                .transpose()?;
            search.a = s.a.as_deref().map(|v| triple(v, "search.a")).transpose()?;
            search.b = s.b.as_deref().map(|v| triple(v, "search.b")).transpose()?;
            if search.a.is_some() != search.b.is_some() {
                return Err(HsError::Config("search.a and search.b must be given together".into()));
            }
        }

        let cfg = Config {
            name: im.name,
            params,
            grid,
            tolerances,
            analyses,
            analyses_all,
            output_dir,
            formats,
            search,
            seed: raw.seed.unwrap_or(DEFAULT_SEED),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that the immersion can be built and every explicitly requested
    /// analysis applies to it.
    pub fn validate(&self) -> Result<()> {
        let imm = self.build_immersion()?;
        if !self.analyses_all {
            let is_torus = imm.torus_params().is_some();
            let has_weights = is_torus || self.search.a.is_some();
            if self.analyses.contains(&Analysis::Classify) && !is_torus {
                return Err(HsError::Config(format!(
                    "analysis 'classify' applies to homogeneous tori, not '{}'",
                    self.name
                )));
            }
            if self.analyses.contains(&Analysis::Search) && !has_weights {
                return Err(HsError::Config(
                    "analysis 'search' needs torus weights: use a torus or set search.a and search.b".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn build_immersion(&self) -> Result<CatalogImmersion> {
        make_catalog_immersion(&self.name, &self.params).map_err(|e| HsError::Config(format!("[immersion] {e}")))
    }

    pub fn tol(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    pub fn wants(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    /// Applies a command-line `name=value` tolerance override.
    pub fn override_tolerance(&mut self, item: &str) -> Result<()> {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| HsError::Config(format!("tolerance override '{item}' is not name=value")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| HsError::Config(format!("tolerance override '{item}' has a non-numeric value")))?;
        set_tolerance(&mut self.tolerances, name.trim(), value)
    }

    /// Output directory: command line, then config, then `$HSCONE_OUT`, then
    /// a fixed fallback.
    pub fn resolve_output_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
    }
}

fn set_tolerance(map: &mut BTreeMap<String, f64>, name: &str, value: f64) -> Result<()> {
    if !map.contains_key(name) {
        let known: Vec<&str> = TOLERANCE_DEFAULTS.iter().map(|(k, _)| *k).collect();
        return Err(HsError::Config(format!(
            "unknown tolerance '{name}' (known: {})",
            known.join(", ")
        )));
    }
    if !(value > 0.0 && value.is_finite()) {
        return Err(HsError::Config(format!("tolerance '{name}' must be positive and finite")));
    }
    map.insert(name.to_string(), value);
    Ok(())
}
