//! Closed-form immersions: homogeneous tori, the great sphere in two charts,
//! and the fixtures used to exercise the index and closedness machinery.

use crate::ambient::AmbientVector;
use crate::error::{HsError, Result};
use crate::family::HomogeneousTorusParams;
use crate::immersion::{Domain, Immersion, Jet, SphereChart};
use crate::linalg;
use crate::taylor::Taylor;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;

/// Names accepted by [`make_catalog_immersion`].
pub const CATALOG_NAMES: [&str; 4] = ["great_sphere", "clifford_torus", "s3_torus", "homogeneous_torus"];

/// `u_k(t) = r_k exp(i Σ_j W_jk t_j)` on a torus `R^m / Λ`.
#[derive(Debug, Clone)]
pub struct HomogeneousTorus {
    name: String,
    radii: Vec<f64>,
    /// `m` rows of `n` weights.
    weights: Vec<Vec<f64>>,
    domain: Domain,
    params: Option<HomogeneousTorusParams>,
    isothermal: bool,
}

impl HomogeneousTorus {
    /// `q` are the squared radii (must sum to 1), `weights[j][k]` the phase
    /// rate of coordinate `k` along parameter `j`. The lattice is `2π Z^m`.
    pub fn new(name: impl Into<String>, q: Vec<f64>, weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = q.len();
        let m = weights.len();
        if m == 0 || weights.iter().any(|w| w.len() != n) {
            return Err(HsError::InvalidParams("weights must be m rows of n entries".into()));
        }
        if q.iter().any(|x| !(*x >= 0.0)) {
            return Err(HsError::InvalidParams("squared radii must be nonnegative".into()));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-14 {
            return Err(HsError::InvalidParams(format!("squared radii sum to {total}, not 1")));
        }
        let torus = HomogeneousTorus {
            name: name.into(),
            radii: q.iter().map(|x| x.sqrt()).collect(),
            weights,
            domain: Domain::standard_torus(m),
            params: None,
            isothermal: false,
        };
        if !linalg::is_well_conditioned_spd(&torus.flat_metric(), m) {
            return Err(HsError::InvalidParams("weight matrix is rank deficient on the support of q".into()));
        }
        Ok(torus)
    }

    pub fn from_params(p: &HomogeneousTorusParams) -> Result<Self> {
        p.validate()?;
        let w = vec![
            p.a.iter().map(|&x| x as f64).collect(),
            p.b.iter().map(|&x| x as f64).collect(),
        ];
        let mut t = HomogeneousTorus::new("homogeneous_torus", p.q.to_vec(), w)?;
        t.params = Some(*p);
        Ok(t)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn params(&self) -> Option<&HomogeneousTorusParams> {
        self.params.as_ref()
    }

    pub fn is_isothermal_chart(&self) -> bool {
        self.isothermal
    }

    /// The constant induced metric `W diag(q) Wᵀ`.
    pub fn flat_metric(&self) -> Vec<f64> {
        let m = self.weights.len();
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                g[i * m + j] = (0..self.radii.len())
                    .map(|k| self.weights[i][k] * self.weights[j][k] * self.radii[k] * self.radii[k])
                    .sum();
            }
        }
        g
    }

    /// Linear reparametrisation `t = L^{-T} t'` (with `g = L Lᵀ`) after which
    /// the induced metric is the identity. Orientation is preserved.
    pub fn isothermal(&self) -> Result<Self> {
        let m = self.weights.len();
        let g = self.flat_metric();
        let l = linalg::cholesky(&g, m).ok_or_else(|| HsError::DegenerateMetric {
            dim: m,
            point: vec![],
        })?;
        // M = L^{-T}: column c of M solves Lᵀ x = e_c
        let mut lt = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                lt[i * m + j] = l[j * m + i];
            }
        }
        let mut mm = vec![0.0; m * m];
        for c in 0..m {
            let mut e = vec![0.0; m];
            e[c] = 1.0;
            let x = linalg::solve(&lt, m, &e).expect("triangular factor is invertible");
            for r in 0..m {
                mm[r * m + c] = x[r];
            }
        }
        // W' = Mᵀ W
        let n = self.radii.len();
        let weights: Vec<Vec<f64>> = (0..m)
            .map(|l_| {
                (0..n)
                    .map(|k| (0..m).map(|j| mm[j * m + l_] * self.weights[j][k]).sum())
                    .collect()
            })
            .collect();
        // old generators ω map to Lᵀ ω
        let Domain::Torus { generators } = &self.domain else {
            unreachable!("homogeneous tori live on tori")
        };
        let generators = generators
            .iter()
            .map(|w| (0..m).map(|r| (0..m).map(|c| lt[r * m + c] * w[c]).sum()).collect())
            .collect();
        Ok(HomogeneousTorus {
            name: self.name.clone(),
            radii: self.radii.clone(),
            weights,
            domain: Domain::Torus { generators },
            params: self.params,
            isothermal: true,
        })
    }
}

impl Immersion for HomogeneousTorus {
    fn name(&self) -> &str {
        &self.name
    }

    fn complex_dim(&self) -> usize {
        self.radii.len()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn genus(&self) -> Option<u32> {
        (self.weights.len() == 2).then_some(1)
    }

    fn raw_jet(&self, t: &[f64], order: usize) -> Jet {
        let m = self.weights.len();
        let n = self.radii.len();
        let base: Vec<Complex64> = (0..n)
            .map(|k| {
                let phase: f64 = (0..m).map(|j| self.weights[j][k] * t[j]).sum();
                Complex64::from_polar(self.radii[k], phase)
            })
            .collect();
        let i = Complex64::new(0.0, 1.0);
        // ∂_{j1..jp} u_k = i^p Π W_{jl,k} u_k
        let deriv = |idx: &[usize]| {
            let factor = i.powu(idx.len() as u32);
            let z: Vec<Complex64> = (0..n)
                .map(|k| factor * idx.iter().map(|&j| self.weights[j][k]).product::<f64>() * base[k])
                .collect();
            AmbientVector::from_complex(&z)
        };
        let u = AmbientVector::from_complex(&base);
        let first = if order >= 1 { (0..m).map(|a| deriv(&[a])).collect() } else { vec![] };
        let mut second = Vec::new();
        let mut third = Vec::new();
        if order >= 2 {
            for a in 0..m {
                for b in 0..m {
                    second.push(deriv(&[a, b]));
                }
            }
        }
        if order >= 3 {
            for a in 0..m {
                for b in 0..m {
                    for c in 0..m {
                        third.push(deriv(&[a, b, c]));
                    }
                }
            }
        }
        Jet::new(t.to_vec(), u, first, second, third)
    }
}

/// A map whose real coordinates are built from Taylor arithmetic.
pub trait TaylorMap: Send + Sync + fmt::Debug {
    /// The `2n` real coordinates (block order) as functions of the parameters.
    fn eval(&self, t: &[Taylor]) -> Vec<Taylor>;
}

/// Immersion whose jets come from exact Taylor propagation through a [`TaylorMap`].
#[derive(Debug, Clone)]
pub struct ChartImmersion<M> {
    name: String,
    n: usize,
    domain: Domain,
    genus: Option<u32>,
    map: M,
}

impl<M: TaylorMap> ChartImmersion<M> {
    pub fn new(name: impl Into<String>, n: usize, domain: Domain, genus: Option<u32>, map: M) -> Self {
        ChartImmersion {
            name: name.into(),
            n,
            domain,
            genus,
            map,
        }
    }

    pub fn map(&self) -> &M {
        &self.map
    }
}

impl<M: TaylorMap> Immersion for ChartImmersion<M> {
    fn name(&self) -> &str {
        &self.name
    }
    fn complex_dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn genus(&self) -> Option<u32> {
        self.genus
    }
    fn raw_jet(&self, t: &[f64], order: usize) -> Jet {
        let m = t.len();
        let vars: Vec<Taylor> = (0..m).map(|i| Taylor::variable(m, i, t[i])).collect();
        let coords = self.map.eval(&vars);
        debug_assert_eq!(coords.len(), 2 * self.n);
        Jet::from_taylor(t, order, &coords)
    }
}

/// The unit 2-sphere in the real locus `R^3 ⊂ C^3`, optionally rotated.
#[derive(Debug, Clone, Copy)]
pub struct GreatSphereMap {
    pub chart: SphereChart,
    pub rotation: [[f64; 3]; 3],
}

pub const IDENTITY3: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
/// Sends the chart poles `±e_3` to `±e_1`, so the original poles land on the equator.
pub const POLE_ROTATION: [[f64; 3]; 3] = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]];

impl TaylorMap for GreatSphereMap {
    fn eval(&self, t: &[Taylor]) -> Vec<Taylor> {
        let (lat, lon) = (&t[0], &t[1]);
        let (radial, height) = match self.chart {
            SphereChart::LatLong => (lat.cos(), lat.sin()),
            SphereChart::Mercator { .. } => (lat.sech(), lat.tanh()),
        };
        let v = [&radial * &lon.cos(), &radial * &lon.sin(), height];
        let m = lat.vars();
        let mut out: Vec<Taylor> = self
            .rotation
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&v)
                    .fold(Taylor::constant(m, 0.0), |acc, (r, x)| &acc + &x.scale(*r))
            })
            .collect();
        out.extend((0..3).map(|_| Taylor::constant(m, 0.0)));
        out
    }
}

pub type GreatSphere = ChartImmersion<GreatSphereMap>;

pub fn great_sphere(chart: SphereChart) -> GreatSphere {
    ChartImmersion::new(
        "great_sphere",
        3,
        Domain::Sphere(chart),
        Some(0),
        GreatSphereMap {
            chart,
            rotation: IDENTITY3,
        },
    )
}

/// The same sphere seen through a chart whose poles sit on the original equator.
pub fn great_sphere_rotated(chart: SphereChart) -> GreatSphere {
    ChartImmersion::new(
        "great_sphere[rotated]",
        3,
        Domain::Sphere(chart),
        Some(0),
        GreatSphereMap {
            chart,
            rotation: POLE_ROTATION,
        },
    )
}

pub fn clifford_torus() -> HomogeneousTorus {
    HomogeneousTorus::from_params(&HomogeneousTorusParams::clifford())
        .expect("valid parameters")
        .with_name("clifford_torus")
}

pub fn s3_torus() -> HomogeneousTorus {
    HomogeneousTorus::from_params(&HomogeneousTorusParams::s3_torus())
        .expect("valid parameters")
        .with_name("s3_torus")
}

pub fn iriyeh_torus() -> HomogeneousTorus {
    HomogeneousTorus::from_params(&HomogeneousTorusParams::iriyeh()).expect("valid parameters")
}

/// `u = e^{iψ} v` with `v(s,t) = (cos s cos t, cos s sin t, sin s)` real and
/// `ψ = c((s−s₀)² − (t−t₀)²)/2`. Such maps are isotropic with
/// `⟨Ju, u_j⟩ = ∂_j ψ`, so the Hopf function is `c(z − z₀)/2`: a simple
/// zero at the planted centre.
#[derive(Debug, Clone, Copy)]
pub struct PlantedZeroMap {
    pub centre: [f64; 2],
    pub strength: f64,
}

impl TaylorMap for PlantedZeroMap {
    fn eval(&self, t: &[Taylor]) -> Vec<Taylor> {
        let m = t[0].vars();
        let ds = &t[0] - &Taylor::constant(m, self.centre[0]);
        let dt = &t[1] - &Taylor::constant(m, self.centre[1]);
        let psi = (&(&ds * &ds) - &(&dt * &dt)).scale(0.5 * self.strength);
        let (c, s) = (psi.cos(), psi.sin());
        let cs = t[0].cos();
        let v = [&cs * &t[1].cos(), &cs * &t[1].sin(), t[0].sin()];
        let mut out: Vec<Taylor> = v.iter().map(|x| &c * x).collect();
        out.extend(v.iter().map(|x| &s * x));
        out
    }
}

/// Slope of `α` at the planted zero; small enough that a grid point within
/// half a cell of the centre has `f` below the coarse-scan threshold.
pub const PLANTED_ZERO_STRENGTH: f64 = 0.1;

pub fn planted_zero_fixture(centre: [f64; 2]) -> ChartImmersion<PlantedZeroMap> {
    ChartImmersion::new(
        "planted_zero_fixture",
        3,
        Domain::Patch {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
        },
        None,
        PlantedZeroMap {
            centre,
            strength: PLANTED_ZERO_STRENGTH,
        },
    )
}

/// `u = (cos s, sin s · e^{it}, 0)`: a round sphere through a complex line,
/// not isotropic (`⟨Ju_s, u_t⟩ = sin s cos s`).
#[derive(Debug, Clone, Copy)]
pub struct NonIsotropicMap;

impl TaylorMap for NonIsotropicMap {
    fn eval(&self, t: &[Taylor]) -> Vec<Taylor> {
        let m = t[0].vars();
        let sn = t[0].sin();
        vec![
            t[0].cos(),
            &sn * &t[1].cos(),
            Taylor::constant(m, 0.0),
            Taylor::constant(m, 0.0),
            &sn * &t[1].sin(),
            Taylor::constant(m, 0.0),
        ]
    }
}

pub fn non_isotropic_fixture() -> ChartImmersion<NonIsotropicMap> {
    ChartImmersion::new(
        "non_isotropic_fixture",
        3,
        Domain::Patch {
            lo: vec![0.2, 0.0],
            hi: vec![PI - 0.2, 2.0 * PI],
        },
        None,
        NonIsotropicMap,
    )
}

/// Parameters accepted by [`make_catalog_immersion`]; which ones apply depends on the name.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CatalogParams {
    pub q: Option<[f64; 3]>,
    pub a: Option<[i64; 3]>,
    pub b: Option<[i64; 3]>,
    /// `"lat_long"` or `"mercator"` (great sphere only).
    pub chart: Option<String>,
    pub y_max: Option<f64>,
    /// Reparametrise a torus so the induced metric is conformally flat in the chart.
    pub isothermal: bool,
    /// Use the pole-rotated sphere chart.
    pub rotated: bool,
}

/// A catalog immersion. The enum keeps concrete types available to callers
/// (classification needs the torus parameters).
#[derive(Debug, Clone)]
pub enum CatalogImmersion {
    Sphere(GreatSphere),
    Torus(HomogeneousTorus),
}

impl CatalogImmersion {
    pub fn as_dyn(&self) -> &dyn Immersion {
        match self {
            CatalogImmersion::Sphere(s) => s,
            CatalogImmersion::Torus(t) => t,
        }
    }

    pub fn torus_params(&self) -> Option<&HomogeneousTorusParams> {
        match self {
            CatalogImmersion::Torus(t) => t.params(),
            CatalogImmersion::Sphere(_) => None,
        }
    }

    /// Extra charts covering points the primary chart misses (sphere poles).
    pub fn audit_charts(&self) -> Vec<CatalogImmersion> {
        match self {
            CatalogImmersion::Sphere(s) => {
                let map = *s.map();
                let rotation = if map.rotation == IDENTITY3 { POLE_ROTATION } else { IDENTITY3 };
                vec![CatalogImmersion::Sphere(ChartImmersion::new(
                    "great_sphere[audit chart]",
                    3,
                    Domain::Sphere(map.chart),
                    Some(0),
                    GreatSphereMap { rotation, ..map },
                ))]
            }
            CatalogImmersion::Torus(_) => vec![],
        }
    }
}

pub fn make_catalog_immersion(name: &str, params: &CatalogParams) -> Result<CatalogImmersion> {
    let reject = |field: &str| HsError::InvalidParams(format!("`{field}` does not apply to `{name}`"));
    let torus_only = |p: &CatalogParams| -> Result<()> {
        if p.chart.is_some() {
            return Err(reject("chart"));
        }
        if p.y_max.is_some() {
            return Err(reject("y_max"));
        }
        if p.rotated {
            return Err(reject("rotated"));
        }
        Ok(())
    };
    let finish = |t: HomogeneousTorus| -> Result<CatalogImmersion> {
        Ok(CatalogImmersion::Torus(if params.isothermal { t.isothermal()? } else { t }))
    };
    match name {
        "great_sphere" => {
            if params.q.is_some() || params.a.is_some() || params.b.is_some() {
                return Err(reject("q/a/b"));
            }
            if params.isothermal {
                return Err(HsError::InvalidParams(
                    "great_sphere: choose chart = \"mercator\" for a conformal chart".into(),
                ));
            }
            let chart = match params.chart.as_deref().unwrap_or("lat_long") {
                "lat_long" => {
                    if params.y_max.is_some() {
                        return Err(reject("y_max"));
                    }
                    SphereChart::LatLong
                }
                "mercator" => {
                    let y_max = params.y_max.unwrap_or(3.0);
                    if !(y_max > 0.0 && y_max.is_finite()) {
                        return Err(HsError::InvalidParams("y_max must be positive".into()));
                    }
                    SphereChart::Mercator { y_max }
                }
                other => return Err(HsError::InvalidParams(format!("unknown sphere chart `{other}`"))),
            };
            Ok(CatalogImmersion::Sphere(if params.rotated {
                great_sphere_rotated(chart)
            } else {
                great_sphere(chart)
            }))
        }
        "clifford_torus" | "s3_torus" => {
            torus_only(params)?;
            if params.q.is_some() || params.a.is_some() || params.b.is_some() {
                return Err(reject("q/a/b"));
            }
            finish(if name == "clifford_torus" { clifford_torus() } else { s3_torus() })
        }
        "homogeneous_torus" => {
            torus_only(params)?;
            let (Some(q), Some(a), Some(b)) = (params.q, params.a, params.b) else {
                return Err(HsError::InvalidParams("homogeneous_torus needs q, a and b".into()));
            };
            finish(HomogeneousTorus::from_params(&HomogeneousTorusParams { q, a, b })?)
        }
        other => Err(HsError::UnknownImmersion(other.to_string())),
    }
}

/// One line per catalog entry: name and parameter schema.
pub fn catalog_listing() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "great_sphere",
            "chart = \"lat_long\" | \"mercator\" (default lat_long); y_max = <f64> (mercator, default 3); rotated = <bool>",
        ),
        ("clifford_torus", "isothermal = <bool>"),
        ("s3_torus", "isothermal = <bool>"),
        (
            "homogeneous_torus",
            "q = [3 reals or \"p/q\" strings summing to 1]; a = [3 ints]; b = [3 ints]; isothermal = <bool>",
        ),
    ]
}
