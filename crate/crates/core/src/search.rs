//! Damped least-squares (Levenberg–Marquardt) search over homogeneous tori
//! with real-relaxed weights. `q` stays on the probability simplex: steps are
//! taken in its tangent plane and then projected back.

use crate::error::{HsError, Result};
use crate::family::{classify_family_member, closed_form, FamilyClassification, HomogeneousTorusParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A run counts as converged when the residual norm drops below this.
pub const CONVERGENCE_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;
const JACOBIAN_STEP: f64 = 1e-7;
const INITIAL_DAMPING: f64 = 1e-3;
/// Components with `q_k` below this are inactive and skipped by the minimal target.
const ACTIVE_Q: f64 = 1e-12;
/// Stop once the residual is this small; further steps only chase rounding.
const FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `Σ a_k q_k = Σ b_k q_k = 0`
    Legendrian,
    /// `λ_k = 2` on active components
    Minimal,
}

impl std::str::FromStr for Target {
    type Err = HsError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legendrian" => Ok(Target::Legendrian),
            "minimal" => Ok(Target::Minimal),
            other => Err(HsError::Config(format!(
                "unknown search target '{other}' (expected legendrian or minimal)"
            ))),
        }
    }
}

/// A homogeneous torus with real weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedParams {
    pub q: [f64; 3],
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl From<&HomogeneousTorusParams> for RelaxedParams {
    fn from(p: &HomogeneousTorusParams) -> Self {
        let (a, b) = p.weights_f64();
        RelaxedParams { q: p.q, a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    pub max_iterations: usize,
    /// Optimise the weights as well as `q`.
    pub free_weights: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            free_weights: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapResult {
    pub params: HomogeneousTorusParams,
    pub classification: Option<FamilyClassification>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub init: RelaxedParams,
    /// Best iterate seen.
    pub best: RelaxedParams,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
}

/// Residual vector of the targets; `None` where the metric degenerates.
pub fn target_residuals(p: &RelaxedParams, targets: &[Target]) -> Option<Vec<f64>> {
    let mut r = Vec::with_capacity(5);
    if targets.contains(&Target::Legendrian) {
        r.push((0..3).map(|k| p.a[k] * p.q[k]).sum());
        r.push((0..3).map(|k| p.b[k] * p.q[k]).sum());
    }
    if targets.contains(&Target::Minimal) {
        let cf = closed_form(&p.q, &p.a, &p.b).ok()?;
        for k in 0..3 {
            r.push(if p.q[k] > ACTIVE_Q { cf.lambda[k] - 2.0 } else { 0.0 });
        }
    }
    Some(r)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean projection onto `{q ≥ 0, Σq = 1}`.
pub fn project_to_simplex(q: [f64; 3]) -> [f64; 3] {
    let mut s = q;
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, v) in s.iter().enumerate() {
        cum += v;
        let candidate = (cum - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        }
    }
    q.map(|v| (v - shift).max(0.0))
}

fn pack(p: &RelaxedParams, free: bool) -> Vec<f64> {
    let mut x = p.q.to_vec();
    if free {
        x.extend(p.a);
        x.extend(p.b);
    }
    x
}

fn unpack(x: &[f64], base: &RelaxedParams) -> RelaxedParams {
    let mut p = *base;
    p.q = [x[0], x[1], x[2]];
    if x.len() == 9 {
        p.a = [x[3], x[4], x[5]];
        p.b = [x[6], x[7], x[8]];
    }
    p
}

pub fn search_legendrian_hs(init: &RelaxedParams, targets: &[Target], opts: &SearchOptions) -> Result<SearchResult> {
    let total: f64 = init.q.iter().sum();
    if (total - 1.0).abs() > 1e-12 || init.q.iter().any(|v| *v < 0.0) {
        return Err(HsError::InvalidParams(format!("initial q must lie on the simplex, got {:?}", init.q)));
    }
    let mut current = *init;
    let Some(mut r) = target_residuals(&current, targets) else {
        return Err(HsError::DegenerateMetric { dim: 2, point: vec![] });
    };
    let mut res = norm(&r);
    let mut result = SearchResult {
        init: *init,
        best: current,
        residual: res,
        converged: res < CONVERGENCE_TOL,
        iterations: 0,
        trace: Vec::new(),
    };
    if r.is_empty() {
        return Ok(result);
    }

    let nvar = if opts.free_weights { 9 } else { 3 };
    let mut damping = INITIAL_DAMPING;
    for iteration in 1..=opts.max_iterations {
        if res < FLOOR {
            break;
        }
        let x = pack(&current, opts.free_weights);
        let nres = r.len();
        // Jacobian by central differences, q-columns projected onto Σδq = 0
        let mut jac = vec![0.0; nres * nvar];
        for v in 0..nvar {
            let mut xp = x.clone();
            xp[v] += JACOBIAN_STEP;
            let mut xm = x.clone();
            xm[v] -= JACOBIAN_STEP;
            let (Some(rp), Some(rm)) = (
                target_residuals(&unpack(&xp, &current), targets),
                target_residuals(&unpack(&xm, &current), targets),
            ) else {
                return Err(HsError::DegenerateMetric { dim: 2, point: vec![] });
            };
            for k in 0..nres {
                jac[k * nvar + v] = (rp[k] - rm[k]) / (2.0 * JACOBIAN_STEP);
            }
        }
        for k in 0..nres {
            let row = &mut jac[k * nvar..k * nvar + 3];
            let mean = (row[0] + row[1] + row[2]) / 3.0;
            row.iter_mut().for_each(|c| *c -= mean);
        }
        let mut jtj = vec![0.0; nvar * nvar];
        let mut jtr = vec![0.0; nvar];
        for a in 0..nvar {
            for k in 0..nres {
                jtr[a] -= jac[k * nvar + a] * r[k];
                for b in 0..nvar {
                    jtj[a * nvar + b] += jac[k * nvar + a] * jac[k * nvar + b];
                }
            }
        }
        for a in 0..nvar {
            jtj[a * nvar + a] += damping;
        }
        let accepted = crate::linalg::solve(&jtj, nvar, &jtr).and_then(|step| {
            let xn: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let mut cand = unpack(&xn, &current);
            cand.q = project_to_simplex(cand.q);
            let rn = target_residuals(&cand, targets)?;
            (norm(&rn) < res).then_some((cand, rn))
        });
        match accepted {
            Some((cand, rn)) => {
                current = cand;
                r = rn;
                res = norm(&r);
                damping *= 0.5;
            }
            None => damping *= 2.0,
        }
        result.trace.push(TraceEntry {
            iteration,
            residual: res,
            damping,
        });
        result.iterations = iteration;
        if damping > 1e12 {
            break;
        }
    }
    result.best = current;
    result.residual = res;
    result.converged = res < CONVERGENCE_TOL;
    Ok(result)
}

/// Rounds the weights to integers, renormalises `q`, and re-verifies the
/// candidate by closed-form classification.
pub fn snap_to_integers(p: &RelaxedParams) -> SnapResult {
    let total: f64 = p.q.iter().sum();
    let params = HomogeneousTorusParams {
        q: p.q.map(|v| v / total),
        a: p.a.map(|v| v.round() as i64),
        b: p.b.map(|v| v.round() as i64),
    };
    match classify_family_member(&params) {
        Ok(c) => SnapResult {
            params,
            classification: Some(c),
            error: None,
        },
        Err(e) => SnapResult {
            params,
            classification: None,
            error: Some(e.to_string()),
        },
    }
}

/// Uniform draw from the simplex (Dirichlet(1, 1, 1)).
pub fn random_simplex_point<R: Rng>(rng: &mut R) -> [f64; 3] {
    let e: [f64; 3] = std::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

/// Independent trials from random `q` with the given weights. Initial points
/// are drawn sequentially from the seed, so results do not depend on threading.
pub fn run_trials(
    weights: &RelaxedParams,
    targets: &[Target],
    trials: usize,
    seed: u64,
    opts: &SearchOptions,
) -> Result<Vec<SearchResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inits: Vec<RelaxedParams> = (0..trials)
        .map(|_| RelaxedParams {
            q: random_simplex_point(&mut rng),
            ..*weights
        })
        .collect();
    inits
        .par_iter()
        .map(|init| search_legendrian_hs(init, targets, opts))
        .collect()
}
