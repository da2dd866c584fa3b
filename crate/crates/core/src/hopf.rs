//! Surface links: the Hopf function `w = ⟨Ju, u_z⟩`, its Cauchy–Riemann
//! residual, zeros of `Pr Ju` (Legendrian points), their winding indices,
//! and the Poincaré–Hopf count against the genus.

use crate::error::{HsError, Result};
use crate::geometry::induced_metric;
use crate::immersion::{Grid, Immersion, Jet};
use crate::isotropy::{alpha_coefficients, isotropy_residual, stationarity_s2};
use crate::linalg;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Coarse-scan threshold on `f` for zero candidates.
pub const ZERO_CANDIDATE_F: f64 = 1e-4;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
pub const DEFAULT_WINDING_SAMPLES: usize = 64;
/// Largest allowed distance of the unwrapped total angle from a multiple of 2π.
pub const WINDING_SLACK: f64 = 0.1;
/// Above this relative defect the chart is not treated as isothermal.
pub const ISOTHERMAL_TOL: f64 = 1e-10;

fn require_surface(imm: &dyn Immersion) -> Result<()> {
    if imm.dim() != 2 {
        return Err(HsError::DimensionMismatch {
            expected: 2,
            actual: imm.dim(),
        });
    }
    Ok(())
}

/// Relative conformality defect `(|g11 − g22| + |g12|) / g11` at one jet.
pub fn isothermal_defect(jet: &Jet) -> Result<f64> {
    let g = induced_metric(jet)?;
    Ok(((g.g(0, 0) - g.g(1, 1)).abs() + g.g(0, 1).abs()) / g.g(0, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsothermalCheck {
    pub max_defect: f64,
    /// Range of `φ² = g11` over the grid, recorded when the chart is isothermal.
    pub phi2_range: Option<[f64; 2]>,
}

pub fn isothermal_check(imm: &dyn Immersion, res: &[usize]) -> Result<IsothermalCheck> {
    require_surface(imm)?;
    let grid = Grid::new(imm.domain(), res);
    let per_point: Vec<(f64, f64)> = grid
        .points
        .par_iter()
        .map(|t| {
            let jet = imm.jet(t, 1)?;
            let g = induced_metric(&jet)?;
            Ok((isothermal_defect(&jet)?, g.g(0, 0)))
        })
        .collect::<Result<_>>()?;
    let max_defect = per_point.iter().map(|p| p.0).fold(0.0, f64::max);
    let phi2_range = (max_defect <= ISOTHERMAL_TOL).then(|| {
        let lo = per_point.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
        [lo, hi]
    });
    Ok(IsothermalCheck { max_defect, phi2_range })
}

/// `w = ⟨Ju, u_z⟩ = (α₁ − iα₂)/2` with `z = t¹ + i t²`.
pub fn hopf_function(jet: &Jet) -> Complex64 {
    let alpha = alpha_coefficients(jet);
    Complex64::new(0.5 * alpha[0], -0.5 * alpha[1])
}

/// `∂_j α_i = ⟨Ju_j, u_i⟩ + ⟨Ju, u_ij⟩`, row `i`, column `j`.
pub fn alpha_jacobian(jet: &Jet) -> [[f64; 2]; 2] {
    let mut d = [[0.0; 2]; 2];
    for (i, row) in d.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = jet.d1(j).j_dot(jet.d1(i)) + jet.u.j_dot(jet.d2(i, j));
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfSample {
    pub t: Vec<f64>,
    pub w: [f64; 2],
    pub phi2: Option<f64>,
    pub cr_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyRiemann {
    /// `|∂_z̄ w| = ½|∂₁w + i∂₂w|`
    pub residual: f64,
    /// Holomorphy is only expected when every hypothesis holds.
    pub warnings: Vec<String>,
}

/// `|∂_z̄ w|` from an order-2 jet, with warnings for any unmet hypothesis
/// (isothermal chart, isotropy, `S2 = 0`) at the point.
pub fn cauchy_riemann_residual(imm: &dyn Immersion, t: &[f64], tol: f64) -> Result<CauchyRiemann> {
    require_surface(imm)?;
    let jet = imm.jet(t, 2)?;
    let residual = cr_residual_of(&jet);
    let mut warnings = Vec::new();
    let defect = isothermal_defect(&jet)?;
    if defect > ISOTHERMAL_TOL {
        warnings.push(format!("chart not isothermal (defect {defect:e})"));
    }
    let iso = isotropy_residual(&jet);
    if iso > tol {
        warnings.push(format!("not isotropic (residual {iso:e})"));
    }
    let s2 = stationarity_s2(&jet)?;
    if s2.abs() > tol {
        warnings.push(format!("S2 does not vanish ({s2:e})"));
    }
    Ok(CauchyRiemann { residual, warnings })
}

fn cr_residual_of(jet: &Jet) -> f64 {
    let d = alpha_jacobian(jet);
    // ∂_j w = (∂_j α₁ − i ∂_j α₂)/2
    let dw = |j: usize| Complex64::new(0.5 * d[0][j], -0.5 * d[1][j]);
    let dzbar = 0.5 * (dw(0) + Complex64::new(0.0, 1.0) * dw(1));
    dzbar.norm()
}

pub fn hopf_sample(imm: &dyn Immersion, t: &[f64]) -> Result<HopfSample> {
    require_surface(imm)?;
    let jet = imm.jet(t, 2)?;
    let w = hopf_function(&jet);
    let defect = isothermal_defect(&jet)?;
    let phi2 = (defect <= ISOTHERMAL_TOL).then(|| jet.d1(0).norm_squared());
    Ok(HopfSample {
        t: t.to_vec(),
        w: [w.re, w.im],
        phi2,
        cr_residual: cr_residual_of(&jet),
    })
}

/// Winding number of a planar field around the circle of radius `rho`.
pub fn winding_number<F>(field: F, centre: [f64; 2], rho: f64, samples: usize) -> Result<i32>
where
    F: Fn(f64, f64) -> Result<(f64, f64)>,
{
    assert!(samples >= 3);
    let mut angles = Vec::with_capacity(samples);
    for k in 0..samples {
        let phi = 2.0 * PI * k as f64 / samples as f64;
        let (x, y) = field(centre[0] + rho * phi.cos(), centre[1] + rho * phi.sin())?;
        if x == 0.0 && y == 0.0 {
            return Err(HsError::AmbiguousWinding { total: f64::NAN });
        }
        angles.push(y.atan2(x));
    }
    let mut total = 0.0;
    for k in 0..samples {
        let mut d = angles[(k + 1) % samples] - angles[k];
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        // a step this large cannot be attributed to a direction of turning
        if d.abs() > 0.5 * PI {
            return Err(HsError::AmbiguousWinding { total: f64::NAN });
        }
        total += d;
    }
    let k = (total / (2.0 * PI)).round();
    if (total - 2.0 * PI * k).abs() > WINDING_SLACK {
        return Err(HsError::AmbiguousWinding { total });
    }
    Ok(k as i32)
}

/// Zero order `k` at `centre`: the winding of `(α₁, −α₂)` on a circle of
/// radius `rho`. The index of `Pr Ju` there is `−k`.
pub fn point_index(imm: &dyn Immersion, centre: [f64; 2], rho: f64, samples: usize) -> Result<i32> {
    require_surface(imm)?;
    winding_number(
        |s, t| {
            let alpha = alpha_coefficients(&imm.jet(&[s, t], 1)?);
            Ok((alpha[0], -alpha[1]))
        },
        centre,
        rho,
        samples,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendrianPoint {
    pub t: Vec<f64>,
    /// Vanishing order `k` of the Hopf function, from the winding number.
    pub multiplicity: i32,
    /// Index of `Pr Ju`, always `−multiplicity`.
    pub index_prju: i32,
    /// `|α|` at the reported location.
    pub residual_at_zero: f64,
    /// False when Newton did not converge; the coarse candidate is kept.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "points", rename_all = "snake_case")]
pub enum LegendrianScan {
    /// `f` stays below tolerance on the whole grid.
    EverywhereLegendrian,
    Points(Vec<LegendrianPoint>),
}

impl LegendrianScan {
    pub fn points(&self) -> &[LegendrianPoint] {
        match self {
            LegendrianScan::EverywhereLegendrian => &[],
            LegendrianScan::Points(p) => p,
        }
    }
}

/// Newton iteration on `F(t) = (α₁, α₂)`. Returns the final point, `|F|`
/// there, and whether `|F| < NEWTON_TOL` was reached.
pub fn refine_zero(imm: &dyn Immersion, start: &[f64]) -> Result<(Vec<f64>, f64, bool)> {
    let mut t = start.to_vec();
    let mut jet = imm.jet(&t, 2)?;
    let mut alpha = alpha_coefficients(&jet);
    let norm = |a: &[f64]| a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..NEWTON_MAX_ITER {
        if norm(&alpha) < NEWTON_TOL {
            return Ok((t, norm(&alpha), true));
        }
        let d = alpha_jacobian(&jet);
        let Some(step) = linalg::solve(&[d[0][0], d[0][1], d[1][0], d[1][1]], 2, &alpha) else {
            break;
        };
        let next: Vec<f64> = t.iter().zip(&step).map(|(x, s)| x - s).collect();
        if !imm.domain().contains(&next) {
            break;
        }
        t = next;
        jet = imm.jet(&t, 2)?;
        alpha = alpha_coefficients(&jet);
    }
    let r = norm(&alpha);
    Ok((t, r, r < NEWTON_TOL))
}

/// Coarse scan for local minima of `f` below [`ZERO_CANDIDATE_F`], Newton
/// refinement, de-duplication within one grid cell, then winding indices.
pub fn find_legendrian_points(imm: &dyn Immersion, res: &[usize], tol: f64) -> Result<LegendrianScan> {
    require_surface(imm)?;
    let domain = imm.domain();
    let grid = Grid::new(domain, res);
    let f: Vec<f64> = grid
        .points
        .par_iter()
        .map(|t| {
            let jet = imm.jet(t, 1)?;
            let g = induced_metric(&jet)?;
            Ok(g.inverse_norm_squared(&alpha_coefficients(&jet)))
        })
        .collect::<Result<_>>()?;
    if f.iter().all(|&v| v < tol) {
        return Ok(LegendrianScan::EverywhereLegendrian);
    }
    let candidates: Vec<usize> = (0..grid.len())
        .filter(|&c| f[c] < ZERO_CANDIDATE_F && grid.neighbours(domain, c).iter().all(|&nb| f[c] <= f[nb]))
        .collect();

    let refined: Vec<(Vec<f64>, f64, bool)> = candidates
        .par_iter()
        .map(|&c| {
            let (t, r, ok) = refine_zero(imm, &grid.points[c])?;
            Ok(if ok { (domain.reduce(&t), r, true) } else { (grid.points[c].clone(), r, false) })
        })
        .collect::<Result<_>>()?;

    let cell = domain.cell_size(res);
    let min_cell = cell.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_cell = cell.iter().cloned().fold(0.0, f64::max);
    let mut kept: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    // refined points first so they win over unrefined duplicates
    let mut ordered = refined;
    ordered.sort_by_key(|p| !p.2);
    for p in ordered {
        if kept.iter().all(|k| domain.distance(&k.0, &p.0) >= max_cell) {
            kept.push(p);
        }
    }

    let mut points = Vec::with_capacity(kept.len());
    for (t, residual, ok) in kept {
        let centre = [t[0], t[1]];
        let k = match point_index(imm, centre, 0.5 * min_cell, DEFAULT_WINDING_SAMPLES) {
            Ok(k) => k,
            Err(HsError::AmbiguousWinding { .. }) => point_index(imm, centre, 0.25 * min_cell, DEFAULT_WINDING_SAMPLES)?,
            Err(e) => return Err(e),
        };
        points.push(LegendrianPoint {
            t,
            multiplicity: k,
            index_prju: -k,
            residual_at_zero: residual,
            refined: ok,
        });
    }
    points.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(std::cmp::Ordering::Equal));
    Ok(LegendrianScan::Points(points))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub genus: u32,
    pub euler_characteristic: i64,
    pub everywhere_legendrian: bool,
    pub point_count: usize,
    pub sum_multiplicity: i64,
    pub sum_index: i64,
    /// `2g − 2`
    pub expected_count: i64,
    pub pass: bool,
}

impl AuditRecord {
    pub fn summary(&self) -> String {
        format!(
            "{} Legendrian points, χ = {}, audit {}",
            if self.everywhere_legendrian {
                "everywhere Legendrian:".to_string()
            } else {
                self.sum_multiplicity.to_string()
            },
            self.euler_characteristic,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Checks `Σ index(Pr Ju) = 2 − 2g` and `Σ k = 2g − 2`; the everywhere-
/// Legendrian sentinel passes vacuously.
pub fn poincare_hopf_audit(scan: &LegendrianScan, genus: u32) -> AuditRecord {
    let chi = 2 - 2 * genus as i64;
    let everywhere = matches!(scan, LegendrianScan::EverywhereLegendrian);
    let pts = scan.points();
    let sum_multiplicity: i64 = pts.iter().map(|p| p.multiplicity as i64).sum();
    let sum_index: i64 = pts.iter().map(|p| p.index_prju as i64).sum();
    AuditRecord {
        genus,
        euler_characteristic: chi,
        everywhere_legendrian: everywhere,
        point_count: pts.len(),
        sum_multiplicity,
        sum_index,
        expected_count: -chi,
        pass: everywhere || (sum_index == chi && sum_multiplicity == -chi),
    }
}
