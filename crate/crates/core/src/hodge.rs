//! The 1-form `α = Σ ⟨Ju, u_i⟩ dt^i`, its exterior derivative and
//! codifferential, and the Lagrangian angle `θ` of a Legendrian link together
//! with the closed 1-form `β = ⟨JH, ·⟩`.
//!
//! Angle convention: `θ = σ · arg det_C [u, e_1, …, e_{n−1}]`, columns in that
//! order, `e_i` from real Gram–Schmidt on `u_1, …, u_{n−1}`, and `σ = −1` so
//! that `dθ = ⟨JH, ·⟩`.

use crate::ambient::AmbientVector;
use crate::error::{HsError, Result};
use crate::geometry::{induced_metric, mean_curvature, mean_curvature_with};
use crate::immersion::{Domain, Grid, Immersion, Jet};
use crate::isotropy::{alpha_coefficients, isotropy_residual, stationarity_s1};
use crate::linalg;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

pub const ANGLE_SIGN: f64 = -1.0;
pub const DEFAULT_PERIOD_NODES: usize = 1024;
pub const ANGLE_FD_STEP: f64 = 1e-5;
/// Largest per-step change of `θ` accepted without refinement.
const MAX_UNWRAP_JUMP: f64 = PI / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OneFormSample {
    pub t: Vec<f64>,
    pub coeffs: Vec<f64>,
}

pub fn alpha_form(jet: &Jet) -> OneFormSample {
    OneFormSample {
        t: jet.t.clone(),
        coeffs: alpha_coefficients(jet),
    }
}

/// `∂_j α_i = ⟨Ju_j, u_i⟩ + ⟨Ju, u_ij⟩`, row-major `m×m` with row `i`.
fn alpha_derivatives(jet: &Jet) -> Vec<f64> {
    let m = jet.dim();
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            d[i * m + j] = jet.d1(j).j_dot(jet.d1(i)) + jet.u.j_dot(jet.d2(i, j));
        }
    }
    d
}

/// `max_{i<j} |∂_j α_i − ∂_i α_j|`.
pub fn d_alpha_residual(imm: &dyn Immersion, t: &[f64]) -> Result<f64> {
    let jet = imm.jet(t, 2)?;
    let m = jet.dim();
    let d = alpha_derivatives(&jet);
    let mut worst = 0.0_f64;
    for i in 0..m {
        for j in i + 1..m {
            worst = worst.max((d[i * m + j] - d[j * m + i]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaAlpha {
    /// `−(1/√g) ∂_j(√g g^{ij} α_i)`
    pub coordinate: f64,
    /// `−⟨Ju, Δ_g u⟩`
    pub closed_form: f64,
    pub difference: f64,
}

pub fn delta_alpha(imm: &dyn Immersion, t: &[f64]) -> Result<DeltaAlpha> {
    let jet = imm.jet(t, 2)?;
    let metric = induced_metric(&jet)?;
    let m = jet.dim();
    let alpha = alpha_coefficients(&jet);
    let dalpha = alpha_derivatives(&jet);

    let mut coordinate = 0.0;
    for j in 0..m {
        let mut dg = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                dg[a * m + b] = jet.d2(a, j).dot(jet.d1(b)) + jet.d1(a).dot(jet.d2(b, j));
            }
        }
        // ∂_j log √g = ½ g^{ab} ∂_j g_ab
        let dlog: f64 = 0.5 * (0..m * m).map(|k| metric.ginv[k] * dg[k]).sum::<f64>();
        for i in 0..m {
            // ∂_j g^{ij} = −g^{ia} ∂_j g_ab g^{bj}
            let mut dginv = 0.0;
            for a in 0..m {
                for b in 0..m {
                    dginv -= metric.ginv(i, a) * dg[a * m + b] * metric.ginv(b, j);
                }
            }
            coordinate += dlog * metric.ginv(i, j) * alpha[i] + dginv * alpha[i] + metric.ginv(i, j) * dalpha[i * m + j];
        }
    }
    let coordinate = -coordinate;
    let h = mean_curvature_with(&jet, &metric);
    let closed_form = -jet.u.j_dot(&h);
    Ok(DeltaAlpha {
        coordinate,
        closed_form,
        difference: (coordinate - closed_form).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleSample {
    pub t: Vec<f64>,
    /// In `(−π, π]`.
    pub theta: f64,
    /// Number of 2π turns accumulated along the scan path.
    pub branch: i64,
}

impl AngleSample {
    pub fn unwrapped(&self) -> f64 {
        self.theta + 2.0 * PI * self.branch as f64
    }
}

fn gram_schmidt(vectors: &[AmbientVector]) -> Option<Vec<AmbientVector>> {
    let mut out: Vec<AmbientVector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for e in &out {
            let c = w.dot(e);
            w.axpy(-c, e);
        }
        let norm = w.norm();
        if norm < 1e-12 * v.norm().max(1.0) {
            return None;
        }
        out.push(w.scaled(1.0 / norm));
    }
    Some(out)
}

/// Lagrangian angle at a Legendrian point; `branch` is 0.
pub fn lagrangian_angle(jet: &Jet, tol: f64) -> Result<AngleSample> {
    let n = jet.complex_dim();
    let m = jet.dim();
    if m + 1 != n {
        return Err(HsError::DimensionMismatch { expected: n - 1, actual: m });
    }
    let metric = induced_metric(jet)?;
    let legendrian = metric.inverse_norm_squared(&alpha_coefficients(jet)).sqrt();
    let residual = legendrian.max(isotropy_residual(jet));
    if !(residual < tol) {
        return Err(HsError::NotLegendrian {
            point: jet.t.clone(),
            residual,
        });
    }
    let frame = gram_schmidt(jet.first()).ok_or_else(|| HsError::DegenerateMetric {
        dim: m,
        point: jet.t.clone(),
    })?;
    let mut columns = vec![jet.u.to_complex()];
    columns.extend(frame.iter().map(AmbientVector::to_complex));
    let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
    for (c, col) in columns.iter().enumerate() {
        for r in 0..n {
            mat[r * n + c] = col[r];
        }
    }
    let det = linalg::complex_det(&mat, n);
    let mut theta = ANGLE_SIGN * det.arg();
    if theta <= -PI {
        theta += 2.0 * PI;
    }
    Ok(AngleSample {
        t: jet.t.clone(),
        theta,
        branch: 0,
    })
}

fn angle_at(imm: &dyn Immersion, t: &[f64], tol: f64) -> Result<f64> {
    Ok(lagrangian_angle(&imm.jet(t, 1)?, tol)?.theta)
}

fn wrap(d: f64) -> f64 {
    d - 2.0 * PI * (d / (2.0 * PI)).round()
}

/// Branch-corrected value of `next` continuing from the unwrapped `prev`;
/// a jump above `π/2` is re-checked through the midpoint `mid`.
fn continue_branch(prev: f64, next: f64, mid: impl FnOnce() -> Result<f64>, at: &[f64]) -> Result<f64> {
    let d = wrap(next - prev);
    if d.abs() <= MAX_UNWRAP_JUMP {
        return Ok(prev + d);
    }
    let m = mid()?;
    let d1 = wrap(m - prev);
    let d2 = wrap(next - m);
    if d1.abs() > MAX_UNWRAP_JUMP || d2.abs() > MAX_UNWRAP_JUMP {
        return Err(HsError::BranchUnwrap { point: at.to_vec() });
    }
    Ok(prev + d1 + d2)
}

/// `θ` over a 2-dimensional grid, unwrapped down the first column and then
/// along each row.
pub fn theta_field(imm: &dyn Immersion, res: &[usize], tol: f64) -> Result<Vec<AngleSample>> {
    if res.len() != 2 {
        return Err(HsError::DimensionMismatch { expected: 2, actual: res.len() });
    }
    let grid = Grid::new(imm.domain(), res);
    let raw: Vec<f64> = grid.points.par_iter().map(|t| angle_at(imm, t, tol)).collect::<Result<_>>()?;
    let midpoint = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect() };

    let mut first_col = vec![raw[0]];
    for i in 1..res[0] {
        let (p, q) = (grid.flatten(&[i - 1, 0]), grid.flatten(&[i, 0]));
        let next = continue_branch(
            first_col[i - 1],
            raw[q],
            || angle_at(imm, &midpoint(&grid.points[p], &grid.points[q]), tol),
            &grid.points[q],
        )?;
        first_col.push(next);
    }
    let rows: Vec<Vec<f64>> = (0..res[0])
        .into_par_iter()
        .map(|i| {
            let mut row = vec![first_col[i]];
            for j in 1..res[1] {
                let (p, q) = (grid.flatten(&[i, j - 1]), grid.flatten(&[i, j]));
                let next = continue_branch(
                    row[j - 1],
                    raw[q],
                    || angle_at(imm, &midpoint(&grid.points[p], &grid.points[q]), tol),
                    &grid.points[q],
                )?;
                row.push(next);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    Ok(grid
        .points
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let idx = grid.unflatten(k);
            let unwrapped = rows[idx[0]][idx[1]];
            AngleSample {
                t: t.clone(),
                theta: raw[k],
                branch: ((unwrapped - raw[k]) / (2.0 * PI)).round() as i64,
            }
        })
        .collect())
}

/// `max − min` of the unwrapped angle.
pub fn theta_range(samples: &[AngleSample]) -> f64 {
    let (lo, hi) = samples.iter().map(AngleSample::unwrapped).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if samples.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// `β_i = ⟨JH, u_i⟩`.
pub fn beta_coefficients(jet: &Jet) -> Result<Vec<f64>> {
    let h = mean_curvature(jet)?;
    Ok((0..jet.dim()).map(|i| h.j_dot(jet.d1(i))).collect())
}

/// Central difference of `θ` along axis `i` (step halved on a large jump).
fn theta_partial(imm: &dyn Immersion, t: &[f64], i: usize, tol: f64) -> Result<f64> {
    let mut h = ANGLE_FD_STEP;
    for _ in 0..4 {
        let mut p = t.to_vec();
        p[i] += h;
        let plus = angle_at(imm, &p, tol)?;
        p[i] -= 2.0 * h;
        let minus = angle_at(imm, &p, tol)?;
        let d = wrap(plus - minus);
        if d.abs() <= MAX_UNWRAP_JUMP {
            return Ok(d / (2.0 * h));
        }
        h *= 0.5;
    }
    Err(HsError::BranchUnwrap { point: t.to_vec() })
}

/// `max |∂_i θ − ⟨JH, u_i⟩|` over the grid, `∂_i θ` by central differences.
pub fn angle_gradient_check(imm: &dyn Immersion, res: &[usize], tol: f64) -> Result<f64> {
    let grid = Grid::new(imm.domain(), res);
    let errs: Vec<f64> = grid
        .points
        .par_iter()
        .map(|t| {
            let beta = beta_coefficients(&imm.jet(t, 2)?)?;
            let mut worst = 0.0_f64;
            for (i, b) in beta.iter().enumerate() {
                worst = worst.max((theta_partial(imm, t, i, tol)? - b).abs());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Integral of `β` along each lattice generator from the origin, by the
/// composite trapezoid rule. Non-torus domains have no such cycles.
pub fn beta_periods(imm: &dyn Immersion, nodes: usize) -> Result<Vec<f64>> {
    let Domain::Torus { generators } = imm.domain() else {
        return Ok(Vec::new());
    };
    generators
        .iter()
        .map(|omega| {
            let vals: Vec<f64> = (0..nodes)
                .into_par_iter()
                .map(|k| {
                    let tau = k as f64 / nodes as f64;
                    let t: Vec<f64> = omega.iter().map(|w| tau * w).collect();
                    let beta = beta_coefficients(&imm.jet(&t, 2)?)?;
                    Ok(beta.iter().zip(omega).map(|(b, w)| b * w).sum::<f64>())
                })
                .collect::<Result<_>>()?;
            Ok(vals.iter().sum::<f64>() / nodes as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Harmonicity {
    /// `max |div_L(JH) + ⟨JH, H⟩|`
    pub residual: f64,
    /// Periods of `β` over the lattice generators (empty on the sphere).
    pub periods: Vec<f64>,
}

pub fn theta_harmonicity(imm: &dyn Immersion, res: &[usize], nodes: usize) -> Result<Harmonicity> {
    let grid = Grid::new(imm.domain(), res);
    let vals: Vec<f64> = grid
        .points
        .par_iter()
        .map(|t| {
            let h = mean_curvature(&imm.jet(t, 2)?)?;
            Ok((stationarity_s1(imm, t)? + h.j_dot(&h)).abs())
        })
        .collect::<Result<_>>()?;
    Ok(Harmonicity {
        residual: vals.into_iter().fold(0.0, f64::max),
        periods: beta_periods(imm, nodes)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{clifford_torus, great_sphere, iriyeh_torus, non_isotropic_fixture, s3_torus};
    use crate::immersion::SphereChart;
    use crate::isotropy::isotropy_residual;

    #[test]
    fn alpha_form_values() {
        let t = [0.3, 1.1];
        assert!(alpha_form(&clifford_torus().jet(&t, 1).unwrap()).coeffs.iter().all(|c| c.abs() < 1e-15));
        let s3 = alpha_form(&s3_torus().jet(&t, 1).unwrap()).coeffs;
        assert!((s3[0] - 0.5).abs() < 1e-15 && (s3[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closedness_is_twice_isotropy() {
        let fx = non_isotropic_fixture();
        for t in [[0.5, 0.3], [1.2, 4.0], [2.5, 1.0]] {
            let lhs = d_alpha_residual(&fx, &t).unwrap();
            let rhs = 2.0 * isotropy_residual(&fx.jet(&t, 1).unwrap());
            assert!(rhs > 0.1);
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
        assert!(d_alpha_residual(&clifford_torus(), &[0.2, 0.9]).unwrap() < 1e-14);
    }

    #[test]
    fn codifferential_routes_agree() {
        for imm in [clifford_torus(), s3_torus(), iriyeh_torus()] {
            let d = delta_alpha(&imm, &[0.7, -1.3]).unwrap();
            assert!(d.coordinate.abs() < 1e-12 && d.closed_form.abs() < 1e-12 && d.difference < 1e-12);
        }
        let fx = non_isotropic_fixture();
        let d = delta_alpha(&fx, &[1.0, 0.4]).unwrap();
        assert!(d.difference < 1e-10, "{d:?}");
    }

    #[test]
    fn angle_requires_legendrian() {
        let err = lagrangian_angle(&s3_torus().jet(&[0.0, 0.0], 1).unwrap(), 1e-10);
        assert!(matches!(err, Err(HsError::NotLegendrian { .. })));
    }

    #[test]
    fn iriyeh_angle_gradient_matches_beta() {
        let imm = iriyeh_torus();
        let beta = beta_coefficients(&imm.jet(&[0.4, 0.2], 2).unwrap()).unwrap();
        assert!((beta[0] + 1.0).abs() < 1e-12 && (beta[1] + 1.0).abs() < 1e-12);
        assert!(angle_gradient_check(&imm, &[8, 8], 1e-10).unwrap() < 1e-6);
        let p = beta_periods(&imm, 256).unwrap();
        assert!(p.iter().all(|v| (v + 2.0 * PI).abs() < 1e-10), "{p:?}");
        let field = theta_field(&imm, &[16, 16], 1e-10).unwrap();
        assert!((theta_range(&field) - 2.0 * (2.0 * PI) * 15.0 / 16.0).abs() < 1e-9);
    }

    #[test]
    fn clifford_angle_is_constant() {
        let field = theta_field(&clifford_torus(), &[16, 16], 1e-10).unwrap();
        assert!(theta_range(&field) < 1e-12);
        let h = theta_harmonicity(&clifford_torus(), &[8, 8], 64).unwrap();
        assert!(h.residual < 1e-12 && h.periods.iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn great_sphere_angle_is_real() {
        let imm = great_sphere(SphereChart::LatLong);
        let field = theta_field(&imm, &[8, 8], 1e-10).unwrap();
        for s in &field {
            assert!(s.theta.abs() < 1e-12 || (s.theta.abs() - PI).abs() < 1e-12);
        }
        assert!(theta_range(&field) < 1e-12);
        assert!(beta_periods(&imm, 64).unwrap().is_empty());
    }
}
