//! First- and second-order extrinsic geometry of a jet.
//!
//! Sign convention: `H := Δ_g u`, the normal projection of `g^{ij} u_ij`.
//! For a sphere-valued immersion `⟨H, u⟩ = −m`, so the mean curvature inside
//! the sphere is `H̄ = H + m·u`.

use crate::ambient::AmbientVector;
use crate::error::{HsError, Result};
use crate::immersion::Jet;
use crate::linalg;

/// Induced metric at a point, with inverse, determinant and Cholesky factor.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub m: usize,
    /// `g_ij = ⟨u_i, u_j⟩`, row-major.
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub det: f64,
    chol: Vec<f64>,
}

impl MetricData {
    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.m + j]
    }

    pub fn ginv(&self, i: usize, j: usize) -> f64 {
        self.ginv[i * self.m + j]
    }

    /// `Σ g^{ij} a_i b_j`
    pub fn inverse_form(&self, a: &[f64], b: &[f64]) -> f64 {
        let m = self.m;
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += self.ginv[i * m + j] * a[i] * b[j];
            }
        }
        s
    }

    /// `Σ g^{ij} a_i a_j` as a sum of squares, hence never negative.
    pub fn inverse_norm_squared(&self, a: &[f64]) -> f64 {
        linalg::forward_substitute(&self.chol, self.m, a)
            .iter()
            .map(|y| y * y)
            .sum()
    }

    /// `c^j = Σ_i g^{ij} a_i`
    pub fn raise(&self, a: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|j| (0..m).map(|i| self.ginv[i * m + j] * a[i]).sum())
            .collect()
    }
}

pub fn induced_metric(jet: &Jet) -> Result<MetricData> {
    let m = jet.dim();
    if jet.order() < 1 {
        return Err(HsError::InvalidParams("induced metric needs a first-order jet".into()));
    }
    let mut g = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let v = jet.d1(i).dot(jet.d1(j));
            g[i * m + j] = v;
            g[j * m + i] = v;
        }
    }
    let chol = linalg::cholesky(&g, m).ok_or_else(|| HsError::DegenerateMetric {
        dim: m,
        point: jet.t.clone(),
    })?;
    let det = (0..m).map(|i| chol[i * m + i] * chol[i * m + i]).product();
    let ginv = linalg::cholesky_inverse(&chol, m);
    Ok(MetricData { m, g, ginv, det, chol })
}

/// Removes the tangential part: `X − Σ g^{ab} ⟨X, u_a⟩ u_b`.
pub fn normal_part(jet: &Jet, metric: &MetricData, x: &AmbientVector) -> AmbientVector {
    let m = jet.dim();
    let coeffs: Vec<f64> = (0..m).map(|a| x.dot(jet.d1(a))).collect();
    let raised = metric.raise(&coeffs);
    let mut out = x.clone();
    for (b, c) in raised.iter().enumerate() {
        out.axpy(-c, jet.d1(b));
    }
    out
}

/// `g^{ij} u_ij`
fn trace_hessian(jet: &Jet, metric: &MetricData) -> AmbientVector {
    let m = jet.dim();
    let mut v = AmbientVector::zeros(jet.complex_dim());
    for i in 0..m {
        for j in 0..m {
            v.axpy(metric.ginv(i, j), jet.d2(i, j));
        }
    }
    v
}

fn require_order(jet: &Jet, order: usize) -> Result<()> {
    if jet.order() < order {
        return Err(HsError::InvalidParams(format!(
            "operation needs an order-{order} jet, got order {}",
            jet.order()
        )));
    }
    Ok(())
}

/// Mean curvature vector of the link in `R^{2n}`, `H = Δ_g u`.
pub fn mean_curvature(jet: &Jet) -> Result<AmbientVector> {
    require_order(jet, 2)?;
    let metric = induced_metric(jet)?;
    Ok(mean_curvature_with(jet, &metric))
}

pub fn mean_curvature_with(jet: &Jet, metric: &MetricData) -> AmbientVector {
    normal_part(jet, metric, &trace_hessian(jet, metric))
}

/// Mean curvature vector inside the sphere, `H̄ = H + m·u`.
pub fn sphere_mean_curvature(jet: &Jet) -> Result<AmbientVector> {
    let mut h = mean_curvature(jet)?;
    h.axpy(jet.dim() as f64, &jet.u);
    Ok(h)
}

/// Second fundamental form relative to the sphere: the part of `u_ij`
/// orthogonal to `span{u, u_1, …, u_m}`. Returned row-major, `m×m`.
pub fn second_fundamental_form(jet: &Jet) -> Result<Vec<AmbientVector>> {
    require_order(jet, 2)?;
    let metric = induced_metric(jet)?;
    let m = jet.dim();
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut a = normal_part(jet, &metric, jet.d2(i, j));
            let along_u = a.dot(&jet.u);
            a.axpy(-along_u, &jet.u);
            out.push(a);
        }
    }
    Ok(out)
}

/// `g^{ij} A_ij`
pub fn trace_second_fundamental_form(jet: &Jet, a: &[AmbientVector]) -> Result<AmbientVector> {
    let metric = induced_metric(jet)?;
    let m = jet.dim();
    let mut t = AmbientVector::zeros(jet.complex_dim());
    for i in 0..m {
        for j in 0..m {
            t.axpy(metric.ginv(i, j), &a[i * m + j]);
        }
    }
    Ok(t)
}

/// `H` together with its coordinate derivatives `∂_j H`, expanded by the
/// chain rule through `g` and `g^{-1}`. Needs an order-3 jet.
pub fn mean_curvature_derivatives(jet: &Jet, metric: &MetricData) -> Result<(AmbientVector, Vec<AmbientVector>)> {
    require_order(jet, 3)?;
    let m = jet.dim();
    let n = jet.complex_dim();
    let v = trace_hessian(jet, metric);
    let v_dot_u: Vec<f64> = (0..m).map(|a| v.dot(jet.d1(a))).collect();

    let mut h = v.clone();
    for a in 0..m {
        for b in 0..m {
            h.axpy(-metric.ginv(a, b) * v_dot_u[a], jet.d1(b));
        }
    }

    let mut dh = Vec::with_capacity(m);
    for j in 0..m {
        // ∂_j g_ab = ⟨u_aj, u_b⟩ + ⟨u_a, u_bj⟩
        let mut dg = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                dg[a * m + b] = jet.d2(a, j).dot(jet.d1(b)) + jet.d1(a).dot(jet.d2(b, j));
            }
        }
        // ∂_j g^{kl} = −g^{ka} ∂_j g_ab g^{bl}
        let mut dginv = vec![0.0; m * m];
        for k in 0..m {
            for l in 0..m {
                let mut s = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        s += metric.ginv(k, a) * dg[a * m + b] * metric.ginv(b, l);
                    }
                }
                dginv[k * m + l] = -s;
            }
        }
        let mut dv = AmbientVector::zeros(n);
        for k in 0..m {
            for l in 0..m {
                dv.axpy(dginv[k * m + l], jet.d2(k, l));
                dv.axpy(metric.ginv(k, l), jet.d3(k, l, j));
            }
        }
        let mut dhj = dv.clone();
        for a in 0..m {
            let d_coeff = dv.dot(jet.d1(a)) + v.dot(jet.d2(a, j));
            for b in 0..m {
                dhj.axpy(-dginv[a * m + b] * v_dot_u[a], jet.d1(b));
                dhj.axpy(-metric.ginv(a, b) * d_coeff, jet.d1(b));
                dhj.axpy(-metric.ginv(a, b) * v_dot_u[a], jet.d2(b, j));
            }
        }
        dh.push(dhj);
    }
    Ok((h, dh))
}

/// Divergence along the link of an ambient vector field `V` given its
/// coordinate derivatives: `Σ g^{ij} ⟨∂_j V, u_i⟩`.
pub fn ambient_divergence(jet: &Jet, metric: &MetricData, dv: &[AmbientVector]) -> f64 {
    let m = jet.dim();
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            s += metric.ginv(i, j) * dv[j].dot(jet.d1(i));
        }
    }
    s
}
