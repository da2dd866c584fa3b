//! Closed-form characterisation of homogeneous tori
//! `u_k = r_k exp(i(a_k s + b_k t))` in `S⁵ ⊂ C³`.
//!
//! Every member is isotropic with a Hamiltonian-stationary cone. With the
//! constant metric `g = W diag(q) Wᵀ` and `λ_k = (a_k, b_k) g⁻¹ (a_k, b_k)ᵀ`,
//! one has `H_k = −λ_k u_k`, `α = (Σ a_k q_k, Σ b_k q_k)` and
//! `|H̄|² = Σ (2 − λ_k)² q_k`.

use crate::catalog::HomogeneousTorus;
use crate::error::{HsError, Result};
use crate::immersion::Grid;
use crate::isotropy::scan_link;
use crate::linalg;
use serde::{Deserialize, Serialize};

/// Tolerance on `sqrt(f)` and `|H̄|` for the classification booleans.
pub const CLASSIFY_TOL: f64 = 1e-10;
/// Grid used to cross-check closed forms against the generic operations.
pub const CROSS_CHECK_RES: [usize; 2] = [16, 16];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousTorusParams {
    /// Squared radii `r_k²`, summing to 1.
    pub q: [f64; 3],
    pub a: [i64; 3],
    pub b: [i64; 3],
}

impl HomogeneousTorusParams {
    pub fn clifford() -> Self {
        HomogeneousTorusParams {
            q: [1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0],
            a: [1, 0, -1],
            b: [0, 1, -1],
        }
    }

    pub fn s3_torus() -> Self {
        HomogeneousTorusParams {
            q: [0.5, 0.5, 0.0],
            a: [1, 0, 0],
            b: [0, 1, 0],
        }
    }

    /// Legendrian, Hamiltonian stationary, not minimal (`λ = (5, 2, 1)`).
    pub fn iriyeh() -> Self {
        HomogeneousTorusParams {
            q: [1.0 / 6.0, 1.0 / 3.0, 0.5],
            a: [2, -1, 0],
            b: [1, 1, -1],
        }
    }

    pub fn weights_f64(&self) -> ([f64; 3], [f64; 3]) {
        (self.a.map(|x| x as f64), self.b.map(|x| x as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.iter().any(|x| !(*x >= 0.0)) {
            return Err(HsError::InvalidParams("q must be nonnegative".into()));
        }
        let total: f64 = self.q.iter().sum();
        if (total - 1.0).abs() > 1e-14 {
            return Err(HsError::InvalidParams(format!("q sums to {total}, not 1")));
        }
        let (a, b) = self.weights_f64();
        if !linalg::is_well_conditioned_spd(&flat_metric(&self.q, &a, &b), 2) {
            return Err(HsError::InvalidParams(
                "weights [a; b] must have rank 2 on the support of q".into(),
            ));
        }
        Ok(())
    }

    /// Simultaneous permutation of the three complex coordinates.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        HomogeneousTorusParams {
            q: perm.map(|k| self.q[k]),
            a: perm.map(|k| self.a[k]),
            b: perm.map(|k| self.b[k]),
        }
    }
}

pub fn flat_metric(q: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> Vec<f64> {
    let dot = |x: &[f64; 3], y: &[f64; 3]| (0..3).map(|k| x[k] * y[k] * q[k]).sum::<f64>();
    let gst = dot(a, b);
    vec![dot(a, a), gst, gst, dot(b, b)]
}

/// Closed-form invariants of a (possibly real-weighted) homogeneous torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    /// `(Σ a_k q_k, Σ b_k q_k)`
    pub alpha: [f64; 2],
    pub lambda: [f64; 3],
    pub f_value: f64,
    pub hbar_norm2: f64,
}

pub fn closed_form(q: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> Result<ClosedForm> {
    let g = flat_metric(q, a, b);
    let l = linalg::cholesky(&g, 2).ok_or(HsError::DegenerateMetric { dim: 2, point: vec![] })?;
    let ginv = linalg::cholesky_inverse(&l, 2);
    let alpha = [
        (0..3).map(|k| a[k] * q[k]).sum::<f64>(),
        (0..3).map(|k| b[k] * q[k]).sum::<f64>(),
    ];
    let lambda = [0, 1, 2].map(|k| ginv[0] * a[k] * a[k] + 2.0 * ginv[1] * a[k] * b[k] + ginv[3] * b[k] * b[k]);
    let f_value = linalg::forward_substitute(&l, 2, &alpha).iter().map(|y| y * y).sum();
    let hbar_norm2 = (0..3).map(|k| (2.0 - lambda[k]).powi(2) * q[k]).sum();
    Ok(ClosedForm {
        alpha,
        lambda,
        f_value,
        hbar_norm2,
    })
}

/// Largest discrepancies between the closed forms and grid sampling of the
/// generic operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCheck {
    pub max_f_diff: f64,
    pub max_hbar_norm2_diff: f64,
    pub max_isotropy: f64,
    pub max_abs_s1: f64,
    pub max_abs_s2: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyClassification {
    pub isotropic: bool,
    pub legendrian: bool,
    pub minimal: bool,
    pub f_value: f64,
    pub hbar_norm2: f64,
    /// `λ_k`; components with `q_k = 0` are inactive and carry no weight in `hbar_norm2`.
    pub lambda: [f64; 3],
    pub alpha: [f64; 2],
    pub cross_check: CrossCheck,
}

pub fn classify_family_member(p: &HomogeneousTorusParams) -> Result<FamilyClassification> {
    p.validate()?;
    let (a, b) = p.weights_f64();
    let cf = closed_form(&p.q, &a, &b)?;

    let torus = HomogeneousTorus::from_params(p)?;
    let grid = Grid::new(&crate::immersion::Domain::standard_torus(2), &CROSS_CHECK_RES);
    let samples = scan_link(&torus, &grid)?;
    let mut cc = CrossCheck {
        max_f_diff: 0.0,
        max_hbar_norm2_diff: 0.0,
        max_isotropy: 0.0,
        max_abs_s1: 0.0,
        max_abs_s2: 0.0,
        consistent: false,
    };
    for s in &samples {
        cc.max_f_diff = cc.max_f_diff.max((s.f - cf.f_value).abs());
        cc.max_hbar_norm2_diff = cc.max_hbar_norm2_diff.max((s.hbar_norm * s.hbar_norm - cf.hbar_norm2).abs());
        cc.max_isotropy = cc.max_isotropy.max(s.isotropy);
        cc.max_abs_s1 = cc.max_abs_s1.max(s.s1.abs());
        cc.max_abs_s2 = cc.max_abs_s2.max(s.s2.abs());
    }
    // the |H̄|² comparison scales with λ², which is large for big weights
    let scale = 1.0 + cf.lambda.iter().map(|l| l * l).fold(0.0, f64::max);
    cc.consistent = cc.max_f_diff <= 1e-10
        && cc.max_hbar_norm2_diff <= 1e-10 * scale
        && cc.max_isotropy <= 1e-10
        && cc.max_abs_s1 <= 1e-10 * scale
        && cc.max_abs_s2 <= 1e-10 * scale;

    Ok(FamilyClassification {
        isotropic: true,
        legendrian: cf.f_value.sqrt() <= CLASSIFY_TOL,
        minimal: cf.hbar_norm2.sqrt() <= CLASSIFY_TOL,
        f_value: cf.f_value,
        hbar_norm2: cf.hbar_norm2,
        lambda: cf.lambda,
        alpha: cf.alpha,
        cross_check: cc,
    })
}
