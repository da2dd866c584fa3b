//! Isotropy and Legendrian residuals, the deviation `f = |Pr Ju|²`, and the
//! two residuals into which the Hamiltonian-stationary equation of the cone
//! splits: `S1 = div_L(JH)` and `S2 = ⟨JH, u⟩`.

use crate::ambient::AmbientVector;
use crate::error::Result;
use crate::flags::GatedFlag;
use crate::geometry::{
    ambient_divergence, induced_metric, mean_curvature, mean_curvature_derivatives, mean_curvature_with,
    second_fundamental_form, trace_second_fundamental_form, MetricData,
};
use crate::immersion::{Grid, Immersion, Jet};
use rayon::prelude::*;
use serde::Serialize;

/// Step for the central-difference fallback of `S1`.
pub const S1_FD_STEP: f64 = 1e-4;

/// The split residuals at one point. On a cone `r·u`, the stationarity
/// expression is `−S2/r² + S1/r³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityResidual {
    pub s1: f64,
    pub s2: f64,
}

impl StationarityResidual {
    pub fn cone_residual(&self, r: f64) -> f64 {
        assert!(r > 0.0, "cone radius must be positive");
        -self.s2 / (r * r) + self.s1 / (r * r * r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSample {
    pub t: Vec<f64>,
    pub f: f64,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LegendrianResidual {
    /// `α_i = ⟨Ju, u_i⟩`
    pub alpha: Vec<f64>,
    /// `sqrt(Σ g^{ij} α_i α_j)`
    pub norm: f64,
}

/// `max_{i<j} |⟨Ju_i, u_j⟩|`; zero for curves.
pub fn isotropy_residual(jet: &Jet) -> f64 {
    let m = jet.dim();
    let mut worst = 0.0_f64;
    for i in 0..m {
        for j in i + 1..m {
            worst = worst.max(jet.d1(i).j_dot(jet.d1(j)).abs());
        }
    }
    worst
}

pub fn alpha_coefficients(jet: &Jet) -> Vec<f64> {
    (0..jet.dim()).map(|i| jet.u.j_dot(jet.d1(i))).collect()
}

pub fn legendrian_residual(jet: &Jet) -> Result<LegendrianResidual> {
    let metric = induced_metric(jet)?;
    let alpha = alpha_coefficients(jet);
    let norm = metric.inverse_norm_squared(&alpha).sqrt();
    Ok(LegendrianResidual { alpha, norm })
}

/// `f = Σ g^{ij} α_i α_j ∈ [0, 1]`.
pub fn isotropy_deviation_f(jet: &Jet) -> Result<f64> {
    let metric = induced_metric(jet)?;
    Ok(metric.inverse_norm_squared(&alpha_coefficients(jet)))
}

pub fn deviation_sample(jet: &Jet) -> Result<DeviationSample> {
    let metric = induced_metric(jet)?;
    let alpha = alpha_coefficients(jet);
    Ok(DeviationSample {
        t: jet.t.clone(),
        f: metric.inverse_norm_squared(&alpha),
        alpha,
    })
}

/// Coefficients `c^j` of `Pr Ju = Σ c^j u_j`.
pub fn project_ju(jet: &Jet) -> Result<Vec<f64>> {
    let metric = induced_metric(jet)?;
    Ok(metric.raise(&alpha_coefficients(jet)))
}

/// `⟨JH, u⟩ = −⟨Δ_g u, Ju⟩`
pub fn stationarity_s2(jet: &Jet) -> Result<f64> {
    Ok(mean_curvature(jet)?.j_dot(&jet.u))
}

fn s1_from_derivatives(jet: &Jet, metric: &MetricData, dh: &[AmbientVector]) -> f64 {
    let djh: Vec<AmbientVector> = dh.iter().map(AmbientVector::j).collect();
    ambient_divergence(jet, metric, &djh)
}

/// `div_L(JH) = Σ g^{ij} ⟨∂_j(JH), u_i⟩`. Uses exact third derivatives when
/// the immersion has them, otherwise central differences of `H`.
pub fn stationarity_s1(imm: &dyn Immersion, t: &[f64]) -> Result<f64> {
    if imm.max_order() < 3 {
        return stationarity_s1_fd(imm, t, S1_FD_STEP);
    }
    let jet = imm.jet(t, 3)?;
    let metric = induced_metric(&jet)?;
    let (_, dh) = mean_curvature_derivatives(&jet, &metric)?;
    Ok(s1_from_derivatives(&jet, &metric, &dh))
}

/// `S1` with `∂_j H` replaced by a central difference of step `h`.
pub fn stationarity_s1_fd(imm: &dyn Immersion, t: &[f64], h: f64) -> Result<f64> {
    let jet = imm.jet(t, 1)?;
    let metric = induced_metric(&jet)?;
    let mut dh = Vec::with_capacity(t.len());
    for j in 0..t.len() {
        let mut p = t.to_vec();
        p[j] += h;
        let hp = mean_curvature(&imm.jet(&p, 2)?)?;
        p[j] -= 2.0 * h;
        let hm = mean_curvature(&imm.jet(&p, 2)?)?;
        dh.push((&hp - &hm).scaled(0.5 / h));
    }
    Ok(s1_from_derivatives(&jet, &metric, &dh))
}

/// `div_L(Ju) = Σ g^{ij} ⟨J u_j, u_i⟩`, which vanishes for every immersion.
pub fn div_ju_identity(imm: &dyn Immersion, t: &[f64]) -> Result<f64> {
    let jet = imm.jet(t, 1)?;
    let metric = induced_metric(&jet)?;
    let dju: Vec<AmbientVector> = jet.first().iter().map(AmbientVector::j).collect();
    Ok(ambient_divergence(&jet, &metric, &dju))
}

pub fn stationarity_residual(imm: &dyn Immersion, t: &[f64]) -> Result<StationarityResidual> {
    let s1 = stationarity_s1(imm, t)?;
    let s2 = stationarity_s2(&imm.jet(t, 2)?)?;
    Ok(StationarityResidual { s1, s2 })
}

/// Every pointwise quantity of the link at one parameter point.
#[derive(Debug, Clone, Serialize)]
pub struct LinkSample {
    pub t: Vec<f64>,
    pub f: f64,
    pub alpha: Vec<f64>,
    pub legendrian_norm: f64,
    pub isotropy: f64,
    pub s1: f64,
    pub s2: f64,
    pub div_ju: f64,
    /// `|H̄|`
    pub hbar_norm: f64,
    /// `|⟨H̄, u⟩|`
    pub hbar_dot_u: f64,
    /// `|⟨JH, H⟩|`
    pub jh_dot_h: f64,
    /// `max |g^{ij} A_ij − H̄|`
    pub trace_a_defect: f64,
    /// `||u| − 1|`
    pub unit_defect: f64,
    /// `max_i |⟨u_i, u⟩|`
    pub tangency_defect: f64,
}

pub fn sample_link(imm: &dyn Immersion, t: &[f64]) -> Result<LinkSample> {
    let order = imm.max_order().min(3);
    let jet = imm.jet(t, order)?;
    let metric = induced_metric(&jet)?;
    let alpha = alpha_coefficients(&jet);
    let f = metric.inverse_norm_squared(&alpha);
    let (h, s1) = if order >= 3 {
        let (h, dh) = mean_curvature_derivatives(&jet, &metric)?;
        let s1 = s1_from_derivatives(&jet, &metric, &dh);
        (h, s1)
    } else {
        (mean_curvature_with(&jet, &metric), stationarity_s1_fd(imm, t, S1_FD_STEP)?)
    };
    let m = jet.dim();
    let mut hbar = h.clone();
    hbar.axpy(m as f64, &jet.u);
    let a = second_fundamental_form(&jet)?;
    let trace_a = trace_second_fundamental_form(&jet, &a)?;
    let dju: Vec<AmbientVector> = jet.first().iter().map(AmbientVector::j).collect();
    Ok(LinkSample {
        t: t.to_vec(),
        f,
        legendrian_norm: f.sqrt(),
        alpha,
        isotropy: isotropy_residual(&jet),
        s1,
        s2: h.j_dot(&jet.u),
        div_ju: ambient_divergence(&jet, &metric, &dju),
        hbar_norm: hbar.norm(),
        hbar_dot_u: hbar.dot(&jet.u).abs(),
        jh_dot_h: h.j_dot(&h).abs(),
        trace_a_defect: (&trace_a - &hbar).max_abs(),
        unit_defect: (jet.u.norm() - 1.0).abs(),
        tangency_defect: (0..m).map(|i| jet.d1(i).dot(&jet.u).abs()).fold(0.0, f64::max),
    })
}

/// Samples the link over a grid in parallel; output order follows the grid.
pub fn scan_link(imm: &dyn Immersion, grid: &Grid) -> Result<Vec<LinkSample>> {
    grid.points.par_iter().map(|t| sample_link(imm, t)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeClassification {
    pub max_abs_s1: f64,
    pub max_abs_s2: f64,
    pub samples: usize,
    pub hamiltonian_stationary_cone: GatedFlag,
}

/// Max `|S1|`, `|S2|` over the grid and the resulting stationarity flag.
pub fn hs_cone_classify(imm: &dyn Immersion, res: &[usize], tol: f64) -> Result<ConeClassification> {
    let grid = Grid::new(imm.domain(), res);
    let residuals: Vec<StationarityResidual> = grid
        .points
        .par_iter()
        .map(|t| stationarity_residual(imm, t))
        .collect::<Result<_>>()?;
    let max_abs_s1 = residuals.iter().map(|r| r.s1.abs()).fold(0.0, f64::max);
    let max_abs_s2 = residuals.iter().map(|r| r.s2.abs()).fold(0.0, f64::max);
    Ok(ConeClassification {
        max_abs_s1,
        max_abs_s2,
        samples: residuals.len(),
        hamiltonian_stationary_cone: GatedFlag::new(max_abs_s1.max(max_abs_s2), tol),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{clifford_torus, great_sphere, iriyeh_torus, non_isotropic_fixture, s3_torus, HomogeneousTorus};
    use crate::family::HomogeneousTorusParams;
    use crate::immersion::{finite_difference_of, SphereChart};
    use proptest::prelude::*;

    #[test]
    fn catalog_alpha_values() {
        let t = [0.9, -0.4];
        let cl = legendrian_residual(&clifford_torus().jet(&t, 1).unwrap()).unwrap();
        assert!(cl.alpha.iter().all(|a| a.abs() < 1e-15) && cl.norm < 1e-15);
        let s3 = legendrian_residual(&s3_torus().jet(&t, 1).unwrap()).unwrap();
        assert!((s3.alpha[0] - 0.5).abs() < 1e-15 && (s3.alpha[1] - 0.5).abs() < 1e-15);
        assert!((s3.norm - 1.0).abs() < 1e-15);
        let gs = legendrian_residual(&great_sphere(SphereChart::LatLong).jet(&t, 1).unwrap()).unwrap();
        assert_eq!(gs.alpha, vec![0.0, 0.0]);
    }

    #[test]
    fn s3_torus_projection_is_the_coordinate_sum() {
        let jet = s3_torus().jet(&[1.3, 0.2], 1).unwrap();
        let c = project_ju(&jet).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - 1.0).abs() < 1e-14);
        assert!((isotropy_deviation_f(&jet).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(project_ju(&clifford_torus().jet(&[0.0, 0.0], 1).unwrap()).unwrap().len(), 2);
    }

    #[test]
    fn curves_are_vacuously_isotropic() {
        let circle = HomogeneousTorus::new("circle", vec![0.5, 0.5], vec![vec![1.0, 2.0]]).unwrap();
        assert_eq!(isotropy_residual(&circle.jet(&[0.3], 1).unwrap()), 0.0);
    }

    #[test]
    fn stationarity_on_catalog() {
        let sphere = great_sphere(SphereChart::LatLong);
        let imms: [&dyn Immersion; 4] = [&clifford_torus(), &s3_torus(), &iriyeh_torus(), &sphere];
        for imm in imms {
            for t in [[0.1, 0.2], [1.0, -0.7], [-1.2, 3.0]] {
                let r = stationarity_residual(imm, &t).unwrap();
                assert!(r.s1.abs() < 1e-12 && r.s2.abs() < 1e-12, "{}: {r:?}", imm.name());
                assert!(div_ju_identity(imm, &t).unwrap().abs() < 1e-13);
                let fd = stationarity_s1_fd(imm, &t, S1_FD_STEP).unwrap();
                assert!((fd - r.s1).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn s1_falls_back_to_differences_without_third_derivatives() {
        let sphere = great_sphere(SphereChart::LatLong);
        let fd = finite_difference_of(&sphere);
        let s1 = stationarity_s1(&fd, &[0.3, 0.4]).unwrap();
        // nested differences of an order-2 rule amplify rounding to ~1e-4
        assert!(s1.abs() < 1e-3, "{s1}");
    }

    #[test]
    fn non_isotropic_fixture_is_not_stationary_in_general() {
        let fx = non_isotropic_fixture();
        let jet = fx.jet(&[1.0, 0.5], 2).unwrap();
        let expected = 1.0f64.sin() * 1.0f64.cos();
        assert!((isotropy_residual(&jet) - expected.abs()).abs() < 1e-14);
        assert!(div_ju_identity(&fx, &[1.0, 0.5]).unwrap().abs() < 1e-14);
    }

    #[test]
    fn cone_residual_assembly() {
        let r = StationarityResidual { s1: 0.3, s2: -1.7 };
        for radius in [0.5, 1.0, 2.0] {
            let direct = 1.7 / (radius * radius) + 0.3 / (radius * radius * radius);
            assert!((r.cone_residual(radius) - direct).abs() <= 1e-14);
        }
    }

    #[test]
    fn clifford_grid_classification() {
        let c = hs_cone_classify(&clifford_torus(), &[32, 32], 1e-10).unwrap();
        assert!(c.hamiltonian_stationary_cone.value.is_true());
        assert_eq!(c.samples, 1024);
    }

    fn weight() -> impl Strategy<Value = i64> {
        -3i64..=3
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn homogeneous_tori_are_isotropic_and_stationary(
            x in 0.05f64..1.0, y in 0.05f64..1.0, z in 0.05f64..1.0,
            a in proptest::array::uniform3(weight()), b in proptest::array::uniform3(weight()),
            s in -3.0f64..3.0, t in -3.0f64..3.0,
        ) {
            let total = x + y + z;
            let mut q = [x / total, y / total, z / total];
            q[2] = 1.0 - q[0] - q[1];
            let p = HomogeneousTorusParams { q, a, b };
            prop_assume!(p.validate().is_ok());
            let torus = HomogeneousTorus::from_params(&p).unwrap();
            let jet = torus.jet(&[s, t], 3).unwrap();
            let f = isotropy_deviation_f(&jet).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
            prop_assert!(isotropy_residual(&jet) < 1e-10);
            let r = stationarity_residual(&torus, &[s, t]).unwrap();
            prop_assert!(r.s1.abs() < 1e-9 && r.s2.abs() < 1e-10);
        }
    }
}
