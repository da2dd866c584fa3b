//! Parametrised immersions into the unit sphere of `C^n`, their parameter
//! domains, sampling grids, and derivative jets.

use crate::ambient::AmbientVector;
use crate::error::{HsError, Result};
use crate::linalg;
use crate::taylor::Taylor;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

/// Step used by the finite-difference fallback for every derivative order.
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereChart {
    /// `(latitude, longitude)` with latitude in `(−π/2, π/2)`.
    LatLong,
    /// `(y, longitude)` with latitude `atan(sinh y)`; conformal. `|y| ≤ y_max`.
    Mercator { y_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// `R^m` modulo the lattice spanned by `generators` (each of length m).
    Torus { generators: Vec<Vec<f64>> },
    /// A chart of the 2-sphere; the second coordinate is a 2π-periodic longitude.
    Sphere(SphereChart),
    /// An open box; not periodic.
    Patch { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn standard_torus(m: usize) -> Self {
        let generators = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 2.0 * PI } else { 0.0 }).collect())
            .collect();
        Domain::Torus { generators }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Torus { generators } => generators.len(),
            Domain::Sphere(_) => 2,
            Domain::Patch { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        if t.len() != self.dim() || t.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self {
            Domain::Torus { .. } => true,
            Domain::Sphere(SphereChart::LatLong) => t[0].abs() < FRAC_PI_2,
            Domain::Sphere(SphereChart::Mercator { y_max }) => t[0].abs() <= *y_max + 1.0,
            Domain::Patch { lo, hi } => t
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (a, b))| *x >= *a - 1e-9 && *x <= *b + 1e-9),
        }
    }

    /// Whether grid index direction `axis` wraps around.
    pub fn is_periodic(&self, axis: usize) -> bool {
        match self {
            Domain::Torus { .. } => true,
            Domain::Sphere(_) => axis == 1,
            Domain::Patch { .. } => false,
        }
    }

    /// Parameter point at fractional grid position `x` (one entry per axis, in `[0, 1)`).
    fn point_at(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Domain::Torus { generators } => {
                let m = generators.len();
                (0..m)
                    .map(|c| generators.iter().zip(x).map(|(g, xi)| xi * g[c]).sum())
                    .collect()
            }
            Domain::Sphere(chart) => {
                let lat_extent = match chart {
                    SphereChart::LatLong => FRAC_PI_2,
                    SphereChart::Mercator { y_max } => *y_max,
                };
                vec![-lat_extent + 2.0 * lat_extent * x[0], 2.0 * PI * x[1]]
            }
            Domain::Patch { lo, hi } => lo
                .iter()
                .zip(hi)
                .zip(x)
                .map(|((a, b), xi)| a + (b - a) * xi)
                .collect(),
        }
    }

    /// Fractional offset of sample `i` out of `n` along `axis`: periodic axes
    /// start at 0, bounded axes are cell-centred (half a step from each end).
    fn offset(&self, axis: usize, i: usize, n: usize) -> f64 {
        if self.is_periodic(axis) {
            i as f64 / n as f64
        } else {
            (i as f64 + 0.5) / n as f64
        }
    }

    /// Length of one grid cell along each axis, in parameter units.
    pub fn cell_size(&self, res: &[usize]) -> Vec<f64> {
        match self {
            Domain::Torus { generators } => generators
                .iter()
                .zip(res)
                .map(|(g, n)| g.iter().map(|x| x * x).sum::<f64>().sqrt() / *n as f64)
                .collect(),
            Domain::Sphere(chart) => {
                let lat_extent = match chart {
                    SphereChart::LatLong => FRAC_PI_2,
                    SphereChart::Mercator { y_max } => *y_max,
                };
                vec![2.0 * lat_extent / res[0] as f64, 2.0 * PI / res[1] as f64]
            }
            Domain::Patch { lo, hi } => lo
                .iter()
                .zip(hi)
                .zip(res)
                .map(|((a, b), n)| (b - a) / *n as f64)
                .collect(),
        }
    }

    /// Distance between two parameter points, taking periodicity into account.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        match self {
            Domain::Torus { generators } => {
                let m = generators.len();
                // lattice coordinates of d, reduced to the nearest image
                let mut w = vec![0.0; m * m];
                for (k, g) in generators.iter().enumerate() {
                    for c in 0..m {
                        w[c * m + k] = g[c];
                    }
                }
                let Some(x) = linalg::solve(&w, m, &d) else {
                    return d.iter().map(|v| v * v).sum::<f64>().sqrt();
                };
                let x: Vec<f64> = x.iter().map(|v| v - v.round()).collect();
                let mut best = f64::INFINITY;
                // nearest image can sit one cell over in a skew lattice
                for shift in 0..3usize.pow(m as u32) {
                    let mut s = shift;
                    let mut y = x.clone();
                    for v in y.iter_mut() {
                        *v += (s % 3) as f64 - 1.0;
                        s /= 3;
                    }
                    let r: f64 = (0..m)
                        .map(|c| generators.iter().zip(&y).map(|(g, yk)| yk * g[c]).sum::<f64>())
                        .map(|v| v * v)
                        .sum();
                    best = best.min(r);
                }
                best.sqrt()
            }
            Domain::Sphere(_) => {
                let dphi = d[1] - 2.0 * PI * (d[1] / (2.0 * PI)).round();
                (d[0] * d[0] + dphi * dphi).sqrt()
            }
            Domain::Patch { .. } => d.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Maps a point to a canonical representative (torus: fundamental cell).
    pub fn reduce(&self, t: &[f64]) -> Vec<f64> {
        match self {
            Domain::Torus { generators } => {
                let m = generators.len();
                let mut w = vec![0.0; m * m];
                for (k, g) in generators.iter().enumerate() {
                    for c in 0..m {
                        w[c * m + k] = g[c];
                    }
                }
                match linalg::solve(&w, m, t) {
                    Some(x) => {
                        let x: Vec<f64> = x.iter().map(|v| v - v.floor()).collect();
                        self.point_at(&x)
                    }
                    None => t.to_vec(),
                }
            }
            Domain::Sphere(_) => vec![t[0], t[1].rem_euclid(2.0 * PI)],
            Domain::Patch { .. } => t.to_vec(),
        }
    }

    /// A point at fractional position `x ∈ [0,1)^m` of the domain, staying
    /// `margin` (fractional) away from non-periodic boundaries.
    pub fn sample_at(&self, x: &[f64], margin: f64) -> Vec<f64> {
        let x: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(axis, &xi)| {
                if self.is_periodic(axis) {
                    xi
                } else {
                    margin + (1.0 - 2.0 * margin) * xi
                }
            })
            .collect();
        self.point_at(&x)
    }
}

/// Tensor-product sampling of a domain.
#[derive(Debug, Clone)]
pub struct Grid {
    pub res: Vec<usize>,
    pub points: Vec<Vec<f64>>,
}

impl Grid {
    /// Samples are ordered with the last axis varying fastest.
    pub fn new(domain: &Domain, res: &[usize]) -> Self {
        assert_eq!(res.len(), domain.dim(), "one resolution per parameter");
        let total: usize = res.iter().product();
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let idx = Self::unflatten_with(res, flat);
            let x: Vec<f64> = idx
                .iter()
                .enumerate()
                .map(|(axis, &i)| domain.offset(axis, i, res[axis]))
                .collect();
            points.push(domain.point_at(&x));
        }
        Grid {
            res: res.to_vec(),
            points,
        }
    }

    fn unflatten_with(res: &[usize], mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; res.len()];
        for axis in (0..res.len()).rev() {
            idx[axis] = flat % res[axis];
            flat /= res[axis];
        }
        idx
    }

    pub fn unflatten(&self, flat: usize) -> Vec<usize> {
        Self::unflatten_with(&self.res, flat)
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.res).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Flat indices of the 3^m − 1 stencil neighbours, wrapping periodic axes
    /// and dropping neighbours that fall off bounded ones.
    pub fn neighbours(&self, domain: &Domain, flat: usize) -> Vec<usize> {
        let idx = self.unflatten(flat);
        let m = idx.len();
        let mut out = Vec::new();
        'outer: for code in 0..3usize.pow(m as u32) {
            let mut c = code;
            let mut nb = idx.clone();
            let mut centre = true;
            for axis in 0..m {
                let step = (c % 3) as isize - 1;
                c /= 3;
                if step != 0 {
                    centre = false;
                }
                let n = self.res[axis] as isize;
                let mut j = idx[axis] as isize + step;
                if j < 0 || j >= n {
                    if domain.is_periodic(axis) {
                        j = j.rem_euclid(n);
                    } else {
                        continue 'outer;
                    }
                }
                nb[axis] = j as usize;
            }
            if !centre {
                out.push(self.flatten(&nb));
            }
        }
        out
    }
}

/// Value and partial derivatives (up to order 3) of an immersion at one point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub t: Vec<f64>,
    order: usize,
    m: usize,
    pub u: AmbientVector,
    first: Vec<AmbientVector>,
    second: Vec<AmbientVector>,
    third: Vec<AmbientVector>,
}

impl Jet {
    /// Assembles a jet from derivative arrays. `second` is `m×m` and `third`
    /// `m×m×m`, row-major; they are symmetrised over index permutations.
    pub fn new(
        t: Vec<f64>,
        u: AmbientVector,
        first: Vec<AmbientVector>,
        second: Vec<AmbientVector>,
        third: Vec<AmbientVector>,
    ) -> Self {
        let m = t.len();
        let order = if !third.is_empty() {
            3
        } else if !second.is_empty() {
            2
        } else if !first.is_empty() {
            1
        } else {
            0
        };
        let mut jet = Jet {
            t,
            order,
            m,
            u,
            first,
            second,
            third,
        };
        jet.symmetrise();
        jet
    }

    fn symmetrise(&mut self) {
        let m = self.m;
        if self.order >= 2 {
            for i in 0..m {
                for j in i + 1..m {
                    let avg = (&self.second[i * m + j] + &self.second[j * m + i]).scaled(0.5);
                    self.second[i * m + j] = avg.clone();
                    self.second[j * m + i] = avg;
                }
            }
        }
        if self.order >= 3 {
            for i in 0..m {
                for j in i..m {
                    for k in j..m {
                        let perms = [
                            (i, j, k),
                            (i, k, j),
                            (j, i, k),
                            (j, k, i),
                            (k, i, j),
                            (k, j, i),
                        ];
                        let mut avg = AmbientVector::zeros(self.u.complex_dim());
                        for &(a, b, c) in &perms {
                            avg.axpy(1.0 / 6.0, &self.third[(a * m + b) * m + c]);
                        }
                        for &(a, b, c) in &perms {
                            self.third[(a * m + b) * m + c] = avg.clone();
                        }
                    }
                }
            }
        }
    }

    /// Builds a jet from Taylor expansions of the `2n` real coordinates.
    pub fn from_taylor(t: &[f64], order: usize, coords: &[Taylor]) -> Self {
        let m = t.len();
        let gather = |alpha: &[usize]| {
            AmbientVector::from_reals(coords.iter().map(|c| c.derivative(alpha)).collect())
        };
        let u = AmbientVector::from_reals(coords.iter().map(Taylor::value).collect());
        let first = if order >= 1 { (0..m).map(|i| gather(&[i])).collect() } else { vec![] };
        let mut second = Vec::new();
        if order >= 2 {
            for i in 0..m {
                for j in 0..m {
                    second.push(gather(&[i, j]));
                }
            }
        }
        let mut third = Vec::new();
        if order >= 3 {
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        third.push(gather(&[i, j, k]));
                    }
                }
            }
        }
        Jet {
            t: t.to_vec(),
            order,
            m,
            u,
            first,
            second,
            third,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Link dimension m.
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn complex_dim(&self) -> usize {
        self.u.complex_dim()
    }

    pub fn d1(&self, i: usize) -> &AmbientVector {
        &self.first[i]
    }

    pub fn d2(&self, i: usize, j: usize) -> &AmbientVector {
        &self.second[i * self.m + j]
    }

    pub fn d3(&self, i: usize, j: usize, k: usize) -> &AmbientVector {
        &self.third[(i * self.m + j) * self.m + k]
    }

    pub fn first(&self) -> &[AmbientVector] {
        &self.first
    }
}

/// A parametrised immersion `u: domain → S^{2n−1} ⊂ C^n`.
pub trait Immersion: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    /// Complex dimension n of the ambient space.
    fn complex_dim(&self) -> usize;
    fn domain(&self) -> &Domain;
    /// Genus, when the parameter domain closes up to a surface of known topology.
    fn genus(&self) -> Option<u32> {
        None
    }
    /// Highest derivative order with exact rules.
    fn max_order(&self) -> usize {
        3
    }
    /// Jet at `t` without domain or order validation.
    fn raw_jet(&self, t: &[f64], order: usize) -> Jet;

    /// Link dimension m.
    fn dim(&self) -> usize {
        self.domain().dim()
    }

    fn jet(&self, t: &[f64], order: usize) -> Result<Jet> {
        if order > self.max_order() {
            return Err(HsError::OrderUnavailable {
                immersion: self.name().to_string(),
                requested: order,
                available: self.max_order(),
            });
        }
        if !self.domain().contains(t) {
            return Err(HsError::DomainViolation {
                immersion: self.name().to_string(),
                point: t.to_vec(),
            });
        }
        Ok(self.raw_jet(t, order))
    }
}

/// Evaluates the jet of `imm` at `t`; `order` must be 2 or 3.
pub fn evaluate_jet(imm: &dyn Immersion, t: &[f64], order: usize) -> Result<Jet> {
    if !(2..=3).contains(&order) {
        return Err(HsError::InvalidParams(format!("jet order must be 2 or 3, got {order}")));
    }
    imm.jet(t, order)
}

/// Immersion given only by its value map; derivatives up to order 2 come from
/// nested central differences with step [`FD_STEP`] (error `O(h²)`).
pub struct FiniteDifferenceImmersion<F> {
    name: String,
    n: usize,
    domain: Domain,
    genus: Option<u32>,
    value: F,
}

impl<F> FiniteDifferenceImmersion<F>
where
    F: Fn(&[f64]) -> AmbientVector + Send + Sync,
{
    pub fn new(name: impl Into<String>, n: usize, domain: Domain, genus: Option<u32>, value: F) -> Self {
        FiniteDifferenceImmersion {
            name: name.into(),
            n,
            domain,
            genus,
            value,
        }
    }

}

impl<F> fmt::Debug for FiniteDifferenceImmersion<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceImmersion")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("domain", &self.domain)
            .finish()
    }
}

impl<F> Immersion for FiniteDifferenceImmersion<F>
where
    F: Fn(&[f64]) -> AmbientVector + Send + Sync,
{
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
    fn max_order(&self) -> usize {
        2
    }

    fn raw_jet(&self, t: &[f64], order: usize) -> Jet {
        let m = t.len();
        let h = FD_STEP;
        let at = |shifts: &[(usize, f64)]| {
            let mut p = t.to_vec();
            for &(i, s) in shifts {
                p[i] += s;
            }
            (self.value)(&p)
        };
        let u = (self.value)(t);
        let mut first = Vec::new();
        if order >= 1 {
            for i in 0..m {
                first.push((&at(&[(i, h)]) - &at(&[(i, -h)])).scaled(0.5 / h));
            }
        }
        let mut second = vec![AmbientVector::zeros(self.n); if order >= 2 { m * m } else { 0 }];
        if order >= 2 {
            for i in 0..m {
                let mut d = &at(&[(i, h)]) + &at(&[(i, -h)]);
                d.axpy(-2.0, &u);
                second[i * m + i] = d.scaled(1.0 / (h * h));
                for j in i + 1..m {
                    let mut d = &at(&[(i, h), (j, h)]) - &at(&[(i, h), (j, -h)]);
                    d -= &at(&[(i, -h), (j, h)]);
                    d += &at(&[(i, -h), (j, -h)]);
                    let d = d.scaled(0.25 / (h * h));
                    second[i * m + j] = d.clone();
                    second[j * m + i] = d;
                }
            }
        }
        Jet::new(t.to_vec(), u, first, second, vec![])
    }
}

/// Wraps `inner`'s value map only, discarding its exact derivative rules.
pub fn finite_difference_of(inner: &dyn Immersion) -> FiniteDifferenceImmersion<impl Fn(&[f64]) -> AmbientVector + Send + Sync + '_> {
    FiniteDifferenceImmersion::new(
        format!("{} (finite differences)", inner.name()),
        inner.complex_dim(),
        inner.domain().clone(),
        inner.genus(),
        move |t: &[f64]| inner.raw_jet(t, 0).u,
    )
}

/// Largest relative discrepancy between the exact jet rules of `imm` at `t`
/// and central differences (step `h`) of the next-lower order, normalised by
/// `max(|exact|, 1)` per derivative vector.
pub fn jet_cross_validation(imm: &dyn Immersion, t: &[f64], h: f64) -> Result<f64> {
    let order = imm.max_order();
    let m = imm.dim();
    let base = imm.jet(t, order)?;
    let shifted = |i: usize, s: f64| {
        let mut p = t.to_vec();
        p[i] += s;
        imm.jet(&p, order - 1)
    };
    let rel = |exact: &AmbientVector, approx: &AmbientVector| (exact - approx).norm() / exact.norm().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..m {
        let plus = shifted(i, h)?;
        let minus = shifted(i, -h)?;
        let fd_u = (&plus.u - &minus.u).scaled(0.5 / h);
        worst = worst.max(rel(base.d1(i), &fd_u));
        if order >= 2 {
            for j in 0..m {
                let fd = (plus.d1(j) - minus.d1(j)).scaled(0.5 / h);
                worst = worst.max(rel(base.d2(j, i), &fd));
            }
        }
        if order >= 3 {
            for j in 0..m {
                for k in 0..m {
                    let fd = (plus.d2(j, k) - minus.d2(j, k)).scaled(0.5 / h);
                    worst = worst.max(rel(base.d3(j, k, i), &fd));
                }
            }
        }
    }
    Ok(worst)
}
