//! Oriented rectangular apertures and the quadrature grids laid over them.
//!
//! Every surface integral in the crate is a weighted sum over a
//! [`QuadratureGrid`]. Local coordinates are centered on the aperture, so a
//! surface of side `length_u` spans `a ∈ [-length_u/2, length_u/2]`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

const FRAME_TOL: f64 = 1e-10;

/// A flat rectangle in 3-space with a right-handed orthonormal frame
/// `(tangent_u, tangent_v, normal)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSurface {
    center: Vec3,
    tangent_u: Vec3,
    tangent_v: Vec3,
    normal: Vec3,
    length_u: f64,
    length_v: f64,
}

impl PlanarSurface {
    /// Builds a surface whose frame is given by the columns of `rotation`.
    ///
    /// The rotation has to be orthonormal with determinant +1 to within
    /// 1e-10; the stored frame is re-orthonormalized so it holds to machine
    /// precision.
    pub fn new(center: Vec3, rotation: &Matrix3<f64>, length_u: f64, length_v: f64) -> Result<Self> {
        if !(length_u > 0.0 && length_v > 0.0 && length_u.is_finite() && length_v.is_finite()) {
            return Err(Error::Geometry(format!(
                "side lengths must be positive and finite, got {length_u} x {length_v}"
            )));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Geometry("center must be finite".into()));
        }
        let gram = rotation.transpose() * rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if !(off <= FRAME_TOL) {
            return Err(Error::Geometry(format!(
                "rotation is not orthonormal (max |RᵀR - I| = {off:.3e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > FRAME_TOL {
            return Err(Error::Geometry(format!(
                "rotation must be proper (det = {det:.6})"
            )));
        }

        let tangent_u = rotation.column(0).normalize();
        let v = rotation.column(1).into_owned();
        let tangent_v = (v - tangent_u * tangent_u.dot(&v)).normalize();
        let normal = tangent_u.cross(&tangent_v);

        Ok(Self {
            center,
            tangent_u,
            tangent_v,
            normal,
            length_u,
            length_v,
        })
    }

    /// Axis-aligned surface facing +z.
    pub fn broadside(center: Vec3, length_u: f64, length_v: f64) -> Result<Self> {
        Self::new(center, &Matrix3::identity(), length_u, length_v)
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn tangent_u(&self) -> Vec3 {
        self.tangent_u
    }

    pub fn tangent_v(&self) -> Vec3 {
        self.tangent_v
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn length_u(&self) -> f64 {
        self.length_u
    }

    pub fn length_v(&self) -> f64 {
        self.length_v
    }

    /// Frame as a rotation matrix with columns `(u, v, n)`.
    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.tangent_u, self.tangent_v, self.normal])
    }

    pub fn area(&self) -> f64 {
        self.length_u * self.length_v
    }

    /// Maps centered local coordinates to a point in 3-space.
    pub fn global_point(&self, local: Vec2) -> Result<Vec3> {
        let (hu, hv) = (0.5 * self.length_u, 0.5 * self.length_v);
        let slack = 1e-12 * hu.max(hv);
        if local.x.abs() > hu + slack || local.y.abs() > hv + slack || !local.iter().all(|c| c.is_finite()) {
            return Err(Error::Geometry(format!(
                "local point ({}, {}) outside [{}, {}] x [{}, {}]",
                local.x, local.y, -hu, hu, -hv, hv
            )));
        }
        Ok(self.point_at(local))
    }

    pub(crate) fn point_at(&self, local: Vec2) -> Vec3 {
        self.center + self.tangent_u * local.x + self.tangent_v * local.y
    }

    /// Orthogonal projection of `point` onto the surface's `(u, v)` frame.
    pub fn local_coords(&self, point: &Vec3) -> Vec2 {
        let rel = point - self.center;
        Vec2::new(rel.dot(&self.tangent_u), rel.dot(&self.tangent_v))
    }

    pub fn corners(&self) -> [Vec3; 4] {
        let (hu, hv) = (0.5 * self.length_u, 0.5 * self.length_v);
        [
            self.point_at(Vec2::new(-hu, -hv)),
            self.point_at(Vec2::new(hu, -hv)),
            self.point_at(Vec2::new(hu, hv)),
            self.point_at(Vec2::new(-hu, hv)),
        ]
    }

    /// Same frame and center, side lengths multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.center,
            &self.rotation(),
            self.length_u * factor,
            self.length_v * factor,
        )
    }

    pub fn with_center(&self, center: Vec3) -> Self {
        Self { center, ..self.clone() }
    }

    pub fn with_lengths(&self, length_u: f64, length_v: f64) -> Result<Self> {
        Self::new(self.center, &self.rotation(), length_u, length_v)
    }

    /// Applies the rigid motion `x -> rotation * x + offset`.
    pub fn transformed(&self, rotation: &Matrix3<f64>, offset: &Vec3) -> Result<Self> {
        Self::new(
            rotation * self.center + offset,
            &(rotation * self.rotation()),
            self.length_u,
            self.length_v,
        )
    }

    fn contains_in_plane(&self, local: Vec2, slack: f64) -> bool {
        local.x.abs() <= 0.5 * self.length_u + slack && local.y.abs() <= 0.5 * self.length_v + slack
    }

    fn segment_hits(&self, a: &Vec3, b: &Vec3) -> bool {
        let da = (a - self.center).dot(&self.normal);
        let db = (b - self.center).dot(&self.normal);
        let scale = self.length_u.max(self.length_v);
        let eps = 1e-12 * scale;
        if (da > eps && db > eps) || (da < -eps && db < -eps) {
            return false;
        }
        if (da - db).abs() <= eps {
            // Segment lies in the plane; handled by the coplanar branch.
            return false;
        }
        let t = da / (da - db);
        let p = a + (b - a) * t;
        self.contains_in_plane(self.local_coords(&p), eps)
    }

    /// True when the two closed rectangles share at least one point.
    pub fn intersects(&self, other: &PlanarSurface) -> bool {
        let scale = self.length_u.max(self.length_v).max(other.length_u).max(other.length_v);
        let eps = 1e-12 * scale;
        let parallel = self.normal.cross(&other.normal).norm() <= 1e-12;
        if parallel {
            if (other.center - self.center).dot(&self.normal).abs() > eps {
                return false;
            }
            // Coplanar: separating-axis test on the four edge directions.
            let axes = [self.tangent_u, self.tangent_v, other.tangent_u, other.tangent_v];
            let ca = self.corners();
            let cb = other.corners();
            return axes.iter().all(|axis| {
                let (amin, amax) = project(&ca, axis);
                let (bmin, bmax) = project(&cb, axis);
                amax + eps >= bmin && bmax + eps >= amin
            });
        }
        let edges = |s: &PlanarSurface| {
            let c = s.corners();
            [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
        };
        edges(self).iter().any(|(a, b)| other.segment_hits(a, b))
            || edges(other).iter().any(|(a, b)| self.segment_hits(a, b))
    }
}

fn project(points: &[Vec3; 4], axis: &Vec3) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let x = p.dot(axis);
        (lo.min(x), hi.max(x))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    #[default]
    Midpoint,
    GaussLegendre,
}

/// Sample points and positive weights realizing `∫_S f dS ≈ Σ w_i f(p_i)`.
///
/// Points are stored with `u` as the slow index: point `i_u * n_v + i_v`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    surface: PlanarSurface,
    points: Vec<Vec3>,
    local_coords: Vec<Vec2>,
    weights: Vec<f64>,
    counts: (usize, usize),
    rule: QuadratureRule,
}

impl QuadratureGrid {
    pub fn surface(&self) -> &PlanarSurface {
        &self.surface
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn local_coords(&self) -> &[Vec2] {
        &self.local_coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn counts(&self) -> (usize, usize) {
        self.counts
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    /// Cell spacing when the samples form a uniform lattice (midpoint rule).
    pub fn uniform_spacing(&self) -> Option<(f64, f64)> {
        match self.rule {
            QuadratureRule::Midpoint => Some((
                self.surface.length_u / self.counts.0 as f64,
                self.surface.length_v / self.counts.1 as f64,
            )),
            QuadratureRule::GaussLegendre => None,
        }
    }

    pub fn integrate<F: Fn(&Vec3) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

fn rule_nodes(rule: QuadratureRule, n: usize, length: f64) -> (Vec<f64>, Vec<f64>) {
    match rule {
        QuadratureRule::Midpoint => {
            let h = length / n as f64;
            let nodes = (0..n).map(|i| -0.5 * length + (i as f64 + 0.5) * h).collect();
            (nodes, vec![h; n])
        }
        QuadratureRule::GaussLegendre => {
            let degree = NonZeroUsize::new(n).expect("count checked by caller");
            let quad = GaussLegendre::new(degree);
            let mut pairs = quad.as_node_weight_pairs().to_vec();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs
                .into_iter()
                .map(|(x, w)| (0.5 * length * x, 0.5 * length * w))
                .unzip()
        }
    }
}

/// Lays an `n_u × n_v` tensor-product rule over `surface`.
pub fn discretize(
    surface: &PlanarSurface,
    n_u: usize,
    n_v: usize,
    rule: QuadratureRule,
) -> Result<QuadratureGrid> {
    if n_u == 0 || n_v == 0 {
        return Err(Error::Geometry(format!(
            "grid counts must be at least 1, got {n_u} x {n_v}"
        )));
    }
    let (au, wu) = rule_nodes(rule, n_u, surface.length_u);
    let (av, wv) = rule_nodes(rule, n_v, surface.length_v);

    let n = n_u * n_v;
    let mut points = Vec::with_capacity(n);
    let mut local_coords = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for (a, wa) in au.iter().zip(&wu) {
        for (b, wb) in av.iter().zip(&wv) {
            let local = Vec2::new(*a, *b);
            points.push(surface.point_at(local));
            local_coords.push(local);
            weights.push(wa * wb);
        }
    }

    Ok(QuadratureGrid {
        surface: surface.clone(),
        points,
        local_coords,
        weights,
        counts: (n_u, n_v),
        rule,
    })
}
