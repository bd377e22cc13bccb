//! Spherical geometry on the unit sphere.
//!
//! Points are unit vectors in ℝ³. Arcs are minimal geodesics between two
//! non-antipodal points, polylines chain arcs together, and a simple closed
//! polyline splits the sphere into two components described by
//! [`LoopPartition`]. Component 0 is always the component to the *left* of
//! the loop's direction of travel (seen from outside the sphere).

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Unit-norm tolerance; also the closure tolerance for polylines.
pub const EPS_UNIT: f64 = 1e-12;
/// Arcs whose endpoints satisfy `a·b <= -1 + EPS_ANTIPODAL` are rejected.
pub const EPS_ANTIPODAL: f64 = 1e-9;
/// Plane-side tolerance used by arc intersection tests.
pub const EPS_ISECT: f64 = 1e-12;
/// Points closer than this to a loop are classified as on the curve.
pub const EPS_ON_CURVE: f64 = 1e-9;
/// Minimum area (steradians) of each side of a loop partition.
pub const EPS_AREA: f64 = 1e-10;

const FOUR_PI: f64 = 4.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("cannot place a zero or non-finite vector on the sphere")]
    ZeroVector,
    #[error("arc endpoints are antipodal; the minimal geodesic is undefined")]
    AntipodalEndpoints,
    #[error("loop encloses area {area:.3e} sr on one side")]
    DegenerateLoop { area: f64 },
    #[error("loop is not simple: edges {0} and {1} intersect")]
    NotSimple(usize, usize),
    #[error("need at least {needed} vertices, got {got}")]
    TooFewVertices { needed: usize, got: usize },
}

/// A point of S², stored as a unit vector.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct SpherePoint(Vec3);

impl fmt::Debug for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.12}, {:.12}, {:.12})", self.0.x, self.0.y, self.0.z)
    }
}

impl From<SpherePoint> for [f64; 3] {
    fn from(p: SpherePoint) -> Self {
        [p.0.x, p.0.y, p.0.z]
    }
}

impl TryFrom<[f64; 3]> for SpherePoint {
    type Error = GeomError;
    fn try_from(c: [f64; 3]) -> Result<Self, GeomError> {
        SpherePoint::new(c[0], c[1], c[2])
    }
}

impl SpherePoint {
    /// Normalizes `(x, y, z)` onto the sphere.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, GeomError> {
        Self::from_vec(Vec3::new(x, y, z))
    }

    pub fn from_vec(v: Vec3) -> Result<Self, GeomError> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-300 {
            return Err(GeomError::ZeroVector);
        }
        Ok(SpherePoint(v / n))
    }

    /// Normalizes without checking; callers guarantee `v` is finite and nonzero.
    pub(crate) fn from_vec_unchecked(v: Vec3) -> Self {
        SpherePoint(v / v.norm())
    }

    pub fn north() -> Self {
        SpherePoint(Vec3::z())
    }

    pub fn south() -> Self {
        SpherePoint(-Vec3::z())
    }

    pub fn x_axis() -> Self {
        SpherePoint(Vec3::x())
    }

    pub fn y_axis() -> Self {
        SpherePoint(Vec3::y())
    }

    /// Point at `colatitude` from the north pole and azimuth `longitude`.
    pub fn from_spherical(colatitude: f64, longitude: f64) -> Self {
        let (s, c) = colatitude.sin_cos();
        SpherePoint(Vec3::new(s * longitude.cos(), s * longitude.sin(), c))
    }

    pub fn vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }
    pub fn y(&self) -> f64 {
        self.0.y
    }
    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn antipode(&self) -> Self {
        SpherePoint(-self.0)
    }

    /// Ambient Euclidean distance ‖a − b‖.
    pub fn chord_distance(&self, other: &SpherePoint) -> f64 {
        (self.0 - other.0).norm()
    }

    pub fn rotated(&self, r: &Matrix3<f64>) -> Self {
        SpherePoint::from_vec_unchecked(r * self.0)
    }

    /// Deterministic orthonormal basis `(e1, e2)` of the tangent plane, with
    /// `e1 × e2 = self`.
    pub fn tangent_frame(&self) -> (Vec3, Vec3) {
        let x = &self.0;
        let helper = if x.x.abs() <= x.y.abs() && x.x.abs() <= x.z.abs() {
            Vec3::x()
        } else if x.y.abs() <= x.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let e1 = helper.cross(x).normalize();
        let e2 = x.cross(&e1);
        (e1, e2)
    }

    /// Orthogonal projection of an ambient vector onto the tangent plane.
    pub fn project_tangent(&self, v: &Vec3) -> Vec3 {
        v - self.0 * self.0.dot(v)
    }

    /// Exponential map: follow the geodesic with initial velocity `v`
    /// (tangent at `self`) for unit time.
    pub fn exp(&self, v: &Vec3) -> Self {
        let v = self.project_tangent(v);
        let theta = v.norm();
        if theta < 1e-150 {
            return *self;
        }
        let (s, c) = theta.sin_cos();
        SpherePoint::from_vec_unchecked(self.0 * c + v * (s / theta))
    }

    /// Inverse of [`SpherePoint::exp`]; undefined (returns zero) at the antipode.
    pub fn log(&self, other: &SpherePoint) -> Vec3 {
        let w = self.project_tangent(&other.0);
        let n = w.norm();
        if n < 1e-300 {
            return Vec3::zeros();
        }
        w * (geodesic_distance(self, other) / n)
    }
}

/// Great-circle distance `arccos(a·b)` in radians.
///
/// Evaluated as `atan2(‖a×b‖, a·b)`, which equals the clamped arccosine but
/// keeps full relative precision for nearly coincident points.
pub fn geodesic_distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    let cross = a.0.cross(&b.0).norm();
    let dot = a.0.dot(&b.0).clamp(-1.0, 1.0);
    cross.atan2(dot)
}

/// Oriented minimal geodesic segment from `start` to `end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicArc {
    start: SpherePoint,
    end: SpherePoint,
    /// Unit normal `start × end / ‖·‖`; zero for a degenerate arc.
    normal: Vec3,
    length: f64,
}

impl GeodesicArc {
    pub fn new(start: SpherePoint, end: SpherePoint) -> Result<Self, GeomError> {
        if start.dot(&end) <= -1.0 + EPS_ANTIPODAL {
            return Err(GeomError::AntipodalEndpoints);
        }
        let c = start.0.cross(&end.0);
        let cn = c.norm();
        let length = geodesic_distance(&start, &end);
        let normal = if cn > 1e-300 { c / cn } else { Vec3::zeros() };
        Ok(GeodesicArc {
            start,
            end,
            normal,
            length,
        })
    }

    pub fn start(&self) -> &SpherePoint {
        &self.start
    }
    pub fn end(&self) -> &SpherePoint {
        &self.end
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    /// Unit normal of the supporting great circle, pointing to the left of
    /// the direction of travel. Zero for degenerate arcs.
    pub fn normal(&self) -> &Vec3 {
        &self.normal
    }

    pub fn is_degenerate(&self) -> bool {
        self.normal == Vec3::zeros()
    }

    /// Spherical linear interpolation, `t ∈ [0, 1]`.
    pub fn point_at(&self, t: f64) -> SpherePoint {
        if t == 0.0 || self.is_degenerate() {
            return self.start;
        }
        if t == 1.0 {
            return self.end;
        }
        let l = self.length;
        let s = l.sin();
        let a = ((1.0 - t) * l).sin() / s;
        let b = (t * l).sin() / s;
        SpherePoint::from_vec_unchecked(self.start.0 * a + self.end.0 * b)
    }

    pub fn midpoint(&self) -> SpherePoint {
        self.point_at(0.5)
    }

    /// Angle travelled from `start` to the projection of `x` on the
    /// supporting great circle, in `(-π, π]`.
    pub fn param_of(&self, x: &SpherePoint) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let s = self.start.0.cross(&x.0).dot(&self.normal);
        let c = self.start.0.dot(&x.0);
        s.atan2(c)
    }

    /// True if `x` lies on the closed arc within `tol` (plane distance and
    /// endpoint overshoot both measured as sines of angles).
    pub fn contains(&self, x: &SpherePoint, tol: f64) -> bool {
        if self.is_degenerate() {
            return geodesic_distance(&self.start, x) <= tol;
        }
        if self.normal.dot(&x.0).abs() > tol {
            return false;
        }
        let after_start = self.start.0.cross(&x.0).dot(&self.normal);
        let before_end = x.0.cross(&self.end.0).dot(&self.normal);
        after_start >= -tol && before_end >= -tol && x.0.dot(&(self.start.0 + self.end.0)) > 0.0
    }

    /// Geodesic distance from `x` to the closest point of the arc.
    pub fn distance_to(&self, x: &SpherePoint) -> f64 {
        let to_ends = geodesic_distance(&self.start, x).min(geodesic_distance(&self.end, x));
        if self.is_degenerate() {
            return to_ends;
        }
        let s = self.normal.dot(&x.0);
        let p = x.0 - self.normal * s;
        let pn = p.norm();
        if pn < 1e-300 {
            return to_ends;
        }
        let q = SpherePoint(p / pn);
        let after_start = self.start.0.cross(&q.0).dot(&self.normal);
        let before_end = q.0.cross(&self.end.0).dot(&self.normal);
        if after_start >= 0.0 && before_end >= 0.0 {
            s.abs().atan2(pn)
        } else {
            to_ends
        }
    }

    pub fn reversed(&self) -> Self {
        GeodesicArc {
            start: self.end,
            end: self.start,
            normal: -self.normal,
            length: self.length,
        }
    }
}

/// Point where two closed arcs meet, if any.
///
/// Transversal crossings are computed from the great-circle normals; shared
/// endpoints are returned exactly. For cocircular overlapping arcs the first
/// overlap point along `a` is returned.
pub fn arc_intersection(a: &GeodesicArc, b: &GeodesicArc) -> Option<SpherePoint> {
    let tol = EPS_ISECT;
    if a.is_degenerate() {
        return b.contains(&a.start, tol).then_some(a.start);
    }
    if b.is_degenerate() {
        return a.contains(&b.start, tol).then_some(b.start);
    }
    let sb0 = a.normal.dot(&b.start.0);
    let sb1 = a.normal.dot(&b.end.0);
    let sa0 = b.normal.dot(&a.start.0);
    let sa1 = b.normal.dot(&a.end.0);

    let touching = |s: f64| s.abs() <= tol;
    let cocircular = touching(sb0) && touching(sb1) && touching(sa0) && touching(sa1);

    if !cocircular {
        if sb0 * sb1 > 0.0 && !touching(sb0) && !touching(sb1) {
            return None;
        }
        if sa0 * sa1 > 0.0 && !touching(sa0) && !touching(sa1) {
            return None;
        }
    }

    // Endpoint contacts, ordered by position along `a`.
    let mut best: Option<(f64, SpherePoint)> = None;
    let mut consider = |p: SpherePoint| {
        let t = a.param_of(&p).max(0.0);
        if best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, p));
        }
    };
    if (cocircular || touching(sa0)) && b.contains(&a.start, tol) {
        consider(a.start);
    }
    if (cocircular || touching(sb0)) && a.contains(&b.start, tol) {
        consider(b.start);
    }
    if (cocircular || touching(sb1)) && a.contains(&b.end, tol) {
        consider(b.end);
    }
    if (cocircular || touching(sa1)) && b.contains(&a.end, tol) {
        consider(a.end);
    }
    if let Some((_, p)) = best {
        return Some(p);
    }
    if cocircular {
        return None;
    }

    let c = a.normal.cross(&b.normal);
    let cn = c.norm();
    if cn < 1e-300 {
        return None;
    }
    let x = SpherePoint(c / cn);
    [x, x.antipode()]
        .into_iter()
        .find(|p| a.contains(p, tol) && b.contains(p, tol))
}

/// Minimal geodesic distance between two closed arcs.
pub fn arc_distance(a: &GeodesicArc, b: &GeodesicArc) -> f64 {
    if arc_intersection(a, b).is_some() {
        return 0.0;
    }
    a.distance_to(&b.start)
        .min(a.distance_to(&b.end))
        .min(b.distance_to(&a.start))
        .min(b.distance_to(&a.end))
}

/// Cheap rejection: can arcs `a` and `b` possibly come within `slack` of
/// each other? Uses chord ≤ arc length.
#[inline]
pub(crate) fn arcs_may_touch(a: &GeodesicArc, b: &GeodesicArc, slack: f64) -> bool {
    (a.start.0 - b.start.0).norm() <= a.length + b.length + slack
}

/// Ordered vertices joined by minimal geodesic arcs; `closed` adds an
/// implicit edge from the last vertex back to the first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalPolyline {
    vertices: Vec<SpherePoint>,
    closed: bool,
}

/// A pair of non-adjacent polyline edges that meet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelfIntersection {
    pub edge_i: usize,
    pub edge_j: usize,
    pub point: SpherePoint,
}

impl SphericalPolyline {
    pub fn new(vertices: Vec<SpherePoint>, closed: bool) -> Result<Self, GeomError> {
        let n = vertices.len();
        let edges = if closed { n } else { n.saturating_sub(1) };
        for i in 0..edges {
            let a = &vertices[i];
            let b = &vertices[(i + 1) % n];
            if a.dot(b) <= -1.0 + EPS_ANTIPODAL {
                return Err(GeomError::AntipodalEndpoints);
            }
        }
        Ok(SphericalPolyline { vertices, closed })
    }

    pub fn vertices(&self) -> &[SpherePoint] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn edge_count(&self) -> usize {
        let n = self.vertices.len();
        if self.closed {
            if n < 2 {
                0
            } else {
                n
            }
        } else {
            n.saturating_sub(1)
        }
    }

    pub fn edge(&self, i: usize) -> GeodesicArc {
        let n = self.vertices.len();
        GeodesicArc::new(self.vertices[i], self.vertices[(i + 1) % n])
            .expect("polyline edges are validated on construction")
    }

    pub fn edges(&self) -> Vec<GeodesicArc> {
        (0..self.edge_count()).map(|i| self.edge(i)).collect()
    }

    pub fn length(&self) -> f64 {
        self.edges().iter().map(GeodesicArc::length).sum()
    }

    /// Geodesic distance from `x` to the polyline.
    pub fn distance_to(&self, x: &SpherePoint) -> f64 {
        if self.edge_count() == 0 {
            return self
                .vertices
                .first()
                .map_or(f64::INFINITY, |v| geodesic_distance(v, x));
        }
        self.edges()
            .iter()
            .map(|e| e.distance_to(x))
            .fold(f64::INFINITY, f64::min)
    }
}

fn edges_adjacent(i: usize, j: usize, edge_count: usize, closed: bool) -> bool {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    j == i + 1 || (closed && i == 0 && j + 1 == edge_count && edge_count > 2)
}

/// First intersection between edge `j` and an earlier non-adjacent edge,
/// scanning `i` upward.
pub(crate) fn first_hit_against_earlier(
    edges: &[GeodesicArc],
    j: usize,
    closed_count: Option<usize>,
) -> Option<SelfIntersection> {
    let ej = &edges[j];
    for (i, ei) in edges.iter().enumerate().take(j.saturating_sub(1)) {
        if let Some(m) = closed_count {
            if edges_adjacent(i, j, m, true) {
                continue;
            }
        }
        if !arcs_may_touch(ei, ej, 1e-9) {
            continue;
        }
        if let Some(point) = arc_intersection(ei, ej) {
            return Some(SelfIntersection {
                edge_i: i,
                edge_j: j,
                point,
            });
        }
    }
    None
}

/// Earliest pair `(i, j)` of non-adjacent edges that meet, scanning `j`
/// ascending and then `i` ascending.
///
/// For an open polyline whose last vertex coincides with its first, the
/// shared vertex is reported as the meeting point of the first and last
/// edges.
pub fn polyline_first_self_intersection(p: &SphericalPolyline) -> Option<SelfIntersection> {
    let edges = p.edges();
    let closed_count = p.closed.then_some(edges.len());
    (2..edges.len()).find_map(|j| first_hit_against_earlier(&edges, j, closed_count))
}

/// Which side of a loop a point is on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSide {
    Component(usize),
    OnCurve,
}

/// The two components of the sphere cut along a simple closed loop.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoopPartition {
    #[serde(rename = "loop")]
    loop_: SphericalPolyline,
    component_areas: [f64; 2],
    representative_points: [SpherePoint; 2],
    #[serde(skip)]
    edges: Vec<GeodesicArc>,
}

impl PartialEq for LoopPartition {
    fn eq(&self, other: &Self) -> bool {
        self.loop_ == other.loop_
            && self.component_areas == other.component_areas
            && self.representative_points == other.representative_points
    }
}

impl LoopPartition {
    pub fn loop_polyline(&self) -> &SphericalPolyline {
        &self.loop_
    }

    /// Areas of component 0 (left of travel) and component 1.
    pub fn component_areas(&self) -> [f64; 2] {
        self.component_areas
    }

    pub fn representative_points(&self) -> [SpherePoint; 2] {
        self.representative_points
    }

    pub fn edges(&self) -> &[GeodesicArc] {
        &self.edges
    }

    /// Index of the component with smaller area (0 on ties).
    pub fn smaller_side(&self) -> usize {
        usize::from(self.component_areas[1] < self.component_areas[0])
    }

    pub fn distance_to_loop(&self, x: &SpherePoint) -> f64 {
        self.edges
            .iter()
            .map(|e| e.distance_to(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Crossing parity along a geodesic path from `x` to the component-0
    /// representative.
    pub fn classify(&self, x: &SpherePoint) -> PointSide {
        if self.distance_to_loop(x) < EPS_ON_CURVE {
            return PointSide::OnCurve;
        }
        let target = self.representative_points[0];
        let mut last = None;
        for waypoint in std::iter::once(None).chain(WAYPOINTS.iter().map(Some)) {
            let path: Vec<SpherePoint> = match waypoint {
                None => vec![*x, target],
                Some(w) => {
                    let w = SpherePoint::from_vec_unchecked(Vec3::new(w[0], w[1], w[2]));
                    vec![*x, w, target]
                }
            };
            match self.path_crossings(&path) {
                Some(c) => return PointSide::Component(c % 2),
                None => last = Some(()),
            }
        }
        debug_assert!(last.is_some());
        // Every path grazed a vertex; fall back to the nearest representative.
        let d0 = geodesic_distance(x, &self.representative_points[0]);
        let d1 = geodesic_distance(x, &self.representative_points[1]);
        PointSide::Component(usize::from(d1 < d0))
    }

    /// Counts transversal crossings, or `None` if the path grazes the loop.
    fn path_crossings(&self, path: &[SpherePoint]) -> Option<usize> {
        let mut count = 0;
        for w in path.windows(2) {
            if w[0].dot(&w[1]) < -0.95 {
                return None;
            }
            let seg = GeodesicArc::new(w[0], w[1]).ok()?;
            if seg.is_degenerate() {
                continue;
            }
            for e in &self.edges {
                if !arcs_may_touch(e, &seg, 1e-9) {
                    continue;
                }
                match crossing_kind(&seg, e) {
                    Crossing::None => {}
                    Crossing::Transversal => count += 1,
                    Crossing::Graze => return None,
                }
            }
        }
        Some(count)
    }
}

const WAYPOINTS: [[f64; 3]; 6] = [
    [0.267_261_24, 0.534_522_48, 0.801_783_73],
    [-0.713_024_68, 0.310_234_5, -0.628_791_9],
    [0.577_350_27, -0.577_350_27, 0.577_350_27],
    [-0.169_030_85, -0.845_154_25, 0.507_092_55],
    [0.904_534_03, 0.301_511_34, -0.301_511_34],
    [-0.408_248_29, 0.408_248_29, -0.816_496_58],
];

enum Crossing {
    None,
    Transversal,
    Graze,
}

fn crossing_kind(path: &GeodesicArc, edge: &GeodesicArc) -> Crossing {
    const G: f64 = 1e-11;
    let se0 = path.normal.dot(&edge.start.0);
    let se1 = path.normal.dot(&edge.end.0);
    let sp0 = edge.normal.dot(&path.start.0);
    let sp1 = edge.normal.dot(&path.end.0);
    let strictly_same = |a: f64, b: f64| a * b > 0.0 && a.abs() > G && b.abs() > G;
    if strictly_same(se0, se1) || strictly_same(sp0, sp1) {
        return Crossing::None;
    }
    if [se0, se1, sp0, sp1].iter().any(|s| s.abs() <= G) || edge.is_degenerate() {
        return if arc_distance(path, edge) > 1e-9 {
            Crossing::None
        } else {
            Crossing::Graze
        };
    }
    let c = path.normal.cross(&edge.normal);
    let cn = c.norm();
    if cn < 1e-300 {
        return Crossing::Graze;
    }
    let x = SpherePoint(c / cn);
    let on_both = |p: &SpherePoint| path.contains(p, 1e-12) && edge.contains(p, 1e-12);
    if on_both(&x) || on_both(&x.antipode()) {
        Crossing::Transversal
    } else {
        Crossing::None
    }
}

/// Removes consecutive duplicates (and a duplicated closing vertex).
fn dedup_vertices(vertices: &[SpherePoint]) -> Vec<SpherePoint> {
    let mut out: Vec<SpherePoint> = Vec::with_capacity(vertices.len());
    for v in vertices {
        if out
            .last()
            .is_none_or(|last| geodesic_distance(last, v) > EPS_UNIT)
        {
            out.push(*v);
        }
    }
    while out.len() > 1 && geodesic_distance(&out[0], out.last().unwrap()) <= EPS_UNIT {
        out.pop();
    }
    out
}

/// Signed turning angle at `v` between arriving from `prev` and leaving to
/// `next`; positive for left turns.
fn turning_angle(prev: &SpherePoint, v: &SpherePoint, next: &SpherePoint) -> f64 {
    let n_in = prev.0.cross(&v.0).normalize();
    let n_out = v.0.cross(&next.0).normalize();
    let t_in = n_in.cross(&v.0);
    let t_out = n_out.cross(&v.0);
    t_in.cross(&t_out).dot(&v.0).atan2(t_in.dot(&t_out))
}

/// Splits the sphere along a simple closed loop.
///
/// The loop may be given either as a closed polyline or as an open one whose
/// last vertex repeats the first.
pub fn loop_partition(loop_: &SphericalPolyline) -> Result<LoopPartition, GeomError> {
    let vertices = dedup_vertices(&loop_.vertices);
    let n = vertices.len();
    if n < 2 {
        return Err(GeomError::TooFewVertices { needed: 3, got: n });
    }
    let poly = SphericalPolyline::new(vertices, true)?;
    let edges = poly.edges();
    if n == 2 {
        return Err(GeomError::DegenerateLoop { area: 0.0 });
    }
    if let Some(hit) = (2..edges.len()).find_map(|j| first_hit_against_earlier(&edges, j, Some(n)))
    {
        return Err(GeomError::NotSimple(hit.edge_i, hit.edge_j));
    }

    let v = &poly.vertices;
    let turning: f64 = (0..n)
        .map(|i| turning_angle(&v[(i + n - 1) % n], &v[i], &v[(i + 1) % n]))
        .sum();
    let left = 2.0 * PI - turning;
    let right = FOUR_PI - left;
    let min_area = left.min(right);
    if min_area < EPS_AREA {
        return Err(GeomError::DegenerateLoop { area: min_area });
    }

    let (rep_left, rep_right) = representatives(&edges)?;
    Ok(LoopPartition {
        loop_: poly,
        component_areas: [left, right],
        representative_points: [rep_left, rep_right],
        edges,
    })
}

/// Offsets from the midpoint of a long edge along both normals, by half the
/// local clearance.
fn representatives(edges: &[GeodesicArc]) -> Result<(SpherePoint, SpherePoint), GeomError> {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| edges[b].length.total_cmp(&edges[a].length).then(a.cmp(&b)));
    let mut best: Option<(f64, usize)> = None;
    for &i in order.iter().take(8) {
        let m = edges[i].midpoint();
        let clearance = edges
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, e)| e.distance_to(&m))
            .fold(edges[i].length / 2.0, f64::min);
        if best.is_none_or(|(c, _)| clearance > c) {
            best = Some((clearance, i));
        }
    }
    let (clearance, i) = best.ok_or(GeomError::DegenerateLoop { area: 0.0 })?;
    let h = 0.5 * clearance.min(0.1);
    if h <= 2.0 * EPS_ON_CURVE {
        return Err(GeomError::DegenerateLoop { area: 0.0 });
    }
    let m = edges[i].midpoint();
    let n = edges[i].normal;
    Ok((m.exp(&(n * h)), m.exp(&(-n * h))))
}

/// Classifies `x` against a partition: crossing parity of a geodesic path
/// to the component-0 representative.
pub fn point_component(partition: &LoopPartition, x: &SpherePoint) -> PointSide {
    partition.classify(x)
}

/// Rotation matrix about `axis` by `angle` (right-hand rule).
pub fn rotation_matrix(axis: &SpherePoint, angle: f64) -> Matrix3<f64> {
    let u = axis.vec();
    let (s, c) = angle.sin_cos();
    let k = Matrix3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0);
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn p(x: f64, y: f64, z: f64) -> SpherePoint {
        SpherePoint::new(x, y, z).unwrap()
    }

    fn arc(a: SpherePoint, b: SpherePoint) -> GeodesicArc {
        GeodesicArc::new(a, b).unwrap()
    }

    fn equator_ngon(n: usize) -> Vec<SpherePoint> {
        (0..n)
            .map(|i| SpherePoint::from_spherical(PI / 2.0, 2.0 * PI * i as f64 / n as f64))
            .collect()
    }

    #[test]
    fn distance_examples() {
        assert_abs_diff_eq!(
            geodesic_distance(&p(1., 0., 0.), &p(0., 1., 0.)),
            PI / 2.0,
            epsilon = 1e-15
        );
        let q = p(0.3, -0.2, 0.9);
        assert_eq!(geodesic_distance(&q, &q), 0.0);
        assert_abs_diff_eq!(
            geodesic_distance(&p(1., 0., 0.), &p(-1., 0., 0.)),
            PI,
            epsilon = 1e-15
        );
    }

    #[test]
    fn minimal_arc_examples() {
        let a = arc(p(1., 0., 0.), p(0., 1., 0.));
        let m = a.point_at(0.5);
        assert_abs_diff_eq!(m.x(), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.y(), FRAC_1_SQRT_2, epsilon = 1e-15);
        let d = arc(p(0., 0., 1.), p(0., 0., 1.));
        assert!(d.is_degenerate());
        assert_eq!(d.length(), 0.0);
        assert_eq!(
            GeodesicArc::new(p(1., 0., 0.), p(-1., 0., 0.)),
            Err(GeomError::AntipodalEndpoints)
        );
    }

    #[test]
    fn intersection_examples() {
        let s = FRAC_1_SQRT_2;
        let eq = arc(p(1., 0., 0.), p(0., 1., 0.));
        let mer = arc(p(0.5, 0.5, s), p(0.5, 0.5, -s));
        let x = arc_intersection(&eq, &mer).unwrap();
        assert_abs_diff_eq!(x.x(), s, epsilon = 1e-14);
        assert_abs_diff_eq!(x.y(), s, epsilon = 1e-14);
        assert_abs_diff_eq!(x.z(), 0.0, epsilon = 1e-14);

        let north = arc(p(1., 0., 1.), p(0., 1., 1.));
        let south = arc(p(1., 0., -1.), p(0., 1., -1.));
        assert_eq!(arc_intersection(&north, &south), None);

        let a = arc(p(0., 0., 1.), p(1., 0., 0.));
        let b = arc(p(0., 1., 0.), p(0., 0., 1.));
        assert_eq!(arc_intersection(&a, &b), Some(p(0., 0., 1.)));
    }

    #[test]
    fn cocircular_overlap_returns_first_point_along_a() {
        let pts = equator_ngon(12);
        let a = arc(pts[0], pts[2]);
        let b = arc(pts[1], pts[3]);
        assert_eq!(arc_intersection(&a, &b), Some(pts[1]));
        assert_eq!(arc_intersection(&b, &a), Some(pts[1]));
        let c = arc(pts[4], pts[5]);
        assert_eq!(arc_intersection(&a, &c), None);
    }

    #[test]
    fn hexagon_closure_is_reported_at_start() {
        let mut v = equator_ngon(6);
        v.push(v[0]);
        let poly = SphericalPolyline::new(v.clone(), false).unwrap();
        let hit = polyline_first_self_intersection(&poly).unwrap();
        assert_eq!((hit.edge_i, hit.edge_j), (0, 5));
        assert_eq!(hit.point, v[0]);
    }

    #[test]
    fn figure_eight_crossing_matches_brute_force() {
        // Two lobes through the crossing point (1,0,0).
        let v = vec![
            p(1.0, -0.2, -0.2),
            p(1.0, 0.2, 0.2),
            p(1.0, 0.4, 0.0),
            p(1.0, 0.2, -0.2),
            p(1.0, -0.2, 0.2),
            p(1.0, -0.4, 0.0),
        ];
        let poly = SphericalPolyline::new(v, false).unwrap();
        let hit = polyline_first_self_intersection(&poly).unwrap();
        let edges = poly.edges();
        let mut brute = None;
        'outer: for j in 0..edges.len() {
            for i in 0..j.saturating_sub(1) {
                if let Some(x) = arc_intersection(&edges[i], &edges[j]) {
                    brute = Some((i, j, x));
                    break 'outer;
                }
            }
        }
        let (i, j, x) = brute.unwrap();
        assert_eq!((hit.edge_i, hit.edge_j), (i, j));
        assert!(geodesic_distance(&hit.point, &x) < 1e-14);
        assert!(geodesic_distance(&hit.point, &p(1., 0., 0.)) < 1e-12);
    }

    #[test]
    fn spiral_has_no_self_intersection() {
        let v: Vec<_> = (0..4)
            .map(|i| SpherePoint::from_spherical(0.3 + 0.2 * i as f64, 0.8 * i as f64))
            .collect();
        let poly = SphericalPolyline::new(v, false).unwrap();
        assert_eq!(polyline_first_self_intersection(&poly), None);
    }

    #[test]
    fn partition_examples() {
        let hex = SphericalPolyline::new(equator_ngon(6), true).unwrap();
        let part = loop_partition(&hex).unwrap();
        let [a0, a1] = part.component_areas();
        assert_abs_diff_eq!(a0, 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(a1, 2.0 * PI, epsilon = 1e-12);

        let tri = SphericalPolyline::new(vec![p(1., 0., 0.), p(0., 1., 0.), p(0., 0., 1.)], true)
            .unwrap();
        let part = loop_partition(&tri).unwrap();
        let [a0, a1] = part.component_areas();
        assert_abs_diff_eq!(a0, PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a1, 4.0 * PI - PI / 2.0, epsilon = 1e-12);

        let tiny =
            SphericalPolyline::new(vec![p(1., 0., 0.), p(1., 1e-7, 0.), p(1., 0., 1e-7)], true)
                .unwrap();
        assert!(matches!(
            loop_partition(&tiny),
            Err(GeomError::DegenerateLoop { .. })
        ));
    }

    #[test]
    fn point_component_examples() {
        let hex = SphericalPolyline::new(equator_ngon(6), true).unwrap();
        let part = loop_partition(&hex).unwrap();
        // Counter-clockwise seen from above: north is on the left.
        assert_eq!(
            point_component(&part, &SpherePoint::north()),
            PointSide::Component(0)
        );
        assert_eq!(
            point_component(&part, &SpherePoint::south()),
            PointSide::Component(1)
        );
        for (i, r) in part.representative_points().iter().enumerate() {
            assert_eq!(point_component(&part, r), PointSide::Component(i));
        }
        assert_eq!(
            point_component(&part, &hex.vertices()[2]),
            PointSide::OnCurve
        );
    }

    #[test]
    fn loop_partition_rejects_self_crossing() {
        let v = vec![
            p(1.0, -0.2, -0.2),
            p(1.0, 0.2, 0.2),
            p(1.0, 0.2, -0.2),
            p(1.0, -0.2, 0.2),
        ];
        let poly = SphericalPolyline::new(v, true).unwrap();
        assert!(matches!(
            loop_partition(&poly),
            Err(GeomError::NotSimple(..))
        ));
    }

    fn unit() -> impl Strategy<Value = SpherePoint> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| p(x, y, z))
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in unit(), b in unit(), c in unit()) {
            let lhs = geodesic_distance(&a, &c);
            let rhs = geodesic_distance(&a, &b) + geodesic_distance(&b, &c);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn distance_is_rotation_invariant(a in unit(), b in unit(), axis in unit(), angle in -3.0f64..3.0) {
            let r = rotation_matrix(&axis, angle);
            let d0 = geodesic_distance(&a, &b);
            let d1 = geodesic_distance(&a.rotated(&r), &b.rotated(&r));
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn slerp_endpoints_and_norm(a in unit(), b in unit(), t in 0.0f64..1.0) {
            prop_assume!(a.dot(&b) > -1.0 + 1e-6);
            let arc = GeodesicArc::new(a, b).unwrap();
            prop_assert!(geodesic_distance(&arc.point_at(0.0), &a) < 1e-12);
            prop_assert!(geodesic_distance(&arc.point_at(1.0), &b) < 1e-12);
            prop_assert!((arc.point_at(t).vec().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn intersection_is_symmetric(a0 in unit(), a1 in unit(), b0 in unit(), b1 in unit()) {
            prop_assume!(a0.dot(&a1) > -0.99 && b0.dot(&b1) > -0.99);
            let a = GeodesicArc::new(a0, a1).unwrap();
            let b = GeodesicArc::new(b0, b1).unwrap();
            let ab = arc_intersection(&a, &b);
            let ba = arc_intersection(&b, &a);
            prop_assert_eq!(ab.is_some(), ba.is_some());
            if let Some(x) = ab {
                prop_assert!(a.distance_to(&x) < 1e-10);
                prop_assert!(b.distance_to(&x) < 1e-10);
            }
        }
    }

    /// Independent classifier: winding number of the densified loop around
    /// `x` in the stereographic chart that sends `pole` to infinity.
    fn winding_oracle(part: &LoopPartition, x: &SpherePoint, pole: &SpherePoint) -> i64 {
        let (e1, e2) = pole.antipode().tangent_frame();
        let chart = |q: &SpherePoint| {
            let v = q.vec();
            let denom = 1.0 - v.dot(pole.vec());
            (v.dot(&e1) / denom, v.dot(&e2) / denom)
        };
        let (cx, cy) = chart(x);
        let mut pts = Vec::new();
        for e in part.edges() {
            for k in 0..32 {
                pts.push(chart(&e.point_at(k as f64 / 32.0)));
            }
        }
        let mut total = 0.0;
        for i in 0..pts.len() {
            let (ax, ay) = (pts[i].0 - cx, pts[i].1 - cy);
            let (bx, by) = (
                pts[(i + 1) % pts.len()].0 - cx,
                pts[(i + 1) % pts.len()].1 - cy,
            );
            total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
        }
        (total / (2.0 * PI)).round() as i64
    }

    #[test]
    fn parity_agrees_with_winding_oracle_on_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        // A wiggly non-convex loop around the z-axis.
        let v: Vec<_> = (0..40)
            .map(|i| {
                let lon = 2.0 * PI * i as f64 / 40.0;
                let colat = 1.0 + 0.35 * (5.0 * lon).sin();
                SpherePoint::from_spherical(colat, lon)
            })
            .collect();
        let part = loop_partition(&SphericalPolyline::new(v, true).unwrap()).unwrap();
        let [a0, a1] = part.component_areas();
        assert!((a0 + a1 - 4.0 * PI).abs() < 1e-8);
        let pole = part.representative_points()[1];
        let mut checked = 0;
        for _ in 0..1000 {
            let x = p(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if part.distance_to_loop(&x) < 1e-3 || geodesic_distance(&x, &pole) < 1e-3 {
                continue;
            }
            let expected = if winding_oracle(&part, &x, &pole) != 0 {
                0
            } else {
                1
            };
            assert_eq!(
                point_component(&part, &x),
                PointSide::Component(expected),
                "{x:?}"
            );
            checked += 1;
        }
        assert!(checked > 900);
    }
}
