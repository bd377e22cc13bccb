//! Character curves: the polyline through an orbit `p, f(p), f²(p), …`
//! joined by minimal geodesic arcs, the simple loop it closes, and
//! geometric checks on pairs of such curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffeo::{in_neighborhood_vk, MapExpr, Verdict};
use crate::dynamics::{fixed_points_of_map, residual, EXACT_PERIOD_DELTA};
use crate::geom::{
    arc_distance, arc_intersection, geodesic_distance, loop_partition, GeodesicArc, GeomError,
    LoopPartition, PointSide, SpherePoint, SphericalPolyline, EPS_ANTIPODAL, EPS_ON_CURVE,
};

pub const DEFAULT_MAX_SEGMENTS: usize = 20_000;
const FIXED_POINT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("base point is numerically fixed (displacement {0:e})")]
    FixedBasePoint(f64),
    #[error("orbit step {0} joins nearly antipodal points")]
    AntipodalOrbitStep(usize),
    #[error("orbit did not close within {0} segments")]
    TruncationBeforeClosure(usize),
    #[error("map is not in V1 (estimated ‖f − Id‖₁ = {0:.6e})")]
    NotInV1(f64),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureKind {
    SelfIntersection,
    ExactPeriod,
    Truncated,
}

/// Orbit polyline together with how (and whether) it closed up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    pub polyline: SphericalPolyline,
    pub closure_kind: ClosureKind,
    /// Closed loop vertices; empty when truncated.
    pub loop_vertices: Vec<SpherePoint>,
    /// Earlier and later edge that meet (for self-intersection closure).
    pub closing_edges: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharacterCurve {
    pub base: SpherePoint,
    pub map: String,
    pub polyline: SphericalPolyline,
    #[serde(rename = "loop")]
    pub loop_: SphericalPolyline,
    pub closure_kind: ClosureKind,
    pub closing_edges: Option<(usize, usize)>,
    #[serde(skip)]
    pub partition: Option<LoopPartition>,
}

impl CharacterCurve {
    pub fn partition(&self) -> &LoopPartition {
        self.partition
            .as_ref()
            .expect("character curves carry their partition")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallExclusionReport {
    pub radius: f64,
    /// `None` when no fixed point was located anywhere.
    pub nearest_fixed_distance: Option<f64>,
    pub holds: bool,
    pub membership: Verdict,
}

/// Earliest-closing hit on the new edge `j`: the non-adjacent earlier edge
/// whose meeting point is nearest to the start of edge `j`.
fn nearest_hit(edges: &[GeodesicArc], j: usize) -> Option<(f64, usize, SpherePoint)> {
    let ej = &edges[j];
    let mut best: Option<(f64, usize, SpherePoint)> = None;
    for (i, ei) in edges.iter().enumerate().take(j.saturating_sub(1)) {
        if (ei.start().vec() - ej.start().vec()).norm() > ei.length() + ej.length() + 1e-9 {
            continue;
        }
        if let Some(x) = arc_intersection(ei, ej) {
            let t = ej.param_of(&x);
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, i, x));
            }
        }
    }
    best
}

/// Follows the orbit of `p` until the polyline meets itself, the orbit
/// returns to `p` within 1e-9, or `max_segments` edges have been drawn.
pub fn trace_orbit(
    f: &MapExpr,
    p: &SpherePoint,
    max_segments: usize,
) -> Result<OrbitTrace, CurveError> {
    let first = f.evaluate(p);
    let d0 = geodesic_distance(p, &first);
    if d0 <= EPS_ON_CURVE {
        return Err(CurveError::FixedBasePoint(d0));
    }
    let mut vertices = vec![*p];
    let mut edges: Vec<GeodesicArc> = Vec::new();
    let mut next = first;
    for j in 0..max_segments {
        let cur = vertices[j];
        if cur.dot(&next) <= -1.0 + EPS_ANTIPODAL {
            return Err(CurveError::AntipodalOrbitStep(j));
        }
        edges.push(GeodesicArc::new(cur, next)?);
        let periodic = geodesic_distance(&next, p) < EXACT_PERIOD_DELTA;
        let hit = nearest_hit(&edges, j);
        if periodic && hit.is_none_or(|(_, _, x)| geodesic_distance(&x, p) < EXACT_PERIOD_DELTA) {
            let loop_vertices = vertices.clone();
            vertices.push(next);
            return Ok(OrbitTrace {
                polyline: SphericalPolyline::new(vertices, false)?,
                closure_kind: ClosureKind::ExactPeriod,
                loop_vertices,
                closing_edges: Some((0, j)),
            });
        }
        if let Some((_, i, x)) = hit {
            let mut loop_vertices = vec![x];
            loop_vertices.extend_from_slice(&vertices[i + 1..=j]);
            vertices.push(next);
            return Ok(OrbitTrace {
                polyline: SphericalPolyline::new(vertices, false)?,
                closure_kind: ClosureKind::SelfIntersection,
                loop_vertices,
                closing_edges: Some((i, j)),
            });
        }
        vertices.push(next);
        next = f.evaluate(&next);
    }
    Ok(OrbitTrace {
        polyline: SphericalPolyline::new(vertices, false)?,
        closure_kind: ClosureKind::Truncated,
        loop_vertices: Vec::new(),
        closing_edges: None,
    })
}

pub fn build_character_polyline(
    f: &MapExpr,
    p: &SpherePoint,
    max_segments: usize,
) -> Result<SphericalPolyline, CurveError> {
    Ok(trace_orbit(f, p, max_segments)?.polyline)
}

/// The first simple loop of the orbit polyline and the two disks it bounds.
pub fn extract_character_curve(
    f: &MapExpr,
    name: &str,
    p: &SpherePoint,
    max_segments: usize,
) -> Result<CharacterCurve, CurveError> {
    let trace = trace_orbit(f, p, max_segments)?;
    if trace.closure_kind == ClosureKind::Truncated {
        return Err(CurveError::TruncationBeforeClosure(max_segments));
    }
    let loop_ = SphericalPolyline::new(trace.loop_vertices, true)?;
    let partition = loop_partition(&loop_)?;
    Ok(CharacterCurve {
        base: *p,
        map: name.to_string(),
        polyline: trace.polyline,
        loop_,
        closure_kind: trace.closure_kind,
        closing_edges: trace.closing_edges,
        partition: Some(partition),
    })
}

/// Checks that no fixed point of `f` lies in the open ball of radius
/// `4·d(p, f(p))` about `p`. Fixed points come from a mesh search plus a
/// polar sample of the ball itself.
pub fn verify_ball_exclusion(
    f: &MapExpr,
    p: &SpherePoint,
) -> Result<BallExclusionReport, CurveError> {
    let membership = in_neighborhood_vk(f, 1);
    if membership.verdict == Verdict::Outside {
        return Err(CurveError::NotInV1(membership.estimate.sampled_sup));
    }
    let d = residual(f, p);
    if d <= EPS_ON_CURVE {
        return Err(CurveError::FixedBasePoint(d));
    }
    let radius = 4.0 * d;
    let mut nearest = fixed_points_of_map(f, 4, FIXED_POINT_TOL)
        .iter()
        .map(|q| geodesic_distance(p, q))
        .fold(f64::INFINITY, f64::min);
    let (e1, e2) = p.tangent_frame();
    let rings = 40;
    let spokes = 72;
    let sampled = (1..=rings)
        .into_par_iter()
        .map(|i| {
            let r = radius * f64::from(i) / f64::from(rings + 1);
            (0..spokes)
                .map(|k| {
                    let a = std::f64::consts::TAU * f64::from(k) / f64::from(spokes);
                    p.exp(&((e1 * a.cos() + e2 * a.sin()) * r))
                })
                .filter(|x| residual(f, x) < FIXED_POINT_TOL)
                .map(|x| geodesic_distance(p, &x))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    nearest = nearest.min(sampled);
    let nearest_fixed_distance = nearest.is_finite().then_some(nearest);
    Ok(BallExclusionReport {
        radius,
        nearest_fixed_distance,
        holds: nearest_fixed_distance.is_none_or(|n| n >= radius - 1e-9),
        membership: membership.verdict,
    })
}

fn edge_lists(
    a: &SphericalPolyline,
    b: &SphericalPolyline,
) -> (Vec<GeodesicArc>, Vec<GeodesicArc>) {
    (a.edges(), b.edges())
}

/// True iff no edge of `a` meets an edge of `b`.
pub fn curves_disjoint(a: &SphericalPolyline, b: &SphericalPolyline) -> bool {
    let (ea, eb) = edge_lists(a, b);
    !ea.par_iter().any(|x| {
        eb.iter().any(|y| {
            (x.start().vec() - y.start().vec()).norm() <= x.length() + y.length() + 1e-9
                && arc_intersection(x, y).is_some()
        })
    })
}

/// Minimum geodesic distance between the edges of `a` and `b`.
pub fn curve_distance(a: &SphericalPolyline, b: &SphericalPolyline) -> f64 {
    let (ea, eb) = edge_lists(a, b);
    if ea.is_empty() || eb.is_empty() {
        return a
            .vertices()
            .iter()
            .map(|v| b.distance_to(v))
            .chain(b.vertices().iter().map(|v| a.distance_to(v)))
            .fold(f64::INFINITY, f64::min);
    }
    ea.par_iter()
        .map(|x| {
            let mut best = f64::INFINITY;
            for y in &eb {
                // chord ≤ geodesic, so this bounds the arc distance from below
                let lower = (x.start().vec() - y.start().vec()).norm() - x.length() - y.length();
                if lower < best {
                    best = best.min(arc_distance(x, y));
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// True iff every vertex of `curve` lies in component `side` of the
/// partition and no edge of `curve` meets the partition loop.
pub fn curve_in_disk(curve: &SphericalPolyline, partition: &LoopPartition, side: usize) -> bool {
    curve
        .vertices()
        .par_iter()
        .all(|v| partition.classify(v) == PointSide::Component(side))
        && curves_disjoint(curve, partition.loop_polyline())
}

/// Points stratified along the edges in proportion to edge length.
pub fn sample_polyline(curve: &SphericalPolyline, count: usize) -> Vec<SpherePoint> {
    let edges = curve.edges();
    let total: f64 = edges.iter().map(GeodesicArc::length).sum();
    if edges.is_empty() || total == 0.0 {
        return curve.vertices().to_vec();
    }
    let mut out = Vec::with_capacity(count + edges.len());
    for e in &edges {
        let k = ((count as f64) * e.length() / total).ceil().max(1.0) as usize;
        out.extend((0..k).map(|i| e.point_at((i as f64 + 0.5) / k as f64)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{BumpProfile, FieldRegistry, Mobius, VectorField};
    use crate::geom::rotation_matrix;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn rot(axis: SpherePoint, angle: f64) -> MapExpr {
        MapExpr::rotation(axis, angle)
    }

    fn latitude_polygon(colat: f64, n: usize) -> SphericalPolyline {
        let v = (0..n)
            .map(|i| SpherePoint::from_spherical(colat, 2.0 * PI * i as f64 / n as f64))
            .collect();
        SphericalPolyline::new(v, true).unwrap()
    }

    /// Twist about `axis` supported on the cap `axis·x > cos(radius)`.
    fn cap_twist(axis: SpherePoint, radius: f64, amplitude: f64) -> MapExpr {
        let t0 = radius.cos();
        let c = 0.5 * (t0 + 0.999);
        let r = 0.5 * (0.999 - t0);
        MapExpr::twist(axis, BumpProfile::new(amplitude, c, r).unwrap())
    }

    fn flow_about_north() -> MapExpr {
        let mut reg = FieldRegistry::new();
        reg.insert(
            "loc",
            VectorField::localized_rotation(SpherePoint::north(), 1.2, 0.01).unwrap(),
        );
        reg.flow("loc", 1.0, Some(16)).unwrap()
    }

    #[test]
    fn polyline_examples() {
        let hex = build_character_polyline(
            &rot(SpherePoint::north(), PI / 3.0),
            &SpherePoint::x_axis(),
            100,
        )
        .unwrap();
        assert_eq!(hex.edge_count(), 6);
        assert!(hex.vertices().iter().all(|v| v.z().abs() < 1e-15));

        let fine = trace_orbit(
            &rot(SpherePoint::north(), 2.0 * PI / 2000.0),
            &SpherePoint::x_axis(),
            5000,
        )
        .unwrap();
        assert_eq!(fine.closure_kind, ClosureKind::ExactPeriod);
        assert_eq!(fine.loop_vertices.len(), 2000);

        assert!(matches!(
            build_character_polyline(&MapExpr::identity(), &SpherePoint::x_axis(), 10),
            Err(CurveError::FixedBasePoint(_))
        ));
    }

    #[test]
    fn extraction_examples() {
        let c = extract_character_curve(
            &rot(SpherePoint::north(), PI / 3.0),
            "r",
            &SpherePoint::x_axis(),
            100,
        )
        .unwrap();
        assert_eq!(c.closure_kind, ClosureKind::ExactPeriod);
        let [a0, a1] = c.partition().component_areas();
        assert_abs_diff_eq!(a0, 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(a1, 2.0 * PI, epsilon = 1e-12);

        let flow = flow_about_north();
        let p = SpherePoint::from_spherical(0.5, 0.3);
        let c = extract_character_curve(&flow, "loc", &p, 20_000).unwrap();
        let part = c.partition();
        let n = part.classify(&SpherePoint::north());
        let s = part.classify(&SpherePoint::south());
        assert!(matches!(n, PointSide::Component(_)) && matches!(s, PointSide::Component(_)));
        assert_ne!(n, s);
        assert!(c
            .loop_
            .vertices()
            .iter()
            .all(|v| (v.z() - p.z()).abs() < 1e-6));

        let s = 1.05f64.sqrt();
        let dilation = MapExpr::Mobius(
            Mobius::new(
                Complex64::new(s, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0 / s, 0.0),
            )
            .unwrap(),
        );
        assert_eq!(
            extract_character_curve(&dilation, "m", &SpherePoint::from_spherical(2.0, 0.4), 300)
                .unwrap_err(),
            CurveError::TruncationBeforeClosure(300)
        );
    }

    #[test]
    fn self_intersection_loop_is_simple() {
        // A twist whose orbit spirals is not available in closed form; use a
        // composition that produces a tilted closed-ish orbit.
        let f = crate::diffeo::commutator_map(
            &rot(SpherePoint::new(0.0, 0.3, 1.0).unwrap(), 0.9),
            &rot(SpherePoint::x_axis(), 0.2),
        );
        let p = SpherePoint::new(0.5, -0.3, 0.2).unwrap();
        let c = extract_character_curve(&f, "w", &p, 10_000).unwrap();
        assert!(crate::geom::polyline_first_self_intersection(&c.loop_).is_none());
        assert!(c.closure_kind != ClosureKind::Truncated);
    }

    #[test]
    fn no_fixed_point_on_curve() {
        let flow = flow_about_north();
        let c =
            extract_character_curve(&flow, "loc", &SpherePoint::from_spherical(0.7, 1.0), 20_000)
                .unwrap();
        let samples = sample_polyline(&c.loop_, 1000);
        assert!(samples.len() >= 1000);
        let min = samples
            .iter()
            .map(|x| residual(&flow, x))
            .fold(f64::INFINITY, f64::min);
        assert!(min > 1e-9, "{min:e}");
    }

    #[test]
    fn ball_exclusion_examples() {
        let r = rot(SpherePoint::north(), 0.004);
        let rep = verify_ball_exclusion(&r, &SpherePoint::x_axis()).unwrap();
        assert_abs_diff_eq!(rep.radius, 0.016, epsilon = 1e-9);
        assert_abs_diff_eq!(
            rep.nearest_fixed_distance.unwrap(),
            PI / 2.0,
            epsilon = 1e-9
        );
        assert!(rep.holds);

        let p = SpherePoint::from_spherical(0.1, 0.0);
        let rep = verify_ball_exclusion(&r, &p).unwrap();
        // d = 2·asin(sin(colat)·sin(θ/2)) ≈ θ·sin(colat)
        assert_abs_diff_eq!(
            rep.radius,
            8.0 * (0.1f64.sin() * 0.002f64.sin()).asin(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(rep.radius, 4.0 * 0.004 * 0.1f64.sin(), epsilon = 1e-8);
        assert!(rep.radius < 0.1 && rep.holds);

        let tw = MapExpr::twist(
            SpherePoint::north(),
            BumpProfile::new(0.002, 0.0, 0.6).unwrap(),
        );
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let z: f64 = rng.gen_range(-0.55..0.55);
            let p = SpherePoint::from_spherical(z.acos(), rng.gen_range(0.0..2.0 * PI));
            let rep = verify_ball_exclusion(&tw, &p).unwrap();
            assert!(rep.holds, "{p:?}: {rep:?}");
        }

        assert!(matches!(
            verify_ball_exclusion(&rot(SpherePoint::north(), 0.1), &SpherePoint::x_axis()),
            Err(CurveError::NotInV1(_))
        ));
    }

    #[test]
    fn disjointness_and_distance_examples() {
        let f = cap_twist(SpherePoint::x_axis(), 0.5, 0.3);
        let g = cap_twist(SpherePoint::y_axis(), 0.5, 0.3);
        let pf = SpherePoint::x_axis().exp(&(nalgebra::Vector3::new(0.0, 0.0, 0.3)));
        let pg = SpherePoint::y_axis().exp(&(nalgebra::Vector3::new(0.0, 0.0, 0.3)));
        let cf = extract_character_curve(&f, "f", &pf, 5000).unwrap();
        let cg = extract_character_curve(&g, "g", &pg, 5000).unwrap();
        assert!(curves_disjoint(&cf.polyline, &cg.polyline));
        assert!(!curves_disjoint(&cf.polyline, &cf.polyline));
        // Support caps of radius 0.5 about axes π/2 apart.
        assert!(curve_distance(&cf.polyline, &cg.polyline) >= PI / 2.0 - 1.0);

        let a = latitude_polygon(0.2f64.acos(), 64);
        let b = latitude_polygon(0.6f64.acos(), 64);
        assert!(curves_disjoint(&a, &b));

        let inner = latitude_polygon(0.4, 48);
        let equator = latitude_polygon(PI / 2.0, 48);
        assert_abs_diff_eq!(
            curve_distance(&inner, &equator),
            PI / 2.0 - 0.4,
            epsilon = 1e-9
        );
        let meridian = SphericalPolyline::new(
            vec![
                SpherePoint::north(),
                SpherePoint::x_axis(),
                SpherePoint::south(),
            ],
            false,
        )
        .unwrap();
        assert_eq!(curve_distance(&inner, &meridian), 0.0);
    }

    #[test]
    fn containment_examples() {
        let part = loop_partition(&latitude_polygon(PI / 2.0, 12)).unwrap();
        let north = match part.classify(&SpherePoint::north()) {
            PointSide::Component(c) => c,
            PointSide::OnCurve => unreachable!(),
        };
        let small = latitude_polygon(0.3, 20);
        assert!(curve_in_disk(&small, &part, north));
        assert!(!curve_in_disk(&small, &part, 1 - north));
        let crossing = SphericalPolyline::new(
            vec![
                SpherePoint::from_spherical(1.2, 0.1),
                SpherePoint::from_spherical(1.9, 0.2),
            ],
            false,
        )
        .unwrap();
        assert!(!curve_in_disk(&crossing, &part, 0));
        assert!(!curve_in_disk(&crossing, &part, 1));
    }

    #[test]
    fn orbit_steps_bound_curve_distance() {
        // p is moved by f and fixed by g, q the other way round.
        let f = cap_twist(SpherePoint::x_axis(), 0.6, 0.25);
        let g = cap_twist(SpherePoint::y_axis(), 0.6, -0.4);
        let p = SpherePoint::x_axis().exp(&nalgebra::Vector3::new(0.0, 0.2, 0.35));
        let q = SpherePoint::y_axis().exp(&nalgebra::Vector3::new(0.1, 0.0, -0.4));
        assert_eq!(residual(&g, &p), 0.0);
        assert_eq!(residual(&f, &q), 0.0);
        let cf = extract_character_curve(&f, "f", &p, 5000).unwrap();
        let cg = extract_character_curve(&g, "g", &q, 5000).unwrap();
        let step_min = |c: &CharacterCurve| {
            c.polyline
                .edges()
                .iter()
                .map(GeodesicArc::length)
                .fold(f64::INFINITY, f64::min)
        };
        let r = step_min(&cf).min(step_min(&cg));
        assert!(r > 0.0);
        assert!(curve_distance(&cf.polyline, &cg.polyline) >= r - 1e-9);
        assert!(curves_disjoint(&cf.polyline, &cg.polyline));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn loops_rotate_with_the_map(ax in -1.0f64..1.0, ay in -1.0f64..1.0, angle in 0.0f64..6.0) {
            let f = rot(SpherePoint::north(), 2.0 * PI / 24.0);
            let p = SpherePoint::from_spherical(1.0, 0.2);
            let c = extract_character_curve(&f, "f", &p, 100).unwrap();
            let axis = SpherePoint::new(ax, ay, 0.5).unwrap();
            let conj = rot(axis, angle);
            let g = f.conjugated_by(&conj);
            let m = rotation_matrix(&axis, angle);
            let c2 = extract_character_curve(&g, "g", &p.rotated(&m), 100).unwrap();
            for (u, v) in c.loop_.vertices().iter().zip(c2.loop_.vertices()) {
                prop_assert!(geodesic_distance(&u.rotated(&m), v) < 1e-9);
            }
            let a = c.partition().component_areas();
            let b = c2.partition().component_areas();
            prop_assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }
}
