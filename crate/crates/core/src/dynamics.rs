//! Orbits, finite-budget recurrence tests, fixed points, and invariance of
//! fixed-point sets.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffeo::MapExpr;
use crate::geom::{geodesic_distance, SpherePoint, Vec3};
use crate::mesh::Icosphere;

pub const EXACT_PERIOD_DELTA: f64 = 1e-9;
pub const DEFAULT_ORBIT_LENGTH: usize = 10_000;
pub const DEFAULT_RECURRENCE_DELTA: f64 = 1e-6;
const MAX_LOCAL_SEEDS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("no recurrent point found within {n} iterates at threshold {delta:e} (best return {best:e}); raise N or δ")]
    NoRecurrenceFound { n: usize, delta: f64, best: f64 },
    #[error("no fixed points found")]
    NoFixedPointsFound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub base: SpherePoint,
    pub map: String,
    /// `points[i] = fⁱ(base)`, `i = 0..=N`.
    pub points: Vec<SpherePoint>,
    /// `(i, d(fⁱ(p), p))` minimizing the distance over `1 ≤ i ≤ N`.
    pub min_return: (usize, f64),
    pub exact_period: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub recurrent: bool,
    pub witness_index: Option<usize>,
    pub witness_distance: f64,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub fixed_points_checked: usize,
    pub max_violation: f64,
    pub holds: bool,
}

fn iterate(f: &MapExpr, p: &SpherePoint, n: usize) -> Vec<SpherePoint> {
    let mut pts = Vec::with_capacity(n + 1);
    pts.push(*p);
    for i in 0..n {
        let next = f.evaluate(&pts[i]);
        pts.push(next);
    }
    pts
}

fn argmin_return(points: &[SpherePoint]) -> (usize, f64) {
    let base = points[0];
    points
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, q)| (i, geodesic_distance(q, &base)))
        .fold(
            (0, f64::INFINITY),
            |best, c| if c.1 < best.1 { c } else { best },
        )
}

pub fn semiorbit(f: &MapExpr, name: &str, p: &SpherePoint, n: usize) -> OrbitRecord {
    assert!(n >= 1, "orbit length must be positive");
    let points = iterate(f, p, n);
    let min_return = argmin_return(&points);
    let exact_period = (1..=n).find(|&i| geodesic_distance(&points[i], p) < EXACT_PERIOD_DELTA);
    OrbitRecord {
        base: *p,
        map: name.to_string(),
        points,
        min_return,
        exact_period,
    }
}

/// Recurrent iff some `1 ≤ i ≤ N` has `d(fⁱ(p), p) < δ`; the witness is the
/// first minimizer.
pub fn recurrence_scan(f: &MapExpr, p: &SpherePoint, n: usize, delta: f64) -> RecurrenceReport {
    assert!(n >= 1 && delta > 0.0);
    let (i, d) = argmin_return(&iterate(f, p, n));
    RecurrenceReport {
        recurrent: d < delta,
        witness_index: Some(i),
        witness_distance: d,
        threshold: delta,
    }
}

/// A numerically ω-recurrent point in the closure of the orbit of `p`: the
/// iterate in the trailing window `N/2..=N` whose forward return (within
/// `N/2` further steps) is closest, accepted only if it passes
/// [`recurrence_scan`] at `δ`.
pub fn recurrent_point_in_closure(
    f: &MapExpr,
    p: &SpherePoint,
    n: usize,
    delta: f64,
) -> Result<SpherePoint, DynamicsError> {
    assert!(n >= 2 && delta > 0.0);
    if geodesic_distance(&f.evaluate(p), p) == 0.0 {
        return Ok(*p);
    }
    let half = n / 2;
    let pts = iterate(f, p, n + half);
    let scores: Vec<f64> = (half..=n)
        .into_par_iter()
        .map(|j| {
            let x = pts[j].vec();
            (1..=half)
                .map(|i| (pts[j + i].vec() - x).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let (offset, _) =
        scores.iter().enumerate().fold(
            (0, f64::INFINITY),
            |b, (i, &s)| if s < b.1 { (i, s) } else { b },
        );
    let q = pts[half + offset];
    let report = recurrence_scan(f, &q, n, delta);
    if report.recurrent {
        Ok(q)
    } else {
        Err(DynamicsError::NoRecurrenceFound {
            n,
            delta,
            best: report.witness_distance,
        })
    }
}

/// `d(x, f(x))`.
pub fn residual(f: &MapExpr, x: &SpherePoint) -> f64 {
    geodesic_distance(x, &f.evaluate(x))
}

pub fn max_residual(maps: &[&MapExpr], x: &SpherePoint) -> f64 {
    maps.iter().map(|f| residual(f, x)).fold(0.0, f64::max)
}

/// Tangent-chart residual `(eᵢ·(f(x) − x))` and Jacobian `eᵢ·Df eⱼ − δᵢⱼ`
/// accumulated as normal equations over all maps.
fn normal_equations(maps: &[&MapExpr], x: &SpherePoint) -> (Matrix2<f64>, Vector2<f64>, f64) {
    let (e1, e2) = x.tangent_frame();
    let mut jtj = Matrix2::zeros();
    let mut jtf = Vector2::zeros();
    let mut phi = 0.0;
    for f in maps {
        let mut frame = [e1, e2];
        let y = f.transport(*x.vec(), &mut frame, false);
        let d: Vec3 = y - x.vec();
        let r = Vector2::new(e1.dot(&d), e2.dot(&d));
        let j = Matrix2::new(
            e1.dot(&frame[0]) - 1.0,
            e1.dot(&frame[1]),
            e2.dot(&frame[0]),
            e2.dot(&frame[1]) - 1.0,
        );
        jtj += j.transpose() * j;
        jtf += j.transpose() * r;
        phi += r.norm_squared();
    }
    (jtj, jtf, phi)
}

fn pattern_search(maps: &[&MapExpr], x0: SpherePoint, tol: f64) -> SpherePoint {
    let mut x = x0;
    let mut best = max_residual(maps, &x);
    let mut step = best.max(tol);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..2000 {
        if best < 1e-3 * tol || step < 1e-16 {
            break;
        }
        let (e1, e2) = x.tangent_frame();
        let mut moved = None;
        for d in [
            e1,
            -e1,
            e2,
            -e2,
            (e1 + e2) * s,
            (e1 - e2) * s,
            (e2 - e1) * s,
            -(e1 + e2) * s,
        ] {
            let y = x.exp(&(d * step));
            let v = max_residual(maps, &y);
            if v < best {
                best = v;
                moved = Some(y);
            }
        }
        match moved {
            Some(y) => x = y,
            None => step *= 0.5,
        }
    }
    x
}

/// Damped Gauss–Newton (Levenberg–Marquardt) on the stacked displacement of
/// all `maps`, falling back to pattern search after repeated failed steps.
/// Returns the refined point if every residual ends below `tol`.
pub fn refine_fixed_point(maps: &[&MapExpr], x0: &SpherePoint, tol: f64) -> Option<SpherePoint> {
    let mut x = *x0;
    let (mut jtj, mut jtf, mut phi) = normal_equations(maps, &x);
    let mut mu = 1e-3 * jtj.diagonal().max().max(1e-300);
    let mut failures = 0;
    let mut consecutive = 0;
    for _ in 0..100 {
        if phi.sqrt() < 1e-4 * tol {
            break;
        }
        let a = jtj + Matrix2::identity() * mu;
        let Some(delta) = a.lu().solve(&(-jtf)) else {
            mu *= 10.0;
            continue;
        };
        let (e1, e2) = x.tangent_frame();
        let y = x.exp(&(e1 * delta[0] + e2 * delta[1]));
        let (jtj2, jtf2, phi2) = normal_equations(maps, &y);
        if phi2 < phi {
            x = y;
            (jtj, jtf, phi) = (jtj2, jtf2, phi2);
            mu = (mu / 3.0).max(1e-300);
            consecutive = 0;
        } else {
            mu *= 4.0;
            failures += 1;
            consecutive += 1;
            if consecutive >= 3 && failures > 6 {
                x = pattern_search(maps, x, tol);
                break;
            }
        }
    }
    (max_residual(maps, &x) < tol).then_some(x)
}

fn dedupe(points: Vec<SpherePoint>, radius: f64) -> Vec<SpherePoint> {
    let mut out: Vec<SpherePoint> = Vec::new();
    for p in points {
        if out.iter().all(|q| geodesic_distance(&p, q) >= radius) {
            out.push(p);
        }
    }
    out
}

/// Numerical common fixed points of `maps`: mesh vertices whose residual is
/// already below `tol`, plus refined local minima of the residual. When every
/// vertex is fixed the maps are treated as the identity and the twelve base
/// icosahedron vertices are returned.
pub fn common_fixed_points(maps: &[&MapExpr], mesh_level: u32, tol: f64) -> Vec<SpherePoint> {
    assert!(tol > 0.0);
    let mesh = Icosphere::cached(mesh_level);
    let verts = mesh.vertices();
    let res: Vec<f64> = verts.par_iter().map(|x| max_residual(maps, x)).collect();
    if res.iter().all(|&r| r < tol) {
        return verts[..12].to_vec();
    }
    let fixed: Vec<SpherePoint> = (0..verts.len())
        .filter(|&i| res[i] < tol)
        .map(|i| verts[i])
        .collect();
    let mut minima: Vec<usize> = (0..verts.len())
        .filter(|&i| res[i] >= tol && mesh.neighbors(i).iter().all(|&j| res[i] <= res[j]))
        .collect();
    minima.sort_by(|&a, &b| res[a].total_cmp(&res[b]).then(a.cmp(&b)));
    minima.truncate(MAX_LOCAL_SEEDS);
    let refined: Vec<Option<SpherePoint>> = minima
        .par_iter()
        .map(|&i| refine_fixed_point(maps, &verts[i], tol))
        .collect();
    let all: Vec<SpherePoint> = fixed
        .into_iter()
        .chain(refined.into_iter().flatten())
        .collect();
    dedupe(all, 10.0 * tol)
}

pub fn fixed_points_of_map(f: &MapExpr, mesh_level: u32, tol: f64) -> Vec<SpherePoint> {
    common_fixed_points(&[f], mesh_level, tol)
}

/// Maps up to `samples` common fixed points `x` of `g_set` by `f` and measures
/// how far `f(x)` is from being fixed by `g_set`.
pub fn invariance_check(
    g_set: &[&MapExpr],
    f: &MapExpr,
    samples: usize,
    mesh_level: u32,
    tol: f64,
) -> Result<InvarianceReport, DynamicsError> {
    let fixed = common_fixed_points(g_set, mesh_level, tol);
    if fixed.is_empty() || samples == 0 {
        return Err(DynamicsError::NoFixedPointsFound);
    }
    let stride = fixed.len().div_ceil(samples).max(1);
    let chosen: Vec<&SpherePoint> = fixed.iter().step_by(stride).take(samples).collect();
    let max_violation = chosen
        .iter()
        .map(|x| max_residual(g_set, &f.evaluate(x)))
        .fold(0.0, f64::max);
    Ok(InvarianceReport {
        fixed_points_checked: chosen.len(),
        max_violation,
        holds: max_violation < 10.0 * tol,
    })
}
