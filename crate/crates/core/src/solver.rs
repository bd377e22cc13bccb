//! Common fixed points of nilpotent actions generated near the identity.
//!
//! The constructive path follows the induction of the fixed-point theorem:
//! generators are processed one at a time, and whenever the current point is
//! moved by the next map, a character curve of that map is drawn and the
//! search continues inside one of its disks. Two maps are reconciled by
//! alternating between them on strictly nested disks (the "nested-disk"
//! descent). Non-constructive steps of the proof (minimal sets, the
//! contradiction on infinite disk chains) are replaced by budgeted searches.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{curve_in_disk, extract_character_curve, ClosureKind, CurveError};
use crate::diffeo::{
    c1_deviation, exact_deviation, in_neighborhood_vk_with, DiffeoError, GeneratorTable, MapExpr,
    Verdict, VkMembership, DEFAULT_MARGIN,
};
use crate::dynamics::{recurrent_point_in_closure, refine_fixed_point, residual as map_residual};
use crate::geom::{geodesic_distance, GeodesicArc, LoopPartition, PointSide, SpherePoint};
use crate::group_words::{derived_generators, level_sets, Word};
use crate::mesh::Icosphere;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_EPS_NIL: f64 = 1e-9;
pub const SHRINK_FACTOR: f64 = 0.9;
pub const MAX_ROUNDS: usize = 50;
pub const ORBIT_CAP: usize = 100_000;
const BASE_REFINE_SEEDS: usize = 24;
const DIRECT_REFINE_SEEDS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),
    #[error("no convergence: {reason} (best residual {residual:e})")]
    NoConvergence {
        reason: String,
        best: Option<SpherePoint>,
        residual: f64,
    },
    #[error("orbit did not close within {0} segments")]
    TruncationBeforeClosure(usize),
    #[error("orbit exceeds {0} points; not finite within tolerance")]
    OrbitNotFinite(usize),
    #[error("orbit of the base point is trivial (every generator fixes it)")]
    OrbitTrivial,
    #[error(transparent)]
    Curve(CurveError),
    #[error(transparent)]
    Diffeo(#[from] DiffeoError),
}

impl From<CurveError> for SolverError {
    fn from(e: CurveError) -> Self {
        match e {
            CurveError::TruncationBeforeClosure(n) => SolverError::TruncationBeforeClosure(n),
            other => SolverError::Curve(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub orbit_length: usize,
    pub delta: f64,
    pub max_segments: usize,
    pub mesh_level: u32,
    pub margin: f64,
    pub eps_nil: f64,
    pub max_rounds: usize,
    pub shrink: f64,
    /// Starting point; defaults to the mesh vertex with the largest residual.
    #[serde(default)]
    pub start: Option<SpherePoint>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: DEFAULT_TOL,
            orbit_length: crate::dynamics::DEFAULT_ORBIT_LENGTH,
            delta: crate::dynamics::DEFAULT_RECURRENCE_DELTA,
            max_segments: crate::curves::DEFAULT_MAX_SEGMENTS,
            mesh_level: crate::diffeo::DEFAULT_MESH_LEVEL,
            margin: DEFAULT_MARGIN,
            eps_nil: DEFAULT_EPS_NIL,
            max_rounds: MAX_ROUNDS,
            shrink: SHRINK_FACTOR,
            start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NilpotencyCertificate {
    pub depth: usize,
    pub words: usize,
    pub max_deviation: f64,
    pub eps_nil: f64,
}

/// A finitely generated action with its claimed nilpotency length `k`,
/// checked against the `V_k` bound and the numerical nilpotency certificate.
#[derive(Clone, Debug)]
pub struct ActionSpec {
    table: GeneratorTable,
    k: usize,
    verdicts: Vec<(String, VkMembership)>,
    certificate: NilpotencyCertificate,
}

impl ActionSpec {
    pub fn new(
        table: GeneratorTable,
        k: usize,
        config: &SolverConfig,
    ) -> Result<Self, SolverError> {
        if k == 0 {
            return Err(SolverError::HypothesisViolation(
                "nilpotency length must be ≥ 1".into(),
            ));
        }
        let verdicts: Vec<(String, VkMembership)> = table
            .iter()
            .map(|(name, f)| {
                (
                    name.to_string(),
                    in_neighborhood_vk_with(f, k as u32, config.mesh_level, config.margin),
                )
            })
            .collect();
        if let Some((name, v)) = verdicts.iter().find(|(_, v)| v.verdict == Verdict::Outside) {
            return Err(SolverError::HypothesisViolation(format!(
                "generator `{name}` is outside V_{k}: estimate {:.6e} > bound {:.6e}",
                v.estimate.sampled_sup, v.bound
            )));
        }
        let ids: Vec<usize> = (0..table.len()).collect();
        let words = level_sets(&ids, k).levels.pop().unwrap_or_default();
        let mut max_deviation: f64 = 0.0;
        for w in &words {
            let m = table.realize(w)?;
            let dev = exact_deviation(&m)
                .unwrap_or_else(|| c1_deviation(&m, config.mesh_level).sampled_sup);
            max_deviation = max_deviation.max(dev);
        }
        let certificate = NilpotencyCertificate {
            depth: k,
            words: words.len(),
            max_deviation,
            eps_nil: config.eps_nil,
        };
        if max_deviation >= config.eps_nil {
            return Err(SolverError::HypothesisViolation(format!(
                "depth-{k} commutators are not numerically trivial: deviation {max_deviation:.3e} ≥ ε_nil {:.1e}",
                config.eps_nil
            )));
        }
        Ok(ActionSpec {
            table,
            k,
            verdicts,
            certificate,
        })
    }

    pub fn table(&self) -> &GeneratorTable {
        &self.table
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn verdicts(&self) -> &[(String, VkMembership)] {
        &self.verdicts
    }
    pub fn certificate(&self) -> &NilpotencyCertificate {
        &self.certificate
    }

    fn generators(&self) -> Vec<Arc<MapExpr>> {
        self.table.iter().map(|(_, m)| m.clone()).collect()
    }

    /// `max_f d(x, f(x))` over the generators.
    pub fn residual(&self, x: &SpherePoint) -> f64 {
        self.table
            .iter()
            .map(|(_, f)| map_residual(f, x))
            .fold(0.0, f64::max)
    }

    /// Derived-subgroup generators (deepest commutators first) followed by
    /// the generators themselves.
    fn processing_order(&self) -> Result<Vec<NamedMap>, SolverError> {
        let names: Vec<&str> = self.table.names().collect();
        let ids: Vec<usize> = (0..names.len()).collect();
        let mut derived: Vec<Word> = if self.k >= 2 {
            derived_generators(&ids, self.k)
        } else {
            Vec::new()
        };
        derived.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        let mut out = Vec::with_capacity(derived.len() + names.len());
        for w in derived {
            out.push(NamedMap {
                name: format!("[{}]", w.display_with(&names)),
                map: Arc::new(self.table.realize(&w)?),
            });
        }
        for (name, m) in self.table.iter() {
            out.push(NamedMap {
                name: name.to_string(),
                map: m.clone(),
            });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
struct NamedMap {
    name: String,
    map: Arc<MapExpr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    NestedDisk,
    DirectMinimize,
    Hybrid,
}

/// One character curve drawn by the solver and the disk it selected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub id: usize,
    /// Stage whose disk encloses this one.
    pub parent: Option<usize>,
    pub map: String,
    pub base: SpherePoint,
    pub closure_kind: ClosureKind,
    pub loop_vertices: Vec<SpherePoint>,
    pub areas: [f64; 2],
    pub side: usize,
    /// Smallest orbit step along the curve.
    pub min_step: f64,
}

impl Stage {
    pub fn disk_area(&self) -> f64 {
        self.areas[self.side]
    }
}

#[derive(Clone, Debug)]
struct Disk {
    stage: Option<usize>,
    partition: Arc<LoopPartition>,
    side: usize,
}

impl Disk {
    fn area(&self) -> f64 {
        self.partition.component_areas()[self.side]
    }
}

/// Intersection of nested disks; empty means the whole sphere.
#[derive(Clone, Debug, Default)]
pub struct Region {
    disks: Vec<Disk>,
}

impl Region {
    pub fn whole() -> Self {
        Region::default()
    }

    /// Component `side` of the complement of a loop.
    pub fn disk(partition: LoopPartition, side: usize) -> Self {
        Region {
            disks: vec![Disk {
                stage: None,
                partition: Arc::new(partition),
                side,
            }],
        }
    }

    pub fn is_whole(&self) -> bool {
        self.disks.is_empty()
    }

    pub fn contains(&self, x: &SpherePoint) -> bool {
        self.disks
            .iter()
            .all(|d| d.partition.classify(x) == PointSide::Component(d.side))
    }

    pub fn area(&self) -> f64 {
        self.disks
            .last()
            .map_or(4.0 * std::f64::consts::PI, Disk::area)
    }

    fn innermost(&self) -> Option<&Disk> {
        self.disks.last()
    }

    fn pushed(&self, d: Disk) -> Region {
        let mut disks = self.disks.clone();
        disks.push(d);
        Region { disks }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixReport {
    pub point: SpherePoint,
    pub residual: f64,
    pub method: Method,
    pub trace: Vec<Stage>,
    /// Why the constructive path was abandoned, for `Hybrid` results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    #[serde(skip)]
    pub region: Region,
}

struct Solver<'a> {
    cfg: &'a SolverConfig,
    trace: Vec<Stage>,
}

fn no_convergence(
    reason: impl Into<String>,
    best: Option<SpherePoint>,
    residual: f64,
) -> SolverError {
    SolverError::NoConvergence {
        reason: reason.into(),
        best,
        residual,
    }
}

fn max_res(maps: &[&NamedMap], x: &SpherePoint) -> f64 {
    maps.iter()
        .map(|m| map_residual(&m.map, x))
        .fold(0.0, f64::max)
}

/// Candidate starting points inside `region`: mesh vertices plus a polar
/// grid about the innermost disk's interior representative.
fn region_seeds(region: &Region, mesh_level: u32) -> Vec<SpherePoint> {
    let mesh = Icosphere::cached(mesh_level);
    let mut seeds: Vec<SpherePoint> = mesh.vertices().to_vec();
    if let Some(d) = region.innermost() {
        let center = d.partition.representative_points()[d.side];
        let reach = d
            .partition
            .loop_polyline()
            .vertices()
            .iter()
            .map(|v| geodesic_distance(&center, v))
            .fold(0.0, f64::max)
            .min(std::f64::consts::PI);
        let (e1, e2) = center.tangent_frame();
        seeds.push(center);
        let rings = 16;
        let spokes = 24;
        for i in 1..=rings {
            let r = reach * f64::from(i) / f64::from(rings);
            for k in 0..spokes {
                let a = std::f64::consts::TAU * (f64::from(k) + 0.5 * f64::from(i % 2))
                    / f64::from(spokes);
                seeds.push(center.exp(&((e1 * a.cos() + e2 * a.sin()) * r)));
            }
        }
        let keep: Vec<bool> = seeds.par_iter().map(|s| region.contains(s)).collect();
        seeds = seeds
            .into_iter()
            .zip(keep)
            .filter_map(|(s, k)| k.then_some(s))
            .collect();
    }
    seeds
}

/// Multi-start refinement of `maps` from the best seeds inside `region`.
/// Returns the lowest-residual point found (ties broken by seed order).
fn search_region(
    maps: &[&MapExpr],
    region: &Region,
    mesh_level: u32,
    tol: f64,
    refine_count: usize,
) -> (Option<SpherePoint>, f64) {
    let seeds = region_seeds(region, mesh_level);
    let res = |x: &SpherePoint| maps.iter().map(|f| map_residual(f, x)).fold(0.0, f64::max);
    let scores: Vec<f64> = seeds.par_iter().map(res).collect();
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    if let Some(&i) = order.first() {
        if scores[i] < tol * 1e-3 {
            return (Some(seeds[i]), scores[i]);
        }
    }
    let candidates: Vec<Option<(SpherePoint, f64)>> = order
        .iter()
        .take(refine_count)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&i| {
            let y = refine_fixed_point(maps, &seeds[i], tol).unwrap_or(seeds[i]);
            region.contains(&y).then(|| (y, res(&y)))
        })
        .collect();
    let mut best: (Option<SpherePoint>, f64) = (None, f64::INFINITY);
    for (y, r) in candidates.into_iter().flatten() {
        if r < best.1 {
            best = (Some(y), r);
        }
    }
    best
}

impl Solver<'_> {
    /// Point of `region` fixed by a single map (disk theorem base case).
    fn base_case(&mut self, b: &NamedMap, region: &Region) -> Result<SpherePoint, SolverError> {
        let (best, r) = search_region(
            &[&b.map],
            region,
            self.cfg.mesh_level,
            self.cfg.tol,
            BASE_REFINE_SEEDS,
        );
        match best {
            Some(x) if r < self.cfg.tol => Ok(x),
            _ => Err(no_convergence(
                format!(
                    "no fixed point of `{}` found inside the current disk",
                    b.name
                ),
                best,
                r,
            )),
        }
    }

    /// Draws the character curve of `f` through (a recurrent point near)
    /// `from` and picks the disk that lies inside `region`.
    fn descend(
        &mut self,
        f: &NamedMap,
        from: &SpherePoint,
        region: &Region,
    ) -> Result<(SpherePoint, Region), SolverError> {
        let base = recurrent_point_in_closure(&f.map, from, self.cfg.orbit_length, self.cfg.delta)
            .unwrap_or(*from);
        let curve = extract_character_curve(&f.map, &f.name, &base, self.cfg.max_segments)?;
        let partition = curve.partition().clone();
        let side = match region.innermost() {
            None => partition.smaller_side(),
            Some(parent) => {
                let parent_loop = parent.partition.loop_polyline();
                if !curve_in_disk(&curve.loop_, &parent.partition, parent.side) {
                    return Err(no_convergence(
                        format!("character curve of `{}` leaves the enclosing disk", f.name),
                        Some(base),
                        f64::NAN,
                    ));
                }
                // The new disk is the side away from the parent's boundary.
                match partition.classify(&parent_loop.vertices()[0]) {
                    PointSide::Component(c) => 1 - c,
                    PointSide::OnCurve => {
                        return Err(no_convergence(
                            "nested curve touches its parent",
                            Some(base),
                            f64::NAN,
                        ))
                    }
                }
            }
        };
        let min_step = curve
            .polyline
            .edges()
            .iter()
            .map(GeodesicArc::length)
            .fold(f64::INFINITY, f64::min);
        let id = self.trace.len();
        self.trace.push(Stage {
            id,
            parent: region.innermost().and_then(|d| d.stage),
            map: f.name.clone(),
            base,
            closure_kind: curve.closure_kind,
            loop_vertices: curve.loop_.vertices().to_vec(),
            areas: partition.component_areas(),
            side,
            min_step,
        });
        let disk = Disk {
            stage: Some(id),
            partition: Arc::new(partition),
            side,
        };
        Ok((base, region.pushed(disk)))
    }

    /// Nested-disk step: `p` is fixed by `fixers` and moved by `b`, and
    /// `region` ends with a disk bounded by the curve of `b` at `p`. Finds a
    /// point of the region fixed by `fixers` and `b`.
    fn main_lemma(
        &mut self,
        fixers: &[NamedMap],
        b: &NamedMap,
        region: Region,
    ) -> Result<SpherePoint, SolverError> {
        if fixers.is_empty() {
            return self.base_case(b, &region);
        }
        let mut fixers: Vec<NamedMap> = fixers.to_vec();
        let mut b = b.clone();
        let mut region = region;
        for _round in 0..self.cfg.max_rounds {
            let a = fixers.pop().expect("nonempty");
            let y = self.main_lemma(&fixers, &b, region.clone())?;
            if map_residual(&a.map, &y) < self.cfg.tol {
                return Ok(y);
            }
            let area_before = region.area();
            let (_, inner) = self.descend(&a, &y, &region)?;
            let area_after = inner.area();
            if area_after >= area_before {
                return Err(no_convergence(
                    format!("nested disk did not shrink ({area_after:.3e} ≥ {area_before:.3e})"),
                    Some(y),
                    map_residual(&a.map, &y),
                ));
            }
            fixers.push(b);
            b = a;
            region = inner;
            if region.area() < 1e-14 {
                break;
            }
        }
        Err(no_convergence(
            format!(
                "nested-disk alternation exceeded {} rounds",
                self.cfg.max_rounds
            ),
            None,
            f64::NAN,
        ))
    }

    /// Processes `order` one map at a time starting from `p`, staying in
    /// `region`.
    fn extend(
        &mut self,
        order: &[NamedMap],
        mut p: SpherePoint,
        region: &Region,
    ) -> Result<(SpherePoint, Region), SolverError> {
        let mut region = region.clone();
        for j in 0..order.len() {
            let f = &order[j];
            if map_residual(&f.map, &p) < self.cfg.tol {
                continue;
            }
            let (_, disk) = self.descend(f, &p, &region)?;
            p = self.main_lemma(&order[..j], f, disk.clone())?;
            region = disk;
            // Earlier maps fix p; later ones are checked on the next turns.
            let fixed: Vec<&NamedMap> = order[..=j].iter().collect();
            debug_assert!(max_res(&fixed, &p) < self.cfg.tol);
        }
        Ok((p, region))
    }
}

fn polish(spec: &ActionSpec, x: SpherePoint, region: &Region, tol: f64) -> SpherePoint {
    let gens = spec.generators();
    let maps: Vec<&MapExpr> = gens.iter().map(|m| m.as_ref()).collect();
    match refine_fixed_point(&maps, &x, tol) {
        Some(y) if region.contains(&y) && spec.residual(&y) <= spec.residual(&x) => y,
        _ => x,
    }
}

fn default_start(spec: &ActionSpec, mesh_level: u32) -> SpherePoint {
    let mesh = Icosphere::cached(mesh_level);
    let res: Vec<f64> = mesh
        .vertices()
        .par_iter()
        .map(|x| spec.residual(x))
        .collect();
    let best = (0..res.len()).fold(0, |b, i| if res[i] > res[b] { i } else { b });
    mesh.vertices()[best]
}

fn run_constructive(
    spec: &ActionSpec,
    region: &Region,
    start: SpherePoint,
    cfg: &SolverConfig,
    trace: &mut Vec<Stage>,
) -> Result<(SpherePoint, Region), SolverError> {
    let order = spec.processing_order()?;
    let mut solver = Solver {
        cfg,
        trace: std::mem::take(trace),
    };
    let out = solver.extend(&order, start, region);
    *trace = solver.trace;
    out
}

fn finish(
    spec: &ActionSpec,
    constructive: Result<(SpherePoint, Region), SolverError>,
    region: &Region,
    trace: Vec<Stage>,
    cfg: &SolverConfig,
) -> Result<FixReport, SolverError> {
    match constructive {
        Ok((p, final_region)) => {
            let point = polish(spec, p, &final_region, cfg.tol);
            let residual = spec.residual(&point);
            if residual < cfg.tol {
                return Ok(FixReport {
                    point,
                    residual,
                    method: Method::NestedDisk,
                    trace,
                    fallback_reason: None,
                    region: final_region,
                });
            }
            fallback(
                spec,
                region,
                trace,
                cfg,
                format!("constructive point has residual {residual:e}"),
                None,
            )
        }
        Err(e @ SolverError::HypothesisViolation(_)) => Err(e),
        Err(e) => fallback(spec, region, trace, cfg, e.to_string(), Some(e)),
    }
}

fn fallback(
    spec: &ActionSpec,
    region: &Region,
    trace: Vec<Stage>,
    cfg: &SolverConfig,
    reason: String,
    original: Option<SolverError>,
) -> Result<FixReport, SolverError> {
    match direct_minimize(spec, region, cfg) {
        Ok(mut r) => {
            r.method = Method::Hybrid;
            r.trace = trace;
            r.fallback_reason = Some(reason);
            Ok(r)
        }
        Err(e) => Err(original.unwrap_or(e)),
    }
}

/// A common fixed point of all generators.
pub fn find_common_fixed_point(
    spec: &ActionSpec,
    cfg: &SolverConfig,
) -> Result<FixReport, SolverError> {
    find_common_fixed_point_in(spec, &Region::whole(), cfg)
}

/// As [`find_common_fixed_point`], restricted to `region`.
pub fn find_common_fixed_point_in(
    spec: &ActionSpec,
    region: &Region,
    cfg: &SolverConfig,
) -> Result<FixReport, SolverError> {
    let start = match cfg.start {
        Some(s) if region.contains(&s) => s,
        _ if region.is_whole() => default_start(spec, cfg.mesh_level),
        _ => {
            let seeds = region_seeds(region, cfg.mesh_level);
            *seeds
                .iter()
                .max_by(|a, b| spec.residual(a).total_cmp(&spec.residual(b)))
                .ok_or_else(|| no_convergence("region contains no sample points", None, f64::NAN))?
        }
    };
    let mut trace = Vec::new();
    let out = run_constructive(spec, region, start, cfg, &mut trace);
    finish(spec, out, region, trace, cfg)
}

/// Multi-start residual minimization over `region`.
pub fn direct_minimize(
    spec: &ActionSpec,
    region: &Region,
    cfg: &SolverConfig,
) -> Result<FixReport, SolverError> {
    let gens = spec.generators();
    let maps: Vec<&MapExpr> = gens.iter().map(|m| m.as_ref()).collect();
    let (best, r) = search_region(&maps, region, cfg.mesh_level, cfg.tol, DIRECT_REFINE_SEEDS);
    match best {
        Some(point) if r < cfg.tol => Ok(FixReport {
            point,
            residual: r,
            method: Method::DirectMinimize,
            trace: Vec::new(),
            fallback_reason: None,
            region: region.clone(),
        }),
        _ => Err(no_convergence(
            "direct minimization found no common fixed point",
            best,
            r,
        )),
    }
}

/// Orbit of `p` under the generators and their inverses, deduplicated at
/// `delta`; `None` when it exceeds `cap` points.
pub fn finite_orbit(
    spec: &ActionSpec,
    p: &SpherePoint,
    delta: f64,
    cap: usize,
) -> Option<Vec<SpherePoint>> {
    use std::collections::HashMap;
    let key = |x: &SpherePoint| {
        let v = x.vec() / delta;
        (v.x.floor() as i64, v.y.floor() as i64, v.z.floor() as i64)
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut points = vec![*p];
    grid.entry(key(p)).or_default().push(0);
    let steps: Vec<MapExpr> = spec
        .generators()
        .iter()
        .flat_map(|m| [m.as_ref().clone(), m.inverse()])
        .collect();
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        for s in &steps {
            let y = s.evaluate(&points[i]);
            let (a, b, c) = key(&y);
            let seen = (-1..=1).any(|dx| {
                (-1..=1).any(|dy| {
                    (-1..=1).any(|dz| {
                        grid.get(&(a + dx, b + dy, c + dz)).is_some_and(|ids| {
                            ids.iter()
                                .any(|&j| geodesic_distance(&points[j], &y) < delta)
                        })
                    })
                })
            });
            if !seen {
                if points.len() >= cap {
                    return None;
                }
                grid.entry((a, b, c)).or_default().push(points.len());
                frontier.push(points.len());
                points.push(y);
            }
        }
    }
    Some(points)
}

/// One common fixed point inside each disk bounded by the character curve of
/// the first generator that moves `p`, when `p` has a finite orbit.
pub fn find_two_fixed_points(
    spec: &ActionSpec,
    p: &SpherePoint,
    cfg: &SolverConfig,
) -> Result<(FixReport, FixReport), SolverError> {
    let order = spec.processing_order()?;
    let mover = order
        .iter()
        .rev()
        .filter(|m| spec.table.get(&m.name).is_some())
        .find(|m| map_residual(&m.map, p) >= cfg.tol)
        .cloned();
    let orbit = finite_orbit(spec, p, cfg.delta, ORBIT_CAP)
        .ok_or(SolverError::OrbitNotFinite(ORBIT_CAP))?;
    let Some(f) = mover.filter(|_| orbit.len() >= 2) else {
        return Err(SolverError::OrbitTrivial);
    };
    let curve = extract_character_curve(&f.map, &f.name, p, cfg.max_segments.max(orbit.len() + 1))?;
    let partition = curve.partition().clone();
    let stage = Stage {
        id: 0,
        parent: None,
        map: f.name.clone(),
        base: *p,
        closure_kind: curve.closure_kind,
        loop_vertices: curve.loop_.vertices().to_vec(),
        areas: partition.component_areas(),
        side: 0,
        min_step: curve
            .polyline
            .edges()
            .iter()
            .map(GeodesicArc::length)
            .fold(f64::INFINITY, f64::min),
    };
    let mut reports = Vec::with_capacity(2);
    for side in 0..2 {
        let region = Region {
            disks: vec![Disk {
                stage: Some(0),
                partition: Arc::new(partition.clone()),
                side,
            }],
        };
        let mut trace = vec![Stage {
            side,
            ..stage.clone()
        }];
        let start = {
            let mut s = Solver {
                cfg,
                trace: Vec::new(),
            };
            s.base_case(&f, &region)
        };
        let out = start.and_then(|s| run_constructive(spec, &region, s, cfg, &mut trace));
        reports.push(finish(spec, out, &region, trace, cfg)?);
    }
    let second = reports.pop().unwrap();
    let first = reports.pop().unwrap();
    let sides = (
        partition.classify(&first.point),
        partition.classify(&second.point),
    );
    if sides.0 == sides.1 || geodesic_distance(&first.point, &second.point) <= 2.0 * cfg.tol {
        return Err(no_convergence(
            "fixed points on the two sides are not separated",
            Some(first.point),
            first.residual,
        ));
    }
    Ok((first, second))
}
