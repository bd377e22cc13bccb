use serde::{Deserialize, Serialize};

use crate::curves::{
    curve_distance, curves_disjoint, extract_character_curve, verify_ball_exclusion,
    BallExclusionReport, CharacterCurve, CurveError,
};
use crate::diffeo::{
    c1_deviation, exact_deviation, in_neighborhood_vk_with, verify_commutator_bound, vk_bound,
    C1Estimate, CommutatorBoundReport, DiffeoError, VkMembership,
};
use crate::dynamics::{
    recurrence_scan, recurrent_point_in_closure, residual, semiorbit, OrbitRecord, RecurrenceReport,
};
use crate::geom::{geodesic_distance, GeodesicArc, SpherePoint};
use crate::group_words::{
    verify_commutator_identities, CommutatorIdentityReport, FiniteGroupOracle, GroupError, UtMatrix,
};
use crate::solver::{
    direct_minimize, find_common_fixed_point, find_two_fixed_points, ActionSpec, FixReport,
    NilpotencyCertificate, Region, SolverConfig, SolverError,
};

use super::{FixMethod, Prepared, Scenario, Task};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    HypothesisViolation,
    NoConvergence,
    InputError,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::HypothesisViolation => 2,
            ExitStatus::NoConvergence => 3,
            ExitStatus::InputError => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub code: ExitStatus,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEntry {
    pub map: String,
    pub estimate: C1Estimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembershipEntry {
    pub map: String,
    pub membership: VkMembership,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutatorBoundEntry {
    pub f: String,
    pub g: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<CommutatorBoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallEntry {
    pub map: String,
    pub point: SpherePoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<BallExclusionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Curves of `f` at `p` and `g` at `q` for `p ∈ Fix(g) − Fix(f)` and
/// `q ∈ Fix(f) − Fix(g)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairEntry {
    pub f: String,
    pub g: String,
    pub hypotheses_hold: bool,
    pub disjoint: bool,
    pub distance: f64,
    /// Smallest orbit step over both orbit records up to closure.
    pub r: f64,
    pub distance_bound_holds: bool,
    pub curves: [Vec<SpherePoint>; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskOutput {
    Norm {
        estimates: Vec<NormEntry>,
    },
    CheckVk {
        k: u32,
        bound: f64,
        memberships: Vec<MembershipEntry>,
    },
    Orbit {
        record: OrbitRecord,
        recurrence: RecurrenceReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        recurrent_point: Option<SpherePoint>,
    },
    Curve {
        curve: CharacterCurve,
        areas: [f64; 2],
        /// Absent when the map is outside V₁.
        #[serde(skip_serializing_if = "Option::is_none")]
        ball_exclusion: Option<BallExclusionReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        ball_exclusion_error: Option<String>,
    },
    Fix {
        certificate: NilpotencyCertificate,
        memberships: Vec<MembershipEntry>,
        report: FixReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        cross_check: Option<FixReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        agreement: Option<f64>,
    },
    Fix2 {
        certificate: NilpotencyCertificate,
        reports: [FixReport; 2],
        separation: f64,
    },
    VerifyAlgebra {
        n: usize,
        modulus: u32,
        group_order: usize,
        report: CommutatorIdentityReport,
        all_hold: bool,
    },
    VerifyLemmas {
        commutator_bound: Vec<CommutatorBoundEntry>,
        ball: Vec<BallEntry>,
        pairs: Vec<PairEntry>,
        all_hold: bool,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub report_version: u32,
    pub library_version: String,
    pub scenario: Scenario,
    pub seed: u64,
    /// Tolerances and budgets actually used.
    pub config: SolverConfig,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<TaskOutput>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code
    }
}

struct Failure(ExitStatus, String);

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let status = match &e {
            SolverError::HypothesisViolation(_)
            | SolverError::OrbitTrivial
            | SolverError::OrbitNotFinite(_) => ExitStatus::HypothesisViolation,
            SolverError::Curve(c) => return Failure::from(c.clone()),
            SolverError::Diffeo(d) => return Failure::from(d.clone()),
            SolverError::NoConvergence { .. } | SolverError::TruncationBeforeClosure(_) => {
                ExitStatus::NoConvergence
            }
        };
        Failure(status, e.to_string())
    }
}

impl From<CurveError> for Failure {
    fn from(e: CurveError) -> Self {
        let status = match e {
            CurveError::FixedBasePoint(_)
            | CurveError::NotInV1(_)
            | CurveError::AntipodalOrbitStep(_) => ExitStatus::HypothesisViolation,
            CurveError::TruncationBeforeClosure(_) | CurveError::Geometry(_) => {
                ExitStatus::NoConvergence
            }
        };
        Failure(status, e.to_string())
    }
}

impl From<DiffeoError> for Failure {
    fn from(e: DiffeoError) -> Self {
        let status = match e {
            DiffeoError::NotInV1 { .. } => ExitStatus::HypothesisViolation,
            _ => ExitStatus::InputError,
        };
        Failure(status, e.to_string())
    }
}

impl From<GroupError> for Failure {
    fn from(e: GroupError) -> Self {
        let status = match e {
            GroupError::NotNilpotent { .. } => ExitStatus::HypothesisViolation,
            _ => ExitStatus::InputError,
        };
        Failure(status, e.to_string())
    }
}

fn pt(c: &[f64; 3]) -> SpherePoint {
    SpherePoint::new(c[0], c[1], c[2]).expect("validated point")
}

fn selected<'a>(p: &'a Prepared, maps: &'a Option<Vec<String>>) -> Vec<String> {
    match maps {
        Some(m) => m.clone(),
        None => p.table.names().map(str::to_string).collect(),
    }
}

fn memberships(p: &Prepared, names: &[String], k: u32, cfg: &SolverConfig) -> Vec<MembershipEntry> {
    names
        .iter()
        .map(|n| MembershipEntry {
            map: n.clone(),
            membership: in_neighborhood_vk_with(&p.map(n), k, cfg.mesh_level, cfg.margin),
        })
        .collect()
}

fn min_step(points: &[SpherePoint], upto: usize) -> f64 {
    points[..upto.min(points.len())]
        .windows(2)
        .map(|w| geodesic_distance(&w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

fn execute(p: &Prepared, cfg: &SolverConfig) -> Result<TaskOutput, Failure> {
    let sc = &p.scenario;
    match &sc.task {
        Task::Norm { maps } => Ok(TaskOutput::Norm {
            estimates: selected(p, maps)
                .into_iter()
                .map(|n| {
                    let f = p.map(&n);
                    NormEntry {
                        estimate: c1_deviation(&f, cfg.mesh_level),
                        exact: exact_deviation(&f),
                        map: n,
                    }
                })
                .collect(),
        }),
        Task::CheckVk { k, maps } => {
            let k = k.unwrap_or(sc.k as u32);
            if k == 0 {
                return Err(Failure(
                    ExitStatus::InputError,
                    "k must be at least 1".into(),
                ));
            }
            Ok(TaskOutput::CheckVk {
                k,
                bound: vk_bound(k),
                memberships: memberships(p, &selected(p, maps), k, cfg),
            })
        }
        Task::Orbit { map, point, n } => {
            let f = p.map(map);
            let x = pt(point);
            let n = n.unwrap_or(cfg.orbit_length);
            Ok(TaskOutput::Orbit {
                record: semiorbit(&f, map, &x, n),
                recurrence: recurrence_scan(&f, &x, n, cfg.delta),
                recurrent_point: recurrent_point_in_closure(&f, &x, n, cfg.delta).ok(),
            })
        }
        Task::Curve { map, point } => {
            let f = p.map(map);
            let x = pt(point);
            let curve = extract_character_curve(&f, map, &x, cfg.max_segments)?;
            let ball = verify_ball_exclusion(&f, &x);
            Ok(TaskOutput::Curve {
                areas: curve.partition().component_areas(),
                curve,
                ball_exclusion_error: ball.as_ref().err().map(ToString::to_string),
                ball_exclusion: ball.ok(),
            })
        }
        Task::Fix {
            method,
            start,
            cross_check,
        } => {
            let spec = ActionSpec::new(p.table.clone(), sc.k, cfg)?;
            let mut cfg = cfg.clone();
            cfg.start = start.as_ref().map(pt);
            let report = match method {
                FixMethod::Nested => find_common_fixed_point(&spec, &cfg)?,
                FixMethod::Direct => direct_minimize(&spec, &Region::whole(), &cfg)?,
            };
            let other = if *cross_check {
                Some(match method {
                    FixMethod::Nested => direct_minimize(&spec, &report.region, &cfg)?,
                    FixMethod::Direct => find_common_fixed_point(&spec, &cfg)?,
                })
            } else {
                None
            };
            let names: Vec<String> = p.table.names().map(str::to_string).collect();
            Ok(TaskOutput::Fix {
                certificate: spec.certificate().clone(),
                memberships: memberships(p, &names, sc.k as u32, &cfg),
                agreement: other
                    .as_ref()
                    .map(|o| geodesic_distance(&o.point, &report.point)),
                report,
                cross_check: other,
            })
        }
        Task::Fix2 { point } => {
            let spec = ActionSpec::new(p.table.clone(), sc.k, cfg)?;
            let (a, b) = find_two_fixed_points(&spec, &pt(point), cfg)?;
            Ok(TaskOutput::Fix2 {
                certificate: spec.certificate().clone(),
                separation: geodesic_distance(&a.point, &b.point),
                reports: [a, b],
            })
        }
        Task::VerifyAlgebra {
            n,
            modulus,
            transvections,
        } => {
            let oracle = match transvections {
                None => FiniteGroupOracle::full(*n, *modulus)?,
                Some(ts) => {
                    let gens = ts
                        .iter()
                        .map(|t| UtMatrix::transvection(*n, *modulus, t[0] - 1, t[1] - 1))
                        .collect::<Result<Vec<_>, _>>()?;
                    FiniteGroupOracle::new(*n, *modulus, gens)?
                }
            };
            let report = verify_commutator_identities(&oracle, sc.seed)?;
            Ok(TaskOutput::VerifyAlgebra {
                n: *n,
                modulus: *modulus,
                group_order: oracle.elements().len(),
                all_hold: report.all_hold(),
                report,
            })
        }
        Task::VerifyLemmas {
            commutator_bound,
            ball,
            pairs,
        } => {
            let names: Vec<&str> = p.table.names().collect();
            let mut prop = Vec::new();
            if *commutator_bound {
                for i in 0..names.len() {
                    for j in i + 1..names.len() {
                        let r = verify_commutator_bound(
                            &p.map(names[i]),
                            &p.map(names[j]),
                            cfg.mesh_level,
                        );
                        prop.push(CommutatorBoundEntry {
                            f: names[i].into(),
                            g: names[j].into(),
                            error: r.as_ref().err().map(ToString::to_string),
                            report: r.ok(),
                        });
                    }
                }
            }
            let balls: Vec<BallEntry> = ball
                .iter()
                .map(|b| {
                    let r = verify_ball_exclusion(&p.map(&b.map), &pt(&b.point));
                    BallEntry {
                        map: b.map.clone(),
                        point: pt(&b.point),
                        error: r.as_ref().err().map(ToString::to_string),
                        report: r.ok(),
                    }
                })
                .collect();
            let mut pair_out = Vec::new();
            for pr in pairs {
                let (f, g) = (p.map(&pr.f), p.map(&pr.g));
                let (x, y) = (pt(&pr.p), pt(&pr.q));
                let hypotheses_hold = residual(&g, &x) < cfg.tol
                    && residual(&f, &y) < cfg.tol
                    && residual(&f, &x) >= cfg.tol
                    && residual(&g, &y) >= cfg.tol;
                let cf = extract_character_curve(&f, &pr.f, &x, cfg.max_segments)?;
                let cg = extract_character_curve(&g, &pr.g, &y, cfg.max_segments)?;
                let of = semiorbit(&f, &pr.f, &x, cf.polyline.vertices().len());
                let og = semiorbit(&g, &pr.g, &y, cg.polyline.vertices().len());
                let r = min_step(&of.points, cf.polyline.vertices().len())
                    .min(min_step(&og.points, cg.polyline.vertices().len()));
                debug_assert!(cf
                    .polyline
                    .edges()
                    .iter()
                    .map(GeodesicArc::length)
                    .all(|l| l >= r - 1e-15));
                let distance = curve_distance(&cf.polyline, &cg.polyline);
                pair_out.push(PairEntry {
                    f: pr.f.clone(),
                    g: pr.g.clone(),
                    hypotheses_hold,
                    disjoint: curves_disjoint(&cf.polyline, &cg.polyline),
                    distance,
                    r,
                    distance_bound_holds: distance >= r - 1e-9,
                    curves: [cf.loop_.vertices().to_vec(), cg.loop_.vertices().to_vec()],
                });
            }
            let all_hold = prop.iter().all(|e| e.report.is_some_and(|r| r.holds))
                && balls.iter().all(|e| e.report.is_some_and(|r| r.holds))
                && pair_out
                    .iter()
                    .all(|e| e.disjoint && e.distance_bound_holds);
            Ok(TaskOutput::VerifyLemmas {
                commutator_bound: prop,
                ball: balls,
                pairs: pair_out,
                all_hold,
            })
        }
    }
}

/// Runs the scenario's task. Errors are recorded in the report's status.
pub fn run(p: &Prepared) -> RunReport {
    let cfg = p.scenario.solver_config();
    let (status, output) = match execute(p, &cfg) {
        Ok(out) => (
            Status {
                code: ExitStatus::Ok,
                exit_code: 0,
                message: None,
            },
            Some(out),
        ),
        Err(Failure(code, message)) => (
            Status {
                code,
                exit_code: code.code(),
                message: Some(message),
            },
            None,
        ),
    };
    RunReport {
        report_version: REPORT_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: p.scenario.clone(),
        seed: p.scenario.seed,
        config: cfg,
        status,
        output,
    }
}
