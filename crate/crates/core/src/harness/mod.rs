//! Scenario files, the deterministic runner and figure output.
//!
//! A scenario is a JSON document (schema version 1, see `docs/schema.md`)
//! naming vector fields, generators and a single task. Loading validates
//! the schema and every cross-reference; [`run`] executes the task and
//! returns a [`RunReport`] whose serialization is byte-stable for a given
//! scenario and seed.

mod run;
mod svg;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffeo::{BumpProfile, FieldRegistry, GeneratorTable, MapExpr, Mobius, VectorField};
use crate::geom::SpherePoint;
use crate::solver::SolverConfig;

pub use run::{run, ExitStatus, RunReport, Status, TaskOutput};
pub use svg::{render_svg, Projection};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: schema error at `{field}`{}: {message}", location(*.line, *.column))]
    Schema {
        path: String,
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: `{field}` refers to unknown {kind} `{name}`")]
    DanglingReference {
        path: String,
        field: String,
        kind: &'static str,
        name: String,
    },
    #[error("{0}")]
    Io(String),
}

fn location(line: usize, column: usize) -> String {
    if line == 0 {
        String::new()
    } else {
        format!(" (line {line}, column {column})")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDef {
    pub name: String,
    pub field: FieldSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    LocalizedRotation {
        center: [f64; 3],
        radius: f64,
        amplitude: f64,
    },
    LatitudeBand {
        band: [f64; 2],
        amplitude: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDef {
    pub name: String,
    pub map: MapSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Identity,
    Rotation {
        axis: [f64; 3],
        angle: f64,
    },
    /// Twist about `axis` with bump amplitude, center and radius in `axis·x`.
    Twist {
        axis: [f64; 3],
        amplitude: f64,
        center: f64,
        radius: f64,
    },
    /// `z ↦ (az + b)/(cz + d)` with complex coefficients `[re, im]`,
    /// rescaled to determinant 1.
    Mobius {
        a: [f64; 2],
        b: [f64; 2],
        c: [f64; 2],
        d: [f64; 2],
    },
    Flow {
        field: String,
        time: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steps: Option<u32>,
    },
    /// Space-separated letters `name` or `name^-1`, applied right to left.
    Word {
        letters: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_nil: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixMethod {
    #[default]
    Nested,
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaPair {
    pub f: String,
    pub p: [f64; 3],
    pub g: String,
    pub q: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallCheck {
    pub map: String,
    pub point: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Norm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        maps: Option<Vec<String>>,
    },
    CheckVk {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        maps: Option<Vec<String>>,
    },
    Orbit {
        map: String,
        point: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    Curve {
        map: String,
        point: [f64; 3],
    },
    Fix {
        #[serde(default)]
        method: FixMethod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<[f64; 3]>,
        /// Also run the other method inside the final disk.
        #[serde(default)]
        cross_check: bool,
    },
    Fix2 {
        point: [f64; 3],
    },
    VerifyAlgebra {
        n: usize,
        modulus: u32,
        /// 1-based `(i, j)` positions of the generating transvections;
        /// defaults to the superdiagonal.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transvections: Option<Vec<[usize; 2]>>,
    },
    VerifyLemmas {
        #[serde(default = "yes")]
        commutator_bound: bool,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        ball: Vec<BallCheck>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        pairs: Vec<LemmaPair>,
    },
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Norm { .. } => "norm",
            Task::CheckVk { .. } => "check-vk",
            Task::Orbit { .. } => "orbit",
            Task::Curve { .. } => "curve",
            Task::Fix { .. } => "fix",
            Task::Fix2 { .. } => "fix2",
            Task::VerifyAlgebra { .. } => "verify-algebra",
            Task::VerifyLemmas { .. } => "verify-lemmas",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldDef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<MapDef>,
    #[serde(default)]
    pub config: ConfigOverrides,
    pub task: Task,
}

/// A validated scenario with its maps constructed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub fields: FieldRegistry,
    pub table: GeneratorTable,
}

impl Scenario {
    /// Parses and validates a scenario document; `origin` labels diagnostics.
    pub fn from_json(text: &str, origin: &str) -> Result<Prepared, HarnessError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| HarnessError::Parse {
                path: origin.into(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        let version = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64);
        if version != Some(u64::from(SCHEMA_VERSION)) {
            return Err(HarnessError::Schema {
                path: origin.into(),
                field: "schema_version".into(),
                line: 0,
                column: 0,
                message: format!(
                    "unsupported schema version {} (expected {SCHEMA_VERSION})",
                    value
                        .get("schema_version")
                        .map_or("<missing>".to_string(), |v| v.to_string())
                ),
            });
        }
        let scenario: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Schema {
            path: origin.into(),
            field: "<document>".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        scenario.prepare(origin)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Solver configuration after applying the overrides.
    pub fn solver_config(&self) -> SolverConfig {
        let mut c = SolverConfig::default();
        let o = &self.config;
        if let Some(v) = o.tol {
            c.tol = v;
        }
        if let Some(v) = o.orbit_length {
            c.orbit_length = v;
        }
        if let Some(v) = o.delta {
            c.delta = v;
        }
        if let Some(v) = o.mesh_level {
            c.mesh_level = v;
        }
        if let Some(v) = o.max_segments {
            c.max_segments = v;
        }
        if let Some(v) = o.margin {
            c.margin = v;
        }
        if let Some(v) = o.eps_nil {
            c.eps_nil = v;
        }
        c
    }

    /// Builds fields and maps, resolving every reference.
    pub fn prepare(self, origin: &str) -> Result<Prepared, HarnessError> {
        let schema = |field: String, message: String| HarnessError::Schema {
            path: origin.into(),
            field,
            line: 0,
            column: 0,
            message,
        };
        let dangling =
            |field: String, kind: &'static str, name: &str| HarnessError::DanglingReference {
                path: origin.into(),
                field,
                kind,
                name: name.into(),
            };
        let point = |field: String, c: &[f64; 3]| {
            SpherePoint::new(c[0], c[1], c[2]).map_err(|e| schema(field, e.to_string()))
        };

        if self.k == 0 {
            return Err(schema(
                "k".into(),
                "nilpotency length must be at least 1".into(),
            ));
        }
        let c = self.solver_config();
        let positive = [
            ("config.tol", c.tol),
            ("config.delta", c.delta),
            ("config.eps_nil", c.eps_nil),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(schema(
                    field.into(),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if c.mesh_level > 7 {
            return Err(schema(
                "config.mesh_level".into(),
                "must be at most 7".into(),
            ));
        }

        let mut names = BTreeSet::new();
        let mut fields = FieldRegistry::new();
        for (i, def) in self.fields.iter().enumerate() {
            let at = format!("fields[{i}]");
            if !names.insert(format!("field:{}", def.name)) {
                return Err(schema(
                    format!("{at}.name"),
                    format!("duplicate field `{}`", def.name),
                ));
            }
            let field = match &def.field {
                FieldSpec::LocalizedRotation {
                    center,
                    radius,
                    amplitude,
                } => VectorField::localized_rotation(
                    point(format!("{at}.field.center"), center)?,
                    *radius,
                    *amplitude,
                ),
                FieldSpec::LatitudeBand { band, amplitude } => {
                    VectorField::latitude_band((band[0], band[1]), *amplitude)
                }
            }
            .map_err(|e| schema(format!("{at}.field"), e.to_string()))?;
            fields.insert(def.name.clone(), field);
        }

        let mut table = GeneratorTable::new();
        for (i, def) in self.generators.iter().enumerate() {
            let at = format!("generators[{i}]");
            if def.name.is_empty()
                || def.name.contains(char::is_whitespace)
                || def.name.contains('^')
            {
                return Err(schema(
                    format!("{at}.name"),
                    format!("invalid generator name `{}`", def.name),
                ));
            }
            if table.get(&def.name).is_some() {
                return Err(schema(
                    format!("{at}.name"),
                    format!("duplicate generator `{}`", def.name),
                ));
            }
            let map = match &def.map {
                MapSpec::Identity => MapExpr::identity(),
                MapSpec::Rotation { axis, angle } => {
                    MapExpr::rotation(point(format!("{at}.map.axis"), axis)?, *angle)
                }
                MapSpec::Twist {
                    axis,
                    amplitude,
                    center,
                    radius,
                } => MapExpr::twist(
                    point(format!("{at}.map.axis"), axis)?,
                    BumpProfile::new(*amplitude, *center, *radius)
                        .map_err(|e| schema(format!("{at}.map"), e.to_string()))?,
                ),
                MapSpec::Mobius { a, b, c, d } => {
                    let z = |v: &[f64; 2]| Complex64::new(v[0], v[1]);
                    MapExpr::Mobius(
                        Mobius::normalized(z(a), z(b), z(c), z(d))
                            .map_err(|e| schema(format!("{at}.map"), e.to_string()))?,
                    )
                }
                MapSpec::Flow { field, time, steps } => {
                    if fields.get(field).is_none() {
                        return Err(dangling(format!("{at}.map.field"), "field", field));
                    }
                    fields
                        .flow(field, *time, *steps)
                        .map_err(|e| schema(format!("{at}.map"), e.to_string()))?
                }
                MapSpec::Word { letters } => {
                    let parsed = parse_letters(letters)
                        .map_err(|m| schema(format!("{at}.map.letters"), m))?;
                    for (n, _) in &parsed {
                        if table.get(n).is_none() {
                            return Err(dangling(format!("{at}.map.letters"), "generator", n));
                        }
                    }
                    let refs: Vec<(&str, i8)> =
                        parsed.iter().map(|(n, e)| (n.as_str(), *e)).collect();
                    table
                        .word(&refs)
                        .map_err(|e| schema(format!("{at}.map"), e.to_string()))?
                }
            };
            table.insert(def.name.clone(), map);
        }

        let need = |field: &str, name: &str| {
            if table.get(name).is_none() {
                Err(dangling(field.into(), "generator", name))
            } else {
                Ok(())
            }
        };
        match &self.task {
            Task::Norm { maps } | Task::CheckVk { maps, .. } => {
                for (i, m) in maps.iter().flatten().enumerate() {
                    need(&format!("task.maps[{i}]"), m)?;
                }
            }
            Task::Orbit { map, point: p, .. } | Task::Curve { map, point: p } => {
                need("task.map", map)?;
                point("task.point".into(), p)?;
            }
            Task::Fix { start, .. } => {
                if let Some(s) = start {
                    point("task.start".into(), s)?;
                }
            }
            Task::Fix2 { point: p } => {
                point("task.point".into(), p)?;
            }
            Task::VerifyAlgebra {
                n,
                modulus,
                transvections,
            } => {
                if !(2..=6).contains(n) || *modulus < 2 {
                    return Err(schema(
                        "task".into(),
                        "need 2 ≤ n ≤ 6 and modulus ≥ 2".into(),
                    ));
                }
                for (i, t) in transvections.iter().flatten().enumerate() {
                    if !(1 <= t[0] && t[0] < t[1] && t[1] <= *n) {
                        return Err(schema(
                            format!("task.transvections[{i}]"),
                            format!("need 1 ≤ i < j ≤ n, got {t:?}"),
                        ));
                    }
                }
            }
            Task::VerifyLemmas { ball, pairs, .. } => {
                for (i, b) in ball.iter().enumerate() {
                    need(&format!("task.ball[{i}].map"), &b.map)?;
                    point(format!("task.ball[{i}].point"), &b.point)?;
                }
                for (i, pr) in pairs.iter().enumerate() {
                    need(&format!("task.pairs[{i}].f"), &pr.f)?;
                    need(&format!("task.pairs[{i}].g"), &pr.g)?;
                    point(format!("task.pairs[{i}].p"), &pr.p)?;
                    point(format!("task.pairs[{i}].q"), &pr.q)?;
                }
            }
        }
        Ok(Prepared {
            scenario: self,
            fields,
            table,
        })
    }
}

fn parse_letters(text: &str) -> Result<Vec<(String, i8)>, String> {
    text.split_whitespace()
        .map(|tok| match tok.split_once('^') {
            None => Ok((tok.to_string(), 1)),
            Some((n, "-1")) if !n.is_empty() => Ok((n.to_string(), -1)),
            Some((n, "1")) if !n.is_empty() => Ok((n.to_string(), 1)),
            _ => Err(format!("bad letter `{tok}` (expected `name` or `name^-1`)")),
        })
        .collect()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Prepared, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Scenario::from_json(&text, &path.display().to_string())
}

impl Prepared {
    pub fn map(&self, name: &str) -> Arc<MapExpr> {
        self.table.get(name).expect("validated reference").clone()
    }
}
