//! C¹ diffeomorphisms of the sphere as composable expressions.
//!
//! A [`MapExpr`] is either a closed-form primitive (rotation, axial twist,
//! Möbius transformation, flow of a registered vector field) or a word in
//! other maps. Words are evaluated **right to left**: the word
//! `[f, g, h]` is the composition `f ∘ g ∘ h`, so `h` acts first. This is
//! the functional convention under which the commutator `[f, g]` is the
//! word `[f, g, f⁻¹, g⁻¹]`.

mod field;
mod norm;

use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64;
use thiserror::Error;

use crate::geom::{rotation_matrix, SpherePoint, Vec3};

pub use field::{auto_steps, FlowMap, VectorField};
pub use norm::{
    c1_deviation, exact_deviation, in_neighborhood_vk, in_neighborhood_vk_with,
    pointwise_deviation, verify_commutator_bound, vk_bound, C1Estimate, CommutatorBoundReport,
    Verdict, VkMembership, DEFAULT_MARGIN, DEFAULT_MESH_LEVEL,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffeoError {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("unknown vector field `{0}`")]
    UnknownField(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("map `{map}` is not in V1 (estimated ‖f − Id‖₁ = {estimate:.6e})")]
    NotInV1 { map: String, estimate: f64 },
}

/// Polynomial bump `A·(1 − ((t − c)/r)²)³` on `|t − c| < r`, zero elsewhere.
/// C² everywhere; value and first two derivatives vanish at `c ± r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpProfile {
    amplitude: f64,
    center: f64,
    radius: f64,
}

impl BumpProfile {
    /// The support `[center − radius, center + radius]` must lie inside `(−1, 1)`.
    pub fn new(amplitude: f64, center: f64, radius: f64) -> Result<Self, DiffeoError> {
        if !(amplitude.is_finite() && center.is_finite() && radius.is_finite()) || radius <= 0.0 {
            return Err(DiffeoError::InvalidMap(format!(
                "bump profile needs finite values and positive radius (got radius {radius})"
            )));
        }
        if center - radius <= -1.0 || center + radius >= 1.0 {
            return Err(DiffeoError::InvalidMap(format!(
                "bump support [{}, {}] must lie inside (-1, 1)",
                center - radius,
                center + radius
            )));
        }
        Ok(BumpProfile {
            amplitude,
            center,
            radius,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn center(&self) -> f64 {
        self.center
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    pub fn value(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.radius;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - u * u;
        self.amplitude * s * s * s
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.radius;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - u * u;
        -6.0 * self.amplitude * s * s * u / self.radius
    }

    pub fn negated(&self) -> Self {
        BumpProfile {
            amplitude: -self.amplitude,
            ..*self
        }
    }
}

/// `z ↦ (az + b)/(cz + d)` with `ad − bc = 1`, acting on S² through
/// stereographic projection from the north pole.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl Mobius {
    pub fn new(
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    ) -> Result<Self, DiffeoError> {
        let det = a * d - b * c;
        if (det - 1.0).norm() > 1e-12 {
            return Err(DiffeoError::InvalidMap(format!(
                "Möbius determinant must be 1 (got {det})"
            )));
        }
        Ok(Mobius { a, b, c, d })
    }

    /// Rescales the coefficients by `1/√(ad − bc)`.
    pub fn normalized(
        a: Complex64,
        b: Complex64,
        c: Complex64,
        d: Complex64,
    ) -> Result<Self, DiffeoError> {
        let det = a * d - b * c;
        if det.norm() < 1e-300 || !det.is_finite() {
            return Err(DiffeoError::InvalidMap("singular Möbius matrix".into()));
        }
        let s = det.sqrt();
        Mobius::new(a / s, b / s, c / s, d / s)
    }

    pub fn coefficients(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn inverse(&self) -> Self {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    fn transport(&self, x: Vec3, tangents: &mut [Vec3], inverse: bool) -> Vec3 {
        let m = if inverse { self.inverse() } else { *self };
        // Homogeneous coordinates [z1 : z2] of the stereographic image; the
        // chart is switched away from the projection pole.
        let south_chart = x.z <= 0.0;
        let (z1, z2) = if south_chart {
            (Complex64::new(x.x, x.y), Complex64::new(1.0 - x.z, 0.0))
        } else {
            (Complex64::new(1.0 + x.z, 0.0), Complex64::new(x.x, -x.y))
        };
        let dz = |v: &Vec3| {
            if south_chart {
                (Complex64::new(v.x, v.y), Complex64::new(-v.z, 0.0))
            } else {
                (Complex64::new(v.z, 0.0), Complex64::new(v.x, -v.y))
            }
        };
        let w1 = m.a * z1 + m.b * z2;
        let w2 = m.c * z1 + m.d * z2;
        let q = w1 * w2.conj();
        let n1 = w1.norm_sqr();
        let n2 = w2.norm_sqr();
        let norm = n1 + n2;
        let p = Vec3::new(2.0 * q.re, 2.0 * q.im, n1 - n2);
        for v in tangents.iter_mut() {
            let (dz1, dz2) = dz(v);
            let dw1 = m.a * dz1 + m.b * dz2;
            let dw2 = m.c * dz1 + m.d * dz2;
            let dq = dw1 * w2.conj() + w1 * dw2.conj();
            let dn1 = 2.0 * (w1.conj() * dw1).re;
            let dn2 = 2.0 * (w2.conj() * dw2).re;
            let dp = Vec3::new(2.0 * dq.re, 2.0 * dq.im, dn1 - dn2);
            *v = (dp * norm - p * (dn1 + dn2)) / (norm * norm);
        }
        p / norm
    }
}

/// One letter of a word: a shared map applied forwards or inverted.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub name: Arc<str>,
    pub map: Arc<MapExpr>,
    pub inverse: bool,
}

impl Factor {
    pub fn new(name: &str, map: Arc<MapExpr>, inverse: bool) -> Self {
        Factor {
            name: name.into(),
            map,
            inverse,
        }
    }

    fn inverted(&self) -> Self {
        Factor {
            inverse: !self.inverse,
            ..self.clone()
        }
    }

    fn cancels(&self, other: &Factor) -> bool {
        self.inverse != other.inverse
            && (Arc::ptr_eq(&self.map, &other.map) || self.map == other.map)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapExpr {
    /// Right-handed rotation about `axis`.
    Rotation {
        axis: SpherePoint,
        angle: f64,
    },
    /// Rotates `x` about `axis` by `profile(axis·x)`.
    Twist {
        axis: SpherePoint,
        profile: BumpProfile,
    },
    Mobius(Mobius),
    Flow(FlowMap),
    /// Composition, rightmost factor first. The empty word is the identity.
    Word(Vec<Factor>),
}

impl MapExpr {
    pub fn identity() -> Self {
        MapExpr::Word(Vec::new())
    }

    pub fn rotation(axis: SpherePoint, angle: f64) -> Self {
        MapExpr::Rotation { axis, angle }
    }

    pub fn twist(axis: SpherePoint, profile: BumpProfile) -> Self {
        MapExpr::Twist { axis, profile }
    }

    /// Builds a word, cancelling adjacent `x·x⁻¹` pairs of the same shared map.
    pub fn word(factors: Vec<Factor>) -> Self {
        let mut out: Vec<Factor> = Vec::with_capacity(factors.len());
        for f in factors {
            if out.last().is_some_and(|last| last.cancels(&f)) {
                out.pop();
            } else {
                out.push(f);
            }
        }
        MapExpr::Word(out)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MapExpr::Rotation { .. } => "rotation",
            MapExpr::Twist { .. } => "twist",
            MapExpr::Mobius(_) => "mobius",
            MapExpr::Flow(_) => "flow",
            MapExpr::Word(_) => "word",
        }
    }

    /// Factors of `self` as a word (a primitive becomes a one-letter word).
    pub fn factors(&self) -> Vec<Factor> {
        match self {
            MapExpr::Word(f) => f.clone(),
            other => vec![Factor::new(other.kind(), Arc::new(other.clone()), false)],
        }
    }

    pub fn is_identity_word(&self) -> bool {
        matches!(self, MapExpr::Word(f) if f.is_empty())
    }

    pub fn inverse(&self) -> MapExpr {
        match self {
            MapExpr::Rotation { axis, angle } => MapExpr::Rotation {
                axis: *axis,
                angle: -angle,
            },
            MapExpr::Twist { axis, profile } => MapExpr::Twist {
                axis: *axis,
                profile: profile.negated(),
            },
            MapExpr::Mobius(m) => MapExpr::Mobius(m.inverse()),
            MapExpr::Flow(f) => MapExpr::Flow(f.reversed()),
            MapExpr::Word(f) => MapExpr::Word(f.iter().rev().map(Factor::inverted).collect()),
        }
    }

    /// `f(x)`.
    pub fn evaluate(&self, x: &SpherePoint) -> SpherePoint {
        SpherePoint::from_vec_unchecked(self.transport(*x.vec(), &mut [], false))
    }

    /// `Df(x)·v`, tangent at `f(x)`.
    pub fn differential(&self, x: &SpherePoint, v: &Vec3) -> Vec3 {
        let mut t = [*v];
        let y = SpherePoint::from_vec_unchecked(self.transport(*x.vec(), &mut t, false));
        y.project_tangent(&t[0])
    }

    /// Image of `x` together with the images of the tangent frame vectors.
    pub fn push_frame(&self, x: &SpherePoint, frame: &mut [Vec3]) -> SpherePoint {
        let y = SpherePoint::from_vec_unchecked(self.transport(*x.vec(), frame, false));
        for v in frame.iter_mut() {
            *v = y.project_tangent(v);
        }
        y
    }

    /// Moves the point (and tangent vectors in place) by `self`, or by its
    /// inverse. The returned vector is unit up to rounding.
    pub(crate) fn transport(&self, x: Vec3, tangents: &mut [Vec3], inverse: bool) -> Vec3 {
        match self {
            MapExpr::Rotation { axis, angle } => {
                let r = rotation_matrix(axis, if inverse { -angle } else { *angle });
                for v in tangents.iter_mut() {
                    *v = r * *v;
                }
                r * x
            }
            MapExpr::Twist { axis, profile } => {
                let u = axis.vec();
                let t = u.dot(&x);
                let sign = if inverse { -1.0 } else { 1.0 };
                let theta = sign * profile.value(t);
                let r = rotation_matrix(axis, theta);
                let y = r * x;
                if !tangents.is_empty() {
                    let dtheta = sign * profile.derivative(t);
                    let uy = u.cross(&y);
                    for v in tangents.iter_mut() {
                        *v = r * *v + uy * (dtheta * u.dot(v));
                    }
                }
                y
            }
            MapExpr::Mobius(m) => m.transport(x, tangents, inverse),
            MapExpr::Flow(f) => f.transport(x, tangents, inverse),
            MapExpr::Word(factors) => {
                let mut y = x;
                if inverse {
                    for f in factors.iter() {
                        y = f.map.transport(y, tangents, !f.inverse);
                    }
                } else {
                    for f in factors.iter().rev() {
                        y = f.map.transport(y, tangents, f.inverse);
                    }
                }
                y
            }
        }
    }

    /// The rotation matrix of `self` if it is a rotation or a word made only
    /// of rotations.
    pub fn as_rotation(&self) -> Option<Matrix3<f64>> {
        match self {
            MapExpr::Rotation { axis, angle } => Some(rotation_matrix(axis, *angle)),
            MapExpr::Word(factors) => factors.iter().try_fold(Matrix3::identity(), |acc, f| {
                let r = f.map.as_rotation()?;
                Some(acc * if f.inverse { r.transpose() } else { r })
            }),
            _ => None,
        }
    }

    /// Conjugate `r ∘ self ∘ r⁻¹` by a rotation.
    pub fn conjugated_by(&self, r: &MapExpr) -> MapExpr {
        let r = Arc::new(r.clone());
        let mut factors = vec![Factor::new("conj", r.clone(), false)];
        factors.extend(self.factors());
        factors.push(Factor::new("conj", r, true));
        MapExpr::word(factors)
    }
}

/// The word `f·g·f⁻¹·g⁻¹` (arguments that are words are flattened).
pub fn commutator_map(f: &MapExpr, g: &MapExpr) -> MapExpr {
    commutator_of_factors(f.factors(), g.factors())
}

fn commutator_of_factors(f: Vec<Factor>, g: Vec<Factor>) -> MapExpr {
    let inv = |w: &[Factor]| w.iter().rev().map(Factor::inverted).collect::<Vec<_>>();
    let mut out = Vec::with_capacity(2 * (f.len() + g.len()));
    out.extend(f.iter().cloned());
    out.extend(g.iter().cloned());
    out.extend(inv(&f));
    out.extend(inv(&g));
    MapExpr::word(out)
}

/// Named generators; words refer to entries by name.
#[derive(Clone, Debug, Default)]
pub struct GeneratorTable {
    entries: Vec<(String, Arc<MapExpr>)>,
}

impl GeneratorTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces `name`.
    pub fn insert(&mut self, name: impl Into<String>, map: MapExpr) {
        let name = name.into();
        let map = Arc::new(map);
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = map,
            None => self.entries.push((name, map)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Arc<MapExpr>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Arc<MapExpr>)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    /// Word from `(name, ±1)` letters, leftmost letter applied last.
    pub fn word(&self, letters: &[(&str, i8)]) -> Result<MapExpr, DiffeoError> {
        let factors = letters
            .iter()
            .map(|&(name, exp)| {
                let map = self
                    .get(name)
                    .ok_or_else(|| DiffeoError::UnknownGenerator(name.to_string()))?;
                if exp != 1 && exp != -1 {
                    return Err(DiffeoError::InvalidMap(format!(
                        "exponent must be +1 or -1 (got {exp})"
                    )));
                }
                Ok(Factor::new(name, map.clone(), exp < 0))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MapExpr::word(factors))
    }

    /// Realizes a symbolic word whose generator ids index this table.
    pub fn realize(&self, w: &crate::group_words::Word) -> Result<MapExpr, DiffeoError> {
        let factors =
            w.letters()
                .iter()
                .map(|l| {
                    let (name, map) = self.entries.get(l.generator).ok_or_else(|| {
                        DiffeoError::UnknownGenerator(format!("#{}", l.generator))
                    })?;
                    Ok(Factor::new(name, map.clone(), l.inverse))
                })
                .collect::<Result<Vec<_>, _>>()?;
        Ok(MapExpr::word(factors))
    }
}

/// Named vector fields available to flow maps.
#[derive(Clone, Debug, Default)]
pub struct FieldRegistry {
    entries: Vec<(String, Arc<VectorField>)>,
}

impl FieldRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, field: VectorField) {
        let name = name.into();
        let field = Arc::new(field);
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = field,
            None => self.entries.push((name, field)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Arc<VectorField>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    /// Time-`time` map of field `name`; `steps = None` picks the step count
    /// by Richardson extrapolation.
    pub fn flow(&self, name: &str, time: f64, steps: Option<u32>) -> Result<MapExpr, DiffeoError> {
        let field = self
            .get(name)
            .ok_or_else(|| DiffeoError::UnknownField(name.to_string()))?
            .clone();
        Ok(MapExpr::Flow(FlowMap::new(name, field, time, steps)?))
    }
}
