//! Axial vector fields `X(x) = A·w(u·x)·(u × x)` and their RK4 flows.

use std::sync::Arc;

use crate::geom::{rotation_matrix, SpherePoint, Vec3};
use crate::mesh::Icosphere;

use super::{BumpProfile, DiffeoError};

const RICHARDSON_TARGET: f64 = 1e-10;
const MAX_STEPS: u32 = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub enum VectorField {
    /// Rotation about `center`, weight `((t − t₀)/(1 − t₀))³` inside the cap
    /// of angular `radius` (`t₀ = cos radius`), zero outside.
    LocalizedRotation {
        center: SpherePoint,
        radius: f64,
        amplitude: f64,
    },
    /// Rotation about the z-axis weighted by a bump in `z` over `band`.
    LatitudeBand { profile: BumpProfile },
}

impl VectorField {
    pub fn localized_rotation(
        center: SpherePoint,
        radius: f64,
        amplitude: f64,
    ) -> Result<Self, DiffeoError> {
        if !(radius > 0.0 && radius < std::f64::consts::PI) || !amplitude.is_finite() {
            return Err(DiffeoError::InvalidMap(format!(
                "localized rotation needs radius in (0, π) and finite amplitude (got {radius}, {amplitude})"
            )));
        }
        Ok(VectorField::LocalizedRotation {
            center,
            radius,
            amplitude,
        })
    }

    pub fn latitude_band(band: (f64, f64), amplitude: f64) -> Result<Self, DiffeoError> {
        if band.0.partial_cmp(&band.1) != Some(std::cmp::Ordering::Less) {
            return Err(DiffeoError::InvalidMap(format!(
                "latitude band needs lo < hi (got {:?})",
                band
            )));
        }
        let c = 0.5 * (band.0 + band.1);
        let r = 0.5 * (band.1 - band.0);
        Ok(VectorField::LatitudeBand {
            profile: BumpProfile::new(amplitude, c, r)?,
        })
    }

    pub fn axis(&self) -> SpherePoint {
        match self {
            VectorField::LocalizedRotation { center, .. } => *center,
            VectorField::LatitudeBand { .. } => SpherePoint::north(),
        }
    }

    /// Angular speed `A·w(t)` and its derivative in `t`.
    fn speed(&self, t: f64) -> (f64, f64) {
        match self {
            VectorField::LocalizedRotation {
                radius, amplitude, ..
            } => {
                let t0 = radius.cos();
                if t <= t0 {
                    return (0.0, 0.0);
                }
                let s = (t - t0) / (1.0 - t0);
                (amplitude * s * s * s, 3.0 * amplitude * s * s / (1.0 - t0))
            }
            VectorField::LatitudeBand { profile } => (profile.value(t), profile.derivative(t)),
        }
    }

    pub fn eval(&self, x: &Vec3) -> Vec3 {
        let u = self.axis();
        let u = u.vec();
        let (w, _) = self.speed(u.dot(x));
        u.cross(x) * w
    }

    /// `DX(x)·v`.
    pub fn jacobian_apply(&self, x: &Vec3, v: &Vec3) -> Vec3 {
        let u = self.axis();
        let u = u.vec();
        let (w, dw) = self.speed(u.dot(x));
        let ux = u.cross(x);
        u.cross(v) * w + ux * (dw * u.dot(v))
    }

    /// Exact time-`time` flow: rotation about the axis by `time·A·w(u·x)`.
    pub fn exact_flow(&self, x: &SpherePoint, time: f64) -> SpherePoint {
        let u = self.axis();
        let (w, _) = self.speed(u.dot(x));
        x.rotated(&rotation_matrix(&u, time * w))
    }
}

/// Time-`time` map of a registered field, integrated by fixed-step RK4.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMap {
    field_name: Arc<str>,
    field: Arc<VectorField>,
    time: f64,
    steps: u32,
}

impl FlowMap {
    pub fn new(
        name: &str,
        field: Arc<VectorField>,
        time: f64,
        steps: Option<u32>,
    ) -> Result<Self, DiffeoError> {
        if !time.is_finite() {
            return Err(DiffeoError::InvalidMap("flow time must be finite".into()));
        }
        let steps = match steps {
            Some(0) => {
                return Err(DiffeoError::InvalidMap(
                    "flow steps must be positive".into(),
                ))
            }
            Some(n) => n,
            None => auto_steps(&field, time),
        };
        Ok(FlowMap {
            field_name: name.into(),
            field,
            time,
            steps,
        })
    }

    pub fn field_name(&self) -> &str {
        &self.field_name
    }
    pub fn field(&self) -> &VectorField {
        &self.field
    }
    pub fn time(&self) -> f64 {
        self.time
    }
    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn reversed(&self) -> Self {
        FlowMap {
            time: -self.time,
            ..self.clone()
        }
    }

    pub(super) fn transport(&self, x: Vec3, tangents: &mut [Vec3], inverse: bool) -> Vec3 {
        let time = if inverse { -self.time } else { self.time };
        let y = rk4(&self.field, x, tangents, time, self.steps);
        y.normalize()
    }
}

// The field is tangent to every sphere |x| = const, so the ambient
// variational equation carries tangent vectors to tangent vectors.
fn rk4(field: &VectorField, mut x: Vec3, tangents: &mut [Vec3], time: f64, steps: u32) -> Vec3 {
    let h = time / f64::from(steps);
    let n = tangents.len();
    let mut tmp = vec![Vec3::zeros(); n];
    let mut acc = vec![Vec3::zeros(); n];
    let mut l = vec![Vec3::zeros(); n];
    for _ in 0..steps {
        let k1 = field.eval(&x);
        for i in 0..n {
            l[i] = field.jacobian_apply(&x, &tangents[i]);
            acc[i] = l[i];
            tmp[i] = tangents[i] + l[i] * (0.5 * h);
        }
        let x2 = x + k1 * (0.5 * h);
        let k2 = field.eval(&x2);
        for i in 0..n {
            l[i] = field.jacobian_apply(&x2, &tmp[i]);
            acc[i] += l[i] * 2.0;
            tmp[i] = tangents[i] + l[i] * (0.5 * h);
        }
        let x3 = x + k2 * (0.5 * h);
        let k3 = field.eval(&x3);
        for i in 0..n {
            l[i] = field.jacobian_apply(&x3, &tmp[i]);
            acc[i] += l[i] * 2.0;
            tmp[i] = tangents[i] + l[i] * h;
        }
        let x4 = x + k3 * h;
        let k4 = field.eval(&x4);
        for i in 0..n {
            l[i] = field.jacobian_apply(&x4, &tmp[i]);
            acc[i] += l[i];
            tangents[i] += acc[i] * (h / 6.0);
        }
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

/// Smallest power-of-two step count whose Richardson error estimate
/// `|Φₙ − Φ₂ₙ|/15` is below 1e-10 on a fixed probe set (mesh level 2).
pub fn auto_steps(field: &VectorField, time: f64) -> u32 {
    let mesh = Icosphere::cached(2);
    let probes = mesh.vertices();
    let run = |n: u32| -> Vec<Vec3> {
        probes
            .iter()
            .map(|p| rk4(field, *p.vec(), &mut [], time, n).normalize())
            .collect()
    };
    let mut n = 1;
    let mut coarse = run(n);
    while n < MAX_STEPS {
        let fine = run(2 * n);
        let err = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / 15.0;
        if err < RICHARDSON_TARGET {
            return 2 * n;
        }
        n *= 2;
        coarse = fine;
    }
    MAX_STEPS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{FieldRegistry, MapExpr};
    use crate::geom::geodesic_distance;
    use rand::{Rng, SeedableRng};

    fn fields() -> FieldRegistry {
        let mut reg = FieldRegistry::new();
        reg.insert(
            "loc",
            VectorField::localized_rotation(SpherePoint::new(0.0, 0.3, 1.0).unwrap(), 1.2, 0.5)
                .unwrap(),
        );
        reg.insert(
            "band",
            VectorField::latitude_band((-0.5, 0.4), -0.7).unwrap(),
        );
        reg
    }

    #[test]
    fn rk4_flow_matches_exact_rotation() {
        let reg = fields();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for name in ["loc", "band"] {
            let f = reg.flow(name, 1.7, None).unwrap();
            let MapExpr::Flow(ref fm) = f else { panic!() };
            let field = reg.get(name).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..500 {
                let x = SpherePoint::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .unwrap();
                worst = worst.max(geodesic_distance(
                    &f.evaluate(&x),
                    &field.exact_flow(&x, 1.7),
                ));
            }
            assert!(worst < 1e-9, "{name}: steps {} error {worst:e}", fm.steps());
        }
    }

    #[test]
    fn unknown_field_is_reported() {
        let err = fields().flow("nope", 1.0, None).unwrap_err();
        assert_eq!(err, DiffeoError::UnknownField("nope".into()));
    }

    #[test]
    fn field_is_tangent_and_vanishes_outside_support() {
        let f = VectorField::localized_rotation(SpherePoint::north(), 0.5, 1.0).unwrap();
        let x = SpherePoint::from_spherical(0.3, 1.1);
        assert!(f.eval(x.vec()).dot(x.vec()).abs() < 1e-16);
        let far = SpherePoint::from_spherical(0.6, 1.1);
        assert_eq!(f.eval(far.vec()), Vec3::zeros());
    }

    #[test]
    fn flow_round_trip() {
        let reg = fields();
        let f = reg.flow("loc", 0.9, Some(40)).unwrap();
        let g = f.inverse();
        let x = SpherePoint::new(0.1, 0.5, 0.8).unwrap();
        assert!(geodesic_distance(&g.evaluate(&f.evaluate(&x)), &x) < 1e-7);
    }
}
