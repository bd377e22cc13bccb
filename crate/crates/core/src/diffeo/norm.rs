//! Estimates of `‖f − Id‖₁ = sup_x { ‖f(x) − x‖ + sup_{|v|=1} ‖Df(x)v − v‖ }`
//! and membership in the neighborhoods `V_k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geom::SpherePoint;
use crate::mesh::Icosphere;

use super::{commutator_map, DiffeoError, MapExpr};

pub const DEFAULT_MESH_LEVEL: u32 = 4;
pub const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Estimate {
    pub sampled_sup: f64,
    pub mesh_level: u32,
    pub refined: bool,
    pub margin: f64,
    /// True when `sampled_sup` is a closed-form value rather than a sample.
    #[serde(default)]
    pub analytic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Inside,
    Outside,
    Borderline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VkMembership {
    pub k: u32,
    pub bound: f64,
    pub estimate: C1Estimate,
    pub verdict: Verdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `1/(5^{(k−1)k/2}·60)`.
pub fn vk_bound(k: u32) -> f64 {
    assert!(k >= 1, "k must be positive");
    let e = f64::from((k - 1) * k / 2);
    1.0 / (5f64.powf(e) * 60.0)
}

/// The bracket of `‖f − Id‖₁` at a single point.
pub fn pointwise_deviation(f: &MapExpr, x: &SpherePoint) -> f64 {
    let (e1, e2) = x.tangent_frame();
    let mut frame = [e1, e2];
    let y = f.transport(*x.vec(), &mut frame, false);
    let chord = (y - x.vec()).norm();
    let a = frame[0] - e1;
    let b = frame[1] - e2;
    // Largest singular value of the 3×2 matrix [a b].
    let (aa, bb, ab) = (a.dot(&a), b.dot(&b), a.dot(&b));
    let half = 0.5 * (aa - bb);
    let lambda = 0.5 * (aa + bb) + (half * half + ab * ab).sqrt();
    chord + lambda.max(0.0).sqrt()
}

/// Closed-form `‖f − Id‖₁` for rotations (and words of rotations):
/// `4 sin(θ/2)`, attained on the great circle orthogonal to the axis.
pub fn exact_deviation(f: &MapExpr) -> Option<f64> {
    let r = f.as_rotation()?;
    let skew = nalgebra::Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let theta = (0.5 * skew.norm()).atan2(0.5 * (r.trace() - 1.0));
    Some(4.0 * (0.5 * theta).sin())
}

fn refine_max(f: &MapExpr, x0: SpherePoint, value0: f64, step0: f64) -> f64 {
    let mut x = x0;
    let mut best = value0;
    let mut step = step0;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for _ in 0..400 {
        if step < 1e-9 {
            break;
        }
        let (e1, e2) = x.tangent_frame();
        let dirs = [
            e1,
            -e1,
            e2,
            -e2,
            (e1 + e2) * s,
            (e1 - e2) * s,
            (e2 - e1) * s,
            -(e1 + e2) * s,
        ];
        let mut moved = None;
        for d in dirs {
            let y = x.exp(&(d * step));
            let v = pointwise_deviation(f, &y);
            if v > best {
                best = v;
                moved = Some(y);
            }
        }
        match moved {
            Some(y) => x = y,
            None => step *= 0.5,
        }
    }
    best
}

/// Sampled `‖f − Id‖₁` over the icosphere of `mesh_level`, refined by pattern
/// search from the top 1% of vertices at each level up to `mesh_level`.
/// The result is a lower bound of the true sup and nondecreasing in the level.
pub fn c1_deviation(f: &MapExpr, mesh_level: u32) -> C1Estimate {
    let mesh = Icosphere::cached(mesh_level);
    let verts = mesh.vertices();
    let values: Vec<f64> = verts
        .par_iter()
        .map(|x| pointwise_deviation(f, x))
        .collect();
    let mut sup: f64 = 0.0;
    for level in 0..=mesh_level {
        let n = 10 * 4usize.pow(level) + 2;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let seeds = n.div_ceil(100);
        let step = Icosphere::cached(level).spacing() * 0.5;
        let refined = order[..seeds]
            .par_iter()
            .map(|&i| refine_max(f, verts[i], values[i], step))
            .reduce(|| 0.0, f64::max);
        sup = sup.max(refined).max(values[order[0]]);
    }
    C1Estimate {
        sampled_sup: sup,
        mesh_level,
        refined: true,
        margin: 0.0,
        analytic: false,
    }
}

pub fn in_neighborhood_vk(f: &MapExpr, k: u32) -> VkMembership {
    in_neighborhood_vk_with(f, k, DEFAULT_MESH_LEVEL, DEFAULT_MARGIN)
}

/// `V₁` uses a strict inequality, `V_k` for `k ≥ 2` a non-strict one.
pub fn in_neighborhood_vk_with(f: &MapExpr, k: u32, mesh_level: u32, margin: f64) -> VkMembership {
    let bound = vk_bound(k);
    let below = |v: f64| if k == 1 { v < bound } else { v <= bound };
    if let Some(exact) = exact_deviation(f) {
        return VkMembership {
            k,
            bound,
            estimate: C1Estimate {
                sampled_sup: exact,
                mesh_level,
                refined: false,
                margin: 0.0,
                analytic: true,
            },
            verdict: if below(exact) {
                Verdict::Inside
            } else {
                Verdict::Outside
            },
        };
    }
    let mut estimate = c1_deviation(f, mesh_level);
    estimate.margin = margin;
    let s = estimate.sampled_sup;
    let verdict = if below(s * (1.0 + margin)) {
        Verdict::Inside
    } else if !below(s) {
        Verdict::Outside
    } else {
        Verdict::Borderline
    };
    VkMembership {
        k,
        bound,
        estimate,
        verdict,
    }
}

fn best_deviation(f: &MapExpr, mesh_level: u32) -> f64 {
    exact_deviation(f).unwrap_or_else(|| c1_deviation(f, mesh_level).sampled_sup)
}

/// Checks `‖[f,g] − Id‖₁ ≤ 5·max(‖f − Id‖₁, ‖g − Id‖₁)` with 5% slack on
/// the sampled left side.
pub fn verify_commutator_bound(
    f: &MapExpr,
    g: &MapExpr,
    mesh_level: u32,
) -> Result<CommutatorBoundReport, DiffeoError> {
    let mut devs = [0.0; 2];
    for (i, (name, m)) in [("f", f), ("g", g)].into_iter().enumerate() {
        let v = in_neighborhood_vk_with(m, 1, mesh_level, DEFAULT_MARGIN);
        if v.verdict == Verdict::Outside {
            return Err(DiffeoError::NotInV1 {
                map: name.into(),
                estimate: v.estimate.sampled_sup,
            });
        }
        devs[i] = if v.estimate.analytic {
            v.estimate.sampled_sup
        } else {
            best_deviation(m, mesh_level)
        };
    }
    let lhs = best_deviation(&commutator_map(f, g), mesh_level);
    let rhs = 5.0 * devs[0].max(devs[1]);
    Ok(CommutatorBoundReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + DEFAULT_MARGIN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffeo::{BumpProfile, FieldRegistry, VectorField};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn rot(axis: SpherePoint, angle: f64) -> MapExpr {
        MapExpr::rotation(axis, angle)
    }

    #[test]
    fn bound_values() {
        assert_abs_diff_eq!(vk_bound(1), 1.0 / 60.0, epsilon = 1e-18);
        assert_abs_diff_eq!(vk_bound(2), 1.0 / 300.0, epsilon = 1e-18);
        assert_abs_diff_eq!(vk_bound(3), 1.0 / 7500.0, epsilon = 1e-18);
        assert!((1..8).all(|k| vk_bound(k + 1) < vk_bound(k)));
    }

    #[test]
    fn rotation_norm_examples() {
        assert_eq!(c1_deviation(&MapExpr::identity(), 3).sampled_sup, 0.0);
        let e = c1_deviation(&rot(SpherePoint::north(), 0.004), 4);
        assert_abs_diff_eq!(e.sampled_sup, 4.0 * 0.002f64.sin(), epsilon = 1e-6);
        let small = c1_deviation(&rot(SpherePoint::north(), 0.002), 4);
        assert!(small.sampled_sup < e.sampled_sup);
        // Tilted axis: the maximizing circle avoids mesh vertices.
        let tilted = rot(SpherePoint::new(0.3, -0.2, 1.0).unwrap(), 0.004);
        assert_abs_diff_eq!(
            c1_deviation(&tilted, 4).sampled_sup,
            4.0 * 0.002f64.sin(),
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            exact_deviation(&tilted).unwrap(),
            4.0 * 0.002f64.sin(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn estimate_is_monotone_in_level() {
        let tw = MapExpr::twist(
            SpherePoint::new(0.2, 0.5, 0.7).unwrap(),
            BumpProfile::new(0.01, 0.15, 0.5).unwrap(),
        );
        let mut last = 0.0;
        for level in 0..=4 {
            let v = c1_deviation(&tw, level).sampled_sup;
            assert!(v >= last - 1e-12, "level {level}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn membership_examples() {
        let r = rot(SpherePoint::north(), 0.004);
        assert_eq!(in_neighborhood_vk(&r, 1).verdict, Verdict::Inside);
        assert_eq!(in_neighborhood_vk(&r, 2).verdict, Verdict::Outside);
        for k in 1..4 {
            assert_eq!(
                in_neighborhood_vk(&MapExpr::identity(), k).verdict,
                Verdict::Inside
            );
        }
        // Sampled maps get a Borderline band just below the bound.
        let band = MapExpr::twist(
            SpherePoint::north(),
            BumpProfile::new(1.0, 0.0, 0.5).unwrap(),
        );
        let est = c1_deviation(&band, 3).sampled_sup;
        let scaled = MapExpr::twist(
            SpherePoint::north(),
            BumpProfile::new(0.98 * vk_bound(1) / est, 0.0, 0.5).unwrap(),
        );
        let v = in_neighborhood_vk_with(&scaled, 1, 3, DEFAULT_MARGIN);
        assert_eq!(v.verdict, Verdict::Borderline, "{v:?}");
    }

    #[test]
    fn commutator_bound_examples() {
        let f = rot(SpherePoint::north(), 0.004);
        let same = verify_commutator_bound(&f, &f, 3).unwrap();
        assert!(same.holds && same.lhs < 1e-12);

        let fx = rot(SpherePoint::x_axis(), 0.004);
        let gy = rot(SpherePoint::y_axis(), 0.004);
        let rep = verify_commutator_bound(&fx, &gy, 3).unwrap();
        assert!(rep.holds);
        assert_abs_diff_eq!(rep.lhs, 3.2e-5, epsilon = 1e-8);
        assert_abs_diff_eq!(rep.rhs, 20.0 * 0.002f64.sin(), epsilon = 1e-12);

        let big = rot(SpherePoint::north(), 0.1);
        assert!(matches!(
            verify_commutator_bound(&big, &f, 3),
            Err(DiffeoError::NotInV1 { .. })
        ));
    }

    fn random_axis(rng: &mut impl Rng) -> SpherePoint {
        loop {
            let v = nalgebra::Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if v.norm() > 0.1 && v.norm() <= 1.0 {
                return SpherePoint::from_vec(v).unwrap();
            }
        }
    }

    fn random_small_map(rng: &mut impl Rng) -> MapExpr {
        let axis = random_axis(rng);
        if rng.gen_bool(0.5) {
            rot(axis, rng.gen_range(-0.008..0.008))
        } else {
            let c = rng.gen_range(-0.5..0.5);
            let r = rng.gen_range(0.3..0.45);
            // ‖Df − I‖ ≲ |A|·(1 + 1.3/r), so this stays well inside V₁.
            let a = rng.gen_range(-1.0..1.0) * 0.002 * r;
            MapExpr::twist(axis, BumpProfile::new(a, c, r).unwrap())
        }
    }

    #[test]
    fn commutator_bound_campaign() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(51);
        for i in 0..100 {
            let f = random_small_map(&mut rng);
            let g = random_small_map(&mut rng);
            let rep = verify_commutator_bound(&f, &g, 2).unwrap();
            assert!(rep.holds, "pair {i}: {rep:?}");
        }
    }

    #[test]
    fn nested_commutators_land_in_lower_neighborhood() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(52);
        for k in 1..=2u32 {
            let bound = vk_bound(k + 1);
            for _ in 0..5 {
                let maps: Vec<MapExpr> = (0..=k)
                    .map(|_| {
                        rot(
                            random_axis(&mut rng),
                            2.0 * (bound / 4.0).asin() * rng.gen_range(0.5..1.0),
                        )
                    })
                    .collect();
                assert!(maps.iter().all(|m| exact_deviation(m).unwrap() <= bound));
                // [f_i, f_{i+1}], then [f_{i-1}, ·], ...
                for i in 1..=k as usize {
                    let mut c = commutator_map(&maps[i - 1], &maps[i]);
                    for j in (0..i - 1).rev() {
                        c = commutator_map(&maps[j], &c);
                    }
                    let v = in_neighborhood_vk_with(&c, k, 3, DEFAULT_MARGIN);
                    assert_eq!(v.verdict, Verdict::Inside, "k={k} i={i}: {v:?}");
                }
            }
        }
    }

    #[test]
    fn flow_maps_are_sampled() {
        let mut reg = FieldRegistry::new();
        reg.insert(
            "loc",
            VectorField::localized_rotation(SpherePoint::north(), 0.8, 0.002).unwrap(),
        );
        let f = reg.flow("loc", 1.0, Some(8)).unwrap();
        let e = c1_deviation(&f, 3);
        assert!(!e.analytic && e.sampled_sup > 0.0 && e.sampled_sup < vk_bound(1));
    }
}
