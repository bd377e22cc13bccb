//! Commutator norm inequality and the curve-pair lemmas on disjoint supports.

use nalgebra::Vector3;
use s2fix::curves::{curve_distance, curves_disjoint, extract_character_curve};
use s2fix::diffeo::{verify_commutator_bound, BumpProfile, MapExpr};
use s2fix::geom::SpherePoint;

fn cap_twist(axis: SpherePoint, radius: f64, amplitude: f64) -> MapExpr {
    let t0 = radius.cos();
    MapExpr::twist(
        axis,
        BumpProfile::new(amplitude, 0.5 * (t0 + 0.999), 0.5 * (0.999 - t0)).unwrap(),
    )
}

fn main() {
    let f = MapExpr::rotation(SpherePoint::north(), 0.003);
    let g = MapExpr::twist(
        SpherePoint::x_axis(),
        BumpProfile::new(0.0008, 0.1, 0.5).unwrap(),
    );
    println!(
        "commutator bound: {:?}",
        verify_commutator_bound(&f, &g, 4).unwrap()
    );

    let f = cap_twist(SpherePoint::x_axis(), 0.6, 0.25);
    let g = cap_twist(SpherePoint::y_axis(), 0.6, -0.4);
    let p = SpherePoint::x_axis().exp(&Vector3::new(0.0, 0.2, 0.35));
    let q = SpherePoint::y_axis().exp(&Vector3::new(0.1, 0.0, -0.4));
    let cf = extract_character_curve(&f, "f", &p, 5000).unwrap();
    let cg = extract_character_curve(&g, "g", &q, 5000).unwrap();
    println!(
        "disjoint: {}, distance {:.4}",
        curves_disjoint(&cf.polyline, &cg.polyline),
        curve_distance(&cf.polyline, &cg.polyline)
    );
}
