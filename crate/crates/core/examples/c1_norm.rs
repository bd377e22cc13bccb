//! Sampled C¹ distance to the identity against the closed form for rotations.

use s2fix::diffeo::{c1_deviation, exact_deviation, BumpProfile, MapExpr};
use s2fix::geom::SpherePoint;

fn main() {
    for theta in [0.002, 0.004, 0.008] {
        let r = MapExpr::rotation(SpherePoint::north(), theta);
        let est = c1_deviation(&r, 4);
        println!(
            "rotation θ={theta}: sampled {:.12}  exact {:.12}",
            est.sampled_sup,
            exact_deviation(&r).unwrap()
        );
    }
    let twist = MapExpr::twist(
        SpherePoint::x_axis(),
        BumpProfile::new(0.001, 0.0, 0.5).unwrap(),
    );
    for level in 2..=5 {
        println!(
            "twist, mesh level {level}: {:.9}",
            c1_deviation(&twist, level).sampled_sup
        );
    }
}
