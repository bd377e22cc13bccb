use s2fix::diffeo::{in_neighborhood_vk, vk_bound, MapExpr};
use s2fix::geom::SpherePoint;

fn main() {
    for k in 1..=4 {
        println!("V_{k}: bound {:.6e}", vk_bound(k));
    }
    let r = MapExpr::rotation(SpherePoint::north(), 0.004);
    for k in 1..=2 {
        let m = in_neighborhood_vk(&r, k);
        println!(
            "Rotation(z, 0.004) in V_{k}: {:?} (‖f − Id‖₁ = {:.6e})",
            m.verdict, m.estimate.sampled_sup
        );
    }
}
