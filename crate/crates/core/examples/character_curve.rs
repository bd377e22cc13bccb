//! Orbit polylines, the simple loop they close and its two disks.

use s2fix::curves::{extract_character_curve, verify_ball_exclusion};
use s2fix::diffeo::{FieldRegistry, MapExpr, VectorField};
use s2fix::geom::SpherePoint;

fn main() {
    let hex = MapExpr::rotation(SpherePoint::north(), std::f64::consts::PI / 3.0);
    let c = extract_character_curve(&hex, "hex", &SpherePoint::x_axis(), 100).unwrap();
    println!(
        "hexagon: {:?}, {} loop vertices, areas {:?}",
        c.closure_kind,
        c.loop_.vertices().len(),
        c.partition().component_areas()
    );

    let mut fields = FieldRegistry::new();
    fields.insert(
        "loc",
        VectorField::localized_rotation(SpherePoint::north(), 1.2, 0.01).unwrap(),
    );
    let f = fields.flow("loc", 1.0, None).unwrap();
    let p = SpherePoint::from_spherical(0.5, 0.0);
    let c = extract_character_curve(&f, "flow", &p, 20_000).unwrap();
    println!(
        "flow: {:?} after {} segments, closing edges {:?}, areas {:?}",
        c.closure_kind,
        c.polyline.edge_count(),
        c.closing_edges,
        c.partition().component_areas()
    );
    println!(
        "ball exclusion: {:?}",
        verify_ball_exclusion(&f, &p).unwrap()
    );
}
