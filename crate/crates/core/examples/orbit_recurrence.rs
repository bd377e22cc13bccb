//! Forward orbits and the finite-budget recurrence test.

use s2fix::diffeo::{FieldRegistry, MapExpr, VectorField};
use s2fix::dynamics::{recurrence_scan, recurrent_point_in_closure, semiorbit};
use s2fix::geom::SpherePoint;

fn main() {
    let p = SpherePoint::new(0.8, 0.0, 0.6).unwrap();
    let rational = MapExpr::rotation(SpherePoint::north(), std::f64::consts::TAU / 400.0);
    let rec = semiorbit(&rational, "r", &p, 1000);
    println!(
        "rational rotation: exact period {:?}, min return {:?}",
        rec.exact_period, rec.min_return
    );

    let irrational = MapExpr::rotation(SpherePoint::north(), 0.003);
    let scan = recurrence_scan(&irrational, &p, 10_000, 1e-6);
    println!("irrational rotation: {scan:?}");
    match recurrent_point_in_closure(&irrational, &p, 10_000, 1e-3) {
        Ok(q) => println!("recurrent point at δ=1e-3: {q:?}"),
        Err(e) => println!("{e}"),
    }

    let mut fields = FieldRegistry::new();
    fields.insert(
        "loc",
        VectorField::localized_rotation(SpherePoint::north(), 1.2, 0.01).unwrap(),
    );
    let flow = fields.flow("loc", 1.0, None).unwrap();
    let q = SpherePoint::from_spherical(0.5, 0.0);
    println!(
        "localized flow: {:?}",
        recurrence_scan(&flow, &q, 10_000, 1e-6)
    );
}
