use s2fix::diffeo::{GeneratorTable, MapExpr};
use s2fix::geom::SpherePoint;
use s2fix::solver::{find_two_fixed_points, ActionSpec, SolverConfig};

fn main() {
    let mut table = GeneratorTable::new();
    table.insert(
        "r",
        MapExpr::rotation(SpherePoint::north(), std::f64::consts::TAU / 2000.0),
    );
    let cfg = SolverConfig::default();
    let spec = ActionSpec::new(table, 1, &cfg).unwrap();
    let (a, b) = find_two_fixed_points(&spec, &SpherePoint::x_axis(), &cfg).unwrap();
    for r in [a, b] {
        println!(
            "side {}: {:?} residual {:.1e}",
            r.trace[0].side, r.point, r.residual
        );
    }
    match find_two_fixed_points(&spec, &SpherePoint::north(), &cfg) {
        Ok(_) => unreachable!(),
        Err(e) => println!("from the pole: {e}"),
    }
}
