//! Nested-disk search for a common fixed point, cross-checked by direct
//! minimization inside the final disk.

use s2fix::diffeo::{BumpProfile, GeneratorTable, MapExpr};
use s2fix::geom::SpherePoint;
use s2fix::solver::{direct_minimize, find_common_fixed_point, ActionSpec, SolverConfig};

fn main() {
    let z = SpherePoint::north();
    let mut table = GeneratorTable::new();
    table.insert(
        "a",
        MapExpr::twist(z, BumpProfile::new(0.004, 0.65, 0.349).unwrap()),
    );
    table.insert(
        "b",
        MapExpr::twist(z, BumpProfile::new(0.004, 0.0, 0.5).unwrap()),
    );
    let cfg = SolverConfig {
        start: Some(SpherePoint::new(0.98, 0.0, 0.2).unwrap()),
        ..SolverConfig::default()
    };
    let spec = ActionSpec::new(table, 1, &cfg).unwrap();
    let r = find_common_fixed_point(&spec, &cfg).unwrap();
    println!(
        "{:?} at {:?}, residual {:.2e}",
        r.method, r.point, r.residual
    );
    for s in &r.trace {
        println!(
            "  stage {} ({}): base {:?}, {} loop vertices, disk area {:.6}, min step {:.3e}, parent {:?}",
            s.id,
            s.map,
            s.base,
            s.loop_vertices.len(),
            s.disk_area(),
            s.min_step,
            s.parent
        );
    }
    let d = direct_minimize(&spec, &r.region, &cfg).unwrap();
    println!(
        "direct minimization in the final disk: {:?}, residual {:.2e}",
        d.point, d.residual
    );
}
