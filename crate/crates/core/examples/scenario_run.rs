//! Runs a scenario file and writes `<stem>.report.json` and `<stem>.svg`
//! into the working directory.
//!
//! `cargo run --example scenario_run -- scenarios/fix2_rational_rotation.json`

use s2fix::harness::{load_scenario, render_svg, run, Projection};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/scenarios/fix_shared_axis.json"
        )
        .into()
    });
    let prepared = match load_scenario(&path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(4);
        }
    };
    let report = run(&prepared);
    let stem = std::path::Path::new(&path)
        .file_stem()
        .unwrap()
        .to_string_lossy()
        .into_owned();
    std::fs::write(format!("{stem}.report.json"), report.to_json()).unwrap();
    std::fs::write(
        format!("{stem}.svg"),
        render_svg(&report, Projection::StereographicNorth),
    )
    .unwrap();
    println!(
        "{}: {:?}",
        prepared.scenario.task.kind(),
        report.status.code
    );
}
