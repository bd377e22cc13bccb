//! Dense-sampling oracle for the C¹ distance of a rotation to the identity,
//! written without the library's norm code. `regenerate_norm_fixture`
//! rewrites `fixtures/rotation_c1_oracle.json`; the stored values are what
//! the acceptance run compares against.

use serde_json::{json, Value};

const SAMPLES: usize = 1_000_000;
const THETAS: [f64; 3] = [0.002, 0.004, 0.008];

type V = [f64; 3];

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: V, b: V) -> V {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
fn norm(a: V) -> f64 {
    dot(a, a).sqrt()
}
fn scale(a: V, s: f64) -> V {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Rotation about the z-axis.
fn rot_z(v: V, t: f64) -> V {
    let (s, c) = t.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

fn deviation_at(x: V, t: f64) -> f64 {
    let chord = norm(sub(rot_z(x, t), x));
    let helper = if x[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = {
        let c = cross(x, helper);
        scale(c, 1.0 / norm(c))
    };
    let e2 = cross(x, e1);
    let a = sub(rot_z(e1, t), e1);
    let b = sub(rot_z(e2, t), e2);
    // Largest singular value of [a b] from its 2×2 Gram matrix.
    let (p, q, r) = (dot(a, a), dot(a, b), dot(b, b));
    let lam = 0.5 * (p + r) + (0.25 * (p - r) * (p - r) + q * q).sqrt();
    chord + lam.sqrt()
}

fn fibonacci(i: usize, n: usize) -> V {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
    let r = (1.0 - z * z).sqrt();
    let phi = golden * i as f64;
    [r * phi.cos(), r * phi.sin(), z]
}

fn dense_sup(t: f64, n: usize) -> f64 {
    (0..n)
        .map(|i| deviation_at(fibonacci(i, n), t))
        .fold(0.0, f64::max)
}

fn fixture_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/rotation_c1_oracle.json")
}

#[test]
#[ignore = "rewrites the stored fixture"]
fn regenerate_norm_fixture() {
    let entries: Vec<Value> = THETAS
        .iter()
        .map(|&t| json!({"theta": t, "sup": dense_sup(t, SAMPLES)}))
        .collect();
    let doc = json!({"samples": SAMPLES, "lattice": "fibonacci", "entries": entries});
    std::fs::create_dir_all(fixture_path().parent().unwrap()).unwrap();
    std::fs::write(
        fixture_path(),
        serde_json::to_string_pretty(&doc).unwrap() + "\n",
    )
    .unwrap();
}

#[test]
fn fixture_is_consistent_with_closed_form() {
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture_path()).unwrap()).unwrap();
    assert_eq!(doc["samples"], SAMPLES);
    for e in doc["entries"].as_array().unwrap() {
        let t = e["theta"].as_f64().unwrap();
        let sup = e["sup"].as_f64().unwrap();
        let closed = 4.0 * (t / 2.0).sin();
        assert!(
            sup <= closed + 1e-15 && closed - sup < 1e-9,
            "θ={t}: {sup} vs {closed}"
        );
    }
}

#[test]
fn sparse_sampling_agrees_with_fixture() {
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture_path()).unwrap()).unwrap();
    for e in doc["entries"].as_array().unwrap() {
        let t = e["theta"].as_f64().unwrap();
        let sup = e["sup"].as_f64().unwrap();
        assert!((dense_sup(t, 20_000) - sup).abs() < 1e-8);
    }
}
