//! Subdivided icosahedron used as the sampling mesh for sup-norm estimates
//! and fixed-point seeding.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::geom::{SpherePoint, Vec3};

#[derive(Debug)]
pub struct Icosphere {
    level: u32,
    vertices: Vec<SpherePoint>,
    faces: Vec<[usize; 3]>,
    neighbors: Vec<Vec<usize>>,
}

impl Icosphere {
    /// Icosahedron subdivided `level` times by edge midpoints; vertices of
    /// level `L` are a prefix of the vertices of level `L + 1`.
    pub fn new(level: u32) -> Self {
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        let raw = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ];
        let mut vertices: Vec<Vec3> = raw
            .iter()
            .map(|c| Vec3::new(c[0], c[1], c[2]).normalize())
            .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    vertices.push((vertices[a] + vertices[b]).normalize());
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let mut neighbors = vec![Vec::new(); vertices.len()];
        for &[a, b, c] in &faces {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
        for n in &mut neighbors {
            n.sort_unstable();
            n.dedup();
        }
        Icosphere {
            level,
            vertices: vertices
                .into_iter()
                .map(SpherePoint::from_vec_unchecked)
                .collect(),
            faces,
            neighbors,
        }
    }

    /// Shared, lazily built mesh for `level`.
    pub fn cached(level: u32) -> Arc<Icosphere> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Icosphere>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(level)
            .or_insert_with(|| Arc::new(Icosphere::new(level)))
            .clone()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn vertices(&self) -> &[SpherePoint] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Approximate edge length in radians.
    pub fn spacing(&self) -> f64 {
        1.107_148_717_794_090_4 / f64::from(1u32 << self.level)
    }
}
