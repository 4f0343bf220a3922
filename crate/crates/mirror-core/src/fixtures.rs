//! Small atlases used throughout the tests, the acceptance suite and the CLI.

use crate::affine::{Atlas, Section, Vertex};
use crate::novikov::BaseField;
use crate::rat::{int, rat, Rat};
use rand::Rng;

fn cube(center: &[Rat], half: Rat) -> Vec<Vec<Rat>> {
    let n = center.len();
    (0..(1usize << n))
        .map(|mask| {
            (0..n)
                .map(|t| if mask >> t & 1 == 1 { center[t] + half } else { center[t] - half })
                .collect()
        })
        .collect()
}

fn build(n: usize, verts: Vec<(Vec<Rat>, Vec<Vec<Rat>>)>, simplices: Vec<Vec<i64>>) -> Atlas {
    let vertices = verts
        .into_iter()
        .enumerate()
        .map(|(k, (q, p))| Vertex { id: k as i64, basepoint: q, polytope: p })
        .collect();
    Atlas::new(n, BaseField::Rationals, 1, vertices, simplices, Vec::new(), Vec::new())
        .expect("fixture atlas is well formed")
}

/// One 1-simplex `{0,1}`.
pub fn interval() -> Atlas {
    build(
        1,
        vec![
            (vec![int(0)], vec![vec![rat(-1, 2)], vec![rat(1, 2)]]),
            (vec![rat(1, 4)], vec![vec![int(0)], vec![rat(1, 2)]]),
        ],
        vec![vec![0, 1]],
    )
}

/// One 2-simplex `{0,1,2}`.
pub fn triangle() -> Atlas {
    let q = [
        vec![int(0), int(0)],
        vec![rat(1, 4), int(0)],
        vec![rat(1, 4), rat(1, 4)],
    ];
    let w = [int(1), rat(3, 4), rat(1, 2)];
    build(
        2,
        (0..3).map(|k| (q[k].clone(), cube(&q[k], w[k]))).collect(),
        vec![vec![0, 1, 2]],
    )
}

/// The circle ℝ/ℤ with three vertices at 0, 1/3, 2/3.
pub fn circle() -> Atlas {
    build(
        1,
        vec![
            (vec![int(0)], vec![vec![rat(-2, 3)], vec![int(1)]]),
            (vec![rat(1, 3)], vec![vec![int(0)], vec![int(1)]]),
            (vec![rat(2, 3)], vec![vec![rat(1, 3)], vec![int(1)]]),
        ],
        vec![vec![0, 1], vec![1, 2], vec![0, 2]],
    )
}

/// The 2-torus from the 3×3 grid, 18 triangles. Vertex `3a+b` sits at `(a/3, b/3)`.
pub fn torus() -> Atlas {
    let id = |a: i64, b: i64| 3 * a.rem_euclid(3) + b.rem_euclid(3);
    let mut verts = Vec::new();
    for k in 0..9i64 {
        let q = vec![rat(k / 3, 3), rat(k % 3, 3)];
        let w = rat(9 - k, 3);
        verts.push((q.clone(), cube(&q, w)));
    }
    let mut simplices = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            simplices.push(vec![id(a, b), id(a + 1, b), id(a + 1, b + 1)]);
            simplices.push(vec![id(a, b), id(a, b + 1), id(a + 1, b + 1)]);
        }
    }
    build(2, verts, simplices)
}

/// A single 3-simplex, so that conditions on 4-chains are exercised.
pub fn tetrahedron() -> Atlas {
    let q = [
        vec![int(0), int(0), int(0)],
        vec![rat(1, 4), int(0), int(0)],
        vec![rat(1, 4), rat(1, 4), int(0)],
        vec![rat(1, 4), rat(1, 4), rat(1, 4)],
    ];
    let w = [int(1), rat(3, 4), rat(1, 2), rat(1, 4)];
    build(
        3,
        (0..4).map(|k| (q[k].clone(), cube(&q[k], w[k]))).collect(),
        vec![vec![0, 1, 2, 3]],
    )
}

pub fn by_name(name: &str) -> Option<Atlas> {
    match name {
        "interval" => Some(interval()),
        "triangle" => Some(triangle()),
        "circle" => Some(circle()),
        "torus" => Some(torus()),
        "tetrahedron" => Some(tetrahedron()),
        _ => None,
    }
}

fn small_rat<R: Rng>(rng: &mut R, den: i64, range: i64) -> Rat {
    rat(rng.gen_range(-range * den..=range * den), den)
}

/// Replaces the section data with random affine functions satisfying the
/// integrality condition: `df_ij = b_j - b_i + m_ij` with `m_ij` integral.
pub fn randomize_sections<R: Rng>(atlas: &mut Atlas, rng: &mut R) {
    let n = atlas.dimension;
    let b: Vec<Vec<Rat>> = (0..atlas.n_vertices())
        .map(|_| (0..n).map(|_| small_rat(rng, 3, 1)).collect())
        .collect();
    let edges: Vec<(usize, usize)> = atlas
        .chains(2)
        .into_iter()
        .filter(|c| c.len() == 2)
        .map(|c| (c.0[0], c.0[1]))
        .collect();
    atlas.sections.clear();
    for (i, j) in edges {
        let gradient = (0..n)
            .map(|t| b[j][t] - b[i][t] + int(rng.gen_range(-1..=1)))
            .collect();
        let value = small_rat(rng, 3, 2);
        atlas.sections.insert((i, j), Section { gradient, value });
    }
}

/// Random sign cochain on all triples. When `cocycle` is set it is a
/// coboundary `δε` of a random edge cochain.
pub fn randomize_signs<R: Rng>(atlas: &mut Atlas, rng: &mut R, cocycle: bool) {
    atlas.sign_cocycle.clear();
    let triples: Vec<_> = atlas.chains(3).into_iter().filter(|c| c.len() == 3).collect();
    if cocycle {
        let mut eps = std::collections::BTreeMap::new();
        for c in atlas.chains(2).into_iter().filter(|c| c.len() == 2) {
            eps.insert((c.0[0], c.0[1]), rng.gen_range(0..2u8));
        }
        for c in triples {
            let (i, j, k) = (c.0[0], c.0[1], c.0[2]);
            let v = (eps[&(j, k)] + eps[&(i, k)] + eps[&(i, j)]) % 2;
            atlas.sign_cocycle.insert((i, j, k), v);
        }
    } else {
        for c in triples {
            atlas.sign_cocycle.insert((c.0[0], c.0[1], c.0[2]), rng.gen_range(0..2u8));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate() {
        for name in ["interval", "triangle", "circle", "torus", "tetrahedron"] {
            let a = by_name(name).unwrap();
            let r = a.validate();
            assert!(r.ok(), "{name}: {:?}", r.violations);
        }
    }

    #[test]
    fn torus_counts() {
        let t = torus();
        assert_eq!(t.simplices.len(), 18);
        assert_eq!(t.chains(3).len(), 9 + 27 + 18);
    }
}
