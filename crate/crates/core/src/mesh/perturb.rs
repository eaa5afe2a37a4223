use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_star_shaped, MeshTriplet};
use crate::{Error, Point, Result};

/// Redraws allowed per vertex before giving up.
const MAX_DRAWS: usize = 64;

/// Randomly displaces vertices by up to `amplitude · h` per coordinate.
///
/// `h` is the shortest edge of the input mesh. Interior vertices move in both
/// coordinates, boundary vertices only along their boundary line, corners stay
/// fixed. Vertices are visited in index order with a `ChaCha8Rng` seeded from
/// `seed`; a draw that would make an incident cell non-star-shaped (with
/// respect to its centroid) is redrawn.
pub fn perturb(mesh: &MeshTriplet, amplitude: f64, seed: u64) -> Result<MeshTriplet> {
    if !(0.0..=0.5).contains(&amplitude) {
        return Err(Error::Mesh(format!("perturbation amplitude {amplitude} outside [0, 0.5]")));
    }
    if amplitude == 0.0 {
        return Ok(mesh.clone());
    }
    let h = mesh
        .faces
        .iter()
        .map(|f| (mesh.vertices[f.vertices[0]] - mesh.vertices[f.vertices[1]]).norm())
        .fold(f64::INFINITY, f64::min);
    let a = amplitude * h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = mesh.vertices.clone();

    for v in 0..mesh.num_vertices() {
        let Some(dir) = allowed_direction(mesh, v) else {
            continue;
        };
        let origin = vertices[v];
        let mut accepted = false;
        for _ in 0..MAX_DRAWS {
            let offset = match dir {
                Motion::Free => Point::new(rng.random_range(-a..=a), rng.random_range(-a..=a)),
                Motion::Along(t) => {
                    // Displacement along an axis-aligned tangent keeps each coordinate within ±a.
                    let s = rng.random_range(-a..=a) / t.x.abs().max(t.y.abs());
                    t * s
                }
            };
            vertices[v] = origin + offset;
            let ok = mesh.vertex_cells[v].iter().all(|&k| {
                let pts: Vec<Point> = mesh.cells[k].iter().map(|&w| vertices[w]).collect();
                is_star_shaped(&pts)
            });
            if ok {
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::Perturbation { vertex: v, attempts: MAX_DRAWS });
        }
    }
    MeshTriplet::from_cells(vertices, mesh.cells.clone())
}

enum Motion {
    Free,
    Along(Point),
}

/// Free for interior vertices, the boundary tangent for straight boundary
/// vertices, `None` for corners.
fn allowed_direction(mesh: &MeshTriplet, v: usize) -> Option<Motion> {
    let bfaces: Vec<usize> = mesh.vertex_faces[v]
        .iter()
        .copied()
        .filter(|&f| mesh.faces[f].is_boundary())
        .collect();
    if bfaces.is_empty() {
        return Some(Motion::Free);
    }
    let tangent = |f: usize| {
        let [a, b] = mesh.faces[f].vertices;
        (mesh.vertices[b] - mesh.vertices[a]).normalize()
    };
    let (t0, t1) = (tangent(bfaces[0]), tangent(bfaces[1]));
    if (t0.x * t1.y - t0.y * t1.x).abs() > 1e-12 {
        None
    } else {
        Some(Motion::Along(t0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, build_triangular, Geometry};

    #[test]
    fn zero_amplitude_is_identity() {
        let m = build_cartesian(4);
        assert_eq!(perturb(&m, 0.0, 7).unwrap(), m);
    }

    #[test]
    fn deterministic_for_seed() {
        let m = build_triangular(6);
        let a = perturb(&m, 0.5, 11).unwrap();
        let b = perturb(&m, 0.5, 11).unwrap();
        assert_eq!(a, b);
        let c = perturb(&m, 0.5, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn displacement_bounds_and_boundary() {
        let n = 8;
        let m = build_cartesian(n);
        let p = perturb(&m, 0.5, 3).unwrap();
        let h = 1.0 / n as f64;
        for (v, (a, b)) in m.vertices.iter().zip(&p.vertices).enumerate() {
            let d = b - a;
            assert!(d.x.abs() <= 0.5 * h + 1e-15 && d.y.abs() <= 0.5 * h + 1e-15);
            for c in 0..2 {
                if a[c] == 0.0 || a[c] == 1.0 {
                    assert_eq!(a[c], b[c], "vertex {v} left the boundary");
                }
            }
        }
        let g = Geometry::new(&p).unwrap();
        assert!((g.domain_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_amplitude() {
        assert!(perturb(&build_cartesian(2), 0.6, 0).is_err());
    }
}
