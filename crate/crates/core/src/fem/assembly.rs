//! Element assembly of P1 operators.
//!
//! Element contributions are accumulated in ascending triangle order into the
//! mesh's precomputed pattern, so repeated assemblies are bit-identical.

use crate::mesh::{BoundaryTag, Mesh};

use super::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FemError {
    #[error("lumped entry {row} is {value}, expected positive")]
    NonPositiveLumpedEntry { row: usize, value: f64 },
}

fn accumulate(mesh: &Mesh, mut element: impl FnMut(usize, &mut [[f64; 3]; 3])) -> SparseMatrix {
    let mut m = SparseMatrix::zeros(mesh.pattern().clone());
    for t in 0..mesh.n_triangles() {
        let mut block = [[0.0; 3]; 3];
        element(t, &mut block);
        let slots = mesh.slots(t);
        let vals = m.values_mut();
        for a in 0..3 {
            for b in 0..3 {
                vals[slots[3 * a + b]] += block[a][b];
            }
        }
    }
    m
}

/// `M_ij = ∫ c λ_j λ_i`, integrated exactly for P1 `c`.
pub fn mass(mesh: &Mesh, coeff: &[f64]) -> SparseMatrix {
    assert_eq!(coeff.len(), mesh.n_nodes());
    accumulate(mesh, |t, block| {
        let tri = mesh.triangles()[t];
        let c = tri.map(|v| coeff[v]);
        let area = mesh.area(t);
        // ∫λ_a³ = A/10, ∫λ_a²λ_b = A/30, ∫λ_aλ_bλ_c = A/60
        for a in 0..3 {
            for b in 0..3 {
                block[a][b] = if a == b {
                    let o1 = (a + 1) % 3;
                    let o2 = (a + 2) % 3;
                    area * (c[a] / 10.0 + (c[o1] + c[o2]) / 30.0)
                } else {
                    let k = 3 - a - b;
                    area * ((c[a] + c[b]) / 30.0 + c[k] / 60.0)
                };
            }
        }
    })
}

/// Row sums of [`mass`], computed directly: `∫ c λ_i`.
pub fn lumped_mass(mesh: &Mesh, coeff: &[f64]) -> Vec<f64> {
    load_vector(mesh, coeff)
}

/// `K_ij = ∫ c ∇λ_j·∇λ_i` with `c` the vertex mean per triangle.
pub fn stiffness(mesh: &Mesh, coeff: &[f64]) -> SparseMatrix {
    assert_eq!(coeff.len(), mesh.n_nodes());
    accumulate(mesh, |t, block| {
        let tri = mesh.triangles()[t];
        let cbar = (coeff[tri[0]] + coeff[tri[1]] + coeff[tri[2]]) / 3.0;
        let g = mesh.gradients(t);
        let w = cbar * mesh.area(t);
        for a in 0..3 {
            for b in 0..3 {
                block[a][b] = w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    })
}

/// `C_ij = ∫ (v·∇λ_j) λ_i` with `v` piecewise linear.
pub fn convection(mesh: &Mesh, velocity: &[[f64; 2]]) -> SparseMatrix {
    assert_eq!(velocity.len(), mesh.n_nodes());
    accumulate(mesh, |t, block| {
        let tri = mesh.triangles()[t];
        let v = tri.map(|n| velocity[n]);
        let sum = [v[0][0] + v[1][0] + v[2][0], v[0][1] + v[1][1] + v[2][1]];
        let g = mesh.gradients(t);
        let area = mesh.area(t);
        for a in 0..3 {
            // ∫ v λ_a = A/12 (Σv + v_a)
            let iv = [
                area / 12.0 * (sum[0] + v[a][0]),
                area / 12.0 * (sum[1] + v[a][1]),
            ];
            for b in 0..3 {
                block[a][b] = iv[0] * g[b][0] + iv[1] * g[b][1];
            }
        }
    })
}

/// `B_ij = ∫_{Γ_tag} λ_i λ_j (v·n)` over edges carrying `tag`, exact for P1 `v`.
pub fn boundary_flux(mesh: &Mesh, velocity: &[[f64; 2]], tag: BoundaryTag) -> SparseMatrix {
    assert_eq!(velocity.len(), mesh.n_nodes());
    let mut m = SparseMatrix::zeros(mesh.pattern().clone());
    for e in mesh.edges_with_tag(tag) {
        let [a, b] = e.nodes;
        let wa = velocity[a][0] * e.normal[0] + velocity[a][1] * e.normal[1];
        let wb = velocity[b][0] * e.normal[0] + velocity[b][1] * e.normal[1];
        let l = e.length;
        m.add_at(a, a, l * (3.0 * wa + wb) / 12.0);
        m.add_at(b, b, l * (wa + 3.0 * wb) / 12.0);
        let off = l * (wa + wb) / 12.0;
        m.add_at(a, b, off);
        m.add_at(b, a, off);
    }
    m
}

/// Row sums of `m`; every entry must be positive.
pub fn lump(m: &SparseMatrix) -> Result<Vec<f64>, FemError> {
    let sums = m.row_sums();
    match sums.iter().position(|&s| !(s > 0.0)) {
        Some(row) => Err(FemError::NonPositiveLumpedEntry {
            row,
            value: sums[row],
        }),
        None => Ok(sums),
    }
}

/// `∫ f λ_i` for P1 `f`.
pub fn load_vector(mesh: &Mesh, f: &[f64]) -> Vec<f64> {
    assert_eq!(f.len(), mesh.n_nodes());
    let mut out = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let s = f[tri[0]] + f[tri[1]] + f[tri[2]];
        let w = mesh.area(t) / 12.0;
        for &v in tri {
            out[v] += w * (s + f[v]);
        }
    }
    out
}

/// `∫ f` for P1 `f`.
pub fn integrate(mesh: &Mesh, f: &[f64]) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| mesh.area(t) * (f[tri[0]] + f[tri[1]] + f[tri[2]]) / 3.0)
        .sum()
}

/// Constant divergence of the P1 interpolant of `v` on each triangle.
pub fn element_divergence(mesh: &Mesh, velocity: &[[f64; 2]]) -> Vec<f64> {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let g = mesh.gradients(t);
            (0..3)
                .map(|a| velocity[tri[a]][0] * g[a][0] + velocity[tri[a]][1] * g[a][1])
                .sum()
        })
        .collect()
}

/// `∫ (∇·v_h) λ_i`.
pub fn divergence_load(mesh: &Mesh, velocity: &[[f64; 2]]) -> Vec<f64> {
    let div = element_divergence(mesh, velocity);
    let mut out = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = div[t] * mesh.area(t) / 3.0;
        for &v in tri {
            out[v] += w;
        }
    }
    out
}

/// Nodal gradient recovered as the area-weighted mean of incident triangle gradients.
pub fn nodal_gradient(mesh: &Mesh, values: &[f64]) -> Vec<[f64; 2]> {
    assert_eq!(values.len(), mesh.n_nodes());
    let mut acc = vec![[0.0; 2]; mesh.n_nodes()];
    let mut weight = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.gradients(t);
        let mut gt = [0.0; 2];
        for a in 0..3 {
            gt[0] += values[tri[a]] * g[a][0];
            gt[1] += values[tri[a]] * g[a][1];
        }
        let area = mesh.area(t);
        for &v in tri {
            acc[v][0] += area * gt[0];
            acc[v][1] += area * gt[1];
            weight[v] += area;
        }
    }
    acc.iter()
        .zip(&weight)
        .map(|(g, &w)| [g[0] / w, g[1] / w])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_meshes::{reference_triangle, unit_square};

    fn dense(m: &SparseMatrix) -> Vec<Vec<f64>> {
        (0..m.dim())
            .map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect())
            .collect()
    }

    #[test]
    fn reference_mass_matrix() {
        let mesh = reference_triangle();
        let m = dense(&mass(&mesh, &[1.0; 3]));
        for i in 0..3 {
            for j in 0..3 {
                let expect = 0.5 / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((m[i][j] - expect).abs() < 1e-15);
            }
        }
        let l = lump(&mass(&mesh, &[1.0; 3])).unwrap();
        for v in l {
            assert!((v - 0.5 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_stiffness_matrix() {
        let mesh = reference_triangle();
        let k = dense(&stiffness(&mesh, &[1.0; 3]));
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn variable_mass_matches_quadrature() {
        // Seven-point-free check: ∫ c λ_i λ_j against a fine barycentric sampling.
        let mesh = reference_triangle();
        let c = [1.0, 3.0, 7.0];
        let m = mass(&mesh, &c);
        let n = 400;
        let mut q = [[0.0; 3]; 3];
        let cell = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..n - i {
                // Two sub-triangles per cell, sampled at their centroids.
                let pts = [
                    ((i as f64 + 1.0 / 3.0) * cell, (j as f64 + 1.0 / 3.0) * cell, 0.5),
                    ((i as f64 + 2.0 / 3.0) * cell, (j as f64 + 2.0 / 3.0) * cell, 0.5),
                ];
                for (k, &(x, y, w)) in pts.iter().enumerate() {
                    if k == 1 && i + j + 1 >= n {
                        continue;
                    }
                    let l = [1.0 - x - y, x, y];
                    let cv = c[0] * l[0] + c[1] * l[1] + c[2] * l[2];
                    for a in 0..3 {
                        for b in 0..3 {
                            q[a][b] += w * cell * cell * cv * l[a] * l[b];
                        }
                    }
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                assert!((m.get(a, b) - q[a][b]).abs() < 1e-5, "{a}{b}");
            }
        }
    }

    #[test]
    fn stiffness_kills_constants() {
        let mesh = unit_square(6);
        let k = stiffness(&mesh, &vec![2.5; mesh.n_nodes()]);
        let y = k.matvec(&vec![3.0; mesh.n_nodes()]);
        assert!(y.iter().all(|v| v.abs() < 1e-12 * k.norm_inf()));
    }

    #[test]
    fn convection_of_x_matches_node_area() {
        let mesh = unit_square(8);
        let c = convection(&mesh, &vec![[1.0, 0.0]; mesh.n_nodes()]);
        let x: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        let y = c.matvec(&x);
        for (i, (a, b)) in y.iter().zip(mesh.node_area()).enumerate() {
            assert!((a - b).abs() < 1e-14, "node {i}");
        }
        let ones = vec![1.0; mesh.n_nodes()];
        assert!(c.matvec(&ones).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn left_edge_flux() {
        use crate::mesh::test_meshes::rectangle;
        let mesh = rectangle(
            (0.0, 0.0),
            (1.0, 1.0),
            4,
            4,
            [
                BoundaryTag::Inlet,
                BoundaryTag::Wall,
                BoundaryTag::Wall,
                BoundaryTag::Wall,
            ],
        );
        let v = vec![[-1.0, 0.0]; mesh.n_nodes()];
        let b = boundary_flux(&mesh, &v, BoundaryTag::Inlet);
        assert!((b.total() - 1.0).abs() < 1e-14);
        let none = boundary_flux(&mesh, &v, BoundaryTag::Outlet);
        assert_eq!(none.total(), 0.0);
        // tangential velocity on the tagged edge
        let tangential = boundary_flux(&mesh, &vec![[0.0, 1.0]; mesh.n_nodes()], BoundaryTag::Inlet);
        assert!(tangential.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn nodal_gradient_of_linear_is_exact() {
        let mesh = unit_square(5);
        let f: Vec<f64> = mesh.nodes().iter().map(|p| 2.0 * p[0] - 3.0 * p[1]).collect();
        for g in nodal_gradient(&mesh, &f) {
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_load_totals() {
        let mesh = unit_square(6);
        let v: Vec<[f64; 2]> = mesh.nodes().iter().map(|p| [p[0], 0.0]).collect();
        let total: f64 = divergence_load(&mesh, &v).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lump_rejects_nonpositive() {
        let m = SparseMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(
            lump(&m),
            Err(FemError::NonPositiveLumpedEntry { row: 1, .. })
        ));
        assert_eq!(lump(&SparseMatrix::identity(3)).unwrap(), vec![1.0; 3]);
    }
}
