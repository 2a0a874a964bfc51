//! Routing potential on a square with uniform travel cost.

use porous_city::eikonal::EikonalSolver;
use porous_city::fem::nodal_gradient;
use porous_city::mesh::{structured_rectangle, BoundaryTag, Mesh, SideTags};

fn square(n: usize) -> Mesh {
    let w = BoundaryTag::Wall;
    structured_rectangle([0.0, 0.0], [1.0, 1.0], n, n, SideTags { left: w, right: w, bottom: w, top: w })
}

fn central_sink(mesh: &Mesh) -> Vec<f64> {
    mesh.nodes()
        .iter()
        .map(|p| -(-((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)) / 0.002).exp())
        .collect()
}

// In 2D the screened Green's function gives |∇φ| ≈ 1 + η/(2r) near the sink,
// so the overshoot above the unit slope grows with η.
#[test]
fn slope_overshoot_near_sink_grows_with_eta() {
    let mesh = square(40);
    let g = central_sink(&mesh);
    let f = vec![1.0; mesh.n_nodes()];
    let steepest = |eta: f64| {
        let r = EikonalSolver::new(&mesh, &g, eta).route(&f).unwrap();
        nodal_gradient(&mesh, &r.phi)
            .iter()
            .map(|d| d[0].hypot(d[1]))
            .fold(0.0, f64::max)
    };
    let slopes: Vec<f64> = [0.05, 0.1, 0.2, 0.4].into_iter().map(steepest).collect();
    assert!(slopes.iter().all(|&s| s > 1.0), "{slopes:?}");
    assert!(slopes.windows(2).all(|w| w[1] > w[0]), "{slopes:?}");
}

#[test]
fn psi_decreases_away_from_the_sink() {
    let mesh = square(30);
    let g = central_sink(&mesh);
    let psi = EikonalSolver::new(&mesh, &g, 0.1).solve_psi(&vec![1.0; mesh.n_nodes()]).unwrap();
    assert!(psi.iter().all(|&p| p > 0.0));
    // Along the diagonal from the center to a corner.
    let diag: Vec<f64> = (0..=15).map(|k| psi[(15 + k) * 31 + 15 + k]).collect();
    assert!(diag.windows(2).all(|w| w[1] < w[0]), "{diag:?}");
}
