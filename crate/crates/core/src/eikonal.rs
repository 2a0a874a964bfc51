//! Routing: travel cost, linearized eikonal potential and desired speed.
//!
//! The eikonal problem `‖∇φ‖ = 1/f` is replaced by the screened Poisson
//! problem `η²Δψ − ψ/f² = G` for `ψ = exp(−φ/η)` with homogeneous Neumann
//! conditions. A negative attraction source `G` makes `ψ` positive and
//! largest near the destination.

use crate::fem::{
    lumped_mass, nodal_gradient, solve_with_guess, stiffness, SolveError, SolveOptions,
    SparseMatrix,
};
use crate::mesh::Mesh;

/// Urban travel cost floor as a fraction of `U_max`.
pub const F_MIN_FRACTION: f64 = 0.05;
/// Clamp applied to `ψ` before taking the logarithm.
pub const PSI_MIN: f64 = 1e-300;
/// Gradient norm below which the desired speed is zero.
pub const G_EPS: f64 = 1e-8;
/// Relative residual target for the `ψ` solve; the potential is a logarithm
/// of `ψ`, so small values of `ψ` need more digits than the default.
pub const PSI_REL_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum EikonalError {
    #[error("screened Poisson solve failed: {0}")]
    SolverFailure(#[from] SolveError),
    #[error("ψ vanishes everywhere; the attraction source is zero")]
    AllZeroPsi,
}

/// Local travel cost: `U_max(1 − ρ/ρ_max)` floored at `F_MIN_FRACTION·U_max`
/// on urban nodes, 1 elsewhere.
pub fn travel_cost(rho: &[f64], urban: &[bool], u_max: f64, rho_max: f64) -> Vec<f64> {
    let f_min = F_MIN_FRACTION * u_max;
    rho.iter()
        .zip(urban)
        .map(|(&r, &u)| {
            if u {
                (u_max * (1.0 - r / rho_max)).max(f_min)
            } else {
                1.0
            }
        })
        .collect()
}

/// A tenth of the bounding-box diagonal.
pub fn default_eta(mesh: &Mesh) -> f64 {
    0.1 * mesh.diameter_of_domain()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingField {
    pub f: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub u_d: Vec<[f64; 2]>,
}

/// Assembled pieces of the screened Poisson problem that do not depend on `f`.
#[derive(Debug, Clone)]
pub struct EikonalSolver<'m> {
    mesh: &'m Mesh,
    eta: f64,
    diffusion: SparseMatrix,
    node_area: Vec<f64>,
    rhs: Vec<f64>,
    diag_slots: Vec<usize>,
    last_psi: Option<Vec<f64>>,
}

impl<'m> EikonalSolver<'m> {
    /// `attraction` is the nodal source `G`; its lumped load enters the
    /// right-hand side with the sign that makes `ψ > 0` for `G < 0`.
    pub fn new(mesh: &'m Mesh, attraction: &[f64], eta: f64) -> Self {
        let mut diffusion = stiffness(mesh, &vec![1.0; mesh.n_nodes()]);
        diffusion.scale(eta * eta);
        let node_area = lumped_mass(mesh, &vec![1.0; mesh.n_nodes()]);
        let rhs = attraction
            .iter()
            .zip(&node_area)
            .map(|(g, m)| -g * m)
            .collect();
        let diag_slots = (0..mesh.n_nodes())
            .map(|i| mesh.pattern().position(i, i).expect("diagonal"))
            .collect();
        Self {
            mesh,
            eta,
            diffusion,
            node_area,
            rhs,
            diag_slots,
            last_psi: None,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `η²K ψ + diag(m_i/f_i²) ψ = −m_i G_i`.
    pub fn solve_psi(&mut self, f: &[f64]) -> Result<Vec<f64>, EikonalError> {
        let mut a = self.diffusion.clone();
        {
            let vals = a.values_mut();
            for (i, &k) in self.diag_slots.iter().enumerate() {
                vals[k] += self.node_area[i] / (f[i] * f[i]);
            }
        }
        let opts = SolveOptions::symmetric()
            .with_rel_tol(PSI_REL_TOL)
            .with_max_iter(20 * self.mesh.n_nodes() + 100);
        let sol = solve_with_guess(&a, &self.rhs, self.last_psi.as_deref(), &opts)?;
        self.last_psi = Some(sol.x.clone());
        Ok(sol.x)
    }

    pub fn route(&mut self, f: &[f64]) -> Result<RoutingField, EikonalError> {
        let psi = self.solve_psi(f)?;
        let phi = recover_potential(&psi, self.eta)?;
        let u_d = desired_speed(self.mesh, f, &phi);
        Ok(RoutingField {
            f: f.to_vec(),
            psi,
            phi,
            u_d,
        })
    }
}

/// Single-shot solve of the screened Poisson problem.
pub fn solve_screened_poisson(
    mesh: &Mesh,
    f: &[f64],
    attraction: &[f64],
    eta: f64,
) -> Result<Vec<f64>, EikonalError> {
    EikonalSolver::new(mesh, attraction, eta).solve_psi(f)
}

/// `φ = −η ln max(ψ, ψ_min)`.
pub fn recover_potential(psi: &[f64], eta: f64) -> Result<Vec<f64>, EikonalError> {
    if psi.iter().all(|&p| !(p > PSI_MIN)) {
        return Err(EikonalError::AllZeroPsi);
    }
    Ok(psi.iter().map(|&p| -eta * p.max(PSI_MIN).ln()).collect())
}

/// `u_d = −f ∇φ/‖∇φ‖`, zero where the recovered gradient is below `G_EPS`.
pub fn desired_speed(mesh: &Mesh, f: &[f64], phi: &[f64]) -> Vec<[f64; 2]> {
    nodal_gradient(mesh, phi)
        .iter()
        .zip(f)
        .map(|(g, &fi)| {
            let n = g[0].hypot(g[1]);
            if n < G_EPS {
                [0.0, 0.0]
            } else {
                [-fi * g[0] / n, -fi * g[1] / n]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_meshes::unit_square;

    #[test]
    fn travel_cost_cases() {
        let f = travel_cost(&[0.0, 100.0, 100.0, 1e9], &[true, true, false, true], 45.0, 100.0);
        assert_eq!(f, vec![45.0, 45.0 * F_MIN_FRACTION, 1.0, 45.0 * F_MIN_FRACTION]);
    }

    #[test]
    fn potential_recovery() {
        assert_eq!(recover_potential(&[1.0, 1.0], 0.3).unwrap(), vec![0.0, 0.0]);
        let phi = recover_potential(&[(-1.0f64).exp()], 0.5).unwrap();
        assert!((phi[0] - 0.5).abs() < 1e-15);
        assert!(matches!(
            recover_potential(&[0.0, -1.0], 1.0),
            Err(EikonalError::AllZeroPsi)
        ));
    }

    #[test]
    fn zero_source_gives_zero_psi() {
        let mesh = unit_square(6);
        let psi = solve_screened_poisson(&mesh, &vec![1.0; mesh.n_nodes()], &vec![0.0; mesh.n_nodes()], 0.2)
            .unwrap();
        assert!(psi.iter().all(|&p| p == 0.0));
        assert!(recover_potential(&psi, 0.2).is_err());
    }

    #[test]
    fn linear_potential_gives_unit_speed() {
        let mesh = unit_square(5);
        let phi: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        let u = desired_speed(&mesh, &vec![1.0; mesh.n_nodes()], &phi);
        for v in u {
            assert!((v[0] + 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
        }
        let flat = desired_speed(&mesh, &vec![3.0; mesh.n_nodes()], &vec![2.0; mesh.n_nodes()]);
        assert!(flat.iter().all(|v| *v == [0.0, 0.0]));
    }

    #[test]
    fn psi_positive_and_peaks_at_source() {
        let mesh = unit_square(12);
        let g = crate::scenario::attraction_field(&mesh, [0.5, 0.5], 1.0, 0.1);
        let psi = solve_screened_poisson(&mesh, &vec![1.0; mesh.n_nodes()], &g, 0.2).unwrap();
        assert!(psi.iter().all(|&p| p > 0.0));
        let imax = (0..psi.len()).max_by(|&a, &b| psi[a].total_cmp(&psi[b])).unwrap();
        assert_eq!(mesh.nodes()[imax], [0.5, 0.5]);
    }
}
