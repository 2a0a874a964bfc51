//! Nonconservative macroscopic traffic model on the porous city.
//!
//! Density `ρ` [veh/km²] and velocity `u` [km/h] are P1 nodal fields advanced
//! together by SSP-RK3 with lumped mass matrices. Advective terms use the
//! group (nodal-product) representation; with `upwind` enabled they receive the
//! smallest symmetric artificial diffusion that keeps off-diagonal couplings
//! nonnegative, so a forward-Euler stage under the step limit keeps `ρ ≥ 0`.

use crate::eikonal::{travel_cost, EikonalError, EikonalSolver};
use crate::fem::{integrate, lumped_mass, stiffness, SparseMatrix};
use crate::mesh::Mesh;
use crate::scenario::{ScenarioConfig, ScenarioFields};
use crate::ssp::{post_stage_weights, rate_weights, ssp_rk3_step, Stageable};

/// Lower bound on `ρ` wherever the momentum equation divides by it [veh/km²].
pub const RHO_FLOOR: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum TrafficError {
    #[error("time step {dt:.4e} h exceeds the stability limit {limit:.4e} h")]
    CflViolation { dt: f64, limit: f64 },
    #[error("traffic state became non-finite at t = {t} h")]
    NonFiniteState { t: f64 },
    #[error("routing failed: {0}")]
    Routing(#[from] EikonalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    pub t: f64,
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 2]>,
}

impl TrafficState {
    /// Cars at rest with the given density.
    pub fn at_rest(rho: Vec<f64>) -> Self {
        let n = rho.len();
        Self {
            t: 0.0,
            rho,
            u: vec![[0.0; 2]; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().all(|v| v.is_finite())
            && self.u.iter().all(|v| v[0].is_finite() && v[1].is_finite())
    }
}

impl Stageable for TrafficState {
    fn combine(&mut self, a: f64, base: &Self, b: f64, dt: f64, rate: &Self) {
        self.t = a * base.t + b * (self.t + dt);
        self.rho.combine(a, &base.rho, b, dt, &rate.rho);
        for ((y, y0), r) in self.u.iter_mut().zip(&base.u).zip(&rate.u) {
            y.combine(a, y0, b, dt, r);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficParams {
    pub u_max: f64,
    pub rho_max: f64,
    pub c2: f64,
    pub nu: f64,
    pub tau: f64,
    pub mu: f64,
    pub forchheimer: f64,
    pub pressure_term: bool,
    pub upwind: bool,
    pub cfl_safety: f64,
}

impl TrafficParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let t = &cfg.traffic;
        Self {
            u_max: t.u_max,
            rho_max: t.rho_max,
            c2: cfg.c_squared(),
            nu: t.nu,
            tau: t.tau,
            mu: t.mu,
            forchheimer: cfg.medium.forchheimer,
            pressure_term: t.pressure_term,
            upwind: t.upwind,
            cfl_safety: t.cfl_safety,
        }
    }
}

/// Nodal coefficient fields of the traffic model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficCoefficients {
    pub porosity: Vec<f64>,
    pub permeability: Vec<f64>,
    pub parking: Vec<f64>,
    pub demand: Vec<f64>,
}

impl From<&ScenarioFields> for TrafficCoefficients {
    fn from(f: &ScenarioFields) -> Self {
        Self {
            porosity: f.porosity.clone(),
            permeability: f.permeability.clone(),
            parking: f.parking.clone(),
            demand: f.demand.clone(),
        }
    }
}

/// Integrated rates of one right-hand-side evaluation [veh/h].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageFluxes {
    /// `∫(1−ε)q`.
    pub source: f64,
    /// `∫_∂Ω ρu·n`, computed on boundary edges.
    pub outflow: f64,
    /// Lumped `∫εκρ`.
    pub parking: f64,
}

/// Vehicle balance of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepBudget {
    pub mass_before: f64,
    pub mass_after: f64,
    /// SSP-weighted `Δt·(source − outflow − parking)`.
    pub net_flux: f64,
    /// Mass restored by clamping negative densities, SSP-weighted.
    pub clamp_added: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub state: TrafficState,
    pub budget: StepBudget,
    /// Nodes clamped in at least one stage.
    pub clamped_nodes: usize,
    /// Largest `|u·n̂|` on wall nodes after the step.
    pub wall_normal_speed: f64,
}

/// Assembled, state-independent pieces of the traffic discretization.
#[derive(Debug, Clone)]
pub struct TrafficModel<'m> {
    mesh: &'m Mesh,
    params: TrafficParams,
    coeffs: TrafficCoefficients,
    mass: Vec<f64>,
    mass_eps: Vec<f64>,
    source: Vec<f64>,
    source_total: f64,
    parking: Vec<f64>,
    diff_rho: SparseMatrix,
    diff_u: SparseMatrix,
    /// `∫λ_i ∇λ_j` per pattern slot.
    cij: Vec<[f64; 2]>,
    /// Slot of `(j, i)` for the slot of `(i, j)`.
    transpose: Vec<usize>,
    h_min: f64,
    eps_min: f64,
}

impl<'m> TrafficModel<'m> {
    pub fn new(mesh: &'m Mesh, coeffs: TrafficCoefficients, params: TrafficParams) -> Self {
        let n = mesh.n_nodes();
        let eps = &coeffs.porosity;
        let ones = vec![1.0; n];
        let mass = lumped_mass(mesh, &ones);
        let mass_eps = lumped_mass(mesh, eps);
        let solid_q: Vec<f64> = (0..n).map(|i| (1.0 - eps[i]) * coeffs.demand[i]).collect();
        let source = lumped_mass(mesh, &solid_q);
        let source_total = integrate(mesh, &solid_q);
        let eps_kappa: Vec<f64> = (0..n).map(|i| eps[i] * coeffs.parking[i]).collect();
        let parking = lumped_mass(mesh, &eps_kappa);
        let eps_nu: Vec<f64> = eps.iter().map(|e| e * params.nu).collect();
        let mu_over_eps: Vec<f64> = eps.iter().map(|e| params.mu / e).collect();
        let diff_rho = stiffness(mesh, &eps_nu);
        let diff_u = stiffness(mesh, &mu_over_eps);

        let pattern = mesh.pattern();
        let mut cij = vec![[0.0; 2]; pattern.nnz()];
        for t in 0..mesh.n_triangles() {
            let g = mesh.gradients(t);
            let w = mesh.area(t) / 3.0;
            let slots = mesh.slots(t);
            for a in 0..3 {
                for b in 0..3 {
                    let c = &mut cij[slots[3 * a + b]];
                    c[0] += w * g[b][0];
                    c[1] += w * g[b][1];
                }
            }
        }
        let mut transpose = vec![0; pattern.nnz()];
        for i in 0..n {
            let start = pattern.row_offsets()[i];
            for (k, &j) in pattern.row(i).iter().enumerate() {
                transpose[start + k] = pattern.position(j, i).expect("symmetric pattern");
            }
        }
        let eps_min = eps.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            mesh,
            params,
            mass,
            mass_eps,
            source,
            source_total,
            parking,
            diff_rho,
            diff_u,
            cij,
            transpose,
            h_min: mesh.min_altitude(),
            eps_min,
            coeffs,
        }
    }

    pub fn from_scenario(mesh: &'m Mesh, fields: &ScenarioFields, cfg: &ScenarioConfig) -> Self {
        Self::new(mesh, fields.into(), TrafficParams::from_config(cfg))
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn params(&self) -> &TrafficParams {
        &self.params
    }

    pub fn coefficients(&self) -> &TrafficCoefficients {
        &self.coeffs
    }

    /// Lumped `∫ερ` [veh].
    pub fn vehicles(&self, rho: &[f64]) -> f64 {
        self.mass_eps.iter().zip(rho).map(|(m, r)| m * r).sum()
    }

    /// Applies `Σ_j k_ij x_j` plus, when enabled, the upwind diffusion built
    /// from the same `k`. `k(slot, i, j)` is the coupling of row `i` to `x_j`.
    fn advect(&self, x: &[f64], k: impl Fn(usize, usize, usize) -> f64, out: &mut [f64]) {
        let pattern = self.mesh.pattern();
        let offsets = pattern.row_offsets();
        let cols = pattern.col_indices();
        for i in 0..x.len() {
            let mut acc = 0.0;
            for s in offsets[i]..offsets[i + 1] {
                let j = cols[s];
                let kij = k(s, i, j);
                acc += kij * x[j];
                if self.params.upwind && j != i {
                    let kji = k(self.transpose[s], j, i);
                    let d = (-kij).max(-kji).max(0.0);
                    acc += d * (x[j] - x[i]);
                }
            }
            out[i] += acc;
        }
    }

    /// `∫_∂Ω ρu·n` of the P1 interpolants, edge by edge.
    pub fn boundary_outflow(&self, rho: &[f64], u: &[[f64; 2]]) -> f64 {
        self.mesh
            .boundary_edges()
            .iter()
            .map(|e| {
                let [a, b] = e.nodes;
                let fa = rho[a] * (u[a][0] * e.normal[0] + u[a][1] * e.normal[1]);
                let fb = rho[b] * (u[b][0] * e.normal[0] + u[b][1] * e.normal[1]);
                0.5 * e.length * (fa + fb)
            })
            .sum()
    }

    /// `ρ̇` from `ε ρ̇ = (1−ε)q − ∇·(ρu) + ∇·(εν∇ρ) − εκρ` with lumped `ε`-mass.
    pub fn density_rhs(&self, rho: &[f64], u: &[[f64; 2]]) -> (Vec<f64>, StageFluxes) {
        let n = rho.len();
        let mut r = self.source.clone();
        // −∫∇·(ρu)λ_i = −Σ_j c_ij·u_j ρ_j
        self.advect(
            rho,
            |s, _, j| -(self.cij[s][0] * u[j][0] + self.cij[s][1] * u[j][1]),
            &mut r,
        );
        let kr = self.diff_rho.matvec(rho);
        let mut parking = 0.0;
        for i in 0..n {
            let p = self.parking[i] * rho[i];
            parking += p;
            r[i] = (r[i] - kr[i] - p) / self.mass_eps[i];
        }
        let fluxes = StageFluxes {
            source: self.source_total,
            outflow: self.boundary_outflow(rho, u),
            parking,
        };
        (r, fluxes)
    }

    /// Acceleration field `a` (the momentum right-hand side without the
    /// advective term): relaxation, `c²ρ(∇·u)(1,1)`, Brinkman diffusion and
    /// Darcy-Forchheimer drag.
    pub fn acceleration(&self, rho: &[f64], u: &[[f64; 2]], u_d: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let p = &self.params;
        let n = rho.len();
        let eps = &self.coeffs.porosity;
        let k = &self.coeffs.permeability;
        let div = if p.pressure_term {
            crate::fem::divergence_load(self.mesh, u)
        } else {
            vec![0.0; n]
        };
        let ux: Vec<f64> = u.iter().map(|v| v[0]).collect();
        let uy: Vec<f64> = u.iter().map(|v| v[1]).collect();
        let vx = self.diff_u.matvec(&ux);
        let vy = self.diff_u.matvec(&uy);
        (0..n)
            .map(|i| {
                let rho_hat = rho[i].max(RHO_FLOOR);
                let speed = u[i][0].hypot(u[i][1]);
                let drag = eps[i] * p.mu / (rho_hat * k[i])
                    + eps[i] * p.forchheimer / k[i].sqrt() * speed;
                let press = p.c2 * rho[i] * div[i] / self.mass[i];
                let visc = -eps[i] / (rho_hat * self.mass[i]);
                [
                    (u_d[i][0] - u[i][0]) / p.tau + press + visc * vx[i] - drag * u[i][0],
                    (u_d[i][1] - u[i][1]) / p.tau + press + visc * vy[i] - drag * u[i][1],
                ]
            })
            .collect()
    }

    /// `u̇ = a − (1/ε)(u·∇)u`.
    pub fn velocity_rhs(&self, rho: &[f64], u: &[[f64; 2]], u_d: &[[f64; 2]]) -> Vec<[f64; 2]> {
        let mut a = self.acceleration(rho, u, u_d);
        let eps = &self.coeffs.porosity;
        let n = rho.len();
        for c in 0..2 {
            let comp: Vec<f64> = u.iter().map(|v| v[c]).collect();
            let mut adv = vec![0.0; n];
            // −(1/ε_i)∫(u·∇u_c)λ_i with u lumped at node i
            self.advect(
                &comp,
                |s, i, _| -(u[i][0] * self.cij[s][0] + u[i][1] * self.cij[s][1]) / eps[i],
                &mut adv,
            );
            for i in 0..n {
                a[i][c] += adv[i] / self.mass[i];
            }
        }
        a
    }

    /// Step size limit before the safety factor: advection (with the fastest
    /// admissible speed and the `1/ε` amplification), diffusion and the stiff
    /// relaxation/drag/parking rates.
    pub fn stability_limit(&self, rho: &[f64], u: &[[f64; 2]]) -> f64 {
        let p = &self.params;
        let eps = &self.coeffs.porosity;
        let k = &self.coeffs.permeability;
        let u_top = u.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        let c = (p.c2 * p.rho_max).sqrt();
        let adv = self.h_min * self.eps_min / (u_top + c + p.u_max);
        let dmax = p.nu.max(p.mu);
        let diff = if dmax > 0.0 {
            self.h_min * self.h_min * self.eps_min / (2.0 * dmax)
        } else {
            f64::INFINITY
        };
        let mut rate: f64 = 1.0 / p.tau;
        for i in 0..rho.len() {
            let rho_hat = rho[i].max(RHO_FLOOR);
            let speed = u[i][0].hypot(u[i][1]).max(p.u_max);
            let r = 1.0 / p.tau
                + eps[i] * p.mu / (rho_hat * k[i])
                + eps[i] * p.forchheimer / k[i].sqrt() * speed
                + self.coeffs.parking[i];
            rate = rate.max(r);
        }
        adv.min(diff).min(1.0 / rate)
    }

    pub fn stable_dt(&self, state: &TrafficState) -> f64 {
        self.params.cfl_safety * self.stability_limit(&state.rho, &state.u)
    }

    /// Removes the normal component on wall nodes; returns the largest
    /// remaining `|u·n̂|`.
    pub fn project_walls(&self, u: &mut [[f64; 2]]) -> f64 {
        let mut worst: f64 = 0.0;
        for &(i, n) in self.mesh.wall_normals() {
            let un = u[i][0] * n[0] + u[i][1] * n[1];
            u[i][0] -= un * n[0];
            u[i][1] -= un * n[1];
            worst = worst.max((u[i][0] * n[0] + u[i][1] * n[1]).abs());
        }
        worst
    }

    /// One SSP-RK3 step with fixed desired speed.
    pub fn ssp_step(
        &self,
        state: &TrafficState,
        u_d: &[[f64; 2]],
        dt: f64,
    ) -> Result<StepReport, TrafficError> {
        let limit = self.stability_limit(&state.rho, &state.u);
        if !(dt <= limit) {
            return Err(TrafficError::CflViolation { dt, limit });
        }
        let n = state.rho.len();
        let mut fluxes = [StageFluxes::default(); 3];
        let mut clamp = [0.0; 3];
        let mut clamped = vec![false; n];
        let mut wall = 0.0;
        let next = ssp_rk3_step(
            state,
            dt,
            |y, k| {
                let (rho_dot, f) = self.density_rhs(&y.rho, &y.u);
                fluxes[k] = f;
                let u_dot = self.velocity_rhs(&y.rho, &y.u, u_d);
                Ok::<_, TrafficError>(TrafficState {
                    t: 1.0,
                    rho: rho_dot,
                    u: u_dot,
                })
            },
            |y, k| {
                for i in 0..n {
                    if y.rho[i] < 0.0 {
                        clamp[k] -= self.mass_eps[i] * y.rho[i];
                        y.rho[i] = 0.0;
                        clamped[i] = true;
                    }
                }
                wall = self.project_walls(&mut y.u);
            },
        )?;
        if !next.is_finite() {
            return Err(TrafficError::NonFiniteState { t: next.t });
        }
        let w = rate_weights();
        let pw = post_stage_weights();
        let net_flux = dt
            * (0..3)
                .map(|k| w[k] * (fluxes[k].source - fluxes[k].outflow - fluxes[k].parking))
                .sum::<f64>();
        let clamp_added: f64 = (0..3).map(|k| pw[k] * clamp[k]).sum();
        let mass_before = self.vehicles(&state.rho);
        let mass_after = self.vehicles(&next.rho);
        let budget = StepBudget {
            mass_before,
            mass_after,
            net_flux,
            clamp_added,
            residual: mass_after - mass_before - net_flux - clamp_added,
        };
        Ok(StepReport {
            state: next,
            budget,
            clamped_nodes: clamped.iter().filter(|&&c| c).count(),
            wall_normal_speed: wall,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSnapshot {
    pub t: f64,
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 2]>,
    pub u_d: Vec<[f64; 2]>,
    pub accel: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficRunOptions {
    pub t_end: f64,
    pub output_every: f64,
    pub refresh_every: usize,
    pub vehicle_epsilon: f64,
    /// End the run once the vehicle count drops below `vehicle_epsilon`.
    pub stop_at_evacuation: bool,
}

impl TrafficRunOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            t_end: cfg.time.t_end,
            output_every: cfg.time.output_every,
            refresh_every: cfg.routing.refresh_every.max(1),
            vehicle_epsilon: cfg.traffic.vehicle_epsilon,
            stop_at_evacuation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficRun {
    /// States at the output cadence, plus the final state when the run ends
    /// between output instants.
    pub snapshots: Vec<TrafficSnapshot>,
    pub steps: usize,
    /// Time at which `∫ερ` fell below the vehicle threshold.
    pub evacuation_time: Option<f64>,
    /// `(t, ∫ερ)` after every step, starting with the initial state.
    pub vehicles: Vec<(f64, f64)>,
    pub clamp_events: usize,
    pub node_steps: usize,
    /// Largest `|residual|/(mass + 1)` over all steps.
    pub max_budget_residual: f64,
    pub max_wall_normal_speed: f64,
    pub max_speed: f64,
    pub max_desired_speed: f64,
}

/// Marches the traffic model from rest, refreshing the route every
/// `refresh_every` steps.
pub fn run_traffic(
    model: &TrafficModel,
    router: &mut EikonalSolver,
    urban_mask: &[bool],
    initial_density: Vec<f64>,
    opts: &TrafficRunOptions,
) -> Result<TrafficRun, TrafficError> {
    let p = *model.params();
    let route = |router: &mut EikonalSolver, rho: &[f64]| {
        let f = travel_cost(rho, urban_mask, p.u_max, p.rho_max);
        router.route(&f).map(|r| r.u_d)
    };
    let mut state = TrafficState::at_rest(initial_density);
    let mut u_d = route(router, &state.rho)?;
    let snapshot = |s: &TrafficState, u_d: &[[f64; 2]]| TrafficSnapshot {
        t: s.t,
        rho: s.rho.clone(),
        u: s.u.clone(),
        u_d: u_d.to_vec(),
        accel: model.acceleration(&s.rho, &s.u, u_d),
    };
    let speed_max = |v: &[[f64; 2]]| v.iter().map(|x| x[0].hypot(x[1])).fold(0.0, f64::max);
    let mut run = TrafficRun {
        snapshots: vec![snapshot(&state, &u_d)],
        steps: 0,
        evacuation_time: None,
        vehicles: vec![(0.0, model.vehicles(&state.rho))],
        clamp_events: 0,
        node_steps: 0,
        max_budget_residual: 0.0,
        max_wall_normal_speed: 0.0,
        max_speed: 0.0,
        max_desired_speed: speed_max(&u_d),
    };
    if model.vehicles(&state.rho) < opts.vehicle_epsilon {
        run.evacuation_time = Some(0.0);
        return Ok(run);
    }
    let mut k_out = 1usize;
    let tol = 1e-9 * opts.output_every.max(1e-12);
    while state.t < opts.t_end - tol {
        if run.steps > 0 && run.steps % opts.refresh_every == 0 {
            u_d = route(router, &state.rho)?;
            run.max_desired_speed = run.max_desired_speed.max(speed_max(&u_d));
        }
        let next_out = (k_out as f64 * opts.output_every).min(opts.t_end);
        let mut dt = model.stable_dt(&state);
        let hits = dt >= next_out - state.t - tol;
        if hits {
            dt = next_out - state.t;
        }
        let report = model.ssp_step(&state, &u_d, dt)?;
        state = report.state;
        if hits {
            state.t = next_out;
        }
        run.steps += 1;
        run.node_steps += state.rho.len();
        run.clamp_events += report.clamped_nodes;
        let b = report.budget;
        run.max_budget_residual = run
            .max_budget_residual
            .max(b.residual.abs() / (b.mass_after.abs() + 1.0));
        run.max_wall_normal_speed = run.max_wall_normal_speed.max(report.wall_normal_speed);
        run.max_speed = run.max_speed.max(speed_max(&state.u));
        let total = b.mass_after;
        run.vehicles.push((state.t, total));
        if hits {
            run.snapshots.push(snapshot(&state, &u_d));
            k_out += 1;
        }
        if total < opts.vehicle_epsilon && run.evacuation_time.is_none() {
            run.evacuation_time = Some(state.t);
            if opts.stop_at_evacuation {
                if !hits {
                    run.snapshots.push(snapshot(&state, &u_d));
                }
                break;
            }
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_meshes::{rectangle, unit_square};
    use crate::mesh::BoundaryTag;

    fn params() -> TrafficParams {
        TrafficParams {
            u_max: 45.0,
            rho_max: 600.0,
            c2: 20.0 / 600.0,
            nu: 0.05,
            tau: 0.05,
            mu: 1.0,
            forchheimer: 0.01,
            pressure_term: true,
            upwind: true,
            cfl_safety: 0.4,
        }
    }

    fn uniform(n: usize, eps: f64, k: f64, kappa: f64, q: f64) -> TrafficCoefficients {
        TrafficCoefficients {
            porosity: vec![eps; n],
            permeability: vec![k; n],
            parking: vec![kappa; n],
            demand: vec![q; n],
        }
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let mesh = unit_square(6);
        let n = mesh.n_nodes();
        let model = TrafficModel::new(&mesh, uniform(n, 0.7, 0.1, 1.0, 0.0), params());
        let s = TrafficState::at_rest(vec![0.0; n]);
        let zero = vec![[0.0; 2]; n];
        let dt = model.stable_dt(&s);
        let r = model.ssp_step(&s, &zero, dt).unwrap();
        assert!(r.state.rho.iter().all(|&v| v == 0.0));
        assert!(r.state.u.iter().all(|&v| v == [0.0, 0.0]));
    }

    #[test]
    fn rest_relaxes_toward_desired_speed() {
        let mesh = unit_square(4);
        let n = mesh.n_nodes();
        let mut p = params();
        p.mu = 0.0;
        p.forchheimer = 0.0;
        let model = TrafficModel::new(&mesh, uniform(n, 1.0, 1e12, 0.0, 0.0), p);
        let u_d = vec![[3.0, -1.0]; n];
        let a = model.acceleration(&vec![50.0; n], &vec![[0.0; 2]; n], &u_d);
        for v in a {
            assert!((v[0] - 60.0).abs() < 1e-12 && (v[1] + 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_flow_feels_only_drag() {
        let mesh = unit_square(4);
        let n = mesh.n_nodes();
        let model = TrafficModel::new(&mesh, uniform(n, 0.5, 0.04, 0.0, 0.0), params());
        let u = vec![[3.0, 4.0]; n];
        let a = model.acceleration(&vec![10.0; n], &u, &u);
        let drag = 0.5 * 1.0 / (10.0 * 0.04) + 0.5 * 0.01 / 0.2 * 5.0;
        for v in a {
            assert!((v[0] + drag * 3.0).abs() < 1e-9 && (v[1] + drag * 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn parking_decay_is_third_order_accurate() {
        let mesh = unit_square(4);
        let n = mesh.n_nodes();
        let mut p = params();
        p.nu = 0.0;
        let model = TrafficModel::new(&mesh, uniform(n, 0.6, 1.0, 2.0, 0.0), p);
        let s = TrafficState::at_rest(vec![100.0; n]);
        let dt = 0.002;
        let r = model.ssp_step(&s, &vec![[0.0; 2]; n], dt).unwrap();
        let z: f64 = -2.0 * dt;
        let poly = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
        for v in &r.state.rho {
            assert!((v - 100.0 * poly).abs() < 1e-10);
            assert!((v - 100.0 * z.exp()).abs() < 100.0 * z.abs().powi(4));
        }
    }

    #[test]
    fn demand_grows_mass_at_solid_rate() {
        let mesh = unit_square(5);
        let n = mesh.n_nodes();
        let model = TrafficModel::new(&mesh, uniform(n, 0.4, 1.0, 0.0, 10.0), params());
        let s = TrafficState::at_rest(vec![0.0; n]);
        let r = model.ssp_step(&s, &vec![[0.0; 2]; n], 0.001).unwrap();
        let growth = model.vehicles(&r.state.rho) / 0.001;
        assert!((growth - 0.6 * 10.0).abs() < 1e-9);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let mesh = unit_square(4);
        let n = mesh.n_nodes();
        let model = TrafficModel::new(&mesh, uniform(n, 0.5, 1.0, 0.0, 0.0), params());
        let s = TrafficState::at_rest(vec![1.0; n]);
        let limit = model.stability_limit(&s.rho, &s.u);
        assert!(matches!(
            model.ssp_step(&s, &vec![[0.0; 2]; n], 2.0 * limit),
            Err(TrafficError::CflViolation { .. })
        ));
    }

    #[test]
    fn walls_stay_tangential_and_budget_closes() {
        let mesh = rectangle(
            (0.0, 0.0),
            (2.0, 1.0),
            12,
            6,
            [BoundaryTag::Inlet, BoundaryTag::Outlet, BoundaryTag::Wall, BoundaryTag::Wall],
        );
        let n = mesh.n_nodes();
        let model = TrafficModel::new(&mesh, uniform(n, 0.6, 0.5, 0.5, 3.0), params());
        let rho: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|p| 200.0 * (-((p[0] - 1.0).powi(2) + (p[1] - 0.5).powi(2)) / 0.1).exp())
            .collect();
        let mut s = TrafficState::at_rest(rho);
        let u_d = vec![[30.0, 20.0]; n];
        for _ in 0..40 {
            let dt = model.stable_dt(&s);
            let r = model.ssp_step(&s, &u_d, dt).unwrap();
            assert!(r.wall_normal_speed <= 1e-10);
            assert!(r.budget.residual.abs() <= 1e-9 * (r.budget.mass_after + 1.0));
            assert!(r.state.rho.iter().all(|&v| v >= 0.0));
            s = r.state;
        }
    }
}
