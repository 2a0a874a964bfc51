//! Porous-medium air flow by pressure projection.
//!
//! Each step forms a tentative velocity explicitly (advection, Brinkman
//! diffusion, Darcy and Forchheimer drag), solves a pressure Poisson problem
//! that removes its divergence, and corrects with the recovered nodal
//! pressure gradient. Viscosity is kinematic [km²/h], so the air density only
//! scales the reported pressure.
//!
//! Wind snapshot layout (little endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `PCWIND\0\x01` |
//! | 8     | node count `u64` |
//! | 8     | steps `u64` |
//! | 8     | converged flag `u64` (0 or 1) |
//! | 8     | time `f64` [h] |
//! | 16·n  | `v_x, v_y` per node, `f64` [km/h] |

use std::io::{Read, Write};
use std::path::Path;

use crate::fem::{
    convection, divergence_load, element_divergence, nodal_gradient, solve_with_guess, stiffness, SolveError,
    SolveOptions, SparseMatrix,
};
use crate::mesh::{BoundaryTag, Mesh, Point};
use crate::scenario::{ScenarioConfig, ScenarioFields};

pub const WIND_MAGIC: [u8; 8] = *b"PCWIND\0\x01";

#[derive(Debug, thiserror::Error)]
pub enum AirflowError {
    #[error("wind became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("pressure solve failed: {0}")]
    SolverFailure(#[from] SolveError),
    #[error("wind snapshot: {0}")]
    Io(#[from] std::io::Error),
    #[error("wind snapshot is malformed: {0}")]
    BadSnapshot(String),
}

/// Dirichlet wind on inlet nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InletProfile {
    Constant([f64; 2]),
    /// `x`-directed parabola vanishing at `y_min` and `y_max` with maximum `peak`.
    ParabolicChannel { y_min: f64, y_max: f64, peak: f64 },
}

impl InletProfile {
    pub fn value(&self, p: Point) -> [f64; 2] {
        match *self {
            Self::Constant(v) => v,
            Self::ParabolicChannel { y_min, y_max, peak } => {
                let w = y_max - y_min;
                let s = ((p[1] - y_min) * (y_max - p[1]) / (w * w)).max(0.0);
                [4.0 * peak * s, 0.0]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindParams {
    /// Air density [kg/km³], used only for reporting pressure.
    pub rho_a: f64,
    /// Kinematic viscosity [km²/h].
    pub mu: f64,
    pub forchheimer: f64,
    pub steady_tol: f64,
    pub max_steps: usize,
    pub cfl_safety: f64,
    /// Incremental pressure correction: the tentative step keeps `−ε∇Pⁿ` and
    /// the Poisson problem yields the increment. The plain form leaves an
    /// `O(Δt)` divergence in the steady state.
    pub incremental: bool,
    pub inlet: InletProfile,
}

impl WindParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            rho_a: cfg.air.rho,
            mu: cfg.air.mu,
            forchheimer: cfg.medium.forchheimer,
            steady_tol: cfg.air.steady_tol,
            max_steps: cfg.air.max_steps,
            cfl_safety: cfg.air.cfl_safety,
            incremental: cfg.air.incremental,
            inlet: InletProfile::Constant(cfg.air.inlet),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindState {
    pub t: f64,
    pub v: Vec<[f64; 2]>,
    /// Kinematic pressure [km²/h²].
    pub p: Vec<f64>,
}

impl WindState {
    pub fn calm(n: usize) -> Self {
        Self {
            t: 0.0,
            v: vec![[0.0; 2]; n],
            p: vec![0.0; n],
        }
    }

    /// Pressure in kg/(km·h²).
    pub fn reported_pressure(&self, rho_a: f64) -> Vec<f64> {
        self.p.iter().map(|p| p * rho_a).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindStep {
    pub state: WindState,
    /// `‖∇·v‖_{L²}` of the tentative and corrected velocity.
    pub divergence_before: f64,
    pub divergence_after: f64,
    /// `max ‖vⁿ⁺¹ − vⁿ‖/Δt`.
    pub rate_of_change: f64,
    /// Largest `|v·n̂|` on wall nodes.
    pub wall_normal_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindRun {
    pub state: WindState,
    pub steps: usize,
    pub converged: bool,
    /// Elementwise and pressure-space divergence norms of the final state.
    pub divergence: f64,
    pub weak_divergence: f64,
    pub max_wall_normal_speed: f64,
}

/// `‖∇·v_h‖_{L²}` from the elementwise constant divergence.
pub fn divergence_norm(mesh: &Mesh, v: &[[f64; 2]]) -> f64 {
    element_divergence(mesh, v)
        .iter()
        .enumerate()
        .map(|(t, d)| mesh.area(t) * d * d)
        .sum::<f64>()
        .sqrt()
}

/// Discrete divergence in the pressure space: the lumped `L²` projection of
/// `∇·v` onto P1, `d_i = ∫(∇·v)λ_i / m_i`, measured as `(Σ m_i d_i²)^{1/2}`
/// over the nodes where the pressure is unknown. The incremental scheme
/// drives it to zero at steady state, while the elementwise norm of an
/// equal-order field keeps an `O(h)` part near curved walls.
pub fn weak_divergence_norm(mesh: &Mesh, v: &[[f64; 2]], fixed_pressure: &[usize]) -> f64 {
    let b = divergence_load(mesh, v);
    let mut free = vec![true; b.len()];
    for &i in fixed_pressure {
        free[i] = false;
    }
    b.iter()
        .zip(mesh.node_area())
        .zip(&free)
        .filter(|(_, &f)| f)
        .map(|((b, m), _)| b * b / m)
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone)]
pub struct WindModel<'m> {
    mesh: &'m Mesh,
    params: WindParams,
    eps: Vec<f64>,
    perm: Vec<f64>,
    mass: Vec<f64>,
    viscous: SparseMatrix,
    pressure: SparseMatrix,
    fixed_pressure: Vec<usize>,
    inlet: Vec<(usize, [f64; 2])>,
    /// Smallest altitude of the triangles around each node.
    node_h: Vec<f64>,
    viscous_rate: Vec<f64>,
}

impl<'m> WindModel<'m> {
    pub fn new(mesh: &'m Mesh, porosity: Vec<f64>, permeability: Vec<f64>, params: WindParams) -> Self {
        let n = mesh.n_nodes();
        let mass = mesh.node_area().to_vec();
        let mu_over_eps: Vec<f64> = porosity.iter().map(|e| params.mu / e).collect();
        let viscous = stiffness(mesh, &mu_over_eps);
        let mut pressure = stiffness(mesh, &porosity);
        let fixed_pressure = if mesh.outlet_nodes().is_empty() {
            vec![0]
        } else {
            mesh.outlet_nodes().to_vec()
        };
        let mut scratch = vec![0.0; n];
        pressure.apply_dirichlet(&mut scratch, &fixed_pressure, &vec![0.0; fixed_pressure.len()]);
        let inlet = mesh
            .inlet_nodes()
            .iter()
            .map(|&i| (i, params.inlet.value(mesh.nodes()[i])))
            .collect();
        let mut node_h = vec![f64::INFINITY; n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let alt = 2.0 * mesh.area(t) / mesh.diameter(t);
            for &i in tri {
                node_h[i] = node_h[i].min(alt);
            }
        }
        // Half the Gershgorin radius of diag(ε/m)·K; equals εK_ii/m for
        // M-matrices but stays safe when obtuse triangles flip off-diagonal signs.
        let viscous_rate = (0..n)
            .map(|i| porosity[i] * viscous.row_entries(i).map(|(_, k)| k.abs()).sum::<f64>() / (2.0 * mass[i]))
            .collect();
        Self {
            mesh,
            params,
            eps: porosity,
            perm: permeability,
            mass,
            viscous,
            pressure,
            fixed_pressure,
            inlet,
            node_h,
            viscous_rate,
        }
    }

    pub fn from_scenario(mesh: &'m Mesh, fields: &ScenarioFields, cfg: &ScenarioConfig) -> Self {
        Self::new(
            mesh,
            fields.porosity.clone(),
            fields.permeability.clone(),
            WindParams::from_config(cfg),
        )
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn params(&self) -> &WindParams {
        &self.params
    }

    /// Nodes carrying the pressure gauge: the outlet, or node 0 without one.
    pub fn fixed_pressure_nodes(&self) -> &[usize] {
        &self.fixed_pressure
    }

    /// Inlet values, then slip on walls not on the inlet. Returns the largest
    /// wall `|v·n̂|` left afterwards.
    pub fn impose_boundary(&self, v: &mut [[f64; 2]]) -> f64 {
        let mut worst: f64 = 0.0;
        for &(i, n) in self.mesh.wall_normals() {
            let vn = v[i][0] * n[0] + v[i][1] * n[1];
            v[i][0] -= vn * n[0];
            v[i][1] -= vn * n[1];
        }
        for &(i, val) in &self.inlet {
            v[i] = val;
        }
        for &(i, n) in self.mesh.wall_normals() {
            if self.inlet.binary_search_by_key(&i, |e| e.0).is_err() {
                worst = worst.max((v[i][0] * n[0] + v[i][1] * n[1]).abs());
            }
        }
        worst
    }

    /// Step limit before the safety factor: the inverse of the largest nodal
    /// rate, summing advection `‖v‖_max/(h_i ε_i)`, the Gershgorin bound
    /// `ε_i K_ii/m_i` of the viscous operator and the drag coefficient.
    pub fn stability_limit(&self, v: &[[f64; 2]]) -> f64 {
        let p = &self.params;
        let inlet_speed = self
            .inlet
            .iter()
            .map(|(_, w)| w[0].hypot(w[1]))
            .fold(0.0, f64::max);
        let v_top = v
            .iter()
            .map(|w| w[0].hypot(w[1]))
            .fold(inlet_speed, f64::max);
        let mut rate: f64 = 0.0;
        for i in 0..v.len() {
            let r = v_top / (self.node_h[i] * self.eps[i])
                + self.viscous_rate[i]
                + self.eps[i] * p.mu / self.perm[i]
                + self.eps[i] * p.forchheimer / self.perm[i].sqrt() * v_top;
            rate = rate.max(r);
        }
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn stable_dt(&self, v: &[[f64; 2]]) -> f64 {
        self.params.cfl_safety * self.stability_limit(v)
    }

    /// `v* = v + Δt[−(1/ε)((v·∇)v + ½(∇·v)v) + ε∇·((μ/ε)∇v) − (εμ/K)v − (εC_F/√K)‖v‖v]`
    /// with lumped mass, then inlet values and wall slip. The `½(∇·v)v` part
    /// vanishes for solenoidal `v` and keeps the discrete convection from
    /// feeding energy through the residual divergence. Where air re-enters
    /// through the outlet, `∮(v·n)₋ v` is added to the convective term so
    /// backflow cannot inject energy either.
    pub fn tentative_velocity(&self, v: &[[f64; 2]], dt: f64) -> Vec<[f64; 2]> {
        let p = &self.params;
        let n = v.len();
        let conv = convection(self.mesh, v);
        let div = divergence_load(self.mesh, v);
        let mut backflow = vec![0.0; n];
        for e in self.mesh.edges_with_tag(BoundaryTag::Outlet) {
            for &a in &e.nodes {
                let vn = v[a][0] * e.normal[0] + v[a][1] * e.normal[1];
                backflow[a] += 0.5 * e.length * (-vn).max(0.0);
            }
        }
        let mut out = vec![[0.0; 2]; n];
        for c in 0..2 {
            let comp: Vec<f64> = v.iter().map(|w| w[c]).collect();
            let adv = conv.matvec(&comp);
            let visc = self.viscous.matvec(&comp);
            for i in 0..n {
                let speed = v[i][0].hypot(v[i][1]);
                let drag = self.eps[i] * p.mu / self.perm[i]
                    + self.eps[i] * p.forchheimer / self.perm[i].sqrt() * speed;
                let skew = adv[i] + (0.5 * div[i] + backflow[i]) * comp[i];
                let rhs = -(skew / self.eps[i] + self.eps[i] * visc[i]) / self.mass[i]
                    - drag * comp[i];
                out[i][c] = comp[i] + dt * rhs;
            }
        }
        self.impose_boundary(&mut out);
        out
    }

    /// `(1/Δt)∫(∇·v*)λ_i`.
    pub fn pressure_rhs(&self, v_star: &[[f64; 2]], dt: f64) -> Vec<f64> {
        divergence_load(self.mesh, v_star)
            .into_iter()
            .map(|b| b / dt)
            .collect()
    }

    /// Kinematic pressure from `∇·(ε∇P) = (1/Δt)∇·v*`, natural on inlet and
    /// walls, zero on the outlet.
    pub fn pressure_poisson(
        &self,
        v_star: &[[f64; 2]],
        dt: f64,
        guess: Option<&[f64]>,
    ) -> Result<Vec<f64>, AirflowError> {
        let mut rhs: Vec<f64> = self.pressure_rhs(v_star, dt).into_iter().map(|b| -b).collect();
        for &i in &self.fixed_pressure {
            rhs[i] = 0.0;
        }
        let opts = SolveOptions::symmetric().with_rel_tol(1e-10);
        Ok(solve_with_guess(&self.pressure, &rhs, guess, &opts)?.x)
    }

    /// `vⁿ⁺¹ = v* − Δt ε ∇P`, then inlet values and wall slip.
    pub fn correct_velocity(&self, v_star: &[[f64; 2]], p: &[f64], dt: f64) -> (Vec<[f64; 2]>, f64) {
        let g = nodal_gradient(self.mesh, p);
        let mut v: Vec<[f64; 2]> = v_star
            .iter()
            .zip(&g)
            .zip(&self.eps)
            .map(|((w, g), e)| [w[0] - dt * e * g[0], w[1] - dt * e * g[1]])
            .collect();
        let wall = self.impose_boundary(&mut v);
        (v, wall)
    }

    pub fn step(&self, state: &WindState, dt: f64, step: usize) -> Result<WindStep, AirflowError> {
        let mut v_star = self.tentative_velocity(&state.v, dt);
        let (v, wall, p) = if self.params.incremental {
            let g = nodal_gradient(self.mesh, &state.p);
            for ((w, g), e) in v_star.iter_mut().zip(&g).zip(&self.eps) {
                w[0] -= dt * e * g[0];
                w[1] -= dt * e * g[1];
            }
            self.impose_boundary(&mut v_star);
            let dp = self.pressure_poisson(&v_star, dt, None)?;
            let (v, wall) = self.correct_velocity(&v_star, &dp, dt);
            let p = state.p.iter().zip(&dp).map(|(a, b)| a + b).collect();
            (v, wall, p)
        } else {
            let p = self.pressure_poisson(&v_star, dt, Some(&state.p))?;
            let (v, wall) = self.correct_velocity(&v_star, &p, dt);
            (v, wall, p)
        };
        if v.iter().any(|w| !w[0].is_finite() || !w[1].is_finite()) {
            return Err(AirflowError::NonFiniteState { step });
        }
        let rate_of_change = v
            .iter()
            .zip(&state.v)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .fold(0.0, f64::max)
            / dt;
        Ok(WindStep {
            divergence_before: divergence_norm(self.mesh, &v_star),
            divergence_after: divergence_norm(self.mesh, &v),
            rate_of_change,
            wall_normal_speed: wall,
            state: WindState {
                t: state.t + dt,
                v,
                p,
            },
        })
    }

    /// Marches from calm air until `max‖Δv‖/Δt < steady_tol` or `max_steps`.
    pub fn run_to_steady(&self) -> Result<WindRun, AirflowError> {
        let mut state = WindState::calm(self.mesh.n_nodes());
        self.impose_boundary(&mut state.v);
        let mut run = WindRun {
            divergence: divergence_norm(self.mesh, &state.v),
            weak_divergence: weak_divergence_norm(self.mesh, &state.v, &self.fixed_pressure),
            state,
            steps: 0,
            converged: false,
            max_wall_normal_speed: 0.0,
        };
        if run.state.v.iter().all(|w| *w == [0.0, 0.0]) {
            run.converged = true;
            return Ok(run);
        }
        while run.steps < self.params.max_steps {
            let dt = self.stable_dt(&run.state.v);
            let s = self.step(&run.state, dt, run.steps)?;
            run.steps += 1;
            run.divergence = s.divergence_after;
            run.max_wall_normal_speed = run.max_wall_normal_speed.max(s.wall_normal_speed);
            run.state = s.state;
            if s.rate_of_change < self.params.steady_tol {
                run.converged = true;
                break;
            }
        }
        run.weak_divergence = weak_divergence_norm(self.mesh, &run.state.v, &self.fixed_pressure);
        Ok(run)
    }
}

pub fn write_wind_cache(path: &Path, run: &WindRun) -> Result<(), AirflowError> {
    let mut buf = Vec::with_capacity(40 + 16 * run.state.v.len());
    buf.extend_from_slice(&WIND_MAGIC);
    buf.extend_from_slice(&(run.state.v.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(run.steps as u64).to_le_bytes());
    buf.extend_from_slice(&(run.converged as u64).to_le_bytes());
    buf.extend_from_slice(&run.state.t.to_le_bytes());
    for w in &run.state.v {
        buf.extend_from_slice(&w[0].to_le_bytes());
        buf.extend_from_slice(&w[1].to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Converged wind stored by [`write_wind_cache`]; the pressure is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedWind {
    pub t: f64,
    pub v: Vec<[f64; 2]>,
    pub steps: usize,
    pub converged: bool,
}

pub fn read_wind_cache(path: &Path, n_nodes: usize) -> Result<CachedWind, AirflowError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| AirflowError::BadSnapshot(m.to_string());
    if bytes.len() < 40 || bytes[..8] != WIND_MAGIC {
        return Err(bad("missing header"));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().expect("8 bytes") };
    let n = u64::from_le_bytes(word(1)) as usize;
    if n != n_nodes {
        return Err(bad(&format!("{n} nodes, mesh has {n_nodes}")));
    }
    if bytes.len() != 40 + 16 * n {
        return Err(bad("truncated"));
    }
    let steps = u64::from_le_bytes(word(2)) as usize;
    let converged = u64::from_le_bytes(word(3)) == 1;
    let t = f64::from_le_bytes(word(4));
    let v = (0..n)
        .map(|i| {
            [
                f64::from_le_bytes(word(5 + 2 * i)),
                f64::from_le_bytes(word(6 + 2 * i)),
            ]
        })
        .collect();
    Ok(CachedWind {
        t,
        v,
        steps,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_meshes::{rectangle, unit_square};
    use crate::mesh::BoundaryTag::*;

    fn params(inlet: InletProfile) -> WindParams {
        WindParams {
            rho_a: 1.2e9,
            mu: 0.5,
            forchheimer: 0.0,
            steady_tol: 1e-4,
            max_steps: 20_000,
            cfl_safety: 0.4,
            incremental: true,
            inlet,
        }
    }

    fn channel(nx: usize, ny: usize) -> Mesh {
        rectangle((0.0, 0.0), (4.0, 1.0), nx, ny, [Inlet, Outlet, Wall, Wall])
    }

    #[test]
    fn calm_inlet_stays_calm() {
        let mesh = channel(8, 4);
        let n = mesh.n_nodes();
        let model = WindModel::new(&mesh, vec![1.0; n], vec![1e12; n], params(InletProfile::Constant([0.0; 2])));
        let run = model.run_to_steady().unwrap();
        assert!(run.converged && run.steps == 0);
        assert!(run.state.v.iter().all(|w| *w == [0.0, 0.0]));
    }

    #[test]
    fn outlet_backflow_is_damped() {
        let mesh = channel(8, 4);
        let n = mesh.n_nodes();
        let model = WindModel::new(&mesh, vec![1.0; n], vec![1e12; n], params(InletProfile::Constant([0.0; 2])));
        let v = vec![[-1.0, 0.0]; n];
        let vs = model.tentative_velocity(&v, 0.01);
        for (p, w) in mesh.nodes().iter().zip(&vs) {
            if (p[0] - 4.0).abs() < 1e-12 {
                assert!(w[0] > -1.0 + 1e-6, "{w:?}");
            } else if p[0] > 0.0 {
                assert!((w[0] + 1.0).abs() < 1e-9, "{w:?}");
            }
        }
    }

    #[test]
    fn uniform_channel_flow_is_steady() {
        let mesh = channel(8, 4);
        let n = mesh.n_nodes();
        let model = WindModel::new(&mesh, vec![1.0; n], vec![1e12; n], params(InletProfile::Constant([2.0, 0.0])));
        let v = vec![[2.0, 0.0]; n];
        let vs = model.tentative_velocity(&v, 0.01);
        for w in &vs {
            assert!((w[0] - 2.0).abs() < 1e-6 && w[1].abs() < 1e-12);
        }
    }

    #[test]
    fn darcy_single_step() {
        let mesh = unit_square(4);
        let n = mesh.n_nodes();
        let mut p = params(InletProfile::Constant([0.0; 2]));
        p.mu = 0.3;
        let model = WindModel::new(&mesh, vec![0.5; n], vec![0.2; n], p);
        // wall slip applies on the boundary; compare interior nodes only
        let v = vec![[1.0, 1.0]; n];
        let dt = 0.01;
        let vs = model.tentative_velocity(&v, dt);
        let factor = 1.0 - dt * 0.5 * 0.3 / 0.2;
        for i in 0..n {
            if model.mesh().wall_normals().iter().all(|(j, _)| *j != i) {
                assert!((vs[i][0] - factor).abs() < 1e-12 && (vs[i][1] - factor).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pressure_rhs_integrates_divergence() {
        let mesh = unit_square(6);
        let n = mesh.n_nodes();
        let model = WindModel::new(&mesh, vec![1.0; n], vec![1.0; n], params(InletProfile::Constant([0.0; 2])));
        let v: Vec<[f64; 2]> = mesh.nodes().iter().map(|p| [p[0], 0.0]).collect();
        let dt = 0.25;
        let total: f64 = model.pressure_rhs(&v, dt).iter().sum();
        assert!((total - 1.0 / dt).abs() < 1e-10);
    }

    #[test]
    fn pressure_scales_with_inverse_dt_and_correction_reduces_divergence() {
        let mesh = channel(16, 4);
        let n = mesh.n_nodes();
        let model = WindModel::new(&mesh, vec![1.0; n], vec![1e12; n], params(InletProfile::Constant([1.0, 0.0])));
        let v: Vec<[f64; 2]> = mesh
            .nodes()
            .iter()
            .map(|p| [1.0 + 0.3 * (p[0] * 2.0).sin(), 0.0])
            .collect();
        let mut vs = v.clone();
        model.impose_boundary(&mut vs);
        let p1 = model.pressure_poisson(&vs, 0.1, None).unwrap();
        let p2 = model.pressure_poisson(&vs, 0.2, None).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - 2.0 * b).abs() <= 1e-8 * a.abs().max(1e-6));
        }
        let (vc, _) = model.correct_velocity(&vs, &p1, 0.1);
        assert!(divergence_norm(&mesh, &vc) <= 0.5 * divergence_norm(&mesh, &vs));
    }

    #[test]
    fn cache_roundtrip() {
        let run = WindRun {
            state: WindState {
                t: 1.5,
                v: vec![[1.0, -2.0], [0.1, f64::MIN_POSITIVE]],
                p: vec![0.0; 2],
            },
            steps: 42,
            converged: true,
            divergence: 0.0,
            weak_divergence: 0.0,
            max_wall_normal_speed: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wind.bin");
        write_wind_cache(&path, &run).unwrap();
        let back = read_wind_cache(&path, 2).unwrap();
        assert_eq!(back.v, run.state.v);
        assert_eq!((back.steps, back.converged, back.t), (42, true, 1.5));
        assert!(matches!(read_wind_cache(&path, 3), Err(AirflowError::BadSnapshot(_))));
    }
}
