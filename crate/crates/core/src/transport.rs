//! Pollutant transport: backward Euler in time, P1 in space, stabilized by
//! streamline least squares on the stationary residual
//! `v·∇φ + εσφ − EC` (the second-order part vanishes on P1 elements and the
//! time derivative is left out of the residual).
//!
//! The inlet carries the Robin condition `εμ_φ∇φ·n − φ v·n = 0`; outlet and
//! walls are natural.

use crate::fem::{
    boundary_flux, convection, load_vector, mass, solve_with_guess, stiffness, SolveError,
    SolveOptions, SparseMatrix,
};
use crate::mesh::{BoundaryTag, Mesh};
use crate::scenario::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("transport.zeta2 = {0}: the isotropic stabilizer is not implemented, set it to 0")]
    Zeta2Unsupported(f64),
    #[error("linear solve failed at t = {t} h: {source}")]
    SolverFailure { t: f64, source: SolveError },
    #[error("concentration became non-finite at t = {t} h")]
    NonFiniteState { t: f64 },
    #[error("emission series: {0}")]
    EmissionSeries(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    /// Diffusivity [km²/h].
    pub mu_phi: f64,
    /// Deposition rate [1/h].
    pub sigma: f64,
    /// Step [h].
    pub dt: f64,
    pub reuse_matrix: bool,
    pub rel_tol: f64,
    /// Streamline stabilization on or off (`ζ₁ = 0`).
    pub stabilize: bool,
}

impl TransportParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, TransportError> {
        let t = &cfg.transport;
        if t.zeta2 != 0.0 {
            return Err(TransportError::Zeta2Unsupported(t.zeta2));
        }
        Ok(Self {
            mu_phi: t.mu_phi,
            sigma: t.sigma,
            dt: t.dt,
            reuse_matrix: t.reuse_matrix,
            rel_tol: t.rel_tol,
            stabilize: true,
        })
    }
}

/// `ζ₁|_K = min(h_K/(2‖v̄_K‖ + 10⁻¹²), h_K²/(12 ε̄_K μ_φ), Δt)`.
pub fn stabilization_parameter(h: f64, speed: f64, eps_bar: f64, mu_phi: f64, dt: f64) -> f64 {
    let advective = h / (2.0 * speed + 1e-12);
    let diffusive = if mu_phi > 0.0 {
        h * h / (12.0 * eps_bar * mu_phi)
    } else {
        f64::INFINITY
    };
    advective.min(diffusive).min(dt)
}

/// Step-independent parts of the GLS system.
#[derive(Debug, Clone)]
pub struct GlsOperator {
    /// `∫ ε λ_j λ_i`.
    pub mass: SparseMatrix,
    /// `C + R − B_in + σ M_ε + SL`.
    pub steady: SparseMatrix,
    /// `ζ_K A_K (v̄_K·∇λ_a)` per triangle and local vertex.
    streamline: Vec<[f64; 3]>,
    /// `ζ_K` per triangle.
    pub zeta: Vec<f64>,
}

impl GlsOperator {
    /// `dt` only caps `ζ₁`; pass `f64::INFINITY` for a stationary problem.
    pub fn assemble(mesh: &Mesh, v: &[[f64; 2]], eps: &[f64], params: &TransportParams, dt: f64) -> Self {
        let n = mesh.n_nodes();
        let m_eps = mass(mesh, eps);
        let mut steady = convection(mesh, v);
        let diff: Vec<f64> = eps.iter().map(|e| e * params.mu_phi).collect();
        steady.add_scaled(1.0, &stiffness(mesh, &diff));
        steady.add_scaled(-1.0, &boundary_flux(mesh, v, BoundaryTag::Inlet));
        steady.add_scaled(params.sigma, &m_eps);

        let mut streamline = vec![[0.0; 3]; mesh.n_triangles()];
        let mut zeta = vec![0.0; mesh.n_triangles()];
        if params.stabilize {
            for (t, tri) in mesh.triangles().iter().enumerate() {
                let vb = [
                    (v[tri[0]][0] + v[tri[1]][0] + v[tri[2]][0]) / 3.0,
                    (v[tri[0]][1] + v[tri[1]][1] + v[tri[2]][1]) / 3.0,
                ];
                let eb = (eps[tri[0]] + eps[tri[1]] + eps[tri[2]]) / 3.0;
                let z = stabilization_parameter(mesh.diameter(t), vb[0].hypot(vb[1]), eb, params.mu_phi, dt);
                zeta[t] = z;
                let g = mesh.gradients(t);
                let area = mesh.area(t);
                let vg = [0, 1, 2].map(|a| vb[0] * g[a][0] + vb[1] * g[a][1]);
                streamline[t] = vg.map(|x| z * area * x);
                for a in 0..3 {
                    for b in 0..3 {
                        // (v̄·∇λ_b + ε̄σλ_b) against ζ v̄·∇λ_a
                        let val = streamline[t][a] * (vg[b] + eb * params.sigma / 3.0);
                        steady.add_at(tri[a], tri[b], val);
                    }
                }
            }
        }
        debug_assert_eq!(steady.dim(), n);
        Self {
            mass: m_eps,
            steady,
            streamline,
            zeta,
        }
    }

    /// `(1/Δt) M_ε + steady`.
    pub fn system_matrix(&self, dt: f64) -> SparseMatrix {
        let mut a = self.steady.clone();
        a.add_scaled(1.0 / dt, &self.mass);
        a
    }

    /// `∫ EC λ_i + Σ_K ζ_K ∫_K EC (v̄·∇λ_i)`.
    pub fn source(&self, mesh: &Mesh, ec: &[f64]) -> Vec<f64> {
        let mut f = load_vector(mesh, ec);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let mean = (ec[tri[0]] + ec[tri[1]] + ec[tri[2]]) / 3.0;
            for a in 0..3 {
                f[tri[a]] += self.streamline[t][a] * mean;
            }
        }
        f
    }

    /// `(1/Δt) M_ε φⁿ + f + sl`.
    pub fn rhs(&self, mesh: &Mesh, dt: f64, phi_n: &[f64], ec_next: &[f64]) -> Vec<f64> {
        let mut b = self.source(mesh, ec_next);
        for (bi, mi) in b.iter_mut().zip(self.mass.matvec(phi_n)) {
            *bi += mi / dt;
        }
        b
    }
}

/// Matrix and right-hand side of one backward Euler step.
pub fn assemble_gls_step(
    mesh: &Mesh,
    v: &[[f64; 2]],
    eps: &[f64],
    params: &TransportParams,
    dt: f64,
    phi_n: &[f64],
    ec_next: &[f64],
) -> (SparseMatrix, Vec<f64>) {
    let op = GlsOperator::assemble(mesh, v, eps, params, dt);
    (op.system_matrix(dt), op.rhs(mesh, dt, phi_n, ec_next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportState {
    pub t: f64,
    /// [kg/km²]
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A φⁿ⁺¹ = b` by BiCGStab started from `φⁿ`.
pub fn step_transport(
    state: &TransportState,
    matrix: &SparseMatrix,
    rhs: &[f64],
    dt: f64,
    rel_tol: f64,
) -> Result<TransportState, TransportError> {
    let t = state.t + dt;
    let opts = SolveOptions::general().with_rel_tol(rel_tol);
    let sol = solve_with_guess(matrix, rhs, Some(&state.phi), &opts)
        .map_err(|source| TransportError::SolverFailure { t, source })?;
    if sol.x.iter().any(|x| !x.is_finite()) {
        return Err(TransportError::NonFiniteState { t });
    }
    Ok(TransportState {
        t,
        phi: sol.x,
        iterations: sol.iterations,
        residual: sol.residual,
    })
}

/// Emission concentration sampled in time, interpolated linearly between
/// samples and held constant outside them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSeries {
    times: Vec<f64>,
    fields: Vec<Vec<f64>>,
}

impl EmissionSeries {
    pub fn new(times: Vec<f64>, fields: Vec<Vec<f64>>) -> Result<Self, TransportError> {
        let bad = |m: &str| Err(TransportError::EmissionSeries(m.to_string()));
        if times.is_empty() || times.len() != fields.len() {
            return bad("needs one field per sample time and at least one sample");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("sample times must increase strictly");
        }
        if fields.iter().any(|f| f.len() != fields[0].len()) {
            return bad("fields differ in length");
        }
        Ok(Self { times, fields })
    }

    pub fn constant(field: Vec<f64>) -> Self {
        Self {
            times: vec![0.0],
            fields: vec![field],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.fields[0].clone();
        }
        if k == self.times.len() {
            return self.fields[k - 1].clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.fields[k - 1]
            .iter()
            .zip(&self.fields[k])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportRun {
    /// States at `t = 0`, every `output_every` and `t_end`.
    pub snapshots: Vec<TransportState>,
    pub steps: usize,
    pub assemblies: usize,
    /// `min φ / max φ` over all steps, 0 when `φ` never leaves zero.
    pub worst_undershoot: f64,
    pub max_iterations: usize,
}

/// Backward Euler march over `[0, t_end]`. Each output interval is split into
/// equal steps no longer than `params.dt`.
pub fn run_transport(
    mesh: &Mesh,
    wind: &[[f64; 2]],
    eps: &[f64],
    ec: &EmissionSeries,
    phi0: Vec<f64>,
    params: &TransportParams,
    t_end: f64,
    output_every: f64,
) -> Result<TransportRun, TransportError> {
    let mut state = TransportState {
        t: 0.0,
        phi: phi0,
        iterations: 0,
        residual: 0.0,
    };
    let mut run = TransportRun {
        snapshots: vec![state.clone()],
        steps: 0,
        assemblies: 0,
        worst_undershoot: 0.0,
        max_iterations: 0,
    };
    let mut cached: Option<(f64, GlsOperator, SparseMatrix)> = None;
    let mut k = 0usize;
    while state.t < t_end - 1e-12 {
        k += 1;
        let t_out = (k as f64 * output_every).min(t_end);
        let t_start = state.t;
        // full intervals share one step length so the matrix is reused
        let span = if (t_out - t_start - output_every).abs() <= 1e-9 * output_every {
            output_every
        } else {
            t_out - t_start
        };
        let n = (span / params.dt - 1e-9).ceil().max(1.0) as usize;
        let dt = span / n as f64;
        for s in 0..n {
            let reuse = params.reuse_matrix && cached.as_ref().is_some_and(|c| c.0 == dt);
            if !reuse {
                let op = GlsOperator::assemble(mesh, wind, eps, params, dt);
                let a = op.system_matrix(dt);
                cached = Some((dt, op, a));
                run.assemblies += 1;
            }
            let (_, op, a) = cached.as_ref().expect("assembled");
            let t_next = if s + 1 == n { t_out } else { t_start + (s + 1) as f64 * dt };
            let b = op.rhs(mesh, dt, &state.phi, &ec.at(t_next));
            let mut next = step_transport(&state, a, &b, dt, params.rel_tol)?;
            next.t = t_next;
            run.steps += 1;
            run.max_iterations = run.max_iterations.max(next.iterations);
            let hi = next.phi.iter().copied().fold(0.0, f64::max);
            let lo = next.phi.iter().copied().fold(0.0, f64::min);
            if hi > 0.0 {
                run.worst_undershoot = run.worst_undershoot.min(lo / hi);
            }
            state = next;
        }
        run.snapshots.push(state.clone());
    }
    Ok(run)
}
