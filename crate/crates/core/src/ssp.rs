//! Three-stage, third-order strong-stability-preserving Runge-Kutta scheme in
//! Shu-Osher form: every stage is a convex combination of the step's initial
//! value and a forward-Euler update of the previous stage.

/// State that can be advanced by convex combinations of Euler steps.
pub trait Stageable: Clone {
    /// `self ← a·base + b·(self + dt·rate)`.
    fn combine(&mut self, a: f64, base: &Self, b: f64, dt: f64, rate: &Self);
}

/// Weights `(a, b)` of stage `k`: `y⁽ᵏ⁾ = a·yⁿ + b·(y⁽ᵏ⁻¹⁾ + Δt L(y⁽ᵏ⁻¹⁾))`.
pub const SSP_RK3: [(f64, f64); 3] = [(0.0, 1.0), (0.75, 0.25), (1.0 / 3.0, 2.0 / 3.0)];

/// Net weight of each stage's rate in the final update (1/6, 1/6, 2/3).
pub fn rate_weights() -> [f64; 3] {
    let mut w = [0.0; 3];
    // Rate k enters at stage k with weight b_k and is then damped by the b of
    // every later stage.
    for k in 0..3 {
        w[k] = SSP_RK3[k + 1..].iter().fold(SSP_RK3[k].1, |acc, s| acc * s.1);
    }
    w
}

/// Weight with which a correction applied after stage `k` (clamping) survives
/// into the final value.
pub fn post_stage_weights() -> [f64; 3] {
    let mut w = [0.0; 3];
    for k in 0..3 {
        w[k] = SSP_RK3[k + 1..].iter().fold(1.0, |acc, s| acc * s.1);
    }
    w
}

/// One SSP-RK3 step. `rate(y, k)` evaluates the right-hand side at the start of
/// stage `k`; `post(y, k)` runs after stage `k` is formed (limiting,
/// boundary projection).
pub fn ssp_rk3_step<S, E>(
    y0: &S,
    dt: f64,
    mut rate: impl FnMut(&S, usize) -> Result<S, E>,
    mut post: impl FnMut(&mut S, usize),
) -> Result<S, E>
where
    S: Stageable,
{
    let mut y = y0.clone();
    for (k, &(a, b)) in SSP_RK3.iter().enumerate() {
        let r = rate(&y, k)?;
        y.combine(a, y0, b, dt, &r);
        post(&mut y, k);
    }
    Ok(y)
}

impl Stageable for f64 {
    fn combine(&mut self, a: f64, base: &Self, b: f64, dt: f64, rate: &Self) {
        *self = a * base + b * (*self + dt * rate);
    }
}

/// A complex number as `[re, im]`, for the linear test equation with complex λ.
impl Stageable for [f64; 2] {
    fn combine(&mut self, a: f64, base: &Self, b: f64, dt: f64, rate: &Self) {
        for c in 0..2 {
            self[c] = a * base[c] + b * (self[c] + dt * rate[c]);
        }
    }
}

impl Stageable for Vec<f64> {
    fn combine(&mut self, a: f64, base: &Self, b: f64, dt: f64, rate: &Self) {
        for ((y, y0), r) in self.iter_mut().zip(base).zip(rate) {
            *y = a * y0 + b * (*y + dt * r);
        }
    }
}

fn cmul(x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    [x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0]]
}

/// Amplification factor of one step on `y' = λy` with `z = λΔt`, obtained by
/// running the scheme itself (`Δt = 1`, `y⁰ = 1`).
pub fn amplification(z: [f64; 2]) -> [f64; 2] {
    let r: Result<_, std::convert::Infallible> =
        ssp_rk3_step(&[1.0, 0.0], 1.0, |y, _| Ok(cmul(z, *y)), |_, _| {});
    match r {
        Ok(v) => v,
        Err(e) => match e {},
    }
}

/// `1 + z + z²/2 + z³/6`.
pub fn stability_polynomial(z: [f64; 2]) -> [f64; 2] {
    let z2 = cmul(z, z);
    let z3 = cmul(z2, z);
    [
        1.0 + z[0] + z2[0] / 2.0 + z3[0] / 6.0,
        z[1] + z2[1] / 2.0 + z3[1] / 6.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        let w = rate_weights();
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((w[2] - 2.0 / 3.0).abs() < 1e-15);
        let p = post_stage_weights();
        assert!((p[0] - 1.0 / 6.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15 && p[2] == 1.0);
    }

    #[test]
    fn third_order_on_decay() {
        let err = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut y = 1.0f64;
            for _ in 0..n {
                y = ssp_rk3_step(&y, dt, |v, _| Ok::<_, ()>(-v), |_, _| {}).unwrap();
            }
            (y - (-1.0f64).exp()).abs()
        };
        let order = (err(0.1) / err(0.05)).log2();
        assert!(order > 2.9, "observed order {order}");
    }

    #[test]
    fn matches_polynomial_on_real_axis() {
        for z in [-2.5, -1.0, -0.1, 0.0, 0.3] {
            let a = amplification([z, 0.0]);
            let p = stability_polynomial([z, 0.0]);
            assert!((a[0] - p[0]).abs() < 1e-14 && a[1] == 0.0);
        }
    }
}
