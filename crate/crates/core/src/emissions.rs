//! From macroscopic traffic fields to per-vehicle emission rate and emission
//! concentration.

use crate::scenario::{EmissionCoefficients, ScenarioConfig, GAMMA1, GAMMA2};

/// Speed [m/s] below which the scalar acceleration is set to zero.
pub const U_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmissionError {
    #[error("no emission coefficients for species '{0}'")]
    MissingCoefficients(String),
}

/// Coefficient set of the configured species.
pub fn coefficients(cfg: &ScenarioConfig) -> Result<&EmissionCoefficients, EmissionError> {
    cfg.emissions
        .get(&cfg.transport.species)
        .ok_or_else(|| EmissionError::MissingCoefficients(cfg.transport.species.clone()))
}

/// `U = ‖u‖/γ₁` [m/s].
pub fn scalar_speed(u: &[[f64; 2]]) -> Vec<f64> {
    u.iter().map(|v| v[0].hypot(v[1]) / GAMMA1).collect()
}

/// Tangential acceleration [m/s²]: `γ₂ (a·u)/(U γ₁)` with `a` in km/h², `u` in
/// km/h and `U` in m/s, zero where `U < U_EPS`.
pub fn scalar_acceleration(a_vec: &[[f64; 2]], u: &[[f64; 2]], speed: &[f64]) -> Vec<f64> {
    a_vec
        .iter()
        .zip(u)
        .zip(speed)
        .map(|((a, v), &s)| {
            if s < U_EPS {
                0.0
            } else {
                GAMMA2 * (a[0] * v[0] + a[1] * v[1]) / (s * GAMMA1)
            }
        })
        .collect()
}

/// `max{f₁ + f₂U + f₃U² + f₄a + f₅a² + f₆Ua, 0}` [g/veh/s].
pub fn emission_rate(f: &[f64; 6], speed: f64, accel: f64) -> f64 {
    let poly = f[0] + speed * (f[1] + f[2] * speed + f[5] * accel) + accel * (f[3] + f[4] * accel);
    poly.max(0.0)
}

pub fn instantaneous_emission(speed: &[f64], accel: &[f64], coeffs: &EmissionCoefficients) -> Vec<f64> {
    speed
        .iter()
        .zip(accel)
        .map(|(&s, &a)| emission_rate(&coeffs.f, s, a))
        .collect()
}

/// `EC = γ₁ ρ E` [kg/km²/h].
pub fn emission_concentration(rho: &[f64], rate: &[f64]) -> Vec<f64> {
    rho.iter().zip(rate).map(|(r, e)| GAMMA1 * r * e).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionFields {
    pub speed: Vec<f64>,
    pub accel: Vec<f64>,
    pub rate: Vec<f64>,
    pub concentration: Vec<f64>,
}

impl EmissionFields {
    pub fn compute(
        rho: &[f64],
        u: &[[f64; 2]],
        a_vec: &[[f64; 2]],
        coeffs: &EmissionCoefficients,
    ) -> Self {
        let speed = scalar_speed(u);
        let accel = scalar_acceleration(a_vec, u, &speed);
        let rate = instantaneous_emission(&speed, &accel, coeffs);
        let concentration = emission_concentration(rho, &rate);
        Self {
            speed,
            accel,
            rate,
            concentration,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(f: &[f64; 6], u: f64, a: f64) -> f64 {
        let p = f[0] + f[1] * u + f[2] * u.powi(2) + f[3] * a + f[4] * a.powi(2) + f[5] * u * a;
        if p > 0.0 {
            p
        } else {
            0.0
        }
    }

    #[test]
    fn unit_conversions() {
        assert_eq!(scalar_speed(&[[3.6, 0.0], [0.0, 0.0], [45.0, 0.0]]), vec![1.0, 0.0, 12.5]);
        let a = 3.6 * 3.6 * 1e3;
        let u = [[20.0, 0.0]];
        let acc = scalar_acceleration(&[[a, 0.0]], &u, &scalar_speed(&u));
        assert!((acc[0] - 1.0).abs() < 1e-12);
        let perp = scalar_acceleration(&[[0.0, 5.0]], &u, &scalar_speed(&u));
        assert_eq!(perp, vec![0.0]);
        let rest = scalar_acceleration(&[[7.0, 7.0]], &[[0.0; 2]], &[0.0]);
        assert_eq!(rest, vec![0.0]);
    }

    #[test]
    fn concentration_scale() {
        assert_eq!(emission_concentration(&[1.0, 0.0], &[1.0, 5.0]), vec![3.6, 0.0]);
    }

    #[test]
    fn shipped_set_faster_emits_more() {
        let c = EmissionCoefficients::petrol_car_co2();
        assert!(emission_rate(&c.f, 12.5, 0.0) > emission_rate(&c.f, 0.0, 0.0));
        assert_eq!(emission_rate(&c.f, 0.0, 0.0), c.f[0].max(0.0));
        assert_eq!(emission_rate(&[0.0; 6], 3.0, 0.4), 0.0);
    }

    #[test]
    fn missing_species() {
        let mut cfg = ScenarioConfig::with_shipped_emissions();
        cfg.transport.species = "nox".into();
        assert_eq!(
            coefficients(&cfg),
            Err(EmissionError::MissingCoefficients("nox".into()))
        );
    }

    proptest! {
        #[test]
        fn grouped_matches_naive(
            f in prop::array::uniform6(-2.0f64..2.0),
            u in 0.0f64..40.0,
            a in -5.0f64..5.0,
        ) {
            let g = emission_rate(&f, u, a);
            let n = naive(&f, u, a);
            let scale = f.iter().map(|c| c.abs()).sum::<f64>() * (1.0 + u * u + a * a);
            prop_assert!((g - n).abs() <= 1e-12 * scale.max(1.0));
            prop_assert!(g >= 0.0);
        }

        #[test]
        fn rotation_invariant(
            ux in -40.0f64..40.0, uy in -40.0f64..40.0,
            ax in -500.0f64..500.0, ay in -500.0f64..500.0,
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let c = EmissionCoefficients::petrol_car_co2();
            let (s, co) = theta.sin_cos();
            let rot = |v: [f64; 2]| [co * v[0] - s * v[1], s * v[0] + co * v[1]];
            let e1 = EmissionFields::compute(&[10.0], &[[ux, uy]], &[[ax, ay]], &c);
            let e2 = EmissionFields::compute(&[10.0], &[rot([ux, uy])], &[rot([ax, ay])], &c);
            prop_assert!((e1.rate[0] - e2.rate[0]).abs() <= 1e-12 * e1.rate[0].abs().max(1.0));
        }

        #[test]
        fn concentration_linear_in_density(rho in 0.0f64..1e4, k in 0.0f64..10.0, e in 0.0f64..5.0) {
            let one = emission_concentration(&[rho], &[e])[0];
            let scaled = emission_concentration(&[k * rho], &[e])[0];
            prop_assert!((scaled - k * one).abs() <= 1e-12 * (k * one).max(1.0));
        }
    }
}
