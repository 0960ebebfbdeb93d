//! Lumped water and air tank balances.
//!
//! Temperatures are carried in °C. The inflow term uses Kelvin on both
//! sides, the leak term `κ·T` uses the Celsius temperature unless
//! `leak_in_kelvin` is set.

use thiserror::Error;

use crate::config::PlantConfig;
use crate::units::celsius_to_kelvin;

/// Water level below which the tank counts as empty, m.
pub const EMPTY_LEVEL_M: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TankError {
    #[error("water tank empty (level {level_m:.4} m)")]
    EmptyTank { level_m: f64 },
    #[error("air tank holds no mass ({mass_kg} kg)")]
    NoAirMass { mass_kg: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterTankInput {
    /// Inflow mass rate, kg/s.
    pub mdot_in: f64,
    /// Outflow mass rate, kg/s.
    pub mdot_out: f64,
    /// Inflow temperature, K.
    pub t_in_k: f64,
    /// Heater power, W.
    pub p_heat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirTankInput {
    pub mdot_in: f64,
    pub mdot_out: f64,
    pub t_in_k: f64,
    pub p_heat: f64,
}

fn leak(kappa: f64, t_c: f64, in_kelvin: bool) -> f64 {
    kappa * if in_kelvin { celsius_to_kelvin(t_c) } else { t_c }
}

/// dh/dt, m/s.
pub fn water_level_rhs(input: &WaterTankInput, cfg: &PlantConfig) -> f64 {
    (input.mdot_in - input.mdot_out) / (cfg.rho_w * cfg.s1_m2)
}

/// dT_w/dt, °C/s, with the water mass taken from the current level.
pub fn water_temp_rhs(h: f64, t_w: f64, input: &WaterTankInput, cfg: &PlantConfig) -> Result<f64, TankError> {
    if h <= 0.0 {
        return Err(TankError::EmptyTank { level_m: h });
    }
    let m_w = cfg.rho_w * cfg.s1_m2 * h;
    let inflow = input.mdot_in * cfg.ce * (input.t_in_k - celsius_to_kelvin(t_w));
    Ok((inflow + input.p_heat - leak(cfg.kappa_w, t_w, cfg.leak_in_kelvin)) / (m_w * cfg.ce))
}

/// dρ_a/dt, kg/(m³·s).
pub fn air_density_rhs(input: &AirTankInput, cfg: &PlantConfig) -> f64 {
    (input.mdot_in - input.mdot_out) / cfg.v_at_m3
}

/// dT_a/dt, °C/s.
pub fn air_temp_rhs(rho_a: f64, t_a: f64, input: &AirTankInput, cfg: &PlantConfig) -> Result<f64, TankError> {
    let m_a = rho_a * cfg.v_at_m3;
    if m_a <= 0.0 {
        return Err(TankError::NoAirMass { mass_kg: m_a });
    }
    let inflow = input.mdot_in * cfg.cp * (input.t_in_k - celsius_to_kelvin(t_a));
    Ok((inflow + input.p_heat - leak(cfg.kappa_a, t_a, cfg.leak_in_kelvin)) / (m_a * cfg.cp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn water(mdot_in: f64, mdot_out: f64, t_in_k: f64, p_heat: f64) -> WaterTankInput {
        WaterTankInput { mdot_in, mdot_out, t_in_k, p_heat }
    }

    fn air(mdot_in: f64, mdot_out: f64, t_in_k: f64, p_heat: f64) -> AirTankInput {
        AirTankInput { mdot_in, mdot_out, t_in_k, p_heat }
    }

    #[test]
    fn level_balance() {
        let cfg = PlantConfig::default();
        assert_eq!(water_level_rhs(&water(0.02, 0.02, 300.0, 0.0), &cfg), 0.0);
        let cfg = PlantConfig { s1_m2: 0.12566, ..Default::default() };
        // −0.025 / (1000 · 0.12566)
        assert_relative_eq!(water_level_rhs(&water(0.0, 0.025, 300.0, 0.0), &cfg), -1.9894e-4, max_relative = 1e-4);
    }

    #[test]
    fn heating_rate() {
        // m_w = 100 kg: S1·h = 0.1 m³.
        let cfg = PlantConfig { s1_m2: 0.1, ..Default::default() };
        let r = water_temp_rhs(1.0, 50.0, &water(0.0, 0.0, 300.0, 2300.0), &cfg).unwrap();
        assert_relative_eq!(r, 2300.0 / (100.0 * 4186.0), max_relative = 1e-12);
        assert_relative_eq!(r, 5.4945e-3, max_relative = 1e-4);
    }

    #[test]
    fn water_equilibria() {
        let cfg = PlantConfig { kappa_w: 3.0, ..Default::default() };
        let t_w = 70.0;
        assert_eq!(water_temp_rhs(0.5, t_w, &water(0.0, 0.01, 300.0, 3.0 * t_w), &cfg).unwrap(), 0.0);
        let cfg = PlantConfig::default();
        let r = water_temp_rhs(0.5, t_w, &water(0.05, 0.0, celsius_to_kelvin(t_w), 0.0), &cfg).unwrap();
        assert_eq!(r, 0.0);
        let cfg = PlantConfig { kappa_w: 3.0, leak_in_kelvin: true, ..Default::default() };
        let r = water_temp_rhs(0.5, t_w, &water(0.0, 0.0, 0.0, 3.0 * celsius_to_kelvin(t_w)), &cfg).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn empty_tank_is_an_error() {
        let cfg = PlantConfig::default();
        assert!(matches!(water_temp_rhs(0.0, 20.0, &water(0.0, 0.0, 300.0, 0.0), &cfg), Err(TankError::EmptyTank { .. })));
        assert!(matches!(air_temp_rhs(0.0, 20.0, &air(0.0, 0.0, 300.0, 0.0), &cfg), Err(TankError::NoAirMass { .. })));
    }

    #[test]
    fn air_density_examples() {
        let cfg = PlantConfig { v_at_m3: 0.5, ..Default::default() };
        assert_eq!(air_density_rhs(&air(0.01, 0.01, 300.0, 0.0), &cfg), 0.0);
        assert_relative_eq!(air_density_rhs(&air(0.01, 0.0, 300.0, 0.0), &cfg), 0.02, max_relative = 1e-14);
        assert_eq!(
            air_density_rhs(&air(0.0, 0.01, 300.0, 0.0), &cfg),
            -air_density_rhs(&air(0.01, 0.0, 300.0, 0.0), &cfg)
        );
    }

    #[test]
    fn air_heating_rate() {
        // m_a = 0.6 kg
        let cfg = PlantConfig { v_at_m3: 0.1, ..Default::default() };
        let r = air_temp_rhs(6.0, 20.0, &air(0.0, 0.0, 300.0, 1000.0), &cfg).unwrap();
        assert_relative_eq!(r, 1.6584, max_relative = 1e-4);
        let cfg = PlantConfig { kappa_a: 2.0, ..Default::default() };
        assert_eq!(air_temp_rhs(6.0, 20.0, &air(0.0, 0.1, 300.0, 40.0), &cfg).unwrap(), 0.0);
        assert_eq!(air_temp_rhs(6.0, 20.0, &air(0.3, 0.1, celsius_to_kelvin(20.0), 0.0), &PlantConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn euler_mass_balance_is_exact() {
        let cfg = PlantConfig::default();
        let input = water(0.011, 0.037, 300.0, 0.0);
        let dt = 1.0;
        let (h0, n) = (0.8, 600);
        let mut h = h0;
        for _ in 0..n {
            h += dt * water_level_rhs(&input, &cfg);
        }
        let closed = h0 + n as f64 * dt * (input.mdot_in - input.mdot_out) / (cfg.rho_w * cfg.s1_m2);
        assert!((h - closed).abs() <= 1e-12 * h0, "{h} vs {closed}");
    }

    #[test]
    fn temperature_fixed_point_of_discrete_update() {
        let cfg = PlantConfig { kappa_w: 4.0, kappa_a: 1.5, ..Default::default() };
        let (mut t_w, mut t_a) = (70.4, 70.7);
        for _ in 0..1000 {
            t_w += water_temp_rhs(0.7, t_w, &water(0.0, 0.02, 0.0, 4.0 * 70.4), &cfg).unwrap();
            t_a += air_temp_rhs(6.8, t_a, &air(0.0, 0.01, 0.0, 1.5 * 70.7), &cfg).unwrap();
        }
        assert_eq!(t_w, 70.4);
        assert_eq!(t_a, 70.7);
    }

    #[test]
    fn finite_difference_recovers_rhs() {
        // Closed-form trajectory of the linear level equation, differentiated
        // numerically at Δt = 1e-3 s.
        let cfg = PlantConfig::default();
        let input = water(0.004, 0.019, 300.0, 0.0);
        let rate = water_level_rhs(&input, &cfg);
        let h = |t: f64| 0.8 + rate * t;
        let dt = 1e-3;
        let fd = (h(5.0 + dt) - h(5.0 - dt)) / (2.0 * dt);
        assert!((fd - rate).abs() <= 1e-6 * rate.abs());
        // Heating with no flows: m_w fixed, so T_w is linear in time too.
        let heat = water(0.0, 0.0, 300.0, 1500.0);
        let slope = water_temp_rhs(0.8, 60.0, &heat, &cfg).unwrap();
        let t = |s: f64| 60.0 + slope * s;
        let fd = (t(2.0 + dt) - t(2.0 - dt)) / (2.0 * dt);
        assert!((fd - slope).abs() <= 1e-6 * slope.abs());
    }

    proptest! {
        #[test]
        fn rhs_superposition(
            a in 0.0f64..0.05, b in 0.0f64..0.05, c in 0.0f64..0.05, d in 0.0f64..0.05,
            p1 in 0.0f64..2300.0, p2 in 0.0f64..2300.0, t_in in 280.0f64..360.0,
        ) {
            // Each RHS is affine in (ṁ_in, ṁ_out, P) at fixed state: the
            // response to a sum of inputs equals the sum of responses minus
            // the zero-input response.
            let cfg = PlantConfig { kappa_w: 2.0, kappa_a: 1.0, ..Default::default() };
            let tol = |x: f64| 1e-9 * (1.0 + x.abs());
            let wz = water(0.0, 0.0, t_in, 0.0);
            let w1 = water(a, b, t_in, p1);
            let w2 = water(c, d, t_in, p2);
            let ws = water(a + c, b + d, t_in, p1 + p2);
            let f = |i: &WaterTankInput| water_temp_rhs(0.6, 65.0, i, &cfg).unwrap();
            let lhs = f(&ws);
            let rhs = f(&w1) + f(&w2) - f(&wz);
            prop_assert!((lhs - rhs).abs() <= tol(lhs));
            let g = |i: &WaterTankInput| water_level_rhs(i, &cfg);
            prop_assert!((g(&ws) - (g(&w1) + g(&w2) - g(&wz))).abs() <= tol(g(&ws)));

            let az = air(0.0, 0.0, t_in, 0.0);
            let a1 = air(a, b, t_in, p1);
            let a2 = air(c, d, t_in, p2);
            let as_ = air(a + c, b + d, t_in, p1 + p2);
            let f = |i: &AirTankInput| air_temp_rhs(6.5, 70.0, i, &cfg).unwrap();
            prop_assert!((f(&as_) - (f(&a1) + f(&a2) - f(&az))).abs() <= tol(f(&as_)));
            let g = |i: &AirTankInput| air_density_rhs(i, &cfg);
            prop_assert!((g(&as_) - (g(&a1) + g(&a2) - g(&az))).abs() <= tol(g(&as_)));
        }

        #[test]
        fn doubling_net_flow_doubles_level_rate(a in 0.0f64..0.05, b in 0.0f64..0.05) {
            let cfg = PlantConfig::default();
            let one = water_level_rhs(&water(a, b, 300.0, 0.0), &cfg);
            let two = water_level_rhs(&water(2.0 * a, 2.0 * b, 300.0, 0.0), &cfg);
            prop_assert!((two - 2.0 * one).abs() <= 1e-15 * (1.0 + one.abs()));
        }
    }
}
