//! Closed-form conduction solutions used to check the finite element
//! solver and to report how deep surface temperature waves penetrate.

use std::f64::consts::PI;

use thiserror::Error;

use crate::physics::SoilProperties;

/// Seconds in a day.
pub const DIURNAL_PERIOD: f64 = 86_400.0;
/// Seconds in a 365-day year.
pub const ANNUAL_PERIOD: f64 = 365.0 * DIURNAL_PERIOD;

/// Amplitude ratio below which fluctuations are treated as having ceased.
pub const DEFAULT_CESSATION_RATIO: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid half-space parameter {name} = {value}")]
pub struct OracleError {
    pub name: &'static str,
    pub value: f64,
}

/// Semi-infinite medium driven by a sinusoidal surface temperature
/// `T_mean + amplitude·sin(ω·t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicHalfspace {
    pub mean_temperature: f64,
    pub amplitude: f64,
    /// rad/s
    pub angular_frequency: f64,
    /// m²/s
    pub diffusivity: f64,
}

impl PeriodicHalfspace {
    pub fn new(
        mean_temperature: f64,
        amplitude: f64,
        angular_frequency: f64,
        diffusivity: f64,
    ) -> Result<Self, OracleError> {
        let bad = |name, value| OracleError { name, value };
        if !(angular_frequency > 0.0 && angular_frequency.is_finite()) {
            return Err(bad("omega", angular_frequency));
        }
        if !(diffusivity > 0.0 && diffusivity.is_finite()) {
            return Err(bad("alpha", diffusivity));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(bad("amplitude", amplitude));
        }
        if !mean_temperature.is_finite() {
            return Err(bad("T_mean", mean_temperature));
        }
        Ok(Self {
            mean_temperature,
            amplitude,
            angular_frequency,
            diffusivity,
        })
    }

    /// Surface wave of the given period in the given soil.
    pub fn for_soil(
        soil: &SoilProperties,
        period: f64,
        mean_temperature: f64,
        amplitude: f64,
    ) -> Result<Self, OracleError> {
        if !(period > 0.0) {
            return Err(OracleError {
                name: "period",
                value: period,
            });
        }
        Self::new(mean_temperature, amplitude, 2.0 * PI / period, soil.diffusivity())
    }

    /// `sqrt(2α/ω)`, the depth over which the amplitude falls by `e`.
    pub fn damping_depth(&self) -> f64 {
        (2.0 * self.diffusivity / self.angular_frequency).sqrt()
    }

    pub fn attenuation(&self, z: f64) -> f64 {
        (-z / self.damping_depth()).exp()
    }

    /// Depth where the amplitude ratio drops to `ratio` (0 < ratio ≤ 1).
    pub fn depth_for_ratio(&self, ratio: f64) -> Result<f64, OracleError> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(OracleError {
                name: "ratio",
                value: ratio,
            });
        }
        Ok(-self.damping_depth() * ratio.ln())
    }

    pub fn temperature(&self, z: f64, t: f64) -> f64 {
        let d = self.damping_depth();
        self.mean_temperature
            + self.amplitude * (-z / d).exp() * (self.angular_frequency * t - z / d).sin()
    }
}

pub fn damping_depth(problem: &PeriodicHalfspace) -> f64 {
    problem.damping_depth()
}

pub fn periodic_temperature(problem: &PeriodicHalfspace, z: f64, t: f64) -> f64 {
    problem.temperature(z, t)
}

/// Steady profile for a constant flux `q_top` entering the surface of a
/// slab of thickness `depth` held at `t_bottom` underneath.
pub fn steady_linear_profile(k: f64, q_top: f64, t_bottom: f64, depth: f64, z: f64) -> f64 {
    t_bottom + q_top / k * (depth - z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diurnal() -> PeriodicHalfspace {
        PeriodicHalfspace::for_soil(&SoilProperties::default(), DIURNAL_PERIOD, 288.0, 10.0).unwrap()
    }

    #[test]
    fn damping_depths() {
        let p = diurnal();
        // 50-digit reference: 0.244755572486477
        assert_relative_eq!(damping_depth(&p), 0.244755572486477, max_relative = 1e-12);
        let fast = PeriodicHalfspace { angular_frequency: 4.0 * p.angular_frequency, ..p };
        assert_relative_eq!(fast.damping_depth(), 0.5 * p.damping_depth(), max_relative = 1e-14);
        let annual = PeriodicHalfspace::for_soil(&SoilProperties::default(), ANNUAL_PERIOD, 288.0, 10.0).unwrap();
        assert_relative_eq!(annual.damping_depth(), 4.67604864667401, max_relative = 1e-12);
        assert_relative_eq!(annual.attenuation(2.5), 0.585880500880756, max_relative = 1e-12);
    }

    #[test]
    fn periodic_profile() {
        let p = diurnal();
        let t = 12_345.0;
        assert_relative_eq!(
            periodic_temperature(&p, 0.0, t),
            288.0 + 10.0 * (p.angular_frequency * t).sin(),
            max_relative = 1e-15
        );
        let d = p.damping_depth();
        assert_relative_eq!(p.attenuation(d), (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(p.attenuation(1.0), 0.0168112190495494, max_relative = 1e-12);
        assert!(p.attenuation(1.0) < DEFAULT_CESSATION_RATIO);
    }

    #[test]
    fn threshold_depths() {
        let p = diurnal();
        assert_relative_eq!(p.depth_for_ratio(0.02).unwrap(), 0.957489430273834, max_relative = 1e-12);
        assert_relative_eq!(
            p.depth_for_ratio((-1.0f64).exp()).unwrap(),
            p.damping_depth(),
            max_relative = 1e-14
        );
        assert!(p.depth_for_ratio(0.0).is_err());
        assert!(p.depth_for_ratio(1.5).is_err());
    }

    #[test]
    fn steady_profile() {
        assert_eq!(steady_linear_profile(2.2, 0.0, 290.0, 1.0, 0.3), 290.0);
        assert_relative_eq!(steady_linear_profile(2.2, 22.0, 290.0, 1.0, 0.0), 300.0, max_relative = 1e-15);
        let g = (steady_linear_profile(2.2, 22.0, 290.0, 1.0, 0.6) - steady_linear_profile(2.2, 22.0, 290.0, 1.0, 0.4)) / 0.2;
        assert_relative_eq!(g, -10.0, max_relative = 1e-12);
    }

    #[test]
    fn satisfies_heat_equation() {
        let soil = SoilProperties::default();
        let p = diurnal();
        let (dz, dt) = (1e-3, 1e-3);
        for i in 0..100 {
            let z = 0.01 + 0.9 * (i as f64 * 0.37).fract();
            let t = 86_400.0 * (i as f64 * 0.61).fract();
            let dtdt = (p.temperature(z, t + dt) - p.temperature(z, t - dt)) / (2.0 * dt);
            let d2 = (p.temperature(z + dz, t) - 2.0 * p.temperature(z, t) + p.temperature(z - dz, t)) / (dz * dz);
            let storage = soil.heat_capacity * dtdt;
            let conduction = soil.conductivity * d2;
            let scale = storage.abs().max(conduction.abs()).max(1e-12);
            assert!((storage - conduction).abs() / scale < 1e-3, "z={z} t={t}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PeriodicHalfspace::new(288.0, 1.0, 0.0, 1e-6).is_err());
        assert!(PeriodicHalfspace::new(288.0, 1.0, 1e-4, -1e-6).is_err());
        assert!(PeriodicHalfspace::new(288.0, -1.0, 1e-4, 1e-6).is_err());
    }
}
