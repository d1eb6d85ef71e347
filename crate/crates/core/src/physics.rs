//! Surface energy exchange between soil, plastic film and atmosphere.
//!
//! The film is treated as a thin, non-storing layer above a flat soil
//! surface. Shortwave and longwave inter-reflections between the two are
//! summed as geometric series, which produces the rational coefficients in
//! [`shortwave_soil_gain`], [`longwave_soil_exchange`] and [`MulchBalance`].
//!
//! Every flux is positive into the surface named by the function.

use thiserror::Error;

/// Stefan-Boltzmann constant, W/(m²·K⁴).
pub const STEFAN_BOLTZMANN: f64 = 5.67e-8;

/// Film-to-soil convective coefficient measured under single-skin plastic, W/(m²·K).
pub const INNER_FILM_COEFFICIENT: f64 = 7.2;

/// Swinbank correlation coefficient, K⁻².
const SWINBANK_COEFFICIENT: f64 = 9.2e-6;

/// Lower and upper limits of the physical bracket for the film temperature, K.
pub const MULCH_BRACKET: (f64, f64) = (150.0, 450.0);

const SINGULAR_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("{name} = {value} is outside its admissible range ({range})")]
    Domain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("singular reflection geometry: {0}")]
    SingularGeometry(String),
    #[error("film balance has no root on [{lo} K, {hi} K] (residuals {r_lo:.6} and {r_hi:.6} W/m²)")]
    NoBracket { lo: f64, hi: f64, r_lo: f64, r_hi: f64 },
    #[error("film temperature did not converge: last iterate {last} K, residual {residual} W/m²")]
    NoConvergence { last: f64, residual: f64 },
}

fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    range: &'static str,
) -> Result<(), PhysicsError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(PhysicsError::Domain { name, value, range })
    }
}

fn check_temperature(name: &'static str, value: f64) -> Result<(), PhysicsError> {
    check_range(name, value, value > 0.0, "> 0 K")
}

/// Optical properties of the plastic film.
///
/// Shortwave values refer to the solar band, longwave values to the thermal
/// infrared band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MulchOptics {
    pub solar_transmittance: f64,
    pub solar_reflectance: f64,
    pub ir_transmittance: f64,
    pub ir_reflectance: f64,
    pub emissivity: f64,
}

impl MulchOptics {
    /// Builds a film whose emissivity equals its longwave absorptance
    /// (Kirchhoff's law), `max(0, 1 − τ_l − ρ_l)`.
    pub fn new(tau_s: f64, rho_s: f64, tau_l: f64, rho_l: f64) -> Result<Self, PhysicsError> {
        let emissivity = (1.0 - tau_l - rho_l).max(0.0);
        Self::with_emissivity(tau_s, rho_s, tau_l, rho_l, emissivity)
    }

    pub fn with_emissivity(
        tau_s: f64,
        rho_s: f64,
        tau_l: f64,
        rho_l: f64,
        emissivity: f64,
    ) -> Result<Self, PhysicsError> {
        for (name, v) in [
            ("tau_s", tau_s),
            ("rho_s", rho_s),
            ("tau_l", tau_l),
            ("rho_l", rho_l),
            ("eps_m", emissivity),
        ] {
            check_range(name, v, (0.0..=1.0).contains(&v), "[0, 1]")?;
        }
        let sw = tau_s + rho_s;
        check_range("tau_s + rho_s", sw, sw <= 1.0 + 1e-12, "<= 1")?;
        let lw = tau_l + rho_l;
        check_range("tau_l + rho_l", lw, lw <= 1.0 + 1e-12, "<= 1")?;
        Ok(Self {
            solar_transmittance: tau_s,
            solar_reflectance: rho_s,
            ir_transmittance: tau_l,
            ir_reflectance: rho_l,
            emissivity,
        })
    }

    /// Measured low density polyethylene film.
    pub fn ldpe() -> Self {
        Self::new(0.733, 0.265, 0.6, 0.398).expect("LDPE optics are admissible")
    }
}

/// Thermal and radiative properties of the soil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoilProperties {
    /// W/(m·K)
    pub conductivity: f64,
    /// Volumetric heat capacity ρc_p, J/(m³·K).
    pub heat_capacity: f64,
    pub emissivity: f64,
    pub albedo: f64,
}

impl SoilProperties {
    pub fn new(
        conductivity: f64,
        heat_capacity: f64,
        emissivity: f64,
        albedo: f64,
    ) -> Result<Self, PhysicsError> {
        check_range("k", conductivity, conductivity > 0.0, "> 0")?;
        check_range("rho_cp", heat_capacity, heat_capacity > 0.0, "> 0")?;
        check_range(
            "eps_s",
            emissivity,
            emissivity > 0.0 && emissivity <= 1.0,
            "(0, 1]",
        )?;
        check_range("a_s", albedo, (0.0..1.0).contains(&albedo), "[0, 1)")?;
        Ok(Self {
            conductivity,
            heat_capacity,
            emissivity,
            albedo,
        })
    }

    /// Thermal diffusivity k/ρc_p, m²/s.
    pub fn diffusivity(&self) -> f64 {
        self.conductivity / self.heat_capacity
    }
}

impl Default for SoilProperties {
    /// Field-measured conductivity and heat capacity with typical bare-soil
    /// emissivity 0.95 and albedo 0.25.
    fn default() -> Self {
        Self {
            conductivity: 2.2,
            heat_capacity: 1.01e6,
            emissivity: 0.95,
            albedo: 0.25,
        }
    }
}

/// Convective coefficients on both sides of the film.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvectionModel {
    /// Soil-to-film coefficient, W/(m²·K).
    pub inner: f64,
    /// Film-to-air coefficient at zero wind, W/(m²·K).
    pub outer_intercept: f64,
    /// Wind sensitivity of the film-to-air coefficient, W·s/(m³·K).
    pub outer_slope: f64,
}

impl ConvectionModel {
    pub fn new(inner: f64, outer_intercept: f64, outer_slope: f64) -> Result<Self, PhysicsError> {
        check_range("h_i", inner, inner >= 0.0, ">= 0")?;
        check_range("h_o_intercept", outer_intercept, outer_intercept >= 0.0, ">= 0")?;
        check_range("h_o_slope", outer_slope, outer_slope >= 0.0, ">= 0")?;
        Ok(Self {
            inner,
            outer_intercept,
            outer_slope,
        })
    }
}

impl Default for ConvectionModel {
    fn default() -> Self {
        Self {
            inner: INNER_FILM_COEFFICIENT,
            outer_intercept: 7.2,
            outer_slope: 3.8,
        }
    }
}

/// Meteorological forcing at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEnvironment {
    /// Incident shortwave, W/m².
    pub solar: f64,
    /// Air temperature, K.
    pub air_temperature: f64,
    /// Wind speed, m/s.
    pub wind_speed: f64,
}

impl BoundaryEnvironment {
    pub fn new(solar: f64, air_temperature: f64, wind_speed: f64) -> Result<Self, PhysicsError> {
        check_range("R_s", solar, solar >= 0.0, ">= 0")?;
        check_temperature("T_a", air_temperature)?;
        check_range("v", wind_speed, wind_speed >= 0.0, ">= 0")?;
        Ok(Self {
            solar,
            air_temperature,
            wind_speed,
        })
    }
}

/// Swinbank clear-sky emissivity, clamped to 1.
pub fn sky_emissivity(air_temperature: f64) -> Result<f64, PhysicsError> {
    check_temperature("T_a", air_temperature)?;
    Ok((SWINBANK_COEFFICIENT * air_temperature * air_temperature).min(1.0))
}

/// Film-to-air convective coefficient `h_o = a + b·v`.
pub fn h_external(wind_speed: f64, model: &ConvectionModel) -> Result<f64, PhysicsError> {
    check_range("v", wind_speed, wind_speed >= 0.0, ">= 0")?;
    Ok(model.outer_intercept + model.outer_slope * wind_speed)
}

fn shortwave_denominator(optics: &MulchOptics, soil: &SoilProperties) -> Result<f64, PhysicsError> {
    let d = 1.0 - optics.solar_reflectance * soil.albedo;
    if d < SINGULAR_EPS {
        return Err(PhysicsError::SingularGeometry(format!(
            "rho_s * a_s = {} leaves no shortwave escape",
            optics.solar_reflectance * soil.albedo
        )));
    }
    Ok(d)
}

fn longwave_denominator(optics: &MulchOptics, soil: &SoilProperties) -> Result<f64, PhysicsError> {
    let rho_l = optics.ir_reflectance;
    let d = 1.0 - rho_l + rho_l * soil.emissivity;
    if d < SINGULAR_EPS {
        return Err(PhysicsError::SingularGeometry(format!(
            "1 - rho_l + rho_l * eps_s = {d} leaves no longwave escape"
        )));
    }
    Ok(d)
}

/// Shortwave absorbed by the soil after multiple film/soil reflections.
pub fn shortwave_soil_gain(
    optics: &MulchOptics,
    soil: &SoilProperties,
    solar: f64,
) -> Result<f64, PhysicsError> {
    let d = shortwave_denominator(optics, soil)?;
    Ok(optics.solar_transmittance * (1.0 - soil.albedo) / d * solar)
}

/// Net longwave into the soil surface for a given sky emissivity.
pub fn longwave_soil_exchange_with_sky(
    optics: &MulchOptics,
    soil: &SoilProperties,
    sky_emissivity: f64,
    air_temperature: f64,
    mulch_temperature: f64,
    soil_temperature: f64,
) -> Result<f64, PhysicsError> {
    check_temperature("T_a", air_temperature)?;
    check_temperature("T_m", mulch_temperature)?;
    check_temperature("T", soil_temperature)?;
    let d = longwave_denominator(optics, soil)?;
    let bracket = optics.ir_transmittance * sky_emissivity * air_temperature.powi(4)
        + optics.emissivity * mulch_temperature.powi(4)
        - (1.0 - optics.ir_reflectance) * soil_temperature.powi(4);
    Ok(soil.emissivity * STEFAN_BOLTZMANN / d * bracket)
}

/// Net longwave into the soil surface under the Swinbank sky.
pub fn longwave_soil_exchange(
    optics: &MulchOptics,
    soil: &SoilProperties,
    air_temperature: f64,
    mulch_temperature: f64,
    soil_temperature: f64,
) -> Result<f64, PhysicsError> {
    let sky = sky_emissivity(air_temperature)?;
    longwave_soil_exchange_with_sky(
        optics,
        soil,
        sky,
        air_temperature,
        mulch_temperature,
        soil_temperature,
    )
}

/// Net heat flux conducted into the soil at the surface: film convection,
/// transmitted shortwave and net longwave.
pub fn surface_flux(
    optics: &MulchOptics,
    soil: &SoilProperties,
    conv: &ConvectionModel,
    env: &BoundaryEnvironment,
    mulch_temperature: f64,
    surface_temperature: f64,
) -> Result<f64, PhysicsError> {
    let convective = conv.inner * (mulch_temperature - surface_temperature);
    let shortwave = shortwave_soil_gain(optics, soil, env.solar)?;
    let longwave = longwave_soil_exchange(
        optics,
        soil,
        env.air_temperature,
        mulch_temperature,
        surface_temperature,
    )?;
    Ok(convective + shortwave + longwave)
}

/// Energy balance of the non-storing film with its radiative coefficients
/// precomputed for one optics/soil pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MulchBalance {
    inner: f64,
    conv: ConvectionModel,
    /// Fraction of incident shortwave absorbed by the film.
    pub shortwave_absorption: f64,
    /// Fraction of sky longwave absorbed by the film.
    pub sky_absorption: f64,
    /// Multiplier on ε_m σ T_m⁴ (film emission, both faces).
    pub emission_factor: f64,
    /// Multiplier on ε_s σ T⁴ (soil emission absorbed by the film).
    pub soil_absorption: f64,
    emissivity: f64,
    soil_emissivity: f64,
}

impl MulchBalance {
    /// Fails when a denominator is singular or when the film emission factor
    /// is not positive, which would break monotonicity of the balance in T_m.
    pub fn new(
        optics: &MulchOptics,
        soil: &SoilProperties,
        conv: &ConvectionModel,
    ) -> Result<Self, PhysicsError> {
        let ds = shortwave_denominator(optics, soil)?;
        let dl = longwave_denominator(optics, soil)?;
        let (tau_s, rho_s) = (optics.solar_transmittance, optics.solar_reflectance);
        let (tau_l, rho_l) = (optics.ir_transmittance, optics.ir_reflectance);
        let (a_s, eps_s) = (soil.albedo, soil.emissivity);

        let shortwave_absorption = 1.0 - rho_s - tau_s * (1.0 - a_s + tau_s * a_s) / ds;
        let sky_absorption = 1.0 - rho_l - tau_l * (tau_l + eps_s * (1.0 - tau_l)) / dl;
        let emission_factor = 2.0 - (1.0 - eps_s) * (1.0 - tau_l - rho_l) / dl;
        let soil_absorption = 1.0 - (tau_l + rho_l) / dl;

        if emission_factor <= 0.0 {
            return Err(PhysicsError::SingularGeometry(format!(
                "film emission factor {emission_factor} is not positive"
            )));
        }
        Ok(Self {
            inner: conv.inner,
            conv: *conv,
            shortwave_absorption,
            sky_absorption,
            emission_factor,
            soil_absorption,
            emissivity: optics.emissivity,
            soil_emissivity: eps_s,
        })
    }

    /// Terms of the balance that do not depend on the film temperature:
    /// `(h_i + h_o, h_i·T + h_o·T_a + absorbed shortwave + absorbed sky + absorbed soil)`.
    fn fixed_terms(
        &self,
        env: &BoundaryEnvironment,
        surface_temperature: f64,
    ) -> Result<(f64, f64), PhysicsError> {
        check_temperature("T", surface_temperature)?;
        let h_o = h_external(env.wind_speed, &self.conv)?;
        let sky = sky_emissivity(env.air_temperature)?;
        let ta4 = env.air_temperature.powi(4);
        let gain = self.inner * surface_temperature
            + h_o * env.air_temperature
            + self.shortwave_absorption * env.solar
            + self.sky_absorption * sky * STEFAN_BOLTZMANN * ta4
            + self.soil_absorption
                * self.soil_emissivity
                * STEFAN_BOLTZMANN
                * surface_temperature.powi(4);
        Ok((self.inner + h_o, gain))
    }

    fn emission(&self, mulch_temperature: f64) -> f64 {
        self.emission_factor * self.emissivity * STEFAN_BOLTZMANN * mulch_temperature.powi(4)
    }

    /// Net heat gained by the film; zero when `mulch_temperature` balances.
    pub fn residual(
        &self,
        env: &BoundaryEnvironment,
        surface_temperature: f64,
        mulch_temperature: f64,
    ) -> Result<f64, PhysicsError> {
        check_temperature("T_m", mulch_temperature)?;
        let h_o = h_external(env.wind_speed, &self.conv)?;
        let sky = sky_emissivity(env.air_temperature)?;
        let sigma = STEFAN_BOLTZMANN;
        Ok(self.inner * (surface_temperature - mulch_temperature)
            + h_o * (env.air_temperature - mulch_temperature)
            + self.shortwave_absorption * env.solar
            + self.sky_absorption * sky * sigma * env.air_temperature.powi(4)
            - self.emission(mulch_temperature)
            + self.soil_absorption * self.soil_emissivity * sigma * surface_temperature.powi(4))
    }

    /// Film temperature that zeroes the balance.
    ///
    /// Lagged fixed point on the T_m⁴ term, falling back to bracketed
    /// Newton/bisection on [`MULCH_BRACKET`] if an iterate leaves the
    /// bracket or the iteration stalls. The accepted value gets one Newton
    /// correction.
    pub fn solve(
        &self,
        env: &BoundaryEnvironment,
        surface_temperature: f64,
        guess: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<f64, PhysicsError> {
        let (lo, hi) = MULCH_BRACKET;
        let r_lo = self.residual(env, surface_temperature, lo)?;
        let r_hi = self.residual(env, surface_temperature, hi)?;
        if !(r_lo > 0.0 && r_hi < 0.0) {
            return Err(PhysicsError::NoBracket { lo, hi, r_lo, r_hi });
        }
        let (h_sum, gain) = self.fixed_terms(env, surface_temperature)?;

        let mut tm = if guess.is_finite() && guess > lo && guess < hi {
            guess
        } else {
            0.5 * (lo + hi)
        };
        for _ in 0..max_iter {
            let next = (gain - self.emission(tm)) / h_sum;
            if !(next > lo && next < hi) {
                break;
            }
            let delta = (next - tm).abs();
            tm = next;
            if delta < tol && self.residual(env, surface_temperature, tm)?.abs() < RESIDUAL_TOL {
                return self.polish(env, surface_temperature, h_sum, tm);
            }
        }
        self.bracketed_newton(env, surface_temperature, h_sum, tol)
    }

    /// Derivative of the residual with respect to the film temperature.
    fn slope(&self, h_sum: f64, mulch_temperature: f64) -> f64 {
        -h_sum
            - 4.0
                * self.emission_factor
                * self.emissivity
                * STEFAN_BOLTZMANN
                * mulch_temperature.powi(3)
    }

    /// One Newton correction, kept only if it lowers the residual.
    fn polish(
        &self,
        env: &BoundaryEnvironment,
        surface_temperature: f64,
        h_sum: f64,
        tm: f64,
    ) -> Result<f64, PhysicsError> {
        let r = self.residual(env, surface_temperature, tm)?;
        let next = tm - r / self.slope(h_sum, tm);
        let r_next = self.residual(env, surface_temperature, next)?;
        Ok(if r_next.abs() < r.abs() { next } else { tm })
    }

    /// Newton iteration safeguarded by bisection on [`MULCH_BRACKET`].
    fn bracketed_newton(
        &self,
        env: &BoundaryEnvironment,
        surface_temperature: f64,
        h_sum: f64,
        tol: f64,
    ) -> Result<f64, PhysicsError> {
        let (mut lo, mut hi) = MULCH_BRACKET;
        let mut tm = 0.5 * (lo + hi);
        let mut r = self.residual(env, surface_temperature, tm)?;
        for _ in 0..200 {
            if r > 0.0 {
                lo = tm;
            } else {
                hi = tm;
            }
            let newton = tm - r / self.slope(h_sum, tm);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let delta = (next - tm).abs();
            tm = next;
            r = self.residual(env, surface_temperature, tm)?;
            if (delta < tol || hi - lo < tol) && r.abs() < RESIDUAL_TOL {
                return self.polish(env, surface_temperature, h_sum, tm);
            }
        }
        Err(PhysicsError::NoConvergence {
            last: tm,
            residual: r,
        })
    }
}

/// Film balance residual tolerance, W/m².
pub const RESIDUAL_TOL: f64 = 1e-3;

/// Iterate tolerance for the film temperature, K.
pub const MULCH_TOL: f64 = 1e-6;

/// Iteration cap for the film fixed point.
pub const MULCH_MAX_ITER: usize = 100;

/// Residual of the film energy balance, W/m².
pub fn mulch_balance_residual(
    optics: &MulchOptics,
    soil: &SoilProperties,
    conv: &ConvectionModel,
    env: &BoundaryEnvironment,
    surface_temperature: f64,
    mulch_temperature: f64,
) -> Result<f64, PhysicsError> {
    MulchBalance::new(optics, soil, conv)?.residual(env, surface_temperature, mulch_temperature)
}

pub fn solve_mulch_temperature(
    optics: &MulchOptics,
    soil: &SoilProperties,
    conv: &ConvectionModel,
    env: &BoundaryEnvironment,
    surface_temperature: f64,
    guess: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, PhysicsError> {
    MulchBalance::new(optics, soil, conv)?.solve(env, surface_temperature, guess, tol, max_iter)
}
