//! Transient soil temperature under an agricultural plastic film.
//!
//! The soil column is discretized with quadratic finite elements and
//! advanced implicitly in time. The surface receives convective,
//! shortwave and longwave exchange through the film, whose own temperature
//! follows from a steady energy balance. A design-of-experiments driver
//! screens film optical properties for maximum soil warming.
//!
//! Temperatures are Kelvin throughout; Celsius appears only in CSV I/O and
//! in [`fem::mean_relative_error`].

pub mod banded;
pub mod doe;
pub mod fem;
pub mod oracle;
pub mod physics;
pub mod weather;

/// K at 0 °C.
pub const CELSIUS_OFFSET: f64 = 273.15;

pub use doe::{builtin_paper_design, FactorDesign, FactorEffect, OptimalLevel};
pub use fem::{
    simulate, InitialProfile, Mesh1D, SimulationConfig, SimulationResult, SimulationState,
    Simulator,
};
pub use oracle::PeriodicHalfspace;
pub use physics::{BoundaryEnvironment, ConvectionModel, MulchOptics, SoilProperties};
pub use weather::{parse_weather_csv, ClearDay, WeatherSample, WeatherSeries};
