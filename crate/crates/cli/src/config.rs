//! Flat `key = value` run configuration.
//!
//! Every key has a default; `auto` (or omission) for the temperature keys
//! derives them from the weather series. The resolved configuration is
//! written back in the same syntax, so a run header is itself a valid
//! config file.

use std::path::{Path, PathBuf};

use mulchtherm::fem::{
    InitialProfile, SimulationConfig, DEFAULT_DEPTH, DEFAULT_DT, DEFAULT_ELEMENTS,
    DEFAULT_FIXED_POINT_TOL, DEFAULT_MAX_FIXED_POINT_ITER,
};
use mulchtherm::{ConvectionModel, Mesh1D, MulchOptics, SoilProperties, WeatherSeries, CELSIUS_OFFSET};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub weather: Option<PathBuf>,
    pub elements: usize,
    pub depth: f64,
    pub dt: f64,
    /// K; `None` means the mean air temperature.
    pub t_bottom: Option<f64>,
    /// K; `None` means the first air temperature.
    pub initial_surface: Option<f64>,
    pub fixed_point_tol: f64,
    pub max_fixed_point_iter: usize,
    pub tau_s: f64,
    pub rho_s: f64,
    pub tau_l: f64,
    pub rho_l: f64,
    /// `None` means Kirchhoff: 1 − τ_l − ρ_l.
    pub eps_m: Option<f64>,
    pub k: f64,
    pub rho_cp: f64,
    pub eps_s: f64,
    pub a_s: f64,
    pub h_i: f64,
    pub h_o_intercept: f64,
    pub h_o_slope: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ldpe = MulchOptics::ldpe();
        let soil = SoilProperties::default();
        let conv = ConvectionModel::default();
        Self {
            weather: None,
            elements: DEFAULT_ELEMENTS,
            depth: DEFAULT_DEPTH,
            dt: DEFAULT_DT,
            t_bottom: None,
            initial_surface: None,
            fixed_point_tol: DEFAULT_FIXED_POINT_TOL,
            max_fixed_point_iter: DEFAULT_MAX_FIXED_POINT_ITER,
            tau_s: ldpe.solar_transmittance,
            rho_s: ldpe.solar_reflectance,
            tau_l: ldpe.ir_transmittance,
            rho_l: ldpe.ir_reflectance,
            eps_m: None,
            k: soil.conductivity,
            rho_cp: soil.heat_capacity,
            eps_s: soil.emissivity,
            a_s: soil.albedo,
            h_i: conv.inner,
            h_o_intercept: conv.outer_intercept,
            h_o_slope: conv.outer_slope,
        }
    }
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::input(format!("config line {line}: `{key}` expects a number, got `{value}`")))
}

fn parse_usize(key: &str, value: &str, line: usize) -> Result<usize, CliError> {
    value
        .parse::<usize>()
        .map_err(|_| CliError::input(format!("config line {line}: `{key}` expects a non-negative integer, got `{value}`")))
}

fn parse_auto_temperature(
    key: &str,
    value: &str,
    line: usize,
    offset: f64,
) -> Result<Option<f64>, CliError> {
    if value == "auto" {
        Ok(None)
    } else {
        Ok(Some(parse_f64(key, value, line)? + offset))
    }
}

impl RunConfig {
    /// Parses config text; relative weather paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CliError::input(format!("config line {line}: expected `key = value`")))?;
            match key {
                "schema_version" => {
                    if parse_usize(key, value, line)? != SCHEMA_VERSION as usize {
                        return Err(CliError::input(format!(
                            "config line {line}: unsupported schema_version {value}"
                        )));
                    }
                }
                "weather" => cfg.weather = Some(base.join(value)),
                "elements" => cfg.elements = parse_usize(key, value, line)?,
                "depth" => cfg.depth = parse_f64(key, value, line)?,
                "dt" => cfg.dt = parse_f64(key, value, line)?,
                "t_bottom_K" => cfg.t_bottom = parse_auto_temperature(key, value, line, 0.0)?,
                "t_bottom_C" => cfg.t_bottom = parse_auto_temperature(key, value, line, CELSIUS_OFFSET)?,
                "initial_surface_K" => cfg.initial_surface = parse_auto_temperature(key, value, line, 0.0)?,
                "initial_surface_C" => {
                    cfg.initial_surface = parse_auto_temperature(key, value, line, CELSIUS_OFFSET)?
                }
                "fixed_point_tol" => cfg.fixed_point_tol = parse_f64(key, value, line)?,
                "max_fixed_point_iter" => cfg.max_fixed_point_iter = parse_usize(key, value, line)?,
                "tau_s" => cfg.tau_s = parse_f64(key, value, line)?,
                "rho_s" => cfg.rho_s = parse_f64(key, value, line)?,
                "tau_l" => cfg.tau_l = parse_f64(key, value, line)?,
                "rho_l" => cfg.rho_l = parse_f64(key, value, line)?,
                "eps_m" => {
                    cfg.eps_m = if value == "auto" {
                        None
                    } else {
                        Some(parse_f64(key, value, line)?)
                    }
                }
                "k" => cfg.k = parse_f64(key, value, line)?,
                "rho_cp" => cfg.rho_cp = parse_f64(key, value, line)?,
                "eps_s" => cfg.eps_s = parse_f64(key, value, line)?,
                "a_s" => cfg.a_s = parse_f64(key, value, line)?,
                "h_i" => cfg.h_i = parse_f64(key, value, line)?,
                "h_o_intercept" => cfg.h_o_intercept = parse_f64(key, value, line)?,
                "h_o_slope" => cfg.h_o_slope = parse_f64(key, value, line)?,
                other => {
                    return Err(CliError::input(format!("config line {line}: unknown key `{other}`")))
                }
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn optics(&self) -> Result<MulchOptics, CliError> {
        match self.eps_m {
            Some(eps) => MulchOptics::with_emissivity(self.tau_s, self.rho_s, self.tau_l, self.rho_l, eps),
            None => MulchOptics::new(self.tau_s, self.rho_s, self.tau_l, self.rho_l),
        }
        .map_err(|e| CliError::input(format!("mulch optics: {e}")))
    }

    pub fn soil(&self) -> Result<SoilProperties, CliError> {
        SoilProperties::new(self.k, self.rho_cp, self.eps_s, self.a_s)
            .map_err(|e| CliError::input(format!("soil properties: {e}")))
    }

    pub fn convection(&self) -> Result<ConvectionModel, CliError> {
        ConvectionModel::new(self.h_i, self.h_o_intercept, self.h_o_slope)
            .map_err(|e| CliError::input(format!("convection model: {e}")))
    }

    /// Fills weather-derived defaults.
    pub fn resolve(&mut self, weather: &WeatherSeries) {
        self.t_bottom.get_or_insert(weather.mean_air_temperature());
        self.initial_surface
            .get_or_insert(weather.samples()[0].air_temperature);
        if self.eps_m.is_none() {
            self.eps_m = self.optics().ok().map(|o| o.emissivity);
        }
    }

    pub fn simulation(&self, weather: &WeatherSeries) -> Result<SimulationConfig, CliError> {
        let mesh = Mesh1D::uniform(self.depth, self.elements)
            .map_err(|e| CliError::input(format!("mesh: {e}")))?;
        if !(self.dt > 0.0) {
            return Err(CliError::input(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.fixed_point_tol > 0.0) || self.max_fixed_point_iter == 0 {
            return Err(CliError::input("fixed_point_tol and max_fixed_point_iter must be positive"));
        }
        let mut config = SimulationConfig::for_weather(mesh, self.dt, weather);
        if let Some(t) = self.t_bottom {
            config.bottom_temperature = t;
        }
        if let Some(t) = self.initial_surface {
            config.initial_profile = InitialProfile::Linear { surface: t };
        }
        config.fixed_point_tol = self.fixed_point_tol;
        config.max_fixed_point_iter = self.max_fixed_point_iter;
        Ok(config)
    }

    /// `key = value` lines for every effective parameter.
    pub fn to_lines(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(|| "auto".to_string(), |x| x.to_string());
        let mut lines = vec![format!("schema_version = {SCHEMA_VERSION}")];
        if let Some(w) = &self.weather {
            lines.push(format!("weather = {}", w.display()));
        }
        lines.extend([
            format!("elements = {}", self.elements),
            format!("depth = {}", self.depth),
            format!("dt = {}", self.dt),
            format!("t_bottom_K = {}", opt(self.t_bottom)),
            format!("initial_surface_K = {}", opt(self.initial_surface)),
            format!("fixed_point_tol = {}", self.fixed_point_tol),
            format!("max_fixed_point_iter = {}", self.max_fixed_point_iter),
            format!("tau_s = {}", self.tau_s),
            format!("rho_s = {}", self.rho_s),
            format!("tau_l = {}", self.tau_l),
            format!("rho_l = {}", self.rho_l),
            format!("eps_m = {}", opt(self.eps_m)),
            format!("k = {}", self.k),
            format!("rho_cp = {}", self.rho_cp),
            format!("eps_s = {}", self.eps_s),
            format!("a_s = {}", self.a_s),
            format!("h_i = {}", self.h_i),
            format!("h_o_intercept = {}", self.h_o_intercept),
            format!("h_o_slope = {}", self.h_o_slope),
        ]);
        lines
    }
}
