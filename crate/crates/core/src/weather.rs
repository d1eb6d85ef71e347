//! Meteorological forcing: CSV ingestion, validation, interpolation and
//! synthetic clear-sky series.
//!
//! CSV layout: header `t_s,Rs_Wm2,Ta_C,v_ms` (or `Ta_K` in the third
//! column for Kelvin), one sample per row, `#` comment lines ignored.

use std::f64::consts::PI;

use thiserror::Error;

use crate::physics::BoundaryEnvironment;
use crate::CELSIUS_OFFSET;

pub const HEADER_CELSIUS: [&str; 4] = ["t_s", "Rs_Wm2", "Ta_C", "v_ms"];
pub const HEADER_KELVIN: [&str; 4] = ["t_s", "Rs_Wm2", "Ta_K", "v_ms"];

const SOLAR_RANGE: (f64, f64) = (0.0, 1500.0);
const AIR_RANGE: (f64, f64) = (200.0, 350.0);
const WIND_RANGE: (f64, f64) = (0.0, 60.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeatherError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {field} = {value} outside validation envelope {range}")]
    Envelope {
        line: u64,
        field: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("timestamps not increasing: line {previous_line} (t = {previous}) then line {line} (t = {t})")]
    OutOfOrder {
        previous_line: u64,
        previous: f64,
        line: u64,
        t: f64,
    },
    #[error("gap of {gap} s after t = {t} exceeds twice the cadence {cadence} s")]
    Gap { t: f64, gap: f64, cadence: f64 },
    #[error("weather series is empty")]
    Empty,
    #[error("t = {t} s outside series range [{first}, {last}]")]
    OutOfRange { t: f64, first: f64, last: f64 },
    #[error("invalid synthesis parameter {name} = {value}")]
    Parameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherSample {
    /// Seconds since series start.
    pub t: f64,
    /// W/m²
    pub solar: f64,
    /// K
    pub air_temperature: f64,
    /// m/s
    pub wind_speed: f64,
}

impl WeatherSample {
    fn validate(&self, line: u64) -> Result<(), WeatherError> {
        let checks = [
            ("Rs_Wm2", self.solar, self.solar >= SOLAR_RANGE.0 && self.solar <= SOLAR_RANGE.1, "[0, 1500] W/m2"),
            ("Ta", self.air_temperature, self.air_temperature > AIR_RANGE.0 && self.air_temperature < AIR_RANGE.1, "(200, 350) K"),
            ("v_ms", self.wind_speed, self.wind_speed >= WIND_RANGE.0 && self.wind_speed <= WIND_RANGE.1, "[0, 60] m/s"),
        ];
        for (field, value, ok, range) in checks {
            if !ok {
                return Err(WeatherError::Envelope { line, field, value, range });
            }
        }
        if !self.t.is_finite() {
            return Err(WeatherError::Parse {
                line,
                message: format!("non-finite timestamp {}", self.t),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    samples: Vec<WeatherSample>,
    cadence: f64,
}

impl WeatherSeries {
    /// Validates envelope, ordering and gaps. The nominal cadence is the
    /// smallest spacing between samples.
    pub fn new(samples: Vec<WeatherSample>) -> Result<Self, WeatherError> {
        let lines: Vec<u64> = (1..=samples.len() as u64).collect();
        Self::with_lines(samples, &lines)
    }

    fn with_lines(samples: Vec<WeatherSample>, lines: &[u64]) -> Result<Self, WeatherError> {
        if samples.is_empty() {
            return Err(WeatherError::Empty);
        }
        for (s, &line) in samples.iter().zip(lines) {
            s.validate(line)?;
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(WeatherError::OutOfOrder {
                    previous_line: lines[i],
                    previous: w[0].t,
                    line: lines[i + 1],
                    t: w[1].t,
                });
            }
        }
        let cadence = samples
            .windows(2)
            .map(|w| w[1].t - w[0].t)
            .fold(f64::INFINITY, f64::min);
        let cadence = if cadence.is_finite() { cadence } else { 0.0 };
        for w in samples.windows(2) {
            let gap = w[1].t - w[0].t;
            if gap > 2.0 * cadence * (1.0 + 1e-9) {
                return Err(WeatherError::Gap { t: w[0].t, gap, cadence });
            }
        }
        Ok(Self { samples, cadence })
    }

    pub fn samples(&self) -> &[WeatherSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Nominal sample spacing in seconds (0 for a single sample).
    pub fn cadence(&self) -> f64 {
        self.cadence
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn mean_air_temperature(&self) -> f64 {
        self.samples.iter().map(|s| s.air_temperature).sum::<f64>() / self.samples.len() as f64
    }

    /// Linear interpolation of every field; no extrapolation.
    pub fn sample_at(&self, t: f64) -> Result<BoundaryEnvironment, WeatherError> {
        let (first, last) = (self.start(), self.end());
        if !(t >= first && t <= last) {
            return Err(WeatherError::OutOfRange { t, first, last });
        }
        let idx = self.samples.partition_point(|s| s.t <= t);
        let a = &self.samples[idx - 1];
        if a.t == t || idx == self.samples.len() {
            return Ok(env(a.solar, a.air_temperature, a.wind_speed));
        }
        let b = &self.samples[idx];
        let w = (t - a.t) / (b.t - a.t);
        let lerp = |x: f64, y: f64| x + w * (y - x);
        Ok(env(
            lerp(a.solar, b.solar),
            lerp(a.air_temperature, b.air_temperature),
            lerp(a.wind_speed, b.wind_speed),
        ))
    }

    /// Writes the series as CSV with Kelvin temperatures (exact round trip).
    pub fn to_csv(&self) -> String {
        self.write_csv(false)
    }

    /// Writes the series as CSV with Celsius temperatures.
    pub fn to_csv_celsius(&self) -> String {
        self.write_csv(true)
    }

    fn write_csv(&self, celsius: bool) -> String {
        let header = if celsius { HEADER_CELSIUS } else { HEADER_KELVIN };
        let mut out = header.join(",");
        out.push('\n');
        for s in &self.samples {
            let ta = if celsius {
                s.air_temperature - CELSIUS_OFFSET
            } else {
                s.air_temperature
            };
            out.push_str(&format!("{},{},{},{}\n", s.t, s.solar, ta, s.wind_speed));
        }
        out
    }
}

fn env(solar: f64, air_temperature: f64, wind_speed: f64) -> BoundaryEnvironment {
    BoundaryEnvironment {
        solar,
        air_temperature,
        wind_speed,
    }
}

/// Parses and validates a weather CSV.
pub fn parse_weather_csv(text: &str) -> Result<WeatherSeries, WeatherError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(text.as_bytes());

    let header_line = |e: &csv::Error| e.position().map_or(0, |p| p.line());
    let headers = reader.headers().map_err(|e| WeatherError::Parse {
        line: header_line(&e),
        message: e.to_string(),
    })?
    .clone();
    let fields: Vec<&str> = headers.iter().collect();
    let celsius = if fields == HEADER_CELSIUS {
        true
    } else if fields == HEADER_KELVIN {
        false
    } else {
        return Err(WeatherError::Parse {
            line: 1,
            message: format!(
                "expected header `{}` or `{}`, found `{}`",
                HEADER_CELSIUS.join(","),
                HEADER_KELVIN.join(","),
                fields.join(",")
            ),
        });
    };

    let mut samples = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| WeatherError::Parse {
            line: header_line(&e),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(WeatherError::Parse {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let mut values = [0.0; 4];
        for (i, v) in values.iter_mut().enumerate() {
            *v = record[i].parse::<f64>().map_err(|_| WeatherError::Parse {
                line,
                message: format!("column {} is not a number: `{}`", fields[i], &record[i]),
            })?;
        }
        let [t, solar, ta, wind_speed] = values;
        let air_temperature = if celsius { ta + CELSIUS_OFFSET } else { ta };
        samples.push(WeatherSample {
            t,
            solar,
            air_temperature,
            wind_speed,
        });
        lines.push(line);
    }
    WeatherSeries::with_lines(samples, &lines)
}

/// Parameters of an idealized cloudless day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClearDay {
    /// s
    pub day_length: f64,
    /// W/m²
    pub peak_solar: f64,
    /// K
    pub mean_air_temperature: f64,
    /// K
    pub air_temperature_amplitude: f64,
    /// m/s
    pub wind_speed: f64,
    /// s
    pub cadence: f64,
}

impl Default for ClearDay {
    /// High-altitude tropical savanna stand-in: 900 W/m² peak, 287 K mean,
    /// 6 K swing, 1.5 m/s wind, 5-minute cadence.
    fn default() -> Self {
        Self {
            day_length: 86_400.0,
            peak_solar: 900.0,
            mean_air_temperature: 287.0,
            air_temperature_amplitude: 6.0,
            wind_speed: 1.5,
            cadence: 300.0,
        }
    }
}

/// Delay of the air temperature maximum after solar noon, s.
pub const AIR_TEMPERATURE_LAG: f64 = 7_200.0;

impl ClearDay {
    fn validate(&self) -> Result<(), WeatherError> {
        let checks = [
            ("day_length", self.day_length, self.day_length > 0.0),
            ("peak_solar", self.peak_solar, self.peak_solar >= 0.0),
            ("mean_air_temperature", self.mean_air_temperature, self.mean_air_temperature > 0.0),
            ("air_temperature_amplitude", self.air_temperature_amplitude, self.air_temperature_amplitude >= 0.0),
            ("wind_speed", self.wind_speed, self.wind_speed >= 0.0),
            ("cadence", self.cadence, self.cadence > 0.0 && self.cadence <= self.day_length),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(WeatherError::Parameter { name, value });
            }
        }
        Ok(())
    }

    pub fn solar_noon(&self) -> f64 {
        0.5 * self.day_length
    }

    /// Shortwave at local time `t` (seconds after midnight): half-sine over
    /// a daylight period of half the day, centered on solar noon.
    pub fn solar_at(&self, t: f64) -> f64 {
        let daylight = 0.5 * self.day_length;
        let sunrise = self.solar_noon() - 0.5 * daylight;
        let since_sunrise = t - sunrise;
        if (0.0..=daylight).contains(&since_sunrise) {
            (self.peak_solar * (PI * since_sunrise / daylight).sin()).max(0.0)
        } else {
            0.0
        }
    }

    pub fn air_temperature_at(&self, t: f64, mean: f64) -> f64 {
        let phase = 2.0 * PI * (t - self.solar_noon() - AIR_TEMPERATURE_LAG) / self.day_length;
        mean + self.air_temperature_amplitude * phase.cos()
    }

    fn samples_per_day(&self) -> usize {
        (self.day_length / self.cadence).round() as usize
    }
}

/// One synthetic clear day sampled at `cadence` from midnight.
pub fn synthesize_clear_day(day: &ClearDay) -> Result<WeatherSeries, WeatherError> {
    synthesize_typical_year(day, 0.0, 1)
}

/// Consecutive clear days whose mean air temperature follows a 365-day sine
/// of amplitude `annual_amplitude`, starting at the annual mean.
pub fn synthesize_typical_year(
    day: &ClearDay,
    annual_amplitude: f64,
    days: usize,
) -> Result<WeatherSeries, WeatherError> {
    day.validate()?;
    if days == 0 {
        return Err(WeatherError::Parameter {
            name: "days",
            value: 0.0,
        });
    }
    if !(annual_amplitude >= 0.0) {
        return Err(WeatherError::Parameter {
            name: "annual_amplitude",
            value: annual_amplitude,
        });
    }
    let per_day = day.samples_per_day();
    let mut samples = Vec::with_capacity(per_day * days);
    for d in 0..days {
        let mean = day.mean_air_temperature
            + annual_amplitude * (2.0 * PI * d as f64 / 365.0).sin();
        let offset = d as f64 * day.day_length;
        for i in 0..per_day {
            let local = i as f64 * day.cadence;
            samples.push(WeatherSample {
                t: offset + local,
                solar: day.solar_at(local),
                air_temperature: day.air_temperature_at(local, mean),
                wind_speed: day.wind_speed,
            });
        }
    }
    WeatherSeries::new(samples)
}
