//! Taguchi-style screening of film optical properties.
//!
//! Each run of a [`FactorDesign`] sets the four optical factors to one of
//! their levels. Responses are reduced to per-level marginal means, and the
//! level with the highest mean is selected per factor (larger is better).

use rayon::prelude::*;
use thiserror::Error;

use crate::fem::{FemError, SimulationConfig, Simulator};
use crate::physics::{ConvectionModel, MulchOptics, PhysicsError, SoilProperties};
use crate::weather::WeatherSeries;
use crate::CELSIUS_OFFSET;

/// Factor names, in design-column order.
pub const FACTORS: [&str; 4] = ["tau_s", "rho_s", "tau_l", "rho_l"];

/// Marginal means closer than this are flagged as near ties, °C.
pub const NEAR_TIE_THRESHOLD: f64 = 0.1;

/// Maximum surface temperatures printed for the seven-run design, °C.
pub const TABLE2_RESPONSES: [f64; 7] = [41.785, 41.023, 46.954, 41.276, 40.943, 53.480, 59.881];

#[derive(Debug, Error)]
pub enum DoeError {
    #[error("run {run}: expected {expected} factor values, found {found}")]
    RunArity {
        run: usize,
        expected: usize,
        found: usize,
    },
    #[error("factor {factor} level {level} has no runs")]
    EmptyLevel { factor: String, level: f64 },
    #[error("{responses} responses for {runs} runs")]
    ResponseCount { runs: usize, responses: usize },
    #[error("design has no runs")]
    Empty,
    #[error("run {run}: {source}")]
    Optics {
        run: usize,
        #[source]
        source: PhysicsError,
    },
    #[error("run {run}: {source}")]
    Simulation {
        run: usize,
        #[source]
        source: FemError,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

/// Runs as level indices into per-factor level lists.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorDesign {
    factors: Vec<String>,
    levels: Vec<Vec<f64>>,
    runs: Vec<Vec<usize>>,
}

impl FactorDesign {
    /// Builds a design from explicit factor values per run; levels are the
    /// sorted distinct values seen in each column.
    pub fn from_values(factors: &[&str], runs: &[Vec<f64>]) -> Result<Self, DoeError> {
        if runs.is_empty() {
            return Err(DoeError::Empty);
        }
        for (i, r) in runs.iter().enumerate() {
            if r.len() != factors.len() {
                return Err(DoeError::RunArity {
                    run: i + 1,
                    expected: factors.len(),
                    found: r.len(),
                });
            }
        }
        let levels: Vec<Vec<f64>> = (0..factors.len())
            .map(|f| {
                let mut col: Vec<f64> = runs.iter().map(|r| r[f]).collect();
                col.sort_by(f64::total_cmp);
                col.dedup();
                col
            })
            .collect();
        let indexed = runs
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&levels)
                    .map(|(v, lv)| lv.iter().position(|l| l == v).expect("level present"))
                    .collect()
            })
            .collect();
        Ok(Self {
            factors: factors.iter().map(|s| s.to_string()).collect(),
            levels,
            runs: indexed,
        })
    }

    pub fn factors(&self) -> &[String] {
        &self.factors
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    /// Factor values of run `i` (0-based).
    pub fn run_values(&self, i: usize) -> Vec<f64> {
        self.runs[i]
            .iter()
            .zip(&self.levels)
            .map(|(&l, lv)| lv[l])
            .collect()
    }

    /// Film optics for run `i`; emissivity follows Kirchhoff's law.
    pub fn optics(&self, i: usize) -> Result<MulchOptics, DoeError> {
        let v = self.run_values(i);
        let get = |name: &str| {
            self.factors
                .iter()
                .position(|f| f == name)
                .map(|p| v[p])
                .unwrap_or(0.0)
        };
        MulchOptics::new(get("tau_s"), get("rho_s"), get("tau_l"), get("rho_l"))
            .map_err(|source| DoeError::Optics { run: i + 1, source })
    }

    /// Parses `run,tau_s,rho_s,tau_l,rho_l` rows; `#` lines are ignored.
    pub fn from_csv(text: &str) -> Result<Self, DoeError> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let line_of = |e: &csv::Error| e.position().map_or(0, |p| p.line());
        let headers = reader.headers().map_err(|e| DoeError::Parse {
            line: line_of(&e),
            message: e.to_string(),
        })?
        .clone();
        let expected = ["run", "tau_s", "rho_s", "tau_l", "rho_l"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(DoeError::Parse {
                line: 1,
                message: format!("expected header `{}`", expected.join(",")),
            });
        }
        let mut runs = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| DoeError::Parse {
                line: line_of(&e),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let values = record
                .iter()
                .skip(1)
                .map(|s| {
                    s.parse::<f64>().map_err(|_| DoeError::Parse {
                        line,
                        message: format!("not a number: `{s}`"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            runs.push(values);
        }
        let design = Self::from_values(&FACTORS, &runs)?;
        for i in 0..design.run_count() {
            design.optics(i)?;
        }
        Ok(design)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,");
        out.push_str(&self.factors.join(","));
        out.push('\n');
        for i in 0..self.run_count() {
            let v: Vec<String> = self.run_values(i).iter().map(f64::to_string).collect();
            out.push_str(&format!("{},{}\n", i + 1, v.join(",")));
        }
        out
    }
}

/// The seven-run, three-level design over the four optical factors.
pub fn builtin_paper_design() -> FactorDesign {
    let runs = [
        [0.01, 0.01, 0.01, 0.01],
        [0.01, 0.2, 0.2, 0.2],
        [0.2, 0.01, 0.2, 0.7],
        [0.2, 0.2, 0.7, 0.01],
        [0.2, 0.7, 0.01, 0.2],
        [0.7, 0.01, 0.7, 0.2],
        [0.7, 0.2, 0.01, 0.7],
    ];
    let runs: Vec<Vec<f64>> = runs.iter().map(|r| r.to_vec()).collect();
    FactorDesign::from_values(&FACTORS, &runs).expect("built-in design is valid")
}

/// Scalar reduced from a run's surface temperature trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseMetric {
    #[default]
    MaxSurface,
    MeanSurface,
}

impl ResponseMetric {
    /// Results column name for this metric.
    pub fn column(self) -> &'static str {
        match self {
            Self::MaxSurface => "tmax_C",
            Self::MeanSurface => "tmean_C",
        }
    }
}

/// Simulates every run (in parallel) and returns one response per run in °C.
pub fn run_design(
    design: &FactorDesign,
    soil: &SoilProperties,
    conv: &ConvectionModel,
    weather: &WeatherSeries,
    config: &SimulationConfig,
    metric: ResponseMetric,
) -> Result<Vec<f64>, DoeError> {
    let optics = (0..design.run_count())
        .map(|i| design.optics(i))
        .collect::<Result<Vec<_>, _>>()?;
    optics
        .par_iter()
        .enumerate()
        .map(|(i, o)| {
            let wrap = |source| DoeError::Simulation { run: i + 1, source };
            let result = Simulator::new(config.clone(), *soil, *o, *conv)
                .and_then(|s| s.run(weather))
                .map_err(wrap)?;
            let kelvin = match metric {
                ResponseMetric::MaxSurface => result.max_surface(),
                ResponseMetric::MeanSurface => result.mean_surface(),
            };
            Ok(kelvin - CELSIUS_OFFSET)
        })
        .collect()
}

/// Larger-the-better signal-to-noise ratio of one response per run, dB.
pub fn larger_is_better_sn(responses: &[f64]) -> Vec<f64> {
    responses.iter().map(|y| -10.0 * (1.0 / (y * y)).log10()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorEffect {
    pub factor: String,
    pub levels: Vec<f64>,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn marginal_means(design: &FactorDesign, responses: &[f64]) -> Result<Vec<FactorEffect>, DoeError> {
    if responses.len() != design.run_count() {
        return Err(DoeError::ResponseCount {
            runs: design.run_count(),
            responses: responses.len(),
        });
    }
    design
        .factors
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let n_levels = design.levels[f].len();
            let mut sums = vec![0.0; n_levels];
            let mut counts = vec![0usize; n_levels];
            for (run, y) in design.runs.iter().zip(responses) {
                sums[run[f]] += y;
                counts[run[f]] += 1;
            }
            if let Some(l) = counts.iter().position(|&c| c == 0) {
                return Err(DoeError::EmptyLevel {
                    factor: name.clone(),
                    level: design.levels[f][l],
                });
            }
            Ok(FactorEffect {
                factor: name.clone(),
                levels: design.levels[f].clone(),
                means: sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect(),
                counts,
            })
        })
        .collect()
}

/// Where the optimum sits relative to the tested levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Best at the highest level: larger values may do better still.
    Increase,
    /// Best at the lowest level.
    Decrease,
    Interior,
}

impl Direction {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Increase => ">=",
            Self::Decrease => "<=",
            Self::Interior => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalLevel {
    pub factor: String,
    pub level: f64,
    pub mean: f64,
    /// Another level attains exactly the same mean.
    pub tie: bool,
    /// Runner-up mean within [`NEAR_TIE_THRESHOLD`].
    pub near_tie: bool,
    pub direction: Direction,
}

pub fn select_optimal(effects: &[FactorEffect]) -> Vec<OptimalLevel> {
    effects
        .iter()
        .map(|e| {
            let mut best = 0;
            for (i, &m) in e.means.iter().enumerate() {
                if m > e.means[best] {
                    best = i;
                }
            }
            let top = e.means[best];
            let tie = e.means.iter().enumerate().any(|(i, &m)| i != best && m == top);
            let near_tie = e
                .means
                .iter()
                .enumerate()
                .any(|(i, &m)| i != best && top - m < NEAR_TIE_THRESHOLD);
            let level = e.levels[best];
            let direction = if e.levels.len() < 2 {
                Direction::Interior
            } else if best == e.levels.len() - 1 {
                Direction::Increase
            } else if best == 0 {
                Direction::Decrease
            } else {
                Direction::Interior
            };
            OptimalLevel {
                factor: e.factor.clone(),
                level,
                mean: top,
                tie,
                near_tie,
                direction,
            }
        })
        .collect()
}

/// `run,<factors>,<column>` rows.
pub fn results_csv(design: &FactorDesign, responses: &[f64], column: &str) -> String {
    let mut out = format!("run,{},{column}\n", design.factors.join(","));
    for (i, y) in responses.iter().enumerate() {
        let v: Vec<String> = design.run_values(i).iter().map(f64::to_string).collect();
        out.push_str(&format!("{},{},{}\n", i + 1, v.join(","), y));
    }
    out
}

/// `factor,level,<column>` rows.
pub fn effects_csv(effects: &[FactorEffect], column: &str) -> String {
    let mut out = format!("factor,level,{column}\n");
    for e in effects {
        for (l, m) in e.levels.iter().zip(&e.means) {
            out.push_str(&format!("{},{},{}\n", e.factor, l, m));
        }
    }
    out
}
