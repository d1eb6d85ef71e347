//! Subcommand implementations. Each returns a short human summary; all
//! files are written atomically into the output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mulchtherm::doe::{
    self, larger_is_better_sn, marginal_means, run_design, select_optimal, ResponseMetric,
    TABLE2_RESPONSES,
};
use mulchtherm::fem::{mean_relative_error_celsius, SimulationConfig, SimulationResult};
use mulchtherm::oracle::{ANNUAL_PERIOD, DEFAULT_CESSATION_RATIO, DIURNAL_PERIOD};
use mulchtherm::{
    builtin_paper_design, parse_weather_csv, ConvectionModel, FactorDesign, MulchOptics,
    PeriodicHalfspace, SoilProperties, WeatherSeries, CELSIUS_OFFSET,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{comment_block, ensure_dir, read_text, write_atomic};

/// Reference mean relative error reported for the original field trace.
pub const REFERENCE_MRE_PERCENT: f64 = 5.76;

/// Tolerance for matching measured timestamps to simulation steps, s.
pub const TIME_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Weather CSV (t_s, Rs_Wm2, Ta_C or Ta_K, v_ms); overrides the config.
    #[arg(long)]
    pub weather: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Time step in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of quadratic elements.
    #[arg(long)]
    pub elements: Option<usize>,
    /// Domain depth in metres.
    #[arg(long)]
    pub depth: Option<f64>,
}

/// Everything a simulation needs, validated up front.
pub struct Prepared {
    pub config: RunConfig,
    pub weather: WeatherSeries,
    pub simulation: SimulationConfig,
    pub soil: SoilProperties,
    pub optics: MulchOptics,
    pub convection: ConvectionModel,
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(w) = &args.weather {
        cfg.weather = Some(w.clone());
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(n) = args.elements {
        cfg.elements = n;
    }
    if let Some(d) = args.depth {
        cfg.depth = d;
    }
    Ok(cfg)
}

pub fn load_weather(path: &Path) -> Result<WeatherSeries, CliError> {
    let text = read_text(path, "weather file")?;
    parse_weather_csv(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn prepare(args: &RunArgs) -> Result<Prepared, CliError> {
    let mut config = load_config(args)?;
    let path = config
        .weather
        .clone()
        .ok_or_else(|| CliError::input("no weather file given (use --weather or `weather =` in the config)"))?;
    let path = path
        .canonicalize()
        .map_err(|e| CliError::input(format!("cannot read weather file {}: {e}", path.display())))?;
    let weather = load_weather(&path)?;
    config.weather = Some(path);
    config.resolve(&weather);
    let soil = config.soil()?;
    let optics = config.optics()?;
    let convection = config.convection()?;
    let simulation = config.simulation(&weather)?;
    Ok(Prepared {
        config,
        weather,
        simulation,
        soil,
        optics,
        convection,
    })
}

fn run(p: &Prepared) -> Result<SimulationResult, CliError> {
    Ok(mulchtherm::simulate(&p.simulation, &p.soil, &p.optics, &p.convection, &p.weather)?)
}

pub fn profile_csv(header: &[String], p: &Prepared, result: &SimulationResult) -> String {
    let mut out = comment_block(header);
    let nodes = p.simulation.mesh.nodes();
    let z: Vec<String> = nodes.iter().map(f64::to_string).collect();
    writeln!(out, "# z_m = {}", z.join(",")).unwrap();
    out.push_str("t_s");
    for i in 0..nodes.len() {
        write!(out, ",z_{i:03}").unwrap();
    }
    out.push('\n');
    for s in &result.states {
        write!(out, "{}", s.time).unwrap();
        for t in &s.nodes {
            write!(out, ",{}", t - CELSIUS_OFFSET).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn surface_csv(header: &[String], result: &SimulationResult) -> String {
    let mut out = comment_block(header);
    out.push_str("t_s,T_surface_C,T_mulch_C,fp_iters\n");
    for (i, s) in result.states.iter().enumerate() {
        let iters = if i == 0 { 0 } else { result.diagnostics[i - 1].iterations };
        writeln!(
            out,
            "{},{},{},{}",
            s.time,
            s.surface() - CELSIUS_OFFSET,
            s.mulch - CELSIUS_OFFSET,
            iters
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub steps: usize,
    pub max_fixed_point_iterations: usize,
    pub max_surface_c: f64,
    pub out: PathBuf,
}

pub fn simulate(args: &RunArgs) -> Result<SimulateSummary, CliError> {
    let p = prepare(args)?;
    ensure_dir(&args.out)?;
    let result = run(&p)?;
    let header = p.config.to_lines();
    write_atomic(&args.out.join("run_header.txt"), &(header.join("\n") + "\n"))?;
    write_atomic(&args.out.join("profile.csv"), &profile_csv(&header, &p, &result))?;
    write_atomic(&args.out.join("surface.csv"), &surface_csv(&header, &result))?;
    Ok(SimulateSummary {
        steps: result.diagnostics.len(),
        max_fixed_point_iterations: result.diagnostics.iter().map(|d| d.iterations).max().unwrap_or(0),
        max_surface_c: result.max_surface() - CELSIUS_OFFSET,
        out: args.out.clone(),
    })
}

impl std::fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} steps, max surface {:.2} °C, at most {} fixed-point iterations per step; wrote {}",
            self.steps,
            self.max_surface_c,
            self.max_fixed_point_iterations,
            self.out.display()
        )
    }
}

/// Measured surface temperature trace, °C.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredTrace {
    pub times: Vec<f64>,
    pub surface_c: Vec<f64>,
}

/// Reads a CSV with `t_s` and `T_surface_C` columns; `#` lines are comments.
pub fn parse_measured_csv(text: &str, origin: &str) -> Result<MeasuredTrace, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(format!("{origin}: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::input(format!("{origin}: missing column `{name}`")))
    };
    let (ti, si) = (column("t_s")?, column("T_surface_C")?);
    let mut trace = MeasuredTrace {
        times: Vec::new(),
        surface_c: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| CliError::input(format!("{origin}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| {
            record[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::input(format!("{origin} line {line}: bad `{name}` value `{}`", &record[i])))
        };
        trace.times.push(field(ti, "t_s")?);
        trace.surface_c.push(field(si, "T_surface_C")?);
    }
    if trace.times.is_empty() {
        return Err(CliError::input(format!("{origin}: no measurements")));
    }
    Ok(trace)
}

/// Maps each measured time to a simulation step index.
pub fn align_to_steps(times: &[f64], start: f64, dt: f64, n_steps: usize, origin: &str) -> Result<Vec<usize>, CliError> {
    times
        .iter()
        .enumerate()
        .map(|(row, &t)| {
            let k = ((t - start) / dt).round();
            if k >= 0.0 && k <= n_steps as f64 && (start + k * dt - t).abs() <= TIME_MATCH_TOL {
                Ok(k as usize)
            } else {
                Err(CliError::input(format!(
                    "{origin}: measurement {} at t = {t} s is not aligned with the {dt} s simulation steps starting at {start} s",
                    row + 1
                )))
            }
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, Default, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Measured trace with `t_s` and `T_surface_C` columns.
    #[arg(long)]
    pub measured: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub excluded: usize,
    /// Fraction, not percent.
    pub mean_relative_error: f64,
    pub max_abs_error_c: f64,
    pub correlation: f64,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "samples = {}", self.samples)?;
        writeln!(f, "excluded_zero_celsius = {}", self.excluded)?;
        writeln!(f, "mean_relative_error_percent = {}", 100.0 * self.mean_relative_error)?;
        writeln!(f, "max_abs_error_C = {}", self.max_abs_error_c)?;
        if self.correlation.is_finite() {
            writeln!(f, "pearson_r = {}", self.correlation)?;
        } else {
            writeln!(f, "pearson_r = undefined (constant series)")?;
        }
        write!(
            f,
            "reference_mean_relative_error_percent = {REFERENCE_MRE_PERCENT} (field campaign value; not reproducible without the original dataset)"
        )
    }
}

pub fn validate(args: &ValidateArgs) -> Result<ValidationReport, CliError> {
    let p = prepare(&args.run)?;
    let origin = args.measured.display().to_string();
    let measured = parse_measured_csv(&read_text(&args.measured, "measured trace")?, &origin)?;
    let start = p.weather.start();
    let n_steps = ((p.weather.end() - start) / p.simulation.dt + 1e-9).floor() as usize;
    let steps = align_to_steps(&measured.times, start, p.simulation.dt, n_steps, &origin)?;
    ensure_dir(&args.run.out)?;
    let result = run(&p)?;
    let simulated: Vec<f64> = steps
        .iter()
        .map(|&k| result.states[k].surface() - CELSIUS_OFFSET)
        .collect();
    let mre = mean_relative_error_celsius(&simulated, &measured.surface_c)?;
    let max_abs = simulated
        .iter()
        .zip(&measured.surface_c)
        .map(|(s, m)| (s - m).abs())
        .fold(0.0, f64::max);
    let report = ValidationReport {
        samples: simulated.len(),
        excluded: mre.excluded,
        mean_relative_error: mre.value,
        max_abs_error_c: max_abs,
        correlation: pearson(&simulated, &measured.surface_c),
    };

    let mut header = p.config.to_lines();
    header.push(format!("measured = {origin}"));
    let mut comparison = comment_block(&header);
    comparison.push_str("t_s,T_sim_C,T_meas_C,abs_err_C\n");
    for ((t, s), m) in measured.times.iter().zip(&simulated).zip(&measured.surface_c) {
        writeln!(comparison, "{t},{s},{m},{}", (s - m).abs()).unwrap();
    }
    write_atomic(&args.run.out.join("comparison.csv"), &comparison)?;
    write_atomic(&args.run.out.join("report.txt"), &format!("{}{report}\n", comment_block(&header)))?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum MetricArg {
    #[default]
    Max,
    Mean,
}

impl From<MetricArg> for ResponseMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Max => ResponseMetric::MaxSurface,
            MetricArg::Mean => ResponseMetric::MeanSurface,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Design CSV with columns run,tau_s,rho_s,tau_l,rho_l.
    #[arg(long, conflicts_with = "builtin_design")]
    pub design: Option<PathBuf>,
    /// Use the built-in seven-run, four-factor design (default).
    #[arg(long)]
    pub builtin_design: bool,
    /// Skip simulation and analyse the tabulated field responses.
    #[arg(long)]
    pub table2_responses: bool,
    /// Response reduced from each surface trace.
    #[arg(long, value_enum, default_value_t = MetricArg::Max)]
    pub metric: MetricArg,
    /// Analyse larger-the-better signal-to-noise ratios.
    #[arg(long)]
    pub sn: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSummary {
    pub responses: Vec<f64>,
    pub effects: Vec<doe::FactorEffect>,
    pub optimum: Vec<doe::OptimalLevel>,
}

pub fn optimal_text(optimum: &[doe::OptimalLevel], unit: &str) -> String {
    let mut out = String::new();
    for o in optimum {
        write!(out, "{} = {} ({}) mean {} {unit}", o.factor, o.level, o.direction.symbol(), o.mean).unwrap();
        if o.tie {
            out.push_str(" [exact tie, first level kept]");
        } else if o.near_tie {
            write!(out, " [near tie: runner-up within {} {unit}]", doe::NEAR_TIE_THRESHOLD).unwrap();
        }
        out.push('\n');
    }
    let levels: Vec<String> = optimum.iter().map(|o| o.level.to_string()).collect();
    writeln!(out, "optimum = ({})", levels.join(", ")).unwrap();
    out
}

pub fn optimize(args: &OptimizeArgs) -> Result<OptimizeSummary, CliError> {
    let design = match &args.design {
        Some(path) => FactorDesign::from_csv(&read_text(path, "design file")?)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?,
        None => builtin_paper_design(),
    };
    let mut header: Vec<String>;
    let responses = if args.table2_responses {
        if design.run_count() != TABLE2_RESPONSES.len() {
            return Err(CliError::input(format!(
                "tabulated responses need a {}-run design, got {} runs",
                TABLE2_RESPONSES.len(),
                design.run_count()
            )));
        }
        header = vec![format!("schema_version = {}", crate::config::SCHEMA_VERSION), "responses = tabulated".into()];
        TABLE2_RESPONSES.to_vec()
    } else {
        let p = prepare(&args.run)?;
        header = p.config.to_lines();
        run_design(&design, &p.soil, &p.convection, &p.weather, &p.simulation, args.metric.into())?
    };
    header.push(format!("metric = {}", ResponseMetric::from(args.metric).column()));
    header.push(format!("signal_to_noise = {}", args.sn));
    if let Some(path) = &args.design {
        header.push(format!("design = {}", path.display()));
    }
    ensure_dir(&args.run.out)?;

    let (analysed, column, unit) = if args.sn {
        (larger_is_better_sn(&responses), "marginal_mean_dB", "dB")
    } else {
        (responses.clone(), "marginal_mean_C", "°C")
    };
    let effects = marginal_means(&design, &analysed)?;
    let optimum = select_optimal(&effects);
    let block = comment_block(&header);
    let metric_column = ResponseMetric::from(args.metric).column();
    write_atomic(
        &args.run.out.join("results.csv"),
        &(block.clone() + &doe::results_csv(&design, &responses, metric_column)),
    )?;
    write_atomic(&args.run.out.join("effects.csv"), &(block.clone() + &doe::effects_csv(&effects, column)))?;
    write_atomic(&args.run.out.join("optimal.txt"), &(block + &optimal_text(&optimum, unit)))?;
    Ok(OptimizeSummary {
        responses,
        effects,
        optimum,
    })
}

#[derive(Debug, Clone, Default, Args)]
pub struct DepthsArgs {
    /// Config file supplying `k` and `rho_cp`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Thermal conductivity, W/(m·K).
    #[arg(long)]
    pub k: Option<f64>,
    /// Volumetric heat capacity, J/(m³·K).
    #[arg(long)]
    pub rho_cp: Option<f64>,
    /// Amplitude ratio defining the depth where variation ceases.
    #[arg(long, default_value_t = DEFAULT_CESSATION_RATIO)]
    pub threshold: f64,
    /// Forcing periods: `diurnal`, `annual` or a number of seconds.
    #[arg(long = "period", value_delimiter = ',', default_values_t = vec!["diurnal".to_string(), "annual".to_string()])]
    pub periods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub label: String,
    pub period: f64,
    pub damping_depth: f64,
    pub cessation_depth: f64,
}

pub fn depths(args: &DepthsArgs) -> Result<Vec<DepthRow>, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(c) = args.rho_cp {
        cfg.rho_cp = c;
    }
    let soil = cfg.soil()?;
    args.periods
        .iter()
        .map(|label| {
            let period = match label.as_str() {
                "diurnal" => DIURNAL_PERIOD,
                "annual" => ANNUAL_PERIOD,
                other => other
                    .parse::<f64>()
                    .map_err(|_| CliError::input(format!("unknown period `{other}`")))?,
            };
            let wave = PeriodicHalfspace::for_soil(&soil, period, 0.0, 1.0)
                .map_err(|e| CliError::input(e.to_string()))?;
            let cessation = wave
                .depth_for_ratio(args.threshold)
                .map_err(|e| CliError::input(e.to_string()))?;
            Ok(DepthRow {
                label: label.clone(),
                period,
                damping_depth: wave.damping_depth(),
                cessation_depth: cessation,
            })
        })
        .collect()
}

pub fn depths_table(rows: &[DepthRow], threshold: f64) -> String {
    let mut out = format!("period,period_s,damping_depth_m,depth_at_ratio_{threshold}_m\n");
    for r in rows {
        writeln!(out, "{},{},{},{}", r.label, r.period, r.damping_depth, r.cessation_depth).unwrap();
    }
    out
}
