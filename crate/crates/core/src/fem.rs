//! One-dimensional Galerkin model of soil conduction with quadratic
//! Lagrange elements and implicit (backward Euler) time stepping.
//!
//! The surface node carries the film-coupled flux; the bottom node is held
//! at the deep-soil temperature. Per time step the radiative nonlinearity is
//! resolved by fixed-point iteration on the surface temperature, with the
//! film balance solved inside each iterate.

use thiserror::Error;

use crate::banded::{BandedCholesky, NotPositiveDefinite, SymmetricBanded};
use crate::physics::{
    self, BoundaryEnvironment, ConvectionModel, MulchBalance, MulchOptics, PhysicsError,
    SoilProperties,
};
use crate::weather::{WeatherError, WeatherSeries};
use crate::CELSIUS_OFFSET;

/// Integer capacitance stencil; `C_e = (ρc_p·h_e/30)·stencil`.
pub const CAPACITANCE_STENCIL: [[i32; 3]; 3] = [[4, 2, -1], [2, 16, 2], [-1, 2, 4]];
/// Integer conductance stencil; `K_e = (k/(3·h_e))·stencil`.
pub const CONDUCTANCE_STENCIL: [[i32; 3]; 3] = [[7, -8, 1], [-8, 16, -8], [1, -8, 7]];

/// Nodal temperatures must stay inside this open interval, K.
pub const SANITY_ENVELOPE: (f64, f64) = (100.0, 500.0);

/// Relaxation applied to surface iterates once they start to oscillate.
pub const OSCILLATION_RELAXATION: f64 = 0.7;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("{name} = {value} is invalid ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Weather(#[from] WeatherError),
    #[error("effective system is not positive definite: {0}")]
    Factorization(#[from] NotPositiveDefinite),
    #[error("surface fixed point did not converge in {iterations} iterations (surface iterates {history:?})")]
    NoConvergence { iterations: usize, history: Vec<f64> },
    #[error("temperature {value} K at node {node} left the sanity envelope (100, 500) K")]
    Envelope { node: usize, value: f64 },
    #[error("step {index} (t = {time} s): {source}")]
    Step {
        index: usize,
        time: f64,
        #[source]
        source: Box<FemError>,
    },
    #[error("series lengths differ: {simulated} simulated vs {measured} measured")]
    LengthMismatch { simulated: usize, measured: usize },
    #[error("initial profile has {found} values for {expected} nodes")]
    ProfileLength { expected: usize, found: usize },
}

/// Uniform mesh of quadratic elements, surface node first.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    depth: f64,
    n_elements: usize,
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn uniform(depth: f64, n_elements: usize) -> Result<Self, FemError> {
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(FemError::Domain {
                name: "depth",
                value: depth,
                reason: "must be positive",
            });
        }
        if n_elements == 0 {
            return Err(FemError::Domain {
                name: "n_elements",
                value: 0.0,
                reason: "need at least one element",
            });
        }
        let n_nodes = 2 * n_elements + 1;
        let step = depth / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| i as f64 * step).collect();
        nodes[n_nodes - 1] = depth;
        Ok(Self {
            depth,
            n_elements,
            nodes,
        })
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element_length(&self) -> f64 {
        self.depth / self.n_elements as f64
    }
}

/// Element capacitance and conductance matrices with their scale factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrices {
    /// ρc_p·h_e/30, J/(m²·K)
    pub capacitance_scale: f64,
    /// k/(3·h_e), W/(m²·K)
    pub conductance_scale: f64,
    pub capacitance: [[f64; 3]; 3],
    pub conductance: [[f64; 3]; 3],
}

fn scaled(scale: f64, stencil: &[[i32; 3]; 3]) -> [[f64; 3]; 3] {
    stencil.map(|row| row.map(|v| scale * f64::from(v)))
}

pub fn element_matrices(soil: &SoilProperties, h_e: f64) -> Result<ElementMatrices, FemError> {
    if !(h_e > 0.0 && h_e.is_finite()) {
        return Err(FemError::Domain {
            name: "h_e",
            value: h_e,
            reason: "element length must be positive",
        });
    }
    let capacitance_scale = soil.heat_capacity * h_e / 30.0;
    let conductance_scale = soil.conductivity / (3.0 * h_e);
    Ok(ElementMatrices {
        capacitance_scale,
        conductance_scale,
        capacitance: scaled(capacitance_scale, &CAPACITANCE_STENCIL),
        conductance: scaled(conductance_scale, &CONDUCTANCE_STENCIL),
    })
}

/// Global capacitance `C` and conductance `K`, pentadiagonal.
pub fn assemble(
    mesh: &Mesh1D,
    soil: &SoilProperties,
) -> Result<(SymmetricBanded, SymmetricBanded), FemError> {
    let e = element_matrices(soil, mesh.element_length())?;
    let n = mesh.node_count();
    let mut c = SymmetricBanded::zeros(n, 2);
    let mut k = SymmetricBanded::zeros(n, 2);
    for el in 0..mesh.n_elements() {
        let base = 2 * el;
        for a in 0..3 {
            for b in 0..=a {
                c.add(base + a, base + b, e.capacitance[a][b]);
                k.add(base + a, base + b, e.conductance[a][b]);
            }
        }
    }
    Ok((c, k))
}

/// `K̂ = C + Δt·K`.
pub fn effective_system(c: &SymmetricBanded, k: &SymmetricBanded, dt: f64) -> SymmetricBanded {
    c.scaled_add(dt, k)
}

/// Load vector with the surface flux on the first node. The bottom natural
/// flux never enters because that node is always constrained.
pub fn load_vector(surface_flux: f64, n_nodes: usize) -> Vec<f64> {
    let mut f = vec![0.0; n_nodes];
    if let Some(first) = f.first_mut() {
        *first = surface_flux;
    }
    f
}

/// Eliminates the last degree of freedom at `t_bottom`, returning the
/// reduced matrix and right-hand side.
pub fn apply_dirichlet_bottom(
    k_hat: &SymmetricBanded,
    f_hat: &[f64],
    t_bottom: f64,
) -> (SymmetricBanded, Vec<f64>) {
    let n = k_hat.dim();
    let reduced = k_hat.principal(0..n - 1);
    let mut rhs = f_hat[..n - 1].to_vec();
    let lo = (n - 1).saturating_sub(k_hat.bandwidth());
    for (i, r) in rhs.iter_mut().enumerate().skip(lo) {
        *r -= k_hat.get(i, n - 1) * t_bottom;
    }
    (reduced, rhs)
}

/// How the surface node is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopCondition {
    /// Prescribed heat flux into the soil (natural condition).
    Flux,
    /// Prescribed surface temperature.
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BottomCondition {
    Temperature,
    /// Zero flux.
    Insulated,
}

/// Linear transient conduction with a factorized effective matrix reused
/// across steps.
#[derive(Debug, Clone)]
pub struct TransientConduction {
    mesh: Mesh1D,
    dt: f64,
    capacitance: SymmetricBanded,
    k_hat: SymmetricBanded,
    top: TopCondition,
    bottom: BottomCondition,
    free: std::ops::Range<usize>,
    factor: BandedCholesky,
}

impl TransientConduction {
    pub fn new(
        mesh: &Mesh1D,
        soil: &SoilProperties,
        dt: f64,
        top: TopCondition,
        bottom: BottomCondition,
    ) -> Result<Self, FemError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FemError::Domain {
                name: "dt",
                value: dt,
                reason: "time step must be positive",
            });
        }
        let (capacitance, k) = assemble(mesh, soil)?;
        let k_hat = effective_system(&capacitance, &k, dt);
        let n = mesh.node_count();
        let start = usize::from(top == TopCondition::Temperature);
        let end = n - usize::from(bottom == BottomCondition::Temperature);
        let free = start..end;
        let factor = k_hat.principal(free.clone()).cholesky()?;
        Ok(Self {
            mesh: mesh.clone(),
            dt,
            capacitance,
            k_hat,
            top,
            bottom,
            free,
            factor,
        })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn capacitance(&self) -> &SymmetricBanded {
        &self.capacitance
    }

    pub fn effective_matrix(&self) -> &SymmetricBanded {
        &self.k_hat
    }

    /// `C·T` for the capacitance-weighted right-hand side.
    pub fn storage(&self, previous: &[f64]) -> Vec<f64> {
        self.capacitance.mul_vec(previous)
    }

    /// One backward Euler step. `top` is a flux (W/m²) or temperature (K)
    /// per the configured [`TopCondition`]; `bottom` is ignored when the
    /// bottom is insulated.
    pub fn advance(&self, previous: &[f64], top: f64, bottom: f64) -> Vec<f64> {
        let storage = self.storage(previous);
        self.advance_from_storage(&storage, top, bottom)
    }

    fn advance_from_storage(&self, storage: &[f64], top: f64, bottom: f64) -> Vec<f64> {
        let n = self.mesh.node_count();
        let mut full = vec![0.0; n];
        let mut rhs = storage.to_vec();
        if self.top == TopCondition::Flux {
            rhs[0] += self.dt * top;
        } else {
            full[0] = top;
        }
        if self.bottom == BottomCondition::Temperature {
            full[n - 1] = bottom;
        }
        let w = self.k_hat.bandwidth();
        let mut constrained = Vec::with_capacity(2);
        if self.top == TopCondition::Temperature {
            constrained.push(0);
        }
        if self.bottom == BottomCondition::Temperature {
            constrained.push(n - 1);
        }
        for &c in &constrained {
            let lo = c.saturating_sub(w).max(self.free.start);
            let hi = (c + w + 1).min(self.free.end);
            for i in lo..hi {
                rhs[i] -= self.k_hat.get(i, c) * full[c];
            }
        }
        let mut x = rhs[self.free.clone()].to_vec();
        self.factor.solve_in_place(&mut x);
        full[self.free.clone()].copy_from_slice(&x);
        full
    }

    /// Backward Euler step whose surface flux depends on the (unknown)
    /// surface temperature. Iterates `T_s ← solve(q(T_s))[0]` until
    /// successive surface values differ by less than `tol`, relaxing once
    /// increments change sign.
    pub fn advance_nonlinear<F>(
        &self,
        previous: &[f64],
        mut flux_at: F,
        bottom: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<NonlinearStep, FemError>
    where
        F: FnMut(f64) -> Result<f64, FemError>,
    {
        assert_eq!(self.top, TopCondition::Flux, "nonlinear step needs a flux top");
        let storage = self.storage(previous);
        let mut guess = previous[0];
        let mut last_increment: Option<f64> = None;
        let mut relax = false;
        let mut history = Vec::new();
        for iteration in 1..=max_iter {
            let q = flux_at(guess)?;
            let nodes = self.advance_from_storage(&storage, q, bottom);
            let increment = nodes[0] - guess;
            history.push(nodes[0]);
            if !increment.is_finite() {
                break;
            }
            if increment.abs() < tol {
                return Ok(NonlinearStep {
                    nodes,
                    iterations: iteration,
                    increment,
                    flux: q,
                });
            }
            if last_increment.is_some_and(|p| p * increment < 0.0) {
                relax = true;
            }
            guess += if relax {
                OSCILLATION_RELAXATION * increment
            } else {
                increment
            };
            last_increment = Some(increment);
        }
        Err(FemError::NoConvergence {
            iterations: history.len(),
            history,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearStep {
    pub nodes: Vec<f64>,
    pub iterations: usize,
    /// Last surface increment, K.
    pub increment: f64,
    /// Surface flux used for the accepted solve, W/m².
    pub flux: f64,
}

/// Starting temperature field.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// Linear from the given surface temperature to the bottom temperature.
    Linear { surface: f64 },
    Uniform(f64),
    /// One value per node.
    Nodal(Vec<f64>),
}

impl InitialProfile {
    pub fn evaluate(&self, mesh: &Mesh1D, bottom: f64) -> Result<Vec<f64>, FemError> {
        let mut nodes = match self {
            Self::Linear { surface } => mesh
                .nodes()
                .iter()
                .map(|z| surface + (bottom - surface) * z / mesh.depth())
                .collect(),
            Self::Uniform(t) => vec![*t; mesh.node_count()],
            Self::Nodal(v) => {
                if v.len() != mesh.node_count() {
                    return Err(FemError::ProfileLength {
                        expected: mesh.node_count(),
                        found: v.len(),
                    });
                }
                v.clone()
            }
        };
        let last = nodes.len() - 1;
        nodes[last] = bottom;
        Ok(nodes)
    }
}

/// Fixed-point tolerance on the surface temperature, K.
pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_FIXED_POINT_ITER: usize = 50;
/// Matches a 5-minute weather cadence, s.
pub const DEFAULT_DT: f64 = 300.0;
pub const DEFAULT_ELEMENTS: usize = 50;
/// m
pub const DEFAULT_DEPTH: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub mesh: Mesh1D,
    pub dt: f64,
    /// Deep-soil temperature held at the bottom node, K.
    pub bottom_temperature: f64,
    pub initial_profile: InitialProfile,
    pub fixed_point_tol: f64,
    pub max_fixed_point_iter: usize,
}

impl SimulationConfig {
    /// Default settings for a weather series: bottom at the mean air
    /// temperature, linear initial profile from the first air temperature.
    pub fn for_weather(mesh: Mesh1D, dt: f64, weather: &WeatherSeries) -> Self {
        Self {
            mesh,
            dt,
            bottom_temperature: weather.mean_air_temperature(),
            initial_profile: InitialProfile::Linear {
                surface: weather.samples()[0].air_temperature,
            },
            fixed_point_tol: DEFAULT_FIXED_POINT_TOL,
            max_fixed_point_iter: DEFAULT_MAX_FIXED_POINT_ITER,
        }
    }

    fn validate(&self) -> Result<(), FemError> {
        if !(self.fixed_point_tol > 0.0) {
            return Err(FemError::Domain {
                name: "fixed_point_tol",
                value: self.fixed_point_tol,
                reason: "must be positive",
            });
        }
        if self.max_fixed_point_iter == 0 {
            return Err(FemError::Domain {
                name: "max_fixed_point_iter",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        check_envelope(&[self.bottom_temperature])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    /// s
    pub time: f64,
    /// K, surface first.
    pub nodes: Vec<f64>,
    /// K
    pub mulch: f64,
}

impl SimulationState {
    pub fn surface(&self) -> f64 {
        self.nodes[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    /// Last surface-temperature increment, K.
    pub surface_increment: f64,
    /// Film balance residual at the accepted state, W/m².
    pub mulch_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub states: Vec<SimulationState>,
    /// One entry per step; `diagnostics[i]` produced `states[i + 1]`.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl SimulationResult {
    pub fn surface_series(&self) -> Vec<f64> {
        self.states.iter().map(SimulationState::surface).collect()
    }

    pub fn max_surface(&self) -> f64 {
        self.states
            .iter()
            .map(SimulationState::surface)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_surface(&self) -> f64 {
        self.states.iter().map(SimulationState::surface).sum::<f64>() / self.states.len() as f64
    }
}

fn check_envelope(nodes: &[f64]) -> Result<(), FemError> {
    let (lo, hi) = SANITY_ENVELOPE;
    match nodes.iter().position(|&t| !(t > lo && t < hi)) {
        Some(node) => Err(FemError::Envelope {
            node,
            value: nodes[node],
        }),
        None => Ok(()),
    }
}

/// Film-covered soil column: the coupled nonlinear model.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimulationConfig,
    soil: SoilProperties,
    optics: MulchOptics,
    conv: ConvectionModel,
    balance: MulchBalance,
    conduction: TransientConduction,
}

impl Simulator {
    pub fn new(
        config: SimulationConfig,
        soil: SoilProperties,
        optics: MulchOptics,
        conv: ConvectionModel,
    ) -> Result<Self, FemError> {
        config.validate()?;
        let balance = MulchBalance::new(&optics, &soil, &conv)?;
        let conduction = TransientConduction::new(
            &config.mesh,
            &soil,
            config.dt,
            TopCondition::Flux,
            BottomCondition::Temperature,
        )?;
        Ok(Self {
            config,
            soil,
            optics,
            conv,
            balance,
            conduction,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    fn solve_mulch(
        &self,
        env: &BoundaryEnvironment,
        surface: f64,
        guess: f64,
    ) -> Result<f64, FemError> {
        Ok(self
            .balance
            .solve(env, surface, guess, physics::MULCH_TOL, physics::MULCH_MAX_ITER)?)
    }

    /// State at `time` from the configured initial profile, with the film
    /// in balance with the initial surface temperature.
    pub fn initial_state(
        &self,
        time: f64,
        env: &BoundaryEnvironment,
    ) -> Result<SimulationState, FemError> {
        let nodes = self
            .config
            .initial_profile
            .evaluate(&self.config.mesh, self.config.bottom_temperature)?;
        check_envelope(&nodes)?;
        let mulch = self.solve_mulch(env, nodes[0], env.air_temperature)?;
        Ok(SimulationState {
            time,
            nodes,
            mulch,
        })
    }

    /// Advances one step with the forcing sampled at the new time level.
    pub fn step(
        &self,
        state: &SimulationState,
        env_next: &BoundaryEnvironment,
    ) -> Result<(SimulationState, StepDiagnostics), FemError> {
        let mut mulch = state.mulch;
        let step = self.conduction.advance_nonlinear(
            &state.nodes,
            |surface| {
                check_envelope(&[surface])?;
                mulch = self.solve_mulch(env_next, surface, mulch)?;
                Ok(physics::surface_flux(
                    &self.optics,
                    &self.soil,
                    &self.conv,
                    env_next,
                    mulch,
                    surface,
                )?)
            },
            self.config.bottom_temperature,
            self.config.fixed_point_tol,
            self.config.max_fixed_point_iter,
        )?;
        check_envelope(&step.nodes)?;
        let mulch = self.solve_mulch(env_next, step.nodes[0], mulch)?;
        let mulch_residual = self.balance.residual(env_next, step.nodes[0], mulch)?;
        Ok((
            SimulationState {
                time: state.time + self.config.dt,
                nodes: step.nodes,
                mulch,
            },
            StepDiagnostics {
                iterations: step.iterations,
                surface_increment: step.increment,
                mulch_residual,
            },
        ))
    }

    /// Steps from the start of `weather` for as many whole `dt` as fit in
    /// the series.
    pub fn run(&self, weather: &WeatherSeries) -> Result<SimulationResult, FemError> {
        let t0 = weather.start();
        let span = weather.end() - t0;
        let n_steps = (span / self.config.dt + 1e-9).floor() as usize;
        let mut state = self.initial_state(t0, &weather.sample_at(t0)?)?;
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut diagnostics = Vec::with_capacity(n_steps);
        for index in 1..=n_steps {
            let time = t0 + index as f64 * self.config.dt;
            let annotate = |source: FemError| FemError::Step {
                index,
                time,
                source: Box::new(source),
            };
            let env = weather.sample_at(time.min(weather.end())).map_err(|e| annotate(e.into()))?;
            let (mut next, diag) = self.step(&state, &env).map_err(annotate)?;
            next.time = time;
            states.push(std::mem::replace(&mut state, next));
            diagnostics.push(diag);
        }
        states.push(state);
        Ok(SimulationResult {
            states,
            diagnostics,
        })
    }
}

/// Builds a [`Simulator`] and runs it over `weather`.
pub fn simulate(
    config: &SimulationConfig,
    soil: &SoilProperties,
    optics: &MulchOptics,
    conv: &ConvectionModel,
    weather: &WeatherSeries,
) -> Result<SimulationResult, FemError> {
    Simulator::new(config.clone(), *soil, *optics, *conv)?.run(weather)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeError {
    /// Mean of |sim − meas|/|meas| in Celsius.
    pub value: f64,
    /// Samples skipped because the measured value is 0 °C.
    pub excluded: usize,
}

/// Mean relative error of two Kelvin series, evaluated on Celsius values.
pub fn mean_relative_error(simulated: &[f64], measured: &[f64]) -> Result<RelativeError, FemError> {
    let to_c = |v: &[f64]| v.iter().map(|t| t - CELSIUS_OFFSET).collect::<Vec<_>>();
    mean_relative_error_celsius(&to_c(simulated), &to_c(measured))
}

/// Mean relative error of two Celsius series; 0 °C measurements are skipped.
pub fn mean_relative_error_celsius(simulated: &[f64], measured: &[f64]) -> Result<RelativeError, FemError> {
    if simulated.len() != measured.len() {
        return Err(FemError::LengthMismatch {
            simulated: simulated.len(),
            measured: measured.len(),
        });
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (s, m) in simulated.iter().zip(measured) {
        if m.abs() < 1e-12 {
            continue;
        }
        sum += (s - m).abs() / m.abs();
        used += 1;
    }
    Ok(RelativeError {
        value: if used == 0 { f64::NAN } else { sum / used as f64 },
        excluded: simulated.len() - used,
    })
}
