//! Finite element solver against closed-form and dense reference solutions.

use mulchtherm::fem::{
    assemble, BottomCondition, InitialProfile, SimulationConfig, Simulator, TopCondition,
    TransientConduction,
};
use mulchtherm::oracle::{steady_linear_profile, DIURNAL_PERIOD};
use mulchtherm::physics::BoundaryEnvironment;
use mulchtherm::weather::{synthesize_clear_day, WeatherSample};
use mulchtherm::{
    ClearDay, ConvectionModel, Mesh1D, MulchOptics, PeriodicHalfspace, SoilProperties,
    WeatherSeries,
};
use nalgebra::{DMatrix, DVector};

fn soil() -> SoilProperties {
    SoilProperties::default()
}

fn halfspace() -> PeriodicHalfspace {
    PeriodicHalfspace::for_soil(&soil(), DIURNAL_PERIOD, 288.0, 10.0).unwrap()
}

/// Runs the Dirichlet-driven periodic problem from the exact profile at
/// t = 0 for `duration` seconds and returns the final nodal error vector.
fn periodic_error(n_elements: usize, depth: f64, dt: f64, duration: f64) -> Vec<f64> {
    let p = halfspace();
    let mesh = Mesh1D::uniform(depth, n_elements).unwrap();
    let solver = TransientConduction::new(
        &mesh,
        &soil(),
        dt,
        TopCondition::Temperature,
        BottomCondition::Temperature,
    )
    .unwrap();
    let mut nodes: Vec<f64> = mesh.nodes().iter().map(|&z| p.temperature(z, 0.0)).collect();
    let steps = (duration / dt).round() as usize;
    for i in 1..=steps {
        let t = i as f64 * dt;
        nodes = solver.advance(&nodes, p.temperature(0.0, t), p.temperature(depth, t));
    }
    let t_end = steps as f64 * dt;
    mesh.nodes()
        .iter()
        .zip(&nodes)
        .map(|(&z, &v)| v - p.temperature(z, t_end))
        .collect()
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt()
}

#[test]
fn steady_flux_matches_linear_profile() {
    let mesh = Mesh1D::uniform(1.0, 10).unwrap();
    let s = soil();
    let solver = TransientConduction::new(&mesh, &s, 1e9, TopCondition::Flux, BottomCondition::Temperature)
        .unwrap();
    let mut nodes = vec![290.0; mesh.node_count()];
    for _ in 0..20 {
        nodes = solver.advance(&nodes, 22.0, 290.0);
    }
    for (&z, &t) in mesh.nodes().iter().zip(&nodes) {
        let exact = steady_linear_profile(s.conductivity, 22.0, 290.0, 1.0, z);
        assert!(((t - exact) / exact).abs() < 1e-8, "z = {z}: {t} vs {exact}");
    }
}

#[test]
fn linear_step_matches_dense_solve() {
    let mesh = Mesh1D::uniform(0.5, 5).unwrap();
    let s = soil();
    let dt = 300.0;
    let q = 150.0;
    let t_bottom = 286.0;
    let solver = TransientConduction::new(&mesh, &s, dt, TopCondition::Flux, BottomCondition::Temperature)
        .unwrap();
    let prev: Vec<f64> = mesh.nodes().iter().map(|z| 295.0 - 18.0 * z).collect();
    let banded = solver.advance(&prev, q, t_bottom);

    // Dense reference: replace the last equation by T_n = T_bottom.
    let (c, k) = assemble(&mesh, &s).unwrap();
    let n = mesh.node_count();
    let c = DMatrix::from_fn(n, n, |i, j| c.get(i, j));
    let k = DMatrix::from_fn(n, n, |i, j| k.get(i, j));
    let mut a = &c + &k * dt;
    let mut b = &c * DVector::from_vec(prev.clone());
    b[0] += dt * q;
    for j in 0..n {
        a[(n - 1, j)] = 0.0;
    }
    a[(n - 1, n - 1)] = 1.0;
    b[n - 1] = t_bottom;
    let dense = a.lu().solve(&b).unwrap();
    for i in 0..n {
        assert!((banded[i] - dense[i]).abs() < 1e-10, "node {i}");
    }
}

#[test]
fn temporal_order_is_first() {
    let errors: Vec<f64> = [1200.0, 600.0, 300.0]
        .iter()
        .map(|&dt| rms(&periodic_error(50, 0.75, dt, DIURNAL_PERIOD)))
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 1.0).abs() < 0.15, "temporal order {order} from {errors:?}");
    }
}

#[test]
fn spatial_order_at_least_two_and_a_half() {
    let errors: Vec<f64> = [2usize, 4, 8]
        .iter()
        .map(|&n| rms(&periodic_error(n, 0.75, 2.0, 0.25 * DIURNAL_PERIOD)))
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 2.5, "spatial order {order} from {errors:?}");
    }
}

#[test]
fn insulated_column_conserves_heat() {
    let mesh = Mesh1D::uniform(1.0, 20).unwrap();
    let solver = TransientConduction::new(&mesh, &soil(), 600.0, TopCondition::Flux, BottomCondition::Insulated)
        .unwrap();
    let ones = vec![1.0; mesh.node_count()];
    let mass: f64 = solver.storage(&ones).iter().sum();
    let weighted = |t: &[f64]| solver.storage(t).iter().sum::<f64>() / mass;
    let mut nodes: Vec<f64> = mesh.nodes().iter().map(|z| 280.0 + 30.0 * (-6.0 * z).exp()).collect();
    let initial = weighted(&nodes);
    for _ in 0..1000 {
        nodes = solver.advance(&nodes, 0.0, f64::NAN);
        assert!((weighted(&nodes) - initial).abs() < 1e-8);
    }
}

#[test]
fn convective_surface_respects_maximum_principle() {
    let mesh = Mesh1D::uniform(1.0, 50).unwrap();
    let solver = TransientConduction::new(&mesh, &soil(), 300.0, TopCondition::Flux, BottomCondition::Temperature)
        .unwrap();
    let t_bottom = 287.0;
    let mut nodes = InitialProfile::Linear { surface: 283.0 }.evaluate(&mesh, t_bottom).unwrap();
    let mut running_max = nodes.iter().cloned().fold(f64::MIN, f64::max);
    for i in 1..=288 {
        let t = i as f64 * 300.0;
        let air = 287.0 + 8.0 * (2.0 * std::f64::consts::PI * t / DIURNAL_PERIOD).sin();
        running_max = running_max.max(air);
        let step = solver
            .advance_nonlinear(&nodes, |ts| Ok(15.0 * (air - ts)), t_bottom, 1e-9, 100)
            .unwrap();
        nodes = step.nodes;
        for &v in &nodes[1..] {
            assert!(v <= running_max + 1e-6, "{v} exceeds {running_max}");
        }
    }
}

fn equilibrium_weather(steps: usize, temperature: f64) -> WeatherSeries {
    WeatherSeries::new(
        (0..=steps)
            .map(|i| WeatherSample {
                t: i as f64 * 300.0,
                solar: 0.0,
                air_temperature: temperature,
                wind_speed: 0.0,
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn equilibrium_is_a_fixed_point() {
    // Above ~329.7 K the sky is black, so an opaque black film at air
    // temperature exchanges nothing with soil or sky.
    let temperature = 335.0;
    let weather = equilibrium_weather(100, temperature);
    let mesh = Mesh1D::uniform(1.0, 50).unwrap();
    let mut config = SimulationConfig::for_weather(mesh, 300.0, &weather);
    config.initial_profile = InitialProfile::Uniform(temperature);
    let optics = MulchOptics::with_emissivity(0.0, 0.0, 0.0, 0.0, 1.0).unwrap();
    let sim = Simulator::new(config, soil(), optics, ConvectionModel::default()).unwrap();
    let result = sim.run(&weather).unwrap();
    assert_eq!(result.states.len(), 101);
    for state in &result.states {
        assert!((state.mulch - temperature).abs() < 1e-6);
        for &t in &state.nodes {
            assert!((t - temperature).abs() < 1e-8);
        }
    }
}

#[test]
fn zero_length_run_returns_initial_state() {
    let weather = equilibrium_weather(0, 290.0);
    let mesh = Mesh1D::uniform(1.0, 5).unwrap();
    let config = SimulationConfig::for_weather(mesh, 300.0, &weather);
    let result = mulchtherm::simulate(&config, &soil(), &MulchOptics::ldpe(), &ConvectionModel::default(), &weather)
        .unwrap();
    assert_eq!(result.states.len(), 1);
    assert!(result.diagnostics.is_empty());
}

#[test]
fn clear_day_run_is_well_behaved_and_deterministic() {
    let weather = synthesize_clear_day(&ClearDay::default()).unwrap();
    let mesh = Mesh1D::uniform(1.0, 50).unwrap();
    let config = SimulationConfig::for_weather(mesh, 300.0, &weather);
    let sim = Simulator::new(config.clone(), soil(), MulchOptics::ldpe(), ConvectionModel::default())
        .unwrap();
    let a = sim.run(&weather).unwrap();
    let b = sim.run(&weather).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.states.len(), weather.len());
    let max_iter = a.diagnostics.iter().map(|d| d.iterations).max().unwrap();
    assert!(max_iter <= 20, "max fixed-point iterations {max_iter}");
    for (i, s) in a.states.iter().enumerate() {
        assert_eq!(*s.nodes.last().unwrap(), config.bottom_temperature);
        assert_eq!(s.time, i as f64 * 300.0);
    }
    for d in &a.diagnostics {
        assert!(d.mulch_residual.abs() < 1e-3);
    }
    // The film warms the surface well above the air on a sunny day.
    assert!(a.max_surface() > 293.0 + 5.0, "max surface {}", a.max_surface());
}

#[test]
fn step_satisfies_discrete_system_and_film_balance() {
    let weather = synthesize_clear_day(&ClearDay::default()).unwrap();
    let mesh = Mesh1D::uniform(1.0, 20).unwrap();
    let config = SimulationConfig::for_weather(mesh.clone(), 300.0, &weather);
    let s = soil();
    let optics = MulchOptics::ldpe();
    let conv = ConvectionModel::default();
    let sim = Simulator::new(config.clone(), s, optics, conv).unwrap();
    let env0 = weather.sample_at(36_000.0).unwrap();
    let state = sim.initial_state(36_000.0, &env0).unwrap();
    let env = BoundaryEnvironment { solar: 850.0, ..env0 };
    let (next, diag) = sim.step(&state, &env).unwrap();
    assert!(diag.iterations >= 2);

    // (a) K̂ T¹ = C T⁰ + Δt F(T¹) in all unconstrained rows.
    let (c, k) = assemble(&mesh, &s).unwrap();
    let k_hat = c.scaled_add(config.dt, &k);
    let lhs = k_hat.mul_vec(&next.nodes);
    let mut rhs = c.mul_vec(&state.nodes);
    let q = mulchtherm::physics::surface_flux(&optics, &s, &conv, &env, next.mulch, next.nodes[0]).unwrap();
    rhs[0] += config.dt * q;
    let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for i in 0..mesh.node_count() - 1 {
        // Residual tolerance reflects the 1e-6 K surface fixed-point tolerance.
        assert!((lhs[i] - rhs[i]).abs() < 1e-6 * config.dt * 20.0 + 1e-12 * scale, "row {i}");
    }
    // (b) film balance.
    let r = mulchtherm::physics::mulch_balance_residual(&optics, &s, &conv, &env, next.nodes[0], next.mulch).unwrap();
    assert!(r.abs() < 1e-3);
}
