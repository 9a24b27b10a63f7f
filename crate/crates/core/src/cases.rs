//! Drivers for the configured cases: stepping loop, sampling, snapshots and
//! the final summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    centerline_profiles, count_components, equivalent_radius, interface_position, miller_scriven_both,
    oscillation_period, profile_error, velocity_residual, vortex_center, LambVariant, OscillationPrediction,
    OscillationTheory, ReferenceTable,
};
use crate::bench::glups;
use crate::config::{CaseKind, SimulationConfig};
use crate::error::{Error, Result};
use crate::fields::Dims;
use crate::io::{write_json, write_vtk, TimeSeries};
use crate::multicomponent::TwoFluidSolver;
use crate::real::{Precision, Real};
use crate::solver::{BodyForce, Macroscopic, Solver};

const GHIA_U: &str = include_str!("../data/ghia_re100_u.txt");
const GHIA_V: &str = include_str!("../data/ghia_re100_v.txt");
const GHIA_VORTEX: &str = include_str!("../data/ghia_re100_vortex.txt");

/// Re = 100 cavity reference: centerline tables and primary vortex center.
pub fn ghia_re100() -> (ReferenceTable, ReferenceTable, [f64; 2]) {
    let u = ReferenceTable::parse(GHIA_U).expect("bundled table");
    let v = ReferenceTable::parse(GHIA_V).expect("bundled table");
    let c = ReferenceTable::parse(GHIA_VORTEX).expect("bundled table");
    (u, v, [c.ordinates[0], c.values[0]])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observables {
    Cavity {
        reynolds: f64,
        steady: bool,
        residual: f64,
        /// Largest `|u/u_lid|` deviation at the reference ordinates.
        u_error: f64,
        v_error: f64,
        /// Normalized coordinates of the streamfunction extrema.
        vortex_centers: Vec<[f64; 2]>,
        /// Distance of the first center from the reference, in nodes.
        vortex_offset_nodes: f64,
    },
    DropletOscillation {
        equivalent_radius: f64,
        measured_period: Option<f64>,
        predictions: Vec<OscillationPrediction>,
        /// `|T_measured / T_theory - 1|` per prediction.
        relative_errors: Vec<f64>,
    },
    HeadOnImpact {
        weber: f64,
        components: usize,
        nci_flagged: usize,
    },
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub case: CaseKind,
    pub lattice: String,
    pub dims: [usize; 3],
    pub precision: Precision,
    pub workers: usize,
    pub steps: u64,
    pub seconds: f64,
    pub glups: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub mass_drift: f64,
    pub momentum_initial: [f64; 3],
    pub momentum_final: [f64; 3],
    /// `|P_final - P_initial| / M_initial`.
    pub momentum_drift: f64,
    pub state_hash: u64,
    pub observables: Observables,
}

pub struct CaseResult {
    pub summary: RunSummary,
    pub series: TimeSeries,
}

/// Runs a case and writes snapshots, `series.csv` and `summary.json` to the
/// configured output directory.
pub fn run_case(cfg: &SimulationConfig) -> Result<CaseResult> {
    execute(cfg, Some(&cfg.output_dir))
}

/// Runs a case; artifacts are written only when `out` is given.
pub fn execute(cfg: &SimulationConfig, out: Option<&Path>) -> Result<CaseResult> {
    let result = match (cfg.case.is_two_fluid(), cfg.precision) {
        (false, Precision::F32) => single_phase::<f32>(cfg, out),
        (false, Precision::F64) => single_phase::<f64>(cfg, out),
        (true, Precision::F32) => two_fluid::<f32>(cfg, out),
        (true, Precision::F64) => two_fluid::<f64>(cfg, out),
    }?;
    if let Some(dir) = out {
        result.series.write_csv(dir.join("series.csv"))?;
        write_json(dir.join("summary.json"), &result.summary)?;
    }
    Ok(result)
}

fn snapshot_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("fields_{step:08}.vtk"))
}

fn drift(m0: f64, m1: f64, p0: [f64; 3], p1: [f64; 3]) -> (f64, f64) {
    let dp = ((p1[0] - p0[0]).powi(2) + (p1[1] - p0[1]).powi(2) + (p1[2] - p0[2]).powi(2)).sqrt();
    ((m1 - m0).abs() / m0.abs(), dp / m0.abs())
}

/// Seeded uniform velocities in `[-noise, noise]` per node and axis, in node
/// order; empty when `noise` is zero.
fn random_velocities(cfg: &SimulationConfig) -> Vec<[f64; 3]> {
    if cfg.noise == 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.lattice.dim();
    (0..cfg.dims.nodes())
        .map(|_| {
            let mut u = [0.0; 3];
            for v in u.iter_mut().take(d) {
                *v = rng.gen_range(-cfg.noise..=cfg.noise);
            }
            u
        })
        .collect()
}

fn single_phase<T: Real>(cfg: &SimulationConfig, out: Option<&Path>) -> Result<CaseResult> {
    let params = cfg.collision()?;
    let workers = cfg.worker_count();
    let mut solver = Solver::<T>::new(cfg.lattice, cfg.dims, params, cfg.boundary_spec()?, workers)?;
    let kick = random_velocities(cfg);
    solver.initialize(|c| (cfg.rho0, kick.get(cfg.dims.index(c[0], c[1], c[2])).copied().unwrap_or([0.0; 3])));
    if cfg.force != [0.0; 3] {
        solver.set_body_force(BodyForce::Uniform(cfg.force.map(T::lit)));
    }
    let (m0, p0) = (solver.total_mass(), solver.total_momentum());
    let mut series = TimeSeries::new(&["step", "mass", "px", "py", "pz", "residual"]);
    let mut prev: Option<Macroscopic> = None;
    let mut residual = f64::INFINITY;
    let mut steady = false;
    let start = Instant::now();
    let mut step = 0;
    while step < cfg.steps {
        solver.step();
        step += 1;
        if cfg.output_every > 0 && step % cfg.output_every == 0 {
            if let Some(dir) = out {
                write_vtk(snapshot_path(dir, step), &solver.macroscopic(), None, &format!("step {step}"))?;
            }
        }
        if step % cfg.sample_every == 0 || step == cfg.steps {
            solver.check_finite()?;
            let m = solver.macroscopic();
            if let Some(p) = &prev {
                residual = velocity_residual(p, &m);
            }
            let p = solver.total_momentum();
            series.push(vec![step as f64, solver.total_mass(), p[0], p[1], p[2], residual]);
            prev = Some(m);
            if cfg.steady_tol > 0.0 && residual <= cfg.steady_tol {
                steady = true;
                log::info!("steady after {step} steps (residual {residual:.3e})");
                break;
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    solver.check_finite()?;
    let m = solver.macroscopic();
    if let Some(dir) = out {
        write_vtk(dir.join("fields_final.vtk"), &m, None, &format!("step {step}"))?;
    }
    let observables = match cfg.case {
        CaseKind::Cavity => cavity_observables(cfg, &m, residual, steady)?,
        _ => Observables::Custom,
    };
    let (m1, p1) = (solver.total_mass(), solver.total_momentum());
    let (mass_drift, momentum_drift) = drift(m0, m1, p0, p1);
    Ok(CaseResult {
        summary: RunSummary {
            case: cfg.case,
            lattice: cfg.lattice.to_string(),
            dims: cfg.dims.as_array(),
            precision: cfg.precision,
            workers,
            steps: step,
            seconds,
            glups: glups(cfg.dims, step, seconds).unwrap_or(0.0),
            mass_initial: m0,
            mass_final: m1,
            mass_drift,
            momentum_initial: p0,
            momentum_final: p1,
            momentum_drift,
            state_hash: solver.state_hash(),
            observables,
        },
        series,
    })
}

fn cavity_observables(cfg: &SimulationConfig, m: &Macroscopic, residual: f64, steady: bool) -> Result<Observables> {
    let (u_ref, v_ref, center) = ghia_re100();
    let p = centerline_profiles(m, cfg.u_lid);
    let nodes = vortex_center(m)?;
    let d = cfg.dims;
    let norm: Vec<[f64; 2]> = nodes
        .iter()
        .map(|c| [(c[0] + 0.5) / d.nx as f64, (c[1] + 0.5) / d.ny as f64])
        .collect();
    let offset = ((norm[0][0] - center[0]) * d.nx as f64).hypot((norm[0][1] - center[1]) * d.ny as f64);
    Ok(Observables::Cavity {
        reynolds: cfg.reynolds()?,
        steady,
        residual,
        u_error: profile_error(&p.y, &p.u, &u_ref),
        v_error: profile_error(&p.x, &p.v, &v_ref),
        vortex_centers: norm,
        vortex_offset_nodes: offset,
    })
}

fn center(dims: Dims) -> [f64; 3] {
    [dims.nx as f64 / 2.0, dims.ny as f64 / 2.0, dims.nz as f64 / 2.0]
}

/// Oblate ellipsoid of volume-equivalent radius `r` centered in the box,
/// short axis along y, `tanh` profile three nodes wide.
pub fn oblate_droplet(dims: Dims, r: f64, aspect: f64) -> impl Fn([usize; 3]) -> f64 {
    let s = aspect.cbrt();
    let (a, c) = (r * s, r / (s * s));
    let ctr = center(dims);
    let two_d = dims.nz == 1;
    move |x| {
        let dx = (x[0] as f64 - ctr[0]) / a;
        let dy = (x[1] as f64 - ctr[1]) / c;
        let dz = if two_d { 0.0 } else { (x[2] as f64 - ctr[2]) / a };
        let e = (dx * dx + dy * dy + dz * dz).sqrt();
        (2.0 * r * (1.0 - e) / 3.0).tanh()
    }
}

/// Phase field of one spherical droplet of radius `r` at `c`.
pub fn droplet(c: [f64; 3], r: f64, two_d: bool) -> impl Fn([usize; 3]) -> f64 {
    move |x| {
        let dz = if two_d { 0.0 } else { x[2] as f64 - c[2] };
        let d = ((x[0] as f64 - c[0]).powi(2) + (x[1] as f64 - c[1]).powi(2) + dz * dz).sqrt();
        (2.0 * (r - d) / 3.0).tanh()
    }
}

/// Centers of two droplets on the x axis through the box center, with the
/// given surface-to-surface gap.
pub fn pair_centers(dims: Dims, r: f64, gap: f64) -> [[f64; 3]; 2] {
    let c = center(dims);
    let half = r + 0.5 * gap;
    [[c[0] - half, c[1], c[2]], [c[0] + half, c[1], c[2]]]
}

/// Phase field and velocity of two droplets moving toward each other.
pub fn impact_state(
    dims: Dims,
    r: f64,
    gap: f64,
    speed: f64,
) -> (impl Fn([usize; 3]) -> f64, impl Fn([usize; 3]) -> [f64; 3]) {
    let [cl, cr] = pair_centers(dims, r, gap);
    let two_d = dims.nz == 1;
    let (left, right) = (droplet(cl, r, two_d), droplet(cr, r, two_d));
    let (left2, right2) = (droplet(cl, r, two_d), droplet(cr, r, two_d));
    let phi = move |x| left(x).max(right(x));
    let u = move |x| {
        let wl = 0.5 * (1.0 + left2(x));
        let wr = 0.5 * (1.0 + right2(x));
        [speed * (wl - wr), 0.0, 0.0]
    };
    (phi, u)
}

fn phi_of<T: Real>(solver: &mut TwoFluidSolver<T>) -> Vec<f64> {
    solver.phase_field().iter().map(|p| p.as_f64()).collect()
}

fn two_fluid<T: Real>(cfg: &SimulationConfig, out: Option<&Path>) -> Result<CaseResult> {
    let params = cfg.collision()?;
    let color = cfg
        .color
        .ok_or_else(|| Error::Config(format!("case {} needs color parameters", cfg.case.as_str())))?;
    let workers = cfg.worker_count();
    let boundary = cfg.boundary_spec()?;
    let periodic = [0, 1, 2].map(|a| boundary.is_periodic(a));
    let mut solver = TwoFluidSolver::<T>::new(cfg.lattice, cfg.dims, params, color, boundary, workers)?;
    let dims = cfg.dims;
    match cfg.case {
        CaseKind::DropletOscillation => solver.initialize_phase(oblate_droplet(dims, cfg.radius, cfg.aspect), |_| [0.0; 3]),
        _ => {
            let (phi, u) = impact_state(dims, cfg.radius, cfg.gap, cfg.impact_speed);
            solver.initialize_phase(phi, u);
        }
    }
    let mass = |s: &TwoFluidSolver<T>| {
        let (r, b) = s.color_masses();
        r + b
    };
    let (m0, p0) = (mass(&solver), solver.total_momentum());
    let mid = [dims.nx / 2, dims.ny / 2, dims.nz / 2];
    let mut series = TimeSeries::new(&["step", "mass_red", "mass_blue", "px", "py", "pz", "observable"]);
    let mut interface = Vec::new();
    let mut sample = |s: &mut TwoFluidSolver<T>, step: u64, series: &mut TimeSeries| -> Result<()> {
        s.check_finite()?;
        let phi = phi_of(s);
        let obs = match cfg.case {
            CaseKind::DropletOscillation => {
                let y = interface_position(&phi, dims, 1, mid).unwrap_or(f64::NAN);
                interface.push(y);
                y
            }
            _ => count_components(&phi, dims, 0.0, periodic) as f64,
        };
        let (r, b) = s.color_masses();
        let p = s.total_momentum();
        series.push(vec![step as f64, r, b, p[0], p[1], p[2], obs]);
        Ok(())
    };
    sample(&mut solver, 0, &mut series)?;
    let start = Instant::now();
    for step in 1..=cfg.steps {
        solver.step();
        if cfg.output_every > 0 && step % cfg.output_every == 0 {
            if let Some(dir) = out {
                let (m, phi) = solver.macroscopic();
                write_vtk(snapshot_path(dir, step), &m, Some(&phi), &format!("step {step}"))?;
            }
        }
        if step % cfg.sample_every == 0 || step == cfg.steps {
            sample(&mut solver, step, &mut series)?;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    solver.check_finite()?;
    let (m, phi) = solver.macroscopic();
    if let Some(dir) = out {
        write_vtk(dir.join("fields_final.vtk"), &m, Some(&phi), &format!("step {}", cfg.steps))?;
    }
    let observables = match cfg.case {
        CaseKind::DropletOscillation => {
            let theory = OscillationTheory::matched(2, color.sigma, cfg.radius, cfg.rho0, params.viscosity());
            let predictions = miller_scriven_both(&theory)?.to_vec();
            let measured = oscillation_period(&interface, cfg.sample_every as f64);
            let relative_errors = predictions
                .iter()
                .map(|p| measured.map_or(f64::NAN, |t| (t / p.period - 1.0).abs()))
                .collect();
            Observables::DropletOscillation {
                equivalent_radius: equivalent_radius(&phi, cfg.lattice.dim()),
                measured_period: measured,
                predictions,
                relative_errors,
            }
        }
        _ => Observables::HeadOnImpact {
            weber: cfg.rho0 * (2.0 * cfg.impact_speed).powi(2) * 2.0 * cfg.radius / color.sigma,
            components: count_components(&phi, dims, 0.0, periodic),
            nci_flagged: solver.nci_flagged().len(),
        },
    };
    let (m1, p1) = (mass(&solver), solver.total_momentum());
    let (mass_drift, momentum_drift) = drift(m0, m1, p0, p1);
    Ok(CaseResult {
        summary: RunSummary {
            case: cfg.case,
            lattice: cfg.lattice.to_string(),
            dims: dims.as_array(),
            precision: cfg.precision,
            workers,
            steps: cfg.steps,
            seconds,
            glups: glups(dims, cfg.steps, seconds).unwrap_or(0.0),
            mass_initial: m0,
            mass_final: m1,
            mass_drift,
            momentum_initial: p0,
            momentum_final: p1,
            momentum_drift,
            state_hash: solver.state_hash(),
            observables,
        },
        series,
    })
}

/// Pass/fail of a run against the desk-scale tolerances, with a one-line
/// explanation.
pub fn verdict(obs: &Observables, nci_enabled: bool) -> (bool, String) {
    match obs {
        Observables::Cavity {
            u_error,
            v_error,
            vortex_offset_nodes,
            ..
        } => (
            *u_error <= 0.05 && *v_error <= 0.05 && *vortex_offset_nodes <= 2.0,
            format!(
                "max |du|/u_lid = {u_error:.4}, max |dv|/u_lid = {v_error:.4} (limit 0.05), vortex offset {vortex_offset_nodes:.2} nodes (limit 2)"
            ),
        ),
        Observables::DropletOscillation {
            measured_period,
            predictions,
            relative_errors,
            ..
        } => {
            let printed = predictions.iter().position(|p| p.variant == LambVariant::AsPrinted);
            let err = printed.map_or(f64::NAN, |i| relative_errors[i]);
            let theory: Vec<String> = predictions
                .iter()
                .map(|p| format!("{:?} {:.1}", p.variant, p.period))
                .collect();
            (
                err <= 0.10,
                format!(
                    "measured period {}, theory {}, error vs as-printed {:.2}% (limit 10%)",
                    measured_period.map_or("none".into(), |t| format!("{t:.1}")),
                    theory.join(", "),
                    100.0 * err
                ),
            )
        }
        Observables::HeadOnImpact { components, weber, .. } => {
            let want = if nci_enabled { 2 } else { 1 };
            (
                *components == want,
                format!("We = {weber:.2}, {components} droplet(s) at the end (expected {want})"),
            )
        }
        Observables::Custom => (true, "no case observables".into()),
    }
}

/// Desk-scale configurations of the built-in cases.
pub fn preset(name: &str) -> Result<SimulationConfig> {
    let text = match name {
        "cavity" => CAVITY_PRESET,
        "droplet-oscillation" => OSCILLATION_PRESET,
        "head-on-impact" => IMPACT_PRESET,
        other => {
            return Err(Error::Config(format!(
                "no preset named '{other}' (expected cavity, droplet-oscillation or head-on-impact)"
            )))
        }
    };
    SimulationConfig::parse(text)
}

pub const CAVITY_PRESET: &str = "\
lattice = d2q9
dims = 128,128
nu = 0.064
case = cavity
u_lid = 0.05
steps = 100000
sample_every = 500
steady_tol = 5e-9
";

pub const OSCILLATION_PRESET: &str = "\
lattice = d3q19
dims = 96,96,96
nu = 0.0333333333333333
case = droplet-oscillation
precision = f32
sigma = 0.03
radius = 16
aspect = 1.2
steps = 2600
sample_every = 10
";

pub const IMPACT_PRESET: &str = "\
lattice = d3q19
dims = 96,64,64
nu = 0.0333333333333333
case = head-on-impact
precision = f32
sigma = 0.03
radius = 14
gap = 6
impact_speed = 0.0505
nci_strength = 0.1
eps_bulk = 0.2
steps = 2000
sample_every = 100
";
