//! Plain-text `key = value` run configuration.
//!
//! Every problem in a file is reported at once, each with its line number.
//! [`SimulationConfig::to_text`] writes every key explicitly so that parsing
//! the output gives back the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::bench::MachineModel;
use crate::boundary::BoundarySpec;
use crate::collision::{omega_from_tau_or_nu, CollisionParams, Relaxation};
use crate::error::{Error, Result};
use crate::fields::Dims;
use crate::lattice::LatticeKind;
use crate::multicomponent::{ColorParams, PerturbationForm};
use crate::real::Precision;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    Cavity,
    DropletOscillation,
    HeadOnImpact,
    Custom,
}

impl CaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseKind::Cavity => "cavity",
            CaseKind::DropletOscillation => "droplet-oscillation",
            CaseKind::HeadOnImpact => "head-on-impact",
            CaseKind::Custom => "custom",
        }
    }

    pub fn is_two_fluid(self) -> bool {
        matches!(self, CaseKind::DropletOscillation | CaseKind::HeadOnImpact)
    }
}

impl std::str::FromStr for CaseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cavity" => Ok(CaseKind::Cavity),
            "droplet-oscillation" => Ok(CaseKind::DropletOscillation),
            "head-on-impact" => Ok(CaseKind::HeadOnImpact),
            "custom" => Ok(CaseKind::Custom),
            other => Err(format!(
                "unknown case '{other}' (expected cavity, droplet-oscillation, head-on-impact or custom)"
            )),
        }
    }
}

/// Face layout of the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPreset {
    Periodic,
    /// No-slip walls on every face of the active axes.
    Closed,
    /// Closed box with the `ymax` wall moving at `u_lid` along x.
    Lid,
    /// Walls at `ymin`/`ymax`, periodic elsewhere; `ymax` moves at `u_lid`.
    Channel,
}

impl BoundaryPreset {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryPreset::Periodic => "periodic",
            BoundaryPreset::Closed => "closed",
            BoundaryPreset::Lid => "lid",
            BoundaryPreset::Channel => "channel",
        }
    }
}

impl std::str::FromStr for BoundaryPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(BoundaryPreset::Periodic),
            "closed" => Ok(BoundaryPreset::Closed),
            "lid" => Ok(BoundaryPreset::Lid),
            "channel" => Ok(BoundaryPreset::Channel),
            other => Err(format!("unknown boundary '{other}' (expected periodic, closed, lid or channel)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub lattice: LatticeKind,
    pub dims: Dims,
    pub relaxation: Relaxation,
    pub rho0: f64,
    pub precision: Precision,
    pub case: CaseKind,
    pub boundary: BoundaryPreset,
    pub u_lid: f64,
    /// Solid mask file, see [`crate::boundary::parse_mask`].
    pub mask: Option<PathBuf>,
    pub force: [f64; 3],
    /// Present for two-fluid runs.
    pub color: Option<ColorParams>,
    /// Droplet radius, lattice units.
    pub radius: f64,
    /// Initial ratio of the long to the short droplet axis.
    pub aspect: f64,
    /// Surface-to-surface gap between the impacting droplets.
    pub gap: f64,
    /// Speed of each impacting droplet toward the other.
    pub impact_speed: f64,
    /// Amplitude of the uniform random velocity added to the initial state
    /// of single-component runs.
    pub noise: f64,
    /// Seed of that perturbation.
    pub seed: u64,
    pub steps: u64,
    /// Overridden by `TSLB_WORKERS`; `None` uses the machine's parallelism.
    pub workers: Option<usize>,
    /// Field snapshot interval; zero writes only the final state.
    pub output_every: u64,
    /// Time-series sampling interval.
    pub sample_every: u64,
    pub output_dir: PathBuf,
    /// Steady-state residual for early termination; zero runs all steps.
    pub steady_tol: f64,
    pub bench_workers: Vec<usize>,
    pub warmup: u64,
    pub machine: Option<MachineModel>,
}

/// Keys without a default.
pub const REQUIRED_KEYS: [&str; 4] = ["lattice", "dims", "omega | tau | nu", "case"];

const KNOWN_KEYS: &[&str] = &[
    "lattice",
    "dims",
    "omega",
    "tau",
    "nu",
    "rho0",
    "precision",
    "case",
    "boundary",
    "u_lid",
    "mask",
    "force",
    "sigma",
    "beta",
    "nci_strength",
    "eps_bulk",
    "scan_reach",
    "perturbation",
    "radius",
    "aspect",
    "gap",
    "impact_speed",
    "noise",
    "seed",
    "steps",
    "workers",
    "output_every",
    "sample_every",
    "output_dir",
    "steady_tol",
    "bench_workers",
    "warmup",
    "machine_pi",
    "machine_beta",
];

const COLOR_KEYS: &[&str] = &["sigma", "beta", "nci_strength", "eps_bulk", "scan_reach", "perturbation"];

struct Entries {
    map: BTreeMap<&'static str, (usize, String)>,
    errors: Vec<String>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn get<V: std::str::FromStr>(&mut self, key: &str, default: V) -> V
    where
        V::Err: std::fmt::Display,
    {
        self.opt(key).unwrap_or(default)
    }

    fn opt<V: std::str::FromStr>(&mut self, key: &str) -> Option<V>
    where
        V::Err: std::fmt::Display,
    {
        let (line, text) = self.raw(key)?;
        match text.parse::<V>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("line {line}: {key}: cannot parse '{text}': {e}"));
                None
            }
        }
    }

    fn list<V: std::str::FromStr>(&mut self, key: &str) -> Option<Vec<V>>
    where
        V::Err: std::fmt::Display,
    {
        let (line, text) = self.raw(key)?;
        let mut out = Vec::new();
        for part in text.split(',') {
            match part.trim().parse::<V>() {
                Ok(v) => out.push(v),
                Err(e) => {
                    self.errors.push(format!("line {line}: {key}: cannot parse '{}': {e}", part.trim()));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn check(&mut self, key: &str, ok: bool, what: &str) {
        if !ok {
            let line = self.raw(key).map_or(0, |(l, _)| l);
            self.errors.push(format!("line {line}: {key} {what}"));
        }
    }
}

impl SimulationConfig {
    /// Parses a configuration, reporting every error found.
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries {
            map: BTreeMap::new(),
            errors: Vec::new(),
        };
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                e.errors.push(format!("line {line}: expected key = value, got '{content}'"));
                continue;
            };
            let key = key.trim();
            let Some(&known) = KNOWN_KEYS.iter().find(|k| **k == key) else {
                e.errors.push(format!("line {line}: unknown key '{key}'"));
                continue;
            };
            if let Some((first, _)) = e.map.get(known) {
                e.errors.push(format!("line {line}: duplicate key '{key}' (first set on line {first})"));
                continue;
            }
            e.map.insert(known, (line, value.trim().to_string()));
        }

        if e.map.is_empty() && e.errors.is_empty() {
            return Err(Error::ConfigErrors(
                REQUIRED_KEYS.iter().map(|k| format!("missing required key '{k}'")).collect(),
            ));
        }

        let lattice: Option<LatticeKind> = e.opt("lattice");
        let case: Option<CaseKind> = e.opt("case");
        for key in ["lattice", "dims", "case"] {
            if e.raw(key).is_none() {
                e.errors.push(format!("missing required key '{key}'"));
            }
        }

        let relax_keys: Vec<(&str, usize)> = ["omega", "tau", "nu"]
            .iter()
            .filter_map(|k| e.raw(k).map(|(l, _)| (*k, l)))
            .collect();
        let relaxation = match relax_keys.as_slice() {
            [] => {
                e.errors.push("missing required key 'omega | tau | nu'".into());
                None
            }
            [(key, _)] => e.opt::<f64>(key).map(|v| match *key {
                "omega" => Relaxation::Omega(v),
                "tau" => Relaxation::Tau(v),
                _ => Relaxation::Nu(v),
            }),
            many => {
                let names: Vec<String> = many.iter().map(|(k, l)| format!("'{k}' (line {l})")).collect();
                e.errors.push(format!("conflicting relaxation settings: {}", names.join(", ")));
                None
            }
        };
        if let Some(r) = relaxation {
            if let Err(err) = omega_from_tau_or_nu(r) {
                let line = relax_keys.first().map_or(0, |p| p.1);
                e.errors.push(format!("line {line}: {err}"));
            }
        }

        let dims = e.list::<usize>("dims").and_then(|v| {
            let line = e.raw("dims").map_or(0, |p| p.0);
            match (v.as_slice(), lattice) {
                ([nx, ny], _) => Some(Dims::new(*nx, *ny, 1)),
                ([nx, ny, nz], _) => Some(Dims::new(*nx, *ny, *nz)),
                _ => {
                    e.errors.push(format!("line {line}: dims needs two or three extents"));
                    None
                }
            }
        });
        if let (Some(d), Some(kind)) = (dims, lattice) {
            if let Err(err) = d.validate(kind) {
                let line = e.raw("dims").map_or(0, |p| p.0);
                e.errors.push(format!("line {line}: {err}"));
            }
        }

        let rho0 = e.get("rho0", 1.0);
        e.check("rho0", rho0 > 0.0, "must be positive");
        let precision = match e.raw("precision").map(|(l, v)| (l, v.to_string())) {
            None => Precision::F64,
            Some((_, v)) if v == "f32" || v == "single" => Precision::F32,
            Some((_, v)) if v == "f64" || v == "double" => Precision::F64,
            Some((line, other)) => {
                e.errors.push(format!("line {line}: precision '{other}' is not f32 or f64"));
                Precision::F64
            }
        };

        let default_boundary = match case {
            Some(CaseKind::Cavity) => BoundaryPreset::Lid,
            _ => BoundaryPreset::Periodic,
        };
        let boundary = e.get("boundary", default_boundary);
        let u_lid = e.get("u_lid", 0.0);
        if case == Some(CaseKind::Cavity) && e.raw("u_lid").is_none() {
            e.errors.push("missing key 'u_lid' for the cavity case".into());
        }
        let mask = e.raw("mask").map(|(_, v)| PathBuf::from(v));
        let force = match e.list::<f64>("force") {
            None => [0.0; 3],
            Some(v) if v.len() == 2 => [v[0], v[1], 0.0],
            Some(v) if v.len() == 3 => [v[0], v[1], v[2]],
            Some(_) => {
                e.check("force", false, "needs two or three components");
                [0.0; 3]
            }
        };

        let wants_color = case.is_some_and(CaseKind::is_two_fluid) || COLOR_KEYS.iter().any(|k| e.raw(k).is_some());
        let color = wants_color.then(|| {
            let d = ColorParams::default();
            let form = match e.raw("perturbation").map(|(l, v)| (l, v.to_string())) {
                None => PerturbationForm::Squared,
                Some((_, v)) if v == "squared" => PerturbationForm::Squared,
                Some((_, v)) if v == "linear" => PerturbationForm::Linear,
                Some((line, other)) => {
                    e.errors.push(format!("line {line}: perturbation '{other}' is not squared or linear"));
                    PerturbationForm::Squared
                }
            };
            let c = ColorParams {
                sigma: e.get("sigma", d.sigma),
                beta: e.get("beta", d.beta),
                nci_strength: e.get("nci_strength", d.nci_strength),
                eps_bulk: e.get("eps_bulk", d.eps_bulk),
                scan_reach: e.get("scan_reach", d.scan_reach),
                form,
            };
            match c.validate() {
                Err(Error::ConfigErrors(list)) => e.errors.extend(list),
                Err(err) => e.errors.push(err.to_string()),
                Ok(()) => {}
            }
            c
        });

        let radius = e.get("radius", 16.0);
        let aspect = e.get("aspect", 1.2);
        let gap = e.get("gap", 4.0);
        let impact_speed = e.get("impact_speed", 0.0);
        e.check("radius", radius > 0.0, "must be positive");
        e.check("aspect", aspect >= 1.0, "must be at least 1");
        e.check("gap", gap >= 0.0, "must be non-negative");

        let noise = e.get("noise", 0.0);
        e.check("noise", noise >= 0.0, "must be non-negative");
        let seed = e.get("seed", 0u64);

        let steps = e.get("steps", 1000u64);
        let workers: Option<usize> = e.opt("workers");
        e.check("workers", workers != Some(0), "must be at least 1");
        let output_every = e.get("output_every", 0u64);
        let sample_every = e.get("sample_every", 10u64);
        e.check("sample_every", sample_every >= 1, "must be at least 1");
        let output_dir = e.raw("output_dir").map_or_else(|| PathBuf::from("output"), |(_, v)| PathBuf::from(v));
        let steady_tol = e.get("steady_tol", 0.0);
        e.check("steady_tol", steady_tol >= 0.0, "must be non-negative");
        let bench_workers = e.list::<usize>("bench_workers").unwrap_or_else(|| vec![1]);
        e.check("bench_workers", bench_workers.iter().all(|&w| w > 0), "entries must be at least 1");
        let warmup = e.get("warmup", 2u64);
        let machine = match (e.opt::<f64>("machine_pi"), e.opt::<f64>("machine_beta")) {
            (Some(pi), Some(beta)) => match MachineModel::new(pi, beta) {
                Ok(m) => Some(m),
                Err(err) => {
                    e.errors.push(err.to_string());
                    None
                }
            },
            (None, None) => None,
            _ => {
                e.errors.push("machine_pi and machine_beta must be given together".into());
                None
            }
        };

        if !e.errors.is_empty() {
            return Err(Error::ConfigErrors(e.errors));
        }
        let (Some(lattice), Some(dims), Some(relaxation), Some(case)) = (lattice, dims, relaxation, case) else {
            unreachable!("missing keys are reported above");
        };
        Ok(Self {
            lattice,
            dims,
            relaxation,
            rho0,
            precision,
            case,
            boundary,
            u_lid,
            mask,
            force,
            color,
            radius,
            aspect,
            gap,
            impact_speed,
            noise,
            seed,
            steps,
            workers,
            output_every,
            sample_every,
            output_dir,
            steady_tol,
            bench_workers,
            warmup,
            machine,
        })
    }

    /// Reads a configuration file; a relative mask path is taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(mask), Some(dir)) = (&cfg.mask, path.parent()) {
            if mask.is_relative() {
                cfg.mask = Some(dir.join(mask));
            }
        }
        Ok(cfg)
    }

    /// Every setting as `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("lattice", self.lattice.as_str().into());
        let d = self.dims;
        put("dims", format!("{},{},{}", d.nx, d.ny, d.nz));
        match self.relaxation {
            Relaxation::Omega(v) => put("omega", v.to_string()),
            Relaxation::Tau(v) => put("tau", v.to_string()),
            Relaxation::Nu(v) => put("nu", v.to_string()),
        }
        put("rho0", self.rho0.to_string());
        put("precision", self.precision.as_str().into());
        put("case", self.case.as_str().into());
        put("boundary", self.boundary.as_str().into());
        put("u_lid", self.u_lid.to_string());
        if let Some(m) = &self.mask {
            put("mask", m.display().to_string());
        }
        put("force", self.force.map(|v| v.to_string()).join(","));
        if let Some(c) = &self.color {
            put("sigma", c.sigma.to_string());
            put("beta", c.beta.to_string());
            put("nci_strength", c.nci_strength.to_string());
            put("eps_bulk", c.eps_bulk.to_string());
            put("scan_reach", c.scan_reach.to_string());
            let form = match c.form {
                PerturbationForm::Squared => "squared",
                PerturbationForm::Linear => "linear",
            };
            put("perturbation", form.into());
        }
        put("radius", self.radius.to_string());
        put("aspect", self.aspect.to_string());
        put("gap", self.gap.to_string());
        put("impact_speed", self.impact_speed.to_string());
        put("noise", self.noise.to_string());
        put("seed", self.seed.to_string());
        put("steps", self.steps.to_string());
        if let Some(w) = self.workers {
            put("workers", w.to_string());
        }
        put("output_every", self.output_every.to_string());
        put("sample_every", self.sample_every.to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("steady_tol", self.steady_tol.to_string());
        put("bench_workers", self.bench_workers.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","));
        put("warmup", self.warmup.to_string());
        if let Some(m) = &self.machine {
            put("machine_pi", m.pi.to_string());
            put("machine_beta", m.beta_bw.to_string());
        }
        s
    }

    pub fn collision(&self) -> Result<CollisionParams> {
        CollisionParams::from_relaxation(self.relaxation, self.rho0)
    }

    pub fn viscosity(&self) -> Result<f64> {
        Ok(self.collision()?.viscosity())
    }

    /// `u_lid nx / nu`.
    pub fn reynolds(&self) -> Result<f64> {
        Ok(self.u_lid * self.dims.nx as f64 / self.viscosity()?)
    }

    /// `TSLB_WORKERS` when set, else the configured count, else the
    /// machine's parallelism.
    pub fn worker_count(&self) -> usize {
        let env = std::env::var(crate::solver::WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0);
        env.or(self.workers).unwrap_or_else(crate::solver::default_workers)
    }

    /// Boundary specification including the mask file, if any.
    pub fn boundary_spec(&self) -> Result<BoundarySpec> {
        let mut spec = match self.boundary {
            BoundaryPreset::Periodic => BoundarySpec::periodic(),
            BoundaryPreset::Closed => BoundarySpec::closed_box(self.lattice),
            BoundaryPreset::Lid => BoundarySpec::lid_driven(self.lattice, self.u_lid),
            BoundaryPreset::Channel => BoundarySpec::channel(self.u_lid),
        };
        if let Some(path) = &self.mask {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            spec = spec.with_solid(crate::boundary::parse_mask(&text, self.dims)?);
        }
        spec.validate(self.lattice, self.dims)?;
        Ok(spec)
    }
}
