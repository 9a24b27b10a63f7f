//! The example configurations shipped in `configs/`.

use std::path::PathBuf;

use tslb::cases::{execute, preset, CAVITY_PRESET, IMPACT_PRESET, OSCILLATION_PRESET};
use tslb::config::{CaseKind, SimulationConfig};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn every_example_parses_and_round_trips() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            let cfg = SimulationConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(SimulationConfig::parse(&cfg.to_text()).unwrap(), cfg);
            cfg.boundary_spec().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn presets_match_example_files() {
    for (name, file) in [
        ("cavity", "cavity_re100.cfg"),
        ("droplet-oscillation", "droplet_oscillation.cfg"),
        ("head-on-impact", "head_on_impact.cfg"),
    ] {
        let p = preset(name).unwrap();
        let f = SimulationConfig::load(configs_dir().join(file)).unwrap();
        assert_eq!((p.lattice, p.dims, p.relaxation, p.case), (f.lattice, f.dims, f.relaxation, f.case), "{name}");
        assert_eq!((p.color, p.radius, p.steps), (f.color, f.radius, f.steps), "{name}");
    }
    assert!(preset("laplace").is_err());
    for text in [CAVITY_PRESET, OSCILLATION_PRESET, IMPACT_PRESET] {
        assert!(SimulationConfig::parse(text).is_ok());
    }
}

#[test]
fn cavity_reynolds_number() {
    let cfg = preset("cavity").unwrap();
    assert!((cfg.reynolds().unwrap() - 100.0).abs() < 1e-9);
    let impact = preset("head-on-impact").unwrap();
    let we = impact.rho0 * (2.0 * impact.impact_speed).powi(2) * 2.0 * impact.radius / impact.color.unwrap().sigma;
    assert!((we - 9.5).abs() < 0.1, "{we}");
}

#[test]
fn obstacle_channel_runs_from_its_mask() {
    let mut cfg = SimulationConfig::load(configs_dir().join("obstacle_channel.cfg")).unwrap();
    assert_eq!(cfg.case, CaseKind::Custom);
    cfg.steps = 200;
    let result = execute(&cfg, None).unwrap();
    assert!(result.summary.mass_drift < 1e-13, "{}", result.summary.mass_drift);
    // the force pushes fluid along +x past the obstacle
    let px = result.series.column("px").unwrap();
    assert!(px.last().unwrap() > &0.0);
}
