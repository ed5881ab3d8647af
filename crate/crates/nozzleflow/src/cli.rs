//! Subcommand dispatch behind the thin binary. Every command reads one
//! config file, writes its artifacts into the configured output directory,
//! and reports through the process exit code: 0 when all gates pass, 1 for
//! config problems, 2 for inadmissible geometry, 3 for numeric failures, and
//! 4 when a verification gate fails.

use crate::config::{parse_config, parse_lab_scenario, LabScenario, RunConfig};
use crate::entropy::{
    dissipation_integral, entropy_residual, BumpTestFunction, ChiFunction, PairFamily,
    WeakEntropySpec, Window, XiEntropySpec,
};
use crate::error::{Error, Result};
use crate::gas::FlowMode;
use crate::geometry::check_admissible;
use crate::maxprinciple::{
    synthetic_preset, verify_system, verify_trace, MaxPrincipleVerdict, PASSING_PRESETS,
    VIOLATOR_PRESETS,
};
use crate::monitor::build_controls;
use crate::report::{
    CsvSnapshotSink, DissipationEntry, InvariantRegionSummary, Report, ResidualEntry,
};
use crate::solver::{build_initial, prepare_initial, run_with, RunOptions, SolutionTrace};
use crate::sweep::{epsilon_sweep, worker_pool};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CheckGeometry,
    Run,
    EntropyAudit,
    MaxPrinciple,
    Sweep,
}

impl Command {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "check-geometry" => Command::CheckGeometry,
            "run" => Command::Run,
            "entropy-audit" => Command::EntropyAudit,
            "max-principle" => Command::MaxPrinciple,
            "sweep" => Command::Sweep,
            other => {
                return Err(Error::Config(format!(
                    "unknown command '{other}' (check-geometry, run, entropy-audit, \
                     max-principle, sweep)"
                )))
            }
        })
    }
}

/// Parse, dispatch, translate the outcome into an exit code.
pub fn execute(cmd: Command, config_path: &Path) -> i32 {
    match parse_config(config_path).and_then(|cfg| dispatch(cmd, &cfg)) {
        Ok(report) => {
            println!("verdict: {}", report.verdict);
            if report.passed() {
                0
            } else {
                4
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: Command, cfg: &RunConfig) -> Result<Report> {
    let out_dir = PathBuf::from(&cfg.outputs.directory);
    fs::create_dir_all(&out_dir)?;
    let echo = config_echo(cfg)?;
    fs::write(
        out_dir.join("effective_config.json"),
        serde_json::to_string_pretty(&echo)
            .map_err(|e| Error::invalid(format!("config echo: {e}")))?
            + "\n",
    )?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    match cmd {
        Command::CheckGeometry => check_geometry(cfg, &out_dir, echo),
        Command::Run => run_command(cfg, &out_dir, echo),
        Command::EntropyAudit => entropy_audit(cfg, &out_dir, echo),
        Command::MaxPrinciple => max_principle(cfg, &out_dir, echo),
        Command::Sweep => sweep_command(cfg, &out_dir, echo),
    }
}

fn config_echo(cfg: &RunConfig) -> Result<serde_json::Value> {
    serde_json::to_value(cfg).map_err(|e| Error::invalid(format!("config echo: {e}")))
}

fn check_geometry(cfg: &RunConfig, out_dir: &Path, echo: serde_json::Value) -> Result<Report> {
    let gas = cfg.gas()?;
    let geom = cfg.build_geometry()?;
    let adm = check_admissible(&geom, &gas);
    let artifact = serde_json::json!({
        "config": echo,
        "version": crate::VERSION,
        "admissibility": adm,
    });
    fs::write(
        out_dir.join("admissibility.json"),
        serde_json::to_string_pretty(&artifact)
            .map_err(|e| Error::invalid(format!("admissibility artifact: {e}")))?
            + "\n",
    )?;
    println!(
        "geometry: ||a0||_1 = {:.6}, threshold = {:.6}, admissible = {}",
        adm.a0_l1, adm.threshold, adm.admissible
    );
    if !adm.admissible && !cfg.controls.admissibility_override {
        return Err(Error::Admissibility(format!(
            "||a0||_1 = {:.6} exceeds the threshold {:.6}",
            adm.a0_l1, adm.threshold
        )));
    }
    let mut report = Report::new(echo);
    report.gate(adm.admissible);
    Ok(report)
}

/// Shared run pipeline: build everything from the config and integrate,
/// optionally streaming CSV snapshots.
fn integrate(cfg: &RunConfig, csv_path: Option<&Path>) -> Result<SolutionTrace> {
    let gas = cfg.gas()?;
    let geom = cfg.build_geometry()?;
    let grid = cfg.grid()?;
    let raw = build_initial(&cfg.initial.build()?, grid)?;
    let scfg = cfg.solver_config();
    let init = prepare_initial(&raw, &gas, &scfg, None, None)?;
    let controls = build_controls(&gas, &geom, &init, scfg.epsilon, cfg.controls.c0_margin)?;
    let mut sink;
    let mut opts = RunOptions {
        admissibility_override: cfg.controls.admissibility_override,
        forcing: None,
        sink: None,
    };
    if let Some(path) = csv_path {
        sink = CsvSnapshotSink::new(BufWriter::new(fs::File::create(path)?));
        opts.sink = Some(&mut sink);
    }
    run_with(&init, &gas, &geom, &controls, &scfg, opts)
}

fn run_command(cfg: &RunConfig, out_dir: &Path, echo: serde_json::Value) -> Result<Report> {
    let csv_path = cfg.outputs.csv.then(|| out_dir.join("snapshots.csv"));
    let trace = integrate(cfg, csv_path.as_deref())?;
    let summary = InvariantRegionSummary::from_reports(&trace.bound_reports);
    println!(
        "run: {} steps to t = {}, max wbar = {:.3e}, min zbar = {:.3e}, min density = {:.3e}",
        trace.steps,
        trace.last().t,
        summary.max_wbar,
        summary.min_zbar,
        summary.min_density
    );
    let mut report = Report::new(echo);
    report.gate(summary.pass);
    report.invariant_region = Some(summary);
    if cfg.outputs.json {
        report.write(&out_dir.join("report.json"))?;
    }
    Ok(report)
}

fn audit_families(cfg: &RunConfig) -> Result<Vec<PairFamily>> {
    Ok(match cfg.mode {
        FlowMode::Isentropic => vec![
            PairFamily::Mechanical,
            PairFamily::Weak(WeakEntropySpec::new(
                ChiFunction::constant(),
                cfg.gamma,
                cfg.entropy.quad_nodes,
            )?),
            PairFamily::Weak(WeakEntropySpec::new(
                ChiFunction::bump(0.0, 0.5)?,
                cfg.gamma,
                cfg.entropy.quad_nodes,
            )?),
        ],
        FlowMode::Isothermal => vec![
            PairFamily::Mechanical,
            PairFamily::Xi(XiEntropySpec::new(cfg.entropy.xi)?),
        ],
    })
}

fn entropy_audit(cfg: &RunConfig, out_dir: &Path, echo: serde_json::Value) -> Result<Report> {
    let gas = cfg.gas()?;
    let geom = cfg.build_geometry()?;
    // Dissipation quadrature needs a dense snapshot lattice; tighten the
    // checkpoint quantum if the configured one is coarser.
    let mut audit_cfg = cfg.clone();
    audit_cfg.solver.snapshot_dt = cfg.solver.snapshot_dt.min(cfg.t_end / 100.0);
    let trace = integrate(&audit_cfg, None)?;

    let window = Window::with_margins(geom.x_min, geom.x_max, cfg.t_end, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.entropy.seed);
    let bumps: Vec<BumpTestFunction> = (0..cfg.entropy.n_bumps)
        .map(|_| BumpTestFunction::random(&mut rng, &window))
        .collect();
    let floor_scale = 10.0 * (cfg.solver.epsilon + trace.grid.dx());

    let mut entries = Vec::new();
    let mut all_pass = true;
    for family in audit_families(cfg)? {
        let residuals = entropy_residual(&trace, &family, &gas, &geom, &bumps)?;
        for (bump, residual) in bumps.iter().zip(residuals) {
            let floor = floor_scale * bump.c1_norm();
            let pass = residual >= -floor;
            all_pass &= pass;
            entries.push(ResidualEntry {
                family: family.label(),
                bump: *bump,
                residual,
                floor,
                pass,
            });
        }
    }

    let xi_spec;
    let xi_ref = match gas.mode {
        FlowMode::Isentropic => None,
        FlowMode::Isothermal => {
            xi_spec = XiEntropySpec::new(cfg.entropy.xi)?;
            Some(&xi_spec)
        }
    };
    let dissipation = dissipation_integral(&trace, &gas, &window, xi_ref)?;
    println!(
        "entropy audit: {} residuals, worst margin = {:.3e}, dissipation = {:.6e}",
        entries.len(),
        entries
            .iter()
            .map(|e| e.residual + e.floor)
            .fold(f64::INFINITY, f64::min),
        dissipation
    );

    let mut report = Report::new(echo);
    report.gate(all_pass);
    report.entropy_residuals = Some(entries);
    report.dissipation = Some(vec![DissipationEntry {
        epsilon: cfg.solver.epsilon,
        value: dissipation,
    }]);
    if cfg.outputs.json {
        report.write(&out_dir.join("entropy_audit.json"))?;
    }
    Ok(report)
}

#[derive(Serialize)]
struct ScenarioOutcome {
    label: String,
    expect_preserved: bool,
    /// Conditions and signs both held.
    pass: bool,
    /// The lab produced a located witness or a failed condition check.
    flagged: bool,
    /// Outcome matches the expectation.
    ok: bool,
    verdict: MaxPrincipleVerdict,
}

fn lab_scenarios(cfg: &RunConfig) -> Result<Vec<LabScenario>> {
    if let Some(dir) = &cfg.max_principle.scenario_dir {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::Config(format!("no scenario files in {dir}")));
        }
        paths.iter().map(|p| parse_lab_scenario(p)).collect()
    } else {
        cfg.max_principle
            .presets
            .iter()
            .map(|name| {
                let expect_preserved = if PASSING_PRESETS.contains(&name.as_str()) {
                    true
                } else if VIOLATOR_PRESETS.contains(&name.as_str()) {
                    false
                } else {
                    return Err(Error::Config(format!("unknown lab preset '{name}'")));
                };
                Ok(LabScenario::Synthetic {
                    name: name.clone(),
                    expect_preserved,
                })
            })
            .collect()
    }
}

fn run_lab_scenario(scenario: &LabScenario) -> Result<ScenarioOutcome> {
    let expect = scenario.expect_preserved();
    let verdict = match scenario {
        LabScenario::Synthetic { name, .. } => {
            let case = synthetic_preset(name)?;
            verify_system(
                &case.system,
                &case.grid,
                &case.p0,
                &case.q0,
                case.t_end,
                None,
            )?
        }
        LabScenario::Flow {
            config, lab_cells, ..
        } => {
            let gas = config.gas()?;
            let geom = config.build_geometry()?;
            let grid = config.grid()?;
            let raw = build_initial(&config.initial.build()?, grid)?;
            let scfg = config.solver_config();
            let init = prepare_initial(&raw, &gas, &scfg, None, None)?;
            let controls =
                build_controls(&gas, &geom, &init, scfg.epsilon, config.controls.c0_margin)?;
            let trace = run_with(
                &init,
                &gas,
                &geom,
                &controls,
                &scfg,
                RunOptions {
                    admissibility_override: config.controls.admissibility_override,
                    ..RunOptions::default()
                },
            )?;
            verify_trace(&trace, &gas, &controls, *lab_cells)?
        }
    };
    let flagged = verdict.signs.first_violation.is_some() || !verdict.conditions.pass;
    let ok = if expect { verdict.pass } else { flagged && !verdict.pass };
    Ok(ScenarioOutcome {
        label: scenario.label(),
        expect_preserved: expect,
        pass: verdict.pass,
        flagged,
        ok,
        verdict,
    })
}

fn max_principle(cfg: &RunConfig, out_dir: &Path, echo: serde_json::Value) -> Result<Report> {
    let scenarios = lab_scenarios(cfg)?;
    let pool = worker_pool()?;
    let outcomes: Result<Vec<ScenarioOutcome>> =
        pool.install(|| scenarios.par_iter().map(run_lab_scenario).collect());
    let outcomes = outcomes?;
    let all_ok = outcomes.iter().all(|o| o.ok);
    for o in &outcomes {
        println!(
            "lab: {} expected {} -> pass = {}, flagged = {}, ok = {}",
            o.label,
            if o.expect_preserved {
                "preserved"
            } else {
                "violated"
            },
            o.pass,
            o.flagged,
            o.ok
        );
    }
    let mut report = Report::new(echo);
    report.gate(all_ok);
    report.max_principle = Some(serde_json::json!({
        "scenarios": outcomes,
        "all_ok": all_ok,
    }));
    if cfg.outputs.json {
        report.write(&out_dir.join("max_principle.json"))?;
    }
    Ok(report)
}

fn sweep_command(cfg: &RunConfig, out_dir: &Path, echo: serde_json::Value) -> Result<Report> {
    let scenario = cfg.sweep_scenario()?;
    let sweep_cfg = cfg.sweep_config();
    let sweep = epsilon_sweep(&scenario, &sweep_cfg)?;
    println!(
        "sweep: distances {:?}, ratios {:?}, verdict {}",
        sweep.distances_l1, sweep.ratios, sweep.verdict
    );
    let mut report = Report::new(echo);
    report.gate(sweep.converging() && sweep.bounds.iter().all(|b| b.monitors_ok));
    report.dissipation = Some(
        sweep
            .epsilons
            .iter()
            .zip(&sweep.dissipation)
            .map(|(&epsilon, &value)| DissipationEntry { epsilon, value })
            .collect(),
    );
    report.sweep = Some(sweep);
    if cfg.outputs.json {
        report.write(&out_dir.join("sweep.json"))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn tmp_config(dir: &Path, body: &str) -> RunConfig {
        let body = format!(
            "{body}\n[outputs]\ndirectory = \"{}\"\n",
            dir.display().to_string().replace('\\', "/")
        );
        parse_config_str(&body).unwrap()
    }

    #[test]
    fn command_names_parse_and_reject() {
        assert!(Command::parse("check-geometry").is_ok());
        assert!(Command::parse("run").is_ok());
        assert!(Command::parse("entropy-audit").is_ok());
        assert!(Command::parse("max-principle").is_ok());
        assert!(Command::parse("sweep").is_ok());
        assert!(Command::parse("explode").is_err());
    }

    #[test]
    fn check_geometry_writes_the_admissibility_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tmp_config(
            dir.path(),
            "mode = \"isentropic\"\ngamma = 2.0\nt_end = 0.5\n[geometry]\na0_share = 0.8\n",
        );
        let report = dispatch(Command::CheckGeometry, &cfg).unwrap();
        assert!(report.passed());
        let text = fs::read_to_string(dir.path().join("admissibility.json")).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["admissibility"]["admissible"], true);
        assert!(dir.path().join("effective_config.json").exists());
    }

    #[test]
    fn inadmissible_geometry_exits_through_the_admissibility_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tmp_config(
            dir.path(),
            "mode = \"isentropic\"\ngamma = 2.0\nt_end = 0.5\n[geometry]\na0_share = 1.4\n",
        );
        let err = dispatch(Command::CheckGeometry, &cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        // The artifact is still written for inspection.
        assert!(dir.path().join("admissibility.json").exists());
    }

    #[test]
    fn run_command_emits_csv_and_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tmp_config(
            dir.path(),
            "mode = \"isentropic\"\ngamma = 2.0\nt_end = 0.2\n\
             [geometry]\na0_share = 0.8\n\
             [solver]\nn_cells = 129\nsnapshot_dt = 0.05\n\
             [initial]\npreset = \"bump\"\namplitude = 0.5\n",
        );
        let report = dispatch(Command::Run, &cfg).unwrap();
        assert!(report.passed());
        let csv = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
        assert!(csv.starts_with("t,x,density,momentum,w,z,phi,psi\n"));
        // 5 snapshots (t = 0 included), one row per node each.
        assert_eq!(csv.lines().count(), 1 + 5 * 129);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(json["verdict"], "pass");
        assert_eq!(json["invariant_region"]["pass"], true);
        assert!(json["sweep"].is_null());
    }

    #[test]
    fn preset_corpus_runs_through_the_lab() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tmp_config(
            dir.path(),
            "mode = \"isentropic\"\ngamma = 2.0\nt_end = 0.5\n\
             [max_principle]\npresets = [\"heat\", \"push-up\"]\n",
        );
        let report = dispatch(Command::MaxPrinciple, &cfg).unwrap();
        assert!(report.passed());
        let json: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(dir.path().join("max_principle.json")).unwrap(),
        )
        .unwrap();
        let scenarios = json["max_principle"]["scenarios"].as_array().unwrap();
        assert_eq!(scenarios.len(), 2);
        assert_eq!(scenarios[0]["label"], "heat");
        assert_eq!(scenarios[0]["ok"], true);
        assert_eq!(scenarios[1]["ok"], true);
        assert_eq!(scenarios[1]["pass"], false);
    }

    #[test]
    fn scenario_directory_drives_the_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let scn_dir = dir.path().join("scenarios");
        fs::create_dir_all(&scn_dir).unwrap();
        fs::write(
            scn_dir.join("a_heat.toml"),
            "kind = \"synthetic\"\npreset = \"heat\"\nexpect = \"preserved\"\n",
        )
        .unwrap();
        fs::write(
            scn_dir.join("b_pull.toml"),
            "kind = \"synthetic\"\npreset = \"pull-down\"\nexpect = \"violated\"\n",
        )
        .unwrap();
        let cfg = tmp_config(
            dir.path(),
            &format!(
                "mode = \"isentropic\"\ngamma = 2.0\nt_end = 0.5\n\
                 [max_principle]\nscenario_dir = \"{}\"\n",
                scn_dir.display().to_string().replace('\\', "/")
            ),
        );
        let report = dispatch(Command::MaxPrinciple, &cfg).unwrap();
        assert!(report.passed());
    }
}
