//! Structured-text run configuration: "key = value" lines under [section]
//! headers. A minimal file needs only `mode`, `gamma`, and `t_end`; every
//! other knob has a documented default. Parsing is strict about unknown keys
//! so corpus files stay diffable and typo-proof, and validation errors carry
//! the offending line where the format provides one.

use crate::error::{Error, Result};
use crate::gas::{FlowMode, GasModel};
use crate::geometry::{
    admissibility_threshold, fit_to_a0_l1, read_area_table, GeometrySpec, NozzleGeometry,
};
use crate::solver::{read_state_table, Boundary, Grid, InitialPreset, SolverConfig};
use crate::sweep::{SweepConfig, SweepScenario};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<String>,
    gamma: Option<f64>,
    t_end: Option<f64>,
    geometry: Option<RawGeometry>,
    initial: Option<RawInitial>,
    solver: Option<RawSolver>,
    controls: Option<RawControls>,
    outputs: Option<RawOutputs>,
    entropy: Option<RawEntropy>,
    sweep: Option<RawSweep>,
    max_principle: Option<RawMaxPrinciple>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    shape: Option<String>,
    x_min: Option<f64>,
    x_max: Option<f64>,
    area_inf: Option<f64>,
    depth: Option<f64>,
    width: Option<f64>,
    center: Option<f64>,
    kappa: Option<f64>,
    file: Option<String>,
    a0_share: Option<f64>,
    samples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    preset: Option<String>,
    density: Option<f64>,
    velocity: Option<f64>,
    left_density: Option<f64>,
    left_velocity: Option<f64>,
    right_density: Option<f64>,
    right_velocity: Option<f64>,
    split: Option<f64>,
    background: Option<f64>,
    amplitude: Option<f64>,
    width: Option<f64>,
    center: Option<f64>,
    file: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    epsilon: Option<f64>,
    delta: Option<f64>,
    n_cells: Option<usize>,
    cfl: Option<f64>,
    diff_safety: Option<f64>,
    snapshot_dt: Option<f64>,
    snapshot_stride: Option<usize>,
    boundary: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControls {
    c0_margin: Option<f64>,
    a0_scale: Option<f64>,
    admissibility_override: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    directory: Option<String>,
    csv: Option<bool>,
    json: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntropy {
    quad_nodes: Option<usize>,
    n_bumps: Option<usize>,
    seed: Option<u64>,
    xi: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    epsilons: Option<Vec<f64>>,
    points_per_epsilon: Option<f64>,
    min_cells: Option<usize>,
    max_cells: Option<usize>,
    ratio_bound: Option<f64>,
    t_end: Option<f64>,
    snapshot_dt: Option<f64>,
    margin: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaxPrinciple {
    scenario_dir: Option<String>,
    presets: Option<Vec<String>>,
    lab_cells: Option<usize>,
}

/// Fully resolved geometry block.
#[derive(Debug, Clone, Serialize)]
pub struct GeometrySection {
    pub shape: String,
    pub x_min: f64,
    pub x_max: f64,
    pub area_inf: f64,
    pub depth: f64,
    pub width: f64,
    pub center: f64,
    pub kappa: f64,
    pub file: Option<String>,
    /// When set, the damping envelope is rescaled so its L1 norm lands on
    /// this share of the mode's admissibility threshold.
    pub a0_share: Option<f64>,
    pub samples: usize,
}

impl GeometrySection {
    pub fn build(&self, gas: &GasModel, a0_scale: f64) -> Result<NozzleGeometry> {
        let spec = match self.shape.as_str() {
            "laval-bump" => GeometrySpec::LavalBump {
                area_inf: self.area_inf,
                depth: self.depth,
                width: self.width,
                center: self.center,
            },
            "exp-monotone" => GeometrySpec::ExpMonotone {
                kappa: self.kappa,
                center: self.center,
                width: self.width,
            },
            "tabulated" => {
                let file = self.file.as_ref().ok_or_else(|| {
                    Error::Config("geometry.shape = \"tabulated\" needs geometry.file".into())
                })?;
                read_area_table(Path::new(file))?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown geometry.shape '{other}' (laval-bump, exp-monotone, tabulated)"
                )))
            }
        };
        match self.a0_share {
            Some(share) => fit_to_a0_l1(
                spec,
                self.x_min,
                self.x_max,
                self.samples,
                a0_scale,
                share * admissibility_threshold(gas),
            ),
            None => NozzleGeometry::build_with(spec, self.x_min, self.x_max, self.samples, a0_scale),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialSection {
    pub preset: String,
    pub density: f64,
    pub velocity: f64,
    pub left_density: f64,
    pub left_velocity: f64,
    pub right_density: f64,
    pub right_velocity: f64,
    pub split: f64,
    pub background: f64,
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    pub file: Option<String>,
}

impl InitialSection {
    pub fn build(&self) -> Result<InitialPreset> {
        Ok(match self.preset.as_str() {
            "constant" => InitialPreset::Constant {
                density: self.density,
                velocity: self.velocity,
            },
            "riemann-step" => InitialPreset::RiemannStep {
                left_density: self.left_density,
                left_velocity: self.left_velocity,
                right_density: self.right_density,
                right_velocity: self.right_velocity,
                split: self.split,
            },
            "bump" => InitialPreset::Bump {
                background: self.background,
                amplitude: self.amplitude,
                width: self.width,
                center: self.center,
                velocity: self.velocity,
            },
            "tabulated" => {
                let file = self.file.as_ref().ok_or_else(|| {
                    Error::Config("initial.preset = \"tabulated\" needs initial.file".into())
                })?;
                read_state_table(Path::new(file))?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown initial.preset '{other}' (constant, riemann-step, bump, tabulated)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSection {
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub n_cells: usize,
    pub cfl: f64,
    pub diff_safety: f64,
    pub snapshot_dt: f64,
    pub snapshot_stride: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlsSection {
    pub c0_margin: f64,
    pub a0_scale: f64,
    pub admissibility_override: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputsSection {
    pub directory: String,
    pub csv: bool,
    pub json: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropySection {
    pub quad_nodes: usize,
    pub n_bumps: usize,
    pub seed: u64,
    pub xi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    pub points_per_epsilon: f64,
    pub min_cells: usize,
    pub max_cells: usize,
    pub ratio_bound: f64,
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxPrincipleSection {
    pub scenario_dir: Option<String>,
    pub presets: Vec<String>,
    pub lab_cells: usize,
}

/// The effective configuration after defaults and validation. Serialized
/// verbatim into every JSON report, so runs are reproducible from their own
/// output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub mode: FlowMode,
    pub gamma: f64,
    pub t_end: f64,
    pub geometry: GeometrySection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub controls: ControlsSection,
    pub outputs: OutputsSection,
    pub entropy: EntropySection,
    pub sweep: SweepSection,
    pub max_principle: MaxPrincipleSection,
    pub warnings: Vec<String>,
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<RunConfig> {
    let mut warnings = Vec::new();

    let mode = match raw.mode.as_deref() {
        Some("isentropic") => FlowMode::Isentropic,
        Some("isothermal") => FlowMode::Isothermal,
        Some(other) => {
            return Err(Error::Config(format!(
                "mode must be \"isentropic\" or \"isothermal\", got \"{other}\""
            )))
        }
        None => return Err(Error::Config("missing required key: mode".into())),
    };
    let gamma = match (mode, raw.gamma) {
        (FlowMode::Isentropic, Some(g)) => {
            if !(g > 1.0 && g < 3.0) {
                return Err(Error::Config(format!(
                    "isentropic gamma must lie in the open interval (1, 3), got {g}"
                )));
            }
            g
        }
        (FlowMode::Isentropic, None) => {
            return Err(Error::Config(
                "isentropic mode requires an explicit gamma in (1, 3)".into(),
            ))
        }
        (FlowMode::Isothermal, Some(g)) => {
            if (g - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "isothermal mode means gamma = 1, got {g}"
                )));
            }
            1.0
        }
        (FlowMode::Isothermal, None) => 1.0,
    };
    let t_end = raw
        .t_end
        .ok_or_else(|| Error::Config("missing required key: t_end".into()))?;
    if !(t_end > 0.0) {
        return Err(Error::Config("t_end must be positive".into()));
    }

    let g = raw.geometry.unwrap_or(RawGeometry {
        shape: None,
        x_min: None,
        x_max: None,
        area_inf: None,
        depth: None,
        width: None,
        center: None,
        kappa: None,
        file: None,
        a0_share: None,
        samples: None,
    });
    let shape = g.shape.unwrap_or_else(|| "laval-bump".into());
    let geometry = GeometrySection {
        x_min: g.x_min.unwrap_or(-16.0),
        x_max: g.x_max.unwrap_or(16.0),
        area_inf: g.area_inf.unwrap_or(2.0),
        depth: g.depth.unwrap_or(0.5),
        width: g.width.unwrap_or(1.0),
        center: g.center.unwrap_or(0.0),
        kappa: g.kappa.unwrap_or(0.4),
        file: g.file,
        a0_share: g.a0_share,
        samples: g.samples.unwrap_or(4096),
        shape,
    };
    if let Some(share) = geometry.a0_share {
        if !(share > 0.0) {
            return Err(Error::Config("geometry.a0_share must be positive".into()));
        }
        if share > 1.0 + 1e-12 {
            warnings.push(format!(
                "geometry.a0_share = {share} exceeds 1: the scaled geometry is inadmissible"
            ));
        }
    }

    let i = raw.initial.unwrap_or(RawInitial {
        preset: None,
        density: None,
        velocity: None,
        left_density: None,
        left_velocity: None,
        right_density: None,
        right_velocity: None,
        split: None,
        background: None,
        amplitude: None,
        width: None,
        center: None,
        file: None,
    });
    let initial = InitialSection {
        preset: i.preset.unwrap_or_else(|| "bump".into()),
        density: i.density.unwrap_or(1.0),
        velocity: i.velocity.unwrap_or(0.0),
        left_density: i.left_density.unwrap_or(1.5),
        left_velocity: i.left_velocity.unwrap_or(0.0),
        right_density: i.right_density.unwrap_or(1.0),
        right_velocity: i.right_velocity.unwrap_or(0.0),
        split: i.split.unwrap_or(0.0),
        background: i.background.unwrap_or(1.0),
        amplitude: i.amplitude.unwrap_or(1.0),
        width: i.width.unwrap_or(2.0),
        center: i.center.unwrap_or(0.0),
        file: i.file,
    };
    initial.build()?;

    let s = raw.solver.unwrap_or(RawSolver {
        epsilon: None,
        delta: None,
        n_cells: None,
        cfl: None,
        diff_safety: None,
        snapshot_dt: None,
        snapshot_stride: None,
        boundary: None,
    });
    let epsilon = s.epsilon.unwrap_or(0.05);
    if mode == FlowMode::Isentropic && s.delta.is_some() {
        return Err(Error::Config(
            "solver.delta only applies to isothermal mode".into(),
        ));
    }
    if let Some(delta) = s.delta {
        if !(delta > 0.0) {
            return Err(Error::Config("solver.delta must be positive".into()));
        }
        let cubed = epsilon * epsilon * epsilon;
        if (delta - cubed).abs() > 1e-12 * cubed.max(delta) {
            warnings.push(format!(
                "solver.delta = {delta} deviates from the default epsilon^3 = {cubed}"
            ));
        }
    }
    let boundary = match s.boundary.as_deref() {
        None | Some("far-field-dirichlet") => Boundary::FarFieldDirichlet,
        Some("zero-gradient") => Boundary::ZeroGradient,
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown solver.boundary '{other}' (far-field-dirichlet, zero-gradient)"
            )))
        }
    };
    let solver = SolverSection {
        epsilon,
        delta: s.delta,
        n_cells: s.n_cells.unwrap_or(1024),
        cfl: s.cfl.unwrap_or(0.5),
        diff_safety: s.diff_safety.unwrap_or(0.5),
        snapshot_dt: s.snapshot_dt.unwrap_or(t_end / 20.0),
        snapshot_stride: s.snapshot_stride.unwrap_or(1),
        boundary,
    };

    let c = raw.controls.unwrap_or(RawControls {
        c0_margin: None,
        a0_scale: None,
        admissibility_override: None,
    });
    let controls = ControlsSection {
        c0_margin: c.c0_margin.unwrap_or(1e-3),
        a0_scale: c.a0_scale.unwrap_or(1.0),
        admissibility_override: c.admissibility_override.unwrap_or(false),
    };
    if !(controls.c0_margin >= 0.0) {
        return Err(Error::Config("controls.c0_margin must be nonnegative".into()));
    }
    if !(controls.a0_scale >= 1.0) {
        return Err(Error::Config(
            "controls.a0_scale must be at least 1 (the envelope must dominate |a|)".into(),
        ));
    }

    let o = raw.outputs.unwrap_or(RawOutputs {
        directory: None,
        csv: None,
        json: None,
    });
    let outputs = OutputsSection {
        directory: o.directory.unwrap_or_else(|| "out".into()),
        csv: o.csv.unwrap_or(true),
        json: o.json.unwrap_or(true),
    };

    let e = raw.entropy.unwrap_or(RawEntropy {
        quad_nodes: None,
        n_bumps: None,
        seed: None,
        xi: None,
    });
    let entropy = EntropySection {
        quad_nodes: e.quad_nodes.unwrap_or(4096),
        n_bumps: e.n_bumps.unwrap_or(20),
        seed: e.seed.unwrap_or(7),
        xi: e.xi.unwrap_or(0.5),
    };
    if !(entropy.xi > -1.0 && entropy.xi < 1.0) {
        return Err(Error::Config("entropy.xi must lie in (-1, 1)".into()));
    }

    let w = raw.sweep.unwrap_or(RawSweep {
        epsilons: None,
        points_per_epsilon: None,
        min_cells: None,
        max_cells: None,
        ratio_bound: None,
        t_end: None,
        snapshot_dt: None,
        margin: None,
    });
    let sweep_defaults = SweepConfig::default();
    let sweep_t_end = w.t_end.unwrap_or(t_end);
    let sweep = SweepSection {
        epsilons: w.epsilons.unwrap_or(sweep_defaults.epsilons),
        points_per_epsilon: w.points_per_epsilon.unwrap_or(sweep_defaults.points_per_epsilon),
        min_cells: w.min_cells.unwrap_or(sweep_defaults.min_cells),
        max_cells: w.max_cells.unwrap_or(sweep_defaults.max_cells),
        ratio_bound: w.ratio_bound.unwrap_or(sweep_defaults.ratio_bound),
        t_end: sweep_t_end,
        snapshot_dt: w.snapshot_dt.unwrap_or(sweep_t_end / 100.0),
        margin: w.margin.unwrap_or(0.1),
    };

    let m = raw.max_principle.unwrap_or(RawMaxPrinciple {
        scenario_dir: None,
        presets: None,
        lab_cells: None,
    });
    let max_principle = MaxPrincipleSection {
        scenario_dir: m.scenario_dir,
        presets: m.presets.unwrap_or_else(|| {
            crate::maxprinciple::PASSING_PRESETS
                .iter()
                .chain(crate::maxprinciple::VIOLATOR_PRESETS.iter())
                .map(|s| s.to_string())
                .collect()
        }),
        lab_cells: m.lab_cells.unwrap_or(257),
    };

    let cfg = RunConfig {
        mode,
        gamma,
        t_end,
        geometry,
        initial,
        solver,
        controls,
        outputs,
        entropy,
        sweep,
        max_principle,
        warnings,
    };
    cfg.solver_config().validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn gas(&self) -> Result<GasModel> {
        match self.mode {
            FlowMode::Isentropic => GasModel::isentropic(self.gamma),
            FlowMode::Isothermal => Ok(GasModel::isothermal()),
        }
    }

    pub fn build_geometry(&self) -> Result<NozzleGeometry> {
        self.geometry.build(&self.gas()?, self.controls.a0_scale)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.geometry.x_min, self.geometry.x_max, self.solver.n_cells)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.solver.epsilon,
            delta: self.solver.delta,
            cfl: self.solver.cfl,
            diff_safety: self.solver.diff_safety,
            t_end: self.t_end,
            snapshot_dt: self.solver.snapshot_dt,
            snapshot_stride: self.solver.snapshot_stride,
            boundary: self.solver.boundary,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            epsilons: self.sweep.epsilons.clone(),
            points_per_epsilon: self.sweep.points_per_epsilon,
            min_cells: self.sweep.min_cells,
            max_cells: self.sweep.max_cells,
            ratio_bound: self.sweep.ratio_bound,
        }
    }

    pub fn sweep_scenario(&self) -> Result<SweepScenario> {
        let gas = self.gas()?;
        let geom = self.build_geometry()?;
        let initial = self.initial.build()?;
        let mut scenario = SweepScenario::new(gas, geom, initial, self.sweep.t_end);
        scenario.snapshot_dt = self.sweep.snapshot_dt;
        scenario.margin = self.sweep.margin;
        scenario.xi_index = self.entropy.xi;
        Ok(scenario)
    }
}

/// One max-principle corpus entry: either a named synthetic system or a full
/// flow scenario whose shifted invariants get the lab treatment.
pub enum LabScenario {
    Synthetic {
        name: String,
        expect_preserved: bool,
    },
    Flow {
        config: Box<RunConfig>,
        lab_cells: usize,
        expect_preserved: bool,
        /// Display name; file-based corpora use the file stem.
        label: Option<String>,
    },
}

impl LabScenario {
    pub fn expect_preserved(&self) -> bool {
        match self {
            LabScenario::Synthetic {
                expect_preserved, ..
            }
            | LabScenario::Flow {
                expect_preserved, ..
            } => *expect_preserved,
        }
    }

    pub fn label(&self) -> String {
        match self {
            LabScenario::Synthetic { name, .. } => name.clone(),
            LabScenario::Flow { config, label, .. } => label.clone().unwrap_or_else(|| {
                format!(
                    "flow-{}-gamma-{}",
                    match config.mode {
                        FlowMode::Isentropic => "isentropic",
                        FlowMode::Isothermal => "isothermal",
                    },
                    config.gamma
                )
            }),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawScenario {
    kind: String,
    expect: String,
    preset: Option<String>,
    lab_cells: Option<usize>,
    #[serde(flatten)]
    rest: toml::Table,
}

pub fn parse_lab_scenario(path: &Path) -> Result<LabScenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut scenario = parse_lab_scenario_str(&text)?;
    if let LabScenario::Flow { label, .. } = &mut scenario {
        if label.is_none() {
            *label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned());
        }
    }
    Ok(scenario)
}

pub fn parse_lab_scenario_str(text: &str) -> Result<LabScenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let expect_preserved = match raw.expect.as_str() {
        "preserved" => true,
        "violated" => false,
        other => {
            return Err(Error::Config(format!(
                "expect must be \"preserved\" or \"violated\", got \"{other}\""
            )))
        }
    };
    match raw.kind.as_str() {
        "synthetic" => {
            if !raw.rest.is_empty() {
                let keys: Vec<_> = raw.rest.keys().cloned().collect();
                return Err(Error::Config(format!(
                    "synthetic scenario has stray keys: {}",
                    keys.join(", ")
                )));
            }
            let name = raw
                .preset
                .ok_or_else(|| Error::Config("synthetic scenario needs a preset name".into()))?;
            Ok(LabScenario::Synthetic {
                name,
                expect_preserved,
            })
        }
        "flow" => {
            let raw_cfg: RawConfig = toml::Value::Table(raw.rest)
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
            let config = resolve(raw_cfg)?;
            Ok(LabScenario::Flow {
                lab_cells: raw.lab_cells.unwrap_or(config.max_principle.lab_cells),
                config: Box::new(config),
                expect_preserved,
                label: None,
            })
        }
        other => {
            return Err(Error::Config(format!(
                "scenario kind must be \"synthetic\" or \"flow\", got \"{other}\""
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_the_documented_defaults() {
        let cfg = parse_config_str(
            "mode = \"isentropic\"\ngamma = 2.0\nt_end = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.solver.n_cells, 1024);
        assert_eq!(cfg.solver.cfl, 0.5);
        assert_eq!(cfg.solver.epsilon, 0.05);
        assert_eq!(cfg.mode, FlowMode::Isentropic);
        assert!(cfg.warnings.is_empty());
        assert!(cfg.gas().is_ok());
        assert!(cfg.build_geometry().is_ok());
    }

    #[test]
    fn gamma_outside_the_open_interval_is_rejected_with_the_range() {
        let err = parse_config_str("mode = \"isentropic\"\ngamma = 3.5\nt_end = 1.0\n")
            .unwrap_err();
        assert!(err.to_string().contains("(1, 3)"), "{err}");
        assert_eq!(err.exit_code(), 1);
        assert!(parse_config_str("mode = \"isentropic\"\ngamma = 1.0\nt_end = 1.0\n").is_err());
    }

    #[test]
    fn isothermal_mode_pins_gamma_to_one() {
        let cfg = parse_config_str("mode = \"isothermal\"\nt_end = 1.0\n").unwrap();
        assert_eq!(cfg.gamma, 1.0);
        assert!(parse_config_str("mode = \"isothermal\"\ngamma = 1.4\nt_end = 1.0\n").is_err());
    }

    #[test]
    fn explicit_delta_off_the_cube_is_accepted_with_a_warning() {
        let cfg = parse_config_str(
            "mode = \"isothermal\"\nt_end = 1.0\n[solver]\nepsilon = 0.1\ndelta = 0.01\n",
        )
        .unwrap();
        assert_eq!(cfg.warnings.len(), 1);
        assert!(cfg.warnings[0].contains("epsilon^3"), "{}", cfg.warnings[0]);
        let cfg = parse_config_str(
            "mode = \"isothermal\"\nt_end = 1.0\n[solver]\nepsilon = 0.1\ndelta = 0.001\n",
        )
        .unwrap();
        assert!(cfg.warnings.is_empty());
    }

    #[test]
    fn unknown_keys_are_rejected_with_position_info() {
        let err = parse_config_str(
            "mode = \"isentropic\"\ngamma = 2.0\nt_end = 1.0\nturbo = true\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("turbo"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn delta_in_isentropic_mode_is_a_config_error() {
        let err = parse_config_str(
            "mode = \"isentropic\"\ngamma = 2.0\nt_end = 1.0\n[solver]\ndelta = 0.001\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("isothermal"), "{err}");
    }

    #[test]
    fn effective_config_echo_round_trips_as_json() {
        let cfg = parse_config_str(
            "mode = \"isentropic\"\ngamma = 1.5\nt_end = 2.0\n\
             [geometry]\nshape = \"laval-bump\"\na0_share = 0.8\n\
             [solver]\nn_cells = 257\n[outputs]\ndirectory = \"runs\"\n",
        )
        .unwrap();
        let echo = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echo["solver"]["n_cells"], 257);
        assert_eq!(echo["geometry"]["a0_share"], 0.8);
        assert_eq!(echo["outputs"]["directory"], "runs");
        assert_eq!(echo["mode"], "isentropic");
    }

    #[test]
    fn scenario_files_parse_both_kinds() {
        let syn = parse_lab_scenario_str(
            "kind = \"synthetic\"\npreset = \"heat\"\nexpect = \"preserved\"\n",
        )
        .unwrap();
        assert!(matches!(syn, LabScenario::Synthetic { .. }));
        assert!(syn.expect_preserved());

        let flow = parse_lab_scenario_str(
            "kind = \"flow\"\nexpect = \"preserved\"\nlab_cells = 65\n\
             mode = \"isentropic\"\ngamma = 2.0\nt_end = 0.5\n\
             [geometry]\na0_share = 0.8\n",
        )
        .unwrap();
        match flow {
            LabScenario::Flow {
                config, lab_cells, ..
            } => {
                assert_eq!(lab_cells, 65);
                assert_eq!(config.gamma, 2.0);
            }
            _ => panic!("expected a flow scenario"),
        }
    }

    #[test]
    fn scenario_with_stray_keys_or_bad_expect_fails() {
        assert!(parse_lab_scenario_str(
            "kind = \"synthetic\"\npreset = \"heat\"\nexpect = \"maybe\"\n"
        )
        .is_err());
        assert!(parse_lab_scenario_str(
            "kind = \"synthetic\"\npreset = \"heat\"\nexpect = \"preserved\"\nfoo = 1\n"
        )
        .is_err());
    }

    #[test]
    fn sweep_section_inherits_the_run_horizon() {
        let cfg = parse_config_str(
            "mode = \"isentropic\"\ngamma = 2.0\nt_end = 3.0\n[sweep]\nmargin = 0.2\n",
        )
        .unwrap();
        assert_eq!(cfg.sweep.t_end, 3.0);
        assert_eq!(cfg.sweep.margin, 0.2);
        assert_eq!(cfg.sweep.epsilons.len(), 5);
        let sc = cfg.sweep_config();
        assert_eq!(sc.ratio_bound, 0.95);
    }
}
