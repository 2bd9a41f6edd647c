//! JSON run configuration.
//!
//! A config names the lattice either through a `physical` block (laboratory
//! units, converted with [`crate::units::scale_setup`]) or a `scaled` block
//! (`kbar`, `Vprime` or `V0`+`G`, `lambda`). The loaded [`RunConfig`] carries
//! the derived scaled quantities and is re-validated against the invariants
//! of every module it feeds.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use crate::analysis::{PeakOptions, SimulationSpec};
use crate::classical::{ClassicalParams, DEFAULT_STEPS_PER_PERIOD};
use crate::error::{Error, Result};
use crate::quantum::{self, EvolveOptions, Grid, DEFAULT_SNAPSHOTS_PER_PERIOD};
use crate::resonance::ContextSpec;
use crate::units::{self, PhysicalSetup, ScaledParams};

const SCALED_KEYS: [&str; 5] = ["kbar", "Vprime", "V0", "G", "lambda"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledBlock {
    pub kbar: f64,
    #[serde(rename = "Vprime", default, skip_serializing_if = "Option::is_none")]
    pub vprime: Option<f64>,
    #[serde(rename = "V0", default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(rename = "G", default)]
    pub g: f64,
    #[serde(default)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub length: f64,
    pub points: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { length: quantum::DEFAULT_LENGTH, points: quantum::DEFAULT_POINTS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub tau_end: f64,
    pub dt: f64,
    /// Steps between density snapshots; defaults to 16 per drive period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
    pub with_interaction: bool,
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock { tau_end: 20.0 * TAU, dt: TAU / 200.0, snapshot_stride: None, with_interaction: false }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hints {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_classical: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_revival: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisBlock {
    pub hints: Hints,
    pub peak_count: usize,
    pub prominence: f64,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        let p = PeakOptions::default();
        AnalysisBlock { hints: Hints::default(), peak_count: p.count, prominence: p.prominence }
    }
}

impl AnalysisBlock {
    pub fn peak_options(&self) -> PeakOptions {
        PeakOptions { count: self.peak_count, prominence: self.prominence }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBlock {
    pub z0: f64,
    pub p0: f64,
    pub delta_p: f64,
}

impl Default for InitialBlock {
    fn default() -> Self {
        InitialBlock { z0: FRAC_PI_2, p0: 0.0, delta_p: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalBlock {
    /// Pendulum strength; defaults to V′.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub dt: f64,
    pub periods: usize,
    pub seeds: usize,
}

impl Default for ClassicalBlock {
    fn default() -> Self {
        ClassicalBlock { kappa: None, dt: TAU / DEFAULT_STEPS_PER_PERIOD as f64, periods: 200, seeds: 20 }
    }
}

/// λ values, either `"start:stop:steps"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaGrid {
    Range(String),
    Values(Vec<f64>),
}

impl LambdaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            LambdaGrid::Range(s) => parse_range(s),
            LambdaGrid::Values(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub lambda_grid: LambdaGrid,
    #[serde(default)]
    pub simulate: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    physical: Option<PhysicalSetup>,
    scaled: Option<ScaledBlock>,
    #[serde(default)]
    grid: GridBlock,
    #[serde(default)]
    run: RunBlock,
    #[serde(default)]
    analysis: AnalysisBlock,
    #[serde(default)]
    initial: InitialBlock,
    #[serde(default)]
    classical: ClassicalBlock,
    #[serde(default)]
    resonance: ContextSpec,
    sweep: Option<SweepBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalSetup>,
    pub scaled: ScaledParams,
    pub grid: GridBlock,
    pub run: RunBlock,
    pub analysis: AnalysisBlock,
    pub initial: InitialBlock,
    pub classical: ClassicalBlock,
    pub resonance: ContextSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    pub warnings: Vec<String>,
}

/// Parses `start:stop:steps` into `steps` evenly spaced values (both ends
/// included).
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("expected start:stop:steps, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    if out.is_empty() {
        "/".into()
    } else {
        out
    }
}

fn invalid(invariant: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| Error::Validation { invariant: invariant.into(), message: e.to_string() }
}

fn check(cond: bool, invariant: &str, message: String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation { invariant: invariant.into(), message })
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { pointer: "/".into(), message: format!("{}: {e}", path.display()) })?;
        RunConfig::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::Config { pointer: "/".into(), message: e.to_string() })?;
        RunConfig::from_value(value)
    }

    /// Loads from a JSON value. Scaled keys given at the top level (e.g.
    /// `{"kbar":0.5,"Vprime":16,"lambda":0}`) are read as the scaled block.
    pub fn from_value(mut value: Value) -> Result<RunConfig> {
        if let Value::Object(map) = &mut value {
            if !map.contains_key("scaled") && SCALED_KEYS.iter().any(|k| map.contains_key(*k)) {
                let mut scaled = serde_json::Map::new();
                for k in SCALED_KEYS {
                    if let Some(v) = map.remove(k) {
                        scaled.insert(k.to_string(), v);
                    }
                }
                map.insert("scaled".into(), Value::Object(scaled));
            }
        }
        let raw: RawConfig = serde_path_to_error::deserialize(value)
            .map_err(|e| Error::Config { pointer: pointer(e.path()), message: e.inner().to_string() })?;
        RunConfig::validate(raw)
    }

    fn validate(raw: RawConfig) -> Result<RunConfig> {
        let mut warnings = Vec::new();
        let scaled = match (&raw.physical, &raw.scaled) {
            (Some(phys), scaled) => {
                if scaled.is_some() {
                    warnings.push("both physical and scaled blocks given; scaled block ignored".to_string());
                }
                units::scale_setup(phys).map_err(invalid("physical setup"))?
            }
            (None, Some(s)) => {
                let v0 = match (s.vprime, s.v0) {
                    (Some(vp), None) => vp * (1.0 + 4.0 * s.g),
                    (None, Some(v0)) => v0,
                    (Some(_), Some(_)) => {
                        return Err(Error::Config {
                            pointer: "/scaled".into(),
                            message: "give either Vprime or V0, not both".into(),
                        })
                    }
                    (None, None) => {
                        return Err(Error::Config { pointer: "/scaled".into(), message: "missing Vprime or V0".into() })
                    }
                };
                ScaledParams::new(s.kbar, v0, s.g, s.lambda).map_err(invalid("scaled parameters"))?
            }
            (None, None) => {
                return Err(Error::Config {
                    pointer: "/".into(),
                    message: "one of physical or scaled is required".into(),
                })
            }
        };

        let grid = Grid::new(raw.grid.length, raw.grid.points).map_err(invalid("grid"))?;

        let run = raw.run;
        check(run.tau_end.is_finite() && run.tau_end > 0.0, "run.tau_end > 0", format!("got {}", run.tau_end))?;
        check(
            run.dt > 0.0 && run.dt <= quantum::MAX_DT * (1.0 + 1e-12),
            "0 < run.dt <= 2π/200",
            format!("got {}", run.dt),
        )?;
        check(run.snapshot_stride != Some(0), "run.snapshot_stride >= 1", "got 0".into())?;

        let init = raw.initial;
        quantum::init_gaussian(&grid, init.z0, init.p0, init.delta_p, scaled.kbar).map_err(invalid("initial state"))?;

        let a = raw.analysis;
        check(a.peak_count >= 3, "analysis.peak_count >= 3", format!("got {}", a.peak_count))?;
        check(
            a.prominence > 0.0 && a.prominence < 1.0,
            "0 < analysis.prominence < 1",
            format!("got {}", a.prominence),
        )?;
        for (name, h) in [("t_classical", a.hints.t_classical), ("t_revival", a.hints.t_revival)] {
            if let Some(h) = h {
                check(h.is_finite() && h > 0.0, "analysis hints > 0", format!("{name} = {h}"))?;
            }
        }

        let c = raw.classical;
        ClassicalParams { kappa: c.kappa.unwrap_or(scaled.effective_depth), lambda: scaled.lambda, dt: c.dt }
            .steps_per_period()
            .map_err(invalid("classical.dt divides 2π"))?;
        check(c.periods >= 1 && c.seeds >= 1, "classical.periods, classical.seeds >= 1", format!("{c:?}"))?;

        check(raw.resonance.resonance_number >= 1, "resonance.resonance_number >= 1", "got 0".into())?;

        if let Some(s) = &raw.sweep {
            let values = s.lambda_grid.values().map_err(invalid("sweep.lambda_grid"))?;
            check(!values.is_empty(), "sweep.lambda_grid non-empty", "no values".into())?;
            check(
                values.iter().all(|l| l.is_finite() && *l >= 0.0),
                "sweep.lambda_grid values >= 0",
                format!("{values:?}"),
            )?;
        }

        Ok(RunConfig {
            physical: raw.physical,
            scaled,
            grid: raw.grid,
            run,
            analysis: a,
            initial: init,
            classical: c,
            resonance: raw.resonance,
            sweep: raw.sweep,
            warnings,
        })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.length, self.grid.points)
    }

    pub fn classical_params(&self) -> Result<ClassicalParams> {
        let p = ClassicalParams {
            kappa: self.classical.kappa.unwrap_or(self.scaled.effective_depth),
            lambda: self.scaled.lambda,
            dt: self.classical.dt,
        };
        p.steps_per_period().map_err(invalid("classical.dt divides 2π"))?;
        Ok(p)
    }

    /// Quantum steps per drive period implied by `run.dt` (rounded).
    pub fn steps_per_period(&self) -> usize {
        (TAU / self.run.dt).round().max(1.0) as usize
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        let stride =
            self.run.snapshot_stride.unwrap_or_else(|| (self.steps_per_period() / DEFAULT_SNAPSHOTS_PER_PERIOD).max(1));
        EvolveOptions {
            tau_end: self.run.tau_end,
            dt: self.run.dt,
            snapshot_stride: stride,
            with_interaction: self.run.with_interaction,
        }
    }

    pub fn simulation_spec(&self) -> SimulationSpec {
        SimulationSpec {
            grid_length: self.grid.length,
            grid_points: self.grid.points,
            steps_per_period: self.steps_per_period(),
            tau_end: self.run.tau_end,
            z0: self.initial.z0,
            p0: self.initial.p0,
            delta_p: self.initial.delta_p,
            with_interaction: self.run.with_interaction,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serialises")
    }
}
