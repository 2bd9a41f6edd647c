//! Figure-analogue recipes. Each recipe bundles its configs, writes its CSVs
//! through [`RunOutput`] and checks the qualitative claims of its figure.

use rayon::prelude::*;
use serde_json::{json, Value};
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use crate::analysis::{self, PeakOptions, SweepConfig};
use crate::classical::{self, ClassicalParams, PhasePoint};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output::{Cell, Manifest, RunOutput};
use crate::quantum::{self, EvolutionRecord, Grid};
use crate::resonance::{self, ContextSpec, ResonanceContext, TimeScales};
use crate::units::ScaledParams;

/// Largest number of z columns written to a density CSV.
const MAX_DENSITY_COLUMNS: usize = 256;

type ConfigsFn = fn(bool) -> Result<Vec<(String, Value)>>;
type RunFn = fn(&[(String, RunConfig)], &mut RunOutput, bool) -> Result<()>;
type TrendCheck<'a> = (&'a str, &'a [TimesRow], fn(&TimeScales) -> f64, bool);

pub struct FigureRecipe {
    pub name: &'static str,
    pub description: &'static str,
    configs: ConfigsFn,
    run: RunFn,
}

impl FigureRecipe {
    /// The bundled configs, one per panel, loaded and validated.
    pub fn configs(&self, full: bool) -> Result<Vec<(String, RunConfig)>> {
        (self.configs)(full)?.into_iter().map(|(panel, v)| Ok((panel, RunConfig::from_value(v)?))).collect()
    }
}

pub const RECIPES: &[FigureRecipe] = &[
    FigureRecipe {
        name: "fig1",
        description: "Poincare sections, V'=2 and 16, lambda = 0, 0.5, 1.5",
        configs: fig1_configs,
        run: fig1_run,
    },
    FigureRecipe {
        name: "fig2",
        description: "analytic time scales versus lambda, weak and strong drive",
        configs: fig2_configs,
        run: fig2_run,
    },
    FigureRecipe {
        name: "fig3",
        description: "density maps, kbar=1, V'=2 undriven and driven, V'=0.3 interacting",
        configs: fig3_configs,
        run: density_run,
    },
    FigureRecipe {
        name: "fig4",
        description: "density maps, kbar=0.16, V'=0.36, undriven and lambda=3",
        configs: fig4_configs,
        run: density_run,
    },
    FigureRecipe {
        name: "fig5",
        description: "autocorrelation, V'=16, kbar=0.5, lambda=0.5: classical period and revival",
        configs: fig5_configs,
        run: fig5_run,
    },
    FigureRecipe {
        name: "fig6",
        description: "autocorrelation, V'=16, kbar=0.5, lambda=1.5: super-revival",
        configs: fig6_configs,
        run: fig6_run,
    },
];

pub fn available() -> String {
    RECIPES.iter().map(|r| r.name).collect::<Vec<_>>().join(", ")
}

pub fn find(name: &str) -> Result<&'static FigureRecipe> {
    RECIPES
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::UnknownRecipe { name: name.to_string(), available: available() })
}

/// Runs a recipe into `out_dir`. The manifest is written even when an
/// assertion fails or a panel errors; the latter is returned as the error.
pub fn run_recipe(name: &str, out_dir: &Path, full: bool) -> Result<Manifest> {
    let recipe = find(name)?;
    let configs = recipe.configs(full)?;
    let echo: Vec<Value> = configs.iter().map(|(p, c)| json!({"panel": p, "config": c.to_value()})).collect();
    let mut out =
        RunOutput::create(out_dir, &format!("recipe {name}{}", if full { " --full" } else { "" }), json!(echo))?;
    out.json("config.json", &echo)?;
    let result = (recipe.run)(&configs, &mut out, full);
    if let Err(e) = &result {
        out.assert("completed", false, e.to_string());
    }
    let manifest = out.finish()?;
    result.map(|_| manifest)
}

fn tag(x: f64) -> String {
    crate::output::fmt_f64(x)
}

/// Context with the band offset l = −⌊β⌋, the choice under which the
/// weak- and strong-drive trends of the time-scale formulas hold.
pub fn resonance_spec(params: &ScaledParams, nbar: u32) -> Result<ContextSpec> {
    let base = ContextSpec { nbar, ..ContextSpec::default() };
    let ctx = resonance::build_context(&params.with_lambda(0.0), base)?;
    Ok(ContextSpec { l: -(ctx.beta.floor() as i64), ..base })
}

fn scaled(kbar: f64, vprime: f64, lambda: f64) -> Result<ScaledParams> {
    ScaledParams::new(kbar, vprime, 0.0, lambda)
}

fn sweep_values(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

// ---------------------------------------------------------------- fig1

const FIG1_KAPPAS: [f64; 2] = [2.0, 16.0];
const FIG1_LAMBDAS: [f64; 3] = [0.0, 0.5, 1.5];

/// Steps per period keeping ω₀dt fixed: the modified-energy error of the
/// second-order map scales as (ω₀dt)⁴ with ω₀ = √(2κ).
pub fn fig1_steps(kappa: f64) -> usize {
    1000 * (kappa / 2.0).sqrt().ceil().max(1.0) as usize
}

fn fig1_configs(full: bool) -> Result<Vec<(String, Value)>> {
    let (seeds, periods) = if full { (60, 2000) } else { (24, 300) };
    let mut out = Vec::new();
    for kappa in FIG1_KAPPAS {
        let steps = fig1_steps(kappa);
        for lambda in FIG1_LAMBDAS {
            out.push((
                format!("kappa{}_lambda{}", tag(kappa), tag(lambda)),
                json!({
                    "scaled": {"kbar": 0.5, "Vprime": kappa, "lambda": lambda},
                    "classical": {"kappa": kappa, "dt": TAU / steps as f64, "periods": periods, "seeds": seeds}
                }),
            ));
        }
    }
    Ok(out)
}

/// Largest |E − E₀|/(κ/2) of the modified energy over each seed's section.
pub fn section_energy_error(
    params: &ClassicalParams,
    seeds: &[PhasePoint],
    section: &classical::PoincareSection,
) -> f64 {
    let scale = params.separatrix_energy();
    let mut worst: f64 = 0.0;
    for (id, seed) in seeds.iter().enumerate() {
        let e0 = params.shadow_energy(*seed);
        for s in section.for_seed(id) {
            worst = worst.max((params.shadow_energy(PhasePoint::new(s.z, s.p)) - e0).abs() / scale);
        }
    }
    worst
}

pub fn write_poincare(
    out: &mut RunOutput,
    name: &str,
    section: &classical::PoincareSection,
    details: Value,
) -> Result<()> {
    out.csv(
        name,
        &["seed_id", "period_index", "z", "p"],
        section.samples.iter().map(|s| vec![Cell::U(s.seed_id), Cell::U(s.period_index), Cell::F(s.z), Cell::F(s.p)]),
        details,
    )?;
    Ok(())
}

fn fig1_run(configs: &[(String, RunConfig)], out: &mut RunOutput, _full: bool) -> Result<()> {
    let mut fractions = Vec::new();
    for (panel, cfg) in configs {
        let params = cfg.classical_params()?;
        let seeds = classical::seed_line(cfg.classical.seeds);
        let periods = cfg.classical.periods;
        let section = classical::poincare(&seeds, &params, periods)?;
        let fraction = classical::libration_fraction(&seeds, &params, periods)?;
        let mut details = json!({"kappa": params.kappa, "lambda": params.lambda, "libration_fraction": fraction});
        if params.lambda == 0.0 {
            let err = section_energy_error(&params, &seeds, &section);
            details["energy_error"] = json!(err);
            out.assert(
                &format!("{panel}: energy conserved to 1e-8"),
                err < 1e-8,
                format!("max relative error {err:e}"),
            );
        }
        if params.lambda == 0.5 {
            match classical::resonance_fixed_point(&params) {
                Ok(fp) => {
                    details["fixed_point"] = json!({"z": fp.z, "p": fp.p, "trace": fp.trace, "residual": fp.residual});
                    out.assert(
                        &format!("{panel}: period-1 fixed point"),
                        fp.residual < 1e-8,
                        format!("z={} p={} trace={} residual={:e}", fp.z, fp.p, fp.trace, fp.residual),
                    );
                }
                Err(e) => out.assert(&format!("{panel}: period-1 fixed point"), false, e.to_string()),
            }
        }
        write_poincare(out, &format!("fig1_{panel}.csv"), &section, details)?;
        fractions.push((params.kappa, params.lambda, fraction));
    }
    for kappa in FIG1_KAPPAS {
        let f = |l: f64| fractions.iter().find(|x| x.0 == kappa && x.1 == l).map(|x| x.2).unwrap_or(f64::NAN);
        let (f05, f15) = (f(0.5), f(1.5));
        out.assert(
            &format!("kappa{}: libration fraction shrinks from lambda 0.5 to 1.5", tag(kappa)),
            f15 < f05,
            format!("{f05} -> {f15}"),
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- fig2

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimesRegime {
    Auto,
    Delicate,
    Robust,
    RobustHarmonic,
    Undriven,
}

/// One row of a `times` table; all times in drive phase τ.
#[derive(Debug, Clone, PartialEq)]
pub struct TimesRow {
    pub lambda: f64,
    pub q: f64,
    pub times: std::result::Result<TimeScales, String>,
}

fn times_at(ctx: &ResonanceContext, regime: TimesRegime) -> Result<TimeScales> {
    let delicate =
        || resonance::undriven_times(ctx.nbar, ctx.q0, ctx.regime).and_then(|t0| resonance::delicate_times(ctx, &t0));
    match regime {
        TimesRegime::Delicate => delicate(),
        TimesRegime::Robust => resonance::robust_times(ctx),
        TimesRegime::RobustHarmonic => resonance::robust_times_harmonic(ctx, ctx.q0, ctx.lambda),
        TimesRegime::Undriven => {
            resonance::undriven_times(ctx.nbar, ctx.q0, ctx.regime).map(|t| t.in_drive_phase(ctx.kbar))
        }
        TimesRegime::Auto if ctx.q <= resonance::DELICATE_MAX_Q => delicate(),
        TimesRegime::Auto => resonance::robust_times(ctx),
    }
}

pub fn times_table(
    params: &ScaledParams,
    spec: ContextSpec,
    regime: TimesRegime,
    lambdas: &[f64],
) -> Result<Vec<TimesRow>> {
    let base = resonance::build_context(params, spec)?;
    lambdas
        .iter()
        .map(|&l| {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidInput(format!("lambda must be non-negative, got {l}")));
            }
            let ctx = base.with_lambda(l);
            Ok(TimesRow { lambda: l, q: ctx.q, times: times_at(&ctx, regime).map_err(|e| e.to_string()) })
        })
        .collect()
}

pub const TIMES_HEADER: [&str; 6] = ["lambda", "q", "t_cl", "t_rev", "t_spr", "warnings"];

pub fn times_cells(rows: &[TimesRow]) -> Vec<Vec<Cell>> {
    rows.iter()
        .map(|r| match &r.times {
            Ok(t) => vec![
                Cell::F(r.lambda),
                Cell::F(r.q),
                Cell::F(t.t_classical),
                Cell::F(t.t_revival),
                Cell::F(t.t_super_revival),
                Cell::S(t.validity_warnings.join("; ")),
            ],
            Err(e) => vec![
                Cell::F(r.lambda),
                Cell::F(r.q),
                Cell::F(f64::NAN),
                Cell::F(f64::NAN),
                Cell::F(f64::NAN),
                Cell::S(format!("error: {e}")),
            ],
        })
        .collect()
}

/// Whether `f` of successive rows is strictly monotone in the given sense.
pub fn monotone(
    rows: &[TimesRow],
    f: impl Fn(&TimeScales) -> f64,
    increasing: bool,
) -> std::result::Result<(), String> {
    let values: Vec<f64> = rows
        .iter()
        .map(|r| r.times.as_ref().map(&f).map_err(|e| format!("lambda={}: {e}", r.lambda)))
        .collect::<std::result::Result<_, _>>()?;
    for (i, w) in values.windows(2).enumerate() {
        let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
        if !ok || !w[1].is_finite() {
            return Err(format!("lambda {} -> {}: {} -> {}", rows[i].lambda, rows[i + 1].lambda, w[0], w[1]));
        }
    }
    Ok(())
}

/// λ grids for the trend panels: q in [0.05, 1] for weak drive and
/// q in [5, 50] for strong drive, converted with λ = qβ₀.
pub fn trend_grids(params: &ScaledParams, spec: ContextSpec, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let beta0 = resonance::build_context(params, spec)?.beta0;
    Ok((sweep_values(0.05 * beta0, beta0, points), sweep_values(5.0 * beta0, 50.0 * beta0, points)))
}

fn fig2_configs(full: bool) -> Result<Vec<(String, Value)>> {
    let points = if full { 400 } else { 40 };
    // Shallow-lattice expansions need n̄ >= 2.
    [("shallow", 2.0, 2), ("deep", 16.0, 0)]
        .into_iter()
        .map(|(name, vprime, nbar)| {
            let p = scaled(0.5, vprime, 0.0)?;
            let spec = resonance_spec(&p, nbar)?;
            let (weak, strong) = trend_grids(&p, spec, points)?;
            let grid: Vec<f64> = weak.into_iter().chain(strong).collect();
            Ok((
                name.to_string(),
                json!({
                    "scaled": {"kbar": 0.5, "Vprime": vprime},
                    "resonance": spec,
                    "sweep": {"lambda_grid": grid}
                }),
            ))
        })
        .collect()
}

fn fig2_run(configs: &[(String, RunConfig)], out: &mut RunOutput, _full: bool) -> Result<()> {
    for (panel, cfg) in configs {
        let grid = cfg.sweep.as_ref().map(|s| s.lambda_grid.values()).transpose()?.unwrap_or_default();
        let beta0 = resonance::build_context(&cfg.scaled, cfg.resonance)?.beta0;
        let (weak, strong): (Vec<f64>, Vec<f64>) = grid.iter().partition(|&&l| l / beta0 <= resonance::DELICATE_MAX_Q);
        let rows_weak = times_table(&cfg.scaled, cfg.resonance, TimesRegime::Delicate, &weak)?;
        let rows_strong = times_table(&cfg.scaled, cfg.resonance, TimesRegime::Robust, &strong)?;
        let details = json!({"l": cfg.resonance.l, "unit": "drive_phase"});
        out.csv(&format!("fig2_{panel}_delicate.csv"), &TIMES_HEADER, times_cells(&rows_weak), details.clone())?;
        out.csv(&format!("fig2_{panel}_robust.csv"), &TIMES_HEADER, times_cells(&rows_strong), details)?;
        let checks: [TrendCheck; 4] = [
            ("delicate T_cl increasing", &rows_weak, |t| t.t_classical, true),
            ("delicate T_rev decreasing", &rows_weak, |t| t.t_revival, false),
            ("robust T_cl decreasing", &rows_strong, |t| t.t_classical, false),
            ("robust T_spr increasing", &rows_strong, |t| t.t_super_revival, true),
        ];
        for (name, rows, f, inc) in checks {
            let r = monotone(rows, f, inc);
            out.assert(&format!("{panel}: {name}"), r.is_ok(), r.err().unwrap_or_default());
        }

        let sweep_cfg =
            SweepConfig { params: cfg.scaled, context: cfg.resonance, simulation: None, peaks: PeakOptions::default() };
        let rows = analysis::sweep(&grid, &sweep_cfg);
        out.json(&format!("fig2_{panel}_sweep.json"), &rows)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- fig3/fig4

fn density_config(scaled_block: Value, delta_p: f64, periods: f64, with_interaction: bool) -> Value {
    let steps = 400.0;
    json!({
        "scaled": scaled_block,
        "grid": {"length": quantum::DEFAULT_LENGTH, "points": quantum::DEFAULT_POINTS},
        "run": {
            "tau_end": periods * TAU,
            "dt": TAU / steps,
            "snapshot_stride": 50,
            "with_interaction": with_interaction
        },
        "initial": {"z0": FRAC_PI_2, "p0": 0.0, "delta_p": delta_p}
    })
}

fn fig3_configs(full: bool) -> Result<Vec<(String, Value)>> {
    let periods = if full { 60.0 } else { 20.0 };
    let g = (2.0 / 0.3 - 1.0) / 4.0;
    Ok(vec![
        ("a_undriven".into(), density_config(json!({"kbar": 1.0, "Vprime": 2.0, "lambda": 0.0}), 0.5, periods, false)),
        ("b_driven".into(), density_config(json!({"kbar": 1.0, "Vprime": 2.0, "lambda": 0.2}), 0.5, periods, false)),
        (
            "c_interacting".into(),
            density_config(json!({"kbar": 1.0, "V0": 2.0, "G": g, "lambda": 0.2}), 0.5, periods, true),
        ),
    ])
}

fn fig4_configs(full: bool) -> Result<Vec<(String, Value)>> {
    let periods = if full { 80.0 } else { 30.0 };
    Ok(vec![
        (
            "a_undriven".into(),
            density_config(json!({"kbar": 0.16, "Vprime": 0.36, "lambda": 0.0}), 0.1, periods, false),
        ),
        ("b_driven".into(), density_config(json!({"kbar": 0.16, "Vprime": 0.36, "lambda": 3.0}), 0.1, periods, false)),
    ])
}

pub fn run_evolution(cfg: &RunConfig) -> Result<(Grid, EvolutionRecord)> {
    let grid = cfg.grid()?;
    let psi = quantum::init_gaussian(&grid, cfg.initial.z0, cfg.initial.p0, cfg.initial.delta_p, cfg.scaled.kbar)?;
    let rec = quantum::evolve(&grid, &psi, &cfg.scaled, &cfg.evolve_options())?;
    Ok((grid, rec))
}

/// Writes `{prefix}autocorr.csv` (tau,A2) and `{prefix}density.csv`
/// (tau,z,rho, z thinned to at most 256 columns).
pub fn write_evolution(
    out: &mut RunOutput,
    prefix: &str,
    grid: &Grid,
    rec: &EvolutionRecord,
    details: Value,
) -> Result<()> {
    let ac = quantum::autocorrelation(rec);
    let mut d = details;
    d["run"] = serde_json::to_value(&rec.meta).unwrap_or(Value::Null);
    out.csv(
        &format!("{prefix}autocorr.csv"),
        &["tau", "A2"],
        ac.tau.iter().zip(&ac.a2).map(|(t, a)| vec![Cell::F(*t), Cell::F(*a)]),
        d.clone(),
    )?;
    let map = quantum::density_map(rec, grid);
    let stride = map.z.len().div_ceil(MAX_DENSITY_COLUMNS).max(1);
    d["z_stride"] = json!(stride);
    let rows = map.times.iter().zip(&map.rho).flat_map(|(t, row)| {
        map.z.iter().zip(row).step_by(stride).map(move |(z, r)| vec![Cell::F(*t), Cell::F(*z), Cell::F(*r)])
    });
    out.csv(&format!("{prefix}density.csv"), &["tau", "z", "rho"], rows, d)?;
    Ok(())
}

/// Largest mass outside the initial well |z − z₀| < π/2 over all snapshots.
pub fn max_escaped_mass(grid: &Grid, rec: &EvolutionRecord, z0: f64) -> f64 {
    rec.densities
        .iter()
        .map(|rho| {
            grid.integrate(grid.z.iter().zip(rho).map(|(z, r)| if (z - z0).abs() >= FRAC_PI_2 { *r } else { 0.0 }))
        })
        .fold(0.0, f64::max)
}

/// Snapshot-averaged L1 distance between two density maps on one grid.
pub fn density_distance(grid: &Grid, a: &EvolutionRecord, b: &EvolutionRecord) -> f64 {
    let n = a.densities.len().min(b.densities.len());
    if n == 0 {
        return 0.0;
    }
    let total: f64 =
        (0..n).map(|i| grid.integrate(a.densities[i].iter().zip(&b.densities[i]).map(|(x, y)| (x - y).abs()))).sum();
    total / n as f64
}

fn density_run(configs: &[(String, RunConfig)], out: &mut RunOutput, _full: bool) -> Result<()> {
    let runs: Vec<(Grid, EvolutionRecord)> =
        configs.par_iter().map(|(_, c)| run_evolution(c)).collect::<Result<_>>()?;
    for ((panel, cfg), (grid, rec)) in configs.iter().zip(&runs) {
        let drift = rec.meta.rounding_drift;
        out.assert(&format!("{panel}: norm conserved"), drift.abs() < 1e-9, format!("rounding drift {drift:e}"));
        let escaped = max_escaped_mass(grid, rec, cfg.initial.z0);
        write_evolution(out, &format!("{panel}_"), grid, rec, json!({"panel": panel, "max_escaped_mass": escaped}))?;
    }
    let (ga, ra) = &runs[0];
    let escaped = max_escaped_mass(ga, ra, configs[0].1.initial.z0);
    out.assert("undriven packet tunnels to neighbouring wells", escaped > 0.05, format!("max escaped mass {escaped}"));
    let d = density_distance(ga, ra, &runs[1].1);
    out.assert("modulation changes the density pattern", d > 1e-2, format!("mean L1 distance {d}"));
    if runs.len() > 2 {
        let d = density_distance(ga, &runs[1].1, &runs[2].1);
        out.assert("interaction changes the density pattern", d > 1e-2, format!("mean L1 distance {d}"));
    }
    Ok(())
}

// ---------------------------------------------------------------- fig5/fig6

/// Analytic robust time scales (drive phase) for a config.
pub fn robust_reference(cfg: &RunConfig) -> Result<TimeScales> {
    let ctx = resonance::build_context(&cfg.scaled, cfg.resonance)?;
    resonance::robust_times(&ctx)
}

fn autocorr_config(lambda: f64, tau_end: f64) -> Result<Value> {
    let p = scaled(0.5, 16.0, lambda)?;
    let spec = resonance_spec(&p, 0)?;
    Ok(json!({
        "scaled": {"kbar": 0.5, "Vprime": 16.0, "lambda": lambda},
        "grid": {"length": quantum::DEFAULT_LENGTH, "points": quantum::DEFAULT_POINTS},
        "run": {"tau_end": tau_end, "dt": TAU / 200.0, "snapshot_stride": 200},
        "initial": {"z0": FRAC_PI_2, "p0": 0.0, "delta_p": 0.5},
        "resonance": spec
    }))
}

fn reference_for(lambda: f64) -> Result<TimeScales> {
    let p = scaled(0.5, 16.0, lambda)?;
    let ctx = resonance::build_context(&p, resonance_spec(&p, 0)?)?;
    resonance::robust_times(&ctx)
}

/// Duration covering `revivals` analytic revival times, and the super-revival
/// with margin when `with_super` is set.
fn autocorr_duration(t: &TimeScales, revivals: f64, with_super: bool) -> f64 {
    let mut end = revivals * t.t_revival.abs().max(t.t_classical.abs());
    if with_super {
        end = end.max(1.5 * t.t_super_revival).max(7.0 * t.t_revival.abs());
    }
    (end / TAU).ceil() * TAU
}

fn fig5_configs(full: bool) -> Result<Vec<(String, Value)>> {
    let t = reference_for(0.5)?;
    let end = autocorr_duration(&t, if full { 8.0 } else { 4.0 }, full);
    Ok(vec![("lambda0.5".into(), autocorr_config(0.5, end)?)])
}

fn fig6_configs(full: bool) -> Result<Vec<(String, Value)>> {
    let t = reference_for(1.5)?;
    let end = autocorr_duration(&t, 4.0, true) * if full { 2.0 } else { 1.0 };
    Ok(vec![("lambda1.5".into(), autocorr_config(1.5, end)?)])
}

/// Runs the autocorrelation panel and returns the comparison report.
fn autocorr_panel(cfg: &RunConfig, out: &mut RunOutput, name: &str) -> Result<analysis::RecurrenceReport> {
    let analytic = robust_reference(cfg)?;
    let (grid, rec) = run_evolution(cfg)?;
    let series = quantum::autocorrelation(&rec);
    let report = analysis::compare(&series, &analytic, cfg.analysis.peak_options());
    let details = json!({
        "analytic": {
            "t_classical": analytic.t_classical,
            "t_revival": analytic.t_revival,
            "t_super_revival": analytic.t_super_revival,
            "unit": "drive_phase"
        }
    });
    write_evolution(out, &format!("{name}_"), &grid, &rec, details)?;
    out.json(&format!("{name}_report.json"), &report)?;
    Ok(report)
}

fn within(out: &mut RunOutput, label: &str, err: Option<f64>, tol: f64, failures: &[String]) {
    match err {
        Some(e) => out.assert(label, e <= tol, format!("relative error {e} (tolerance {tol})")),
        None => out.assert(label, false, format!("not extracted: {}", failures.join("; "))),
    }
}

fn fig5_run(configs: &[(String, RunConfig)], out: &mut RunOutput, _full: bool) -> Result<()> {
    let (_, cfg) = &configs[0];
    let r = autocorr_panel(cfg, out, "fig5")?;
    let f = &r.diagnostics.failures;
    within(out, "T_cl within 10% of the strong-drive classical period", r.relative_errors.t_classical, 0.10, f);
    within(out, "T_rev within 10% of the strong-drive revival time", r.relative_errors.t_revival, 0.10, f);
    Ok(())
}

fn fig6_run(configs: &[(String, RunConfig)], out: &mut RunOutput, _full: bool) -> Result<()> {
    let (_, cfg) = &configs[0];
    let r = autocorr_panel(cfg, out, "fig6")?;
    within(
        out,
        "T_spr within 20% of the strong-drive super-revival time",
        r.relative_errors.t_super_revival,
        0.20,
        &r.diagnostics.failures,
    );
    Ok(())
}
